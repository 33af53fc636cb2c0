//! Command-line front end: `ingest`, `evaluate` and `recommend`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::evaluation::{sweep, write_csv, write_json_lines, NamedMeasure, SplitSpec, TopNSpec};
use crate::ingest::{builtin_spec, ingest_summary, parse_ratings, write_normalized, DatasetSpec};
use crate::model::{RatingsMatrix, UserId};
use crate::recommend::top_n;
use crate::similarity::{MeasureKind, MultiLevelConfig, SimilarityMeasure, WpccConfig};

pub const DEFAULT_KS: [usize; 7] = [5, 10, 20, 40, 60, 80, 100];
pub const DEFAULT_TOPN: [TopNSpec; 2] = [TopNSpec { k: 5, n: 5 }, TopNSpec { k: 10, n: 10 }];

#[derive(Debug, Parser)]
#[command(name = "mlcf", version, about = "Multi-level user-based collaborative filtering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a raw rating file and write it as normalized user/item/rating triples.
    Ingest(IngestArgs),
    /// Run the MAE and precision/recall sweep and write a results table.
    Evaluate(EvaluateArgs),
    /// Print the top-N recommendations for one user.
    Recommend(RecommendArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Rating file to read.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Built-in dataset id (ml-100k, ml-1m, jester, epinions, movietweetings) or a TOML spec file.
    #[arg(long, default_value = "ml-100k")]
    pub spec: String,
    /// Read the file as normalized tab-separated triples, keeping the spec's scale.
    #[arg(long)]
    pub normalized: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "ml-100k")]
    pub spec: String,
    /// Normalized output file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[value(name = "jsonl", alias = "json-lines")]
    JsonLines,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Measure, optionally with constants: `wpcc:T=5`, `multilevel:t1=40,x1=0.6,y=0.3`.
    /// Defaults to all six measures.
    #[arg(long = "measure")]
    pub measures: Vec<String>,
    /// Neighbourhood sizes for the MAE runs.
    #[arg(long = "k")]
    pub ks: Vec<usize>,
    /// Precision/recall runs as `KxN` (neighbourhood size x list length).
    #[arg(long = "topn")]
    pub topn: Vec<String>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Fraction of ratings used for training.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub user: u64,
    #[arg(long, default_value = "hybrid")]
    pub measure: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

/// Fully resolved and validated `evaluate` configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub spec: DatasetSpec,
    pub measures: Vec<NamedMeasure<f64>>,
    pub ks: Vec<usize>,
    pub topn: Vec<TopNSpec>,
    pub split: SplitSpec,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn from_args(args: &EvaluateArgs) -> Result<Self> {
        let spec = resolve_spec(&args.data)?;
        let measures = if args.measures.is_empty() {
            MeasureKind::ALL
                .into_iter()
                .map(|k| NamedMeasure::plain(SimilarityMeasure::with_defaults(k, spec.wpcc_threshold)))
                .collect()
        } else {
            args.measures
                .iter()
                .map(|m| parse_measure(m, spec.wpcc_threshold))
                .collect::<Result<Vec<_>>>()?
        };
        let ks = if args.ks.is_empty() { DEFAULT_KS.to_vec() } else { args.ks.clone() };
        let topn = if args.topn.is_empty() {
            DEFAULT_TOPN.to_vec()
        } else {
            args.topn.iter().map(|s| parse_topn(s)).collect::<Result<Vec<_>>>()?
        };
        if ks.contains(&0) {
            return Err(Error::Config("k >= 1 violated".into()));
        }
        Ok(RunConfig {
            dataset: args.data.dataset.clone(),
            spec,
            measures,
            ks,
            topn,
            split: SplitSpec::new(args.split, args.seed)?,
            out: args.out.clone(),
            format: args.format,
        })
    }
}

fn resolve_spec_str(spec: &str) -> Result<DatasetSpec> {
    if let Some(s) = builtin_spec(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!(
            "unknown dataset spec '{spec}' (not a built-in id or a file)"
        )));
    }
    DatasetSpec::from_toml_str(&std::fs::read_to_string(path)?)
}

fn resolve_spec(data: &DatasetArgs) -> Result<DatasetSpec> {
    let spec = resolve_spec_str(&data.spec)?;
    Ok(if data.normalized { spec.normalized() } else { spec })
}

fn parse_topn(s: &str) -> Result<TopNSpec> {
    let bad = || Error::Config(format!("top-N spec '{s}' is not of the form KxN"));
    let (k, n) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if k == 0 || n == 0 {
        return Err(Error::Config(format!("top-N spec '{s}': k >= 1 and n >= 1 violated")));
    }
    Ok(TopNSpec { k, n })
}

/// Parses `name[:key=value,...]`. The label is the argument as given.
pub fn parse_measure(arg: &str, wpcc_threshold: usize) -> Result<NamedMeasure<f64>> {
    let arg = arg.trim();
    let (name, params) = match arg.split_once(':') {
        Some((n, p)) => (n.trim(), p.trim()),
        None => (arg, ""),
    };
    let kind = MeasureKind::parse(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown measure '{name}' (expected pcc, wpcc, spcc, jaccard, multilevel or hybrid)"
        ))
    })?;
    let mut measure = SimilarityMeasure::<f64>::with_defaults(kind, wpcc_threshold);
    for pair in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("measure parameter '{pair}' is not key=value")))?;
        apply_param(&mut measure, key.trim(), value.trim())?;
    }
    measure.validate()?;
    Ok(NamedMeasure::new(arg, measure))
}

fn apply_param(measure: &mut SimilarityMeasure<f64>, key: &str, value: &str) -> Result<()> {
    let bad_value = || Error::Config(format!("invalid value '{value}' for measure parameter {key}"));
    let unknown = |kind: MeasureKind| Error::Config(format!("measure {kind} has no parameter '{key}'"));
    match measure {
        SimilarityMeasure::Wpcc(WpccConfig { threshold }) if key == "T" => {
            *threshold = value.parse().map_err(|_| bad_value())?;
        }
        SimilarityMeasure::MultiLevel(cfg) | SimilarityMeasure::Hybrid(cfg) => {
            set_multilevel(cfg, key, value).ok_or_else(bad_value)??;
        }
        other => return Err(unknown(other.kind())),
    }
    Ok(())
}

// Outer None: unparsable value; inner Err: unknown key.
fn set_multilevel(cfg: &mut MultiLevelConfig<f64>, key: &str, value: &str) -> Option<Result<()>> {
    let index = |prefix: char| {
        key.strip_prefix(prefix)
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|d| (1..=4).contains(d))
            .map(|d| d - 1)
    };
    if key == "y" {
        cfg.gate = value.parse().ok()?;
    } else if let Some(i) = index('t') {
        cfg.thresholds[i] = value.parse().ok()?;
    } else if let Some(i) = index('x') {
        cfg.boosts[i] = value.parse().ok()?;
    } else {
        return Some(Err(Error::Config(format!("multi-level measure has no parameter '{key}'"))));
    }
    Some(Ok(()))
}

fn load(path: &Path, spec: &DatasetSpec) -> Result<RatingsMatrix<f64>> {
    let file = File::open(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(parse_ratings(BufReader::new(file), spec)?.matrix)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn cmd_ingest(args: &IngestArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = resolve_spec_str(&args.spec)?;
    let file = File::open(&args.input)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", args.input.display())))?;
    let outcome = parse_ratings::<f64, _>(BufReader::new(file), &spec)?;

    let mut out = create(&args.out)?;
    write_normalized(&outcome.matrix, &mut out)?;
    out.flush()?;
    if let Some((users, items)) = &outcome.dictionaries {
        let side = |suffix: &str| {
            let mut p = args.out.clone().into_os_string();
            p.push(suffix);
            PathBuf::from(p)
        };
        let mut w = create(&side(".users.tsv"))?;
        users.write(&mut w)?;
        w.flush()?;
        let mut w = create(&side(".items.tsv"))?;
        items.write(&mut w)?;
        w.flush()?;
    }
    writeln!(
        stdout,
        "{}, {} rejected ({} malformed, {} out of scale)",
        ingest_summary(&outcome.matrix),
        outcome.rejected(),
        outcome.malformed,
        outcome.out_of_scale
    )?;
    Ok(())
}

pub fn cmd_evaluate(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let started = Instant::now();
    let matrix = load(&config.dataset, &config.spec)?;
    writeln!(stderr, "loaded {}: {}", config.spec.id, ingest_summary(&matrix))?;

    let reports = sweep(
        &config.spec.id,
        &matrix,
        &config.measures,
        &config.ks,
        &config.topn,
        &config.split,
    )?;
    for r in &reports {
        match r.n {
            None => writeln!(
                stderr,
                "{} k={}: {} predictions, {} fell back to the user mean",
                r.measure, r.k, r.predictions, r.fallback_count
            )?,
            Some(n) => writeln!(
                stderr,
                "{} k={} n={}: {} users, {} empty lists",
                r.measure, r.k, n, r.predictions, r.fallback_count
            )?,
        }
    }

    let write = |w: &mut dyn Write| match config.format {
        Format::Csv => write_csv(&reports, w),
        Format::JsonLines => write_json_lines(&reports, w),
    };
    match &config.out {
        Some(path) => {
            let mut out = create(path)?;
            write(&mut out)?;
            out.flush()?;
        }
        None => write(stdout)?,
    }
    writeln!(stderr, "{} reports in {:.1?}", reports.len(), started.elapsed())?;
    Ok(())
}

pub fn cmd_recommend(args: &RecommendArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = resolve_spec(&args.data)?;
    let measure = parse_measure(&args.measure, spec.wpcc_threshold)?;
    let matrix = load(&args.data.dataset, &spec)?;
    for (item, value) in top_n(&matrix, &measure.measure, UserId(args.user), args.k, args.n)? {
        writeln!(stdout, "{item}\t{value}")?;
    }
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(args, stdout),
        Command::Evaluate(args) => cmd_evaluate(&RunConfig::from_args(args)?, stdout, stderr),
        Command::Recommend(args) => cmd_recommend(args, stdout),
    }
}
