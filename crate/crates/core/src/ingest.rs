//! Parsing delimited rating files into a [`RatingsMatrix`].
//!
//! Every dataset is read as `user, item, rating[, ignored...]` lines. The
//! normalized form written by [`write_normalized`] is one
//! `user<TAB>item<TAB>rating` triple per line.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Rating, RatingScale, RatingsMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Delimiter {
    Token(String),
    /// Any run of spaces or tabs.
    Whitespace,
}

impl From<String> for Delimiter {
    fn from(s: String) -> Self {
        match s.as_str() {
            "whitespace" => Delimiter::Whitespace,
            "\\t" | "tab" => Delimiter::Token("\t".into()),
            _ => Delimiter::Token(s),
        }
    }
}

impl From<Delimiter> for String {
    fn from(d: Delimiter) -> Self {
        match d {
            Delimiter::Token(t) => t,
            Delimiter::Whitespace => "whitespace".into(),
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delimiter::Token(t) => write!(f, "{t:?}"),
            Delimiter::Whitespace => f.write_str("whitespace"),
        }
    }
}

impl Delimiter {
    fn split<'a>(&'a self, line: &'a str) -> Box<dyn Iterator<Item = &'a str> + 'a> {
        match self {
            Delimiter::Token(t) => Box::new(line.split(t.as_str())),
            Delimiter::Whitespace => Box::new(line.split_whitespace()),
        }
    }
}

fn default_malformed_fraction() -> f64 {
    0.05
}

fn default_wpcc_threshold() -> usize {
    5
}

/// Layout and rating scale of one dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub id: String,
    pub delimiter: Delimiter,
    pub user_field: usize,
    pub item_field: usize,
    pub rating_field: usize,
    pub scale: RatingScale<f64>,
    #[serde(default)]
    pub max_records: Option<usize>,
    /// Dictionary-encode ids instead of parsing them as integers.
    #[serde(default)]
    pub string_ids: bool,
    /// Parsing fails when more than this fraction of lines is malformed.
    #[serde(default = "default_malformed_fraction")]
    pub max_malformed_fraction: f64,
    /// Default significance threshold for WPCC on this dataset.
    #[serde(default = "default_wpcc_threshold")]
    pub wpcc_threshold: usize,
}

impl DatasetSpec {
    fn triple(id: &str, delimiter: Delimiter, scale: (f64, f64, f64), wpcc_threshold: usize) -> Self {
        DatasetSpec {
            id: id.into(),
            delimiter,
            user_field: 0,
            item_field: 1,
            rating_field: 2,
            scale: RatingScale {
                min: scale.0,
                max: scale.1,
                relevance_threshold: scale.2,
            },
            max_records: None,
            string_ids: false,
            max_malformed_fraction: default_malformed_fraction(),
            wpcc_threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Delimiter::Token(t) = &self.delimiter {
            if t.is_empty() {
                return Err(Error::Config("dataset delimiter must be non-empty".into()));
            }
        }
        let f = [self.user_field, self.item_field, self.rating_field];
        if f[0] == f[1] || f[0] == f[2] || f[1] == f[2] {
            return Err(Error::Config("user/item/rating field positions must be distinct".into()));
        }
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return Err(Error::Config("max_malformed_fraction must lie in [0, 1]".into()));
        }
        if self.wpcc_threshold == 0 {
            return Err(Error::Config("WPCC threshold T >= 1 violated".into()));
        }
        self.scale.validate()
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: DatasetSpec =
            toml::from_str(s).map_err(|e| Error::Config(format!("dataset spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Same dataset read from its normalized triple file.
    pub fn normalized(&self) -> Self {
        DatasetSpec {
            delimiter: Delimiter::Token("\t".into()),
            user_field: 0,
            item_field: 1,
            rating_field: 2,
            string_ids: false,
            max_records: None,
            ..self.clone()
        }
    }

    pub fn scale_as<T: Scalar>(&self) -> RatingScale<T> {
        RatingScale {
            min: T::lit(self.scale.min),
            max: T::lit(self.scale.max),
            relevance_threshold: T::lit(self.scale.relevance_threshold),
        }
    }
}

/// Layouts of the published rating files.
pub fn builtin_specs() -> Vec<DatasetSpec> {
    let tab = || Delimiter::Token("\t".into());
    let colons = || Delimiter::Token("::".into());
    vec![
        DatasetSpec::triple("ml-100k", tab(), (1.0, 5.0, 4.0), 50),
        DatasetSpec::triple("ml-1m", colons(), (1.0, 5.0, 4.0), 50),
        DatasetSpec {
            max_records: Some(1_000_000),
            ..DatasetSpec::triple("jester", Delimiter::Whitespace, (-10.0, 10.0, 5.0), 5)
        },
        DatasetSpec::triple("epinions", Delimiter::Whitespace, (1.0, 5.0, 4.0), 5),
        DatasetSpec::triple("movietweetings", colons(), (0.0, 10.0, 8.0), 5),
    ]
}

pub fn builtin_spec(id: &str) -> Option<DatasetSpec> {
    builtin_specs().into_iter().find(|s| s.id == id)
}

/// Dense integer codes for string identifiers, assigned in first-seen order from 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdDictionary {
    codes: HashMap<String, u64>,
    names: Vec<String>,
}

impl IdDictionary {
    pub fn encode(&mut self, name: &str) -> u64 {
        if let Some(&c) = self.codes.get(name) {
            return c;
        }
        let code = self.names.len() as u64;
        self.codes.insert(name.to_string(), code);
        self.names.push(name.to_string());
        code
    }

    pub fn name(&self, code: u64) -> Option<&str> {
        self.names.get(code as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// `code<TAB>original` lines.
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (code, name) in self.names.iter().enumerate() {
            writeln!(out, "{code}\t{name}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ParseOutcome<T> {
    pub matrix: RatingsMatrix<T>,
    /// Lines read, including rejected ones.
    pub lines: usize,
    pub ingested: usize,
    pub malformed: usize,
    pub out_of_scale: usize,
    /// Present when the spec asks for string ids.
    pub dictionaries: Option<(IdDictionary, IdDictionary)>,
}

impl<T> ParseOutcome<T> {
    pub fn rejected(&self) -> usize {
        self.malformed + self.out_of_scale
    }
}

enum Line<T> {
    Ok(Rating<T>),
    Malformed,
    OutOfScale,
}

struct LineParser<'a, T> {
    spec: &'a DatasetSpec,
    scale: RatingScale<T>,
    dictionaries: Option<(IdDictionary, IdDictionary)>,
}

impl<T: Scalar> LineParser<'_, T> {
    fn parse(&mut self, line: &str) -> Line<T> {
        let fields: Vec<&str> = self.spec.delimiter.split(line).collect();
        let field = |i: usize| fields.get(i).map(|f| f.trim()).filter(|f| !f.is_empty());
        let (Some(u), Some(i), Some(r)) = (
            field(self.spec.user_field),
            field(self.spec.item_field),
            field(self.spec.rating_field),
        ) else {
            return Line::Malformed;
        };
        let ids = match &mut self.dictionaries {
            Some((users, items)) => Some((users.encode(u), items.encode(i))),
            None => u.parse::<u64>().ok().zip(i.parse::<u64>().ok()),
        };
        let Some((user, item)) = ids else {
            return Line::Malformed;
        };
        let Some(value) = r.parse::<f64>().ok().filter(|v| v.is_finite()).and_then(T::from_f64)
        else {
            return Line::Malformed;
        };
        if !self.scale.contains(value) {
            return Line::OutOfScale;
        }
        Line::Ok(Rating::new(user, item, value))
    }
}

/// Streams `source` line by line; duplicates resolve to the last occurrence.
pub fn parse_ratings<T: Scalar, R: BufRead>(mut source: R, spec: &DatasetSpec) -> Result<ParseOutcome<T>> {
    spec.validate()?;
    let scale = spec.scale_as::<T>();
    let mut parser = LineParser {
        spec,
        scale,
        dictionaries: spec.string_ids.then(Default::default),
    };
    let (mut lines, mut malformed, mut out_of_scale) = (0, 0, 0);
    let mut staged = Vec::new();
    let mut buf = Vec::new();
    loop {
        if spec.max_records.is_some_and(|m| staged.len() >= m) {
            break;
        }
        buf.clear();
        if source.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        lines += 1;
        let parsed = match std::str::from_utf8(&buf) {
            Ok(s) => parser.parse(s.trim_end_matches(['\n', '\r'])),
            Err(_) => Line::Malformed,
        };
        match parsed {
            Line::Ok(r) => staged.push(r),
            Line::Malformed => malformed += 1,
            Line::OutOfScale => out_of_scale += 1,
        }
    }
    if lines > 0 && malformed as f64 / lines as f64 > spec.max_malformed_fraction {
        return Err(Error::TooManyMalformed {
            malformed,
            total: lines,
            limit: spec.max_malformed_fraction,
        });
    }
    let ingested = staged.len();
    Ok(ParseOutcome {
        matrix: RatingsMatrix::from_ratings(scale, staged)?,
        lines,
        ingested,
        malformed,
        out_of_scale,
        dictionaries: parser.dictionaries,
    })
}

/// One `user<TAB>item<TAB>rating` line per stored rating, by user then item.
pub fn write_normalized<T: Scalar, W: Write>(matrix: &RatingsMatrix<T>, mut out: W) -> Result<()> {
    for r in matrix.ratings() {
        writeln!(out, "{}\t{}\t{}", r.user, r.item, r.value)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} users, {} items, {} ratings", self.users, self.items, self.ratings)
    }
}

pub fn ingest_summary<T: Scalar>(matrix: &RatingsMatrix<T>) -> Summary {
    Summary {
        users: matrix.num_users(),
        items: matrix.num_items(),
        ratings: matrix.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ItemId, UserId};

    fn parse(text: &str, spec: &DatasetSpec) -> Result<ParseOutcome<f64>> {
        parse_ratings(text.as_bytes(), spec)
    }

    #[test]
    fn movielens_100k_line() {
        let spec = builtin_spec("ml-100k").unwrap();
        let out = parse("196\t242\t3\t881250949\n", &spec).unwrap();
        assert_eq!(out.matrix.get(UserId(196), ItemId(242)), Some(3.0));
        assert_eq!(out.ingested, 1);
    }

    #[test]
    fn movielens_1m_line() {
        let spec = builtin_spec("ml-1m").unwrap();
        let out = parse("1::1193::5::978300760\n", &spec).unwrap();
        assert_eq!(out.matrix.get(UserId(1), ItemId(1193)), Some(5.0));
    }

    #[test]
    fn empty_stream() {
        let out = parse("", &builtin_spec("ml-100k").unwrap()).unwrap();
        assert_eq!(ingest_summary(&out.matrix), Summary { users: 0, items: 0, ratings: 0 });
        assert_eq!((out.lines, out.rejected()), (0, 0));
    }

    #[test]
    fn real_valued_jester_ratings() {
        let spec = builtin_spec("jester").unwrap();
        let out = parse("1\t\t5\t\t0.219\n1 7 -9.281\n", &spec).unwrap();
        assert_eq!(out.matrix.get(UserId(1), ItemId(5)), Some(0.219));
        assert_eq!(out.matrix.get(UserId(1), ItemId(7)), Some(-9.281));
    }

    #[test]
    fn builtin_scales() {
        let s = builtin_spec("ml-100k").unwrap().scale;
        assert_eq!((s.min, s.max), (1.0, 5.0));
        let j = builtin_spec("jester").unwrap();
        assert_eq!((j.scale.min, j.scale.max, j.max_records), (-10.0, 10.0, Some(1_000_000)));
        let t = builtin_spec("movietweetings").unwrap().scale;
        assert_eq!((t.min, t.max), (0.0, 10.0));
        assert_eq!(builtin_specs().len(), 5);
        for spec in builtin_specs() {
            spec.validate().unwrap();
        }
    }

    #[test]
    fn max_records_caps_ingestion() {
        let mut spec = builtin_spec("ml-100k").unwrap();
        spec.max_records = Some(2);
        let out = parse("1\t1\t1\n1\t2\t2\n1\t3\t3\n", &spec).unwrap();
        assert_eq!(out.ingested, 2);
        assert_eq!(out.lines, 2);
        assert_eq!(out.matrix.len(), 2);
    }

    #[test]
    fn rejections_are_counted() {
        let spec = builtin_spec("ml-100k").unwrap();
        let text = (0..40).map(|i| format!("1\t{i}\t3\n")).collect::<String>() + "1\t99\t9\nbroken\n";
        let out = parse(&text, &spec).unwrap();
        assert_eq!(out.ingested, 40);
        assert_eq!(out.out_of_scale, 1);
        assert_eq!(out.malformed, 1);
        assert_eq!(out.ingested + out.rejected(), out.lines);
    }

    #[test]
    fn wrong_delimiter_fails() {
        let spec = builtin_spec("ml-1m").unwrap();
        let err = parse("196\t242\t3\n186\t302\t3\n", &spec).unwrap_err();
        assert!(matches!(err, Error::TooManyMalformed { malformed: 2, total: 2, .. }));
    }

    #[test]
    fn string_ids_are_dictionary_encoded() {
        let mut spec = builtin_spec("ml-100k").unwrap();
        spec.string_ids = true;
        let out = parse("alice\tdune\t5\nbob\tdune\t3\nalice\talien\t4\n", &spec).unwrap();
        let (users, items) = out.dictionaries.unwrap();
        assert_eq!(users.name(0), Some("alice"));
        assert_eq!(items.name(1), Some("alien"));
        assert_eq!(out.matrix.get(UserId(1), ItemId(0)), Some(3.0));
        let mut buf = Vec::new();
        users.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0\talice\n1\tbob\n");
    }

    #[test]
    fn duplicates_last_write_wins() {
        let spec = builtin_spec("ml-100k").unwrap();
        let out = parse("1\t1\t2\n1\t1\t5\n", &spec).unwrap();
        assert_eq!(out.ingested, 2);
        assert_eq!(out.matrix.len(), 1);
        assert_eq!(out.matrix.get(UserId(1), ItemId(1)), Some(5.0));
    }

    #[test]
    fn toml_spec() {
        let spec = DatasetSpec::from_toml_str(
            r#"
            id = "books"
            delimiter = ","
            user_field = 1
            item_field = 0
            rating_field = 2
            scale = { min = 1.0, max = 10.0, relevance_threshold = 8.0 }
            "#,
        )
        .unwrap();
        assert_eq!(spec.wpcc_threshold, 5);
        let out = parse("42,7,9\n", &spec).unwrap();
        assert_eq!(out.matrix.get(UserId(7), ItemId(42)), Some(9.0));

        let bad = "id='x'\ndelimiter=','\nuser_field=0\nitem_field=0\nrating_field=2\nscale={min=1.0,max=5.0,relevance_threshold=4.0}";
        assert!(DatasetSpec::from_toml_str(bad).is_err());
    }
}
