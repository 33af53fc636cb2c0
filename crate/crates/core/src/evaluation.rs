//! Hold-out splitting, MAE / precision / recall, and the experiment sweep.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ItemId, Rating, RatingsMatrix, UserId};
use crate::recommend::{
    predict_with_mean, raters_prefix, rank_items, rank_scores, similarity_row, Neighborhood,
};
use crate::scalar::Scalar;
use crate::similarity::SimilarityMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
        }
    }
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction in (0, 1) violated (got {train_fraction})"
            )));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: RatingsMatrix<T>,
    /// Held-out ratings, ordered by user then item.
    pub test: Vec<Rating<T>>,
}

/// Random hold-out split of the rating triples.
///
/// The first `floor(train_fraction · total)` triples of a seeded shuffle go
/// to train. Any test triple whose user would be missing from train is
/// swapped with a train triple taken from the back of the shuffled train
/// block whose user keeps at least one other train rating.
pub fn split<T: Scalar>(matrix: &RatingsMatrix<T>, spec: &SplitSpec) -> Result<Split<T>> {
    SplitSpec::new(spec.train_fraction, spec.seed)?;
    if matrix.is_empty() {
        return Err(Error::Split("matrix has no ratings".into()));
    }
    let mut all: Vec<Rating<T>> = matrix.ratings().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    all.shuffle(&mut rng);

    let n_train = (spec.train_fraction * all.len() as f64).floor() as usize;
    let mut train_counts: HashMap<UserId, usize> = HashMap::new();
    for r in &all[..n_train] {
        *train_counts.entry(r.user).or_insert(0) += 1;
    }

    let mut donor = n_train;
    for j in n_train..all.len() {
        let user = all[j].user;
        if train_counts.get(&user).copied().unwrap_or(0) > 0 {
            continue;
        }
        let found = loop {
            if donor == 0 {
                break None;
            }
            donor -= 1;
            if train_counts[&all[donor].user] >= 2 {
                break Some(donor);
            }
        };
        let Some(i) = found else {
            return Err(Error::Split(format!(
                "too few ratings to keep user {user} in the training set"
            )));
        };
        *train_counts.get_mut(&all[i].user).unwrap() -= 1;
        *train_counts.entry(user).or_insert(0) += 1;
        all.swap(i, j);
    }

    let mut test = all.split_off(n_train);
    test.sort_by_key(|r| (r.user, r.item));
    let train = RatingsMatrix::from_ratings(*matrix.scale(), all)?;
    Ok(Split { train, test })
}

/// Mean absolute error over `(predicted, actual)` pairs.
pub fn mae<T: Scalar>(pairs: &[(T, T)]) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Evaluation("MAE of an empty prediction list is undefined".into()));
    }
    let total: T = pairs.iter().map(|&(p, r)| (p - r).abs()).sum();
    Ok(total / T::from_count(pairs.len()))
}

/// Precision and recall of a recommendation list; either is 0 when its denominator is empty.
pub fn precision_recall<T: Scalar>(recommended: &[ItemId], relevant: &BTreeSet<ItemId>) -> (T, T) {
    let recommended: BTreeSet<ItemId> = recommended.iter().copied().collect();
    let hits = recommended.intersection(relevant).count();
    let precision = if recommended.is_empty() {
        T::zero()
    } else {
        T::from_count(hits) / T::from_count(recommended.len())
    };
    let recall = if relevant.is_empty() {
        T::zero()
    } else {
        T::from_count(hits) / T::from_count(relevant.len())
    };
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaeResult<T> {
    pub mae: T,
    pub predictions: usize,
    /// Test ratings predicted by the user's train mean because no neighbour rated the item.
    pub fallback: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopNResult<T> {
    pub precision: T,
    pub recall: T,
    /// Users with at least one relevant held-out item.
    pub users: usize,
    /// Qualifying users who received an empty recommendation list.
    pub empty_lists: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopNSpec {
    pub k: usize,
    pub n: usize,
}

fn check_sizes(ks: &[usize], topn: &[TopNSpec]) -> Result<()> {
    if ks.contains(&0) || topn.iter().any(|s| s.k == 0 || s.n == 0) {
        return Err(Error::Config("neighbourhood size and list length must be >= 1".into()));
    }
    Ok(())
}

fn test_by_user<T: Scalar>(test: &[Rating<T>]) -> BTreeMap<UserId, Vec<Rating<T>>> {
    let mut grouped: BTreeMap<UserId, Vec<Rating<T>>> = BTreeMap::new();
    for r in test {
        grouped.entry(r.user).or_default().push(*r);
    }
    grouped
}

/// Candidate neighbours of `user` under each measure, strongest first.
fn ranked_per_measure<T: Scalar>(
    train: &RatingsMatrix<T>,
    user: UserId,
    measures: &[SimilarityMeasure<T>],
) -> Result<Vec<Vec<(UserId, T)>>> {
    let row = similarity_row(train, user)?;
    Ok(measures
        .iter()
        .map(|m| rank_scores(user, row.iter().map(|(u, s)| (*u, m.score(s)))))
        .collect())
}

/// One user's `[measure][k]` cells: (predicted, actual) pairs and fallback count.
type PerUser<T> = Vec<Vec<(Vec<(T, T)>, usize)>>;

/// MAE for every `(measure, k)` pair; result is indexed `[measure][k]`.
///
/// Each held-out rating is predicted from the `k` most similar training
/// users who rated that item. When there is none, the user's training
/// mean is used and the prediction is counted as a fallback.
pub fn mae_grid<T: Scalar>(
    split: &Split<T>,
    measures: &[SimilarityMeasure<T>],
    ks: &[usize],
) -> Result<Vec<Vec<MaeResult<T>>>> {
    check_sizes(ks, &[])?;
    let grouped = test_by_user(&split.test);
    let train = &split.train;
    let max_k = ks.iter().copied().max().unwrap_or(0);

    let per_user: Vec<PerUser<T>> = grouped
        .par_iter()
        .map(|(&user, ratings)| {
            let mean = train.user_mean(user)?;
            let ranked = ranked_per_measure(train, user, measures)?;
            Ok(ranked
                .into_iter()
                .map(|ranked| {
                    // raters of each held-out item, strongest first, up to the largest k
                    let raters: Vec<Vec<(UserId, T)>> = ratings
                        .iter()
                        .map(|r| raters_prefix(train, &ranked, r.item, max_k))
                        .collect();
                    ks.iter()
                        .map(|&k| {
                            let mut fallback = 0;
                            let pairs = ratings
                                .iter()
                                .zip(&raters)
                                .map(|(r, members)| {
                                    let hood = Neighborhood {
                                        target: user,
                                        members: members[..k.min(members.len())].to_vec(),
                                    };
                                    let p = predict_with_mean(train, &hood, mean, r.item);
                                    fallback += p.fallback as usize;
                                    (p.value, r.value)
                                })
                                .collect();
                            (pairs, fallback)
                        })
                        .collect()
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(measures.len());
    for mi in 0..measures.len() {
        let mut row = Vec::with_capacity(ks.len());
        for ki in 0..ks.len() {
            let mut pairs = Vec::with_capacity(split.test.len());
            let mut fallback = 0;
            for user in &per_user {
                let (p, f) = &user[mi][ki];
                pairs.extend_from_slice(p);
                fallback += f;
            }
            row.push(MaeResult {
                mae: mae(&pairs)?,
                predictions: pairs.len(),
                fallback,
            });
        }
        out.push(row);
    }
    Ok(out)
}

pub fn evaluate_mae<T: Scalar>(
    split: &Split<T>,
    measure: &SimilarityMeasure<T>,
    k: usize,
) -> Result<MaeResult<T>> {
    Ok(mae_grid(split, std::slice::from_ref(measure), &[k])?[0][0])
}

/// Macro-averaged precision / recall for every `(measure, topn spec)` pair.
///
/// A user takes part when at least one held-out rating reaches the scale's
/// relevance threshold.
pub fn topn_grid<T: Scalar>(
    split: &Split<T>,
    measures: &[SimilarityMeasure<T>],
    specs: &[TopNSpec],
) -> Result<Vec<Vec<TopNResult<T>>>> {
    check_sizes(&[], specs)?;
    let train = &split.train;
    let scale = *train.scale();
    let qualifying: Vec<(UserId, BTreeSet<ItemId>)> = test_by_user(&split.test)
        .into_iter()
        .map(|(u, rs)| {
            let relevant = rs
                .iter()
                .filter(|r| scale.is_relevant(r.value))
                .map(|r| r.item)
                .collect::<BTreeSet<_>>();
            (u, relevant)
        })
        .filter(|(_, relevant)| !relevant.is_empty())
        .collect();
    if qualifying.is_empty() {
        return Err(Error::Evaluation(
            "no test user has a relevant held-out item".into(),
        ));
    }

    // per user: [measure][spec] -> (precision, recall, empty list)
    let per_user: Vec<Vec<Vec<(T, T, bool)>>> = qualifying
        .par_iter()
        .map(|(user, relevant)| {
            let ranked = ranked_per_measure(train, *user, measures)?;
            ranked
                .into_iter()
                .map(|members| {
                    specs
                        .iter()
                        .map(|spec| {
                            let hood = Neighborhood {
                                target: *user,
                                members: members[..spec.k.min(members.len())].to_vec(),
                            };
                            let list: Vec<ItemId> =
                                rank_items(train, &hood, spec.n)?.into_iter().map(|(i, _)| i).collect();
                            let (p, r) = precision_recall(&list, relevant);
                            Ok((p, r, list.is_empty()))
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let users = T::from_count(qualifying.len());
    let mut out = Vec::with_capacity(measures.len());
    for mi in 0..measures.len() {
        let mut row = Vec::with_capacity(specs.len());
        for si in 0..specs.len() {
            let (mut p_sum, mut r_sum, mut empty) = (T::zero(), T::zero(), 0);
            for user in &per_user {
                let (p, r, e) = user[mi][si];
                p_sum = p_sum + p;
                r_sum = r_sum + r;
                empty += e as usize;
            }
            row.push(TopNResult {
                precision: p_sum / users,
                recall: r_sum / users,
                users: qualifying.len(),
                empty_lists: empty,
            });
        }
        out.push(row);
    }
    Ok(out)
}

pub fn evaluate_topn<T: Scalar>(
    split: &Split<T>,
    measure: &SimilarityMeasure<T>,
    k: usize,
    n: usize,
) -> Result<TopNResult<T>> {
    Ok(topn_grid(split, std::slice::from_ref(measure), &[TopNSpec { k, n }])?[0][0])
}

/// One row of experiment output.
///
/// MAE rows leave `n`, `precision` and `recall` empty; top-N rows leave `mae` empty.
/// `predictions` counts predicted test ratings (MAE) or evaluated users (top-N);
/// `fallback_count` counts mean-fallback predictions (MAE) or empty lists (top-N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub measure: String,
    pub k: usize,
    pub n: Option<usize>,
    pub mae: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub seed: u64,
    pub train_fraction: f64,
    pub predictions: usize,
    pub fallback_count: usize,
}

/// A similarity measure plus the label it is reported under.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedMeasure<T> {
    pub label: String,
    pub measure: SimilarityMeasure<T>,
}

impl<T: Scalar> NamedMeasure<T> {
    pub fn new(label: impl Into<String>, measure: SimilarityMeasure<T>) -> Self {
        NamedMeasure {
            label: label.into(),
            measure,
        }
    }

    pub fn plain(measure: SimilarityMeasure<T>) -> Self {
        NamedMeasure::new(measure.kind().name(), measure)
    }
}

/// Runs measures × ks (MAE) and measures × topn specs (precision / recall)
/// on one shared split. Reports come back sorted by measure label, k, n.
pub fn sweep<T: Scalar>(
    dataset: &str,
    matrix: &RatingsMatrix<T>,
    measures: &[NamedMeasure<T>],
    ks: &[usize],
    topn: &[TopNSpec],
    spec: &SplitSpec,
) -> Result<Vec<EvalReport>> {
    for m in measures {
        m.measure.validate()?;
    }
    check_sizes(ks, topn)?;
    let split = split(matrix, spec)?;
    let plain: Vec<_> = measures.iter().map(|m| m.measure).collect();

    let base = |label: &str, k: usize| EvalReport {
        dataset: dataset.to_string(),
        measure: label.to_string(),
        k,
        n: None,
        mae: None,
        precision: None,
        recall: None,
        seed: spec.seed,
        train_fraction: spec.train_fraction,
        predictions: 0,
        fallback_count: 0,
    };

    let mut reports = Vec::new();
    if !ks.is_empty() && !measures.is_empty() {
        let grid = mae_grid(&split, &plain, ks)?;
        for (m, row) in measures.iter().zip(grid) {
            for (&k, res) in ks.iter().zip(row) {
                reports.push(EvalReport {
                    mae: Some(res.mae.as_f64()),
                    predictions: res.predictions,
                    fallback_count: res.fallback,
                    ..base(&m.label, k)
                });
            }
        }
    }
    if !topn.is_empty() && !measures.is_empty() {
        let grid = topn_grid(&split, &plain, topn)?;
        for (m, row) in measures.iter().zip(grid) {
            for (s, res) in topn.iter().zip(row) {
                reports.push(EvalReport {
                    n: Some(s.n),
                    precision: Some(res.precision.as_f64()),
                    recall: Some(res.recall.as_f64()),
                    predictions: res.users,
                    fallback_count: res.empty_lists,
                    ..base(&m.label, s.k)
                });
            }
        }
    }
    reports.sort_by(|a, b| (&a.measure, a.k, a.n).cmp(&(&b.measure, b.k, b.n)));
    Ok(reports)
}

pub const CSV_HEADER: &str = "dataset,measure,k,n,mae,precision,recall,seed,fallback_count";

fn opt<V: ToString>(v: Option<V>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.dataset),
            csv_field(&r.measure),
            r.k,
            opt(r.n),
            opt(r.mae),
            opt(r.precision),
            opt(r.recall),
            r.seed,
            r.fallback_count
        )?;
    }
    Ok(())
}

pub fn write_json_lines<W: Write>(reports: &[EvalReport], mut out: W) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RatingScale;

    fn scale() -> RatingScale<f64> {
        RatingScale::new(1.0, 5.0, 4.0).unwrap()
    }

    fn ten_ratings() -> RatingsMatrix<f64> {
        let ratings = (0..10).map(|i| Rating::new(i % 2 + 1, i, (i % 5 + 1) as f64));
        RatingsMatrix::from_ratings(scale(), ratings).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let m = ten_ratings();
        let spec = SplitSpec::new(0.8, 7).unwrap();
        let a = split(&m, &spec).unwrap();
        assert_eq!(a.train.len(), 8);
        assert_eq!(a.test.len(), 2);
        assert_eq!(a, split(&m, &spec).unwrap());
    }

    #[test]
    fn split_swaps_in_uncovered_users() {
        // user 9 has a single rating; every seed must keep it in train
        let mut ratings: Vec<_> = (0..20).map(|i| Rating::new(1, i, 3.0)).collect();
        ratings.push(Rating::new(9, 100, 4.0));
        let m = RatingsMatrix::from_ratings(scale(), ratings).unwrap();
        for seed in 0..50 {
            let s = split(&m, &SplitSpec::new(0.5, seed).unwrap()).unwrap();
            assert!(s.train.contains_user(UserId(9)));
            assert_eq!(s.train.len(), 10);
            assert!(s.test.iter().all(|r| s.train.contains_user(r.user)));
        }
    }

    #[test]
    fn split_too_small() {
        let m = RatingsMatrix::from_ratings(scale(), vec![Rating::new(1, 1, 3.0)]).unwrap();
        assert!(matches!(split(&m, &SplitSpec::default()), Err(Error::Split(_))));
        let m = RatingsMatrix::from_ratings(
            scale(),
            vec![Rating::new(1, 1, 3.0), Rating::new(2, 1, 3.0)],
        )
        .unwrap();
        assert!(matches!(split(&m, &SplitSpec::new(0.6, 1).unwrap()), Err(Error::Split(_))));
    }

    #[test]
    fn bad_fraction() {
        assert!(SplitSpec::new(1.0, 0).is_err());
        assert!(SplitSpec::new(0.0, 0).is_err());
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[(4.0, 5.0), (3.0, 3.0)]).unwrap(), 0.5);
        assert_eq!(mae(&[(2.0, 2.0), (3.5, 3.5)]).unwrap(), 0.0);
        assert_eq!(mae(&[(1.0, 5.0), (5.0, 1.0)]).unwrap(), 4.0);
        assert!(mae::<f64>(&[]).is_err());
    }

    #[test]
    fn precision_recall_examples() {
        let ids = |v: &[u64]| v.iter().map(|&i| ItemId(i)).collect::<Vec<_>>();
        let relevant: BTreeSet<_> = ids(&[1, 2, 3, 10, 11, 12]).into_iter().collect();
        let (p, r): (f64, f64) = precision_recall(&ids(&[1, 2, 3, 4, 5]), &relevant);
        assert_eq!(p, 0.6);
        assert_eq!(r, 0.5);
        let (p, r): (f64, f64) = precision_recall(&[], &relevant);
        assert_eq!((p, r), (0.0, 0.0));
        let (p, r): (f64, f64) = precision_recall(&ids(&[1]), &BTreeSet::new());
        assert_eq!((p, r), (0.0, 0.0));
    }

    #[test]
    fn csv_layout() {
        let r = EvalReport {
            dataset: "toy".into(),
            measure: "pcc".into(),
            k: 5,
            n: None,
            mae: Some(0.75),
            precision: None,
            recall: None,
            seed: 3,
            train_fraction: 0.8,
            predictions: 4,
            fallback_count: 1,
        };
        let mut buf = Vec::new();
        write_csv(std::slice::from_ref(&r), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\ntoy,pcc,5,,0.75,,,3,1\n"));

        let mut buf = Vec::new();
        write_json_lines(std::slice::from_ref(&r), &mut buf).unwrap();
        let back: EvalReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, r);
    }
}
