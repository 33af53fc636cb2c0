//! User-user similarity measures.
//!
//! Every measure here is a function of three per-pair quantities: the
//! Pearson correlation over co-rated items (deviations taken from each
//! user's global mean), the co-rated count and the size of the union of
//! the two item sets. [`PairStats`] computes them in one merge pass and
//! [`SimilarityMeasure::score`] turns them into a similarity, so a sweep
//! over several measures only walks each pair once.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{merge_join, RatingsMatrix, UserId, UserRatings};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStats<T> {
    pub corated: usize,
    pub union: usize,
    pub pcc: T,
}

impl<T: Scalar> PairStats<T> {
    pub fn between(a: &UserRatings<T>, b: &UserRatings<T>) -> Self {
        let (mean_a, mean_b) = (a.mean(), b.mean());
        let mut corated = 0;
        let (mut num, mut ss_a, mut ss_b) = (T::zero(), T::zero(), T::zero());
        merge_join(a.entries(), b.entries(), |_, va, vb| {
            let (da, db) = (va - mean_a, vb - mean_b);
            num = num + da * db;
            ss_a = ss_a + da * da;
            ss_b = ss_b + db * db;
            corated += 1;
        });
        let pcc = if corated < 2 || ss_a == T::zero() || ss_b == T::zero() {
            T::zero()
        } else {
            let r = num / (ss_a * ss_b).sqrt();
            r.max(-T::one()).min(T::one())
        };
        PairStats {
            corated,
            union: a.len() + b.len() - corated,
            pcc,
        }
    }

    pub fn of(matrix: &RatingsMatrix<T>, a: UserId, b: UserId) -> Result<Self> {
        Ok(Self::between(matrix.user(a)?, matrix.user(b)?))
    }
}

/// Significance weighting threshold: pairs with fewer co-rated items are
/// scaled down linearly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WpccConfig {
    pub threshold: usize,
}

impl WpccConfig {
    pub fn new(threshold: usize) -> Result<Self> {
        let cfg = WpccConfig { threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold == 0 {
            return Err(Error::Config("WPCC threshold T >= 1 violated".into()));
        }
        Ok(())
    }

    pub fn weight<T: Scalar>(&self, pcc: T, corated: usize) -> T {
        if corated < self.threshold {
            T::from_count(corated) / T::from_count(self.threshold) * pcc
        } else {
            pcc
        }
    }
}

impl Default for WpccConfig {
    fn default() -> Self {
        WpccConfig { threshold: 50 }
    }
}

/// Level thresholds on the co-rated count, per-level boosts and the PCC gate.
///
/// Level 1 is `n >= thresholds[0]`, level 2 is `thresholds[1] <= n < thresholds[0]`
/// and so on down to level 4. Pairs below `thresholds[3]` or with PCC under
/// `gate` score zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct MultiLevelConfig<T> {
    pub thresholds: [usize; 4],
    pub boosts: [T; 4],
    pub gate: T,
}

impl<T: Scalar> Default for MultiLevelConfig<T> {
    fn default() -> Self {
        MultiLevelConfig {
            thresholds: [50, 20, 10, 5],
            boosts: [T::lit(0.5), T::lit(0.375), T::lit(0.25), T::lit(0.125)],
            gate: T::lit(0.33),
        }
    }
}

impl<T: Scalar> MultiLevelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let [t1, t2, t3, t4] = self.thresholds;
        if !(t1 > t2 && t2 > t3 && t3 > t4 && t4 >= 1) {
            return Err(Error::Config(format!(
                "t1 > t2 > t3 > t4 violated (got {t1}, {t2}, {t3}, {t4}; t4 must also be >= 1)"
            )));
        }
        let [x1, x2, x3, x4] = self.boosts;
        if !(x1 >= x2 && x2 >= x3 && x3 >= x4 && x4 > T::zero()) {
            return Err(Error::Config(format!(
                "x1 >= x2 >= x3 >= x4 > 0 violated (got {x1}, {x2}, {x3}, {x4})"
            )));
        }
        if !(self.gate >= -T::one() && self.gate <= T::one()) {
            return Err(Error::Config(format!(
                "-1 <= y <= 1 violated (got {})",
                self.gate
            )));
        }
        Ok(())
    }

    /// Level index (0-based) for a co-rated count, `None` below the last threshold.
    pub fn level(&self, corated: usize) -> Option<usize> {
        self.thresholds.iter().position(|&t| corated >= t)
    }

    pub fn score(&self, pcc: T, corated: usize) -> T {
        if pcc < self.gate {
            return T::zero();
        }
        match self.level(corated) {
            Some(level) => pcc + self.boosts[level],
            None => T::zero(),
        }
    }

    /// Multi-level score when both constraints hold, plain PCC otherwise.
    pub fn hybrid_score(&self, pcc: T, corated: usize) -> T {
        if corated >= self.thresholds[3] && pcc >= self.gate {
            self.score(pcc, corated)
        } else {
            pcc
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Pcc,
    Wpcc,
    Spcc,
    Jaccard,
    Multilevel,
    Hybrid,
}

impl MeasureKind {
    pub const ALL: [MeasureKind; 6] = [
        MeasureKind::Pcc,
        MeasureKind::Wpcc,
        MeasureKind::Spcc,
        MeasureKind::Jaccard,
        MeasureKind::Multilevel,
        MeasureKind::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Pcc => "pcc",
            MeasureKind::Wpcc => "wpcc",
            MeasureKind::Spcc => "spcc",
            MeasureKind::Jaccard => "jaccard",
            MeasureKind::Multilevel => "multilevel",
            MeasureKind::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        MeasureKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A configured similarity strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimilarityMeasure<T> {
    Pcc,
    Wpcc(WpccConfig),
    Spcc,
    Jaccard,
    MultiLevel(MultiLevelConfig<T>),
    Hybrid(MultiLevelConfig<T>),
}

impl<T: Scalar> SimilarityMeasure<T> {
    /// Measure of the given kind with default constants and WPCC threshold `wpcc_threshold`.
    pub fn with_defaults(kind: MeasureKind, wpcc_threshold: usize) -> Self {
        match kind {
            MeasureKind::Pcc => SimilarityMeasure::Pcc,
            MeasureKind::Wpcc => SimilarityMeasure::Wpcc(WpccConfig {
                threshold: wpcc_threshold,
            }),
            MeasureKind::Spcc => SimilarityMeasure::Spcc,
            MeasureKind::Jaccard => SimilarityMeasure::Jaccard,
            MeasureKind::Multilevel => SimilarityMeasure::MultiLevel(MultiLevelConfig::default()),
            MeasureKind::Hybrid => SimilarityMeasure::Hybrid(MultiLevelConfig::default()),
        }
    }

    pub fn kind(&self) -> MeasureKind {
        match self {
            SimilarityMeasure::Pcc => MeasureKind::Pcc,
            SimilarityMeasure::Wpcc(_) => MeasureKind::Wpcc,
            SimilarityMeasure::Spcc => MeasureKind::Spcc,
            SimilarityMeasure::Jaccard => MeasureKind::Jaccard,
            SimilarityMeasure::MultiLevel(_) => MeasureKind::Multilevel,
            SimilarityMeasure::Hybrid(_) => MeasureKind::Hybrid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SimilarityMeasure::Wpcc(cfg) => cfg.validate(),
            SimilarityMeasure::MultiLevel(cfg) | SimilarityMeasure::Hybrid(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }

    pub fn score(&self, stats: &PairStats<T>) -> T {
        let PairStats {
            corated,
            union,
            pcc,
        } = *stats;
        match self {
            SimilarityMeasure::Pcc => pcc,
            SimilarityMeasure::Wpcc(cfg) => cfg.weight(pcc, corated),
            SimilarityMeasure::Spcc => pcc / (T::one() + (-T::from_count(corated) / T::lit(2.0)).exp()),
            SimilarityMeasure::Jaccard => {
                if union == 0 {
                    T::zero()
                } else {
                    T::from_count(corated) / T::from_count(union)
                }
            }
            SimilarityMeasure::MultiLevel(cfg) => cfg.score(pcc, corated),
            SimilarityMeasure::Hybrid(cfg) => cfg.hybrid_score(pcc, corated),
        }
    }
}

pub fn pcc<T: Scalar>(matrix: &RatingsMatrix<T>, a: UserId, b: UserId) -> Result<T> {
    Ok(PairStats::of(matrix, a, b)?.pcc)
}

pub fn wpcc<T: Scalar>(matrix: &RatingsMatrix<T>, a: UserId, b: UserId, cfg: &WpccConfig) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    Ok(SimilarityMeasure::Wpcc(*cfg).score(&stats))
}

pub fn spcc<T: Scalar>(matrix: &RatingsMatrix<T>, a: UserId, b: UserId) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    Ok(SimilarityMeasure::Spcc.score(&stats))
}

pub fn jaccard<T: Scalar>(matrix: &RatingsMatrix<T>, a: UserId, b: UserId) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    Ok(SimilarityMeasure::<T>::Jaccard.score(&stats))
}

pub fn multilevel<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    a: UserId,
    b: UserId,
    cfg: &MultiLevelConfig<T>,
) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    Ok(cfg.score(stats.pcc, stats.corated))
}

pub fn hybrid<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    a: UserId,
    b: UserId,
    cfg: &MultiLevelConfig<T>,
) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    Ok(cfg.hybrid_score(stats.pcc, stats.corated))
}

/// Dispatches on `measure`. A user is always fully similar to itself.
pub fn similarity<T: Scalar>(
    measure: &SimilarityMeasure<T>,
    matrix: &RatingsMatrix<T>,
    a: UserId,
    b: UserId,
) -> Result<T> {
    let stats = PairStats::of(matrix, a, b)?;
    if a == b {
        return Ok(T::one());
    }
    Ok(measure.score(&stats))
}
