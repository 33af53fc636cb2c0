//! User-based collaborative filtering with a multi-level similarity measure.
//!
//! The multi-level measure keeps Pearson correlation as its base signal but
//! only trusts pairs that clear a correlation gate and share enough co-rated
//! items; those pairs get a boost that grows with the co-rated count. The
//! hybrid measure falls back to plain Pearson correlation for pairs that miss
//! the constraints. Baselines (PCC, significance-weighted PCC, sigmoid PCC,
//! Jaccard) are included for comparison, together with a seeded hold-out
//! evaluation harness reporting MAE, precision and recall.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod model;
pub mod recommend;
pub mod scalar;
pub mod similarity;

pub use error::{Error, Result};
pub use evaluation::{EvalReport, NamedMeasure, SplitSpec, TopNSpec};
pub use ingest::DatasetSpec;
pub use model::{ItemId, Rating, RatingScale, RatingsMatrix, UserId};
pub use scalar::Scalar;
pub use similarity::{MeasureKind, MultiLevelConfig, PairStats, SimilarityMeasure, WpccConfig};

pub type Ratings = RatingsMatrix<f64>;
pub type Ratings32 = RatingsMatrix<f32>;
pub type Measure = SimilarityMeasure<f64>;
pub type Measure32 = SimilarityMeasure<f32>;
pub type MultiLevel = MultiLevelConfig<f64>;
pub type Neighborhood = recommend::Neighborhood<f64>;
pub type Prediction = recommend::Prediction<f64>;
pub type Split = evaluation::Split<f64>;
