#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use mlcf::{Rating, RatingScale, Ratings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn five_star() -> RatingScale<f64> {
    RatingScale::new(1.0, 5.0, 4.0).unwrap()
}

/// Random dense grid (`None` = unrated) with integer ratings on 1..=5.
///
/// Row density varies per user so that some pairs share many items and
/// others share none.
pub fn random_grid(rng: &mut ChaCha8Rng, max_users: usize, max_items: usize) -> Vec<Vec<Option<f64>>> {
    let users = rng.random_range(2..=max_users);
    let items = rng.random_range(2..=max_items);
    (0..users)
        .map(|_| {
            let density: f64 = rng.random_range(0.05..1.0);
            (0..items)
                .map(|_| rng.random_bool(density).then(|| rng.random_range(1..=5) as f64))
                .collect()
        })
        .collect()
}

pub fn grid_to_matrix(grid: &[Vec<Option<f64>>]) -> Ratings {
    let ratings = grid.iter().enumerate().flat_map(|(u, row)| {
        row.iter()
            .enumerate()
            .filter_map(move |(i, v)| v.map(|v| Rating::new(u as u64, i as u64, v)))
    });
    Ratings::from_ratings(five_star(), ratings).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn locate(env: &str, relative: &str) -> Option<PathBuf> {
    if let Ok(p) = std::env::var(env) {
        let p = PathBuf::from(p);
        return p.exists().then_some(p);
    }
    let p = workspace_root().join(relative);
    p.exists().then_some(p)
}

/// Full MovieLens-100k `u.data`, from `MLCF_ML100K` or `data/ml-100k/u.data`.
pub fn ml100k_path() -> Option<PathBuf> {
    locate("MLCF_ML100K", "data/ml-100k/u.data")
}

/// Jester dataset 2 ratings, from `MLCF_JESTER` or `data/jester/jester_ratings.dat`.
pub fn jester_path() -> Option<PathBuf> {
    locate("MLCF_JESTER", "data/jester/jester_ratings.dat")
}

/// First 1,000 lines of MovieLens-100k `u.data`.
pub fn ml100k_excerpt_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/ml-100k-excerpt.data")
}

pub const EXCERPT_COUNTS: (usize, usize, usize) = (249, 551, 1000);
