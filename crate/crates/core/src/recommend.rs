//! k-nearest-neighbour selection, rating prediction and top-N lists.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{ItemId, RatingsMatrix, UserId};
use crate::scalar::Scalar;
use crate::similarity::{PairStats, SimilarityMeasure};

/// Up to `k` users most similar to `target`, strongest first.
///
/// Only strictly positive similarities are kept; ties are broken by
/// ascending user id.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood<T> {
    pub target: UserId,
    pub members: Vec<(UserId, T)>,
}

impl<T: Scalar> Neighborhood<T> {
    /// Builds a neighbourhood from arbitrary `(user, similarity)` scores.
    pub fn from_scores<I>(target: UserId, scores: I, k: usize) -> Self
    where
        I: IntoIterator<Item = (UserId, T)>,
    {
        let mut members = rank_scores(target, scores);
        members.truncate(k);
        Neighborhood { target, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The first `k` members as their own neighbourhood.
    pub fn prefix(&self, k: usize) -> Neighborhood<T> {
        Neighborhood {
            target: self.target,
            members: self.members[..k.min(self.members.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T> {
    pub user: UserId,
    pub item: ItemId,
    pub value: T,
    /// True when no neighbour rated the item and the user's mean was used.
    pub fallback: bool,
}

pub(crate) fn by_score_desc<K: Ord, T: Scalar>(a: &(K, T), b: &(K, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Positive scores except the target's own, sorted by similarity descending then id.
pub(crate) fn rank_scores<T: Scalar, I>(target: UserId, scores: I) -> Vec<(UserId, T)>
where
    I: IntoIterator<Item = (UserId, T)>,
{
    let mut ranked: Vec<_> = scores
        .into_iter()
        .filter(|&(u, s)| u != target && s > T::zero())
        .collect();
    ranked.sort_by(by_score_desc);
    ranked
}

/// Pair statistics between `target` and every other user, in user id order.
pub fn similarity_row<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    target: UserId,
) -> Result<Vec<(UserId, PairStats<T>)>> {
    let row = matrix.user(target)?;
    Ok(matrix
        .users()
        .filter(|&(u, _)| u != target)
        .map(|(u, other)| (u, PairStats::between(row, other)))
        .collect())
}

pub fn nearest_neighbors<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    measure: &SimilarityMeasure<T>,
    target: UserId,
    k: usize,
) -> Result<Neighborhood<T>> {
    if k == 0 {
        return Err(Error::Config("neighbourhood size k >= 1 violated".into()));
    }
    let row = similarity_row(matrix, target)?;
    Ok(Neighborhood::from_scores(
        target,
        row.iter().map(|(u, s)| (*u, measure.score(s))),
        k,
    ))
}

/// The `k` strongest candidates from `ranked` that rated `item`.
pub(crate) fn raters_prefix<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    ranked: &[(UserId, T)],
    item: ItemId,
    k: usize,
) -> Vec<(UserId, T)> {
    ranked
        .iter()
        .filter(|(u, _)| matrix.get(*u, item).is_some())
        .take(k)
        .copied()
        .collect()
}

/// Like [`nearest_neighbors`], restricted to users who rated `item`.
///
/// This is the neighbourhood the MAE protocol predicts a held-out rating
/// from; it is empty exactly when no positively similar user rated the item.
pub fn nearest_neighbors_for_item<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    measure: &SimilarityMeasure<T>,
    target: UserId,
    item: ItemId,
    k: usize,
) -> Result<Neighborhood<T>> {
    if k == 0 {
        return Err(Error::Config("neighbourhood size k >= 1 violated".into()));
    }
    let row = similarity_row(matrix, target)?;
    let ranked = rank_scores(target, row.iter().map(|(u, s)| (*u, measure.score(s))));
    Ok(Neighborhood {
        target,
        members: raters_prefix(matrix, &ranked, item, k),
    })
}

/// Mean-centred weighted prediction, clamped to the rating scale.
///
/// `target_mean + Σ sim·(r_n,item − mean_n) / Σ |sim|` over the neighbours
/// that rated `item`; the target's mean when none did.
pub fn predict_rating<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    hood: &Neighborhood<T>,
    item: ItemId,
) -> Result<Prediction<T>> {
    let target_mean = matrix.user_mean(hood.target)?;
    Ok(predict_with_mean(matrix, hood, target_mean, item))
}

pub(crate) fn predict_with_mean<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    hood: &Neighborhood<T>,
    target_mean: T,
    item: ItemId,
) -> Prediction<T> {
    let (mut num, mut den) = (T::zero(), T::zero());
    for &(neighbor, sim) in &hood.members {
        let Ok(ratings) = matrix.user(neighbor) else {
            continue;
        };
        if let Some(r) = ratings.get(item) {
            num = num + sim * (r - ratings.mean());
            den = den + sim.abs();
        }
    }
    let (raw, fallback) = if den > T::zero() {
        (target_mean + num / den, false)
    } else {
        (target_mean, true)
    };
    Prediction {
        user: hood.target,
        item,
        value: matrix.scale().clamp(raw),
        fallback,
    }
}

/// Ranks every item some neighbour rated and the target did not.
pub(crate) fn rank_items<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    hood: &Neighborhood<T>,
    n: usize,
) -> Result<Vec<(ItemId, T)>> {
    let target = matrix.user(hood.target)?;
    let mut candidates = BTreeSet::new();
    for &(neighbor, _) in &hood.members {
        candidates.extend(matrix.user(neighbor)?.items().filter(|&i| target.get(i).is_none()));
    }
    let mut scored: Vec<(ItemId, T)> = candidates
        .into_iter()
        .map(|item| (item, predict_with_mean(matrix, hood, target.mean(), item).value))
        .collect();
    scored.sort_by(by_score_desc);
    scored.truncate(n);
    Ok(scored)
}

pub fn top_n<T: Scalar>(
    matrix: &RatingsMatrix<T>,
    measure: &SimilarityMeasure<T>,
    target: UserId,
    k: usize,
    n: usize,
) -> Result<Vec<(ItemId, T)>> {
    if n == 0 {
        return Err(Error::Config("recommendation count n >= 1 violated".into()));
    }
    let hood = nearest_neighbors(matrix, measure, target, k)?;
    rank_items(matrix, &hood, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Rating, RatingScale};

    fn scale() -> RatingScale<f64> {
        RatingScale::new(1.0, 5.0, 4.0).unwrap()
    }

    #[test]
    fn lone_user_has_no_neighbors() {
        let m = RatingsMatrix::from_ratings(scale(), vec![Rating::new(1, 1, 3.0)]).unwrap();
        let hood = nearest_neighbors(&m, &SimilarityMeasure::Pcc, UserId(1), 3).unwrap();
        assert!(hood.is_empty());
    }

    #[test]
    fn non_positive_excluded() {
        let hood = Neighborhood::from_scores(
            UserId(0),
            vec![(UserId(3), -0.2), (UserId(1), 0.9), (UserId(2), 0.5), (UserId(4), 0.0)],
            5,
        );
        assert_eq!(hood.members, vec![(UserId(1), 0.9), (UserId(2), 0.5)]);
    }

    #[test]
    fn ties_break_by_id() {
        for order in [vec![4, 2], vec![2, 4]] {
            let hood = Neighborhood::from_scores(UserId(0), order.into_iter().map(|u| (UserId(u), 0.7)), 1);
            assert_eq!(hood.members, vec![(UserId(2), 0.7)]);
        }
    }

    #[test]
    fn target_never_in_own_neighborhood() {
        let hood = Neighborhood::from_scores(UserId(1), vec![(UserId(1), 1.0), (UserId(2), 0.3)], 5);
        assert_eq!(hood.members, vec![(UserId(2), 0.3)]);
    }

    #[test]
    fn prediction_hand_trace() {
        // target mean 3.0; neighbour mean 4.0 rated the item 5
        let m = RatingsMatrix::from_ratings(
            scale(),
            vec![
                Rating::new(1, 1, 2.0),
                Rating::new(1, 2, 4.0),
                Rating::new(2, 1, 3.0),
                Rating::new(2, 3, 5.0),
            ],
        )
        .unwrap();
        let hood = Neighborhood { target: UserId(1), members: vec![(UserId(2), 1.0)] };
        let p = predict_rating(&m, &hood, ItemId(3)).unwrap();
        assert_eq!(p.value, 4.0);
        assert!(!p.fallback);
    }

    #[test]
    fn prediction_fallback_and_clamp() {
        let m = RatingsMatrix::from_ratings(
            scale(),
            vec![
                Rating::new(1, 1, 3.0),
                Rating::new(1, 2, 3.8),
                Rating::new(2, 3, 5.0),
                Rating::new(2, 4, 1.0),
                Rating::new(2, 5, 1.0),
            ],
        )
        .unwrap();
        let hood = Neighborhood { target: UserId(1), members: vec![(UserId(2), 1.0)] };
        let p = predict_rating(&m, &hood, ItemId(9)).unwrap();
        assert!((p.value - 3.4).abs() < 1e-15);
        assert!(p.fallback);

        // raw = 3.4 + (5 - 7/3) = 6.0667 -> clamped
        let p = predict_rating(&m, &hood, ItemId(3)).unwrap();
        assert_eq!(p.value, 5.0);
    }

    #[test]
    fn top_n_empty_when_everything_rated() {
        let m = RatingsMatrix::from_ratings(
            scale(),
            vec![
                Rating::new(1, 1, 1.0),
                Rating::new(1, 2, 5.0),
                Rating::new(2, 1, 2.0),
                Rating::new(2, 2, 4.0),
            ],
        )
        .unwrap();
        assert!(top_n(&m, &SimilarityMeasure::Pcc, UserId(1), 5, 5).unwrap().is_empty());
    }

    #[test]
    fn top_n_picks_max() {
        // neighbour 2 (sim 1) rated items 3 and 4; target mean 3, neighbour mean 3
        let m = RatingsMatrix::from_ratings(
            scale(),
            vec![
                Rating::new(1, 1, 2.0),
                Rating::new(1, 2, 4.0),
                Rating::new(2, 1, 1.0),
                Rating::new(2, 2, 5.0),
                Rating::new(2, 3, 4.2),
                Rating::new(2, 4, 1.8),
            ],
        )
        .unwrap();
        let list = top_n(&m, &SimilarityMeasure::Pcc, UserId(1), 5, 1).unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].0, ItemId(3));
    }

    #[test]
    fn zero_sizes_rejected() {
        let m = RatingsMatrix::from_ratings(scale(), vec![Rating::new(1, 1, 3.0)]).unwrap();
        assert!(nearest_neighbors(&m, &SimilarityMeasure::Pcc, UserId(1), 0).is_err());
        assert!(top_n(&m, &SimilarityMeasure::Pcc, UserId(1), 1, 0).is_err());
        assert!(matches!(
            nearest_neighbors(&m, &SimilarityMeasure::Pcc, UserId(5), 1),
            Err(Error::UnknownUser(UserId(5)))
        ));
    }
}
