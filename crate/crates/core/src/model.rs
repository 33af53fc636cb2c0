//! Sparse user → item rating store.
//!
//! Each user's ratings are kept as a vector sorted by item id so that
//! co-rated sets come out of a linear merge. The per-user mean is always
//! the arithmetic mean over *all* of that user's stored ratings, summed in
//! item order so it does not depend on insertion order.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating<T> {
    pub user: UserId,
    pub item: ItemId,
    pub value: T,
}

impl<T> Rating<T> {
    pub fn new(user: u64, item: u64, value: T) -> Self {
        Rating {
            user: UserId(user),
            item: ItemId(item),
            value,
        }
    }
}

/// Legal rating range plus the cut-off for "relevant" in top-N scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale<T> {
    pub min: T,
    pub max: T,
    pub relevance_threshold: T,
}

impl<T: Scalar> RatingScale<T> {
    pub fn new(min: T, max: T, relevance_threshold: T) -> Result<Self> {
        let scale = RatingScale {
            min,
            max,
            relevance_threshold,
        };
        scale.validate()?;
        Ok(scale)
    }

    pub fn validate(&self) -> Result<()> {
        // also rejects NaN bounds
        if self.min.partial_cmp(&self.max) != Some(std::cmp::Ordering::Less) {
            return Err(Error::Config(format!(
                "scale min {} must be below max {}",
                self.min, self.max
            )));
        }
        if !(self.min <= self.relevance_threshold && self.relevance_threshold <= self.max) {
            return Err(Error::Config(format!(
                "relevance threshold {} outside scale [{}, {}]",
                self.relevance_threshold, self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, value: T) -> bool {
        self.min <= value && value <= self.max
    }

    pub fn clamp(&self, value: T) -> T {
        value.max(self.min).min(self.max)
    }

    pub fn is_relevant(&self, value: T) -> bool {
        value >= self.relevance_threshold
    }
}

/// One user's ratings, sorted by item id.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRatings<T> {
    entries: Vec<(ItemId, T)>,
    mean: T,
}

impl<T: Scalar> UserRatings<T> {
    fn from_sorted(entries: Vec<(ItemId, T)>) -> Self {
        let mut user = UserRatings {
            entries,
            mean: T::zero(),
        };
        user.refresh_mean();
        user
    }

    fn refresh_mean(&mut self) {
        let sum: T = self.entries.iter().map(|&(_, v)| v).sum();
        self.mean = sum / T::from_count(self.entries.len());
    }

    pub fn entries(&self) -> &[(ItemId, T)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    pub fn get(&self, item: ItemId) -> Option<T> {
        self.entries
            .binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|idx| self.entries[idx].1)
    }

    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix<T> {
    scale: RatingScale<T>,
    users: BTreeMap<UserId, UserRatings<T>>,
    // number of users who rated each item
    item_raters: BTreeMap<ItemId, usize>,
    len: usize,
}

impl<T: Scalar> RatingsMatrix<T> {
    pub fn new(scale: RatingScale<T>) -> Self {
        RatingsMatrix {
            scale,
            users: BTreeMap::new(),
            item_raters: BTreeMap::new(),
            len: 0,
        }
    }

    /// Builds a matrix from triples applied in order (last write wins).
    pub fn from_ratings<I>(scale: RatingScale<T>, ratings: I) -> Result<Self>
    where
        I: IntoIterator<Item = Rating<T>>,
    {
        let mut staged: BTreeMap<UserId, BTreeMap<ItemId, T>> = BTreeMap::new();
        for r in ratings {
            check_scale(&scale, &r)?;
            staged.entry(r.user).or_default().insert(r.item, r.value);
        }
        let mut matrix = RatingsMatrix::new(scale);
        for (user, items) in staged {
            for &item in items.keys() {
                *matrix.item_raters.entry(item).or_insert(0) += 1;
            }
            matrix.len += items.len();
            matrix
                .users
                .insert(user, UserRatings::from_sorted(items.into_iter().collect()));
        }
        Ok(matrix)
    }

    pub fn insert(&mut self, rating: Rating<T>) -> Result<()> {
        check_scale(&self.scale, &rating)?;
        let user = self.users.entry(rating.user).or_insert_with(|| UserRatings {
            entries: Vec::new(),
            mean: T::zero(),
        });
        match user
            .entries
            .binary_search_by_key(&rating.item, |&(i, _)| i)
        {
            Ok(idx) => user.entries[idx].1 = rating.value,
            Err(idx) => {
                user.entries.insert(idx, (rating.item, rating.value));
                *self.item_raters.entry(rating.item).or_insert(0) += 1;
                self.len += 1;
            }
        }
        user.refresh_mean();
        Ok(())
    }

    pub fn scale(&self) -> &RatingScale<T> {
        &self.scale
    }

    /// Number of stored (user, item) ratings.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_raters.len()
    }

    pub fn contains_user(&self, user: UserId) -> bool {
        self.users.contains_key(&user)
    }

    pub fn user(&self, user: UserId) -> Result<&UserRatings<T>> {
        self.users.get(&user).ok_or(Error::UnknownUser(user))
    }

    pub fn users(&self) -> impl Iterator<Item = (UserId, &UserRatings<T>)> + '_ {
        self.users.iter().map(|(&u, r)| (u, r))
    }

    pub fn user_ids(&self) -> impl Iterator<Item = UserId> + '_ {
        self.users.keys().copied()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.item_raters.keys().copied()
    }

    pub fn get(&self, user: UserId, item: ItemId) -> Option<T> {
        self.users.get(&user).and_then(|r| r.get(item))
    }

    pub fn user_mean(&self, user: UserId) -> Result<T> {
        self.user(user).map(UserRatings::mean)
    }

    /// Items rated by both users, ascending.
    pub fn corated_items(&self, a: UserId, b: UserId) -> Result<Vec<ItemId>> {
        let ra = self.user(a)?;
        let rb = self.user(b)?;
        let mut out = Vec::new();
        merge_join(ra.entries(), rb.entries(), |item, _, _| out.push(item));
        Ok(out)
    }

    /// All triples, ordered by user then item.
    pub fn ratings(&self) -> impl Iterator<Item = Rating<T>> + '_ {
        self.users.iter().flat_map(|(&user, r)| {
            r.entries.iter().map(move |&(item, value)| Rating { user, item, value })
        })
    }
}

fn check_scale<T: Scalar>(scale: &RatingScale<T>, r: &Rating<T>) -> Result<()> {
    if scale.contains(r.value) {
        Ok(())
    } else {
        Err(Error::OutOfScale {
            user: r.user,
            item: r.item,
            value: r.value.as_f64(),
            min: scale.min.as_f64(),
            max: scale.max.as_f64(),
        })
    }
}

/// Calls `f(item, a_value, b_value)` for every item present in both sorted slices.
pub(crate) fn merge_join<T: Copy>(
    a: &[(ItemId, T)],
    b: &[(ItemId, T)],
    mut f: impl FnMut(ItemId, T, T),
) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ia, va) = a[i];
        let (ib, vb) = b[j];
        match ia.cmp(&ib) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                f(ia, va, vb);
                i += 1;
                j += 1;
            }
        }
    }
}
