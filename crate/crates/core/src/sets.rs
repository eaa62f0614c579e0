//! Sorted set representations: [`Subset`] for k-subsets and [`BSet`] for the
//! bounded-size input sets (transactions, incidence lists).

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::hashing::FIELD_PRIME;

/// Element identifier. Must be smaller than the hash field prime.
pub type Item = u64;

fn check_strictly_increasing(elements: &[Item]) -> Result<()> {
    if elements.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::NotSorted);
    }
    if let Some(&x) = elements.iter().find(|&&x| x >= FIELD_PRIME) {
        return Err(Error::ElementOutOfField(x));
    }
    Ok(())
}

/// A subset stored as a strictly increasing vector of element ids.
///
/// The canonical split of a size-k subset puts the first `k / 2` elements in
/// the left half and the remaining `k - k / 2` in the right half.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Item>", into = "Vec<Item>")]
pub struct Subset(Vec<Item>);

impl Subset {
    pub fn new(elements: Vec<Item>) -> Result<Self> {
        check_strictly_increasing(&elements)?;
        Ok(Subset(elements))
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(mut elements: Vec<Item>) -> Result<Self> {
        elements.sort_unstable();
        elements.dedup();
        Self::new(elements)
    }

    pub(crate) fn from_sorted_unchecked(elements: Vec<Item>) -> Self {
        debug_assert!(check_strictly_increasing(&elements).is_ok());
        Subset(elements)
    }

    pub fn as_slice(&self) -> &[Item] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(left, right)` halves of the canonical split.
    pub fn halves(&self) -> (&[Item], &[Item]) {
        self.0.split_at(self.0.len() / 2)
    }

    /// The total order on subsets: `self < other` iff every element of `self`
    /// is smaller than every element of `other`. Empty subsets precede
    /// everything.
    pub fn entirely_below(&self, other: &Subset) -> bool {
        match (self.0.last(), other.0.first()) {
            (Some(a), Some(b)) => a < b,
            _ => true,
        }
    }

    pub fn into_vec(self) -> Vec<Item> {
        self.0
    }
}

impl TryFrom<Vec<Item>> for Subset {
    type Error = Error;
    fn try_from(v: Vec<Item>) -> Result<Self> {
        Subset::new(v)
    }
}

impl From<Subset> for Vec<Item> {
    fn from(s: Subset) -> Self {
        s.0
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// One input set of bounded size: a transaction or an incidence list.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Item>", into = "Vec<Item>")]
pub struct BSet(Vec<Item>);

impl BSet {
    pub fn new(elements: Vec<Item>) -> Result<Self> {
        check_strictly_increasing(&elements)?;
        Ok(BSet(elements))
    }

    /// Sorts and deduplicates on ingestion.
    pub fn from_unsorted(mut elements: Vec<Item>) -> Result<Self> {
        elements.sort_unstable();
        elements.dedup();
        Self::new(elements)
    }

    pub fn elements(&self) -> &[Item] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: Item) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn is_superset_of(&self, s: &[Item]) -> bool {
        s.iter().all(|&x| self.contains(x))
    }
}

impl TryFrom<Vec<Item>> for BSet {
    type Error = Error;
    fn try_from(v: Vec<Item>) -> Result<Self> {
        BSet::new(v)
    }
}

impl From<BSet> for Vec<Item> {
    fn from(s: BSet) -> Self {
        s.0
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_rejects_unsorted_and_duplicates() {
        assert_eq!(Subset::new(vec![2, 1]), Err(Error::NotSorted));
        assert_eq!(Subset::new(vec![1, 1]), Err(Error::NotSorted));
        assert!(Subset::new(vec![]).is_ok());
    }

    #[test]
    fn bset_from_unsorted_dedups() {
        let t = BSet::from_unsorted(vec![3, 1, 2, 3]).unwrap();
        assert_eq!(t.elements(), &[1, 2, 3]);
    }

    #[test]
    fn element_outside_field_rejected() {
        assert_eq!(
            BSet::new(vec![FIELD_PRIME]),
            Err(Error::ElementOutOfField(FIELD_PRIME))
        );
    }

    #[test]
    fn halves_follow_floor_ceil_split() {
        let s = Subset::new(vec![1, 2, 3, 4, 5]).unwrap();
        let (l, r) = s.halves();
        assert_eq!(l, &[1, 2]);
        assert_eq!(r, &[3, 4, 5]);
    }

    #[test]
    fn subset_order() {
        let a = Subset::new(vec![1, 2]).unwrap();
        let b = Subset::new(vec![3, 9]).unwrap();
        let c = Subset::new(vec![2, 5]).unwrap();
        assert!(a.entirely_below(&b));
        assert!(!a.entirely_below(&c));
        assert!(Subset::default().entirely_below(&a));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(0, 0), 1);
    }
}
