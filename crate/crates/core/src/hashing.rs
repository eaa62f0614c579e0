//! Polynomial hashing over the Mersenne prime field `2^61 - 1`.
//!
//! A [`HashFunction`] of degree `d` evaluates a random polynomial with `d`
//! coefficients and reduces the result mod `q`, which gives a `d`-wise
//! independent map into `[q]` up to a bias of at most `q / P`. Subsets are
//! hashed by summing element hashes mod `q`; a k-subset is *sampled* when the
//! sums of its two canonical halves agree.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sets::{Item, Subset};

/// The Mersenne prime `2^61 - 1`.
pub const FIELD_PRIME: u64 = (1 << 61) - 1;

/// Largest accepted hash range; keeps the mod-q bias below `2^-20`.
pub const MAX_RANGE: u64 = FIELD_PRIME >> 20;

#[inline]
fn mul_mod(a: u64, b: u64) -> u64 {
    let prod = a as u128 * b as u128;
    let lo = (prod as u64) & FIELD_PRIME;
    let hi = (prod >> 61) as u64;
    let s = lo + hi;
    if s >= FIELD_PRIME {
        s - FIELD_PRIME
    } else {
        s
    }
}

#[inline]
fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= FIELD_PRIME {
        s - FIELD_PRIME
    } else {
        s
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a master seed and a path of indices, e.g.
/// `(copy, run)`. Distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &p| {
        mix64(acc ^ mix64(p.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

#[derive(Clone, Debug)]
enum Kind {
    Polynomial(Vec<u64>),
    Table(HashMap<Item, u64>),
}

/// An element-level hash function into `[q]`.
///
/// Immutable after construction, so it can be shared freely across threads.
#[derive(Clone, Debug)]
pub struct HashFunction {
    kind: Kind,
    range: u64,
    seed: u64,
}

impl HashFunction {
    /// A `2k`-wise independent hash into `[q]`, i.e. degree `2k - 1`.
    pub fn new(seed: u64, k: usize, q: u64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Self::with_degree(seed, 2 * k, q)
    }

    /// A hash with `degree` random coefficients (`degree`-wise independent).
    pub fn with_degree(seed: u64, degree: usize, q: u64) -> Result<Self> {
        check_range(q)?;
        if degree == 0 {
            return Err(Error::InvalidParameter("degree must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..degree).map(|_| rng.gen_range(0..FIELD_PRIME)).collect();
        Ok(HashFunction {
            kind: Kind::Polynomial(coeffs),
            range: q,
            seed,
        })
    }

    /// Builds a polynomial hash from explicit coefficients (lowest degree
    /// first). Coefficients are reduced into the field.
    pub fn from_coefficients(coeffs: Vec<u64>, q: u64) -> Result<Self> {
        check_range(q)?;
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one coefficient".into(),
            ));
        }
        let coeffs = coeffs.into_iter().map(|c| c % FIELD_PRIME).collect();
        Ok(HashFunction {
            kind: Kind::Polynomial(coeffs),
            range: q,
            seed: 0,
        })
    }

    /// Table-backed hash with explicit values. Elements missing from the
    /// table hash to 0; values are reduced mod `q`.
    pub fn from_table<I>(table: I, q: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (Item, u64)>,
    {
        check_range(q)?;
        let table = table.into_iter().map(|(x, v)| (x, v % q)).collect();
        Ok(HashFunction {
            kind: Kind::Table(table),
            range: q,
            seed: 0,
        })
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampling probability `p = 1 / q`.
    pub fn probability(&self) -> f64 {
        1.0 / self.range as f64
    }

    /// Number of coefficients for polynomial hashes; `None` for tables.
    pub fn degree(&self) -> Option<usize> {
        match &self.kind {
            Kind::Polynomial(c) => Some(c.len()),
            Kind::Table(_) => None,
        }
    }

    /// `((sum_j c_j x^j) mod P) mod q`. `x` must be below the field prime.
    #[inline]
    pub fn eval(&self, x: Item) -> u64 {
        match &self.kind {
            Kind::Polynomial(coeffs) => {
                debug_assert!(x < FIELD_PRIME);
                let v = coeffs
                    .iter()
                    .rev()
                    .fold(0, |acc, &c| add_mod(mul_mod(acc, x), c));
                v % self.range
            }
            Kind::Table(t) => t.get(&x).copied().unwrap_or(0),
        }
    }

    /// Sum of element hashes mod `q`. The empty set hashes to 0.
    pub fn subset_hash(&self, elements: &[Item]) -> u64 {
        elements
            .iter()
            .fold(0, |acc, &x| add_range(acc, self.eval(x), self.range))
    }

    /// True iff the two canonical halves of `s` have equal subset hash.
    pub fn sampling_condition(&self, s: &Subset, k: usize) -> Result<bool> {
        if s.len() != k {
            return Err(Error::SubsetSize {
                expected: k,
                actual: s.len(),
            });
        }
        let (l, r) = s.halves();
        Ok(self.subset_hash(l) == self.subset_hash(r))
    }

    /// The itemset-level bucket `(h(left) + h(right)) mod q`, which equals the
    /// subset hash of the whole itemset.
    pub fn bucket(&self, s: &Subset) -> u64 {
        self.subset_hash(s.as_slice())
    }
}

#[inline]
pub(crate) fn add_range(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

fn check_range(q: u64) -> Result<()> {
    if q == 0 || q > MAX_RANGE {
        return Err(Error::HashRange { q, max: MAX_RANGE });
    }
    Ok(())
}
