//! One-pass estimation of the number of frequent (or otherwise interesting)
//! k-itemsets in a transaction stream.
//!
//! Three layers:
//! - [`SingleRunEstimator`] keeps the exact frequency of every consistently
//!   sampled itemset for one hash range `q` and gives up if the sample leaves
//!   `[s, 32 s]`.
//! - A guessing layer runs one single-run estimator per guess
//!   `z_i = 2^i C(b, k)` of the number of distinct itemsets, with
//!   `q_i = max(ceil(z_i / 2s), 1)`, and keeps the valid run with the smallest
//!   `i`.
//! - [`estimate_frequent_itemsets`] runs `ceil(log2(2 / delta))` independent
//!   guessing copies and multiplies the medians of their ratio and size
//!   estimates.
//!
//! All runs of all copies consume the same single pass over the stream.

use std::borrow::Borrow;
use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::{derive_seed, HashFunction, MAX_RANGE};
use crate::parallel::for_each_mut;
use crate::sampler::visit_samples;
use crate::sets::{binomial, BSet, Item, Subset};

const CHUNK: usize = 256;

/// Default cap on distinct itemsets tracked by the exact oracle.
pub const DEFAULT_ORACLE_CAP: usize = 20_000_000;

impl Borrow<[Item]> for Subset {
    fn borrow(&self) -> &[Item] {
        self.as_slice()
    }
}

/// Interestingness test applied to `(itemset, frequency)` at the end of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// `frequency >= min_support`.
    MinSupport(u64),
    /// `lo <= frequency <= hi`.
    FrequencyRange { lo: u64, hi: u64 },
}

impl Predicate {
    pub fn matches(&self, _itemset: &Subset, frequency: u64) -> bool {
        match *self {
            Predicate::MinSupport(t) => frequency >= t,
            Predicate::FrequencyRange { lo, hi } => (lo..=hi).contains(&frequency),
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must lie in (0, 1], got {v}"
        )));
    }
    Ok(())
}

/// `ceil(8 / (ratio * (epsilon / 2)^2))`.
pub fn sample_target(ratio: f64, epsilon: f64) -> usize {
    let eps = epsilon / 2.0;
    let s = 8.0 / (ratio * eps * eps);
    // absorb rounding noise such as 4000.000000001
    (s - 1e-9).ceil().max(1.0) as usize
}

/// `floor(log2 m) + 1`.
pub fn ladder_len(m: usize) -> usize {
    (usize::BITS - m.max(1).leading_zeros()) as usize
}

/// `ceil(log2(2 / delta))`.
pub fn copy_count(delta: f64) -> usize {
    ((2.0 / delta).log2() - 1e-12).ceil().max(1.0) as usize
}

/// Parameters of the itemset estimator. Derived quantities (`s`, number of
/// runs and copies) are computed on demand, never stored.
#[derive(Clone, Debug, Serialize)]
pub struct EstimatorConfig {
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Declared stream length.
    pub m: usize,
    /// Maximum transaction size.
    pub b_max: usize,
    pub predicate: Predicate,
    pub master_seed: u64,
    sample_size: Option<usize>,
    fixed_q: Option<u64>,
}

impl EstimatorConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        alpha: f64,
        epsilon: f64,
        delta: f64,
        m: usize,
        b_max: usize,
        predicate: Predicate,
        master_seed: u64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {k}"
            )));
        }
        check_unit("alpha", alpha)?;
        check_unit("epsilon", epsilon)?;
        check_unit("delta", delta)?;
        if m == 0 {
            return Err(Error::InvalidParameter(
                "declared stream length m must be positive".into(),
            ));
        }
        Ok(EstimatorConfig {
            k,
            alpha,
            epsilon,
            delta,
            m,
            b_max,
            predicate,
            master_seed,
            sample_size: None,
            fixed_q: None,
        })
    }

    /// Overrides the target sample size `s` (testing hook).
    pub fn with_sample_size(mut self, s: usize) -> Self {
        self.sample_size = Some(s);
        self
    }

    /// Forces every run to use hash range `q` (testing hook; `q = 1` makes
    /// every run exhaustive).
    pub fn with_fixed_q(mut self, q: u64) -> Result<Self> {
        if q == 0 || q > MAX_RANGE {
            return Err(Error::HashRange { q, max: MAX_RANGE });
        }
        self.fixed_q = Some(q);
        Ok(self)
    }

    pub fn sample_target(&self) -> usize {
        self.sample_size
            .unwrap_or_else(|| sample_target(self.alpha, self.epsilon))
    }

    pub fn num_runs(&self) -> usize {
        ladder_len(self.m)
    }

    pub fn num_copies(&self) -> usize {
        copy_count(self.delta)
    }

    pub(crate) fn plan(&self) -> LadderPlan {
        LadderPlan {
            s: self.sample_target(),
            num_runs: self.num_runs(),
            num_copies: self.num_copies(),
            base_guess: binomial(self.b_max, self.k),
            fixed_q: self.fixed_q,
            master_seed: self.master_seed,
            hash_k: self.k,
            queue_bound: binomial(self.b_max, self.k.div_ceil(2).div_ceil(2)),
        }
    }

    /// Hash range of run `i`.
    pub fn range_for_run(&self, i: usize) -> u64 {
        self.plan().q_for(i)
    }
}

/// Why a run produced no estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sentinel {
    /// More than `32 s` distinct itemsets were sampled.
    Overflow,
    /// Fewer than `s` distinct itemsets were sampled by a non-exhaustive run.
    TooFew,
    /// Nothing was sampled.
    Empty,
}

/// Ratio and size estimates of one valid run or copy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub alpha_hat: f64,
    pub z_hat: f64,
}

/// Result of a [`SingleRunEstimator`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub q: u64,
    /// Distinct sampled itemsets `s'`.
    pub sampled: usize,
    /// Sampled itemsets satisfying the predicate.
    pub matching: usize,
    pub estimate: Option<Estimate>,
    pub sentinel: Option<Sentinel>,
}

/// Maintains the table of sampled itemsets for one hash function.
///
/// Frequencies in the table are exact: the sampling is consistent, so every
/// occurrence of a sampled itemset is seen.
#[derive(Clone, Debug)]
pub struct SingleRunEstimator {
    h: HashFunction,
    s: usize,
    table: HashMap<Subset, u64>,
    overflow: bool,
}

impl SingleRunEstimator {
    pub fn new(h: HashFunction, s: usize) -> Self {
        SingleRunEstimator {
            h,
            s,
            table: HashMap::new(),
            overflow: false,
        }
    }

    pub fn hash(&self) -> &HashFunction {
        &self.h
    }

    /// Counts one occurrence of a sampled itemset. Once the table exceeds
    /// `32 s` entries the run is dead for good.
    pub fn record(&mut self, itemset: &[Item]) {
        if self.overflow {
            return;
        }
        if let Some(c) = self.table.get_mut(itemset) {
            *c += 1;
            return;
        }
        self.table
            .insert(Subset::from_sorted_unchecked(itemset.to_vec()), 1);
        if self.table.len() > 32 * self.s {
            self.overflow = true;
            self.table = HashMap::new();
        }
    }

    /// Feeds the consistently sampled k-itemsets of one transaction.
    pub fn observe(&mut self, t: &BSet, k: usize) -> Result<()> {
        if self.overflow {
            return Ok(());
        }
        let h = self.h.clone();
        visit_samples(t, &h, k, |s| self.record(s))?;
        Ok(())
    }

    pub fn has_overflowed(&self) -> bool {
        self.overflow
    }

    /// The sample table, or `None` after overflow.
    pub fn table(&self) -> Option<&HashMap<Subset, u64>> {
        (!self.overflow).then_some(&self.table)
    }

    pub fn finish<M>(&self, matches: M) -> RunResult
    where
        M: Fn(&Subset, u64) -> bool,
    {
        let q = self.h.range();
        let sampled = self.table.len();
        let matching = self.table.iter().filter(|(s, &f)| matches(s, f)).count();
        let sentinel = if self.overflow {
            Some(Sentinel::Overflow)
        } else if sampled == 0 {
            Some(Sentinel::Empty)
        } else if sampled < self.s && q > 1 {
            // q = 1 sees every itemset, so a short table is the exact answer
            Some(Sentinel::TooFew)
        } else {
            None
        };
        let estimate = sentinel.is_none().then(|| Estimate {
            alpha_hat: matching as f64 / sampled as f64,
            z_hat: q as f64 * sampled as f64,
        });
        RunResult {
            q,
            sampled: if self.overflow { 0 } else { sampled },
            matching: if self.overflow { 0 } else { matching },
            estimate,
            sentinel,
        }
    }
}

/// Shape of the guess ladder shared by the itemset and graph estimators.
#[derive(Clone, Debug)]
pub(crate) struct LadderPlan {
    pub s: usize,
    pub num_runs: usize,
    pub num_copies: usize,
    /// `z_0`; run `i` guesses `2^i z_0` distinct items.
    pub base_guess: u128,
    pub fixed_q: Option<u64>,
    pub master_seed: u64,
    /// Hash independence is `2 * hash_k`.
    pub hash_k: usize,
    pub queue_bound: u128,
}

impl LadderPlan {
    pub fn guess(&self, i: usize) -> u128 {
        let shift = u32::try_from(i).unwrap_or(u32::MAX);
        self.base_guess
            .checked_shl(shift)
            .filter(|g| g >> shift == self.base_guess)
            .unwrap_or(u128::MAX)
    }

    pub fn q_for(&self, i: usize) -> u64 {
        if let Some(q) = self.fixed_q {
            return q;
        }
        let two_s = 2 * self.s.max(1) as u128;
        let q = self.guess(i).div_ceil(two_s).max(1);
        q.min(MAX_RANGE as u128) as u64
    }

    pub fn hash_for(&self, copy: usize, run: usize) -> Result<HashFunction> {
        let seed = derive_seed(self.master_seed, &[copy as u64, run as u64]);
        HashFunction::new(seed, self.hash_k, self.q_for(run))
    }
}

/// Per-run diagnostics in an [`EstimateReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub copy: usize,
    pub run: usize,
    pub z_guess: u64,
    pub q: u64,
    pub sampled: usize,
    pub matching: usize,
    pub alpha_hat: Option<f64>,
    pub z_hat: Option<f64>,
    pub sentinel: Option<Sentinel>,
}

/// Per-copy result: the valid run with the smallest index, if any.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CopyDiagnostics {
    pub copy: usize,
    pub selected_run: Option<usize>,
    pub alpha_hat: Option<f64>,
    pub z_hat: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceDiagnostics {
    /// Upper bound on live queue entries per sampler call.
    pub sampler_queue_bound: u64,
    /// Per-run table capacity `32 s`.
    pub table_cap: usize,
}

/// Outcome of the full estimator. `f_hat` is `None` when more than half of
/// the copies failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub alpha_hat: Option<f64>,
    pub z_hat: Option<f64>,
    pub f_hat: Option<f64>,
    pub sample_target: usize,
    pub num_runs: usize,
    pub num_copies: usize,
    pub stream_len: usize,
    pub space: SpaceDiagnostics,
    pub runs: Vec<RunDiagnostics>,
    pub copies: Vec<CopyDiagnostics>,
}

impl EstimateReport {
    pub fn is_failure(&self) -> bool {
        self.f_hat.is_none()
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// The median ratio as an exact fraction, when it is a single value rather
/// than the mean of two different middle values.
fn exact_median(mut v: Vec<(usize, usize)>) -> Option<(usize, usize)> {
    if v.is_empty() {
        return None;
    }
    let key = |&(a, b): &(usize, usize), &(c, d): &(usize, usize)| {
        (a as u128 * d as u128).cmp(&(c as u128 * b as u128))
    };
    v.sort_by(key);
    let n = v.len();
    if n % 2 == 1 {
        return Some(v[n / 2]);
    }
    (key(&v[n / 2 - 1], &v[n / 2]).is_eq()).then_some(v[n / 2])
}

struct LadderRun {
    copy: usize,
    run: usize,
    est: SingleRunEstimator,
}

/// `num_copies x num_runs` single-run estimators fed from one pass.
pub(crate) struct Ladder {
    plan: LadderPlan,
    runs: Vec<LadderRun>,
    consumed: usize,
}

impl Ladder {
    pub fn new(plan: LadderPlan) -> Result<Self> {
        Self::with_copies(plan.clone(), 0..plan.num_copies)
    }

    pub fn with_copies(plan: LadderPlan, copies: std::ops::Range<usize>) -> Result<Self> {
        let mut runs = Vec::new();
        for copy in copies {
            for run in 0..plan.num_runs {
                runs.push(LadderRun {
                    copy,
                    run,
                    est: SingleRunEstimator::new(plan.hash_for(copy, run)?, plan.s),
                });
            }
        }
        Ok(Ladder {
            plan,
            runs,
            consumed: 0,
        })
    }

    /// Fans a chunk of the stream out to every run.
    pub fn feed<I, F>(&mut self, chunk: &[I], observe: F) -> Result<()>
    where
        I: Sync,
        F: Fn(&mut SingleRunEstimator, &I) -> Result<()> + Sync + Send,
    {
        self.consumed += chunk.len();
        let errors = std::sync::Mutex::new(None);
        for_each_mut(&mut self.runs, |r| {
            for x in chunk {
                if let Err(e) = observe(&mut r.est, x) {
                    errors.lock().unwrap().get_or_insert(e);
                    return;
                }
            }
        });
        match errors.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn finish<M>(self, matches: M) -> EstimateReport
    where
        M: Fn(&Subset, u64) -> bool,
    {
        let plan = &self.plan;
        let mut runs = Vec::with_capacity(self.runs.len());
        let mut copies: Vec<CopyDiagnostics> = Vec::new();
        for r in &self.runs {
            let res = r.est.finish(&matches);
            runs.push(RunDiagnostics {
                copy: r.copy,
                run: r.run,
                z_guess: u64::try_from(plan.guess(r.run)).unwrap_or(u64::MAX),
                q: res.q,
                sampled: res.sampled,
                matching: res.matching,
                alpha_hat: res.estimate.map(|e| e.alpha_hat),
                z_hat: res.estimate.map(|e| e.z_hat),
                sentinel: res.sentinel,
            });
            match copies.last_mut() {
                Some(c) if c.copy == r.copy => {
                    if c.selected_run.is_none() && res.estimate.is_some() {
                        c.selected_run = Some(r.run);
                        c.alpha_hat = res.estimate.map(|e| e.alpha_hat);
                        c.z_hat = res.estimate.map(|e| e.z_hat);
                    }
                }
                _ => copies.push(CopyDiagnostics {
                    copy: r.copy,
                    selected_run: res.estimate.map(|_| r.run),
                    alpha_hat: res.estimate.map(|e| e.alpha_hat),
                    z_hat: res.estimate.map(|e| e.z_hat),
                }),
            }
        }
        let valid = copies.iter().filter(|c| c.selected_run.is_some()).count();
        let alpha_hat = median(copies.iter().filter_map(|c| c.alpha_hat).collect());
        let z_hat = median(copies.iter().filter_map(|c| c.z_hat).collect());
        let ratios: Vec<(usize, usize)> = copies
            .iter()
            .filter_map(|c| {
                let r = &runs
                    [c.copy * plan.num_runs + c.selected_run? - copies[0].copy * plan.num_runs];
                Some((r.matching, r.sampled))
            })
            .collect();
        let f_hat = match (alpha_hat, z_hat) {
            (Some(a), Some(z)) if valid >= copies.len().div_ceil(2) && valid > 0 => {
                Some(match exact_median(ratios) {
                    // multiply before dividing so integral answers come out exact
                    Some((num, den)) => num as f64 * z / den as f64,
                    None => a * z,
                })
            }
            _ => None,
        };
        EstimateReport {
            alpha_hat,
            z_hat,
            f_hat,
            sample_target: plan.s,
            num_runs: plan.num_runs,
            num_copies: copies.len(),
            stream_len: self.consumed,
            space: SpaceDiagnostics {
                sampler_queue_bound: u64::try_from(plan.queue_bound).unwrap_or(u64::MAX),
                table_cap: 32 * plan.s,
            },
            runs,
            copies,
        }
    }
}

/// Pulls the stream in chunks, enforcing the declared length and set size.
pub(crate) fn drive<I, T, F>(
    stream: I,
    m: usize,
    mut check: impl FnMut(&T) -> Result<()>,
    mut sink: F,
) -> Result<()>
where
    I: IntoIterator<Item = Result<T>>,
    F: FnMut(&[T]) -> Result<()>,
{
    let mut chunk = Vec::with_capacity(CHUNK);
    let mut seen = 0usize;
    for item in stream {
        let item = item?;
        seen += 1;
        if seen > m {
            return Err(Error::StreamTooLong { declared: m });
        }
        check(&item)?;
        chunk.push(item);
        if chunk.len() == CHUNK {
            sink(&chunk)?;
            chunk.clear();
        }
    }
    if !chunk.is_empty() {
        sink(&chunk)?;
    }
    Ok(())
}

fn check_size(b_max: usize) -> impl FnMut(&BSet) -> Result<()> {
    let mut line = 0;
    move |t| {
        line += 1;
        if t.len() > b_max {
            return Err(Error::Oversize {
                line,
                size: t.len(),
                max: b_max,
            });
        }
        Ok(())
    }
}

/// Runs one [`SingleRunEstimator`] with hash `h` over the stream.
pub fn single_run_estimator<I>(
    stream: I,
    h: HashFunction,
    cfg: &EstimatorConfig,
) -> Result<RunResult>
where
    I: IntoIterator<Item = Result<BSet>>,
{
    let mut est = SingleRunEstimator::new(h, cfg.sample_target());
    drive(stream, cfg.m, check_size(cfg.b_max), |chunk| {
        for t in chunk {
            est.observe(t, cfg.k)?;
        }
        Ok(())
    })?;
    Ok(est.finish(|s, f| cfg.predicate.matches(s, f)))
}

/// One guessing copy: returns the valid run with the smallest index, or
/// `None` if every run failed.
pub fn guessing_estimator<I>(
    stream: I,
    cfg: &EstimatorConfig,
    copy_index: usize,
) -> Result<Option<Estimate>>
where
    I: IntoIterator<Item = Result<BSet>>,
{
    let mut ladder = Ladder::with_copies(cfg.plan(), copy_index..copy_index + 1)?;
    let k = cfg.k;
    drive(stream, cfg.m, check_size(cfg.b_max), |chunk| {
        ladder.feed(chunk, |est, t| est.observe(t, k))
    })?;
    let report = ladder.finish(|s, f| cfg.predicate.matches(s, f));
    let copy = &report.copies[0];
    Ok(copy
        .alpha_hat
        .zip(copy.z_hat)
        .map(|(alpha_hat, z_hat)| Estimate { alpha_hat, z_hat }))
}

/// Estimates the number of interesting k-itemsets in one pass.
pub fn estimate_frequent_itemsets<I>(stream: I, cfg: &EstimatorConfig) -> Result<EstimateReport>
where
    I: IntoIterator<Item = Result<BSet>>,
{
    let mut ladder = Ladder::new(cfg.plan())?;
    let k = cfg.k;
    drive(stream, cfg.m, check_size(cfg.b_max), |chunk| {
        ladder.feed(chunk, |est, t| est.observe(t, k))
    })?;
    Ok(ladder.finish(|s, f| cfg.predicate.matches(s, f)))
}

/// Exact frequency of every k-itemset in the stream.
pub fn exact_frequencies<'a, I>(stream: I, k: usize, cap: usize) -> Result<HashMap<Subset, u64>>
where
    I: IntoIterator<Item = &'a BSet>,
{
    use itertools::Itertools;
    let mut freq: HashMap<Subset, u64> = HashMap::new();
    for t in stream {
        for c in t.elements().iter().copied().combinations(k) {
            *freq.entry(Subset::from_sorted_unchecked(c)).or_insert(0) += 1;
            if freq.len() > cap {
                return Err(Error::OracleTooLarge { cap });
            }
        }
    }
    Ok(freq)
}

/// Exact `(f, z)`: itemsets satisfying the predicate and distinct itemsets.
pub fn exact_count_oracle<'a, I>(stream: I, k: usize, predicate: &Predicate) -> Result<(u64, u64)>
where
    I: IntoIterator<Item = &'a BSet>,
{
    exact_count_oracle_capped(stream, k, predicate, DEFAULT_ORACLE_CAP)
}

pub fn exact_count_oracle_capped<'a, I>(
    stream: I,
    k: usize,
    predicate: &Predicate,
    cap: usize,
) -> Result<(u64, u64)>
where
    I: IntoIterator<Item = &'a BSet>,
{
    let freq = exact_frequencies(stream, k, cap)?;
    let f = freq
        .iter()
        .filter(|(s, &c)| predicate.matches(s, c))
        .count() as u64;
    Ok((f, freq.len() as u64))
}
