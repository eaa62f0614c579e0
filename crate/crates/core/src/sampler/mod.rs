//! Consistent sampling of the k-subsets of one set.
//!
//! A k-subset is sampled when its left half (first `k / 2` elements) and right
//! half collide under the subset hash. Rather than touching all `C(b, k)`
//! subsets, both halves are enumerated in hash order with
//! [`HalfEnumerator`] and only colliding pairs are combined.

mod enumerator;

use std::ops::Range;

use itertools::Itertools;
use serde::Serialize;

pub use enumerator::{EnumeratorStats, HalfEnumerator, HalfRef, HeadRun, SortedHalves, ValueGroup};

use crate::error::{Error, Result};
use crate::hashing::{add_range, HashFunction};
use crate::sets::{BSet, Item, Subset};
use enumerator::{DescendingWindow, HalfSpace};

/// Counters collected during one sampling call.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SamplerStats {
    pub enumerators: Vec<EnumeratorStats>,
    /// Half-subset pairs examined before the ordering filter.
    pub pairs_attempted: u64,
    pub emitted: u64,
}

/// Streams all `half_size`-subsets of `t` in nondecreasing hash order.
pub fn enumerate_sorted_halves<'a>(
    t: &'a BSet,
    h: &HashFunction,
    half_size: usize,
) -> SortedHalves<'a> {
    SortedHalves::new(t, h, half_size)
}

pub(crate) fn element_hashes(t: &[Item], h: &HashFunction) -> Vec<u64> {
    t.iter().map(|&x| h.eval(x)).collect()
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2, got {k}"
        )));
    }
    Ok(())
}

/// One side of a collision search: subsets of `size` drawn from index range
/// `pool`, keyed by `(subset hash + offset) mod q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Side {
    pub pool: Range<usize>,
    pub size: usize,
    pub offset: u64,
}

/// Finds every pair `(A, B)` with equal keys and `max(A) < min(B)` and hands
/// the concatenated (hence sorted) element indices to `emit`.
pub(crate) fn collide<F>(
    hashes: &[u64],
    q: u64,
    left: Side,
    right: Side,
    stats: &mut SamplerStats,
    mut emit: F,
) where
    F: FnMut(&[u32]),
{
    if left.size > left.pool.len() || right.size > right.pool.len() {
        return;
    }
    let mut buf = Vec::with_capacity(left.size + right.size);

    if left == right {
        let mut e = HalfEnumerator::from_space(HalfSpace::new(
            hashes,
            left.pool,
            left.size,
            left.offset,
            q,
        ));
        while let Some(r) = e.peek_value() {
            let g = e.output_next(r).expect("ascending value");
            let sp = e.space();
            for a in e.members(&g) {
                let a_max = sp.max_index(a);
                for b in e.members(&g) {
                    stats.pairs_attempted += 1;
                    if a_max < sp.min_index(b) {
                        buf.clear();
                        sp.write(a, &mut buf);
                        sp.write(b, &mut buf);
                        stats.emitted += 1;
                        emit(&buf);
                    }
                }
            }
        }
        stats.enumerators.push(e.stats().clone());
        return;
    }

    let mut el =
        HalfEnumerator::from_space(HalfSpace::new(hashes, left.pool, left.size, left.offset, q));
    let mut er = HalfEnumerator::from_space(HalfSpace::new(
        hashes,
        right.pool,
        right.size,
        right.offset,
        q,
    ));
    // the two queues advance in lockstep over ascending values
    while let (Some(vl), Some(vr)) = (el.peek_value(), er.peek_value()) {
        if vl < vr {
            el.skip_below(vr);
            continue;
        }
        if vr < vl {
            er.skip_below(vl);
            continue;
        }
        let gl = el.output_next(vl).expect("ascending value");
        let gr = er.output_next(vl).expect("ascending value");
        let (sl, sr) = (el.space(), er.space());
        for a in el.members(&gl) {
            let a_max = sl.max_index(a);
            for b in er.members(&gr) {
                stats.pairs_attempted += 1;
                if a_max < sr.min_index(b) {
                    buf.clear();
                    sl.write(a, &mut buf);
                    sr.write(b, &mut buf);
                    stats.emitted += 1;
                    emit(&buf);
                }
            }
        }
    }
    stats.enumerators.push(el.stats().clone());
    stats.enumerators.push(er.stats().clone());
}

/// Calls `f` with the elements of every sampled k-subset of `t`.
pub fn visit_samples<F>(t: &BSet, h: &HashFunction, k: usize, mut f: F) -> Result<SamplerStats>
where
    F: FnMut(&[Item]),
{
    check_k(k)?;
    let el = t.elements();
    let hashes = element_hashes(el, h);
    let mut stats = SamplerStats::default();
    let mut items = Vec::with_capacity(k);
    let all = 0..el.len();
    collide(
        &hashes,
        h.range(),
        Side {
            pool: all.clone(),
            size: k / 2,
            offset: 0,
        },
        Side {
            pool: all,
            size: k - k / 2,
            offset: 0,
        },
        &mut stats,
        |idx| {
            items.clear();
            items.extend(idx.iter().map(|&i| el[i as usize]));
            assert!(
                items.windows(2).all(|w| w[0] < w[1]),
                "repeated element in a combined subset"
            );
            f(&items);
        },
    );
    Ok(stats)
}

/// Exactly the k-subsets of `t` that satisfy the sampling condition, sorted.
pub fn sample_bset(t: &BSet, h: &HashFunction, k: usize) -> Result<Vec<Subset>> {
    Ok(sample_bset_with_stats(t, h, k)?.0)
}

pub fn sample_bset_with_stats(
    t: &BSet,
    h: &HashFunction,
    k: usize,
) -> Result<(Vec<Subset>, SamplerStats)> {
    let mut out = Vec::new();
    let stats = visit_samples(t, h, k, |s| {
        out.push(Subset::from_sorted_unchecked(s.to_vec()))
    })?;
    out.sort_unstable();
    Ok((out, stats))
}

/// Same output as [`sample_bset`], trading time for space: the `l` largest
/// elements of each half are fixed by an outer loop and only the remaining
/// `k / 2 - l` and `k - k / 2 - l` elements are matched through the queues.
pub fn sample_bset_tradeoff(t: &BSet, h: &HashFunction, k: usize, l: usize) -> Result<Vec<Subset>> {
    check_k(k)?;
    if l > k / 2 {
        return Err(Error::InvalidParameter(format!(
            "trade-off parameter {l} exceeds k / 2 = {}",
            k / 2
        )));
    }
    if l == 0 {
        return sample_bset(t, h, k);
    }
    let el = t.elements();
    let b = el.len();
    let q = h.range();
    let hashes = element_hashes(el, h);
    let (inner_l, inner_r) = (k / 2 - l, k - k / 2 - l);
    let mut stats = SamplerStats::default();
    let mut out = Vec::new();

    for fixed_l in (0..b).combinations(l) {
        let (fl_min, fl_max) = (fixed_l[0], fixed_l[l - 1]);
        if fl_min < inner_l {
            continue;
        }
        let hl = fixed_l
            .iter()
            .fold(0, |acc, &i| add_range(acc, hashes[i], q));
        for fixed_r in (fl_max + 1..b).combinations(l) {
            let fr_min = fixed_r[0];
            if fr_min - fl_max - 1 < inner_r {
                continue;
            }
            let hr = fixed_r
                .iter()
                .fold(0, |acc, &i| add_range(acc, hashes[i], q));
            // h(innerL) + h(F_l) = h(innerR) + h(F_r)
            let shift = add_range(hr, q - hl, q) % q;
            collide(
                &hashes,
                q,
                Side {
                    pool: 0..fl_min,
                    size: inner_l,
                    offset: 0,
                },
                Side {
                    pool: fl_max + 1..fr_min,
                    size: inner_r,
                    offset: shift,
                },
                &mut stats,
                |idx| {
                    let (a, bb) = idx.split_at(inner_l);
                    let items: Vec<Item> = a
                        .iter()
                        .map(|&i| el[i as usize])
                        .chain(fixed_l.iter().map(|&i| el[i]))
                        .chain(bb.iter().map(|&i| el[i as usize]))
                        .chain(fixed_r.iter().map(|&i| el[i]))
                        .collect();
                    out.push(Subset::from_sorted_unchecked(items));
                },
            );
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn check_bucket_range(range: &Range<u64>, q: u64) -> Result<()> {
    if range.start >= range.end || range.end > q {
        return Err(Error::BucketRange {
            start: range.start,
            end: range.end,
            q,
        });
    }
    Ok(())
}

/// Calls `f(items, bucket)` for every k-subset of `t` whose bucket
/// `(h(left) + h(right)) mod q` lies in `range`.
///
/// Left halves come from an ascending enumerator; for each left value `a` the
/// matching right halves form the window `[lo - a, lo - a + w)` (mod `q`),
/// which slides downward as `a` grows and is served by a descending window.
pub fn visit_range<F>(
    t: &BSet,
    h: &HashFunction,
    k: usize,
    range: Range<u64>,
    mut f: F,
) -> Result<SamplerStats>
where
    F: FnMut(&[Item], u64),
{
    check_k(k)?;
    let q = h.range();
    check_bucket_range(&range, q)?;
    let el = t.elements();
    let b = el.len();
    let mut stats = SamplerStats::default();
    let (ls, rs) = (k / 2, k - k / 2);
    if rs > b {
        return Ok(stats);
    }
    let hashes = element_hashes(el, h);
    let width = range.end - range.start;
    let mut left = HalfEnumerator::from_space(HalfSpace::new(&hashes, 0..b, ls, 0, q));
    let mut right = DescendingWindow::new(HalfSpace::new(&hashes, 0..b, rs, 0, q));
    let mut items = Vec::with_capacity(k);

    while let Some(a) = left.peek_value() {
        let g = left.output_next(a).expect("ascending value");
        let c = range.start + q - a;
        right.lower_entry(c);
        right.lower_exit(c + width);
        let (sl, sr) = (left.space(), right.space());
        for x in left.members(&g) {
            let x_max = sl.max_index(x);
            for y in right.members() {
                stats.pairs_attempted += 1;
                if x_max < sr.min_index(y) {
                    let mut idx = Vec::with_capacity(k);
                    sl.write(x, &mut idx);
                    sr.write(y, &mut idx);
                    items.clear();
                    items.extend(idx.iter().map(|&i| el[i as usize]));
                    let bucket = hashes_sum(&hashes, &idx, q);
                    debug_assert!(range.contains(&bucket));
                    stats.emitted += 1;
                    f(&items, bucket);
                }
            }
        }
    }
    stats.enumerators.push(left.stats().clone());
    stats.enumerators.push(right.stats().clone());
    Ok(stats)
}

fn hashes_sum(hashes: &[u64], idx: &[u32], q: u64) -> u64 {
    idx.iter()
        .fold(0, |acc, &i| add_range(acc, hashes[i as usize], q))
}

/// Exactly the k-subsets of `t` whose bucket lies in `range`, sorted.
pub fn sample_bset_range(
    t: &BSet,
    h: &HashFunction,
    k: usize,
    range: Range<u64>,
) -> Result<Vec<Subset>> {
    let mut out = Vec::new();
    visit_range(t, h, k, range, |s, _| {
        out.push(Subset::from_sorted_unchecked(s.to_vec()))
    })?;
    out.sort_unstable();
    Ok(out)
}

/// Reference sampler: checks the sampling condition on all `C(b, k)` subsets.
pub fn brute_force_sample(t: &BSet, h: &HashFunction, k: usize) -> Vec<Subset> {
    t.elements()
        .iter()
        .copied()
        .combinations(k)
        .map(Subset::from_sorted_unchecked)
        .filter(|s| h.sampling_condition(s, k).unwrap_or(false))
        .collect()
}

/// Reference range sampler: filters all k-subsets by bucket.
pub fn brute_force_range(t: &BSet, h: &HashFunction, k: usize, range: Range<u64>) -> Vec<Subset> {
    t.elements()
        .iter()
        .copied()
        .combinations(k)
        .map(Subset::from_sorted_unchecked)
        .filter(|s| range.contains(&h.bucket(s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::binomial;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(entries: &[(u64, u64)], q: u64) -> HashFunction {
        HashFunction::from_table(entries.iter().copied(), q).unwrap()
    }

    fn set(v: &[u64]) -> BSet {
        BSet::from_unsorted(v.to_vec()).unwrap()
    }

    fn sub(v: &[u64]) -> Subset {
        Subset::new(v.to_vec()).unwrap()
    }

    fn five_table() -> HashFunction {
        table(&[(1, 3), (2, 5), (3, 2), (4, 6), (5, 0)], 7)
    }

    fn random_instance(rng: &mut ChaCha8Rng, max_b: usize) -> BSet {
        let b = rng.gen_range(0..=max_b);
        let el: Vec<u64> = (0..b).map(|_| rng.gen_range(0..60)).collect();
        BSet::from_unsorted(el).unwrap()
    }

    #[test]
    fn five_element_example() {
        let t = set(&[1, 2, 3, 5, 4]);
        assert_eq!(
            sample_bset(&t, &five_table(), 4).unwrap(),
            vec![sub(&[1, 2, 3, 4])]
        );
        assert_eq!(
            brute_force_sample(&t, &five_table(), 4),
            vec![sub(&[1, 2, 3, 4])]
        );
    }

    #[test]
    fn q_one_samples_everything() {
        let h = HashFunction::new(1, 3, 1).unwrap();
        let t = set(&[4, 8, 15, 16, 23, 42]);
        for k in 2..=6 {
            assert_eq!(
                sample_bset(&t, &h, k).unwrap().len() as u128,
                binomial(6, k)
            );
        }
    }

    #[test]
    fn too_small_set_is_empty() {
        let h = HashFunction::new(1, 3, 1).unwrap();
        assert!(sample_bset(&set(&[1, 2]), &h, 3).unwrap().is_empty());
        assert!(sample_bset(&BSet::default(), &h, 2).unwrap().is_empty());
        assert!(brute_force_sample(&BSet::default(), &h, 2).is_empty());
    }

    #[test]
    fn k_below_two_rejected() {
        let h = HashFunction::new(1, 1, 3).unwrap();
        assert!(sample_bset(&set(&[1, 2]), &h, 1).unwrap_err().is_usage());
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..400 {
            let t = random_instance(&mut rng, 12);
            let k = rng.gen_range(2..=8);
            let q = [1, 2, 7, 64][rng.gen_range(0..4)];
            let h = HashFunction::new(rng.gen(), k, q).unwrap();
            assert_eq!(
                sample_bset(&t, &h, k).unwrap(),
                brute_force_sample(&t, &h, k)
            );
        }
    }

    #[test]
    fn tradeoff_examples() {
        let t = set(&[1, 2, 3, 4, 5]);
        for l in 0..=2 {
            assert_eq!(
                sample_bset_tradeoff(&t, &five_table(), 4, l).unwrap(),
                vec![sub(&[1, 2, 3, 4])],
                "l = {l}"
            );
        }
        assert!(sample_bset_tradeoff(&t, &five_table(), 4, 3)
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn tradeoff_matches_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let t = random_instance(&mut rng, 11);
            let k = rng.gen_range(2..=7);
            let q = [1, 3, 7][rng.gen_range(0..3)];
            let h = HashFunction::new(rng.gen(), k, q).unwrap();
            let expected = brute_force_sample(&t, &h, k);
            for l in 0..=k / 2 {
                assert_eq!(
                    sample_bset_tradeoff(&t, &h, k, l).unwrap(),
                    expected,
                    "k={k} l={l}"
                );
            }
        }
    }

    #[test]
    fn range_examples() {
        let h = table(&[(1, 3), (2, 5), (3, 2), (4, 6)], 7);
        let t = set(&[1, 2, 3, 4]);
        assert_eq!(
            sample_bset_range(&t, &h, 4, 2..3).unwrap(),
            vec![sub(&[1, 2, 3, 4])]
        );
        assert!(sample_bset_range(&t, &h, 4, 3..4).unwrap().is_empty());
        let t = set(&[1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(sample_bset_range(&t, &h, 3, 0..7).unwrap().len(), 35);
        assert!(sample_bset_range(&t, &h, 3, 4..4).unwrap_err().is_usage());
        assert!(sample_bset_range(&t, &h, 3, 4..8).unwrap_err().is_usage());
    }

    #[test]
    fn range_matches_bucket_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let t = random_instance(&mut rng, 10);
            let k = rng.gen_range(2..=6);
            let q = rng.gen_range(1..=20);
            let h = HashFunction::new(rng.gen(), k, q).unwrap();
            let start = rng.gen_range(0..q);
            let end = rng.gen_range(start + 1..=q);
            assert_eq!(
                sample_bset_range(&t, &h, k, start..end).unwrap(),
                brute_force_range(&t, &h, k, start..end),
                "k={k} q={q} range={start}..{end}"
            );
        }
    }

    #[test]
    fn stats_respect_space_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let t = random_instance(&mut rng, 12);
            let b = t.len();
            let k = rng.gen_range(2..=8);
            let h = HashFunction::new(rng.gen(), k, 7).unwrap();
            let (out, stats) = sample_bset_with_stats(&t, &h, k).unwrap();
            assert_eq!(stats.emitted as usize, out.len());
            for e in &stats.enumerators {
                assert!(e.values_increasing);
                assert_eq!(e.list_len as u128, binomial(b, e.tail_size));
                assert!(e.max_live as u128 <= binomial(b, e.head_size));
                assert!(e.max_group_runs <= e.head_count);
            }
        }
    }

    #[test]
    fn consistent_across_containing_sets() {
        let h = HashFunction::new(77, 3, 5).unwrap();
        let a = set(&[1, 2, 3, 4, 5, 6, 7, 8]);
        let b = set(&[2, 3, 5, 7, 11, 13]);
        let sa = sample_bset(&a, &h, 3).unwrap();
        let sb = sample_bset(&b, &h, 3).unwrap();
        for s in brute_force_sample(&set(&[2, 3, 5, 7]), &HashFunction::new(0, 1, 1).unwrap(), 3) {
            assert_eq!(sa.contains(&s), sb.contains(&s), "{s}");
        }
    }
}
