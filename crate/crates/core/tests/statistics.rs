//! Seeded statistical checks. All bounds are four standard errors unless
//! stated otherwise.

use css_core::estimators::{estimate_frequent_itemsets, EstimatorConfig, Predicate};
use css_core::hashing::{derive_seed, HashFunction};
use css_core::sampler::sample_bset_with_stats;
use css_core::sets::{binomial, BSet, Subset};

const N: u64 = 20_000;

fn within(hits: u64, trials: u64, p: f64) -> (bool, f64, f64) {
    let est = hits as f64 / trials as f64;
    let bound = 4.0 * (p * (1.0 - p) / trials as f64).sqrt();
    ((est - p).abs() <= bound, est, bound)
}

#[test]
fn subset_hash_is_uniform() {
    let s = [5u64, 9, 1000];
    let mut counts = [0u64; 8];
    for seed in 0..N {
        let h = HashFunction::new(derive_seed(1, &[seed]), 2, 8).unwrap();
        counts[h.subset_hash(&s) as usize] += 1;
    }
    for (r, &c) in counts.iter().enumerate() {
        let (ok, est, bound) = within(c, N, 0.125);
        assert!(ok, "r = {r}: {est} not within {bound} of 1/8");
    }
}

#[test]
fn sampling_rate_is_one_over_q() {
    let s = Subset::new(vec![2, 4, 8, 16]).unwrap();
    for q in [3u64, 5, 8] {
        let hits = (0..N)
            .filter(|&seed| {
                let h = HashFunction::new(derive_seed(2, &[seed]), 4, q).unwrap();
                h.sampling_condition(&s, 4).unwrap()
            })
            .count() as u64;
        let (ok, est, bound) = within(hits, N, 1.0 / q as f64);
        assert!(ok, "q = {q}: {est} not within {bound}");
    }
}

#[test]
fn itemset_buckets_are_pairwise_independent() {
    let (q, k) = (8u64, 3usize);
    let a = Subset::new(vec![1, 2, 3]).unwrap();
    let b = Subset::new(vec![2, 3, 7]).unwrap();
    let (ca, cb) = (2u64, 5u64);
    let hits = (0..N)
        .filter(|&seed| {
            let h = HashFunction::new(derive_seed(3, &[seed]), k, q).unwrap();
            h.bucket(&a) == ca && h.bucket(&b) == cb
        })
        .count() as u64;
    let (ok, est, bound) = within(hits, N, 1.0 / (q * q) as f64);
    assert!(ok, "{est} not within {bound} of 1/64");
}

#[test]
fn pair_work_tracks_expected_collisions() {
    let t = BSet::new((0..12).map(|x| x * 31 + 7).collect()).unwrap();
    let (k, q, seeds) = (4usize, 64u64, 50u64);
    let halves = binomial(12, 2) as f64;
    // one enumerator pairs every half with itself plus chance collisions
    let expected = seeds as f64 * (halves * halves / q as f64 + halves);
    let attempted: u64 = (0..seeds)
        .map(|s| {
            let h = HashFunction::new(derive_seed(4, &[s]), k, q).unwrap();
            sample_bset_with_stats(&t, &h, k).unwrap().1.pairs_attempted
        })
        .sum();
    let ratio = attempted as f64 / expected;
    assert!(
        (0.25..=4.0).contains(&ratio),
        "attempted {attempted}, expected about {expected}"
    );
}

/// 12 disjoint 5-sets twice and 108 once: f = 120, z = 1200 for k = 2 and
/// support 2.
fn blocks() -> Vec<BSet> {
    let block = |i: u64| BSet::new((i * 5..i * 5 + 5).collect()).unwrap();
    let mut out: Vec<BSet> = (0..12).flat_map(|i| [block(i), block(i)]).collect();
    out.extend((12..120).map(block));
    out
}

#[test]
fn estimator_concentrates_when_sampling() {
    let stream = blocks();
    let (eps, reps) = (0.4, 50u64);
    let mut hits = 0;
    let mut sampled_q = 0;
    for rep in 0..reps {
        // s = 20 pushes the exhaustive runs past the 32 s cap
        let cfg = EstimatorConfig::new(
            2,
            0.05,
            eps,
            0.2,
            stream.len(),
            5,
            Predicate::MinSupport(2),
            rep,
        )
        .unwrap()
        .with_sample_size(20);
        let r = estimate_frequent_itemsets(stream.iter().cloned().map(Ok), &cfg).unwrap();
        sampled_q += r
            .runs
            .iter()
            .filter(|x| r.copies[x.copy].selected_run == Some(x.run) && x.q > 1)
            .count();
        if r.f_hat.is_some_and(|f| (f - 120.0).abs() <= eps * 120.0) {
            hits += 1;
        }
    }
    assert!(sampled_q > 0);
    assert!(hits * 10 >= reps * 8, "{hits}/{reps} within tolerance");
}

#[test]
fn low_ratio_streams_do_not_overshoot() {
    // one 5-set twice among 2000 singletons: f = 10, z = 20000, ratio below alpha
    let block = |i: u64| BSet::new((i * 5..i * 5 + 5).collect()).unwrap();
    let mut stream = vec![block(0), block(0)];
    stream.extend((1..2000).map(block));
    let (eps, delta, reps) = (0.4, 0.2, 20u64);
    let mut ok = 0;
    for rep in 0..reps {
        let cfg = EstimatorConfig::new(
            2,
            0.5,
            eps,
            delta,
            stream.len(),
            5,
            Predicate::MinSupport(2),
            100 + rep,
        )
        .unwrap();
        let r = estimate_frequent_itemsets(stream.iter().cloned().map(Ok), &cfg).unwrap();
        assert!(r.runs.iter().all(|x| x.q > 1 || x.sentinel.is_some()));
        if r.f_hat.is_none_or(|f| f <= (1.0 + eps) * 10.0) {
            ok += 1;
        }
    }
    assert!(ok as f64 >= (1.0 - delta) * reps as f64, "{ok}/{reps}");
}
