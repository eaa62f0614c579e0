//! Clique and biclique counting over incidence streams, where each vertex
//! arrives once together with its full neighbor list.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    copy_count, estimate_frequent_itemsets, exact_count_oracle_capped, ladder_len, sample_target,
    EstimateReport, EstimatorConfig, Ladder, LadderPlan, Predicate, DEFAULT_ORACLE_CAP,
};
use crate::hashing::{HashFunction, MAX_RANGE};
use crate::sampler::{collide, element_hashes, SamplerStats, Side};
use crate::sets::{binomial, BSet, Item, Subset};

/// A graph given as one neighbor list per vertex.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IncidenceStream {
    lists: Vec<(Item, BSet)>,
    max_degree: usize,
}

impl IncidenceStream {
    /// Validates the lists: every vertex at most once, no self-loops, and no
    /// list longer than `max_degree` if given. Neighbor lists are sorted and
    /// deduplicated.
    pub fn new<I>(lists: I, max_degree: Option<usize>) -> Result<Self>
    where
        I: IntoIterator<Item = (Item, Vec<Item>)>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut delta = 0;
        for (i, (u, nbrs)) in lists.into_iter().enumerate() {
            let line = i + 1;
            if !seen.insert(u) {
                return Err(Error::DuplicateVertex { line, vertex: u });
            }
            let nbrs = BSet::from_unsorted(nbrs)?;
            if nbrs.contains(u) {
                return Err(Error::SelfLoop { line, vertex: u });
            }
            if let Some(max) = max_degree {
                if nbrs.len() > max {
                    return Err(Error::Oversize {
                        line,
                        size: nbrs.len(),
                        max,
                    });
                }
            }
            delta = delta.max(nbrs.len());
            out.push((u, nbrs));
        }
        Ok(IncidenceStream {
            lists: out,
            max_degree: max_degree.unwrap_or(delta),
        })
    }

    /// Builds the symmetric incidence lists of an undirected edge list.
    /// Vertices `0..n` all get a (possibly empty) list.
    pub fn from_edges(n: u64, edges: &[(Item, Item)]) -> Result<Self> {
        let mut adj: Vec<Vec<Item>> = vec![Vec::new(); n as usize];
        for &(a, b) in edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        Self::new(
            adj.into_iter().enumerate().map(|(u, l)| (u as Item, l)),
            None,
        )
    }

    pub fn lists(&self) -> &[(Item, BSet)] {
        &self.lists
    }

    /// Number of vertices (one per list).
    pub fn n(&self) -> usize {
        self.lists.len()
    }

    /// The degree bound `Δ`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }
}

/// Every k-vertex-set `S` containing `u` with `S \ {u}` inside `neighbors`
/// and satisfying the sampling condition of `h`. Unsorted.
pub fn star_sampler(u: Item, neighbors: &BSet, h: &HashFunction, k: usize) -> Result<Vec<Subset>> {
    let mut out = Vec::new();
    visit_stars(u, neighbors, h, k, |s| {
        out.push(Subset::from_sorted_unchecked(s.to_vec()))
    })?;
    Ok(out)
}

/// Callback form of [`star_sampler`].
pub fn visit_stars<F>(
    u: Item,
    neighbors: &BSet,
    h: &HashFunction,
    k: usize,
    mut f: F,
) -> Result<SamplerStats>
where
    F: FnMut(&[Item]),
{
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "star size k must be at least 3, got {k}"
        )));
    }
    let el = neighbors.elements();
    debug_assert!(!neighbors.contains(u));
    let hashes = element_hashes(el, h);
    let q = h.range();
    let hu = h.eval(u);
    let split = el.partition_point(|&v| v < u);
    let all = 0..el.len();
    let (lsize, rsize) = (k / 2, k - k / 2);
    let mut stats = SamplerStats::default();
    let mut items = Vec::with_capacity(k);
    let mut emit = |idx: &[u32]| {
        items.clear();
        items.extend(idx.iter().map(|&i| el[i as usize]));
        let at = items.partition_point(|&v| v < u);
        items.insert(at, u);
        f(&items);
    };

    // u in the left half: h(A) + h(u) = h(B), B above u
    collide(
        &hashes,
        q,
        Side {
            pool: all.clone(),
            size: lsize - 1,
            offset: hu,
        },
        Side {
            pool: split..el.len(),
            size: rsize,
            offset: 0,
        },
        &mut stats,
        &mut emit,
    );
    // u in the right half: h(A) = h(B) + h(u), A below u
    collide(
        &hashes,
        q,
        Side {
            pool: 0..split,
            size: lsize,
            offset: 0,
        },
        Side {
            pool: all,
            size: rsize - 1,
            offset: hu,
        },
        &mut stats,
        &mut emit,
    );
    Ok(stats)
}

/// Brute-force reference for [`star_sampler`], sorted.
pub fn brute_force_stars(u: Item, neighbors: &BSet, h: &HashFunction, k: usize) -> Vec<Subset> {
    use itertools::Itertools;
    let mut out: Vec<Subset> = neighbors
        .elements()
        .iter()
        .copied()
        .combinations(k - 1)
        .map(|mut c| {
            c.push(u);
            c.sort_unstable();
            Subset::from_sorted_unchecked(c)
        })
        .filter(|s| h.sampling_condition(s, k).unwrap_or(false))
        .collect();
    out.sort_unstable();
    out
}

/// Parameters shared by the graph estimators.
#[derive(Clone, Debug, Serialize)]
pub struct GraphConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub master_seed: u64,
    sample_size: Option<usize>,
    fixed_q: Option<u64>,
}

impl GraphConfig {
    pub fn new(gamma: f64, epsilon: f64, delta: f64, master_seed: u64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("epsilon", epsilon), ("delta", delta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(GraphConfig {
            gamma,
            epsilon,
            delta,
            master_seed,
            sample_size: None,
            fixed_q: None,
        })
    }

    pub fn with_sample_size(mut self, s: usize) -> Self {
        self.sample_size = Some(s);
        self
    }

    pub fn with_fixed_q(mut self, q: u64) -> Result<Self> {
        if q == 0 || q > MAX_RANGE {
            return Err(Error::HashRange { q, max: MAX_RANGE });
        }
        self.fixed_q = Some(q);
        Ok(self)
    }

    pub fn sample_target(&self) -> usize {
        self.sample_size
            .unwrap_or_else(|| sample_target(self.gamma, self.epsilon))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CliqueReport {
    pub k: usize,
    pub k_cliques_hat: Option<f64>,
    #[serde(flatten)]
    pub estimate: EstimateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BicliqueReport {
    pub min_left: u64,
    pub j: usize,
    pub bicliques_hat: Option<f64>,
    #[serde(flatten)]
    pub estimate: EstimateReport,
}

/// Estimates the number of k-cliques. A sampled vertex set counts as a
/// clique iff the star on it was seen at all k of its vertices.
pub fn clique_estimator(g: &IncidenceStream, k: usize, cfg: &GraphConfig) -> Result<CliqueReport> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "clique size k must be at least 3, got {k}"
        )));
    }
    let plan = LadderPlan {
        s: cfg.sample_target(),
        num_runs: ladder_len(g.n()),
        num_copies: copy_count(cfg.delta),
        base_guess: binomial(g.max_degree(), k - 1),
        fixed_q: cfg.fixed_q,
        master_seed: cfg.master_seed,
        hash_k: k,
        queue_bound: binomial(g.max_degree(), k.div_ceil(2).div_ceil(2)),
    };
    let mut ladder = Ladder::new(plan)?;
    for chunk in g.lists().chunks(256) {
        ladder.feed(chunk, |est, (u, nbrs)| {
            let h = est.hash().clone();
            visit_stars(*u, nbrs, &h, k, |s| est.record(s))?;
            Ok(())
        })?;
    }
    let kk = k as u64;
    let estimate = ladder.finish(|_, count| count == kk);
    Ok(CliqueReport {
        k,
        k_cliques_hat: estimate.f_hat,
        estimate,
    })
}

/// Estimates the number of `(i+, j)`-bicliques: distinct j-sets of vertices
/// that appear together in at least `i` neighbor lists.
pub fn biclique_estimator(
    g: &IncidenceStream,
    i: u64,
    j: usize,
    cfg: &GraphConfig,
) -> Result<BicliqueReport> {
    if i < 1 {
        return Err(Error::InvalidParameter(
            "left side size must be at least 1".into(),
        ));
    }
    let mut ic = EstimatorConfig::new(
        j,
        cfg.gamma,
        cfg.epsilon,
        cfg.delta,
        g.n().max(1),
        g.max_degree(),
        Predicate::MinSupport(i),
        cfg.master_seed,
    )?;
    if let Some(s) = cfg.sample_size {
        ic = ic.with_sample_size(s);
    }
    if let Some(q) = cfg.fixed_q {
        ic = ic.with_fixed_q(q)?;
    }
    let estimate = estimate_frequent_itemsets(g.lists().iter().map(|(_, l)| Ok(l.clone())), &ic)?;
    Ok(BicliqueReport {
        min_left: i,
        j,
        bicliques_hat: estimate.f_hat,
        estimate,
    })
}

/// Exact `(K_k, S_{k-1})`: k-cliques (every member lists every other) and
/// `(center, leaf set)` pairs of (k-1)-stars.
pub fn exact_clique_oracle(g: &IncidenceStream, k: usize) -> Result<(u64, u64)> {
    exact_clique_oracle_capped(g, k, DEFAULT_ORACLE_CAP)
}

pub fn exact_clique_oracle_capped(g: &IncidenceStream, k: usize, cap: usize) -> Result<(u64, u64)> {
    if k < 1 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let stars: u128 = g
        .lists()
        .iter()
        .map(|(_, l)| binomial(l.len(), k - 1))
        .sum();
    if stars > cap as u128 {
        return Err(Error::OracleTooLarge { cap });
    }
    let adj: HashMap<Item, &BSet> = g.lists().iter().map(|(u, l)| (*u, l)).collect();
    let linked = |a: Item, b: Item| {
        adj.get(&a).is_some_and(|l| l.contains(b)) && adj.get(&b).is_some_and(|l| l.contains(a))
    };

    fn extend(
        clique: &mut Vec<Item>,
        cands: &[Item],
        k: usize,
        linked: &dyn Fn(Item, Item) -> bool,
    ) -> u64 {
        if clique.len() == k {
            return 1;
        }
        let mut total = 0;
        for (i, &v) in cands.iter().enumerate() {
            if clique.iter().all(|&c| linked(c, v)) {
                clique.push(v);
                total += extend(clique, &cands[i + 1..], k, linked);
                clique.pop();
            }
        }
        total
    }

    let mut count = 0;
    for (u, l) in g.lists() {
        let above: Vec<Item> = l.elements().iter().copied().filter(|&v| v > *u).collect();
        count += extend(&mut vec![*u], &above, k, &linked);
    }
    Ok((count, u64::try_from(stars).unwrap_or(u64::MAX)))
}

/// Exact `(K_{i+,j}, A_j)`.
pub fn exact_biclique_oracle(g: &IncidenceStream, i: u64, j: usize) -> Result<(u64, u64)> {
    exact_count_oracle_capped(
        g.lists().iter().map(|(_, l)| l),
        j,
        &Predicate::MinSupport(i),
        DEFAULT_ORACLE_CAP,
    )
}
