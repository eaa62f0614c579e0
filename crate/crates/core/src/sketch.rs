//! CountMin and Count-Sketch over k-itemsets with the bucket range split
//! among `p` workers. Worker `w` owns buckets `[w t, (w + 1) t)` of every row
//! and only ever enumerates the itemsets that land there.

use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::{derive_seed, HashFunction};
use crate::parallel::for_each_mut;
use crate::sampler::visit_range;
use crate::sets::{BSet, Item, Subset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    CountMin,
    CountSketch,
}

impl std::str::FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "countmin" => Ok(SketchKind::CountMin),
            "countsketch" => Ok(SketchKind::CountSketch),
            _ => Err(Error::InvalidParameter(format!(
                "unknown sketch kind {s:?}"
            ))),
        }
    }
}

/// Hash functions shared by all workers and by the sequential reference.
#[derive(Clone, Debug)]
struct RowHashes {
    buckets: Vec<HashFunction>,
    signs: Option<Vec<HashFunction>>,
}

impl RowHashes {
    fn new(kind: SketchKind, depth: usize, width: u64, k: usize, seed: u64) -> Result<Self> {
        let buckets = (0..depth as u64)
            .map(|r| HashFunction::new(derive_seed(seed, &[0, r]), k, width))
            .collect::<Result<_>>()?;
        let signs = match kind {
            SketchKind::CountMin => None,
            SketchKind::CountSketch => Some(
                (0..depth as u64)
                    .map(|r| HashFunction::with_degree(derive_seed(seed, &[1, r]), 2, 2))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(RowHashes { buckets, signs })
    }

    /// `+1` or `-1`: product of the element signs of row `row`.
    fn sign(&self, row: usize, itemset: &[Item]) -> i64 {
        match &self.signs {
            None => 1,
            Some(s) => {
                let neg = itemset.iter().filter(|&&x| s[row].eval(x) == 1).count();
                if neg % 2 == 0 {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Worker {
    index: usize,
    /// `depth x t`, row-major.
    counters: Vec<i64>,
}

/// A `depth x width` sketch whose buckets are split evenly among workers.
#[derive(Clone, Debug)]
pub struct PartitionedSketch {
    kind: SketchKind,
    k: usize,
    depth: usize,
    width: u64,
    hashes: RowHashes,
    workers: Vec<Worker>,
}

impl PartitionedSketch {
    pub fn new(
        kind: SketchKind,
        k: usize,
        depth: usize,
        width: u64,
        workers: usize,
        seed: u64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be at least 2, got {k}"
            )));
        }
        if depth == 0 {
            return Err(Error::InvalidParameter("depth must be positive".into()));
        }
        if workers == 0 || !width.is_multiple_of(workers as u64) {
            return Err(Error::InvalidParameter(format!(
                "worker count {workers} must divide the width {width}"
            )));
        }
        let hashes = RowHashes::new(kind, depth, width, k, seed)?;
        let t = (width / workers as u64) as usize;
        let workers = (0..workers)
            .map(|index| Worker {
                index,
                counters: vec![0; depth * t],
            })
            .collect();
        Ok(PartitionedSketch {
            kind,
            k,
            depth,
            width,
            hashes,
            workers,
        })
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn num_workers(&self) -> usize {
        self.workers.len()
    }

    fn slice_width(&self) -> u64 {
        self.width / self.workers.len() as u64
    }

    /// Buckets owned by `worker`.
    pub fn worker_range(&self, worker: usize) -> Range<u64> {
        let t = self.slice_width();
        worker as u64 * t..(worker as u64 + 1) * t
    }

    /// `(row, bucket)` of every counter hit the transaction causes at
    /// `worker`, in visiting order.
    pub fn worker_hits(&self, worker: usize, t: &BSet) -> Result<Vec<(usize, u64)>> {
        self.check_worker(worker)?;
        let range = self.worker_range(worker);
        let mut hits = Vec::new();
        for (row, h) in self.hashes.buckets.iter().enumerate() {
            visit_range(t, h, self.k, range.clone(), |_, b| hits.push((row, b)))?;
        }
        Ok(hits)
    }

    fn check_worker(&self, worker: usize) -> Result<()> {
        if worker >= self.workers.len() {
            return Err(Error::WorkerIndex {
                worker,
                workers: self.workers.len(),
            });
        }
        Ok(())
    }

    /// Processes `t` at one worker only.
    pub fn worker_update(&mut self, worker: usize, t: &BSet) -> Result<()> {
        self.check_worker(worker)?;
        let tw = self.slice_width();
        update_slice(
            &self.hashes,
            self.k,
            tw,
            &mut self.workers[worker],
            std::slice::from_ref(t),
        )
    }

    /// Processes a batch at every worker; workers run in parallel when the
    /// `parallel` feature is on.
    pub fn update_batch(&mut self, batch: &[BSet]) -> Result<()> {
        let (hashes, k, tw) = (&self.hashes, self.k, self.slice_width());
        let err = std::sync::Mutex::new(None);
        for_each_mut(&mut self.workers, |w| {
            if let Err(e) = update_slice(hashes, k, tw, w, batch) {
                err.lock().unwrap().get_or_insert(e);
            }
        });
        match err.into_inner().unwrap() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    /// Same as [`update_batch`](Self::update_batch) but visits the workers
    /// one after another on the calling thread.
    pub fn update_batch_sequential(&mut self, batch: &[BSet]) -> Result<()> {
        let tw = self.slice_width();
        for w in &mut self.workers {
            update_slice(&self.hashes, self.k, tw, w, batch)?;
        }
        Ok(())
    }

    /// The merged `depth x width` counter array, row-major.
    pub fn counters(&self) -> Vec<i64> {
        let tw = self.slice_width() as usize;
        let mut out = Vec::with_capacity(self.depth * self.width as usize);
        for row in 0..self.depth {
            for w in &self.workers {
                out.extend_from_slice(&w.counters[row * tw..(row + 1) * tw]);
            }
        }
        out
    }

    pub fn query_frequency(&self, itemset: &Subset) -> Result<i64> {
        if itemset.len() != self.k {
            return Err(Error::SubsetSize {
                expected: self.k,
                actual: itemset.len(),
            });
        }
        let tw = self.slice_width();
        let reads = self.hashes.buckets.iter().enumerate().map(|(row, h)| {
            let b = h.bucket(itemset);
            let w = &self.workers[(b / tw) as usize];
            let c = w.counters[row * tw as usize + (b % tw) as usize];
            c * self.hashes.sign(row, itemset.as_slice())
        });
        Ok(readout(self.kind, reads.collect()))
    }

    pub fn dump(&self) -> SketchDump {
        SketchDump {
            kind: self.kind,
            depth: self.depth,
            width: self.width,
            workers: self.workers.len(),
            counters: self
                .counters()
                .chunks(self.width as usize)
                .map(<[i64]>::to_vec)
                .collect(),
        }
    }
}

fn update_slice(
    hashes: &RowHashes,
    k: usize,
    tw: u64,
    w: &mut Worker,
    batch: &[BSet],
) -> Result<()> {
    let lo = w.index as u64 * tw;
    let range = lo..lo + tw;
    for t in batch {
        for (row, h) in hashes.buckets.iter().enumerate() {
            let base = row * tw as usize;
            let counters = &mut w.counters;
            visit_range(t, h, k, range.clone(), |s, b| {
                counters[base + (b - lo) as usize] += hashes.sign(row, s);
            })?;
        }
    }
    Ok(())
}

fn readout(kind: SketchKind, mut reads: Vec<i64>) -> i64 {
    match kind {
        SketchKind::CountMin => reads.into_iter().min().unwrap_or(0),
        SketchKind::CountSketch => {
            reads.sort_unstable();
            reads[reads.len() / 2]
        }
    }
}

/// Serializable sketch state; `counters[row][bucket]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SketchDump {
    pub kind: SketchKind,
    pub depth: usize,
    pub width: u64,
    pub workers: usize,
    pub counters: Vec<Vec<i64>>,
}

/// Reference sketch that enumerates every k-itemset of every transaction.
#[derive(Clone, Debug)]
pub struct SequentialSketch {
    kind: SketchKind,
    k: usize,
    width: u64,
    hashes: RowHashes,
    counters: Vec<i64>,
}

impl SequentialSketch {
    /// Uses the same hash functions as a [`PartitionedSketch`] with equal
    /// parameters and seed.
    pub fn new(kind: SketchKind, k: usize, depth: usize, width: u64, seed: u64) -> Result<Self> {
        if depth == 0 || k < 2 {
            return Err(Error::InvalidParameter("need depth >= 1 and k >= 2".into()));
        }
        Ok(SequentialSketch {
            kind,
            k,
            width,
            hashes: RowHashes::new(kind, depth, width, k, seed)?,
            counters: vec![0; depth * width as usize],
        })
    }

    pub fn update(&mut self, t: &BSet) {
        use itertools::Itertools;
        for c in t.elements().iter().copied().combinations(self.k) {
            for (row, h) in self.hashes.buckets.iter().enumerate() {
                let b = h.subset_hash(&c) as usize;
                self.counters[row * self.width as usize + b] += self.hashes.sign(row, &c);
            }
        }
    }

    pub fn counters(&self) -> &[i64] {
        &self.counters
    }

    pub fn query_frequency(&self, itemset: &Subset) -> Result<i64> {
        if itemset.len() != self.k {
            return Err(Error::SubsetSize {
                expected: self.k,
                actual: itemset.len(),
            });
        }
        let reads = self.hashes.buckets.iter().enumerate().map(|(row, h)| {
            let b = h.bucket(itemset) as usize;
            self.counters[row * self.width as usize + b] * self.hashes.sign(row, itemset.as_slice())
        });
        Ok(readout(self.kind, reads.collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn bset(v: &[u64]) -> BSet {
        BSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn construction_guards() {
        assert!(PartitionedSketch::new(SketchKind::CountMin, 2, 3, 8, 3, 0).is_err());
        assert!(PartitionedSketch::new(SketchKind::CountMin, 1, 3, 8, 2, 0).is_err());
        assert!(PartitionedSketch::new(SketchKind::CountMin, 2, 0, 8, 2, 0).is_err());
        let mut sk = PartitionedSketch::new(SketchKind::CountMin, 2, 3, 8, 2, 0).unwrap();
        assert_eq!(
            sk.worker_update(2, &bset(&[1, 2])),
            Err(Error::WorkerIndex {
                worker: 2,
                workers: 2
            })
        );
        assert!(sk
            .query_frequency(&Subset::new(vec![1, 2, 3]).unwrap())
            .is_err());
        assert_eq!(
            "countsketch".parse::<SketchKind>().unwrap(),
            SketchKind::CountSketch
        );
    }

    #[test]
    fn single_worker_matches_sequential() {
        for kind in [SketchKind::CountMin, SketchKind::CountSketch] {
            let mut p = PartitionedSketch::new(kind, 3, 4, 10, 1, 9).unwrap();
            let mut s = SequentialSketch::new(kind, 3, 4, 10, 9).unwrap();
            let t = bset(&[1, 4, 6, 7, 9, 12]);
            p.worker_update(0, &t).unwrap();
            s.update(&t);
            assert_eq!(p.counters(), s.counters());
        }
    }

    #[test]
    fn workers_touch_disjoint_buckets() {
        let sk = PartitionedSketch::new(SketchKind::CountMin, 2, 2, 8, 2, 5).unwrap();
        let t = bset(&[1, 2, 3, 4, 5, 6, 7]);
        let a: HashSet<_> = sk.worker_hits(0, &t).unwrap().into_iter().collect();
        let b: HashSet<_> = sk.worker_hits(1, &t).unwrap().into_iter().collect();
        assert!(a.is_disjoint(&b));
        assert!(a.iter().all(|&(_, x)| x < 4) && b.iter().all(|&(_, x)| x >= 4));
    }

    #[test]
    fn partitioned_equals_sequential_on_random_transactions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let kind = if rng.gen_bool(0.5) {
                SketchKind::CountMin
            } else {
                SketchKind::CountSketch
            };
            let p = [1, 2, 4, 8][rng.gen_range(0..4)];
            let k = rng.gen_range(2..=4);
            let seed = rng.gen();
            let mut ps = PartitionedSketch::new(kind, k, 3, 16, p, seed).unwrap();
            let mut ss = SequentialSketch::new(kind, k, 3, 16, seed).unwrap();
            let t = BSet::from_unsorted(
                (0..rng.gen_range(0..10))
                    .map(|_| rng.gen_range(0..40))
                    .collect(),
            )
            .unwrap();
            for w in 0..p {
                ps.worker_update(w, &t).unwrap();
            }
            ss.update(&t);
            assert_eq!(ps.counters(), ss.counters());
        }
    }

    #[test]
    fn parallel_and_round_robin_agree() {
        let batch: Vec<BSet> = (0..30u64)
            .map(|i| BSet::from_unsorted((0..8).map(|j| (i * 5 + j * 7) % 50).collect()).unwrap())
            .collect();
        let mut a = PartitionedSketch::new(SketchKind::CountSketch, 3, 3, 16, 4, 2).unwrap();
        let mut b = a.clone();
        a.update_batch(&batch).unwrap();
        b.update_batch_sequential(&batch).unwrap();
        assert_eq!(a.counters(), b.counters());
    }

    #[test]
    fn countmin_query_examples() {
        let mut sk = PartitionedSketch::new(SketchKind::CountMin, 2, 4, 16, 4, 1).unwrap();
        let empty = Subset::new(vec![7, 8]).unwrap();
        assert_eq!(sk.query_frequency(&empty).unwrap(), 0);
        let batch = vec![bset(&[1, 2, 3]); 5];
        sk.update_batch(&batch).unwrap();
        let pair = Subset::new(vec![1, 2]).unwrap();
        let est = sk.query_frequency(&pair).unwrap();
        assert!(est >= 5);
        // exact unless every row puts (1,2) together with another pair
        let collides_everywhere = sk.hashes.buckets.iter().all(|h| {
            let b = h.bucket(&pair);
            [[1, 3], [2, 3]].iter().any(|o| h.subset_hash(o) == b)
        });
        if !collides_everywhere {
            assert_eq!(est, 5);
        }
    }

    #[test]
    fn dump_shape() {
        let sk = PartitionedSketch::new(SketchKind::CountMin, 2, 3, 8, 2, 0).unwrap();
        let d = sk.dump();
        assert_eq!(d.counters.len(), 3);
        assert!(d.counters.iter().all(|r| r.len() == 8));
    }
}
