//! Sorted enumeration of half-subsets by hash value.
//!
//! A half-subset of size `s` is split into a *head* (its first `ceil(s/2)`
//! elements) and a *tail* (its last `floor(s/2)` elements). All tails live in
//! one list `L` sorted by hash. Each head walks `L` circularly, starting at
//! the position where `head + tail` wraps around mod `q`, so the sums it
//! produces are nondecreasing. A priority queue holding one live entry per
//! head then merges the per-head sequences into a globally sorted stream
//! while storing only `C(b, ceil(s/2)) + C(b, floor(s/2))` entries.
//!
//! Pairs whose head is not entirely below their tail are skipped, so every
//! half-subset is produced exactly once.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::ops::Range;

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hashing::{add_range, HashFunction};
use crate::sets::{BSet, Subset};

/// A half-subset addressed as (head id, position in `L`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfRef {
    pub head: u32,
    pub pos: u32,
}

/// Static part of the enumeration: heads, the sorted tail list and the
/// per-head starting positions.
#[derive(Clone, Debug)]
pub(crate) struct HalfSpace {
    q: u64,
    half_size: usize,
    head_size: usize,
    tail_size: usize,
    pool_size: usize,
    head_count: usize,
    heads: Vec<u32>,
    head_hash: Vec<u64>,
    head_last: Vec<i64>,
    head_start: Vec<usize>,
    tail_count: usize,
    tails: Vec<u32>,
    tail_hash: Vec<u64>,
    tail_first: Vec<i64>,
}

impl HalfSpace {
    /// `hashes` are element hashes (already in `[q]`) of the whole set;
    /// subsets are drawn from index range `pool`. `offset` is added to every
    /// half-subset hash.
    pub(crate) fn new(
        hashes: &[u64],
        pool: Range<usize>,
        half_size: usize,
        offset: u64,
        q: u64,
    ) -> Self {
        debug_assert!(offset < q);
        let head_size = half_size.div_ceil(2);
        let tail_size = half_size / 2;
        let sum = |idx: &[usize]| idx.iter().fold(0, |acc, &i| add_range(acc, hashes[i], q));

        let mut tail_list: Vec<(u64, Vec<usize>)> = pool
            .clone()
            .combinations(tail_size)
            .map(|c| (sum(&c), c))
            .collect();
        // stable: ties stay in lexicographic order
        tail_list.sort_by_key(|(v, _)| *v);
        let tail_count = tail_list.len();
        let mut tails = Vec::with_capacity(tail_count * tail_size);
        let mut tail_hash = Vec::with_capacity(tail_count);
        let mut tail_first = Vec::with_capacity(tail_count);
        for (v, c) in &tail_list {
            tails.extend(c.iter().map(|&i| i as u32));
            tail_hash.push(*v);
            tail_first.push(c.first().map_or(i64::MAX, |&i| i as i64));
        }

        let mut heads = Vec::new();
        let mut head_hash = Vec::new();
        let mut head_last = Vec::new();
        let mut head_start = Vec::new();
        for c in pool.clone().combinations(head_size) {
            let hv = add_range(sum(&c), offset, q);
            heads.extend(c.iter().map(|&i| i as u32));
            head_hash.push(hv);
            head_last.push(c.last().map_or(-1, |&i| i as i64));
            // first tail whose addition wraps past q; the walk starts there
            let start = if hv == 0 {
                0
            } else {
                tail_hash.partition_point(|&t| t < q - hv)
            };
            head_start.push(if start == tail_count { 0 } else { start });
        }
        let head_count = head_hash.len();

        HalfSpace {
            q,
            half_size,
            head_size,
            tail_size,
            pool_size: pool.len(),
            head_count,
            heads,
            head_hash,
            head_last,
            head_start,
            tail_count,
            tails,
            tail_hash,
            tail_first,
        }
    }

    /// Position in `L` of the `c`-th tail visited by `head`.
    #[inline]
    pub(crate) fn pos(&self, head: usize, c: usize) -> usize {
        let p = self.head_start[head] + c;
        if p >= self.tail_count {
            p - self.tail_count
        } else {
            p
        }
    }

    #[inline]
    pub(crate) fn key(&self, head: usize, pos: usize) -> u64 {
        add_range(self.head_hash[head], self.tail_hash[pos], self.q)
    }

    #[inline]
    pub(crate) fn valid(&self, head: usize, pos: usize) -> bool {
        self.head_last[head] < self.tail_first[pos]
    }

    #[inline]
    fn head_slice(&self, head: usize) -> &[u32] {
        &self.heads[head * self.head_size..(head + 1) * self.head_size]
    }

    #[inline]
    fn tail_slice(&self, pos: usize) -> &[u32] {
        &self.tails[pos * self.tail_size..(pos + 1) * self.tail_size]
    }

    /// Appends the sorted element indices of `r` to `out`.
    #[inline]
    pub(crate) fn write(&self, r: HalfRef, out: &mut Vec<u32>) {
        out.extend_from_slice(self.head_slice(r.head as usize));
        out.extend_from_slice(self.tail_slice(r.pos as usize));
    }

    #[inline]
    pub(crate) fn min_index(&self, r: HalfRef) -> i64 {
        if self.head_size > 0 {
            self.heads[r.head as usize * self.head_size] as i64
        } else if self.tail_size > 0 {
            self.tail_first[r.pos as usize]
        } else {
            i64::MAX
        }
    }

    #[inline]
    pub(crate) fn max_index(&self, r: HalfRef) -> i64 {
        if self.tail_size > 0 {
            self.tails[(r.pos as usize + 1) * self.tail_size - 1] as i64
        } else {
            self.head_last[r.head as usize]
        }
    }

    fn base_stats(&self) -> EnumeratorStats {
        EnumeratorStats {
            half_size: self.half_size,
            head_size: self.head_size,
            tail_size: self.tail_size,
            pool_size: self.pool_size,
            head_count: self.head_count,
            list_len: self.tail_count,
            max_live: 0,
            groups: 0,
            values_increasing: true,
            max_group_runs: 0,
        }
    }
}

/// Instrumentation counters for one enumerator.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EnumeratorStats {
    pub half_size: usize,
    pub head_size: usize,
    pub tail_size: usize,
    /// Number of elements the half-subsets are drawn from.
    pub pool_size: usize,
    /// `C(pool_size, head_size)`.
    pub head_count: usize,
    /// `|L| = C(pool_size, tail_size)`.
    pub list_len: usize,
    /// Peak number of live priority-queue entries.
    pub max_live: usize,
    /// Number of non-empty value groups produced.
    pub groups: usize,
    /// Whether the values of successive groups were strictly increasing.
    pub values_increasing: bool,
    /// Peak number of head intervals in a single group (each stores two indices).
    pub max_group_runs: usize,
}

/// Per-head interval of positions (counts along the head's circular walk,
/// inclusive on both ends) whose head/tail pairs hash to the group value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadRun {
    pub head: u32,
    pub from: usize,
    pub to: usize,
}

/// Implicit representation of all half-subsets with one hash value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueGroup {
    pub value: u64,
    pub runs: Vec<HeadRun>,
}

impl ValueGroup {
    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }
}

/// Emits half-subsets of a set in ascending order of hash value, one value
/// group at a time.
#[derive(Clone, Debug)]
pub struct HalfEnumerator {
    space: HalfSpace,
    cnt: Vec<usize>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    last_output: Option<u64>,
    last_group: Option<u64>,
    stats: EnumeratorStats,
}

impl HalfEnumerator {
    /// Enumerator over the `half_size`-subsets of `t` under `h`.
    pub fn new(t: &BSet, h: &HashFunction, half_size: usize) -> Self {
        let hashes: Vec<u64> = t.elements().iter().map(|&x| h.eval(x)).collect();
        Self::from_space(HalfSpace::new(
            &hashes,
            0..hashes.len(),
            half_size,
            0,
            h.range(),
        ))
    }

    pub(crate) fn from_space(space: HalfSpace) -> Self {
        let mut e = HalfEnumerator {
            cnt: vec![0; space.head_count],
            heap: BinaryHeap::with_capacity(space.head_count),
            last_output: None,
            last_group: None,
            stats: space.base_stats(),
            space,
        };
        if e.space.tail_count > 0 {
            for head in 0..e.space.head_count {
                let c = e.first_valid(head, 0);
                e.cnt[head] = c;
                if c < e.space.tail_count {
                    let key = e.space.key(head, e.space.pos(head, c));
                    e.heap.push(Reverse((key, head as u32)));
                }
            }
        }
        e.stats.max_live = e.heap.len();
        e
    }

    fn first_valid(&self, head: usize, mut c: usize) -> usize {
        while c < self.space.tail_count && !self.space.valid(head, self.space.pos(head, c)) {
            c += 1;
        }
        c
    }

    /// Smallest hash value not yet output, if any half-subsets remain.
    pub fn peek_value(&self) -> Option<u64> {
        self.heap.peek().map(|Reverse((k, _))| *k)
    }

    /// Number of live queue entries.
    pub fn live_entries(&self) -> usize {
        self.heap.len()
    }

    pub fn stats(&self) -> &EnumeratorStats {
        &self.stats
    }

    pub(crate) fn space(&self) -> &HalfSpace {
        &self.space
    }

    /// Walks `head` from count `c`, collecting the interval with key `i` and
    /// discarding smaller keys. Returns the interval and the count of the
    /// first valid position with key above `i`.
    fn scan(&self, head: usize, mut c: usize, i: u64) -> (Option<(usize, usize)>, usize) {
        let mut run: Option<(usize, usize)> = None;
        while c < self.space.tail_count {
            let pos = self.space.pos(head, c);
            if self.space.valid(head, pos) {
                let key = self.space.key(head, pos);
                if key > i {
                    break;
                }
                if key == i {
                    run = Some((run.map_or(c, |r| r.0), c));
                }
            }
            c += 1;
        }
        (run, c)
    }

    fn requeue(&mut self, head: usize, c: usize) {
        self.cnt[head] = c;
        if c < self.space.tail_count {
            let key = self.space.key(head, self.space.pos(head, c));
            self.heap.push(Reverse((key, head as u32)));
            self.stats.max_live = self.stats.max_live.max(self.heap.len());
        }
    }

    /// Returns the group of all half-subsets hashing to `i` and advances past
    /// `i`. Values must be requested in strictly increasing order; anything
    /// below `i` that was not requested is discarded.
    pub fn output_next(&mut self, i: u64) -> Result<ValueGroup> {
        if let Some(last) = self.last_output {
            if i <= last {
                return Err(Error::Frontier {
                    requested: i,
                    frontier: last + 1,
                });
            }
        }
        let mut runs = Vec::new();
        while let Some(&Reverse((key, head))) = self.heap.peek() {
            if key > i {
                break;
            }
            self.heap.pop();
            let head = head as usize;
            let (run, c) = self.scan(head, self.cnt[head], i);
            if let Some((from, to)) = run {
                runs.push(HeadRun {
                    head: head as u32,
                    from,
                    to,
                });
            }
            self.requeue(head, c);
        }
        self.last_output = Some(i);
        if !runs.is_empty() {
            if let Some(prev) = self.last_group {
                if i <= prev {
                    self.stats.values_increasing = false;
                }
            }
            self.last_group = Some(i);
            self.stats.groups += 1;
            self.stats.max_group_runs = self.stats.max_group_runs.max(runs.len());
        }
        Ok(ValueGroup { value: i, runs })
    }

    /// Discards every half-subset hashing below `v`.
    pub fn skip_below(&mut self, v: u64) {
        if v == 0 {
            return;
        }
        while let Some(&Reverse((key, head))) = self.heap.peek() {
            if key >= v {
                break;
            }
            self.heap.pop();
            let head = head as usize;
            let (_, c) = self.scan(head, self.cnt[head], v - 1);
            self.requeue(head, c);
        }
        self.last_output = Some(self.last_output.map_or(v - 1, |l| l.max(v - 1)));
    }

    /// Expands a group into its members.
    pub fn members<'a>(&'a self, g: &'a ValueGroup) -> impl Iterator<Item = HalfRef> + 'a {
        g.runs.iter().flat_map(move |run| {
            let head = run.head as usize;
            (run.from..=run.to).filter_map(move |c| {
                let pos = self.space.pos(head, c);
                self.space.valid(head, pos).then_some(HalfRef {
                    head: run.head,
                    pos: pos as u32,
                })
            })
        })
    }

    /// Element indices (into the enumerated set) of a member.
    pub fn indices(&self, r: HalfRef) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.space.half_size);
        self.space.write(r, &mut out);
        out
    }

    /// Materializes a group as subsets of `t`.
    pub fn subsets(&self, g: &ValueGroup, t: &BSet) -> Vec<Subset> {
        let el = t.elements();
        self.members(g)
            .map(|r| {
                Subset::from_sorted_unchecked(
                    self.indices(r)
                        .into_iter()
                        .map(|i| el[i as usize])
                        .collect(),
                )
            })
            .collect()
    }
}

/// Iterator form of [`HalfEnumerator`]: every half-subset with its hash value,
/// in nondecreasing hash order.
pub struct SortedHalves<'a> {
    t: &'a BSet,
    enumerator: HalfEnumerator,
    pending: std::vec::IntoIter<Subset>,
    value: u64,
}

impl<'a> SortedHalves<'a> {
    pub(crate) fn new(t: &'a BSet, h: &HashFunction, half_size: usize) -> Self {
        SortedHalves {
            t,
            enumerator: HalfEnumerator::new(t, h, half_size),
            pending: Vec::new().into_iter(),
            value: 0,
        }
    }
}

impl Iterator for SortedHalves<'_> {
    type Item = (Subset, u64);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(s) = self.pending.next() {
                return Some((s, self.value));
            }
            let v = self.enumerator.peek_value()?;
            let g = self
                .enumerator
                .output_next(v)
                .expect("peeked value is ahead of the frontier");
            self.value = v;
            self.pending = self.enumerator.subsets(&g, self.t).into_iter();
        }
    }
}

/// Sliding window over half-subsets consumed in *descending* order.
///
/// Every half-subset with hash `v` appears twice in the descending sequence,
/// once with key `v + q` and once with key `v`. Lowering a threshold `c`
/// admits entries with key `>= c`; a trailing threshold `c + w` retires
/// entries with key `>= c + w`. The window `[c, c + w)` is kept implicitly as
/// one interval of positions per head.
#[derive(Clone, Debug)]
pub(crate) struct DescendingWindow {
    space: HalfSpace,
    enter: Vec<usize>,
    leave: Vec<usize>,
    enter_heap: BinaryHeap<(u64, Reverse<u32>)>,
    leave_heap: BinaryHeap<(u64, Reverse<u32>)>,
    active: BTreeSet<u32>,
    stats: EnumeratorStats,
}

impl DescendingWindow {
    pub(crate) fn new(space: HalfSpace) -> Self {
        let heads = space.head_count;
        let mut w = DescendingWindow {
            enter: vec![0; heads],
            leave: vec![0; heads],
            enter_heap: BinaryHeap::with_capacity(heads),
            leave_heap: BinaryHeap::with_capacity(heads),
            active: BTreeSet::new(),
            stats: space.base_stats(),
            space,
        };
        for head in 0..heads {
            let p = w.next_valid(head, 0);
            w.enter[head] = p;
            w.leave[head] = p;
            if let Some(key) = w.dkey(head, p) {
                w.enter_heap.push((key, Reverse(head as u32)));
                w.leave_heap.push((key, Reverse(head as u32)));
            }
        }
        w.stats.max_live = w.enter_heap.len().max(w.leave_heap.len());
        w
    }

    fn span(&self) -> usize {
        2 * self.space.tail_count
    }

    /// Position in `L` for descending index `p`.
    #[inline]
    fn lpos(&self, head: usize, p: usize) -> usize {
        let l = self.space.tail_count;
        let c = if p < l { l - 1 - p } else { 2 * l - 1 - p };
        self.space.pos(head, c)
    }

    fn dkey(&self, head: usize, p: usize) -> Option<u64> {
        if p >= self.span() {
            return None;
        }
        let key = self.space.key(head, self.lpos(head, p));
        Some(if p < self.space.tail_count {
            key + self.space.q
        } else {
            key
        })
    }

    fn next_valid(&self, head: usize, mut p: usize) -> usize {
        while p < self.span() && !self.space.valid(head, self.lpos(head, p)) {
            p += 1;
        }
        p
    }

    /// Admits every entry with key `>= threshold`.
    pub(crate) fn lower_entry(&mut self, threshold: u64) {
        while let Some(&(key, Reverse(head))) = self.enter_heap.peek() {
            if key < threshold {
                break;
            }
            self.enter_heap.pop();
            let h = head as usize;
            let p = self.next_valid(h, self.enter[h] + 1);
            self.enter[h] = p;
            if let Some(k) = self.dkey(h, p) {
                self.enter_heap.push((k, Reverse(head)));
            }
            self.active.insert(head);
        }
        self.stats.max_live = self.stats.max_live.max(self.enter_heap.len());
    }

    /// Retires every entry with key `>= threshold`.
    pub(crate) fn lower_exit(&mut self, threshold: u64) {
        while let Some(&(key, Reverse(head))) = self.leave_heap.peek() {
            if key < threshold {
                break;
            }
            self.leave_heap.pop();
            let h = head as usize;
            let p = self.next_valid(h, self.leave[h] + 1);
            self.leave[h] = p;
            if let Some(k) = self.dkey(h, p) {
                self.leave_heap.push((k, Reverse(head)));
            }
            if self.leave[h] >= self.enter[h] {
                self.active.remove(&head);
            }
        }
        self.stats.max_live = self.stats.max_live.max(self.leave_heap.len());
    }

    /// Current window members.
    pub(crate) fn members(&self) -> impl Iterator<Item = HalfRef> + '_ {
        self.active.iter().flat_map(move |&head| {
            let h = head as usize;
            (self.leave[h]..self.enter[h]).filter_map(move |p| {
                let pos = self.lpos(h, p);
                self.space.valid(h, pos).then_some(HalfRef {
                    head,
                    pos: pos as u32,
                })
            })
        })
    }

    pub(crate) fn space(&self) -> &HalfSpace {
        &self.space
    }

    pub(crate) fn stats(&self) -> &EnumeratorStats {
        &self.stats
    }
}
