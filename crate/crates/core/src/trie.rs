//! Uniform-depth binary trie in a LOUDS-Dense/LOUDS-Sparse encoding.
//!
//! The trie stores every distinct `depth`-bit key prefix exactly. Levels
//! above a cutoff use the dense encoding (per node: a 2-bit label bitmap
//! and a 2-bit has-child bitmap); levels below it use the sparse encoding
//! (per edge: one label bit, one has-child bit and one LOUDS bit). A branch
//! that leads to a single prefix stops as a leaf and the remaining bits of
//! that prefix are kept raw in a suffix store.
//!
//! [`estimate_bits`] prices the same layout from per-level prefix counts
//! without building anything. It ignores the savings from single-prefix
//! branches, so it is an upper bound on [`UniformTrie::size_bits`] for the
//! same cutoff.

use std::marker::PhantomData;

use thiserror::Error;

use crate::keyspace::{Key, PrefixCover};
use crate::succinct::{payload_bits, rank_directory_bits, BitStore, PackedBits, RankedSlice};

/// Dense encoding cost per node (label bitmap + has-child bitmap).
pub const DENSE_BITS_PER_NODE: u64 = 4;
/// Sparse encoding cost per edge (label + has-child + LOUDS bit).
pub const SPARSE_BITS_PER_EDGE: u64 = 3;
/// Fixed header: depth, cutoff, dense node count, sparse root count,
/// dense leaf count.
pub const HEADER_BITS: u64 = 5 * 64;
/// Per-level tables: first leaf ordinal and suffix offset.
pub const LEVEL_META_BITS: u64 = 2 * 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrieError {
    #[error("cannot build a trie over zero prefixes")]
    Empty,
    #[error("trie depth must be at least 1")]
    ZeroDepth,
    #[error("prefixes must be strictly increasing and truncated to the trie depth")]
    Unsorted,
    #[error("probe length {got} does not match trie depth {depth}")]
    LengthMismatch { depth: u32, got: u32 },
}

/// Exact footprint of a trie with the given totals: header, level tables,
/// the packed payload (two dense bitmaps of `2 * dense_nodes` bits, three
/// sparse bitmaps of `sparse_edges` bits, the suffix store) and one rank
/// directory per bitmap.
pub fn layout_bits(depth: u32, dense_nodes: u64, sparse_edges: u64, suffix_bits: u64) -> u64 {
    if depth == 0 {
        return 0;
    }
    let payload = DENSE_BITS_PER_NODE * dense_nodes + SPARSE_BITS_PER_EDGE * sparse_edges + suffix_bits;
    HEADER_BITS
        + LEVEL_META_BITS * depth as u64
        + payload_bits(payload)
        + 2 * rank_directory_bits(2 * dense_nodes)
        + 3 * rank_directory_bits(sparse_edges)
}

/// Estimated size of a depth-`depth` trie with the top `cutoff` levels
/// dense, from `counts[l] = |K_l|` (`counts.len() > depth`).
///
/// Prices the trie as if no branch were cut short by a stored suffix; each
/// suffix bit replaces at least one 3- or 4-bit node, so this bounds the
/// real size from above.
pub fn estimate_bits_at(depth: u32, cutoff: u32, counts: &[u64]) -> u64 {
    if depth == 0 {
        return 0;
    }
    let cutoff = cutoff.min(depth) as usize;
    let dense_nodes: u64 = counts[..cutoff].iter().sum();
    let sparse_edges: u64 = counts[cutoff + 1..=depth as usize].iter().sum();
    layout_bits(depth, dense_nodes, sparse_edges, 0)
}

/// Dense/sparse cutoff minimizing the estimate, preferring fewer dense
/// levels on ties, together with the estimate itself.
pub fn choose_cutoff(depth: u32, counts: &[u64]) -> (u32, u64) {
    if depth == 0 {
        return (0, 0);
    }
    // prefix[i] = counts[0] + ... + counts[i - 1]
    let mut prefix = Vec::with_capacity(depth as usize + 2);
    prefix.push(0u64);
    for &c in &counts[..=depth as usize] {
        prefix.push(prefix.last().unwrap() + c);
    }
    let total = prefix[depth as usize + 1];
    argmin_cutoff(depth, |c| {
        let c = c as usize;
        layout_bits(depth, prefix[c], total - prefix[c + 1], 0)
    })
}

/// Estimated size of a depth-`depth` trie under the best cutoff.
pub fn estimate_bits(depth: u32, counts: &[u64]) -> u64 {
    choose_cutoff(depth, counts).1
}

fn argmin_cutoff(depth: u32, cost: impl Fn(u32) -> u64) -> (u32, u64) {
    let mut best = (0, cost(0));
    for c in 1..=depth {
        let v = cost(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    best
}

/// `counts[l]` = number of distinct `l`-bit prefixes among sorted,
/// distinct `prefixes`, for `l` in `0..=depth`.
pub fn level_counts<K: Key>(prefixes: &[K], depth: u32) -> Vec<u64> {
    let mut hist = vec![0u64; depth as usize + 1];
    for w in prefixes.windows(2) {
        hist[w[0].lcp(&w[1]).min(depth) as usize] += 1;
    }
    let mut counts = vec![0u64; depth as usize + 1];
    let mut acc = if prefixes.is_empty() { 0 } else { 1 };
    for l in 0..=depth as usize {
        counts[l] = acc;
        acc += hist[l];
    }
    counts
}

/// Per-level node, edge and suffix totals of the trie over `prefixes`;
/// these do not depend on the cutoff.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct LevelShape {
    nodes: u64,
    edges: u64,
    suffix_bits: u64,
}

#[inline]
fn split_at_bit<K: Key>(prefixes: &[K], lo: usize, hi: usize, d: u32) -> usize {
    lo + prefixes[lo..hi].partition_point(|p| !p.bit(d))
}

fn level_shapes<K: Key>(prefixes: &[K], depth: u32) -> Vec<LevelShape> {
    let mut shapes = vec![LevelShape::default(); depth as usize];
    let mut current = vec![(0usize, prefixes.len())];
    for d in 0..depth {
        let shape = &mut shapes[d as usize];
        shape.nodes = current.len() as u64;
        let mut next = Vec::new();
        for &(lo, hi) in &current {
            let mid = split_at_bit(prefixes, lo, hi, d);
            for (a, z) in [(lo, mid), (mid, hi)] {
                if a == z {
                    continue;
                }
                shape.edges += 1;
                if z - a >= 2 {
                    next.push((a, z));
                } else {
                    shape.suffix_bits += (depth - d - 1) as u64;
                }
            }
        }
        current = next;
    }
    shapes
}

fn shape_bits(depth: u32, shapes: &[LevelShape], cutoff: u32) -> u64 {
    let (dense, sparse) = shapes.split_at(cutoff as usize);
    layout_bits(
        depth,
        dense.iter().map(|s| s.nodes).sum(),
        sparse.iter().map(|s| s.edges).sum(),
        shapes.iter().map(|s| s.suffix_bits).sum(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Node {
    Dense(u64),
    Sparse(u64),
}

/// An exact, immutable set of `depth`-bit prefixes.
#[derive(Clone, Debug)]
pub struct UniformTrie<K> {
    depth: u32,
    cutoff: u32,
    payload: PackedBits,
    dense_labels: RankedSlice,
    dense_has_child: RankedSlice,
    dense_nodes: u64,
    dense_leaves: u64,
    sparse_labels: RankedSlice,
    sparse_has_child: RankedSlice,
    sparse_louds: RankedSlice,
    sparse_roots: u64,
    suffix_base: u64,
    suffix_len: u64,
    level_leaf_start: Vec<u64>,
    level_suffix_start: Vec<u64>,
    len: u64,
    // all-zero key of the right width, the start of every probe path
    zero: K,
    _key: PhantomData<K>,
}

impl<K: Key> UniformTrie<K> {
    fn check_input(prefixes: &[K], depth: u32) -> Result<(), TrieError> {
        if prefixes.is_empty() {
            return Err(TrieError::Empty);
        }
        if depth == 0 {
            return Err(TrieError::ZeroDepth);
        }
        if prefixes.windows(2).any(|w| w[0] >= w[1])
            || prefixes.iter().any(|p| p.truncate(depth) != *p)
        {
            return Err(TrieError::Unsorted);
        }
        Ok(())
    }

    /// Builds from strictly increasing prefixes already truncated to
    /// `depth` bits, choosing the dense/sparse cutoff that minimizes the
    /// exact size (fewer dense levels on ties).
    pub fn build(prefixes: &[K], depth: u32) -> Result<Self, TrieError> {
        Self::check_input(prefixes, depth)?;
        let shapes = level_shapes(prefixes, depth);
        let (cutoff, _) = argmin_cutoff(depth, |c| shape_bits(depth, &shapes, c));
        Self::build_with_cutoff(prefixes, depth, cutoff)
    }

    /// Builds with levels `< cutoff` dense.
    pub fn build_with_cutoff(prefixes: &[K], depth: u32, cutoff: u32) -> Result<Self, TrieError> {
        Self::check_input(prefixes, depth)?;
        let cutoff = cutoff.min(depth);

        let mut dense_labels = BitStore::default();
        let mut dense_has_child = BitStore::default();
        let mut sparse_labels = BitStore::default();
        let mut sparse_has_child = BitStore::default();
        let mut sparse_louds = BitStore::default();
        let mut suffixes = BitStore::default();
        let mut level_leaf_start = Vec::with_capacity(depth as usize);
        let mut level_suffix_start = Vec::with_capacity(depth as usize);

        let mut leaves = 0u64;
        let mut dense_nodes = 0u64;
        let mut sparse_roots = if cutoff == 0 { 1 } else { 0 };
        let mut current: Vec<(usize, usize)> = vec![(0, prefixes.len())];

        for d in 0..depth {
            level_leaf_start.push(leaves);
            level_suffix_start.push(suffixes.len());
            let dense = d < cutoff;
            if dense {
                dense_nodes += current.len() as u64;
            }
            let mut next = Vec::new();
            for &(lo, hi) in &current {
                let mid = split_at_bit(prefixes, lo, hi, d);
                let mut first_edge = true;
                for (label, (a, z)) in [(false, (lo, mid)), (true, (mid, hi))] {
                    let present = a < z;
                    let internal = z - a >= 2;
                    if dense {
                        dense_labels.push(present);
                        dense_has_child.push(internal);
                    } else if present {
                        sparse_labels.push(label);
                        sparse_has_child.push(internal);
                        sparse_louds.push(first_edge);
                        first_edge = false;
                    }
                    if internal {
                        next.push((a, z));
                    } else if present {
                        leaves += 1;
                        for i in d + 1..depth {
                            suffixes.push(prefixes[a].bit(i));
                        }
                    }
                }
            }
            if d + 1 == cutoff {
                sparse_roots = next.len() as u64;
            }
            current = next;
        }

        let mut payload = PackedBits::default();
        let mut place = |bits: &BitStore| (payload.append(bits), bits.len());
        let dl = place(&dense_labels);
        let dh = place(&dense_has_child);
        let sl = place(&sparse_labels);
        let sh = place(&sparse_has_child);
        let so = place(&sparse_louds);
        let (suffix_base, suffix_len) = place(&suffixes);
        let slice = |(base, len): (u64, u64)| RankedSlice::new(&payload, base, len);
        let dense_labels = slice(dl);
        let dense_has_child = slice(dh);
        let dense_leaves = dense_labels.count_ones() - dense_has_child.count_ones();
        Ok(UniformTrie {
            depth,
            cutoff,
            dense_labels,
            dense_has_child,
            dense_nodes,
            dense_leaves,
            sparse_labels: slice(sl),
            sparse_has_child: slice(sh),
            sparse_louds: slice(so),
            sparse_roots,
            suffix_base,
            suffix_len,
            level_leaf_start,
            level_suffix_start,
            len: prefixes.len() as u64,
            zero: prefixes[0].truncate(0),
            payload,
            _key: PhantomData,
        })
    }

    /// Builds over the distinct `depth`-bit prefixes of sorted keys.
    pub fn from_sorted_keys(keys: &[K], depth: u32) -> Result<Self, TrieError> {
        Self::build(&crate::bloom::unique_prefixes(keys, depth), depth)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dense_cutoff(&self) -> u32 {
        self.cutoff
    }

    /// Number of stored prefixes.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Exact footprint: header, level tables, the packed payload rounded
    /// to whole words, and every rank directory.
    pub fn size_bits(&self) -> u64 {
        HEADER_BITS
            + LEVEL_META_BITS * self.depth as u64
            + self.payload.size_bits()
            + self.dense_labels.directory_bits()
            + self.dense_has_child.directory_bits()
            + self.sparse_labels.directory_bits()
            + self.sparse_has_child.directory_bits()
            + self.sparse_louds.directory_bits()
    }

    fn root(&self) -> Node {
        if self.cutoff == 0 {
            Node::Sparse(0)
        } else {
            Node::Dense(0)
        }
    }

    /// Edges of `node` as `(label, position)` in ascending label order.
    fn edges(&self, node: Node) -> ([(bool, u64); 2], usize) {
        let bits = &self.payload;
        let mut out = [(false, 0); 2];
        let mut n = 0;
        match node {
            Node::Dense(id) => {
                for b in 0..2u64 {
                    let pos = 2 * id + b;
                    if self.dense_labels.get(bits, pos) {
                        out[n] = (b == 1, pos);
                        n += 1;
                    }
                }
            }
            Node::Sparse(id) => {
                let start = self
                    .sparse_louds
                    .select1(bits, id)
                    .expect("sparse node id out of range");
                out[0] = (self.sparse_labels.get(bits, start), start);
                n = 1;
                let second = start + 1;
                if second < self.sparse_louds.len() && !self.sparse_louds.get(bits, second) {
                    out[1] = (self.sparse_labels.get(bits, second), second);
                    n = 2;
                }
            }
        }
        (out, n)
    }

    fn has_child(&self, node: Node, pos: u64) -> bool {
        match node {
            Node::Dense(_) => self.dense_has_child.get(&self.payload, pos),
            Node::Sparse(_) => self.sparse_has_child.get(&self.payload, pos),
        }
    }

    fn child(&self, node: Node, pos: u64) -> Node {
        match node {
            Node::Dense(_) => {
                let id = self.dense_has_child.rank1(&self.payload, pos + 1);
                if id < self.dense_nodes {
                    Node::Dense(id)
                } else {
                    Node::Sparse(id - self.dense_nodes)
                }
            }
            Node::Sparse(_) => {
                Node::Sparse(self.sparse_roots + self.sparse_has_child.rank1(&self.payload, pos))
            }
        }
    }

    /// Global leaf ordinal (level order) of the leaf edge at `pos`.
    fn leaf_ordinal(&self, node: Node, pos: u64) -> u64 {
        let bits = &self.payload;
        match node {
            Node::Dense(_) => {
                self.dense_labels.rank1(bits, pos) - self.dense_has_child.rank1(bits, pos)
            }
            Node::Sparse(_) => self.dense_leaves + pos - self.sparse_has_child.rank1(bits, pos),
        }
    }

    /// Completes the prefix of a leaf reached at level `level`.
    fn leaf_prefix(&self, node: Node, pos: u64, level: u32, path: K) -> K {
        let suffix_len = (self.depth - level - 1) as u64;
        if suffix_len == 0 {
            return path;
        }
        let ord = self.leaf_ordinal(node, pos) - self.level_leaf_start[level as usize];
        let start = self.suffix_base + self.level_suffix_start[level as usize] + ord * suffix_len;
        debug_assert!(start + suffix_len <= self.suffix_base + self.suffix_len);
        let mut key = path;
        for i in 0..suffix_len {
            if self.payload.get(start + i) {
                key = key.with_bit(level + 1 + i as u32);
            }
        }
        key
    }

    /// Stored prefixes inside `cover`, ascending. Lazy: no work is done
    /// past the last prefix the caller pulls.
    pub fn range_probe(&self, cover: &PrefixCover<K>) -> Result<RangeProbe<'_, K>, TrieError> {
        if cover.len != self.depth {
            return Err(TrieError::LengthMismatch {
                depth: self.depth,
                got: cover.len,
            });
        }
        Ok(self.probe_unchecked(&cover.first, &cover.last))
    }

    /// Probe over `[first, last]`, both truncated to the trie depth.
    pub(crate) fn probe_unchecked(&self, first: &K, last: &K) -> RangeProbe<'_, K> {
        let stack = if first <= last {
            vec![Step::Visit(Frame {
                node: self.root(),
                level: 0,
                path: self.zero.clone(),
                on_left: true,
                on_right: true,
            })]
        } else {
            Vec::new()
        };
        RangeProbe {
            trie: self,
            first: first.clone(),
            last: last.clone(),
            stack,
        }
    }

    pub fn contains(&self, prefix: &K) -> bool {
        let p = prefix.truncate(self.depth);
        self.probe_unchecked(&p, &p).next().is_some()
    }

    /// All stored prefixes, ascending.
    pub fn iter(&self) -> RangeProbe<'_, K> {
        let last = self.zero.fill_suffix(0).truncate(self.depth);
        self.probe_unchecked(&self.zero, &last)
    }
}

#[derive(Clone, Debug)]
struct Frame<K> {
    node: Node,
    level: u32,
    path: K,
    on_left: bool,
    on_right: bool,
}

#[derive(Clone, Debug)]
enum Step<K> {
    Visit(Frame<K>),
    Emit(K),
}

/// Iterator returned by [`UniformTrie::range_probe`].
#[derive(Clone, Debug)]
pub struct RangeProbe<'a, K> {
    trie: &'a UniformTrie<K>,
    first: K,
    last: K,
    stack: Vec<Step<K>>,
}

impl<K: Key> Iterator for RangeProbe<'_, K> {
    type Item = K;

    fn next(&mut self) -> Option<K> {
        while let Some(step) = self.stack.pop() {
            let frame = match step {
                Step::Emit(k) => return Some(k),
                Step::Visit(f) => f,
            };
            let d = frame.level;
            let lo_bit = frame.on_left && self.first.bit(d);
            let hi_bit = !frame.on_right || self.last.bit(d);
            let (edges, n) = self.trie.edges(frame.node);
            // push in reverse so the smaller label pops first
            for &(label, pos) in edges[..n].iter().rev() {
                if (label && !hi_bit) || (!label && lo_bit) {
                    continue;
                }
                let path = if label {
                    frame.path.with_bit(d)
                } else {
                    frame.path.clone()
                };
                let on_left = frame.on_left && label == self.first.bit(d);
                let on_right = frame.on_right && label == self.last.bit(d);
                if self.trie.has_child(frame.node, pos) {
                    self.stack.push(Step::Visit(Frame {
                        node: self.trie.child(frame.node, pos),
                        level: d + 1,
                        path,
                        on_left,
                        on_right,
                    }));
                } else {
                    let leaf = self.trie.leaf_prefix(frame.node, pos, d, path);
                    if (!on_left || leaf >= self.first) && (!on_right || leaf <= self.last) {
                        self.stack.push(Step::Emit(leaf));
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::unique_prefixes;
    use crate::keyspace::{prefix_count, IntKey, RangeQuery};
    use proptest::prelude::*;

    type K2 = IntKey<2>;
    type K12 = IntKey<12>;
    type K24 = IntKey<24>;

    fn cover<const B: u32>(a: u64, b: u64, len: u32) -> PrefixCover<IntKey<B>> {
        let q = RangeQuery::new(IntKey::<B>::new(a).unwrap(), IntKey::<B>::new(b).unwrap()).unwrap();
        prefix_count(&q, len).unwrap()
    }

    #[test]
    fn two_bit_examples() {
        for cutoff in 0..=2 {
            let set = [K2::new(0b00).unwrap(), K2::new(0b10).unwrap()];
            let t = UniformTrie::build_with_cutoff(&set, 2, cutoff).unwrap();
            assert_eq!(t.range_probe(&cover::<2>(0b01, 0b01, 2)).unwrap().count(), 0);
            let hits: Vec<u64> = t
                .range_probe(&cover::<2>(0b01, 0b11, 2))
                .unwrap()
                .map(|k| k.value())
                .collect();
            assert_eq!(hits, vec![0b10]);
            assert!(matches!(
                t.range_probe(&cover::<2>(0, 3, 1)),
                Err(TrieError::LengthMismatch { depth: 2, got: 1 })
            ));
        }
    }

    #[test]
    fn figure_key_set_resolves_queries() {
        let keys: Vec<K24> = [0x000123, 0x00F1AA, 0x010100, 0x020010, 0x0200F0, 0x7F0000]
            .into_iter()
            .map(|v| K24::new(v).unwrap())
            .collect();
        let t = UniformTrie::from_sorted_keys(&keys, 16).unwrap();
        // both ends of this query fall in 16-bit regions without keys
        assert_eq!(t.range_probe(&cover::<24>(0x00F200, 0x0100FF, 16)).unwrap().count(), 0);
        let hits: Vec<u64> = t
            .range_probe(&cover::<24>(0x020073, 0x02009C, 16))
            .unwrap()
            .map(|k| k.prefix_value(16))
            .collect();
        assert_eq!(hits, vec![0x0200]);
        let all: Vec<u64> = t.iter().map(|k| k.prefix_value(16)).collect();
        assert_eq!(all, vec![0x0001, 0x00F1, 0x0101, 0x0200, 0x7F00]);
    }

    #[test]
    fn single_prefix_size_is_fixed() {
        let one = [IntKey::<1>::new(1).unwrap()];
        let t = UniformTrie::build(&one, 1).unwrap();
        // header 320 + one level table 128 + one payload word 64
        // + two dense rank directories of one entry each
        assert_eq!(t.dense_cutoff(), 1);
        assert_eq!(t.size_bits(), 640);
        // the all-sparse layout needs three directories
        assert_eq!(UniformTrie::build_with_cutoff(&one, 1, 0).unwrap().size_bits(), 704);
        assert!(t.size_bits() <= estimate_bits(1, &[1, 1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(UniformTrie::<K2>::build(&[], 2).unwrap_err(), TrieError::Empty);
        let two = [K2::new(2).unwrap(), K2::new(1).unwrap()];
        assert_eq!(UniformTrie::build(&two, 2).unwrap_err(), TrieError::Unsorted);
        let untruncated = [K2::new(1).unwrap()];
        assert_eq!(UniformTrie::build(&untruncated, 1).unwrap_err(), TrieError::Unsorted);
        assert_eq!(UniformTrie::build(&untruncated, 0).unwrap_err(), TrieError::ZeroDepth);
    }

    #[test]
    fn level_counts_match_enumeration() {
        let keys: Vec<K12> = [3u64, 4, 5, 200, 4000].into_iter().map(K12::from_masked).collect();
        let counts = level_counts(&keys, 12);
        for (l, &c) in counts.iter().enumerate() {
            assert_eq!(c, unique_prefixes(&keys, l as u32).len() as u64, "level {l}");
        }
    }

    fn prefixes_of(values: &[u64], depth: u32) -> Vec<K12> {
        let mut keys: Vec<K12> = values.iter().map(|&v| K12::from_masked(v)).collect();
        keys.sort();
        unique_prefixes(&keys, depth)
    }

    proptest! {
        #[test]
        fn probe_matches_enumeration(
            values in proptest::collection::vec(0u64..4096, 1..80),
            depth in 1u32..=12,
            cutoff in 0u32..=12,
            a in 0u64..4096,
            b in 0u64..4096,
        ) {
            let prefixes = prefixes_of(&values, depth);
            let t = UniformTrie::build_with_cutoff(&prefixes, depth, cutoff).unwrap();
            let (a, b) = (a.min(b), a.max(b));
            let c = cover::<12>(a, b, depth);
            let got: Vec<K12> = t.range_probe(&c).unwrap().collect();
            let want: Vec<K12> = prefixes
                .iter()
                .filter(|p| **p >= c.first && **p <= c.last)
                .cloned()
                .collect();
            prop_assert_eq!(got, want);
            let all: Vec<K12> = t.iter().collect();
            prop_assert_eq!(&all, &prefixes);
            prop_assert_eq!(t.contains(&K12::from_masked(a)), prefixes.contains(&K12::from_masked(a).truncate(depth)));
        }

        #[test]
        fn size_never_exceeds_estimate(
            values in proptest::collection::vec(0u64..4096, 1..200),
            depth in 1u32..=12,
        ) {
            let prefixes = prefixes_of(&values, 12);
            let counts = level_counts(&prefixes, 12);
            let t = UniformTrie::from_sorted_keys(&prefixes, depth).unwrap();
            prop_assert!(t.size_bits() <= estimate_bits(depth, &counts));
            let at_depth = unique_prefixes(&prefixes, depth);
            let shapes = level_shapes(&at_depth, depth);
            for cutoff in 0..=depth {
                let t = UniformTrie::build_with_cutoff(&at_depth, depth, cutoff).unwrap();
                prop_assert_eq!(t.size_bits(), shape_bits(depth, &shapes, cutoff));
                prop_assert!(t.size_bits() <= estimate_bits_at(depth, cutoff, &counts));
            }
        }

        #[test]
        fn adding_a_prefix_never_shrinks_the_trie(
            values in proptest::collection::vec(0u64..4096, 1..100),
            extra in 0u64..4096,
            depth in 1u32..=12,
        ) {
            let base = prefixes_of(&values, depth);
            let mut more = values.clone();
            more.push(extra);
            let grown = prefixes_of(&more, depth);
            let a = UniformTrie::build(&base, depth).unwrap().size_bits();
            let b = UniformTrie::build(&grown, depth).unwrap().size_bits();
            prop_assert!(a <= b);
            for cutoff in 0..=depth {
                let a = UniformTrie::build_with_cutoff(&base, depth, cutoff).unwrap().size_bits();
                let b = UniformTrie::build_with_cutoff(&grown, depth, cutoff).unwrap().size_bits();
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn estimate_grows_with_depth(values in proptest::collection::vec(any::<u64>(), 1..300)) {
            let mut keys: Vec<IntKey<64>> = values.iter().map(|&v| IntKey::<64>::from_masked(v)).collect();
            keys.sort();
            keys.dedup();
            let counts = level_counts(&keys, 64);
            let mut prev = 0;
            for l1 in 0..=64 {
                let e = estimate_bits(l1, &counts);
                let direct = (0..=l1).map(|c| estimate_bits_at(l1, c, &counts)).min().unwrap();
                prop_assert_eq!(e, direct);
                prop_assert!(e >= prev);
                prev = e;
            }
        }
    }
}
