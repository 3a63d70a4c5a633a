//! Fixed-width keys, range queries and prefix arithmetic.
//!
//! Every key is a big-endian bit string of a fixed width `k`. Integer keys
//! ([`IntKey`]) and null-padded byte strings ([`ByteKey`]) share the same
//! ordering rule (unsigned big-endian comparison), so a prefix of length `l`
//! is always "the top `l` bits" and the filters and the model never need to
//! know which representation they are looking at.
//!
//! Prefixes are represented as keys whose trailing `k - l` bits are zero
//! (see [`Key::truncate`]). That keeps a single type flowing through the
//! trie, the Bloom filters and the statistics code.

use std::fmt;
use std::hash::Hash;

use thiserror::Error;
use xxhash_rust::xxh3::xxh3_128_with_seed;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("prefix length {len} exceeds key width {width}")]
    InvalidLength { len: u32, width: u32 },
    #[error("value {value:#x} does not fit in {width} bits")]
    ValueOutOfRange { value: u64, width: u32 },
    #[error("range query is inverted (left > right)")]
    Inverted,
    #[error("key widths differ: {0} vs {1}")]
    WidthMismatch(u32, u32),
    #[error("byte string of length {len} exceeds padded length {target}")]
    Overflow { len: usize, target: usize },
    #[error("query intersects the key set")]
    NotEmpty,
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("key set is empty")]
    EmptyKeySet,
}

/// A fixed-width, big-endian bit string with a total order.
///
/// Bit `0` is the most significant bit. All keys that take part in one
/// filter or one model run must have the same width.
pub trait Key: Clone + Ord + Eq + Hash + fmt::Debug + Send + Sync + 'static {
    /// Width of the key in bits.
    fn width(&self) -> u32;

    /// Bit `i`, counted from the most significant end.
    fn bit(&self, i: u32) -> bool;

    /// A copy of `self` with bit `i` set to one.
    fn with_bit(&self, i: u32) -> Self;

    /// Length of the longest common prefix of `self` and `other`.
    fn lcp(&self, other: &Self) -> u32;

    /// Keeps the top `len` bits and zeroes the rest.
    fn truncate(&self, len: u32) -> Self;

    /// Keeps the top `len` bits and sets the rest to one (the last value of
    /// the `len`-bit region that contains `self`).
    fn fill_suffix(&self, len: u32) -> Self;

    /// Bits `[from, to)` read as an unsigned integer. Requires
    /// `to - from <= 128`.
    fn bits_between(&self, from: u32, to: u32) -> u128;

    /// Start of the next `len`-bit region after the one holding `self`, or
    /// `None` when `self` is already in the last region.
    fn next_region(&self, len: u32) -> Option<Self>;

    /// Two independent 64-bit hashes of the top `len` bits.
    fn prefix_hash(&self, len: u32, seed: u64) -> (u64, u64);
}

#[inline]
fn low_mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[inline]
fn split_hash(h: u128) -> (u64, u64) {
    (h as u64, (h >> 64) as u64)
}

/// An unsigned integer key of `BITS` bits (1..=64), stored in a `u64`.
///
/// [`Key64`] is the production width; narrower widths exist mostly so that
/// exhaustive tests can enumerate a whole key space.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IntKey<const BITS: u32>(u64);

pub type Key64 = IntKey<64>;

impl<const BITS: u32> IntKey<BITS> {
    pub const MIN: Self = IntKey(0);
    pub const MAX: Self = IntKey(if BITS >= 64 { u64::MAX } else { (1u64 << BITS) - 1 });

    pub fn new(value: u64) -> Result<Self, KeyError> {
        if value > Self::MAX.0 {
            return Err(KeyError::ValueOutOfRange { value, width: BITS });
        }
        Ok(IntKey(value))
    }

    /// Wraps `value`, masking it to `BITS` bits.
    pub fn from_masked(value: u64) -> Self {
        IntKey(value & Self::MAX.0)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// The top `len` bits as a right-aligned integer.
    pub fn prefix_value(self, len: u32) -> u64 {
        if len == 0 {
            0
        } else {
            self.0 >> (BITS - len)
        }
    }

    pub fn saturating_add(self, delta: u64) -> Self {
        IntKey(self.0.saturating_add(delta).min(Self::MAX.0))
    }

    pub fn checked_add(self, delta: u64) -> Option<Self> {
        self.0
            .checked_add(delta)
            .filter(|v| *v <= Self::MAX.0)
            .map(IntKey)
    }
}

impl<const BITS: u32> fmt::Debug for IntKey<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#x}", self.0)
    }
}

impl<const BITS: u32> fmt::Display for IntKey<BITS> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl<const BITS: u32> Key for IntKey<BITS> {
    #[inline]
    fn width(&self) -> u32 {
        BITS
    }

    #[inline]
    fn bit(&self, i: u32) -> bool {
        (self.0 >> (BITS - 1 - i)) & 1 == 1
    }

    #[inline]
    fn with_bit(&self, i: u32) -> Self {
        IntKey(self.0 | (1u64 << (BITS - 1 - i)))
    }

    #[inline]
    fn lcp(&self, other: &Self) -> u32 {
        let x = self.0 ^ other.0;
        if x == 0 {
            BITS
        } else {
            x.leading_zeros() - (64 - BITS)
        }
    }

    #[inline]
    fn truncate(&self, len: u32) -> Self {
        IntKey(self.0 & !low_mask(BITS - len))
    }

    #[inline]
    fn fill_suffix(&self, len: u32) -> Self {
        IntKey(self.0 | low_mask(BITS - len))
    }

    #[inline]
    fn bits_between(&self, from: u32, to: u32) -> u128 {
        if to <= from {
            return 0;
        }
        ((self.0 >> (BITS - to)) & low_mask(to - from)) as u128
    }

    #[inline]
    fn next_region(&self, len: u32) -> Option<Self> {
        if len == 0 {
            return None;
        }
        let start = self.truncate(len).0;
        start
            .checked_add(1u64 << (BITS - len))
            .filter(|v| *v <= Self::MAX.0)
            .map(IntKey)
    }

    #[inline]
    fn prefix_hash(&self, len: u32, seed: u64) -> (u64, u64) {
        let v = self.truncate(len).0;
        split_hash(xxh3_128_with_seed(&v.to_be_bytes(), seed))
    }
}

/// A fixed-width byte-string key, compared lexicographically.
///
/// Variable-length inputs are mapped onto a fixed width with [`pad`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ByteKey(Box<[u8]>);

impl ByteKey {
    pub fn new(bytes: impl Into<Box<[u8]>>) -> Self {
        ByteKey(bytes.into())
    }

    pub fn zeroed(len: usize) -> Self {
        ByteKey(vec![0u8; len].into_boxed_slice())
    }

    pub fn max_value(len: usize) -> Self {
        ByteKey(vec![0xffu8; len].into_boxed_slice())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len_bytes(&self) -> usize {
        self.0.len()
    }

    /// Big-endian addition of a small integer; `None` on overflow past the
    /// all-ones key.
    pub fn checked_add(&self, delta: u64) -> Option<Self> {
        let mut out = self.0.clone();
        let mut carry = delta as u128;
        for byte in out.iter_mut().rev() {
            if carry == 0 {
                break;
            }
            let sum = *byte as u128 + (carry & 0xff);
            *byte = sum as u8;
            carry = (carry >> 8) + (sum >> 8);
        }
        (carry == 0).then_some(ByteKey(out))
    }

    pub fn saturating_add(&self, delta: u64) -> Self {
        self.checked_add(delta)
            .unwrap_or_else(|| ByteKey::max_value(self.0.len()))
    }

    /// Lowercase hex encoding of the bytes.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.0.len() * 2);
        for b in self.0.iter() {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let s = s.trim();
        if !s.len().is_multiple_of(2) {
            return None;
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
            .collect::<Option<Vec<u8>>>()
            .map(|v| ByteKey(v.into_boxed_slice()))
    }
}

impl fmt::Debug for ByteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl Key for ByteKey {
    #[inline]
    fn width(&self) -> u32 {
        (self.0.len() * 8) as u32
    }

    #[inline]
    fn bit(&self, i: u32) -> bool {
        (self.0[(i / 8) as usize] >> (7 - i % 8)) & 1 == 1
    }

    fn with_bit(&self, i: u32) -> Self {
        let mut out = self.clone();
        out.0[(i / 8) as usize] |= 0x80 >> (i % 8);
        out
    }

    fn lcp(&self, other: &Self) -> u32 {
        for (i, (a, b)) in self.0.iter().zip(other.0.iter()).enumerate() {
            let x = a ^ b;
            if x != 0 {
                return i as u32 * 8 + x.leading_zeros();
            }
        }
        self.width().min(other.width())
    }

    fn truncate(&self, len: u32) -> Self {
        let mut out = self.clone();
        let full = (len / 8) as usize;
        let rem = len % 8;
        let mut i = full;
        if rem != 0 {
            out.0[i] &= 0xffu8 << (8 - rem);
            i += 1;
        }
        for b in out.0[i..].iter_mut() {
            *b = 0;
        }
        out
    }

    fn fill_suffix(&self, len: u32) -> Self {
        let mut out = self.clone();
        let full = (len / 8) as usize;
        let rem = len % 8;
        let mut i = full;
        if rem != 0 {
            out.0[i] |= 0xffu8 >> rem;
            i += 1;
        }
        for b in out.0[i..].iter_mut() {
            *b = 0xff;
        }
        out
    }

    fn bits_between(&self, from: u32, to: u32) -> u128 {
        if to <= from {
            return 0;
        }
        debug_assert!(to - from <= 128);
        let mut acc: u128 = 0;
        let mut pos = from;
        while pos < to {
            let byte = self.0[(pos / 8) as usize];
            let offset = pos % 8;
            let take = (8 - offset).min(to - pos);
            let chunk = (byte << offset) >> (8 - take);
            acc = (acc << take) | chunk as u128;
            pos += take;
        }
        acc
    }

    fn next_region(&self, len: u32) -> Option<Self> {
        if len == 0 {
            return None;
        }
        let mut out = self.truncate(len);
        // add one at bit position len - 1
        let mut idx = ((len - 1) / 8) as isize;
        let mut add = 0x80u16 >> ((len - 1) % 8);
        while idx >= 0 && add != 0 {
            let sum = out.0[idx as usize] as u16 + add;
            out.0[idx as usize] = sum as u8;
            add = sum >> 8;
            idx -= 1;
        }
        (add == 0).then_some(out)
    }

    fn prefix_hash(&self, len: u32, seed: u64) -> (u64, u64) {
        let t = self.truncate(len);
        let used = len.div_ceil(8) as usize;
        split_hash(xxh3_128_with_seed(&t.0[..used], seed))
    }
}

/// Pads `raw` with trailing null bytes up to `target` bytes.
pub fn pad(raw: &[u8], target: usize) -> Result<ByteKey, KeyError> {
    if raw.len() > target {
        return Err(KeyError::Overflow {
            len: raw.len(),
            target,
        });
    }
    let mut v = Vec::with_capacity(target);
    v.extend_from_slice(raw);
    v.resize(target, 0);
    Ok(ByteKey(v.into_boxed_slice()))
}

/// An inclusive interval `[left, right]` of the key space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RangeQuery<K> {
    left: K,
    right: K,
}

impl<K: Key> RangeQuery<K> {
    pub fn new(left: K, right: K) -> Result<Self, KeyError> {
        if left.width() != right.width() {
            return Err(KeyError::WidthMismatch(left.width(), right.width()));
        }
        if left > right {
            return Err(KeyError::Inverted);
        }
        Ok(RangeQuery { left, right })
    }

    pub fn point(key: K) -> Self {
        RangeQuery {
            right: key.clone(),
            left: key,
        }
    }

    pub fn left(&self) -> &K {
        &self.left
    }

    pub fn right(&self) -> &K {
        &self.right
    }

    pub fn width(&self) -> u32 {
        self.left.width()
    }

    pub fn contains(&self, key: &K) -> bool {
        &self.left <= key && key <= &self.right
    }

    /// Whether any key of the sorted slice lies inside the query.
    pub fn intersects(&self, sorted_keys: &[K]) -> bool {
        let idx = sorted_keys.partition_point(|k| k < &self.left);
        idx < sorted_keys.len() && sorted_keys[idx] <= self.right
    }

    /// Clips the query to `[lo, hi]`, or `None` when they do not overlap.
    pub fn clip(&self, lo: &K, hi: &K) -> Option<Self> {
        let left = (&self.left).max(lo).clone();
        let right = (&self.right).min(hi).clone();
        (left <= right).then_some(RangeQuery { left, right })
    }
}

/// A length-tagged prefix: a key whose bits past `len` are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Prefix<K> {
    key: K,
    len: u32,
}

impl<K: Key> Prefix<K> {
    pub fn key(&self) -> &K {
        &self.key
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl<const BITS: u32> Prefix<IntKey<BITS>> {
    /// The prefix bits as a right-aligned integer.
    pub fn value(&self) -> u64 {
        self.key.prefix_value(self.len)
    }
}

/// The top `len` bits of `key`.
pub fn prefix<K: Key>(key: &K, len: u32) -> Result<Prefix<K>, KeyError> {
    let width = key.width();
    if len > width {
        return Err(KeyError::InvalidLength { len, width });
    }
    Ok(Prefix {
        key: key.truncate(len),
        len,
    })
}

/// Number of `len`-bit regions strictly after the region of `lo` up to and
/// including the region of `hi` (`hi >= lo`), saturating at `u128::MAX`.
pub fn region_distance<K: Key>(lo: &K, hi: &K, len: u32) -> u128 {
    let common = lo.lcp(hi);
    if len <= common {
        return 0;
    }
    if len - common > 128 {
        return u128::MAX;
    }
    hi.bits_between(common, len) - lo.bits_between(common, len)
}

/// `Q_l`: the `len`-bit prefixes that cover a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixCover<K> {
    pub len: u32,
    /// Number of prefixes, saturating at `u128::MAX`.
    pub count: u128,
    pub first: K,
    pub last: K,
}

impl<K: Key> PrefixCover<K> {
    /// Iterates the covered prefixes in ascending order.
    pub fn prefixes(&self) -> PrefixRange<K> {
        PrefixRange::new(self.first.clone(), self.last.clone(), self.len)
    }
}

/// Computes `Q_l` for `1 <= len <= k` (`len == 0` yields the single empty
/// prefix).
pub fn prefix_count<K: Key>(q: &RangeQuery<K>, len: u32) -> Result<PrefixCover<K>, KeyError> {
    let width = q.width();
    if len > width {
        return Err(KeyError::InvalidLength { len, width });
    }
    Ok(cover_unchecked(q, len))
}

pub(crate) fn cover_unchecked<K: Key>(q: &RangeQuery<K>, len: u32) -> PrefixCover<K> {
    PrefixCover {
        len,
        count: region_distance(&q.left, &q.right, len).saturating_add(1),
        first: q.left.truncate(len),
        last: q.right.truncate(len),
    }
}

/// Ascending iterator over the `len`-bit prefixes in `[first, last]`.
#[derive(Clone, Debug)]
pub struct PrefixRange<K> {
    next: Option<K>,
    last: K,
    len: u32,
}

impl<K: Key> PrefixRange<K> {
    pub fn new(first: K, last: K, len: u32) -> Self {
        let next = (first.truncate(len) <= last).then(|| first.truncate(len));
        PrefixRange {
            next,
            last: last.truncate(len),
            len,
        }
    }
}

impl<K: Key> Iterator for PrefixRange<K> {
    type Item = K;

    fn next(&mut self) -> Option<K> {
        let cur = self.next.take()?;
        if cur < self.last {
            self.next = cur.next_region(self.len);
        }
        Some(cur)
    }
}

/// Neighbors of an empty query in a sorted key set, summarised by LCPs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proximity {
    /// `lcp(Q, K)`: the longest common prefix between any value in the
    /// query and any key.
    pub lcp: u32,
    /// Longest prefix `left` shares with a key; the first `l`-bit prefix of
    /// the query is in `K_l` exactly when `left_depth >= l`.
    pub left_depth: u32,
    /// Same for `right` and the last prefix of the query.
    pub right_depth: u32,
}

impl Proximity {
    /// Proximity from the nearest keys below `left` and above `right`.
    pub fn from_neighbors<K: Key>(q: &RangeQuery<K>, pred: Option<&K>, succ: Option<&K>) -> Self {
        let lcp_with = |k: Option<&K>, x: &K| k.map_or(0, |k| k.lcp(x));
        let pl = lcp_with(pred, &q.left);
        let sr = lcp_with(succ, &q.right);
        Proximity {
            lcp: pl.max(sr),
            left_depth: pl.max(lcp_with(succ, &q.left)),
            right_depth: lcp_with(pred, &q.right).max(sr),
        }
    }

    /// Looks the neighbors up by binary search.
    pub fn locate<K: Key>(q: &RangeQuery<K>, sorted_keys: &[K]) -> Result<Self, KeyError> {
        let idx = sorted_keys.partition_point(|k| k < &q.left);
        if idx < sorted_keys.len() && sorted_keys[idx] <= q.right {
            return Err(KeyError::NotEmpty);
        }
        let pred = idx.checked_sub(1).map(|i| &sorted_keys[i]);
        let succ = sorted_keys.get(idx);
        Ok(Self::from_neighbors(q, pred, succ))
    }

    pub fn first_present(&self, len: u32) -> bool {
        self.left_depth >= len
    }

    pub fn last_present(&self, len: u32) -> bool {
        self.right_depth >= len
    }
}

/// `lcp(Q, K)` for an empty query against sorted keys.
pub fn interval_lcp<K: Key>(q: &RangeQuery<K>, sorted_keys: &[K]) -> Result<u32, KeyError> {
    Proximity::locate(q, sorted_keys).map(|p| p.lcp)
}

/// How an empty query lines up with the `l1`-bit regions at its two ends.
///
/// `i2`/`i3` use the "present" sense: set when the end prefix is in `K_l1`,
/// i.e. when a trie of depth `l1` would match it and forward the query to
/// the `l2` filter. A query inside a single `l1` region is attributed to
/// the left end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct EndpointAnalysis {
    /// The first `l1` region is not fully contained in the query.
    pub i0: bool,
    /// The last `l1` region is not fully contained in the query.
    pub i1: bool,
    /// The first `l1` prefix is in `K_l1`.
    pub i2: bool,
    /// The last `l1` prefix is in `K_l1` (always false for a single region).
    pub i3: bool,
    /// `|L|`: `l2` prefixes of the query under the first `l1` prefix.
    pub left_size: u128,
    /// `|R|`: `l2` prefixes of the query under the last `l1` prefix.
    pub right_size: u128,
    /// `|Q_l1| == 1`.
    pub single_region: bool,
}

impl EndpointAnalysis {
    /// Number of `l2` probes a depth-`l1` trie forwards: `I2|L| + I3|R|`.
    pub fn regions_queried(&self) -> u128 {
        let l = if self.i2 { self.left_size } else { 0 };
        let r = if self.i3 { self.right_size } else { 0 };
        l.saturating_add(r)
    }

    /// Geometry for `l1 < l2 <= k` (`l1 == 0` allowed) given which end
    /// prefixes are present.
    pub fn compute<K: Key>(
        q: &RangeQuery<K>,
        l1: u32,
        l2: u32,
        first_present: bool,
        last_present: bool,
    ) -> Self {
        let (left, right) = (&q.left, &q.right);
        let single = left.lcp(right) >= l1;
        let left_aligned = left.truncate(l1) == *left;
        let right_aligned = right.fill_suffix(l1) == *right;
        let span = l2 - l1;
        if single {
            EndpointAnalysis {
                i0: !(left_aligned && right_aligned),
                i1: false,
                i2: first_present,
                i3: false,
                left_size: region_distance(left, right, l2).saturating_add(1),
                right_size: 0,
                single_region: true,
            }
        } else {
            let (left_size, right_size) = if span >= 128 {
                (u128::MAX, u128::MAX)
            } else {
                (
                    (1u128 << span) - left.bits_between(l1, l2),
                    right.bits_between(l1, l2) + 1,
                )
            };
            EndpointAnalysis {
                i0: !left_aligned,
                i1: !right_aligned,
                i2: first_present,
                i3: last_present,
                left_size,
                right_size,
                single_region: false,
            }
        }
    }
}

/// Endpoint analysis of an empty query against a sorted key set, for
/// `1 <= l1 < l2 <= k`.
pub fn endpoint_analysis<K: Key>(
    q: &RangeQuery<K>,
    sorted_keys: &[K],
    l1: u32,
    l2: u32,
) -> Result<EndpointAnalysis, KeyError> {
    let width = q.width();
    if l1 == 0 || l1 >= l2 || l2 > width {
        return Err(KeyError::InvalidDesign(format!(
            "need 1 <= l1 < l2 <= {width}, got l1={l1} l2={l2}"
        )));
    }
    let prox = Proximity::locate(q, sorted_keys)?;
    Ok(EndpointAnalysis::compute(
        q,
        l1,
        l2,
        prox.first_present(l1),
        prox.last_present(l1),
    ))
}
