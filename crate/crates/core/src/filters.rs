//! The three range filters: a single prefix Bloom filter, a pair of prefix
//! Bloom filters, and the trie + prefix Bloom hybrid.
//!
//! Every filter answers "might `[left, right]` contain a key?" with no false
//! negatives. Probing walks prefixes in ascending order and stops at the
//! first positive unless [`ProbeMode::Exhaustive`] is requested, which only
//! changes the probe counts, never the verdict.

use std::fmt;

use thiserror::Error;

use crate::bloom::{unique_prefixes, BloomError, BloomFilter};
use crate::keyspace::{Key, KeyError, PrefixRange, RangeQuery};
use crate::trie::{TrieError, UniformTrie};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("cannot build a filter over an empty key set")]
    EmptyKeySet,
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("trie needs {trie_bits} bits but the budget is {budget}")]
    Infeasible { trie_bits: u64, budget: u64 },
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Trie(#[from] TrieError),
    #[error(transparent)]
    Bloom(#[from] BloomError),
}

/// Share of a two-filter budget given to the shorter prefix length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Forty,
    Fifty,
    Sixty,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Forty, Split::Fifty, Split::Sixty];

    pub fn percent(self) -> u64 {
        match self {
            Split::Forty => 40,
            Split::Fifty => 50,
            Split::Sixty => 60,
        }
    }

    pub fn fraction(self) -> f64 {
        self.percent() as f64 / 100.0
    }

    pub fn from_percent(p: u64) -> Option<Self> {
        match p {
            40 => Some(Split::Forty),
            50 => Some(Split::Fifty),
            60 => Some(Split::Sixty),
            _ => None,
        }
    }

    /// Bits for the first and second filter: `ceil(share * m)` and the rest.
    pub fn allocate(self, budget: u64) -> (u64, u64) {
        let first = (budget as u128 * self.percent() as u128).div_ceil(100) as u64;
        (first, budget - first)
    }
}

/// A filter configuration. Lengths are in bits; the memory budget is
/// passed separately so one design can be priced at several budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignPoint {
    /// One prefix Bloom filter at `prefix_len`.
    Pbf1 { prefix_len: u32 },
    /// Prefix Bloom filters at `short_len < long_len`.
    Pbf2 {
        short_len: u32,
        long_len: u32,
        split: Split,
    },
    /// Trie of depth `trie_depth` (0 = none) over a prefix Bloom filter at
    /// `bloom_len` (0 = none).
    Proteus { trie_depth: u32, bloom_len: u32 },
}

impl DesignPoint {
    /// `(l1, l2)` as reported in run output: the trie depth or shorter
    /// Bloom length first, 0 where a part is absent.
    pub fn lengths(&self) -> (u32, u32) {
        match *self {
            DesignPoint::Pbf1 { prefix_len } => (0, prefix_len),
            DesignPoint::Pbf2 {
                short_len,
                long_len,
                ..
            } => (short_len, long_len),
            DesignPoint::Proteus {
                trie_depth,
                bloom_len,
            } => (trie_depth, bloom_len),
        }
    }

    pub fn split(&self) -> Option<Split> {
        match *self {
            DesignPoint::Pbf2 { split, .. } => Some(split),
            _ => None,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            DesignPoint::Pbf1 { .. } => Family::Pbf1,
            DesignPoint::Pbf2 { .. } => Family::Pbf2,
            DesignPoint::Proteus { .. } => Family::Proteus,
        }
    }

    pub fn validate(&self, width: u32) -> Result<(), FilterError> {
        let bad = |msg: String| Err(FilterError::InvalidDesign(msg));
        match *self {
            DesignPoint::Pbf1 { prefix_len } => {
                if prefix_len == 0 || prefix_len > width {
                    return bad(format!("prefix length {prefix_len} outside 1..={width}"));
                }
            }
            DesignPoint::Pbf2 {
                short_len,
                long_len,
                ..
            } => {
                if short_len == 0 || short_len >= long_len || long_len > width {
                    return bad(format!(
                        "need 1 <= l1 < l2 <= {width}, got l1={short_len} l2={long_len}"
                    ));
                }
            }
            DesignPoint::Proteus {
                trie_depth,
                bloom_len,
            } => {
                if trie_depth == 0 && bloom_len == 0 {
                    return bad("a trie or a Bloom filter is required".into());
                }
                if trie_depth > width || bloom_len > width {
                    return bad(format!("lengths exceed key width {width}"));
                }
                if bloom_len != 0 && trie_depth >= bloom_len {
                    return bad(format!(
                        "trie depth {trie_depth} must be below Bloom length {bloom_len}"
                    ));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for DesignPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DesignPoint::Pbf1 { prefix_len } => write!(f, "pbf1(l={prefix_len})"),
            DesignPoint::Pbf2 {
                short_len,
                long_len,
                split,
            } => write!(
                f,
                "pbf2(l1={short_len}, l2={long_len}, split={}%)",
                split.percent()
            ),
            DesignPoint::Proteus {
                trie_depth,
                bloom_len,
            } => write!(f, "proteus(l1={trie_depth}, l2={bloom_len})"),
        }
    }
}

/// Filter family, used when searching a design space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    Pbf1,
    Pbf2,
    Proteus,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Pbf1 => "pbf1",
            Family::Pbf2 => "pbf2",
            Family::Proteus => "proteus",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pbf1" => Ok(Family::Pbf1),
            "pbf2" => Ok(Family::Pbf2),
            "proteus" => Ok(Family::Proteus),
            other => Err(format!("unknown filter family `{other}`")),
        }
    }
}

/// Verdict of one range query plus the work it took.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryOutcome {
    /// The range may contain a key.
    pub positive: bool,
    /// Trie searches plus matching trie prefixes pulled.
    pub trie_probes: u64,
    /// Bloom filter lookups, across all Bloom filters.
    pub bloom_probes: u64,
}

/// Whether probing stops at the first positive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProbeMode {
    #[default]
    ShortCircuit,
    Exhaustive,
}

impl ProbeMode {
    fn stop(self, positive: bool) -> bool {
        positive && self == ProbeMode::ShortCircuit
    }
}

/// Probes every `len`-bit prefix of `[lo, hi]`; returns whether any was
/// positive.
fn probe_span<K: Key>(
    bloom: &BloomFilter<K>,
    lo: &K,
    hi: &K,
    mode: ProbeMode,
    out: &mut QueryOutcome,
) -> bool {
    let len = bloom.prefix_len();
    let mut hit = false;
    for p in PrefixRange::new(lo.truncate(len), hi.truncate(len), len) {
        out.bloom_probes += 1;
        if bloom.contains_truncated(&p) {
            hit = true;
            if mode.stop(true) {
                break;
            }
        }
    }
    hit
}

/// Part of `q` inside the `len`-bit region starting at `region`.
fn clip_to_region<K: Key>(q: &RangeQuery<K>, region: &K, len: u32) -> (K, K) {
    let lo = if q.left().truncate(len) == *region {
        q.left().clone()
    } else {
        region.clone()
    };
    let hi = if q.right().truncate(len) == *region {
        q.right().clone()
    } else {
        region.fill_suffix(len)
    };
    (lo, hi)
}

fn check_keys<K: Key>(keys: &[K]) -> Result<(), FilterError> {
    if keys.is_empty() {
        return Err(FilterError::EmptyKeySet);
    }
    let width = keys[0].width();
    if let Some(k) = keys.iter().find(|k| k.width() != width) {
        return Err(KeyError::WidthMismatch(width, k.width()).into());
    }
    if keys.windows(2).any(|w| w[0] > w[1]) {
        return Err(FilterError::InvalidDesign("keys must be sorted".into()));
    }
    Ok(())
}

/// Single prefix Bloom filter: probes every prefix of the query.
#[derive(Clone, Debug)]
pub struct PrefixBloomFilter<K> {
    bloom: BloomFilter<K>,
}

impl<K: Key> PrefixBloomFilter<K> {
    pub fn build(keys: &[K], prefix_len: u32, budget: u64, seed: u64) -> Result<Self, FilterError> {
        check_keys(keys)?;
        DesignPoint::Pbf1 { prefix_len }.validate(keys[0].width())?;
        Ok(PrefixBloomFilter {
            bloom: BloomFilter::from_sorted_keys(keys, budget, prefix_len, seed)?,
        })
    }

    pub fn query(&self, q: &RangeQuery<K>, mode: ProbeMode) -> QueryOutcome {
        let mut out = QueryOutcome::default();
        out.positive = probe_span(&self.bloom, q.left(), q.right(), mode, &mut out);
        out
    }

    pub fn bloom(&self) -> &BloomFilter<K> {
        &self.bloom
    }

    pub fn size_bits(&self) -> u64 {
        self.bloom.size_bits()
    }
}

/// Two prefix Bloom filters: the short one gates probes of the long one.
#[derive(Clone, Debug)]
pub struct TwoPrefixBloomFilter<K> {
    short: BloomFilter<K>,
    long: BloomFilter<K>,
}

/// Seed offset for the second filter of a pair so the two hash
/// independently.
const SECOND_FILTER_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

impl<K: Key> TwoPrefixBloomFilter<K> {
    pub fn build(
        keys: &[K],
        short_len: u32,
        long_len: u32,
        split: Split,
        budget: u64,
        seed: u64,
    ) -> Result<Self, FilterError> {
        check_keys(keys)?;
        DesignPoint::Pbf2 {
            short_len,
            long_len,
            split,
        }
        .validate(keys[0].width())?;
        let (m1, m2) = split.allocate(budget);
        Ok(TwoPrefixBloomFilter {
            short: BloomFilter::from_sorted_keys(keys, m1, short_len, seed)?,
            long: BloomFilter::from_sorted_keys(keys, m2, long_len, seed ^ SECOND_FILTER_SEED)?,
        })
    }

    pub fn query(&self, q: &RangeQuery<K>, mode: ProbeMode) -> QueryOutcome {
        let mut out = QueryOutcome::default();
        let l1 = self.short.prefix_len();
        for region in PrefixRange::new(q.left().truncate(l1), q.right().truncate(l1), l1) {
            out.bloom_probes += 1;
            if !self.short.contains_truncated(&region) {
                continue;
            }
            let (lo, hi) = clip_to_region(q, &region, l1);
            if probe_span(&self.long, &lo, &hi, mode, &mut out) {
                out.positive = true;
                if mode.stop(true) {
                    break;
                }
            }
        }
        out
    }

    pub fn short_bloom(&self) -> &BloomFilter<K> {
        &self.short
    }

    pub fn long_bloom(&self) -> &BloomFilter<K> {
        &self.long
    }

    pub fn size_bits(&self) -> u64 {
        self.short.size_bits() + self.long.size_bits()
    }
}

/// Uniform-depth trie over a prefix Bloom filter; the Bloom filter gets
/// whatever the trie leaves of the budget.
#[derive(Clone, Debug)]
pub struct ProteusFilter<K> {
    trie: Option<UniformTrie<K>>,
    bloom: Option<BloomFilter<K>>,
}

impl<K: Key> ProteusFilter<K> {
    pub fn build(
        keys: &[K],
        trie_depth: u32,
        bloom_len: u32,
        budget: u64,
        seed: u64,
    ) -> Result<Self, FilterError> {
        check_keys(keys)?;
        DesignPoint::Proteus {
            trie_depth,
            bloom_len,
        }
        .validate(keys[0].width())?;
        let trie = if trie_depth > 0 {
            let t = UniformTrie::build(&unique_prefixes(keys, trie_depth), trie_depth)?;
            if t.size_bits() > budget {
                return Err(FilterError::Infeasible {
                    trie_bits: t.size_bits(),
                    budget,
                });
            }
            Some(t)
        } else {
            None
        };
        let left_over = budget - trie.as_ref().map_or(0, |t| t.size_bits());
        let bloom = if bloom_len > 0 {
            Some(BloomFilter::from_sorted_keys(keys, left_over, bloom_len, seed)?)
        } else {
            None
        };
        Ok(ProteusFilter { trie, bloom })
    }

    pub fn query(&self, q: &RangeQuery<K>, mode: ProbeMode) -> QueryOutcome {
        let mut out = QueryOutcome::default();
        let (trie, bloom) = match (&self.trie, &self.bloom) {
            (None, Some(bloom)) => {
                out.positive = probe_span(bloom, q.left(), q.right(), mode, &mut out);
                return out;
            }
            (Some(t), b) => (t, b),
            (None, None) => unreachable!("validated designs have a trie or a Bloom filter"),
        };
        let l1 = trie.depth();
        out.trie_probes = 1;
        let first = q.left().truncate(l1);
        let last = q.right().truncate(l1);
        for region in trie.probe_unchecked(&first, &last) {
            out.trie_probes += 1;
            let hit = match bloom {
                None => true,
                Some(bloom) => {
                    let (lo, hi) = clip_to_region(q, &region, l1);
                    probe_span(bloom, &lo, &hi, mode, &mut out)
                }
            };
            if hit {
                out.positive = true;
                if mode.stop(true) {
                    break;
                }
            }
        }
        out
    }

    pub fn trie(&self) -> Option<&UniformTrie<K>> {
        self.trie.as_ref()
    }

    pub fn bloom(&self) -> Option<&BloomFilter<K>> {
        self.bloom.as_ref()
    }

    pub fn size_bits(&self) -> u64 {
        self.trie.as_ref().map_or(0, |t| t.size_bits())
            + self.bloom.as_ref().map_or(0, |b| b.size_bits())
    }
}

/// Any of the three filters, built from a [`DesignPoint`].
// Filters are few and long-lived; boxing would only add a hop per query.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum RangeFilter<K> {
    Pbf1(PrefixBloomFilter<K>),
    Pbf2(TwoPrefixBloomFilter<K>),
    Proteus(ProteusFilter<K>),
}

impl<K: Key> RangeFilter<K> {
    /// Builds `design` over sorted `keys` within `budget` bits. Duplicate
    /// keys are allowed; each distinct prefix is stored once.
    pub fn build(keys: &[K], design: DesignPoint, budget: u64, seed: u64) -> Result<Self, FilterError> {
        Ok(match design {
            DesignPoint::Pbf1 { prefix_len } => {
                RangeFilter::Pbf1(PrefixBloomFilter::build(keys, prefix_len, budget, seed)?)
            }
            DesignPoint::Pbf2 {
                short_len,
                long_len,
                split,
            } => RangeFilter::Pbf2(TwoPrefixBloomFilter::build(
                keys, short_len, long_len, split, budget, seed,
            )?),
            DesignPoint::Proteus {
                trie_depth,
                bloom_len,
            } => RangeFilter::Proteus(ProteusFilter::build(keys, trie_depth, bloom_len, budget, seed)?),
        })
    }

    pub fn query(&self, q: &RangeQuery<K>) -> QueryOutcome {
        self.query_with(q, ProbeMode::ShortCircuit)
    }

    pub fn query_with(&self, q: &RangeQuery<K>, mode: ProbeMode) -> QueryOutcome {
        match self {
            RangeFilter::Pbf1(f) => f.query(q, mode),
            RangeFilter::Pbf2(f) => f.query(q, mode),
            RangeFilter::Proteus(f) => f.query(q, mode),
        }
    }

    pub fn size_bits(&self) -> u64 {
        match self {
            RangeFilter::Pbf1(f) => f.size_bits(),
            RangeFilter::Pbf2(f) => f.size_bits(),
            RangeFilter::Proteus(f) => f.size_bits(),
        }
    }
}
