//! Standard Bloom filter over fixed-length key prefixes.
//!
//! Probe positions use double hashing: one 128-bit hash of the prefix is
//! split into `h1, h2` and the `i`-th position is `(h1 + i * h2) mod m`.
//! Positions are taken modulo the exact bit budget, so a filter never uses
//! more memory than it was given.

use std::marker::PhantomData;

use thiserror::Error;

use crate::keyspace::{Key, Prefix};

/// Upper bound on the number of hash functions.
pub const MAX_HASHES: u32 = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BloomError {
    #[error("a Bloom filter needs at least one element")]
    NoElements,
    #[error("prefix has length {got}, filter expects {expected}")]
    InvalidPrefix { expected: u32, got: u32 },
}

/// Hash count and predicted false-positive probability for `m` bits and
/// `n` elements.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BloomPlan {
    pub hashes: u32,
    pub fpr: f64,
}

/// Plans a filter of `m` bits holding `n` distinct elements.
///
/// `h = min(32, ceil(m/n * ln 2))` and `p = (1 - e^{-h n / m})^h`. With no
/// memory the filter answers positive to everything (`p = 1`).
pub fn plan(m: u64, n: u64) -> Result<BloomPlan, BloomError> {
    if n == 0 {
        return Err(BloomError::NoElements);
    }
    if m == 0 {
        return Ok(BloomPlan { hashes: 0, fpr: 1.0 });
    }
    let ratio = m as f64 / n as f64;
    let hashes = ((ratio * std::f64::consts::LN_2).ceil() as u32).clamp(1, MAX_HASHES);
    let fpr = (1.0 - (-(hashes as f64) / ratio).exp()).powi(hashes as i32);
    Ok(BloomPlan { hashes, fpr })
}

/// Collects prefixes for a [`BloomFilter`]. Single writer; call
/// [`BloomBuilder::build`] to freeze.
#[derive(Clone, Debug)]
pub struct BloomBuilder<K> {
    filter: BloomFilter<K>,
}

impl<K: Key> BloomBuilder<K> {
    /// A builder for `m` bits sized for `n` distinct prefixes of length
    /// `prefix_len`.
    pub fn new(m: u64, n: u64, prefix_len: u32, seed: u64) -> Result<Self, BloomError> {
        let plan = plan(m, n)?;
        Ok(BloomBuilder {
            filter: BloomFilter {
                words: vec![0; m.div_ceil(64) as usize],
                m,
                hashes: plan.hashes,
                seed,
                prefix_len,
                planned_fpr: plan.fpr.into(),
                _key: PhantomData,
            },
        })
    }

    pub fn insert(&mut self, prefix: &Prefix<K>) -> Result<(), BloomError> {
        self.filter.check_len(prefix)?;
        self.insert_truncated(prefix.key());
        Ok(())
    }

    /// Inserts a key that is already truncated to the filter's prefix
    /// length.
    pub(crate) fn insert_truncated(&mut self, key: &K) {
        let f = &mut self.filter;
        if f.m == 0 {
            return;
        }
        let (h1, h2) = key.prefix_hash(f.prefix_len, f.seed);
        for i in 0..f.hashes as u64 {
            let pos = h1.wrapping_add(i.wrapping_mul(h2)) % f.m;
            f.words[(pos / 64) as usize] |= 1u64 << (pos % 64);
        }
    }

    pub fn build(self) -> BloomFilter<K> {
        self.filter
    }
}

/// An immutable Bloom filter over `prefix_len`-bit prefixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter<K> {
    words: Vec<u64>,
    m: u64,
    hashes: u32,
    seed: u64,
    prefix_len: u32,
    planned_fpr: OrderedF64,
    _key: PhantomData<K>,
}

// f64 wrapper so the filter can derive Eq for bit-identity checks.
#[derive(Clone, Copy, Debug, PartialEq)]
struct OrderedF64(f64);
impl Eq for OrderedF64 {}
impl From<f64> for OrderedF64 {
    fn from(v: f64) -> Self {
        OrderedF64(v)
    }
}

impl<K: Key> BloomFilter<K> {
    /// Builds a filter from keys sorted ascending; each distinct prefix is
    /// inserted once and `n` counts distinct prefixes.
    pub fn from_sorted_keys(
        keys: &[K],
        m: u64,
        prefix_len: u32,
        seed: u64,
    ) -> Result<Self, BloomError> {
        let prefixes = unique_prefixes(keys, prefix_len);
        let mut builder = BloomBuilder::new(m, prefixes.len() as u64, prefix_len, seed)?;
        for p in &prefixes {
            builder.insert_truncated(p);
        }
        Ok(builder.build())
    }

    fn check_len(&self, prefix: &Prefix<K>) -> Result<(), BloomError> {
        if prefix.len() != self.prefix_len {
            return Err(BloomError::InvalidPrefix {
                expected: self.prefix_len,
                got: prefix.len(),
            });
        }
        Ok(())
    }

    pub fn query(&self, prefix: &Prefix<K>) -> Result<bool, BloomError> {
        self.check_len(prefix)?;
        Ok(self.contains_truncated(prefix.key()))
    }

    /// Membership test for a key already truncated to the prefix length.
    #[inline]
    pub(crate) fn contains_truncated(&self, key: &K) -> bool {
        if self.m == 0 {
            return true;
        }
        let (h1, h2) = key.prefix_hash(self.prefix_len, self.seed);
        (0..self.hashes as u64).all(|i| {
            let pos = h1.wrapping_add(i.wrapping_mul(h2)) % self.m;
            self.words[(pos / 64) as usize] & (1u64 << (pos % 64)) != 0
        })
    }

    pub fn prefix_len(&self) -> u32 {
        self.prefix_len
    }

    pub fn num_hashes(&self) -> u32 {
        self.hashes
    }

    /// Bit budget `m`; the backing words round this up to a multiple of 64
    /// but the extra bits are never addressed.
    pub fn size_bits(&self) -> u64 {
        self.m
    }

    pub fn planned_fpr(&self) -> f64 {
        self.planned_fpr.0
    }

    pub fn bit_words(&self) -> &[u64] {
        &self.words
    }
}

/// Distinct `len`-bit prefixes of sorted keys, ascending.
pub fn unique_prefixes<K: Key>(sorted_keys: &[K], len: u32) -> Vec<K> {
    let mut out: Vec<K> = Vec::new();
    for k in sorted_keys {
        let p = k.truncate(len);
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}
