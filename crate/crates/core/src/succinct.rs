//! Bit storage with rank/select for the trie encoding.
//!
//! All of a trie's bitmaps live back to back in one [`PackedBits`] payload;
//! each bitmap is addressed through a [`RankedSlice`] that keeps its own
//! rank directory (one 64-bit cumulative count per 512 payload bits).
//! Packing means word rounding is paid once per trie instead of once per
//! bitmap, so the footprint never shrinks when a bitmap grows.

/// Payload bits covered by one rank directory entry.
pub const RANK_BLOCK_BITS: u64 = 512;
/// Width of one rank directory entry.
pub const RANK_ENTRY_BITS: u64 = 64;

/// Directory footprint of a ranked bitmap of `len` bits.
pub fn rank_directory_bits(len: u64) -> u64 {
    len.div_ceil(RANK_BLOCK_BITS) * RANK_ENTRY_BITS
}

/// Footprint of a payload of `len` bits (rounded up to whole words).
pub fn payload_bits(len: u64) -> u64 {
    len.div_ceil(64) * 64
}

#[inline]
fn low_bits(w: u64, n: u64) -> u64 {
    if n >= 64 {
        w
    } else {
        w & ((1u64 << n) - 1)
    }
}

/// Growable bit array; bit `i` lives in word `i / 64` at position `i % 64`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitStore {
    words: Vec<u64>,
    len: u64,
}

impl BitStore {
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[(self.len / 64) as usize] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Appends all bits of `other`, returning the offset they start at.
    pub fn append(&mut self, other: &BitStore) -> u64 {
        let base = self.len;
        for i in 0..other.len {
            self.push(other.get(i));
        }
        base
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// The 64 bits starting at `pos` (bits past the end read as zero).
    #[inline]
    pub fn word_at(&self, pos: u64) -> u64 {
        let w = (pos / 64) as usize;
        let off = pos % 64;
        let lo = self.words.get(w).copied().unwrap_or(0) >> off;
        if off == 0 {
            lo
        } else {
            lo | self.words.get(w + 1).copied().unwrap_or(0) << (64 - off)
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn size_bits(&self) -> u64 {
        payload_bits(self.len)
    }
}

/// Shared payload holding several bitmaps back to back.
pub type PackedBits = BitStore;

/// A bitmap stored at `[base, base + len)` of a [`PackedBits`] payload,
/// with constant-time rank and logarithmic select.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RankedSlice {
    base: u64,
    len: u64,
    // ones before each 512-bit block
    blocks: Vec<u64>,
    ones: u64,
}

impl RankedSlice {
    pub fn new(bits: &PackedBits, base: u64, len: u64) -> Self {
        let mut blocks = Vec::with_capacity(len.div_ceil(RANK_BLOCK_BITS) as usize);
        let mut acc = 0u64;
        let mut pos = 0u64;
        while pos < len {
            if pos.is_multiple_of(RANK_BLOCK_BITS) {
                blocks.push(acc);
            }
            let n = (len - pos).min(64);
            acc += low_bits(bits.word_at(base + pos), n).count_ones() as u64;
            pos += n;
        }
        RankedSlice {
            base,
            len,
            blocks,
            ones: acc,
        }
    }

    #[inline]
    pub fn get(&self, bits: &PackedBits, i: u64) -> bool {
        debug_assert!(i < self.len);
        bits.get(self.base + i)
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn count_ones(&self) -> u64 {
        self.ones
    }

    /// Ones in `[0, i)`, for `i <= len`.
    #[inline]
    pub fn rank1(&self, bits: &PackedBits, i: u64) -> u64 {
        if i >= self.len {
            return self.ones;
        }
        let block = i / RANK_BLOCK_BITS;
        let mut r = self.blocks[block as usize];
        let mut pos = block * RANK_BLOCK_BITS;
        while pos < i {
            let n = (i - pos).min(64);
            r += low_bits(bits.word_at(self.base + pos), n).count_ones() as u64;
            pos += n;
        }
        r
    }

    /// Position of the one with zero-based rank `r`.
    pub fn select1(&self, bits: &PackedBits, r: u64) -> Option<u64> {
        if r >= self.ones {
            return None;
        }
        let block = self.blocks.partition_point(|&c| c <= r) - 1;
        let mut remaining = r - self.blocks[block];
        let mut pos = block as u64 * RANK_BLOCK_BITS;
        while pos < self.len {
            let n = (self.len - pos).min(64);
            let mut w = low_bits(bits.word_at(self.base + pos), n);
            let c = w.count_ones() as u64;
            if remaining < c {
                for _ in 0..remaining {
                    w &= w - 1;
                }
                return Some(pos + w.trailing_zeros() as u64);
            }
            remaining -= c;
            pos += n;
        }
        None
    }

    pub fn directory_bits(&self) -> u64 {
        self.blocks.len() as u64 * RANK_ENTRY_BITS
    }
}
