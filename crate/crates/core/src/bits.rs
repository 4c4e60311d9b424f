//! Bit-packed binary feature vectors and Hamming geometry.
//!
//! Vectors are packed into `u64` words so that Hamming distance is a
//! handful of xor + popcount instructions. The distance-to-dataset scan
//! is the hot loop of the whole pipeline, so everything here stays
//! allocation-free on the query path.

use rand::seq::index::sample as index_sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

/// A fixed-width binary feature vector, bit-packed.
///
/// Trailing bits beyond `width` are kept zero, so derived equality and
/// hashing are well-defined.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    width: usize,
}

impl BitVector {
    pub fn zeros(width: usize) -> Self {
        assert!(width > 0, "width must be positive");
        BitVector {
            words: vec![0; width.div_ceil(WORD_BITS)],
            width,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / WORD_BITS] |= 1u64 << (i % WORD_BITS);
            }
        }
        v
    }

    /// Parse a string of '0'/'1' characters.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Domain("empty bit string".into()));
        }
        let mut v = BitVector::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                _ => return Err(Error::Format(format!("invalid bit character `{c}`"))),
            }
        }
        Ok(v)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.width);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.width);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Hamming distance via xor + popcount.
    pub fn hamming(&self, other: &BitVector) -> Result<usize> {
        if self.width != other.width {
            return Err(Error::Schema(format!(
                "width mismatch: {} vs {}",
                self.width, other.width
            )));
        }
        Ok(self.hamming_unchecked(other))
    }

    /// Hamming distance without the width check; callers must have
    /// validated widths once up front.
    #[inline]
    pub fn hamming_unchecked(&self, other: &BitVector) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// A copy with the bits at `indices` flipped. Indices must be distinct.
    pub fn with_flipped(&self, indices: &[usize]) -> BitVector {
        let mut v = self.clone();
        for &i in indices {
            v.flip(i);
        }
        v
    }

    /// Uniform random vector.
    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> BitVector {
        let bits: Vec<bool> = (0..width).map(|_| rng.gen_bool(0.5)).collect();
        BitVector::from_bools(&bits)
    }

    /// Uniform neighbor at Hamming distance exactly `r`: flip a uniform
    /// random r-subset of indices.
    pub fn random_neighbor<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> BitVector {
        debug_assert!(r >= 1 && r <= self.width);
        let idx = index_sample(rng, self.width, r);
        let mut v = self.clone();
        for i in idx {
            v.flip(i);
        }
        v
    }

    /// Dense 0.0/1.0 representation, the model input encoding.
    pub fn to_dense(&self) -> Vec<f64> {
        (0..self.width)
            .map(|i| if self.get(i) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn to_bit_str(&self) -> String {
        (0..self.width)
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect()
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.width <= 64 {
            write!(f, "BitVector({})", self.to_bit_str())
        } else {
            write!(f, "BitVector(width={}, ones={})", self.width, self.count_ones())
        }
    }
}

impl Serialize for BitVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_str())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        BitVector::from_bit_str(&s).map_err(serde::de::Error::custom)
    }
}

/// A record with some features masked out: the attacker's partial view.
/// `unknown` holds the masked feature indices, sorted ascending.
#[derive(Clone, Debug)]
pub struct PartialVector {
    base: BitVector,
    unknown: Vec<usize>,
}

impl PartialVector {
    pub fn new(base: BitVector, mut unknown: Vec<usize>) -> Result<Self> {
        unknown.sort_unstable();
        unknown.dedup();
        if unknown.is_empty() {
            return Err(Error::Domain("unknown part must be non-empty".into()));
        }
        if let Some(&max) = unknown.last() {
            if max >= base.width() {
                return Err(Error::Domain(format!(
                    "unknown index {max} out of range for width {}",
                    base.width()
                )));
            }
        }
        Ok(PartialVector { base, unknown })
    }

    pub fn base(&self) -> &BitVector {
        &self.base
    }

    pub fn unknown(&self) -> &[usize] {
        &self.unknown
    }

    pub fn unknown_len(&self) -> usize {
        self.unknown.len()
    }

    /// Materialize a candidate: known bits come from the base, unknown
    /// bits from `assignment` (one bool per unknown index, in order).
    pub fn complete(&self, assignment: &[bool]) -> Result<BitVector> {
        if assignment.len() != self.unknown.len() {
            return Err(Error::Domain(format!(
                "assignment length {} does not match unknown part size {}",
                assignment.len(),
                self.unknown.len()
            )));
        }
        let mut v = self.base.clone();
        for (&i, &b) in self.unknown.iter().zip(assignment) {
            v.set(i, b);
        }
        Ok(v)
    }

    /// Completion from the low `m'` bits of an integer: bit `j` of `code`
    /// drives `unknown[j]`. Used by the enumeration attacks, where ties
    /// resolve to the lowest code.
    pub fn complete_from_code(&self, code: u64) -> BitVector {
        let mut v = self.base.clone();
        for (j, &i) in self.unknown.iter().enumerate() {
            v.set(i, (code >> j) & 1 == 1);
        }
        v
    }
}

/// Uniform random vector, shared by tests across the crate.
#[cfg(test)]
pub(crate) fn random_vec<R: Rng>(width: usize, rng: &mut R) -> BitVector {
    BitVector::random(width, rng)
}
