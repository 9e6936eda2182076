//! Packed bit-vector primitives shared by every other module.
//!
//! A logical bit vector of length `n` is stored in `ceil(n / 32)` 32-bit
//! words. Logical position `p` lives in word `p / 32`, at bit `p % 32`
//! (least-significant-bit first). Bits past the logical length are padding
//! and are kept at zero so that word-level operations can treat padded
//! positions as excluded.

use crate::error::{Result, TmError};

/// Number of bits per storage word.
pub const WORD_BITS: usize = 32;

/// Number of 32-bit words needed to hold `n_bits` logical bits.
#[inline]
pub const fn word_count(n_bits: usize) -> usize {
    n_bits.div_ceil(WORD_BITS)
}

/// Extends `n` boolean features to the `2n` literal vector: the original
/// features first, then their complements.
pub fn negate_extend(features: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(features.len() * 2);
    out.extend_from_slice(features);
    out.extend(features.iter().map(|&b| 1 - (b & 1)));
    out
}

/// A fixed-width word array holding a logical bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PackedBits {
    words: Vec<u32>,
    logical_len: usize,
}

impl PackedBits {
    /// Packs a {0,1} sequence. Any nonzero byte counts as a set bit.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut words = vec![0u32; word_count(bits.len())];
        for (p, &b) in bits.iter().enumerate() {
            if b != 0 {
                words[p / WORD_BITS] |= 1 << (p % WORD_BITS);
            }
        }
        PackedBits {
            words,
            logical_len: bits.len(),
        }
    }

    /// Builds from raw words, validating the word count and that every
    /// padding bit is zero.
    pub fn from_words(words: Vec<u32>, logical_len: usize) -> Result<Self> {
        if words.len() != word_count(logical_len) {
            return Err(TmError::LengthMismatch {
                expected: word_count(logical_len),
                got: words.len(),
            });
        }
        let pb = PackedBits { words, logical_len };
        if !pb.padding_is_zero() {
            return Err(TmError::Shape(format!(
                "nonzero padding bits past logical length {logical_len}"
            )));
        }
        Ok(pb)
    }

    /// An all-zero vector of the given logical length.
    pub fn zeros(logical_len: usize) -> Self {
        PackedBits {
            words: vec![0; word_count(logical_len)],
            logical_len,
        }
    }

    #[inline]
    pub fn logical_len(&self) -> usize {
        self.logical_len
    }

    #[inline]
    pub fn words(&self) -> &[u32] {
        &self.words
    }

    #[inline]
    pub fn get(&self, p: usize) -> bool {
        assert!(p < self.logical_len);
        (self.words[p / WORD_BITS] >> (p % WORD_BITS)) & 1 == 1
    }

    pub fn set(&mut self, p: usize, value: bool) {
        assert!(p < self.logical_len);
        let mask = 1u32 << (p % WORD_BITS);
        if value {
            self.words[p / WORD_BITS] |= mask;
        } else {
            self.words[p / WORD_BITS] &= !mask;
        }
    }

    /// Unpacks into a {0,1} byte per logical position.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.logical_len);
        for p in 0..self.logical_len {
            out.push(((self.words[p / WORD_BITS] >> (p % WORD_BITS)) & 1) as u8);
        }
        out
    }

    /// Population count over the logical region (padding is zero by
    /// invariant, so the plain word sum is exact).
    #[inline]
    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Mask of meaningful bits in the last word, or `u32::MAX` when the
    /// logical length is a word multiple.
    #[inline]
    pub fn last_word_mask(&self) -> u32 {
        last_word_mask(self.logical_len)
    }

    fn padding_is_zero(&self) -> bool {
        match self.words.last() {
            Some(&last) => last & !last_word_mask(self.logical_len) == 0,
            None => true,
        }
    }
}

/// Mask of meaningful bits in the final word of an `n_bits` vector.
#[inline]
pub const fn last_word_mask(n_bits: usize) -> u32 {
    let rem = n_bits % WORD_BITS;
    if rem == 0 && n_bits > 0 {
        u32::MAX
    } else if rem == 0 {
        0
    } else {
        (1u32 << rem) - 1
    }
}

impl std::fmt::Debug for PackedBits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PackedBits")
            .field("logical_len", &self.logical_len)
            .field("words", &format_args!("{:08x?}", self.words))
            .finish()
    }
}

/// Packs a {0,1} sequence into 32-bit words (LSB-first).
pub fn pack_bits(bits: &[u8]) -> PackedBits {
    PackedBits::from_bits(bits)
}

/// Inverse of [`pack_bits`].
pub fn unpack_bits(packed: &PackedBits) -> Vec<u8> {
    packed.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_small() {
        let p = pack_bits(&[1, 0, 1, 1]);
        assert_eq!(p.words(), &[13]);
        assert_eq!(p.logical_len(), 4);
    }

    #[test]
    fn pack_empty() {
        let p = pack_bits(&[]);
        assert_eq!(p.words(), &[] as &[u32]);
        assert_eq!(p.logical_len(), 0);
        assert_eq!(unpack_bits(&p), Vec::<u8>::new());
    }

    #[test]
    fn pack_96_ones() {
        let p = pack_bits(&[1u8; 96]);
        assert_eq!(p.words(), &[u32::MAX; 3]);
        assert_eq!(p.logical_len(), 96);
    }

    #[test]
    fn unpack_small() {
        let p = PackedBits::from_words(vec![13], 4).unwrap();
        assert_eq!(unpack_bits(&p), vec![1, 0, 1, 1]);
        let z = PackedBits::from_words(vec![0], 1).unwrap();
        assert_eq!(unpack_bits(&z), vec![0]);
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count(96), 3);
        assert_eq!(word_count(1568), 49);
        assert_eq!(word_count(33), 2);
        assert_eq!(word_count(0), 0);
    }

    #[test]
    fn from_words_rejects_dirty_padding() {
        // 33 bits -> 2 words, only bit 0 of word 1 is meaningful.
        let err = PackedBits::from_words(vec![0, 0b10], 33).unwrap_err();
        assert!(matches!(err, TmError::Shape(_)));
        assert!(PackedBits::from_words(vec![0, 0b1], 33).is_ok());
    }

    #[test]
    fn from_words_rejects_wrong_count() {
        let err = PackedBits::from_words(vec![0, 0], 96).unwrap_err();
        assert!(matches!(err, TmError::LengthMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn negate_extend_examples() {
        assert_eq!(negate_extend(&[1, 0]), vec![1, 0, 0, 1]);
        assert_eq!(negate_extend(&[0, 0, 0]), vec![0, 0, 0, 1, 1, 1]);
    }

    proptest! {
        #[test]
        fn pack_roundtrip(bits in proptest::collection::vec(0u8..=1, 0..2000)) {
            let packed = pack_bits(&bits);
            prop_assert_eq!(unpack_bits(&packed), bits);
        }

        #[test]
        fn word_count_bounds(n in 0usize..100_000) {
            let w = word_count(n);
            prop_assert!(w * WORD_BITS >= n);
            prop_assert!(n == 0 || w * WORD_BITS - n < WORD_BITS);
        }

        #[test]
        fn padding_stays_zero(bits in proptest::collection::vec(0u8..=1, 1..500)) {
            let packed = pack_bits(&bits);
            let last = *packed.words().last().unwrap();
            prop_assert_eq!(last & !packed.last_word_mask(), 0);
        }

        #[test]
        fn negate_extend_popcount(features in proptest::collection::vec(0u8..=1, 0..300)) {
            let lits = negate_extend(&features);
            let ones: usize = lits.iter().map(|&b| b as usize).sum();
            prop_assert_eq!(ones, features.len());
        }
    }

    #[test]
    fn roundtrip_1568_bits() {
        // Deterministic pseudo-random pattern at the widest fixture shape.
        let bits: Vec<u8> = (0..1568u32)
            .map(|i| ((i.wrapping_mul(2654435761) >> 16) & 1) as u8)
            .collect();
        let packed = pack_bits(&bits);
        assert_eq!(packed.words().len(), 49);
        assert_eq!(unpack_bits(&packed), bits);
    }
}
