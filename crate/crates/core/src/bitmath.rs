//! Bitstring primitives: binary entropy, relative Hamming weight,
//! substring restriction and XOR folding.
//!
//! Positions are 0-based throughout the library. Anything written for a
//! human (CSV, CLI output) adds one to match the usual q_1..q_N notation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};

const WORD: usize = 64;

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_unit("x", x)?;
    Ok(entropy_unchecked(x))
}

/// `binary_entropy` for callers that already clamped `x` into `[0, 1]`.
pub(crate) fn entropy_unchecked(x: f64) -> f64 {
    fn term(p: f64) -> f64 {
        if p <= 0.0 {
            0.0
        } else {
            p * (1.0 / p).log2()
        }
    }
    term(x) + term(1.0 - x)
}

/// Fixed-length string of bits, packed 64 to a word.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "HexBits", try_from = "HexBits")]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let iter = bits.into_iter();
        let mut out = Self::with_capacity(iter.size_hint().0);
        for b in iter {
            out.push(b);
        }
        out
    }

    /// Parses a string of `'0'`/`'1'` characters; whitespace and `_` are ignored.
    pub fn parse(s: &str) -> Option<Self> {
        let mut out = Self::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                c if c.is_whitespace() || c == '_' => {}
                _ => return None,
            }
        }
        Some(out)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        if value {
            self.words[self.len / WORD] |= 1u64 << (self.len % WORD);
        }
        self.len += 1;
    }

    /// Drops bits beyond `len` (the right-most ones).
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(len.div_ceil(WORD));
        self.clear_tail();
    }

    pub fn truncated(&self, len: usize) -> Self {
        let mut out = self.clone();
        out.truncate(len);
        out
    }

    /// Hamming weight.
    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn xor_assign(&mut self, other: &BitString) -> Result<()> {
        if other.len != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    /// The substring indexed by `t`, in index order.
    pub fn restrict(&self, t: &IndexSubset) -> Result<BitString> {
        if t.parent_len != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: t.parent_len,
            });
        }
        Ok(BitString::from_bits(t.indices.iter().map(|&i| self.get(i))))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// 64 bits starting at bit `offset`; positions past the end read as zero.
    #[inline]
    pub(crate) fn word_at(&self, offset: usize) -> u64 {
        let (q, r) = (offset / WORD, offset % WORD);
        let lo = self.words.get(q).copied().unwrap_or(0);
        if r == 0 {
            lo
        } else {
            let hi = self.words.get(q + 1).copied().unwrap_or(0);
            (lo >> r) | (hi << (WORD - r))
        }
    }

    pub(crate) fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(len.div_ceil(WORD), 0);
        let mut out = Self { words, len };
        out.clear_tail();
        out
    }

    fn clear_tail(&mut self) {
        let r = self.len % WORD;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    /// Lowercase hex, first bit in the most significant bit of the first byte.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.len.div_ceil(4));
        for chunk in 0..self.len.div_ceil(8) {
            let mut byte = 0u8;
            for j in 0..8 {
                let i = chunk * 8 + j;
                if i < self.len && self.get(i) {
                    byte |= 0x80 >> j;
                }
            }
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn from_hex(hex: &str, len: usize) -> Option<Self> {
        if hex.len() != 2 * len.div_ceil(8) {
            return None;
        }
        let mut out = Self::zeros(len);
        for (k, pair) in hex.as_bytes().chunks(2).enumerate() {
            let byte = u8::from_str_radix(std::str::from_utf8(pair).ok()?, 16).ok()?;
            for j in 0..8 {
                let i = k * 8 + j;
                if byte & (0x80 >> j) != 0 {
                    if i >= len {
                        return None;
                    }
                    out.set(i, true);
                }
            }
        }
        Some(out)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString(\"{self}\")")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct HexBits {
    len: usize,
    hex: String,
}

impl From<BitString> for HexBits {
    fn from(b: BitString) -> Self {
        HexBits {
            len: b.len,
            hex: b.to_hex(),
        }
    }
}

impl TryFrom<HexBits> for BitString {
    type Error = String;

    fn try_from(h: HexBits) -> std::result::Result<Self, String> {
        BitString::from_hex(&h.hex, h.len).ok_or_else(|| format!("bad hex for {} bits", h.len))
    }
}

/// Strictly increasing set of 0-based positions into a string of `parent_len` bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSubset {
    indices: Vec<usize>,
    parent_len: usize,
}

impl IndexSubset {
    pub fn new(indices: Vec<usize>, parent_len: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= parent_len) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: parent_len,
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedSubset);
        }
        Ok(Self {
            indices,
            parent_len,
        })
    }

    /// Builds a subset from 1-based positions.
    pub fn from_one_based(positions: &[usize], parent_len: usize) -> Result<Self> {
        let indices = positions
            .iter()
            .map(|&p| {
                p.checked_sub(1).ok_or(Error::IndexOutOfRange {
                    index: 0,
                    len: parent_len,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices, parent_len)
    }

    pub fn full(parent_len: usize) -> Self {
        Self {
            indices: (0..parent_len).collect(),
            parent_len,
        }
    }

    /// Sorts and validates an unordered index list.
    pub fn from_unsorted(mut indices: Vec<usize>, parent_len: usize) -> Result<Self> {
        indices.sort_unstable();
        Self::new(indices, parent_len)
    }

    pub fn complement(&self) -> IndexSubset {
        let mut out = Vec::with_capacity(self.parent_len - self.indices.len());
        let mut it = self.indices.iter().peekable();
        for i in 0..self.parent_len {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        IndexSubset {
            indices: out,
            parent_len: self.parent_len,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn parent_len(&self) -> usize {
        self.parent_len
    }
}

/// Fraction of ones in `q`.
pub fn relative_weight(q: &BitString) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Empty);
    }
    Ok(q.count_ones() as f64 / q.len() as f64)
}

/// XOR of every segment, restricted to `t`.
pub fn xor_fold(segments: &[BitString], t: &IndexSubset) -> Result<BitString> {
    let first = segments.first().ok_or(Error::Empty)?;
    let mut acc = first.clone();
    for s in &segments[1..] {
        acc.xor_assign(s)?;
    }
    acc.restrict(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        // mpmath, 40 digits
        assert!((binary_entropy(0.11).unwrap() - 0.499_915_958_164_528).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_out_of_range() {
        assert!(matches!(binary_entropy(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(binary_entropy(1.5), Err(Error::Domain { .. })));
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn relative_weight_examples() {
        assert_eq!(relative_weight(&bits("0000")).unwrap(), 0.0);
        assert_eq!(relative_weight(&bits("1111")).unwrap(), 1.0);
        assert_eq!(relative_weight(&bits("1010")).unwrap(), 0.5);
        assert_eq!(relative_weight(&BitString::default()), Err(Error::Empty));
    }

    #[test]
    fn xor_fold_examples() {
        let t = IndexSubset::full(4);
        assert_eq!(
            xor_fold(&[bits("1100"), bits("1100")], &t).unwrap(),
            bits("0000")
        );

        let t = IndexSubset::from_one_based(&[1, 2], 4).unwrap();
        let folded = xor_fold(&[bits("1010"), bits("0110"), bits("0011")], &t).unwrap();
        assert_eq!(folded, bits("11"));

        let t = IndexSubset::from_one_based(&[4], 4).unwrap();
        assert_eq!(xor_fold(&[bits("1011")], &t).unwrap(), bits("1"));
    }

    #[test]
    fn xor_fold_length_mismatch() {
        let t = IndexSubset::full(4);
        assert!(matches!(
            xor_fold(&[bits("1010"), bits("101")], &t),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn subset_validation_and_complement() {
        assert!(IndexSubset::new(vec![0, 2, 2], 4).is_err());
        assert!(IndexSubset::new(vec![3, 1], 4).is_err());
        assert!(IndexSubset::new(vec![4], 4).is_err());
        assert!(IndexSubset::from_one_based(&[0], 4).is_err());
        let t = IndexSubset::from_one_based(&[2, 4], 5).unwrap();
        assert_eq!(t.complement().one_based(), vec![1, 3, 5]);
    }

    #[test]
    fn truncate_clears_tail_bits() {
        let mut b = bits(&"1".repeat(70));
        b.truncate(65);
        assert_eq!(b.count_ones(), 65);
        b.truncate(3);
        assert_eq!(b, bits("111"));
        b.push(false);
        assert_eq!(b, bits("1110"));
    }

    #[test]
    fn word_at_reads_across_boundaries() {
        let b = BitString::from_bits((0..130).map(|i| i % 3 == 0));
        for off in [0, 1, 63, 64, 65, 100] {
            let w = b.word_at(off);
            for j in 0..64 {
                let expect = off + j < 130 && (off + j) % 3 == 0;
                assert_eq!((w >> j) & 1 == 1, expect, "off={off} j={j}");
            }
        }
    }

    #[test]
    fn hex_round_trip_and_serde() {
        let b = bits("1000000111");
        assert_eq!(b.to_hex(), "81c0");
        assert_eq!(BitString::from_hex("81c0", 10).unwrap(), b);
        assert!(BitString::from_hex("81e0", 10).is_none());
        let json = serde_json::to_string(&b).unwrap();
        assert_eq!(json, r#"{"len":10,"hex":"81c0"}"#);
        assert_eq!(serde_json::from_str::<BitString>(&json).unwrap(), b);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn bitstring(len: usize) -> impl Strategy<Value = BitString> {
        proptest::collection::vec(any::<bool>(), len).prop_map(BitString::from_bits)
    }

    #[test]
    fn entropy_symmetric_on_grid() {
        for k in 0..=200 {
            let x = k as f64 / 200.0;
            let a = binary_entropy(x).unwrap();
            let b = binary_entropy(1.0 - x).unwrap();
            assert!((a - b).abs() < 1e-12, "x={x}");
        }
    }

    proptest! {
        #[test]
        fn entropy_midpoint_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
            let mid = binary_entropy((x + y) / 2.0).unwrap();
            let avg = (binary_entropy(x).unwrap() + binary_entropy(y).unwrap()) / 2.0;
            prop_assert!(mid >= avg - 1e-12);
        }

        #[test]
        fn fold_is_order_independent(
            (segs, perm_seed, mask) in (1usize..150, 1usize..6).prop_flat_map(|(len, k)| (
                proptest::collection::vec(bitstring(len), k),
                any::<u64>(),
                proptest::collection::vec(any::<bool>(), len),
            ))
        ) {
            let len = segs[0].len();
            let t = IndexSubset::new((0..len).filter(|&i| mask[i]).collect(), len).unwrap();
            let mut shuffled = segs.clone();
            let n = shuffled.len();
            shuffled.rotate_left((perm_seed as usize) % n);
            shuffled.reverse();
            prop_assert_eq!(xor_fold(&segs, &t).unwrap(), xor_fold(&shuffled, &t).unwrap());

            // associativity: fold of a partial fold
            if n >= 2 {
                let head = xor_fold(&segs[..2], &IndexSubset::full(len)).unwrap();
                let mut regrouped = vec![head];
                regrouped.extend_from_slice(&segs[2..]);
                prop_assert_eq!(xor_fold(&regrouped, &t).unwrap(), xor_fold(&segs, &t).unwrap());
            }
        }

        #[test]
        fn self_fold_has_zero_weight(
            (q, mask) in (1usize..200).prop_flat_map(|len| (
                bitstring(len),
                proptest::collection::vec(any::<bool>(), len),
            ))
        ) {
            let len = q.len();
            let mut idx: Vec<usize> = (0..len).filter(|&i| mask[i]).collect();
            if idx.is_empty() { idx.push(0); }
            let t = IndexSubset::new(idx, len).unwrap();
            let folded = xor_fold(&[q.clone(), q], &t).unwrap();
            prop_assert_eq!(relative_weight(&folded).unwrap(), 0.0);
        }
    }
}
