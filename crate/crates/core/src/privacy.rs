//! Privacy amplification by random binary Toeplitz matrices.
//!
//! An `out x in` Toeplitz matrix is fixed by its `out + in - 1` diagonals,
//! and the family of all of them is two-universal: any two distinct inputs
//! collide with probability exactly `2^-out` over a uniform choice.

use rand::RngCore;
use rayon::prelude::*;

use crate::bitmath::BitString;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzHash {
    /// `diagonals[j + in_len - 1 - k]` is entry `(j, k)`.
    diagonals: BitString,
    out_len: usize,
    in_len: usize,
}

impl ToeplitzHash {
    pub fn random<R: RngCore + ?Sized>(out_len: usize, in_len: usize, rng: &mut R) -> Self {
        let n = (out_len + in_len).saturating_sub(1);
        let words = (0..n.div_ceil(64)).map(|_| rng.next_u64()).collect();
        Self {
            diagonals: BitString::from_words(words, n),
            out_len,
            in_len,
        }
    }

    pub fn from_diagonals(diagonals: BitString, out_len: usize, in_len: usize) -> Result<Self> {
        let expected = (out_len + in_len).saturating_sub(1);
        if diagonals.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: diagonals.len(),
            });
        }
        Ok(Self {
            diagonals,
            out_len,
            in_len,
        })
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn entry(&self, row: usize, col: usize) -> bool {
        self.diagonals.get(row + self.in_len - 1 - col)
    }

    pub fn hash(&self, input: &BitString) -> Result<BitString> {
        if input.len() != self.in_len {
            return Err(Error::LengthMismatch {
                expected: self.in_len,
                actual: input.len(),
            });
        }
        if self.out_len == 0 {
            return Ok(BitString::default());
        }
        // With x reversed, output bit j is <diagonals[j..j+in], x_rev>.
        let reversed = BitString::from_bits((0..self.in_len).rev().map(|k| input.get(k)));
        let x = reversed.words();
        let words: Vec<u64> = (0..self.out_len.div_ceil(64))
            .into_par_iter()
            .map(|ow| {
                let mut out = 0u64;
                for b in 0..64 {
                    let j = ow * 64 + b;
                    if j >= self.out_len {
                        break;
                    }
                    let mut acc = 0u64;
                    for (w, xw) in x.iter().enumerate() {
                        acc ^= self.diagonals.word_at(j + 64 * w) & xw;
                    }
                    out |= u64::from(acc.count_ones() & 1) << b;
                }
                out
            })
            .collect();
        Ok(BitString::from_words(words, self.out_len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive(h: &ToeplitzHash, x: &BitString) -> BitString {
        BitString::from_bits(
            (0..h.out_len())
                .map(|j| (0..h.in_len()).fold(false, |acc, k| acc ^ (h.entry(j, k) & x.get(k)))),
        )
    }

    #[test]
    fn matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (out, inp) in [(1, 1), (5, 9), (64, 64), (70, 130), (129, 200)] {
            let h = ToeplitzHash::random(out, inp, &mut rng);
            for _ in 0..5 {
                let x = BitString::from_words(
                    (0..inp.div_ceil(64)).map(|_| rng.next_u64()).collect(),
                    inp,
                );
                assert_eq!(h.hash(&x).unwrap(), naive(&h, &x));
            }
        }
    }

    #[test]
    fn is_toeplitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = ToeplitzHash::random(12, 20, &mut rng);
        for j in 1..12 {
            for k in 1..20 {
                assert_eq!(h.entry(j, k), h.entry(j - 1, k - 1));
            }
        }
    }

    #[test]
    fn zero_output_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = ToeplitzHash::random(0, 10, &mut rng);
        assert!(h.hash(&BitString::zeros(10)).unwrap().is_empty());
        assert!(h.hash(&BitString::zeros(11)).is_err());
        assert!(ToeplitzHash::from_diagonals(BitString::zeros(3), 2, 3).is_err());
        assert!(ToeplitzHash::from_diagonals(BitString::zeros(4), 2, 3).is_ok());
    }

    #[test]
    fn two_universal_collision_rate() {
        let trials = 100_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut collisions = 0u64;
        for _ in 0..trials {
            let x = rng.next_u32() as u16;
            let mut y = rng.next_u32() as u16;
            if y == x {
                y ^= 1;
            }
            let h = ToeplitzHash::random(8, 16, &mut rng);
            let bx = BitString::from_bits((0..16).map(|i| x >> i & 1 == 1));
            let by = BitString::from_bits((0..16).map(|i| y >> i & 1 == 1));
            if h.hash(&bx).unwrap() == h.hash(&by).unwrap() {
                collisions += 1;
            }
        }
        let p = 1.0 / 256.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let rate = collisions as f64 / trials as f64;
        assert!(rate <= p + 3.0 * sigma, "collision rate {rate}");
    }
}
