//! The coin-toss matrix `X_m(k)` that drives every walk.
//!
//! Row `m` is a ChaCha8 stream keyed by `(seed, m)`: the seed picks the
//! key and the row picks the stream id, so rows are independent and any
//! prefix is reproducible without replaying other rows. Rows are grown
//! lazily 64 coins at a time.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

/// Default hard cap on coins per row.
pub const DEFAULT_ROW_CAP: usize = 1 << 26;

#[derive(Debug, Clone)]
struct Row {
    rng: ChaCha8Rng,
    coins: Vec<i8>,
}

impl Row {
    fn new(seed: u64, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        Row { rng, coins: Vec::new() }
    }

    fn extend_to(&mut self, n: usize) {
        while self.coins.len() < n {
            let bits = self.rng.next_u64();
            self.coins.extend((0..64).map(|b| if (bits >> b) & 1 == 1 { 1 } else { -1 }));
        }
    }
}

/// Seeded, lazily extended matrix of ±1 coin tosses.
#[derive(Debug, Clone)]
pub struct CoinMatrix {
    seed: u64,
    row_cap: usize,
    rows: Vec<Row>,
}

impl CoinMatrix {
    pub fn new(seed: u64) -> Self {
        Self::with_row_cap(seed, DEFAULT_ROW_CAP)
    }

    pub fn with_row_cap(seed: u64, row_cap: usize) -> Self {
        CoinMatrix { seed, row_cap, rows: Vec::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row_cap(&self) -> usize {
        self.row_cap
    }

    /// First `n` entries of row `m`, generating them if needed.
    pub fn row(&mut self, m: usize, n: usize) -> Result<&[i8]> {
        if n > self.row_cap {
            return Err(Error::RowCapExceeded { row: m, cap: self.row_cap });
        }
        while self.rows.len() <= m {
            let next = self.rows.len();
            self.rows.push(Row::new(self.seed, next));
        }
        let row = &mut self.rows[m];
        row.extend_to(n);
        Ok(&row.coins[..n])
    }

    /// Entry `X_m(k)` for `k ≥ 1`.
    pub fn coin(&mut self, m: usize, k: usize) -> Result<i8> {
        debug_assert!(k >= 1);
        Ok(self.row(m, k)?[k - 1])
    }

    /// Number of entries of row `m` generated so far.
    pub fn generated(&self, m: usize) -> usize {
        self.rows.get(m).map_or(0, |r| r.coins.len())
    }
}

/// First `n` coins of row `m` for `seed`.
pub fn generate_coins(seed: u64, m: usize, n: usize) -> Result<Vec<i8>> {
    let mut matrix = CoinMatrix::new(seed);
    Ok(matrix.row(m, n)?.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_request() {
        assert!(generate_coins(7, 0, 0).unwrap().is_empty());
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let a = generate_coins(7, 0, 5).unwrap();
        let b = generate_coins(7, 0, 5).unwrap();
        assert_eq!(a, b);
        let long = generate_coins(7, 0, 1000).unwrap();
        assert_eq!(&long[..5], &a[..]);
        let mut lazy = CoinMatrix::new(7);
        lazy.row(0, 3).unwrap();
        lazy.row(0, 700).unwrap();
        assert_eq!(lazy.row(0, 1000).unwrap(), &long[..]);
    }

    #[test]
    fn rows_are_distinct_streams() {
        let r0 = generate_coins(7, 0, 256).unwrap();
        let r1 = generate_coins(7, 1, 256).unwrap();
        let other_seed = generate_coins(8, 0, 256).unwrap();
        assert_ne!(r0, r1);
        assert_ne!(r0, other_seed);
        let agree = r0.iter().zip(&r1).filter(|(a, b)| a == b).count();
        assert!((96..=160).contains(&agree), "rows look correlated: {agree}/256");
    }

    #[test]
    fn law_of_large_numbers() {
        let c = generate_coins(7, 0, 100_000).unwrap();
        assert!(c.iter().all(|&x| x == 1 || x == -1));
        let mean = c.iter().map(|&x| x as f64).sum::<f64>() / c.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn row_cap_is_enforced() {
        let mut m = CoinMatrix::with_row_cap(1, 128);
        assert!(m.row(0, 128).is_ok());
        assert_eq!(m.row(0, 129), Err(Error::RowCapExceeded { row: 0, cap: 128 }));
    }
}
