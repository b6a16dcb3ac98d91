//! PCSA and HyperLogLog distinct counters.
//!
//! Both hash the key once (row 0 of the structure's hash family). The low
//! `log2(m)` bits pick a bitmap or register; the remaining bits supply the
//! geometric observation.
//!
//! PCSA sets bit `min(trailing_zeros(rest), 31)` of its bitmap. The estimate
//! is `m * 2^A / 0.77351`, where `A` is the mean index of the lowest unset
//! bit. When that raw estimate is at most `2.5 m` and some bitmaps are still
//! empty, linear counting `m * ln(m / empty)` is used instead, so an empty
//! sketch estimates 0.
//!
//! HyperLogLog keeps 6-bit registers holding `1 + leading_zeros(rest)`
//! (capped at 63) and estimates `alpha_m * m^2 / sum(2^-M_j)`, with the same
//! linear-counting correction for small estimates.

use super::cells::{Cells, CellsRead};
use crate::model::decl::{HLL_REGISTER_WIDTH, PCSA_BITMAP_WIDTH};
use crate::model::hash::{hash_values, row_seed};

const PCSA_PHI: f64 = 0.77351;

pub fn key_hash(values: &[u64], seed: u64, name: &str) -> u64 {
    hash_values(values, row_seed(seed, name, 0))
}

fn split(hash: u64, m: usize) -> (usize, u64, u32) {
    debug_assert!(m.is_power_of_two());
    let b = m.trailing_zeros();
    ((hash & (m as u64 - 1)) as usize, hash >> b, b)
}

/// Bitmap index and bit to set for a PCSA update.
pub fn pcsa_observation(hash: u64, m: usize) -> (usize, u32) {
    let (j, rest, _) = split(hash, m);
    (j, rest.trailing_zeros().min(PCSA_BITMAP_WIDTH - 1))
}

pub fn pcsa_update<C: Cells + ?Sized>(cells: &mut C, hash: u64) {
    let (j, bit) = pcsa_observation(hash, cells.len());
    cells.set(j, cells.get(j) | (1 << bit));
}

pub fn pcsa_estimate<C: CellsRead + ?Sized>(cells: &C) -> u64 {
    let m = cells.len();
    let mut total = 0u64;
    let mut empty = 0usize;
    for j in 0..m {
        let bm = cells.get(j);
        if bm == 0 {
            empty += 1;
        }
        total += (!bm).trailing_zeros().min(PCSA_BITMAP_WIDTH) as u64;
    }
    if empty == m {
        return 0;
    }
    let mf = m as f64;
    let raw = mf * 2f64.powf(total as f64 / mf) / PCSA_PHI;
    let est = if raw <= 2.5 * mf && empty > 0 {
        mf * (mf / empty as f64).ln()
    } else {
        raw
    };
    est.round() as u64
}

/// Register index and rank for a HyperLogLog update.
pub fn hll_observation(hash: u64, m: usize) -> (usize, u64) {
    let (j, rest, b) = split(hash, m);
    let max_rank = (1u64 << HLL_REGISTER_WIDTH) - 1;
    let rank = (rest.leading_zeros() - b) as u64 + 1;
    (j, rank.min(max_rank))
}

pub fn hll_update<C: Cells + ?Sized>(cells: &mut C, hash: u64) {
    let (j, rank) = hll_observation(hash, cells.len());
    if rank > cells.get(j) {
        cells.set(j, rank);
    }
}

pub fn hll_alpha(m: usize) -> f64 {
    match m {
        16 => 0.673,
        32 => 0.697,
        64 => 0.709,
        _ => 0.7213 / (1.0 + 1.079 / m as f64),
    }
}

pub fn hll_estimate<C: CellsRead + ?Sized>(cells: &C) -> u64 {
    let m = cells.len();
    let mf = m as f64;
    let mut sum = 0.0;
    let mut zeros = 0usize;
    for j in 0..m {
        let r = cells.get(j);
        if r == 0 {
            zeros += 1;
        }
        sum += 2f64.powi(-(r as i32));
    }
    let e = hll_alpha(m) * mf * mf / sum;
    let est = if e <= 2.5 * mf && zeros > 0 {
        mf * (mf / zeros as f64).ln()
    } else {
        e
    };
    est.round() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Alg {
    Pcsa,
    Hll,
}

/// Standalone PCSA or HyperLogLog sketch over a `Vec<u64>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cardinality {
    alg: Alg,
    name: String,
    seed: u64,
    cells: Vec<u64>,
}

impl Cardinality {
    pub fn pcsa(name: &str, size: u32, seed: u64) -> Self {
        Self::new(Alg::Pcsa, name, size, seed)
    }

    pub fn hyperloglog(name: &str, size: u32, seed: u64) -> Self {
        Self::new(Alg::Hll, name, size, seed)
    }

    fn new(alg: Alg, name: &str, size: u32, seed: u64) -> Self {
        assert!(size.is_power_of_two(), "size must be a power of two");
        Cardinality {
            alg,
            name: name.to_string(),
            seed,
            cells: vec![0; size as usize],
        }
    }

    pub fn insert(&mut self, key: &[u64]) {
        let h = key_hash(key, self.seed, &self.name);
        match self.alg {
            Alg::Pcsa => pcsa_update(&mut self.cells, h),
            Alg::Hll => hll_update(&mut self.cells, h),
        }
    }

    pub fn estimate(&self) -> u64 {
        match self.alg {
            Alg::Pcsa => pcsa_estimate(&self.cells),
            Alg::Hll => hll_estimate(&self.cells),
        }
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sketches_estimate_zero() {
        assert_eq!(Cardinality::pcsa("c", 128, 0).estimate(), 0);
        assert_eq!(Cardinality::hyperloglog("c", 256, 0).estimate(), 0);
    }

    #[test]
    fn single_key_is_small() {
        for seed in 0..20 {
            let mut p = Cardinality::pcsa("c", 128, seed);
            p.insert(&[42]);
            assert!((1..=8).contains(&p.estimate()), "{}", p.estimate());
            let mut h = Cardinality::hyperloglog("c", 256, seed);
            h.insert(&[42]);
            assert_eq!(h.estimate(), 1);
        }
    }

    #[test]
    fn hll_insert_is_idempotent() {
        let mut h = Cardinality::hyperloglog("c", 64, 3);
        h.insert(&[1, 2]);
        let once = h.clone();
        h.insert(&[1, 2]);
        assert_eq!(h, once);
    }

    #[test]
    fn rank_fits_six_bits() {
        assert_eq!(hll_observation(0, 16), (0, 61));
        assert_eq!(hll_observation(0, 1), (0, 63));
        assert_eq!(hll_observation(u64::MAX, 16), (15, 1));
        assert_eq!(pcsa_observation(0, 128), (0, 31));
    }
}
