//! Membership Bloom filters: `m` one-bit cells, `H` hashed positions per key.

use super::cells::{Cells, CellsRead};
use crate::model::hash::{key_index, row_seed};

/// The `nhash` cell positions of a key, one per hash row.
pub fn positions(values: &[u64], seed: u64, name: &str, nhash: u32, size: u32) -> Vec<usize> {
    (0..nhash)
        .map(|r| key_index(values, size, row_seed(seed, name, r)) as usize)
        .collect()
}

pub fn insert<C: Cells + ?Sized>(cells: &mut C, pos: &[usize]) {
    for &i in pos {
        cells.set(i, 1);
    }
}

pub fn test<C: CellsRead + ?Sized>(cells: &C, pos: &[usize]) -> bool {
    pos.iter().all(|&i| cells.get(i) != 0)
}

/// Bit `i` of the result is cell `i`. Only the first 64 cells are visible.
pub fn to_bits<C: CellsRead + ?Sized>(cells: &C) -> u64 {
    (0..cells.len().min(64)).fold(0, |acc, i| acc | ((cells.get(i) & 1) << i))
}

/// Loads cell `i` from bit `i` of `raw`.
pub fn load_bits<C: Cells + ?Sized>(cells: &mut C, raw: u64) {
    for i in 0..cells.len() {
        let bit = if i < 64 { (raw >> i) & 1 } else { 0 };
        cells.set(i, bit);
    }
}

/// Standalone membership filter over a `Vec<u64>`, using the same hash family
/// as a declared `BloomFilter(alg="membership")`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BloomFilter {
    name: String,
    nhash: u32,
    seed: u64,
    cells: Vec<u64>,
}

impl BloomFilter {
    pub fn new(name: &str, nhash: u32, size: u32, seed: u64) -> Self {
        assert!(nhash >= 1 && size >= 1);
        BloomFilter {
            name: name.to_string(),
            nhash,
            seed,
            cells: vec![0; size as usize],
        }
    }

    pub fn positions(&self, key: &[u64]) -> Vec<usize> {
        positions(key, self.seed, &self.name, self.nhash, self.cells.len() as u32)
    }

    pub fn insert(&mut self, key: &[u64]) {
        let pos = self.positions(key);
        insert(&mut self.cells, &pos);
    }

    pub fn contains(&self, key: &[u64]) -> bool {
        test(&self.cells, &self.positions(key))
    }

    pub fn bits(&self) -> u64 {
        to_bits(&self.cells)
    }

    pub fn init(&mut self, raw: u64) {
        load_bits(&mut self.cells, raw);
    }

    pub fn reset(&mut self) {
        self.cells.fill(0);
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_false_negatives_and_empty_tests_false() {
        let mut b = BloomFilter::new("hh", 4, 64, 7);
        assert!(!b.contains(&[1, 2, 3]));
        for k in 0..20u64 {
            b.insert(&[k]);
        }
        for k in 0..20u64 {
            assert!(b.contains(&[k]));
        }
    }

    #[test]
    fn init_round_trips_and_zero_resets() {
        let mut b = BloomFilter::new("bf", 2, 32, 0);
        b.init(0x1_dead_beef);
        assert_eq!(b.bits(), 0xdead_beef);
        b.init(0);
        assert_eq!(b, BloomFilter::new("bf", 2, 32, 0));
    }
}
