//! Count-min and store sketches (`H` rows of `m` cells) and the aggregate
//! queries shared with counting Bloom filters.

use super::cells::{Cells, CellsRead};
use crate::model::hash::{key_index, row_seed};
use crate::model::schema::width_mask;
use crate::model::StateOp;

/// Flat cell index of the selected cell in each row: `row * size + column`.
pub fn row_cells(values: &[u64], seed: u64, name: &str, nhash: u32, size: u32) -> Vec<usize> {
    (0..nhash)
        .map(|r| r as usize * size as usize + key_index(values, size, row_seed(seed, name, r)) as usize)
        .collect()
}

/// Aggregate over the selected cells. `avg` truncates; `sum` wraps.
/// `any(v)`/`all(v)` compare each cell with `v` and return 0 or 1.
pub fn aggregate<C: CellsRead + ?Sized>(cells: &C, pos: &[usize], op: StateOp, arg: Option<u64>) -> u64 {
    let vals = pos.iter().map(|&i| cells.get(i));
    let sum = || vals.clone().fold(0u64, |a, v| a.wrapping_add(v));
    match op {
        StateOp::Min | StateOp::Value => vals.clone().min().unwrap_or(0),
        StateOp::Max => vals.clone().max().unwrap_or(0),
        StateOp::Sum => sum(),
        StateOp::Avg => {
            if pos.is_empty() {
                0
            } else {
                sum() / pos.len() as u64
            }
        }
        StateOp::Any => vals.clone().any(|v| Some(v) == arg) as u64,
        StateOp::All => (!pos.is_empty() && vals.clone().all(|v| Some(v) == arg)) as u64,
        StateOp::Test | StateOp::Read => vals.clone().min().unwrap_or(0),
    }
}

/// Adds `delta` to every selected cell, wrapping at `width` bits.
pub fn add<C: Cells + ?Sized>(cells: &mut C, pos: &[usize], delta: u64, width: u32) {
    let mask = width_mask(width);
    for &i in pos {
        cells.set(i, cells.get(i).wrapping_add(delta) & mask);
    }
}

/// Standalone count-min sketch over a `Vec<u64>`, hashing like a declared
/// `Sketch(alg="count-min")` of the same name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMin {
    name: String,
    nhash: u32,
    size: u32,
    width: u32,
    seed: u64,
    cells: Vec<u64>,
}

impl CountMin {
    pub fn new(name: &str, nhash: u32, size: u32, width: u32, seed: u64) -> Self {
        assert!(nhash >= 1 && size >= 1 && (1..=64).contains(&width));
        CountMin {
            name: name.to_string(),
            nhash,
            size,
            width,
            seed,
            cells: vec![0; nhash as usize * size as usize],
        }
    }

    fn select(&self, key: &[u64]) -> Vec<usize> {
        row_cells(key, self.seed, &self.name, self.nhash, self.size)
    }

    pub fn add(&mut self, key: &[u64], delta: u64) {
        let pos = self.select(key);
        add(&mut self.cells, &pos, delta, self.width);
    }

    pub fn query(&self, key: &[u64], op: StateOp) -> u64 {
        aggregate(&self.cells, &self.select(key), op, None)
    }

    pub fn estimate(&self, key: &[u64]) -> u64 {
        self.query(key, StateOp::Min)
    }

    pub fn cells(&self) -> &[u64] {
        &self.cells
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_single_update() {
        let mut cm = CountMin::new("nbytes", 4, 256, 32, 0);
        for op in [StateOp::Min, StateOp::Max, StateOp::Sum, StateOp::Avg] {
            assert_eq!(cm.query(&[9], op), 0);
        }
        cm.add(&[9], 1500);
        assert_eq!(cm.query(&[9], StateOp::Min), 1500);
        assert_eq!(cm.query(&[9], StateOp::Max), 1500);
        assert_eq!(cm.query(&[9], StateOp::Avg), 1500);
        assert_eq!(cm.query(&[9], StateOp::Sum), 4 * 1500);
    }

    #[test]
    fn cells_wrap_at_width() {
        let mut cm = CountMin::new("c", 1, 1, 8, 0);
        cm.add(&[0], 255);
        cm.add(&[0], 1);
        assert_eq!(cm.estimate(&[0]), 0);
    }

    #[test]
    fn any_all_compare_values() {
        let cells = vec![5u64, 5, 7];
        assert_eq!(aggregate(&cells, &[0, 1], StateOp::All, Some(5)), 1);
        assert_eq!(aggregate(&cells, &[0, 2], StateOp::All, Some(5)), 0);
        assert_eq!(aggregate(&cells, &[0, 2], StateOp::Any, Some(7)), 1);
        assert_eq!(aggregate(&cells, &[0, 1], StateOp::Any, Some(0)), 0);
    }
}
