use std::collections::BTreeMap;

/// Read access to a flat array of cells.
pub trait CellsRead {
    fn len(&self) -> usize;
    fn get(&self, i: usize) -> u64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Read-write access to a flat array of cells. Values are stored as given;
/// callers mask to the cell width.
pub trait Cells: CellsRead {
    fn set(&mut self, i: usize, v: u64);
}

impl CellsRead for Vec<u64> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn get(&self, i: usize) -> u64 {
        self[i]
    }
}

impl Cells for Vec<u64> {
    fn set(&mut self, i: usize, v: u64) {
        self[i] = v;
    }
}

impl CellsRead for [u64] {
    fn len(&self) -> usize {
        <[u64]>::len(self)
    }
    fn get(&self, i: usize) -> u64 {
        self[i]
    }
}

impl Cells for [u64] {
    fn set(&mut self, i: usize, v: u64) {
        self[i] = v;
    }
}

/// Cell access across every variable of a switch, addressed by
/// `(variable id, flat cell index)`.
pub trait CellAccess {
    fn cell(&self, var: usize, i: usize) -> u64;
    fn set_cell(&mut self, var: usize, i: usize, v: u64);
}

/// Buffered writes on top of a read-only parent. Reads see the parent plus
/// the overlay's own writes; [`Overlay::into_writes`] hands the writes back
/// for committing.
pub struct Overlay<'a> {
    parent: &'a dyn CellAccess,
    writes: BTreeMap<(usize, usize), u64>,
}

impl<'a> Overlay<'a> {
    pub fn new(parent: &'a dyn CellAccess) -> Self {
        Overlay {
            parent,
            writes: BTreeMap::new(),
        }
    }

    pub fn into_writes(self) -> BTreeMap<(usize, usize), u64> {
        self.writes
    }
}

impl CellAccess for Overlay<'_> {
    fn cell(&self, var: usize, i: usize) -> u64 {
        match self.writes.get(&(var, i)) {
            Some(v) => *v,
            None => self.parent.cell(var, i),
        }
    }

    fn set_cell(&mut self, var: usize, i: usize, v: u64) {
        self.writes.insert((var, i), v);
    }
}

/// One variable's cells starting at `base`, seen through a [`CellAccess`].
pub struct VarCells<'a> {
    pub acc: &'a dyn CellAccess,
    pub var: usize,
    pub base: usize,
    pub len: usize,
}

impl CellsRead for VarCells<'_> {
    fn len(&self) -> usize {
        self.len
    }
    fn get(&self, i: usize) -> u64 {
        self.acc.cell(self.var, self.base + i)
    }
}

pub struct VarCellsMut<'a> {
    pub acc: &'a mut dyn CellAccess,
    pub var: usize,
    pub base: usize,
    pub len: usize,
}

impl CellsRead for VarCellsMut<'_> {
    fn len(&self) -> usize {
        self.len
    }
    fn get(&self, i: usize) -> u64 {
        self.acc.cell(self.var, self.base + i)
    }
}

impl Cells for VarCellsMut<'_> {
    fn set(&mut self, i: usize, v: u64) {
        self.acc.set_cell(self.var, self.base + i, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Flat(Vec<Vec<u64>>);
    impl CellAccess for Flat {
        fn cell(&self, var: usize, i: usize) -> u64 {
            self.0[var][i]
        }
        fn set_cell(&mut self, var: usize, i: usize, v: u64) {
            self.0[var][i] = v;
        }
    }

    #[test]
    fn overlay_reads_through_and_buffers_writes() {
        let base = Flat(vec![vec![1, 2, 3]]);
        let mut o = Overlay::new(&base);
        o.set_cell(0, 1, 20);
        assert_eq!(o.cell(0, 0), 1);
        assert_eq!(o.cell(0, 1), 20);
        let w = o.into_writes();
        assert_eq!(w.into_iter().collect::<Vec<_>>(), vec![((0, 1), 20)]);
        assert_eq!(base.cell(0, 1), 2);
    }
}
