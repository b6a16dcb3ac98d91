//! The per-switch state store and the primitive operations on it.
//!
//! Each variable is one flat array of cells ordered HashMap slot, then row,
//! then column. All cells start at 0. The operations in this module take a
//! [`CellAccess`] so that the same code runs on the store itself and on a
//! buffered [`Overlay`](super::cells::Overlay).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::cells::{CellAccess, VarCells, VarCellsMut};
use super::{bloom, cardinality, sketch};
use crate::error::{Error, Result};
use crate::frontend::{StateDecl, SwitchProgram};
use crate::model::decl::{BloomAlg, Geometry, SketchAlg, StateKind};
use crate::model::hash::{key_index, row_seed, SLOT_ROW};
use crate::model::schema::width_mask;
use crate::model::{FlowKey, Packet, StateOp};

/// Cells cleared per packet while a window resets, unless overridden.
pub const DEFAULT_RESET_CHUNK: u32 = 64;

/// Static description of one variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarInfo {
    pub id: usize,
    pub name: String,
    pub kind: StateKind,
    /// Layout of one instance.
    pub geom: Geometry,
    pub slots: u32,
    /// Key of the hashed structure, if the instance is one.
    pub hash_key: Option<FlowKey>,
    /// Key selecting the HashMap slot.
    pub slot_key: Option<FlowKey>,
}

/// Cells of the instance selected for one packet: `pos` are offsets from
/// `base`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub base: usize,
    pub pos: Vec<usize>,
}

impl VarInfo {
    pub fn instance_cells(&self) -> usize {
        self.geom.cells()
    }

    pub fn total_cells(&self) -> usize {
        self.instance_cells() * self.slots as usize
    }

    pub fn mask(&self) -> u64 {
        width_mask(self.geom.width)
    }

    pub fn instance(&self) -> &StateKind {
        self.kind.instance()
    }

    /// First cell of the instance this packet maps to. The slot hash is
    /// seeded by the key's name, so HashMaps sharing a key and size pick the
    /// same slot for a flow.
    pub fn base(&self, p: &Packet, seed: u64) -> usize {
        match &self.slot_key {
            Some(k) => {
                let slot = key_index(&k.values(p), self.slots, row_seed(seed, &k.name, SLOT_ROW));
                slot as usize * self.instance_cells()
            }
            None => 0,
        }
    }

    /// The cells an update or aggregate query touches.
    pub fn select(&self, p: &Packet, seed: u64) -> Selection {
        let base = self.base(p, seed);
        let key = || self.hash_key.as_ref().map(|k| k.values(p)).unwrap_or_default();
        let pos = match self.instance() {
            StateKind::Counter { .. } | StateKind::Timestamp => vec![0],
            StateKind::BloomFilter { nhash, size, .. } => bloom::positions(&key(), seed, &self.name, *nhash, *size),
            StateKind::Sketch {
                alg: SketchAlg::CountMin | SketchAlg::Store,
                nhash,
                size,
                ..
            } => sketch::row_cells(&key(), seed, &self.name, *nhash, *size),
            StateKind::Sketch { alg, size, .. } => {
                let h = cardinality::key_hash(&key(), seed, &self.name);
                let j = match alg {
                    SketchAlg::Pcsa => cardinality::pcsa_observation(h, *size as usize).0,
                    _ => cardinality::hll_observation(h, *size as usize).0,
                };
                vec![j]
            }
            StateKind::HashMap { .. } => unreachable!("nested HashMap"),
        };
        Selection { base, pos }
    }

    fn view<'a>(&self, acc: &'a dyn CellAccess, base: usize) -> VarCells<'a> {
        VarCells {
            acc,
            var: self.id,
            base,
            len: self.instance_cells(),
        }
    }

    fn view_mut<'a>(&self, acc: &'a mut dyn CellAccess, base: usize) -> VarCellsMut<'a> {
        VarCellsMut {
            acc,
            var: self.id,
            base,
            len: self.instance_cells(),
        }
    }
}

/// Variables of one switch, indexed by program-wide declaration id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub seed: u64,
    pub vars: Vec<Option<VarInfo>>,
}

impl StateLayout {
    pub fn new(decls: &[StateDecl], keys: &BTreeMap<String, FlowKey>, slot_count: usize, seed: u64) -> Result<Self> {
        let mut vars = vec![None; slot_count.max(decls.iter().map(|d| d.id + 1).max().unwrap_or(0))];
        let lookup = |name: &str| {
            keys.get(name)
                .cloned()
                .ok_or_else(|| Error::UnknownState(format!("key `{name}`")))
        };
        for d in decls {
            let slot_key = match &d.kind {
                StateKind::HashMap { key, .. } => Some(lookup(key)?),
                _ => None,
            };
            let hash_key = match d.kind.hash_key() {
                Some(k) => Some(lookup(k)?),
                None => None,
            };
            vars[d.id] = Some(VarInfo {
                id: d.id,
                name: d.name.clone(),
                kind: d.kind.clone(),
                geom: d.kind.geometry(),
                slots: d.kind.slots(),
                hash_key,
                slot_key,
            });
        }
        Ok(StateLayout { seed, vars })
    }

    pub fn for_switch(prog: &SwitchProgram, seed: u64) -> Result<Self> {
        Self::new(&prog.state, &prog.keys, prog.slot_count, seed)
    }

    pub fn get(&self, id: usize) -> Result<&VarInfo> {
        self.vars
            .get(id)
            .and_then(|v| v.as_ref())
            .ok_or_else(|| Error::UnknownState(format!("#{id}")))
    }

    pub fn by_name(&self, name: &str) -> Option<&VarInfo> {
        self.iter().find(|v| v.name == name)
    }

    /// Variables present on this switch, in id order.
    pub fn iter(&self) -> impl Iterator<Item = &VarInfo> {
        self.vars.iter().flatten()
    }
}

/// One variable in a state dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDump {
    pub name: String,
    pub id: usize,
    pub decl: String,
    pub width: u32,
    pub cursor: usize,
    pub cells: Vec<u64>,
}

/// Cell values of every variable on one switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateStore {
    layout: Arc<StateLayout>,
    cells: Vec<Vec<u64>>,
    cursors: Vec<usize>,
}

impl StateStore {
    pub fn new(layout: Arc<StateLayout>) -> Self {
        let cells = layout
            .vars
            .iter()
            .map(|v| v.as_ref().map_or(Vec::new(), |v| vec![0; v.total_cells()]))
            .collect();
        let cursors = vec![0; layout.vars.len()];
        StateStore { layout, cells, cursors }
    }

    pub fn for_switch(prog: &SwitchProgram, seed: u64) -> Result<Self> {
        Ok(Self::new(Arc::new(StateLayout::for_switch(prog, seed)?)))
    }

    pub fn layout(&self) -> &Arc<StateLayout> {
        &self.layout
    }

    pub fn cells(&self, id: usize) -> &[u64] {
        &self.cells[id]
    }

    pub fn cursor(&self, id: usize) -> usize {
        self.cursors[id]
    }

    /// Clears the next `chunk` cells of variable `id`. Returns true once the
    /// whole variable has been cleared, and rewinds the cursor.
    pub fn reset_chunk(&mut self, id: usize, chunk: u32) -> Result<bool> {
        let total = self.layout.get(id)?.total_cells();
        let start = self.cursors[id];
        let end = (start + chunk.max(1) as usize).min(total);
        self.cells[id][start..end].fill(0);
        if end >= total {
            self.cursors[id] = 0;
            Ok(true)
        } else {
            self.cursors[id] = end;
            Ok(false)
        }
    }

    pub fn reset_all(&mut self) {
        for (c, cur) in self.cells.iter_mut().zip(&mut self.cursors) {
            c.fill(0);
            *cur = 0;
        }
    }

    /// True when every cell is 0 and no reset is in progress.
    pub fn is_initial(&self) -> bool {
        self.cells.iter().all(|c| c.iter().all(|&v| v == 0)) && self.cursors.iter().all(|&c| c == 0)
    }

    pub fn dump(&self) -> Vec<VarDump> {
        self.layout
            .iter()
            .map(|v| VarDump {
                name: v.name.clone(),
                id: v.id,
                decl: v.kind.to_string(),
                width: v.geom.width,
                cursor: self.cursors[v.id],
                cells: self.cells[v.id].clone(),
            })
            .collect()
    }

    /// Reads a variable by name as an expression would.
    pub fn query(&self, name: &str, op: StateOp, arg: Option<u64>, p: &Packet) -> Result<u64> {
        let info = self
            .layout
            .by_name(name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))?;
        read(self, info, self.layout.seed, op, arg, p)
    }
}

impl CellAccess for StateStore {
    fn cell(&self, var: usize, i: usize) -> u64 {
        self.cells[var][i]
    }

    fn set_cell(&mut self, var: usize, i: usize, v: u64) {
        self.cells[var][i] = v;
    }
}

// ---- operations ----

/// Value of `op` on the variable for packet `p`.
///
/// A bare count-min or counting-Bloom name reads the minimum, a bare
/// membership filter its bit pattern, and a bare PCSA/HyperLogLog name its
/// estimate.
pub fn read(acc: &dyn CellAccess, info: &VarInfo, seed: u64, op: StateOp, arg: Option<u64>, p: &Packet) -> Result<u64> {
    let sel = info.select(p, seed);
    let cells = info.view(acc, sel.base);
    Ok(match info.instance() {
        StateKind::Counter { .. } | StateKind::Timestamp => acc.cell(info.id, sel.base),
        StateKind::BloomFilter {
            alg: BloomAlg::Membership,
            size,
            ..
        } => match op {
            StateOp::Test => bloom::test(&cells, &sel.pos) as u64,
            _ => {
                if *size > 64 {
                    return Err(Error::FilterTooWide {
                        name: info.name.clone(),
                        size: *size,
                    });
                }
                bloom::to_bits(&cells)
            }
        },
        StateKind::Sketch {
            alg: SketchAlg::Pcsa, ..
        } => cardinality::pcsa_estimate(&cells),
        StateKind::Sketch {
            alg: SketchAlg::Hyperloglog,
            ..
        } => cardinality::hll_estimate(&cells),
        _ => sketch::aggregate(&cells, &sel.pos, op, arg),
    })
}

/// Writes `values[i]` (masked to the cell width) to the `i`-th selected cell.
pub fn write_selected(acc: &mut dyn CellAccess, info: &VarInfo, sel: &Selection, values: &[u64]) {
    let mask = info.mask();
    for (&pos, &v) in sel.pos.iter().zip(values) {
        acc.set_cell(info.id, sel.base + pos, v & mask);
    }
}

pub fn current_values(acc: &dyn CellAccess, info: &VarInfo, sel: &Selection) -> Vec<u64> {
    sel.pos.iter().map(|&i| acc.cell(info.id, sel.base + i)).collect()
}

/// Membership insert, or a PCSA/HyperLogLog update.
pub fn insert(acc: &mut dyn CellAccess, info: &VarInfo, seed: u64, p: &Packet) {
    let sel = info.select(p, seed);
    let key = info.hash_key.as_ref().map(|k| k.values(p)).unwrap_or_default();
    let mut cells = info.view_mut(acc, sel.base);
    match info.instance() {
        StateKind::Sketch {
            alg: SketchAlg::Pcsa, ..
        } => cardinality::pcsa_update(&mut cells, cardinality::key_hash(&key, seed, &info.name)),
        StateKind::Sketch {
            alg: SketchAlg::Hyperloglog,
            ..
        } => cardinality::hll_update(&mut cells, cardinality::key_hash(&key, seed, &info.name)),
        _ => bloom::insert(&mut cells, &sel.pos),
    }
}

/// `init(v)`: a membership filter loads its bits from `v`; a counting
/// filter sets every cell of the instance to `v`.
pub fn init(acc: &mut dyn CellAccess, info: &VarInfo, seed: u64, p: &Packet, v: u64) -> Result<()> {
    let base = info.base(p, seed);
    let mask = info.mask();
    let mut cells = info.view_mut(acc, base);
    match info.instance() {
        StateKind::BloomFilter {
            alg: BloomAlg::Membership,
            size,
            ..
        } => {
            if *size > 64 {
                return Err(Error::FilterTooWide {
                    name: info.name.clone(),
                    size: *size,
                });
            }
            bloom::load_bits(&mut cells, v);
        }
        _ => {
            for i in 0..info.instance_cells() {
                super::cells::Cells::set(&mut cells, i, v & mask);
            }
        }
    }
    Ok(())
}

/// `reset()`: the selected slot of a HashMap, otherwise the whole variable.
pub fn reset(acc: &mut dyn CellAccess, info: &VarInfo, seed: u64, p: &Packet) {
    let (base, len) = if info.slot_key.is_some() {
        (info.base(p, seed), info.instance_cells())
    } else {
        (0, info.total_cells())
    };
    for i in base..base + len {
        acc.set_cell(info.id, i, 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn store(src: &str) -> StateStore {
        let prog = parse(src).unwrap().for_role(None).unwrap();
        StateStore::for_switch(&prog, 0).unwrap()
    }

    #[test]
    fn reset_chunk_counts() {
        let mut s =
            store("k = Key(ipv4.src)\nc = Counter(width=32)\nnb = Sketch(alg=\"count-min\",key=k,nhash=4,size=256)");
        assert!(s.reset_chunk(0, 32).unwrap());
        for call in 1..=32 {
            s.cells[1][(call - 1) * 32] = 7;
            let done = s.reset_chunk(1, 32).unwrap();
            assert_eq!(done, call == 32, "call {call}");
        }
        assert!(s.is_initial());
        assert!(matches!(s.reset_chunk(5, 1), Err(Error::UnknownState(_))));
    }

    #[test]
    fn hashmap_reset_only_touches_the_slot() {
        let mut s = store("k = Key(ipv4.src)\nm = HashMap(key=k,size=16,type=Counter(width=8))");
        let info = s.layout().get(0).unwrap().clone();
        let a = Packet::new("pkts", 0).with_header("ipv4.src", 1);
        let sel = info.select(&a, 0);
        write_selected(&mut s, &info, &sel, &[300]);
        assert_eq!(s.query("m", StateOp::Value, None, &a).unwrap(), 300 & 0xff);
        for i in 0..16 {
            s.cells[0][i] += 1;
        }
        reset(&mut s, &info, 0, &a);
        assert_eq!(s.query("m", StateOp::Value, None, &a).unwrap(), 0);
        assert_eq!(s.cells(0).iter().filter(|&&v| v == 1).count(), 15);
    }

    #[test]
    fn membership_init_then_insert() {
        let mut s = store("k = Key(pkt.input_port)\nbf = BloomFilter(alg=\"membership\",key=k,nhash=2,size=32)");
        let info = s.layout().get(0).unwrap().clone();
        let p = Packet::new("pkts", 0);
        init(&mut s, &info, 0, &p, 0xffff_0000_0000_1234).unwrap();
        insert(&mut s, &info, 0, &p);
        let sel = info.select(&p, 0);
        let expect = sel.pos.iter().fold(0x1234u64, |acc, &i| acc | (1 << i));
        assert_eq!(s.query("bf", StateOp::Read, None, &p).unwrap(), expect);
    }
}
