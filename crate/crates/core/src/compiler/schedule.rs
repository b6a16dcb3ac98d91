//! Greedy list scheduling of atoms into pipeline stages.
//!
//! Atoms are visited in program order (stream by stream, tables in control
//! order, atoms in table order) and each goes to the first stage that has
//! room and satisfies its dependencies: a read or overwrite of a resource
//! must come at least one stage after the last write of it, and a write may
//! share a stage with earlier reads. Every atom of a table also depends on
//! the table's guard and on the guards of earlier tables in the enclosing
//! sequences.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::atoms::guard_result;
use super::ir::*;
use super::target::TargetModel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMemory {
    pub name: String,
    pub cells: usize,
    pub width: u32,
    pub bits: u64,
    /// Stage of the first stateful atom touching the variable.
    pub stage: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub table: usize,
    pub atom: usize,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub depth: usize,
    pub width: usize,
    pub atoms: usize,
    pub stateful: usize,
    pub stateless: usize,
    pub tables: usize,
    /// Atoms per stage.
    pub stages: Vec<usize>,
    pub memory: Vec<VarMemory>,
    pub placement: Vec<Placement>,
    pub warnings: Vec<String>,
}

impl ResourceReport {
    pub fn memory_bits(&self) -> u64 {
        self.memory.iter().map(|m| m.bits).sum()
    }
}

impl fmt::Display for ResourceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>8}", "Pipeline depth", self.depth)?;
        writeln!(f, "{:<16}{:>8}", "Pipeline width", self.width)?;
        writeln!(f, "{:<16}{:>8}", "Num. atoms", self.atoms)?;
        writeln!(f, "{:<16}{:>8}", "  stateful", self.stateful)?;
        writeln!(f, "{:<16}{:>8}", "  stateless", self.stateless)?;
        writeln!(f, "{:<16}{:>8}", "Tables", self.tables)?;
        for m in &self.memory {
            let stage = m.stage.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
            writeln!(f, "  {:<20} {:>10} bits  stage {stage}", m.name, m.bits)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Deps {
    last_write: BTreeMap<String, usize>,
    last_read: BTreeMap<String, usize>,
}

impl Deps {
    fn write_of(&self, r: &str) -> Option<usize> {
        if r == "field:*" {
            return self
                .last_write
                .range("field:".to_string()..)
                .take_while(|(k, _)| k.starts_with("field:"))
                .map(|(_, s)| *s)
                .max();
        }
        self.last_write.get(r).copied()
    }

    fn read_of(&self, r: &str) -> Option<usize> {
        let direct = self.last_read.get(r).copied();
        if r.starts_with("field:") {
            return direct.max(self.last_read.get("field:*").copied());
        }
        direct
    }

    fn earliest(&self, reads: &[String], writes: &[String]) -> usize {
        let mut s = 0;
        for r in reads {
            if let Some(w) = self.write_of(r) {
                s = s.max(w + 1);
            }
        }
        for w in writes {
            if let Some(x) = self.write_of(w) {
                s = s.max(x + 1);
            }
            if let Some(x) = self.read_of(w) {
                s = s.max(x);
            }
        }
        s
    }

    fn record(&mut self, reads: &[String], writes: &[String], stage: usize) {
        for r in reads {
            let e = self.last_read.entry(r.clone()).or_insert(stage);
            *e = (*e).max(stage);
        }
        for w in writes {
            let e = self.last_write.entry(w.clone()).or_insert(stage);
            *e = (*e).max(stage);
        }
    }
}

struct Scheduler<'a> {
    ir: &'a PipelineIR,
    cap: usize,
    occupancy: Vec<usize>,
    placement: Vec<Placement>,
}

impl Scheduler<'_> {
    fn place(&mut self, at: usize) -> usize {
        let mut s = at;
        loop {
            if s >= self.occupancy.len() {
                self.occupancy.resize(s + 1, 0);
            }
            if self.occupancy[s] < self.cap {
                self.occupancy[s] += 1;
                return s;
            }
            s += 1;
        }
    }

    fn walk(&mut self, c: &Control, deps: &mut Deps, ctl: &mut Vec<String>) {
        match c {
            Control::Halt => {}
            Control::Apply(id) => self.table(*id, deps, ctl),
            Control::Seq(items) => {
                let depth = ctl.len();
                for c in items {
                    self.walk(c, deps, ctl);
                }
                ctl.truncate(depth);
            }
            Control::Par(items) => {
                for c in items {
                    let mut branch = ctl.clone();
                    self.walk(c, deps, &mut branch);
                }
            }
        }
    }

    fn table(&mut self, id: usize, deps: &mut Deps, ctl: &mut Vec<String>) {
        let Some(t) = self.ir.table(id) else { return };
        let gres = guard_result(id);
        for (i, a) in t.atoms.iter().enumerate() {
            let mut reads = a.reads.clone();
            reads.extend(ctl.iter().cloned());
            let is_guard = a.writes.contains(&gres);
            if !is_guard && t.guard.is_some() {
                reads.extend(self.guard_resources(t));
            }
            let stage = self.place(deps.earliest(&reads, &a.writes));
            deps.record(&reads, &a.writes, stage);
            self.placement.push(Placement {
                table: id,
                atom: i,
                stage,
            });
        }
        if t.guard.is_some() {
            ctl.extend(self.guard_resources(t));
        }
    }

    /// What later atoms must wait for before they know whether `t` let the
    /// packet through.
    fn guard_resources(&self, t: &Table) -> Vec<String> {
        let gres = guard_result(t.id);
        if t.atoms.iter().any(|a| a.writes.contains(&gres)) {
            return vec![gres];
        }
        t.guard
            .as_ref()
            .map(|g| g.fields().iter().map(|f| format!("field:{}", f.name())).collect())
            .unwrap_or_default()
    }
}

pub fn schedule(ir: &PipelineIR, target: &TargetModel) -> ResourceReport {
    let mut s = Scheduler {
        ir,
        cap: target.width.max(1),
        occupancy: Vec::new(),
        placement: Vec::new(),
    };
    for sc in &ir.controls {
        let mut deps = Deps::default();
        s.walk(&sc.control, &mut deps, &mut Vec::new());
    }
    let mut first_stage: BTreeMap<String, usize> = BTreeMap::new();
    let mut stateful = 0;
    for p in &s.placement {
        let atom = &ir.table(p.table).unwrap().atoms[p.atom];
        if atom.kind != AtomKind::Stateful {
            continue;
        }
        stateful += 1;
        for r in atom.reads.iter().chain(&atom.writes) {
            if let Some(var) = r.strip_prefix("state:").and_then(|x| x.split('#').next()) {
                let e = first_stage.entry(var.to_string()).or_insert(p.stage);
                *e = (*e).min(p.stage);
            }
        }
    }
    let memory: Vec<VarMemory> = ir
        .registers
        .iter()
        .map(|r| VarMemory {
            name: r.name.clone(),
            cells: r.cells,
            width: r.width,
            bits: r.memory_bits,
            stage: first_stage.get(&r.name).copied(),
        })
        .collect();
    let atoms = s.placement.len();
    let depth = s.occupancy.len();
    let width = s.occupancy.iter().copied().max().unwrap_or(0);
    let mut warnings = Vec::new();
    if depth > target.stages {
        warnings.push(format!(
            "pipeline depth {depth} exceeds the {} stages of target `{}`",
            target.stages, target.name
        ));
    }
    if width > target.width {
        warnings.push(format!(
            "pipeline width {width} exceeds the {} atoms per stage of target `{}`",
            target.width, target.name
        ));
    }
    let mut per_stage = vec![0u64; depth];
    for m in &memory {
        if let Some(st) = m.stage {
            per_stage[st] += m.bits;
        }
    }
    for (i, bits) in per_stage.iter().enumerate() {
        if *bits > target.stage_memory_bits {
            warnings.push(format!(
                "stage {i} holds {bits} bits of state, more than the {} of target `{}`",
                target.stage_memory_bits, target.name
            ));
        }
    }
    ResourceReport {
        depth,
        width,
        atoms,
        stateful,
        stateless: atoms - stateful,
        tables: ir.tables.len(),
        stages: s.occupancy,
        memory,
        placement: s.placement,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::lower::lower;
    use crate::frontend::parse;

    fn report(src: &str) -> ResourceReport {
        let ir = lower(&parse(src).unwrap().for_role(None).unwrap()).unwrap();
        schedule(&ir, &TargetModel::default())
    }

    #[test]
    fn state_dependency_forces_two_stages() {
        let r = report("c = Counter(width=32)\npkts >> c.set(pkt.size) >> tag(ipv4.id, c)");
        assert!(r.depth >= 2);
    }

    #[test]
    fn independent_branches_share_a_stage() {
        let r = report("a = Counter(width=32)\nb = Counter(width=32)\npkts >> (a.add(1) + b.add(1))");
        assert_eq!(r.depth, 1);
        assert_eq!(r.width, 2);
    }

    #[test]
    fn guard_orders_its_actions() {
        let r = report("c = Counter(width=32)\npkts >> match(pkt.size > 3) >> c.add(1)");
        assert_eq!(r.depth, 2);
        assert_eq!(r.memory[0].stage, Some(1));
    }

    #[test]
    fn tiny_target_warns() {
        let ir = lower(
            &parse("c = Counter(width=32)\npkts >> c.set(pkt.size) >> tag(ipv4.id, c + 1)")
                .unwrap()
                .for_role(None)
                .unwrap(),
        )
        .unwrap();
        let t = TargetModel {
            stages: 1,
            width: 1,
            ..TargetModel::default()
        };
        let r = schedule(&ir, &t);
        assert!(r.warnings.iter().any(|w| w.contains("depth")));
        assert!(r.width <= 1);
    }

    #[test]
    fn memory_matches_declarations() {
        let r = report("k = Key(ipv4.src)\nm = HashMap(key=k,size=1024,type=Counter(width=32))\npkts >> m.add(1)");
        assert_eq!(r.memory[0].bits, 1024 * 32);
    }
}
