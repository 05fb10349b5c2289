//! Axiomatic evaluation of ISA programs under microarchitectural ordering
//! models.
//!
//! An execution is a global order over per-instruction execute events and
//! per-core propagation events `prop(s, c)`. Each core's timeline is the
//! projection of that order onto its own executes and the propagations to
//! it. Constraints C1-C10 become ordering edges; an (rf, mo, forwarding)
//! choice is realisable iff its edge graph is acyclic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::litmus::{CondAtom, CondLhs, Outcome, Value};
use crate::mapping::{compute_dependencies, AccessSet, AmoOp, Cumulativity, IsaInstr, IsaProgram, Operand};
use crate::rel::{topo_order, Relation};

// ===== Models =====

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelId {
    WR,
    RWR,
    RWM,
    RMM,
    NWR,
    NMM,
    A9like,
}

impl ModelId {
    pub const ALL: [ModelId; 7] =
        [ModelId::WR, ModelId::RWR, ModelId::RWM, ModelId::RMM, ModelId::NWR, ModelId::NMM, ModelId::A9like];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::WR => "WR",
            ModelId::RWR => "rWR",
            ModelId::RWM => "rWM",
            ModelId::RMM => "rMM",
            ModelId::NWR => "nWR",
            ModelId::NMM => "nMM",
            ModelId::A9like => "A9like",
        }
    }

    pub fn parse(s: &str) -> Result<ModelId, UarchError> {
        ModelId::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| UarchError::UnknownModel(s.to_string()))
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum McmVersion {
    Curr,
    Ours,
}

impl McmVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            McmVersion::Curr => "curr",
            McmVersion::Ours => "ours",
        }
    }

    pub fn parse(s: &str) -> Result<McmVersion, UarchError> {
        match s {
            "curr" | "riscv-curr" => Ok(McmVersion::Curr),
            "ours" | "riscv-ours" => Ok(McmVersion::Ours),
            _ => Err(UarchError::UnknownMcm(s.to_string())),
        }
    }
}

impl fmt::Display for McmVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atomicity {
    Mca,
    RMca,
    NMca,
}

impl Atomicity {
    pub fn as_str(self) -> &'static str {
        match self {
            Atomicity::Mca => "MCA",
            Atomicity::RMca => "rMCA",
            Atomicity::NMca => "nMCA",
        }
    }
}

/// Flag bundle describing one ordering model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub relax_wr: bool,
    pub relax_ww: bool,
    pub relax_rm: bool,
    pub atomicity: Atomicity,
    pub same_addr_rr_ordered: bool,
    pub fences_cumulative: bool,
    pub amo_rl_cumulative: bool,
    pub amo_sc_decoupled: bool,
    pub lazy_cumulativity: bool,
    pub deps_ordered: bool,
}

impl ModelConfig {
    /// Everything ordered and multi-copy atomic: sequential consistency.
    pub fn strict(name: &str) -> ModelConfig {
        ModelConfig {
            name: name.to_string(),
            relax_wr: false,
            relax_ww: false,
            relax_rm: false,
            atomicity: Atomicity::Mca,
            same_addr_rr_ordered: true,
            fences_cumulative: false,
            amo_rl_cumulative: false,
            amo_sc_decoupled: false,
            lazy_cumulativity: false,
            deps_ordered: false,
        }
    }

    /// Flags only, without the name.
    pub fn flags_equal(&self, other: &ModelConfig) -> bool {
        ModelConfig { name: String::new(), ..self.clone() } == ModelConfig { name: String::new(), ..other.clone() }
    }
}

pub fn model_preset(id: ModelId, mcm: McmVersion) -> ModelConfig {
    use Atomicity::*;
    let (relax_wr, relax_ww, relax_rm, atomicity) = match id {
        ModelId::WR => (true, false, false, Mca),
        ModelId::RWR => (true, false, false, RMca),
        ModelId::RWM => (true, true, false, RMca),
        ModelId::RMM => (true, true, true, RMca),
        ModelId::NWR => (true, false, false, NMca),
        ModelId::NMM | ModelId::A9like => (true, true, true, NMca),
    };
    let ours = mcm == McmVersion::Ours;
    ModelConfig {
        name: format!("{id}/{mcm}"),
        relax_wr,
        relax_ww,
        relax_rm,
        atomicity,
        same_addr_rr_ordered: ours || !relax_rm,
        fences_cumulative: ours,
        amo_rl_cumulative: ours,
        amo_sc_decoupled: ours,
        lazy_cumulativity: ours,
        deps_ordered: ours,
    }
}

/// Reads `name=true|false` lines plus `atomicity=MCA|rMCA|nMCA`; unspecified
/// flags default to the strict model.
pub fn parse_model_config(name: &str, text: &str) -> Result<ModelConfig, UarchError> {
    let mut cfg = ModelConfig::strict(name);
    for (ln, line) in text.lines().enumerate() {
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let bad = |msg: String| UarchError::Config { line: ln + 1, msg };
        let (k, v) = l.split_once('=').ok_or_else(|| bad(format!("expected key=value, found `{l}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "atomicity" {
            cfg.atomicity = match v {
                "MCA" => Atomicity::Mca,
                "rMCA" => Atomicity::RMca,
                "nMCA" => Atomicity::NMca,
                _ => return Err(bad(format!("unknown atomicity `{v}`"))),
            };
            continue;
        }
        let b = match v {
            "true" => true,
            "false" => false,
            _ => return Err(bad(format!("expected true or false for `{k}`"))),
        };
        let slot = match k {
            "relax_WR" | "relax_wr" => &mut cfg.relax_wr,
            "relax_WW" | "relax_ww" => &mut cfg.relax_ww,
            "relax_RM" | "relax_rm" => &mut cfg.relax_rm,
            "same_addr_rr_ordered" => &mut cfg.same_addr_rr_ordered,
            "fences_cumulative" => &mut cfg.fences_cumulative,
            "amo_rl_cumulative" => &mut cfg.amo_rl_cumulative,
            "amo_sc_decoupled" => &mut cfg.amo_sc_decoupled,
            "lazy_cumulativity" => &mut cfg.lazy_cumulativity,
            "deps_ordered" => &mut cfg.deps_ordered,
            _ => return Err(bad(format!("unknown flag `{k}`"))),
        };
        *slot = b;
    }
    Ok(cfg)
}

// ===== Errors and constraint labels =====

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UarchError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("unknown mcm version `{0}`")]
    UnknownMcm(String),
    #[error("model config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("program needs {0} ordering events; at most 64 are supported")]
    TooLarge(usize),
    #[error("execution space of {found} exceeds cap {cap}")]
    ExecutionCap { found: u64, cap: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Constraint {
    C1Visibility,
    C2Atomicity,
    C3Coherence,
    C4PreservedPo,
    C5SameAddress,
    C6Fence,
    C7AmoAtomicity,
    C8AmoOrdering,
    C9ScAmo,
    C10Release,
}

impl Constraint {
    pub fn label(self) -> &'static str {
        match self {
            Constraint::C1Visibility => "C1 visibility",
            Constraint::C2Atomicity => "C2 atomicity",
            Constraint::C3Coherence => "C3 coherence",
            Constraint::C4PreservedPo => "C4 preserved po",
            Constraint::C5SameAddress => "C5 same address",
            Constraint::C6Fence => "C6 fences",
            Constraint::C7AmoAtomicity => "C7 AMO atomicity",
            Constraint::C8AmoOrdering => "C8 AMO aq/rl",
            Constraint::C9ScAmo => "C9 sc AMO",
            Constraint::C10Release => "C10 release observation",
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// ===== Executions =====

/// Instruction address as (thread, position).
pub type InstrRef = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Node {
    /// Execute of an access; for store-atomic AMOs it is also the propagation to every core.
    Exec(InstrRef),
    /// Propagation of a write; `core: None` means to every core at once.
    Prop { write: InstrRef, core: Option<usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IsaExecution {
    /// Source of every read; `None` is the initial value.
    #[serde(with = "pairs")]
    pub rf: BTreeMap<InstrRef, Option<InstrRef>>,
    /// Per location, writes in coherence order after the initial value.
    pub mo: Vec<(String, Vec<InstrRef>)>,
    /// Loads satisfied from their own core's pending store.
    pub forwarded: BTreeSet<InstrRef>,
    /// Global order; each core's timeline is its projection.
    pub timeline: Vec<Node>,
}

/// JSON keys must be strings, so `rf` travels as a list of pairs.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::InstrRef;

    pub fn serialize<S: Serializer>(m: &BTreeMap<InstrRef, Option<InstrRef>>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<InstrRef, Option<InstrRef>>, D::Error> {
        Ok(Vec::<(InstrRef, Option<InstrRef>)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observability {
    pub observable: bool,
    pub witness: Option<IsaExecution>,
}

/// Default bound on raw (rf, mo, forwarding) choices per program.
pub const DEFAULT_EXECUTION_CAP: u64 = 10_000_000;

// ===== Static context =====

struct Ctx<'a> {
    prog: &'a IsaProgram,
    cfg: &'a ModelConfig,
    /// Flattened instructions: (thread, pos, instr).
    ins: Vec<(usize, usize, &'a IsaInstr)>,
    gid: Vec<Vec<usize>>,
    ncores: usize,
    ex_node: Vec<Option<usize>>,
    /// Per write gid, per core, the propagation node.
    prop_node: Vec<Vec<usize>>,
    node_label: Vec<Node>,
    deps: Vec<(usize, usize)>,
    reads: Vec<usize>,
    writes: Vec<usize>,
}

impl<'a> Ctx<'a> {
    fn new(prog: &'a IsaProgram, cfg: &'a ModelConfig) -> Result<Ctx<'a>, UarchError> {
        let mut ins = Vec::new();
        let mut gid = Vec::new();
        for (t, th) in prog.threads.iter().enumerate() {
            let mut row = Vec::new();
            for (p, i) in th.iter().enumerate() {
                row.push(ins.len());
                ins.push((t, p, i));
            }
            gid.push(row);
        }
        let ncores = prog.threads.len();
        let mut node_label = Vec::new();
        let mut ex_node = vec![None; ins.len()];
        for (g, (t, p, i)) in ins.iter().enumerate() {
            if i.is_access() {
                ex_node[g] = Some(node_label.len());
                node_label.push(Node::Exec((*t, *p)));
            }
        }
        let mut prop_node = vec![Vec::new(); ins.len()];
        for (g, (t, p, i)) in ins.iter().enumerate() {
            if !has_write(i) {
                continue;
            }
            if store_atomic(i, cfg) {
                prop_node[g] = vec![ex_node[g].unwrap(); ncores];
            } else if cfg.atomicity == Atomicity::NMca {
                for c in 0..ncores {
                    prop_node[g].push(node_label.len());
                    node_label.push(Node::Prop { write: (*t, *p), core: Some(c) });
                }
            } else {
                let n = node_label.len();
                node_label.push(Node::Prop { write: (*t, *p), core: None });
                prop_node[g] = vec![n; ncores];
            }
        }
        if node_label.len() > 64 {
            return Err(UarchError::TooLarge(node_label.len()));
        }
        let deps = compute_dependencies(prog).iter().map(|d| (gid[d.thread][d.from], gid[d.thread][d.to])).collect();
        let reads = (0..ins.len()).filter(|&g| has_read(ins[g].2)).collect();
        let writes = (0..ins.len()).filter(|&g| has_write(ins[g].2)).collect();
        Ok(Ctx { prog, cfg, ins, gid, ncores, ex_node, prop_node, node_label, deps, reads, writes })
    }

    fn instr(&self, g: usize) -> &IsaInstr {
        self.ins[g].2
    }

    fn core(&self, g: usize) -> usize {
        self.ins[g].0
    }

    fn iref(&self, g: usize) -> InstrRef {
        (self.ins[g].0, self.ins[g].1)
    }

    fn ex(&self, g: usize) -> usize {
        self.ex_node[g].expect("access")
    }

    fn is_amo(&self, g: usize) -> bool {
        matches!(self.instr(g), IsaInstr::Amo { .. })
    }
}

/// An `amoadd` of zero is a load with ordering bits; its write is value-silent
/// and is not modelled.
pub fn has_write(i: &IsaInstr) -> bool {
    match i {
        IsaInstr::Amo { op: AmoOp::Add, src, .. } => {
            !matches!(src, Operand::Reg(0) | Operand::Const { value: Value::Int(0), .. })
        }
        other => other.writes(),
    }
}

/// An `amoswap` into x0 is a store with ordering bits; its read is discarded
/// and is not modelled.
pub fn has_read(i: &IsaInstr) -> bool {
    match i {
        IsaInstr::Amo { op: AmoOp::Swap, dest: 0, .. } => false,
        other => other.reads(),
    }
}

/// Store atomicity of an AMO write (C9).
fn store_atomic(i: &IsaInstr, cfg: &ModelConfig) -> bool {
    match i {
        IsaInstr::Amo { aq, rl, sc, .. } => {
            if cfg.amo_sc_decoupled {
                *sc
            } else {
                *aq && *rl
            }
        }
        _ => false,
    }
}

// ===== Candidates =====

#[derive(Clone)]
struct Cand {
    /// Per gid: for reads, `Some(src)` with `src = None` for init.
    rf: Vec<Option<Option<usize>>>,
    loc: Vec<Option<String>>,
    /// Value read (reads) or written (writes); an AMO stores its written value in `wval`.
    rval: Vec<Option<Value>>,
    wval: Vec<Option<Value>>,
    mo: Vec<(String, Vec<usize>)>,
    fwd: Vec<bool>,
}

fn add_values(a: &Value, b: &Value) -> Option<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Some(Value::Int(x + y)),
        (v, Value::Int(0)) | (Value::Int(0), v) => Some(v.clone()),
        _ => None,
    }
}

impl Ctx<'_> {
    fn static_loc(&self, g: usize) -> Option<String> {
        match self.instr(g).addr()? {
            Operand::Const { value: Value::Loc(l), .. } => Some(l.clone()),
            _ => None,
        }
    }

    fn rf_choices(&self, r: usize) -> Vec<Option<usize>> {
        let sl = self.static_loc(r);
        let mut out = vec![None];
        for &w in &self.writes {
            if w == r {
                continue;
            }
            match (&sl, self.static_loc(w)) {
                (Some(a), Some(b)) if *a != b => {}
                _ => out.push(Some(w)),
            }
        }
        out
    }

    /// Value of register `reg` on thread `t` as seen by instruction at `pos`.
    fn reg_value(&self, t: usize, pos: usize, reg: u32, rval: &[Option<Value>]) -> Option<Value> {
        for p in (0..pos).rev() {
            let g = self.gid[t][p];
            if self.instr(g).dest() == Some(reg) {
                return rval[g].clone();
            }
        }
        self.prog.consts[t].get(&reg).cloned()
    }

    fn operand_value(&self, g: usize, op: &Operand, rval: &[Option<Value>]) -> Option<Value> {
        match op {
            Operand::Const { value, .. } => Some(value.clone()),
            Operand::Reg(r) => self.reg_value(self.ins[g].0, self.ins[g].1, *r, rval),
        }
    }

    fn initial(&self, loc: &str) -> Value {
        Value::Int(self.prog.locations.iter().find(|(l, _)| l == loc).map(|(_, v)| *v).unwrap_or(0))
    }

    /// Resolves locations and values for an rf choice; `None` on mismatch.
    fn resolve(&self, rf: &[Option<Option<usize>>]) -> Option<(Vec<Option<String>>, Vec<Option<Value>>, Vec<Option<Value>>)> {
        let n = self.ins.len();
        let mut loc: Vec<Option<String>> = vec![None; n];
        let mut rval: Vec<Option<Value>> = vec![None; n];
        let mut wval: Vec<Option<Value>> = vec![None; n];
        let mut changed = true;
        while changed {
            changed = false;
            for g in 0..n {
                let i = self.instr(g);
                if !i.is_access() {
                    continue;
                }
                if loc[g].is_none() {
                    match self.operand_value(g, i.addr().unwrap(), &rval) {
                        Some(Value::Loc(l)) => {
                            loc[g] = Some(l);
                            changed = true;
                        }
                        Some(Value::Int(_)) => return None,
                        None => {}
                    }
                }
                if has_read(i) && rval[g].is_none() {
                    let v = match rf[g].unwrap() {
                        None => loc[g].as_ref().map(|l| self.initial(l)),
                        Some(w) => wval[w].clone(),
                    };
                    if v.is_some() {
                        rval[g] = v;
                        changed = true;
                    }
                }
                if has_write(i) && wval[g].is_none() {
                    let v = match i {
                        IsaInstr::Store { src, .. } => self.operand_value(g, src, &rval),
                        IsaInstr::Amo { op: AmoOp::Swap, src, .. } if !has_read(i) => self.operand_value(g, src, &rval),
                        IsaInstr::Amo { op: AmoOp::Swap, src, .. } => {
                            rval[g].as_ref().and(self.operand_value(g, src, &rval))
                        }
                        IsaInstr::Amo { op: AmoOp::Add, src, .. } => match (&rval[g], self.operand_value(g, src, &rval)) {
                            (Some(a), Some(b)) => Some(add_values(a, &b)?),
                            _ => None,
                        },
                        _ => None,
                    };
                    if v.is_some() {
                        wval[g] = v;
                        changed = true;
                    }
                }
            }
        }
        for g in 0..n {
            let i = self.instr(g);
            if !i.is_access() {
                continue;
            }
            loc[g].as_ref()?;
            if has_read(i) {
                rval[g].as_ref()?;
                if let Some(w) = rf[g].unwrap() {
                    if loc[w] != loc[g] {
                        return None;
                    }
                }
            }
            if has_write(i) {
                wval[g].as_ref()?;
            }
        }
        Some((loc, rval, wval))
    }

    /// Coherence orders per location satisfying po (same core) and AMO adjacency (C7).
    fn mo_choices(&self, loc: &[Option<String>], rf: &[Option<Option<usize>>]) -> Vec<Vec<(String, Vec<usize>)>> {
        let mut per_loc: Vec<(String, Vec<Vec<usize>>)> = Vec::new();
        for (l, _) in &self.prog.locations {
            let ws: Vec<usize> = self.writes.iter().copied().filter(|&w| loc[w].as_deref() == Some(l)).collect();
            let perms = crate::c11ax::permutations(&ws)
                .into_iter()
                .filter(|p| self.mo_ok(p, rf))
                .collect();
            per_loc.push((l.clone(), perms));
        }
        let mut out = vec![Vec::new()];
        for (l, perms) in per_loc {
            let mut next = Vec::new();
            for prefix in &out {
                for p in &perms {
                    let mut v: Vec<(String, Vec<usize>)> = prefix.clone();
                    v.push((l.clone(), p.clone()));
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    fn mo_ok(&self, order: &[usize], rf: &[Option<Option<usize>>]) -> bool {
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                if self.core(a) == self.core(b) && self.ins[a].1 > self.ins[b].1 {
                    return false;
                }
            }
            if self.is_amo(a) && has_read(self.instr(a)) {
                let prev = if i == 0 { None } else { Some(order[i - 1]) };
                if rf[a].unwrap() != prev {
                    return false;
                }
            }
        }
        true
    }

    /// Po-latest same-location write before `r` on its core.
    fn own_write(&self, r: usize, loc: &[Option<String>]) -> Option<usize> {
        let (t, p, _) = self.ins[r];
        (0..p).rev().map(|q| self.gid[t][q]).find(|&g| has_write(self.instr(g)) && loc[g] == loc[r])
    }

    fn reg_outcome(&self, rval: &[Option<Value>]) -> Outcome {
        let mut out = Outcome::default();
        for (t, cs) in self.prog.consts.iter().enumerate() {
            for (r, v) in cs {
                out.regs.insert((t, format!("x{r}")), v.clone());
            }
        }
        for g in 0..self.ins.len() {
            if let Some(d) = self.instr(g).dest() {
                out.regs.insert((self.core(g), format!("x{d}")), rval[g].clone().unwrap());
            }
        }
        out
    }

    fn outcome(&self, c: &Cand) -> Outcome {
        let mut out = self.reg_outcome(&c.rval);
        for (l, order) in &c.mo {
            let v = match order.last() {
                Some(&w) => c.wval[w].clone().unwrap(),
                None => self.initial(l),
            };
            out.mem.insert(l.clone(), v);
        }
        out
    }
}

// ===== Constraint edges =====

type Edge = (usize, usize, Constraint);

fn kinds(i: &IsaInstr) -> (bool, bool) {
    (has_read(i), has_write(i))
}

impl Ctx<'_> {
    fn all_props(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        self.prop_node[w].iter().copied()
    }

    /// Orders the (a, b) access pair for the given direction kinds.
    fn order_pair(&self, a: usize, b: usize, ka_write: bool, kb_write: bool, tag: Constraint, e: &mut Vec<Edge>) {
        match (ka_write, kb_write) {
            (false, _) => e.push((self.ex(a), self.ex(b), tag)),
            (true, true) => {
                e.push((self.ex(a), self.ex(b), tag));
                for d in 0..self.ncores {
                    e.push((self.prop_node[a][d], self.prop_node[b][d], tag));
                }
            }
            (true, false) => {
                for n in self.all_props(a) {
                    e.push((n, self.ex(b), tag));
                }
            }
        }
    }

    fn edges(&self, c: &Cand) -> Vec<Edge> {
        let cfg = self.cfg;
        let mut e: Vec<Edge> = Vec::new();
        let n = self.ins.len();

        // C1: writes propagate after they execute.
        for &w in &self.writes {
            for p in self.all_props(w) {
                if p != self.ex(w) {
                    e.push((self.ex(w), p, Constraint::C1Visibility));
                }
            }
        }

        // C1 read rule with forwarding, C3 coherence of props.
        let mut mo_next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (_, order) in &c.mo {
            for (i, &w) in order.iter().enumerate() {
                mo_next.insert(w, order[i + 1..].to_vec());
                if i + 1 < order.len() {
                    for d in 0..self.ncores {
                        let (x, y) = (self.prop_node[w][d], self.prop_node[order[i + 1]][d]);
                        if x != y {
                            e.push((x, y, Constraint::C3Coherence));
                        }
                    }
                }
            }
        }
        for &r in &self.reads {
            let core = self.core(r);
            let src = c.rf[r].unwrap();
            let own = self.own_write(r, &c.loc);
            if c.fwd[r] {
                let w = own.expect("forwarding needs an own write");
                e.push((self.ex(w), self.ex(r), Constraint::C1Visibility));
                e.push((self.ex(r), self.prop_node[w][core], Constraint::C1Visibility));
                continue;
            }
            if let Some(w) = own {
                e.push((self.prop_node[w][core], self.ex(r), Constraint::C1Visibility));
            }
            if let Some(w) = src {
                if self.prop_node[w][core] != self.ex(r) {
                    e.push((self.prop_node[w][core], self.ex(r), Constraint::C1Visibility));
                }
            }
            let later: Vec<usize> = match src {
                Some(w) => mo_next[&w].clone(),
                None => c
                    .mo
                    .iter()
                    .find(|(l, _)| Some(l) == c.loc[r].as_ref())
                    .map(|(_, o)| o.clone())
                    .unwrap_or_default(),
            };
            for w2 in later {
                if w2 != r {
                    e.push((self.ex(r), self.prop_node[w2][core], Constraint::C1Visibility));
                }
            }
        }

        // C4/C5: preserved program order between accesses of one core.
        for a in 0..n {
            for b in a + 1..n {
                if self.core(a) != self.core(b) || !self.instr(a).is_access() || !self.instr(b).is_access() {
                    continue;
                }
                let (ar, aw) = kinds(self.instr(a));
                let (br, bw) = kinds(self.instr(b));
                let same = c.loc[a] == c.loc[b];
                if ar && br && (!cfg.relax_rm || (same && cfg.same_addr_rr_ordered)) {
                    self.order_pair(a, b, false, false, if same { Constraint::C5SameAddress } else { Constraint::C4PreservedPo }, &mut e);
                }
                if ar && bw && (!cfg.relax_rm || same) {
                    self.order_pair(a, b, false, true, if same { Constraint::C5SameAddress } else { Constraint::C4PreservedPo }, &mut e);
                }
                if aw && bw && (!cfg.relax_ww || same) {
                    self.order_pair(a, b, true, true, Constraint::C4PreservedPo, &mut e);
                }
                if aw && br && !cfg.relax_wr && !same {
                    self.order_pair(a, b, true, false, Constraint::C4PreservedPo, &mut e);
                }
            }
        }

        // C6: fences.
        for f in 0..n {
            let IsaInstr::Fence { pred, succ, cum } = *self.instr(f) else { continue };
            let (t, p, _) = self.ins[f];
            let (pred, succ, cum) = match (cum, cfg.fences_cumulative) {
                (Cumulativity::Lightweight, false) => (AccessSet::RW, AccessSet::W, Cumulativity::None),
                (Cumulativity::Heavyweight, false) => (AccessSet::RW, AccessSet::RW, Cumulativity::None),
                x => (pred, succ, x.0),
            };
            let before: Vec<usize> = (0..p).map(|q| self.gid[t][q]).filter(|&g| self.instr(g).is_access()).collect();
            let after: Vec<usize> =
                (p + 1..self.prog.threads[t].len()).map(|q| self.gid[t][q]).filter(|&g| self.instr(g).is_access()).collect();
            // Lightweight fences never order W before R.
            let allow_wr = cum != Cumulativity::Lightweight;
            for &a in &before {
                let (ar, aw) = kinds(self.instr(a));
                for &b in &after {
                    let (br, bw) = kinds(self.instr(b));
                    for (ka, kb) in [(false, false), (false, true), (true, false), (true, true)] {
                        let a_in = if ka { aw && pred.w } else { ar && pred.r };
                        let b_in = if kb { bw && succ.w } else { br && succ.r };
                        if a_in && b_in && (allow_wr || !(ka && !kb)) {
                            self.order_pair(a, b, ka, kb, Constraint::C6Fence, &mut e);
                        }
                    }
                }
            }
            if cum != Cumulativity::None {
                let observed: BTreeSet<usize> = before
                    .iter()
                    .filter(|&&a| has_read(self.instr(a)) && pred.r)
                    .filter_map(|&a| c.rf[a].unwrap())
                    .filter(|&w| self.core(w) != t)
                    .collect();
                for &w in &observed {
                    for &b in &after {
                        let (br, bw) = kinds(self.instr(b));
                        if bw && succ.w {
                            for d in 0..self.ncores {
                                e.push((self.prop_node[w][d], self.prop_node[b][d], Constraint::C6Fence));
                            }
                        }
                        if br && succ.r && allow_wr {
                            for nd in self.all_props(w) {
                                e.push((nd, self.ex(b), Constraint::C6Fence));
                            }
                        }
                    }
                }
            }
        }

        // C8: aq/rl local ordering.
        for a in 0..n {
            let IsaInstr::Amo { aq, rl, .. } = *self.instr(a) else { continue };
            let (t, p, _) = self.ins[a];
            for q in 0..self.prog.threads[t].len() {
                let b = self.gid[t][q];
                if !self.instr(b).is_access() || q == p {
                    continue;
                }
                if aq && q > p {
                    e.push((self.ex(a), self.ex(b), Constraint::C8AmoOrdering));
                }
                if rl && q < p {
                    e.push((self.ex(b), self.ex(a), Constraint::C8AmoOrdering));
                }
            }
        }

        // C9: sc-bit AMOs stay in program order among themselves.
        if cfg.amo_sc_decoupled {
            for a in 0..n {
                for b in a + 1..n {
                    let sc = |g: usize| matches!(self.instr(g), IsaInstr::Amo { sc: true, .. });
                    if self.core(a) == self.core(b) && sc(a) && sc(b) {
                        e.push((self.ex(a), self.ex(b), Constraint::C9ScAmo));
                    }
                }
            }
        }

        // C10: release obligations bind an observing core.
        for a in 0..n {
            let IsaInstr::Amo { rl: true, .. } = *self.instr(a) else { continue };
            let (t, p, _) = self.ins[a];
            let mut preds: BTreeSet<usize> = BTreeSet::new();
            for q in 0..p {
                let g = self.gid[t][q];
                if has_write(self.instr(g)) {
                    preds.insert(g);
                }
                if cfg.amo_rl_cumulative && has_read(self.instr(g)) {
                    if let Some(w) = c.rf[g].unwrap() {
                        if self.core(w) != t {
                            preds.insert(w);
                        }
                    }
                }
            }
            if preds.is_empty() {
                continue;
            }
            for &r in &self.reads {
                if c.rf[r].unwrap() != Some(a) || self.core(r) == t {
                    continue;
                }
                let acquiring = matches!(self.instr(r), IsaInstr::Amo { aq: true, .. });
                if cfg.lazy_cumulativity && !acquiring {
                    continue;
                }
                let (d, rp, _) = self.ins[r];
                for q in rp..self.prog.threads[d].len() {
                    let b = self.gid[d][q];
                    if !has_read(self.instr(b)) {
                        continue;
                    }
                    for &w in &preds {
                        if self.prop_node[w][d] != self.ex(b) {
                            e.push((self.prop_node[w][d], self.ex(b), Constraint::C10Release));
                        }
                    }
                }
            }
        }

        // C10: dependencies.
        if cfg.deps_ordered {
            for &(a, b) in &self.deps {
                e.push((self.ex(a), self.ex(b), Constraint::C10Release));
            }
        }
        e
    }

    fn graph(&self, edges: &[Edge]) -> Relation {
        let mut r = Relation::new(self.node_label.len());
        for &(a, b, _) in edges {
            r.add(a, b);
        }
        r
    }

    fn execution(&self, c: &Cand, order: &[usize]) -> IsaExecution {
        IsaExecution {
            rf: self.reads.iter().map(|&r| (self.iref(r), c.rf[r].unwrap().map(|w| self.iref(w)))).collect(),
            mo: c.mo.iter().map(|(l, o)| (l.clone(), o.iter().map(|&w| self.iref(w)).collect())).collect(),
            forwarded: (0..self.ins.len()).filter(|&g| c.fwd[g]).map(|g| self.iref(g)).collect(),
            timeline: order.iter().map(|&i| self.node_label[i].clone()).collect(),
        }
    }

    /// Visits every resolved candidate whose register values can satisfy the
    /// register atoms of `target`; `f` returns false to stop.
    fn for_each_cand(&self, cap: u64, target: &[CondAtom], mut f: impl FnMut(&Cand) -> bool) -> Result<(), UarchError> {
        let reg_atoms: Vec<CondAtom> = target.iter().filter(|a| matches!(a.lhs, CondLhs::Reg { .. })).cloned().collect();
        let choices: Vec<Vec<Option<usize>>> = self.reads.iter().map(|&r| self.rf_choices(r)).collect();
        let space: u64 = choices.iter().map(|c| c.len() as u64).product();
        if space > cap {
            return Err(UarchError::ExecutionCap { found: space, cap });
        }
        let n = self.ins.len();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let mut rf = vec![None; n];
            for (k, &r) in self.reads.iter().enumerate() {
                rf[r] = Some(choices[k][idx[k]]);
            }
            let resolved = self.resolve(&rf).filter(|(_, rval, _)| self.reg_outcome(rval).satisfies(&reg_atoms));
            if let Some((loc, rval, wval)) = resolved {
                for mo in self.mo_choices(&loc, &rf) {
                    // Forwarding is possible for plain loads reading their own pending store.
                    let fwd_able: Vec<usize> = if self.cfg.atomicity == Atomicity::Mca {
                        Vec::new()
                    } else {
                        self.reads
                            .iter()
                            .copied()
                            .filter(|&r| !self.is_amo(r))
                            .filter(|&r| {
                                let own = self.own_write(r, &loc);
                                own.is_some() && own == rf[r].unwrap() && !self.is_amo(own.unwrap())
                            })
                            .collect()
                    };
                    for mask in 0..(1u64 << fwd_able.len()) {
                        let mut fwd = vec![false; n];
                        for (k, &r) in fwd_able.iter().enumerate() {
                            fwd[r] = mask >> k & 1 == 1;
                        }
                        let cand = Cand { rf: rf.clone(), loc: loc.clone(), rval: rval.clone(), wval: wval.clone(), mo: mo.clone(), fwd };
                        if !f(&cand) {
                            return Ok(());
                        }
                    }
                }
            }
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return Ok(());
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

// ===== Public evaluation =====

pub fn enumerate_isa_executions(prog: &IsaProgram, cfg: &ModelConfig) -> Result<Vec<(IsaExecution, Outcome)>, UarchError> {
    let ctx = Ctx::new(prog, cfg)?;
    let mut out = Vec::new();
    ctx.for_each_cand(DEFAULT_EXECUTION_CAP, &[], |c| {
        let edges = ctx.edges(c);
        let g = ctx.graph(&edges);
        if let Some(order) = topo_order(&(0..g.size()).map(|i| g.row(i)).collect::<Vec<_>>()) {
            out.push((ctx.execution(c, &order), ctx.outcome(c)));
        }
        true
    })?;
    Ok(out)
}

/// All outcomes with at least one realisable execution.
pub fn observable_outcomes(prog: &IsaProgram, cfg: &ModelConfig) -> Result<BTreeSet<Outcome>, UarchError> {
    Ok(enumerate_isa_executions(prog, cfg)?.into_iter().map(|(_, o)| o).collect())
}

pub fn eval_uarch(prog: &IsaProgram, cfg: &ModelConfig) -> Result<Observability, UarchError> {
    eval_uarch_target(prog, cfg, &prog.cond)
}

pub fn eval_uarch_target(prog: &IsaProgram, cfg: &ModelConfig, target: &[CondAtom]) -> Result<Observability, UarchError> {
    let ctx = Ctx::new(prog, cfg)?;
    let mut witness = None;
    ctx.for_each_cand(DEFAULT_EXECUTION_CAP, target, |c| {
        if !ctx.outcome(c).satisfies(target) {
            return true;
        }
        let g = ctx.graph(&ctx.edges(c));
        match topo_order(&(0..g.size()).map(|i| g.row(i)).collect::<Vec<_>>()) {
            Some(order) => {
                witness = Some(ctx.execution(c, &order));
                false
            }
            None => true,
        }
    })?;
    Ok(Observability { observable: witness.is_some(), witness })
}

/// Re-checks a witness against every constraint; returns the first violated one.
pub fn check_execution(prog: &IsaProgram, cfg: &ModelConfig, x: &IsaExecution) -> Result<Outcome, Constraint> {
    let ctx = Ctx::new(prog, cfg).map_err(|_| Constraint::C2Atomicity)?;
    let g_of = |r: &InstrRef| ctx.gid[r.0][r.1];
    let n = ctx.ins.len();
    let mut rf = vec![None; n];
    for &r in &ctx.reads {
        let src = x.rf.get(&ctx.iref(r)).ok_or(Constraint::C1Visibility)?;
        rf[r] = Some(src.as_ref().map(g_of));
    }
    let (loc, rval, wval) = ctx.resolve(&rf).ok_or(Constraint::C1Visibility)?;
    let mo: Vec<(String, Vec<usize>)> = x.mo.iter().map(|(l, o)| (l.clone(), o.iter().map(g_of).collect())).collect();
    for (l, o) in &mo {
        let expected: BTreeSet<usize> = ctx.writes.iter().copied().filter(|&w| loc[w].as_deref() == Some(l.as_str())).collect();
        if o.iter().copied().collect::<BTreeSet<_>>() != expected || o.len() != expected.len() {
            return Err(Constraint::C3Coherence);
        }
        if !ctx.mo_ok(o, &rf) {
            let amo_broken = o.iter().enumerate().any(|(i, &a)| ctx.is_amo(a) && has_read(ctx.instr(a)) && rf[a].unwrap() != if i == 0 { None } else { Some(o[i - 1]) });
            return Err(if amo_broken { Constraint::C7AmoAtomicity } else { Constraint::C3Coherence });
        }
    }
    let mut fwd = vec![false; n];
    for r in &x.forwarded {
        let g = g_of(r);
        let own = ctx.own_write(g, &loc);
        if cfg.atomicity == Atomicity::Mca || own.is_none() || own != rf[g].unwrap() || ctx.is_amo(g) {
            return Err(Constraint::C2Atomicity);
        }
        fwd[g] = true;
    }
    let labels: BTreeMap<&Node, usize> = ctx.node_label.iter().enumerate().map(|(i, l)| (l, i)).collect();
    if x.timeline.len() != ctx.node_label.len() {
        return Err(Constraint::C2Atomicity);
    }
    let mut pos = vec![usize::MAX; ctx.node_label.len()];
    for (i, node) in x.timeline.iter().enumerate() {
        let k = *labels.get(node).ok_or(Constraint::C2Atomicity)?;
        pos[k] = i;
    }
    let c = Cand { rf, loc, rval, wval, mo, fwd };
    for (a, b, tag) in ctx.edges(&c) {
        if pos[a] >= pos[b] {
            return Err(tag);
        }
    }
    Ok(ctx.outcome(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litmus::parse_litmus;
    use crate::mapping::{compile_test, MappingId};

    fn sb_plain() -> IsaProgram {
        let t = parse_litmus(
            "test SB\nlocations x=0 y=0\nthread T0 { st(x,1,rlx); r0 = ld(y,rlx) }\nthread T1 { st(y,1,rlx); r1 = ld(x,rlx) }\nexists (r0=0 /\\ r1=0)",
        )
        .unwrap();
        compile_test(&t, MappingId::BaseIntuitive).unwrap()
    }

    #[test]
    fn presets() {
        let wr = model_preset(ModelId::WR, McmVersion::Curr);
        assert!(wr.relax_wr && !wr.relax_ww && !wr.relax_rm && wr.atomicity == Atomicity::Mca);
        let nmm = model_preset(ModelId::NMM, McmVersion::Curr);
        assert!(nmm.relax_wr && nmm.relax_ww && nmm.relax_rm && nmm.atomicity == Atomicity::NMca);
        for m in [McmVersion::Curr, McmVersion::Ours] {
            assert!(model_preset(ModelId::A9like, m).flags_equal(&model_preset(ModelId::NMM, m)));
        }
    }

    #[test]
    fn config_file() {
        let cfg = parse_model_config("custom", "relax_WR=true\natomicity=nMCA\n# comment\n").unwrap();
        assert!(cfg.relax_wr && cfg.atomicity == Atomicity::NMca && !cfg.relax_ww);
        assert!(parse_model_config("bad", "relax_XX=true").is_err());
        assert!(parse_model_config("bad", "atomicity=weird").is_err());
    }

    #[test]
    fn sb_store_buffering() {
        let p = sb_plain();
        let wr = eval_uarch(&p, &model_preset(ModelId::WR, McmVersion::Curr)).unwrap();
        assert!(wr.observable);
        let w = wr.witness.unwrap();
        assert!(check_execution(&p, &model_preset(ModelId::WR, McmVersion::Curr), &w).is_ok());
        assert!(!eval_uarch(&p, &ModelConfig::strict("sc")).unwrap().observable);
    }

    #[test]
    fn single_thread_sequential() {
        let t = parse_litmus("test s\nlocations x=0\nthread T0 { st(x,1,rlx); r0 = ld(x,rlx) }").unwrap();
        let p = compile_test(&t, MappingId::BaseIntuitive).unwrap();
        for id in ModelId::ALL {
            let outs = observable_outcomes(&p, &model_preset(id, McmVersion::Curr)).unwrap();
            assert!(outs.iter().all(|o| o.regs[&(0, "x1".to_string())] == Value::Int(1)), "{id}");
        }
    }
}
