//! C11 to ISA compiler mappings and the RISC-V program representation.
//!
//! Register allocation: load destinations and
//! value registers are numbered `x1..` in thread order, a store of a constant
//! reuses an earlier register of the same thread whose target value already
//! equals that constant, and address registers come last in location order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::litmus::{Addr, CondAtom, CondLhs, EventKind, LitmusTest, MemOrder, Value, ValueExpr};

// ===== Identifiers =====

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MappingId {
    BaseIntuitive,
    BaseRefined,
    BaseAIntuitive,
    BaseARefined,
    PowerLeadingSync,
}

impl MappingId {
    pub const ALL: [MappingId; 5] = [
        MappingId::BaseIntuitive,
        MappingId::BaseRefined,
        MappingId::BaseAIntuitive,
        MappingId::BaseARefined,
        MappingId::PowerLeadingSync,
    ];
    pub const RISCV: [MappingId; 4] =
        [MappingId::BaseIntuitive, MappingId::BaseRefined, MappingId::BaseAIntuitive, MappingId::BaseARefined];

    pub fn as_str(self) -> &'static str {
        match self {
            MappingId::BaseIntuitive => "base-intuitive",
            MappingId::BaseRefined => "base-refined",
            MappingId::BaseAIntuitive => "basea-intuitive",
            MappingId::BaseARefined => "basea-refined",
            MappingId::PowerLeadingSync => "power-leading-sync",
        }
    }

    pub fn parse(s: &str) -> Result<MappingId, MappingError> {
        MappingId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MappingError::UnknownMapping(s.to_string()))
    }

    pub fn is_refined(self) -> bool {
        matches!(self, MappingId::BaseRefined | MappingId::BaseARefined)
    }
}

impl fmt::Display for MappingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MappingError {
    #[error("unknown mapping `{0}`")]
    UnknownMapping(String),
    #[error("mapping `{0}` is emission-only; no model evaluates its instructions")]
    EmissionOnly(MappingId),
    #[error("ISA syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

// ===== Instructions =====

pub type Reg = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessSet {
    pub r: bool,
    pub w: bool,
}

impl AccessSet {
    pub const R: AccessSet = AccessSet { r: true, w: false };
    pub const W: AccessSet = AccessSet { r: false, w: true };
    pub const RW: AccessSet = AccessSet { r: true, w: true };

    fn parse(s: &str) -> Option<AccessSet> {
        match s {
            "r" => Some(AccessSet::R),
            "w" => Some(AccessSet::W),
            "rw" => Some(AccessSet::RW),
            _ => None,
        }
    }
}

impl fmt::Display for AccessSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.r {
            f.write_str("r")?;
        }
        if self.w {
            f.write_str("w")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cumulativity {
    None,
    Lightweight,
    Heavyweight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AmoOp {
    Swap,
    Add,
}

/// A source or address operand. `Const` registers are preloaded and never
/// written by the program, so they carry no dependency.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operand {
    Reg(Reg),
    Const { reg: Reg, value: Value },
}

impl Operand {
    pub fn reg(&self) -> Reg {
        match self {
            Operand::Reg(r) | Operand::Const { reg: r, .. } => *r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IsaInstr {
    Load { addr: Operand, dest: Reg },
    Store { addr: Operand, src: Operand },
    Fence { pred: AccessSet, succ: AccessSet, cum: Cumulativity },
    Amo { op: AmoOp, addr: Operand, src: Operand, dest: Reg, aq: bool, rl: bool, sc: bool },
}

impl IsaInstr {
    pub fn reads(&self) -> bool {
        matches!(self, IsaInstr::Load { .. } | IsaInstr::Amo { .. })
    }

    pub fn writes(&self) -> bool {
        matches!(self, IsaInstr::Store { .. } | IsaInstr::Amo { .. })
    }

    pub fn is_access(&self) -> bool {
        !matches!(self, IsaInstr::Fence { .. })
    }

    pub fn addr(&self) -> Option<&Operand> {
        match self {
            IsaInstr::Load { addr, .. } | IsaInstr::Store { addr, .. } | IsaInstr::Amo { addr, .. } => Some(addr),
            IsaInstr::Fence { .. } => None,
        }
    }

    pub fn dest(&self) -> Option<Reg> {
        match self {
            IsaInstr::Load { dest, .. } | IsaInstr::Amo { dest, .. } if *dest != 0 => Some(*dest),
            _ => None,
        }
    }
}

fn x(r: Reg) -> String {
    format!("x{r}")
}

impl fmt::Display for IsaInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IsaInstr::Load { addr, dest } => write!(f, "lw {}, ({})", x(*dest), x(addr.reg())),
            IsaInstr::Store { addr, src } => write!(f, "sw {}, ({})", x(src.reg()), x(addr.reg())),
            IsaInstr::Fence { cum: Cumulativity::Lightweight, .. } => f.write_str("lwf"),
            IsaInstr::Fence { cum: Cumulativity::Heavyweight, .. } => f.write_str("hwf"),
            IsaInstr::Fence { pred, succ, .. } => write!(f, "fence {pred}, {succ}"),
            IsaInstr::Amo { op, addr, src, dest, aq, rl, sc } => {
                let mut m = String::from(match op {
                    AmoOp::Swap => "amoswap.w",
                    AmoOp::Add => "amoadd.w",
                });
                for (on, s) in [(*aq, ".aq"), (*rl, ".rl"), (*sc, ".sc")] {
                    if on {
                        m.push_str(s);
                    }
                }
                write!(f, "{m} {}, {}, ({})", x(src.reg()), x(*dest), x(addr.reg()))
            }
        }
    }
}

// ===== Tables =====

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Ld,
    St,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PowerBarrier {
    Lwsync,
    Hwsync,
    CtrlIsync,
}

/// One element of a mapping row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    /// The plain access itself (`ld` or `st`).
    Access,
    Fence { pred: AccessSet, succ: AccessSet, cum: Cumulativity },
    Amo { aq: bool, rl: bool, sc: bool },
    Power(PowerBarrier),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingTable {
    pub id: MappingId,
    pub rows: Vec<((OpKind, MemOrder), Vec<Step>)>,
}

impl MappingTable {
    pub fn row(&self, kind: OpKind, order: MemOrder) -> &[Step] {
        &self.rows.iter().find(|(k, _)| *k == (kind, order)).expect("complete table").1
    }
}

const fn fence(pred: AccessSet, succ: AccessSet) -> Step {
    Step::Fence { pred, succ, cum: Cumulativity::None }
}

const LWF: Step = Step::Fence { pred: AccessSet::RW, succ: AccessSet::RW, cum: Cumulativity::Lightweight };
const HWF: Step = Step::Fence { pred: AccessSet::RW, succ: AccessSet::RW, cum: Cumulativity::Heavyweight };

const fn amo(aq: bool, rl: bool, sc: bool) -> Step {
    Step::Amo { aq, rl, sc }
}

pub fn mapping_table(id: MappingId) -> MappingTable {
    use MemOrder::*;
    use OpKind::*;
    use Step::Access as A;
    let mm = fence(AccessSet::RW, AccessSet::RW);
    let rows: Vec<((OpKind, MemOrder), Vec<Step>)> = match id {
        MappingId::BaseIntuitive => vec![
            ((Ld, Rlx), vec![A]),
            ((Ld, Acq), vec![A, fence(AccessSet::R, AccessSet::RW)]),
            ((Ld, Sc), vec![mm, A, mm]),
            ((St, Rlx), vec![A]),
            ((St, Rel), vec![fence(AccessSet::RW, AccessSet::W), A]),
            ((St, Sc), vec![mm, A]),
        ],
        MappingId::BaseRefined => vec![
            ((Ld, Rlx), vec![A]),
            ((Ld, Acq), vec![A, fence(AccessSet::R, AccessSet::RW)]),
            ((Ld, Sc), vec![HWF, A, fence(AccessSet::R, AccessSet::RW)]),
            ((St, Rlx), vec![A]),
            ((St, Rel), vec![LWF, A]),
            ((St, Sc), vec![HWF, A]),
        ],
        MappingId::BaseAIntuitive => vec![
            ((Ld, Rlx), vec![A]),
            ((Ld, Acq), vec![amo(true, false, false)]),
            ((Ld, Sc), vec![amo(true, true, false)]),
            ((St, Rlx), vec![A]),
            ((St, Rel), vec![amo(false, true, false)]),
            ((St, Sc), vec![amo(true, true, false)]),
        ],
        MappingId::BaseARefined => vec![
            ((Ld, Rlx), vec![A]),
            ((Ld, Acq), vec![amo(true, false, false)]),
            ((Ld, Sc), vec![amo(true, false, true)]),
            ((St, Rlx), vec![A]),
            ((St, Rel), vec![amo(false, true, false)]),
            ((St, Sc), vec![amo(false, true, true)]),
        ],
        MappingId::PowerLeadingSync => vec![
            ((Ld, Rlx), vec![A]),
            ((Ld, Acq), vec![A, Step::Power(PowerBarrier::CtrlIsync)]),
            ((Ld, Sc), vec![Step::Power(PowerBarrier::Hwsync), A, Step::Power(PowerBarrier::CtrlIsync)]),
            ((St, Rlx), vec![A]),
            ((St, Rel), vec![Step::Power(PowerBarrier::Lwsync), A]),
            ((St, Sc), vec![Step::Power(PowerBarrier::Hwsync), A]),
        ],
    };
    MappingTable { id, rows }
}

// ===== Programs =====

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsaProgram {
    pub name: String,
    pub mapping: Option<MappingId>,
    pub locations: Vec<(String, i64)>,
    pub threads: Vec<Vec<IsaInstr>>,
    /// Per instruction, the index of the HLL event (within its thread) it was emitted for.
    pub origin: Vec<Vec<usize>>,
    /// Per thread, registers preloaded with constants or addresses.
    pub consts: Vec<BTreeMap<Reg, Value>>,
    /// Target outcome over ISA registers (named `x<n>`) and memory.
    pub cond: Vec<CondAtom>,
}

impl IsaProgram {
    /// Registers written by loads or AMOs of `thread`.
    pub fn dests(&self, thread: usize) -> BTreeSet<Reg> {
        self.threads[thread].iter().filter_map(IsaInstr::dest).collect()
    }

    /// Index of the anchor instruction for each HLL event, per thread.
    pub fn anchors(&self) -> Vec<Vec<usize>> {
        self.threads
            .iter()
            .zip(&self.origin)
            .map(|(th, org)| {
                let mut out: Vec<usize> = Vec::new();
                for (i, ins) in th.iter().enumerate() {
                    if ins.is_access() {
                        debug_assert_eq!(org[i], out.len());
                        out.push(i);
                    }
                }
                out
            })
            .collect()
    }
}

struct Alloc {
    next: Reg,
    /// Per thread: (register, nominal value) in allocation order.
    regs: Vec<Vec<(Reg, Option<Value>)>>,
    hll_to_isa: Vec<BTreeMap<String, Reg>>,
    addr_regs: BTreeMap<String, Reg>,
}

fn target_value(test: &LitmusTest, thread: usize, reg: &str) -> Option<Value> {
    test.cond.iter().find_map(|a| match &a.lhs {
        CondLhs::Reg { thread: t, name } if *t == thread && name == reg => Some(a.rhs.clone()),
        _ => None,
    })
}

fn allocate(test: &LitmusTest) -> (Alloc, Vec<Vec<Option<Reg>>>) {
    let mut a = Alloc {
        next: 1,
        regs: vec![Vec::new(); test.threads.len()],
        hll_to_isa: vec![BTreeMap::new(); test.threads.len()],
        addr_regs: BTreeMap::new(),
    };
    // Value register chosen for each constant store, per thread and event.
    let mut value_reg = vec![Vec::new(); test.threads.len()];
    for (tid, th) in test.threads.iter().enumerate() {
        let dep_sources: BTreeSet<&str> = th
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Load { addr: Addr::Reg(r), .. } => Some(r.as_str()),
                EventKind::Store { value: ValueExpr::Reg(r), .. } => Some(r.as_str()),
                _ => None,
            })
            .collect();
        for ev in th {
            match &ev.kind {
                EventKind::Load { dest, .. } => {
                    let r = a.next;
                    a.next += 1;
                    let nominal = if dep_sources.contains(dest.as_str()) { None } else { target_value(test, tid, dest) };
                    a.regs[tid].push((r, nominal));
                    a.hll_to_isa[tid].insert(dest.clone(), r);
                    value_reg[tid].push(None);
                }
                EventKind::Store { value: ValueExpr::Int(k), .. } => {
                    let want = Value::Int(*k);
                    let reuse = a.regs[tid].iter().find(|(_, n)| n.as_ref() == Some(&want)).map(|(r, _)| *r);
                    let r = reuse.unwrap_or_else(|| {
                        let r = a.next;
                        a.next += 1;
                        a.regs[tid].push((r, Some(want)));
                        r
                    });
                    value_reg[tid].push(Some(r));
                }
                EventKind::Store { .. } => value_reg[tid].push(None),
            }
        }
    }
    for (l, _) in &test.locations {
        a.addr_regs.insert(l.clone(), a.next);
        a.next += 1;
    }
    (a, value_reg)
}

pub fn compile_test(test: &LitmusTest, id: MappingId) -> Result<IsaProgram, MappingError> {
    if id == MappingId::PowerLeadingSync {
        return Err(MappingError::EmissionOnly(id));
    }
    let table = mapping_table(id);
    let (alloc, value_reg) = allocate(test);
    let addr_const = |l: &str| Operand::Const { reg: alloc.addr_regs[l], value: Value::Loc(l.to_string()) };
    let mut threads = Vec::new();
    let mut origin = Vec::new();
    let mut consts = Vec::new();
    for (tid, th) in test.threads.iter().enumerate() {
        let mut instrs = Vec::new();
        let mut org = Vec::new();
        let mut cs: BTreeMap<Reg, Value> = alloc.addr_regs.iter().map(|(l, r)| (*r, Value::Loc(l.clone()))).collect();
        for (ei, ev) in th.iter().enumerate() {
            let (kind, order) = match ev.kind {
                EventKind::Load { .. } => (OpKind::Ld, *ev.order()),
                EventKind::Store { .. } => (OpKind::St, *ev.order()),
            };
            for step in table.row(kind, order) {
                let ins = match (*step, &ev.kind) {
                    (Step::Fence { pred, succ, cum }, _) => IsaInstr::Fence { pred, succ, cum },
                    (Step::Access, EventKind::Load { addr, dest, .. }) => IsaInstr::Load {
                        addr: load_addr(addr, &alloc, tid, &addr_const),
                        dest: alloc.hll_to_isa[tid][dest],
                    },
                    (Step::Access, EventKind::Store { loc, value, .. }) => IsaInstr::Store {
                        addr: addr_const(loc),
                        src: store_src(value, value_reg[tid][ei], &alloc, tid, &addr_const),
                    },
                    (Step::Amo { aq, rl, sc }, EventKind::Load { addr, dest, .. }) => IsaInstr::Amo {
                        op: AmoOp::Add,
                        addr: load_addr(addr, &alloc, tid, &addr_const),
                        src: Operand::Const { reg: 0, value: Value::Int(0) },
                        dest: alloc.hll_to_isa[tid][dest],
                        aq,
                        rl,
                        sc,
                    },
                    (Step::Amo { aq, rl, sc }, EventKind::Store { loc, value, .. }) => IsaInstr::Amo {
                        op: AmoOp::Swap,
                        addr: addr_const(loc),
                        src: store_src(value, value_reg[tid][ei], &alloc, tid, &addr_const),
                        dest: 0,
                        aq,
                        rl,
                        sc,
                    },
                    (Step::Power(_), _) => unreachable!("RISC-V tables only"),
                };
                if let Some(Operand::Const { reg, value }) = match &ins {
                    IsaInstr::Store { src, .. } | IsaInstr::Amo { src, .. } => Some(src),
                    _ => None,
                } {
                    if *reg != 0 {
                        cs.insert(*reg, value.clone());
                    }
                }
                instrs.push(ins);
                org.push(ei);
            }
        }
        threads.push(instrs);
        origin.push(org);
        consts.push(cs);
    }
    let cond = translate_cond(test, &alloc, &consts);
    Ok(IsaProgram { name: test.name.clone(), mapping: Some(id), locations: test.locations.clone(), threads, origin, consts, cond })
}

fn load_addr(addr: &Addr, alloc: &Alloc, tid: usize, addr_const: &dyn Fn(&str) -> Operand) -> Operand {
    match addr {
        Addr::Loc(l) => addr_const(l),
        Addr::Reg(r) => Operand::Reg(alloc.hll_to_isa[tid][r]),
    }
}

fn store_src(
    value: &ValueExpr,
    vreg: Option<Reg>,
    alloc: &Alloc,
    tid: usize,
    addr_const: &dyn Fn(&str) -> Operand,
) -> Operand {
    match value {
        ValueExpr::Int(k) => Operand::Const { reg: vreg.expect("value register"), value: Value::Int(*k) },
        ValueExpr::Loc(l) => addr_const(l),
        ValueExpr::Reg(r) => Operand::Reg(alloc.hll_to_isa[tid][r]),
    }
}

/// Constant value registers first, then translated HLL atoms, ordered by register.
fn translate_cond(test: &LitmusTest, alloc: &Alloc, consts: &[BTreeMap<Reg, Value>]) -> Vec<CondAtom> {
    let addr: BTreeSet<Reg> = alloc.addr_regs.values().copied().collect();
    let mut regs: BTreeMap<Reg, CondAtom> = BTreeMap::new();
    for (tid, cs) in consts.iter().enumerate() {
        for (r, v) in cs {
            if !addr.contains(r) {
                regs.insert(*r, CondAtom { lhs: CondLhs::Reg { thread: tid, name: x(*r) }, rhs: v.clone() });
            }
        }
    }
    let mut mem = Vec::new();
    for a in &test.cond {
        match &a.lhs {
            CondLhs::Reg { thread, name } => {
                let r = alloc.hll_to_isa[*thread][name];
                regs.insert(r, CondAtom { lhs: CondLhs::Reg { thread: *thread, name: x(r) }, rhs: a.rhs.clone() });
            }
            CondLhs::Mem(_) => mem.push(a.clone()),
        }
    }
    regs.into_values().chain(mem).collect()
}

// ===== Dependencies =====

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DepKind {
    Addr,
    Data,
    Ctrl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dep {
    pub thread: usize,
    pub from: usize,
    pub to: usize,
    pub kind: DepKind,
}

/// Syntactic dependencies; there are no branches, so no `Ctrl` edges arise.
pub fn compute_dependencies(prog: &IsaProgram) -> Vec<Dep> {
    let mut out = Vec::new();
    for (tid, th) in prog.threads.iter().enumerate() {
        for (j, ins) in th.iter().enumerate() {
            let mut uses: Vec<(Reg, DepKind)> = Vec::new();
            if let Some(Operand::Reg(r)) = ins.addr() {
                uses.push((*r, DepKind::Addr));
            }
            if let IsaInstr::Store { src: Operand::Reg(r), .. } | IsaInstr::Amo { src: Operand::Reg(r), .. } = ins {
                uses.push((*r, DepKind::Data));
            }
            for (r, kind) in uses {
                if let Some(i) = (0..j).rev().find(|&i| th[i].dest() == Some(r)) {
                    out.push(Dep { thread: tid, from: i, to: j, kind });
                }
            }
        }
    }
    out.sort();
    out
}

// ===== Text format =====

fn render_value(v: &Value) -> String {
    v.to_string()
}

pub fn render_isa(prog: &IsaProgram) -> String {
    let mut s = format!("program {}\n", prog.name);
    if let Some(m) = prog.mapping {
        s.push_str(&format!("mapping {m}\n"));
    }
    s.push_str("locations");
    for (l, v) in &prog.locations {
        s.push_str(&format!(" {l}={v}"));
    }
    s.push('\n');
    for (tid, th) in prog.threads.iter().enumerate() {
        s.push_str(&format!("thread T{tid}\n"));
        for ins in th {
            s.push_str(&format!("  {ins}\n"));
        }
        if !prog.consts[tid].is_empty() {
            let cs: Vec<String> = prog.consts[tid].iter().map(|(r, v)| format!("{}={}", x(*r), render_value(v))).collect();
            s.push_str(&format!("  consts {}\n", cs.join(" ")));
        }
        if !th.is_empty() {
            let org: Vec<String> = prog.origin[tid].iter().map(|o| o.to_string()).collect();
            s.push_str(&format!("  origin {}\n", org.join(" ")));
        }
    }
    if !prog.cond.is_empty() {
        let atoms: Vec<String> = prog
            .cond
            .iter()
            .map(|a| match &a.lhs {
                CondLhs::Reg { thread, name } => format!("T{thread}:{name}={}", a.rhs),
                CondLhs::Mem(l) => format!("{l}={}", a.rhs),
            })
            .collect();
        s.push_str(&format!("exists ({})\n", atoms.join(" /\\ ")));
    }
    s
}

/// Instruction lines only, one `T<n>: <instr>` per line (listing comparison).
pub fn render_listing(prog: &IsaProgram) -> Vec<Vec<String>> {
    prog.threads.iter().map(|th| th.iter().map(|i| i.to_string()).collect()).collect()
}

fn parse_reg(s: &str, line: usize) -> Result<Reg, MappingError> {
    s.trim()
        .strip_prefix('x')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| MappingError::Syntax { line, msg: format!("bad register `{s}`") })
}

fn parse_value(s: &str, locs: &[(String, i64)], line: usize) -> Result<Value, MappingError> {
    if let Ok(i) = s.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    if locs.iter().any(|(l, _)| l == s) {
        return Ok(Value::Loc(s.to_string()));
    }
    Err(MappingError::Syntax { line, msg: format!("bad value `{s}`") })
}

enum RawInstr {
    Load(Reg, Reg),
    Store(Reg, Reg),
    Fence(IsaInstr),
    Amo(AmoOp, Reg, Reg, Reg, bool, bool, bool),
}

fn parse_instr(text: &str, line: usize) -> Result<RawInstr, MappingError> {
    let err = |m: &str| MappingError::Syntax { line, msg: format!("{m}: `{text}`") };
    let (mn, rest) = text.split_once(' ').unwrap_or((text, ""));
    let ops: Vec<&str> = rest.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let paren = |s: &str| -> Result<Reg, MappingError> {
        let inner = s.strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or_else(|| err("expected (reg)"))?;
        parse_reg(inner, line)
    };
    match mn {
        "lw" if ops.len() == 2 => Ok(RawInstr::Load(parse_reg(ops[0], line)?, paren(ops[1])?)),
        "sw" if ops.len() == 2 => Ok(RawInstr::Store(parse_reg(ops[0], line)?, paren(ops[1])?)),
        "lwf" => Ok(RawInstr::Fence(IsaInstr::Fence { pred: AccessSet::RW, succ: AccessSet::RW, cum: Cumulativity::Lightweight })),
        "hwf" => Ok(RawInstr::Fence(IsaInstr::Fence { pred: AccessSet::RW, succ: AccessSet::RW, cum: Cumulativity::Heavyweight })),
        "fence" if ops.len() == 2 => {
            let pred = AccessSet::parse(ops[0]).ok_or_else(|| err("bad fence set"))?;
            let succ = AccessSet::parse(ops[1]).ok_or_else(|| err("bad fence set"))?;
            Ok(RawInstr::Fence(IsaInstr::Fence { pred, succ, cum: Cumulativity::None }))
        }
        _ if mn.starts_with("amo") && ops.len() == 3 => {
            let mut parts = mn.split('.');
            let op = match parts.next() {
                Some("amoswap") => AmoOp::Swap,
                Some("amoadd") => AmoOp::Add,
                _ => return Err(err("unknown AMO")),
            };
            if parts.next() != Some("w") {
                return Err(err("expected .w"));
            }
            let (mut aq, mut rl, mut sc) = (false, false, false);
            for p in parts {
                match p {
                    "aq" => aq = true,
                    "rl" => rl = true,
                    "sc" => sc = true,
                    _ => return Err(err("unknown AMO suffix")),
                }
            }
            Ok(RawInstr::Amo(op, parse_reg(ops[0], line)?, parse_reg(ops[1], line)?, paren(ops[2])?, aq, rl, sc))
        }
        _ => Err(err("unknown instruction")),
    }
}

/// Parses the output of [`render_isa`].
pub fn parse_isa(text: &str) -> Result<IsaProgram, MappingError> {
    let mut prog = IsaProgram {
        name: String::new(),
        mapping: None,
        locations: Vec::new(),
        threads: Vec::new(),
        origin: Vec::new(),
        consts: Vec::new(),
        cond: Vec::new(),
    };
    let mut raw: Vec<Vec<RawInstr>> = Vec::new();
    let mut cond_text = None;
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let l = line.split('#').next().unwrap_or("").trim();
        if l.is_empty() {
            continue;
        }
        let (kw, rest) = l.split_once(' ').unwrap_or((l, ""));
        match kw {
            "program" => prog.name = rest.trim().to_string(),
            "mapping" => prog.mapping = Some(MappingId::parse(rest.trim())?),
            "locations" => {
                for kv in rest.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or(MappingError::Syntax { line: line_no, msg: "bad location".into() })?;
                    let v = v.parse().map_err(|_| MappingError::Syntax { line: line_no, msg: "bad initial value".into() })?;
                    prog.locations.push((k.to_string(), v));
                }
            }
            "thread" => {
                let expected = format!("T{}", raw.len());
                if rest.trim() != expected {
                    return Err(MappingError::Syntax { line: line_no, msg: format!("expected thread {expected}") });
                }
                raw.push(Vec::new());
                prog.consts.push(BTreeMap::new());
                prog.origin.push(Vec::new());
            }
            "consts" | "origin" if !raw.is_empty() => {
                let t = raw.len() - 1;
                for item in rest.split_whitespace() {
                    if kw == "origin" {
                        let o = item.parse().map_err(|_| MappingError::Syntax { line: line_no, msg: "bad origin".into() })?;
                        prog.origin[t].push(o);
                    } else {
                        let (r, v) = item.split_once('=').ok_or(MappingError::Syntax { line: line_no, msg: "bad const".into() })?;
                        let v = parse_value(v, &prog.locations, line_no)?;
                        prog.consts[t].insert(parse_reg(r, line_no)?, v);
                    }
                }
            }
            "exists" => cond_text = Some((rest.to_string(), line_no)),
            _ if !raw.is_empty() => raw.last_mut().unwrap().push(parse_instr(l, line_no)?),
            _ => return Err(MappingError::Syntax { line: line_no, msg: format!("unexpected `{kw}`") }),
        }
    }
    for (tid, th) in raw.into_iter().enumerate() {
        let cs = &prog.consts[tid];
        let op = |r: Reg| match cs.get(&r) {
            Some(v) => Operand::Const { reg: r, value: v.clone() },
            None if r == 0 => Operand::Const { reg: 0, value: Value::Int(0) },
            None => Operand::Reg(r),
        };
        let instrs = th
            .into_iter()
            .map(|ri| match ri {
                RawInstr::Load(d, a) => IsaInstr::Load { addr: op(a), dest: d },
                RawInstr::Store(s, a) => IsaInstr::Store { addr: op(a), src: op(s) },
                RawInstr::Fence(f) => f,
                RawInstr::Amo(o, s, d, a, aq, rl, sc) => IsaInstr::Amo { op: o, addr: op(a), src: op(s), dest: d, aq, rl, sc },
            })
            .collect::<Vec<_>>();
        if prog.origin[tid].len() != instrs.len() {
            prog.origin[tid] = (0..instrs.len()).collect();
        }
        prog.threads.push(instrs);
    }
    if let Some((c, line)) = cond_text {
        let inner = c.trim().strip_prefix('(').and_then(|s| s.strip_suffix(')')).ok_or(MappingError::Syntax { line, msg: "bad exists".into() })?;
        for atom in inner.split("/\\").map(str::trim).filter(|a| !a.is_empty()) {
            let (lhs, rhs) = atom.split_once('=').ok_or(MappingError::Syntax { line, msg: "bad atom".into() })?;
            let rhs = parse_value(rhs.trim(), &prog.locations, line)?;
            let lhs = match lhs.trim().split_once(':') {
                Some((t, r)) => {
                    let thread = t.strip_prefix('T').and_then(|n| n.parse().ok()).ok_or(MappingError::Syntax { line, msg: "bad thread".into() })?;
                    CondLhs::Reg { thread, name: r.to_string() }
                }
                None => CondLhs::Mem(lhs.trim().to_string()),
            };
            prog.cond.push(CondAtom { lhs, rhs });
        }
    }
    Ok(prog)
}

// ===== Power emission =====

/// Renders a test through the leading-sync Power table (text only).
pub fn emit_power(test: &LitmusTest) -> String {
    let table = mapping_table(MappingId::PowerLeadingSync);
    let mut s = format!("program {}\nmapping {}\n", test.name, MappingId::PowerLeadingSync);
    for (tid, th) in test.threads.iter().enumerate() {
        s.push_str(&format!("thread T{tid}\n"));
        for ev in th {
            let (kind, text) = match &ev.kind {
                EventKind::Load { addr, dest, .. } => {
                    let a = match addr {
                        Addr::Loc(l) | Addr::Reg(l) => l,
                    };
                    (OpKind::Ld, format!("ld {dest}, ({a})"))
                }
                EventKind::Store { loc, value, .. } => {
                    let v = match value {
                        ValueExpr::Int(k) => k.to_string(),
                        ValueExpr::Reg(r) | ValueExpr::Loc(r) => r.clone(),
                    };
                    (OpKind::St, format!("st {v}, ({loc})"))
                }
            };
            for step in table.row(kind, *ev.order()) {
                let line = match step {
                    Step::Access => text.clone(),
                    Step::Power(PowerBarrier::Lwsync) => "lwsync".into(),
                    Step::Power(PowerBarrier::Hwsync) => "hwsync".into(),
                    Step::Power(PowerBarrier::CtrlIsync) => "ctrlisync".into(),
                    _ => unreachable!("Power table holds only accesses and barriers"),
                };
                s.push_str(&format!("  {line}\n"));
            }
        }
    }
    s
}
