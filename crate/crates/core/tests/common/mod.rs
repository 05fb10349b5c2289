//! Independent reference oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use tristack_core::litmus::{Addr, EventKind, Value, ValueExpr};
use tristack_core::mapping::{AmoOp, IsaInstr, Operand};
use tristack_core::{IsaProgram, LitmusTest, Outcome};

// ===== HLL: sequential interleavings =====

#[derive(Clone, PartialEq, Eq, Hash)]
struct HllState {
    pc: Vec<usize>,
    regs: Vec<BTreeMap<String, Value>>,
    mem: BTreeMap<String, Value>,
}

/// Outcomes of every sequential interleaving of `t`.
pub fn hll_sc_outcomes(t: &LitmusTest) -> BTreeSet<Outcome> {
    let mut st = HllState {
        pc: vec![0; t.threads.len()],
        regs: vec![BTreeMap::new(); t.threads.len()],
        mem: t.locations.iter().map(|(l, v)| (l.clone(), Value::Int(*v))).collect(),
    };
    let mut out = BTreeSet::new();
    hll_dfs(t, &mut st, &mut HashSet::new(), &mut out);
    out
}

fn hll_dfs(t: &LitmusTest, st: &mut HllState, seen: &mut HashSet<HllState>, out: &mut BTreeSet<Outcome>) {
    if !seen.insert(st.clone()) {
        return;
    }
    let mut progressed = false;
    for th in 0..t.threads.len() {
        let Some(ev) = t.threads[th].get(st.pc[th]) else { continue };
        progressed = true;
        let saved_mem = st.mem.clone();
        let saved_regs = st.regs[th].clone();
        match &ev.kind {
            EventKind::Load { addr, dest, .. } => {
                let loc = match addr {
                    Addr::Loc(l) => l.clone(),
                    Addr::Reg(r) => match st.regs[th].get(r) {
                        Some(Value::Loc(l)) => l.clone(),
                        _ => continue,
                    },
                };
                let Some(v) = st.mem.get(&loc).cloned() else { continue };
                st.regs[th].insert(dest.clone(), v);
            }
            EventKind::Store { loc, value, .. } => {
                let v = match value {
                    ValueExpr::Int(i) => Value::Int(*i),
                    ValueExpr::Loc(l) => Value::Loc(l.clone()),
                    ValueExpr::Reg(r) => st.regs[th][r].clone(),
                };
                st.mem.insert(loc.clone(), v);
            }
        }
        st.pc[th] += 1;
        hll_dfs(t, st, seen, out);
        st.pc[th] -= 1;
        st.mem = saved_mem;
        st.regs[th] = saved_regs;
    }
    if !progressed {
        let mut o = Outcome::default();
        for (th, regs) in st.regs.iter().enumerate() {
            for (r, v) in regs {
                o.regs.insert((th, r.clone()), v.clone());
            }
        }
        o.mem = st.mem.clone();
        out.insert(o);
    }
}

// ===== HLL: per-location coherence only =====

/// Outcomes whose (rf, mo) make po-loc ∪ rf ∪ mo ∪ fr acyclic.
pub fn hll_coherence_outcomes(t: &LitmusTest) -> BTreeSet<Outcome> {
    let evs: Vec<_> = t.events().cloned().collect();
    let stores: Vec<usize> = (0..evs.len()).filter(|&i| matches!(evs[i].kind, EventKind::Store { .. })).collect();
    let loads: Vec<usize> = (0..evs.len()).filter(|&i| matches!(evs[i].kind, EventKind::Load { .. })).collect();
    let choices: Vec<Vec<Option<usize>>> =
        loads.iter().map(|_| std::iter::once(None).chain(stores.iter().map(|&s| Some(s))).collect()).collect();
    let mut out = BTreeSet::new();
    for rf_pick in cartesian(&choices) {
        let rf: BTreeMap<usize, Option<usize>> = loads.iter().copied().zip(rf_pick).collect();
        let Some((loc, val)) = hll_resolve(t, &evs, &rf) else { continue };
        let per_loc: Vec<Vec<Vec<usize>>> = t
            .locations
            .iter()
            .map(|(l, _)| perms(&stores.iter().copied().filter(|&s| loc[s] == *l).collect::<Vec<_>>()))
            .collect();
        for mo in cartesian(&per_loc) {
            let n = evs.len();
            let mut g = vec![Vec::new(); n];
            for a in 0..n {
                for b in a + 1..n {
                    if evs[a].thread == evs[b].thread && loc[a] == loc[b] {
                        g[a].push(b);
                    }
                }
            }
            let mut mo_pos = BTreeMap::new();
            for order in &mo {
                for (i, &w) in order.iter().enumerate() {
                    mo_pos.insert(w, i);
                    if i + 1 < order.len() {
                        g[w].push(order[i + 1]);
                    }
                }
            }
            for (&r, &src) in &rf {
                if let Some(w) = src {
                    g[w].push(r);
                }
                for order in &mo {
                    for &w2 in order {
                        let later = match src {
                            None => loc[w2] == loc[r],
                            Some(w) => loc[w2] == loc[r] && mo_pos[&w2] > mo_pos[&w],
                        };
                        if later {
                            g[r].push(w2);
                        }
                    }
                }
            }
            if !acyclic(&g) {
                continue;
            }
            let mut o = Outcome::default();
            for &r in &loads {
                if let EventKind::Load { dest, .. } = &evs[r].kind {
                    o.regs.insert((evs[r].thread, dest.clone()), val[r].clone());
                }
            }
            for ((l, init), order) in t.locations.iter().zip(&mo) {
                o.mem.insert(l.clone(), order.last().map(|&w| val[w].clone()).unwrap_or(Value::Int(*init)));
            }
            out.insert(o);
        }
    }
    out
}

fn hll_resolve(
    t: &LitmusTest,
    evs: &[tristack_core::litmus::HllEvent],
    rf: &BTreeMap<usize, Option<usize>>,
) -> Option<(Vec<String>, Vec<Value>)> {
    let n = evs.len();
    let mut loc: Vec<Option<String>> = vec![None; n];
    let mut val: Vec<Option<Value>> = vec![None; n];
    let reg_of = |val: &[Option<Value>], th: usize, r: &str| -> Option<Value> {
        (0..n)
            .find(|&i| evs[i].thread == th && matches!(&evs[i].kind, EventKind::Load { dest, .. } if dest == r))
            .and_then(|i| val[i].clone())
    };
    for _ in 0..=n {
        for i in 0..n {
            match &evs[i].kind {
                EventKind::Load { addr, .. } => {
                    if loc[i].is_none() {
                        loc[i] = match addr {
                            Addr::Loc(l) => Some(l.clone()),
                            Addr::Reg(r) => match reg_of(&val, evs[i].thread, r) {
                                Some(Value::Loc(l)) => Some(l),
                                Some(Value::Int(_)) => return None,
                                None => None,
                            },
                        };
                    }
                    if val[i].is_none() {
                        val[i] = match rf[&i] {
                            None => loc[i].as_ref().map(|l| Value::Int(t.locations.iter().find(|(x, _)| x == l).unwrap().1)),
                            Some(w) => val[w].clone(),
                        };
                    }
                }
                EventKind::Store { loc: l, value, .. } => {
                    loc[i] = Some(l.clone());
                    if val[i].is_none() {
                        val[i] = match value {
                            ValueExpr::Int(x) => Some(Value::Int(*x)),
                            ValueExpr::Loc(x) => Some(Value::Loc(x.clone())),
                            ValueExpr::Reg(r) => reg_of(&val, evs[i].thread, r),
                        };
                    }
                }
            }
        }
    }
    let loc: Vec<String> = loc.into_iter().collect::<Option<_>>()?;
    let val: Vec<Value> = val.into_iter().collect::<Option<_>>()?;
    for (&r, &src) in rf {
        if let Some(w) = src {
            if loc[w] != loc[r] {
                return None;
            }
        }
    }
    Some((loc, val))
}

// ===== ISA: sequential interleavings =====

#[derive(Clone, PartialEq, Eq, Hash)]
struct IsaState {
    pc: Vec<usize>,
    regs: Vec<BTreeMap<u32, Value>>,
    mem: BTreeMap<String, Value>,
}

/// Outcomes of every sequential interleaving of `p`, each instruction atomic.
pub fn isa_sc_outcomes(p: &IsaProgram) -> BTreeSet<Outcome> {
    let mut st = IsaState {
        pc: vec![0; p.threads.len()],
        regs: p.consts.clone(),
        mem: p.locations.iter().map(|(l, v)| (l.clone(), Value::Int(*v))).collect(),
    };
    let mut out = BTreeSet::new();
    isa_dfs(p, &mut st, &mut HashSet::new(), &mut out);
    out
}

fn operand(st: &IsaState, th: usize, op: &Operand) -> Option<Value> {
    match op {
        Operand::Const { value, .. } => Some(value.clone()),
        Operand::Reg(0) => Some(Value::Int(0)),
        Operand::Reg(r) => st.regs[th].get(r).cloned(),
    }
}

fn isa_dfs(p: &IsaProgram, st: &mut IsaState, seen: &mut HashSet<IsaState>, out: &mut BTreeSet<Outcome>) {
    if !seen.insert(st.clone()) {
        return;
    }
    let mut progressed = false;
    for th in 0..p.threads.len() {
        let Some(ins) = p.threads[th].get(st.pc[th]) else { continue };
        progressed = true;
        let saved_mem = st.mem.clone();
        let saved_regs = st.regs[th].clone();
        let loc_of = |st: &IsaState, op: &Operand| match operand(st, th, op) {
            Some(Value::Loc(l)) => Some(l),
            _ => None,
        };
        match ins {
            IsaInstr::Fence { .. } => {}
            IsaInstr::Load { addr, dest } => {
                let Some(l) = loc_of(st, addr) else { continue };
                let v = st.mem[&l].clone();
                st.regs[th].insert(*dest, v);
            }
            IsaInstr::Store { addr, src } => {
                let Some(l) = loc_of(st, addr) else { continue };
                let v = operand(st, th, src).expect("store source defined");
                st.mem.insert(l, v);
            }
            IsaInstr::Amo { op, addr, src, dest, .. } => {
                let Some(l) = loc_of(st, addr) else { continue };
                let old = st.mem[&l].clone();
                let s = operand(st, th, src).expect("AMO source defined");
                let new = match (op, &old, &s) {
                    (AmoOp::Swap, _, _) => s.clone(),
                    (AmoOp::Add, v, Value::Int(0)) => v.clone(),
                    (AmoOp::Add, Value::Int(a), Value::Int(b)) => Value::Int(a + b),
                    _ => continue,
                };
                st.mem.insert(l, new);
                if *dest != 0 {
                    st.regs[th].insert(*dest, old);
                }
            }
        }
        st.pc[th] += 1;
        isa_dfs(p, st, seen, out);
        st.pc[th] -= 1;
        st.mem = saved_mem;
        st.regs[th] = saved_regs;
    }
    if !progressed {
        let mut o = Outcome::default();
        for (th, regs) in st.regs.iter().enumerate() {
            for (r, v) in regs {
                o.regs.insert((th, format!("x{r}")), v.clone());
            }
        }
        o.mem = st.mem.clone();
        out.insert(o);
    }
}

// ===== Helpers =====

pub fn cartesian<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        let mut next = Vec::new();
        for prefix in &out {
            for x in c {
                let mut v = prefix.clone();
                v.push(x.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn perms(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in perms(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Depth-first cycle detection.
pub fn acyclic(g: &[Vec<usize>]) -> bool {
    fn visit(g: &[Vec<usize>], v: usize, state: &mut [u8]) -> bool {
        state[v] = 1;
        for &w in &g[v] {
            if state[w] == 1 || (state[w] == 0 && !visit(g, w, state)) {
                return false;
            }
        }
        state[v] = 2;
        true
    }
    let mut state = vec![0u8; g.len()];
    (0..g.len()).all(|v| state[v] != 0 || visit(g, v, &mut state))
}
