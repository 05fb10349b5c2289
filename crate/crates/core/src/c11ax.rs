//! Axiomatic evaluation of C11 atomic loads and stores.
//!
//! Candidate executions are enumerated as (rf, mo, scord) triples and filtered
//! by the coherence, happens-before and SC-order axioms A1-A7.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::litmus::{Addr, EventKind, Expect, LitmusTest, MemOrder, Outcome, Value, ValueExpr};
use crate::rel::Relation;

/// Default bound on the raw candidate space of one test.
pub const DEFAULT_CANDIDATE_CAP: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum C11Error {
    #[error("candidate space of {found} exceeds cap {cap}")]
    CandidateCap { found: u64, cap: u64 },
    #[error("test has {0} events; at most 64 are supported")]
    TooLarge(usize),
}

// ===== Executions =====

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExecEvent {
    /// `None` for the initialising write of a location.
    pub thread: Option<usize>,
    pub index: usize,
    pub is_write: bool,
    pub loc: String,
    pub value: Value,
    /// `None` for initialising writes.
    pub order: Option<MemOrder>,
    pub dest: Option<String>,
}

impl ExecEvent {
    pub fn is_sc(&self) -> bool {
        self.order == Some(MemOrder::Sc)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CandidateExecution {
    /// Init writes (one per location, in declaration order) then program events in thread order.
    pub events: Vec<ExecEvent>,
    /// Source write of every load; `None` for writes.
    pub rf: Vec<Option<usize>>,
    /// Per location, the total write order starting with the init write.
    pub mo: Vec<(String, Vec<usize>)>,
    /// Total order over Sc events.
    pub scord: Vec<usize>,
}

impl CandidateExecution {
    fn n(&self) -> usize {
        self.events.len()
    }

    pub fn sb(&self) -> Relation {
        let mut r = Relation::new(self.n());
        for (a, ea) in self.events.iter().enumerate() {
            for (b, eb) in self.events.iter().enumerate() {
                let ordered = match (ea.thread, eb.thread) {
                    (None, Some(_)) => true,
                    (Some(ta), Some(tb)) => ta == tb && ea.index < eb.index,
                    _ => false,
                };
                if ordered {
                    r.add(a, b);
                }
            }
        }
        r
    }

    pub fn rf_rel(&self) -> Relation {
        let mut r = Relation::new(self.n());
        for (l, w) in self.rf.iter().enumerate() {
            if let Some(w) = w {
                r.add(*w, l);
            }
        }
        r
    }

    pub fn mo_rel(&self) -> Relation {
        let mut r = Relation::new(self.n());
        for (_, order) in &self.mo {
            for (i, a) in order.iter().enumerate() {
                for b in &order[i + 1..] {
                    r.add(*a, *b);
                }
            }
        }
        r
    }

    /// Release W synchronises with acquire R when R reads W or a same-thread mo-later write.
    pub fn sw(&self) -> Relation {
        let mo = self.mo_rel();
        let mut r = Relation::new(self.n());
        for (rd, src) in self.rf.iter().enumerate() {
            let Some(src) = *src else { continue };
            if !self.events[rd].order.is_some_and(MemOrder::is_acquire) {
                continue;
            }
            for (w, ew) in self.events.iter().enumerate() {
                if !ew.is_write || !ew.order.is_some_and(MemOrder::is_release) {
                    continue;
                }
                let in_rs = w == src || (self.events[src].thread == ew.thread && mo.has(w, src));
                if in_rs && ew.thread != self.events[rd].thread {
                    r.add(w, rd);
                }
            }
        }
        r
    }

    pub fn hb(&self) -> Relation {
        let mut r = self.sb();
        r.union_with(&self.sw());
        r.closure()
    }

    pub fn outcome(&self) -> Outcome {
        let mut out = Outcome::default();
        for e in &self.events {
            if let (Some(t), Some(d)) = (e.thread, &e.dest) {
                out.regs.insert((t, d.clone()), e.value.clone());
            }
        }
        for (loc, order) in &self.mo {
            let last = *order.last().expect("init write present");
            out.mem.insert(loc.clone(), self.events[last].value.clone());
        }
        out
    }
}

// ===== Axioms =====

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Axiom {
    A1HbIrreflexive,
    A2CoWW,
    A3CoRR,
    A4CoWR,
    A5CoRW,
    A6ScOrder,
    A7ScRead,
}

impl Axiom {
    pub const ALL: [Axiom; 7] = [
        Axiom::A1HbIrreflexive,
        Axiom::A2CoWW,
        Axiom::A3CoRR,
        Axiom::A4CoWR,
        Axiom::A5CoRW,
        Axiom::A6ScOrder,
        Axiom::A7ScRead,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Axiom::A1HbIrreflexive => "A1 hb irreflexive",
            Axiom::A2CoWW => "A2 CoWW",
            Axiom::A3CoRR => "A3 CoRR",
            Axiom::A4CoWR => "A4 CoWR",
            Axiom::A5CoRW => "A5 CoRW",
            Axiom::A6ScOrder => "A6 sc order",
            Axiom::A7ScRead => "A7 sc read",
        }
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    pub results: [(Axiom, bool); 7],
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|(_, ok)| *ok)
    }

    pub fn failed(&self) -> Vec<Axiom> {
        self.results.iter().filter(|(_, ok)| !ok).map(|(a, _)| *a).collect()
    }
}

pub fn check_consistent(x: &CandidateExecution) -> AxiomReport {
    let ev = &x.events;
    let n = ev.len();
    let hb = x.hb();
    let mo = x.mo_rel();
    let same_loc = |a: usize, b: usize| ev[a].loc == ev[b].loc;
    let writes: Vec<usize> = (0..n).filter(|&i| ev[i].is_write).collect();
    let reads: Vec<usize> = (0..n).filter(|&i| !ev[i].is_write).collect();

    let a1 = hb.is_irreflexive();

    let a2 = writes
        .iter()
        .all(|&a| writes.iter().all(|&b| !(same_loc(a, b) && hb.has(a, b) && mo.has(b, a))));

    let a3 = reads.iter().all(|&r1| {
        reads.iter().all(|&r2| {
            let (w1, w2) = (x.rf[r1].unwrap(), x.rf[r2].unwrap());
            !(same_loc(r1, r2) && hb.has(r1, r2) && mo.has(w2, w1))
        })
    });

    let a4 = reads.iter().all(|&r| {
        let src = x.rf[r].unwrap();
        writes.iter().all(|&w| !(same_loc(w, r) && hb.has(w, r) && mo.has(src, w)))
    });

    let a5 = reads.iter().all(|&r| {
        let src = x.rf[r].unwrap();
        writes
            .iter()
            .all(|&w| !(same_loc(w, r) && hb.has(r, w) && (w == src || mo.has(w, src))))
    });

    let mut pos = vec![usize::MAX; n];
    for (i, e) in x.scord.iter().enumerate() {
        pos[*e] = i;
    }
    let sc: Vec<usize> = (0..n).filter(|&i| ev[i].is_sc()).collect();
    let a6 = sc.iter().all(|&a| {
        sc.iter().all(|&b| {
            let before = pos[a] < pos[b];
            !((hb.has(a, b) || mo.has(a, b)) && !before)
        })
    });

    let a7 = sc.iter().filter(|&&r| !ev[r].is_write).all(|&r| {
        let src = x.rf[r].unwrap();
        let latest = x.scord[..pos[r]]
            .iter()
            .rev()
            .find(|&&w| ev[w].is_write && same_loc(w, r));
        match latest {
            Some(&s) => !mo.has(src, s),
            None => true,
        }
    });

    AxiomReport {
        results: [
            (Axiom::A1HbIrreflexive, a1),
            (Axiom::A2CoWW, a2),
            (Axiom::A3CoRR, a3),
            (Axiom::A4CoWR, a4),
            (Axiom::A5CoRW, a5),
            (Axiom::A6ScOrder, a6),
            (Axiom::A7ScRead, a7),
        ],
    }
}

// ===== Enumeration =====

struct Shape {
    locations: Vec<String>,
    /// Static template of every event; loads through registers have no static location.
    events: Vec<(Option<usize>, usize, bool, Option<String>, Option<MemOrder>, Option<String>)>,
    kinds: Vec<Option<EventKind<MemOrder>>>,
    inits: Vec<Value>,
    loads: Vec<usize>,
    rf_choices: Vec<Vec<usize>>,
    writes_by_loc: Vec<Vec<usize>>,
    sc: Vec<usize>,
    reg_owner: BTreeMap<(usize, String), usize>,
}

fn shape(test: &LitmusTest) -> Result<Shape, C11Error> {
    let mut events = Vec::new();
    let mut kinds = Vec::new();
    let mut inits = Vec::new();
    for (l, v) in &test.locations {
        events.push((None, 0, true, Some(l.clone()), None, None));
        kinds.push(None);
        inits.push(Value::Int(*v));
    }
    let mut reg_owner = BTreeMap::new();
    for ev in test.events() {
        let id = events.len();
        match &ev.kind {
            EventKind::Load { addr, order, dest } => {
                let loc = match addr {
                    Addr::Loc(l) => Some(l.clone()),
                    Addr::Reg(_) => None,
                };
                events.push((Some(ev.thread), ev.index, false, loc, Some(*order), Some(dest.clone())));
                reg_owner.insert((ev.thread, dest.clone()), id);
            }
            EventKind::Store { loc, order, .. } => {
                events.push((Some(ev.thread), ev.index, true, Some(loc.clone()), Some(*order), None));
            }
        }
        kinds.push(Some(ev.kind.clone()));
    }
    if events.len() > 64 {
        return Err(C11Error::TooLarge(events.len()));
    }
    let locations: Vec<String> = test.locations.iter().map(|(l, _)| l.clone()).collect();
    let writes_by_loc: Vec<Vec<usize>> = locations
        .iter()
        .map(|l| (0..events.len()).filter(|&i| events[i].2 && events[i].3.as_deref() == Some(l)).collect())
        .collect();
    let loads: Vec<usize> = (0..events.len()).filter(|&i| !events[i].2).collect();
    let rf_choices = loads
        .iter()
        .map(|&l| match &events[l].3 {
            Some(loc) => {
                let li = locations.iter().position(|x| x == loc).unwrap();
                writes_by_loc[li].clone()
            }
            None => (0..events.len()).filter(|&i| events[i].2).collect(),
        })
        .collect();
    let sc = (0..events.len()).filter(|&i| events[i].4 == Some(MemOrder::Sc)).collect();
    Ok(Shape { locations, events, kinds, inits, loads, rf_choices, writes_by_loc, sc, reg_owner })
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

impl Shape {
    fn space(&self) -> u64 {
        let rf: u64 = self.rf_choices.iter().map(|c| c.len().max(1) as u64).product();
        let mo: u64 = self.writes_by_loc.iter().map(|w| factorial(w.len() - 1)).product();
        rf.saturating_mul(mo).saturating_mul(factorial(self.sc.len()))
    }

    /// Resolves values and dynamic locations for one rf choice; `None` if
    /// values do not flow (address of a non-location, cyclic dependence or
    /// location mismatch with the source write).
    fn resolve(&self, rf: &[Option<usize>]) -> Option<Vec<ExecEvent>> {
        let n = self.events.len();
        let mut vals: Vec<Option<Value>> = vec![None; n];
        let mut locs: Vec<Option<String>> = self.events.iter().map(|e| e.3.clone()).collect();
        for (i, v) in self.inits.iter().enumerate() {
            vals[i] = Some(v.clone());
        }
        let reg = |vals: &[Option<Value>], t: usize, r: &str| -> Option<Value> {
            self.reg_owner.get(&(t, r.to_string())).and_then(|&id| vals[id].clone())
        };
        let mut changed = true;
        while changed {
            changed = false;
            for i in self.inits.len()..n {
                let t = self.events[i].0.unwrap();
                match self.kinds[i].as_ref().unwrap() {
                    EventKind::Store { value, .. } => {
                        if vals[i].is_none() {
                            let v = match value {
                                ValueExpr::Int(k) => Some(Value::Int(*k)),
                                ValueExpr::Loc(l) => Some(Value::Loc(l.clone())),
                                ValueExpr::Reg(r) => reg(&vals, t, r),
                            };
                            if v.is_some() {
                                vals[i] = v;
                                changed = true;
                            }
                        }
                    }
                    EventKind::Load { addr, .. } => {
                        if locs[i].is_none() {
                            if let Addr::Reg(r) = addr {
                                match reg(&vals, t, r) {
                                    Some(Value::Loc(l)) => {
                                        locs[i] = Some(l);
                                        changed = true;
                                    }
                                    Some(Value::Int(_)) => return None,
                                    None => {}
                                }
                            }
                        }
                        if vals[i].is_none() {
                            if let Some(v) = vals[rf[i].unwrap()].clone() {
                                vals[i] = Some(v);
                                changed = true;
                            }
                        }
                    }
                }
            }
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let (thread, index, is_write, _, order, dest) = self.events[i].clone();
            let loc = locs[i].clone()?;
            let value = vals[i].clone()?;
            if !is_write && self.events[rf[i].unwrap()].3.as_deref() != Some(loc.as_str()) {
                return None;
            }
            out.push(ExecEvent { thread, index, is_write, loc, value, order, dest });
        }
        Some(out)
    }
}

/// All permutations of `items` in lexicographic order of positions.
pub(crate) fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Visits (rf, events, mo) bases; each base is later paired with every scord.
fn for_each_base(
    sh: &Shape,
    mut f: impl FnMut(&[Option<usize>], &[ExecEvent], &[(String, Vec<usize>)]) -> bool,
) {
    let n = sh.events.len();
    let mut idx = vec![0usize; sh.loads.len()];
    let mo_sets: Vec<Vec<Vec<usize>>> = sh
        .writes_by_loc
        .iter()
        .map(|ws| {
            permutations(&ws[1..])
                .into_iter()
                .map(|mut p| {
                    p.insert(0, ws[0]);
                    p
                })
                .collect()
        })
        .collect();
    loop {
        let mut rf = vec![None; n];
        for (k, &l) in sh.loads.iter().enumerate() {
            rf[l] = Some(sh.rf_choices[k][idx[k]]);
        }
        if sh.rf_choices.iter().all(|c| !c.is_empty()) {
            if let Some(events) = sh.resolve(&rf) {
                let mut mi = vec![0usize; mo_sets.len()];
                loop {
                    let mo: Vec<(String, Vec<usize>)> = sh
                        .locations
                        .iter()
                        .zip(&mo_sets)
                        .zip(&mi)
                        .map(|((l, s), &i)| (l.clone(), s[i].clone()))
                        .collect();
                    if !f(&rf, &events, &mo) {
                        return;
                    }
                    if !advance(&mut mi, |k| mo_sets[k].len()) {
                        break;
                    }
                }
            }
        }
        if !advance(&mut idx, |k| sh.rf_choices[k].len()) {
            return;
        }
    }
}

/// Odometer increment with the last digit fastest; false once wrapped.
fn advance(idx: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < radix(k) {
            return true;
        }
        idx[k] = 0;
    }
    false
}

pub fn enumerate_candidates(test: &LitmusTest) -> Result<Vec<CandidateExecution>, C11Error> {
    enumerate_candidates_capped(test, DEFAULT_CANDIDATE_CAP)
}

pub fn enumerate_candidates_capped(test: &LitmusTest, cap: u64) -> Result<Vec<CandidateExecution>, C11Error> {
    let sh = shape(test)?;
    let space = sh.space();
    if space > cap {
        return Err(C11Error::CandidateCap { found: space, cap });
    }
    let scords = permutations(&sh.sc);
    let mut out = Vec::new();
    for_each_base(&sh, |rf, events, mo| {
        for s in &scords {
            out.push(CandidateExecution { events: events.to_vec(), rf: rf.to_vec(), mo: mo.to_vec(), scord: s.clone() });
        }
        true
    });
    Ok(out)
}

// ===== Verdicts =====

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HllVerdict {
    pub target: Expect,
    pub outcomes: BTreeSet<Outcome>,
    pub witness: Option<CandidateExecution>,
}

pub fn eval_hll(test: &LitmusTest) -> Result<HllVerdict, C11Error> {
    eval_hll_capped(test, DEFAULT_CANDIDATE_CAP)
}

pub fn eval_hll_capped(test: &LitmusTest, cap: u64) -> Result<HllVerdict, C11Error> {
    let sh = shape(test)?;
    let space = sh.space();
    if space > cap {
        return Err(C11Error::CandidateCap { found: space, cap });
    }
    let scords = permutations(&sh.sc);
    let mut outcomes = BTreeSet::new();
    let mut witness = None;
    for_each_base(&sh, |rf, events, mo| {
        for s in &scords {
            let x = CandidateExecution { events: events.to_vec(), rf: rf.to_vec(), mo: mo.to_vec(), scord: s.clone() };
            if check_consistent(&x).passed() {
                let o = x.outcome();
                if witness.is_none() && o.satisfies(&test.cond) {
                    witness = Some(x);
                }
                outcomes.insert(o);
                break;
            }
        }
        true
    });
    let target = if witness.is_some() { Expect::Permitted } else { Expect::Forbidden };
    Ok(HllVerdict { target, outcomes, witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litmus::parse_litmus;

    fn t(src: &str) -> LitmusTest {
        parse_litmus(src).unwrap()
    }

    #[test]
    fn store_and_load_two_candidates() {
        let x = t("test a\nlocations x=0\nthread T0 { st(x,1,rlx) }\nthread T1 { r0 = ld(x,rlx) }");
        assert_eq!(enumerate_candidates(&x).unwrap().len(), 2);
    }

    #[test]
    fn empty_test_one_candidate() {
        let x = t("test e\nlocations\n");
        let c = enumerate_candidates(&x).unwrap();
        assert_eq!(c.len(), 1);
        assert!(check_consistent(&c[0]).passed());
    }

    #[test]
    fn init_only_passes() {
        let x = t("test i\nlocations x=0 y=0\n");
        let c = enumerate_candidates(&x).unwrap();
        assert!(check_consistent(&c[0]).passed());
    }

    #[test]
    fn cap_is_reported() {
        let x = t("test a\nlocations x=0\nthread T0 { st(x,1,sc); st(x,2,sc) }\nthread T1 { r0 = ld(x,sc) }");
        assert!(matches!(eval_hll_capped(&x, 3), Err(C11Error::CandidateCap { .. })));
    }

    #[test]
    fn wrc_release_acquire_fails_cowr() {
        let x = t("test WRC
locations x=0 y=0
thread T0 { st(x, 1, rlx) }
thread T1 { r0 = ld(x, rlx); st(y, 1, rel) }
thread T2 { r1 = ld(y, acq); r2 = ld(x, rlx) }
exists (r0=1 /\\ r1=1 /\\ r2=0)");
        let target: Vec<_> = enumerate_candidates(&x)
            .unwrap()
            .into_iter()
            .filter(|c| c.outcome().satisfies(&x.cond))
            .collect();
        assert!(!target.is_empty());
        for c in &target {
            assert!(!check_consistent(c).passed());
        }
        assert_eq!(eval_hll(&x).unwrap().target, Expect::Forbidden);
    }

    #[test]
    fn sb_relaxed_permitted() {
        let x = t("test SB
locations x=0 y=0
thread T0 { st(x,1,rlx); r0 = ld(y,rlx) }
thread T1 { st(y,1,rlx); r1 = ld(x,rlx) }
exists (r0=0 /\\ r1=0)");
        let v = eval_hll(&x).unwrap();
        assert_eq!(v.target, Expect::Permitted);
        assert!(check_consistent(v.witness.as_ref().unwrap()).passed());
    }
}
