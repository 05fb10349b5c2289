//! HLL litmus tests: the intermediate representation, a text format and
//! template expansion over memory-order permutations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

// ===== Orders =====

/// C11 memory order of an atomic access (consume is not modelled).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MemOrder {
    Rlx,
    Acq,
    Rel,
    Sc,
}

impl MemOrder {
    pub const LOAD_DOMAIN: [MemOrder; 3] = [MemOrder::Rlx, MemOrder::Acq, MemOrder::Sc];
    pub const STORE_DOMAIN: [MemOrder; 3] = [MemOrder::Rlx, MemOrder::Rel, MemOrder::Sc];

    pub fn as_str(self) -> &'static str {
        match self {
            MemOrder::Rlx => "rlx",
            MemOrder::Acq => "acq",
            MemOrder::Rel => "rel",
            MemOrder::Sc => "sc",
        }
    }

    pub fn parse(s: &str) -> Option<MemOrder> {
        match s {
            "rlx" => Some(MemOrder::Rlx),
            "acq" => Some(MemOrder::Acq),
            "rel" => Some(MemOrder::Rel),
            "sc" => Some(MemOrder::Sc),
            _ => None,
        }
    }

    pub fn valid_on_load(self) -> bool {
        self != MemOrder::Rel
    }

    pub fn valid_on_store(self) -> bool {
        self != MemOrder::Acq
    }

    pub fn is_acquire(self) -> bool {
        matches!(self, MemOrder::Acq | MemOrder::Sc)
    }

    pub fn is_release(self) -> bool {
        matches!(self, MemOrder::Rel | MemOrder::Sc)
    }
}

impl fmt::Display for MemOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Order annotation in a skeleton: either fixed or a named template slot.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrderSpec {
    Fixed(MemOrder),
    Slot(String),
}

// ===== Values and events =====

/// Runtime value: a small integer or the address of a location.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Loc(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Loc(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueExpr {
    Int(i64),
    Reg(String),
    Loc(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Addr {
    Loc(String),
    Reg(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind<O> {
    Load { addr: Addr, order: O, dest: String },
    Store { loc: String, order: O, value: ValueExpr },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event<O> {
    pub thread: usize,
    pub index: usize,
    pub kind: EventKind<O>,
}

pub type HllEvent = Event<MemOrder>;

impl<O> Event<O> {
    pub fn order(&self) -> &O {
        match &self.kind {
            EventKind::Load { order, .. } | EventKind::Store { order, .. } => order,
        }
    }

    pub fn is_load(&self) -> bool {
        matches!(self.kind, EventKind::Load { .. })
    }

    pub fn dest(&self) -> Option<&str> {
        match &self.kind {
            EventKind::Load { dest, .. } => Some(dest),
            EventKind::Store { .. } => None,
        }
    }
}

// ===== Final conditions =====

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CondLhs {
    Reg { thread: usize, name: String },
    Mem(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CondAtom {
    pub lhs: CondLhs,
    pub rhs: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expect {
    Permitted,
    Forbidden,
}

// ===== Tests and templates =====

/// A litmus program whose order annotations have type `O`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Litmus<O> {
    pub name: String,
    /// Locations in declaration order with their initial values.
    pub locations: Vec<(String, i64)>,
    pub threads: Vec<Vec<Event<O>>>,
    /// Conjunction of equalities; empty means `true`.
    pub cond: Vec<CondAtom>,
    pub expect: Option<Expect>,
}

pub type LitmusTest = Litmus<MemOrder>;

impl<O> Litmus<O> {
    pub fn events(&self) -> impl Iterator<Item = &Event<O>> {
        self.threads.iter().flatten()
    }

    pub fn has_location(&self, loc: &str) -> bool {
        self.locations.iter().any(|(l, _)| l == loc)
    }

    pub fn initial(&self, loc: &str) -> Option<i64> {
        self.locations.iter().find(|(l, _)| l == loc).map(|(_, v)| *v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotClass {
    LoadSlot,
    StoreSlot,
}

impl SlotClass {
    pub fn domain(self) -> [MemOrder; 3] {
        match self {
            SlotClass::LoadSlot => MemOrder::LOAD_DOMAIN,
            SlotClass::StoreSlot => MemOrder::STORE_DOMAIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LitmusTemplate {
    pub skeleton: Litmus<OrderSpec>,
    /// Slots in order of first appearance.
    pub slots: Vec<(String, SlotClass)>,
}

// ===== Outcomes =====

/// Final state of one execution: every register and every location.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome {
    pub regs: BTreeMap<(usize, String), Value>,
    pub mem: BTreeMap<String, Value>,
}

impl Outcome {
    pub fn satisfies(&self, cond: &[CondAtom]) -> bool {
        cond.iter().all(|a| {
            let v = match &a.lhs {
                CondLhs::Reg { thread, name } => self.regs.get(&(*thread, name.clone())),
                CondLhs::Mem(l) => self.mem.get(l),
            };
            v == Some(&a.rhs)
        })
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.regs.iter().map(|((t, r), v)| format!("T{t}:{r}={v}")).collect();
        parts.extend(self.mem.iter().map(|(l, v)| format!("{l}={v}")));
        f.write_str(&parts.join(" "))
    }
}

// ===== Errors =====

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LitmusError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared location `{0}`")]
    UndeclaredLocation(String),
    #[error("undeclared register `{0}`")]
    UndeclaredRegister(String),
    #[error("ambiguous register `{0}` in condition; qualify it as T<n>:{0}")]
    AmbiguousRegister(String),
    #[error("register `{0}` assigned twice in one thread")]
    DuplicateRegister(String),
    #[error("{0} invalid on {1}")]
    OrderKind(String, &'static str),
    #[error("slot `@{0}` used more than once")]
    DuplicateSlot(String),
    #[error("unfilled order slot `@{0}`")]
    UnfilledSlot(String),
}

fn kind_error(order: MemOrder, load: bool) -> LitmusError {
    let name = match order {
        MemOrder::Rlx => "Rlx",
        MemOrder::Acq => "Acq",
        MemOrder::Rel => "Rel",
        MemOrder::Sc => "Sc",
    };
    LitmusError::OrderKind(name.to_string(), if load { "load" } else { "store" })
}

// ===== Validation =====

/// Checks the structural invariants shared by tests and skeletons.
pub fn validate<O>(t: &Litmus<O>, order_ok: impl Fn(&O, bool) -> Result<(), LitmusError>) -> Result<(), LitmusError> {
    let mut seen_locs = BTreeSet::new();
    for (l, _) in &t.locations {
        if !seen_locs.insert(l.as_str()) {
            return Err(LitmusError::Syntax { line: 0, col: 0, msg: format!("location `{l}` declared twice") });
        }
    }
    for (tid, thread) in t.threads.iter().enumerate() {
        let mut regs: BTreeSet<&str> = BTreeSet::new();
        for (idx, ev) in thread.iter().enumerate() {
            if ev.thread != tid || ev.index != idx {
                return Err(LitmusError::Syntax { line: 0, col: 0, msg: format!("event position mismatch at T{tid}[{idx}]") });
            }
            let use_reg = |r: &str, regs: &BTreeSet<&str>| {
                if regs.contains(r) { Ok(()) } else { Err(LitmusError::UndeclaredRegister(r.to_string())) }
            };
            match &ev.kind {
                EventKind::Load { addr, order, dest } => {
                    order_ok(order, true)?;
                    match addr {
                        Addr::Loc(l) if !t.has_location(l) => return Err(LitmusError::UndeclaredLocation(l.clone())),
                        Addr::Reg(r) => use_reg(r, &regs)?,
                        _ => {}
                    }
                    if !regs.insert(dest.as_str()) {
                        return Err(LitmusError::DuplicateRegister(dest.clone()));
                    }
                }
                EventKind::Store { loc, order, value } => {
                    order_ok(order, false)?;
                    if !t.has_location(loc) {
                        return Err(LitmusError::UndeclaredLocation(loc.clone()));
                    }
                    match value {
                        ValueExpr::Reg(r) => use_reg(r, &regs)?,
                        ValueExpr::Loc(l) if !t.has_location(l) => {
                            return Err(LitmusError::UndeclaredLocation(l.clone()))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    for atom in &t.cond {
        match &atom.lhs {
            CondLhs::Reg { thread, name } => {
                let declared = t
                    .threads
                    .get(*thread)
                    .is_some_and(|th| th.iter().any(|e| e.dest() == Some(name.as_str())));
                if !declared {
                    return Err(LitmusError::UndeclaredRegister(name.clone()));
                }
            }
            CondLhs::Mem(l) if !t.has_location(l) => return Err(LitmusError::UndeclaredLocation(l.clone())),
            _ => {}
        }
        if let Value::Loc(l) = &atom.rhs {
            if !t.has_location(l) {
                return Err(LitmusError::UndeclaredLocation(l.clone()));
            }
        }
    }
    Ok(())
}

pub fn validate_test(t: &LitmusTest) -> Result<(), LitmusError> {
    validate(t, |o, load| {
        let ok = if load { o.valid_on_load() } else { o.valid_on_store() };
        if ok { Ok(()) } else { Err(kind_error(*o, load)) }
    })
}

// ===== Lexer =====

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCTS: [&str; 10] = ["/\\", "(", ")", "{", "}", ",", ";", "=", "@", ":"];

fn lex(text: &str) -> Result<Vec<Token>, LitmusError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let code = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = code.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '-' || chars[i] == '.') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: line_no, col });
                continue;
            }
            if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<i64>().map_err(|e| LitmusError::Syntax { line: line_no, col, msg: e.to_string() })?;
                out.push(Token { tok: Tok::Int(v), line: line_no, col });
                continue;
            }
            let rest: String = chars[i..].iter().take(2).collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    out.push(Token { tok: Tok::Punct(p), line: line_no, col });
                    i += p.len();
                }
                None => {
                    return Err(LitmusError::Syntax { line: line_no, col, msg: format!("unexpected character `{c}`") })
                }
            }
        }
    }
    Ok(out)
}

// ===== Parser =====

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn err(&self, msg: impl Into<String>) -> LitmusError {
        let (line, col) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self.toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1)),
        };
        LitmusError::Syntax { line, col, msg: msg.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn punct(&mut self, p: &str) -> Result<(), LitmusError> {
        match self.peek() {
            Some(Tok::Punct(q)) if *q == p => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{p}`"))),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == k)
    }

    fn ident(&mut self) -> Result<String, LitmusError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn keyword(&mut self, k: &str) -> Result<(), LitmusError> {
        if self.is_keyword(k) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected `{k}`")))
        }
    }

    fn int(&mut self) -> Result<i64, LitmusError> {
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.err("expected integer")),
        }
    }

    fn order(&mut self) -> Result<OrderSpec, LitmusError> {
        if self.is_punct("@") {
            self.pos += 1;
            let id = match self.next() {
                Some(Tok::Ident(s)) => s,
                Some(Tok::Int(v)) => v.to_string(),
                _ => return Err(self.err("expected slot id after `@`")),
            };
            return Ok(OrderSpec::Slot(id));
        }
        let s = self.ident()?;
        MemOrder::parse(&s).map(OrderSpec::Fixed).ok_or_else(|| {
            self.pos -= 1;
            self.err(format!("unknown memory order `{s}`"))
        })
    }

    fn event(&mut self, thread: usize, index: usize, locs: &BTreeSet<String>) -> Result<Event<OrderSpec>, LitmusError> {
        if self.is_keyword("st") {
            self.pos += 1;
            self.punct("(")?;
            let loc = self.ident()?;
            self.punct(",")?;
            let value = match self.peek() {
                Some(Tok::Int(_)) => ValueExpr::Int(self.int()?),
                Some(Tok::Ident(_)) => {
                    let n = self.ident()?;
                    if locs.contains(&n) { ValueExpr::Loc(n) } else { ValueExpr::Reg(n) }
                }
                _ => return Err(self.err("expected store value")),
            };
            self.punct(",")?;
            let order = self.order()?;
            self.punct(")")?;
            return Ok(Event { thread, index, kind: EventKind::Store { loc, order, value } });
        }
        let dest = self.ident()?;
        self.punct("=")?;
        self.keyword("ld")?;
        self.punct("(")?;
        let a = self.ident()?;
        let addr = if locs.contains(&a) { Addr::Loc(a) } else { Addr::Reg(a) };
        self.punct(",")?;
        let order = self.order()?;
        self.punct(")")?;
        Ok(Event { thread, index, kind: EventKind::Load { addr, order, dest } })
    }

    fn cond_atom(&mut self, locs: &BTreeSet<String>, threads: &[Vec<Event<OrderSpec>>]) -> Result<CondAtom, LitmusError> {
        let first = self.ident()?;
        let lhs = if self.is_punct(":") {
            self.pos += 1;
            let tid = first
                .strip_prefix('T')
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(|| self.err(format!("bad thread qualifier `{first}`")))?;
            let name = self.ident()?;
            CondLhs::Reg { thread: tid, name }
        } else if locs.contains(&first) {
            CondLhs::Mem(first)
        } else {
            let owners: Vec<usize> = threads
                .iter()
                .enumerate()
                .filter(|(_, th)| th.iter().any(|e| e.dest() == Some(first.as_str())))
                .map(|(i, _)| i)
                .collect();
            match owners.as_slice() {
                [t] => CondLhs::Reg { thread: *t, name: first },
                [] => return Err(LitmusError::UndeclaredRegister(first)),
                _ => return Err(LitmusError::AmbiguousRegister(first)),
            }
        };
        self.punct("=")?;
        let rhs = match self.peek() {
            Some(Tok::Int(_)) => Value::Int(self.int()?),
            Some(Tok::Ident(_)) => {
                let n = self.ident()?;
                if !locs.contains(&n) {
                    return Err(LitmusError::UndeclaredLocation(n));
                }
                Value::Loc(n)
            }
            _ => return Err(self.err("expected value")),
        };
        Ok(CondAtom { lhs, rhs })
    }

    fn program(&mut self) -> Result<Litmus<OrderSpec>, LitmusError> {
        self.keyword("test")?;
        let name = self.ident()?;
        let mut locations = Vec::new();
        if self.is_keyword("locations") {
            self.pos += 1;
            while matches!(self.peek(), Some(Tok::Ident(s)) if !is_section(s)) {
                let l = self.ident()?;
                self.punct("=")?;
                let v = self.int()?;
                locations.push((l, v));
            }
        }
        let locs: BTreeSet<String> = locations.iter().map(|(l, _)| l.clone()).collect();
        let mut threads = Vec::new();
        while self.is_keyword("thread") {
            self.pos += 1;
            let tid_name = self.ident()?;
            let expected = format!("T{}", threads.len());
            if tid_name != expected {
                self.pos -= 1;
                return Err(self.err(format!("expected thread `{expected}`")));
            }
            self.punct("{")?;
            let tid = threads.len();
            let mut evs = Vec::new();
            while !self.is_punct("}") {
                evs.push(self.event(tid, evs.len(), &locs)?);
                if !self.is_punct("}") {
                    self.punct(";")?;
                }
            }
            self.punct("}")?;
            threads.push(evs);
        }
        let mut cond = Vec::new();
        if self.is_keyword("exists") {
            self.pos += 1;
            self.punct("(")?;
            if !self.is_punct(")") {
                cond.push(self.cond_atom(&locs, &threads)?);
                while self.is_punct("/\\") {
                    self.pos += 1;
                    cond.push(self.cond_atom(&locs, &threads)?);
                }
            }
            self.punct(")")?;
        }
        let mut expect = None;
        if self.is_keyword("expect") {
            self.pos += 1;
            expect = Some(match self.ident()?.as_str() {
                "permitted" => Expect::Permitted,
                "forbidden" => Expect::Forbidden,
                other => {
                    self.pos -= 1;
                    return Err(self.err(format!("expected `permitted` or `forbidden`, found `{other}`")));
                }
            });
        }
        if self.pos < self.toks.len() {
            return Err(self.err("unexpected trailing input"));
        }
        Ok(Litmus { name, locations, threads, cond, expect })
    }
}

fn is_section(s: &str) -> bool {
    matches!(s, "thread" | "exists" | "expect")
}

/// Parses either a concrete test or a template skeleton.
pub fn parse_skeleton(text: &str) -> Result<Litmus<OrderSpec>, LitmusError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let sk = p.program()?;
    validate(&sk, |o, load| match o {
        OrderSpec::Fixed(m) => {
            let ok = if load { m.valid_on_load() } else { m.valid_on_store() };
            if ok { Ok(()) } else { Err(kind_error(*m, load)) }
        }
        OrderSpec::Slot(_) => Ok(()),
    })?;
    Ok(sk)
}

pub fn parse_litmus(text: &str) -> Result<LitmusTest, LitmusError> {
    let sk = parse_skeleton(text)?;
    instantiate(&sk, &BTreeMap::new())
}

/// Parses a template file; slots are collected in order of first appearance.
pub fn parse_template(text: &str) -> Result<LitmusTemplate, LitmusError> {
    let skeleton = parse_skeleton(text)?;
    template_from_skeleton(skeleton)
}

pub fn template_from_skeleton(skeleton: Litmus<OrderSpec>) -> Result<LitmusTemplate, LitmusError> {
    let mut slots: Vec<(String, SlotClass)> = Vec::new();
    for ev in skeleton.events() {
        if let OrderSpec::Slot(id) = ev.order() {
            if slots.iter().any(|(s, _)| s == id) {
                return Err(LitmusError::DuplicateSlot(id.clone()));
            }
            let class = if ev.is_load() { SlotClass::LoadSlot } else { SlotClass::StoreSlot };
            slots.push((id.clone(), class));
        }
    }
    Ok(LitmusTemplate { skeleton, slots })
}

fn instantiate(sk: &Litmus<OrderSpec>, fill: &BTreeMap<&str, MemOrder>) -> Result<LitmusTest, LitmusError> {
    let resolve = |o: &OrderSpec| match o {
        OrderSpec::Fixed(m) => Ok(*m),
        OrderSpec::Slot(id) => fill.get(id.as_str()).copied().ok_or_else(|| LitmusError::UnfilledSlot(id.clone())),
    };
    let mut threads = Vec::with_capacity(sk.threads.len());
    for th in &sk.threads {
        let mut evs = Vec::with_capacity(th.len());
        for ev in th {
            let kind = match &ev.kind {
                EventKind::Load { addr, order, dest } => {
                    EventKind::Load { addr: addr.clone(), order: resolve(order)?, dest: dest.clone() }
                }
                EventKind::Store { loc, order, value } => {
                    EventKind::Store { loc: loc.clone(), order: resolve(order)?, value: value.clone() }
                }
            };
            evs.push(Event { thread: ev.thread, index: ev.index, kind });
        }
        threads.push(evs);
    }
    let t = Litmus {
        name: sk.name.clone(),
        locations: sk.locations.clone(),
        threads,
        cond: sk.cond.clone(),
        expect: sk.expect,
    };
    validate_test(&t)?;
    Ok(t)
}

// ===== Rendering =====

fn render_generic<O>(t: &Litmus<O>, order: impl Fn(&O) -> String) -> String {
    let mut s = format!("test {}\n", t.name);
    s.push_str("locations");
    for (l, v) in &t.locations {
        s.push_str(&format!(" {l}={v}"));
    }
    s.push('\n');
    for (tid, th) in t.threads.iter().enumerate() {
        let body: Vec<String> = th
            .iter()
            .map(|ev| match &ev.kind {
                EventKind::Load { addr, order: o, dest } => {
                    let a = match addr {
                        Addr::Loc(l) | Addr::Reg(l) => l,
                    };
                    format!("{dest} = ld({a}, {})", order(o))
                }
                EventKind::Store { loc, order: o, value } => {
                    let v = match value {
                        ValueExpr::Int(i) => i.to_string(),
                        ValueExpr::Reg(r) | ValueExpr::Loc(r) => r.clone(),
                    };
                    format!("st({loc}, {v}, {})", order(o))
                }
            })
            .collect();
        if body.is_empty() {
            s.push_str(&format!("thread T{tid} {{ }}\n"));
        } else {
            s.push_str(&format!("thread T{tid} {{ {} }}\n", body.join("; ")));
        }
    }
    if !t.cond.is_empty() {
        let atoms: Vec<String> = t
            .cond
            .iter()
            .map(|a| {
                let lhs = match &a.lhs {
                    CondLhs::Reg { thread, name } => {
                        let owners = t.threads.iter().filter(|th| th.iter().any(|e| e.dest() == Some(name.as_str()))).count();
                        if owners == 1 { name.clone() } else { format!("T{thread}:{name}") }
                    }
                    CondLhs::Mem(l) => l.clone(),
                };
                format!("{lhs}={}", a.rhs)
            })
            .collect();
        s.push_str(&format!("exists ({})\n", atoms.join(" /\\ ")));
    }
    match t.expect {
        Some(Expect::Permitted) => s.push_str("expect permitted\n"),
        Some(Expect::Forbidden) => s.push_str("expect forbidden\n"),
        None => {}
    }
    s
}

pub fn render_litmus(t: &LitmusTest) -> String {
    render_generic(t, |o| o.as_str().to_string())
}

pub fn render_template(tpl: &LitmusTemplate) -> String {
    render_generic(&tpl.skeleton, |o| match o {
        OrderSpec::Fixed(m) => m.as_str().to_string(),
        OrderSpec::Slot(id) => format!("@{id}"),
    })
}

// ===== Templates =====

/// Expands every slot over its domain; the first slot varies slowest.
pub fn expand_template(tpl: &LitmusTemplate) -> Vec<LitmusTest> {
    let n = tpl.slots.len();
    let total = 3usize.pow(n as u32);
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut digits = vec![0usize; n];
        let mut rem = k;
        for d in digits.iter_mut().rev() {
            *d = rem % 3;
            rem /= 3;
        }
        let mut fill = BTreeMap::new();
        let mut suffix = String::new();
        for ((id, class), d) in tpl.slots.iter().zip(&digits) {
            let o = class.domain()[*d];
            fill.insert(id.as_str(), o);
            suffix.push('_');
            suffix.push_str(o.as_str());
        }
        let mut t = instantiate(&tpl.skeleton, &fill).expect("well-formed template");
        t.name = format!("{}{}", tpl.skeleton.name, suffix);
        out.push(t);
    }
    out
}

/// Per-slot orders of an expanded variant, in slot order.
pub fn variant_orders(tpl: &LitmusTemplate, t: &LitmusTest) -> Vec<MemOrder> {
    let mut out = Vec::new();
    for (sk_ev, ev) in tpl.skeleton.events().zip(t.events()) {
        if let OrderSpec::Slot(_) = sk_ev.order() {
            out.push(*ev.order());
        }
    }
    out
}

const BUILTIN: &[(&str, &str)] = &[
    (
        "WRC",
        "test WRC
locations x=0 y=0
thread T0 { st(x, 1, @a) }
thread T1 { r0 = ld(x, @b); st(y, 1, @c) }
thread T2 { r1 = ld(y, @d); r2 = ld(x, @e) }
exists (r0=1 /\\ r1=1 /\\ r2=0)
",
    ),
    (
        "IRIW",
        "test IRIW
locations x=0 y=0
thread T0 { st(x, 1, @a) }
thread T1 { st(y, 1, @b) }
thread T2 { r0 = ld(x, @c); r1 = ld(y, @d) }
thread T3 { r2 = ld(y, @e); r3 = ld(x, @f) }
exists (r0=1 /\\ r1=0 /\\ r2=1 /\\ r3=0)
",
    ),
    (
        "RWC",
        "test RWC
locations x=0 y=0
thread T0 { st(x, 1, @a) }
thread T1 { r0 = ld(x, @b); r1 = ld(y, @c) }
thread T2 { st(y, 1, @d); r2 = ld(x, @e) }
exists (r0=1 /\\ r1=0 /\\ r2=0)
",
    ),
    (
        "CoRR",
        "test CoRR
locations x=0
thread T0 { st(x, 1, @a); st(x, 2, @b) }
thread T1 { r0 = ld(x, @c); r1 = ld(x, @d) }
exists (r0=2 /\\ r1=1)
",
    ),
    (
        "CO-RSDWI",
        "test CO-RSDWI
locations x=0
thread T0 { st(x, 1, @a); st(x, 2, @b) }
thread T1 { st(x, 3, @c) }
thread T2 { r0 = ld(x, @d); r1 = ld(x, @e) }
exists (r0=2 /\\ r1=1)
",
    ),
    (
        "MP-RM",
        "test MP-RM
locations x=0 y=0
thread T0 { st(x, 1, @a); st(y, 1, @b) }
thread T1 { r0 = ld(y, @c); r1 = ld(x, @d) }
exists (r0=1 /\\ r1=0)
",
    ),
    (
        "MP-LZ",
        "test MP-LZ
locations x=0 y=0
thread T0 { st(x, 1, @a); st(y, x, @b) }
thread T1 { r0 = ld(y, @c); r1 = ld(r0, @d) }
exists (r0=x /\\ r1=0)
",
    ),
    (
        "SB",
        "test SB
locations x=0 y=0
thread T0 { st(x, 1, @a); r0 = ld(y, @b) }
thread T1 { st(y, 1, @c); r1 = ld(x, @d) }
exists (r0=0 /\\ r1=0)
",
    ),
];

pub fn builtin_suite() -> BTreeMap<String, LitmusTemplate> {
    BUILTIN
        .iter()
        .map(|(name, src)| (name.to_string(), parse_template(src).expect("builtin template parses")))
        .collect()
}

/// Suite names in their canonical reporting order.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const WRC_SRC: &str = "test WRC
locations x=0 y=0
thread T0 { st(x, 1, rlx) }
thread T1 { r0 = ld(x, rlx); st(y, 1, rel) }
thread T2 { r1 = ld(y, acq); r2 = ld(x, rlx) }
exists (r0=1 /\\ r1=1 /\\ r2=0)
expect forbidden
";

    #[test]
    fn parses_wrc() {
        let t = parse_litmus(WRC_SRC).unwrap();
        assert_eq!(t.threads.len(), 3);
        let orders: Vec<MemOrder> = t.events().map(|e| *e.order()).collect();
        use MemOrder::*;
        assert_eq!(orders, vec![Rlx, Rlx, Rel, Acq, Rlx]);
        assert_eq!(t.expect, Some(Expect::Forbidden));
    }

    #[test]
    fn minimal_single_thread() {
        let t = parse_litmus("test one\nlocations x=0\nthread T0 { st(x,1,rlx) }\nexists (x=1)").unwrap();
        assert_eq!(t.threads.len(), 1);
        assert_eq!(t.cond[0].lhs, CondLhs::Mem("x".into()));
    }

    #[test]
    fn rel_on_load_rejected() {
        let e = parse_litmus("test bad\nlocations x=0\nthread T0 { r0 = ld(x, rel) }").unwrap_err();
        assert_eq!(e.to_string(), "Rel invalid on load");
    }

    #[test]
    fn syntax_error_has_position() {
        let e = parse_litmus("test bad\nlocations x=0\nthread T0 { st(x 1, rlx) }").unwrap_err();
        assert!(matches!(e, LitmusError::Syntax { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn undeclared_location_rejected() {
        let e = parse_litmus("test bad\nlocations x=0\nthread T0 { st(z, 1, rlx) }").unwrap_err();
        assert_eq!(e, LitmusError::UndeclaredLocation("z".into()));
    }

    #[test]
    fn round_trip_and_empty() {
        let t = parse_litmus(WRC_SRC).unwrap();
        assert_eq!(parse_litmus(&render_litmus(&t)).unwrap(), t);
        let empty = LitmusTest { name: "e".into(), locations: vec![], threads: vec![], cond: vec![], expect: None };
        assert_eq!(parse_litmus(&render_litmus(&empty)).unwrap(), empty);
    }

    #[test]
    fn builtin_counts() {
        let s = builtin_suite();
        let counts: Vec<(&str, usize)> = vec![
            ("WRC", 243),
            ("IRIW", 729),
            ("RWC", 243),
            ("CoRR", 81),
            ("CO-RSDWI", 243),
            ("MP-RM", 81),
            ("MP-LZ", 81),
            ("SB", 81),
        ];
        for (n, c) in counts {
            assert_eq!(expand_template(&s[n]).len(), c, "{n}");
        }
    }

    #[test]
    fn zero_slot_template() {
        let tpl = parse_template(WRC_SRC).unwrap();
        let v = expand_template(&tpl);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].threads, parse_litmus(WRC_SRC).unwrap().threads);
    }

    #[test]
    fn variant_names_and_order() {
        let v = expand_template(&builtin_suite()["WRC"]);
        assert_eq!(v[0].name, "WRC_rlx_rlx_rlx_rlx_rlx");
        assert_eq!(v[1].name, "WRC_rlx_rlx_rlx_rlx_acq");
        assert_eq!(v[242].name, "WRC_sc_sc_sc_sc_sc");
    }

    #[test]
    fn mp_lz_has_address_dependency() {
        let tpl = &builtin_suite()["MP-LZ"];
        let t1 = &tpl.skeleton.threads[1];
        match &t1[1].kind {
            EventKind::Load { addr: Addr::Reg(r), .. } => assert_eq!(Some(r.as_str()), t1[0].dest()),
            k => panic!("unexpected {k:?}"),
        }
    }
}
