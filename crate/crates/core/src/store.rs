//! Indexed fact storage, derivation counters and the engine state.

use std::cell::Cell;
use std::collections::hash_map::Entry;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashMap};

use crate::error::EngineError;
use crate::model::{Fact, ModelError, Program, Symbol, Tuple, Value};

const COMPACT_MIN_DEAD: usize = 64;

#[derive(Clone, Debug)]
struct Relation {
    arity: usize,
    rows: Vec<Option<Tuple>>,
    lookup: FxHashMap<Tuple, u32>,
    /// Per argument position: value -> row ids. May hold ids of removed rows.
    index: Vec<FxHashMap<Value, Vec<u32>>>,
    dead: usize,
}

impl Relation {
    fn new(arity: usize) -> Self {
        Relation {
            arity,
            rows: Vec::new(),
            lookup: FxHashMap::default(),
            index: vec![FxHashMap::default(); arity],
            dead: 0,
        }
    }

    fn len(&self) -> usize {
        self.lookup.len()
    }

    fn insert(&mut self, args: &[Value]) -> bool {
        if self.lookup.contains_key(args) {
            return false;
        }
        let id = self.rows.len() as u32;
        let tuple: Tuple = args.iter().copied().collect();
        for (pos, v) in args.iter().enumerate() {
            self.index[pos].entry(*v).or_default().push(id);
        }
        self.lookup.insert(tuple.clone(), id);
        self.rows.push(Some(tuple));
        true
    }

    fn remove(&mut self, args: &[Value]) -> bool {
        let Some(id) = self.lookup.remove(args) else {
            return false;
        };
        self.rows[id as usize] = None;
        self.dead += 1;
        if self.dead >= COMPACT_MIN_DEAD && self.dead > self.lookup.len() {
            self.compact();
        }
        true
    }

    fn compact(&mut self) {
        let rows = std::mem::take(&mut self.rows);
        self.lookup.clear();
        for m in &mut self.index {
            m.clear();
        }
        self.dead = 0;
        for t in rows.into_iter().flatten() {
            self.insert(&t);
        }
    }

    fn scan(
        &self,
        pattern: &[Option<Value>],
        candidates: &Cell<u64>,
        f: &mut dyn FnMut(&[Value]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if pattern.iter().all(Option::is_some) {
            let key: Tuple = pattern.iter().map(|v| v.unwrap()).collect();
            if let Some(&id) = self.lookup.get(&key) {
                candidates.set(candidates.get() + 1);
                return f(self.rows[id as usize].as_ref().unwrap());
            }
            return ControlFlow::Continue(());
        }
        // probe the most selective bound position
        let mut best: Option<&Vec<u32>> = None;
        for (pos, v) in pattern.iter().enumerate() {
            if let Some(v) = v {
                match self.index[pos].get(v) {
                    None => return ControlFlow::Continue(()),
                    Some(ids) if best.is_none_or(|b| ids.len() < b.len()) => best = Some(ids),
                    Some(_) => {}
                }
            }
        }
        let matches = |t: &[Value]| pattern.iter().zip(t).all(|(p, v)| p.is_none_or(|p| p == *v));
        match best {
            Some(ids) => {
                for &id in ids {
                    if let Some(t) = &self.rows[id as usize] {
                        candidates.set(candidates.get() + 1);
                        if matches(t) {
                            f(t)?;
                        }
                    }
                }
            }
            None => {
                for t in self.rows.iter().flatten() {
                    candidates.set(candidates.get() + 1);
                    f(t)?;
                }
            }
        }
        ControlFlow::Continue(())
    }
}

/// A set of facts with one hash index per argument position.
///
/// Iteration follows insertion order.
#[derive(Clone, Debug, Default)]
pub struct FactSet {
    relations: IndexMap<Symbol, Relation, FxBuildHasher>,
    len: usize,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Arity of a predicate, if any fact of it was ever stored here.
    pub fn arity(&self, pred: Symbol) -> Option<usize> {
        self.relations.get(&pred).map(|r| r.arity)
    }

    /// Inserts a fact; returns whether it was new.
    ///
    /// Panics if the predicate was previously used with another arity.
    pub fn insert_parts(&mut self, pred: Symbol, args: &[Value]) -> bool {
        let rel = self.relations.entry(pred).or_insert_with(|| Relation::new(args.len()));
        assert_eq!(rel.arity, args.len(), "arity mismatch for {pred}");
        let added = rel.insert(args);
        self.len += added as usize;
        added
    }

    pub fn insert(&mut self, fact: &Fact) -> bool {
        self.insert_parts(fact.pred, &fact.args)
    }

    pub fn remove_parts(&mut self, pred: Symbol, args: &[Value]) -> bool {
        let removed = self.relations.get_mut(&pred).is_some_and(|r| r.remove(args));
        self.len -= removed as usize;
        removed
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        self.remove_parts(fact.pred, &fact.args)
    }

    pub fn contains_parts(&self, pred: Symbol, args: &[Value]) -> bool {
        self.relations.get(&pred).is_some_and(|r| r.lookup.contains_key(args))
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.contains_parts(fact.pred, &fact.args)
    }

    /// Number of facts of one predicate.
    pub fn relation_len(&self, pred: Symbol) -> usize {
        self.relations.get(&pred).map_or(0, Relation::len)
    }

    pub fn predicates(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.relations.keys().copied()
    }

    /// Visits every fact matching `pattern` (`None` is a wildcard) exactly once.
    ///
    /// `candidates` is increased by the number of stored facts inspected.
    pub fn scan(
        &self,
        pred: Symbol,
        pattern: &[Option<Value>],
        candidates: &Cell<u64>,
        f: &mut dyn FnMut(&[Value]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        match self.relations.get(&pred) {
            Some(rel) if rel.arity == pattern.len() => rel.scan(pattern, candidates, f),
            _ => ControlFlow::Continue(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Fact> + '_ {
        self.relations.iter().flat_map(|(&pred, rel)| {
            rel.rows.iter().flatten().map(move |t| Fact { pred, args: t.clone() })
        })
    }

    pub fn to_sorted_vec(&self) -> Vec<Fact> {
        let mut v: Vec<Fact> = self.iter().collect();
        v.sort();
        v
    }
}

impl PartialEq for FactSet {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.iter().all(|f| other.contains(&f))
    }
}

impl Eq for FactSet {}

impl<'a> FromIterator<&'a Fact> for FactSet {
    fn from_iter<T: IntoIterator<Item = &'a Fact>>(iter: T) -> Self {
        let mut s = FactSet::new();
        for f in iter {
            s.insert(f);
        }
        s
    }
}

impl FromIterator<Fact> for FactSet {
    fn from_iter<T: IntoIterator<Item = Fact>>(iter: T) -> Self {
        let mut s = FactSet::new();
        for f in iter {
            s.insert(&f);
        }
        s
    }
}

/// Which derivation counters a state maintains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CounterMode {
    None,
    Nonrecursive,
    Both,
}

impl CounterMode {
    pub fn name(self) -> &'static str {
        match self {
            CounterMode::None => "none",
            CounterMode::Nonrecursive => "nr",
            CounterMode::Both => "both",
        }
    }
}

impl fmt::Display for CounterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CounterKind {
    Nonrecursive,
    Recursive,
}

/// Nonrecursive and recursive derivation counts of one fact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Counts {
    pub nonrecursive: u64,
    pub recursive: u64,
}

impl Counts {
    pub const fn new(nonrecursive: u64, recursive: u64) -> Counts {
        Counts { nonrecursive, recursive }
    }

    pub fn is_zero(&self) -> bool {
        self.nonrecursive == 0 && self.recursive == 0
    }

    fn masked(self, mode: CounterMode) -> Counts {
        match mode {
            CounterMode::None => Counts::default(),
            CounterMode::Nonrecursive => Counts::new(self.nonrecursive, 0),
            CounterMode::Both => self,
        }
    }
}

impl fmt::Display for Counts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.nonrecursive, self.recursive)
    }
}

/// Fact -> derivation counts. Absent facts read as `(0,0)`.
#[derive(Clone, Debug)]
pub struct CounterMap {
    mode: CounterMode,
    counts: FxHashMap<Fact, Counts>,
}

impl CounterMap {
    pub fn new(mode: CounterMode) -> Self {
        CounterMap { mode, counts: FxHashMap::default() }
    }

    pub fn mode(&self) -> CounterMode {
        self.mode
    }

    pub fn tracks(&self, kind: CounterKind) -> bool {
        match kind {
            CounterKind::Nonrecursive => self.mode >= CounterMode::Nonrecursive,
            CounterKind::Recursive => self.mode == CounterMode::Both,
        }
    }

    pub fn get(&self, fact: &Fact) -> Counts {
        self.counts.get(fact).copied().unwrap_or_default()
    }

    pub fn increment(&mut self, fact: &Fact, kind: CounterKind) -> Result<(), EngineError> {
        self.increment_entry(fact, kind).map(|_| ())
    }

    /// Increments and reports whether `fact` had no entry before; `None` if `kind` is untracked.
    pub(crate) fn increment_entry(&mut self, fact: &Fact, kind: CounterKind) -> Result<Option<bool>, EngineError> {
        if !self.tracks(kind) {
            return Ok(None);
        }
        let (c, fresh) = match self.counts.entry(fact.clone()) {
            Entry::Occupied(e) => (e.into_mut(), false),
            Entry::Vacant(e) => (e.insert(Counts::default()), true),
        };
        let slot = match kind {
            CounterKind::Nonrecursive => &mut c.nonrecursive,
            CounterKind::Recursive => &mut c.recursive,
        };
        *slot = slot
            .checked_add(1)
            .ok_or_else(|| EngineError::CounterOverflow { fact: fact.to_string() })?;
        Ok(Some(fresh))
    }

    pub fn decrement(&mut self, fact: &Fact, kind: CounterKind) -> Result<(), EngineError> {
        if !self.tracks(kind) {
            return Ok(());
        }
        let underflow = || EngineError::CounterUnderflow { fact: fact.to_string() };
        let c = self.counts.get_mut(fact).ok_or_else(underflow)?;
        let slot = match kind {
            CounterKind::Nonrecursive => &mut c.nonrecursive,
            CounterKind::Recursive => &mut c.recursive,
        };
        *slot = slot.checked_sub(1).ok_or_else(underflow)?;
        Ok(())
    }

    pub fn remove(&mut self, fact: &Fact) {
        self.counts.remove(fact);
    }

    pub fn set(&mut self, fact: Fact, counts: Counts) {
        let counts = counts.masked(self.mode);
        if counts.is_zero() {
            self.counts.remove(&fact);
        } else {
            self.counts.insert(fact, counts);
        }
    }

    /// Nonzero entries.
    pub fn iter(&self) -> impl Iterator<Item = (&Fact, Counts)> {
        self.counts.iter().filter(|(_, c)| !c.is_zero()).map(|(f, c)| (f, *c))
    }

    /// Facts whose counts differ, compared on the counters both maps track.
    pub fn differences(&self, other: &CounterMap) -> Vec<CounterMismatch> {
        let mode = self.mode.min(other.mode);
        let mut out = Vec::new();
        let mut seen = rustc_hash::FxHashSet::default();
        for (f, _) in self.iter().chain(other.iter()) {
            if !seen.insert(f.clone()) {
                continue;
            }
            let expected = other.get(f).masked(mode);
            let actual = self.get(f).masked(mode);
            if expected != actual {
                out.push(CounterMismatch { fact: f.clone(), expected, actual });
            }
        }
        out.sort_by(|a, b| a.fact.cmp(&b.fact));
        out
    }
}

impl PartialEq for CounterMap {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode && self.differences(other).is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterMismatch {
    pub fact: Fact,
    pub expected: Counts,
    pub actual: Counts,
}

/// Program, explicit facts, their materialisation and derivation counters.
#[derive(Clone, Debug)]
pub struct EngineState {
    pub(crate) program: Arc<Program>,
    pub(crate) explicit: FactSet,
    pub(crate) facts: FactSet,
    pub(crate) counters: CounterMap,
    pub(crate) poisoned: bool,
}

impl EngineState {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn shared_program(&self) -> Arc<Program> {
        Arc::clone(&self.program)
    }

    /// Explicit facts `E`.
    pub fn explicit(&self) -> &FactSet {
        &self.explicit
    }

    /// The materialisation `I`.
    pub fn facts(&self) -> &FactSet {
        &self.facts
    }

    pub fn counters(&self) -> &CounterMap {
        &self.counters
    }

    pub fn counter_mode(&self) -> CounterMode {
        self.counters.mode
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    pub(crate) fn check_fact(&self, fact: &Fact) -> Result<(), ModelError> {
        self.program.check_fact(fact)?;
        match self.facts.arity(fact.pred) {
            Some(n) if n != fact.args.len() => Err(ModelError::Arity {
                pred: fact.pred.to_string(),
                expected: n,
                found: fact.args.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Test hook: drops a fact from the materialisation without maintenance.
    #[doc(hidden)]
    pub fn corrupt_remove(&mut self, fact: &Fact) -> bool {
        self.facts.remove(fact)
    }

    /// Test hook: overwrites a counter without maintenance.
    #[doc(hidden)]
    pub fn corrupt_counter(&mut self, fact: Fact, counts: Counts) {
        self.counters.set(fact, counts);
    }
}

/// Recomputes derivation counters from scratch over the current materialisation.
///
/// Each fact of stratum `s` counts one nonrecursive derivation for membership in
/// `E` plus one per firing instance of a nonrecursive rule of stratum `s`, and
/// one recursive derivation per firing instance of a recursive rule of `s`.
pub fn recount_counters(state: &EngineState) -> Result<CounterMap, EngineError> {
    let mut counters = CounterMap::new(CounterMode::Both);
    for f in state.explicit.iter() {
        counters.increment(&f, CounterKind::Nonrecursive)?;
    }
    let program = &*state.program;
    let strat = program.stratification();
    let ctx = crate::eval::EvalCtx::new();
    let view = crate::eval::View::Set(&state.facts);
    let spec = crate::eval::MatchSpec::plain(view.clone(), view);
    for (i, rule) in program.rules().iter().enumerate() {
        let kind = if strat.is_recursive(i) { CounterKind::Recursive } else { CounterKind::Nonrecursive };
        let mut err = Ok(());
        crate::eval::for_each_instance(&ctx, rule, &spec, None, &mut |subst| {
            if let Err(e) = counters.increment(&rule.head.ground(subst), kind) {
                err = Err(e);
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        })?;
        err?;
    }
    Ok(counters)
}
