//! Incremental maintenance: DRed, DRed^c, B/F and B/F^c.
//!
//! All four algorithms maintain every counter the state tracks, whether or not
//! they consult it, so a state can be updated by any of them in turn.

use std::fmt;
use std::io;
use std::ops::ControlFlow;
use std::str::FromStr;
use std::time::{Duration, Instant};

use indexmap::IndexSet;
use rustc_hash::FxBuildHasher;

use crate::error::EngineError;
use crate::eval::{for_each_instance, EvalCtx, MatchSpec, View};
use crate::model::{Fact, Program, Value};
use crate::parser::Delta;
use crate::store::{CounterKind, CounterMap, CounterMode, EngineState, FactSet};

type FactQueue = IndexSet<Fact, FxBuildHasher>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Dred,
    DredC,
    Bf,
    BfC,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Dred, Algorithm::DredC, Algorithm::Bf, Algorithm::BfC];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dred => "dred",
            Algorithm::DredC => "dredc",
            Algorithm::Bf => "bf",
            Algorithm::BfC => "bfc",
        }
    }

    /// The counters the algorithm consults.
    pub fn required_counters(self) -> CounterMode {
        match self {
            Algorithm::Dred | Algorithm::Bf => CounterMode::None,
            Algorithm::DredC => CounterMode::Both,
            Algorithm::BfC => CounterMode::Nonrecursive,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected dred, dredc, bf or bfc)"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Overdelete,
    Rederive,
    Insert,
    Check,
    Saturate,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Overdelete => "overdelete",
            Phase::Rederive => "rederive",
            Phase::Insert => "insert",
            Phase::Check => "check",
            Phase::Saturate => "saturate",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Work done by one phase in one stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseStats {
    pub stratum: u32,
    pub phase: Phase,
    /// Rule instances fired forwards.
    pub instances: u64,
    /// Stored facts inspected while evaluating rules backwards.
    pub backward_candidates: u64,
    /// Facts added to the deleted set.
    pub deleted: u64,
    /// Facts added to the added set.
    pub added: u64,
    pub wall: Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub rows: Vec<PhaseStats>,
}

impl UpdateStats {
    pub fn instances(&self) -> u64 {
        self.rows.iter().map(|r| r.instances).sum()
    }

    pub fn backward_candidates(&self) -> u64 {
        self.rows.iter().map(|r| r.backward_candidates).sum()
    }

    pub fn phase_instances(&self, phase: Phase) -> u64 {
        self.rows.iter().filter(|r| r.phase == phase).map(|r| r.instances).sum()
    }

    pub fn phase_backward_candidates(&self, phase: Phase) -> u64 {
        self.rows.iter().filter(|r| r.phase == phase).map(|r| r.backward_candidates).sum()
    }

    pub fn wall(&self) -> Duration {
        self.rows.iter().map(|r| r.wall).sum()
    }

    pub const CSV_HEADER: &'static str = "algo,stratum,phase,instances,backward_candidates,deleted,added,wall_ms";

    /// One CSV row per phase, without header.
    pub fn write_csv(&self, algo: &str, out: &mut dyn io::Write) -> io::Result<()> {
        for r in &self.rows {
            writeln!(
                out,
                "{algo},{},{},{},{},{},{},{:.3}",
                r.stratum,
                r.phase,
                r.instances,
                r.backward_candidates,
                r.deleted,
                r.added,
                r.wall.as_secs_f64() * 1000.0
            )?;
        }
        Ok(())
    }
}

/// Outcome of one update.
#[derive(Clone, Debug)]
pub struct UpdateReport {
    pub algorithm: Algorithm,
    pub stats: UpdateStats,
    /// Facts put into the deleted set, in order.
    pub overdeleted: Vec<Fact>,
    /// Overdeleted facts found to hold by one-step rederivation.
    pub rederived: Vec<Fact>,
    /// Facts put into the added set, in order.
    pub added: Vec<Fact>,
    /// Facts no longer in the materialisation.
    pub removed: Vec<Fact>,
    /// Facts new to the materialisation.
    pub inserted: Vec<Fact>,
}

/// Receives forward rule firings and phase boundaries during an update.
pub trait Observer {
    fn fired(&mut self, _stratum: u32, _phase: Phase, _rule: usize, _subst: &[Value]) {}
    fn phase_done(&mut self, _stratum: u32, _phase: Phase, _counters: &CounterMap) {}
}

impl Observer for () {}

/// Drops deletions of non-explicit facts, insertions of explicit facts, and
/// facts both deleted and inserted.
pub fn normalize_delta(state: &EngineState, delta: &Delta) -> Delta {
    let deletions = delta
        .deletions
        .iter()
        .filter(|f| state.explicit.contains(f) && !delta.insertions.contains(*f))
        .cloned()
        .collect();
    let insertions = delta.insertions.iter().filter(|f| !state.explicit.contains(f)).cloned().collect();
    Delta { deletions, insertions }
}

impl EngineState {
    pub fn update(&mut self, algorithm: Algorithm, delta: &Delta) -> Result<UpdateReport, EngineError> {
        self.update_with(algorithm, delta, &mut ())
    }

    /// Applies `delta` with `algorithm`.
    ///
    /// A counter underflow or overflow leaves the state poisoned: every later
    /// update fails until the state is rematerialised.
    pub fn update_with(
        &mut self,
        algorithm: Algorithm,
        delta: &Delta,
        observer: &mut dyn Observer,
    ) -> Result<UpdateReport, EngineError> {
        if self.poisoned {
            return Err(EngineError::Poisoned);
        }
        let needed = algorithm.required_counters();
        if self.counters.mode() < needed {
            return Err(EngineError::CountersUnavailable {
                algorithm: algorithm.name(),
                needed: needed.name(),
                available: self.counters.mode().name(),
            });
        }
        for f in &delta.insertions {
            self.check_fact(f)?;
        }
        let mut arities = indexmap::IndexMap::new();
        for f in &delta.insertions {
            crate::model::check_arity(&mut arities, f.pred, f.args.len())?;
        }
        let delta = normalize_delta(self, delta);
        let result = run(self, algorithm, &delta, observer);
        if result.is_err() {
            self.poisoned = true;
        }
        result
    }
}

pub fn dred_update(state: &mut EngineState, delta: &Delta) -> Result<UpdateReport, EngineError> {
    state.update(Algorithm::Dred, delta)
}

pub fn dredc_update(state: &mut EngineState, delta: &Delta) -> Result<UpdateReport, EngineError> {
    state.update(Algorithm::DredC, delta)
}

pub fn bf_update(state: &mut EngineState, delta: &Delta) -> Result<UpdateReport, EngineError> {
    state.update(Algorithm::Bf, delta)
}

pub fn bfc_update(state: &mut EngineState, delta: &Delta) -> Result<UpdateReport, EngineError> {
    state.update(Algorithm::BfC, delta)
}

#[derive(Clone, Copy)]
enum Adjust {
    Increment,
    Decrement,
    Keep,
}

/// Which views a forward application runs over.
#[derive(Clone, Copy)]
enum Over<'x> {
    /// `I` with affected `D\A`, `A\D`.
    OldAffected,
    /// `I\(D\A)`, `I∪A` with affected `Δ`.
    Surviving(&'x FactSet),
    /// `(I\D)∪A` with affected `A\D`, `D\A`.
    NewAffected,
    /// `(I\D)∪A` with affected `Δ`.
    New(&'x FactSet),
    /// `P ∪ (Out<s ∩ I\(D\A))`, `I∪A` with affected `Δ`.
    Proved(&'x FactSet, &'x FactSet),
}

struct Update<'u> {
    algorithm: Algorithm,
    program: &'u Program,
    stratum: u32,
    facts: &'u FactSet,
    explicit: &'u FactSet,
    deletions: &'u FactSet,
    counters: &'u mut CounterMap,
    observer: &'u mut dyn Observer,
    ctx: EvalCtx,
    d: FactSet,
    a: FactSet,
    stats: UpdateStats,
    current: Option<(PhaseStats, Instant)>,
    overdeleted: Vec<Fact>,
    rederived: Vec<Fact>,
    added: Vec<Fact>,
}

fn run(
    state: &mut EngineState,
    algorithm: Algorithm,
    delta: &Delta,
    observer: &mut dyn Observer,
) -> Result<UpdateReport, EngineError> {
    let program = std::sync::Arc::clone(&state.program);
    let strat = program.stratification();
    let deletions: FactSet = delta.deletions.iter().collect();
    let mut by_stratum_del: Vec<Vec<Fact>> = vec![Vec::new(); strat.max_stratum() as usize + 1];
    let mut by_stratum_ins: Vec<Vec<Fact>> = vec![Vec::new(); strat.max_stratum() as usize + 1];
    for f in &delta.deletions {
        by_stratum_del[strat.stratum_of(f.pred) as usize].push(f.clone());
    }
    for f in &delta.insertions {
        by_stratum_ins[strat.stratum_of(f.pred) as usize].push(f.clone());
    }
    let mut up = Update {
        algorithm,
        program: &program,
        stratum: 0,
        facts: &state.facts,
        explicit: &state.explicit,
        deletions: &deletions,
        counters: &mut state.counters,
        observer,
        ctx: EvalCtx::new(),
        d: FactSet::new(),
        a: FactSet::new(),
        stats: UpdateStats::default(),
        current: None,
        overdeleted: Vec::new(),
        rederived: Vec::new(),
        added: Vec::new(),
    };
    if !delta.is_empty() {
        for s in strat.strata() {
            up.stratum = s;
            let (del, ins) = (&by_stratum_del[s as usize], &by_stratum_ins[s as usize]);
            match algorithm {
                Algorithm::Dred | Algorithm::DredC => {
                    up.overdelete(del)?;
                    let r = up.rederive()?;
                    up.insert(r, ins)?;
                }
                Algorithm::Bf | Algorithm::BfC => {
                    up.delete_unproved(del)?;
                    up.insert(Vec::new(), ins)?;
                }
            }
        }
    }
    let Update { d, a, stats, overdeleted, rederived, added, .. } = up;
    let removed: Vec<Fact> = overdeleted.iter().filter(|f| !a.contains(f)).cloned().collect();
    let inserted: Vec<Fact> = added.iter().filter(|f| !d.contains(f)).cloned().collect();
    for f in &removed {
        state.facts.remove(f);
        state.counters.remove(f);
    }
    for f in &inserted {
        state.facts.insert(f);
    }
    for f in &delta.deletions {
        state.explicit.remove(f);
    }
    for f in &delta.insertions {
        state.explicit.insert(f);
    }
    Ok(UpdateReport { algorithm, stats, overdeleted, rederived, added, removed, inserted })
}

impl Update<'_> {
    fn begin(&mut self, phase: Phase) {
        debug_assert!(self.current.is_none());
        let row = PhaseStats {
            stratum: self.stratum,
            phase,
            instances: 0,
            backward_candidates: 0,
            deleted: 0,
            added: 0,
            wall: Duration::ZERO,
        };
        self.current = Some((row, Instant::now()));
    }

    fn end(&mut self) {
        let (mut row, start) = self.current.take().expect("phase not started");
        row.wall = start.elapsed();
        self.observer.phase_done(row.stratum, row.phase, self.counters);
        let same = self
            .stats
            .rows
            .iter_mut()
            .rev()
            .take_while(|r| r.stratum == row.stratum)
            .find(|r| r.phase == row.phase);
        match same {
            Some(r) => {
                r.instances += row.instances;
                r.backward_candidates += row.backward_candidates;
                r.deleted += row.deleted;
                r.added += row.added;
                r.wall += row.wall;
            }
            None => self.stats.rows.push(row),
        }
    }

    fn row(&mut self) -> &mut PhaseStats {
        &mut self.current.as_mut().expect("phase not started").0
    }

    fn rules(&self, recursive: bool) -> &[usize] {
        let r = self.program.stratification().rules(self.stratum);
        if recursive {
            &r.recursive
        } else {
            &r.nonrecursive
        }
    }

    /// Fires the recursive or nonrecursive rules of the current stratum and
    /// returns one head per instance, adjusting the matching counter.
    fn fire(&mut self, recursive: bool, over: Over<'_>, adjust: Adjust) -> Result<Vec<Fact>, EngineError> {
        let rules: &[usize] = {
            let r = self.program.stratification().rules(self.stratum);
            if recursive {
                &r.recursive
            } else {
                &r.nonrecursive
            }
        };
        if rules.is_empty() {
            return Ok(Vec::new());
        }
        let kind = if recursive { CounterKind::Recursive } else { CounterKind::Nonrecursive };
        let (facts, d, a) = (self.facts, &self.d, &self.a);
        let i = || View::Set(facts);
        let d_minus_a = || View::Set(d).minus(View::Set(a));
        let a_minus_d = || View::Set(a).minus(View::Set(d));
        let new = || i().minus(View::Set(d)).union(View::Set(a));
        let strat = self.program.stratification();
        let spec = match over {
            Over::OldAffected => MatchSpec::affected(i(), i(), d_minus_a(), a_minus_d()),
            Over::Surviving(delta) => MatchSpec::affected(
                i().minus(d_minus_a()),
                i().union(View::Set(a)),
                View::Set(delta),
                View::Empty,
            ),
            Over::NewAffected => MatchSpec::affected(new(), new(), a_minus_d(), d_minus_a()),
            Over::New(delta) => MatchSpec::affected(new(), new(), View::Set(delta), View::Empty),
            Over::Proved(p, delta) => MatchSpec::affected(
                View::Set(p).union(i().minus(d_minus_a()).below(strat, self.stratum)),
                i().union(View::Set(a)),
                View::Set(delta),
                View::Empty,
            ),
        };
        let (stratum, phase) = (self.stratum, self.current.as_ref().expect("phase not started").0.phase);
        let counters = &mut *self.counters;
        let observer = &mut *self.observer;
        let mut out = Vec::new();
        let mut err = None;
        for &r in rules {
            let rule = self.program.rule(r);
            for_each_instance(&self.ctx, rule, &spec, None, &mut |s| {
                observer.fired(stratum, phase, r, s);
                let head = rule.head.ground(s);
                let res = match adjust {
                    Adjust::Increment => counters.increment(&head, kind),
                    Adjust::Decrement => counters.decrement(&head, kind),
                    Adjust::Keep => Ok(()),
                };
                if let Err(e) = res {
                    err = Some(e);
                    return ControlFlow::Break(());
                }
                out.push(head);
                ControlFlow::Continue(())
            })?;
            if let Some(e) = err {
                return Err(e);
            }
        }
        let n = out.len() as u64;
        self.row().instances += n;
        Ok(out)
    }

    /// Whether some instance of the given rules derives `head` over the views,
    /// counting inspected facts as backward candidates.
    fn derivable(&mut self, rules: &[usize], head: &Fact, excluded: Option<&FactSet>) -> Result<bool, EngineError> {
        let (facts, d, a) = (self.facts, &self.d, &self.a);
        let mut gone = View::Set(d);
        if let Some(x) = excluded {
            gone = gone.union(View::Set(x));
        }
        let spec = MatchSpec::plain(
            View::Set(facts).minus(gone.minus(View::Set(a))),
            View::Set(facts).union(View::Set(a)),
        );
        let before = self.ctx.candidates();
        let mut found = false;
        for &r in rules {
            for_each_instance(&self.ctx, self.program.rule(r), &spec, Some(head), &mut |_| {
                found = true;
                ControlFlow::Break(())
            })?;
            if found {
                break;
            }
        }
        let used = self.ctx.candidates() - before;
        self.row().backward_candidates += used;
        Ok(found)
    }

    fn mark_deleted(&mut self, delta: &FactSet) {
        for f in delta.iter() {
            self.d.insert(&f);
            self.overdeleted.push(f);
        }
        self.row().deleted += delta.len() as u64;
    }

    fn overdelete(&mut self, del: &[Fact]) -> Result<(), EngineError> {
        self.begin(Phase::Overdelete);
        let gate = self.algorithm == Algorithm::DredC;
        let mut nd = FactQueue::default();
        for f in del {
            self.counters.decrement(f, CounterKind::Nonrecursive)?;
            nd.insert(f.clone());
        }
        nd.extend(self.fire(false, Over::OldAffected, Adjust::Decrement)?);
        nd.extend(self.fire(true, Over::OldAffected, Adjust::Decrement)?);
        loop {
            let delta: FactSet = nd
                .iter()
                .filter(|f| !self.d.contains(f) && (!gate || self.counters.get(f).nonrecursive == 0))
                .collect();
            if delta.is_empty() {
                break;
            }
            nd = self.fire(true, Over::Surviving(&delta), Adjust::Decrement)?.into_iter().collect();
            self.mark_deleted(&delta);
        }
        self.end();
        Ok(())
    }

    fn rederive(&mut self) -> Result<Vec<Fact>, EngineError> {
        self.begin(Phase::Rederive);
        let strat = self.program.stratification();
        let candidates: Vec<Fact> = self
            .overdeleted
            .iter()
            .filter(|f| strat.stratum_of(f.pred) == self.stratum)
            .cloned()
            .collect();
        let mut r = Vec::new();
        let all: Vec<usize> = strat.rules(self.stratum).all().collect();
        for f in candidates {
            let holds = match self.algorithm {
                Algorithm::DredC => self.counters.get(&f).recursive > 0,
                _ => {
                    (self.explicit.contains(&f) && !self.deletions.contains(&f))
                        || self.derivable(&all, &f, None)?
                }
            };
            if holds {
                r.push(f);
            }
        }
        self.rederived.extend(r.iter().cloned());
        self.end();
        Ok(r)
    }

    fn insert(&mut self, rederived: Vec<Fact>, ins: &[Fact]) -> Result<(), EngineError> {
        self.begin(Phase::Insert);
        let mut na: FactQueue = rederived.into_iter().collect();
        for f in ins {
            self.counters.increment(f, CounterKind::Nonrecursive)?;
            na.insert(f.clone());
        }
        na.extend(self.fire(false, Over::NewAffected, Adjust::Increment)?);
        na.extend(self.fire(true, Over::NewAffected, Adjust::Increment)?);
        loop {
            let delta: FactSet = na
                .iter()
                .filter(|f| !((self.facts.contains(f) && !self.d.contains(f)) || self.a.contains(f)))
                .collect();
            if delta.is_empty() {
                break;
            }
            for f in delta.iter() {
                self.a.insert(&f);
                self.added.push(f);
            }
            self.row().added += delta.len() as u64;
            na = self.fire(true, Over::New(&delta), Adjust::Increment)?.into_iter().collect();
        }
        self.end();
        Ok(())
    }

    fn delete_unproved(&mut self, del: &[Fact]) -> Result<(), EngineError> {
        self.begin(Phase::Overdelete);
        let mut nd = FactQueue::default();
        for f in del {
            self.counters.decrement(f, CounterKind::Nonrecursive)?;
            nd.insert(f.clone());
        }
        nd.extend(self.fire(false, Over::OldAffected, Adjust::Decrement)?);
        nd.extend(self.fire(true, Over::OldAffected, Adjust::Decrement)?);
        self.end();
        let mut bf = BfState::default();
        loop {
            let mut delta = FactSet::new();
            for f in &nd {
                if self.d.contains(f) {
                    continue;
                }
                self.check(f, &mut bf, &delta)?;
                if !bf.proved.contains(f) {
                    delta.insert(f);
                }
            }
            if delta.is_empty() {
                break;
            }
            self.begin(Phase::Overdelete);
            nd = self.fire(true, Over::Surviving(&delta), Adjust::Decrement)?.into_iter().collect();
            self.mark_deleted(&delta);
            self.end();
        }
        Ok(())
    }

    /// Searches for a derivation of `goal` in the new materialisation by
    /// backward chaining over recursive rules, recording proved facts in `bf`.
    fn check(&mut self, goal: &Fact, bf: &mut BfState, pending: &FactSet) -> Result<(), EngineError> {
        if bf.checked.contains(goal) {
            return Ok(());
        }
        if self.saturate(goal, bf)? {
            return Ok(());
        }
        let mut stack = vec![self.check_frame(goal, pending)?];
        while let Some(frame) = stack.last_mut() {
            if bf.proved.contains(&frame.fact) {
                stack.pop();
                continue;
            }
            let Some(next) = frame.goals.pop() else {
                stack.pop();
                continue;
            };
            if bf.checked.contains(&next) {
                continue;
            }
            if self.saturate(&next, bf)? {
                continue;
            }
            let frame = self.check_frame(&next, pending)?;
            stack.push(frame);
        }
        Ok(())
    }

    /// Body facts of the current stratum over all recursive instances deriving
    /// `fact`, in reverse visiting order.
    fn check_frame(&mut self, fact: &Fact, pending: &FactSet) -> Result<CheckFrame, EngineError> {
        self.begin(Phase::Check);
        let strat = self.program.stratification();
        let (facts, d, a) = (self.facts, &self.d, &self.a);
        let spec = MatchSpec::plain(
            View::Set(facts).minus(View::Set(d).union(View::Set(pending)).minus(View::Set(a))),
            View::Set(facts).union(View::Set(a)),
        );
        let before = self.ctx.candidates();
        let mut goals = Vec::new();
        let rules = self.rules(true);
        for &r in rules {
            let rule = self.program.rule(r);
            for_each_instance(&self.ctx, rule, &spec, Some(fact), &mut |s| {
                for atom in &rule.positive {
                    if strat.stratum_of(atom.pred) == self.stratum {
                        goals.push(atom.ground(s));
                    }
                }
                ControlFlow::Continue(())
            })?;
        }
        let used = self.ctx.candidates() - before;
        self.row().backward_candidates += used;
        self.end();
        goals.reverse();
        Ok(CheckFrame { fact: fact.clone(), goals })
    }

    fn saturate(&mut self, fact: &Fact, bf: &mut BfState) -> Result<bool, EngineError> {
        self.begin(Phase::Saturate);
        bf.checked.insert(fact);
        let base = bf.delayed.contains(fact)
            || match self.algorithm {
                Algorithm::BfC => self.counters.get(fact).nonrecursive > 0,
                _ => {
                    let nonrecursive: Vec<usize> = self.rules(false).to_vec();
                    (self.explicit.contains(fact) && !self.deletions.contains(fact))
                        || self.derivable(&nonrecursive, fact, None)?
                }
            };
        if !base {
            self.end();
            return Ok(false);
        }
        let mut np = vec![fact.clone()];
        loop {
            let mut delta = FactSet::new();
            for f in np {
                if bf.checked.contains(&f) {
                    if !bf.proved.contains(&f) {
                        delta.insert(&f);
                    }
                } else {
                    bf.delayed.insert(&f);
                }
            }
            if delta.is_empty() {
                break;
            }
            for f in delta.iter() {
                bf.proved.insert(&f);
            }
            np = self.fire(true, Over::Proved(&bf.proved, &delta), Adjust::Keep)?;
        }
        self.end();
        Ok(true)
    }
}

/// Checked, proved and delayed facts of one stratum.
#[derive(Default)]
struct BfState {
    checked: FactSet,
    proved: FactSet,
    delayed: FactSet,
}

struct CheckFrame {
    fact: Fact,
    goals: Vec<Fact>,
}
