//! Rule-instance enumeration over composed fact views, body planning and
//! semi-naive materialisation.

use std::cell::Cell;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::Arc;

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use smallvec::SmallVec;

use crate::error::EngineError;
use crate::model::{
    Atom, ExprValue, Fact, ModelError, Program, Rule, RuleInstance, Stratification, Symbol, Term,
    Value, VarId,
};
use crate::store::{CounterKind, CounterMap, CounterMode, EngineState, FactSet};

/// Shared evaluation context. Counts every stored fact inspected by index probes.
#[derive(Debug, Default)]
pub struct EvalCtx {
    candidates: Cell<u64>,
}

impl EvalCtx {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn candidates(&self) -> u64 {
        self.candidates.get()
    }
}

/// A set of facts defined by set operations over stored fact sets.
///
/// Views are never materialised: membership and matching are answered by
/// consulting the underlying sets.
#[derive(Clone)]
pub enum View<'a> {
    Empty,
    Set(&'a FactSet),
    Union(Box<View<'a>>, Box<View<'a>>),
    Minus(Box<View<'a>>, Box<View<'a>>),
    /// Facts of the inner view whose predicate lies in a stratum below the given one.
    Below(Box<View<'a>>, &'a Stratification, u32),
}

impl<'a> View<'a> {
    pub fn set(s: &'a FactSet) -> Self {
        View::Set(s)
    }

    pub fn union(self, other: View<'a>) -> Self {
        View::Union(Box::new(self), Box::new(other))
    }

    pub fn minus(self, other: View<'a>) -> Self {
        View::Minus(Box::new(self), Box::new(other))
    }

    pub fn below(self, strat: &'a Stratification, stratum: u32) -> Self {
        View::Below(Box::new(self), strat, stratum)
    }

    pub fn contains_parts(&self, pred: Symbol, args: &[Value]) -> bool {
        match self {
            View::Empty => false,
            View::Set(s) => s.contains_parts(pred, args),
            View::Union(a, b) => a.contains_parts(pred, args) || b.contains_parts(pred, args),
            View::Minus(a, b) => a.contains_parts(pred, args) && !b.contains_parts(pred, args),
            View::Below(a, strat, s) => strat.stratum_of(pred) < *s && a.contains_parts(pred, args),
        }
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.contains_parts(fact.pred, &fact.args)
    }

    /// An upper bound on the number of facts of `pred` in the view.
    pub fn estimate(&self, pred: Symbol) -> usize {
        match self {
            View::Empty => 0,
            View::Set(s) => s.relation_len(pred),
            View::Union(a, b) => a.estimate(pred) + b.estimate(pred),
            View::Minus(a, _) => a.estimate(pred),
            View::Below(a, strat, s) => {
                if strat.stratum_of(pred) < *s {
                    a.estimate(pred)
                } else {
                    0
                }
            }
        }
    }

    /// Visits each fact of the view matching `pattern` once.
    pub fn scan(
        &self,
        pred: Symbol,
        pattern: &[Option<Value>],
        candidates: &Cell<u64>,
        f: &mut dyn FnMut(&[Value]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        match self {
            View::Empty => ControlFlow::Continue(()),
            View::Set(s) => s.scan(pred, pattern, candidates, f),
            View::Union(a, b) => {
                a.scan(pred, pattern, candidates, f)?;
                b.scan(pred, pattern, candidates, &mut |t| {
                    if a.contains_parts(pred, t) {
                        ControlFlow::Continue(())
                    } else {
                        f(t)
                    }
                })
            }
            View::Minus(a, b) => a.scan(pred, pattern, candidates, &mut |t| {
                if b.contains_parts(pred, t) {
                    ControlFlow::Continue(())
                } else {
                    f(t)
                }
            }),
            View::Below(a, strat, s) => {
                if strat.stratum_of(pred) < *s {
                    a.scan(pred, pattern, candidates, f)
                } else {
                    ControlFlow::Continue(())
                }
            }
        }
    }
}

impl fmt::Debug for View<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            View::Empty => f.write_str("∅"),
            View::Set(s) => write!(f, "<{} facts>", s.len()),
            View::Union(a, b) => write!(f, "({a:?} ∪ {b:?})"),
            View::Minus(a, b) => write!(f, "({a:?} \\ {b:?})"),
            View::Below(a, _, s) => write!(f, "(Out<{s} ∩ {a:?})"),
        }
    }
}

/// Where positive and negative body atoms are evaluated, and optionally the
/// affected facts an instance must touch.
#[derive(Clone, Debug)]
pub struct MatchSpec<'a> {
    pub positive: View<'a>,
    pub negative: View<'a>,
    pub delta: Option<DeltaSpec<'a>>,
}

/// Affected facts: an instance qualifies if a positive body atom is in
/// `positive` or a negative body atom is in `negative`.
#[derive(Clone, Debug)]
pub struct DeltaSpec<'a> {
    pub positive: View<'a>,
    pub negative: View<'a>,
}

impl<'a> MatchSpec<'a> {
    pub fn plain(positive: View<'a>, negative: View<'a>) -> Self {
        MatchSpec { positive, negative, delta: None }
    }

    pub fn affected(
        positive: View<'a>,
        negative: View<'a>,
        delta_positive: View<'a>,
        delta_negative: View<'a>,
    ) -> Self {
        MatchSpec {
            positive,
            negative,
            delta: Some(DeltaSpec { positive: delta_positive, negative: delta_negative }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BodyAtom {
    Positive(usize),
    Negative(usize),
}

/// The fact view a matched atom draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Positive,
    /// Positive view minus the affected positive facts.
    PositiveUnaffected,
    AffectedPositive,
    AffectedNegative,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanStep {
    Match { atom: BodyAtom, source: Source },
    Builtin(usize),
    /// Negative atom check; `not_affected` also rejects affected negative facts.
    Absent { atom: usize, not_affected: bool },
}

/// Greedy left-to-right plan for a rule body with `bound` variables already bound.
///
/// Repeatedly picks the positive atom with the most bound argument positions,
/// breaking ties on the smaller `estimate` and then on textual order. Built-ins
/// are placed as soon as their expression variables are bound, negative atoms
/// once all their variables are bound.
pub fn plan_body(
    rule: &Rule,
    bound: &[VarId],
    estimate: &dyn Fn(&Atom) -> usize,
) -> Result<Vec<PlanStep>, EngineError> {
    let mut mask = vec![false; rule.var_count()];
    for v in bound {
        mask[v.index()] = true;
    }
    plan(rule, mask, None, &|i| estimate(&rule.positive[i]))
}

fn plan(
    rule: &Rule,
    mut bound: Vec<bool>,
    pivot: Option<BodyAtom>,
    estimate: &dyn Fn(usize) -> usize,
) -> Result<Vec<PlanStep>, EngineError> {
    let mut steps = Vec::with_capacity(rule.positive.len() + rule.negative.len() + rule.builtins.len() + 1);
    let mut pos_done = vec![false; rule.positive.len()];
    let mut neg_done = vec![false; rule.negative.len()];
    let mut bi_done = vec![false; rule.builtins.len()];
    let neg_pivot = match pivot {
        Some(BodyAtom::Negative(k)) => Some(k),
        _ => None,
    };
    let source_of = |i: usize| match pivot {
        Some(BodyAtom::Positive(p)) if i < p => Source::PositiveUnaffected,
        Some(BodyAtom::Positive(_)) => Source::Positive,
        Some(BodyAtom::Negative(_)) => Source::PositiveUnaffected,
        None => Source::Positive,
    };
    let bind = |atom: &Atom, bound: &mut Vec<bool>| {
        for v in atom.vars() {
            bound[v.index()] = true;
        }
    };

    match pivot {
        Some(BodyAtom::Positive(i)) => {
            steps.push(PlanStep::Match { atom: BodyAtom::Positive(i), source: Source::AffectedPositive });
            pos_done[i] = true;
            bind(&rule.positive[i], &mut bound);
        }
        Some(BodyAtom::Negative(k)) => {
            steps.push(PlanStep::Match { atom: BodyAtom::Negative(k), source: Source::AffectedNegative });
            bind(&rule.negative[k], &mut bound);
        }
        None => {}
    }

    let place_ready = |steps: &mut Vec<PlanStep>,
                       bound: &mut Vec<bool>,
                       neg_done: &mut Vec<bool>,
                       bi_done: &mut Vec<bool>| {
        loop {
            let mut changed = false;
            for (j, b) in rule.builtins.iter().enumerate() {
                if !bi_done[j] && b.expr_vars().iter().all(|v| bound[v.index()]) {
                    bi_done[j] = true;
                    bound[b.target.index()] = true;
                    steps.push(PlanStep::Builtin(j));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (k, a) in rule.negative.iter().enumerate() {
            if !neg_done[k] && a.vars().all(|v| bound[v.index()]) {
                neg_done[k] = true;
                let not_affected = neg_pivot.is_some_and(|p| k < p);
                steps.push(PlanStep::Absent { atom: k, not_affected });
            }
        }
    };

    place_ready(&mut steps, &mut bound, &mut neg_done, &mut bi_done);
    while let Some(next) = (0..rule.positive.len())
        .filter(|&i| !pos_done[i])
        .max_by(|&a, &b| {
            let score = |i: usize| {
                rule.positive[i]
                    .args
                    .iter()
                    .filter(|t| match t {
                        Term::Const(_) => true,
                        Term::Var(v) => bound[v.index()],
                    })
                    .count()
            };
            score(a)
                .cmp(&score(b))
                .then_with(|| estimate(b).cmp(&estimate(a)))
                .then_with(|| b.cmp(&a))
        })
    {
        pos_done[next] = true;
        steps.push(PlanStep::Match { atom: BodyAtom::Positive(next), source: source_of(next) });
        bind(&rule.positive[next], &mut bound);
        place_ready(&mut steps, &mut bound, &mut neg_done, &mut bi_done);
    }

    if bi_done.iter().any(|d| !d) {
        return Err(EngineError::UnboundBuiltin { rule: rule.to_string() });
    }
    if let Some(k) = neg_done.iter().position(|d| !d) {
        let var = rule.negative[k].vars().find(|v| !bound[v.index()]).unwrap();
        return Err(ModelError::Unsafe { rule: rule.to_string(), var: rule.vars[var.index()].to_string() }.into());
    }
    Ok(steps)
}

struct Binding {
    values: Vec<Value>,
    bound: Vec<bool>,
    error: Option<EngineError>,
}

impl Binding {
    fn new(n: usize) -> Self {
        Binding { values: vec![Value::Int(0); n], bound: vec![false; n], error: None }
    }

    fn get(&self, v: VarId) -> Option<Value> {
        self.bound[v.index()].then(|| self.values[v.index()])
    }

    fn pattern(&self, atom: &Atom) -> SmallVec<[Option<Value>; 4]> {
        atom.args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(*c),
                Term::Var(v) => self.get(*v),
            })
            .collect()
    }

    fn ground(&self, atom: &Atom) -> SmallVec<[Value; 4]> {
        atom.args
            .iter()
            .map(|t| match t {
                Term::Const(c) => *c,
                Term::Var(v) => self.values[v.index()],
            })
            .collect()
    }

    /// Binds `atom` to `fact`; returns false on a clash. Newly bound variables are appended to `newly`.
    fn unify(&mut self, atom: &Atom, args: &[Value], newly: &mut SmallVec<[usize; 4]>) -> bool {
        for (t, v) in atom.args.iter().zip(args) {
            match t {
                Term::Const(c) => {
                    if c != v {
                        return false;
                    }
                }
                Term::Var(x) => {
                    let x = x.index();
                    if self.bound[x] {
                        if self.values[x] != *v {
                            return false;
                        }
                    } else {
                        self.bound[x] = true;
                        self.values[x] = *v;
                        newly.push(x);
                    }
                }
            }
        }
        true
    }

    fn unbind(&mut self, newly: &[usize]) {
        for &x in newly {
            self.bound[x] = false;
        }
    }
}

struct Runner<'r, 'a> {
    ctx: &'r EvalCtx,
    rule: &'r Rule,
    spec: &'r MatchSpec<'a>,
    steps: Vec<PlanStep>,
}

impl Runner<'_, '_> {
    fn exec(
        &self,
        k: usize,
        b: &mut Binding,
        f: &mut dyn FnMut(&[Value]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        let Some(step) = self.steps.get(k) else {
            return f(&b.values);
        };
        match *step {
            PlanStep::Match { atom, source } => {
                let atom_ref = match atom {
                    BodyAtom::Positive(i) => &self.rule.positive[i],
                    BodyAtom::Negative(i) => &self.rule.negative[i],
                };
                let delta = self.spec.delta.as_ref();
                let (view, exclude) = match source {
                    Source::Positive => (&self.spec.positive, None),
                    Source::PositiveUnaffected => (&self.spec.positive, delta.map(|d| &d.positive)),
                    Source::AffectedPositive => (&delta.unwrap().positive, None),
                    Source::AffectedNegative => (&delta.unwrap().negative, None),
                };
                let pattern = b.pattern(atom_ref);
                let pred = atom_ref.pred;
                view.scan(pred, &pattern, &self.ctx.candidates, &mut |t| {
                    if exclude.is_some_and(|x| x.contains_parts(pred, t)) {
                        return ControlFlow::Continue(());
                    }
                    debug_assert!(
                        source != Source::AffectedPositive || self.spec.positive.contains_parts(pred, t),
                        "affected positive fact outside the positive view"
                    );
                    debug_assert!(
                        source != Source::AffectedNegative || !self.spec.negative.contains_parts(pred, t),
                        "affected negative fact inside the negative view"
                    );
                    let mut newly = SmallVec::new();
                    let r = if b.unify(atom_ref, t, &mut newly) {
                        self.exec(k + 1, b, f)
                    } else {
                        ControlFlow::Continue(())
                    };
                    b.unbind(&newly);
                    r
                })
            }
            PlanStep::Builtin(j) => {
                let builtin = &self.rule.builtins[j];
                let value = builtin.expr.eval(&|v| b.get(v));
                match value {
                    ExprValue::Int(x) => {
                        let target = builtin.target.index();
                        if b.bound[target] {
                            if b.values[target] == Value::Int(x) {
                                self.exec(k + 1, b, f)
                            } else {
                                ControlFlow::Continue(())
                            }
                        } else {
                            b.bound[target] = true;
                            b.values[target] = Value::Int(x);
                            let r = self.exec(k + 1, b, f);
                            b.bound[target] = false;
                            r
                        }
                    }
                    ExprValue::NotInteger => ControlFlow::Continue(()),
                    ExprValue::Overflow => {
                        b.error = Some(EngineError::ArithmeticOverflow { rule: self.rule.to_string() });
                        ControlFlow::Break(())
                    }
                }
            }
            PlanStep::Absent { atom, not_affected } => {
                let a = &self.rule.negative[atom];
                let args = b.ground(a);
                if self.spec.negative.contains_parts(a.pred, &args) {
                    return ControlFlow::Continue(());
                }
                if not_affected
                    && self.spec.delta.as_ref().is_some_and(|d| d.negative.contains_parts(a.pred, &args))
                {
                    return ControlFlow::Continue(());
                }
                self.exec(k + 1, b, f)
            }
        }
    }
}

/// Enumerates the instances of `rule` selected by `spec`, each exactly once.
///
/// With `head`, only instances deriving that fact are produced (the rule is
/// evaluated backwards). `f` receives the substitution indexed by [`VarId`]
/// and may stop the enumeration by breaking.
pub fn for_each_instance(
    ctx: &EvalCtx,
    rule: &Rule,
    spec: &MatchSpec<'_>,
    head: Option<&Fact>,
    f: &mut dyn FnMut(&[Value]) -> ControlFlow<()>,
) -> Result<(), EngineError> {
    let mut b = Binding::new(rule.var_count());
    if let Some(h) = head {
        let mut newly = SmallVec::new();
        if h.pred != rule.head.pred || h.args.len() != rule.head.args.len() || !b.unify(&rule.head, &h.args, &mut newly) {
            return Ok(());
        }
    }
    let mut pivots: SmallVec<[Option<BodyAtom>; 6]> = SmallVec::new();
    match &spec.delta {
        None => pivots.push(None),
        Some(d) => {
            for (i, a) in rule.positive.iter().enumerate() {
                if d.positive.estimate(a.pred) > 0 {
                    pivots.push(Some(BodyAtom::Positive(i)));
                }
            }
            for (k, a) in rule.negative.iter().enumerate() {
                if d.negative.estimate(a.pred) > 0 {
                    pivots.push(Some(BodyAtom::Negative(k)));
                }
            }
        }
    }
    for pivot in pivots {
        let estimate = |i: usize| {
            let a = &rule.positive[i];
            spec.positive.estimate(a.pred)
        };
        let steps = plan(rule, b.bound.clone(), pivot, &estimate)?;
        let runner = Runner { ctx, rule, spec, steps };
        let flow = runner.exec(0, &mut b, f);
        if let Some(e) = b.error.take() {
            return Err(e);
        }
        if flow.is_break() {
            break;
        }
    }
    Ok(())
}

/// Collects the instances of rule `index` of `program` selected by `spec`.
pub fn instances(
    ctx: &EvalCtx,
    program: &Program,
    index: usize,
    spec: &MatchSpec<'_>,
) -> Result<Vec<RuleInstance>, EngineError> {
    let mut out = Vec::new();
    for_each_instance(ctx, program.rule(index), spec, None, &mut |s| {
        out.push(RuleInstance { rule: index, subst: s.to_vec() });
        ControlFlow::Continue(())
    })?;
    Ok(out)
}

/// A multiset of facts with insertion-ordered iteration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactMultiset {
    counts: IndexMap<Fact, u64, FxBuildHasher>,
}

impl FactMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, fact: Fact, n: u64) {
        if n > 0 {
            *self.counts.entry(fact).or_default() += n;
        }
    }

    pub fn multiplicity(&self, fact: &Fact) -> u64 {
        self.counts.get(fact).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of occurrences.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Fact, u64)> {
        self.counts.iter().map(|(f, n)| (f, *n))
    }

    /// Multiset union (⊕): multiplicities add.
    pub fn sum(mut self, other: &FactMultiset) -> FactMultiset {
        for (f, n) in other.iter() {
            self.add(f.clone(), n);
        }
        self
    }

    /// Multiset difference (⊖): multiplicities subtract, dropping elements that reach zero.
    pub fn difference(mut self, other: &FactMultiset) -> FactMultiset {
        for (f, n) in other.iter() {
            if let Some(m) = self.counts.get_mut(f) {
                *m = m.saturating_sub(n);
                if *m == 0 {
                    self.counts.shift_remove(f);
                }
            }
        }
        self
    }

    pub fn to_set(&self) -> FactSet {
        self.counts.keys().collect()
    }
}

/// Heads of all selected instances of `rules`, one occurrence per instance.
pub fn apply_multi(
    ctx: &EvalCtx,
    rules: &[&Rule],
    spec: &MatchSpec<'_>,
) -> Result<FactMultiset, EngineError> {
    let mut out = FactMultiset::new();
    for rule in rules {
        for_each_instance(ctx, rule, spec, None, &mut |s| {
            out.add(rule.head.ground(s), 1);
            ControlFlow::Continue(())
        })?;
    }
    Ok(out)
}

/// Computes the materialisation of `program` over `explicit` stratum by stratum
/// with semi-naive evaluation, initialising the counters selected by `mode`.
pub fn materialise(
    program: impl Into<Arc<Program>>,
    explicit: &FactSet,
    mode: CounterMode,
) -> Result<EngineState, EngineError> {
    let program: Arc<Program> = program.into();
    let mut arities = IndexMap::new();
    for f in explicit.iter() {
        program.check_fact(&f)?;
        crate::model::check_arity(&mut arities, f.pred, f.args.len())?;
    }
    let mut facts = explicit.clone();
    let mut counters = CounterMap::new(mode);
    for f in explicit.iter() {
        counters.increment(&f, CounterKind::Nonrecursive)?;
    }
    let ctx = EvalCtx::new();
    let strat = program.stratification();
    for s in strat.strata() {
        let rules = strat.rules(s);
        let derived = fire_heads(&ctx, &program, &rules.nonrecursive, &MatchSpec::plain(View::Set(&facts), View::Set(&facts)), &mut counters, CounterKind::Nonrecursive, &facts)?;
        for h in &derived {
            facts.insert(h);
        }
        if rules.recursive.is_empty() {
            continue;
        }
        let heads = fire_heads(&ctx, &program, &rules.recursive, &MatchSpec::plain(View::Set(&facts), View::Set(&facts)), &mut counters, CounterKind::Recursive, &facts)?;
        let mut delta = FactSet::new();
        for h in &heads {
            if facts.insert(h) {
                delta.insert(h);
            }
        }
        while !delta.is_empty() {
            let spec = MatchSpec::affected(View::Set(&facts), View::Set(&facts), View::Set(&delta), View::Empty);
            let heads = fire_heads(&ctx, &program, &rules.recursive, &spec, &mut counters, CounterKind::Recursive, &facts)?;
            let mut next = FactSet::new();
            for h in &heads {
                if facts.insert(h) {
                    next.insert(h);
                }
            }
            delta = next;
        }
    }
    Ok(EngineState { program, explicit: explicit.clone(), facts, counters, poisoned: false })
}

/// Fires `rules`, counting each instance, and returns the heads not yet in `known`.
fn fire_heads(
    ctx: &EvalCtx,
    program: &Program,
    rules: &[usize],
    spec: &MatchSpec<'_>,
    counters: &mut CounterMap,
    kind: CounterKind,
    known: &FactSet,
) -> Result<Vec<Fact>, EngineError> {
    let mut out = Vec::new();
    let mut err = None;
    for &i in rules {
        let rule = program.rule(i);
        for_each_instance(ctx, rule, spec, None, &mut |s| {
            let head = rule.head.ground(s);
            // a counter entry exists exactly for facts of `known` and heads already returned
            let fresh = match counters.increment_entry(&head, kind) {
                Ok(Some(fresh)) => fresh,
                Ok(None) => !known.contains(&head),
                Err(e) => {
                    err = Some(e);
                    return ControlFlow::Break(());
                }
            };
            if fresh {
                out.push(head);
            }
            ControlFlow::Continue(())
        })?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_facts, parse_program};

    fn facts(text: &str) -> FactSet {
        parse_facts(text).unwrap().iter().collect()
    }

    fn fact(text: &str) -> Fact {
        parse_facts(text).unwrap().pop().unwrap()
    }

    const EX3_RULES: &str = "A(Y) :- A(X), B(X,Y).";
    const EX3_FACTS: &str = "A(a). A(b). A(d). B(a,c). B(b,c). B(c,d). B(d,e).";

    fn ex1(n: usize) -> (Program, FactSet) {
        let p = parse_program("S(Y1,Y2) :- R(X,Y1), R(X,Y2).").unwrap();
        let mut text = String::new();
        for i in 1..=n {
            text.push_str(&format!("R(a{i},b). R(a{i},c{i}). "));
        }
        (p, facts(&text))
    }

    #[test]
    fn delta_restricted_instance_of_reachability() {
        let state = materialise(parse_program(EX3_RULES).unwrap(), &facts(EX3_FACTS), CounterMode::Both).unwrap();
        let p = facts("A(a).");
        let spec = MatchSpec::affected(View::Set(state.facts()), View::Set(state.facts()), View::Set(&p), View::Empty);
        let got = instances(&EvalCtx::new(), state.program(), 0, &spec).unwrap();
        assert_eq!(got.len(), 1);
        let rule = state.program().rule(0);
        assert_eq!(rule.head.ground(&got[0].subst), fact("A(c)."));
    }

    #[test]
    fn empty_delta_yields_nothing() {
        let state = materialise(parse_program(EX3_RULES).unwrap(), &facts(EX3_FACTS), CounterMode::Both).unwrap();
        let spec = MatchSpec::affected(View::Set(state.facts()), View::Set(state.facts()), View::Empty, View::Empty);
        assert!(instances(&EvalCtx::new(), state.program(), 0, &spec).unwrap().is_empty());
    }

    #[test]
    fn self_join_has_eight_instances_at_n2() {
        let (p, e) = ex1(2);
        let state = materialise(p, &e, CounterMode::None).unwrap();
        let spec = MatchSpec::plain(View::Set(state.facts()), View::Set(state.facts()));
        assert_eq!(instances(&EvalCtx::new(), state.program(), 0, &spec).unwrap().len(), 8);
    }

    #[test]
    fn apply_multi_counts_occurrences() {
        let (p, e) = ex1(2);
        let state = materialise(p, &e, CounterMode::None).unwrap();
        let spec = MatchSpec::plain(View::Set(state.facts()), View::Set(state.facts()));
        let rules: Vec<&Rule> = state.program().rules().iter().collect();
        let m = apply_multi(&EvalCtx::new(), &rules, &spec).unwrap();
        assert_eq!(m.multiplicity(&fact("S(b,b).")), 2);
        assert_eq!(m.multiplicity(&fact("S(b,c1).")), 1);
        assert_eq!(m.multiplicity(&fact("S(c2,c2).")), 1);
        assert_eq!(m.total(), 8);
        assert!(apply_multi(&EvalCtx::new(), &[], &spec).unwrap().is_empty());

        let ex3 = materialise(parse_program(EX3_RULES).unwrap(), &facts(EX3_FACTS), CounterMode::Both).unwrap();
        let p = facts("A(a).");
        let spec = MatchSpec::affected(View::Set(ex3.facts()), View::Set(ex3.facts()), View::Set(&p), View::Empty);
        let rules: Vec<&Rule> = ex3.program().rules().iter().collect();
        let m = apply_multi(&EvalCtx::new(), &rules, &spec).unwrap();
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![(&fact("A(c)."), 1)]);
    }

    #[test]
    fn plan_prefers_bound_atoms() {
        let p = parse_program("S(Y1,Y2) :- R(X,Y1), R(X,Y2).").unwrap();
        let steps = plan_body(p.rule(0), &[], &|_| 10).unwrap();
        assert_eq!(
            steps,
            vec![
                PlanStep::Match { atom: BodyAtom::Positive(0), source: Source::Positive },
                PlanStep::Match { atom: BodyAtom::Positive(1), source: Source::Positive },
            ]
        );
        let p = parse_program("P(X) :- Q(X).").unwrap();
        assert_eq!(plan_body(p.rule(0), &[], &|_| 1).unwrap().len(), 1);
    }

    #[test]
    fn backward_plan_puts_builtin_last() {
        let p = parse_program("D(Y,Z) :- B(a,Y,Z).\nD(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.").unwrap();
        let rule = p.rule(1);
        let head_vars: Vec<VarId> = rule.head.vars().collect();
        for est in [|_: &Atom| 1usize, |a: &Atom| if a.pred == Symbol::intern("D") { 0 } else { 100 }] {
            let steps = plan_body(rule, &head_vars, &est).unwrap();
            assert_eq!(steps.len(), 3);
            assert_eq!(steps[2], PlanStep::Builtin(0));
        }
    }

    #[test]
    fn negative_atoms_wait_for_bindings() {
        let p = parse_program("P(X) :- not Q(X), R(X).").unwrap();
        let steps = plan_body(p.rule(0), &[], &|_| 1).unwrap();
        assert_eq!(steps[1], PlanStep::Absent { atom: 0, not_affected: false });
    }

    #[test]
    fn materialises_reachability_with_counters() {
        let state = materialise(parse_program(EX3_RULES).unwrap(), &facts(EX3_FACTS), CounterMode::Both).unwrap();
        assert_eq!(state.facts().len(), 9);
        assert!(state.facts().contains(&fact("A(c).")));
        assert!(state.facts().contains(&fact("A(e).")));
        let c = state.counters();
        use crate::store::Counts;
        assert_eq!(c.get(&fact("A(a).")), Counts::new(1, 0));
        assert_eq!(c.get(&fact("A(b).")), Counts::new(1, 0));
        assert_eq!(c.get(&fact("A(c).")), Counts::new(0, 2));
        assert_eq!(c.get(&fact("A(d).")), Counts::new(1, 1));
        assert_eq!(c.get(&fact("A(e).")), Counts::new(0, 1));
    }

    #[test]
    fn empty_program_counts_explicit_facts() {
        let e = facts("P(a). Q(b,c).");
        let state = materialise(Program::empty(), &e, CounterMode::Both).unwrap();
        assert_eq!(state.facts(), &e);
        for f in e.iter() {
            assert_eq!(state.counters().get(&f), crate::store::Counts::new(1, 0));
        }
    }

    #[test]
    fn path_enumeration_materialisation() {
        let p = parse_program("D(Y,Z) :- B(a,Y,Z).\nD(Y,Z) :- D(X,Z1), B(X,Y,Z2), Z = Z1 + Z2.").unwrap();
        let n = 3;
        let mut text = String::from("B(a,b1,1). ");
        for i in 1..=n {
            text.push_str(&format!("B(a,c{i},1). "));
            for j in 1..=n {
                text.push_str(&format!("B(b{i},d{j},1). "));
            }
        }
        let e = facts(&text);
        let state = materialise(p, &e, CounterMode::Both).unwrap();
        let mut expected = e.clone();
        expected.insert(&fact("D(b1,1)."));
        for i in 1..=n {
            expected.insert(&fact(&format!("D(c{i},1).")));
            expected.insert(&fact(&format!("D(d{i},2).")));
        }
        assert_eq!(state.facts(), &expected);
    }

    #[test]
    fn builtin_overflow_surfaces() {
        let p = parse_program("P(Y) :- Q(X), Y = X * X.").unwrap();
        let e = facts("Q(4000000000).");
        assert!(matches!(materialise(p, &e, CounterMode::None), Err(EngineError::ArithmeticOverflow { .. })));
    }

    #[test]
    fn builtin_on_symbol_does_not_match() {
        let p = parse_program("P(Y) :- Q(X), Y = X + 1.").unwrap();
        let state = materialise(p, &facts("Q(a). Q(1)."), CounterMode::None).unwrap();
        assert_eq!(state.facts().relation_len(Symbol::intern("P")), 1);
        assert!(state.facts().contains(&fact("P(2).")));
    }

    #[test]
    fn stratified_negation() {
        let p = parse_program(
            "T(X,Y) :- E(X,Y).\nT(X,Z) :- T(X,Y), E(Y,Z).\nU(X,Y) :- V(X), V(Y), not T(X,Y).",
        )
        .unwrap();
        let state = materialise(p, &facts("V(a). V(b). E(a,b)."), CounterMode::Both).unwrap();
        assert!(state.facts().contains(&fact("U(b,a).")));
        assert!(state.facts().contains(&fact("U(a,a).")));
        assert!(!state.facts().contains(&fact("U(a,b).")));
    }

    #[test]
    fn multiset_operators() {
        let mut a = FactMultiset::new();
        a.add(fact("P(a)."), 2);
        let mut b = FactMultiset::new();
        b.add(fact("P(a)."), 1);
        b.add(fact("P(b)."), 1);
        let s = a.clone().sum(&b);
        assert_eq!(s.multiplicity(&fact("P(a).")), 3);
        let d = s.difference(&a);
        assert_eq!(d, b);
        assert_eq!(b.clone().difference(&a).len(), 1);
    }
}
