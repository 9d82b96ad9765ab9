//! Terms, atoms, rules and programs, plus safety checking and stratification.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt;
use std::sync::{OnceLock, RwLock};

use indexmap::IndexMap;
use petgraph::graph::{DiGraph, NodeIndex};
use rustc_hash::{FxHashMap, FxHashSet};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Default)]
struct Interner {
    ids: FxHashMap<&'static str, u32>,
    names: Vec<&'static str>,
}

fn interner() -> &'static RwLock<Interner> {
    static INTERNER: OnceLock<RwLock<Interner>> = OnceLock::new();
    INTERNER.get_or_init(Default::default)
}

/// An interned string. Equality and hashing are on the id.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol(u32);

impl Symbol {
    pub fn intern(name: &str) -> Symbol {
        if let Some(&id) = interner().read().unwrap().ids.get(name) {
            return Symbol(id);
        }
        let mut table = interner().write().unwrap();
        if let Some(&id) = table.ids.get(name) {
            return Symbol(id);
        }
        let leaked: &'static str = Box::leak(name.to_owned().into_boxed_str());
        let id = table.names.len() as u32;
        table.names.push(leaked);
        table.ids.insert(leaked, id);
        Symbol(id)
    }

    pub fn as_str(self) -> &'static str {
        interner().read().unwrap().names[self.0 as usize]
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            Ordering::Equal
        } else {
            self.as_str().cmp(other.as_str())
        }
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A constant.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Sym(Symbol),
    Int(i64),
    Str(Symbol),
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Sym(Symbol::intern(name))
    }

    pub fn string(text: &str) -> Value {
        Value::Str(Symbol::intern(text))
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Sym(_) => 1,
            Value::Str(_) => 2,
        }
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Sym(a), Value::Sym(b)) | (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => f.write_str(s.as_str()),
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.as_str().chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Index of a variable in its rule's variable table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Value),
    Var(VarId),
}

pub type Tuple = SmallVec<[Value; 4]>;

/// A ground atom.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Fact {
    pub pred: Symbol,
    pub args: Tuple,
}

impl Fact {
    pub fn new(pred: &str, args: impl IntoIterator<Item = Value>) -> Fact {
        Fact { pred: Symbol::intern(pred), args: args.into_iter().collect() }
    }
}

impl Ord for Fact {
    fn cmp(&self, other: &Self) -> Ordering {
        self.pred.cmp(&other.pred).then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Fact {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, v) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        })
    }

    /// Instantiates the atom; every variable must be bound.
    pub fn ground(&self, subst: &[Value]) -> Fact {
        Fact {
            pred: self.pred,
            args: self
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => *c,
                    Term::Var(v) => subst[v.index()],
                })
                .collect(),
        }
    }

    /// Like [`Atom::ground`] but over a partial binding.
    pub fn ground_partial(&self, binding: &[Option<Value>]) -> Option<Fact> {
        let mut args = Tuple::with_capacity(self.args.len());
        for t in &self.args {
            args.push(match t {
                Term::Const(c) => *c,
                Term::Var(v) => binding[v.index()]?,
            });
        }
        Some(Fact { pred: self.pred, args })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

/// Integer arithmetic over constants and rule variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    Var(VarId),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

/// Outcome of evaluating an expression under a binding.
#[derive(Debug, PartialEq, Eq)]
pub enum ExprValue {
    Int(i64),
    /// A variable is bound to a non-integer constant.
    NotInteger,
    Overflow,
}

impl Expr {
    pub fn vars(&self, out: &mut Vec<VarId>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(e) => e.vars(out),
            Expr::Bin(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }

    /// Evaluates under `lookup`, which must bind every variable of the expression.
    pub fn eval(&self, lookup: &dyn Fn(VarId) -> Option<Value>) -> ExprValue {
        match self {
            Expr::Const(c) => ExprValue::Int(*c),
            Expr::Var(v) => match lookup(*v) {
                Some(Value::Int(i)) => ExprValue::Int(i),
                Some(_) => ExprValue::NotInteger,
                None => panic!("expression variable evaluated before binding"),
            },
            Expr::Neg(e) => match e.eval(lookup) {
                ExprValue::Int(i) => i.checked_neg().map_or(ExprValue::Overflow, ExprValue::Int),
                other => other,
            },
            Expr::Bin(op, a, b) => {
                let a = match a.eval(lookup) {
                    ExprValue::Int(i) => i,
                    other => return other,
                };
                let b = match b.eval(lookup) {
                    ExprValue::Int(i) => i,
                    other => return other,
                };
                let r = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                };
                r.map_or(ExprValue::Overflow, ExprValue::Int)
            }
        }
    }

    fn fmt_with(&self, vars: &[Symbol], f: &mut fmt::Formatter<'_>, top: bool) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{}", vars[v.index()]),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_with(vars, f, false)
            }
            Expr::Bin(op, a, b) => {
                if !top {
                    f.write_str("(")?;
                }
                a.fmt_with(vars, f, false)?;
                f.write_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                })?;
                b.fmt_with(vars, f, false)?;
                if !top {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// `target = expression`. Binds the target when unbound, otherwise acts as a check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuiltinAtom {
    pub target: VarId,
    pub expr: Expr,
}

impl BuiltinAtom {
    pub fn expr_vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.expr.vars(&mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub positive: Vec<Atom>,
    pub negative: Vec<Atom>,
    pub builtins: Vec<BuiltinAtom>,
    /// Variable names, indexed by [`VarId`].
    pub vars: Vec<Symbol>,
}

impl Rule {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn body_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.positive.iter().chain(self.negative.iter())
    }

    fn fmt_atom(&self, atom: &Atom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", atom.pred)?;
        for (i, t) in atom.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match t {
                Term::Const(c) => write!(f, "{c}")?,
                Term::Var(v) => write!(f, "{}", self.vars[v.index()])?,
            }
        }
        f.write_str(")")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_atom(&self.head, f)?;
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            let s = if first { " :- " } else { ", " };
            first = false;
            f.write_str(s)
        };
        for a in &self.positive {
            sep(f)?;
            self.fmt_atom(a, f)?;
        }
        for a in &self.negative {
            sep(f)?;
            f.write_str("not ")?;
            self.fmt_atom(a, f)?;
        }
        for b in &self.builtins {
            sep(f)?;
            write!(f, "{} = ", self.vars[b.target.index()])?;
            b.expr.fmt_with(&self.vars, f, true)?;
        }
        f.write_str(".")
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unsafe rule `{rule}`: variable {var} is not bound by a positive body atom")]
    Unsafe { rule: String, var: String },
    #[error("program is not stratifiable: `{rule}` negates {pred} within its own recursive component")]
    NotStratifiable { rule: String, pred: String },
    #[error("predicate {pred} used with arity {found}, expected {expected}")]
    Arity { pred: String, expected: usize, found: usize },
}

/// Variables bound by positive atoms, closed under built-ins whose expression is bound.
pub fn bound_variables(rule: &Rule) -> FxHashSet<VarId> {
    let mut bound: FxHashSet<VarId> = rule.positive.iter().flat_map(|a| a.vars()).collect();
    loop {
        let mut changed = false;
        for b in &rule.builtins {
            if !bound.contains(&b.target) && b.expr_vars().iter().all(|v| bound.contains(v)) {
                bound.insert(b.target);
                changed = true;
            }
        }
        if !changed {
            return bound;
        }
    }
}

pub fn check_safety(rule: &Rule) -> Result<(), ModelError> {
    let bound = bound_variables(rule);
    let mut used: Vec<VarId> = rule.head.vars().collect();
    used.extend(rule.negative.iter().flat_map(|a| a.vars()));
    for b in &rule.builtins {
        used.push(b.target);
        used.extend(b.expr_vars());
    }
    match used.into_iter().find(|v| !bound.contains(v)) {
        Some(v) => Err(ModelError::Unsafe {
            rule: rule.to_string(),
            var: rule.vars[v.index()].to_string(),
        }),
        None => Ok(()),
    }
}

/// Rules of one stratum, split by recursiveness (as indices into the program).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumRules {
    pub recursive: Vec<usize>,
    pub nonrecursive: Vec<usize>,
}

impl StratumRules {
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.nonrecursive.iter().chain(self.recursive.iter()).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.recursive.is_empty() && self.nonrecursive.is_empty()
    }
}

/// Predicate strata and the per-stratum rule partition.
///
/// Predicates that head no rule share stratum 1; each strongly connected
/// component of rule-defined predicates gets its own stratum, numbered in a
/// deterministic topological order starting at 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratification {
    lambda: FxHashMap<Symbol, u32>,
    max: u32,
    /// Indexed by stratum; slot 0 is unused.
    strata: Vec<StratumRules>,
}

impl Stratification {
    /// Stratum of a predicate; predicates unknown to the program are in stratum 1.
    pub fn stratum_of(&self, pred: Symbol) -> u32 {
        self.lambda.get(&pred).copied().unwrap_or(1)
    }

    pub fn max_stratum(&self) -> u32 {
        self.max
    }

    pub fn rules(&self, stratum: u32) -> &StratumRules {
        &self.strata[stratum as usize]
    }

    pub fn strata(&self) -> impl Iterator<Item = u32> {
        1..=self.max
    }

    pub fn is_recursive(&self, rule: usize) -> bool {
        self.strata.iter().any(|s| s.recursive.contains(&rule))
    }
}

pub fn stratify(rules: &[Rule]) -> Result<Stratification, ModelError> {
    // predicates in order of first appearance
    let mut order: IndexMap<Symbol, ()> = IndexMap::new();
    for r in rules {
        order.insert(r.head.pred, ());
        for a in r.body_atoms() {
            order.insert(a.pred, ());
        }
    }
    let defined: FxHashSet<Symbol> = rules.iter().map(|r| r.head.pred).collect();

    let mut graph: DiGraph<Symbol, ()> = DiGraph::new();
    let mut node: FxHashMap<Symbol, NodeIndex> = FxHashMap::default();
    for &p in order.keys().filter(|p| defined.contains(p)) {
        node.insert(p, graph.add_node(p));
    }
    for r in rules {
        let h = node[&r.head.pred];
        for a in r.body_atoms() {
            if let Some(&b) = node.get(&a.pred) {
                graph.update_edge(b, h, ());
            }
        }
    }

    let sccs = petgraph::algo::tarjan_scc(&graph);
    let mut comp_of = vec![0usize; graph.node_count()];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            comp_of[n.index()] = c;
        }
    }
    // Kahn's algorithm keyed on the earliest predicate of each component
    let key: Vec<usize> = sccs
        .iter()
        .map(|m| m.iter().map(|n| order.get_index_of(&graph[*n]).unwrap()).min().unwrap())
        .collect();
    let mut indegree = vec![0usize; sccs.len()];
    let mut succ: Vec<FxHashSet<usize>> = vec![FxHashSet::default(); sccs.len()];
    for e in graph.raw_edges() {
        let (a, b) = (comp_of[e.source().index()], comp_of[e.target().index()]);
        if a != b && succ[a].insert(b) {
            indegree[b] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<(usize, usize)>> = (0..sccs.len())
        .filter(|&c| indegree[c] == 0)
        .map(|c| Reverse((key[c], c)))
        .collect();
    let mut comp_stratum = vec![0u32; sccs.len()];
    let mut next = 2u32;
    while let Some(Reverse((_, c))) = ready.pop() {
        comp_stratum[c] = next;
        next += 1;
        let mut out: Vec<usize> = succ[c].iter().copied().collect();
        out.sort_unstable();
        for d in out {
            indegree[d] -= 1;
            if indegree[d] == 0 {
                ready.push(Reverse((key[d], d)));
            }
        }
    }

    let mut lambda = FxHashMap::default();
    for &p in order.keys() {
        let s = node.get(&p).map_or(1, |n| comp_stratum[comp_of[n.index()]]);
        lambda.insert(p, s);
    }
    let max = if sccs.is_empty() { 1 } else { next - 1 };
    let mut strata = vec![StratumRules::default(); max as usize + 1];
    for (i, r) in rules.iter().enumerate() {
        let s = lambda[&r.head.pred];
        for a in &r.negative {
            if lambda[&a.pred] >= s {
                return Err(ModelError::NotStratifiable {
                    rule: r.to_string(),
                    pred: a.pred.to_string(),
                });
            }
        }
        let recursive = r.positive.iter().any(|a| lambda[&a.pred] == s);
        if recursive {
            strata[s as usize].recursive.push(i);
        } else {
            strata[s as usize].nonrecursive.push(i);
        }
    }
    Ok(Stratification { lambda, max, strata })
}

/// A safe, stratified program.
#[derive(Clone, Debug)]
pub struct Program {
    rules: Vec<Rule>,
    arities: IndexMap<Symbol, usize>,
    strat: Stratification,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Result<Program, ModelError> {
        let mut arities = IndexMap::new();
        for r in &rules {
            check_safety(r)?;
            for a in std::iter::once(&r.head).chain(r.body_atoms()) {
                check_arity(&mut arities, a.pred, a.args.len())?;
            }
        }
        let strat = stratify(&rules)?;
        Ok(Program { rules, arities, strat })
    }

    pub fn empty() -> Program {
        Program::new(Vec::new()).expect("empty program is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    pub fn stratification(&self) -> &Stratification {
        &self.strat
    }

    pub fn arity(&self, pred: Symbol) -> Option<usize> {
        self.arities.get(&pred).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Checks a fact against the arities used by the program.
    pub fn check_fact(&self, fact: &Fact) -> Result<(), ModelError> {
        match self.arity(fact.pred) {
            Some(n) if n != fact.args.len() => Err(ModelError::Arity {
                pred: fact.pred.to_string(),
                expected: n,
                found: fact.args.len(),
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_arity(
    arities: &mut IndexMap<Symbol, usize>,
    pred: Symbol,
    found: usize,
) -> Result<(), ModelError> {
    match arities.get(&pred) {
        Some(&expected) if expected != found => Err(ModelError::Arity {
            pred: pred.to_string(),
            expected,
            found,
        }),
        Some(_) => Ok(()),
        None => {
            arities.insert(pred, found);
            Ok(())
        }
    }
}

/// A rule instance: rule index plus a total substitution over the rule's variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleInstance {
    pub rule: usize,
    pub subst: Vec<Value>,
}
