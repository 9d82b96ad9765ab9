//! Brute-force reference semantics, written independently of the engine:
//! no indexes, no semi-naive evaluation, no planner, its own stratification.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use dlivm::model::{BinOp, Expr, Fact, Program, Rule, Symbol, Term, Value};
use dlivm::store::{CounterMap, CounterMode, Counts, FactSet};

pub type Facts = BTreeSet<Fact>;

fn eval(e: &Expr, b: &[Option<Value>]) -> Option<Result<i64, ()>> {
    Some(match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(v) => match b[v.index()]? {
            Value::Int(i) => Ok(i),
            _ => Err(()),
        },
        Expr::Neg(x) => eval(x, b)?.and_then(|x| x.checked_neg().ok_or(())),
        Expr::Bin(op, l, r) => {
            let (l, r) = (eval(l, b)?, eval(r, b)?);
            match (l, r) {
                (Ok(l), Ok(r)) => match op {
                    BinOp::Add => l.checked_add(r),
                    BinOp::Sub => l.checked_sub(r),
                    BinOp::Mul => l.checked_mul(r),
                }
                .ok_or(()),
                _ => Err(()),
            }
        }
    })
}

fn unify(args: &[Term], fact: &Fact, b: &mut [Option<Value>]) -> bool {
    if fact.args.len() != args.len() {
        return false;
    }
    for (t, v) in args.iter().zip(&fact.args) {
        match t {
            Term::Const(c) => {
                if c != v {
                    return false;
                }
            }
            Term::Var(x) => match b[x.index()] {
                Some(w) if w != *v => return false,
                Some(_) => {}
                None => b[x.index()] = Some(*v),
            },
        }
    }
    true
}

fn ground(pred: Symbol, args: &[Term], b: &[Option<Value>]) -> Fact {
    Fact {
        pred,
        args: args
            .iter()
            .map(|t| match t {
                Term::Const(c) => *c,
                Term::Var(v) => b[v.index()].expect("bound"),
            })
            .collect(),
    }
}

/// All substitutions making the positive body true in `pos`, the built-ins
/// true, and the negative body false in `neg`. Built-in overflow is treated
/// as no match (the fuzz corpus never overflows).
pub fn instances(rule: &Rule, pos: &Facts, neg: &Facts) -> Vec<Vec<Value>> {
    let mut partial: Vec<Vec<Option<Value>>> = vec![vec![None; rule.vars.len()]];
    for atom in &rule.positive {
        let mut next = Vec::new();
        for b in &partial {
            for f in pos.iter().filter(|f| f.pred == atom.pred) {
                let mut b2 = b.clone();
                if unify(&atom.args, f, &mut b2) {
                    next.push(b2);
                }
            }
        }
        partial = next;
    }
    let mut out = Vec::new();
    'subst: for mut b in partial {
        let mut done = vec![false; rule.builtins.len()];
        loop {
            let mut progress = false;
            for (i, bi) in rule.builtins.iter().enumerate() {
                if done[i] {
                    continue;
                }
                match eval(&bi.expr, &b) {
                    None => continue,
                    Some(Err(())) => continue 'subst,
                    Some(Ok(v)) => {
                        done[i] = true;
                        progress = true;
                        match b[bi.target.index()] {
                            Some(w) if w != Value::Int(v) => continue 'subst,
                            Some(_) => {}
                            None => b[bi.target.index()] = Some(Value::Int(v)),
                        }
                    }
                }
            }
            if !progress {
                break;
            }
        }
        assert!(done.iter().all(|d| *d), "unsafe built-in");
        for atom in &rule.negative {
            if neg.contains(&ground(atom.pred, &atom.args, &b)) {
                continue 'subst;
            }
        }
        out.push(b.into_iter().map(|v| v.expect("safe rule binds all variables")).collect());
    }
    out
}

pub fn head(rule: &Rule, subst: &[Value]) -> Fact {
    let b: Vec<Option<Value>> = subst.iter().copied().map(Some).collect();
    ground(rule.head.pred, &rule.head.args, &b)
}

/// Predicate levels by iterated constraint relaxation: a head's level is at
/// least each positive body level and above each negative body level.
pub fn levels(program: &Program) -> BTreeMap<Symbol, usize> {
    let mut level: BTreeMap<Symbol, usize> = BTreeMap::new();
    for r in program.rules() {
        level.entry(r.head.pred).or_insert(0);
        for a in r.body_atoms() {
            level.entry(a.pred).or_insert(0);
        }
    }
    let bound = level.len() + 1;
    loop {
        let mut changed = false;
        for r in program.rules() {
            let mut need = 0;
            for a in &r.positive {
                need = need.max(level[&a.pred]);
            }
            for a in &r.negative {
                need = need.max(level[&a.pred] + 1);
            }
            if level[&r.head.pred] < need {
                level.insert(r.head.pred, need);
                changed = true;
                assert!(need <= bound, "not stratifiable");
            }
        }
        if !changed {
            return level;
        }
    }
}

/// The perfect model, by naive fixpoint iteration level by level.
pub fn materialise(program: &Program, explicit: &Facts) -> Facts {
    let levels = levels(program);
    let top = levels.values().copied().max().unwrap_or(0);
    let mut i = explicit.clone();
    for l in 0..=top {
        loop {
            let mut new = Vec::new();
            for r in program.rules().iter().filter(|r| levels[&r.head.pred] == l) {
                for s in instances(r, &i, &i) {
                    let h = head(r, &s);
                    if !i.contains(&h) {
                        new.push(h);
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            i.extend(new);
        }
    }
    i
}

/// Whether the rule's head and some positive body atom lie in one strongly
/// connected component of the predicate dependency graph, by reachability.
pub fn is_recursive(program: &Program, rule: &Rule) -> bool {
    let reaches = |from: Symbol, to: Symbol| {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(p) = stack.pop() {
            if p == to {
                return true;
            }
            for r in program.rules().iter().filter(|r| r.body_atoms().any(|a| a.pred == p)) {
                if seen.insert(r.head.pred) {
                    stack.push(r.head.pred);
                }
            }
        }
        false
    };
    rule.positive.iter().any(|a| reaches(rule.head.pred, a.pred))
}

/// Counters from first principles: explicit membership plus one per firing
/// instance, split by whether the rule is recursive.
pub fn counters(program: &Program, explicit: &Facts, facts: &Facts) -> BTreeMap<Fact, Counts> {
    let mut c: BTreeMap<Fact, Counts> = BTreeMap::new();
    for f in explicit {
        c.entry(f.clone()).or_default().nonrecursive += 1;
    }
    for r in program.rules() {
        let rec = is_recursive(program, r);
        for s in instances(r, facts, facts) {
            let e = c.entry(head(r, &s)).or_default();
            if rec {
                e.recursive += 1;
            } else {
                e.nonrecursive += 1;
            }
        }
    }
    c
}

/// Every firing instance as `(rule, substitution)`.
pub fn firing(program: &Program, facts: &Facts) -> BTreeSet<(usize, Vec<Value>)> {
    let mut out = BTreeSet::new();
    for (i, r) in program.rules().iter().enumerate() {
        for s in instances(r, facts, facts) {
            out.insert((i, s));
        }
    }
    out
}

pub fn to_facts(set: &FactSet) -> Facts {
    set.iter().collect()
}

/// Engine counters as a map of nonzero entries, masked to `mode`.
pub fn counter_map(c: &CounterMap) -> BTreeMap<Fact, Counts> {
    c.iter().map(|(f, n)| (f.clone(), n)).collect()
}

pub fn masked(c: &BTreeMap<Fact, Counts>, mode: CounterMode) -> BTreeMap<Fact, Counts> {
    c.iter()
        .map(|(f, n)| {
            let n = match mode {
                CounterMode::None => Counts::default(),
                CounterMode::Nonrecursive => Counts::new(n.nonrecursive, 0),
                CounterMode::Both => *n,
            };
            (f.clone(), n)
        })
        .filter(|(_, n)| !n.is_zero())
        .collect()
}
