mod common;

use std::collections::BTreeSet;

use dlivm::eval::{instances, plan_body, EvalCtx, MatchSpec, PlanStep, View};
use dlivm::harness::{gen_random, RandomSpec};
use dlivm::model::{Fact, Value, VarId};
use dlivm::parser::{parse_facts, parse_program};
use dlivm::store::FactSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn subset(facts: &common::Facts, p: f64, rng: &mut ChaCha8Rng) -> common::Facts {
    facts.iter().filter(|_| rng.random_bool(p)).cloned().collect()
}

fn store(facts: &common::Facts) -> FactSet {
    let mut s = FactSet::new();
    for f in facts {
        s.insert(f);
    }
    s
}

fn sorted(mut v: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, .. ProptestConfig::default() })]

    #[test]
    fn plain_matching_equals_nested_loops(seed in any::<u64>()) {
        let (program, explicit) = gen_random(&RandomSpec { seed, ..RandomSpec::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = common::materialise(&program, &common::to_facts(&explicit));
        let pos = subset(&all, 0.8, &mut rng);
        let neg = subset(&all, 0.5, &mut rng);
        let (p, n) = (store(&pos), store(&neg));
        let ctx = EvalCtx::new();
        for (i, rule) in program.rules().iter().enumerate() {
            let got = instances(&ctx, &program, i, &MatchSpec::plain(View::set(&p), View::set(&n))).unwrap();
            let got = sorted(got.into_iter().map(|r| r.subst).collect());
            prop_assert_eq!(got, sorted(common::instances(rule, &pos, &neg)), "rule {}", rule);
        }
    }

    #[test]
    fn affected_matching_enumerates_each_touching_instance_once(seed in any::<u64>()) {
        let (program, explicit) = gen_random(&RandomSpec { seed, ..RandomSpec::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let all = common::materialise(&program, &common::to_facts(&explicit));
        let pos = subset(&all, 0.9, &mut rng);
        let dpos = subset(&pos, 0.3, &mut rng);
        let outside = subset(&all, 0.4, &mut rng);
        let neg: common::Facts = all.difference(&outside).cloned().collect();
        let dneg = subset(&outside, 0.5, &mut rng);
        let (p, n, dp, dn) = (store(&pos), store(&neg), store(&dpos), store(&dneg));
        let spec = MatchSpec::affected(View::set(&p), View::set(&n), View::set(&dp), View::set(&dn));
        let ctx = EvalCtx::new();
        for (i, rule) in program.rules().iter().enumerate() {
            let got = instances(&ctx, &program, i, &spec).unwrap();
            let got = sorted(got.into_iter().map(|r| r.subst).collect());
            let expected: Vec<_> = common::instances(rule, &pos, &neg)
                .into_iter()
                .filter(|s| {
                    rule.positive.iter().any(|a| dpos.contains(&a.ground(s)))
                        || rule.negative.iter().any(|a| dneg.contains(&a.ground(s)))
                })
                .collect();
            prop_assert_eq!(got, sorted(expected), "rule {}", rule);
        }
    }

    #[test]
    fn composed_views_follow_set_algebra(seed in any::<u64>()) {
        let (program, explicit) = gen_random(&RandomSpec { seed, ..RandomSpec::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all = common::materialise(&program, &common::to_facts(&explicit));
        let a = subset(&all, 0.5, &mut rng);
        let b = subset(&all, 0.5, &mut rng);
        let c = subset(&all, 0.5, &mut rng);
        let (sa, sb, sc) = (store(&a), store(&b), store(&c));
        let view = View::set(&sa).union(View::set(&sb)).minus(View::set(&sc));
        let counted = std::cell::Cell::new(0);
        let mut scanned = BTreeSet::new();
        for pred in all.iter().map(|f| f.pred).collect::<BTreeSet<_>>() {
            let arity = all.iter().find(|f| f.pred == pred).unwrap().args.len();
            let _ = view.scan(pred, &vec![None; arity], &counted, &mut |t| {
                assert!(scanned.insert(Fact { pred, args: t.iter().copied().collect() }), "duplicate");
                std::ops::ControlFlow::Continue(())
            });
        }
        for f in &all {
            let expected = (a.contains(f) || b.contains(f)) && !c.contains(f);
            prop_assert_eq!(view.contains(f), expected);
            prop_assert_eq!(scanned.contains(f), expected);
        }
    }

    #[test]
    fn plans_place_every_body_literal_once(seed in any::<u64>()) {
        let (program, _) = gen_random(&RandomSpec { seed, ..RandomSpec::default() }).unwrap();
        for rule in program.rules() {
            let steps = plan_body(rule, &[], &|_| 1).unwrap();
            let mut bound: BTreeSet<VarId> = BTreeSet::new();
            let (mut pos, mut neg, mut built) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
            for step in steps {
                match step {
                    PlanStep::Match { atom: dlivm::eval::BodyAtom::Positive(i), .. } => {
                        prop_assert!(pos.insert(i));
                        bound.extend(rule.positive[i].vars());
                    }
                    PlanStep::Match { .. } => prop_assert!(false, "negative atom matched in a plain plan"),
                    PlanStep::Builtin(j) => {
                        prop_assert!(rule.builtins[j].expr_vars().iter().all(|v| bound.contains(v)));
                        prop_assert!(built.insert(j));
                        bound.insert(rule.builtins[j].target);
                    }
                    PlanStep::Absent { atom, .. } => {
                        prop_assert!(rule.negative[atom].vars().all(|v| bound.contains(&v)));
                        prop_assert!(neg.insert(atom));
                    }
                }
            }
            prop_assert_eq!(pos.len(), rule.positive.len());
            prop_assert_eq!(neg.len(), rule.negative.len());
            prop_assert_eq!(built.len(), rule.builtins.len());
        }
    }
}

#[test]
fn matches_join_over_self_join_data() {
    let program = parse_program("Q(X) :- R(X,b).").unwrap();
    let facts: FactSet = parse_facts("R(a1,b). R(a2,b). R(a1,c1). R(a2,c2).").unwrap().iter().collect();
    let empty = FactSet::new();
    let ctx = EvalCtx::new();
    let got = instances(&ctx, &program, 0, &MatchSpec::plain(View::set(&facts), View::set(&empty))).unwrap();
    let got: BTreeSet<_> = got.into_iter().map(|r| r.subst).collect();
    assert_eq!(got, BTreeSet::from([vec![Value::sym("a1")], vec![Value::sym("a2")]]));
}
