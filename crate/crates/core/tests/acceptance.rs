//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dlivm::eval::materialise;
use dlivm::harness::{gen_random, random_delete, run_algorithms, BenchmarkSpec, Instance, RandomSpec, SspeSpec};
use dlivm::maintain::{Algorithm, Observer, Phase};
use dlivm::model::{Fact, Value};
use dlivm::parser::{parse_facts, Delta};
use dlivm::store::{recount_counters, CounterMap, CounterMode, Counts};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(failures: &[String], summary: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail: summary }
    } else {
        let shown: Vec<_> = failures.iter().take(5).cloned().collect();
        Outcome { pass: false, detail: format!("{summary}; {} failures: {}", failures.len(), shown.join(" | ")) }
    }
}

fn fact(text: &str) -> Fact {
    parse_facts(text).unwrap().pop().unwrap()
}

fn fuzz_correctness() -> (Outcome, Outcome) {
    let started = Instant::now();
    let mut wrong = Vec::new();
    let mut counters = Vec::new();
    let mut runs = 0;
    for seed in 0..500 {
        let instance = BenchmarkSpec::Random(RandomSpec::fuzz(seed)).generate().unwrap();
        for (report, verify, state) in run_algorithms(&instance, &Algorithm::ALL).unwrap() {
            runs += 1;
            if !verify.missing.is_empty() || !verify.extra.is_empty() || !verify.explicit_missing.is_empty()
                || !verify.explicit_extra.is_empty()
            {
                wrong.push(format!("seed {seed} {}", report.algorithm));
            }
            let recount = recount_counters(&state).unwrap();
            let relevant = !state.counters().differences(&recount).is_empty();
            if relevant {
                counters.push(format!("seed {seed} {}", report.algorithm));
            }
        }
    }
    let elapsed = started.elapsed();
    let mut fuzz = outcome(&wrong, format!("{runs} runs match rematerialisation in {elapsed:.2?}"));
    if elapsed > Duration::from_secs(60) {
        fuzz.pass = false;
        fuzz.detail.push_str(" (over 60 s)");
    }
    (fuzz, outcome(&counters, format!("{runs} post-update counter maps equal a full recount")))
}

#[derive(Default)]
struct Snapshots {
    after_overdelete: Option<CounterMap>,
}

impl Observer for Snapshots {
    fn phase_done(&mut self, stratum: u32, phase: Phase, counters: &CounterMap) {
        if stratum == 2 && phase == Phase::Overdelete {
            self.after_overdelete = Some(counters.clone());
        }
    }
}

fn counter_trace() -> Outcome {
    let instance = BenchmarkSpec::Reachability.generate().unwrap();
    let base = materialise(instance.program.clone(), &instance.facts, CounterMode::Both).unwrap();
    let names = ["A(a).", "A(b).", "A(c).", "A(d).", "A(e)."];
    let rows = [
        ("T1", [(1, 0), (1, 0), (0, 2), (1, 1), (0, 1)]),
        ("T2", [(0, 0), (1, 0), (0, 1), (1, 0), (0, 1)]),
        ("T3", [(0, 0), (1, 0), (0, 1), (1, 1), (0, 1)]),
    ];
    let mut state = base.clone();
    let mut snaps = Snapshots::default();
    let report = state.update_with(Algorithm::DredC, &instance.delta, &mut snaps).unwrap();
    let tables = [Some(base.counters().clone()), snaps.after_overdelete, Some(state.counters().clone())];
    let mut failures = Vec::new();
    for ((row, expected), table) in rows.iter().zip(&tables) {
        let Some(table) = table else {
            failures.push(format!("{row} not observed"));
            continue;
        };
        for (name, (nr, r)) in names.iter().zip(expected) {
            let got = table.get(&fact(name));
            if got != Counts::new(*nr, *r) {
                failures.push(format!("{row} {name} = ({},{})", got.nonrecursive, got.recursive));
            }
        }
    }
    let set = |v: &[Fact]| v.iter().map(|f| f.to_string()).collect::<BTreeSet<_>>();
    let want = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    if set(&report.overdeleted) != want(&["A(a)", "A(c)"]) {
        failures.push(format!("dredc overdeleted {:?}", set(&report.overdeleted)));
    }
    if set(&report.rederived) != want(&["A(c)"]) {
        failures.push(format!("dredc rederived {:?}", set(&report.rederived)));
    }
    let mut plain = base.clone();
    let report = plain.update(Algorithm::Dred, &instance.delta).unwrap();
    if set(&report.overdeleted) != want(&["A(a)", "A(c)", "A(d)", "A(e)"]) {
        failures.push(format!("dred overdeleted {:?}", set(&report.overdeleted)));
    }
    outcome(&failures, "T1, T2, T3 exact; dredc overdeletes {A(a),A(c)}, R = {A(c)}; dred overdeletes four".into())
}

/// Checks the backward-work split on a family at n = 100 and n = 200.
fn blowup(label: &str, make: fn(usize) -> BenchmarkSpec, failures: &mut Vec<String>) -> String {
    let mut ratio = 0.0;
    let mut rederive = [0u64; 2];
    for (k, n) in [100, 200].into_iter().enumerate() {
        let instance = make(n).generate().unwrap();
        let runs = run_algorithms(&instance, &[Algorithm::Dred, Algorithm::DredC]).unwrap();
        let (dred, dred_verify, _) = &runs[0];
        let (dredc, dredc_verify, _) = &runs[1];
        if !dred_verify.passed() || !dredc_verify.passed() {
            failures.push(format!("{label} n={n} disagrees with rematerialisation"));
        }
        rederive[k] = dred.stats.phase_backward_candidates(Phase::Rederive);
        if dredc.stats.backward_candidates() != 0 {
            failures.push(format!("{label} n={n} dredc backward candidates {}", dredc.stats.backward_candidates()));
        }
        if dredc.stats.instances() > dred.stats.instances() {
            failures.push(format!(
                "{label} n={n} dredc instances {} > dred {}",
                dredc.stats.instances(),
                dred.stats.instances()
            ));
        }
    }
    if rederive[0] > 0 {
        ratio = rederive[1] as f64 / rederive[0] as f64;
    }
    if !(3.2..=4.8).contains(&ratio) {
        failures.push(format!("{label} backward ratio {ratio:.2}"));
    }
    format!("{label} dred rederive candidates {} -> {} (x{ratio:.2})", rederive[0], rederive[1])
}

fn self_join_blowup() -> Outcome {
    let started = Instant::now();
    let mut failures = Vec::new();
    let summary = blowup("ex1", |n| BenchmarkSpec::SelfJoin { n }, &mut failures);
    let elapsed = started.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("took {elapsed:.2?}"));
    }
    outcome(&failures, format!("{summary}, dredc 0, in {elapsed:.2?}"))
}

fn path_blowup_and_sspe() -> Outcome {
    let mut failures = Vec::new();
    let summary = blowup("ex2", |n| BenchmarkSpec::PathEnumeration { n }, &mut failures);
    let started = Instant::now();
    let mut totals = [0u64; 2];
    for seed in 0..10 {
        let instance = BenchmarkSpec::Sspe(SspeSpec { seed, ..SspeSpec::default() }).generate().unwrap();
        let runs = run_algorithms(&instance, &Algorithm::ALL).unwrap();
        for (report, verify, _) in &runs {
            if !verify.passed() {
                failures.push(format!("sspe seed {seed} {}", report.algorithm));
            }
        }
        let (dred, dredc) = (runs[0].0.stats.instances(), runs[1].0.stats.instances());
        totals[0] += dred;
        totals[1] += dredc;
        if dredc > dred {
            failures.push(format!("sspe seed {seed} dredc instances {dredc} > dred {dred}"));
        }
    }
    outcome(
        &failures,
        format!(
            "{summary}; sspe 10 seeds agree, instances dred {} vs dredc {} in {:.2?}",
            totals[0],
            totals[1],
            started.elapsed()
        ),
    )
}

#[derive(Default)]
struct Fired(Vec<(usize, Vec<Value>)>);

impl Observer for Fired {
    fn fired(&mut self, _: u32, _: Phase, rule: usize, subst: &[Value]) {
        self.0.push((rule, subst.to_vec()));
    }
}

fn nonrecursive_optimality() -> Outcome {
    let mut failures = Vec::new();
    let mut fired = 0;
    for seed in 0..100 {
        let spec = RandomSpec { recursion: false, ..RandomSpec::fuzz(seed) };
        let instance = BenchmarkSpec::Random(spec).generate().unwrap();
        let mut state = materialise(instance.program.clone(), &instance.facts, CounterMode::Both).unwrap();
        let before = common::firing(&instance.program, &common::to_facts(state.facts()));
        let mut seen = Fired::default();
        state.update_with(Algorithm::DredC, &instance.delta, &mut seen).unwrap();
        let after = common::firing(&instance.program, &common::to_facts(state.facts()));
        let mut got = seen.0;
        got.sort();
        let expected: Vec<_> = before.symmetric_difference(&after).cloned().collect();
        fired += got.len();
        if got != expected {
            failures.push(format!("seed {seed}: fired {} vs {} changed", got.len(), expected.len()));
        }
    }
    outcome(&failures, format!("100 nonrecursive programs, {fired} instances fired, each exactly once"))
}

fn counter_overhead() -> Outcome {
    let instance = BenchmarkSpec::Sspe(SspeSpec::default()).generate().unwrap();
    let time = |mode| {
        let started = Instant::now();
        let state = materialise(instance.program.clone(), &instance.facts, mode).unwrap();
        let elapsed = started.elapsed();
        drop(state);
        elapsed
    };
    time(CounterMode::None);
    time(CounterMode::Both);
    let (mut plain, mut counted) = (Vec::new(), Vec::new());
    for _ in 0..7 {
        plain.push(time(CounterMode::None));
        counted.push(time(CounterMode::Both));
    }
    plain.sort();
    counted.sort();
    let (p, c) = (plain[3], counted[3]);
    let ratio = c.as_secs_f64() / p.as_secs_f64();
    let failures = if ratio <= 1.5 { Vec::new() } else { vec![format!("ratio {ratio:.2}")] };
    outcome(&failures, format!("median {c:.2?} with counters vs {p:.2?} without (x{ratio:.2})"))
}

fn inverse_update() -> Outcome {
    let mut failures = Vec::new();
    for seed in 0..100 {
        let (program, facts) = gen_random(&RandomSpec::fuzz(seed)).unwrap();
        let instance = Instance { program, facts, delta: Delta::default() };
        let base = materialise(instance.program.clone(), &instance.facts, CounterMode::Both).unwrap();
        let k = (seed as usize * 7) % (instance.facts.len() + 1);
        let delete = random_delete(&instance.facts, k, seed).unwrap();
        let reinsert = Delta::new([], delete.deletions.iter().cloned());
        let mut state = base.clone();
        state.update(Algorithm::DredC, &delete).unwrap();
        state.update(Algorithm::DredC, &reinsert).unwrap();
        if state.facts() != base.facts() || state.explicit() != base.explicit() || state.counters() != base.counters() {
            failures.push(format!("seed {seed} (|X| = {k})"));
        }
    }
    outcome(&failures, "100 delete-then-reinsert round trips restore I, E and counters".into())
}

fn main() -> ExitCode {
    let (fuzz, counters) = fuzz_correctness();
    let results = [
        ("1 fuzz correctness", fuzz),
        ("2 counter consistency", counters),
        ("3 counter trace", counter_trace()),
        ("4 self-join backward blowup", self_join_blowup()),
        ("5 path enumeration and sspe", path_blowup_and_sspe()),
        ("6 nonrecursive optimality", nonrecursive_optimality()),
        ("7 counter overhead", counter_overhead()),
        ("8 inverse update", inverse_update()),
    ];
    let mut all = true;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
