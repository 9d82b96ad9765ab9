//! Follow the derivation counters of `A(Y) :- A(X), B(X,Y)` while `A(a)` is
//! deleted, stratum by stratum and phase by phase.
//!
//! With counters the overdeletion stops at `A(d)`, whose nonrecursive counter
//! proves it, and `A(c)` is rederived from its remaining recursive counter
//! without evaluating any rule backwards.

use dlivm::eval::materialise;
use dlivm::harness::BenchmarkSpec;
use dlivm::maintain::{Algorithm, Observer, Phase};
use dlivm::model::Value;
use dlivm::store::{CounterMap, CounterMode, EngineState};

struct Trace<'a> {
    state: &'a EngineState,
}

impl Trace<'_> {
    fn row(&self, label: &str, counters: &CounterMap) {
        print!("{label:<22}");
        for fact in self.state.facts().to_sorted_vec() {
            if fact.pred.as_str() == "A" {
                let c = counters.get(&fact);
                print!(" {fact}:({},{})", c.nonrecursive, c.recursive);
            }
        }
        println!();
    }
}

impl Observer for Trace<'_> {
    fn fired(&mut self, stratum: u32, phase: Phase, rule: usize, subst: &[Value]) {
        let subst: Vec<String> = subst.iter().map(|v| v.to_string()).collect();
        println!("    stratum {stratum} {phase}: rule {rule} fires with [{}]", subst.join(", "));
    }

    fn phase_done(&mut self, stratum: u32, phase: Phase, counters: &CounterMap) {
        // stratum 1 holds only the B facts
        if stratum == 1 {
            return;
        }
        self.row(&format!("after {phase}"), counters);
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let instance = BenchmarkSpec::Reachability.generate()?;
    let before = materialise(instance.program.clone(), &instance.facts, CounterMode::Both)?;
    println!("program: {}update: {}", instance.program, instance.delta);

    for algo in [Algorithm::Dred, Algorithm::DredC] {
        println!("== {algo}");
        let mut trace = Trace { state: &before };
        trace.row("before", before.counters());
        let mut state = before.clone();
        let report = state.update_with(algo, &instance.delta, &mut trace)?;
        let show = |v: &[dlivm::model::Fact]| v.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" ");
        println!("overdeleted: {}", show(&report.overdeleted));
        println!("rederived:   {}", show(&report.rederived));
        println!("backward candidates: {}", report.stats.backward_candidates());
    }
    Ok(())
}
