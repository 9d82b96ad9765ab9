use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use super::generate::{BenchmarkSpec, Instance, RandomSpec, SspeSpec};
use super::verify::{verify_update, VerifyReport};
use super::HarnessError;
use crate::eval::materialise;
use crate::maintain::{Algorithm, UpdateReport, UpdateStats};
use crate::store::{CounterMode, EngineState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Self-join and path-enumeration families at growing `n`, plus SSPE graphs.
    Scaling,
    /// Random stratified programs with random updates.
    Fuzz,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scaling" => Ok(Suite::Scaling),
            "fuzz" => Ok(Suite::Fuzz),
            _ => Err(format!("unknown suite `{s}` (expected scaling or fuzz)")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SuiteSummary {
    pub runs: usize,
    /// `instance/algorithm` labels whose result disagreed with the oracle.
    pub failures: Vec<String>,
}

/// Materialises once with both counters and updates an independent clone per algorithm.
pub fn run_algorithms(
    instance: &Instance,
    algorithms: &[Algorithm],
) -> Result<Vec<(UpdateReport, VerifyReport, EngineState)>, HarnessError> {
    let base = materialise(instance.program.clone(), &instance.facts, CounterMode::Both)?;
    let mut out = Vec::new();
    for &algo in algorithms {
        let mut state = base.clone();
        let report = state.update(algo, &instance.delta)?;
        let verify = verify_update(&instance.program, &instance.facts, &instance.delta, &state)?;
        out.push((report, verify, state));
    }
    Ok(out)
}

fn specs(suite: Suite) -> Vec<(String, BenchmarkSpec)> {
    match suite {
        Suite::Scaling => {
            let mut v = Vec::new();
            for n in [50, 100, 200] {
                v.push((format!("ex1-n{n}"), BenchmarkSpec::SelfJoin { n }));
            }
            for n in [50, 100, 200] {
                v.push((format!("ex2-n{n}"), BenchmarkSpec::PathEnumeration { n }));
            }
            for seed in 0..10 {
                v.push((format!("sspe-s{seed}"), BenchmarkSpec::Sspe(SspeSpec { seed, ..SspeSpec::default() })));
            }
            v
        }
        Suite::Fuzz => (0..500)
            .map(|seed| (format!("random-{seed}"), BenchmarkSpec::Random(RandomSpec::fuzz(seed))))
            .collect(),
    }
}

/// Runs every instance of `suite` under all four algorithms, writing one CSV
/// row per phase prefixed by the instance label.
pub fn run_suite(suite: Suite, out: &mut dyn Write) -> Result<SuiteSummary, HarnessError> {
    writeln!(out, "instance,{}", UpdateStats::CSV_HEADER)?;
    let mut summary = SuiteSummary::default();
    for (label, spec) in specs(suite) {
        let started = Instant::now();
        let instance = spec.generate()?;
        for (report, verify, _) in run_algorithms(&instance, &Algorithm::ALL)? {
            summary.runs += 1;
            if !verify.passed() {
                summary.failures.push(format!("{label}/{}", report.algorithm));
            }
            report.stats.write_csv(&format!("{label},{}", report.algorithm), out)?;
        }
        log_progress(&label, started);
    }
    Ok(summary)
}

fn log_progress(label: &str, started: Instant) {
    if std::env::var_os("DLIVM_PROGRESS").is_some() {
        eprintln!("{label}: {:.1?}", started.elapsed());
    }
}
