//! Differential fuzzing: random stratified programs with negation, built-ins
//! and recursion, random updates, every algorithm checked against
//! rematerialisation from scratch.
//!
//! ```bash
//! cargo run --release -p dlivm --example fuzz_oracle -- 2000
//! ```

use dlivm::harness::{run_algorithms, BenchmarkSpec, RandomSpec};
use dlivm::maintain::Algorithm;
use dlivm::store::recount_counters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let count: u64 = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(500);
    let mut failures = 0;
    for seed in 0..count {
        let instance = BenchmarkSpec::Random(RandomSpec::fuzz(seed)).generate()?;
        for (report, verify, state) in run_algorithms(&instance, &Algorithm::ALL)? {
            let recount = recount_counters(&state)?;
            if !verify.passed() || &recount != state.counters() {
                failures += 1;
                println!("seed {seed} {}: {verify}", report.algorithm);
                println!("{}{}", instance.program, instance.delta);
            }
        }
    }
    println!("{count} instances x 4 algorithms, {failures} failures");
    if failures > 0 {
        std::process::exit(2);
    }
    Ok(())
}
