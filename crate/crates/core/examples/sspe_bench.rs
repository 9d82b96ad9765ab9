//! Single-source path enumeration on random graphs: delete random edges and
//! time each algorithm against rematerialisation.
//!
//! ```bash
//! cargo run --release -p dlivm --example sspe_bench -- 1000 10000 3
//! ```

use std::time::Instant;

use dlivm::eval::materialise;
use dlivm::harness::{run_algorithms, BenchmarkSpec, SspeSpec};
use dlivm::maintain::Algorithm;
use dlivm::store::CounterMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let nodes = args.first().copied().unwrap_or(1000);
    let edges = args.get(1).copied().unwrap_or(10_000);
    let seeds = args.get(2).copied().unwrap_or(3) as u64;
    for seed in 0..seeds {
        let spec = SspeSpec { nodes, edges, seed, ..SspeSpec::default() };
        let instance = BenchmarkSpec::Sspe(spec).generate()?;
        let started = Instant::now();
        let mut explicit = instance.facts.clone();
        for f in &instance.delta.deletions {
            explicit.remove(f);
        }
        let remat = materialise(instance.program.clone(), &explicit, CounterMode::None)?;
        println!("seed {seed}: {} facts after the update, rematerialised in {:.2?}", remat.facts().len(), started.elapsed());
        for (report, verify, _) in run_algorithms(&instance, &Algorithm::ALL)? {
            println!(
                "    {:<6} {:>9.2?}  instances {:>9}  backward {:>9}  removed {:>5}  {}",
                report.algorithm.name(),
                report.stats.wall(),
                report.stats.instances(),
                report.stats.backward_candidates(),
                report.removed.len(),
                if verify.passed() { "ok" } else { "WRONG" }
            );
        }
    }
    Ok(())
}
