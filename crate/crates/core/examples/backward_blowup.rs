//! How much backward rule evaluation plain DRed spends on rederivation as the
//! self-join and path-enumeration families grow, next to its counting variant.
//!
//! ```bash
//! cargo run --release -p dlivm --example backward_blowup -- 50 100 200 400
//! ```

use dlivm::harness::{run_algorithms, BenchmarkSpec};
use dlivm::maintain::{Algorithm, Phase};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sizes: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        sizes = vec![50, 100, 200];
    }
    println!("{:<6} {:>5} {:>14} {:>14} {:>12} {:>12}", "family", "n", "dred backward", "dredc backward", "dred inst", "dredc inst");
    for family in ["ex1", "ex2"] {
        for &n in &sizes {
            let spec = match family {
                "ex1" => BenchmarkSpec::SelfJoin { n },
                _ => BenchmarkSpec::PathEnumeration { n },
            };
            let runs = run_algorithms(&spec.generate()?, &[Algorithm::Dred, Algorithm::DredC])?;
            let (dred, dredc) = (&runs[0].0, &runs[1].0);
            assert!(runs.iter().all(|(_, v, _)| v.passed()));
            println!(
                "{family:<6} {n:>5} {:>14} {:>14} {:>12} {:>12}",
                dred.stats.phase_backward_candidates(Phase::Rederive),
                dredc.stats.backward_candidates(),
                dred.stats.instances(),
                dredc.stats.instances()
            );
        }
    }
    Ok(())
}
