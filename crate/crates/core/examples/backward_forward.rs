//! Run all four maintenance algorithms on one update and compare their phases.
//!
//! The Backward/Forward pair proves deleted facts by searching backwards and
//! never overdeletes a fact that still holds; DRed overdeletes and repairs.

use std::path::PathBuf;

use dlivm::harness::{read_delta, read_facts, read_program, run_algorithms, Instance};
use dlivm::maintain::Algorithm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let instance = Instance {
        program: read_program(&dir.join("routes.dl"))?,
        facts: read_facts(&dir.join("routes.facts"))?,
        delta: read_delta(&dir.join("routes.delta"))?,
    };
    for (report, verify, _) in run_algorithms(&instance, &Algorithm::ALL)? {
        println!(
            "{:<6} overdeleted {:>3}  rederived {:>3}  removed {:>3}  inserted {:>3}  instances {:>4}  backward {:>4}  {}",
            report.algorithm.name(),
            report.overdeleted.len(),
            report.rederived.len(),
            report.removed.len(),
            report.inserted.len(),
            report.stats.instances(),
            report.stats.backward_candidates(),
            if verify.passed() { "ok" } else { "WRONG" }
        );
        for row in &report.stats.rows {
            if row.instances + row.backward_candidates + row.deleted + row.added > 0 {
                println!(
                    "         stratum {} {:<10} instances {:>4} backward {:>4} deleted {:>3} added {:>3}",
                    row.stratum, row.phase.to_string(), row.instances, row.backward_candidates, row.deleted, row.added
                );
            }
        }
    }
    Ok(())
}
