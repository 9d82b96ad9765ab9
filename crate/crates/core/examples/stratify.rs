//! Show how a program splits into strata and which rules are recursive.
//!
//! Predicates that head no rule sit in stratum 1; every strongly connected
//! component of the rest gets a stratum of its own.

use std::path::PathBuf;

use dlivm::harness::read_program;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data/routes.dl"));
    let program = read_program(&path)?;
    let strata = program.stratification();
    for s in strata.strata() {
        let rules = strata.rules(s);
        println!("stratum {s}");
        for &i in &rules.nonrecursive {
            println!("    nonrecursive  {}", program.rule(i));
        }
        for &i in &rules.recursive {
            println!("    recursive     {}", program.rule(i));
        }
    }
    Ok(())
}
