//! Parse a program and a fact file, materialise, and print the derived facts
//! with their (nonrecursive, recursive) derivation counters.
//!
//! ```bash
//! cargo run -p dlivm --example materialise -- examples/data/routes.dl examples/data/routes.facts
//! ```

use std::path::PathBuf;

use dlivm::eval::materialise;
use dlivm::harness::{read_facts, read_program};
use dlivm::store::CounterMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let mut args = std::env::args().skip(1);
    let program = args.next().map(PathBuf::from).unwrap_or_else(|| dir.join("routes.dl"));
    let data = args.next().map(PathBuf::from).unwrap_or_else(|| dir.join("routes.facts"));

    let state = materialise(read_program(&program)?, &read_facts(&data)?, CounterMode::Both)?;
    println!("{} facts, {} explicit", state.facts().len(), state.explicit().len());
    for fact in state.facts().to_sorted_vec() {
        if state.explicit().contains(&fact) {
            continue;
        }
        let c = state.counters().get(&fact);
        println!("{fact:<16} nr={} r={}", c.nonrecursive, c.recursive);
    }
    Ok(())
}
