//! Deleting explicit facts and inserting them again restores the exact state,
//! derivation counters included.

use dlivm::eval::materialise;
use dlivm::harness::{gen_path_enumeration, random_delete};
use dlivm::maintain::Algorithm;
use dlivm::parser::Delta;
use dlivm::store::CounterMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (program, facts) = gen_path_enumeration(20);
    let original = materialise(program, &facts, CounterMode::Both)?;
    for algo in Algorithm::ALL {
        let mut state = original.clone();
        let delete = random_delete(&facts, facts.len() / 4, 7)?;
        let reinsert = Delta::new([], delete.deletions.iter().cloned());
        let down = state.update(algo, &delete)?;
        let up = state.update(algo, &reinsert)?;
        let same = state.facts() == original.facts() && state.counters() == original.counters();
        println!(
            "{:<6} -{} explicit: {} facts lost, {} regained, state restored: {same}",
            algo.name(),
            delete.deletions.len(),
            down.removed.len(),
            up.inserted.len()
        );
    }
    Ok(())
}
