use std::fmt;
use std::sync::Arc;

use crate::error::EngineError;
use crate::eval::materialise;
use crate::model::{Fact, Program};
use crate::parser::Delta;
use crate::store::{CounterMap, CounterMismatch, CounterMode, EngineState, FactSet};

/// Differences between a maintained state and a fresh materialisation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VerifyReport {
    /// In the oracle but not in the state.
    pub missing: Vec<Fact>,
    /// In the state but not in the oracle.
    pub extra: Vec<Fact>,
    pub explicit_missing: Vec<Fact>,
    pub explicit_extra: Vec<Fact>,
    pub counter_mismatches: Vec<CounterMismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty()
            && self.extra.is_empty()
            && self.explicit_missing.is_empty()
            && self.explicit_extra.is_empty()
            && self.counter_mismatches.is_empty()
    }

    /// Compares `facts` (and `counters`, if given) with the materialisation of `program` over `explicit`.
    pub fn against_oracle(
        program: Arc<Program>,
        explicit: &FactSet,
        facts: &FactSet,
        counters: Option<&CounterMap>,
    ) -> Result<VerifyReport, EngineError> {
        let mode = counters.map_or(CounterMode::None, CounterMap::mode);
        let oracle = materialise(program, explicit, mode)?;
        Ok(VerifyReport {
            missing: sorted_minus(oracle.facts(), facts),
            extra: sorted_minus(facts, oracle.facts()),
            counter_mismatches: counters.map(|c| c.differences(oracle.counters())).unwrap_or_default(),
            ..VerifyReport::default()
        })
    }
}

fn sorted_minus(a: &FactSet, b: &FactSet) -> Vec<Fact> {
    let mut v: Vec<Fact> = a.iter().filter(|f| !b.contains(f)).collect();
    v.sort();
    v
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("PASS");
        }
        writeln!(f, "FAIL")?;
        for (label, facts) in [
            ("missing", &self.missing),
            ("extra", &self.extra),
            ("explicit missing", &self.explicit_missing),
            ("explicit extra", &self.explicit_extra),
        ] {
            for x in facts {
                writeln!(f, "  {label}: {x}")?;
            }
        }
        for m in &self.counter_mismatches {
            writeln!(f, "  counter {}: expected {}, found {}", m.fact, m.expected, m.actual)?;
        }
        Ok(())
    }
}

/// Rematerialises `(E_old \ E−) ∪ E+` from scratch and compares it, and every
/// counter the state tracks, with `state`.
pub fn verify_update(
    program: &Program,
    old_explicit: &FactSet,
    delta: &Delta,
    state: &EngineState,
) -> Result<VerifyReport, EngineError> {
    let mut explicit = old_explicit.clone();
    for f in &delta.deletions {
        explicit.remove(f);
    }
    for f in &delta.insertions {
        explicit.insert(f);
    }
    let mut report = VerifyReport::against_oracle(
        Arc::new(program.clone()),
        &explicit,
        state.facts(),
        Some(state.counters()),
    )?;
    report.explicit_missing = sorted_minus(&explicit, state.explicit());
    report.explicit_extra = sorted_minus(state.explicit(), &explicit);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::gen_reachability;
    use crate::maintain::Algorithm;
    use crate::parser::parse_delta;

    #[test]
    fn detects_tampering() {
        let (p, e) = gen_reachability();
        let mut state = materialise(p, &e, CounterMode::Both).unwrap();
        let delta = parse_delta("- A(a).").unwrap();
        state.update(Algorithm::DredC, &delta).unwrap();
        let report = verify_update(state.program(), &e, &delta, &state).unwrap();
        assert!(report.passed(), "{report}");
        let gone = Fact::new("A", [crate::model::Value::sym("e")]);
        state.corrupt_remove(&gone);
        let report = verify_update(state.program(), &e, &delta, &state).unwrap();
        assert_eq!(report.missing, vec![gone]);
        assert!(!report.passed());
    }
}
