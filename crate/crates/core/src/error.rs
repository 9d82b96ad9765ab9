use thiserror::Error;

use crate::model::ModelError;

/// Failures raised while evaluating rules or maintaining a materialisation.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("built-in in `{rule}` cannot be evaluated: its expression variables are never bound")]
    UnboundBuiltin { rule: String },
    #[error("integer overflow evaluating a built-in of `{rule}`")]
    ArithmeticOverflow { rule: String },
    #[error("derivation counter of {fact} overflowed")]
    CounterOverflow { fact: String },
    #[error("derivation counter of {fact} underflowed; counters are incompatible with the materialisation")]
    CounterUnderflow { fact: String },
    #[error("{algorithm} needs {needed} counters but the state tracks {available}")]
    CountersUnavailable { algorithm: &'static str, needed: &'static str, available: &'static str },
    #[error("state was left inconsistent by a failed update and must be rematerialised")]
    Poisoned,
    #[error(transparent)]
    Model(#[from] ModelError),
}
