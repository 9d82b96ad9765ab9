//! Materialisation of stratified datalog with negation and integer built-ins,
//! kept up to date under insertions and deletions of explicit facts.
//!
//! Four maintenance algorithms share one [`EngineState`]:
//!
//! - [`Algorithm::Dred`] overdeletes everything a deleted fact supports, then
//!   rederives survivors by evaluating rules backwards.
//! - [`Algorithm::DredC`] keeps nonrecursive and recursive derivation counters,
//!   which stop overdeletion early and make rederivation a counter lookup.
//! - [`Algorithm::Bf`] proves each affected fact by a backward search before
//!   deleting it.
//! - [`Algorithm::BfC`] does the same but consults nonrecursive counters first.
//!
//! ```
//! use dlivm::{materialise, parse_delta, parse_facts, parse_program, Algorithm, CounterMode};
//!
//! let program = parse_program("A(Y) :- A(X), B(X,Y).").unwrap();
//! let facts = parse_facts("A(a). A(b). B(a,c). B(b,c). B(c,d).").unwrap().iter().collect();
//! let mut state = materialise(program, &facts, CounterMode::Both).unwrap();
//! assert_eq!(state.facts().len(), 7);
//!
//! let report = state.update(Algorithm::DredC, &parse_delta("- A(a).").unwrap()).unwrap();
//! assert_eq!(report.removed.len(), 1);
//! assert_eq!(report.stats.backward_candidates(), 0);
//! ```
//!
//! [`harness`] generates benchmark families and random programs and checks
//! results against rematerialisation; the `dlivm` binary exposes it.

pub mod error;
pub mod eval;
pub mod harness;
pub mod maintain;
pub mod model;
pub mod parser;
pub mod store;

pub use error::EngineError;
pub use eval::materialise;
pub use maintain::{Algorithm, Observer, Phase, UpdateReport, UpdateStats};
pub use model::{Fact, Program, Rule, Value};
pub use parser::{parse_delta, parse_facts, parse_program, Delta};
pub use store::{recount_counters, CounterMode, Counts, EngineState, FactSet};
