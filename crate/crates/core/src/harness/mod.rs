//! Benchmark and fuzzing generators, random updates, the rematerialisation
//! oracle and benchmark suites.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::error::EngineError;
use crate::parser::ParseError;

mod bench;
mod files;
mod generate;
mod verify;

pub use bench::{run_algorithms, run_suite, Suite, SuiteSummary};
pub use generate::{
    gen_path_enumeration, gen_random, gen_reachability, gen_self_join, gen_sspe, random_delete,
    random_program_text, random_update, BenchmarkSpec, Instance, RandomSpec, SspeSpec,
};
pub use files::{read_delta, read_facts, read_program};
pub use verify::{verify_update, VerifyReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot build a rooted DAG with {nodes} nodes and {edges} edges")]
    InfeasibleGraph { nodes: usize, edges: usize },
    #[error("cannot delete {k} facts from a set of {available}")]
    TooManyDeletions { k: usize, available: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}:{source}", path.display())]
    ParseFile { path: PathBuf, source: ParseError },
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
