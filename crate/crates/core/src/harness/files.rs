use std::fs;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::model::Program;
use crate::parser::{parse_delta, parse_facts, parse_program, Delta, ParseError};
use crate::store::FactSet;

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::File { path: path.to_path_buf(), source })
}

fn located(path: &Path) -> impl FnOnce(ParseError) -> HarnessError + '_ {
    move |source| HarnessError::ParseFile { path: PathBuf::from(path), source }
}

pub fn read_program(path: &Path) -> Result<Program, HarnessError> {
    parse_program(&read(path)?).map_err(located(path))
}

pub fn read_facts(path: &Path) -> Result<FactSet, HarnessError> {
    Ok(parse_facts(&read(path)?).map_err(located(path))?.iter().collect())
}

pub fn read_delta(path: &Path) -> Result<Delta, HarnessError> {
    parse_delta(&read(path)?).map_err(located(path))
}
