use std::path::{Path, PathBuf};
use std::str::FromStr;

use flexdr::blocksparse::{write_bsr_binary, write_matrix_market, ProblemInstance};
use serde::Deserialize;

use crate::config::ProblemConfig;
use crate::run::build_problem;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    Convdiff,
    Spectrum,
}

impl FromStr for GenKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "convdiff" => Ok(GenKind::Convdiff),
            "spectrum" => Ok(GenKind::Spectrum),
            other => Err(HarnessError::Argument(format!(
                "unknown generator {other:?}, expected convdiff or spectrum"
            ))),
        }
    }
}

impl GenKind {
    fn tag(self) -> &'static str {
        match self {
            GenKind::Convdiff => "convdiff",
            GenKind::Spectrum => "spectrum",
        }
    }
}

/// Parses `key=value` pairs; values use TOML syntax (`small=[1e-4,2e-4]`)
/// and fall back to plain strings.
pub fn parse_params(params: &[String]) -> Result<toml::Table, HarnessError> {
    let mut table = toml::Table::new();
    for p in params {
        let (key, value) = p
            .split_once('=')
            .ok_or_else(|| HarnessError::Argument(format!("parameter {p:?} is not key=value")))?;
        let key = key.trim();
        if key.is_empty() || key == "kind" {
            return Err(HarnessError::Argument(format!("invalid parameter name in {p:?}")));
        }
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
    }
    Ok(table)
}

/// Builds the described problem.
pub fn generate(kind: GenKind, params: &toml::Table) -> Result<ProblemInstance, HarnessError> {
    let mut table = params.clone();
    table.insert("kind".into(), toml::Value::String(kind.tag().into()));
    let problem = ProblemConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| HarnessError::Config(format!("generator parameters: {e}")))?;
    problem.validate()?;
    build_problem(&problem)
}

/// Writes the matrix as Matrix Market (`.mtx`) or binary BSR (`.bsr`).
pub fn write_matrix(instance: &ProblemInstance, out: &Path) -> Result<PathBuf, HarnessError> {
    match out.extension().and_then(|e| e.to_str()) {
        Some("mtx") => write_matrix_market(&instance.matrix, out)?,
        Some("bsr") => write_bsr_binary(&instance.matrix, out)?,
        _ => {
            return Err(HarnessError::Argument(format!(
                "{}: output must end in .mtx or .bsr",
                out.display()
            )))
        }
    }
    Ok(out.to_path_buf())
}
