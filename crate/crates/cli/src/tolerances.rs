//! The tolerance ledger: every threshold and pinned parameter of the battery.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const ENV_VAR: &str = "MEMN_TOLERANCES";
pub const DEFAULT_LEDGER: &str = include_str!("../tolerances.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub structure: StructureTol,
    pub symmetry: SymmetryTol,
    pub payoff: PayoffTol,
    pub field: FieldTol,
    pub conserved: ConservedTol,
    pub tft: TftTol,
    pub mirror: MirrorTol,
    pub perturbation: PerturbationTol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureTol {
    pub recursion: f64,
    pub row_sum: f64,
    pub factorization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryTol {
    pub conjugation: f64,
    pub non_j_samples: usize,
    pub admissibility_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffTol {
    pub method_equivalence: f64,
    pub reactive_closed_form: f64,
    pub constant_shift: f64,
    pub decomposition: f64,
    pub reflection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTol {
    pub finite_difference_h: f64,
    pub gradient_relative: f64,
    pub closed_form_relative: f64,
    pub closure: f64,
    pub counting_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConservedTol {
    pub dt: f64,
    pub t_max: f64,
    pub starts: usize,
    pub drift_per_unit_time: f64,
    pub polyfit_samples: usize,
    pub polyfit_degree: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TftTol {
    pub eps: Vec<f64>,
    pub min_order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorTol {
    pub starts: usize,
    pub dt: f64,
    pub t_max: f64,
    pub memory_one: f64,
    /// Used for every memory `n >= 2`.
    pub memory_two: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationTol {
    pub start: [f64; 3],
    pub c: f64,
    /// Two values one decade apart, larger first.
    pub eps: [f64; 2],
    pub dt: f64,
    pub t_max: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

/// A parsed ledger together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct Ledger {
    pub tolerances: Tolerances,
    pub sha256: String,
    pub source: String,
}

impl Ledger {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let tolerances: Tolerances = toml::from_str(text).map_err(|e| CliError::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        Ok(Self {
            tolerances,
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
            source: source.to_string(),
        })
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEDGER, "builtin").expect("the bundled ledger parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// The ledger named by `MEMN_TOLERANCES`, else the bundled one.
    pub fn from_env() -> Result<Self, CliError> {
        match std::env::var_os(ENV_VAR) {
            Some(p) if !p.is_empty() => Self::from_file(Path::new(&p)),
            _ => Ok(Self::builtin()),
        }
    }
}
