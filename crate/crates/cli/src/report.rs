//! The verification report written by `memn verify`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    /// What property of the model the check exercises.
    pub anchor: String,
    /// `null` when the check could not produce a number.
    pub max_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub n_max: usize,
    pub trials: usize,
    pub tolerance_ledger: String,
    pub tolerance_ledger_sha256: String,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl VerificationReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// `(id, pass)` pairs, the part of a report that must not depend on the seed.
    pub fn verdicts(&self) -> Vec<(String, bool)> {
        self.checks.iter().map(|c| (c.id.clone(), c.pass)).collect()
    }

    /// One line per check, for terminals.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let res = c.max_residual.map_or_else(|| "n/a".to_string(), |r| format!("{r:.3e}"));
            s.push_str(&format!(
                "{} {:<36} residual {:>10} tol {:.1e} ({:.2}s)\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.id,
                res,
                c.tolerance,
                c.wall_time_s
            ));
        }
        let failed = self.failed().count();
        s.push_str(&format!(
            "{} checks, {} failed, {:.1}s\n",
            self.checks.len(),
            failed,
            self.wall_time_s
        ));
        s
    }
}
