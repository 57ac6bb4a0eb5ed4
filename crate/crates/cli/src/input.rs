//! Strategy and state files.
//!
//! Two formats are accepted. JSON: either a bare array of numbers or an
//! object `{"n": .., "probs": [..]}`. Text: numbers separated by whitespace
//! or commas, any number per line, `#` starts a comment.

use std::path::Path;

use memn_core::model::{memory_for_len, reactive_to_full, StrategyVector};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonVector {
    Bare(Vec<f64>),
    Tagged { n: usize, probs: Vec<f64> },
}

struct Located {
    value: f64,
    line: usize,
    field: usize,
}

fn parse_err(source: &str, message: String) -> CliError {
    CliError::Parse {
        path: source.to_string(),
        message,
    }
}

fn parse_text(text: &str, source: &str) -> Result<Vec<Located>, CliError> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        let fields = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        for (k, tok) in fields.enumerate() {
            let value = tok.parse::<f64>().map_err(|_| {
                parse_err(
                    source,
                    format!("line {}, field {}: `{tok}` is not a number", ln + 1, k + 1),
                )
            })?;
            out.push(Located {
                value,
                line: ln + 1,
                field: k + 1,
            });
        }
    }
    Ok(out)
}

fn parse_json(text: &str, source: &str) -> Result<(Option<usize>, Vec<f64>), CliError> {
    let v: JsonVector = serde_json::from_str(text)
        .map_err(|e| parse_err(source, format!("line {}, column {}: {e}", e.line(), e.column())))?;
    Ok(match v {
        JsonVector::Bare(p) => (None, p),
        JsonVector::Tagged { n, probs } => (Some(n), probs),
    })
}

/// Read a raw vector of probabilities, checking that each lies in `[0, 1]`.
pub fn parse_vector(text: &str, source: &str) -> Result<Vec<f64>, CliError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') || trimmed.starts_with('{') {
        let (n, probs) = parse_json(text, source)?;
        for (i, p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(parse_err(source, format!("entry {i}: {p} is not a probability")));
            }
        }
        if let Some(n) = n {
            StrategyVector::new(n, probs.clone()).map_err(|e| parse_err(source, e.to_string()))?;
        }
        return Ok(probs);
    }
    let vals = parse_text(text, source)?;
    if let Some(bad) = vals.iter().find(|v| !(0.0..=1.0).contains(&v.value)) {
        return Err(parse_err(
            source,
            format!(
                "line {}, field {}: {} is not a probability",
                bad.line, bad.field, bad.value
            ),
        ));
    }
    if vals.is_empty() {
        return Err(parse_err(source, "no numbers found".into()));
    }
    Ok(vals.into_iter().map(|v| v.value).collect())
}

/// A strategy of memory `n`; with `reactive`, two entries `(p1, p2)` are
/// embedded as the memory-one vector `(p1, p2, p1, p2)`.
pub fn parse_strategy(text: &str, source: &str, n: Option<usize>, reactive: bool) -> Result<StrategyVector, CliError> {
    let probs = parse_vector(text, source)?;
    let s = if reactive {
        if probs.len() != 2 {
            return Err(parse_err(
                source,
                format!("a reactive strategy has 2 entries, found {}", probs.len()),
            ));
        }
        reactive_to_full(probs[0], probs[1])?
    } else {
        let m = memory_for_len(probs.len()).map_err(|_| {
            parse_err(
                source,
                format!("{} entries is not 4^n for any memory n >= 1", probs.len()),
            )
        })?;
        StrategyVector::new(m, probs).map_err(|e| parse_err(source, e.to_string()))?
    };
    if let Some(n) = n {
        if s.n() != n {
            return Err(parse_err(
                source,
                format!(
                    "expected memory {n} ({} entries), found memory {}",
                    1usize << (2 * n),
                    s.n()
                ),
            ));
        }
    }
    Ok(s)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_strategy(path: &Path, n: Option<usize>, reactive: bool) -> Result<StrategyVector, CliError> {
    parse_strategy(&read_text(path)?, &path.display().to_string(), n, reactive)
}
