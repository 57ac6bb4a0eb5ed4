//! Conserved quantities of the payoff-gap dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{memory_for_len, state_count, HistoryIndex, StrategyVector};

/// `(G1, G2, G3)` of a memory-1 strategy `(CC, CD, DC, DD)`.
pub fn conserved_quantities_memory1(p: &[f64]) -> [f64; 3] {
    let [cc, cd, dc, dd] = [p[0], p[1], p[2], p[3]];
    let g1 = cd - dc;
    let g2 = (-cc.powi(3) + 3.0 * cc - 3.0 * cd * dc * dc + dc.powi(3) - dd.powi(3)) / 3.0;
    let g3 = (1.0 - cc).powi(2) + cd * cd + (1.0 - dc).powi(2) + dd * dd;
    [g1, g2, g3]
}

/// Gradients of `(G1, G2, G3)`.
pub fn conserved_gradients_memory1(p: &[f64]) -> [[f64; 4]; 3] {
    let [cc, cd, dc, dd] = [p[0], p[1], p[2], p[3]];
    [
        [0.0, 1.0, -1.0, 0.0],
        [1.0 - cc * cc, -dc * dc, dc * dc - 2.0 * cd * dc, -dd * dd],
        [-2.0 * (1.0 - cc), 2.0 * cd, -2.0 * (1.0 - dc), 2.0 * dd],
    ]
}

/// Suffixes of `n - 1` rounds in which both players acted alike every round,
/// as bit patterns of width `2(n-1)`. There are `2^{n-1}` of them.
pub fn valid_suffixes(n: usize) -> Vec<usize> {
    (0..1usize << (n - 1))
        .map(|mask| {
            (0..n - 1).fold(
                0usize,
                |acc, k| {
                    if mask >> k & 1 == 1 {
                        acc | (3 << (2 * k))
                    } else {
                        acc
                    }
                },
            )
        })
        .collect()
}

fn check_suffix(n: usize, suffix: usize) -> Result<()> {
    if n == 0 || suffix >= state_count(n - 1).max(1) {
        return Err(Error::Domain(format!("suffix {suffix:#b} too wide for memory {n}")));
    }
    for k in 0..n - 1 {
        let pair = suffix >> (2 * k) & 3;
        if pair == 1 || pair == 2 {
            return Err(Error::Domain(format!(
                "suffix {suffix:#b}: round {k} is a mixed pair, players must act alike"
            )));
        }
    }
    Ok(())
}

/// `p[CD . I] - p[DC . I]` for a suffix `I` of `n - 1` alike rounds.
pub fn conserved_pair_difference(p: &StrategyVector, suffix: usize) -> Result<f64> {
    pair_difference(p.probs(), suffix)
}

pub fn pair_difference(p: &[f64], suffix: usize) -> Result<f64> {
    let n = memory_for_len(p.len())?;
    check_suffix(n, suffix)?;
    let shift = 2 * (n - 1);
    Ok(p[(0b01 << shift) | suffix] - p[(0b10 << shift) | suffix])
}

/// Parse a suffix label such as `"CCDD"`; the empty label is valid at `n = 1`.
pub fn parse_suffix(label: &str) -> Result<usize> {
    if label.is_empty() {
        return Ok(0);
    }
    Ok(HistoryIndex::from_label(label)?.bits())
}

pub fn suffix_label(n: usize, suffix: usize) -> String {
    if n == 1 {
        return String::new();
    }
    HistoryIndex::new(n - 1, suffix).map(|h| h.label()).unwrap_or_default()
}

/// `(1 - p1)^2 + p2^2`, the squared distance of a reactive strategy to TFT.
pub fn reactive_circle(p1: f64, p2: f64) -> f64 {
    (1.0 - p1).powi(2) + p2 * p2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConservedQuantity {
    G1,
    G2,
    G3,
    /// Suffix bits; see [`valid_suffixes`].
    PairDifference(usize),
    /// Reactive coordinates read from a memory-1 vector `(p1, p2, p1, p2)`.
    ReactiveCircle,
}

impl ConservedQuantity {
    pub fn id(&self, n: usize) -> String {
        match self {
            ConservedQuantity::G1 => "G1".into(),
            ConservedQuantity::G2 => "G2".into(),
            ConservedQuantity::G3 => "G3".into(),
            ConservedQuantity::PairDifference(s) => format!("pair_difference({})", suffix_label(n, *s)),
            ConservedQuantity::ReactiveCircle => "reactive_circle".into(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let g = |k: usize| -> Result<f64> {
            if x.len() != 4 {
                return Err(Error::Dimension {
                    expected: 4,
                    got: x.len(),
                });
            }
            Ok(conserved_quantities_memory1(x)[k])
        };
        match self {
            ConservedQuantity::G1 => g(0),
            ConservedQuantity::G2 => g(1),
            ConservedQuantity::G3 => g(2),
            ConservedQuantity::PairDifference(s) => pair_difference(x, *s),
            ConservedQuantity::ReactiveCircle => Ok(reactive_circle(x[0], x[1])),
        }
    }

    /// The quantities expected to be conserved by the antisymmetric field.
    pub fn for_memory(n: usize) -> Vec<ConservedQuantity> {
        if n == 1 {
            vec![ConservedQuantity::G1, ConservedQuantity::G2, ConservedQuantity::G3]
        } else {
            valid_suffixes(n)
                .into_iter()
                .map(ConservedQuantity::PairDifference)
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedReport {
    pub quantity: String,
    pub initial: f64,
    pub max_drift: f64,
    /// `max_drift / max(|initial|, 1)`.
    pub relative_drift: f64,
    /// `relative_drift` divided by the integrated time span.
    pub drift_per_unit_time: f64,
}

/// Drift of `quantity` along a sequence of states spanning `duration`.
pub fn drift_report(
    quantity: &ConservedQuantity,
    n: usize,
    states: &[Vec<f64>],
    duration: f64,
) -> Result<ConservedReport> {
    let initial = quantity.evaluate(&states[0])?;
    let mut max_drift: f64 = 0.0;
    for s in states {
        max_drift = max_drift.max((quantity.evaluate(s)? - initial).abs());
    }
    let relative_drift = max_drift / initial.abs().max(1.0);
    Ok(ConservedReport {
        quantity: quantity.id(n),
        initial,
        max_drift,
        relative_drift,
        drift_per_unit_time: if duration > 0.0 { relative_drift / duration } else { 0.0 },
    })
}
