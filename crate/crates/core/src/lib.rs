//! Memory-N repeated donation games.
//!
//! Two players remember the outcomes of the last `n` rounds and cooperate with
//! probabilities conditioned on that history. This crate builds the resulting
//! Markov chain, evaluates long-run payoffs, exposes the eight admissible
//! relabelling symmetries of the chain and computes the adaptive-dynamics vector
//! fields (full, symmetric and anti-symmetric) together with their conserved
//! quantities.
//!
//! Conventions shared by every module:
//!
//! * A history of `n` rounds is a `2n`-bit integer. Each round occupies two
//!   bits, focal player first; the oldest round sits in the most significant
//!   pair. Bit value `0` is cooperation, `1` defection. Numeric order of the
//!   integer is therefore the lexicographic order of `C/D` strings with `C < D`.
//! * Strategy vectors have `4^n` entries in that order.
//!
//! ```
//! use memn_core::model::{GameParams, PayoffVector, StrategyVector};
//! use memn_core::markov::{payoff, PayoffMethod};
//!
//! let f = PayoffVector::build(&GameParams::donation(2.0, 1.0).unwrap(), 1, true);
//! let half = StrategyVector::uniform(1, 0.5).unwrap();
//! let a = payoff(&half, &half, f.values(), PayoffMethod::Determinant).unwrap();
//! assert!((a - 0.5).abs() < 1e-12);
//! ```

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod markov;
pub mod model;
pub mod symmetry;

pub use error::{Error, Result};
