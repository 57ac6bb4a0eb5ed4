//! Histories, strategies, games and payoff vectors.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported memory length. `4^12` states is already far beyond what
/// the dense Markov machinery can handle.
pub const MAX_MEMORY: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    C,
    D,
}

impl Action {
    pub fn bit(self) -> usize {
        match self {
            Action::C => 0,
            Action::D => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit & 1 == 0 {
            Action::C
        } else {
            Action::D
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Action::C => Action::D,
            Action::D => Action::C,
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c {
            'C' | 'c' => Some(Action::C),
            'D' | 'd' => Some(Action::D),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::C => f.write_str("C"),
            Action::D => f.write_str("D"),
        }
    }
}

/// Number of histories (Markov states) for memory `n`.
#[inline]
pub fn state_count(n: usize) -> usize {
    1usize << (2 * n)
}

#[inline]
fn even_mask(n: usize) -> usize {
    // 0b0101...01 over 2n bits: the opponent's bit of every round.
    let mut m = 0usize;
    for k in 0..n {
        m |= 1 << (2 * k);
    }
    m
}

/// Swap the focal and opponent bit of every round.
#[inline]
pub fn bar_bits(bits: usize, n: usize) -> usize {
    let lo = even_mask(n);
    let hi = lo << 1;
    ((bits & hi) >> 1) | ((bits & lo) << 1)
}

/// Flip every action of every round.
#[inline]
pub fn complement_bits(bits: usize, n: usize) -> usize {
    bits ^ (state_count(n) - 1)
}

/// A game history of `n` rounds, see the crate documentation for the bit layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryIndex {
    n: usize,
    bits: usize,
}

impl HistoryIndex {
    pub fn new(n: usize, bits: usize) -> Result<Self> {
        check_memory(n)?;
        if bits >= state_count(n) {
            return Err(Error::Domain(format!(
                "history bits {bits} out of range for memory {n}"
            )));
        }
        Ok(Self { n, bits })
    }

    /// Encode rounds given oldest first, each as `(focal, opponent)`.
    pub fn encode(rounds: &[(Action, Action)], n: usize) -> Result<Self> {
        check_memory(n)?;
        if rounds.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: rounds.len(),
            });
        }
        let bits = rounds
            .iter()
            .fold(0usize, |acc, &(me, other)| (acc << 2) | (me.bit() << 1) | other.bit());
        Ok(Self { n, bits })
    }

    /// Parse a label such as `"CDDC"` (length `2n`).
    pub fn from_label(label: &str) -> Result<Self> {
        let actions: Vec<Action> = label
            .chars()
            .map(|c| Action::from_char(c).ok_or_else(|| Error::Domain(format!("invalid action `{c}` in `{label}`"))))
            .collect::<Result<_>>()?;
        if actions.is_empty() || actions.len() % 2 != 0 {
            return Err(Error::Domain(format!(
                "history label `{label}` must have an even, non-zero length"
            )));
        }
        let rounds: Vec<_> = actions.chunks(2).map(|p| (p[0], p[1])).collect();
        Self::encode(&rounds, rounds.len())
    }

    pub fn decode(&self) -> Vec<(Action, Action)> {
        (0..self.n)
            .rev()
            .map(|k| {
                let pair = (self.bits >> (2 * k)) & 3;
                (Action::from_bit(pair >> 1), Action::from_bit(pair))
            })
            .collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// The same history told from the co-player's point of view.
    pub fn bar(&self) -> Self {
        Self {
            n: self.n,
            bits: bar_bits(self.bits, self.n),
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            n: self.n,
            bits: complement_bits(self.bits, self.n),
        }
    }

    pub fn label(&self) -> String {
        self.decode().into_iter().map(|(a, b)| format!("{a}{b}")).collect()
    }
}

impl fmt::Display for HistoryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn check_memory(n: usize) -> Result<()> {
    if n == 0 || n > MAX_MEMORY {
        return Err(Error::Domain(format!(
            "memory length must lie in 1..={MAX_MEMORY}, got {n}"
        )));
    }
    Ok(())
}

fn check_len(n: usize, len: usize) -> Result<()> {
    check_memory(n)?;
    if len != state_count(n) {
        return Err(Error::Dimension {
            expected: state_count(n),
            got: len,
        });
    }
    Ok(())
}

/// Cooperation probabilities after each of the `4^n` histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStrategy")]
pub struct StrategyVector {
    n: usize,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawStrategy {
    n: usize,
    probs: Vec<f64>,
}

impl TryFrom<RawStrategy> for StrategyVector {
    type Error = Error;

    fn try_from(raw: RawStrategy) -> Result<Self> {
        StrategyVector::new(raw.n, raw.probs)
    }
}

impl StrategyVector {
    pub fn new(n: usize, probs: Vec<f64>) -> Result<Self> {
        check_len(n, probs.len())?;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("probs[{i}] = {p} is not a probability")));
            }
        }
        Ok(Self { n, probs })
    }

    /// Infer the memory length from the vector length.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        let n = memory_for_len(probs.len())?;
        Self::new(n, probs)
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        check_memory(n)?;
        Self::new(n, vec![value; state_count(n)])
    }

    /// Entries drawn uniformly from `[margin, 1 - margin]`.
    pub fn random_interior<R: Rng + ?Sized>(n: usize, rng: &mut R, margin: f64) -> Self {
        let probs = (0..state_count(n))
            .map(|_| rng.gen_range(margin..=1.0 - margin))
            .collect();
        Self { n, probs }
    }

    /// Entries of the form `k / 2^bits` with `0 < k < 2^bits`. Complements and
    /// pairwise products of such numbers are exact in `f64` for `bits <= 26`,
    /// which lets permutation identities be compared bit for bit.
    pub fn random_dyadic<R: Rng + ?Sized>(n: usize, rng: &mut R, bits: u32) -> Self {
        assert!((1..=26).contains(&bits), "dyadic resolution out of range");
        let scale = (1u64 << bits) as f64;
        let probs = (0..state_count(n))
            .map(|_| rng.gen_range(1..(1u64 << bits)) as f64 / scale)
            .collect();
        Self { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    /// Smallest distance of any entry to `{0, 1}`.
    pub fn margin(&self) -> f64 {
        cube_distance(&self.probs)
    }

    pub fn interior(&self, eps: f64) -> bool {
        self.margin() >= eps
    }

    /// Exchange the meaning of C and D: entry `i` becomes `1 - p[!i]`.
    pub fn label_swap(&self) -> Self {
        let last = self.probs.len() - 1;
        let probs = (0..self.probs.len()).map(|i| 1.0 - self.probs[last - i]).collect();
        Self { n: self.n, probs }
    }

    pub fn clamped(&self, eps: f64) -> Self {
        Self {
            n: self.n,
            probs: self.probs.iter().map(|&p| p.clamp(eps, 1.0 - eps)).collect(),
        }
    }
}

/// `min_i min(x_i, 1 - x_i)`.
pub fn cube_distance(x: &[f64]) -> f64 {
    x.iter().map(|&v| v.min(1.0 - v)).fold(f64::INFINITY, f64::min)
}

pub fn memory_for_len(len: usize) -> Result<usize> {
    (1..=MAX_MEMORY)
        .find(|&n| state_count(n) == len)
        .ok_or_else(|| Error::Domain(format!("length {len} is not 4^n for any n >= 1")))
}

/// Tit-for-tat: cooperate iff the co-player cooperated in the most recent round.
pub fn tft_strategy(n: usize) -> StrategyVector {
    let probs = (0..state_count(n))
        .map(|i| if i & 1 == 0 { 1.0 } else { 0.0 })
        .collect();
    StrategyVector { n, probs }
}

/// Tit-for-tat pulled into the interior, entries clamped to `[eps, 1 - eps]`.
pub fn tft_interior(n: usize, eps: f64) -> StrategyVector {
    tft_strategy(n).clamped(eps)
}

/// Embed a counting strategy `(q2, q1, q0)`, indexed by the number of
/// cooperators last round, as the memory-1 vector `(q2, q1, q1, q0)`.
pub fn counting_to_full(q2: f64, q1: f64, q0: f64) -> Result<StrategyVector> {
    for (name, v) in [("q2", q2), ("q1", q1), ("q0", q0)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} = {v} is not a probability")));
        }
    }
    Ok(StrategyVector {
        n: 1,
        probs: vec![q2, q1, q1, q0],
    })
}

/// Embed a reactive strategy: `p1` after the co-player cooperated, `p2` after it
/// defected. The same embedding is used for either player because every
/// strategy is indexed from its owner's point of view.
pub fn reactive_to_full(p1: f64, p2: f64) -> Result<StrategyVector> {
    StrategyVector::new(1, vec![p1, p2, p1, p2])
}

/// One-shot payoffs `(R, S, T, P)` seen by the row player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub p: f64,
    /// Benefit and cost when the game was built as a donation game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donation: Option<(f64, f64)>,
}

impl GameParams {
    pub fn new(r: f64, s: f64, t: f64, p: f64) -> Self {
        Self {
            r,
            s,
            t,
            p,
            donation: None,
        }
    }

    /// `R = b - c`, `S = -c`, `T = b`, `P = 0`. `b == c` is accepted as the
    /// neutral limit of the dilemma.
    pub fn donation(b: f64, c: f64) -> Result<Self> {
        if !b.is_finite() || !c.is_finite() || c < 0.0 || b < c {
            return Err(Error::Domain(format!(
                "donation game needs b >= c >= 0, got b = {b}, c = {c}"
            )));
        }
        Ok(Self {
            r: b - c,
            s: -c,
            t: b,
            p: 0.0,
            donation: Some((b, c)),
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [self.r, self.s, self.t, self.p]
    }

    pub fn is_prisoners_dilemma(&self) -> bool {
        self.t > self.r && self.r > self.p && self.p > self.s && 2.0 * self.r > self.t + self.s
    }

    pub fn has_equal_gains(&self) -> bool {
        let lhs = self.r + self.p;
        let rhs = self.t + self.s;
        (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0)
    }

    pub fn check_prisoners_dilemma(&self) -> Result<()> {
        if self.is_prisoners_dilemma() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "not a prisoner's dilemma: need T > R > P > S and 2R > T + S, got {:?}",
                self.values()
            )))
        }
    }

    pub fn check_equal_gains(&self) -> Result<()> {
        if self.has_equal_gains() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "equal gains from switching violated: R + P = {} but T + S = {}",
                self.r + self.p,
                self.t + self.s
            )))
        }
    }
}

/// Per-history one-round payoffs of the focal player.
///
/// With `normalized` set, entry `i` is the mean payoff over the `n` rounds
/// recorded in history `i`; otherwise it is the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector {
    n: usize,
    #[serde(rename = "probs")]
    values: Vec<f64>,
    params: GameParams,
    normalized: bool,
}

impl PayoffVector {
    /// Recursive construction: prepend one round (the new oldest pair) at a time.
    pub fn build(params: &GameParams, n: usize, normalized: bool) -> Self {
        assert!((1..=MAX_MEMORY).contains(&n), "memory length out of range");
        let base = params.values();
        let mut values = base.to_vec();
        for level in 2..=n {
            let (keep, add) = if normalized {
                let nf = level as f64;
                ((nf - 1.0) / nf, 1.0 / nf)
            } else {
                (1.0, 1.0)
            };
            let mut next = Vec::with_capacity(values.len() * 4);
            for &x in &base {
                next.extend(values.iter().map(|&v| keep * v + add * x));
            }
            values = next;
        }
        Self {
            n,
            values,
            params: *params,
            normalized,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Add `c` to every one-shot payoff.
    pub fn shifted(&self, c: f64) -> Self {
        let per_round = if self.normalized { c } else { c / self.n as f64 };
        let p = &self.params;
        let params = GameParams {
            r: p.r + per_round,
            s: p.s + per_round,
            t: p.t + per_round,
            p: p.p + per_round,
            donation: None,
        };
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v + c).collect(),
            params,
            normalized: self.normalized,
        }
    }

    /// `(f + J2 f) / 2`, the payoff vector of the player-symmetric game.
    pub fn symmetric_part(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| 0.5 * (self.values[i] + self.values[bar_bits(i, self.n)]))
            .collect()
    }

    /// `(f - J2 f) / 2`, the payoff vector of the payoff-gap game.
    pub fn antisymmetric_part(&self) -> Vec<f64> {
        (0..self.values.len())
            .map(|i| 0.5 * (self.values[i] - self.values[bar_bits(i, self.n)]))
            .collect()
    }
}

/// The constant `K_n` with `-f + K_n 1 = J8 f` for equal-gains games.
///
/// `K_1 = R + P`, `K_n = (n-1)/n K_{n-1} + (R+P)/n`; for the unnormalized vector
/// the constant is `n` times larger.
pub fn k_constant(params: &GameParams, n: usize) -> Result<f64> {
    params.check_equal_gains()?;
    Ok(k_recursion(params, n))
}

pub(crate) fn k_recursion(params: &GameParams, n: usize) -> f64 {
    let base = params.r + params.p;
    (2..=n).fold(base, |k, level| {
        let nf = level as f64;
        (nf - 1.0) / nf * k + base / nf
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{C, D};

    #[test]
    fn encode_examples() {
        assert_eq!(HistoryIndex::encode(&[(C, C)], 1).unwrap().bits(), 0);
        assert_eq!(HistoryIndex::encode(&[(D, D)], 1).unwrap().bits(), 3);
        let h = HistoryIndex::encode(&[(C, C), (C, D), (D, C)], 3).unwrap();
        assert_eq!(h.bits(), 0b000110);
        assert_eq!(h.label(), "CCCDDC");
        assert_eq!(HistoryIndex::encode(&[(D, C), (C, D)], 2).unwrap().bits(), 9);
    }

    #[test]
    fn encode_rejects_wrong_length() {
        assert_eq!(
            HistoryIndex::encode(&[(C, C)], 2),
            Err(Error::Dimension { expected: 2, got: 1 })
        );
    }

    #[test]
    fn lexicographic_order_is_numeric_order() {
        // independent enumeration: all strings over {C, D} of length 4, sorted
        let mut labels: Vec<String> = (0..16)
            .map(|k: u32| {
                (0..4)
                    .rev()
                    .map(|j| if (k >> j) & 1 == 0 { 'C' } else { 'D' })
                    .collect()
            })
            .collect();
        labels.sort();
        let pos = labels.iter().position(|l| l == "DCCD").unwrap();
        assert_eq!(pos, 9);
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(HistoryIndex::from_label(l).unwrap().bits(), i);
        }
    }

    #[test]
    fn bar_examples() {
        let h = HistoryIndex::from_label("CDDD").unwrap();
        assert_eq!(h.bits(), 0b0111);
        assert_eq!(h.bar().label(), "DCDD");
        assert_eq!(h.bar().bits(), 0b1011);
        assert_eq!(HistoryIndex::from_label("CDCD").unwrap().bar().label(), "DCDC");
        assert_eq!(HistoryIndex::from_label("CCDD").unwrap().bar().label(), "CCDD");
    }

    #[test]
    fn bar_complement_commuting_involutions() {
        for n in 1..=4 {
            for bits in 0..state_count(n) {
                let h = HistoryIndex::new(n, bits).unwrap();
                assert_eq!(h.bar().bar(), h);
                assert_eq!(h.complement().complement(), h);
                assert_eq!(h.bar().complement(), h.complement().bar());
                assert_eq!(HistoryIndex::encode(&h.decode(), n).unwrap(), h);
            }
        }
    }

    #[test]
    fn label_swap_examples() {
        let tft = tft_strategy(1);
        assert_eq!(tft.probs(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(tft.label_swap(), tft);
        let allc = StrategyVector::uniform(1, 1.0).unwrap();
        assert_eq!(allc.label_swap().probs(), &[0.0; 4]);
        let p = StrategyVector::new(1, vec![0.125, 0.25, 0.5, 0.75]).unwrap();
        assert_eq!(p.label_swap().probs(), &[0.25, 0.5, 0.75, 0.875]);
    }

    #[test]
    fn strategy_validation() {
        assert!(matches!(
            StrategyVector::new(1, vec![0.5; 3]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            StrategyVector::new(1, vec![0.5, f64::NAN, 0.5, 0.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            StrategyVector::new(1, vec![0.5, 1.5, 0.5, 0.5]),
            Err(Error::Domain(_))
        ));
        assert!(StrategyVector::new(0, vec![0.5]).is_err());
        let s = StrategyVector::new(1, vec![0.1, 0.5, 0.5, 0.95]).unwrap();
        assert!(s.interior(0.05));
        assert!(!s.interior(0.06));
    }

    #[test]
    fn strategy_json_shape() {
        let s = StrategyVector::new(1, vec![0.25, 0.5, 0.5, 1.0]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"n":1,"probs":[0.25,0.5,0.5,1.0]}"#);
        let back: StrategyVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<StrategyVector>(r#"{"n":1,"probs":[2,0,0,0]}"#).is_err());
    }

    #[test]
    fn tft_examples() {
        let t2 = tft_strategy(2);
        for i in 0..16 {
            assert_eq!(t2.get(i), if i & 1 == 0 { 1.0 } else { 0.0 });
        }
        let h = HistoryIndex::encode(&[(D, D), (D, C)], 2).unwrap();
        assert_eq!(t2.get(h.bits()), 1.0);
        let t = tft_interior(1, 1e-3);
        assert_eq!(t.probs(), &[1.0 - 1e-3, 1e-3, 1.0 - 1e-3, 1e-3]);
    }

    #[test]
    fn counting_embedding() {
        assert_eq!(counting_to_full(1.0, 0.0, 0.0).unwrap().probs(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            counting_to_full(0.5, 0.5, 0.5).unwrap(),
            StrategyVector::uniform(1, 0.5).unwrap()
        );
        assert_eq!(counting_to_full(0.9, 0.5, 0.1).unwrap().probs(), &[0.9, 0.5, 0.5, 0.1]);
        assert!(counting_to_full(1.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn payoff_vector_examples() {
        let d = GameParams::donation(2.0, 1.0).unwrap();
        assert_eq!(PayoffVector::build(&d, 1, true).values(), &[1.0, -1.0, 2.0, 0.0]);

        let g = GameParams::new(3.0, 0.5, 5.0, 1.0);
        let f2 = PayoffVector::build(&g, 2, true);
        let expect = [
            (3.0 + 3.0) / 2.0,
            (3.0 + 0.5) / 2.0,
            (3.0 + 5.0) / 2.0,
            (3.0 + 1.0) / 2.0,
        ];
        for (a, b) in f2.values()[..4].iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let f3 = PayoffVector::build(&g, 3, true);
        let h = HistoryIndex::encode(&[(C, C), (C, D), (D, C)], 3).unwrap();
        assert!((f3.values()[h.bits()] - (3.0 + 0.5 + 5.0) / 3.0).abs() < 1e-14);

        let raw = PayoffVector::build(&g, 3, false);
        assert!((raw.values()[h.bits()] - (3.0 + 0.5 + 5.0)).abs() < 1e-14);
    }

    #[test]
    fn k_constant_examples() {
        let g = GameParams::new(3.0, 0.5, 3.5, 1.0);
        assert_eq!(k_constant(&g, 1).unwrap(), 4.0);
        assert!((k_constant(&g, 5).unwrap() - 4.0).abs() < 1e-14);
        let d = GameParams::donation(2.0, 1.0).unwrap();
        for n in 1..=10 {
            assert!((k_constant(&d, n).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(k_constant(&GameParams::new(3.0, 0.0, 5.0, 1.0), 2).is_err());
    }

    #[test]
    fn game_checks() {
        let d = GameParams::donation(2.0, 1.0).unwrap();
        assert!(d.is_prisoners_dilemma());
        assert!(d.has_equal_gains());
        assert!(GameParams::donation(1.0, 2.0).is_err());
        assert!(GameParams::new(3.0, 0.0, 5.0, 1.0).check_equal_gains().is_err());
        assert!(GameParams::new(3.0, 0.0, 7.0, 1.0).check_prisoners_dilemma().is_err());
    }

    #[test]
    fn split_parts_recombine() {
        let f = PayoffVector::build(&GameParams::new(3.0, 0.5, 5.0, 1.0), 2, true);
        let s = f.symmetric_part();
        let a = f.antisymmetric_part();
        for i in 0..16 {
            assert!((s[i] + a[i] - f.values()[i]).abs() < 1e-15);
            assert!((a[i] + a[bar_bits(i, 2)]).abs() < 1e-15);
        }
    }
}
