//! The eight admissible relabellings of histories and their identities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::markov::{StructureReport, TransitionMatrix};
use crate::model::{bar_bits, k_recursion, state_count, PayoffVector, StrategyVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SymmetryKind {
    J1,
    J2,
    J3,
    J4,
    J5,
    J6,
    J7,
    J8,
}

/// Bit-level description of a relabelling: optionally exchange the players,
/// then optionally flip the action in the focal and/or the opponent slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generators {
    pub swap_players: bool,
    pub flip_focal: bool,
    pub flip_opponent: bool,
}

impl Generators {
    /// Image of one round pair `(focal << 1) | opponent`.
    pub fn map_pair(&self, pair: usize) -> usize {
        let (mut a, mut b) = (pair >> 1 & 1, pair & 1);
        if self.swap_players {
            std::mem::swap(&mut a, &mut b);
        }
        if self.flip_focal {
            a ^= 1;
        }
        if self.flip_opponent {
            b ^= 1;
        }
        (a << 1) | b
    }
}

impl SymmetryKind {
    pub const ALL: [SymmetryKind; 8] = [
        SymmetryKind::J1,
        SymmetryKind::J2,
        SymmetryKind::J3,
        SymmetryKind::J4,
        SymmetryKind::J5,
        SymmetryKind::J6,
        SymmetryKind::J7,
        SymmetryKind::J8,
    ];

    pub fn generators(self) -> Generators {
        let (swap_players, flip_focal, flip_opponent) = match self {
            SymmetryKind::J1 => (false, false, false),
            SymmetryKind::J2 => (true, false, false),
            SymmetryKind::J3 => (false, false, true),
            SymmetryKind::J4 => (true, false, true),
            SymmetryKind::J5 => (true, true, false),
            SymmetryKind::J6 => (false, true, false),
            SymmetryKind::J7 => (true, true, true),
            SymmetryKind::J8 => (false, true, true),
        };
        Generators {
            swap_players,
            flip_focal,
            flip_opponent,
        }
    }

    pub fn index(self) -> usize {
        self as usize + 1
    }
}

impl fmt::Display for SymmetryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J{}", self.index())
    }
}

impl FromStr for SymmetryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix('J').or_else(|| t.strip_prefix('j')).unwrap_or(t);
        match digits.parse::<usize>() {
            Ok(k @ 1..=8) => Ok(Self::ALL[k - 1]),
            _ => Err(Error::InvalidKind(s.to_string())),
        }
    }
}

/// A permutation `sigma` of history indices acting as `(J v)_i = v_{sigma(i)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryPermutation {
    n: usize,
    kind: Option<SymmetryKind>,
    perm: Vec<usize>,
}

impl SymmetryPermutation {
    /// Apply the generator map to every round pair.
    pub fn build_j(kind: SymmetryKind, n: usize) -> Self {
        let g = kind.generators();
        let perm = (0..state_count(n))
            .map(|i| {
                (0..n).fold(0usize, |acc, k| {
                    let pair = (i >> (2 * k)) & 3;
                    acc | (g.map_pair(pair) << (2 * k))
                })
            })
            .collect();
        Self {
            n,
            kind: Some(kind),
            perm,
        }
    }

    /// Kronecker recursion `sigma_n(r 4^{n-1} + s) = sigma_1(r) 4^{n-1} + sigma_{n-1}(s)`.
    pub fn build_j_recursive(kind: SymmetryKind, n: usize) -> Self {
        let base = Self::build_j(kind, 1).perm;
        let mut perm = base.clone();
        for level in 2..=n {
            let sub = state_count(level - 1);
            let mut next = vec![0; 4 * sub];
            for r in 0..4 {
                for (s, &img) in perm.iter().enumerate() {
                    next[r * sub + s] = base[r] * sub + img;
                }
            }
            perm = next;
        }
        Self {
            n,
            kind: Some(kind),
            perm,
        }
    }

    pub fn from_perm(perm: Vec<usize>) -> Result<Self> {
        let n = crate::model::memory_for_len(perm.len())?;
        let mut seen = vec![false; perm.len()];
        for &k in &perm {
            if k >= perm.len() || seen[k] {
                return Err(Error::Domain("index map is not a bijection".into()));
            }
            seen[k] = true;
        }
        let kind = SymmetryKind::ALL
            .into_iter()
            .find(|&k| Self::build_j(k, n).perm == perm);
        Ok(Self { n, kind, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> Option<SymmetryKind> {
        self.kind
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Matrix product `self * other`.
    pub fn compose(&self, other: &SymmetryPermutation) -> Self {
        assert_eq!(self.perm.len(), other.perm.len());
        let perm: Vec<usize> = self.perm.iter().map(|&i| other.perm[i]).collect();
        let kind = SymmetryKind::ALL
            .into_iter()
            .find(|&k| Self::build_j(k, self.n).perm == perm);
        Self { n: self.n, kind, perm }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &k)| i == k)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.perm.len());
        self.perm.iter().map(|&k| v[k]).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let d = self.perm.len();
        let mut m = DenseMatrix::zeros(d, d);
        for (i, &k) in self.perm.iter().enumerate() {
            m[(i, k)] = 1.0;
        }
        m
    }
}

/// `J M J^T` as a pure relabelling of rows and columns.
pub fn conjugate_matrix(m: &TransitionMatrix, j: &SymmetryPermutation) -> Result<TransitionMatrix> {
    let d = m.dim();
    if j.perm.len() != d {
        return Err(Error::Dimension {
            expected: d,
            got: j.perm.len(),
        });
    }
    let src = m.dense();
    let mut out = DenseMatrix::zeros(d, d);
    for i in 0..d {
        let si = j.perm[i];
        for k in 0..d {
            out[(i, k)] = src[(si, j.perm[k])];
        }
    }
    TransitionMatrix::from_dense(out)
}

/// `|| -f + K 1 - J8 f ||_inf`, zero for equal-gains games.
pub fn payoff_vector_reflection_residual(f: &PayoffVector) -> f64 {
    let n = f.n();
    let k = if f.normalized() {
        k_recursion(f.params(), n)
    } else {
        n as f64 * k_recursion(f.params(), n)
    };
    let v = f.values();
    let last = v.len() - 1;
    (0..v.len()).fold(0.0, |m, i| m.max((-v[i] + k - v[last - i]).abs()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub trials: usize,
    /// Worst structure deviation seen over the trials.
    pub worst: StructureReport,
}

pub const ADMISSIBLE_ROW_TOL: f64 = 1e-12;
pub const ADMISSIBLE_FACTOR_TOL: f64 = 1e-10;

/// Does conjugation by `perm` keep random transition matrices in the family
/// of memory-`n` transition matrices?
pub fn check_admissible<R: Rng + ?Sized>(
    perm: &SymmetryPermutation,
    n: usize,
    trials: usize,
    rng: &mut R,
) -> Result<AdmissibilityReport> {
    if perm.n != n {
        return Err(Error::Dimension {
            expected: state_count(n),
            got: perm.perm.len(),
        });
    }
    let mut worst = StructureReport::default();
    let mut admissible = true;
    for _ in 0..trials {
        let p = StrategyVector::random_interior(n, rng, 0.01);
        let q = StrategyVector::random_interior(n, rng, 0.01);
        let m = TransitionMatrix::build(&p, &q)?;
        let c = conjugate_matrix(&m, perm)?;
        let s = c.structure();
        worst.row_sum = worst.row_sum.max(s.row_sum);
        worst.off_pattern = worst.off_pattern.max(s.off_pattern);
        worst.negative = worst.negative.max(s.negative);
        worst.factorization = worst.factorization.max(s.factorization);
        if !s.passes(ADMISSIBLE_ROW_TOL, ADMISSIBLE_FACTOR_TOL) {
            admissible = false;
            break;
        }
    }
    Ok(AdmissibilityReport {
        admissible,
        trials,
        worst,
    })
}

/// Multiplicities `(-1, +1)` of the eigenvalues of `J2`, from its cycle
/// structure: fixed points contribute `+1`, each transposition one of each.
pub fn j2_eigenvalue_multiplicities(n: usize) -> (usize, usize) {
    let d = state_count(n);
    let fixed = (0..d).filter(|&i| bar_bits(i, n) == i).count();
    let two_cycles = (d - fixed) / 2;
    (two_cycles, fixed + two_cycles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{stationary_distribution, StationaryMethod};
    use crate::model::GameParams;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn memory_one_tables() {
        let perm = |k| SymmetryPermutation::build_j(k, 1).perm;
        assert_eq!(perm(SymmetryKind::J1), [0, 1, 2, 3]);
        assert_eq!(perm(SymmetryKind::J2), [0, 2, 1, 3]);
        assert_eq!(perm(SymmetryKind::J3), [1, 0, 3, 2]);
        assert_eq!(perm(SymmetryKind::J8), [3, 2, 1, 0]);
        // all eight distinct
        let mut all: Vec<_> = SymmetryKind::ALL.iter().map(|&k| perm(k)).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 8);
    }

    #[test]
    fn recursive_equals_bitwise() {
        for n in 1..=3 {
            for k in SymmetryKind::ALL {
                assert_eq!(
                    SymmetryPermutation::build_j(k, n),
                    SymmetryPermutation::build_j_recursive(k, n)
                );
            }
        }
    }

    #[test]
    fn j3_two_rounds_acts_blockwise() {
        let j = SymmetryPermutation::build_j(SymmetryKind::J3, 2);
        let j1 = [1, 0, 3, 2];
        for r in 0..4 {
            for s in 0..4 {
                assert_eq!(j.perm()[4 * r + s], 4 * j1[r] + j1[s]);
            }
        }
    }

    #[test]
    fn group_law() {
        use SymmetryKind::*;
        for n in 1..=3 {
            let j = |k| SymmetryPermutation::build_j(k, n);
            assert_eq!(j(J4).compose(&j(J8)).kind(), Some(J5));
            assert_eq!(j(J3).compose(&j(J8)).kind(), Some(J6));
            assert_eq!(j(J2).compose(&j(J8)).kind(), Some(J7));
            for a in SymmetryKind::ALL {
                for b in SymmetryKind::ALL {
                    assert!(j(a).compose(&j(b)).kind().is_some(), "{a}{b} not closed");
                }
                let sq = j(a).compose(&j(a));
                let order = if matches!(a, J4 | J5) {
                    4
                } else if a == J1 {
                    1
                } else {
                    2
                };
                assert_eq!(sq.is_identity(), order <= 2, "{a}");
            }
        }
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("J7".parse::<SymmetryKind>().unwrap(), SymmetryKind::J7);
        assert_eq!("j2".parse::<SymmetryKind>().unwrap(), SymmetryKind::J2);
        assert!(matches!("J9".parse::<SymmetryKind>(), Err(Error::InvalidKind(_))));
    }

    #[test]
    fn conjugation_identities_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let j2 = SymmetryPermutation::build_j(SymmetryKind::J2, n);
            let j8 = SymmetryPermutation::build_j(SymmetryKind::J8, n);
            for _ in 0..10 {
                let p = StrategyVector::random_dyadic(n, &mut rng, 20);
                let q = StrategyVector::random_dyadic(n, &mut rng, 20);
                let m = TransitionMatrix::build(&p, &q).unwrap();
                let swapped = TransitionMatrix::build(&q, &p).unwrap();
                assert_eq!(conjugate_matrix(&m, &j2).unwrap(), swapped);
                let mirror = TransitionMatrix::build(&p.label_swap(), &q.label_swap()).unwrap();
                assert_eq!(conjugate_matrix(&m, &j8).unwrap(), mirror);
            }
        }
    }

    #[test]
    fn payoff_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = PayoffVector::build(&GameParams::new(3.0, 0.5, 5.0, 1.0), 2, true);
        let p = StrategyVector::random_interior(2, &mut rng, 0.05);
        let q = StrategyVector::random_interior(2, &mut rng, 0.05);
        let m = TransitionMatrix::build(&p, &q).unwrap();
        let nu = stationary_distribution(&m, StationaryMethod::LinearSolve, 0.0).unwrap();
        let a: f64 = nu.weights.iter().zip(f.values()).map(|(x, y)| x * y).sum();
        for k in SymmetryKind::ALL {
            let j = SymmetryPermutation::build_j(k, 2);
            let c = conjugate_matrix(&m, &j).unwrap();
            let jnu = stationary_distribution(&c, StationaryMethod::LinearSolve, 0.0).unwrap();
            let expect = j.apply(&nu.weights);
            for (x, y) in jnu.weights.iter().zip(&expect) {
                assert!((x - y).abs() < 1e-12);
            }
            let b: f64 = jnu.weights.iter().zip(j.apply(f.values())).map(|(x, y)| x * y).sum();
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn reflection_residual() {
        let eg = GameParams::new(3.0, 0.5, 3.5, 1.0);
        assert_eq!(
            payoff_vector_reflection_residual(&PayoffVector::build(&eg, 1, true)),
            0.0
        );
        let d = GameParams::donation(2.0, 1.0).unwrap();
        for n in 1..=5 {
            for norm in [true, false] {
                let r = payoff_vector_reflection_residual(&PayoffVector::build(&d, n, norm));
                assert!(r <= 1e-12, "n={n} residual {r}");
            }
        }
        let bad = GameParams::new(3.0, 0.0, 5.0, 1.0);
        assert!(payoff_vector_reflection_residual(&PayoffVector::build(&bad, 2, true)) > 0.1);
    }

    #[test]
    fn brute_force_memory_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut perms = Vec::new();
        permutations(&mut vec![0, 1, 2, 3], 0, &mut perms);
        assert_eq!(perms.len(), 24);
        let mut passing = Vec::new();
        for perm in perms {
            let j = SymmetryPermutation::from_perm(perm).unwrap();
            if check_admissible(&j, 1, 20, &mut rng).unwrap().admissible {
                passing.push(j.kind().expect("admissible map must be one of the eight"));
            }
        }
        passing.sort();
        assert_eq!(passing, SymmetryKind::ALL.to_vec());
    }

    #[test]
    fn random_maps_fail_at_two_rounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for k in SymmetryKind::ALL {
            let j = SymmetryPermutation::build_j(k, 2);
            assert!(check_admissible(&j, 2, 10, &mut rng).unwrap().admissible);
        }
        for _ in 0..50 {
            let mut perm: Vec<usize> = (0..16).collect();
            perm.shuffle(&mut rng);
            let j = SymmetryPermutation::from_perm(perm).unwrap();
            if j.kind().is_none() {
                assert!(!check_admissible(&j, 2, 5, &mut rng).unwrap().admissible);
            }
        }
    }

    #[test]
    fn j2_spectrum() {
        assert_eq!(j2_eigenvalue_multiplicities(1), (1, 3));
        assert_eq!(j2_eigenvalue_multiplicities(2), (6, 10));
        assert_eq!(j2_eigenvalue_multiplicities(3), (28, 36));
    }

    fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == v.len() {
            out.push(v.clone());
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permutations(v, k + 1, out);
            v.swap(k, i);
        }
    }
}
