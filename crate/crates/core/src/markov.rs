//! Transition matrices, stationary distributions and payoffs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::model::{bar_bits, memory_for_len, state_count, StrategyVector};

/// Strategies closer than this to `{0, 1}` are rejected by the payoff functions
/// unless boundary evaluation is explicitly allowed.
pub const INTERIOR_EPS: f64 = 1e-12;

pub const POWER_MAX_ITERATIONS: usize = 1_000_000;

/// Row-stochastic transition matrix of the memory-`n` game.
///
/// Built matrices always have the four-per-row pattern; matrices obtained by
/// relabelling or by `from_dense` need not, which is what the structure
/// checks are for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    dense: DenseMatrix,
}

/// First column of the quadruple that row `i` may occupy.
#[inline]
pub fn quad_start(i: usize, n: usize) -> usize {
    4 * (i % state_count(n - 1))
}

#[inline]
fn quad(y: f64, z: f64) -> [f64; 4] {
    [y * z, y * (1.0 - z), (1.0 - y) * z, (1.0 - y) * (1.0 - z)]
}

fn check_pair(p: &StrategyVector, q: &StrategyVector) -> Result<usize> {
    if p.n() != q.n() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(p.n())
}

impl TransitionMatrix {
    /// Entry-by-entry construction from the quadruple rule.
    pub fn build(p: &StrategyVector, q: &StrategyVector) -> Result<Self> {
        let n = check_pair(p, q)?;
        let d = state_count(n);
        let mut dense = DenseMatrix::zeros(d, d);
        for i in 0..d {
            let start = quad_start(i, n);
            let vals = quad(p.get(i), q.get(bar_bits(i, n)));
            for (k, v) in vals.into_iter().enumerate() {
                dense[(i, start + k)] = v;
            }
        }
        Ok(Self { n, dense })
    }

    /// Block construction: the rows whose oldest pair is `a` form the memory
    /// `n-1` matrix of the sub-strategies `p_a` and `q_{bar a}`, spread over
    /// the column blocks selected by the next pair. Used as a test oracle.
    pub fn build_recursive(p: &StrategyVector, q: &StrategyVector) -> Result<Self> {
        let n = check_pair(p, q)?;
        Ok(Self {
            n,
            dense: recursive_block(p.probs(), q.probs(), n),
        })
    }

    /// Wrap an arbitrary square matrix; no structure is enforced.
    pub fn from_dense(dense: DenseMatrix) -> Result<Self> {
        if dense.rows() != dense.cols() {
            return Err(Error::Dimension {
                expected: dense.rows(),
                got: dense.cols(),
            });
        }
        let n = memory_for_len(dense.rows())?;
        Ok(Self { n, dense })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dense.rows()
    }

    pub fn dense(&self) -> &DenseMatrix {
        &self.dense
    }

    pub fn into_dense(self) -> DenseMatrix {
        self.dense
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dense[(i, j)]
    }

    /// The four entries of row `i` at its quadruple columns.
    pub fn row_quad(&self, i: usize) -> [f64; 4] {
        let s = quad_start(i, self.n);
        [
            self.dense[(i, s)],
            self.dense[(i, s + 1)],
            self.dense[(i, s + 2)],
            self.dense[(i, s + 3)],
        ]
    }

    /// Nonzero entries per row as `(column, value)`.
    pub fn sparse_rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.dim())
            .map(|i| {
                self.dense
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect()
    }

    pub fn structure(&self) -> StructureReport {
        let mut rep = StructureReport::default();
        for i in 0..self.dim() {
            let row = self.dense.row(i);
            let s = quad_start(i, self.n);
            let sum: f64 = row.iter().sum();
            rep.row_sum = rep.row_sum.max((sum - 1.0).abs());
            for (j, &v) in row.iter().enumerate() {
                if j < s || j >= s + 4 {
                    rep.off_pattern = rep.off_pattern.max(v.abs());
                }
                if v < 0.0 {
                    rep.negative = rep.negative.max(-v);
                }
            }
            let a = &row[s..s + 4];
            rep.factorization = rep.factorization.max((a[0] * a[3] - a[1] * a[2]).abs());
        }
        rep
    }

    /// `M - I` with the last column replaced by `col`.
    pub fn replaced_last_column(&self, col: &[f64]) -> DenseMatrix {
        let d = self.dim();
        assert_eq!(col.len(), d);
        let mut b = self.dense.clone();
        for i in 0..d {
            b[(i, i)] -= 1.0;
            b[(i, d - 1)] = col[i];
        }
        b
    }

    /// `nu^T M`, using the four-per-row pattern when `sparse` is set.
    fn left_apply(&self, nu: &[f64], out: &mut [f64], sparse: bool) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &w) in nu.iter().enumerate() {
            if sparse {
                let s = quad_start(i, self.n);
                for k in 0..4 {
                    out[s + k] += w * self.dense[(i, s + k)];
                }
            } else {
                for (o, m) in out.iter_mut().zip(self.dense.row(i)) {
                    *o += w * m;
                }
            }
        }
    }

    pub fn stationary_residual(&self, nu: &[f64]) -> f64 {
        let mut out = vec![0.0; nu.len()];
        self.left_apply(nu, &mut out, false);
        out.iter().zip(nu).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn recursive_block(p: &[f64], q: &[f64], n: usize) -> DenseMatrix {
    if n == 1 {
        let mut m = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            let vals = quad(p[i], q[bar_bits(i, 1)]);
            for (k, v) in vals.into_iter().enumerate() {
                m[(i, k)] = v;
            }
        }
        return m;
    }
    let d = state_count(n);
    let sub = state_count(n - 1);
    let subsub = state_count(n - 2);
    let mut m = DenseMatrix::zeros(d, d);
    for a in 0..4 {
        let pa = &p[a * sub..(a + 1) * sub];
        let qb = &q[bar_bits(a, 1) * sub..(bar_bits(a, 1) + 1) * sub];
        let block = recursive_block(pa, qb, n - 1);
        for rest in 0..sub {
            let j = rest / subsub;
            for c in 0..sub {
                m[(a * sub + rest, j * sub + c)] = block[(rest, c)];
            }
        }
    }
    m
}

/// Deviations of a matrix from the memory-`n` transition structure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// `max_i |sum_j M_ij - 1|`.
    pub row_sum: f64,
    /// Largest magnitude outside the quadruple columns.
    pub off_pattern: f64,
    /// Largest magnitude of a negative entry.
    pub negative: f64,
    /// `max_i |a0 a3 - a1 a2|` over the row quadruples.
    pub factorization: f64,
}

impl StructureReport {
    pub fn max_residual(&self) -> f64 {
        self.row_sum
            .max(self.off_pattern)
            .max(self.negative)
            .max(self.factorization)
    }

    pub fn passes(&self, row_tol: f64, factor_tol: f64) -> bool {
        self.row_sum <= row_tol && self.off_pattern == 0.0 && self.negative == 0.0 && self.factorization <= factor_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryMethod {
    LinearSolve,
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub n: usize,
    pub weights: Vec<f64>,
    /// `||nu^T M - nu^T||_inf`.
    pub residual: f64,
    pub method: StationaryMethod,
    pub iterations: usize,
}

pub fn stationary_distribution(
    m: &TransitionMatrix,
    method: StationaryMethod,
    tol: f64,
) -> Result<StationaryDistribution> {
    let d = m.dim();
    match method {
        StationaryMethod::LinearSolve => {
            // nu^T [M - I | 1 in the last column] = e_last^T.
            let b = m.replaced_last_column(&vec![1.0; d]);
            let mut e = vec![0.0; d];
            e[d - 1] = 1.0;
            let weights = b.lu().solve_transpose(&e).map_err(|_| {
                Error::Degenerate("stationary distribution is not unique; move the strategies into the interior".into())
            })?;
            let residual = m.stationary_residual(&weights);
            Ok(StationaryDistribution {
                n: m.n(),
                weights,
                residual,
                method,
                iterations: 1,
            })
        }
        StationaryMethod::PowerIteration => {
            let sparse = m.structure().off_pattern == 0.0;
            let mut nu = vec![1.0 / d as f64; d];
            let mut next = vec![0.0; d];
            let mut residual = f64::INFINITY;
            for it in 1..=POWER_MAX_ITERATIONS {
                m.left_apply(&nu, &mut next, sparse);
                residual = next.iter().zip(&nu).fold(0.0, |r, (a, b)| r.max((a - b).abs()));
                std::mem::swap(&mut nu, &mut next);
                if residual < tol {
                    let s: f64 = nu.iter().sum();
                    nu.iter_mut().for_each(|v| *v /= s);
                    let residual = m.stationary_residual(&nu);
                    return Ok(StationaryDistribution {
                        n: m.n(),
                        weights: nu,
                        residual,
                        method,
                        iterations: it,
                    });
                }
            }
            Err(Error::Convergence {
                iterations: POWER_MAX_ITERATIONS,
                residual,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayoffMethod {
    /// Ratio of the two bordered determinants.
    Determinant,
    /// `<nu, f>` with `nu` from a linear solve.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffOptions {
    pub method: PayoffMethod,
    /// Skip the interiority check and use power iteration for `nu`.
    pub allow_boundary: bool,
    /// Power-iteration tolerance when boundary evaluation is allowed.
    pub tol: f64,
}

impl Default for PayoffOptions {
    fn default() -> Self {
        Self {
            method: PayoffMethod::Determinant,
            allow_boundary: false,
            tol: 1e-13,
        }
    }
}

pub fn check_interior(p: &StrategyVector, q: &StrategyVector) -> Result<()> {
    let margin = p.margin().min(q.margin());
    if margin < INTERIOR_EPS {
        return Err(Error::Margin {
            margin,
            required: INTERIOR_EPS,
        });
    }
    Ok(())
}

fn check_f(p: &StrategyVector, f: &[f64]) -> Result<()> {
    if f.len() != p.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: f.len(),
        });
    }
    Ok(())
}

/// Long-run mean payoff of `p` against `q` for the per-state payoff vector `f`.
pub fn payoff(p: &StrategyVector, q: &StrategyVector, f: &[f64], method: PayoffMethod) -> Result<f64> {
    payoff_with(
        p,
        q,
        f,
        PayoffOptions {
            method,
            ..PayoffOptions::default()
        },
    )
}

pub fn payoff_with(p: &StrategyVector, q: &StrategyVector, f: &[f64], opts: PayoffOptions) -> Result<f64> {
    check_pair(p, q)?;
    check_f(p, f)?;
    let m = TransitionMatrix::build(p, q)?;
    if opts.allow_boundary {
        let nu = stationary_distribution(&m, StationaryMethod::PowerIteration, opts.tol)?;
        return Ok(dot(&nu.weights, f));
    }
    check_interior(p, q)?;
    match opts.method {
        PayoffMethod::Determinant => determinant_ratio(&m, f),
        PayoffMethod::Stationary => {
            let nu = stationary_distribution(&m, StationaryMethod::LinearSolve, 0.0)?;
            Ok(dot(&nu.weights, f))
        }
    }
}

/// `det(M~ f) / det(M~ 1)` from two LU factorizations, combined in log space.
pub fn determinant_ratio(m: &TransitionMatrix, f: &[f64]) -> Result<f64> {
    let d = m.dim();
    let den = m.replaced_last_column(&vec![1.0; d]).lu();
    if den.is_singular() {
        return Err(Error::Degenerate(
            "det(M~ 1) vanishes; the chain has no unique stationary distribution, interiorize the strategies".into(),
        ));
    }
    let num = m.replaced_last_column(f).lu();
    if num.is_singular() {
        return Ok(0.0);
    }
    let sign = num.det_sign() * den.det_sign();
    Ok(sign * (num.log_abs_det() - den.log_abs_det()).exp())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `J2 f`: entry `i` is `f[bar(i)]`.
pub fn player_swap(f: &[f64]) -> Result<Vec<f64>> {
    let n = memory_for_len(f.len())?;
    Ok((0..f.len()).map(|i| f[bar_bits(i, n)]).collect())
}

pub fn symmetric_part(f: &[f64]) -> Result<Vec<f64>> {
    let g = player_swap(f)?;
    Ok(f.iter().zip(&g).map(|(a, b)| 0.5 * (a + b)).collect())
}

pub fn antisymmetric_part(f: &[f64]) -> Result<Vec<f64>> {
    let g = player_swap(f)?;
    Ok(f.iter().zip(&g).map(|(a, b)| 0.5 * (a - b)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffDecomposition {
    pub total: f64,
    pub symmetric: f64,
    pub antisymmetric: f64,
}

/// Payoffs of the player-symmetric and payoff-gap games.
pub fn decompose_payoff(
    p: &StrategyVector,
    q: &StrategyVector,
    f: &[f64],
    method: PayoffMethod,
) -> Result<PayoffDecomposition> {
    check_f(p, f)?;
    Ok(PayoffDecomposition {
        total: payoff(p, q, f, method)?,
        symmetric: payoff(p, q, &symmetric_part(f)?, method)?,
        antisymmetric: payoff(p, q, &antisymmetric_part(f)?, method)?,
    })
}

/// One LU of `[M - I | 1]` reused for several payoff vectors and for gradients.
///
/// By Cramer's rule `A(f) = (B^{-1} f)_last`, and the last row of `B^{-1}` is the
/// stationary distribution.
#[derive(Debug, Clone)]
pub struct PayoffSystem {
    matrix: TransitionMatrix,
    lu: Lu,
}

impl PayoffSystem {
    pub fn new(p: &StrategyVector, q: &StrategyVector) -> Result<Self> {
        check_pair(p, q)?;
        let matrix = TransitionMatrix::build(p, q)?;
        let d = matrix.dim();
        let lu = matrix.replaced_last_column(&vec![1.0; d]).lu();
        if lu.is_singular() {
            return Err(Error::Degenerate(
                "det(M~ 1) vanishes; interiorize the strategies".into(),
            ));
        }
        Ok(Self { matrix, lu })
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.matrix
    }

    pub fn lu(&self) -> &Lu {
        &self.lu
    }

    /// `det(M~ 1)`.
    pub fn denominator(&self) -> f64 {
        self.lu.det()
    }

    /// `B^{-1} f`; its last entry is the payoff.
    pub fn solve(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(f)
    }

    pub fn payoff(&self, f: &[f64]) -> Result<f64> {
        Ok(*self.solve(f)?.last().expect("non-empty"))
    }

    pub fn stationary(&self) -> Result<Vec<f64>> {
        let d = self.matrix.dim();
        let mut e = vec![0.0; d];
        e[d - 1] = 1.0;
        self.lu.solve_transpose(&e)
    }
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} is not a probability")));
    }
    Ok(())
}

fn reactive_den(p1: f64, p2: f64, q1: f64, q2: f64) -> Result<f64> {
    for (name, v) in [("p1", p1), ("p2", p2), ("q1", q1), ("q2", q2)] {
        check_prob(name, v)?;
    }
    let den = 1.0 - (p1 - p2) * (q1 - q2);
    if den.abs() < 1e-14 {
        return Err(Error::Degenerate(
            "(p1 - p2)(q1 - q2) = 1: the reactive chain is periodic".into(),
        ));
    }
    Ok(den)
}

/// Closed-form donation-game payoff of reactive `p` against reactive `q`.
pub fn reactive_payoff(p1: f64, p2: f64, q1: f64, q2: f64, b: f64, c: f64) -> Result<f64> {
    let den = reactive_den(p1, p2, q1, q2)?;
    let num = b * ((q1 - q2) * p2 + q2) - c * (p2 + (p1 - p2) * q2);
    Ok(num / den)
}

/// Closed-form `(A_s, A_a)` for reactive strategies.
pub fn reactive_decomposition(p1: f64, p2: f64, q1: f64, q2: f64, b: f64, c: f64) -> Result<PayoffDecomposition> {
    let den = 2.0 * reactive_den(p1, p2, q1, q2)?;
    let r = p1 - p2;
    let s = q1 - q2;
    let antisymmetric = (b + c) * (p2 * (s - 1.0) - r * q2 + q2) / den;
    let symmetric = (b - c) * (p2 * s + r * q2 + p2 + q2) / den;
    Ok(PayoffDecomposition {
        total: reactive_payoff(p1, p2, q1, q2, b, c)?,
        symmetric,
        antisymmetric,
    })
}
