//! Numerical experiments built on the fields and integrators.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::field::{
    adaptive_field, counting_field, CountingField, CountingVariant, FieldSpec, FieldVariant, Negated, VectorField,
};
use super::integrate::{integrate, IntegrateOptions, StopReason};
use crate::error::{Error, Result};
use crate::model::{tft_interior, GameParams, PayoffVector};

/// `phi(v)_i = 1 - v[!i]`, the C/D relabelling on raw coordinates.
pub fn phi(v: &[f64]) -> Vec<f64> {
    let last = v.len() - 1;
    (0..v.len()).map(|i| 1.0 - v[last - i]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorReport {
    pub max_deviation: f64,
    /// Length of the interval on which both trajectories exist.
    pub common_time: f64,
    pub forward_stop: StopReason,
    pub backward_stop: StopReason,
}

/// Compare the forward trajectory from `phi(x0)` with the mirrored backward
/// trajectory from `x0`.
pub fn z2_mirror_check(spec: &FieldSpec, x0: &[f64], t_max: f64, dt: f64) -> Result<MirrorReport> {
    let opts = IntegrateOptions::rk4(dt, t_max);
    let forward = integrate(spec, &phi(x0), &opts)?;
    let backward = integrate(&Negated(spec.clone()), x0, &opts)?;
    let steps = forward.len().min(backward.len());
    let mut max_deviation: f64 = 0.0;
    for k in 0..steps {
        let mirrored = phi(&backward.states[k]);
        for (a, b) in forward.states[k].iter().zip(&mirrored) {
            max_deviation = max_deviation.max((a - b).abs());
        }
    }
    Ok(MirrorReport {
        max_deviation,
        common_time: forward.times[steps - 1],
        forward_stop: forward.stop,
        backward_stop: backward.stop,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TftReport {
    pub n: usize,
    pub variant: FieldVariant,
    pub eps: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fitted exponent of `norm ~ eps^order`.
    pub order: f64,
    pub decreasing: bool,
}

/// Field size at tit-for-tat pulled into the interior by each `eps`.
pub fn tft_stationarity(payoff: &PayoffVector, variant: FieldVariant, eps: &[f64]) -> Result<TftReport> {
    let spec = FieldSpec::new(payoff.clone(), variant);
    let n = payoff.n();
    let norms = eps
        .iter()
        .map(|&e| {
            let v = adaptive_field(&tft_interior(n, e), &spec)?;
            Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = norms.windows(2).all(|w| w[1] < w[0]);
    Ok(TftReport {
        n,
        variant,
        eps: eps.to_vec(),
        order: log_log_slope(eps, &norms),
        norms,
        decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `||q(t) - q_a(t)||_2`.
    pub divergence: Vec<f64>,
    /// Sampled Lipschitz bound of the antisymmetric counting field.
    pub lipschitz: f64,
    /// Sampled bound of `||symmetric field|| / eps`.
    pub sym_bound: f64,
    pub envelope: Vec<f64>,
    pub dominated: bool,
    pub stop_full: StopReason,
    pub stop_antisym: StopReason,
}

impl PerturbationReport {
    /// Divergence at the sample closest to `t`.
    pub fn divergence_at(&self, t: f64) -> f64 {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.divergence[k]
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius norm of a central-difference Jacobian.
fn jacobian_norm<F: VectorField>(f: &F, x: &[f64], h: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let xj = x[j];
        xp[j] = xj + h;
        let up = f.eval(&xp)?;
        xp[j] = xj - h;
        let dn = f.eval(&xp)?;
        xp[j] = xj;
        sum += up
            .iter()
            .zip(&dn)
            .map(|(a, b)| ((a - b) / (2.0 * h)).powi(2))
            .sum::<f64>();
    }
    Ok(sum.sqrt())
}

/// Counting dynamics of the donation game with `b = c + eps` against the
/// dynamics of its payoff-gap part alone, from the same start.
pub fn perturbation_experiment(start: [f64; 3], eps: f64, c: f64, t_max: f64, dt: f64) -> Result<PerturbationReport> {
    let params = GameParams::donation(c + eps, c)?;
    let f = PayoffVector::build(&params, 1, true);
    let full = CountingField {
        payoff: f.clone(),
        variant: CountingVariant::Restriction(FieldVariant::Full),
    };
    let anti = CountingField {
        payoff: f.clone(),
        variant: CountingVariant::Restriction(FieldVariant::Antisymmetric),
    };
    let opts = IntegrateOptions {
        boundary_margin: 1e-2,
        ..IntegrateOptions::rk4(dt, t_max)
    };
    let tq = integrate(&full, &start, &opts)?;
    let ta = integrate(&anti, &start, &opts)?;
    let steps = tq.len().min(ta.len());
    let times = tq.times[..steps].to_vec();
    let divergence: Vec<f64> = (0..steps)
        .map(|k| {
            let d: Vec<f64> = tq.states[k].iter().zip(&ta.states[k]).map(|(a, b)| a - b).collect();
            norm2(&d)
        })
        .collect();

    // Samples: both trajectories and a grid over their bounding box.
    let stride = (steps / 200).max(1);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for k in (0..steps).step_by(stride) {
        samples.push(tq.states[k].clone());
        samples.push(ta.states[k].clone());
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for s in tq.states[..steps].iter().chain(&ta.states[..steps]) {
        for i in 0..3 {
            lo[i] = lo[i].min(s[i]);
            hi[i] = hi[i].max(s[i]);
        }
    }
    let g = 5;
    for a in 0..g {
        for b in 0..g {
            for cidx in 0..g {
                let t = |i: usize, k: usize| lo[i] + (hi[i] - lo[i]) * k as f64 / (g - 1) as f64;
                samples.push(vec![t(0, a), t(1, b), t(2, cidx)]);
            }
        }
    }
    let mut lipschitz: f64 = 0.0;
    let mut sym_bound: f64 = 0.0;
    for s in &samples {
        lipschitz = lipschitz.max(jacobian_norm(&anti, s, 1e-6)?);
        if eps > 0.0 {
            let fs = counting_field(
                s[0],
                s[1],
                s[2],
                &f,
                CountingVariant::Restriction(FieldVariant::Symmetric),
            )?;
            sym_bound = sym_bound.max(norm2(&fs) / eps);
        }
    }
    let envelope: Vec<f64> = times
        .iter()
        .map(|&t| {
            if lipschitz > 0.0 {
                eps * sym_bound / lipschitz * (lipschitz * t).exp_m1()
            } else {
                eps * sym_bound * t
            }
        })
        .collect();
    let dominated = divergence.iter().zip(&envelope).all(|(d, e)| d <= e);
    Ok(PerturbationReport {
        eps,
        times,
        divergence,
        lipschitz,
        sym_bound,
        envelope,
        dominated,
        stop_full: tq.stop,
        stop_antisym: ta.stop,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub edge: String,
    pub max_norm: f64,
    pub equilibrium: bool,
}

/// Scan the twelve edges of `[0, 1]^3` for edges on which `field` vanishes.
pub fn edge_equilibria<G: Fn([f64; 3]) -> [f64; 3]>(field: G, samples: usize, tol: f64) -> Vec<EdgeReport> {
    let names = ["q2", "q1", "q0"];
    let mut out = Vec::new();
    for free in 0..3 {
        let fixed: Vec<usize> = (0..3).filter(|&k| k != free).collect();
        for corner in 0..4 {
            let vals = [(corner >> 1) as f64, (corner & 1) as f64];
            let mut max_norm: f64 = 0.0;
            for s in 0..=samples {
                let mut q = [0.0; 3];
                q[free] = s as f64 / samples as f64;
                q[fixed[0]] = vals[0];
                q[fixed[1]] = vals[1];
                let v = field(q);
                max_norm = max_norm.max(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            }
            let label = (0..3)
                .map(|k| {
                    if k == free {
                        format!("{}=*", names[k])
                    } else {
                        let j = fixed.iter().position(|&f| f == k).unwrap();
                        format!("{}={}", names[k], vals[j])
                    }
                })
                .collect::<Vec<_>>()
                .join(",");
            out.push(EdgeReport {
                edge: label,
                max_norm,
                equilibrium: max_norm <= tol,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignCounts {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

impl SignCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.zero
    }

    fn add(&mut self, v: f64) {
        if v > 0.0 {
            self.positive += 1;
        } else if v < 0.0 {
            self.negative += 1;
        } else {
            self.zero += 1;
        }
    }
}

/// Signs of `value` over the midpoint grid with `g` cells per axis in `dim`
/// dimensions. Points where `value` fails are skipped.
pub fn sign_study<G: Fn(&[f64]) -> Result<f64>>(dim: usize, g: usize, value: G) -> SignCounts {
    let mut counts = SignCounts::default();
    let total = g.pow(dim as u32);
    let mut x = vec![0.0; dim];
    for idx in 0..total {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = ((r % g) as f64 + 0.5) / g as f64;
            r /= g;
        }
        if let Ok(v) = value(&x) {
            counts.add(v);
        }
    }
    counts
}

/// Exponent vectors of all monomials in `dim` variables with degree `1..=degree`.
pub fn monomials(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(dim: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == dim {
            if cur.iter().sum::<u32>() > 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(dim, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, degree, &mut Vec::new(), &mut out);
    out.sort_by_key(|e| (e.iter().sum::<u32>(), std::cmp::Reverse(e.clone())));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub monomials: Vec<Vec<u32>>,
    /// Singular values of the sampled constraint matrix, ascending.
    pub singular_values: Vec<f64>,
    pub null_dim: usize,
    /// Orthonormal coefficient vectors spanning the numerical null space.
    pub basis: Vec<Vec<f64>>,
}

impl PolyFit {
    /// Relative distance of `coeffs` from the fitted null space.
    pub fn residual(&self, coeffs: &[f64]) -> f64 {
        let norm = norm2(coeffs);
        let mut rest = coeffs.to_vec();
        for b in &self.basis {
            let dot: f64 = b.iter().zip(coeffs).map(|(x, y)| x * y).sum();
            for (r, v) in rest.iter_mut().zip(b) {
                *r -= dot * v;
            }
        }
        norm2(&rest) / norm
    }

    /// Coefficient vector of a polynomial given as `(exponents, coefficient)` terms.
    pub fn coefficients(&self, terms: &[(Vec<u32>, f64)]) -> Vec<f64> {
        let mut c = vec![0.0; self.monomials.len()];
        for (e, v) in terms {
            if let Some(k) = self.monomials.iter().position(|m| m == e) {
                c[k] += v;
            }
        }
        c
    }
}

/// Polynomials `g` of bounded degree with `grad g . F = 0` at every sample.
pub fn fit_conserved_polynomials<F: VectorField>(
    field: &F,
    samples: &[Vec<f64>],
    degree: u32,
    rel_tol: f64,
) -> Result<PolyFit> {
    let dim = field.dim();
    let monos = monomials(dim, degree);
    let mut rows = Vec::with_capacity(samples.len() * monos.len());
    for x in samples {
        if x.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: x.len(),
            });
        }
        let fx = field.eval(x)?;
        let scale = norm2(&fx).max(f64::MIN_POSITIVE);
        for m in &monos {
            let mut d = 0.0;
            for j in 0..dim {
                if m[j] == 0 {
                    continue;
                }
                let mut term = m[j] as f64;
                for (k, &e) in m.iter().enumerate() {
                    let pow = if k == j { e - 1 } else { e };
                    term *= x[k].powi(pow as i32);
                }
                d += term * fx[j];
            }
            rows.push(d / scale);
        }
    }
    let a = DMatrix::from_row_slice(samples.len(), monos.len(), &rows);
    if samples.len() < monos.len() {
        return Err(Error::Domain(format!(
            "need at least {} samples for a degree-{degree} fit",
            monos.len()
        )));
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..monos.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = singular_values.last().copied().unwrap_or(0.0);
    let null_dim = singular_values.iter().filter(|&&s| s <= rel_tol * top).count();
    let basis = order[..null_dim]
        .iter()
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    Ok(PolyFit {
        monomials: monos,
        singular_values,
        null_dim,
        basis,
    })
}

/// Terms of the printed cubic invariant of the memory-1 payoff-gap dynamics.
pub fn g2_terms() -> Vec<(Vec<u32>, f64)> {
    let third = 1.0 / 3.0;
    vec![
        (vec![3, 0, 0, 0], -third),
        (vec![1, 0, 0, 0], 1.0),
        (vec![0, 1, 2, 0], -1.0),
        (vec![0, 0, 3, 0], third),
        (vec![0, 0, 0, 3], -third),
    ]
}
