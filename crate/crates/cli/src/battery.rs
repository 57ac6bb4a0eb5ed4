//! The verification battery behind `memn verify`.
//!
//! Each check is a plain function returning an [`Outcome`]; [`run_battery`]
//! strings them together with one child generator per check, drawn in order
//! from a single seeded generator.

use std::ops::RangeInclusive;
use std::time::Instant;

use memn_core::dynamics::experiments::{fit_conserved_polynomials, g2_terms, tft_stationarity};
use memn_core::dynamics::{
    adaptive_field, counting_antisym_closed, counting_field, integrate, perturbation_experiment, z2_mirror_check,
    ClosedForm, ConservedQuantity, CountingVariant, FieldSpec, FieldVariant, GradientMethod, IntegrateOptions,
};
use memn_core::linalg::DenseMatrix;
use memn_core::markov::{decompose_payoff, payoff, quad_start, reactive_decomposition, PayoffMethod, TransitionMatrix};
use memn_core::model::{reactive_to_full, state_count, GameParams, PayoffVector, StrategyVector};
use memn_core::symmetry::{
    check_admissible, conjugate_matrix, j2_eigenvalue_multiplicities, payoff_vector_reflection_residual, SymmetryKind,
    SymmetryPermutation,
};
use memn_core::Result;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::{CheckResult, VerificationReport, SCHEMA_VERSION};
use crate::tolerances::{Ledger, Tolerances};

/// Size of the entry perturbation used by the negative control.
pub const FAULT_SIZE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: Option<Value>,
}

impl Outcome {
    /// Pass iff `residual <= tolerance`; NaN fails.
    pub fn within(residual: f64, tolerance: f64) -> Self {
        Self {
            max_residual: residual,
            tolerance,
            pass: residual <= tolerance,
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    /// Also require `ok`.
    pub fn and(mut self, ok: bool) -> Self {
        self.pass &= ok;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatteryConfig {
    pub n_max: usize,
    pub trials: usize,
    pub seed: u64,
    /// Perturb one transition entry before the structure checks.
    pub inject_fault: bool,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            n_max: 2,
            trials: 50,
            seed: 7,
            inject_fault: false,
        }
    }
}

pub fn donation_payoff(n: usize) -> PayoffVector {
    PayoffVector::build(&GameParams::donation(2.0, 1.0).expect("b >= c >= 0"), n, true)
}

/// A prisoner's dilemma without equal gains from switching.
pub fn generic_payoff(n: usize) -> PayoffVector {
    PayoffVector::build(&GameParams::new(3.0, 0.0, 5.0, 1.0), n, true)
}

fn random_pair(n: usize, rng: &mut ChaCha8Rng, margin: f64) -> (StrategyVector, StrategyVector) {
    let p = StrategyVector::random_interior(n, rng, margin);
    let q = StrategyVector::random_interior(n, rng, margin);
    (p, q)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// `||a - b||_inf / max(||a||_inf, ||b||_inf)`.
pub fn relative_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = norm_inf(a).max(norm_inf(b));
    let d = max_diff(a, b);
    if d == 0.0 {
        0.0
    } else {
        d / scale
    }
}

// ---- structure ----

fn with_fault(m: &TransitionMatrix) -> Result<TransitionMatrix> {
    let d = m.dim();
    let mut data = m.dense().data().to_vec();
    data[quad_start(0, m.n())] += FAULT_SIZE;
    TransitionMatrix::from_dense(DenseMatrix::from_vec(d, d, data)?)
}

/// `(direct, recursive)` pairs for random strategies.
pub fn sample_matrices(
    ns: RangeInclusive<usize>,
    trials: usize,
    inject_fault: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(TransitionMatrix, TransitionMatrix)>> {
    let mut out = Vec::new();
    for n in ns {
        for _ in 0..trials {
            let (p, q) = random_pair(n, rng, 0.0);
            let mut direct = TransitionMatrix::build(&p, &q)?;
            if inject_fault {
                direct = with_fault(&direct)?;
            }
            out.push((direct, TransitionMatrix::build_recursive(&p, &q)?));
        }
    }
    Ok(out)
}

pub fn structure_recursion(samples: &[(TransitionMatrix, TransitionMatrix)], tol: f64) -> Outcome {
    let r = samples
        .iter()
        .fold(0.0f64, |m, (a, b)| m.max(a.dense().max_abs_diff(b.dense())));
    Outcome::within(r, tol).with_detail(json!({ "matrices": samples.len() }))
}

pub fn structure_row_sums(samples: &[(TransitionMatrix, TransitionMatrix)], tol: f64) -> Outcome {
    let r = samples.iter().fold(0.0f64, |m, (a, _)| m.max(a.structure().row_sum));
    Outcome::within(r, tol)
}

/// Every row is zero outside its quadruple, non-negative, and the quadruple
/// reshapes to a rank-one 2x2 block.
pub fn structure_factorization(samples: &[(TransitionMatrix, TransitionMatrix)], tol: f64) -> Outcome {
    let mut worst = 0.0f64;
    let mut off_pattern = 0.0f64;
    let mut negative = 0.0f64;
    for (a, _) in samples {
        let s = a.structure();
        worst = worst.max(s.factorization);
        off_pattern = off_pattern.max(s.off_pattern);
        negative = negative.max(s.negative);
    }
    let r = if off_pattern > 0.0 || negative > 0.0 {
        f64::INFINITY
    } else {
        worst
    };
    Outcome::within(r, tol).with_detail(json!({ "off_pattern": off_pattern, "negative": negative }))
}

// ---- symmetry ----

/// Bitwise and recursive constructions agree and the eight maps form a group.
pub fn symmetry_group(ns: RangeInclusive<usize>) -> Outcome {
    let mut failures = 0usize;
    for n in ns {
        let js: Vec<SymmetryPermutation> = SymmetryKind::ALL
            .iter()
            .map(|&k| SymmetryPermutation::build_j(k, n))
            .collect();
        for (j, &k) in js.iter().zip(SymmetryKind::ALL.iter()) {
            if SymmetryPermutation::build_j_recursive(k, n) != *j {
                failures += 1;
            }
            if !js.iter().any(|o| j.compose(o).is_identity()) {
                failures += 1;
            }
        }
        failures += usize::from(!js[0].is_identity());
        for a in &js {
            for b in &js {
                failures += usize::from(a.compose(b).kind().is_none());
            }
        }
    }
    Outcome::within(failures as f64, 0.0)
}

pub fn conjugation_j2(ns: RangeInclusive<usize>, trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let j2 = SymmetryPermutation::build_j(SymmetryKind::J2, n);
        for _ in 0..trials {
            let (p, q) = random_pair(n, rng, 0.0);
            let c = conjugate_matrix(&TransitionMatrix::build(&p, &q)?, &j2)?;
            r = r.max(c.dense().max_abs_diff(TransitionMatrix::build(&q, &p)?.dense()));
        }
    }
    Ok(Outcome::within(r, tol))
}

/// `1 - (1 - x) == x` holds for dyadic `x`, so entries are drawn from `k / 2^20`.
pub fn conjugation_j8(ns: RangeInclusive<usize>, trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let j8 = SymmetryPermutation::build_j(SymmetryKind::J8, n);
        for _ in 0..trials {
            let p = StrategyVector::random_dyadic(n, rng, 20);
            let q = StrategyVector::random_dyadic(n, rng, 20);
            let c = conjugate_matrix(&TransitionMatrix::build(&p, &q)?, &j8)?;
            let target = TransitionMatrix::build(&p.label_swap(), &q.label_swap())?;
            r = r.max(c.dense().max_abs_diff(target.dense()));
        }
    }
    Ok(Outcome::within(r, tol))
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for sub in permutations(k - 1) {
        for pos in 0..=sub.len() {
            let mut v = sub.clone();
            v.insert(pos, k - 1);
            out.push(v);
        }
    }
    out
}

/// All 24 relabellings of the memory-one states; exactly the eight J's may pass.
pub fn admissibility_brute_force(trials: usize, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut admissible = Vec::new();
    let mut wrong = 0usize;
    let mut perms = permutations(4);
    perms.sort();
    for perm in perms {
        let sp = SymmetryPermutation::from_perm(perm.clone())?;
        let ok = check_admissible(&sp, 1, trials, rng)?.admissible;
        if ok {
            admissible.push(perm);
        }
        wrong += usize::from(ok != sp.kind().is_some());
    }
    Ok(Outcome::within(wrong as f64, 0.0)
        .and(admissible.len() == 8)
        .with_detail(json!({ "admissible": admissible })))
}

/// The eight J's pass at memory `n`; `samples` random other permutations fail.
pub fn admissibility_sampled(n: usize, samples: usize, trials: usize, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut j_fail = 0usize;
    for k in SymmetryKind::ALL {
        j_fail += usize::from(!check_admissible(&SymmetryPermutation::build_j(k, n), n, trials, rng)?.admissible);
    }
    let mut other_pass = 0usize;
    let mut tested = 0usize;
    let mut perm: Vec<usize> = (0..state_count(n)).collect();
    while tested < samples {
        perm.shuffle(rng);
        let sp = SymmetryPermutation::from_perm(perm.clone())?;
        if sp.kind().is_some() {
            continue;
        }
        tested += 1;
        other_pass += usize::from(check_admissible(&sp, n, trials, rng)?.admissible);
    }
    Ok(Outcome::within((j_fail + other_pass) as f64, 0.0)
        .with_detail(json!({ "n": n, "j_failed": j_fail, "non_j_tested": tested, "non_j_passed": other_pass })))
}

/// Eigenvalue multiplicities of J2 against `(2^{2n-1} - 2^{n-1}, 2^{2n-1} + 2^{n-1})`.
pub fn j2_spectrum(ns: RangeInclusive<usize>) -> Outcome {
    let mut wrong = 0usize;
    let mut rows = Vec::new();
    for n in ns {
        let got = j2_eigenvalue_multiplicities(n);
        let half = state_count(n) / 2;
        let want = (half - (1 << (n - 1)), half + (1 << (n - 1)));
        wrong += usize::from(got != want);
        rows.push(json!({ "n": n, "minus": got.0, "plus": got.1 }));
    }
    Outcome::within(wrong as f64, 0.0).with_detail(Value::Array(rows))
}

// ---- payoff ----

pub fn payoff_methods(ns: RangeInclusive<usize>, trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let fs = [donation_payoff(n), generic_payoff(n)];
        for _ in 0..trials {
            let (p, q) = random_pair(n, rng, 0.01);
            for f in &fs {
                let d = payoff(&p, &q, f.values(), PayoffMethod::Determinant)?;
                let s = payoff(&p, &q, f.values(), PayoffMethod::Stationary)?;
                r = r.max((d - s).abs());
            }
        }
    }
    Ok(Outcome::within(r, tol))
}

/// Embedded reactive strategies against the closed forms of `A`, `A_s`, `A_a`.
pub fn payoff_reactive(trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for _ in 0..trials {
        let c = rng.gen_range(0.1..2.0);
        let b = c + rng.gen_range(0.0..3.0);
        let f = PayoffVector::build(&GameParams::donation(b, c)?, 1, true);
        let x: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.01..0.99));
        let p = reactive_to_full(x[0], x[1])?;
        let q = reactive_to_full(x[2], x[3])?;
        let closed = reactive_decomposition(x[0], x[1], x[2], x[3], b, c)?;
        let full = decompose_payoff(&p, &q, f.values(), PayoffMethod::Determinant)?;
        r = r
            .max((closed.total - full.total).abs())
            .max((closed.symmetric - full.symmetric).abs())
            .max((closed.antisymmetric - full.antisymmetric).abs());
    }
    Ok(Outcome::within(r, tol))
}

/// `A(f + C 1) = A(f) + C`.
pub fn payoff_shift(ns: RangeInclusive<usize>, trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let f = generic_payoff(n);
        for _ in 0..trials {
            let (p, q) = random_pair(n, rng, 0.01);
            let c = rng.gen_range(-5.0..5.0);
            let g: Vec<f64> = f.values().iter().map(|v| v + c).collect();
            let a = payoff(&p, &q, f.values(), PayoffMethod::Determinant)?;
            let b = payoff(&p, &q, &g, PayoffMethod::Determinant)?;
            r = r.max((b - a - c).abs());
        }
    }
    Ok(Outcome::within(r, tol))
}

/// `A_s + A_a = A`, `A_s(p,q) = A_s(q,p)` and `A_a(p,q) = -A_a(q,p)`.
pub fn payoff_decomposition(
    ns: RangeInclusive<usize>,
    trials: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let mut closure = 0.0f64;
    let mut sym = 0.0f64;
    let mut anti = 0.0f64;
    for n in ns {
        let fs = [donation_payoff(n), generic_payoff(n)];
        for _ in 0..trials {
            let (p, q) = random_pair(n, rng, 0.01);
            for f in &fs {
                let pq = decompose_payoff(&p, &q, f.values(), PayoffMethod::Determinant)?;
                let qp = decompose_payoff(&q, &p, f.values(), PayoffMethod::Determinant)?;
                closure = closure.max((pq.symmetric + pq.antisymmetric - pq.total).abs());
                sym = sym.max((pq.symmetric - qp.symmetric).abs());
                anti = anti.max((pq.antisymmetric + qp.antisymmetric).abs());
            }
        }
    }
    Ok(Outcome::within(closure.max(sym).max(anti), tol)
        .with_detail(json!({ "closure": closure, "symmetric": sym, "antisymmetric": anti })))
}

/// `|| -f + K 1 - J8 f ||_inf` for donation vectors.
pub fn payoff_reflection(ns: RangeInclusive<usize>, tol: f64) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        for (b, c) in [(2.0, 1.0), (5.0, 0.5), (1.0, 1.0)] {
            let params = GameParams::donation(b, c)?;
            for normalized in [true, false] {
                r = r.max(payoff_vector_reflection_residual(&PayoffVector::build(
                    &params, n, normalized,
                )));
            }
        }
    }
    Ok(Outcome::within(r, tol))
}

// ---- fields ----

const FIELD_VARIANTS: [FieldVariant; 3] = [FieldVariant::Full, FieldVariant::Symmetric, FieldVariant::Antisymmetric];

/// Analytic determinant gradient against central differences, relative.
pub fn field_gradient(
    ns: RangeInclusive<usize>,
    trials: usize,
    h: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let f = donation_payoff(n);
        for _ in 0..trials {
            let x = StrategyVector::random_interior(n, rng, 0.05);
            for v in FIELD_VARIANTS {
                let spec = FieldSpec::new(f.clone(), v);
                let a = adaptive_field(&x, &spec)?;
                let c = adaptive_field(&x, &spec.with_gradient(GradientMethod::CentralDifference { h })?)?;
                r = r.max(relative_diff(&a, &c));
            }
        }
    }
    Ok(Outcome::within(r, tol))
}

/// Memory-one closed-form fields against central differences, relative.
pub fn field_memory1_closed(trials: usize, h: f64, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    let fs = [donation_payoff(1), generic_payoff(1)];
    for _ in 0..trials {
        let x = StrategyVector::random_interior(1, rng, 0.05);
        for f in &fs {
            for v in FIELD_VARIANTS {
                let spec = FieldSpec::new(f.clone(), v);
                let numeric = adaptive_field(
                    &x,
                    &spec.clone().with_gradient(GradientMethod::CentralDifference { h })?,
                )?;
                let closed = adaptive_field(&x, &spec.clone().with_closed_form(ClosedForm::Memory1Full)?)?;
                r = r.max(relative_diff(&closed, &numeric));
                if v == FieldVariant::Antisymmetric {
                    let anti = adaptive_field(&x, &spec.with_closed_form(ClosedForm::Memory1Antisym)?)?;
                    r = r.max(relative_diff(&anti, &numeric));
                }
            }
        }
    }
    Ok(Outcome::within(r, tol))
}

/// Full field equals symmetric plus antisymmetric field.
pub fn field_closure(ns: RangeInclusive<usize>, trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let mut r = 0.0f64;
    for n in ns {
        let f = generic_payoff(n);
        let specs: Vec<FieldSpec> = FIELD_VARIANTS.iter().map(|&v| FieldSpec::new(f.clone(), v)).collect();
        for _ in 0..trials {
            let x = StrategyVector::random_interior(n, rng, 0.02);
            let full = adaptive_field(&x, &specs[0])?;
            let s = adaptive_field(&x, &specs[1])?;
            let a = adaptive_field(&x, &specs[2])?;
            let sum: Vec<f64> = s.iter().zip(&a).map(|(x, y)| x + y).collect();
            r = r.max(max_diff(&full, &sum));
        }
    }
    Ok(Outcome::within(r, tol))
}

/// Restricted antisymmetric counting field against the explicit polynomials:
/// the residual is the angle between the lines they span.
pub fn field_counting(trials: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let f = donation_payoff(1);
    let mut angle = 0.0f64;
    let mut anti_parallel = 0usize;
    for _ in 0..trials {
        let q: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.05..0.95));
        let r = counting_field(
            q[0],
            q[1],
            q[2],
            &f,
            CountingVariant::Restriction(FieldVariant::Antisymmetric),
        )?;
        let c = counting_antisym_closed(q[0], q[1], q[2]);
        let dot: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
        let cos = dot / (r.iter().map(|v| v * v).sum::<f64>().sqrt() * c.iter().map(|v| v * v).sum::<f64>().sqrt());
        angle = angle.max(cos.abs().min(1.0).acos());
        anti_parallel += usize::from(cos < 0.0);
    }
    Ok(Outcome::within(angle, tol).with_detail(json!({ "points": trials, "anti_parallel": anti_parallel })))
}

// ---- conserved quantities ----

/// Worst drift per unit time of `quantity` along antisymmetric trajectories.
pub fn conserved_drift(
    n: usize,
    quantities: &[ConservedQuantity],
    starts: usize,
    dt: f64,
    t_max: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let spec = FieldSpec::new(donation_payoff(n), FieldVariant::Antisymmetric);
    let mut worst = 0.0f64;
    let mut spans = Vec::new();
    for _ in 0..starts {
        let x0 = StrategyVector::random_interior(n, rng, 0.2);
        let tr = integrate(&spec, x0.probs(), &IntegrateOptions::rk4(dt, t_max))?;
        spans.push(tr.final_time());
        for q in quantities {
            worst = worst.max(tr.conserved_report(q, n)?.drift_per_unit_time);
        }
    }
    let ids: Vec<String> = quantities.iter().map(|q| q.id(n)).collect();
    Ok(Outcome::within(worst, tol).with_detail(json!({ "quantities": ids, "integrated_time": spans })))
}

/// Conserved polynomials of the memory-one antisymmetric field and the
/// distance of the printed G2 from their span.
pub fn g2_polyfit(samples: usize, degree: u32, rng: &mut ChaCha8Rng) -> Result<Value> {
    let spec = FieldSpec::new(donation_payoff(1), FieldVariant::Antisymmetric);
    let pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| StrategyVector::random_interior(1, rng, 0.05).into_probs())
        .collect();
    let fit = fit_conserved_polynomials(&spec, &pts, degree, 1e-8)?;
    let g2 = fit.coefficients(&g2_terms());
    Ok(json!({ "degree": degree, "null_dim": fit.null_dim, "g2_residual": fit.residual(&g2) }))
}

// ---- stationarity, mirror, perturbation ----

/// The field at `tft(eps)` must shrink with `eps` at order at least `min_order`.
/// The residual is the order shortfall `max(0, min_order - order)`.
pub fn tft_check(n: usize, variant: FieldVariant, eps: &[f64], min_order: f64) -> Result<Outcome> {
    let rep = tft_stationarity(&donation_payoff(n), variant, eps)?;
    let shortfall = (min_order - rep.order).max(0.0);
    Ok(Outcome::within(shortfall, 0.0)
        .and(rep.decreasing)
        .with_detail(json!({ "eps": rep.eps, "norms": rep.norms, "order": rep.order, "decreasing": rep.decreasing })))
}

pub fn mirror_check(n: usize, starts: usize, dt: f64, t_max: f64, tol: f64, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let spec = FieldSpec::new(donation_payoff(n), FieldVariant::Full);
    let mut worst = 0.0f64;
    let mut common = f64::INFINITY;
    for _ in 0..starts {
        let x0 = StrategyVector::random_interior(n, rng, 0.2);
        let rep = z2_mirror_check(&spec, x0.probs(), t_max, dt)?;
        worst = worst.max(rep.max_deviation);
        common = common.min(rep.common_time);
    }
    Ok(Outcome::within(worst, tol).with_detail(json!({ "min_common_time": common })))
}

/// Divergence ratio for a tenfold change of `eps = b - c`, at the last common time.
/// The residual is the distance of the ratio from `[ratio_min, ratio_max]`.
pub fn perturbation_check(
    start: [f64; 3],
    c: f64,
    eps: [f64; 2],
    dt: f64,
    t_max: f64,
    ratio_range: (f64, f64),
) -> Result<Outcome> {
    let a = perturbation_experiment(start, eps[0], c, t_max, dt)?;
    let b = perturbation_experiment(start, eps[1], c, t_max, dt)?;
    let t = a
        .times
        .last()
        .copied()
        .unwrap_or(0.0)
        .min(b.times.last().copied().unwrap_or(0.0));
    let ratio = a.divergence_at(t) / b.divergence_at(t);
    let outside = if ratio.is_nan() {
        f64::NAN
    } else {
        (ratio_range.0 - ratio).max(ratio - ratio_range.1).max(0.0)
    };
    Ok(Outcome::within(outside, 0.0)
        .and(a.dominated && b.dominated)
        .with_detail(json!({ "t": t, "ratio": ratio, "dominated": [a.dominated, b.dominated] })))
}

// ---- runner ----

/// Collects check results; every check gets its own generator.
pub struct Runner {
    master: ChaCha8Rng,
    pub checks: Vec<CheckResult>,
}

impl Runner {
    pub fn new(seed: u64) -> Self {
        Self {
            master: ChaCha8Rng::seed_from_u64(seed),
            checks: Vec::new(),
        }
    }

    pub fn run<F>(&mut self, id: impl Into<String>, anchor: &str, check: F)
    where
        F: FnOnce(&mut ChaCha8Rng) -> Result<Outcome>,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master.gen());
        let t0 = Instant::now();
        let out = check(&mut rng);
        let wall_time_s = t0.elapsed().as_secs_f64();
        let result = match out {
            Ok(o) => CheckResult {
                id: id.into(),
                anchor: anchor.to_string(),
                max_residual: o.max_residual.is_finite().then_some(o.max_residual),
                tolerance: o.tolerance,
                pass: o.pass && !o.max_residual.is_nan(),
                wall_time_s,
                detail: o.detail,
            },
            Err(e) => CheckResult {
                id: id.into(),
                anchor: anchor.to_string(),
                max_residual: None,
                tolerance: f64::NAN,
                pass: false,
                wall_time_s,
                detail: Some(json!({ "error": e.to_string() })),
            },
        };
        self.checks.push(result);
    }

    pub fn finish(self, cfg: &BatteryConfig, ledger: &Ledger, wall_time_s: f64) -> VerificationReport {
        let pass = self.checks.iter().all(|c| c.pass);
        VerificationReport {
            schema_version: SCHEMA_VERSION,
            tool_version: crate::VERSION.to_string(),
            seed: cfg.seed,
            n_max: cfg.n_max,
            trials: cfg.trials,
            tolerance_ledger: ledger.source.clone(),
            tolerance_ledger_sha256: ledger.sha256.clone(),
            checks: self.checks,
            pass,
            wall_time_s,
        }
    }
}

/// The full battery, in a fixed order.
pub fn run_battery(cfg: &BatteryConfig, ledger: &Ledger) -> VerificationReport {
    let t0 = Instant::now();
    let tol: &Tolerances = &ledger.tolerances;
    let ns = 1..=cfg.n_max;
    let trials = cfg.trials;
    let fault = cfg.inject_fault;
    let mut run = Runner::new(cfg.seed);

    run.run(
        "structure.recursion",
        "direct and block-recursive transition matrices agree entrywise",
        |rng| {
            Ok(structure_recursion(
                &sample_matrices(ns.clone(), trials, fault, rng)?,
                tol.structure.recursion,
            ))
        },
    );
    run.run("structure.row_sums", "transition matrix rows sum to one", |rng| {
        Ok(structure_row_sums(
            &sample_matrices(ns.clone(), trials, fault, rng)?,
            tol.structure.row_sum,
        ))
    });
    run.run(
        "structure.factorization",
        "each row is a rank-one quadruple in the columns fixed by the history shift",
        |rng| {
            Ok(structure_factorization(
                &sample_matrices(ns.clone(), trials, fault, rng)?,
                tol.structure.factorization,
            ))
        },
    );

    run.run(
        "symmetry.group",
        "the eight relabellings form a group, bitwise and recursive builds agree",
        |_| Ok(symmetry_group(ns.clone())),
    );
    run.run("symmetry.conjugation_j2", "J2 M(p,q) J2 = M(q,p)", |rng| {
        conjugation_j2(ns.clone(), trials, tol.symmetry.conjugation, rng)
    });
    run.run("symmetry.conjugation_j8", "J8 M(p,q) J8 = M(phi p, phi q)", |rng| {
        conjugation_j8(ns.clone(), trials, tol.symmetry.conjugation, rng)
    });
    run.run(
        "symmetry.admissibility_n1",
        "exactly eight of the 24 memory-one relabellings preserve the model",
        |rng| admissibility_brute_force(tol.symmetry.admissibility_trials, rng),
    );
    run.run(
        "symmetry.admissibility_n2",
        "the eight relabellings preserve the memory-two model, random others do not",
        |rng| admissibility_sampled(2, tol.symmetry.non_j_samples, tol.symmetry.admissibility_trials, rng),
    );

    run.run(
        "payoff.methods",
        "determinant ratio equals stationary-distribution payoff",
        |rng| payoff_methods(ns.clone(), trials, tol.payoff.method_equivalence, rng),
    );
    run.run(
        "payoff.reactive",
        "embedded reactive strategies match the reactive closed forms",
        |rng| payoff_reactive(trials, tol.payoff.reactive_closed_form, rng),
    );
    run.run("payoff.shift", "A(f + C 1) = A(f) + C", |rng| {
        payoff_shift(ns.clone(), trials, tol.payoff.constant_shift, rng)
    });
    run.run(
        "payoff.decomposition",
        "A = A_s + A_a with A_s symmetric and A_a antisymmetric in (p, q)",
        |rng| payoff_decomposition(ns.clone(), trials, tol.payoff.decomposition, rng),
    );
    run.run(
        "payoff.reflection",
        "donation payoff vectors satisfy -f + K 1 = J8 f",
        |_| payoff_reflection(1..=5.max(cfg.n_max), tol.payoff.reflection),
    );

    let h = tol.field.finite_difference_h;
    run.run(
        "field.gradient",
        "analytic determinant gradient equals central differences",
        |rng| field_gradient(ns.clone(), trials, h, tol.field.gradient_relative, rng),
    );
    run.run(
        "field.memory1_closed",
        "memory-one closed-form fields equal the numeric fields",
        |rng| field_memory1_closed(trials, h, tol.field.closed_form_relative, rng),
    );
    run.run(
        "field.closure",
        "full field equals symmetric plus antisymmetric field",
        |rng| field_closure(ns.clone(), trials, tol.field.closure, rng),
    );
    run.run(
        "field.counting",
        "restricted antisymmetric counting field is collinear with the explicit polynomials",
        |rng| field_counting(trials, tol.field.counting_angle, rng),
    );

    let ct = &tol.conserved;
    for (k, q) in [ConservedQuantity::G1, ConservedQuantity::G2, ConservedQuantity::G3]
        .into_iter()
        .enumerate()
    {
        let id = format!("conserved.memory1.{}", q.id(1));
        run.run(id, "memory-one antisymmetric flow conserves G1, G2, G3", |rng| {
            let out = conserved_drift(1, &[q], ct.starts, ct.dt, ct.t_max, ct.drift_per_unit_time, rng)?;
            if k == 1 {
                let fit = g2_polyfit(ct.polyfit_samples, ct.polyfit_degree, rng)?;
                let mut d = out.detail.clone().unwrap_or(json!({}));
                d["polyfit"] = fit;
                return Ok(out.with_detail(d));
            }
            Ok(out)
        });
    }
    for n in 2..=cfg.n_max.max(2) {
        run.run(
            format!("conserved.pair_difference.n{n}"),
            "antisymmetric flow conserves p(CD.I) - p(DC.I) for alike suffixes I",
            |rng| {
                conserved_drift(
                    n,
                    &ConservedQuantity::for_memory(n),
                    ct.starts,
                    ct.dt,
                    ct.t_max,
                    ct.drift_per_unit_time,
                    rng,
                )
            },
        );
    }

    for n in 1..=cfg.n_max.max(2) {
        run.run(
            format!("tft.stationarity.n{n}"),
            "antisymmetric field vanishes at tit-for-tat, order at least one in eps",
            |_| tft_check(n, FieldVariant::Antisymmetric, &tol.tft.eps, tol.tft.min_order),
        );
        run.run(
            format!("tft.stationarity_reparam.n{n}"),
            "denominator-free antisymmetric field vanishes at tit-for-tat",
            |_| tft_check(n, FieldVariant::AntisymmetricReparam, &tol.tft.eps, tol.tft.min_order),
        );
    }

    let mt = &tol.mirror;
    for n in 1..=cfg.n_max.max(2) {
        let t = if n == 1 { mt.memory_one } else { mt.memory_two };
        run.run(
            format!("mirror.n{n}"),
            "forward flow from phi(x) mirrors the backward flow from x",
            |rng| mirror_check(n, mt.starts, mt.dt, mt.t_max, t, rng),
        );
    }

    run.run("spectrum.j2", "J2 eigenvalue multiplicities", |_| {
        Ok(j2_spectrum(1..=5.max(cfg.n_max)))
    });

    let pt = &tol.perturbation;
    run.run(
        "perturbation.counting",
        "counting dynamics diverge from the payoff-gap flow linearly in b - c",
        |_| perturbation_check(pt.start, pt.c, pt.eps, pt.dt, pt.t_max, (pt.ratio_min, pt.ratio_max)),
    );

    run.finish(cfg, ledger, t0.elapsed().as_secs_f64())
}

/// The symmetry identities at a single memory length.
pub fn run_symmetry(n: usize, trials: usize, seed: u64, ledger: &Ledger) -> VerificationReport {
    let t0 = Instant::now();
    let tol = &ledger.tolerances.symmetry;
    let mut run = Runner::new(seed);
    run.run(
        "symmetry.group",
        "the eight relabellings form a group, bitwise and recursive builds agree",
        |_| Ok(symmetry_group(n..=n)),
    );
    run.run("symmetry.conjugation_j2", "J2 M(p,q) J2 = M(q,p)", |rng| {
        conjugation_j2(n..=n, trials, tol.conjugation, rng)
    });
    run.run("symmetry.conjugation_j8", "J8 M(p,q) J8 = M(phi p, phi q)", |rng| {
        conjugation_j8(n..=n, trials, tol.conjugation, rng)
    });
    if n == 1 {
        run.run(
            "symmetry.admissibility_n1",
            "exactly eight of the 24 memory-one relabellings preserve the model",
            |rng| admissibility_brute_force(tol.admissibility_trials, rng),
        );
    } else {
        run.run(
            format!("symmetry.admissibility_n{n}"),
            "the eight relabellings preserve the model, random others do not",
            |rng| admissibility_sampled(n, tol.non_j_samples, tol.admissibility_trials, rng),
        );
    }
    run.run("spectrum.j2", "J2 eigenvalue multiplicities", |_| {
        Ok(j2_spectrum(n..=n))
    });
    let cfg = BatteryConfig {
        n_max: n,
        trials,
        seed,
        inject_fault: false,
    };
    run.finish(&cfg, ledger, t0.elapsed().as_secs_f64())
}
