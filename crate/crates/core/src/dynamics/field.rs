//! Adaptive-dynamics vector fields.

use serde::{Deserialize, Serialize};

use super::closed_form::{
    counting_antisym_closed, memory1_antisym_field_closed, memory1_field_closed, reactive_antisym_field,
    reactive_sym_field,
};
use crate::error::{Error, Result};
use crate::markov::{determinant_ratio, quad_start, PayoffSystem, TransitionMatrix};
use crate::model::{bar_bits, counting_to_full, PayoffVector, StrategyVector};

pub const DEFAULT_H: f64 = 1e-5;
pub const H_RANGE: (f64, f64) = (1e-8, 1e-4);
pub const ANALYTIC_MARGIN: f64 = 1e-10;
/// Allowed `|field_CD - field_DC|` on the counting subspace.
pub const COUNTING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldVariant {
    Full,
    Symmetric,
    Antisymmetric,
    /// Gradient of `det[M~ | f - J2 f]`, the antisymmetric field with its
    /// denominator (and a factor 2) multiplied out. Same zeros and
    /// invariants, different speed and possibly reversed orientation.
    AntisymmetricReparam,
}

impl std::str::FromStr for FieldVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "sym" | "symmetric" => Ok(Self::Symmetric),
            "antisym" | "antisymmetric" => Ok(Self::Antisymmetric),
            "reparam" | "antisym-reparam" | "antisymmetric_reparam" => Ok(Self::AntisymmetricReparam),
            _ => Err(Error::InvalidKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    CentralDifference { h: f64 },
    AnalyticDeterminant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    Memory1Full,
    Memory1Antisym,
    CountingAntisym,
    ReactiveSym,
    ReactiveAntisym,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    payoff: PayoffVector,
    variant: FieldVariant,
    gradient: GradientMethod,
    closed_form: Option<ClosedForm>,
}

impl FieldSpec {
    pub fn new(payoff: PayoffVector, variant: FieldVariant) -> Self {
        Self {
            payoff,
            variant,
            gradient: GradientMethod::AnalyticDeterminant,
            closed_form: None,
        }
    }

    pub fn with_gradient(mut self, gradient: GradientMethod) -> Result<Self> {
        if let GradientMethod::CentralDifference { h } = gradient {
            if !(H_RANGE.0..=H_RANGE.1).contains(&h) {
                return Err(Error::Domain(format!(
                    "finite-difference step {h:e} outside [{:e}, {:e}]",
                    H_RANGE.0, H_RANGE.1
                )));
            }
        }
        self.gradient = gradient;
        Ok(self)
    }

    pub fn with_closed_form(mut self, form: ClosedForm) -> Result<Self> {
        let ok = self.payoff.n() == 1
            && match form {
                ClosedForm::Memory1Full => self.variant != FieldVariant::AntisymmetricReparam,
                ClosedForm::Memory1Antisym => self.variant == FieldVariant::Antisymmetric,
                ClosedForm::CountingAntisym => self.variant == FieldVariant::AntisymmetricReparam,
                ClosedForm::ReactiveSym => {
                    self.variant == FieldVariant::Symmetric && self.payoff.params().donation.is_some()
                }
                ClosedForm::ReactiveAntisym => {
                    self.variant == FieldVariant::Antisymmetric && self.payoff.params().donation.is_some()
                }
            };
        if !ok {
            return Err(Error::Domain(format!(
                "closed form {form:?} does not apply to a memory-{} {:?} field",
                self.payoff.n(),
                self.variant
            )));
        }
        self.closed_form = Some(form);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.payoff.n()
    }

    pub fn dim(&self) -> usize {
        self.payoff.values().len()
    }

    pub fn payoff(&self) -> &PayoffVector {
        &self.payoff
    }

    pub fn variant(&self) -> FieldVariant {
        self.variant
    }

    pub fn gradient(&self) -> GradientMethod {
        self.gradient
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    /// The payoff vector whose payoff functional is differentiated.
    pub fn variant_vector(&self) -> Vec<f64> {
        match self.variant {
            FieldVariant::Full => self.payoff.values().to_vec(),
            FieldVariant::Symmetric => self.payoff.symmetric_part(),
            FieldVariant::Antisymmetric => self.payoff.antisymmetric_part(),
            FieldVariant::AntisymmetricReparam => self.payoff.antisymmetric_part().iter().map(|v| 2.0 * v).collect(),
        }
    }

    pub fn eval(&self, x: &StrategyVector) -> Result<Vec<f64>> {
        adaptive_field(x, self)
    }
}

/// Anything the integrators can follow.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl VectorField for FieldSpec {
    fn dim(&self) -> usize {
        FieldSpec::dim(self)
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = StrategyVector::new(self.n(), x.to_vec())?;
        adaptive_field(&s, self)
    }
}

/// Reverses time.
#[derive(Debug, Clone)]
pub struct Negated<F>(pub F);

impl<F: VectorField> VectorField for Negated<F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0.eval(x)?.into_iter().map(|v| -v).collect())
    }
}

/// Wrap a closure as a field.
pub struct FnField<G> {
    dim: usize,
    f: G,
}

impl<G: Fn(&[f64]) -> Result<Vec<f64>>> FnField<G> {
    pub fn new(dim: usize, f: G) -> Self {
        Self { dim, f }
    }
}

impl<G: Fn(&[f64]) -> Result<Vec<f64>>> VectorField for FnField<G> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        (self.f)(x)
    }
}

fn require_margin(x: &StrategyVector, required: f64) -> Result<()> {
    let margin = x.margin();
    if margin < required {
        return Err(Error::Margin { margin, required });
    }
    Ok(())
}

/// `d A_variant(p, x) / dp` at `p = x`, the resident fixed at `x`.
pub fn adaptive_field(x: &StrategyVector, spec: &FieldSpec) -> Result<Vec<f64>> {
    if x.n() != spec.n() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: x.len(),
        });
    }
    if let Some(form) = spec.closed_form {
        return closed_form_field(x, spec, form);
    }
    let g = spec.variant_vector();
    let reparam = spec.variant == FieldVariant::AntisymmetricReparam;
    match spec.gradient {
        GradientMethod::AnalyticDeterminant => {
            require_margin(x, ANALYTIC_MARGIN)?;
            analytic_gradient(x, &g, reparam)
        }
        GradientMethod::CentralDifference { h } => {
            require_margin(x, 2.0 * h)?;
            central_gradient(x, &g, h, reparam)
        }
    }
}

/// Only row `i` of `B = [M - I | 1]` depends on `p_i`, through its quadruple
/// `(z, 1-z, -z, -(1-z))`, `z = q[bar i]`. With `y = B^{-1} g` and `nu` the
/// last row of `B^{-1}`, `dA/dp_i = -nu_i (dB_i . y)` and
/// `d det B / dp_i = det B * (B^{-1} dB)_{ii}`.
fn analytic_gradient(x: &StrategyVector, g: &[f64], reparam: bool) -> Result<Vec<f64>> {
    let n = x.n();
    let sys = PayoffSystem::new(x, x)?;
    let d = x.len();
    let last = d - 1;
    let y = sys.solve(g)?;
    let nu = sys.stationary()?;
    let rows: Vec<(usize, [f64; 4])> = (0..d)
        .map(|i| {
            let z = x.get(bar_bits(i, n));
            (quad_start(i, n), [z, 1.0 - z, -z, -(1.0 - z)])
        })
        .collect();

    let da: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, (s, r))| {
            let acc: f64 = (0..4).filter(|&k| s + k != last).map(|k| r[k] * y[s + k]).sum();
            -nu[i] * acc
        })
        .collect();
    if !reparam {
        return Ok(da);
    }

    let det = sys.denominator();
    let inv = sys.lu().inverse()?;
    let a_g = y[last];
    Ok(rows
        .iter()
        .enumerate()
        .map(|(i, (s, r))| {
            let tr: f64 = (0..4).filter(|&k| s + k != last).map(|k| inv[(s + k, i)] * r[k]).sum();
            det * tr * a_g + det * da[i]
        })
        .collect())
}

fn central_gradient(x: &StrategyVector, g: &[f64], h: f64, reparam: bool) -> Result<Vec<f64>> {
    let eval = |p: &StrategyVector| -> Result<f64> {
        let m = TransitionMatrix::build(p, x)?;
        if reparam {
            Ok(m.replaced_last_column(g).lu().det())
        } else {
            determinant_ratio(&m, g)
        }
    };
    let mut probs = x.probs().to_vec();
    let mut out = Vec::with_capacity(probs.len());
    for i in 0..probs.len() {
        let xi = probs[i];
        probs[i] = xi + h;
        let up = eval(&StrategyVector::new(x.n(), probs.clone())?)?;
        probs[i] = xi - h;
        let down = eval(&StrategyVector::new(x.n(), probs.clone())?)?;
        probs[i] = xi;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

fn closed_form_field(x: &StrategyVector, spec: &FieldSpec, form: ClosedForm) -> Result<Vec<f64>> {
    let p = [x.get(0), x.get(1), x.get(2), x.get(3)];
    let f = spec.payoff.values();
    let out = match form {
        ClosedForm::Memory1Full => {
            let g = spec.variant_vector();
            memory1_field_closed(p, [g[0], g[1], g[2], g[3]])?.to_vec()
        }
        ClosedForm::Memory1Antisym => memory1_antisym_field_closed(p, f[1], f[2])?.to_vec(),
        ClosedForm::CountingAntisym => {
            if p[1] != p[2] {
                return Err(Error::Domain("counting closed form needs p_CD = p_DC".into()));
            }
            let [a, b, c] = counting_antisym_closed(p[0], p[1], p[3]);
            vec![a, b, b, c]
        }
        ClosedForm::ReactiveSym | ClosedForm::ReactiveAntisym => {
            if p[0] != p[2] || p[1] != p[3] {
                return Err(Error::Domain(
                    "reactive closed form needs p_CC = p_DC and p_CD = p_DD".into(),
                ));
            }
            let (b, c) = spec.payoff.params().donation.expect("checked on construction");
            let v = if form == ClosedForm::ReactiveSym {
                reactive_sym_field(p[0], p[1], b, c)?
            } else {
                reactive_antisym_field(p[0], p[1], b, c)?
            };
            vec![v[0], v[1], v[0], v[1]]
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountingVariant {
    /// Embed, evaluate the memory-1 field, read off `(CC, CD, DD)`.
    Restriction(FieldVariant),
    /// The explicit time-rescaled antisymmetric polynomials.
    AntisymClosed,
}

/// Dynamics of counting strategies `(q2, q1, q0)`.
pub fn counting_field(q2: f64, q1: f64, q0: f64, f: &PayoffVector, variant: CountingVariant) -> Result<[f64; 3]> {
    match variant {
        CountingVariant::AntisymClosed => {
            counting_to_full(q2, q1, q0)?;
            Ok(counting_antisym_closed(q2, q1, q0))
        }
        CountingVariant::Restriction(v) => {
            if f.n() != 1 {
                return Err(Error::Dimension {
                    expected: 4,
                    got: f.values().len(),
                });
            }
            let x = counting_to_full(q2, q1, q0)?;
            let field = adaptive_field(&x, &FieldSpec::new(f.clone(), v))?;
            let gap = (field[1] - field[2]).abs();
            if gap > COUNTING_TOL {
                return Err(Error::InvarianceViolation(format!(
                    "field_CD - field_DC = {gap:e} on the counting subspace"
                )));
            }
            Ok([field[0], field[1], field[3]])
        }
    }
}

/// Counting dynamics as a 3-dimensional [`VectorField`].
#[derive(Debug, Clone)]
pub struct CountingField {
    pub payoff: PayoffVector,
    pub variant: CountingVariant,
}

impl VectorField for CountingField {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(counting_field(x[0], x[1], x[2], &self.payoff, self.variant)?.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{payoff, PayoffMethod};
    use crate::model::{reactive_to_full, GameParams};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(n: usize, variant: FieldVariant) -> FieldSpec {
        FieldSpec::new(
            PayoffVector::build(&GameParams::new(3.0, 0.5, 5.0, 1.0), n, true),
            variant,
        )
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
    }

    #[test]
    fn h_range_enforced() {
        let s = spec(1, FieldVariant::Full);
        assert!(s
            .clone()
            .with_gradient(GradientMethod::CentralDifference { h: 1e-3 })
            .is_err());
        assert!(s.with_gradient(GradientMethod::CentralDifference { h: 1e-6 }).is_ok());
    }

    #[test]
    fn margin_enforced() {
        let s = spec(1, FieldVariant::Full)
            .with_gradient(GradientMethod::CentralDifference { h: 1e-5 })
            .unwrap();
        let x = StrategyVector::new(1, vec![0.5, 0.5, 0.5, 1.5e-5]).unwrap();
        assert!(matches!(adaptive_field(&x, &s), Err(Error::Margin { .. })));
    }

    #[test]
    fn closed_form_applicability() {
        assert!(spec(2, FieldVariant::Full)
            .with_closed_form(ClosedForm::Memory1Full)
            .is_err());
        assert!(spec(1, FieldVariant::Full)
            .with_closed_form(ClosedForm::Memory1Antisym)
            .is_err());
        assert!(spec(1, FieldVariant::Symmetric)
            .with_closed_form(ClosedForm::ReactiveSym)
            .is_err());
    }

    #[test]
    fn restriction_well_defined() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = PayoffVector::build(&GameParams::donation(2.0, 1.0).unwrap(), 1, true);
        for _ in 0..200 {
            let q = StrategyVector::random_interior(1, &mut rng, 0.01);
            for v in [FieldVariant::Full, FieldVariant::Symmetric, FieldVariant::Antisymmetric] {
                counting_field(q.get(0), q.get(1), q.get(2), &f, CountingVariant::Restriction(v)).unwrap();
            }
        }
    }

    #[test]
    fn reactive_closed_form_matches_restriction() {
        let (b, c) = (2.0, 1.0);
        let f = PayoffVector::build(&GameParams::donation(b, c).unwrap(), 1, true);
        for (p1, p2) in [(0.7, 0.2), (0.3, 0.6), (0.55, 0.45)] {
            let x = reactive_to_full(p1, p2).unwrap();
            for (v, form) in [
                (FieldVariant::Symmetric, ClosedForm::ReactiveSym),
                (FieldVariant::Antisymmetric, ClosedForm::ReactiveAntisym),
            ] {
                let s = FieldSpec::new(f.clone(), v);
                let full = adaptive_field(&x, &s).unwrap();
                // movement within the reactive plane: p1 drives CC and DC, p2 drives CD and DD
                let plane = [full[0] + full[2], full[1] + full[3]];
                let closed = adaptive_field(&x, &s.with_closed_form(form).unwrap()).unwrap();
                assert!(close(&plane, &closed[..2], 1e-9), "{plane:?} vs {closed:?}");
            }
        }
    }

    #[test]
    fn symmetric_field_is_half_diagonal_gradient() {
        let s = spec(2, FieldVariant::Symmetric);
        let g = s.payoff().symmetric_part();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = StrategyVector::random_interior(2, &mut rng, 0.1);
        let field = adaptive_field(&x, &s).unwrap();
        let h = 1e-5;
        for i in 0..16 {
            let mut up = x.probs().to_vec();
            up[i] += h;
            let mut dn = x.probs().to_vec();
            dn[i] -= h;
            let up = StrategyVector::new(2, up).unwrap();
            let dn = StrategyVector::new(2, dn).unwrap();
            let grad = (payoff(&up, &up, &g, PayoffMethod::Determinant).unwrap()
                - payoff(&dn, &dn, &g, PayoffMethod::Determinant).unwrap())
                / (2.0 * h);
            assert!(
                (0.5 * grad - field[i]).abs() < 1e-6,
                "{i}: {} vs {}",
                0.5 * grad,
                field[i]
            );
        }
    }

    fn point(n: usize) -> impl Strategy<Value = StrategyVector> {
        prop::collection::vec(0.05..0.95f64, crate::model::state_count(n))
            .prop_map(move |v| StrategyVector::new(n, v).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn analytic_matches_central(x in (1usize..=3).prop_flat_map(point)) {
            let h = 1e-5;
            for v in [FieldVariant::Full, FieldVariant::Symmetric, FieldVariant::Antisymmetric, FieldVariant::AntisymmetricReparam] {
                let s = spec(x.n(), v);
                let a = adaptive_field(&x, &s).unwrap();
                let c = adaptive_field(&x, &s.with_gradient(GradientMethod::CentralDifference { h }).unwrap()).unwrap();
                prop_assert!(close(&a, &c, 1e-6f64.max(1e3 * h * h)), "{:?}", v);
            }
        }

        #[test]
        fn field_decomposes(x in (1usize..=2).prop_flat_map(point)) {
            let full = adaptive_field(&x, &spec(x.n(), FieldVariant::Full)).unwrap();
            let sym = adaptive_field(&x, &spec(x.n(), FieldVariant::Symmetric)).unwrap();
            let anti = adaptive_field(&x, &spec(x.n(), FieldVariant::Antisymmetric)).unwrap();
            for i in 0..full.len() {
                prop_assert!((full[i] - sym[i] - anti[i]).abs() <= 1e-8);
            }
        }

        #[test]
        fn shift_leaves_field_unchanged(x in point(1), c in -3.0..3.0f64) {
            let s = spec(1, FieldVariant::Full);
            let t = FieldSpec::new(s.payoff().shifted(c), FieldVariant::Full);
            let a = adaptive_field(&x, &s).unwrap();
            let b = adaptive_field(&x, &t).unwrap();
            prop_assert!(close(&a, &b, 1e-9));
        }

        #[test]
        fn appendix_full_field(x in point(1)) {
            let s = spec(1, FieldVariant::Full);
            let a = adaptive_field(&x, &s).unwrap();
            let b = adaptive_field(&x, &s.with_closed_form(ClosedForm::Memory1Full).unwrap()).unwrap();
            prop_assert!(close(&a, &b, 1e-6));
        }

        #[test]
        fn appendix_antisym_field(x in point(1)) {
            let s = spec(1, FieldVariant::Antisymmetric);
            let a = adaptive_field(&x, &s).unwrap();
            let b = adaptive_field(&x, &s.with_closed_form(ClosedForm::Memory1Antisym).unwrap()).unwrap();
            prop_assert!(close(&a, &b, 1e-6));
        }

        #[test]
        fn reparam_is_scaled_antisym(x in (1usize..=2).prop_flat_map(point)) {
            let a = adaptive_field(&x, &spec(x.n(), FieldVariant::Antisymmetric)).unwrap();
            let r = adaptive_field(&x, &spec(x.n(), FieldVariant::AntisymmetricReparam)).unwrap();
            let d2 = PayoffSystem::new(&x, &x).unwrap().denominator();
            prop_assert!(d2 < 0.0);
            let scaled: Vec<f64> = a.iter().map(|v| 2.0 * d2 * v).collect();
            prop_assert!(close(&scaled, &r, 1e-9));
        }
    }
}
