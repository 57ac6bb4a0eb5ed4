//! Fixed-step RK4 and adaptive Dormand-Prince integration with boundary stopping.

use serde::{Deserialize, Serialize};

use super::conserved::{drift_report, ConservedQuantity, ConservedReport};
use super::field::VectorField;
use crate::error::{Error, Result};
use crate::model::cube_distance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    /// Fixed step for RK4, initial step for RK45.
    pub dt: f64,
    pub t_max: f64,
    pub method: Method,
    /// Stop once any coordinate is this close to `{0, 1}`.
    pub boundary_margin: f64,
    pub max_steps: usize,
    /// Quantities recorded at every accepted step.
    pub monitors: Vec<ConservedQuantity>,
}

impl IntegrateOptions {
    pub fn rk4(dt: f64, t_max: f64) -> Self {
        Self {
            dt,
            t_max,
            method: Method::Rk4,
            boundary_margin: 1e-3,
            max_steps: 10_000_000,
            monitors: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum StopReason {
    TMax,
    Boundary,
    FieldError(String),
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Step that led to this state (0 for the initial state).
    pub step: f64,
    pub field_norm: f64,
    pub conserved: Vec<f64>,
    pub cube_distance: f64,
    /// Embedded error estimate, RK45 only.
    pub error_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn conserved_report(&self, quantity: &ConservedQuantity, n: usize) -> Result<ConservedReport> {
        drift_report(quantity, n, &self.states, self.final_time() - self.times[0])
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(x, k)| x + a * k).collect()
}

fn combo(x: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (c, k) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

fn rk4_step<F: VectorField + ?Sized>(f: &F, x: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>> {
    let k2 = f.eval(&axpy(x, 0.5 * h, k1))?;
    let k3 = f.eval(&axpy(x, 0.5 * h, &k2))?;
    let k4 = f.eval(&axpy(x, h, &k3))?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, &xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order state and the scaled
/// error norm.
fn dopri_step<F: VectorField + ?Sized>(
    f: &F,
    x: &[f64],
    k1: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
    for stage in 1..7 {
        let terms: Vec<(f64, &[f64])> = (0..stage).map(|j| (A[stage][j], ks[j].as_slice())).collect();
        let xs = combo(x, h, &terms);
        ks.push(f.eval(&xs)?);
    }
    let y5 = combo(x, h, &(0..7).map(|j| (B5[j], ks[j].as_slice())).collect::<Vec<_>>());
    let y4 = combo(x, h, &(0..7).map(|j| (B4[j], ks[j].as_slice())).collect::<Vec<_>>());
    let err = y5
        .iter()
        .zip(&y4)
        .zip(x)
        .map(|((a, b), x0)| {
            let sc = atol + rtol * a.abs().max(x0.abs());
            ((a - b) / sc).powi(2)
        })
        .sum::<f64>()
        / x.len() as f64;
    Ok((y5, err.sqrt()))
}

/// Follow `field` from `x0` until `t_max`, the boundary margin, or a failure.
pub fn integrate<F: VectorField + ?Sized>(field: &F, x0: &[f64], opts: &IntegrateOptions) -> Result<Trajectory> {
    if x0.len() != field.dim() {
        return Err(Error::Dimension {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    if !(opts.dt > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::Domain("need dt > 0 and t_max >= 0".into()));
    }
    let margin0 = cube_distance(x0);
    if margin0 < opts.boundary_margin {
        return Err(Error::Margin {
            margin: margin0,
            required: opts.boundary_margin,
        });
    }

    let monitor = |x: &[f64]| -> Vec<f64> {
        opts.monitors
            .iter()
            .map(|q| q.evaluate(x).unwrap_or(f64::NAN))
            .collect()
    };

    let mut k = field.eval(x0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        diagnostics: vec![StepDiagnostics {
            step: 0.0,
            field_norm: norm_inf(&k),
            conserved: monitor(x0),
            cube_distance: margin0,
            error_estimate: None,
        }],
        stop: StopReason::TMax,
    };
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut h = opts.dt;
    let mut steps = 0usize;

    // Floating comparisons against t_max use a relative slack so that a
    // fixed step dividing t_max lands on it exactly once.
    let slack = 1e-12 * opts.t_max.max(1.0);
    while t < opts.t_max - slack {
        if steps >= opts.max_steps {
            traj.stop = StopReason::MaxSteps;
            return Ok(traj);
        }
        let h_try = h.min(opts.t_max - t);
        let (next, err) = match opts.method {
            Method::Rk4 => match rk4_step(field, &x, &k, h_try) {
                Ok(v) => (v, None),
                Err(e) => {
                    traj.stop = StopReason::FieldError(e.to_string());
                    return Ok(traj);
                }
            },
            Method::Rk45 { rtol, atol } => match dopri_step(field, &x, &k, h_try, rtol, atol) {
                Ok((_, err)) if err > 1.0 => {
                    h = h_try * (0.9 * err.powf(-0.2)).max(0.2);
                    if h < 1e-14 * opts.t_max.max(1.0) {
                        traj.stop = StopReason::FieldError("step size underflow".into());
                        return Ok(traj);
                    }
                    continue;
                }
                Ok((v, err)) => {
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).min(5.0)
                    };
                    h = h_try * grow;
                    (v, Some(err))
                }
                Err(e) => {
                    // Shrink and retry; a stage may have left the domain.
                    h = 0.5 * h_try;
                    if h < 1e-14 * opts.t_max.max(1.0) {
                        traj.stop = StopReason::FieldError(e.to_string());
                        return Ok(traj);
                    }
                    continue;
                }
            },
        };
        steps += 1;
        t = if opts.t_max - (t + h_try) <= slack {
            opts.t_max
        } else {
            t + h_try
        };
        x = next;
        let dist = cube_distance(&x);
        let boundary = dist < opts.boundary_margin;
        let field_norm = if boundary {
            f64::NAN
        } else {
            match field.eval(&x) {
                Ok(v) => {
                    k = v;
                    norm_inf(&k)
                }
                Err(e) => {
                    traj.stop = StopReason::FieldError(e.to_string());
                    push(&mut traj, t, &x, h_try, f64::NAN, monitor(&x), dist, err);
                    return Ok(traj);
                }
            }
        };
        push(&mut traj, t, &x, h_try, field_norm, monitor(&x), dist, err);
        if boundary {
            traj.stop = StopReason::Boundary;
            return Ok(traj);
        }
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn push(
    traj: &mut Trajectory,
    t: f64,
    x: &[f64],
    step: f64,
    field_norm: f64,
    conserved: Vec<f64>,
    cube_distance: f64,
    error_estimate: Option<f64>,
) {
    traj.times.push(t);
    traj.states.push(x.to_vec());
    traj.diagnostics.push(StepDiagnostics {
        step,
        field_norm,
        conserved,
        cube_distance,
        error_estimate,
    });
}
