use std::io::Write;
use std::path::Path;

use memn_core::dynamics::{
    adaptive_field, integrate, ConservedQuantity, FieldSpec, FieldVariant, GradientMethod, IntegrateOptions, Method,
    Trajectory,
};
use memn_core::markov::{decompose_payoff, PayoffMethod, TransitionMatrix};
use memn_core::model::{state_count, GameParams, HistoryIndex, PayoffVector, MAX_MEMORY};
use serde::Serialize;
use serde_json::json;

use crate::battery::{run_battery, run_symmetry, BatteryConfig};
use crate::cli::{
    BatteryArgs, FieldArgs, GameArgs, GradientArg, IntegrateArgs, MatrixArgs, MethodArg, PayoffArgs, PayoffMethodArg,
    SymmetryArgs, VariantArg,
};
use crate::error::CliError;
use crate::input::read_strategy;
use crate::report::VerificationReport;
use crate::tolerances::Ledger;
use crate::VERSION;

/// Largest memory length the full battery supports.
pub const DEEP_N_MAX: usize = 4;
pub const DEFAULT_N_MAX: usize = 2;

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut s = std::io::stdout().lock();
            s.write_all(bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v)?;
    b.push(b'\n');
    Ok(b)
}

fn check_memory(n: usize) -> Result<(), CliError> {
    if n == 0 || n > MAX_MEMORY {
        return Err(CliError::Usage(format!("--n must be in 1..={MAX_MEMORY}, got {n}")));
    }
    Ok(())
}

impl GameArgs {
    pub fn params(&self) -> Result<GameParams, CliError> {
        match &self.rstp {
            Some(v) => Ok(GameParams::new(v[0], v[1], v[2], v[3])),
            None => GameParams::donation(self.b, self.c).map_err(|e| CliError::Usage(e.to_string())),
        }
    }

    pub fn payoff_vector(&self, n: usize) -> Result<PayoffVector, CliError> {
        Ok(PayoffVector::build(&self.params()?, n, !self.unnormalized))
    }

    fn describe(&self) -> String {
        match &self.rstp {
            Some(v) => format!("rstp={},{},{},{}", v[0], v[1], v[2], v[3]),
            None => format!("b={} c={}", self.b, self.c),
        }
    }
}

impl From<VariantArg> for FieldVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Full => FieldVariant::Full,
            VariantArg::Sym => FieldVariant::Symmetric,
            VariantArg::Antisym => FieldVariant::Antisymmetric,
            VariantArg::Reparam => FieldVariant::AntisymmetricReparam,
        }
    }
}

fn variant_name(v: VariantArg) -> &'static str {
    match v {
        VariantArg::Full => "full",
        VariantArg::Sym => "sym",
        VariantArg::Antisym => "antisym",
        VariantArg::Reparam => "reparam",
    }
}

#[derive(Serialize)]
struct SparseMatrix {
    version: &'static str,
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

pub fn cmd_matrix(a: &MatrixArgs) -> Result<(), CliError> {
    check_memory(a.n)?;
    let p = read_strategy(&a.p, Some(a.n), a.reactive)?;
    let q = read_strategy(&a.q, Some(a.n), a.reactive)?;
    let m = TransitionMatrix::build(&p, &q)?;
    let doc = SparseMatrix {
        version: VERSION,
        n: a.n,
        rows: m.sparse_rows(),
    };
    write_output(
        a.out.as_deref(),
        &serde_json::to_vec(&doc).map(|mut b| {
            b.push(b'\n');
            b
        })?,
    )
}

pub fn cmd_payoff(a: &PayoffArgs) -> Result<(), CliError> {
    if let Some(n) = a.n {
        check_memory(n)?;
    }
    let p = read_strategy(&a.p, a.n, a.reactive)?;
    let q = read_strategy(&a.q, Some(p.n()), a.reactive)?;
    let f = a.game.payoff_vector(p.n())?;
    let method = match a.method {
        PayoffMethodArg::Determinant => PayoffMethod::Determinant,
        PayoffMethodArg::Stationary => PayoffMethod::Stationary,
    };
    let d = decompose_payoff(&p, &q, f.values(), method)?;
    let doc = json!({
        "version": VERSION,
        "n": p.n(),
        "method": format!("{:?}", a.method).to_lowercase(),
        "A": d.total,
        "A_s": d.symmetric,
        "A_a": d.antisymmetric,
    });
    write_output(a.out.as_deref(), &json_bytes(&doc)?)
}

pub fn cmd_field(a: &FieldArgs) -> Result<(), CliError> {
    if let Some(n) = a.n {
        check_memory(n)?;
    }
    let x = read_strategy(&a.at, a.n, false)?;
    let mut spec = FieldSpec::new(a.game.payoff_vector(x.n())?, a.variant.into());
    if a.gradient == GradientArg::Central {
        spec = spec
            .with_gradient(GradientMethod::CentralDifference { h: a.h })
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let v = adaptive_field(&x, &spec)?;
    let norm = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let doc = json!({
        "version": VERSION,
        "n": x.n(),
        "variant": variant_name(a.variant),
        "gradient": format!("{:?}", a.gradient).to_lowercase(),
        "at": x.probs(),
        "field": v,
        "norm_inf": norm,
    });
    write_output(a.out.as_deref(), &json_bytes(&doc)?)
}

/// Column names: `t`, one per history label, the conserved quantities, `field_norm`.
pub fn trajectory_header(n: usize, monitors: &[ConservedQuantity]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..state_count(n) {
        h.push(format!(
            "p_{}",
            HistoryIndex::new(n, i).expect("index in range").label()
        ));
    }
    h.extend(monitors.iter().map(|q| q.id(n)));
    h.push("field_norm".into());
    h
}

/// Render a trajectory as CSV behind a `#` comment line carrying `stamp`.
pub fn trajectory_csv(
    tr: &Trajectory,
    n: usize,
    monitors: &[ConservedQuantity],
    every: usize,
    stamp: &str,
) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# {stamp}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(trajectory_header(n, monitors))?;
        let last = tr.len() - 1;
        for k in 0..tr.len() {
            if k % every.max(1) != 0 && k != last {
                continue;
            }
            let d = &tr.diagnostics[k];
            let mut rec = vec![tr.times[k].to_string()];
            rec.extend(tr.states[k].iter().map(|v| v.to_string()));
            rec.extend(d.conserved.iter().map(|v| v.to_string()));
            rec.push(d.field_norm.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| CliError::io(Path::new("<csv>"), e))?;
    }
    Ok(out)
}

pub fn cmd_integrate(a: &IntegrateArgs) -> Result<(), CliError> {
    check_memory(a.n)?;
    if !(a.dt > 0.0) || !(a.tmax >= 0.0) {
        return Err(CliError::Usage("need --dt > 0 and --tmax >= 0".into()));
    }
    let x0 = read_strategy(&a.x0, Some(a.n), false)?;
    let spec = FieldSpec::new(a.game.payoff_vector(a.n)?, a.variant.into());
    let monitors = ConservedQuantity::for_memory(a.n);
    let method = match a.method {
        MethodArg::Rk4 => Method::Rk4,
        MethodArg::Rk45 => Method::Rk45 {
            rtol: a.rtol,
            atol: a.atol,
        },
    };
    let opts = IntegrateOptions {
        method,
        boundary_margin: a.margin,
        monitors: monitors.clone(),
        ..IntegrateOptions::rk4(a.dt, a.tmax)
    };
    let tr = integrate(&spec, x0.probs(), &opts)?;
    let stop = serde_json::to_value(&tr.stop)?;
    let stamp = format!(
        "{VERSION}; variant={} n={} {} dt={} tmax={} method={:?} stop={}",
        variant_name(a.variant),
        a.n,
        a.game.describe(),
        a.dt,
        a.tmax,
        a.method,
        stop["kind"].as_str().unwrap_or("unknown"),
    )
    .to_lowercase();
    let bytes = trajectory_csv(&tr, a.n, &monitors, a.every, &stamp)?;
    write_output(a.out.as_deref(), &bytes)
}

/// Resolve `--n-max` against `--deep`.
pub fn battery_config(a: &BatteryArgs) -> Result<BatteryConfig, CliError> {
    let n_max = a.n_max.unwrap_or(if a.deep { DEEP_N_MAX } else { DEFAULT_N_MAX });
    if n_max == 0 || n_max > DEEP_N_MAX {
        return Err(CliError::Usage(format!(
            "--n-max must be in 1..={DEEP_N_MAX}, got {n_max}"
        )));
    }
    if n_max > DEFAULT_N_MAX && !a.deep {
        return Err(CliError::Usage(format!("--n-max {n_max} needs --deep")));
    }
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    Ok(BatteryConfig {
        n_max,
        trials: a.trials,
        seed: a.seed,
        inject_fault: a.inject_fault,
    })
}

fn emit_report(rep: &VerificationReport, out: Option<&Path>, quiet: bool) -> Result<i32, CliError> {
    write_output(out, &json_bytes(rep)?)?;
    if !quiet {
        eprint!("{}", rep.summary());
    }
    Ok(if rep.pass { 0 } else { 1 })
}

pub fn cmd_verify(a: &BatteryArgs) -> Result<i32, CliError> {
    let cfg = battery_config(a)?;
    let ledger = Ledger::from_env()?;
    let rep = run_battery(&cfg, &ledger);
    emit_report(&rep, a.out.as_deref(), a.quiet)
}

pub fn cmd_verify_symmetry(a: &SymmetryArgs) -> Result<i32, CliError> {
    check_memory(a.n)?;
    if a.n > 5 {
        return Err(CliError::Usage(format!("symmetry checks support n <= 5, got {}", a.n)));
    }
    let ledger = Ledger::from_env()?;
    let rep = run_symmetry(a.n, a.trials, a.seed, &ledger);
    emit_report(&rep, a.out.as_deref(), a.quiet)
}
