//! Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.
//!
//! Runs without the libtest harness so the lines come out in order and
//! unbuffered. Exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use memn_core::dynamics::{ConservedQuantity, FieldVariant};
use memn_tools::battery::{
    admissibility_brute_force, admissibility_sampled, conjugation_j2, conjugation_j8, conserved_drift, field_closure,
    field_gradient, field_memory1_closed, g2_polyfit, j2_spectrum, mirror_check, payoff_decomposition, payoff_methods,
    payoff_reactive, payoff_reflection, payoff_shift, perturbation_check, run_battery, sample_matrices,
    structure_recursion, structure_row_sums, tft_check, BatteryConfig, Outcome,
};
use memn_tools::tolerances::Ledger;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

const ROW_SUM_TOL: f64 = 1e-12;
const PAYOFF_METHOD_TOL: f64 = 1e-8;
const REACTIVE_TOL: f64 = 1e-10;
const SHIFT_TOL: f64 = 1e-10;
const DECOMPOSITION_TOL: f64 = 1e-10;
const REFLECTION_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-5;
const GRADIENT_REL_TOL: f64 = 1e-6;
const CLOSED_FORM_REL_TOL: f64 = 1e-6;
const CLOSURE_TOL: f64 = 1e-8;
const DRIFT_TOL: f64 = 1e-7;
const TFT_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];
const TFT_MIN_ORDER: f64 = 1.0;
const MIRROR_TOL_N1: f64 = 1e-6;
const MIRROR_TOL_N2: f64 = 1e-5;
const RATIO_RANGE: (f64, f64) = (8.0, 12.0);

struct Gate {
    failed: Vec<u32>,
}

impl Gate {
    fn report(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        println!("{} [{id:>2}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn rng(k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED + k)
}

fn ok(o: &memn_core::Result<Outcome>) -> bool {
    o.as_ref().map(|o| o.pass).unwrap_or(false)
}

fn res(o: &memn_core::Result<Outcome>) -> String {
    match o {
        Ok(o) => format!("{:.2e}", o.max_residual),
        Err(e) => format!("error: {e}"),
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };

    // 1. direct vs recursive matrices, n = 2, 3, 50 pairs
    let ((rec, rows), dt) = timed(|| {
        let s = sample_matrices(2..=3, 50, false, &mut rng(1)).expect("matrices");
        (structure_recursion(&s, 0.0), structure_row_sums(&s, ROW_SUM_TOL))
    });
    gate.report(
        1,
        "structure and recursion",
        rec.pass && rows.pass && dt < Duration::from_secs(10),
        format!(
            "max |direct - recursive| = {:e}, max row-sum error = {:.2e}, {:.2}s",
            rec.max_residual,
            rows.max_residual,
            dt.as_secs_f64()
        ),
    );

    // 2. exact conjugation identities, n = 1..3, 50 pairs
    let j2 = conjugation_j2(1..=3, 50, 0.0, &mut rng(2));
    let j8 = conjugation_j8(1..=3, 50, 0.0, &mut rng(3));
    gate.report(
        2,
        "conjugation identities",
        ok(&j2) && ok(&j8),
        format!("J2 residual {}, J8 residual {}", res(&j2), res(&j8)),
    );

    // 3. admissibility: all 24 at n = 1, eight J's and 1000 others at n = 2
    let ((brute, sampled), dt) = timed(|| {
        (
            admissibility_brute_force(3, &mut rng(4)),
            admissibility_sampled(2, 1000, 3, &mut rng(5)),
        )
    });
    gate.report(
        3,
        "admissibility classification",
        ok(&brute) && ok(&sampled) && dt < Duration::from_secs(60),
        format!(
            "n=1 misclassified {}, n=2 misclassified {}, {:.2}s",
            res(&brute),
            res(&sampled),
            dt.as_secs_f64()
        ),
    );

    // 4. payoff consistency
    let methods = payoff_methods(1..=3, 100, PAYOFF_METHOD_TOL, &mut rng(6));
    let reactive = payoff_reactive(100, REACTIVE_TOL, &mut rng(7));
    let shift = payoff_shift(1..=3, 100, SHIFT_TOL, &mut rng(8));
    gate.report(
        4,
        "payoff consistency",
        ok(&methods) && ok(&reactive) && ok(&shift),
        format!(
            "determinant vs stationary {}, reactive closed form {}, shift {}",
            res(&methods),
            res(&reactive),
            res(&shift)
        ),
    );

    // 5. decomposition and payoff-vector reflection
    let dec = payoff_decomposition(1..=3, 100, DECOMPOSITION_TOL, &mut rng(9));
    let refl = payoff_reflection(1..=5, REFLECTION_TOL);
    gate.report(
        5,
        "decomposition",
        ok(&dec) && ok(&refl),
        format!("closure/symmetry residual {}, reflection {}", res(&dec), res(&refl)),
    );

    // 6. gradients and fields
    let grad = field_gradient(1..=3, 30, FD_STEP, GRADIENT_REL_TOL, &mut rng(10));
    let closed = field_memory1_closed(100, FD_STEP, CLOSED_FORM_REL_TOL, &mut rng(11));
    let closure = field_closure(1..=3, 100, CLOSURE_TOL, &mut rng(12));
    gate.report(
        6,
        "gradient and field consistency",
        ok(&grad) && ok(&closed) && ok(&closure),
        format!(
            "analytic vs numeric {} rel, closed form {} rel, full - sym - antisym {}",
            res(&grad),
            res(&closed),
            res(&closure)
        ),
    );

    // 7. conserved quantities; a G2 failure is accepted with the fit diagnostic
    let drift = |q: ConservedQuantity, k| conserved_drift(1, &[q], 5, 1e-3, 5.0, DRIFT_TOL, &mut rng(k));
    let g1 = drift(ConservedQuantity::G1, 13);
    let g2 = drift(ConservedQuantity::G2, 14);
    let g3 = drift(ConservedQuantity::G3, 15);
    let pairs = conserved_drift(
        2,
        &ConservedQuantity::for_memory(2),
        5,
        1e-3,
        5.0,
        DRIFT_TOL,
        &mut rng(16),
    );
    let g2_note = if ok(&g2) {
        String::new()
    } else {
        match g2_polyfit(200, 3, &mut rng(17)) {
            Ok(v) => format!(" (polynomial fit: {v})"),
            Err(e) => format!(" (polynomial fit failed: {e})"),
        }
    };
    gate.report(
        7,
        "conserved quantities",
        ok(&g1) && ok(&g3) && ok(&pairs) && (ok(&g2) || !g2_note.contains("failed")),
        format!(
            "drift per unit time G1 {}, G2 {}{g2_note}, G3 {}, n=2 pair differences {}",
            res(&g1),
            res(&g2),
            res(&g3),
            res(&pairs)
        ),
    );

    // 8. antisymmetric field at tft(eps) shrinks with order >= 1, n = 1, 2
    let tft: Vec<_> = (1..=2)
        .map(|n| (n, tft_check(n, FieldVariant::Antisymmetric, &TFT_EPS, TFT_MIN_ORDER)))
        .collect();
    let detail = tft
        .iter()
        .map(|(n, o)| match o {
            Ok(o) => {
                let d = o.detail.as_ref().expect("tft detail");
                format!(
                    "n={n}: norms {} order {:.3}",
                    d["norms"],
                    d["order"].as_f64().unwrap_or(f64::NAN)
                )
            }
            Err(e) => format!("n={n}: error {e}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    gate.report(8, "TFT stationarity", tft.iter().all(|(_, o)| ok(o)), detail);
    for n in 1..=2 {
        let re = tft_check(n, FieldVariant::AntisymmetricReparam, &TFT_EPS, TFT_MIN_ORDER);
        if let Ok(o) = &re {
            let d = o.detail.as_ref().expect("tft detail");
            println!(
                "     [ 8] diagnostic, denominator-free field n={n}: order {:.3}",
                d["order"].as_f64().unwrap_or(f64::NAN)
            );
        }
    }

    // 9. Z2 mirror, 10 starts
    let m1 = mirror_check(1, 10, 1e-2, 1.0, MIRROR_TOL_N1, &mut rng(18));
    let m2 = mirror_check(2, 10, 1e-2, 1.0, MIRROR_TOL_N2, &mut rng(19));
    gate.report(
        9,
        "Z2 mirror",
        ok(&m1) && ok(&m2),
        format!("max deviation n=1 {}, n=2 {}", res(&m1), res(&m2)),
    );

    // 10. J2 spectrum n = 1..5
    let spec = j2_spectrum(1..=5);
    gate.report(
        10,
        "J2 spectrum",
        spec.pass,
        format!("{}", spec.detail.unwrap_or_default()),
    );

    // 11. perturbation experiment
    let pert = perturbation_check([0.6, 0.5, 0.4], 1.0, [1e-3, 1e-4], 1e-3, 1.0, RATIO_RANGE);
    let pdetail = match &pert {
        Ok(o) => format!("{}", o.detail.clone().unwrap_or_default()),
        Err(e) => format!("error: {e}"),
    };
    gate.report(11, "perturbation scaling", ok(&pert), pdetail);

    // 12. battery runtime
    let ledger = Ledger::builtin();
    let (default_rep, t_default) = timed(|| run_battery(&BatteryConfig::default(), &ledger));
    let deep_cfg = BatteryConfig {
        n_max: 4,
        ..BatteryConfig::default()
    };
    let (deep_rep, t_deep) = timed(|| run_battery(&deep_cfg, &ledger));
    gate.report(
        12,
        "battery runtime",
        t_default < Duration::from_secs(300) && t_deep < Duration::from_secs(3600),
        format!(
            "default {:.1}s ({} checks, {} failing), deep {:.1}s ({} checks, {} failing)",
            t_default.as_secs_f64(),
            default_rep.checks.len(),
            default_rep.failed().count(),
            t_deep.as_secs_f64(),
            deep_rep.checks.len(),
            deep_rep.failed().count()
        ),
    );

    println!("{} of 12 criteria pass", 12 - gate.failed.len());
    if !gate.failed.is_empty() {
        println!("failing: {:?}", gate.failed);
        std::process::exit(1);
    }
}
