//! End-to-end runs of the command line through [`main_with_args`].

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::Parser;
use memn_core::dynamics::{adaptive_field, FieldSpec, FieldVariant};
use memn_core::markov::{quad_start, reactive_payoff, TransitionMatrix};
use memn_core::model::{GameParams, PayoffVector, StrategyVector};
use serde_json::Value;
use tempfile::TempDir;

use crate::battery::{run_battery, BatteryConfig};
use crate::report::VerificationReport;
use crate::tolerances::{Ledger, DEFAULT_LEDGER, ENV_VAR};
use crate::{main_with_args, run, VERSION};

// Everything that reads MEMN_TOLERANCES runs under this lock.
static ENV_LOCK: Mutex<()> = Mutex::new(());

fn memn(args: &[&str]) -> i32 {
    let mut v = vec!["memn"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn read_report(p: &Path) -> VerificationReport {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn matrix_of_unit_strategies_is_deterministic_routing() {
    let dir = TempDir::new().unwrap();
    let allc = write(&dir, "allc.txt", "1 1 1 1\n");
    let alld = write(&dir, "alld.txt", "0 0 0 0\n");
    let out = dir.path().join("m.json");
    assert_eq!(
        memn(&["matrix", "--n", "1", "--p", s(&allc), "--q", s(&alld), "--out", s(&out)]),
        0
    );
    let m = read_json(&out);
    assert_eq!(m["version"], VERSION);
    assert_eq!(m["n"], 1);
    let rows = m["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        let entries = row.as_array().unwrap();
        assert_eq!(entries.len(), 1, "row {i}");
        // focal C, co-player D: history CD
        assert_eq!(entries[0][0], quad_start(i, 1) + 1);
        assert_eq!(entries[0][1], 1.0);
    }
}

#[test]
fn matrix_rows_match_dense_build() {
    let dir = TempDir::new().unwrap();
    let p: Vec<String> = (0..16).map(|i| format!("{}", (i as f64 + 0.5) / 16.0)).collect();
    let q: Vec<String> = (0..16).map(|i| format!("{}", (15.5 - i as f64) / 16.0)).collect();
    let pf = write(&dir, "p.txt", &p.join(" "));
    let qf = write(&dir, "q.json", &format!("[{}]", q.join(",")));
    let out = dir.path().join("m.json");
    assert_eq!(
        memn(&["matrix", "--n", "2", "--p", s(&pf), "--q", s(&qf), "--out", s(&out)]),
        0
    );
    let ps = StrategyVector::from_probs(p.iter().map(|v| v.parse().unwrap()).collect()).unwrap();
    let qs = StrategyVector::from_probs(q.iter().map(|v| v.parse().unwrap()).collect()).unwrap();
    let dense = TransitionMatrix::build(&ps, &qs).unwrap();
    let rows = read_json(&out)["rows"].clone();
    for i in 0..16 {
        for e in rows[i].as_array().unwrap() {
            let j = e[0].as_u64().unwrap() as usize;
            assert_eq!(e[1].as_f64().unwrap(), dense.get(i, j));
        }
        assert_eq!(rows[i].as_array().unwrap().len(), 4);
    }
}

#[test]
fn payoff_of_reactive_strategies_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "p.txt", "0.8 0.2");
    let q = write(&dir, "q.txt", "# reactive co-player\n0.6, 0.3\n");
    for method in ["determinant", "stationary"] {
        let out = dir.path().join(format!("{method}.json"));
        let code = memn(&[
            "payoff",
            "--p",
            s(&p),
            "--q",
            s(&q),
            "--reactive",
            "--b",
            "2",
            "--c",
            "1",
            "--method",
            method,
            "--out",
            s(&out),
        ]);
        assert_eq!(code, 0);
        let v = read_json(&out);
        let a = v["A"].as_f64().unwrap();
        let closed = reactive_payoff(0.8, 0.2, 0.6, 0.3, 2.0, 1.0).unwrap();
        assert!((a - closed).abs() <= 1e-10, "{a} vs {closed}");
        let parts = v["A_s"].as_f64().unwrap() + v["A_a"].as_f64().unwrap();
        assert!((parts - a).abs() <= 1e-12);
        assert_eq!(v["version"], VERSION);
    }
}

#[test]
fn field_command_prints_the_field() {
    let dir = TempDir::new().unwrap();
    let at = write(&dir, "x.json", r#"{"n": 1, "probs": [0.7, 0.4, 0.5, 0.2]}"#);
    let out = dir.path().join("f.json");
    assert_eq!(
        memn(&["field", "--at", s(&at), "--variant", "antisym", "--out", s(&out)]),
        0
    );
    let v = read_json(&out);
    let x = StrategyVector::new(1, vec![0.7, 0.4, 0.5, 0.2]).unwrap();
    let f = PayoffVector::build(&GameParams::donation(2.0, 1.0).unwrap(), 1, true);
    let want = adaptive_field(&x, &FieldSpec::new(f, FieldVariant::Antisymmetric)).unwrap();
    let got: Vec<f64> = v["field"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e.as_f64().unwrap())
        .collect();
    assert_eq!(got, want);
    assert_eq!(v["variant"], "antisym");
}

#[test]
fn integrate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let x0 = write(&dir, "x0.txt", "0.6 0.5 0.45 0.5\n");
    let args = |out: &Path| {
        vec![
            "integrate".to_string(),
            "--variant".into(),
            "antisym".into(),
            "--n".into(),
            "1".into(),
            "--b".into(),
            "2".into(),
            "--c".into(),
            "1".into(),
            "--x0".into(),
            s(&x0).into(),
            "--dt".into(),
            "1e-3".into(),
            "--tmax".into(),
            "5".into(),
            "--out".into(),
            s(out).into(),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let mut v = vec!["memn".to_string()];
        v.extend(args(out));
        assert_eq!(main_with_args(v), 0);
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    let stamp = lines.next().unwrap();
    assert!(
        stamp.starts_with(&format!("# {VERSION}; variant=antisym n=1 b=2 c=1")),
        "{stamp}"
    );
    assert_eq!(lines.next().unwrap(), "t,p_CC,p_CD,p_DC,p_DD,G1,G2,G3,field_norm");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.len() > 100);
    assert_eq!(rows[0][..5], [0.0, 0.6, 0.5, 0.45, 0.5]);
    let g1 = rows[0][5];
    assert!(rows.iter().all(|r| (r[5] - g1).abs() < 1e-9));
}

#[test]
fn malformed_input_names_line_and_field() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "0.1 0.2\n0.3 abc\n");
    let good = write(&dir, "good.txt", "0.1 0.2 0.3 0.4");
    let argv = ["memn", "payoff", "--p", s(&bad), "--q", s(&good)];
    let err = run(crate::cli::Cli::try_parse_from(argv).unwrap()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(
        err.to_string()
            .ends_with("bad.txt: line 2, field 2: `abc` is not a number"),
        "{err}"
    );
    assert_eq!(main_with_args(argv), 2);

    let range = write(&dir, "range.txt", "0.1 0.2\n0.3 1.2\n");
    let err = run(crate::cli::Cli::try_parse_from(["memn", "field", "--at", s(&range)]).unwrap()).unwrap_err();
    assert!(
        err.to_string().contains("line 2, field 2: 1.2 is not a probability"),
        "{err}"
    );
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(memn(&["verify", "--bogus"]), 2);
    assert_eq!(memn(&["verify", "--n-max", "3"]), 2);
    assert_eq!(memn(&["verify", "--deep", "--n-max", "5"]), 2);
    assert_eq!(memn(&["matrix", "--n", "0", "--p", "x", "--q", "y"]), 2);
    assert_eq!(memn(&["payoff", "--p", "/nonexistent/p", "--q", "/nonexistent/q"]), 2);
    assert_eq!(memn(&["verify", "symmetry"]), 2);
    assert_eq!(memn(&["--version"]), 0);
}

#[test]
fn verify_writes_report_and_exits_one_on_failure() {
    let _g = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(memn(&["verify", "--quiet", "--out", s(&out)]), 1);
    let rep = read_report(&out);
    assert_eq!((rep.seed, rep.n_max, rep.trials), (7, 2, 50));
    assert_eq!(rep.tolerance_ledger_sha256, Ledger::builtin().sha256);
    let ids: BTreeSet<&str> = rep.checks.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids.len(), rep.checks.len(), "check ids are unique");
    let failed: Vec<&str> = rep.failed().map(|c| c.id.as_str()).collect();
    // the antisymmetric field keeps a nonzero limit at tit-for-tat
    assert_eq!(failed, ["tft.stationarity.n1", "tft.stationarity.n2"]);
    assert!(!rep.pass);
}

#[test]
fn injected_fault_fails_structure_checks() {
    let _g = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(memn(&["verify", "--quiet", "--inject-fault", "--out", s(&out)]), 1);
    let rep = read_report(&out);
    for id in ["structure.recursion", "structure.row_sums", "structure.factorization"] {
        assert!(!rep.check(id).unwrap().pass, "{id}");
    }
    assert!(rep.check("payoff.methods").unwrap().pass);
}

#[test]
fn verify_symmetry_passes() {
    let _g = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = TempDir::new().unwrap();
    for n in ["1", "2", "3"] {
        let out = dir.path().join(format!("sym{n}.json"));
        let code = memn(&[
            "verify",
            "symmetry",
            "--n",
            n,
            "--trials",
            "10",
            "--seed",
            "3",
            "--quiet",
            "--out",
            s(&out),
        ]);
        assert_eq!(code, 0, "n = {n}");
        let rep = read_report(&out);
        assert!(rep.check("symmetry.conjugation_j8").unwrap().pass);
        assert!(rep.checks.iter().any(|c| c.id.starts_with("symmetry.admissibility_n")));
    }
}

#[test]
fn verdicts_do_not_depend_on_seed() {
    let ledger = Ledger::builtin();
    let a = run_battery(&BatteryConfig::default(), &ledger);
    let b = run_battery(
        &BatteryConfig {
            seed: 8,
            ..BatteryConfig::default()
        },
        &ledger,
    );
    assert_eq!(a.verdicts(), b.verdicts());
    assert_ne!(
        a.check("payoff.methods").unwrap().max_residual,
        b.check("payoff.methods").unwrap().max_residual
    );
}

/// Key structure, check ids, anchors, tolerances and verdicts of the default run.
fn schema_of(rep: &VerificationReport) -> Value {
    let v = serde_json::to_value(rep).unwrap();
    let keys = |o: &Value| o.as_object().unwrap().keys().cloned().collect::<Vec<_>>();
    let checks: Vec<Value> = rep
        .checks
        .iter()
        .map(|c| serde_json::json!({ "id": c.id, "anchor": c.anchor, "tolerance": c.tolerance, "pass": c.pass }))
        .collect();
    serde_json::json!({
        "report_keys": keys(&v),
        "check_keys": keys(&serde_json::to_value(&rep.checks[1]).unwrap()),
        "checks": checks,
    })
}

#[test]
fn report_schema_matches_golden_file() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/verify_schema.json");
    let rep = run_battery(&BatteryConfig::default(), &Ledger::builtin());
    let got = schema_of(&rep);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Value = serde_json::from_str(&std::fs::read_to_string(&golden).unwrap()).unwrap();
    assert_eq!(got, want, "rerun with UPDATE_GOLDEN=1 after an intended schema change");
}

#[test]
fn tolerance_ledger_override() {
    let _g = ENV_LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let dir = TempDir::new().unwrap();
    let ledger = write(
        &dir,
        "tol.toml",
        &DEFAULT_LEDGER.replace("row_sum = 1e-12", "row_sum = 1e-13"),
    );
    let out = dir.path().join("report.json");
    std::env::set_var(ENV_VAR, &ledger);
    let code = memn(&[
        "verify",
        "symmetry",
        "--n",
        "1",
        "--trials",
        "5",
        "--quiet",
        "--out",
        s(&out),
    ]);
    let full = memn(&["verify", "--quiet", "--out", s(&dir.path().join("full.json"))]);
    let broken = write(&dir, "broken.toml", "[structure]\nrow_sum = \"tight\"\n");
    std::env::set_var(ENV_VAR, &broken);
    let broken_code = memn(&["verify", "--quiet", "--out", s(&dir.path().join("x.json"))]);
    std::env::remove_var(ENV_VAR);

    assert_eq!(code, 0);
    let rep = read_report(&out);
    assert_eq!(rep.tolerance_ledger, s(&ledger));
    assert_ne!(rep.tolerance_ledger_sha256, Ledger::builtin().sha256);
    assert_eq!(full, 1);
    let full = read_report(&dir.path().join("full.json"));
    assert_eq!(full.check("structure.row_sums").unwrap().tolerance, 1e-13);
    assert_eq!(broken_code, 2);
}
