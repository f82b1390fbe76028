use std::fs;
use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use serde_json::json;

use freeboundary::cli::config::RunConfig;
use freeboundary::cli::export::{field_csv, read_field_csv, Artifact};
use freeboundary::cli::pipeline::PipelineOutput;
use freeboundary::cli::{read_report, run_with, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_PASS};
use freeboundary::grid::{GridSpec, ScalarField};
use freeboundary::report::{Check, ResidualReport};
use freeboundary::Error;

#[derive(Debug, Clone)]
enum Outcome {
    Checks(Vec<(f64, f64)>),
    InputError,
    NumericalError,
}

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![
        4 => prop::collection::vec((0.0f64..2.0, 0.5f64..1.5), 0..6).prop_map(Outcome::Checks),
        1 => Just(Outcome::InputError),
        1 => Just(Outcome::NumericalError),
    ]
}

fn runner(o: &Outcome) -> impl Fn(&RunConfig) -> freeboundary::Result<PipelineOutput> + '_ {
    move |_| match o {
        Outcome::Checks(cs) => {
            let mut report = ResidualReport::new();
            for (n, &(sup, tol)) in cs.iter().enumerate() {
                report.push(Check::scalar(format!("c{n}"), sup, tol));
            }
            let field = ScalarField::from_fn(GridSpec::new([0.0, 0.0], 0.5, 3, 3).unwrap(), |x, y| x - y);
            Ok(PipelineOutput {
                report,
                summary: json!({ "n": cs.len() }),
                artifacts: vec![("f".into(), Artifact::Field { field })],
            })
        }
        Outcome::InputError => Err(Error::input("bad data")),
        Outcome::NumericalError => Err(Error::NoConvergence { iterations: 3, residual: 1.0 }),
    }
}

fn config_in(dir: &Path) -> RunConfig {
    RunConfig { out: dir.to_path_buf(), ..RunConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exit_code_contract(o in outcome()) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config_in(dir.path());
        let code = run_with(&cfg, &runner(&o));
        let rec = read_report(dir.path()).unwrap();
        match &o {
            Outcome::Checks(cs) => {
                let all = cs.iter().all(|&(s, t)| s <= t);
                prop_assert_eq!(code, if all { EXIT_PASS } else { EXIT_CHECK_FAILED });
                prop_assert!(!rec.failed);
                prop_assert_eq!(rec.exit_code(), code);
                prop_assert!(dir.path().join("f.csv").exists());
            }
            Outcome::InputError => {
                prop_assert_eq!(code, EXIT_INPUT);
                prop_assert!(rec.failed);
            }
            Outcome::NumericalError => {
                prop_assert_eq!(code, EXIT_CHECK_FAILED);
                prop_assert!(rec.failed);
            }
        }
    }

    #[test]
    fn identical_runs_write_identical_reports(o in outcome()) {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_with(&config_in(a.path()), &runner(&o));
        run_with(&config_in(b.path()), &runner(&o));
        for f in ["report.json", "config.txt"] {
            prop_assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
    }

    #[test]
    fn field_csv_round_trips(
        nx in 3usize..7, ny in 3usize..7, h in 0.01f64..1.0,
        vals in prop::collection::vec(prop::option::weighted(0.8, -1e6f64..1e6), 36),
    ) {
        let g = GridSpec::new([-0.5, 0.25], h, nx, ny).unwrap();
        let mut f = ScalarField::zeros(g);
        for k in 0..g.len() {
            match vals[k] {
                Some(v) => f.values[k] = v,
                None => f.mask[k] = false,
            }
        }
        prop_assert_eq!(read_field_csv(&field_csv(&f)).unwrap(), f);
    }

    #[test]
    fn check_json_round_trips(
        sup in prop_oneof![Just(f64::NAN), Just(f64::INFINITY), Just(f64::NEG_INFINITY), any::<f64>()],
        tol in 1e-12f64..1.0,
    ) {
        let c = Check::scalar("x", sup, tol);
        let back: Check = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(back.sup.to_bits() == c.sup.to_bits() || (back.sup.is_nan() && c.sup.is_nan()), true);
        prop_assert_eq!(back.tolerance, c.tolerance);
        prop_assert_eq!(back.pass, c.pass);
    }

    #[test]
    fn canonical_config_round_trips(
        n in 8u32..512, lp in 1e-2f64..1e2, lm in 1e-2f64..1e2, t in 1e-12f64..1.0,
        pipeline in prop::sample::select(vec!["twoplane", "counterexample", "obstacle"]),
    ) {
        let text = format!("pipeline = {pipeline}\nh = 1/{n}\nlambda_plus = {lp}\nlambda_minus = {lm}\ntol.a.b = {t}\n");
        let c = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&c.canonical()).unwrap();
        prop_assert_eq!(&again.canonical(), &c.canonical());
        prop_assert_eq!(again.input_hash(), c.input_hash());
        prop_assert_eq!(again.h.to_bits(), c.h.to_bits());
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freeboundary"))
}

#[test]
fn twoplane_run_then_export_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let st = bin().args(["run", "--pipeline", "twoplane", "--h", "1/32", "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_PASS));
    for f in ["report.json", "config.txt", "u.csv", "free_boundary.svg", "branching.json", "residuals.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let u = out.join("artifacts/u.json");
    for (fmt, head) in [("csv", "nx="), ("json", "{"), ("svg", "")] {
        let o = bin().args(["export", "--format", fmt]).arg(&u).output().unwrap();
        if fmt == "svg" {
            assert_eq!(o.status.code(), Some(EXIT_INPUT));
        } else {
            assert_eq!(o.status.code(), Some(EXIT_PASS));
            assert!(String::from_utf8_lossy(&o.stdout).starts_with(head));
        }
    }
    let fig = out.join("artifacts/free_boundary.json");
    let svg = dir.path().join("fb.svg");
    let st = bin().args(["export", "--format", "svg", "--out"]).arg(&svg).arg(&fig).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_PASS));
    assert!(fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let o = bin().args(["export", "--format", "png"]).arg(&u).output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_INPUT));

    let o = bin().arg("report").arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    assert!(String::from_utf8_lossy(&o.stdout).contains("pass"));
}

#[test]
fn malformed_k_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    for k in ["[[0.5,-0.5]]", "[[-0.5,0.2],[0.1,0.5]]", "nonsense"] {
        let out = dir.path().join("cx");
        let st = bin().args(["run", "--pipeline", "counterexample", "--h", "1/16", "--K", k, "--out"]).arg(&out).status().unwrap();
        assert_eq!(st.code(), Some(EXIT_INPUT), "{k}");
        assert!(!out.join("report.json").exists());
    }
}

#[test]
fn unknown_flags_and_keys_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin().args(["run", "--bogus"]).status().unwrap().code(), Some(EXIT_INPUT));
    let st = bin().args(["run", "--set", "colour=red", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_INPUT));
}

#[test]
fn verify_replays_a_stored_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let st = bin().args(["run", "--pipeline", "twoplane", "--h", "1/16", "--out"]).arg(&first).status().unwrap();
    assert_eq!(st.code(), Some(EXIT_PASS));
    let second = dir.path().join("second");
    let st = bin()
        .args(["run", "--pipeline", "verify", "--set"])
        .arg(format!("input={}", first.display()))
        .arg("--out")
        .arg(&second)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(EXIT_PASS));
    assert_eq!(read_report(&second).unwrap().report.sup("verify.mismatched_checks"), 0.0);
}
