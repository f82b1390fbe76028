//! Acceptance suite. Runs every criterion at its pinned tolerance and
//! prints one line per criterion; exits non-zero when any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use freeboundary::cli::pipeline::{twoplane_chain, OBSTACLE_MARGIN, OBSTACLE_WINDOW};
use freeboundary::counterexample::{assemble_counterexample, verify_branching_prescription, IntervalUnion};
use freeboundary::grid::GridSpec;
use freeboundary::membrane::thin_obstacle_reduction;
use freeboundary::obstacle::*;
use freeboundary::report::ResidualReport;
use freeboundary::weierstrass::{integrate_surface, verify_boundary_transform, verify_capillary};

const H: f64 = 1.0 / 128.0;
/// Residuals this small at the finer grid count as converged.
const ZERO: f64 = 1e-11;

type Outcome = Result<String, String>;

fn box_grid(h: f64) -> GridSpec {
    GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, h).unwrap()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Factor `coarse/fine ≥ min`, with the zero rule.
fn decreases(coarse: f64, fine: f64, min: f64) -> bool {
    fine <= ZERO || coarse / fine >= min
}

fn closed_form_names(rep: &ResidualReport, path: &str) -> Vec<String> {
    rep.checks.iter().filter(|c| c.name.starts_with("closed_form.") && c.name.ends_with(path)).map(|c| c.name.clone()).collect()
}

fn criterion_1() -> Outcome {
    let mut worst = (0.0f64, 0.0f64);
    let mut min_order = f64::INFINITY;
    for lam in [1.0f64, 2.0, 5.0] {
        let a = twoplane_chain(lam * lam, 1.0, box_grid(H)).map_err(|e| format!("λ = {lam}: {e}"))?.report;
        let b = twoplane_chain(lam * lam, 1.0, box_grid(H / 2.0)).map_err(|e| format!("λ = {lam}: {e}"))?.report;
        if let Some(c) = a.failures().first() {
            return Err(format!("λ = {lam}: {} = {:.3e} > {:.1e}", c.name, c.sup, c.tolerance));
        }
        let analytic = closed_form_names(&a, ".analytic");
        let grid = closed_form_names(&a, ".grid");
        if analytic.len() < 7 || grid.len() < 7 {
            return Err(format!("λ = {lam}: closed-form checks missing"));
        }
        for n in &analytic {
            let e = a.sup(n);
            worst.0 = worst.0.max(e);
            if !(e <= 1e-8) {
                return Err(format!("λ = {lam}: {n} = {e:.3e} > 1e-8"));
            }
        }
        for n in &grid {
            let (ec, ef) = (a.sup(n), b.sup(n));
            worst.1 = worst.1.max(ec);
            if !(ec <= 1e-3) {
                return Err(format!("λ = {lam}: {n} = {ec:.3e} > 1e-3"));
            }
            if ef > ZERO {
                let p = order(ec, ef);
                min_order = min_order.min(p);
                if p < 1.9 {
                    return Err(format!("λ = {lam}: {n} order {p:.2} < 1.9"));
                }
            }
        }
    }
    let ord = if min_order.is_finite() { format!("{min_order:.2}") } else { format!("n/a (all ≤ {ZERO:.0e} at h/2)") };
    Ok(format!("analytic sup {:.2e}, grid sup {:.2e}, order {ord}", worst.0, worst.1))
}

fn capillary_residuals(h: f64) -> Result<ResidualReport, String> {
    let k = IntervalUnion::new(&[(-0.5, 0.5)]).unwrap();
    let b = assemble_counterexample(&k, h).map_err(|e| e.to_string())?;
    let sp = integrate_surface(&b.plus).map_err(|e| e.to_string())?;
    let sm = integrate_surface(&b.minus).map_err(|e| e.to_string())?;
    let mut rep = ResidualReport::new();
    rep.extend("", verify_capillary(&sp, &sm, &b.targets, 1.0));
    rep.extend("", verify_boundary_transform(&sp, &sm, &b.targets, 1.0));
    Ok(rep)
}

fn criterion_2() -> Outcome {
    let a = capillary_residuals(H)?;
    let b = capillary_residuals(H / 2.0)?;
    let names = [
        "mean_curvature_plus",
        "mean_curvature_minus",
        "contact_angle_one_phase",
        "contact_angle_inequality",
        "transmission",
        "coincidence",
        "one_phase_speed",
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for n in names {
        let (ec, ef) = (a.sup(n), b.sup(n));
        if !(ec.is_finite() && ef.is_finite()) {
            return Err(format!("{n} missing"));
        }
        let pass = decreases(ec, ef, 3.5);
        ok &= pass;
        let f = if ef <= ZERO { "zero".to_string() } else { format!("x{:.2}", ec / ef) };
        parts.push(format!("{n} {f}"));
    }
    let line = parts.join(", ");
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

fn criterion_3() -> Outcome {
    let cases: [(&str, &[(f64, f64)]); 3] =
        [("[-0.5,0.5]", &[(-0.5, 0.5)]), ("{0}", &[(0.0, 0.0)]), ("two components", &[(-0.6, -0.2), (0.2, 0.6)])];
    let mut parts = Vec::new();
    for (label, raw) in cases {
        let k = IntervalUnion::new(raw).unwrap();
        let mut counts = Vec::new();
        for h in [H, H / 2.0] {
            let b = assemble_counterexample(&k, h).map_err(|e| format!("{label}: {e}"))?;
            let v = verify_branching_prescription(&b).map_err(|e| format!("{label}: {e}"))?;
            let expected = k.boundary().len();
            if !v.pass || v.measured.len() != expected || v.expected.len() != expected {
                return Err(format!("{label} at h = {h}: measured {:?}, expected {:?}, hausdorff {:.2e}", v.measured, v.expected, v.hausdorff));
            }
            counts.push((v.measured.len(), v.hausdorff));
        }
        if counts[0].0 != counts[1].0 {
            return Err(format!("{label}: count {} → {}", counts[0].0, counts[1].0));
        }
        parts.push(format!("{label}: {} points, hausdorff {:.1e}/{:.1e}", counts[0].0, counts[0].1, counts[1].1));
    }
    Ok(parts.join("; "))
}

fn criterion_4() -> Outcome {
    let mut parts = Vec::new();
    for lam in [1.0f64, 2.0, 5.0] {
        let mut comps = Vec::new();
        let mut eig = (f64::INFINITY, f64::NEG_INFINITY);
        for h in [H, H / 2.0] {
            let run = twoplane_chain(lam * lam, 1.0, box_grid(h)).map_err(|e| format!("λ = {lam}: {e}"))?;
            let (rep, thin) = thin_obstacle_reduction(&run.membrane, 1e-6, 1e-8).map_err(|e| format!("λ = {lam}: {e}"))?;
            for n in ["b_eigen_bounds", "complementarity", "trace_nonnegative"] {
                let c = rep.get(n).ok_or(format!("{n} missing"))?;
                if !c.pass {
                    return Err(format!("λ = {lam}, h = {h}: {n} = {:.3e} > {:.1e}", c.sup, c.tolerance));
                }
            }
            let (lo, hi) = thin.eigen_range;
            if lo < thin.eigen_bounds.0 - 1e-12 || hi > thin.eigen_bounds.1 + 1e-12 {
                return Err(format!("λ = {lam}: eigenvalues [{lo}, {hi}] outside {:?}", thin.eigen_bounds));
            }
            eig = (eig.0.min(lo), eig.1.max(hi));
            comps.push(thin.components.len());
        }
        if comps[0] != comps[1] {
            return Err(format!("λ = {lam}: non-contact components {} → {}", comps[0], comps[1]));
        }
        parts.push(format!("λ = {lam}: eig [{:.3}, {:.3}], {} gap components", eig.0, eig.1, comps[0]));
    }
    Ok(parts.join("; "))
}

fn solve(data: ObstacleData, h: f64) -> Result<ObstacleSolution, String> {
    solve_obstacle(&|p| data.value(p), box_grid(h), &ObstacleOptions::default()).map_err(|e| e.to_string())
}

fn branch_set(sol: &ObstacleSolution) -> Vec<f64> {
    let h = sol.grid().h;
    let graphs = derivative_graphs(sol, h);
    let samples = stratify_boundary(sol, &DENSITY_RADII);
    branching_points_obstacle(&graphs, &samples, h).points
}

fn criterion_5() -> Outcome {
    let mut identity: f64 = 0.0;
    let mut check_identity = |sol: &ObstacleSolution| identity = identity.max(conjugate_report(sol, OBSTACLE_MARGIN, 1.0).sup("identity"));
    let mut fails = Vec::new();

    // (b), (c) radial
    let radial = ObstacleData::Radial { r: 0.5 };
    let rc = solve(radial, H)?;
    let rf = solve(radial, H / 2.0)?;
    check_identity(&rc);
    check_identity(&rf);
    let cr = |s: &ObstacleSolution| conjugate_report(s, OBSTACLE_MARGIN, 1.0).sup("cr_t");
    let (crc, crf) = (cr(&rc), cr(&rf));
    if !decreases(crc, crf, 3.5) {
        fails.push(format!("(b) CR {crc:.2e} → {crf:.2e}"));
    }
    let bc = |s: &ObstacleSolution| {
        let st = stratify_boundary(s, &DENSITY_RADII);
        boundary_condition_check(s, &st, [0.0, 1.0], 1.0).sup("boundary_condition")
    };
    let (bcc, bcf) = (bc(&rc), bc(&rf));
    let bc_order = order(bcc, bcf);
    if !(bcf <= ZERO || bc_order >= 0.9) {
        fails.push(format!("(c) BC {bcc:.2e} → {bcf:.2e}"));
    }

    // (d) closed forms with empty branching set
    for data in [ObstacleData::HalfSpace, ObstacleData::Strip { a: 0.25 }] {
        let s = solve(data, H)?;
        check_identity(&s);
        let b = branch_set(&s);
        if !b.is_empty() {
            fails.push(format!("(d) {data:?}: B = {b:?}"));
        }
    }

    // (e) pinched strip: β tuned at h, reused at h/2
    let (beta, pc) = critical_pinch(0.25, box_grid(H), 0.2, 0.4, 2e-4, &ObstacleOptions::default()).map_err(|e| e.to_string())?;
    let pf = solve(ObstacleData::Pinched { a: 0.25, beta }, H / 2.0)?;
    check_identity(&pc);
    check_identity(&pf);
    let (bc_, bf_) = (branch_set(&pc), branch_set(&pf));
    if bc_.is_empty() || bc_.len() != bf_.len() {
        fails.push(format!("(e) branch count {} → {}", bc_.len(), bf_.len()));
    }
    let (a, b) = OBSTACLE_WINDOW;
    let harm = |s: &ObstacleSolution| -> Result<f64, String> {
        let (_, rep) = obstacle_membrane(s, a, b, OBSTACLE_MARGIN, 1.0).map_err(|e| e.to_string())?;
        Ok(rep.sup("harmonicity_plus").max(rep.sup("harmonicity_minus")))
    };
    let (hc, hf) = (harm(&pc)?, harm(&pf)?);
    if !decreases(hc, hf, 3.5) {
        fails.push(format!("(e) harmonicity {hc:.2e} → {hf:.2e}"));
    }

    if !(identity <= 1e-12) {
        fails.push(format!("(a) identity {identity:.2e}"));
    }
    let line = format!(
        "(a) identity {identity:.1e}; (b) CR {crc:.2e} → {crf:.2e} (x{:.2}); (c) BC order {bc_order:.2}; \
         (d) B = ∅; (e) β = {beta:.5}, branch points {} → {}, harmonicity x{:.2}",
        crc / crf,
        bc_.len(),
        bf_.len(),
        hc / hf
    );
    if fails.is_empty() {
        Ok(line)
    } else {
        Err(format!("{}; {line}", fails.join("; ")))
    }
}

fn run_binary(out: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_freeboundary"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("FREEBOUNDARY_OUT")
        .status()
        .map_err(|e| e.to_string())?;
    if status.code() != Some(0) {
        return Err(format!("{args:?} exited with {status}"));
    }
    std::fs::read(out.join("report.json")).map_err(|e| e.to_string())
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut sizes = Vec::new();
    for (n, args) in [
        ["--pipeline", "twoplane", "--lambda-plus", "4", "--lambda-minus", "1"].as_slice(),
        ["--pipeline", "counterexample", "--K", "[[-0.5,0.5]]"].as_slice(),
    ]
    .into_iter()
    .enumerate()
    {
        let a = run_binary(&dir.path().join(format!("a{n}")), args)?;
        let b = run_binary(&dir.path().join(format!("b{n}")), args)?;
        if a != b {
            return Err(format!("{} reports differ", args[1]));
        }
        sizes.push(format!("{} {} bytes", args[1], a.len()));
    }
    Ok(format!("byte-identical reports: {}", sizes.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("two-plane closed forms", criterion_1),
        ("capillary residual decrease", criterion_2),
        ("branching prescription", criterion_3),
        ("thin-obstacle structure", criterion_4),
        ("obstacle suite", criterion_5),
        ("determinism", criterion_6),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", n + 1);
        if !filter.is_empty() && !filter.iter().any(|p| id.contains(p.as_str()) || name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(s) => println!("{id} [{name}] PASS ({secs:.1}s): {s}"),
            Err(s) => {
                failed += 1;
                println!("{id} [{name}] FAIL ({secs:.1}s): {s}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
