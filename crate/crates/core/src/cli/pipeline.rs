//! The pipelines behind `run`: each returns a residual report, a JSON
//! summary and the artifacts to export.

use num_complex::Complex64;
use serde_json::{json, Value};

use super::export::{Artifact, Polyline};
use crate::bernoulli::{branching_set, BranchingSet, make_two_plane, residuals_two_phase, TwoPhaseSolution};
use crate::counterexample::{assemble_counterexample, verify_branching_prescription, IntervalUnion};
use crate::error::Result;
use crate::grid::{GridSpec, ScalarField};
use crate::membrane::{
    build_chart, build_membrane, membrane_residuals, membrane_window, thin_obstacle_reduction, Chart, MembraneKind,
    MembraneState, J_MIN,
};
use crate::obstacle::{
    boundary_condition_check, branching_points_obstacle, conjugate_report, critical_pinch, derivative_graphs,
    obstacle_membrane, solve_obstacle, strata_consistency, stratify_boundary, weierstrass_forms_obstacle,
    DerivativeGraphs, ObstacleData, ObstacleOptions, ObstacleSolution, DENSITY_RADII,
};
use crate::report::{Check, ResidualReport};
use crate::weierstrass::{
    build_data, capillary_targets, gauss_normal, integrands, integrate_surface, normal_field, surface_report,
    verify_boundary_transform, verify_capillary, vertical_normal, Phase, WeierstrassData, WeierstrassSurface,
    FLATNESS_THRESHOLD,
};

/// Everything a pipeline hands back to the driver.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: ResidualReport,
    pub summary: Value,
    pub artifacts: Vec<(String, Artifact)>,
}

/// Default tolerances of the two-plane chain.
pub const TWOPLANE_GRID_TOL: f64 = 1e-3;
pub const TWOPLANE_ANALYTIC_TOL: f64 = 1e-8;
pub const TWOPLANE_MODULE_TOL: f64 = 1e-8;

/// Default tolerance of the counterexample residuals at `h = 1/128`.
pub const COUNTEREXAMPLE_TOL: f64 = 1e-3;

/// Margin from `{u = 0}` for the obstacle residuals.
pub const OBSTACLE_MARGIN: f64 = 1.0 / 16.0;
pub const OBSTACLE_TOL: f64 = 5e-3;
/// Closedness involves third differences and is looser near where the
/// contact set meets the frame.
pub const OBSTACLE_FORMS_TOL: f64 = 2e-2;
pub const OBSTACLE_SOLVER_TOL: f64 = 1e-8;
pub const OBSTACLE_BC_TOL: f64 = 5e-2;
pub const OBSTACLE_MEMBRANE_TOL: f64 = 2e-2;
/// Membrane window half-widths around a branch point at the origin.
pub const OBSTACLE_WINDOW: (f64, f64) = (0.5, 0.15);

// five-point Gauss-Legendre rule on [−1, 1]
const GL_X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
const GL_PIECES: usize = 8;

/// `g` of a phase read off its grid data by bilinear interpolation.
struct GaussMap {
    f: f64,
    re: ScalarField,
    im: ScalarField,
}

impl GaussMap {
    fn new(data: &WeierstrassData) -> GaussMap {
        GaussMap { f: data.f, re: data.g.real_part(), im: data.g.imag_part() }
    }

    fn g(&self, p: [f64; 2]) -> Option<Complex64> {
        Some(Complex64::new(self.re.bilinear(p)?, self.im.bilinear(p)?))
    }

    /// `Re ∫ φ dz` along the segment `a → b`.
    fn segment(&self, a: [f64; 2], b: [f64; 2]) -> Option<[f64; 3]> {
        let dz = Complex64::new(b[0] - a[0], b[1] - a[1]) / GL_PIECES as f64;
        let mut acc = [Complex64::new(0.0, 0.0); 3];
        for piece in 0..GL_PIECES {
            for (x, w) in GL_X.iter().zip(GL_W) {
                let t = (piece as f64 + 0.5 + 0.5 * x) / GL_PIECES as f64;
                let phi = integrands(self.f, self.g([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])?);
                for c in 0..3 {
                    acc[c] += 0.5 * w * phi[c] * dz;
                }
            }
        }
        Some([acc[0].re, acc[1].re, acc[2].re])
    }

    /// `(ψ₁, ψ₃)` and its Jacobian matrix at `p`.
    fn chart(&self, base: [f64; 2], p: [f64; 2]) -> Option<([f64; 2], [[f64; 2]; 2])> {
        let psi = self.segment(base, p)?;
        let phi = integrands(self.f, self.g(p)?);
        Some(([psi[0], psi[2]], [[phi[0].re, -phi[0].im], [phi[2].re, -phi[2].im]]))
    }

    /// Newton inversion of the analytic chart.
    fn invert(&self, base: [f64; 2], target: [f64; 2]) -> Option<[f64; 2]> {
        let mut z = target;
        for _ in 0..40 {
            let (v, m) = self.chart(base, z)?;
            let r = [v[0] - target[0], v[1] - target[1]];
            if r[0].hypot(r[1]) < 1e-14 {
                return Some(z);
            }
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                return None;
            }
            z[0] -= (m[1][1] * r[0] - m[0][1] * r[1]) / det;
            z[1] -= (-m[1][0] * r[0] + m[0][0] * r[1]) / det;
        }
        None
    }
}

fn masked_errors(field: &ScalarField, on: &dyn Fn(usize) -> bool, exact: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let g = field.grid;
    (0..g.len())
        .filter(|&k| on(k) && field.mask[k] && !field.flagged[k])
        .map(|k| field.values[k] - exact(g.x(k % g.nx), g.y(k / g.nx)))
        .collect()
}

/// Closed forms of the two-plane surfaces for `λ = √(Λ⁺/Λ⁻)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPlaneClosedForms {
    pub psi1: f64,
    pub psi2: f64,
    pub normal_plus: f64,
    pub jacobian: f64,
}

impl TwoPlaneClosedForms {
    pub fn new(lambda: f64) -> Self {
        let l2 = lambda * lambda;
        TwoPlaneClosedForms {
            psi1: (1.0 + l2) / (2.0 * lambda),
            psi2: (l2 - 1.0) / (2.0 * lambda),
            normal_plus: (1.0 - l2) / (1.0 + l2),
            jacobian: (1.0 + l2) / (2.0 * lambda),
        }
    }
}

/// Intermediate objects of the two-plane chain.
#[derive(Debug, Clone)]
pub struct TwoPlaneRun {
    pub solution: TwoPhaseSolution,
    pub plus: WeierstrassData,
    pub minus: WeierstrassData,
    pub surface_plus: WeierstrassSurface,
    pub surface_minus: WeierstrassSurface,
    pub chart_plus: Chart,
    pub membrane: MembraneState,
    pub report: ResidualReport,
}

/// The bernoulli → weierstrass → membrane chain on the two-plane solution,
/// with its closed forms checked on the grid and along analytic paths.
pub fn twoplane_chain(lambda_plus: f64, lambda_minus: f64, grid: GridSpec) -> Result<TwoPlaneRun> {
    let h = grid.h;
    let sol = make_two_plane(lambda_plus, lambda_minus, grid)?;
    let lam = sol.lambda;
    let cf = TwoPlaneClosedForms::new(lam);
    let mut rep = ResidualReport::new();
    rep.extend("bernoulli.", residuals_two_phase(&sol, None, TWOPLANE_MODULE_TOL));

    let (plus, minus) = build_data(&sol, FLATNESS_THRESHOLD)?;
    let sp = integrate_surface(&plus)?;
    let sm = integrate_surface(&minus)?;
    rep.extend("surface_plus.", surface_report(&sp, TWOPLANE_MODULE_TOL));
    rep.extend("surface_minus.", surface_report(&sm, TWOPLANE_MODULE_TOL));
    let targets = capillary_targets(&sol, None);
    rep.extend("capillary.", verify_capillary(&sp, &sm, &targets, TWOPLANE_MODULE_TOL));
    rep.extend("boundary_transform.", verify_boundary_transform(&sp, &sm, &targets, TWOPLANE_MODULE_TOL));

    // grid path
    let gt = TWOPLANE_GRID_TOL;
    let dp = |k: usize| sp.domain[k];
    let dm = |k: usize| sm.domain[k];
    let push = |rep: &mut ResidualReport, name: &str, v: Vec<f64>, tol: f64| rep.push(Check::from_samples(name, v, tol));
    push(&mut rep, "closed_form.psi1_plus.grid", masked_errors(&sp.psi[0], &dp, &|x, _| cf.psi1 * x), gt);
    push(&mut rep, "closed_form.psi1_minus.grid", masked_errors(&sm.psi[0], &dm, &|x, _| cf.psi1 * x), gt);
    push(&mut rep, "closed_form.psi2_plus.grid", masked_errors(&sp.psi[1], &dp, &|_, y| cf.psi2 * y), gt);
    push(&mut rep, "closed_form.psi2_minus.grid", masked_errors(&sm.psi[1], &dm, &|_, y| -cf.psi2 * y), gt);
    let np = normal_field(&sp, &plus);
    let nm = normal_field(&sm, &minus);
    push(&mut rep, "closed_form.normal_plus.grid", masked_errors(&np[2], &dp, &|_, _| cf.normal_plus), gt);
    push(&mut rep, "closed_form.normal_minus.grid", masked_errors(&nm[2], &dm, &|_, _| -cf.normal_plus), gt);
    let cp = build_chart(&plus, &sp, J_MIN)?;
    let cm = build_chart(&minus, &sm, J_MIN)?;
    let region = |k: usize| cp.region[k];
    push(&mut rep, "closed_form.jacobian_plus.grid", masked_errors(&cp.jacobian, &region, &|_, _| cf.jacobian), gt);

    let (win, row0) = membrane_window(0.75, 0.5, h)?;
    let st = build_membrane(&cp, &cm, MembraneKind::Nonlinear, win, row0, 4.0 * h * cf.jacobian)?;
    push(&mut rep, "closed_form.membrane_difference.grid", masked_errors(&st.d, &|_| true, &|_, _| 0.0), gt);
    if st.flagged > 0 {
        rep.warn(format!("{} membrane nodes without a chart preimage", st.flagged));
    }
    let l2 = lam * lam;
    let neumann = move |p: Phase, _: [f64; 2]| match p {
        Phase::Plus => vertical_normal(l2),
        Phase::Minus => vertical_normal(1.0 / l2),
    };
    rep.extend("membrane.", membrane_residuals(&st, &neumann, TWOPLANE_MODULE_TOL));
    let (thin_rep, thin) = thin_obstacle_reduction(&st, 1e-6, TWOPLANE_MODULE_TOL)?;
    rep.extend("thin_obstacle.", thin_rep);
    rep.push(Check::scalar("thin_obstacle.gap_components", thin.components.len() as f64, 0.0));

    // analytic paths from the base point
    let at = TWOPLANE_ANALYTIC_TOL;
    let gp = GaussMap::new(&plus);
    let gm = GaussMap::new(&minus);
    let mut e = [(); 7].map(|_| Vec::new());
    let mut missing = 0usize;
    for a in 1..=6 {
        for b in -6..=6 {
            let (x, y) = (0.1 * b as f64, 0.1 * a as f64);
            for (map, base, yy, sgn) in [(&gp, plus.base, y, 1.0), (&gm, minus.base, -y, -1.0)] {
                let (Some(psi), Some(g)) = (map.segment(base, [x, yy]), map.g([x, yy])) else {
                    missing += 1;
                    continue;
                };
                let c = if sgn > 0.0 { 0 } else { 1 };
                e[c].push(psi[0] - cf.psi1 * x);
                e[2 + c].push(psi[1] - cf.psi2 * y);
                e[4 + c].push(gauss_normal(g)[2] - sgn * cf.normal_plus);
                if sgn > 0.0 {
                    let (_, m) = map.chart(base, [x, yy]).expect("sampled above");
                    e[6].push(m[0][0] * m[1][1] - m[0][1] * m[1][0] - cf.jacobian);
                }
            }
        }
    }
    let names = ["psi1_plus", "psi1_minus", "psi2_plus", "psi2_minus", "normal_plus", "normal_minus", "jacobian_plus"];
    for (n, v) in names.iter().zip(e) {
        let mut c = Check::from_samples(format!("closed_form.{n}.analytic"), v, at);
        c.excluded = missing;
        rep.push(c);
    }
    let mut d = Vec::new();
    let mut unresolved = 0usize;
    for b in -5..=5 {
        for a in 0..=4 {
            let (s, t) = (0.1 * b as f64, 0.1 * a as f64);
            let zp = gp.invert(plus.base, [s, t]);
            let zm = gm.invert(minus.base, [s, -t]);
            match (zp.and_then(|z| gp.segment(plus.base, z)), zm.and_then(|z| gm.segment(minus.base, z))) {
                (Some(p), Some(m)) => d.push(m[1] - p[1]),
                _ => unresolved += 1,
            }
        }
    }
    let mut c = Check::from_samples("closed_form.membrane_difference.analytic", d, at);
    c.excluded = unresolved;
    rep.push(c);

    Ok(TwoPlaneRun {
        solution: sol,
        plus,
        minus,
        surface_plus: sp,
        surface_minus: sm,
        chart_plus: cp,
        membrane: st,
        report: rep,
    })
}

fn graphs_figure(x: &[f64], plus: &[f64], minus: &[f64], window: [f64; 4]) -> Artifact {
    let line = |label: &str, y: &[f64]| Polyline {
        label: label.into(),
        points: x.iter().zip(y).filter(|(_, v)| v.is_finite()).map(|(&a, &b)| [a, b]).collect(),
    };
    Artifact::Figure { window, lines: vec![line("eta_plus", plus), line("eta_minus", minus)] }
}

fn surface_figure(sp: &WeierstrassSurface, sm: &WeierstrassSurface) -> Artifact {
    let line = |label: &str, s: &WeierstrassSurface| Polyline {
        label: label.into(),
        points: s.trace.psi.iter().flatten().map(|p| [p[0], p[1]]).collect(),
    };
    let lines = vec![line("trace_plus", sp), line("trace_minus", sm)];
    Artifact::Figure { window: bounding_window(&lines), lines }
}

/// `d(s, 0)` on the thin line, with the contact intervals drawn on the axis.
fn d_trace_figure(st: &MembraneState) -> Artifact {
    let g = st.grid;
    let pts: Vec<[f64; 2]> =
        (0..g.nx).filter(|&i| st.d.mask[g.idx(i, st.row0)]).map(|i| [g.x(i), st.d.at(i, st.row0)]).collect();
    let contact = st.contact();
    let mut lines = vec![Polyline { label: "d".into(), points: pts }];
    let mut i = 0;
    while i < g.nx {
        if contact[i] && st.d.mask[g.idx(i, st.row0)] {
            let s0 = i;
            while i < g.nx && contact[i] && st.d.mask[g.idx(i, st.row0)] {
                i += 1;
            }
            lines.push(Polyline { label: "contact".into(), points: vec![[g.x(s0), 0.0], [g.x(i - 1), 0.0]] });
        } else {
            i += 1;
        }
    }
    Artifact::Figure { window: bounding_window(&lines), lines }
}

/// Smallest window holding every vertex, padded by 5% (at least 1e-3).
pub fn bounding_window(lines: &[Polyline]) -> [f64; 4] {
    let mut w = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in lines.iter().flat_map(|l| &l.points) {
        w = [w[0].min(p[0]), w[1].max(p[0]), w[2].min(p[1]), w[3].max(p[1])];
    }
    if !w[0].is_finite() {
        return [-1.0, 1.0, -1.0, 1.0];
    }
    let px = (0.05 * (w[1] - w[0])).max(1e-3);
    let py = (0.05 * (w[3] - w[2])).max(1e-3);
    [w[0] - px, w[1] + px, w[2] - py, w[3] + py]
}

fn window_of(g: &GridSpec) -> [f64; 4] {
    [g.x(0), g.x_max(), g.y(0), g.y_max()]
}

pub fn run_twoplane(lambda_plus: f64, lambda_minus: f64, grid: GridSpec) -> Result<PipelineOutput> {
    let run = twoplane_chain(lambda_plus, lambda_minus, grid)?;
    let set = branching_set(&run.solution, None)?;
    let sol = &run.solution;
    let cf = TwoPlaneClosedForms::new(sol.lambda);
    let summary = json!({
        "lambda": sol.lambda,
        "closed_forms": {
            "psi1": cf.psi1, "psi2_plus": cf.psi2, "normal_plus": cf.normal_plus, "jacobian_plus": cf.jacobian,
        },
        "base_point": run.plus.base,
        "branching": set,
    });
    let xs = sol.abscissae();
    let artifacts = vec![
        ("u".to_string(), Artifact::Field { field: sol.u.clone() }),
        ("psi1_plus".to_string(), Artifact::Field { field: run.surface_plus.psi[0].clone() }),
        ("psi2_plus".to_string(), Artifact::Field { field: run.surface_plus.psi[1].clone() }),
        ("d".to_string(), Artifact::Field { field: run.membrane.d.clone() }),
        ("branching".to_string(), Artifact::Branching(set)),
        ("free_boundary".to_string(), graphs_figure(&xs, &sol.eta_plus, &sol.eta_minus, window_of(&grid))),
        ("surface_traces".to_string(), surface_figure(&run.surface_plus, &run.surface_minus)),
        ("d_trace".to_string(), d_trace_figure(&run.membrane)),
    ];
    Ok(PipelineOutput { report: run.report, summary, artifacts })
}

pub fn run_counterexample(k: &IntervalUnion, h: f64) -> Result<PipelineOutput> {
    let b = assemble_counterexample(k, h)?;
    let mut rep = ResidualReport::new();
    let tol = COUNTEREXAMPLE_TOL;
    let sp = integrate_surface(&b.plus)?;
    let sm = integrate_surface(&b.minus)?;
    rep.extend("surface_plus.", surface_report(&sp, tol));
    rep.extend("surface_minus.", surface_report(&sm, tol));
    rep.extend("capillary.", verify_capillary(&sp, &sm, &b.targets, tol));
    rep.extend("boundary_transform.", verify_boundary_transform(&sp, &sm, &b.targets, tol));
    rep.push(Check::scalar("mirror.oddness", b.oddness, tol));
    rep.push(Check::scalar("mirror.trace_agreement", b.trace_agreement, tol));
    let verdict = verify_branching_prescription(&b)?;
    let mut c = Check::scalar("branching.hausdorff", verdict.hausdorff, 4.0 * verdict.h);
    c.pass &= verdict.measured.len() == verdict.expected.len();
    rep.push(c);
    for w in b.warnings.iter().chain(&b.half.warnings) {
        rep.warn(w.clone());
    }
    if b.unresolved > 0 {
        rep.warn(format!("{} (s, t) nodes without a chart preimage", b.unresolved));
    }
    let sol = &b.solution;
    let summary = json!({
        "K": k.intervals(),
        "verdict": verdict,
        "window": window_of(&b.half.grid),
        "sweeps": b.half.sweeps,
    });
    let xs = sol.abscissae();
    let artifacts = vec![
        ("u".to_string(), Artifact::Field { field: sol.u.clone() }),
        ("v".to_string(), Artifact::Field { field: b.half.v.clone() }),
        ("vbar".to_string(), Artifact::Field { field: b.half.vbar.clone() }),
        ("verdict".to_string(), Artifact::Json(serde_json::to_value(&verdict)?)),
        ("free_boundary".to_string(), graphs_figure(&xs, &sol.eta_plus, &sol.eta_minus, window_of(&sol.grid()))),
        ("surface_traces".to_string(), surface_figure(&sp, &sm)),
    ];
    Ok(PipelineOutput { report: rep, summary, artifacts })
}

/// Obstacle data of the `obstacle` pipeline: a fixed tag, or the pinched
/// strip with its critical `β` tuned on the grid (`pinched:a,critical`).
pub fn resolve_obstacle(tag: &str, grid: GridSpec) -> Result<(ObstacleData, Option<ObstacleSolution>)> {
    if let Some(a) = tag.strip_prefix("pinched:").and_then(|r| r.strip_suffix(",critical")) {
        let a: f64 = a.trim().parse().map_err(|_| crate::error::Error::input(format!("bad obstacle tag `{tag}`")))?;
        if a < 0.0 {
            return Err(crate::error::Error::input(format!("bad obstacle tag `{tag}`")));
        }
        let (beta, sol) = critical_pinch(a, grid, 0.2, 0.4, 2e-4, &ObstacleOptions::default())?;
        return Ok((ObstacleData::Pinched { a, beta }, Some(sol)));
    }
    Ok((ObstacleData::parse(tag)?, None))
}

#[derive(Debug, Clone)]
pub struct ObstacleRun {
    pub report: ResidualReport,
    pub graphs: DerivativeGraphs,
    pub branching: BranchingSet,
    pub membrane: Option<MembraneState>,
}

/// Solve, conjugate pair, forms, strata, branching set and, when a branch
/// point sits at the origin, the membrane pair.
pub fn obstacle_chain(data: &ObstacleData, sol: &ObstacleSolution) -> Result<ObstacleRun> {
    let g = sol.grid();
    let mut rep = ResidualReport::new();
    rep.push(Check::scalar("solver.complementarity", sol.residual, OBSTACLE_SOLVER_TOL));
    rep.extend("conjugate.", conjugate_report(sol, OBSTACLE_MARGIN, OBSTACLE_TOL));
    if sol.is_empty() {
        rep.warn("Ω is empty; the forms, strata and branching steps are skipped");
        let graphs = derivative_graphs(sol, g.h);
        let branching = branching_points_obstacle(&graphs, &[], g.h);
        return Ok(ObstacleRun { report: rep, graphs, branching, membrane: None });
    }
    let circle = match *data {
        ObstacleData::Radial { r } => Some(([0.0, 0.0], r + 0.3)),
        _ => None,
    };
    let (_, forms) = weierstrass_forms_obstacle(sol, OBSTACLE_MARGIN, circle, OBSTACLE_FORMS_TOL)?;
    rep.extend("forms.", forms);
    let samples = stratify_boundary(sol, &DENSITY_RADII);
    rep.extend("", boundary_condition_check(sol, &samples, [0.0, 1.0], OBSTACLE_BC_TOL));
    let graphs = derivative_graphs(sol, g.h);
    rep.extend("strata.", strata_consistency(&graphs, &samples, g.h));
    let set = branching_points_obstacle(&graphs, &samples, g.h);
    let mut membrane = None;
    if set.points.iter().any(|x| x.abs() <= 4.0 * g.h) {
        let (a, b) = OBSTACLE_WINDOW;
        let (st, mrep) = obstacle_membrane(sol, a, b, OBSTACLE_MARGIN, OBSTACLE_MEMBRANE_TOL)?;
        rep.extend("membrane.", mrep);
        membrane = Some(st);
    } else if !set.points.is_empty() {
        rep.warn("no branch point at the origin; the membrane step is skipped");
    }
    Ok(ObstacleRun { report: rep, graphs, branching: set, membrane })
}

pub fn run_obstacle(tag: &str, grid: GridSpec) -> Result<PipelineOutput> {
    let (data, tuned) = resolve_obstacle(tag, grid)?;
    let sol = match tuned {
        Some(s) => s,
        None => solve_obstacle(&|p| data.value(p), grid, &ObstacleOptions::default())?,
    };
    let ObstacleRun { report: rep, graphs, branching: set, membrane } = obstacle_chain(&data, &sol)?;
    let summary = json!({
        "data": data,
        "branching": set,
        "sweeps": sol.sweeps,
    });
    let mut artifacts = vec![
        ("u".to_string(), Artifact::Field { field: sol.u.clone() }),
        ("branching".to_string(), Artifact::Branching(set)),
        (
            "free_boundary".to_string(),
            graphs_figure(&graphs.x, &graphs.eta_plus, &graphs.eta_minus, window_of(&grid)),
        ),
    ];
    if let Some(st) = &membrane {
        artifacts.push(("d".to_string(), Artifact::Field { field: st.d.clone() }));
        artifacts.push(("d_trace".to_string(), d_trace_figure(st)));
    }
    Ok(PipelineOutput { report: rep, summary, artifacts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_reproduces_linear_potentials() {
        // constant g: ψ is linear, so any path gives the closed form
        let g = GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, 0.125).unwrap();
        let sol = make_two_plane(9.0, 1.0, g).unwrap();
        let (p, _) = build_data(&sol, FLATNESS_THRESHOLD).unwrap();
        let m = GaussMap::new(&p);
        let psi = m.segment([0.0, 0.0], [0.3, 0.4]).unwrap();
        let cf = TwoPlaneClosedForms::new(3.0);
        assert!((psi[0] - cf.psi1 * 0.3).abs() < 1e-14);
        assert!((psi[1] - cf.psi2 * 0.4).abs() < 1e-14);
        let z = m.invert([0.0, 0.0], [0.5, 0.2]).unwrap();
        assert!((z[0] - 0.5 / cf.psi1).abs() < 1e-13 && (z[1] - 0.2).abs() < 1e-13);
    }

    #[test]
    fn bounding_window_pads() {
        let w = bounding_window(&[Polyline { label: "a".into(), points: vec![[0.0, 0.0], [1.0, 2.0]] }]);
        assert_eq!(w, [-0.05, 1.05, -0.1, 2.1]);
    }
}
