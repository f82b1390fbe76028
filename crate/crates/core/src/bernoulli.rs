//! Two-phase Bernoulli solutions: the two-plane model, harmonic assembly
//! from prescribed free-boundary graphs, residuals of the free-boundary
//! system and branching-point detection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::harmonic::{solve_dirichlet_region, Region, SolverOptions};
use crate::report::{Check, ResidualReport};

/// Default contact threshold in units of `h`.
pub const CONTACT_TOL_CELLS: f64 = 4.0;

/// `√Λ⁺ y₊ − √Λ⁻ y₋`, evaluated in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPlaneModel {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl TwoPlaneModel {
    pub fn u(&self, _x: f64, y: f64) -> f64 {
        if y >= 0.0 {
            self.lambda_plus.sqrt() * y
        } else {
            self.lambda_minus.sqrt() * y
        }
    }

    pub fn grad(&self, y: f64) -> [f64; 2] {
        if y >= 0.0 {
            [0.0, self.lambda_plus.sqrt()]
        } else {
            [0.0, self.lambda_minus.sqrt()]
        }
    }
}

/// Sampled coefficient fields `Λ±` for variable-coefficient solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCoefficients {
    pub plus: ScalarField,
    pub minus: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseSolution {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// `(Λ⁺/Λ⁻)^{1/2}`.
    pub lambda: f64,
    pub u: ScalarField,
    pub omega_plus: Vec<bool>,
    pub omega_minus: Vec<bool>,
    /// Free-boundary graphs sampled at the grid abscissae.
    pub eta_plus: Vec<f64>,
    pub eta_minus: Vec<f64>,
    /// Sup deviation from the two-plane model over the window.
    pub flatness: f64,
    pub variable: Option<VariableCoefficients>,
    /// Present when the solution is the two-plane model itself.
    pub model: Option<TwoPlaneModel>,
}

fn check_constants(lp: f64, lm: f64) -> Result<()> {
    if !(lp > 0.0 && lm > 0.0 && lp.is_finite() && lm.is_finite()) {
        return Err(Error::input(format!("Λ± must be positive, got {lp}, {lm}")));
    }
    Ok(())
}

impl TwoPhaseSolution {
    pub fn grid(&self) -> GridSpec {
        self.u.grid
    }

    pub fn abscissae(&self) -> Vec<f64> {
        let g = self.grid();
        (0..g.nx).map(|i| g.x(i)).collect()
    }

    /// `Λ⁺` at a point (constant or sampled).
    pub fn coef_plus(&self, p: [f64; 2]) -> f64 {
        match &self.variable {
            Some(v) => sample_coef(&v.plus, p).unwrap_or(self.lambda_plus),
            None => self.lambda_plus,
        }
    }

    pub fn coef_minus(&self, p: [f64; 2]) -> f64 {
        match &self.variable {
            Some(v) => sample_coef(&v.minus, p).unwrap_or(self.lambda_minus),
            None => self.lambda_minus,
        }
    }

    fn measure_flatness(&mut self) {
        let m = TwoPlaneModel { lambda_plus: self.lambda_plus, lambda_minus: self.lambda_minus };
        let g = self.grid();
        let mut eps: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let [x, y] = g.point(i, j);
                eps = eps.max((self.u.at(i, j) - m.u(x, y)).abs());
            }
        }
        self.flatness = eps;
    }
}

fn sample_coef(f: &ScalarField, p: [f64; 2]) -> Option<f64> {
    crate::interp::smooth_sample(f, p).map(|s| s.value)
}

/// The two-plane solution `u = √Λ⁺ y` (y ≥ 0), `u = √Λ⁻ y` (y < 0).
pub fn make_two_plane(lambda_plus: f64, lambda_minus: f64, grid: GridSpec) -> Result<TwoPhaseSolution> {
    check_constants(lambda_plus, lambda_minus)?;
    let model = TwoPlaneModel { lambda_plus, lambda_minus };
    let u = ScalarField::from_fn(grid, |x, y| model.u(x, y));
    let omega_plus = u.values.iter().map(|&v| v > 0.0).collect();
    let omega_minus = u.values.iter().map(|&v| v < 0.0).collect();
    Ok(TwoPhaseSolution {
        lambda_plus,
        lambda_minus,
        lambda: (lambda_plus / lambda_minus).sqrt(),
        u,
        omega_plus,
        omega_minus,
        eta_plus: vec![0.0; grid.nx],
        eta_minus: vec![0.0; grid.nx],
        flatness: 0.0,
        variable: None,
        model: Some(model),
    })
}

/// Piecewise-linear interpolation of a graph sampled at the grid columns,
/// held constant beyond the ends.
pub(crate) fn graph_at(grid: &GridSpec, eta: &[f64], x: f64) -> f64 {
    let t = (x - grid.origin[0]) / grid.h;
    if t <= 0.0 {
        return eta[0];
    }
    let n = eta.len();
    if t >= (n - 1) as f64 {
        return eta[n - 1];
    }
    let i = t.floor() as usize;
    let s = t - i as f64;
    eta[i] * (1.0 - s) + eta[i + 1] * s
}

/// Outer data on the window frame for [`assemble_from_graphs`].
pub trait OuterData {
    fn plus(&self, p: [f64; 2]) -> f64;
    fn minus(&self, p: [f64; 2]) -> f64;
}

/// `±√Λ± |y|`-type data matching the two-plane model.
impl OuterData for TwoPlaneModel {
    fn plus(&self, p: [f64; 2]) -> f64 {
        self.lambda_plus.sqrt() * p[1].abs()
    }

    fn minus(&self, p: [f64; 2]) -> f64 {
        -self.lambda_minus.sqrt() * p[1].abs()
    }
}

struct EpiRegion<'a> {
    grid: GridSpec,
    eta: &'a [f64],
    below: bool,
}

impl Region for EpiRegion<'_> {
    fn level(&self, p: [f64; 2]) -> f64 {
        let d = p[1] - graph_at(&self.grid, self.eta, p[0]);
        if self.below {
            -d
        } else {
            d
        }
    }
}

/// Harmonic phases above `η⁺` and below `η⁻`, vanishing on the graphs and
/// matching `outer` on the window frame.
pub fn assemble_from_graphs(
    grid: GridSpec,
    eta_plus: &[f64],
    eta_minus: &[f64],
    lambda_plus: f64,
    lambda_minus: f64,
    outer: &dyn OuterData,
) -> Result<TwoPhaseSolution> {
    check_constants(lambda_plus, lambda_minus)?;
    if eta_plus.len() != grid.nx || eta_minus.len() != grid.nx {
        return Err(Error::input("graphs must be sampled at every grid column"));
    }
    if let Some(i) = (0..grid.nx).find(|&i| eta_minus[i] > eta_plus[i]) {
        return Err(Error::input(format!("graphs cross at x = {}", grid.x(i))));
    }
    let opts = SolverOptions::default();
    let top = EpiRegion { grid, eta: eta_plus, below: false };
    let bot = EpiRegion { grid, eta: eta_minus, below: true };
    let (up, _) = solve_dirichlet_region(
        grid,
        &top,
        &|p| if top.level(p) <= 0.0 { 0.0 } else { outer.plus(p) },
        &opts,
    )?;
    let (um, _) = solve_dirichlet_region(
        grid,
        &bot,
        &|p| if bot.level(p) <= 0.0 { 0.0 } else { outer.minus(p) },
        &opts,
    )?;
    let mut u = ScalarField::zeros(grid);
    let mut omega_plus = vec![false; grid.len()];
    let mut omega_minus = vec![false; grid.len()];
    for k in 0..grid.len() {
        if up.mask[k] && up.values[k] > 0.0 {
            u.values[k] = up.values[k];
            omega_plus[k] = true;
        } else if um.mask[k] && um.values[k] < 0.0 {
            u.values[k] = um.values[k];
            omega_minus[k] = true;
        }
    }
    let mut sol = TwoPhaseSolution {
        lambda_plus,
        lambda_minus,
        lambda: (lambda_plus / lambda_minus).sqrt(),
        u,
        omega_plus,
        omega_minus,
        eta_plus: eta_plus.to_vec(),
        eta_minus: eta_minus.to_vec(),
        flatness: 0.0,
        variable: None,
        model: None,
    };
    sol.measure_flatness();
    Ok(sol)
}

impl TwoPhaseSolution {
    /// Packages externally computed fields; graphs are extracted from `u`
    /// when not supplied.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        u: ScalarField,
        lambda_plus: f64,
        lambda_minus: f64,
        graphs: Option<(Vec<f64>, Vec<f64>)>,
        variable: Option<VariableCoefficients>,
    ) -> Result<TwoPhaseSolution> {
        check_constants(lambda_plus, lambda_minus)?;
        let (eta_plus, eta_minus) = match graphs {
            Some(g) => g,
            None => extract_graphs(&u),
        };
        let grid = u.grid;
        if eta_plus.len() != grid.nx || eta_minus.len() != grid.nx {
            return Err(Error::input("graphs must be sampled at every grid column"));
        }
        let omega_plus = (0..grid.len()).map(|k| u.mask[k] && u.values[k] > 0.0).collect();
        let omega_minus = (0..grid.len()).map(|k| u.mask[k] && u.values[k] < 0.0).collect();
        let mut sol = TwoPhaseSolution {
            lambda_plus,
            lambda_minus,
            lambda: (lambda_plus / lambda_minus).sqrt(),
            u,
            omega_plus,
            omega_minus,
            eta_plus,
            eta_minus,
            flatness: 0.0,
            variable,
            model: None,
        };
        sol.measure_flatness();
        Ok(sol)
    }
}

/// Per-column graphs of `∂{u > 0}` and `∂{u < 0}`: the positive run
/// reaching the top of the column and the negative run reaching the
/// bottom, with linear interpolation of the sign change.
pub fn extract_graphs(u: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = u.grid;
    let mut ep = vec![f64::NAN; g.nx];
    let mut em = vec![f64::NAN; g.nx];
    for i in 0..g.nx {
        let val = |j: usize| u.at(i, j);
        // top positive run
        let mut jp = g.ny;
        while jp > 0 && val(jp - 1) > 0.0 {
            jp -= 1;
        }
        let mut jm = 0;
        while jm < g.ny && val(jm) < 0.0 {
            jm += 1;
        }
        ep[i] = if jp == 0 {
            g.y(0)
        } else if jp == g.ny {
            g.y_max()
        } else {
            let (a, b) = (val(jp - 1), val(jp));
            g.y(jp - 1) + g.h * (-a) / (b - a)
        };
        em[i] = if jm == g.ny {
            g.y_max()
        } else if jm == 0 {
            g.y(0)
        } else {
            let (a, b) = (val(jm - 1), val(jm));
            g.y(jm - 1) + g.h * (-a) / (b - a)
        };
        if em[i] > ep[i] {
            let m = 0.5 * (em[i] + ep[i]);
            ep[i] = m;
            em[i] = m;
        }
    }
    (ep, em)
}

/// Quadratic through three nodes of a column, evaluated with its
/// derivative at `y`.
fn quadratic_at(ys: [f64; 3], fs: [f64; 3], y: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for a in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&b| b != a).collect();
        let (b, c) = (others[0], others[1]);
        let den = (ys[a] - ys[b]) * (ys[a] - ys[c]);
        v += fs[a] * (y - ys[b]) * (y - ys[c]) / den;
        d += fs[a] * ((y - ys[b]) + (y - ys[c])) / den;
    }
    (v, d)
}

/// One-sided trace of a phase on its graph in column `i`: value, `u_y`
/// and `|∇u|²` from quadratic extrapolation of three interior layers.
fn phase_trace(sol: &TwoPhaseSolution, i: usize, plus: bool) -> Option<(f64, f64, f64)> {
    let g = sol.grid();
    let (eta, mask) = if plus { (&sol.eta_plus, &sol.omega_plus) } else { (&sol.eta_minus, &sol.omega_minus) };
    let y0 = eta[i];
    let mut js = Vec::with_capacity(3);
    if plus {
        let mut j = (((y0 - g.origin[1]) / g.h).floor() as isize + 1).max(0) as usize;
        while j < g.ny && js.len() < 3 {
            if mask[g.idx(i, j)] && g.y(j) > y0 {
                js.push(j);
            } else if !js.is_empty() {
                break;
            }
            j += 1;
        }
    } else {
        let mut j = ((y0 - g.origin[1]) / g.h).ceil() as isize - 1;
        while j >= 0 && js.len() < 3 {
            let jj = j as usize;
            if jj < g.ny && mask[g.idx(i, jj)] && g.y(jj) < y0 {
                js.push(jj);
            } else if !js.is_empty() {
                break;
            }
            j -= 1;
        }
    }
    if js.len() < 3 {
        return None;
    }
    let ys = [g.y(js[0]), g.y(js[1]), g.y(js[2])];
    let fs = [sol.u.at(i, js[0]), sol.u.at(i, js[1]), sol.u.at(i, js[2])];
    let (v, uy) = quadratic_at(ys, fs, y0);
    let slope = graph_slope(&g, eta, i);
    Some((v, uy, uy * uy * (1.0 + slope * slope)))
}

fn graph_slope(g: &GridSpec, eta: &[f64], i: usize) -> f64 {
    let n = eta.len();
    if i > 0 && i + 1 < n {
        (eta[i + 1] - eta[i - 1]) / (2.0 * g.h)
    } else if i == 0 {
        (-3.0 * eta[0] + 4.0 * eta[1] - eta[2]) / (2.0 * g.h)
    } else {
        (3.0 * eta[n - 1] - 4.0 * eta[n - 2] + eta[n - 3]) / (2.0 * g.h)
    }
}

/// Column classes: `Some(true)` contact, `Some(false)` gap, `None` for the
/// transition samples adjacent to a class change.
pub(crate) fn column_classes(sol: &TwoPhaseSolution, tol: f64) -> Vec<Option<bool>> {
    let n = sol.eta_plus.len();
    let raw: Vec<bool> = (0..n).map(|i| sol.eta_plus[i] - sol.eta_minus[i] <= tol).collect();
    (0..n)
        .map(|i| {
            let left = i == 0 || raw[i - 1] == raw[i];
            let right = i + 1 == n || raw[i + 1] == raw[i];
            (left && right).then_some(raw[i])
        })
        .collect()
}

/// Residuals of the two-phase free-boundary system. `tol` is the contact
/// threshold (default `4h`).
pub fn residuals_two_phase(sol: &TwoPhaseSolution, tol: Option<f64>, check_tol: f64) -> ResidualReport {
    let g = sol.grid();
    let tol = tol.unwrap_or(CONTACT_TOL_CELLS * g.h);
    let mut rep = ResidualReport::new();
    for (name, mask) in [("laplacian_plus", &sol.omega_plus), ("laplacian_minus", &sol.omega_minus)] {
        let lap = sol.u.clone().with_mask(mask.clone()).laplacian();
        rep.push(Check::new(name, lap.norms(false), check_tol));
    }
    let classes = column_classes(sol, tol);
    let mut trace = Vec::new();
    let mut one_phase = Vec::new();
    let mut contact_ineq = Vec::new();
    let mut jump = Vec::new();
    let mut missing = 0usize;
    for i in 0..g.nx {
        let x = g.x(i);
        let tp = phase_trace(sol, i, true);
        let tm = phase_trace(sol, i, false);
        let lp = sol.coef_plus([x, sol.eta_plus[i]]);
        let lm = sol.coef_minus([x, sol.eta_minus[i]]);
        for t in [tp, tm].iter().flatten() {
            trace.push(t.0);
        }
        match classes[i] {
            Some(false) => {
                if let Some(t) = tp {
                    one_phase.push(t.2 - lp);
                }
                if let Some(t) = tm {
                    one_phase.push(t.2 - lm);
                }
            }
            Some(true) => match (tp, tm) {
                (Some(a), Some(b)) => {
                    contact_ineq.push((lp - a.2).max(0.0));
                    contact_ineq.push((lm - b.2).max(0.0));
                    jump.push(a.2 - b.2 - (lp - lm));
                }
                _ => missing += 1,
            },
            None => {}
        }
        if tp.is_none() || tm.is_none() {
            missing += 1;
        }
    }
    rep.push(Check::from_samples("graph_trace", trace, check_tol));
    rep.push(Check::from_samples("one_phase_gradient", one_phase, check_tol));
    rep.push(Check::from_samples("contact_inequality", contact_ineq, check_tol));
    rep.push(Check::from_samples("jump", jump, check_tol));
    if missing > 0 {
        rep.warn(format!("{missing} graph samples lacked three interior layers"));
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingSet {
    pub points: Vec<f64>,
    pub tolerance: f64,
    pub h: f64,
}

/// Transition abscissae between `{gap ≤ tol}` and `{gap > tol}` for a gap
/// function sampled at `xs`, each refined by bisection to `h/4` towards the
/// end of exact contact.
pub fn branching_points(xs: &[f64], gap: &dyn Fn(f64) -> f64, tol: f64, h: f64) -> Result<Vec<f64>> {
    if !(tol >= 0.0) {
        return Err(Error::input(format!("contact tolerance must be nonnegative, got {tol}")));
    }
    let n = xs.len();
    let vals: Vec<f64> = xs.iter().map(|&x| gap(x)).collect();
    let contact: Vec<bool> = vals.iter().map(|&v| v <= tol).collect();
    let mut pts = Vec::new();
    for i in 0..n.saturating_sub(1) {
        if contact[i] == contact[i + 1] {
            continue;
        }
        // walk into the contact side for a sample of exact contact
        let (c, step): (usize, isize) = if contact[i] { (i, -1) } else { (i + 1, 1) };
        let mut k = c as isize;
        let mut exact = None;
        while k >= 0 && (k as usize) < n && contact[k as usize] {
            if vals[k as usize] <= 0.0 {
                exact = Some(k as usize);
                break;
            }
            k += step;
        }
        let (mut a, mut b, thr) = match exact {
            Some(e) => {
                let far = if contact[i] { i + 1 } else { i };
                (xs[e], xs[far], 0.0)
            }
            None => {
                let (ci, gi) = if contact[i] { (i, i + 1) } else { (i + 1, i) };
                (xs[ci], xs[gi], tol)
            }
        };
        // a: contact side, b: gap side
        while (b - a).abs() > 0.25 * h {
            let m = 0.5 * (a + b);
            if gap(m) > thr {
                b = m;
            } else {
                a = m;
            }
        }
        pts.push(0.5 * (a + b));
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    for p in pts {
        if run.last().map_or(false, |&q| p - q <= h) {
            run.push(p);
        } else {
            if !run.is_empty() {
                merged.push(run.iter().sum::<f64>() / run.len() as f64);
            }
            run = vec![p];
        }
    }
    if !run.is_empty() {
        merged.push(run.iter().sum::<f64>() / run.len() as f64);
    }
    Ok(merged)
}

/// `∂Ω⁺ ∩ ∂Ω⁻ ∩ closure(int{u = 0})` read off the graphs.
pub fn branching_set(sol: &TwoPhaseSolution, tol: Option<f64>) -> Result<BranchingSet> {
    let g = sol.grid();
    let tol = tol.unwrap_or(CONTACT_TOL_CELLS * g.h);
    let xs = sol.abscissae();
    let gap = |x: f64| graph_at(&g, &sol.eta_plus, x) - graph_at(&g, &sol.eta_minus, x);
    let points = branching_points(&xs, &gap, tol, g.h)?;
    Ok(BranchingSet { points, tolerance: tol, h: g.h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(h: f64) -> GridSpec {
        GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, h).unwrap()
    }

    #[test]
    fn two_plane_values() {
        let s = make_two_plane(1.0, 1.0, window(0.125)).unwrap();
        let g = s.grid();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert_eq!(s.u.at(i, j), g.y(j));
            }
        }
        let s = make_two_plane(4.0, 1.0, window(0.125)).unwrap();
        assert_eq!(s.lambda, 2.0);
        let g = s.grid();
        let (i, j1) = g.nearest([0.0, 1.0]);
        let (_, jm) = g.nearest([0.0, -1.0]);
        assert_eq!(s.u.at(i, j1), 2.0);
        assert_eq!(s.u.at(i, jm), -1.0);
        assert!(make_two_plane(0.0, 1.0, g).is_err());
    }

    #[test]
    fn two_plane_residuals_vanish() {
        for (lp, lm) in [(1.0, 1.0), (4.0, 1.0), (0.01, 100.0), (25.0, 0.3)] {
            let s = make_two_plane(lp, lm, window(0.0625)).unwrap();
            let rep = residuals_two_phase(&s, None, 1e-10 * (1.0 + lp + lm));
            assert!(rep.all_pass(), "{lp} {lm}: {:?}", rep.failures());
        }
    }

    #[test]
    fn perturbed_reference_constant_shows_in_jump() {
        let mut s = make_two_plane(4.0, 1.0, window(0.0625)).unwrap();
        s.lambda_minus += 0.25;
        let rep = residuals_two_phase(&s, None, 1.0);
        assert!((rep.sup("jump") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn flat_graphs_reproduce_the_two_plane_model() {
        let g = window(0.0625);
        let m = TwoPlaneModel { lambda_plus: 4.0, lambda_minus: 1.0 };
        let zero = vec![0.0; g.nx];
        let s = assemble_from_graphs(g, &zero, &zero, 4.0, 1.0, &m).unwrap();
        let exact = make_two_plane(4.0, 1.0, g).unwrap();
        let err = s.u.values.iter().zip(&exact.u.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert!(s.flatness < 1e-10);
    }

    #[test]
    fn wedge_gap_branches_at_its_corners() {
        let h = 1.0 / 64.0;
        let g = window(h);
        let a = 0.3;
        let ep: Vec<f64> = (0..g.nx).map(|i| (g.x(i).abs() - a).max(0.0)).collect();
        let em: Vec<f64> = ep.iter().map(|v| -v).collect();
        let m = TwoPlaneModel { lambda_plus: 1.0, lambda_minus: 1.0 };
        let s = assemble_from_graphs(g, &ep, &em, 1.0, 1.0, &m).unwrap();
        let b = branching_set(&s, None).unwrap();
        assert_eq!(b.points.len(), 2, "{:?}", b.points);
        assert!((b.points[0] + a).abs() <= h && (b.points[1] - a).abs() <= h);
        let rep = residuals_two_phase(&s, None, 1.0);
        assert!(rep.get("jump").is_some());
    }

    #[test]
    fn crossing_graphs_are_rejected() {
        let g = window(0.125);
        let mut ep = vec![0.0; g.nx];
        let em = vec![0.0; g.nx];
        ep[3] = -0.1;
        let m = TwoPlaneModel { lambda_plus: 1.0, lambda_minus: 1.0 };
        let err = assemble_from_graphs(g, &ep, &em, 1.0, 1.0, &m).unwrap_err();
        assert!(err.is_input());
    }

    #[test]
    fn branching_edge_cases() {
        let s = make_two_plane(4.0, 1.0, window(0.0625)).unwrap();
        assert!(branching_set(&s, None).unwrap().points.is_empty());
        assert!(branching_set(&s, Some(-1.0)).unwrap_err().is_input());
        let xs: Vec<f64> = (0..33).map(|i| -1.0 + i as f64 / 16.0).collect();
        assert!(branching_points(&xs, &|_| 1.0, 0.25, 1.0 / 16.0).unwrap().is_empty());
    }

    #[test]
    fn graphs_from_a_sampled_field() {
        let g = window(0.125);
        let u = ScalarField::from_fn(g, |_, y| {
            if y > 0.25 {
                y - 0.25
            } else if y < -0.25 {
                y + 0.25
            } else {
                0.0
            }
        });
        let (ep, em) = extract_graphs(&u);
        assert!(ep.iter().all(|&v| (v - 0.25).abs() < 1e-12));
        assert!(em.iter().all(|&v| (v + 0.25).abs() < 1e-12));
        let (ep, em) = extract_graphs(&ScalarField::from_fn(g, |_, y| y - 0.3));
        assert!(ep.iter().zip(&em).all(|(a, b)| a == b && (a - 0.3).abs() < 1e-12));
    }
}
