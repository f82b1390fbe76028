//! The two-dimensional obstacle problem `Δu = χ{u>0}`: a projected SOR
//! solver, the holomorphic pair `T = (x − u_x) + i u_y`,
//! `S = (u_y − y) + i u_x`, density stratification of the free boundary,
//! the graphs of `∂{±u_y > 0}` and the linear two-membrane pair built from
//! `T` and `S`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bernoulli::BranchingSet;
use crate::complex::{cauchy_riemann_residual, circle_path, integrate_form, integrate_potential, nearest_active};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, OneForm, ScalarField};
use crate::interp::extend_vertical;
use crate::membrane::{
    build_membrane, from_fields, membrane_window, Chart, MembraneKind, MembraneState, J_MIN,
};
use crate::report::{Check, ResidualReport};
use crate::weierstrass::Phase;

/// Closed-form boundary data for the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObstacleData {
    /// `½ (y₊)²`.
    HalfSpace,
    /// `r²/4 − (R²/2) ln(r/R) − R²/4` outside the disk of radius `R`.
    Radial { r: f64 },
    /// `½ ((|y| − a)₊)²`.
    Strip { a: f64 },
    /// `½ ((|y| − a)₊)² + β (1 − x²)`, a strip squeezed near `x = 0`.
    Pinched { a: f64, beta: f64 },
    /// `½ y²`.
    Parabola,
    Zero,
}

impl ObstacleData {
    /// Parses `halfspace`, `radial:R`, `strip:a`, `pinched:a,beta`,
    /// `parabola`, `zero`.
    pub fn parse(tag: &str) -> Result<ObstacleData> {
        let (name, args) = tag.split_once(':').unwrap_or((tag, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| Error::input(format!("bad number in obstacle tag `{tag}`"))))
                .collect::<Result<_>>()?
        };
        let d = match (name.trim(), nums.as_slice()) {
            ("halfspace", []) => ObstacleData::HalfSpace,
            ("radial", [r]) if *r > 0.0 => ObstacleData::Radial { r: *r },
            ("strip", [a]) if *a >= 0.0 => ObstacleData::Strip { a: *a },
            ("pinched", [a, b]) if *a >= 0.0 && *b >= 0.0 => ObstacleData::Pinched { a: *a, beta: *b },
            ("parabola", []) => ObstacleData::Parabola,
            ("zero", []) => ObstacleData::Zero,
            _ => return Err(Error::input(format!("unknown obstacle data `{tag}`"))),
        };
        Ok(d)
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match *self {
            ObstacleData::HalfSpace => 0.5 * y.max(0.0).powi(2),
            ObstacleData::Radial { r } => {
                let rho = x.hypot(y);
                if rho <= r {
                    0.0
                } else {
                    rho * rho / 4.0 - 0.5 * r * r * (rho / r).ln() - r * r / 4.0
                }
            }
            ObstacleData::Strip { a } => 0.5 * (y.abs() - a).max(0.0).powi(2),
            ObstacleData::Pinched { a, beta } => 0.5 * (y.abs() - a).max(0.0).powi(2) + beta * (1.0 - x * x).max(0.0),
            ObstacleData::Parabola => 0.5 * y * y,
            ObstacleData::Zero => 0.0,
        }
    }

    /// Whether the data is itself a solution everywhere in the plane.
    pub fn is_exact(&self) -> bool {
        !matches!(self, ObstacleData::Pinched { .. })
    }
}

/// Controls for the projected relaxation.
#[derive(Debug, Clone, Copy)]
pub struct ObstacleOptions {
    /// Target discrete complementarity residual.
    pub tol: f64,
    pub max_sweeps: usize,
    pub omega: Option<f64>,
}

impl Default for ObstacleOptions {
    fn default() -> Self {
        ObstacleOptions { tol: 1e-10, max_sweeps: 400_000, omega: None }
    }
}

/// Nodes with `u ≤ CONTACT_FRACTION · h²` count as contact. Projected
/// relaxation only reaches zero from above where the constraint is
/// degenerate (`½y²` on the axis).
pub const CONTACT_FRACTION: f64 = 1e-6;

/// Solution of the obstacle problem on a grid box.
#[derive(Debug, Clone)]
pub struct ObstacleSolution {
    pub u: ScalarField,
    /// `Ω = {u > 0}`, up to `CONTACT_FRACTION`.
    pub omega: Vec<bool>,
    /// Second differences on `Ω`; flagged where the stencil meets `{u = 0}`.
    pub uxx: ScalarField,
    pub uxy: ScalarField,
    pub uyy: ScalarField,
    /// Discrete complementarity residual.
    pub residual: f64,
    pub sweeps: usize,
}

impl ObstacleSolution {
    pub fn grid(&self) -> GridSpec {
        self.u.grid
    }

    /// Packages an externally given nonnegative field.
    pub fn from_field(u: ScalarField) -> Result<ObstacleSolution> {
        if u.values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::input("obstacle solution must be finite and nonnegative"));
        }
        let residual = complementarity_residual(&u.grid, &u.values);
        let floor = CONTACT_FRACTION * u.grid.h * u.grid.h;
        let omega: Vec<bool> = u.values.iter().map(|&v| v > floor).collect();
        let (uxx, uxy, uyy) = second_differences(&u, &omega);
        Ok(ObstacleSolution { u, omega, uxx, uxy, uyy, residual, sweeps: 0 })
    }

    pub fn is_empty(&self) -> bool {
        !self.omega.iter().any(|&o| o)
    }
}

fn second_differences(u: &ScalarField, omega: &[bool]) -> (ScalarField, ScalarField, ScalarField) {
    let g = u.grid;
    let h2 = g.h * g.h;
    let mut out = [ScalarField::zeros(g), ScalarField::zeros(g), ScalarField::zeros(g)];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if !omega[k] || g.is_frame(i, j) {
                out.iter_mut().for_each(|f| f.mask[k] = false);
                continue;
            }
            let v = |di: isize, dj: isize| u.values[g.idx((i as isize + di) as usize, (j as isize + dj) as usize)];
            let touches = (-1isize..=1).any(|dj| {
                (-1isize..=1).any(|di| !omega[g.idx((i as isize + di) as usize, (j as isize + dj) as usize)])
            });
            let c = v(0, 0);
            out[0].values[k] = (v(1, 0) - 2.0 * c + v(-1, 0)) / h2;
            out[1].values[k] = (v(1, 1) - v(-1, 1) - v(1, -1) + v(-1, -1)) / (4.0 * h2);
            out[2].values[k] = (v(0, 1) - 2.0 * c + v(0, -1)) / h2;
            out.iter_mut().for_each(|f| f.flagged[k] = touches);
        }
    }
    let [a, b, c] = out;
    (a, b, c)
}

/// `max` over interior nodes of `|Δ_h u − 1|` on `{u > 0}` and
/// `(Δ_h u − 1)₊` on `{u = 0}`, plus any negativity.
pub fn complementarity_residual(g: &GridSpec, u: &[f64]) -> f64 {
    let h2 = g.h * g.h;
    let mut r: f64 = 0.0;
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let k = g.idx(i, j);
            let lap = (u[k + 1] + u[k - 1] + u[k + g.nx] + u[k - g.nx] - 4.0 * u[k]) / h2;
            let e = if u[k] > 0.0 { (lap - 1.0).abs() } else { (lap - 1.0).max(0.0) };
            r = r.max(e).max(-u[k]);
        }
    }
    r
}

fn psor(g: &GridSpec, u: &mut [f64], omega: f64, tol: f64, max_sweeps: usize) -> (usize, f64) {
    let h2 = g.h * g.h;
    let nx = g.nx;
    let mut sweeps = 0;
    loop {
        for _ in 0..10 {
            for j in 1..g.ny - 1 {
                let row = j * nx;
                for k in row + 1..row + nx - 1 {
                    let target = 0.25 * (u[k + 1] + u[k - 1] + u[k + nx] + u[k - nx] - h2);
                    u[k] = ((1.0 - omega) * u[k] + omega * target).max(0.0);
                }
            }
        }
        sweeps += 10;
        let r = complementarity_residual(g, u);
        if r <= tol || sweeps >= max_sweeps {
            return (sweeps, r);
        }
    }
}

/// Projected SOR for `Δu = χ{u>0}` with Dirichlet data on the frame of
/// the grid, started from the solutions on successively coarser grids.
pub fn solve_obstacle(data: &dyn Fn([f64; 2]) -> f64, grid: GridSpec, opts: &ObstacleOptions) -> Result<ObstacleSolution> {
    if grid.nx < 3 || grid.ny < 3 {
        return Err(Error::input("obstacle grid needs interior nodes"));
    }
    let mut levels = vec![grid];
    loop {
        let g = *levels.last().unwrap();
        if g.nx % 2 == 0 || g.ny % 2 == 0 || g.nx < 17 || g.ny < 17 {
            break;
        }
        levels.push(GridSpec::new(g.origin, 2.0 * g.h, (g.nx + 1) / 2, (g.ny + 1) / 2)?);
    }
    for g in &levels {
        for j in 0..g.ny {
            for i in 0..g.nx {
                if g.is_frame(i, j) && data(g.point(i, j)) < 0.0 {
                    return Err(Error::input("obstacle boundary data must be nonnegative"));
                }
            }
        }
    }
    let mut u: Vec<f64> = Vec::new();
    let mut total = 0usize;
    let mut residual = 0.0;
    for (lvl, g) in levels.iter().enumerate().rev() {
        let mut next = vec![0.0; g.len()];
        if !u.is_empty() {
            let c = levels[lvl + 1];
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (ci, cj) = (i / 2, j / 2);
                    let at = |a: usize, b: usize| u[c.idx(a.min(c.nx - 1), b.min(c.ny - 1))];
                    next[g.idx(i, j)] = match (i % 2, j % 2) {
                        (0, 0) => at(ci, cj),
                        (1, 0) => 0.5 * (at(ci, cj) + at(ci + 1, cj)),
                        (0, 1) => 0.5 * (at(ci, cj) + at(ci, cj + 1)),
                        _ => 0.25 * (at(ci, cj) + at(ci + 1, cj) + at(ci, cj + 1) + at(ci + 1, cj + 1)),
                    };
                }
            }
        }
        for j in 0..g.ny {
            for i in 0..g.nx {
                if g.is_frame(i, j) {
                    next[g.idx(i, j)] = data(g.point(i, j));
                }
            }
        }
        let w = opts.omega.unwrap_or_else(|| crate::harmonic::optimal_omega(g));
        // |Δ_h u − 1| carries roundoff of order ε/h²
        let floor = 100.0 * f64::EPSILON / (g.h * g.h);
        let tol = if lvl == 0 { opts.tol.max(floor) } else { opts.tol.max(1e-8) };
        let (s, r) = psor(g, &mut next, w, tol, opts.max_sweeps);
        total += s;
        residual = r;
        if lvl == 0 && r > tol {
            return Err(Error::NoConvergence { iterations: total, residual: r });
        }
        u = next;
    }
    let field = ScalarField { grid, values: u, mask: vec![true; grid.len()], flagged: vec![false; grid.len()] };
    let mut sol = ObstacleSolution::from_field(field)?;
    sol.residual = residual;
    sol.sweeps = total;
    Ok(sol)
}

/// Projected SOR on `grid` alone, started from `start` (frame values are
/// replaced by the data).
pub fn solve_obstacle_from(
    data: &dyn Fn([f64; 2]) -> f64,
    start: &ScalarField,
    opts: &ObstacleOptions,
) -> Result<ObstacleSolution> {
    let g = start.grid;
    let mut u: Vec<f64> = start.values.iter().map(|v| v.max(0.0)).collect();
    for j in 0..g.ny {
        for i in 0..g.nx {
            if g.is_frame(i, j) {
                let d = data(g.point(i, j));
                if d < 0.0 {
                    return Err(Error::input("obstacle boundary data must be nonnegative"));
                }
                u[g.idx(i, j)] = d;
            }
        }
    }
    let w = opts.omega.unwrap_or_else(|| crate::harmonic::optimal_omega(&g));
    let tol = opts.tol.max(100.0 * f64::EPSILON / (g.h * g.h));
    let (sweeps, r) = psor(&g, &mut u, w, tol, opts.max_sweeps);
    if r > tol {
        return Err(Error::NoConvergence { iterations: sweeps, residual: r });
    }
    let field = ScalarField { grid: g, values: u, mask: vec![true; g.len()], flagged: vec![false; g.len()] };
    let mut sol = ObstacleSolution::from_field(field)?;
    sol.residual = r;
    sol.sweeps = sweeps;
    Ok(sol)
}

/// Distance from each node of `Ω` to the nearest node of `{u = 0}`,
/// capped at `cap`; nodes off `Ω` get zero.
pub fn contact_distance(sol: &ObstacleSolution, cap: f64) -> Vec<f64> {
    let g = sol.grid();
    let m = (cap / g.h).ceil() as isize;
    let mut dist: Vec<f64> = sol.omega.iter().map(|&o| if o { cap } else { 0.0 }).collect();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if sol.omega[k] || !g.neighbors4(i, j).any(|(a, b)| sol.omega[g.idx(a, b)]) {
                continue;
            }
            for dj in -m..=m {
                for di in -m..=m {
                    let (a, b) = (i as isize + di, j as isize + dj);
                    if a < 0 || b < 0 || a >= g.nx as isize || b >= g.ny as isize {
                        continue;
                    }
                    let q = g.idx(a as usize, b as usize);
                    let d = g.h * ((di * di + dj * dj) as f64).sqrt();
                    if d < dist[q] {
                        dist[q] = d;
                    }
                }
            }
        }
    }
    dist
}

/// Distance to `{u = 0}` or to the frame of the box, whichever is
/// smaller, capped at `margin + h`. Boxed data is generally incompatible
/// with `Δu = 1` at the corners, where second differences blow up.
pub fn clearance(sol: &ObstacleSolution, margin: f64) -> Vec<f64> {
    let g = sol.grid();
    let mut dist = contact_distance(sol, margin + g.h);
    for (k, d) in dist.iter_mut().enumerate() {
        let (i, j) = (k % g.nx, k / g.nx);
        let frame = g.h * i.min(j).min(g.nx - 1 - i).min(g.ny - 1 - j) as f64;
        *d = d.min(frame);
    }
    dist
}

/// Centered first differences on interior nodes.
fn first_differences(u: &ScalarField) -> (ScalarField, ScalarField) {
    let g = u.grid;
    let mut ux = ScalarField::zeros(g);
    let mut uy = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if g.is_frame(i, j) {
                ux.mask[k] = false;
                uy.mask[k] = false;
                continue;
            }
            ux.values[k] = (u.values[k + 1] - u.values[k - 1]) / (2.0 * g.h);
            uy.values[k] = (u.values[k + g.nx] - u.values[k - g.nx]) / (2.0 * g.h);
        }
    }
    (ux, uy)
}

/// `T = (x − u_x) + i u_y` and `S = (u_y − y) + i u_x` on `Ω`.
pub fn conjugate_pair(sol: &ObstacleSolution) -> (ComplexField, ComplexField) {
    let g = sol.grid();
    let (ux, uy) = first_differences(&sol.u);
    let mut t = ComplexField::from_fn(g, |_| Complex64::new(0.0, 0.0));
    let mut s = t.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let [x, y] = g.point(i, j);
            let ok = sol.omega[k] && ux.mask[k];
            t.re[k] = x - ux.values[k];
            t.im[k] = uy.values[k];
            s.re[k] = uy.values[k] - y;
            s.im[k] = ux.values[k];
            t.mask[k] = ok;
            s.mask[k] = ok;
        }
    }
    (t, s)
}

/// `T − iS − z` (pure algebra) and the Cauchy-Riemann residuals of `T`
/// and `S` at nodes at least `margin` from `{u = 0}`.
pub fn conjugate_report(sol: &ObstacleSolution, margin: f64, tol: f64) -> ResidualReport {
    let g = sol.grid();
    let (t, s) = conjugate_pair(sol);
    let mut rep = ResidualReport::new();
    let mut ident = Vec::new();
    for k in 0..g.len() {
        if t.mask[k] {
            let z = Complex64::new(g.x(k % g.nx), g.y(k / g.nx));
            let d = Complex64::new(t.re[k], t.im[k]) - Complex64::i() * Complex64::new(s.re[k], s.im[k]) - z;
            ident.push(d.norm());
        }
    }
    rep.push(Check::from_samples("identity", ident, 1e-12));
    let dist = clearance(sol, margin);
    let crt = cauchy_riemann_residual(&t);
    let crs = cauchy_riemann_residual(&s);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut diff = Vec::new();
    for k in 0..g.len() {
        if crt.mask[k] && !crt.flagged[k] && crs.mask[k] && dist[k] >= margin {
            a.push(crt.values[k]);
            b.push(crs.values[k]);
            diff.push(crt.values[k] - crs.values[k]);
        }
    }
    rep.push(Check::from_samples("cr_t", a, tol));
    rep.push(Check::from_samples("cr_s", b, tol));
    rep.push(Check::from_samples("cr_difference", diff, 1e-9));
    if sol.is_empty() {
        rep.warn("Ω is empty");
    }
    rep
}

/// `α₁ = u_yy dx − u_xy dy` and `α₂ = u_xy dx − u_xx dy` on `Ω`.
#[derive(Debug, Clone)]
pub struct ObstacleForms {
    pub alpha1: OneForm,
    pub alpha2: OneForm,
    /// Node where both potentials vanish.
    pub base: Option<(usize, usize)>,
}

pub fn obstacle_forms(sol: &ObstacleSolution) -> ObstacleForms {
    let g = sol.grid();
    let mask: Vec<bool> = (0..g.len()).map(|k| sol.uxx.mask[k] && !sol.uxx.flagged[k]).collect();
    let alpha1 = OneForm {
        grid: g,
        a: sol.uyy.values.clone(),
        b: sol.uxy.values.iter().map(|v| -v).collect(),
        mask: mask.clone(),
    };
    let alpha2 = OneForm {
        grid: g,
        a: sol.uxy.values.clone(),
        b: sol.uxx.values.iter().map(|v| -v).collect(),
        mask: mask.clone(),
    };
    // base near the top middle, where every test configuration is positive
    let base = nearest_active(&g, &mask, [0.5 * (g.origin[0] + g.x_max()), g.y_max()]);
    ObstacleForms { alpha1, alpha2, base }
}

/// Closedness of `α₁, α₂`, reconstruction of `x − u_x` and `u_y − y` by
/// path integration (constants fixed at the base), all at nodes at least
/// `margin` from `{u = 0}`; loop periods when `loop_circle` is given.
pub fn weierstrass_forms_obstacle(
    sol: &ObstacleSolution,
    margin: f64,
    loop_circle: Option<([f64; 2], f64)>,
    tol: f64,
) -> Result<(ObstacleForms, ResidualReport)> {
    let g = sol.grid();
    let forms = obstacle_forms(sol);
    let mut rep = ResidualReport::new();
    let Some(base) = forms.base else {
        rep.warn("no node with a full second-difference stencil in Ω");
        return Ok((forms, rep));
    };
    let dist = clearance(sol, margin);
    for (name, f) in [("closedness_alpha1", &forms.alpha1), ("closedness_alpha2", &forms.alpha2)] {
        let c = f.closedness_residual();
        let vals = (0..g.len()).filter(|&k| c.mask[k] && !c.flagged[k] && dist[k] >= margin).map(|k| c.values[k]);
        rep.push(Check::from_samples(name, vals, tol));
    }
    let (ux, uy) = first_differences(&sol.u);
    let kb = g.idx(base.0, base.1);
    let exact1 = |k: usize| g.x(k % g.nx) - ux.values[k];
    let exact2 = |k: usize| uy.values[k] - g.y(k / g.nx);
    let mut path = 0.0f64;
    for (name, form, exact) in [
        ("potential_alpha1", &forms.alpha1, &exact1 as &dyn Fn(usize) -> f64),
        ("potential_alpha2", &forms.alpha2, &exact2),
    ] {
        let pot = integrate_potential(form, base, 10.0 * g.h)?;
        path = path.max(pot.path_residual);
        let c0 = exact(kb);
        let vals = (0..g.len())
            .filter(|&k| pot.field.mask[k] && dist[k] >= margin)
            .map(|k| pot.field.values[k] - (exact(k) - c0));
        rep.push(Check::from_samples(name, vals, tol));
    }
    rep.push(Check::scalar("path_independence", path, tol));
    if let Some((c, r)) = loop_circle {
        let pts = circle_path(c, r, 512);
        for (name, f) in [("period_alpha1", &forms.alpha1), ("period_alpha2", &forms.alpha2)] {
            match integrate_form(f, &pts) {
                Ok(p) => rep.push(Check::scalar(name, p, tol)),
                Err(e) => rep.warn(format!("{name}: {e}")),
            }
        }
    }
    Ok((forms, rep))
}

/// Signed level for the free boundary: `√(2u)` on `Ω`, linear
/// extrapolation along grid lines at contact nodes next to `Ω`, `−h`
/// deeper in the contact set.
pub fn signed_level(sol: &ObstacleSolution) -> ScalarField {
    let g = sol.grid();
    let mut l = ScalarField::zeros(g);
    for k in 0..g.len() {
        l.values[k] = if sol.omega[k] { (2.0 * sol.u.values[k]).sqrt() } else { -g.h };
    }
    let base = l.values.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if sol.omega[k] {
                continue;
            }
            let mut sum = 0.0;
            let mut n = 0;
            for (di, dj) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)] {
                let step = |m: isize| -> Option<usize> {
                    let (a, b) = (i as isize + m * di, j as isize + m * dj);
                    (a >= 0 && b >= 0 && a < g.nx as isize && b < g.ny as isize).then(|| g.idx(a as usize, b as usize))
                };
                let Some(q) = step(1) else { continue };
                if !sol.omega[q] {
                    continue;
                }
                let est = match step(2) {
                    Some(q2) if sol.omega[q2] => 2.0 * base[q] - base[q2],
                    _ => base[q] - g.h,
                };
                sum += est.min(0.0);
                n += 1;
            }
            if n > 0 {
                l.values[k] = sum / n as f64;
            }
        }
    }
    l
}

/// Zero crossings of the signed level along grid edges, deduplicated.
pub fn boundary_samples(level: &ScalarField) -> Vec<[f64; 2]> {
    let g = level.grid;
    let mut out: Vec<[f64; 2]> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut add = |p: [f64; 2]| {
        let key = ((p[0] / g.h * 1e6).round() as i64, (p[1] / g.h * 1e6).round() as i64);
        if seen.insert(key) {
            out.push(p);
        }
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            for (a, b) in [(i + 1, j), (i, j + 1)] {
                if a >= g.nx || b >= g.ny {
                    continue;
                }
                let q = g.idx(a, b);
                let (la, lb) = (level.values[k], level.values[q]);
                let (pa, pb) = (g.point(i, j), g.point(a, b));
                let (pin, lin, pout, lout) = if la > 0.0 && lb <= 0.0 {
                    (pa, la, pb, lb)
                } else if lb > 0.0 && la <= 0.0 {
                    (pb, lb, pa, la)
                } else {
                    continue;
                };
                let t = lin / (lin - lout);
                add([pin[0] + t * (pout[0] - pin[0]), pin[1] + t * (pout[1] - pin[1])]);
            }
        }
    }
    out
}

/// Area of the disk `|p − c| ≤ r` inside `[x0,x1]×[y0,y1]`.
pub fn disk_rect_area(c: [f64; 2], r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (x0, x1, y0, y1) = (x0 - c[0], x1 - c[0], y0 - c[1], y1 - c[1]);
    let a = x0.max(-r);
    let b = x1.min(r);
    if a >= b || y0 >= r || y1 <= -r {
        return 0.0;
    }
    let prim = |x: f64| {
        let x = x.clamp(-r, r);
        0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
    };
    let mut br = vec![a, b];
    for y in [y0, y1] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            br.extend([s, -s].into_iter().filter(|&v| v > a && v < b));
        }
    }
    br.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut area = 0.0;
    for w in br.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let s = (r * r - m * m).max(0.0).sqrt();
        if y1.min(s) <= y0.max(-s) {
            continue;
        }
        let top = if y1 < s { y1 * (q - p) } else { prim(q) - prim(p) };
        let bot = if y0 > -s { y0 * (q - p) } else { -(prim(q) - prim(p)) };
        area += top - bot;
    }
    area
}

/// `|B_r(c) ∩ {ℓ > 0}| / |B_r|`, with boundary cells split `4 × 4`;
/// `None` when the disk leaves the grid box.
pub fn density(level: &ScalarField, c: [f64; 2], r: f64) -> Option<f64> {
    let g = level.grid;
    if c[0] - r < g.origin[0] || c[0] + r > g.x_max() || c[1] - r < g.origin[1] || c[1] + r > g.y_max() {
        return None;
    }
    const SUB: usize = 4;
    let i0 = ((c[0] - r - g.origin[0]) / g.h).floor().max(0.0) as usize;
    let i1 = (((c[0] + r - g.origin[0]) / g.h).ceil() as usize).min(g.nx - 1);
    let j0 = ((c[1] - r - g.origin[1]) / g.h).floor().max(0.0) as usize;
    let j1 = (((c[1] + r - g.origin[1]) / g.h).ceil() as usize).min(g.ny - 1);
    let mut area = 0.0;
    for j in j0..j1 {
        for i in i0..i1 {
            let (x0, y0) = (g.x(i), g.y(j));
            let (x1, y1) = (x0 + g.h, y0 + g.h);
            let near = [(c[0].clamp(x0, x1) - c[0]).hypot(c[1].clamp(y0, y1) - c[1])];
            if near[0] >= r {
                continue;
            }
            let corners = [g.idx(i, j), g.idx(i + 1, j), g.idx(i, j + 1), g.idx(i + 1, j + 1)].map(|k| level.values[k]);
            if corners.iter().all(|&v| v <= 0.0) {
                continue;
            }
            if corners.iter().all(|&v| v > 0.0) {
                area += disk_rect_area(c, r, x0, x1, y0, y1);
                continue;
            }
            let s = g.h / SUB as f64;
            for b in 0..SUB {
                for a in 0..SUB {
                    let (sx, sy) = (x0 + a as f64 * s, y0 + b as f64 * s);
                    let (fa, fb) = ((a as f64 + 0.5) / SUB as f64, (b as f64 + 0.5) / SUB as f64);
                    let v = (1.0 - fa) * (1.0 - fb) * corners[0]
                        + fa * (1.0 - fb) * corners[1]
                        + (1.0 - fa) * fb * corners[2]
                        + fa * fb * corners[3];
                    if v > 0.0 {
                        area += disk_rect_area(c, r, sx, sx + s, sy, sy + s);
                    }
                }
            }
        }
    }
    Some(area / (PI * r * r))
}

/// Density class of a free-boundary sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stratum {
    /// Density ½.
    Reg,
    /// Density 1.
    Sing,
    Unresolved,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundarySample {
    pub point: [f64; 2],
    /// Extrapolated density at `r → 0`.
    pub theta: f64,
    pub stratum: Stratum,
    /// Set when some radius left the grid box.
    pub clipped: bool,
}

/// Radii as multiples of `h`.
pub const DENSITY_RADII: [f64; 3] = [8.0, 16.0, 32.0];

/// Samples `∂{u > 0}` and classifies each sample by density, using a
/// least-squares line in `r` through the radii `radii` (multiples of `h`,
/// `DENSITY_RADII` by default).
pub fn stratify_boundary(sol: &ObstacleSolution, radii: &[f64]) -> Vec<BoundarySample> {
    let level = signed_level(sol);
    let g = sol.grid();
    boundary_samples(&level)
        .into_iter()
        .map(|p| {
            let pts: Vec<(f64, f64)> = radii
                .iter()
                .filter_map(|m| density(&level, p, m * g.h).map(|t| (m * g.h, t)))
                .collect();
            let clipped = pts.len() < radii.len();
            if pts.len() < 2 {
                return BoundarySample { point: p, theta: f64::NAN, stratum: Stratum::Unresolved, clipped };
            }
            let theta = line_intercept(&pts).clamp(0.0, 1.0);
            let stratum = if (theta - 0.5).abs() <= 0.1 {
                Stratum::Reg
            } else if theta >= 0.9 {
                Stratum::Sing
            } else {
                Stratum::Unresolved
            };
            BoundarySample { point: p, theta, stratum, clipped }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnClass {
    /// `η⁺ − η⁻ > tol` with a contact node between.
    Open,
    /// `η⁺ − η⁻ ≤ tol` with a contact node.
    Pinched,
    /// No contact node; `u_y` changes sign inside `Ω`.
    Interior,
    /// Non-monotone sign pattern or missing runs.
    Flagged,
}

/// Per-column graphs `η⁺` (lower end of the top run of `u_y > 0`) and
/// `η⁻` (upper end of the bottom run of `u_y < 0`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeGraphs {
    pub x: Vec<f64>,
    pub eta_plus: Vec<f64>,
    pub eta_minus: Vec<f64>,
    pub class: Vec<ColumnClass>,
    pub tol: f64,
    /// Nodes contradicting `int{u = 0} = {η⁻ < y < η⁺}` within `4h` of
    /// the graphs, in columns where both graphs have slope at most 2.
    pub structure_mismatches: usize,
}

impl DerivativeGraphs {
    pub fn width(&self, c: usize) -> f64 {
        self.eta_plus[c] - self.eta_minus[c]
    }
}

/// Vertex of the parabola through `f(y0), f(y0 + s), f(y0 + 2s)`.
fn vertex(y0: f64, s: f64, f: [f64; 3]) -> Option<f64> {
    let d1 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * s);
    let d2 = (f[0] - 2.0 * f[1] + f[2]) / (s * s);
    (d2 > 0.0).then(|| y0 - d1 / d2)
}

pub fn derivative_graphs(sol: &ObstacleSolution, tol: f64) -> DerivativeGraphs {
    let g = sol.grid();
    let h = g.h;
    let ny = g.ny;
    let mut out = DerivativeGraphs {
        x: Vec::new(),
        eta_plus: Vec::new(),
        eta_minus: Vec::new(),
        class: Vec::new(),
        tol,
        structure_mismatches: 0,
    };
    let mut mismatches = Vec::new();
    for i in 1..g.nx - 1 {
        let u = |j: usize| sol.u.values[g.idx(i, j)];
        let om = |j: usize| sol.omega[g.idx(i, j)];
        let uy = |j: usize| if om(j) { (u(j + 1) - u(j - 1)) / (2.0 * h) } else { 0.0 };
        let mut top = ny - 2;
        while top >= 1 && uy(top) > 0.0 {
            top -= 1;
        }
        let jp = top + 1; // lowest node of the positive run
        let mut bot = 1;
        while bot <= ny - 2 && uy(bot) < 0.0 {
            bot += 1;
        }
        let jm = bot - 1; // highest node of the negative run
        let has_contact = (jm + 1..jp).any(|j| !om(j));
        let mut class = if (jm + 1..jp).any(|j| om(j)) || jm >= jp {
            ColumnClass::Flagged
        } else if has_contact {
            ColumnClass::Open
        } else {
            ColumnClass::Interior
        };
        let ep = if jp > ny - 2 {
            // contact reaches the top of the box
            if om(ny - 1) { None } else { Some(g.y_max() + h) }
        } else if jp + 2 < ny {
            vertex(g.y(jp), h, [u(jp), u(jp + 1), u(jp + 2)])
        } else {
            None
        };
        let em = if jm < 1 {
            if om(0) { None } else { Some(g.origin[1] - h) }
        } else if jm >= 2 {
            vertex(g.y(jm), -h, [u(jm), u(jm - 1), u(jm - 2)])
        } else {
            None
        };
        let (mut ep, mut em) = match (ep, em) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                class = ColumnClass::Flagged;
                (f64::NAN, f64::NAN)
            }
        };
        if ep < em {
            let m = 0.5 * (ep + em);
            ep = m;
            em = m;
        }
        if class == ColumnClass::Open && ep - em <= tol {
            class = ColumnClass::Pinched;
        }
        let mut bad = 0;
        if matches!(class, ColumnClass::Open | ColumnClass::Pinched) {
            for j in 0..ny {
                let y = g.y(j);
                let inside = y > em + h && y < ep - h;
                let near_out = (y > ep + h && y < ep + 4.0 * h) || (y < em - h && y > em - 4.0 * h);
                if (inside && om(j)) || (near_out && !om(j)) {
                    bad += 1;
                }
            }
        }
        mismatches.push(bad);
        out.x.push(g.x(i));
        out.eta_plus.push(ep);
        out.eta_minus.push(em);
        out.class.push(class);
    }
    // a vertical band says nothing where the free boundary is steep
    let n = out.x.len();
    let steep = |e: &[f64], c: usize| {
        let l = if c > 0 { (e[c] - e[c - 1]).abs() } else { 0.0 };
        let r = if c + 1 < n { (e[c + 1] - e[c]).abs() } else { 0.0 };
        !(l.max(r) <= 2.0 * h)
    };
    out.structure_mismatches =
        (0..n).filter(|&c| !steep(&out.eta_plus, c) && !steep(&out.eta_minus, c)).map(|c| mismatches[c]).sum();
    out
}

/// One branching point per maximal run of pinched columns that borders an
/// open column and carries a density-one sample: the midpoint of the
/// refined open/pinched transitions (the single transition when only one
/// side is open).
pub fn branching_points_obstacle(graphs: &DerivativeGraphs, samples: &[BoundarySample], h: f64) -> BranchingSet {
    let n = graphs.x.len();
    let tol = graphs.tol;
    let transition = |p: usize, o: usize| {
        let (wp, wo) = (graphs.width(p), graphs.width(o));
        let t = if wo > wp { ((tol - wp) / (wo - wp)).clamp(0.0, 1.0) } else { 0.5 };
        graphs.x[p] + t * (graphs.x[o] - graphs.x[p])
    };
    let mut points = Vec::new();
    let mut c = 0;
    while c < n {
        if graphs.class[c] != ColumnClass::Pinched {
            c += 1;
            continue;
        }
        let c0 = c;
        while c + 1 < n && graphs.class[c + 1] == ColumnClass::Pinched {
            c += 1;
        }
        let c1 = c;
        c += 1;
        let left = (c0 > 0 && graphs.class[c0 - 1] == ColumnClass::Open).then(|| transition(c0, c0 - 1));
        let right = (c1 + 1 < n && graphs.class[c1 + 1] == ColumnClass::Open).then(|| transition(c1, c1 + 1));
        let x = match (left, right) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => continue,
        };
        let ylo = (c0..=c1).map(|k| graphs.eta_minus[k]).fold(f64::INFINITY, f64::min) - 2.0 * h;
        let yhi = (c0..=c1).map(|k| graphs.eta_plus[k]).fold(f64::NEG_INFINITY, f64::max) + 2.0 * h;
        let sing = samples.iter().any(|s| {
            s.stratum == Stratum::Sing
                && s.point[0] >= graphs.x[c0] - 2.0 * h
                && s.point[0] <= graphs.x[c1] + 2.0 * h
                && s.point[1] >= ylo
                && s.point[1] <= yhi
        });
        if sing {
            points.push(x);
        }
    }
    BranchingSet { points, tolerance: tol, h }
}

/// Largest `β` (to `step`) in `[lo, hi]` for which the pinched-strip data
/// `½((|y| − a)₊)² + β(1 − x²)` keeps a contact node at the centre of the
/// grid. Contact at `lo` and none at `hi` are required.
pub fn critical_pinch(a: f64, grid: GridSpec, lo: f64, hi: f64, step: f64, opts: &ObstacleOptions) -> Result<(f64, ObstacleSolution)> {
    let centre = grid.idx(grid.nx / 2, grid.ny / 2);
    // the bracket only needs the contact sign at the centre
    let loose = ObstacleOptions { tol: opts.tol.max(1e-6), ..*opts };
    let solve_at = |beta: f64, start: Option<&ScalarField>, o: &ObstacleOptions| {
        let d = ObstacleData::Pinched { a, beta };
        match start {
            Some(s) => solve_obstacle_from(&|p| d.value(p), s, o),
            None => solve_obstacle(&|p| d.value(p), grid, o),
        }
    };
    let mut best = solve_at(lo, None, &loose)?;
    if best.omega[centre] {
        return Err(Error::input(format!("no contact at the centre for beta = {lo}")));
    }
    let top = solve_at(hi, Some(&best.u), &loose)?;
    if !top.omega[centre] {
        return Err(Error::input(format!("contact persists at the centre for beta = {hi}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > step {
        let mid = 0.5 * (lo + hi);
        let s = solve_at(mid, Some(&best.u), &loose)?;
        if s.omega[centre] {
            hi = mid;
        } else {
            lo = mid;
            best = s;
        }
    }
    let sol = solve_at(lo, Some(&best.u), opts)?;
    Ok((lo, sol))
}

/// Masked copy without the flagged samples.
fn clean(f: &ScalarField) -> ScalarField {
    let mut c = f.clone();
    for k in 0..c.values.len() {
        c.mask[k] = c.mask[k] && !c.flagged[k];
        c.flagged[k] = false;
    }
    c
}

/// Inward unit normal of `Ω` at `p` from the bilinear gradient of the
/// signed level.
fn inward_normal(level: &ScalarField, p: [f64; 2]) -> Option<[f64; 2]> {
    let g = level.grid;
    let (fx, fy) = g.frac(p);
    let i = (fx.floor().max(0.0) as usize).min(g.nx - 2);
    let j = (fy.floor().max(0.0) as usize).min(g.ny - 2);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let v = |a: usize, b: usize| level.values[g.idx(i + a, j + b)];
    let gx = ((v(1, 0) - v(0, 0)) * (1.0 - ty) + (v(1, 1) - v(0, 1)) * ty) / g.h;
    let gy = ((v(0, 1) - v(0, 0)) * (1.0 - tx) + (v(1, 1) - v(1, 0)) * tx) / g.h;
    let n = gx.hypot(gy);
    (n > 0.0).then(|| [gx / n, gy / n])
}

/// Eligibility threshold for `e·ν` in `boundary_condition_check`.
pub const MIN_E_DOT_NU: f64 = 0.1;

/// Offsets along the normal, in units of `h`, for the one-sided
/// evaluation in `boundary_condition_check`.
pub const BC_OFFSETS: [f64; 3] = [4.0, 6.0, 8.0];

/// Value at zero of the least-squares line through `pts`.
fn line_intercept(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx).powi(2)).sum();
    my - sxy / sxx * mx
}

/// `|∇u_e|² − e·∇u_e` at Reg samples with `e·ν > 0.1`, extrapolated to
/// the boundary from one-sided evaluations at `BC_OFFSETS` along the
/// inward normal (at least two clean stencils required).
pub fn boundary_condition_check(sol: &ObstacleSolution, samples: &[BoundarySample], e: [f64; 2], tol: f64) -> ResidualReport {
    let mut rep = ResidualReport::new();
    let per = boundary_condition_samples(sol, samples, e);
    let unresolved = samples.iter().filter(|s| s.stratum == Stratum::Unresolved).count();
    let excluded = per.iter().filter(|p| p.1.is_none()).count();
    let vals: Vec<f64> = per.iter().filter_map(|p| p.1).collect();
    if vals.is_empty() {
        rep.warn("no Reg sample with e·ν > 0.1");
    }
    let mut c = Check::from_samples("boundary_condition", vals, tol);
    c.excluded = excluded + unresolved;
    rep.push(c);
    if unresolved > 0 {
        rep.warn(format!("{unresolved} unresolved density samples excluded"));
    }
    rep
}

/// Per eligible sample (Reg, `e·ν > 0.1`): its point and the extrapolated
/// residual, `None` without two clean stencils.
pub fn boundary_condition_samples(sol: &ObstacleSolution, samples: &[BoundarySample], e: [f64; 2]) -> Vec<([f64; 2], Option<f64>)> {
    let g = sol.grid();
    let level = signed_level(sol);
    let (hxx, hxy, hyy) = (clean(&sol.uxx), clean(&sol.uxy), clean(&sol.uyy));
    let en = e[0].hypot(e[1]);
    let e = [e[0] / en, e[1] / en];
    let mut out = Vec::new();
    for s in samples.iter().filter(|s| s.stratum == Stratum::Reg) {
        let Some(nu) = inward_normal(&level, s.point) else {
            out.push((s.point, None));
            continue;
        };
        if e[0] * nu[0] + e[1] * nu[1] <= MIN_E_DOT_NU {
            continue;
        }
        let pts: Vec<(f64, f64)> = BC_OFFSETS
            .iter()
            .filter_map(|&c| {
                let q = [s.point[0] + c * g.h * nu[0], s.point[1] + c * g.h * nu[1]];
                let (a, b, d) = (hxx.bilinear(q)?, hxy.bilinear(q)?, hyy.bilinear(q)?);
                let he = [a * e[0] + b * e[1], b * e[0] + d * e[1]];
                Some((c, he[0] * he[0] + he[1] * he[1] - (e[0] * he[0] + e[1] * he[1])))
            })
            .collect();
        out.push((s.point, (pts.len() >= 2).then(|| line_intercept(&pts))));
    }
    out
}

/// Consistency of the density labels with the graphs: the largest graph
/// gap `η⁺ − η⁻` in the column of a Sing sample, and the number of Reg
/// samples in a column whose gap is below `tol` but that has no open
/// neighbour within `4h` (so `η⁻ = η⁺` there).
pub fn strata_consistency(graphs: &DerivativeGraphs, samples: &[BoundarySample], h: f64) -> ResidualReport {
    let mut rep = ResidualReport::new();
    let col = |x: f64| -> Option<usize> {
        let c = ((x - graphs.x[0]) / h).round();
        (c >= 0.0 && (c as usize) < graphs.x.len()).then_some(c as usize)
    };
    let mut sing_gap = Vec::new();
    let mut reg_bad = 0usize;
    let mut reg_n = 0usize;
    for s in samples {
        let Some(c) = col(s.point[0]) else { continue };
        match s.stratum {
            Stratum::Sing => {
                let w = graphs.width(c);
                if w.is_finite() {
                    sing_gap.push(w);
                }
            }
            Stratum::Reg => {
                reg_n += 1;
                let lo = c.saturating_sub(4);
                let hi = (c + 4).min(graphs.x.len() - 1);
                let pinched_only = (lo..=hi).all(|k| graphs.class[k] == ColumnClass::Pinched);
                reg_bad += pinched_only as usize;
            }
            Stratum::Unresolved => {}
        }
    }
    rep.push(Check::from_samples("sing_graph_gap", sing_gap, graphs.tol));
    let mut c = Check::scalar("reg_in_pinched", reg_bad as f64, 0.0);
    c.samples = reg_n;
    rep.push(c);
    rep.push(Check::scalar("structure_mismatches", graphs.structure_mismatches as f64, 0.0));
    rep
}

/// Dominant eigenvector of the second differences averaged over clean
/// nodes within `radius` of `centre`.
pub fn blowup_direction(sol: &ObstacleSolution, centre: [f64; 2], radius: f64) -> Option<[f64; 2]> {
    let g = sol.grid();
    let mut m = [0.0; 3];
    let mut n = 0usize;
    for k in 0..g.len() {
        if !sol.uxx.mask[k] || sol.uxx.flagged[k] {
            continue;
        }
        let p = [g.x(k % g.nx), g.y(k / g.nx)];
        if (p[0] - centre[0]).hypot(p[1] - centre[1]) > radius {
            continue;
        }
        m[0] += sol.uxx.values[k];
        m[1] += sol.uxy.values[k];
        m[2] += sol.uyy.values[k];
        n += 1;
    }
    if n == 0 {
        return None;
    }
    // eigenvector of the larger eigenvalue of [[a, b], [b, c]]
    let (a, b, c) = (m[0], m[1], m[2]);
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    Some([theta.cos(), theta.sin()])
}

/// Rotates the data so that `dir` becomes `e₂`, by bilinear resampling
/// (nodes whose preimage leaves the box keep their value). Returns the
/// input unchanged when the angle is below `1e-6`.
pub fn rotate_to_vertical(sol: &ObstacleSolution, dir: [f64; 2], centre: [f64; 2]) -> Result<ObstacleSolution> {
    let mut angle = PI / 2.0 - dir[1].atan2(dir[0]);
    // the direction is only defined up to sign
    if angle > PI / 2.0 {
        angle -= PI;
    } else if angle < -PI / 2.0 {
        angle += PI;
    }
    if angle.abs() < 1e-6 {
        return Ok(sol.clone());
    }
    let g = sol.grid();
    let (cs, sn) = (angle.cos(), angle.sin());
    let mut u = sol.u.clone();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let [x, y] = g.point(i, j);
            let (dx, dy) = (x - centre[0], y - centre[1]);
            // preimage under the rotation by `angle`
            let q = [centre[0] + cs * dx + sn * dy, centre[1] - sn * dx + cs * dy];
            if let Some(v) = sol.u.bilinear(q) {
                u.values[g.idx(i, j)] = v.max(0.0);
            }
        }
    }
    ObstacleSolution::from_field(u)
}

/// Chart `T± = (x − u_x, u_y)` on `{±u_y > 0}` carrying `u_y − y`, with
/// the closed Jacobian `|∇u_y|²`. Only nodes with their four neighbours
/// in `Ω` are sampled; each vertical run is extended by three nodes
/// across the free boundary.
pub fn obstacle_chart(sol: &ObstacleSolution, phase: Phase) -> Result<Chart> {
    let g = sol.grid();
    let sign = if phase == Phase::Plus { 1.0 } else { -1.0 };
    let (ux, uy) = first_differences(&sol.u);
    let mut closed = ScalarField::zeros(g);
    for k in 0..g.len() {
        closed.values[k] = sol.uxy.values[k].powi(2) + sol.uyy.values[k].powi(2);
        closed.mask[k] = sol.uxx.mask[k] && !sol.uxx.flagged[k];
    }
    let mut s = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            s.mask[k] = !g.is_frame(i, j)
                && sol.omega[k]
                && g.neighbors4(i, j).all(|(a, b)| sol.omega[g.idx(a, b)])
                && sign * uy.values[k] > 0.0;
        }
    }
    let mut t = s.clone();
    let mut w = s.clone();
    for k in 0..g.len() {
        s.values[k] = g.x(k % g.nx) - ux.values[k];
        t.values[k] = uy.values[k];
        w.values[k] = uy.values[k] - g.y(k / g.nx);
    }
    let (s, t, w) = (extend_vertical(&s, 3), extend_vertical(&t, 3), extend_vertical(&w, 3));
    let domain = s.mask.clone();
    from_fields(phase, s, t, w, Some(closed), &domain, J_MIN)
}

/// Linear two-membrane pair `w± = Re S ∘ T±⁻¹` on `[−a, a] × [−b, b]`
/// around the origin of the `(s, t)` plane. Harmonicity and the gradient
/// identity are measured on rows with `|t| ≥ margin`. On the thin line
/// `∂_t w±` comes from the identity `∂_t w = 1 − u_yy/|∇u_y|²`, evaluated
/// one-sidedly as in `boundary_condition_check`.
pub fn obstacle_membrane(sol: &ObstacleSolution, a: f64, b: f64, margin: f64, tol: f64) -> Result<(MembraneState, ResidualReport)> {
    let g = sol.grid();
    let plus = obstacle_chart(sol, Phase::Plus)?;
    let minus = obstacle_chart(sol, Phase::Minus)?;
    let (window, row0) = membrane_window(a, b, g.h)?;
    let st = build_membrane(&plus, &minus, MembraneKind::Linear, window, row0, g.h)?;
    let mut rep = ResidualReport::new();
    let h2 = g.h * g.h;
    let lap = |w: &ScalarField, i: usize, j: usize| -> Option<f64> {
        let v = |di: isize, dj: isize| w.get_offset(i, j, di, dj);
        Some((v(1, 0)? + v(-1, 0)? + v(0, 1)? + v(0, -1)? - 4.0 * v(0, 0)?) / h2)
    };
    let mut hp = Vec::new();
    let mut hm = Vec::new();
    for j in 1..window.ny - 1 {
        let t = window.y(j);
        for i in 1..window.nx - 1 {
            if t >= margin {
                hp.extend(lap(&st.w_plus, i, j));
            } else if t <= -margin {
                hm.extend(lap(&st.w_minus, i, j));
            }
        }
    }
    rep.push(Check::from_samples("harmonicity_plus", hp, tol));
    rep.push(Check::from_samples("harmonicity_minus", hm, tol));
    // ∂_t w± = 1 − u_yy / |∇u_y|² at the trace source, extrapolated
    // from one-sided evaluations into {±u_y > 0}
    let (hxy, hyy) = (clean(&sol.uxy), clean(&sol.uyy));
    let dt_at = |src: [f64; 2], sign: f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = BC_OFFSETS
            .iter()
            .filter_map(|&c| {
                let q = [src[0], src[1] + sign * c * g.h];
                let (bxy, byy) = (hxy.bilinear(q)?, hyy.bilinear(q)?);
                let n = bxy * bxy + byy * byy;
                (n > J_MIN).then(|| (c, 1.0 - byy / n))
            })
            .collect();
        (pts.len() >= 2).then(|| line_intercept(&pts))
    };
    let trace_dt = |i: usize| -> (Option<f64>, Option<f64>) {
        (
            st.trace_source_plus[i].and_then(|p| dt_at(p, 1.0)),
            st.trace_source_minus[i].and_then(|p| dt_at(p, -1.0)),
        )
    };
    let mut order = Vec::new();
    let mut neu = Vec::new();
    let mut comp = Vec::new();
    for i in 0..window.nx {
        let k = window.idx(i, row0);
        if !st.d.mask[k] {
            continue;
        }
        let d = st.d.values[k];
        order.push((-d).max(0.0));
        let (dp, dm) = trace_dt(i);
        for v in [dp, dm].into_iter().flatten() {
            comp.push(d * v);
            if d > st.contact_tol {
                neu.push(v);
            }
        }
    }
    rep.push(Check::from_samples("ordering", order, tol));
    rep.push(Check::from_samples("neumann_trace", neu, tol));
    rep.push(Check::from_samples("complementarity", comp, tol * tol));
    let mut ident = Vec::new();
    for j in 0..window.ny {
        if window.y(j).abs() < margin {
            continue;
        }
        for i in 0..window.nx {
            let k = window.idx(i, j);
            let (chart, grad) = if j >= row0 {
                if !st.grad_plus[0].mask[k] {
                    continue;
                }
                (&plus, [st.grad_plus[0].values[k], st.grad_plus[1].values[k]])
            } else {
                let km = window.idx(i, st.mirror(j));
                if !st.grad_minus_reflected[0].mask[km] {
                    continue;
                }
                (&minus, [st.grad_minus_reflected[0].values[km], -st.grad_minus_reflected[1].values[km]])
            };
            let inv = chart.invert(window.point(i, j));
            if !inv.converged {
                continue;
            }
            let (Some(bxy), Some(byy)) = (hxy.bilinear(inv.source), hyy.bilinear(inv.source)) else { continue };
            let q = bxy * bxy + byy * byy;
            if q <= J_MIN {
                continue;
            }
            let f = [bxy / q, -byy / q + 1.0];
            ident.push((grad[0] - f[0]).hypot(grad[1] - f[1]));
        }
    }
    rep.push(Check::from_samples("gradient_identity", ident, tol));
    if st.flagged > 0 {
        rep.warn(format!("{} window nodes without a chart preimage", st.flagged));
    }
    Ok((st, rep))
}
