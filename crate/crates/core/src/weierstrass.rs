//! Weierstrass data of a two-phase solution, the integrated minimal
//! surfaces and the capillary checks on their boundaries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bernoulli::{graph_at, TwoPhaseSolution};
use crate::complex::{complex_gradient, integrate_potential, nearest_active};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, OneForm, ScalarField};
use crate::interp::{extend_vertical, smooth_sample};
use crate::report::{Check, ResidualReport};

/// Default flatness threshold.
pub const FLATNESS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub fn sign(self) -> f64 {
        match self {
            Phase::Plus => 1.0,
            Phase::Minus => -1.0,
        }
    }
}

/// Free-boundary trace in the parameter plane, one sample per abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub abscissae: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Derivative of the boundary point of the phase plane with respect to
    /// the abscissa.
    pub tangents: Vec<Complex64>,
}

/// Weierstrass data `(f, g)` of one phase.
///
/// The surface is parametrized over `g.grid`. When `dzeta` is present the
/// parameter is `z` and the phase plane coordinate is `ζ = F(z)` with
/// `dζ = F'(z) dz`; otherwise the parameter is the phase plane itself.
#[derive(Debug, Clone)]
pub struct WeierstrassData {
    pub phase: Phase,
    pub f: f64,
    pub g: ComplexField,
    pub v: ScalarField,
    pub dzeta: Option<ComplexField>,
    /// Closure of the phase in the parameter grid.
    pub domain: Vec<bool>,
    pub trace: Trace,
    pub base: [f64; 2],
    pub warnings: Vec<String>,
}

impl WeierstrassData {
    pub fn grid(&self) -> GridSpec {
        self.g.grid
    }

    fn dzeta_at(&self, k: usize) -> Complex64 {
        match &self.dzeta {
            Some(d) => Complex64::new(d.re[k], d.im[k]),
            None => Complex64::new(1.0, 0.0),
        }
    }
}

/// Scaled phase functions and their complex gradients:
/// `v⁺ = Λ⁻^{-1/2} u⁺`, `v⁻ = Λ⁺^{-1/2} u⁻` (kept nonpositive),
/// `f⁺ = 1/λ`, `f⁻ = λ`.
pub fn build_data(sol: &TwoPhaseSolution, flatness_threshold: f64) -> Result<(WeierstrassData, WeierstrassData)> {
    let mut warnings = Vec::new();
    if sol.flatness > flatness_threshold {
        warnings.push(format!(
            "flatness {:.3e} exceeds the threshold {:.3e}; the capillary construction is not guaranteed",
            sol.flatness, flatness_threshold
        ));
    }
    let plus = phase_data(sol, Phase::Plus, warnings.clone())?;
    let minus = phase_data(sol, Phase::Minus, warnings)?;
    Ok((plus, minus))
}

fn phase_data(sol: &TwoPhaseSolution, phase: Phase, warnings: Vec<String>) -> Result<WeierstrassData> {
    let g = sol.grid();
    let (mask, scale, eta, f) = match phase {
        Phase::Plus => (&sol.omega_plus, sol.lambda_minus.powf(-0.5), &sol.eta_plus, 1.0 / sol.lambda),
        Phase::Minus => (&sol.omega_minus, sol.lambda_plus.powf(-0.5), &sol.eta_minus, sol.lambda),
    };
    let v = sol.u.map(|x| scale * x).with_mask(mask.clone());
    // ghost layers across the free boundary keep centered stencils on it
    let v = extend_vertical(&v, 3);
    let gfield = complex_gradient(&v)?;
    let side = phase.sign();
    let domain: Vec<bool> = (0..g.len())
        .map(|k| {
            let (i, j) = (k % g.nx, k / g.nx);
            gfield.mask[k] && !gfield.flagged[k] && side * (g.y(j) - eta[i]) >= -1e-12
        })
        .collect();
    let abscissae: Vec<f64> = (0..g.nx).map(|i| g.x(i)).collect();
    let points = abscissae.iter().map(|&x| [x, graph_at(&g, eta, x)]).collect();
    let tangents = (0..g.nx)
        .map(|i| {
            let s = if i > 0 && i + 1 < g.nx {
                (eta[i + 1] - eta[i - 1]) / (2.0 * g.h)
            } else if i == 0 {
                (eta[1] - eta[0]) / g.h
            } else {
                (eta[i] - eta[i - 1]) / g.h
            };
            Complex64::new(1.0, s)
        })
        .collect();
    Ok(WeierstrassData {
        phase,
        f,
        g: gfield,
        v,
        dzeta: None,
        domain,
        trace: Trace { abscissae, points, tangents },
        base: [0.0, 0.0],
        warnings,
    })
}

/// Weierstrass integrands `(½f(1−g²), (i/2)f(1+g²), f g)`.
pub fn integrands(f: f64, g: Complex64) -> [Complex64; 3] {
    let g2 = g * g;
    let i = Complex64::new(0.0, 1.0);
    [0.5 * f * (1.0 - g2), 0.5 * f * i * (1.0 + g2), f * g]
}

/// The same integrands assembled in real arithmetic from `∇v = (a, b)`,
/// i.e. the coefficient pairs of the forms `α₁`, `α₂` with `Re(φ dz) =
/// p dx + q dy`.
pub fn form_coefficients(f: f64, a: f64, b: f64) -> [(f64, f64); 2] {
    [
        (0.5 * f * (1.0 - a * a + b * b), -f * a * b),
        (f * a * b, -0.5 * f * (1.0 + a * a - b * b)),
    ]
}

/// Stereographic Gauss map with the downward choice:
/// `ν = (−2 Re g, −2 Im g, 1 − |g|²) / (1 + |g|²)`.
pub fn gauss_normal(g: Complex64) -> [f64; 3] {
    let m = g.norm_sqr();
    let d = 1.0 + m;
    [-2.0 * g.re / d, -2.0 * g.im / d, (1.0 - m) / d]
}

/// `(1 − Q)/(1 + Q)`, the vertical normal component for `|g|² = Q`.
pub fn vertical_normal(q: f64) -> f64 {
    (1.0 - q) / (1.0 + q)
}

/// Surface samples along the free-boundary trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrace {
    pub abscissae: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub tangents: Vec<Complex64>,
    /// `(ψ₁, ψ₂, x₃)` with `x₃` from integration; `None` where the
    /// interpolation stencil is missing.
    pub psi: Vec<Option<[f64; 3]>>,
    pub x3_closed: Vec<Option<f64>>,
    /// Normal from the differentiated mesh.
    pub mesh_normal: Vec<Option<[f64; 3]>>,
    /// Normal from the Gauss map of the data.
    pub gauss_normal: Vec<Option<[f64; 3]>>,
}

#[derive(Debug, Clone)]
pub struct WeierstrassSurface {
    pub phase: Phase,
    pub f: f64,
    /// `ψ₁, ψ₂` and the integrated `x₃`.
    pub psi: [ScalarField; 3],
    /// `x₃ = f v`.
    pub x3_closed: ScalarField,
    /// `ψ₁, ψ₂` as potentials of the real forms `α₁, α₂`.
    pub psi_forms: [ScalarField; 2],
    pub domain: Vec<bool>,
    pub base: (usize, usize),
    pub path_residual: f64,
    pub trace: SurfaceTrace,
}

impl WeierstrassSurface {
    pub fn grid(&self) -> GridSpec {
        self.psi[0].grid
    }

    /// `(Ψ_x, Ψ_y)` at a point from the bicubic interpolants.
    pub fn tangent_vectors(&self, p: [f64; 2]) -> Option<([f64; 3], [f64; 3])> {
        let mut tx = [0.0; 3];
        let mut ty = [0.0; 3];
        for c in 0..3 {
            let s = smooth_sample(&self.psi[c], p)?;
            tx[c] = s.dx;
            ty[c] = s.dy;
        }
        Some((tx, ty))
    }

    /// `−(Ψ_x × Ψ_y)/|Ψ_x × Ψ_y|`, the downward normal of the mesh.
    pub fn mesh_normal(&self, p: [f64; 2]) -> Option<[f64; 3]> {
        let (a, b) = self.tangent_vectors(p)?;
        let n = cross(a, b);
        let l = norm3(n);
        (l > 0.0).then(|| [-n[0] / l, -n[1] / l, -n[2] / l])
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

/// `Ψ = Re ∫ (½f(1−g²), (i/2)f(1+g²), f g) dζ` from the base point, plus
/// the same first two coordinates from the real forms.
pub fn integrate_surface(data: &WeierstrassData) -> Result<WeierstrassSurface> {
    let grid = data.grid();
    let n = grid.len();
    let mut mask = data.g.mask.clone();
    if let Some(d) = &data.dzeta {
        for k in 0..n {
            mask[k] &= d.mask[k];
        }
    }
    let mut forms: Vec<OneForm> = (0..5)
        .map(|_| OneForm { grid, a: vec![0.0; n], b: vec![0.0; n], mask: mask.clone() })
        .collect();
    for k in 0..n {
        if !mask[k] {
            continue;
        }
        let g = Complex64::new(data.g.re[k], data.g.im[k]);
        let dz = data.dzeta_at(k);
        for (c, phi) in integrands(data.f, g).into_iter().enumerate() {
            let w = phi * dz;
            forms[c].a[k] = w.re;
            forms[c].b[k] = -w.im;
        }
        // real route: coefficients in phase-plane coordinates, pulled back
        for (c, (p, q)) in form_coefficients(data.f, g.re, -g.im).into_iter().enumerate() {
            forms[3 + c].a[k] = p * dz.re + q * dz.im;
            forms[3 + c].b[k] = -p * dz.im + q * dz.re;
        }
    }
    let mut base_mask = mask.clone();
    for k in 0..n {
        base_mask[k] &= data.domain[k];
    }
    let base = nearest_active(&grid, &base_mask, data.base)
        .ok_or_else(|| Error::input("no parameter node for the integration base point"))?;
    let period_tol = 10.0 * grid.h;
    let mut pots = Vec::with_capacity(5);
    let mut path_residual: f64 = 0.0;
    for form in &forms {
        let p = integrate_potential(form, base, period_tol)?;
        path_residual = path_residual.max(p.path_residual);
        pots.push(p.field);
    }
    let kb = grid.idx(base.0, base.1);
    let x3_base = data.f * data.v.values[kb];
    pots[2].values.iter_mut().for_each(|x| *x += x3_base);
    let mut x3_closed = data.v.map(|x| data.f * x);
    x3_closed.mask = pots[2].mask.clone();
    let mut it = pots.into_iter();
    let psi = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    let psi_forms = [it.next().unwrap(), it.next().unwrap()];
    let mut surface = WeierstrassSurface {
        phase: data.phase,
        f: data.f,
        psi,
        x3_closed,
        psi_forms,
        domain: data.domain.clone(),
        base,
        path_residual,
        trace: SurfaceTrace {
            abscissae: data.trace.abscissae.clone(),
            points: data.trace.points.clone(),
            tangents: data.trace.tangents.clone(),
            psi: Vec::new(),
            x3_closed: Vec::new(),
            mesh_normal: Vec::new(),
            gauss_normal: Vec::new(),
        },
    };
    let re = data.g.real_part();
    let im = data.g.imag_part();
    for &p in &data.trace.points {
        let psi = (|| {
            Some([
                smooth_sample(&surface.psi[0], p)?.value,
                smooth_sample(&surface.psi[1], p)?.value,
                smooth_sample(&surface.psi[2], p)?.value,
            ])
        })();
        surface.trace.psi.push(psi);
        surface.trace.x3_closed.push(smooth_sample(&surface.x3_closed, p).map(|s| s.value));
        surface.trace.mesh_normal.push(surface.mesh_normal(p));
        let gn = match (smooth_sample(&re, p), smooth_sample(&im, p)) {
            (Some(a), Some(b)) => Some(gauss_normal(Complex64::new(a.value, b.value))),
            _ => None,
        };
        surface.trace.gauss_normal.push(gn);
    }
    Ok(surface)
}

/// Gauss-map normal of the data on the surface domain.
pub fn normal_field(surface: &WeierstrassSurface, data: &WeierstrassData) -> [ScalarField; 3] {
    let grid = data.grid();
    let mut out = [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)];
    for k in 0..grid.len() {
        let on = surface.domain[k] && data.g.mask[k];
        let nu = gauss_normal(Complex64::new(data.g.re[k], data.g.im[k]));
        for c in 0..3 {
            out[c].values[k] = nu[c];
            out[c].mask[k] = on;
            out[c].flagged[k] = data.g.flagged[k];
        }
    }
    out
}

/// Mean curvature from the first and second fundamental forms with
/// centered differences; `None` without a full 3x3 stencil.
pub fn mean_curvature_at(surface: &WeierstrassSurface, i: usize, j: usize) -> Option<f64> {
    let h = surface.grid().h;
    let at = |di: isize, dj: isize| -> Option<[f64; 3]> {
        Some([
            surface.psi[0].get_offset(i, j, di, dj)?,
            surface.psi[1].get_offset(i, j, di, dj)?,
            surface.psi[2].get_offset(i, j, di, dj)?,
        ])
    };
    let c = at(0, 0)?;
    let (e, w, nn, s) = (at(1, 0)?, at(-1, 0)?, at(0, 1)?, at(0, -1)?);
    let (ne, nw, se, sw) = (at(1, 1)?, at(-1, 1)?, at(1, -1)?, at(-1, -1)?);
    let mut px = [0.0; 3];
    let mut py = [0.0; 3];
    let mut pxx = [0.0; 3];
    let mut pyy = [0.0; 3];
    let mut pxy = [0.0; 3];
    for k in 0..3 {
        px[k] = (e[k] - w[k]) / (2.0 * h);
        py[k] = (nn[k] - s[k]) / (2.0 * h);
        pxx[k] = (e[k] - 2.0 * c[k] + w[k]) / (h * h);
        pyy[k] = (nn[k] - 2.0 * c[k] + s[k]) / (h * h);
        pxy[k] = (ne[k] - nw[k] - se[k] + sw[k]) / (4.0 * h * h);
    }
    let n = cross(px, py);
    let ln = norm3(n);
    if ln == 0.0 {
        return None;
    }
    let n = [n[0] / ln, n[1] / ln, n[2] / ln];
    let (ee, ff, gg) = (dot3(px, px), dot3(px, py), dot3(py, py));
    let (l, m, nv) = (dot3(pxx, n), dot3(pxy, n), dot3(pyy, n));
    Some((ee * nv - 2.0 * ff * m + gg * l) / (2.0 * (ee * gg - ff * ff)))
}

/// Self-consistency of one surface: path independence, agreement of the
/// two potential routes, `x₃ = f v`, boundary inclusion and conformality.
pub fn surface_report(surface: &WeierstrassSurface, tol: f64) -> ResidualReport {
    let grid = surface.grid();
    let mut rep = ResidualReport::new();
    rep.push(Check::scalar("path_independence", surface.path_residual, tol));
    let on = |k: usize| surface.domain[k] && surface.psi[0].mask[k];
    let routes = (0..grid.len()).filter(|&k| on(k)).map(|k| {
        (surface.psi[0].values[k] - surface.psi_forms[0].values[k])
            .abs()
            .max((surface.psi[1].values[k] - surface.psi_forms[1].values[k]).abs())
    });
    rep.push(Check::from_samples("route_agreement", routes, tol));
    let x3 = (0..grid.len()).filter(|&k| on(k)).map(|k| surface.psi[2].values[k] - surface.x3_closed.values[k]);
    rep.push(Check::from_samples("x3_closed_form", x3, tol));
    let incl = surface.trace.psi.iter().flatten().map(|p| p[2]);
    rep.push(Check::from_samples("boundary_inclusion", incl, tol));
    let mut conf = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !on(grid.idx(i, j)) {
                continue;
            }
            if let Some((a, b)) = surface.tangent_vectors(grid.point(i, j)) {
                let scale = dot3(a, a).max(dot3(b, b)).max(f64::MIN_POSITIVE);
                conf.push(((dot3(a, a) - dot3(b, b)).abs() + 2.0 * dot3(a, b).abs()) / scale);
            }
        }
    }
    rep.push(Check::from_samples("conformality", conf, tol));
    rep
}

/// Expected boundary behaviour per trace sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CapillaryTargets {
    pub lambda: f64,
    /// `Some(true)` contact, `Some(false)` one-phase, `None` excluded.
    pub class: Vec<Option<bool>>,
    /// Expected `|g±|²` on the boundary.
    pub q_plus: Vec<f64>,
    pub q_minus: Vec<f64>,
}

/// Targets read off a two-phase solution: `|g⁺|² = Λ⁺/Λ⁻_ref`,
/// `|g⁻|² = Λ⁻/Λ⁺_ref` with the contact threshold `tol`.
pub fn capillary_targets(sol: &TwoPhaseSolution, tol: Option<f64>) -> CapillaryTargets {
    let g = sol.grid();
    let tol = tol.unwrap_or(crate::bernoulli::CONTACT_TOL_CELLS * g.h);
    let class = crate::bernoulli::column_classes(sol, tol);
    let q_plus = (0..g.nx).map(|i| sol.coef_plus([g.x(i), sol.eta_plus[i]]) / sol.lambda_minus).collect();
    let q_minus = (0..g.nx).map(|i| sol.coef_minus([g.x(i), sol.eta_minus[i]]) / sol.lambda_plus).collect();
    CapillaryTargets { lambda: sol.lambda, class, q_plus, q_minus }
}

fn interior_nodes(surface: &WeierstrassSurface) -> Vec<(usize, usize)> {
    let g = surface.grid();
    let mut out = Vec::new();
    for j in 1..g.ny - 1 {
        for i in 1..g.nx - 1 {
            let all = (-1isize..=1).all(|dj| {
                (-1isize..=1).all(|di| surface.domain[g.idx((i as isize + di) as usize, (j as isize + dj) as usize)])
            });
            if all {
                out.push((i, j));
            }
        }
    }
    out
}

/// Capillary system on the pair of surfaces: vanishing mean curvature,
/// the one-phase contact angle, the contact inequality and the
/// transmission condition. Normals come from the differentiated meshes.
pub fn verify_capillary(
    plus: &WeierstrassSurface,
    minus: &WeierstrassSurface,
    targets: &CapillaryTargets,
    tol: f64,
) -> ResidualReport {
    let mut rep = ResidualReport::new();
    for (name, s) in [("mean_curvature_plus", plus), ("mean_curvature_minus", minus)] {
        let h = interior_nodes(s).into_iter().filter_map(|(i, j)| mean_curvature_at(s, i, j));
        rep.push(Check::from_samples(name, h, tol));
    }
    let lam = targets.lambda;
    let mut one_phase = Vec::new();
    let mut inequality = Vec::new();
    let mut transmission = Vec::new();
    let mut missing = 0usize;
    for (k, class) in targets.class.iter().enumerate() {
        let np = plus.trace.mesh_normal[k];
        let nm = minus.trace.mesh_normal[k];
        let tp = vertical_normal(targets.q_plus[k]);
        let tm = vertical_normal(targets.q_minus[k]);
        match class {
            Some(false) => {
                for (n, t) in [(np, tp), (nm, tm)] {
                    match n {
                        Some(n) => one_phase.push(n[2] - t),
                        None => missing += 1,
                    }
                }
            }
            Some(true) => match (np, nm) {
                (Some(a), Some(b)) => {
                    inequality.push((a[2] - tp).max(0.0));
                    inequality.push((b[2] - tm).max(0.0));
                    transmission.push(lam * (1.0 + a[2]) - (1.0 + b[2]) / lam);
                }
                _ => missing += 1,
            },
            None => {}
        }
    }
    rep.push(Check::from_samples("contact_angle_one_phase", one_phase, tol));
    rep.push(Check::from_samples("contact_angle_inequality", inequality, tol));
    rep.push(Check::from_samples("transmission", transmission, tol));
    if missing > 0 {
        rep.warn(format!("{missing} boundary samples without a mesh normal"));
    }
    rep
}

/// Maximal runs of contact samples, as index ranges.
fn contact_runs(class: &[Option<bool>]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut k = 0;
    while k < class.len() {
        if class[k] == Some(true) {
            let s = k;
            while k < class.len() && class[k] == Some(true) {
                k += 1;
            }
            runs.push(s..k);
        } else {
            k += 1;
        }
    }
    runs
}

/// Boundary behaviour of the surfaces: coincidence `Ψ⁺ = Ψ⁻` on the
/// contact component of the base point, and on one-phase arcs the speed
/// `d(ψ₁ + iψ₂) = ½ f (1 + |g|²) dz̄`.
pub fn verify_boundary_transform(
    plus: &WeierstrassSurface,
    minus: &WeierstrassSurface,
    targets: &CapillaryTargets,
    tol: f64,
) -> ResidualReport {
    let mut rep = ResidualReport::new();
    let xs = &plus.trace.abscissae;
    let base_x = plus.grid().x(plus.base.0);
    let runs = contact_runs(&targets.class);
    let gap = |k: usize| -> Option<f64> {
        let (a, b) = (plus.trace.psi[k]?, minus.trace.psi[k]?);
        Some((0..3).map(|c| (a[c] - b[c]).abs()).fold(0.0, f64::max))
    };
    let mut coincidence = Vec::new();
    for run in &runs {
        let contains_base = xs[run.start] - 1e-12 <= base_x && base_x <= xs[run.end - 1] + 1e-12;
        let vals: Vec<f64> = run.clone().filter_map(gap).collect();
        if contains_base || runs.len() == 1 {
            coincidence.extend(vals);
        } else {
            let worst = vals.iter().cloned().fold(0.0, f64::max);
            rep.warn(format!(
                "contact component [{:.4}, {:.4}] away from the base point: |Ψ⁺ − Ψ⁻| = {worst:.3e}",
                xs[run.start],
                xs[run.end - 1]
            ));
        }
    }
    rep.push(Check::from_samples("coincidence", coincidence, tol));
    let lam = targets.lambda;
    let mut speed = Vec::new();
    let mut printed: f64 = 0.0;
    for (s, q) in [(plus, &targets.q_plus), (minus, &targets.q_minus)] {
        for k in 1..xs.len().saturating_sub(1) {
            if targets.class[k] != Some(false) {
                continue;
            }
            let (Some(a), Some(b)) = (s.trace.psi[k - 1], s.trace.psi[k + 1]) else {
                continue;
            };
            let dx = xs[k + 1] - xs[k - 1];
            let d = Complex64::new(b[0] - a[0], b[1] - a[1]) / dx;
            let t = s.trace.tangents[k];
            let c = 0.5 * s.f * (1.0 + q[k]);
            speed.push((d - c * t.conj()).norm() / t.norm());
            let c_printed = (1.0 + lam) / (2.0 * lam);
            printed = printed.max((d - c_printed * t.conj()).norm() / t.norm());
        }
    }
    rep.push(Check::from_samples("one_phase_speed", speed, tol));
    if printed > tol {
        rep.warn(format!("one-phase speed against the factor (1+λ)/(2λ): {printed:.3e}"));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::make_two_plane;

    fn pair(lp: f64, lm: f64, h: f64) -> (TwoPhaseSolution, WeierstrassData, WeierstrassData) {
        let g = GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, h).unwrap();
        let s = make_two_plane(lp, lm, g).unwrap();
        let (a, b) = build_data(&s, FLATNESS_THRESHOLD).unwrap();
        (s, a, b)
    }

    #[test]
    fn two_plane_data() {
        let (_, p, m) = pair(4.0, 1.0, 0.125);
        assert_eq!(p.f, 0.5);
        assert_eq!(m.f, 2.0);
        let g = p.grid();
        let (i, j) = g.nearest([0.25, 0.5]);
        assert!((p.g.at(i, j) - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        let (i, j) = g.nearest([0.25, -0.5]);
        assert!((m.g.at(i, j) - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        let (_, p, _) = pair(1.0, 1.0, 0.125);
        let (i, j) = g.nearest([0.0, 0.0]);
        assert!((p.g.at(i, j).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normals_from_the_gauss_map() {
        assert_eq!(gauss_normal(Complex64::new(0.0, 1.0))[2], 0.0);
        assert!((gauss_normal(Complex64::new(0.0, -2.0))[2] + 0.6).abs() < 1e-15);
        assert!((gauss_normal(Complex64::new(0.0, -0.5))[2] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn two_plane_surface_closed_forms() {
        let (s, p, m) = pair(4.0, 1.0, 0.0625);
        let sp = integrate_surface(&p).unwrap();
        let sm = integrate_surface(&m).unwrap();
        let g = p.grid();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let [x, y] = g.point(i, j);
                if sp.domain[k] {
                    assert!((sp.psi[0].values[k] - 1.25 * x).abs() < 1e-12);
                    assert!((sp.psi[1].values[k] - 0.75 * y).abs() < 1e-12);
                    assert!((sp.psi[2].values[k] - y).abs() < 1e-12);
                }
                if sm.domain[k] {
                    assert!((sm.psi[1].values[k] + 0.75 * y).abs() < 1e-12);
                }
            }
        }
        let t = capillary_targets(&s, None);
        let cap = verify_capillary(&sp, &sm, &t, 1e-10);
        assert!(cap.all_pass(), "{:?}", cap.failures());
        let bt = verify_boundary_transform(&sp, &sm, &t, 1e-10);
        assert!(bt.all_pass(), "{:?}", bt.failures());
        let sr = surface_report(&sp, 1e-10);
        assert!(sr.all_pass(), "{:?}", sr.failures());
    }

    #[test]
    fn symmetric_case_is_flat() {
        let (_, p, _) = pair(1.0, 1.0, 0.125);
        let sp = integrate_surface(&p).unwrap();
        for k in 0..sp.domain.len() {
            if sp.domain[k] {
                assert!(sp.psi[1].values[k].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn non_minimal_mesh_reports_curvature() {
        let (_, p, _) = pair(1.0, 1.0, 0.0625);
        let mut sp = integrate_surface(&p).unwrap();
        let g = p.grid();
        sp.psi[0] = ScalarField::from_fn(g, |x, _| x);
        sp.psi[1] = ScalarField::from_fn(g, |_, y| y);
        sp.psi[2] = ScalarField::from_fn(g, |x, y| 0.3 * (x * x + y * y));
        let h = interior_nodes(&sp).into_iter().filter_map(|(i, j)| mean_curvature_at(&sp, i, j));
        let c = Check::from_samples("h", h, 1e-6);
        assert!(!c.pass && c.sup > 0.1);
    }
}
