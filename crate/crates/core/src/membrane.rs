//! Charts `T = (ψ₁, f v)` of the capillary surfaces, the two-membrane
//! fields `w± = ψ₂ ∘ T⁻¹` and their reduction to a thin obstacle problem
//! for `d = w̃⁻ − w⁺`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::interp::smooth_sample;
use crate::report::{Check, ResidualReport};
use crate::weierstrass::{Phase, WeierstrassData, WeierstrassSurface};

/// Default lower bound for the chart Jacobian.
pub const J_MIN: f64 = 1e-3;

/// Forward samples of a planar chart over a parameter grid.
#[derive(Debug, Clone)]
pub struct Chart {
    pub phase: Phase,
    pub s: ScalarField,
    pub t: ScalarField,
    /// Field carried through the chart (`ψ₂` for the capillary charts).
    pub carried: ScalarField,
    /// `det DT` from centered differences.
    pub jacobian: ScalarField,
    /// `½ f² v_y (1 + |∇v|²)` pulled back to the parameter grid.
    pub jacobian_closed: ScalarField,
    pub jacobian_discrepancy: f64,
    /// Working region `{J > J_min}` within the surface domain.
    pub region: Vec<bool>,
    pub j_min: f64,
    index: Bucket,
}

/// Uniform bucketing of forward samples for Newton seeds.
#[derive(Debug, Clone)]
struct Bucket {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    items: Vec<Vec<usize>>,
    diam: f64,
}

impl Bucket {
    fn new(s: &ScalarField, t: &ScalarField, region: &[bool]) -> Bucket {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for k in 0..region.len() {
            if region[k] {
                lo = [lo[0].min(s.values[k]), lo[1].min(t.values[k])];
                hi = [hi[0].max(s.values[k]), hi[1].max(t.values[k])];
            }
        }
        let count = region.iter().filter(|&&r| r).count().max(1);
        let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let cell = (((hi[0] - lo[0]) * (hi[1] - lo[1]) / count as f64).sqrt() * 2.0).max(1e-12);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut items = vec![Vec::new(); nx * ny];
        let mut b = Bucket { origin: lo, cell, nx, ny, items: Vec::new(), diam };
        for k in 0..region.len() {
            if region[k] {
                let (a, c) = b.cell_of([s.values[k], t.values[k]]);
                items[c * nx + a].push(k);
            }
        }
        b.items = items;
        b
    }

    fn cell_of(&self, p: [f64; 2]) -> (usize, usize) {
        let a = ((p[0] - self.origin[0]) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let c = ((p[1] - self.origin[1]) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (a, c)
    }

    fn nearest(&self, s: &ScalarField, t: &ScalarField, p: [f64; 2]) -> Option<usize> {
        let (a, c) = self.cell_of(p);
        let mut best: Option<(usize, f64)> = None;
        let rmax = self.nx.max(self.ny);
        for r in 0..=rmax {
            for cc in c.saturating_sub(r)..=(c + r).min(self.ny - 1) {
                for aa in a.saturating_sub(r)..=(a + r).min(self.nx - 1) {
                    if aa.abs_diff(a) != r && cc.abs_diff(c) != r {
                        continue;
                    }
                    for &k in &self.items[cc * self.nx + aa] {
                        let d = (s.values[k] - p[0]).powi(2) + (t.values[k] - p[1]).powi(2);
                        if best.map_or(true, |(_, bd)| d < bd) {
                            best = Some((k, d));
                        }
                    }
                }
            }
            // one extra ring guarantees the nearest sample was seen
            if let Some((_, d)) = best {
                if d.sqrt() < r as f64 * self.cell {
                    break;
                }
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Builds the chart `T = (ψ₁, f v)` of a capillary surface, with the
/// carried field `ψ₂`.
pub fn build_chart(data: &WeierstrassData, surface: &WeierstrassSurface, j_min: f64) -> Result<Chart> {
    let grid = data.grid();
    let mut closed = ScalarField::zeros(grid);
    for k in 0..grid.len() {
        let g = num_complex::Complex64::new(data.g.re[k], data.g.im[k]);
        let scale = match &data.dzeta {
            Some(d) => d.re[k] * d.re[k] + d.im[k] * d.im[k],
            None => 1.0,
        };
        // v_t = −Im g in phase-plane coordinates
        closed.values[k] = 0.5 * data.f * data.f * (-g.im) * (1.0 + g.norm_sqr()) * scale;
        closed.mask[k] = data.g.mask[k];
    }
    let mut carried = surface.psi[1].clone();
    for k in 0..grid.len() {
        carried.mask[k] &= surface.psi[0].mask[k];
    }
    from_fields(
        data.phase,
        surface.psi[0].clone(),
        surface.x3_closed.clone(),
        carried,
        Some(closed),
        &surface.domain,
        j_min,
    )
}

/// Chart from arbitrary forward fields; `closed` is an optional
/// independent Jacobian.
pub fn from_fields(
    phase: Phase,
    s: ScalarField,
    t: ScalarField,
    carried: ScalarField,
    closed: Option<ScalarField>,
    domain: &[bool],
    j_min: f64,
) -> Result<Chart> {
    let grid = s.grid;
    let mut jac = ScalarField::zeros(grid);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            let d = (|| Some((s.dx_at(i, j)?, s.dy_at(i, j)?, t.dx_at(i, j)?, t.dy_at(i, j)?)))();
            match d {
                Some((sx, sy, tx, ty)) => {
                    jac.values[k] = sx.value * ty.value - sy.value * tx.value;
                    jac.flagged[k] = sx.one_sided || sy.one_sided || tx.one_sided || ty.one_sided;
                }
                None => jac.mask[k] = false,
            }
        }
    }
    let region: Vec<bool> = (0..grid.len()).map(|k| domain[k] && jac.mask[k] && jac.values[k] > j_min).collect();
    if !region.iter().any(|&r| r) {
        let floor = jac.values.iter().zip(&jac.mask).filter(|(_, &m)| m).map(|(&v, _)| v).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::DegenerateChart { floor });
    }
    let closed = closed.unwrap_or_else(|| jac.clone());
    let disc = (0..grid.len())
        .filter(|&k| region[k] && !jac.flagged[k] && closed.mask[k])
        .map(|k| (jac.values[k] - closed.values[k]).abs())
        .fold(0.0, f64::max);
    let index = Bucket::new(&s, &t, &region);
    Ok(Chart {
        phase,
        s,
        t,
        carried,
        jacobian: jac,
        jacobian_closed: closed,
        jacobian_discrepancy: disc,
        region,
        j_min,
        index,
    })
}

/// Outcome of a chart inversion at one target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inverse {
    pub source: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Chart {
    pub fn grid(&self) -> GridSpec {
        self.s.grid
    }

    /// Forward map and its differential at a parameter point.
    pub fn eval(&self, p: [f64; 2]) -> Option<([f64; 2], [[f64; 2]; 2])> {
        let a = smooth_sample(&self.s, p)?;
        let b = smooth_sample(&self.t, p)?;
        Some(([a.value, b.value], [[a.dx, a.dy], [b.dx, b.dy]]))
    }

    /// Image diameter, the scale of the inversion tolerance.
    pub fn diameter(&self) -> f64 {
        self.index.diam
    }

    /// Newton iteration on `T(x, y) = target` seeded by the nearest forward
    /// sample, with a halving line search.
    pub fn invert(&self, target: [f64; 2]) -> Inverse {
        let grid = self.grid();
        let tol = 1e-10 * self.index.diam.max(1.0);
        let Some(k0) = self.index.nearest(&self.s, &self.t, target) else {
            return Inverse { source: [f64::NAN; 2], residual: f64::INFINITY, iterations: 0, converged: false };
        };
        let mut p = grid.point(k0 % grid.nx, k0 / grid.nx);
        let resid = |p: [f64; 2]| -> Option<([f64; 2], [[f64; 2]; 2], f64)> {
            let (v, d) = self.eval(p)?;
            let r = [target[0] - v[0], target[1] - v[1]];
            Some((r, d, r[0].hypot(r[1])))
        };
        let Some((mut r, mut d, mut norm)) = resid(p) else {
            return Inverse { source: p, residual: f64::INFINITY, iterations: 0, converged: false };
        };
        for it in 0..40 {
            if norm <= tol {
                return Inverse { source: p, residual: norm, iterations: it, converged: true };
            }
            let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let step = [(d[1][1] * r[0] - d[0][1] * r[1]) / det, (-d[1][0] * r[0] + d[0][0] * r[1]) / det];
            let mut lam = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let q = [p[0] + lam * step[0], p[1] + lam * step[1]];
                if let Some((r2, d2, n2)) = resid(q) {
                    if n2 < norm {
                        p = q;
                        r = r2;
                        d = d2;
                        norm = n2;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Inverse { source: p, residual: norm, iterations: 40, converged: norm <= tol }
    }

    /// Gradient of the carried field with respect to the chart coordinates
    /// at a parameter point: solves `∇_{xy} c = ∇_{st} c · DT`.
    pub fn carried_gradient(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let (_, d) = self.eval(p)?;
        let c = smooth_sample(&self.carried, p)?;
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        if det == 0.0 {
            return None;
        }
        // [c_x, c_y] = [w_s, w_t] · [[s_x, s_y], [t_x, t_y]]
        let ws = (c.dx * d[1][1] - c.dy * d[1][0]) / det;
        let wt = (c.dy * d[0][0] - c.dx * d[0][1]) / det;
        Some([ws, wt])
    }
}

/// Inverts the chart at every target; non-converged points are flagged.
pub fn invert_chart(chart: &Chart, targets: &[[f64; 2]]) -> Vec<Inverse> {
    targets.iter().map(|&t| chart.invert(t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MembraneKind {
    /// Minimal-surface operator, `A(p) = p/√(1+|p|²)`.
    Nonlinear,
    /// Laplacian, `A(p) = p`.
    Linear,
}

impl MembraneKind {
    pub fn flux(self, p: [f64; 2]) -> [f64; 2] {
        match self {
            MembraneKind::Nonlinear => {
                let r = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
                [p[0] / r, p[1] / r]
            }
            MembraneKind::Linear => p,
        }
    }

    /// `DA(p)` as `(a11, a12, a22)`.
    pub fn flux_jacobian(self, p: [f64; 2]) -> [f64; 3] {
        match self {
            MembraneKind::Nonlinear => {
                let q = 1.0 + p[0] * p[0] + p[1] * p[1];
                let c = q.powf(-1.5);
                [c * (q - p[0] * p[0]), -c * p[0] * p[1], c * (q - p[1] * p[1])]
            }
            MembraneKind::Linear => [1.0, 0.0, 1.0],
        }
    }
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// `∫₀¹ DA(τ p⁻ + (1−τ) p⁺) dτ` by 8-point Gauss-Legendre.
pub fn integral_matrix(kind: MembraneKind, p_plus: [f64; 2], p_minus: [f64; 2]) -> [f64; 3] {
    let mut b = [0.0; 3];
    for (x, w) in GAUSS8 {
        let tau = 0.5 * (x + 1.0);
        let p = [tau * p_minus[0] + (1.0 - tau) * p_plus[0], tau * p_minus[1] + (1.0 - tau) * p_plus[1]];
        let a = kind.flux_jacobian(p);
        for c in 0..3 {
            b[c] += 0.5 * w * a[c];
        }
    }
    b
}

/// Eigenvalues of the symmetric matrix `(a11, a12, a22)`, ascending.
pub fn sym_eigen(b: [f64; 3]) -> (f64, f64) {
    let m = 0.5 * (b[0] + b[2]);
    let r = (0.25 * (b[0] - b[2]).powi(2) + b[1] * b[1]).sqrt();
    (m - r, m + r)
}

/// Two-membrane fields on a window of the `(s, t)` plane symmetric about
/// `t = 0`; row `row0` is the thin line.
#[derive(Debug, Clone)]
pub struct MembraneState {
    pub kind: MembraneKind,
    pub grid: GridSpec,
    pub row0: usize,
    /// `w⁺` on `t ≥ 0`.
    pub w_plus: ScalarField,
    /// `w⁻` on `t ≤ 0`.
    pub w_minus: ScalarField,
    /// `w̃⁻(s, t) = w⁻(s, −t)` on `t ≥ 0`.
    pub w_minus_reflected: ScalarField,
    /// `d = w̃⁻ − w⁺` on `t ≥ 0`.
    pub d: ScalarField,
    /// `∇w⁺` and `∇w̃⁻` on `t ≥ 0`, from the charts where available.
    pub grad_plus: [ScalarField; 2],
    pub grad_minus_reflected: [ScalarField; 2],
    /// `B = (b11, b12, b22)` on `t ≥ 0`.
    pub b: [ScalarField; 3],
    /// Source points of the trace samples, per phase.
    pub trace_source_plus: Vec<Option<[f64; 2]>>,
    pub trace_source_minus: Vec<Option<[f64; 2]>>,
    pub contact_tol: f64,
    /// Targets where the inversion failed.
    pub flagged: usize,
}

impl MembraneState {
    /// Row index of `−t` for a row of the window.
    pub fn mirror(&self, j: usize) -> usize {
        2 * self.row0 - j
    }

    /// Contact mask `{d ≤ tol}` on the thin line.
    pub fn contact(&self) -> Vec<bool> {
        (0..self.grid.nx).map(|i| self.d.at(i, self.row0) <= self.contact_tol).collect()
    }

    /// Fills reflection, difference and `B` from `w±` and the gradients.
    pub fn finish(&mut self) {
        let g = self.grid;
        for j in self.row0..g.ny {
            let jm = self.mirror(j);
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let km = g.idx(i, jm);
                let ok = self.w_plus.mask[k] && self.w_minus.mask[km];
                self.w_minus_reflected.values[k] = self.w_minus.values[km];
                self.w_minus_reflected.mask[k] = self.w_minus.mask[km];
                self.d.values[k] = self.w_minus.values[km] - self.w_plus.values[k];
                self.d.mask[k] = ok;
                let gok = ok && self.grad_plus[0].mask[k] && self.grad_minus_reflected[0].mask[k];
                let bm = if gok {
                    integral_matrix(
                        self.kind,
                        [self.grad_plus[0].values[k], self.grad_plus[1].values[k]],
                        [self.grad_minus_reflected[0].values[k], self.grad_minus_reflected[1].values[k]],
                    )
                } else {
                    [0.0; 3]
                };
                for c in 0..3 {
                    self.b[c].values[k] = bm[c];
                    self.b[c].mask[k] = gok;
                }
            }
        }
    }

    /// An empty state on a window; masks all off.
    pub fn empty(kind: MembraneKind, grid: GridSpec, row0: usize, contact_tol: f64) -> Result<MembraneState> {
        if 2 * row0 + 1 != grid.ny || grid.y(row0).abs() > 1e-9 * grid.h.max(1.0) {
            return Err(Error::input("membrane window must be symmetric about t = 0"));
        }
        let off = |g: GridSpec| {
            let mut f = ScalarField::zeros(g);
            f.mask.iter_mut().for_each(|m| *m = false);
            f
        };
        Ok(MembraneState {
            kind,
            grid,
            row0,
            w_plus: off(grid),
            w_minus: off(grid),
            w_minus_reflected: off(grid),
            d: off(grid),
            grad_plus: [off(grid), off(grid)],
            grad_minus_reflected: [off(grid), off(grid)],
            b: [off(grid), off(grid), off(grid)],
            trace_source_plus: vec![None; grid.nx],
            trace_source_minus: vec![None; grid.nx],
            contact_tol,
            flagged: 0,
        })
    }
}

/// Symmetric window `[−a, a] × [−b, b]` of spacing `h`, with `t = 0` a row.
pub fn membrane_window(a: f64, b: f64, h: f64) -> Result<(GridSpec, usize)> {
    let ni = (a / h).round() as usize;
    let nj = (b / h).round() as usize;
    let g = GridSpec::new([-(ni as f64) * h, -(nj as f64) * h], h, 2 * ni + 1, 2 * nj + 1)?;
    Ok((g, nj))
}

/// `w± = ψ₂ ∘ (T±)⁻¹` sampled on the window by chart inversion.
pub fn build_membrane(
    plus: &Chart,
    minus: &Chart,
    kind: MembraneKind,
    window: GridSpec,
    row0: usize,
    contact_tol: f64,
) -> Result<MembraneState> {
    let mut st = MembraneState::empty(kind, window, row0, contact_tol)?;
    let mut any = [false, false];
    for (side, chart) in [(0usize, plus), (1, minus)] {
        let rows: Vec<usize> = if side == 0 { (row0..window.ny).collect() } else { (0..=row0).collect() };
        for &j in &rows {
            for i in 0..window.nx {
                let k = window.idx(i, j);
                let target = window.point(i, j);
                let inv = chart.invert(target);
                if !inv.converged {
                    st.flagged += 1;
                    continue;
                }
                let (Some(w), Some(grad)) = (smooth_sample(&chart.carried, inv.source), chart.carried_gradient(inv.source))
                else {
                    st.flagged += 1;
                    continue;
                };
                any[side] = true;
                if side == 0 {
                    st.w_plus.values[k] = w.value;
                    st.w_plus.mask[k] = true;
                    st.grad_plus[0].values[k] = grad[0];
                    st.grad_plus[1].values[k] = grad[1];
                    st.grad_plus[0].mask[k] = true;
                    st.grad_plus[1].mask[k] = true;
                    if j == row0 {
                        st.trace_source_plus[i] = Some(inv.source);
                    }
                } else {
                    st.w_minus.values[k] = w.value;
                    st.w_minus.mask[k] = true;
                    // reflected gradient lives at the mirrored node
                    let km = window.idx(i, st.mirror(j));
                    st.grad_minus_reflected[0].values[km] = grad[0];
                    st.grad_minus_reflected[1].values[km] = -grad[1];
                    st.grad_minus_reflected[0].mask[km] = true;
                    st.grad_minus_reflected[1].mask[km] = true;
                    if j == row0 {
                        st.trace_source_minus[i] = Some(inv.source);
                    }
                }
            }
        }
    }
    if !any[0] || !any[1] {
        return Err(Error::input("membrane window lies outside a chart image"));
    }
    st.finish();
    Ok(st)
}

/// Second-order operator of the membrane at an interior node from
/// centered differences; `None` without a full 3x3 stencil.
fn operator_at(kind: MembraneKind, w: &ScalarField, i: usize, j: usize) -> Option<f64> {
    let h = w.grid.h;
    let v = |di: isize, dj: isize| w.get_offset(i, j, di, dj);
    let c = v(0, 0)?;
    let (e, ww, n, s) = (v(1, 0)?, v(-1, 0)?, v(0, 1)?, v(0, -1)?);
    let (ne, nw, se, sw) = (v(1, 1)?, v(-1, 1)?, v(1, -1)?, v(-1, -1)?);
    let ws = (e - ww) / (2.0 * h);
    let wt = (n - s) / (2.0 * h);
    let wss = (e - 2.0 * c + ww) / (h * h);
    let wtt = (n - 2.0 * c + s) / (h * h);
    let wst = (ne - nw - se + sw) / (4.0 * h * h);
    Some(match kind {
        MembraneKind::Linear => wss + wtt,
        MembraneKind::Nonlinear => {
            let q = 1.0 + ws * ws + wt * wt;
            ((1.0 + wt * wt) * wss - 2.0 * ws * wt * wst + (1.0 + ws * ws) * wtt) / q.powf(1.5)
        }
    })
}

/// Columns classified on the thin line: `Some(true)` contact,
/// `Some(false)` gap, `None` for transition samples and missing data.
fn trace_classes(st: &MembraneState) -> Vec<Option<bool>> {
    let g = st.grid;
    let raw: Vec<Option<bool>> = (0..g.nx)
        .map(|i| {
            let k = g.idx(i, st.row0);
            st.d.mask[k].then(|| st.d.values[k] <= st.contact_tol)
        })
        .collect();
    (0..g.nx)
        .map(|i| {
            let c = raw[i]?;
            let left = i == 0 || raw[i - 1] == Some(c);
            let right = i + 1 == g.nx || raw[i + 1] == Some(c);
            (left && right).then_some(c)
        })
        .collect()
}

/// Residuals of the two-membrane system. `neumann(phase, source)` is the
/// prescribed `−A(∇w±)·e_t` on the non-coincidence trace.
pub fn membrane_residuals(
    st: &MembraneState,
    neumann: &dyn Fn(Phase, [f64; 2]) -> f64,
    tol: f64,
) -> ResidualReport {
    let g = st.grid;
    let mut rep = ResidualReport::new();
    let mut op_plus = Vec::new();
    let mut op_minus = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            if j > st.row0 {
                if let Some(r) = operator_at(st.kind, &st.w_plus, i, j) {
                    op_plus.push(r);
                }
            } else if j < st.row0 {
                if let Some(r) = operator_at(st.kind, &st.w_minus, i, j) {
                    op_minus.push(r);
                }
            }
        }
    }
    rep.push(Check::from_samples("operator_plus", op_plus, tol));
    rep.push(Check::from_samples("operator_minus", op_minus, tol));
    let classes = trace_classes(st);
    let mut neu = Vec::new();
    let mut slack = Vec::new();
    let mut order = Vec::new();
    for i in 0..g.nx {
        let k = g.idx(i, st.row0);
        if st.d.mask[k] {
            order.push((-st.d.values[k]).max(0.0));
        }
        let Some(contact) = classes[i] else { continue };
        let (Some(sp), Some(sm)) = (st.trace_source_plus[i], st.trace_source_minus[i]) else { continue };
        let pp = [st.grad_plus[0].values[k], st.grad_plus[1].values[k]];
        let pm = [st.grad_minus_reflected[0].values[k], -st.grad_minus_reflected[1].values[k]];
        let np = -st.kind.flux(pp)[1];
        let nm = -st.kind.flux(pm)[1];
        let (tp, tm) = (neumann(Phase::Plus, sp), neumann(Phase::Minus, sm));
        if contact {
            slack.push((np - tp).max(0.0));
            slack.push((nm - tm).max(0.0));
        } else {
            neu.push(np - tp);
            neu.push(nm - tm);
        }
    }
    rep.push(Check::from_samples("neumann_trace", neu, tol));
    rep.push(Check::from_samples("coincidence_slack", slack, tol));
    rep.push(Check::from_samples("ordering", order, tol));
    rep
}

/// Result of the thin-obstacle reduction on the thin line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinObstacle {
    /// Maximal open runs of `{d > tol}` as `(s_first, s_last)`.
    pub components: Vec<(f64, f64)>,
    pub flux: Vec<Option<f64>>,
    /// Range of the sampled eigenvalues of `B` and the bounds they must
    /// respect.
    pub eigen_range: (f64, f64),
    pub eigen_bounds: (f64, f64),
}

/// Checks the variable-coefficient thin obstacle structure of `d`:
/// `div(B∇d) = 0` off the line, `d ≥ 0`, zero conormal flux off contact,
/// one-signed flux on contact and complementarity.
pub fn thin_obstacle_reduction(
    st: &MembraneState,
    ellipticity_floor: f64,
    tol: f64,
) -> Result<(ResidualReport, ThinObstacle)> {
    let g = st.grid;
    let ctol = st.contact_tol;
    let mut rep = ResidualReport::new();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut gmax: f64 = 0.0;
    let mut eig = Vec::new();
    for j in st.row0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            if !st.b[0].mask[k] {
                continue;
            }
            let (a, b) = sym_eigen([st.b[0].values[k], st.b[1].values[k], st.b[2].values[k]]);
            lo = lo.min(a);
            hi = hi.max(b);
            eig.push((a, b));
            for p in [&st.grad_plus, &st.grad_minus_reflected] {
                gmax = gmax.max(p[0].values[k].hypot(p[1].values[k]));
            }
        }
    }
    if eig.is_empty() {
        return Err(Error::input("no samples of B on the window"));
    }
    if lo < ellipticity_floor {
        return Err(Error::Ellipticity { eigenvalue: lo, floor: ellipticity_floor });
    }
    let bounds = match st.kind {
        MembraneKind::Nonlinear => ((1.0 + gmax * gmax).powf(-1.5), (1.0 + gmax * gmax).powf(-0.5)),
        MembraneKind::Linear => (1.0, 1.0),
    };
    let viol = eig.iter().map(|&(a, b)| (bounds.0 - a).max(b - bounds.1).max(0.0));
    rep.push(Check::from_samples("b_eigen_bounds", viol, tol));
    // div(B ∇d) with ∇d from centered differences of d
    let mut q = [ScalarField::zeros(g), ScalarField::zeros(g)];
    for j in st.row0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let (Some(dx), Some(dy)) = (st.d.dx_at(i, j), st.d.dy_at(i, j)) else {
                q[0].mask[k] = false;
                q[1].mask[k] = false;
                continue;
            };
            let ok = st.b[0].mask[k] && !dx.one_sided && !dy.one_sided;
            let b = [st.b[0].values[k], st.b[1].values[k], st.b[2].values[k]];
            q[0].values[k] = b[0] * dx.value + b[1] * dy.value;
            q[1].values[k] = b[1] * dx.value + b[2] * dy.value;
            q[0].mask[k] = ok;
            q[1].mask[k] = ok;
        }
    }
    for c in 0..2 {
        for j in 0..st.row0 {
            for i in 0..g.nx {
                q[c].mask[g.idx(i, j)] = false;
            }
        }
    }
    let mut div = Vec::new();
    for j in st.row0 + 1..g.ny {
        for i in 0..g.nx {
            let a = q[0].get_offset(i, j, 1, 0).zip(q[0].get_offset(i, j, -1, 0));
            let b = q[1].get_offset(i, j, 0, 1).zip(q[1].get_offset(i, j, 0, -1));
            if let (Some((e, w)), Some((n, s))) = (a, b) {
                div.push((e - w + n - s) / (2.0 * g.h));
            }
        }
    }
    rep.push(Check::from_samples("interior_equation", div, tol));
    let classes = trace_classes(st);
    let mut flux = vec![None; g.nx];
    let mut nonneg = Vec::new();
    let mut free = Vec::new();
    let mut sign = Vec::new();
    let mut comp = Vec::new();
    for i in 0..g.nx {
        let k = g.idx(i, st.row0);
        if !(st.d.mask[k] && st.b[0].mask[k]) {
            continue;
        }
        let d = st.d.values[k];
        let gd = [
            st.grad_minus_reflected[0].values[k] - st.grad_plus[0].values[k],
            st.grad_minus_reflected[1].values[k] - st.grad_plus[1].values[k],
        ];
        // outward conormal of {t > 0} on the line is −e_t
        let fl = -(st.b[1].values[k] * gd[0] + st.b[2].values[k] * gd[1]);
        flux[i] = Some(fl);
        nonneg.push((-d).max(0.0));
        comp.push(d * fl);
        match classes[i] {
            Some(false) => free.push(fl),
            Some(true) => sign.push((-fl).max(0.0)),
            None => {}
        }
    }
    rep.push(Check::from_samples("trace_nonnegative", nonneg, ctol));
    rep.push(Check::from_samples("flux_free", free, tol));
    rep.push(Check::from_samples("flux_sign", sign, ctol));
    rep.push(Check::from_samples("complementarity", comp, ctol * ctol));
    let mut components = Vec::new();
    let mut i = 0;
    while i < g.nx {
        let k = g.idx(i, st.row0);
        if st.d.mask[k] && st.d.values[k] > ctol {
            let s0 = i;
            while i < g.nx && st.d.mask[g.idx(i, st.row0)] && st.d.values[g.idx(i, st.row0)] > ctol {
                i += 1;
            }
            components.push((g.x(s0), g.x(i - 1)));
        } else {
            i += 1;
        }
    }
    Ok((rep, ThinObstacle { components, flux, eigen_range: (lo, hi), eigen_bounds: bounds }))
}

/// `w⁺(s, 0) − w⁻(s, 0) + c (η⁺ − η⁻)(x(s))` on the thin line, with the
/// gap evaluated at the plus-phase source abscissa.
pub fn ordering_identity(st: &MembraneState, c: f64, gap: &dyn Fn(f64) -> f64, tol: f64) -> Check {
    let g = st.grid;
    let vals = (0..g.nx).filter_map(|i| {
        let k = g.idx(i, st.row0);
        let src = st.trace_source_plus[i]?;
        st.d.mask[k].then(|| -st.d.values[k] + c * gap(src[0]))
    });
    Check::from_samples("ordering_identity", vals, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernoulli::make_two_plane;
    use crate::weierstrass::{build_data, integrate_surface, vertical_normal, FLATNESS_THRESHOLD};

    fn charts(lp: f64, lm: f64, h: f64) -> (Chart, Chart) {
        let g = GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, h).unwrap();
        let s = make_two_plane(lp, lm, g).unwrap();
        let (p, m) = build_data(&s, FLATNESS_THRESHOLD).unwrap();
        let sp = integrate_surface(&p).unwrap();
        let sm = integrate_surface(&m).unwrap();
        (build_chart(&p, &sp, J_MIN).unwrap(), build_chart(&m, &sm, J_MIN).unwrap())
    }

    #[test]
    fn two_plane_jacobian_and_inverse() {
        let (cp, _) = charts(4.0, 1.0, 0.0625);
        let g = cp.grid();
        for k in 0..g.len() {
            if cp.region[k] {
                assert!((cp.jacobian.values[k] - 1.25).abs() < 1e-12);
                assert!((cp.jacobian_closed.values[k] - 1.25).abs() < 1e-12);
            }
        }
        let inv = cp.invert([1.25 * 0.5, 0.5]);
        assert!(inv.converged);
        assert!((inv.source[0] - 0.5).abs() < 1e-10 && (inv.source[1] - 0.5).abs() < 1e-10);
        assert!(!cp.invert([40.0, 40.0]).converged);
        let (c1, _) = charts(1.0, 1.0, 0.0625);
        let inv = c1.invert([0.3, 0.2]);
        assert!((inv.source[0] - 0.3).abs() < 1e-10 && (inv.source[1] - 0.2).abs() < 1e-10);
    }

    #[test]
    fn degenerate_chart_is_rejected() {
        let g = GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, 0.125).unwrap();
        let s = ScalarField::from_fn(g, |x, _| x);
        let t = ScalarField::from_fn(g, |_, y| -y);
        let err = from_fields(Phase::Plus, s.clone(), t, s, None, &vec![true; g.len()], J_MIN).unwrap_err();
        assert!(matches!(err, Error::DegenerateChart { .. }));
    }

    #[test]
    fn two_plane_membrane() {
        let h = 1.0 / 32.0;
        let (cp, cm) = charts(4.0, 1.0, h);
        let (win, row0) = membrane_window(0.75, 0.5, h).unwrap();
        let st = build_membrane(&cp, &cm, MembraneKind::Nonlinear, win, row0, 4.0 * h * 1.25).unwrap();
        assert_eq!(st.flagged, 0);
        for k in 0..win.len() {
            if st.d.mask[k] {
                assert!(st.d.values[k].abs() < 1e-10);
                let t = win.y(k / win.nx);
                assert!((st.w_plus.values[k] - 0.75 * t).abs() < 1e-10);
                let (a, b) = sym_eigen([st.b[0].values[k], st.b[1].values[k], st.b[2].values[k]]);
                assert!((a - 0.512).abs() < 1e-9 && (b - 0.8).abs() < 1e-9, "{a} {b}");
            }
        }
        let lam = 2.0f64;
        let neumann = |p: Phase, _: [f64; 2]| match p {
            Phase::Plus => vertical_normal(lam * lam),
            Phase::Minus => vertical_normal(1.0 / (lam * lam)),
        };
        let rep = membrane_residuals(&st, &neumann, 1e-9);
        assert!(rep.all_pass(), "{:?}", rep.failures());
        let (rep, thin) = thin_obstacle_reduction(&st, 1e-6, 1e-9).unwrap();
        assert!(rep.all_pass(), "{:?}", rep.failures());
        assert!(thin.components.is_empty());
    }

    #[test]
    fn linear_gap_has_constant_flux() {
        let h = 1.0 / 16.0;
        let (win, row0) = membrane_window(1.0, 0.5, h).unwrap();
        let mut st = MembraneState::empty(MembraneKind::Linear, win, row0, 4.0 * h).unwrap();
        for j in 0..win.ny {
            for i in 0..win.nx {
                let k = win.idx(i, j);
                let t = win.y(j);
                if j >= row0 {
                    st.w_plus.values[k] = -0.5 * t - 0.5;
                    st.w_plus.mask[k] = true;
                    st.grad_plus[0].mask[k] = true;
                    st.grad_plus[1].values[k] = -0.5;
                    st.grad_plus[1].mask[k] = true;
                    st.grad_minus_reflected[0].mask[k] = true;
                    st.grad_minus_reflected[1].values[k] = 0.5;
                    st.grad_minus_reflected[1].mask[k] = true;
                }
                if j <= row0 {
                    st.w_minus.values[k] = -0.5 * t + 0.5;
                    st.w_minus.mask[k] = true;
                }
            }
        }
        st.finish();
        // d(s, t) = t + 1 > 0: one gap component, flux −1 everywhere
        let (_, thin) = thin_obstacle_reduction(&st, 1e-6, 1e-9).unwrap();
        assert_eq!(thin.components.len(), 1);
        assert!(thin.flux.iter().flatten().all(|&f| (f + 1.0).abs() < 1e-12));
    }

    #[test]
    fn gauss_rule_integrates_the_flux_difference() {
        let (p, m) = ([0.3, -0.2], [-0.1, 0.9]);
        let b = integral_matrix(MembraneKind::Nonlinear, p, m);
        let k = MembraneKind::Nonlinear;
        let lhs = [b[0] * (m[0] - p[0]) + b[1] * (m[1] - p[1]), b[1] * (m[0] - p[0]) + b[2] * (m[1] - p[1])];
        let (am, ap) = (k.flux(m), k.flux(p));
        let e0 = (lhs[0] - (am[0] - ap[0])).abs();
        assert!(e0 < 1e-9, "{e0}");
        assert!((lhs[1] - (am[1] - ap[1])).abs() < 1e-9);
    }
}
