//! Smooth non-analytic two-phase configurations with a prescribed
//! branching set: a flat profile `f` vanishing exactly on `K`, the
//! conformal map `Ψ_f = (v̄, v)` of its epigraph, and the odd two-phase
//! solution transported through it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bernoulli::{branching_set, TwoPhaseSolution, VariableCoefficients};
use crate::complex::{cauchy_riemann_residual, harmonic_conjugate};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, GridSpec, ScalarField};
use crate::harmonic::{solve_dirichlet_region, GraphRegion, SolverOptions};
use crate::interp::extend_vertical;
use crate::membrane::{from_fields, membrane_window, Chart};
use crate::weierstrass::{CapillaryTargets, Phase, Trace, WeierstrassData};

/// Sorted, pairwise disjoint closed intervals in `[−1, 1]`; degenerate
/// intervals are points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Validates and sorts; touching intervals are merged, overlapping
    /// ones are rejected.
    pub fn new(raw: &[(f64, f64)]) -> Result<IntervalUnion> {
        let mut iv = raw.to_vec();
        for &(a, b) in &iv {
            if !(a.is_finite() && b.is_finite()) || b < a {
                return Err(Error::input(format!("malformed interval [{a}, {b}]")));
            }
            if a < -1.0 || b > 1.0 {
                return Err(Error::input(format!("interval [{a}, {b}] leaves [-1, 1]")));
            }
        }
        iv.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            if let Some(last) = out.last_mut() {
                if a < last.1 {
                    return Err(Error::input(format!("intervals overlap at [{a}, {}]", last.1)));
                }
                if a == last.1 {
                    last.1 = b;
                    continue;
                }
            }
            out.push((a, b));
        }
        Ok(IntervalUnion { intervals: out })
    }

    /// Parses `[[a, b], ...]`.
    pub fn from_json(s: &str) -> Result<IntervalUnion> {
        let raw: Vec<Vec<f64>> = serde_json::from_str(s).map_err(|e| Error::input(format!("bad K: {e}")))?;
        let mut pairs = Vec::with_capacity(raw.len());
        for p in raw {
            match p.as_slice() {
                [a, b] => pairs.push((*a, *b)),
                [a] => pairs.push((*a, *a)),
                _ => return Err(Error::input("each component of K must be [a, b]")),
            }
        }
        IntervalUnion::new(&pairs)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Boundary points in the open interval `(−1, 1)`; a point component
    /// counts once.
    pub fn boundary(&self) -> Vec<f64> {
        let mut pts = Vec::new();
        for &(a, b) in &self.intervals {
            pts.push(a);
            if b > a {
                pts.push(b);
            }
        }
        pts.retain(|&p| p > -1.0 && p < 1.0);
        pts
    }

    fn hull(&self) -> Option<(f64, f64)> {
        Some((self.intervals.first()?.0, self.intervals.last()?.1))
    }
}

/// Flat non-positive profile vanishing exactly on `K`: on each bounded gap
/// `(a, b)` it is `−exp(−1/(x−a)²) exp(−1/(b−x)²)`, on the outer gaps only
/// the factor of the finite end is kept. Underflow is clamped to the
/// negative number of least magnitude.
pub fn flat_profile(k: &IntervalUnion, x: f64) -> f64 {
    let iv = &k.intervals;
    if iv.is_empty() {
        return clamp(-(-1.0f64).exp());
    }
    if k.contains(x) {
        return 0.0;
    }
    if iv.len() == 1 && iv[0] == (-1.0, 1.0) {
        return 0.0;
    }
    let left = iv.iter().rev().find(|&&(_, b)| b < x).map(|&(_, b)| b);
    let right = iv.iter().find(|&&(a, _)| a > x).map(|&(a, _)| a);
    // outside [−1, 1] a component touching ±1 keeps the profile at zero
    if (left == Some(1.0) && right.is_none()) || (right == Some(-1.0) && left.is_none()) {
        return 0.0;
    }
    let mut e = 0.0;
    if let Some(a) = left {
        e += 1.0 / ((x - a) * (x - a));
    }
    if let Some(b) = right {
        e += 1.0 / ((b - x) * (b - x));
    }
    clamp(-(-e).exp())
}

fn clamp(v: f64) -> f64 {
    if v > -f64::MIN_POSITIVE {
        -f64::MIN_POSITIVE
    } else {
        v
    }
}

/// Samples of the flat profile; warns when `K` covers `[−1, 1]`.
pub fn build_f(k: &IntervalUnion, xs: &[f64]) -> (Vec<f64>, Vec<String>) {
    let mut warnings = Vec::new();
    if k.intervals() == [(-1.0, 1.0)] {
        warnings.push("K covers [-1, 1]: the profile vanishes identically".to_string());
    }
    (xs.iter().map(|&x| flat_profile(k, x)).collect(), warnings)
}

/// Default height of the harmonic window above the profile.
pub const WINDOW_HEIGHT: f64 = 1.0;
/// Smallest admissible `|∇v|` on the boundary inside the verification range.
pub const HOPF_FLOOR: f64 = 0.1;
/// Distance kept between the verification range and the window sides.
const SIDE_MARGIN: f64 = 0.4;
/// Top of the verification range as a fraction of the window height.
const TOP_FRACTION: f64 = 0.6;

/// Harmonic `v` on `{y > f}` (with ghost rows below the boundary), its
/// conjugate and `F' = v_y + i v_x` for `F = v̄ + i v`.
#[derive(Debug, Clone)]
pub struct HalfBundle {
    pub k: IntervalUnion,
    pub grid: GridSpec,
    /// Index of the row `y = 0`.
    pub row0: usize,
    pub profile: Vec<f64>,
    pub v: ScalarField,
    pub vbar: ScalarField,
    pub dzeta: ComplexField,
    /// Half-width of the verification range.
    pub x_verify: f64,
    pub y_verify: f64,
    pub hopf_min: f64,
    pub conformality: f64,
    pub path_residual: f64,
    pub sweeps: usize,
    pub warnings: Vec<String>,
}

impl HalfBundle {
    /// Node lies in the verification range `|x| ≤ x_verify`, `0 ≤ y ≤ y_verify`.
    pub fn in_range(&self, i: usize, j: usize) -> bool {
        let [x, y] = self.grid.point(i, j);
        x.abs() <= self.x_verify + 1e-12 && j >= self.row0 && y <= self.y_verify + 1e-12
    }

    /// Columns of the row `y = 0` inside the verification range.
    pub fn trace_columns(&self) -> Vec<usize> {
        (0..self.grid.nx).filter(|&i| self.grid.x(i).abs() <= self.x_verify + 1e-12).collect()
    }
}

/// Solves for `v` with `v = 0` on `y = f(x)`, `v = y − mean f` on top and
/// linear data on the sides; everything else follows from `v`.
pub fn build_half_bundle(k: &IntervalUnion, h: f64, height: f64) -> Result<HalfBundle> {
    if !(h > 0.0) || !(height > 0.0) {
        return Err(Error::input("grid spacing and window height must be positive"));
    }
    let (lo, hi) = k.hull().unwrap_or((0.0, 0.0));
    let x_half = (-(lo - 0.5)).max(hi + 0.5).max(1.0);
    let fmin = (0..=((2.0 * x_half / h).round() as usize))
        .map(|n| flat_profile(k, -x_half + n as f64 * h))
        .fold(0.0, f64::min);
    let grid = GridSpec::aligned(-x_half, x_half, fmin - 2.0 * h, height, h)?;
    let row0 = grid.row_of(0.0).ok_or_else(|| Error::input("window misses the row y = 0"))?;
    let xs: Vec<f64> = (0..grid.nx).map(|i| grid.x(i)).collect();
    let (profile, mut warnings) = build_f(k, &xs);
    let mean_f = profile.iter().sum::<f64>() / profile.len() as f64;
    let top = grid.y_max();
    let (x0, x1) = (grid.x(0), grid.x(grid.nx - 1));
    let data = |p: [f64; 2]| -> f64 {
        let top_value = top - mean_f;
        if p[1] >= top - 1e-12 {
            return p[1] - mean_f;
        }
        if (p[0] - x0).abs() < 1e-12 || (p[0] - x1).abs() < 1e-12 {
            let fb = flat_profile(k, p[0]);
            return ((p[1] - fb) / (top - fb)).max(0.0) * top_value;
        }
        0.0
    };
    let region = GraphRegion { profile: |x: f64| flat_profile(k, x), below: false };
    let (v, info) = solve_dirichlet_region(grid, &region, &data, &SolverOptions::default())?;
    let v = extend_vertical(&v, 3);
    let (vx, vy) = v.gradient();
    let dzeta = ComplexField::from_parts(&vy, &vx);
    let conj = harmonic_conjugate(&v, [0.0, 0.0])?;
    let vbar = conj.field;

    let x_verify = x_half - SIDE_MARGIN;
    let y_verify = TOP_FRACTION * height;
    let mut bundle = HalfBundle {
        k: k.clone(),
        grid,
        row0,
        profile,
        v,
        vbar,
        dzeta,
        x_verify,
        y_verify,
        hopf_min: f64::INFINITY,
        conformality: 0.0,
        path_residual: conj.path_residual,
        sweeps: info.sweeps,
        warnings: Vec::new(),
    };
    // |∇v| on the lowest node of each column in range approximates the boundary gradient
    for i in bundle.trace_columns() {
        let j = (0..grid.ny).find(|&j| bundle.v.mask[grid.idx(i, j)] && !bundle.v.flagged[grid.idx(i, j)]);
        if let Some(j) = j {
            let kk = grid.idx(i, j);
            if bundle.dzeta.mask[kk] {
                let m = Complex64::new(bundle.dzeta.re[kk], bundle.dzeta.im[kk]).norm();
                bundle.hopf_min = bundle.hopf_min.min(m);
            }
        }
    }
    if bundle.hopf_min < HOPF_FLOOR {
        return Err(Error::WindowTooLarge { min_grad: bundle.hopf_min });
    }
    let f = ComplexField::from_parts(&bundle.vbar, &bundle.v);
    let cr = cauchy_riemann_residual(&f);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let kk = grid.idx(i, j);
            if bundle.in_range(i, j) && cr.mask[kk] && !cr.flagged[kk] {
                bundle.conformality = bundle.conformality.max(cr.values[kk].abs());
            }
        }
    }
    bundle.warnings.append(&mut warnings);
    Ok(bundle)
}

/// `f(x, −y)·sign` on the reflected grid.
fn mirror_scalar(f: &ScalarField, grid: GridSpec, sign: f64) -> ScalarField {
    let g = f.grid;
    let mut out = ScalarField::zeros(grid);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (a, b) = (g.idx(i, g.ny - 1 - j), grid.idx(i, j));
            out.values[b] = sign * f.values[a];
            out.mask[b] = f.mask[a];
            out.flagged[b] = f.flagged[a];
        }
    }
    out
}

fn reflected_grid(g: &GridSpec) -> Result<GridSpec> {
    GridSpec::new([g.origin[0], -g.y_max()], g.h, g.nx, g.ny)
}

/// Linear interpolation of nodal samples spaced `h` from `x0`.
fn row_linear(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    let t = ((x - x0) / h).clamp(0.0, (n - 1) as f64);
    let i = (t.floor() as usize).min(n.saturating_sub(2));
    let r = t - i as f64;
    if n == 1 {
        return values[0];
    }
    values[i] * (1.0 - r) + values[i + 1] * r
}

/// Inverse of an increasing piecewise-linear map sampled at `x0 + i h`.
fn invert_increasing(values: &[f64], x0: f64, h: f64, s: f64) -> Option<f64> {
    let n = values.len();
    if n < 2 || s < values[0] || s > values[n - 1] {
        return None;
    }
    let i = values.partition_point(|&v| v <= s).clamp(1, n - 1) - 1;
    let d = values[i + 1] - values[i];
    let r = if d > 0.0 { (s - values[i]) / d } else { 0.0 };
    Some(x0 + (i as f64 + r) * h)
}

/// Weierstrass data of `w = y ∘ Ψ_f⁻¹` pulled back to the `z`-plane:
/// `g = −i/F'`, `dζ = F' dz`, `f = 1`.
fn phase_data(
    phase: Phase,
    dzeta: &ComplexField,
    domain: Vec<bool>,
    row0: usize,
    columns: &[usize],
) -> WeierstrassData {
    let grid = dzeta.grid;
    let mut g = dzeta.clone();
    for k in 0..grid.len() {
        let d = Complex64::new(dzeta.re[k], dzeta.im[k]);
        let val = if dzeta.mask[k] && d.norm() > 0.0 { -Complex64::i() / d } else { Complex64::new(0.0, 0.0) };
        g.re[k] = val.re;
        g.im[k] = val.im;
        g.mask[k] &= d.norm() > 0.0;
    }
    let v = ScalarField::from_fn(grid, |_, y| y).with_mask(g.mask.clone());
    let abscissae: Vec<f64> = columns.iter().map(|&i| grid.x(i)).collect();
    let points = abscissae.iter().map(|&x| [x, 0.0]).collect();
    let tangents = columns.iter().map(|&i| dzeta.at(i, row0)).collect();
    WeierstrassData {
        phase,
        f: 1.0,
        g,
        v,
        dzeta: Some(dzeta.clone()),
        domain,
        trace: Trace { abscissae, points, tangents },
        base: [0.0, 0.0],
        warnings: Vec::new(),
    }
}

/// The assembled configuration: both phases' Weierstrass data on the
/// conformal parameter grid and the two-phase solution on the `(s, t)`
/// window.
#[derive(Debug, Clone)]
pub struct CounterexampleBundle {
    pub half: HalfBundle,
    pub plus: WeierstrassData,
    pub minus: WeierstrassData,
    pub targets: CapillaryTargets,
    pub solution: TwoPhaseSolution,
    /// Boundary abscissa `x` behind each `(s, t)` column.
    pub x_of_s: Vec<f64>,
    /// `sup |w⁺(s, t) + w⁻(s, −t)|`.
    pub oddness: f64,
    /// `sup |Λ⁺(s, 0) − Λ⁻(s, 0)|`.
    pub trace_agreement: f64,
    /// `(s, t)` nodes where a chart inversion failed.
    pub unresolved: usize,
    pub warnings: Vec<String>,
}

/// Phase sampled through the inverse chart: values of `y` at the source
/// clipped to the phase sign, and `|∇v|⁻²` at the source.
fn sample_phase(chart: &Chart, v: &ScalarField, target: [f64; 2], sign: f64) -> Option<(f64, f64)> {
    let inv = chart.invert(target);
    if !inv.converged {
        return None;
    }
    let w = if sign > 0.0 { inv.source[1].max(0.0) } else { inv.source[1].min(0.0) };
    let s = crate::interp::smooth_sample(v, inv.source)?;
    Some((w, 1.0 / (s.dx * s.dx + s.dy * s.dy)))
}

pub fn assemble_counterexample(k: &IntervalUnion, h: f64) -> Result<CounterexampleBundle> {
    assemble_with_height(k, h, WINDOW_HEIGHT)
}

pub fn assemble_with_height(k: &IntervalUnion, h: f64, height: f64) -> Result<CounterexampleBundle> {
    let half = build_half_bundle(k, h, height)?;
    let grid = half.grid;
    let row0 = half.row0;
    let columns = half.trace_columns();

    let dom_plus: Vec<bool> = (0..grid.len())
        .map(|kk| {
            let (i, j) = (kk % grid.nx, kk / grid.nx);
            half.in_range(i, j) && half.dzeta.mask[kk] && !half.dzeta.flagged[kk]
        })
        .collect();
    let plus = phase_data(Phase::Plus, &half.dzeta, dom_plus.clone(), row0, &columns);

    let mgrid = reflected_grid(&grid)?;
    let mrow0 = grid.ny - 1 - row0;
    let mut dz_minus = half.dzeta.clone();
    dz_minus.grid = mgrid;
    let mut dom_minus = vec![false; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (a, b) = (grid.idx(i, grid.ny - 1 - j), grid.idx(i, j));
            dz_minus.re[b] = half.dzeta.re[a];
            dz_minus.im[b] = -half.dzeta.im[a];
            dz_minus.mask[b] = half.dzeta.mask[a];
            dz_minus.flagged[b] = half.dzeta.flagged[a];
            dom_minus[b] = dom_plus[a];
        }
    }
    let minus = phase_data(Phase::Minus, &dz_minus, dom_minus, mrow0, &columns);

    let mut class: Vec<Option<bool>> = columns.iter().map(|&i| Some(half.profile[i] == 0.0)).collect();
    let raw = class.clone();
    for n in 0..class.len() {
        let left = n > 0 && raw[n - 1] != raw[n];
        let right = n + 1 < raw.len() && raw[n + 1] != raw[n];
        if left || right {
            class[n] = None;
        }
    }
    let q: Vec<f64> = columns.iter().map(|&i| 1.0 / half.dzeta.at(i, row0).norm_sqr()).collect();
    let targets = CapillaryTargets { lambda: 1.0, class, q_plus: q.clone(), q_minus: q };

    // charts Ψ_f = (v̄, v) and Ψ_{−f}(x, y) = (v̄, −v)(x, −y), carrying y
    let chart_domain: Vec<bool> = (0..grid.len()).map(|kk| half.v.mask[kk] && half.vbar.mask[kk]).collect();
    let ycarry = ScalarField::from_fn(grid, |_, y| y);
    let chart_plus = from_fields(
        Phase::Plus,
        half.vbar.clone(),
        half.v.clone(),
        ycarry,
        None,
        &chart_domain,
        1e-6,
    )?;
    let vbar_m = mirror_scalar(&half.vbar, mgrid, 1.0);
    let v_m = mirror_scalar(&half.v, mgrid, -1.0);
    let mdomain: Vec<bool> = (0..grid.len()).map(|kk| v_m.mask[kk] && vbar_m.mask[kk]).collect();
    let chart_minus = from_fields(
        Phase::Minus,
        vbar_m,
        v_m.clone(),
        ScalarField::from_fn(mgrid, |_, y| y),
        None,
        &mdomain,
        1e-6,
    )?;

    // (s, t) window inside the image of the verification range
    let row_vbar: Vec<f64> = (0..grid.nx).map(|i| half.vbar.at(i, row0)).collect();
    let row_v: Vec<f64> = (0..grid.nx).map(|i| half.v.at(i, row0)).collect();
    let x0 = grid.x(0);
    let s_lo = row_linear(&row_vbar, x0, h, -half.x_verify);
    let s_hi = row_linear(&row_vbar, x0, h, half.x_verify);
    let (sgrid, srow0) = membrane_window(s_hi.min(-s_lo) - h, 0.5 * half.y_verify, h)?;
    let n = sgrid.len();
    let mut u = ScalarField::zeros(sgrid);
    let mut lp = ScalarField::zeros(sgrid);
    let mut lm = ScalarField::zeros(sgrid);
    let mut unresolved = 0usize;
    let mut oddness: f64 = 0.0;
    let mut trace_agreement: f64 = 0.0;
    for j in srow0..sgrid.ny {
        let jm = 2 * srow0 - j;
        for i in 0..sgrid.nx {
            let [s, t] = sgrid.point(i, j);
            let (kp, km) = (sgrid.idx(i, j), sgrid.idx(i, jm));
            let p = sample_phase(&chart_plus, &half.v, [s, t], 1.0);
            let m = sample_phase(&chart_minus, &v_m, [s, -t], -1.0);
            match (p, m) {
                (Some((wp, ap)), Some((wm, am))) => {
                    u.values[kp] = wp;
                    u.values[km] = wm;
                    lp.values[kp] = ap;
                    lp.values[km] = ap;
                    lm.values[km] = am;
                    lm.values[kp] = am;
                    oddness = oddness.max((wp + wm).abs());
                    if j == srow0 {
                        u.values[kp] = 0.0;
                        trace_agreement = trace_agreement.max((ap - am).abs());
                    }
                }
                _ => {
                    unresolved += 1;
                    for kk in [kp, km] {
                        u.mask[kk] = false;
                        lp.mask[kk] = false;
                        lm.mask[kk] = false;
                    }
                }
            }
        }
    }
    debug_assert_eq!(u.values.len(), n);

    let mut x_of_s = Vec::with_capacity(sgrid.nx);
    let mut eta_plus = Vec::with_capacity(sgrid.nx);
    for i in 0..sgrid.nx {
        let x = invert_increasing(&row_vbar, x0, h, sgrid.x(i))
            .ok_or_else(|| Error::input("boundary parametrisation is not monotone"))?;
        x_of_s.push(x);
        eta_plus.push(row_linear(&row_v, x0, h, x));
    }
    let eta_minus: Vec<f64> = eta_plus.iter().map(|e| -e).collect();
    let mut warnings = half.warnings.clone();
    if unresolved > 0 {
        warnings.push(format!("{unresolved} window nodes outside the chart image"));
    }
    let solution = TwoPhaseSolution::from_parts(
        u,
        1.0,
        1.0,
        Some((eta_plus, eta_minus)),
        Some(VariableCoefficients { plus: lp, minus: lm }),
    )?;
    Ok(CounterexampleBundle {
        half,
        plus,
        minus,
        targets,
        solution,
        x_of_s,
        oddness,
        trace_agreement,
        unresolved,
        warnings,
    })
}

/// Measured branching points against `∂K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchingVerdict {
    pub pass: bool,
    pub measured: Vec<f64>,
    pub expected: Vec<f64>,
    pub hausdorff: f64,
    pub h: f64,
}

fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |p: &[f64], q: &[f64]| {
        p.iter().map(|x| q.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Branching set of the packaged solution at exact contact, mapped back
/// through `Ψ_f` to boundary abscissae and compared with `∂K` inside the
/// sampled range; passes within `4h` in the Hausdorff distance.
pub fn verify_branching_prescription(bundle: &CounterexampleBundle) -> Result<BranchingVerdict> {
    let sol = &bundle.solution;
    let sg = sol.grid();
    let set = branching_set(sol, Some(0.0))?;
    let measured: Vec<f64> = set.points.iter().map(|&s| row_linear(&bundle.x_of_s, sg.x(0), sg.h, s)).collect();
    let n = bundle.x_of_s.len();
    let (lo, hi) = (bundle.x_of_s[1.min(n - 1)], bundle.x_of_s[n.saturating_sub(2)]);
    let expected: Vec<f64> = bundle.half.k.boundary().into_iter().filter(|&p| p > lo && p < hi).collect();
    let h = bundle.half.grid.h;
    let d = hausdorff(&measured, &expected);
    Ok(BranchingVerdict { pass: d <= 4.0 * h, measured, expected, hausdorff: d, h })
}

/// Largest shift of the measured branching points between two window
/// heights; a far-field sensitivity estimate.
pub fn height_sensitivity(k: &IntervalUnion, h: f64, heights: (f64, f64)) -> Result<f64> {
    let a = verify_branching_prescription(&assemble_with_height(k, h, heights.0)?)?;
    let b = verify_branching_prescription(&assemble_with_height(k, h, heights.1)?)?;
    if a.measured.len() != b.measured.len() {
        return Ok(f64::INFINITY);
    }
    Ok(hausdorff(&a.measured, &b.measured))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_union_validation() {
        assert!(IntervalUnion::new(&[(0.2, 0.1)]).is_err());
        assert!(IntervalUnion::new(&[(-0.5, 0.2), (0.1, 0.4)]).is_err());
        assert!(IntervalUnion::new(&[(-1.5, 0.0)]).is_err());
        let k = IntervalUnion::new(&[(0.2, 0.4), (-0.3, 0.2)]).unwrap();
        assert_eq!(k.intervals(), &[(-0.3, 0.4)]);
        let k = IntervalUnion::from_json("[[0, 0], [0.5, 1]]").unwrap();
        assert_eq!(k.boundary(), vec![0.0, 0.5]);
        assert!(IntervalUnion::from_json("[[0, 1, 2]]").is_err());
    }

    #[test]
    fn profile_vanishes_exactly_on_k() {
        let k = IntervalUnion::new(&[(-0.5, 0.5)]).unwrap();
        assert_eq!(flat_profile(&k, 0.5), 0.0);
        assert_eq!(flat_profile(&k, -0.1), 0.0);
        assert!(flat_profile(&k, 0.5 + 1e-3) < 0.0);
        assert!((flat_profile(&k, 0.75) + (-16.0f64).exp()).abs() < 1e-20);
        let two = IntervalUnion::new(&[(-0.6, -0.2), (0.2, 0.6)]).unwrap();
        let expected = -(-2.0 / 0.04f64).exp();
        assert!((flat_profile(&two, 0.0) - expected).abs() < 1e-30);
        let full = IntervalUnion::new(&[(-1.0, 1.0)]).unwrap();
        assert_eq!(flat_profile(&full, 1.3), 0.0);
        let (_, w) = build_f(&full, &[0.0]);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn piecewise_linear_inverse_round_trips() {
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * 0.1).powi(3) + i as f64 * 0.1).collect();
        for &x in &[0.0, 0.37, 1.2, 1.9] {
            let s = row_linear(&vals, 0.0, 0.1, x);
            assert!((invert_increasing(&vals, 0.0, 0.1, s).unwrap() - x).abs() < 1e-12);
        }
        assert!(invert_increasing(&vals, 0.0, 0.1, -1.0).is_none());
    }

    #[test]
    fn full_contact_reduces_to_the_identity() {
        let k = IntervalUnion::new(&[(-1.0, 1.0)]).unwrap();
        let b = assemble_counterexample(&k, 1.0 / 16.0).unwrap();
        let g = b.half.grid;
        for j in b.half.row0..g.ny {
            for i in 0..g.nx {
                assert!((b.half.v.at(i, j) - g.y(j)).abs() < 1e-10);
            }
        }
        let v = verify_branching_prescription(&b).unwrap();
        assert!(v.pass && v.measured.is_empty());
    }

    #[test]
    fn prescribed_branching_on_a_coarse_grid() {
        let k = IntervalUnion::new(&[(-0.5, 0.5)]).unwrap();
        let b = assemble_counterexample(&k, 1.0 / 32.0).unwrap();
        assert_eq!(b.unresolved, 0);
        assert!(b.oddness < 1e-12);
        let v = verify_branching_prescription(&b).unwrap();
        assert!(v.pass, "{v:?}");
        assert_eq!(v.measured.len(), 2);
    }
}
