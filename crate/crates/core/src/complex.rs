//! Discrete complex analysis on grids: complex gradients, Cauchy-Riemann
//! residuals, harmonic conjugates and line integrals of 1-forms.

use crate::error::{Error, Result};
use crate::grid::{hole_count, ComplexField, GridSpec, OneForm, ScalarField};

/// `g = 2 ∂_z v = v_x - i v_y` by centered differences, one-sided (and
/// flagged) where the mask ends.
pub fn complex_gradient(v: &ScalarField) -> Result<ComplexField> {
    let (gx, gy) = v.gradient();
    if !gx.mask.iter().any(|&m| m) {
        return Err(Error::input("mask too thin for any derivative stencil"));
    }
    let mut out = ComplexField::from_parts(&gx, &gy);
    out.im.iter_mut().for_each(|x| *x = -*x);
    Ok(out)
}

/// Pointwise `|∂x Re F - ∂y Im F| + |∂y Re F + ∂x Im F|`.
pub fn cauchy_riemann_residual(f: &ComplexField) -> ScalarField {
    let re = f.real_part();
    let im = f.imag_part();
    let g = f.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let parts = f.mask[k]
                .then(|| Some((re.dx_at(i, j)?, re.dy_at(i, j)?, im.dx_at(i, j)?, im.dy_at(i, j)?)))
                .flatten();
            match parts {
                Some((ux, uy, vx, vy)) => {
                    out.values[k] = (ux.value - vy.value).abs() + (uy.value + vx.value).abs();
                    out.flagged[k] =
                        f.flagged[k] || ux.one_sided || uy.one_sided || vx.one_sided || vy.one_sided;
                }
                None => out.mask[k] = false,
            }
        }
    }
    out
}

/// Active node nearest to `p`; ties broken by scan order.
pub fn nearest_active(grid: &GridSpec, mask: &[bool], p: [f64; 2]) -> Option<(usize, usize)> {
    let (i0, j0) = grid.nearest(p);
    if mask[grid.idx(i0, j0)] {
        let q = grid.point(i0, j0);
        if (q[0] - p[0]).abs() <= 0.5 * grid.h + 1e-12 && (q[1] - p[1]).abs() <= 0.5 * grid.h + 1e-12 {
            return Some((i0, j0));
        }
    }
    let mut best: Option<((usize, usize), f64)> = None;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !mask[grid.idx(i, j)] {
                continue;
            }
            let q = grid.point(i, j);
            let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some(((i, j), d));
            }
        }
    }
    best.map(|(n, _)| n)
}

/// Potential of a 1-form grown from `base` by alternating row and column
/// sweeps (rows first when `rows_first`), trapezoidal rule on each edge.
pub fn sweep_potential(form: &OneForm, base: (usize, usize), rows_first: bool) -> Vec<Option<f64>> {
    let g = form.grid;
    let h = g.h;
    let mut pot: Vec<Option<f64>> = vec![None; g.len()];
    pot[g.idx(base.0, base.1)] = Some(0.0);
    let mut rows_phase = rows_first;
    let mut idle = 0;
    while idle < 2 {
        let changed = if rows_phase {
            extend_lines(&mut pot, &form.mask, g.ny, g.nx, |line, pos| g.idx(pos, line), |p, q| {
                0.5 * h * (form.a[p] + form.a[q])
            })
        } else {
            extend_lines(&mut pot, &form.mask, g.nx, g.ny, |line, pos| g.idx(line, pos), |p, q| {
                0.5 * h * (form.b[p] + form.b[q])
            })
        };
        idle = if changed { 0 } else { idle + 1 };
        rows_phase = !rows_phase;
    }
    pot
}

/// Fill unreached nodes of every contiguous masked run that already holds
/// a reached node; `step(p, q)` is the integral over the edge from the
/// lower-index node `p` to its successor `q`.
fn extend_lines(
    pot: &mut [Option<f64>],
    mask: &[bool],
    lines: usize,
    len: usize,
    index: impl Fn(usize, usize) -> usize,
    step: impl Fn(usize, usize) -> f64,
) -> bool {
    let mut changed = false;
    for line in 0..lines {
        let mut pos = 0;
        while pos < len {
            if !mask[index(line, pos)] {
                pos += 1;
                continue;
            }
            let start = pos;
            while pos < len && mask[index(line, pos)] {
                pos += 1;
            }
            let end = pos; // exclusive
            let Some(seed) = (start..end).find(|&p| pot[index(line, p)].is_some()) else {
                continue;
            };
            for p in (start..seed).rev() {
                let (a, b) = (index(line, p), index(line, p + 1));
                if pot[a].is_none() {
                    pot[a] = Some(pot[b].unwrap() - step(a, b));
                    changed = true;
                }
            }
            for p in seed + 1..end {
                let (a, b) = (index(line, p - 1), index(line, p));
                if pot[b].is_none() {
                    pot[b] = Some(pot[a].unwrap() + step(a, b));
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Result of integrating a closed form into a potential.
#[derive(Debug, Clone)]
pub struct Potential {
    pub field: ScalarField,
    /// Max discrepancy between the row-first and column-first sweeps.
    pub path_residual: f64,
    pub base: (usize, usize),
}

/// Potential of a closed 1-form with value zero at `base`.
///
/// On masks with holes the form must have (numerically) zero periods;
/// otherwise the largest edge inconsistency is reported as the period.
pub fn integrate_potential(form: &OneForm, base: (usize, usize), period_tol: f64) -> Result<Potential> {
    let g = form.grid;
    if !form.mask[g.idx(base.0, base.1)] {
        return Err(Error::input("base point is outside the mask"));
    }
    let a = sweep_potential(form, base, true);
    let b = sweep_potential(form, base, false);
    let mut field = ScalarField::zeros(g);
    let mut path_residual: f64 = 0.0;
    for k in 0..g.len() {
        match (a[k], b[k]) {
            (Some(x), Some(y)) => {
                field.values[k] = x;
                path_residual = path_residual.max((x - y).abs());
            }
            _ => field.mask[k] = false,
        }
    }
    if hole_count(&g, &form.mask) > 0 {
        let period = max_edge_inconsistency(form, &field);
        if period > period_tol {
            return Err(Error::PeriodMismatch { period });
        }
    }
    Ok(Potential { field, path_residual, base })
}

fn max_edge_inconsistency(form: &OneForm, pot: &ScalarField) -> f64 {
    let g = form.grid;
    let h = g.h;
    let mut worst: f64 = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.idx(i, j);
            if !pot.mask[p] {
                continue;
            }
            if i + 1 < g.nx && pot.mask[p + 1] {
                let e = pot.values[p + 1] - pot.values[p] - 0.5 * h * (form.a[p] + form.a[p + 1]);
                worst = worst.max(e.abs());
            }
            if j + 1 < g.ny && pot.mask[p + g.nx] {
                let q = p + g.nx;
                let e = pot.values[q] - pot.values[p] - 0.5 * h * (form.b[p] + form.b[q]);
                worst = worst.max(e.abs());
            }
        }
    }
    worst
}

/// `v̄` with `v̄ + i v` holomorphic and `v̄(base) = 0`; integrates
/// `v_y dx - v_x dy`.
pub fn harmonic_conjugate(v: &ScalarField, base_point: [f64; 2]) -> Result<Potential> {
    let (gx, gy) = v.gradient();
    let g = v.grid;
    let mut form = OneForm {
        grid: g,
        a: gy.values.clone(),
        b: gx.values.iter().map(|x| -x).collect(),
        mask: gx.mask.clone(),
    };
    for k in 0..g.len() {
        form.mask[k] &= v.mask[k];
    }
    let base = nearest_active(&g, &form.mask, base_point)
        .ok_or_else(|| Error::input("no active node for the conjugate base point"))?;
    // periods of order h^2 are discretisation noise, anything larger is topological
    integrate_potential(&form, base, 10.0 * g.h)
}

/// Trapezoidal line integral of `form` along a polyline, sampling the form
/// by bilinear interpolation at sub-steps no longer than `h/2`.
pub fn integrate_form(form: &OneForm, path: &[[f64; 2]]) -> Result<f64> {
    let a = form.a_field();
    let b = form.b_field();
    let h = form.grid.h;
    let sample = |p: [f64; 2]| -> Result<(f64, f64)> {
        match (a.bilinear(p), b.bilinear(p)) {
            (Some(x), Some(y)) => Ok((x, y)),
            _ => Err(Error::PathExitsMask { x: p[0], y: p[1] }),
        }
    };
    let mut total = 0.0;
    for seg in path.windows(2) {
        let (p, q) = (seg[0], seg[1]);
        let d = [q[0] - p[0], q[1] - p[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 {
            continue;
        }
        let n = ((2.0 * len / h).ceil() as usize).max(1);
        let mut prev = sample(p)?;
        for s in 1..=n {
            let t = s as f64 / n as f64;
            let cur = sample([p[0] + t * d[0], p[1] + t * d[1]])?;
            let fa = 0.5 * (prev.0 + cur.0);
            let fb = 0.5 * (prev.1 + cur.1);
            total += (fa * d[0] + fb * d[1]) / n as f64;
            prev = cur;
        }
    }
    Ok(total)
}

/// Closed polygonal loop approximating a circle, counter-clockwise.
pub fn circle_path(center: [f64; 2], radius: f64, segments: usize) -> Vec<[f64; 2]> {
    (0..=segments)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn square(n: usize) -> GridSpec {
        GridSpec::new([-1.0, -1.0], 2.0 / (n - 1) as f64, n, n).unwrap()
    }

    #[test]
    fn gradient_of_linear_and_quadratic_fields() {
        let g = square(17);
        let v = ScalarField::from_fn(g, |_, y| y);
        let gr = complex_gradient(&v).unwrap();
        assert!(gr.re.iter().all(|x| x.abs() < 1e-12));
        assert!(gr.im.iter().all(|x| (x + 1.0).abs() < 1e-12));

        let v = ScalarField::from_fn(g, |x, y| x * x - y * y);
        let gr = complex_gradient(&v).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let w = gr.at(i, j);
                assert!((w.re - 2.0 * g.x(i)).abs() < 1e-10);
                assert!((w.im - 2.0 * g.y(j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gradient_of_scaled_plane_has_modulus_lambda() {
        let g = square(9);
        let v = ScalarField::from_fn(g, |_, y| 2.0 * y);
        let gr = complex_gradient(&v).unwrap();
        assert!(gr.modulus().values.iter().all(|m| (m - 2.0).abs() < 1e-12));
        assert!(gr.im.iter().all(|x| (x + 2.0).abs() < 1e-12));
    }

    #[test]
    fn cauchy_riemann_of_z2_and_conj() {
        let g = square(17);
        let r = cauchy_riemann_residual(&ComplexField::from_fn(g, |z| z * z));
        assert!(r.norms(true).sup < 1e-11);
        let r = cauchy_riemann_residual(&ComplexField::from_fn(g, |z| z.conj()));
        assert!(r.values.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }

    #[test]
    fn conjugates_of_polynomials() {
        let g = square(21);
        let v = ScalarField::from_fn(g, |_, y| y);
        let c = harmonic_conjugate(&v, [0.0, 0.0]).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                assert!((c.field.at(i, j) - g.x(i)).abs() < 1e-12);
            }
        }
        let v = ScalarField::from_fn(g, |x, y| x * y);
        let c = harmonic_conjugate(&v, [0.0, 0.0]).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y) = (g.x(i), g.y(j));
                // trapezoid on a linear integrand is exact away from one-sided edges
                assert!((c.field.at(i, j) - 0.5 * (x * x - y * y)).abs() < 1e-10);
            }
        }
        assert!(c.path_residual < 1e-10);
    }

    #[test]
    fn conjugate_round_trip_keeps_imaginary_part() {
        let g = square(17);
        let v = ScalarField::from_fn(g, |x, y| x * y + 0.5 * y);
        let c = harmonic_conjugate(&v, [0.0, 0.0]).unwrap();
        let f = ComplexField::from_parts(&c.field, &v);
        assert_eq!(f.im, v.values);
    }

    #[test]
    fn annulus_with_log_has_a_period() {
        let g = square(41);
        let mask: Vec<bool> = (0..g.len())
            .map(|k| {
                let (x, y) = (g.x(k % g.nx), g.y(k / g.nx));
                x.hypot(y) > 0.3
            })
            .collect();
        // v = log r is harmonic with conjugate arg z, period 2 pi
        let v = ScalarField::from_fn(g, |x, y| 0.5 * (x * x + y * y).ln()).with_mask(mask);
        match harmonic_conjugate(&v, [0.9, 0.0]) {
            Err(Error::PeriodMismatch { period }) => assert!(period > 1.0),
            other => panic!("expected period mismatch, got {other:?}"),
        }
    }

    #[test]
    fn line_integrals() {
        let g = square(21);
        let dx = OneForm::from_fn(g, |_, _| (1.0, 0.0));
        assert!((integrate_form(&dx, &[[0.0, 0.0], [1.0, 0.0]]).unwrap() - 1.0).abs() < 1e-14);
        let exact = OneForm::from_fn(g, |x, y| (2.0 * x * y, x * x));
        let loop_ = circle_path([0.1, -0.2], 0.5, 64);
        assert!(integrate_form(&exact, &loop_).unwrap().abs() < 1e-3);
        let err = integrate_form(&dx, &[[0.0, 0.0], [3.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::PathExitsMask { .. }));
    }

    #[test]
    fn nearest_active_prefers_origin() {
        let g = square(11);
        let mask = vec![true; g.len()];
        assert_eq!(nearest_active(&g, &mask, [0.0, 0.0]), Some((5, 5)));
        let _ = Complex64::new(0.0, 0.0);
    }
}
