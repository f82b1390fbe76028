//! Uniform grids and the sampled fields that live on them.
//!
//! Samples are stored row-major: index `j * nx + i` holds the value at
//! `(origin.x + i h, origin.y + j h)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::input(format!("grid spacing must be positive, got {h}")));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::input(format!("grid needs at least 3x3 samples, got {nx}x{ny}")));
        }
        Ok(GridSpec { origin, h, nx, ny })
    }

    /// Grid covering `[x0, x1] x [y0, y1]`; the box is snapped outward to a
    /// whole number of cells.
    pub fn covering(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::input("empty grid window"));
        }
        let nx = ((x1 - x0) / h - 1e-9).ceil() as usize + 1;
        let ny = ((y1 - y0) / h - 1e-9).ceil() as usize + 1;
        GridSpec::new([x0, y0], h, nx, ny)
    }

    /// Grid whose nodes include the origin of the plane, covering the box.
    pub fn aligned(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Result<Self> {
        let i0 = (x0 / h + 1e-7).floor();
        let i1 = (x1 / h - 1e-7).ceil();
        let j0 = (y0 / h + 1e-7).floor();
        let j1 = (y1 / h - 1e-7).ceil();
        GridSpec::new(
            [i0 * h, j0 * h],
            h,
            (i1 - i0) as usize + 1,
            (j1 - j0) as usize + 1,
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.h
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.h
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x(i), self.y(j)]
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    /// Fractional index coordinates of a physical point.
    #[inline]
    pub fn frac(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.origin[0]) / self.h, (p[1] - self.origin[1]) / self.h)
    }

    /// Node closest to `p`, clamped to the grid.
    pub fn nearest(&self, p: [f64; 2]) -> (usize, usize) {
        let (fx, fy) = self.frac(p);
        let i = fx.round().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = fy.round().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    pub fn is_frame(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    /// Row index whose ordinate equals `y` (within a thousandth of a cell).
    pub fn row_of(&self, y: f64) -> Option<usize> {
        let f = (y - self.origin[1]) / self.h;
        let r = f.round();
        ((f - r).abs() < 1e-3 && r >= 0.0 && (r as usize) < self.ny).then_some(r as usize)
    }

    /// Same grid with spacing halved over the same box.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            origin: self.origin,
            h: self.h / 2.0,
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
        }
    }

    pub fn neighbors4(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(move |(di, dj)| (i as isize + di, j as isize + dj))
            .filter(move |&(a, b)| a >= 0 && b >= 0 && a < nx && b < ny)
            .map(|(a, b)| (a as usize, b as usize))
    }
}

/// A derivative sample; `one_sided` marks stencils that had to leave the
/// centered form because the mask ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deriv {
    pub value: f64,
    pub one_sided: bool,
}

/// First derivative along one axis from an availability-aware sampler
/// `get(k)` of the values at offset `k` cells.
pub(crate) fn first_derivative(get: impl Fn(isize) -> Option<f64>, h: f64) -> Option<Deriv> {
    let f0 = get(0)?;
    if let (Some(fp), Some(fm)) = (get(1), get(-1)) {
        return Some(Deriv { value: (fp - fm) / (2.0 * h), one_sided: false });
    }
    for s in [1isize, -1] {
        if let (Some(f1), Some(f2)) = (get(s), get(2 * s)) {
            let v = (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
            return Some(Deriv { value: s as f64 * v, one_sided: true });
        }
    }
    None
}

pub(crate) fn second_derivative(get: impl Fn(isize) -> Option<f64>, h: f64) -> Option<Deriv> {
    let f0 = get(0)?;
    if let (Some(fp), Some(fm)) = (get(1), get(-1)) {
        return Some(Deriv { value: (fp - 2.0 * f0 + fm) / (h * h), one_sided: false });
    }
    for s in [1isize, -1] {
        if let (Some(f1), Some(f2), Some(f3)) = (get(s), get(2 * s), get(3 * s)) {
            let v = (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) / (h * h);
            return Some(Deriv { value: v, one_sided: true });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Active subdomain; samples outside are ignored by every operation.
    pub mask: Vec<bool>,
    /// Samples produced by one-sided stencils; excluded from sup norms by default.
    pub flagged: Vec<bool>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
            mask: vec![true; grid.len()],
            flagged: vec![false; grid.len()],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                out.values[grid.idx(i, j)] = f(grid.x(i), grid.y(j));
            }
        }
        out
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), self.grid.len());
        self.mask = mask;
        self
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    #[inline]
    pub fn active(&self, i: usize, j: usize) -> bool {
        self.mask[self.grid.idx(i, j)]
    }

    /// Value at an integer offset from `(i, j)` if it exists and is active.
    #[inline]
    pub fn get_offset(&self, i: usize, j: usize, di: isize, dj: isize) -> Option<f64> {
        let a = i as isize + di;
        let b = j as isize + dj;
        if a < 0 || b < 0 || a >= self.grid.nx as isize || b >= self.grid.ny as isize {
            return None;
        }
        let k = self.grid.idx(a as usize, b as usize);
        self.mask[k].then(|| self.values[k])
    }

    pub fn dx_at(&self, i: usize, j: usize) -> Option<Deriv> {
        first_derivative(|k| self.get_offset(i, j, k, 0), self.grid.h)
    }

    pub fn dy_at(&self, i: usize, j: usize) -> Option<Deriv> {
        first_derivative(|k| self.get_offset(i, j, 0, k), self.grid.h)
    }

    pub fn dxx_at(&self, i: usize, j: usize) -> Option<Deriv> {
        second_derivative(|k| self.get_offset(i, j, k, 0), self.grid.h)
    }

    pub fn dyy_at(&self, i: usize, j: usize) -> Option<Deriv> {
        second_derivative(|k| self.get_offset(i, j, 0, k), self.grid.h)
    }

    pub fn dxy_at(&self, i: usize, j: usize) -> Option<Deriv> {
        if !self.active(i, j) {
            return None;
        }
        let corners = (
            self.get_offset(i, j, 1, 1),
            self.get_offset(i, j, -1, 1),
            self.get_offset(i, j, 1, -1),
            self.get_offset(i, j, -1, -1),
        );
        if let (Some(pp), Some(mp), Some(pm), Some(mm)) = corners {
            let h = self.grid.h;
            return Some(Deriv { value: (pp - mp - pm + mm) / (4.0 * h * h), one_sided: false });
        }
        // fall back to a y-derivative of x-derivatives
        let d = first_derivative(
            |k| {
                let b = j as isize + k;
                if b < 0 || b >= self.grid.ny as isize {
                    return None;
                }
                self.dx_at(i, b as usize).map(|d| d.value)
            },
            self.grid.h,
        )?;
        Some(Deriv { value: d.value, one_sided: true })
    }

    /// Gradient fields; masks mark where a stencil existed.
    pub fn gradient(&self) -> (ScalarField, ScalarField) {
        let g = self.grid;
        let mut gx = ScalarField::zeros(g);
        let mut gy = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let (dx, dy) = if self.mask[k] { (self.dx_at(i, j), self.dy_at(i, j)) } else { (None, None) };
                match (dx, dy) {
                    (Some(a), Some(b)) => {
                        gx.values[k] = a.value;
                        gy.values[k] = b.value;
                        let f = a.one_sided || b.one_sided;
                        gx.flagged[k] = f;
                        gy.flagged[k] = f;
                    }
                    _ => {
                        gx.mask[k] = false;
                        gy.mask[k] = false;
                    }
                }
            }
        }
        (gx, gy)
    }

    /// Five-point Laplacian on nodes whose full stencil is active.
    pub fn laplacian(&self) -> ScalarField {
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        let h2 = g.h * g.h;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let c = if self.mask[k] {
                    (|| {
                        Some(
                            self.get_offset(i, j, 1, 0)? + self.get_offset(i, j, -1, 0)?
                                + self.get_offset(i, j, 0, 1)?
                                + self.get_offset(i, j, 0, -1)?,
                        )
                    })()
                } else {
                    None
                };
                match c {
                    Some(s) => out.values[k] = (s - 4.0 * self.values[k]) / h2,
                    None => out.mask[k] = false,
                }
            }
        }
        out
    }

    /// Bilinear interpolation; `None` when a corner of the containing cell
    /// is inactive or the point is off the grid.
    pub fn bilinear(&self, p: [f64; 2]) -> Option<f64> {
        let g = self.grid;
        let (fx, fy) = g.frac(p);
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > (g.nx - 1) as f64 + eps || fy > (g.ny - 1) as f64 + eps {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(g.nx - 2);
        let j = (fy.floor().max(0.0) as usize).min(g.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let f00 = self.get_offset(i, j, 0, 0)?;
        let f10 = self.get_offset(i, j, 1, 0)?;
        let f01 = self.get_offset(i, j, 0, 1)?;
        let f11 = self.get_offset(i, j, 1, 1)?;
        Some(
            f00 * (1.0 - tx) * (1.0 - ty) + f10 * tx * (1.0 - ty) + f01 * (1.0 - tx) * ty + f11 * tx * ty,
        )
    }

    /// Sup and root-mean-square over active samples; flagged samples are
    /// skipped unless `include_flagged`.
    pub fn norms(&self, include_flagged: bool) -> Norms {
        Norms::collect(
            self.values
                .iter()
                .zip(&self.mask)
                .zip(&self.flagged)
                .filter(|((_, &m), &f)| m && (include_flagged || !f))
                .map(|((&v, _), _)| v),
        )
        .with_excluded(
            self.mask
                .iter()
                .zip(&self.flagged)
                .filter(|(&m, &f)| m && f && !include_flagged)
                .count(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }
}

/// Summary statistics of a residual sample set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Norms {
    pub sup: f64,
    pub rms: f64,
    pub count: usize,
    pub excluded: usize,
}

impl Norms {
    pub fn collect(values: impl IntoIterator<Item = f64>) -> Norms {
        let mut sup: f64 = 0.0;
        let mut sq = 0.0;
        let mut n = 0usize;
        for v in values {
            let a = v.abs();
            if a.is_nan() {
                sup = f64::NAN;
            } else if !sup.is_nan() {
                sup = sup.max(a);
            }
            sq += a * a;
            n += 1;
        }
        Norms { sup, rms: if n > 0 { (sq / n as f64).sqrt() } else { 0.0 }, count: n, excluded: 0 }
    }

    pub fn with_excluded(mut self, excluded: usize) -> Norms {
        self.excluded = excluded;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub mask: Vec<bool>,
    pub flagged: Vec<bool>,
}

impl ComplexField {
    pub fn from_fn(grid: GridSpec, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut re = vec![0.0; grid.len()];
        let mut im = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let w = f(Complex64::new(grid.x(i), grid.y(j)));
                re[grid.idx(i, j)] = w.re;
                im[grid.idx(i, j)] = w.im;
            }
        }
        ComplexField { grid, re, im, mask: vec![true; grid.len()], flagged: vec![false; grid.len()] }
    }

    pub fn from_parts(re: &ScalarField, im: &ScalarField) -> Self {
        assert_eq!(re.grid, im.grid);
        let mask = re.mask.iter().zip(&im.mask).map(|(a, b)| *a && *b).collect();
        let flagged = re.flagged.iter().zip(&im.flagged).map(|(a, b)| *a || *b).collect();
        ComplexField { grid: re.grid, re: re.values.clone(), im: im.values.clone(), mask, flagged }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        let k = self.grid.idx(i, j);
        Complex64::new(self.re[k], self.im[k])
    }

    pub fn real_part(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.re.clone(), mask: self.mask.clone(), flagged: self.flagged.clone() }
    }

    pub fn imag_part(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.im.clone(), mask: self.mask.clone(), flagged: self.flagged.clone() }
    }

    pub fn modulus(&self) -> ScalarField {
        let mut out = self.real_part();
        for (k, v) in out.values.iter_mut().enumerate() {
            *v = self.re[k].hypot(self.im[k]);
        }
        out
    }
}

/// The 1-form `a dx + b dy` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    pub grid: GridSpec,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub mask: Vec<bool>,
}

impl OneForm {
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (p, q) = f(grid.x(i), grid.y(j));
                a[grid.idx(i, j)] = p;
                b[grid.idx(i, j)] = q;
            }
        }
        OneForm { grid, a, b, mask: vec![true; grid.len()] }
    }

    pub fn a_field(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.a.clone(), mask: self.mask.clone(), flagged: vec![false; self.grid.len()] }
    }

    pub fn b_field(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.b.clone(), mask: self.mask.clone(), flagged: vec![false; self.grid.len()] }
    }

    /// `|d_y a - d_x b|` on nodes with centered stencils for both terms.
    pub fn closedness_residual(&self) -> ScalarField {
        let a = self.a_field();
        let b = self.b_field();
        let g = self.grid;
        let mut out = ScalarField::zeros(g);
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                match (self.mask[k].then(|| a.dy_at(i, j)).flatten(), self.mask[k].then(|| b.dx_at(i, j)).flatten()) {
                    (Some(ay), Some(bx)) => {
                        out.values[k] = (ay.value - bx.value).abs();
                        out.flagged[k] = ay.one_sided || bx.one_sided;
                    }
                    _ => out.mask[k] = false,
                }
            }
        }
        out
    }
}

/// Connected components of a mask under 4-connectivity; returns a label per
/// node (`usize::MAX` outside) and the component count.
pub fn components(grid: &GridSpec, mask: &[bool]) -> (Vec<usize>, usize) {
    let mut label = vec![usize::MAX; grid.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if !mask[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = count;
        stack.push(start);
        while let Some(k) = stack.pop() {
            let (i, j) = (k % grid.nx, k / grid.nx);
            for (a, b) in grid.neighbors4(i, j) {
                let q = grid.idx(a, b);
                if mask[q] && label[q] == usize::MAX {
                    label[q] = count;
                    stack.push(q);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Number of holes: complement components (8-connected) that do not reach the frame.
pub fn hole_count(grid: &GridSpec, mask: &[bool]) -> usize {
    let mut seen = vec![false; grid.len()];
    let mut holes = 0;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut touches = false;
        while let Some(k) = stack.pop() {
            let (i, j) = (k % grid.nx, k / grid.nx);
            touches |= grid.is_frame(i, j);
            for dj in -1isize..=1 {
                for di in -1isize..=1 {
                    let a = i as isize + di;
                    let b = j as isize + dj;
                    if a < 0 || b < 0 || a >= grid.nx as isize || b >= grid.ny as isize {
                        continue;
                    }
                    let q = grid.idx(a as usize, b as usize);
                    if !mask[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        if !touches {
            holes += 1;
        }
    }
    holes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> GridSpec {
        GridSpec::new([0.0, 0.0], 1.0 / (n - 1) as f64, n, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new([0.0, 0.0], 0.0, 5, 5).is_err());
        assert!(GridSpec::new([0.0, 0.0], 0.1, 2, 5).is_err());
    }

    #[test]
    fn aligned_grid_contains_origin() {
        let g = GridSpec::aligned(-1.0, 1.0, -0.0183, 1.0, 1.0 / 128.0).unwrap();
        assert!(g.row_of(0.0).is_some());
        assert!(g.y(0) <= -0.0183);
        assert!((g.x(0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_derivatives_are_exact_including_one_sided() {
        let g = unit_grid(9);
        let f = ScalarField::from_fn(g, |x, y| 3.0 * x * x - 2.0 * x * y + y * y);
        for &(i, j) in &[(4, 4), (0, 0), (8, 3), (2, 8)] {
            let (x, y) = (g.x(i), g.y(j));
            assert!((f.dx_at(i, j).unwrap().value - (6.0 * x - 2.0 * y)).abs() < 1e-10);
            assert!((f.dy_at(i, j).unwrap().value - (-2.0 * x + 2.0 * y)).abs() < 1e-10);
            assert!((f.dxx_at(i, j).unwrap().value - 6.0).abs() < 1e-8);
            assert!((f.dyy_at(i, j).unwrap().value - 2.0).abs() < 1e-8);
            assert!((f.dxy_at(i, j).unwrap().value + 2.0).abs() < 1e-8);
        }
        assert!(f.dx_at(0, 4).unwrap().one_sided);
        assert!(!f.dx_at(4, 4).unwrap().one_sided);
    }

    #[test]
    fn closedness_of_exact_form() {
        let g = unit_grid(11);
        let w = OneForm::from_fn(g, |x, y| (2.0 * x * y, x * x));
        let r = w.closedness_residual();
        assert!(r.norms(false).sup < 1e-12);
    }

    #[test]
    fn hole_detection() {
        let g = unit_grid(9);
        let mut mask = vec![true; g.len()];
        assert_eq!(hole_count(&g, &mask), 0);
        mask[g.idx(4, 4)] = false;
        assert_eq!(hole_count(&g, &mask), 1);
        let (_, n) = components(&g, &mask);
        assert_eq!(n, 1);
    }
}
