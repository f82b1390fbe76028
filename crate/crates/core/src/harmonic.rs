//! Dirichlet problems for the five-point Laplacian.
//!
//! Two entry points: [`solve_dirichlet_harmonic`] takes a node mask whose
//! boundary nodes carry the data, and [`solve_dirichlet_region`] takes a
//! level-set region and uses Shortley-Weller arms where the boundary cuts a
//! grid edge. Both relax with lexicographic SOR, so results are bit-for-bit
//! reproducible.

use crate::error::{Error, Result};
use crate::grid::{components, GridSpec, ScalarField};

/// Iteration controls shared by the relaxation solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop when the largest scaled update falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Relaxation factor; `None` picks the model-problem optimum.
    pub omega: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-13, max_sweeps: 200_000, omega: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub sweeps: usize,
    pub residual: f64,
}

pub(crate) fn optimal_omega(grid: &GridSpec) -> f64 {
    let n = grid.nx.max(grid.ny) as f64;
    2.0 / (1.0 + (std::f64::consts::PI / n).sin())
}

/// Compressed stencil: each unknown `k` satisfies
/// `diag[k] u[k] = sum coef * u[nbr] + rhs[k]`.
struct Stencils {
    nodes: Vec<usize>,
    start: Vec<usize>,
    nbr: Vec<usize>,
    coef: Vec<f64>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
}

impl Stencils {
    fn with_capacity(n: usize) -> Self {
        Stencils {
            nodes: Vec::with_capacity(n),
            start: vec![0],
            nbr: Vec::with_capacity(4 * n),
            coef: Vec::with_capacity(4 * n),
            diag: Vec::with_capacity(n),
            rhs: Vec::with_capacity(n),
        }
    }

    fn sor(&self, values: &mut [f64], opts: &SolverOptions, omega: f64) -> Result<SolveInfo> {
        let scale = values.iter().fold(1e-300f64, |m, v| m.max(v.abs())).max(1.0);
        for sweep in 1..=opts.max_sweeps {
            let mut max_update: f64 = 0.0;
            for (row, &k) in self.nodes.iter().enumerate() {
                let mut s = self.rhs[row];
                for e in self.start[row]..self.start[row + 1] {
                    s += self.coef[e] * values[self.nbr[e]];
                }
                let gs = s / self.diag[row];
                let delta = gs - values[k];
                max_update = max_update.max(delta.abs());
                values[k] += omega * delta;
            }
            if !max_update.is_finite() {
                return Err(Error::NoConvergence { iterations: sweep, residual: max_update });
            }
            if max_update <= opts.tol * scale {
                return Ok(SolveInfo { sweeps: sweep, residual: max_update });
            }
            if sweep == opts.max_sweeps {
                return Err(Error::NoConvergence { iterations: sweep, residual: max_update });
            }
        }
        unreachable!("max_sweeps is at least one")
    }
}

/// Harmonic extension of boundary data into a connected mask.
///
/// Boundary nodes are mask nodes on the grid frame or with a 4-neighbour
/// outside the mask; their values are taken from `boundary_data`. The
/// returned field carries the input mask.
pub fn solve_dirichlet_harmonic(
    grid: GridSpec,
    mask: &[bool],
    boundary_data: &ScalarField,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveInfo)> {
    if mask.len() != grid.len() || boundary_data.grid != grid {
        return Err(Error::input("mask or boundary data does not match the grid"));
    }
    let (_, ncomp) = components(&grid, mask);
    if ncomp != 1 {
        return Err(Error::DisconnectedMask { components: ncomp });
    }
    let mut values = vec![0.0; grid.len()];
    let mut st = Stencils::with_capacity(grid.len());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if !mask[k] {
                continue;
            }
            let boundary = grid.is_frame(i, j) || grid.neighbors4(i, j).any(|(a, b)| !mask[grid.idx(a, b)]);
            if boundary {
                let v = boundary_data.values[k];
                if !v.is_finite() {
                    return Err(Error::input(format!("boundary data missing at node ({i}, {j})")));
                }
                values[k] = v;
            } else {
                st.nodes.push(k);
                for (a, b) in grid.neighbors4(i, j) {
                    st.nbr.push(grid.idx(a, b));
                    st.coef.push(1.0);
                }
                st.start.push(st.nbr.len());
                st.diag.push(4.0);
                st.rhs.push(0.0);
            }
        }
    }
    let omega = opts.omega.unwrap_or_else(|| optimal_omega(&grid));
    let info = st.sor(&mut values, opts, omega)?;
    let mut out = ScalarField::zeros(grid).with_mask(mask.to_vec());
    out.values = values;
    Ok((out, info))
}

/// A planar region described by a level function: positive inside, zero on
/// the boundary, negative outside.
pub trait Region {
    fn level(&self, p: [f64; 2]) -> f64;

    /// Fraction `theta` in `(0, 1]` along the segment `a -> b` where the
    /// boundary is crossed, given `a` inside and `b` outside.
    fn crossing(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let p = [a[0] + mid * (b[0] - a[0]), a[1] + mid * (b[1] - a[1])];
            if self.level(p) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        hi
    }
}

/// `{ y > f(x) }` (or `{ y < f(x) }` when `below`), the epigraph or
/// hypograph of a sampled or closed-form profile.
pub struct GraphRegion<F: Fn(f64) -> f64> {
    pub profile: F,
    pub below: bool,
}

impl<F: Fn(f64) -> f64> Region for GraphRegion<F> {
    fn level(&self, p: [f64; 2]) -> f64 {
        let d = p[1] - (self.profile)(p[0]);
        if self.below {
            -d
        } else {
            d
        }
    }
}

/// Harmonic function on `region ∩ grid box` with Dirichlet data `data`
/// on the region boundary and on the grid frame.
///
/// Nodes exactly on the boundary (level zero) take the data directly.
/// Where the boundary cuts an edge of an interior node the Shortley-Weller
/// arm is used, which keeps the scheme second order up to the boundary.
pub fn solve_dirichlet_region(
    grid: GridSpec,
    region: &dyn Region,
    data: &dyn Fn([f64; 2]) -> f64,
    opts: &SolverOptions,
) -> Result<(ScalarField, SolveInfo)> {
    let n = grid.len();
    let mut level = vec![0.0; n];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            level[grid.idx(i, j)] = region.level(grid.point(i, j));
        }
    }
    let mask: Vec<bool> = level.iter().map(|&l| l >= 0.0).collect();
    let (_, ncomp) = components(&grid, &mask);
    if ncomp != 1 {
        return Err(Error::DisconnectedMask { components: ncomp });
    }
    let mut values = vec![0.0; n];
    let mut st = Stencils::with_capacity(n);
    let h = grid.h;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if !mask[k] {
                continue;
            }
            let p = grid.point(i, j);
            if level[k] == 0.0 || grid.is_frame(i, j) {
                values[k] = data(p);
                continue;
            }
            // arms: +x, -x, +y, -y
            let mut arm = [h; 4];
            let mut fixed = [None; 4];
            let mut idx = [0usize; 4];
            for (d, (di, dj)) in [(1isize, 0isize), (-1, 0), (0, 1), (0, -1)].into_iter().enumerate() {
                let a = (i as isize + di) as usize;
                let b = (j as isize + dj) as usize;
                let q = grid.idx(a, b);
                idx[d] = q;
                if level[q] < 0.0 {
                    let qp = grid.point(a, b);
                    let theta = region.crossing(p, qp);
                    arm[d] = theta * h;
                    let c = [p[0] + theta * (qp[0] - p[0]), p[1] + theta * (qp[1] - p[1])];
                    fixed[d] = Some(data(c));
                }
            }
            let cx = 2.0 / (arm[0] + arm[1]);
            let cy = 2.0 / (arm[2] + arm[3]);
            let coefs = [cx / arm[0], cx / arm[1], cy / arm[2], cy / arm[3]];
            let mut rhs = 0.0;
            let mut diag = 0.0;
            st.nodes.push(k);
            for d in 0..4 {
                diag += coefs[d];
                match fixed[d] {
                    Some(v) => rhs += coefs[d] * v,
                    None => {
                        st.nbr.push(idx[d]);
                        st.coef.push(coefs[d]);
                    }
                }
            }
            st.start.push(st.nbr.len());
            st.diag.push(diag);
            st.rhs.push(rhs);
        }
    }
    let omega = opts.omega.unwrap_or_else(|| optimal_omega(&grid));
    let info = st.sor(&mut values, opts, omega)?;
    let mut out = ScalarField::zeros(grid).with_mask(mask);
    out.values = values;
    Ok((out, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_polynomial_is_reproduced() {
        let g = GridSpec::new([0.0, 0.0], 1.0 / 32.0, 33, 33).unwrap();
        let exact = ScalarField::from_fn(g, |x, y| x * x - y * y);
        let mask = vec![true; g.len()];
        let (u, _) = solve_dirichlet_harmonic(g, &mask, &exact, &SolverOptions::default()).unwrap();
        let err = u.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn cubic_harmonic_is_exact_on_five_point_stencil() {
        let g = GridSpec::new([-1.0, -1.0], 1.0 / 16.0, 33, 33).unwrap();
        let exact = ScalarField::from_fn(g, |x, y| x * x * x - 3.0 * x * y * y);
        let (u, _) = solve_dirichlet_harmonic(g, &vec![true; g.len()], &exact, &SolverOptions::default()).unwrap();
        let err = u.values.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "err {err}");
    }

    #[test]
    fn linear_data_on_upper_half_box() {
        let g = GridSpec::new([-1.0, -1.0], 1.0 / 16.0, 33, 33).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|k| g.y(k / g.nx) >= -1e-12).collect();
        let data = ScalarField::from_fn(g, |_, y| y.max(0.0));
        let (u, _) = solve_dirichlet_harmonic(g, &mask, &data, &SolverOptions::default()).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if u.active(i, j) {
                    assert!((u.at(i, j) - g.y(j)).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn disconnected_mask_is_an_input_error() {
        let g = GridSpec::new([0.0, 0.0], 0.1, 11, 11).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|k| k % g.nx != 5).collect();
        let data = ScalarField::zeros(g);
        let err = solve_dirichlet_harmonic(g, &mask, &data, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DisconnectedMask { components: 2 }));
    }

    #[test]
    fn shortley_weller_is_exact_for_linear_data_on_curved_region() {
        let g = GridSpec::new([-1.0, -0.5], 1.0 / 32.0, 65, 49).unwrap();
        let region = GraphRegion { profile: |x: f64| -0.2 * (3.0 * x).sin().powi(2), below: false };
        let data = |p: [f64; 2]| 2.0 * p[0] + p[1];
        let (u, _) = solve_dirichlet_region(g, &region, &data, &SolverOptions::default()).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                if u.active(i, j) {
                    assert!((u.at(i, j) - data(g.point(i, j))).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = GridSpec::new([0.0, 0.0], 1.0 / 32.0, 33, 33).unwrap();
        let data = ScalarField::from_fn(g, |x, _| x);
        let opts = SolverOptions { max_sweeps: 3, ..Default::default() };
        let err = solve_dirichlet_harmonic(g, &vec![true; g.len()], &data, &opts).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { iterations: 3, .. }));
    }
}
