//! Off-grid evaluation: Catmull-Rom bicubic interpolation with analytic
//! derivatives, and polynomial extension of fields across a mask edge.

use crate::grid::ScalarField;

fn weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ]
}

fn dweights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    [
        0.5 * (-1.0 + 4.0 * t - 3.0 * t2),
        0.5 * (-10.0 * t + 9.0 * t2),
        0.5 * (1.0 + 8.0 * t - 9.0 * t2),
        0.5 * (-2.0 * t + 3.0 * t2),
    ]
}

/// Value and gradient of an interpolant at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
}

/// Bicubic Catmull-Rom interpolation; `None` unless the whole 4x4 stencil
/// is active.
pub fn bicubic(f: &ScalarField, p: [f64; 2]) -> Option<Sample> {
    let g = f.grid;
    if g.nx < 4 || g.ny < 4 {
        return None;
    }
    let (fx, fy) = g.frac(p);
    let eps = 1e-9;
    if fx < 1.0 - eps || fy < 1.0 - eps || fx > (g.nx - 2) as f64 + eps || fy > (g.ny - 2) as f64 + eps {
        return None;
    }
    let i = (fx.floor() as usize).clamp(1, g.nx - 3);
    let j = (fy.floor() as usize).clamp(1, g.ny - 3);
    let tx = fx - i as f64;
    let ty = fy - j as f64;
    let (wx, wy, dwx, dwy) = (weights(tx), weights(ty), dweights(tx), dweights(ty));
    let mut s = Sample { value: 0.0, dx: 0.0, dy: 0.0 };
    for b in 0..4 {
        for a in 0..4 {
            let k = g.idx(i + a - 1, j + b - 1);
            if !f.mask[k] {
                return None;
            }
            let v = f.values[k];
            s.value += wx[a] * wy[b] * v;
            s.dx += dwx[a] * wy[b] * v;
            s.dy += wx[a] * dwy[b] * v;
        }
    }
    s.dx /= g.h;
    s.dy /= g.h;
    Some(s)
}

/// Bicubic where possible, bilinear (with its cell-wise gradient) otherwise.
pub fn smooth_sample(f: &ScalarField, p: [f64; 2]) -> Option<Sample> {
    if let Some(s) = bicubic(f, p) {
        return Some(s);
    }
    let g = f.grid;
    let value = f.bilinear(p)?;
    let (fx, fy) = g.frac(p);
    let i = (fx.floor().max(0.0) as usize).min(g.nx - 2);
    let j = (fy.floor().max(0.0) as usize).min(g.ny - 2);
    let tx = fx - i as f64;
    let ty = fy - j as f64;
    let f00 = f.at(i, j);
    let f10 = f.at(i + 1, j);
    let f01 = f.at(i, j + 1);
    let f11 = f.at(i + 1, j + 1);
    let dx = ((f10 - f00) * (1.0 - ty) + (f11 - f01) * ty) / g.h;
    let dy = ((f01 - f00) * (1.0 - tx) + (f11 - f10) * tx) / g.h;
    Some(Sample { value, dx, dy })
}

/// Lagrange extrapolation from samples at offsets 0, 1, .., n-1 to offset `-m`.
fn extrapolate(samples: &[f64], m: f64) -> f64 {
    let x = -m;
    let n = samples.len();
    let mut total = 0.0;
    for (a, &fa) in samples.iter().enumerate() {
        let mut w = 1.0;
        for b in 0..n {
            if b != a {
                w *= (x - b as f64) / (a as f64 - b as f64);
            }
        }
        total += w * fa;
    }
    total
}

/// Extends every vertical run of active samples by `layers` nodes at each
/// end with cubic extrapolation; filled nodes become active and flagged.
pub fn extend_vertical(f: &ScalarField, layers: usize) -> ScalarField {
    let g = f.grid;
    let mut out = f.clone();
    for i in 0..g.nx {
        let mut j = 0;
        while j < g.ny {
            if !f.active(i, j) {
                j += 1;
                continue;
            }
            let start = j;
            while j < g.ny && f.active(i, j) {
                j += 1;
            }
            let end = j; // exclusive
            let run = end - start;
            let order = run.min(4);
            if order < 2 {
                continue;
            }
            let lower: Vec<f64> = (0..order).map(|k| f.at(i, start + k)).collect();
            for m in 1..=layers {
                if start < m {
                    break;
                }
                let k = g.idx(i, start - m);
                if f.mask[k] {
                    break;
                }
                out.values[k] = extrapolate(&lower, m as f64);
                out.mask[k] = true;
                out.flagged[k] = true;
            }
            let upper: Vec<f64> = (0..order).map(|k| f.at(i, end - 1 - k)).collect();
            for m in 1..=layers {
                let jj = end - 1 + m;
                if jj >= g.ny {
                    break;
                }
                let k = g.idx(i, jj);
                if f.mask[k] {
                    break;
                }
                out.values[k] = extrapolate(&upper, m as f64);
                out.mask[k] = true;
                out.flagged[k] = true;
            }
        }
    }
    out
}
