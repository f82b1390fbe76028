use num_complex::Complex64;
use proptest::prelude::*;

use freeboundary::bernoulli::{assemble_from_graphs, branching_set, make_two_plane, residuals_two_phase, TwoPlaneModel};
use freeboundary::complex::{cauchy_riemann_residual, circle_path, complex_gradient, harmonic_conjugate, integrate_form};
use freeboundary::counterexample::{flat_profile, IntervalUnion};
use freeboundary::grid::{ComplexField, GridSpec, OneForm, ScalarField};
use freeboundary::harmonic::{solve_dirichlet_harmonic, SolverOptions};
use freeboundary::membrane::{build_chart, sym_eigen, J_MIN};
use freeboundary::obstacle::*;
use freeboundary::weierstrass::{build_data, integrate_surface, surface_report, FLATNESS_THRESHOLD};

fn square(h: f64) -> GridSpec {
    GridSpec::aligned(-1.0, 1.0, -1.0, 1.0, h).unwrap()
}

/// Real part of `Σ c_k z^k` for `k ≤ 3`: a harmonic polynomial.
fn harmonic_cubic(c: [(f64, f64); 4]) -> impl Fn(f64, f64) -> f64 {
    move |x, y| {
        let z = Complex64::new(x, y);
        c.iter().enumerate().map(|(k, &(a, b))| (Complex64::new(a, b) * z.powu(k as u32)).re).sum()
    }
}

fn coeffs() -> impl Strategy<Value = [(f64, f64); 4]> {
    prop::array::uniform4((-1.0f64..1.0, -1.0f64..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cr_residual_of_harmonic_gradient_is_second_order(c in coeffs()) {
        let v = harmonic_cubic(c);
        let mut worst = [0.0f64; 2];
        for (n, h) in [0.0625, 0.03125].into_iter().enumerate() {
            let f = ScalarField::from_fn(square(h), &v);
            let cr = cauchy_riemann_residual(&complex_gradient(&f).unwrap());
            let g = cr.grid;
            for j in 2..g.ny - 2 {
                for i in 2..g.nx - 2 {
                    let k = g.idx(i, j);
                    if cr.mask[k] && !cr.flagged[k] {
                        worst[n] = worst[n].max(cr.values[k].abs());
                    }
                }
            }
        }
        let scale: f64 = c.iter().map(|p| p.0.abs() + p.1.abs()).sum::<f64>() + 1.0;
        prop_assert!(worst[0] <= 10.0 * scale * 0.0625f64.powi(2), "{worst:?}");
        prop_assert!(worst[1] <= 10.0 * scale * 0.03125f64.powi(2), "{worst:?}");
    }

    #[test]
    fn conjugate_reconstruction_keeps_the_imaginary_part(c in coeffs()) {
        let v = ScalarField::from_fn(square(0.125), harmonic_cubic(c));
        let vbar = harmonic_conjugate(&v, [0.0, 0.0]).unwrap().field;
        let back = ComplexField::from_parts(&vbar, &v).imag_part();
        for k in 0..v.values.len() {
            if back.mask[k] {
                prop_assert_eq!(back.values[k], v.values[k]);
            }
        }
    }

    #[test]
    fn closed_loop_integral_of_an_exact_form(c in coeffs(), r in 0.2f64..0.7) {
        // α = dφ for a smooth φ, sampled exactly: closedness is O(h²)
        let phi = harmonic_cubic(c);
        let h = 1.0 / 64.0;
        let g = square(h);
        let e = 1e-6;
        let form = OneForm::from_fn(g, |x, y| {
            ((phi(x + e, y) - phi(x - e, y)) / (2.0 * e), (phi(x, y + e) - phi(x, y - e)) / (2.0 * e))
        });
        let eps = form.closedness_residual().values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = integrate_form(&form, &circle_path([0.0, 0.0], r, 256)).unwrap();
        let area = std::f64::consts::PI * r * r;
        prop_assert!(p.abs() <= eps * area + 50.0 * h * h, "{p} eps {eps}");
    }

    #[test]
    fn dirichlet_solve_is_exact_on_harmonic_cubics(c in coeffs()) {
        let g = square(0.0625);
        let exact = ScalarField::from_fn(g, harmonic_cubic(c));
        let mask = vec![true; g.len()];
        let opts = SolverOptions { tol: 1e-14, ..SolverOptions::default() };
        let (u, _) = solve_dirichlet_harmonic(g, &mask, &exact, &opts).unwrap();
        let err = u.values.iter().zip(&exact.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn two_plane_residuals_vanish(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (lp, lm) = (10f64.powf(a), 10f64.powf(b));
        let s = make_two_plane(lp, lm, square(0.125)).unwrap();
        let rep = residuals_two_phase(&s, None, 1.0);
        let roundoff = 1e-13 * (1.0 + lp + lm);
        for c in &rep.checks {
            prop_assert!(c.sup <= roundoff, "{} = {}", c.name, c.sup);
        }
    }

    #[test]
    fn branching_set_is_stable_and_reflection_invariant(
        l in -0.6f64..-0.1, r in 0.1f64..0.6, slope in 0.5f64..1.0, up in 0.2f64..0.4,
    ) {
        let h = 1.0 / 64.0;
        let g = square(h);
        // a gap opening outside [l, r] with slope `slope`, capped at `up`;
        // it exceeds 8h well inside the window on both sides
        let ep: Vec<f64> = (0..g.nx).map(|i| (slope * (g.x(i) - r).max(l - g.x(i)).max(0.0)).min(up)).collect();
        let em: Vec<f64> = ep.iter().map(|v| -v).collect();
        let m = TwoPlaneModel { lambda_plus: 1.0, lambda_minus: 1.0 };
        let s = assemble_from_graphs(g, &ep, &em, 1.0, 1.0, &m).unwrap();
        let tol = 8.0 * h;
        let b1 = branching_set(&s, Some(tol)).unwrap().points;
        let b2 = branching_set(&s, Some(tol / 2.0)).unwrap().points;
        prop_assert_eq!(b1.len(), b2.len());
        for (x, y) in b1.iter().zip(&b2) {
            prop_assert!((x - y).abs() <= 2.0 * h, "{b1:?} {b2:?}");
        }
        let epr: Vec<f64> = ep.iter().rev().cloned().collect();
        let emr: Vec<f64> = em.iter().rev().cloned().collect();
        let sr = assemble_from_graphs(g, &epr, &emr, 1.0, 1.0, &m).unwrap();
        let mut br: Vec<f64> = branching_set(&sr, Some(tol)).unwrap().points.iter().map(|x| -x).collect();
        br.sort_by(f64::total_cmp);
        prop_assert_eq!(b1.len(), br.len());
        for (x, y) in b1.iter().zip(&br) {
            prop_assert!((x - y).abs() < 1e-12, "{b1:?} {br:?}");
        }
    }

    #[test]
    fn two_plane_surfaces_are_conformal_and_bounded(a in 0.0f64..1.4) {
        let s = make_two_plane(10f64.powf(a), 1.0, square(0.0625)).unwrap();
        let (p, m) = build_data(&s, FLATNESS_THRESHOLD).unwrap();
        for d in [&p, &m] {
            let surf = integrate_surface(d).unwrap();
            let rep = surface_report(&surf, 1e-10);
            for n in ["conformality", "x3_closed_form", "boundary_inclusion", "route_agreement"] {
                prop_assert!(rep.get(n).unwrap().pass, "{n} = {}", rep.sup(n));
            }
        }
    }

    #[test]
    fn chart_inversion_round_trips(a in 0.0f64..1.4, s in -0.5f64..0.5, t in 0.05f64..0.5) {
        let sol = make_two_plane(10f64.powf(a), 1.0, square(0.0625)).unwrap();
        let (p, _) = build_data(&sol, FLATNESS_THRESHOLD).unwrap();
        let surf = integrate_surface(&p).unwrap();
        let chart = build_chart(&p, &surf, J_MIN).unwrap();
        let inv = chart.invert([s, t]);
        prop_assert!(inv.converged);
        let (fwd, _) = chart.eval(inv.source).unwrap();
        prop_assert!((fwd[0] - s).abs() < 1e-10 && (fwd[1] - t).abs() < 1e-10, "{fwd:?}");
        let g = chart.grid();
        for k in 0..g.len() {
            if chart.region[k] {
                prop_assert!((chart.jacobian.values[k] - chart.jacobian_closed.values[k]).abs() < 1e-10);
                prop_assert!(chart.jacobian.values[k] > 0.0);
            }
        }
    }

    #[test]
    fn nonlinear_b_eigenvalues_within_bounds(px in -2.0f64..2.0, py in -2.0f64..2.0, qx in -2.0f64..2.0, qy in -2.0f64..2.0) {
        use freeboundary::membrane::{integral_matrix, MembraneKind};
        let b = integral_matrix(MembraneKind::Nonlinear, [px, py], [qx, qy]);
        let (lo, hi) = sym_eigen(b);
        // largest and smallest |p| on the segment from p to q
        let gmax2 = (px * px + py * py).max(qx * qx + qy * qy);
        let (dx, dy) = (qx - px, qy - py);
        let t = (-(px * dx + py * dy) / (dx * dx + dy * dy).max(1e-300)).clamp(0.0, 1.0);
        let gmin2 = (px + t * dx).powi(2) + (py + t * dy).powi(2);
        prop_assert!(lo >= (1.0 + gmax2).powf(-1.5) - 1e-12, "{lo}");
        prop_assert!(hi <= (1.0 + gmin2).powf(-0.5) + 1e-12, "{hi}");
    }

    #[test]
    fn flat_profile_vanishes_exactly_on_k(
        a in -0.9f64..-0.3, w1 in 0.0f64..0.3, gap in 0.2f64..0.4, w2 in 0.0f64..0.3,
    ) {
        let k = IntervalUnion::new(&[(a, a + w1), (a + w1 + gap, a + w1 + gap + w2)]).unwrap();
        let ends = k.boundary();
        for i in 0..=400 {
            let x = -1.0 + i as f64 / 200.0;
            let f = flat_profile(&k, x);
            prop_assert_eq!(f == 0.0, k.contains(x), "x = {}", x);
            prop_assert!(f <= 0.0);
            // the profile falls below the floor only close to ∂K
            let near = ends.iter().any(|e| (x - e).abs() <= 0.05);
            if !near && !k.contains(x) {
                prop_assert!(f < -f64::MIN_POSITIVE, "clamped at {}", x);
            }
        }
    }
}

fn obstacle_data() -> impl Strategy<Value = ObstacleData> {
    prop_oneof![
        Just(ObstacleData::HalfSpace),
        (0.2f64..0.6).prop_map(|r| ObstacleData::Radial { r }),
        (0.0f64..0.4).prop_map(|a| ObstacleData::Strip { a }),
        (0.1f64..0.3, 0.1f64..0.5).prop_map(|(a, beta)| ObstacleData::Pinched { a, beta }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn obstacle_conjugate_identity_and_equal_cr(data in obstacle_data()) {
        let sol = solve_obstacle(&|p| data.value(p), square(1.0 / 32.0), &ObstacleOptions::default()).unwrap();
        let rep = conjugate_report(&sol, 1.0 / 16.0, 1.0);
        prop_assert!(rep.sup("identity") <= 1e-12);
        prop_assert!(rep.sup("cr_difference") <= 1e-9);
    }

    #[test]
    fn obstacle_branching_is_reflection_invariant(a in 0.1f64..0.3, beta in 0.15f64..0.45, c in -0.2f64..0.2) {
        // off-centre pinched strip
        let data = move |p: [f64; 2]| 0.5 * (p[1].abs() - a).max(0.0).powi(2) + beta * (1.0 - (p[0] - c).powi(2)).max(0.0);
        let h = 1.0 / 32.0;
        let g = square(h);
        let sol = solve_obstacle(&data, g, &ObstacleOptions::default()).unwrap();
        let mut u = sol.u.clone();
        for j in 0..g.ny {
            for i in 0..g.nx {
                u.values[g.idx(i, j)] = sol.u.values[g.idx(g.nx - 1 - i, j)];
            }
        }
        let mirrored = ObstacleSolution::from_field(u).unwrap();
        let set = |s: &ObstacleSolution| {
            let gr = derivative_graphs(s, h);
            let st = stratify_boundary(s, &DENSITY_RADII);
            branching_points_obstacle(&gr, &st, h).points
        };
        let b = set(&sol);
        let mut bm: Vec<f64> = set(&mirrored).iter().map(|x| -x).collect();
        bm.sort_by(f64::total_cmp);
        prop_assert_eq!(b.len(), bm.len(), "{:?} {:?}", b, bm);
        for (x, y) in b.iter().zip(&bm) {
            prop_assert!((x - y).abs() < 1e-9, "{b:?} {bm:?}");
        }
    }
}
