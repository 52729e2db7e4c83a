use std::f64::consts::PI;
use std::sync::Arc;

use liouville_lab::families::{make_global_liouville, make_jordan_block, Validation};
use liouville_lab::field::{ScalarField2D, TrigPoly};
use liouville_lab::integrals::{
    bracket_from_sys, eigen_data, fit_to_hamiltonian, is_square_of_linear, max_bracket_residual, perfect_coordinate,
    poisson_bracket, sys_residuals, trace_l, AdmissibleChange, SquareTest,
};
use liouville_lab::jet::Jet;
use liouville_lab::metric::MetricField;
use liouville_lab::{Domain, Lattice, QuadraticIntegral};
use proptest::prelude::*;

fn wavy_f() -> ScalarField2D {
    ScalarField2D::analytic(|x, y| (Jet::var_x(x) * 2.0 + Jet::var_y(y)).sin() * 0.4 + Jet::var_y(y).cos() * 0.3 + 2.0)
}

fn wavy_integral() -> QuadraticIntegral {
    QuadraticIntegral::from_jet_fn(|x, y| {
        let (x, y) = (Jet::var_x(x), Jet::var_y(y));
        [(x + y * y).sin(), x * y + 1.0, (x * 3.0).cos() * y]
    })
}

/// `{H, F}` by central differences of `H` and `F` in phase space.
fn bracket_by_differences(g: &MetricField, f: &QuadraticIntegral, p: [f64; 2], q: [f64; 2]) -> f64 {
    let h = |x: f64, y: f64, px: f64, py: f64| {
        let gi = g.inverse_metric_at([x, y]).unwrap();
        0.5 * (gi[0][0] * px * px + 2.0 * gi[0][1] * px * py + gi[1][1] * py * py)
    };
    let e = 1e-5;
    let d = |fun: &dyn Fn([f64; 4]) -> f64, k: usize| {
        let mut up = [p[0], p[1], q[0], q[1]];
        let mut dn = up;
        up[k] += e;
        dn[k] -= e;
        (fun(up) - fun(dn)) / (2.0 * e)
    };
    let hf = |z: [f64; 4]| h(z[0], z[1], z[2], z[3]);
    let ff = |z: [f64; 4]| f.eval(z[0], z[1], z[2], z[3]);
    (0..2).map(|k| d(&hf, k + 2) * d(&ff, k) - d(&hf, k) * d(&ff, k + 2)).sum()
}

#[test]
fn bracket_matches_phase_space_differences() {
    let g = MetricField::null_coordinates(wavy_f());
    let f = wavy_integral();
    for (p, q) in [([0.1, 0.2], [1.0, 0.5]), ([-0.7, 0.3], [-0.4, 1.2]), ([1.3, -0.9], [0.8, -0.8])] {
        let exact = poisson_bracket(&g, &f, p, q).unwrap();
        let oracle = bracket_by_differences(&g, &f, p, q);
        assert!((exact - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()), "{exact} vs {oracle}");
    }
}

#[test]
fn bracket_matches_system_form_in_null_coordinates() {
    let f = wavy_f();
    let g = MetricField::null_coordinates(f.clone());
    let integral = wavy_integral();
    for k in 0..20 {
        let p = [0.13 * k as f64 - 1.0, 0.71 - 0.09 * k as f64];
        let th = 0.37 * k as f64;
        let q = [th.cos(), th.sin()];
        let a = poisson_bracket(&g, &integral, p, q).unwrap();
        let b = bracket_from_sys(&f, &integral, p, q);
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{a} vs {b}");
    }
}

fn liouville() -> (liouville_lab::TorusSystem, TrigPoly) {
    let x = TrigPoly::cosine(3.0, 1, 1.0, 1.0);
    let y = TrigPoly::sine(0.0, 1, 1.0, 1.0);
    (make_global_liouville(&x, &y, Lattice::unit_square(), -1.0, Validation::Strict).unwrap(), y)
}

#[test]
fn liouville_integral_has_zero_bracket_and_perturbation_breaks_it() {
    let (sys, _) = liouville();
    let grid = sys.grid(32);
    let r0 = max_bracket_residual(&sys.metric, &sys.integral, &grid).unwrap();
    assert!(r0 <= 1e-12, "{r0}");
    let bump = QuadraticIntegral::new(
        ScalarField2D::constant(0.0),
        ScalarField2D::from_x(TrigPoly::sine(0.0, 1, 1e-3, 1.0)),
        ScalarField2D::constant(0.0),
    );
    let r1 = max_bracket_residual(&sys.metric, &sys.integral.combine(1.0, &bump, 1.0), &grid).unwrap();
    assert!(r1 > 1e-6, "{r1}");
}

#[test]
fn system_residuals_vanish_for_jordan_block_in_null_coordinates() {
    let y = TrigPoly::sine(0.0, 1, 1.0, 1.0);
    let yhat = TrigPoly::constant(3.0);
    let domain = Domain::rect(-0.4, 0.4, 0.0, 1.0);
    let (g, f) = make_jordan_block(&y, &yhat, 1.0, &domain).unwrap();
    let conformal = g.g12.map(|j| j * 2.0);
    for p in domain.grid(16) {
        let r = sys_residuals(&conformal, &f, p);
        assert!(r.iter().all(|v| v.abs() <= 1e-12), "{r:?} at {p:?}");
    }
}

#[test]
fn trace_of_hamiltonian_and_liouville_integral() {
    let (sys, _) = liouville();
    let h = sys.hamiltonian();
    for p in sys.grid(8) {
        // H coefficients are g^{ij}/2, so the mixed tensor is I/2.
        assert!((trace_l(&h, &sys.metric, p).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn perfect_coordinate_matches_closed_form() {
    let a = |x: f64| (2.0 + (2.0 * PI * x).cos()).powi(2);
    let pc = perfect_coordinate(a, 0.0, 0.45, 900).unwrap();
    assert!(pc.is_strictly_increasing());
    let oracle = |x: f64| ((PI * x).tan() / 3f64.sqrt()).atan() / (PI * 3f64.sqrt());
    for (x, v) in pc.xs.iter().zip(&pc.values) {
        assert!((v - oracle(*x)).abs() < 1e-12, "{v} vs {}", oracle(*x));
    }
    for v in pc.pulled_back_a(a) {
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }
}

#[test]
fn perfect_coordinate_rejects_zero_crossing() {
    assert!(perfect_coordinate(|x| (2.0 * PI * x).cos(), 0.0, 0.5, 64).is_err());
}

#[test]
fn admissible_change_round_trip() {
    let (sys, _) = liouville();
    let change = AdmissibleChange {
        phi: Arc::new(|x| (x + 0.1 * x.sin(), 1.0 + 0.1 * x.cos())),
        phi_inv: Arc::new(|xn| {
            let mut x = xn;
            for _ in 0..60 {
                x -= (x + 0.1 * x.sin() - xn) / (1.0 + 0.1 * x.cos());
            }
            x
        }),
        psi: Arc::new(|y| (2.0 * y, 2.0)),
        psi_inv: Arc::new(|yn| 0.5 * yn),
    };
    let there = change.transform(&sys.integral);
    let back = change.inverse().transform(&there);
    for p in sys.grid(6) {
        let a = sys.integral.coefficients(p[0], p[1]);
        let b = back.coefficients(p[0], p[1]);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-9, "{a:?} vs {b:?}");
        }
        let (_, d) = (change.phi)(p[0]);
        let n = there.coefficients((change.phi)(p[0]).0, 2.0 * p[1]);
        assert!((n[0] - d * d * a[0]).abs() < 1e-9);
    }
}

#[test]
fn square_of_killing_momentum_is_detected() {
    let g = MetricField::null_coordinates(ScalarField2D::from_y(TrigPoly::cosine(2.0, 1, 0.5, 1.0)));
    let f = QuadraticIntegral::constant(1.0, 0.0, 0.0);
    let grid = Domain::rect(0.0, 1.0, 0.0, 1.0).grid(8);
    match is_square_of_linear(&f, &g, &grid, 1e-10) {
        SquareTest::Square { killing_residual, sign, .. } => {
            assert!(killing_residual < 1e-12);
            assert_eq!(sign, 1.0);
        }
        other => panic!("{other:?}"),
    }
    let h = QuadraticIntegral::hamiltonian(&g);
    assert!(matches!(is_square_of_linear(&h, &g, &grid, 1e-10), SquareTest::NotSquare { .. }));
    let (k, res) = fit_to_hamiltonian(&h.scaled(-2.5), &g, &grid);
    assert!((k + 2.5).abs() < 1e-12 && res < 1e-12);
}

proptest! {
    #[test]
    fn real_spectrum_when_frame_coefficients_share_sign(a in 0.1f64..3.0, c in 0.1f64..3.0, b in -3.0f64..3.0, s in prop::bool::ANY) {
        let sign = if s { 1.0 } else { -1.0 };
        let g = MetricField::null_coordinates(ScalarField2D::constant(1.5));
        let f = QuadraticIntegral::constant(sign * a, b, sign * c);
        let e = eigen_data(&f, &g, [0.0, 0.0]).unwrap();
        prop_assert!(e.discriminant > 0.0);
        prop_assert!(e.e1.im == 0.0 && e.e2.im == 0.0);
    }

    #[test]
    fn trace_is_linear(a1 in -2.0f64..2.0, b1 in -2.0f64..2.0, c1 in -2.0f64..2.0,
                       a2 in -2.0f64..2.0, b2 in -2.0f64..2.0, c2 in -2.0f64..2.0,
                       s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let (sys, _) = liouville();
        let f1 = QuadraticIntegral::constant(a1, b1, c1);
        let f2 = QuadraticIntegral::constant(a2, b2, c2);
        let p = [0.3, 0.8];
        let lhs = trace_l(&f1.combine(s, &f2, t), &sys.metric, p).unwrap();
        let rhs = s * trace_l(&f1, &sys.metric, p).unwrap() + t * trace_l(&f2, &sys.metric, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bracket_is_linear_and_kills_hamiltonian(x in -1.0f64..1.0, y in -1.0f64..1.0, th in 0.0f64..6.28, s in -2.0f64..2.0) {
        let g = MetricField::null_coordinates(wavy_f());
        let f = wavy_integral();
        let h = QuadraticIntegral::hamiltonian(&g);
        let q = [th.cos(), th.sin()];
        let p = [x, y];
        let hb = poisson_bracket(&g, &h, p, q).unwrap();
        prop_assert!(hb.abs() < 1e-12);
        let lhs = poisson_bracket(&g, &f.combine(s, &h, 1.7), p, q).unwrap();
        let rhs = s * poisson_bracket(&g, &f, p, q).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()));
    }
}
