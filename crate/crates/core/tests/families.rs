use std::f64::consts::PI;

use liouville_lab::families::{
    complex_liouville_system, foliation_metric, jordan_block_system, make_flat_torus, make_foliation_metric,
    make_global_liouville, make_klein_liouville, make_linear_integral_torus, separation_gap, FoliationAngle,
    HolomorphicData, Validation,
};
use liouville_lab::flow::{curve_from_positions, unparam_geodesic_residual};
use liouville_lab::integrals::max_bracket_residual;
use liouville_lab::metric::{bilinear, mul2};
use liouville_lab::{Domain, FamilyError, GeometryError, Lattice, TrigPoly};
use num_complex::Complex64;
use proptest::prelude::*;

fn failed(err: FamilyError) -> Vec<String> {
    match err {
        FamilyError::Certificates(c) => c.into_iter().filter(|c| !c.passed).map(|c| c.name).collect(),
        other => panic!("expected certificate failure, got {other}"),
    }
}

fn x_fn() -> TrigPoly {
    TrigPoly::cosine(3.0, 1, 1.0, 1.0)
}

fn y_fn() -> TrigPoly {
    TrigPoly::sine(0.0, 1, 1.0, 1.0)
}

#[test]
fn touching_ranges_collide() {
    let x = TrigPoly::cosine(2.0, 1, 1.0, 1.0);
    let err = make_global_liouville(&x, &y_fn(), Lattice::unit_square(), -1.0, Validation::Strict).unwrap_err();
    assert_eq!(failed(err), vec!["separation_a".to_string()]);
    let err = liouville_lab::families::make_liouville(&x, &y_fn(), -1.0).unwrap_err();
    assert!(matches!(err, FamilyError::Collision { .. }), "{err}");
    assert!((separation_gap(&x_fn(), &y_fn()) - 1.0).abs() < 1e-12);
}

#[test]
fn period_mismatch_fails_periodicity() {
    let lattice = Lattice::new([0.7, 0.0], [0.0, 1.0]).unwrap();
    let err = make_global_liouville(&x_fn(), &y_fn(), lattice, -1.0, Validation::Strict).unwrap_err();
    assert!(failed(err).contains(&"periodicity_b".to_string()));
}

#[test]
fn skew_lattice_needs_both_periods() {
    // xi = (1, 1): X must be 1-periodic and Y must be 1-periodic, which holds
    let lattice = Lattice::new([1.0, 1.0], [0.0, 1.0]).unwrap();
    let sys = make_global_liouville(&x_fn(), &y_fn(), lattice, 1.0, Validation::Strict).unwrap();
    assert!(sys.lattice_invariance_defect(100) < 1e-12);
    let lattice = Lattice::new([1.0, 0.5], [0.0, 1.0]).unwrap();
    let err = make_global_liouville(&x_fn(), &y_fn(), lattice, 1.0, Validation::Strict).unwrap_err();
    assert!(failed(err).contains(&"periodicity_b".to_string()));
}

#[test]
fn constant_profile_is_strict_error_and_lenient_warning() {
    let y = TrigPoly::constant(0.0);
    let err = make_global_liouville(&x_fn(), &y, Lattice::unit_square(), -1.0, Validation::Strict).unwrap_err();
    assert_eq!(failed(err), vec!["nonconstant".to_string()]);
    let sys = make_global_liouville(&x_fn(), &y, Lattice::unit_square(), -1.0, Validation::Lenient).unwrap();
    let cert = sys.certificates.iter().find(|c| c.name == "nonconstant").unwrap();
    assert!(cert.detail.starts_with("warning"));
}

#[test]
fn liouville_null_chart_is_conformal_to_dudv() {
    let sys = make_global_liouville(&x_fn(), &y_fn(), Lattice::unit_square(), -1.0, Validation::Strict).unwrap();
    let chart = sys.null_chart.unwrap();
    let (f, integral, domain) = sys.in_null_chart().unwrap();
    let m = chart.matrix;
    let mt = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]];
    for uv in domain.grid(8) {
        let p = chart.to_original(uv);
        let pulled = mul2(&mul2(&mt, &sys.metric.values(p[0], p[1])), &m);
        assert!(pulled[0][0].abs() < 1e-14 && pulled[1][1].abs() < 1e-14);
        assert!((2.0 * pulled[0][1] - f.value(uv[0], uv[1])).abs() < 1e-13);
        assert!((f.value(uv[0], uv[1]) - (x_fn().value(p[0]) - y_fn().value(p[1]))).abs() < 1e-13);
        let c = integral.coefficients(uv[0], uv[1]);
        assert!((c[0] - 1.0).abs() < 1e-13 && (c[2] - 1.0).abs() < 1e-13);
    }
}

#[test]
fn klein_bottle_gluing() {
    let y = TrigPoly::cosine(0.0, 1, 1.0, 1.0);
    let sys = make_klein_liouville(&x_fn(), &y, 1.0, 1.0, -1.0).unwrap();
    assert_eq!(sys.lattice.unwrap().xi, [2.0, 0.0]);
    let err = make_klein_liouville(&x_fn(), &y_fn(), 1.0, 1.0, -1.0).unwrap_err();
    assert!(failed(err).contains(&"evenness_y".to_string()));
    let x_bad = TrigPoly::cosine(3.0, 1, 1.0, 2.0);
    let err = make_klein_liouville(&x_bad, &y, 1.0, 1.0, -1.0).unwrap_err();
    assert!(failed(err).contains(&"periodicity_x".to_string()));
}

#[test]
fn complex_liouville_checks() {
    let good = HolomorphicData::new(vec![Complex64::new(0.0, 3.0), Complex64::new(1.0, 0.0)]);
    let sys = complex_liouville_system(&good, Domain::rect(0.0, 1.0, 0.0, 1.0)).unwrap();
    assert!(sys.passed());
    // Im h = y - 0.5 changes sign on the unit square
    let bad = HolomorphicData::new(vec![Complex64::new(0.0, -0.5), Complex64::new(1.0, 0.0)]);
    let err = complex_liouville_system(&bad, Domain::rect(0.0, 1.0, 0.0, 1.0)).unwrap_err();
    assert!(matches!(err, FamilyError::NonpositiveConformalFactor { .. }), "{err}");
}

#[test]
fn jordan_block_degeneracy_inside_domain() {
    // Yhat + x/2 Y' = 3 + pi x cos(2 pi y) vanishes near |x| = 3/pi
    let err = jordan_block_system(&y_fn(), &TrigPoly::constant(3.0), 1.0, Domain::rect(-1.5, 1.5, 0.0, 1.0))
        .unwrap_err();
    assert!(matches!(err, FamilyError::Degenerate { .. }), "{err}");
    let sys = jordan_block_system(&y_fn(), &TrigPoly::constant(3.0), -1.0, Domain::rect(-0.4, 0.4, 0.0, 1.0)).unwrap();
    assert!(max_bracket_residual(&sys.metric, &sys.integral, &sys.grid(32)).unwrap() < 1e-12);
}

#[test]
fn linear_integral_signature_and_killing() {
    let k = TrigPoly::cosine(-2.0, 1, -1.0, 1.0);
    let l = TrigPoly::sine(0.0, 1, 0.3, 1.0);
    let m = TrigPoly::constant(1.0);
    let sys = make_linear_integral_torus(&k, &l, &m).unwrap();
    let r = sys.certificates.iter().find(|c| c.name == "killing_residual").unwrap();
    assert!(r.passed);
    let err = make_linear_integral_torus(&TrigPoly::constant(2.0), &l, &m).unwrap_err();
    assert!(matches!(err, FamilyError::Geometry(GeometryError::Signature { .. })), "{err}");
}

#[test]
fn flat_torus_has_two_integrals() {
    let sys = make_flat_torus(Lattice::new([1.0, 0.0], [0.25, 1.0]).unwrap()).unwrap();
    let names: Vec<String> = sys.named_integrals().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, vec!["F", "F2"]);
}

/// Leaf through `(x0, y0)` traced with classical RK4 on `(cos theta, sin theta)`.
fn trace_leaf(angle: &FoliationAngle, start: [f64; 2], dt: f64, n: usize) -> Vec<[f64; 2]> {
    let rhs = |p: [f64; 2]| angle.leaf_direction(p[1]);
    let mut out = vec![start];
    let mut p = start;
    for _ in 0..n {
        let k1 = rhs(p);
        let k2 = rhs([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]]);
        let k3 = rhs([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]]);
        let k4 = rhs([p[0] + dt * k3[0], p[1] + dt * k3[1]]);
        for i in 0..2 {
            p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(p);
    }
    out
}

#[test]
fn foliation_leaves_are_null_pregeodesics() {
    let angle = FoliationAngle::Trig { theta: TrigPoly::sine(PI / 4.0, 1, 0.2, 1.0) };
    let g = foliation_metric(&angle);
    let dt = 1e-3;
    let leaf = trace_leaf(&angle, [0.0, 0.1], dt, 600);
    for p in leaf.iter().step_by(50) {
        let u = angle.leaf_direction(p[1]);
        assert!(bilinear(&g.values(p[0], p[1]), u, u).abs() < 1e-14);
    }
    let r = unparam_geodesic_residual(&g, &curve_from_positions(&leaf, dt), dt).unwrap();
    assert!(r < 1e-6, "{r}");
}

#[test]
fn reeb_angle_turns_by_pi() {
    let angle = FoliationAngle::Reeb { y0: 0.0, y1: 0.5 };
    assert_eq!(angle.jet(0.0).v, 0.0);
    assert!((angle.jet(0.75).v - PI).abs() < 1e-15);
    let mut last = -1.0;
    for k in 0..=100 {
        let v = angle.jet(0.005 * k as f64).v;
        assert!(v >= last);
        last = v;
    }
    let sys = make_foliation_metric("reeb", &angle).unwrap();
    assert!(sys.passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separated_liouville_families_commute(c1 in -1.0f64..1.0, s1 in -1.0f64..1.0, c2 in -0.5f64..0.5,
                                            d1 in -1.0f64..1.0, e1 in -1.0f64..1.0, eps in prop::bool::ANY) {
        let x = TrigPoly::new(5.0, vec![c1, c2], vec![s1], 1.0);
        let y = TrigPoly::new(0.0, vec![d1], vec![e1, 0.3], 1.0);
        let eps = if eps { 1.0 } else { -1.0 };
        let sys = make_global_liouville(&x, &y, Lattice::unit_square(), eps, Validation::Lenient).unwrap();
        prop_assert!(max_bracket_residual(&sys.metric, &sys.integral, &sys.grid(12)).unwrap() <= 1e-10);
        prop_assert!(sys.lattice_invariance_defect(50) <= 1e-12);
    }

    #[test]
    fn separation_gap_is_a_lower_bound(c in -3.0f64..3.0, a in 0.1f64..2.0) {
        let x = TrigPoly::cosine(c, 1, a, 1.0);
        let gap = separation_gap(&x, &y_fn());
        for k in 0..50 {
            let t = k as f64 / 50.0;
            for j in 0..50 {
                let s = j as f64 / 50.0;
                prop_assert!((x.value(t) - y_fn().value(s)).abs() >= gap - 1e-12);
            }
        }
    }
}
