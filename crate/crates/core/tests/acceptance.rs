//! Acceptance suite: one PASS/FAIL line per criterion, all asserted at the end.

use std::f64::consts::PI;
use std::time::Instant;

use liouville_lab::config::{FamilyConfig, PRESET_NAMES};
use liouville_lab::equivalence::{
    geodesic_equivalence_check, integral_from_pair, metric_from_integral, min_eigenvalue, projective_integral,
    riemannianize, superintegrability_rank, transfer_killing,
};
use liouville_lab::flow::{conservation_report, integrate, random_initial_conditions, PhaseFunction};
use liouville_lab::integrals::{
    bk_closedness, bk_structure_defect, classify_grid, eigen_data, max_bracket_residual, max_killing_residual,
    trace_l,
};
use liouville_lab::{
    Domain, Jet, MetricField, PhaseState, QuadraticIntegral, ScalarField2D, StepControl, TorusSystem, TypeLabel,
    VectorField2D,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BRACKET_TOL: f64 = 1e-8;
const STRUCTURE_TOL: f64 = 1e-9;
const CLOSEDNESS_TOL: f64 = 1e-8;
const TRACE_TOL: f64 = 1e-10;
const DISCRIMINANT_TOL: f64 = 1e-10;
const JORDAN_EIGEN_TOL: f64 = 1e-8;
const F_DRIFT_TOL: f64 = 1e-6;
const H_DRIFT_TOL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-9;
const EQUIVALENCE_TOL: f64 = 1e-4;
const KILLING_TOL: f64 = 1e-10;
const CURVATURE_TOL: f64 = 1e-8;
const PROJECTIVE_ZERO_TOL: f64 = 1e-12;
const PROJECTIVE_DRIFT_TOL: f64 = 1e-6;
const REVERSAL_TOL: f64 = 1e-6;
const STRAIGHT_LINE_TOL: f64 = 1e-10;

struct Ledger {
    failures: Vec<String>,
}

impl Ledger {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(format!("{id}: {detail}"));
        }
    }
}

fn preset(name: &str) -> TorusSystem {
    FamilyConfig::preset(name).unwrap().build().unwrap()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn bracket_vanishing(l: &mut Ledger) {
    for name in PRESET_NAMES {
        let start = Instant::now();
        let sys = preset(name);
        let grid = sys.grid(64);
        let worst = max_abs(
            sys.named_integrals().iter().map(|(_, f)| max_bracket_residual(&sys.metric, f, &grid).unwrap()),
        );
        let secs = start.elapsed().as_secs_f64();
        l.record(
            "1",
            worst <= BRACKET_TOL && secs <= 10.0,
            format!("{name}: max bracket residual {worst:.3e} <= {BRACKET_TOL:e}, {secs:.2} s <= 10 s"),
        );
    }
}

fn conservation(l: &mut Ledger) {
    let start = Instant::now();
    let sys = preset("global_liouville");
    let starts = random_initial_conditions(&sys.metric, &sys.domain, 10, 42, 0.5).unwrap();
    let mut f_drift: f64 = 0.0;
    let mut h_drift: f64 = 0.0;
    for s in &starts {
        let traj = integrate(&sys.metric, s, 10.0, &StepControl::default()).unwrap();
        f_drift = f_drift.max(conservation_report(&traj, &sys.integral));
        h_drift = h_drift.max(traj.h_drift);
    }
    let secs = start.elapsed().as_secs_f64();
    l.record(
        "2",
        f_drift <= F_DRIFT_TOL && h_drift <= H_DRIFT_TOL && secs <= 60.0,
        format!(
            "global_liouville, 10 ICs, T=10: F drift {f_drift:.3e} <= {F_DRIFT_TOL:e}, H drift {h_drift:.3e} <= {H_DRIFT_TOL:e}, {secs:.1} s <= 60 s"
        ),
    );
}

fn structure(l: &mut Ledger) {
    for name in PRESET_NAMES {
        let sys = preset(name);
        match sys.in_null_chart() {
            Some((_, f, domain)) => {
                let (a_var, c_var) = bk_structure_defect(&f, &domain, 64);
                l.record(
                    "3",
                    a_var <= STRUCTURE_TOL && c_var <= STRUCTURE_TOL,
                    format!("{name} (null chart): a y-variation {a_var:.3e}, c x-variation {c_var:.3e} <= {STRUCTURE_TOL:e}"),
                );
            }
            None => {
                let mut worst: f64 = 0.0;
                let mut defined = 0usize;
                for p in sys.grid(64) {
                    let (d1, d2) = bk_closedness(&sys.integral, &sys.metric, p, 1e-9).unwrap();
                    for d in [d1, d2].into_iter().flatten() {
                        worst = worst.max(d.abs());
                        defined += 1;
                    }
                }
                l.record(
                    "3",
                    worst <= CLOSEDNESS_TOL && defined > 0,
                    format!("{name} (no linear null chart): max |d B| {worst:.3e} <= {CLOSEDNESS_TOL:e} over {defined} samples"),
                );
            }
        }
    }
}

fn trace_identity(l: &mut Ledger) {
    let cfg = FamilyConfig::preset("jordan_block").unwrap();
    let sys = cfg.build().unwrap();
    let y = cfg.functions["Y"].to_trig().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = sys.domain.point(rng.gen(), rng.gen());
        let tr = trace_l(&sys.integral, &sys.metric, p).unwrap();
        worst = worst.max((tr + cfg.epsilon * y.value(p[1]) / 2.0).abs());
    }
    l.record("4", worst <= TRACE_TOL, format!("jordan_block: max |L + Y/2| {worst:.3e} <= {TRACE_TOL:e} at 1000 points"));
}

fn eigen_regimes(l: &mut Ledger) {
    let sys = preset("global_liouville");
    let pts = sys.grid(64);
    let distinct = pts
        .iter()
        .filter(|p| {
            let e = eigen_data(&sys.integral, &sys.metric, **p).unwrap();
            e.discriminant > 0.0 && (e.e1 - e.e2).norm() > 1e-8
        })
        .count();
    l.record(
        "5",
        distinct == pts.len(),
        format!("global_liouville: real distinct eigenvalues at {distinct}/{} cells", pts.len()),
    );

    let sys = preset("jordan_block");
    let mut disc: f64 = 0.0;
    let mut eig: f64 = 0.0;
    for p in sys.grid(64) {
        let e = eigen_data(&sys.integral, &sys.metric, p).unwrap();
        let f = 2.0 * sys.metric.values(p[0], p[1])[0][1];
        let b = sys.integral.coefficients(p[0], p[1])[1];
        disc = disc.max(e.discriminant.abs());
        eig = eig.max((e.e1.re - f * b / 4.0).abs()).max((e.e2.re - f * b / 4.0).abs());
    }
    l.record(
        "5",
        disc <= DISCRIMINANT_TOL && eig <= JORDAN_EIGEN_TOL,
        format!("jordan_block: |D| {disc:.3e} <= {DISCRIMINANT_TOL:e}, |lambda - f b/4| {eig:.3e} <= {JORDAN_EIGEN_TOL:e}"),
    );

    let sys = preset("complex_liouville");
    let pts = sys.grid(64);
    let conjugate = pts
        .iter()
        .filter(|p| {
            let e = eigen_data(&sys.integral, &sys.metric, **p).unwrap();
            e.discriminant < 0.0 && (e.e1.conj() - e.e2).norm() < 1e-12 * (1.0 + e.e1.norm())
        })
        .count();
    l.record(
        "5",
        conjugate == pts.len(),
        format!("complex_liouville: conjugate pair at {conjugate}/{} cells", pts.len()),
    );
}

fn classification(l: &mut Ledger) {
    let sys = preset("mixed_foliation");
    let r = classify_grid(&sys.integral, &sys.metric, &sys.domain, 128).unwrap();
    let j = r.jordan_fraction();
    l.record("6", (j - 0.5).abs() <= 0.05, format!("mixed_foliation 128x128: JORDAN fraction {j:.4} in 0.5 +- 0.05"));
    let sys = preset("jordan_foliation");
    let r = classify_grid(&sys.integral, &sys.metric, &sys.domain, 64).unwrap();
    let j = r.jordan_fraction();
    l.record("6", j == 1.0, format!("jordan_foliation: JORDAN fraction {j}"));
    let sys = preset("global_liouville");
    let r = classify_grid(&sys.integral, &sys.metric, &sys.domain, 64).unwrap();
    let f = r.fraction(TypeLabel::Liouville);
    l.record("6", f == 1.0, format!("global_liouville: LIOUVILLE fraction {f}"));
}

fn equivalence(l: &mut Ledger) {
    let start = Instant::now();
    let names = ["global_liouville", "complex_liouville", "jordan_block", "linear_integral_torus", "flat_torus"];
    let systems: Vec<TorusSystem> = names.iter().map(|n| preset(n)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let sys = &systems[k % systems.len()];
        let p = sys.domain.point(rng.gen(), rng.gen());
        let gbar = loop {
            let m = [[rng.gen_range(-2.0..2.0), 0.0], [0.0, rng.gen_range(-2.0..2.0)]];
            let off: f64 = rng.gen_range(-1.0..1.0);
            let m = [[m[0][0], off], [off, m[1][1]]];
            if (m[0][0] * m[1][1] - off * off).abs() > 0.1 {
                break m;
            }
        };
        let gbar_field = MetricField::constant(gbar);
        let [a, b, c] = integral_from_pair(&sys.metric, &gbar_field, p).unwrap();
        let back = metric_from_integral(&sys.metric, &QuadraticIntegral::constant(a, b, c), p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((back[i][j] - gbar[i][j]).abs() / (1.0 + gbar[i][j].abs()));
            }
        }
    }
    l.record("7", worst <= ROUND_TRIP_TOL, format!("round trip on 100 pairs: {worst:.3e} <= {ROUND_TRIP_TOL:e}"));

    let sys = preset("global_liouville");
    let riem = riemannianize(&sys, 64).unwrap();
    let g_min = sys
        .grid(64)
        .iter()
        .map(|p| min_eigenvalue(&riem.pair.gbar.metric_at(*p).unwrap()))
        .fold(f64::INFINITY, f64::min);
    let mut pair = riem.pair;
    let residual =
        geodesic_equivalence_check(&mut pair, &sys.domain, 10, 5.0, 42, &StepControl::default(), 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    l.record(
        "7",
        g_min > 0.0 && residual <= EQUIVALENCE_TOL && secs <= 120.0,
        format!(
            "riemannianized global_liouville: min eigenvalue {g_min:.3e} > 0, equivalence residual {residual:.3e} <= {EQUIVALENCE_TOL:e}, {secs:.1} s <= 120 s"
        ),
    );
}

fn killing_transfer(l: &mut Ledger) {
    let g = MetricField::null_coordinates(ScalarField2D::constant(1.0));
    let gbar = MetricField::constant([[1.0, 0.0], [0.0, 1.0]]);
    let grid = Domain::rect(-1.0, 1.0, -1.0, 1.0).grid(16);
    let k = transfer_killing(&g, &gbar, &VectorField2D::constant(1.0, 0.0));
    let r = max_killing_residual(&g, &k, &grid);
    l.record("8", r <= KILLING_TOL, format!("flat pair, Kbar = d/dx: Killing residual {r:.3e} <= {KILLING_TOL:e}"));

    for name in ["flat_torus", "linear_integral_torus", "mixed_foliation"] {
        let sys = preset(name);
        let kbar = sys.killing.clone().unwrap();
        let c = 3.0;
        let gbar = MetricField::new(
            sys.metric.g11.map(move |j| j * c),
            sys.metric.g12.map(move |j| j * c),
            sys.metric.g22.map(move |j| j * c),
            sys.metric.signature,
        );
        let k = transfer_killing(&sys.metric, &gbar, &kbar);
        let r = max_killing_residual(&sys.metric, &k, &sys.grid(32));
        l.record("8", r <= KILLING_TOL, format!("{name}, gbar = 3 g: Killing residual {r:.3e} <= {KILLING_TOL:e}"));
    }
}

fn superintegrability(l: &mut Ledger) {
    let sys = preset("flat_torus");
    let grid = sys.grid(16);
    let mut cands = vec![("H".to_string(), sys.hamiltonian())];
    cands.extend(sys.named_integrals());
    let rank = superintegrability_rank(&sys.metric, &cands, &grid, BRACKET_TOL).unwrap();
    let k = max_abs(sys.grid(64).iter().map(|p| sys.metric.gauss_curvature_at(*p).unwrap()));
    l.record(
        "9",
        rank == 3 && k <= CURVATURE_TOL,
        format!("flat_torus triple: rank {rank} == 3, max |K| {k:.3e} <= {CURVATURE_TOL:e}"),
    );
    let sys = preset("global_liouville");
    let cands = vec![("H".to_string(), sys.hamiltonian()), ("F".to_string(), sys.integral.clone())];
    let rank = superintegrability_rank(&sys.metric, &cands, &sys.grid(16), BRACKET_TOL).unwrap();
    l.record("9", rank == 2, format!("global_liouville {{H, F}}: rank {rank} == 2"));
}

fn projective(l: &mut Ledger) {
    let mut fields: Vec<(String, MetricField, VectorField2D, Vec<[f64; 2]>)> = vec![];
    let flat = preset("flat_torus");
    fields.push(("flat_torus d/dx".into(), flat.metric.clone(), VectorField2D::constant(1.0, 0.0), flat.grid(32)));
    fields.push(("flat_torus d/dy".into(), flat.metric.clone(), VectorField2D::constant(0.0, 1.0), flat.grid(32)));
    for name in ["linear_integral_torus", "jordan_foliation", "mixed_foliation"] {
        let sys = preset(name);
        fields.push((format!("{name} d/dx"), sys.metric.clone(), sys.killing.clone().unwrap(), sys.grid(32)));
    }
    for (label, metric, v, grid) in fields {
        let q = projective_integral(&metric, &v);
        let worst = max_abs(grid.iter().flat_map(|p| {
            let m = q.coefficients_at(*p);
            [m[0][0], m[0][1], m[1][1]]
        }));
        l.record("10", worst <= PROJECTIVE_ZERO_TOL, format!("{label}: |I| {worst:.3e} <= {PROJECTIVE_ZERO_TOL:e}"));
    }

    let plane = MetricField::constant([[1.0, 0.0], [0.0, 1.0]]);
    let v = VectorField2D::analytic(
        |x, _| Jet::var_x(x) * Jet::var_x(x),
        |x, y| Jet::var_x(x) * Jet::var_y(y),
    );
    let q = projective_integral(&plane, &v);
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let th = 2.0 * PI * k as f64 / 5.0 + 0.3;
        let s = PhaseState::new(0.1 * k as f64, -0.2, th.cos(), th.sin());
        let traj = integrate(&plane, &s, 1.0, &StepControl::default()).unwrap();
        worst = worst.max(conservation_report(&traj, &q as &dyn PhaseFunction));
    }
    l.record(
        "10",
        worst <= PROJECTIVE_DRIFT_TOL,
        format!("flat plane, v = x (x d/dx + y d/dy): drift of I on 5 lines {worst:.3e} <= {PROJECTIVE_DRIFT_TOL:e}"),
    );
}

fn integrator(l: &mut Ledger) {
    let sys = preset("global_liouville");
    let starts = random_initial_conditions(&sys.metric, &sys.domain, 3, 5, 0.5).unwrap();
    let mut worst: f64 = 0.0;
    for s in &starts {
        let fwd = integrate(&sys.metric, s, 1.0, &StepControl::default()).unwrap();
        let e = fwd.last();
        let back = integrate(&sys.metric, &PhaseState::new(e.x, e.y, -e.px, -e.py), 1.0, &StepControl::default()).unwrap();
        let r = back.last();
        worst = worst.max(max_abs([r.x - s.x, r.y - s.y, r.px + s.px, r.py + s.py]));
    }
    l.record("11", worst <= REVERSAL_TOL, format!("time reversal return error {worst:.3e} <= {REVERSAL_TOL:e}"));

    let flat = preset("flat_torus");
    let traj = integrate(&flat.metric, &PhaseState::new(0.0, 0.0, 1.0, 2.0), 1.0, &StepControl::default()).unwrap();
    let e = traj.last();
    let err = max_abs([e.x - 4.0, e.y - 2.0, e.px - 1.0, e.py - 2.0]);
    l.record("11", err <= STRAIGHT_LINE_TOL, format!("flat straight line over T=1: {err:.3e} <= {STRAIGHT_LINE_TOL:e}"));
}

#[test]
fn acceptance() {
    let mut l = Ledger { failures: vec![] };
    bracket_vanishing(&mut l);
    conservation(&mut l);
    structure(&mut l);
    trace_identity(&mut l);
    eigen_regimes(&mut l);
    classification(&mut l);
    equivalence(&mut l);
    killing_transfer(&mut l);
    superintegrability(&mut l);
    projective(&mut l);
    integrator(&mut l);
    assert!(l.failures.is_empty(), "failed criteria:\n{}", l.failures.join("\n"));
}
