//! Geodesically equivalent metric pairs and the integrals they induce.
//!
//! For metrics `g`, `gbar` on a surface the function
//! `F = |det g / det gbar|^{2/3} g^{ik} gbar_{km} g^{mj} p_i p_j` is an
//! integral of the geodesic flow of `g` exactly when the two metrics share
//! their unparametrized geodesics. Writing `M = F^i_j` for the mixed tensor
//! of an integral, `g^{-1} gbar = rho^{-1} M` with `rho = |det g / det gbar|^{2/3}`,
//! and taking determinants gives `rho = (det M)^2`, hence the inverse map
//! `gbar = g M / (det M)^2`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{FlowError, GeometryError, IntegralError};
use crate::families::{FamilyProfile, TorusSystem};
use crate::field::{ScalarField2D, VectorField2D};
use crate::flow::{
    integrate, parallel_map, random_initial_conditions, unparam_geodesic_residual, PhaseFunction, PhaseState,
    StepControl,
};
use crate::integrals::{lie_derivative, poisson_bracket_residual, QuadraticIntegral};
use crate::jet::{mat_det, mat_mul, SymJet};
use crate::lattice::Domain;
use crate::metric::{det2, inverse2, mul2, Mat2, MetricField, Signature};

/// `|det M|` below this makes the inverse map singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MetricPair {
    pub g: MetricField,
    pub gbar: MetricField,
    /// Filled in by [`geodesic_equivalence_check`].
    pub equivalence_residual: Option<f64>,
}

impl MetricPair {
    pub fn new(g: MetricField, gbar: MetricField) -> Self {
        Self { g, gbar, equivalence_residual: None }
    }
}

fn transpose_product(g: &Mat2, gbar: &Mat2) -> Mat2 {
    let ginv = inverse2(g);
    mul2(&mul2(&ginv, gbar), &ginv)
}

/// `(a, b, c)` of the integral induced by the pair at `p`.
pub fn integral_from_pair(g: &MetricField, gbar: &MetricField, p: [f64; 2]) -> Result<[f64; 3], GeometryError> {
    let gm = g.metric_at(p)?;
    let gb = gbar.metric_at(p)?;
    let rho = (det2(&gm) / det2(&gb)).abs().powf(2.0 / 3.0);
    let t = transpose_product(&gm, &gb);
    Ok([rho * t[0][0], 2.0 * rho * t[0][1], rho * t[1][1]])
}

/// The induced integral as a field with analytic partials when both metrics have them.
pub fn integral_field_from_pair(g: &MetricField, gbar: &MetricField) -> QuadraticIntegral {
    let (g, gbar) = (g.clone(), gbar.clone());
    QuadraticIntegral::from_jet_fn(move |x, y| {
        let gj = g.jets(x, y);
        let bj = gbar.jets(x, y);
        let rho = (gj.det() / bj.det()).abs().powf(2.0 / 3.0);
        let gi = gj.inverse().full();
        let t = mat_mul(&mat_mul(&gi, &bj.full()), &gi);
        [t[0][0] * rho, t[0][1] * rho * 2.0, t[1][1] * rho]
    })
}

/// `gbar = g M / (det M)^2` at `p`, `M = F^i_j`.
pub fn metric_from_integral(g: &MetricField, f: &QuadraticIntegral, p: [f64; 2]) -> Result<Mat2, IntegralError> {
    let gm = g.metric_at(p)?;
    let m = mul2(&f.tensor_at(p[0], p[1]), &gm);
    let det = det2(&m);
    if det.abs() < SINGULAR_TOL {
        return Err(IntegralError::SingularIntegral { det });
    }
    let gbar = mul2(&gm, &m);
    let s = 1.0 / (det * det);
    // symmetrize away round-off
    let off = 0.5 * (gbar[0][1] + gbar[1][0]) * s;
    Ok([[gbar[0][0] * s, off], [off, gbar[1][1] * s]])
}

fn gbar_jets(g: &SymJet, t: &SymJet) -> SymJet {
    let gf = g.full();
    let m = mat_mul(&t.full(), &gf);
    let det = mat_det(&m);
    let s = (det * det).recip();
    let gb = mat_mul(&gf, &m);
    SymJet::new(gb[0][0] * s, (gb[0][1] + gb[1][0]) * 0.5 * s, gb[1][1] * s)
}

/// [`metric_from_integral`] as a metric field, after checking that the
/// mixed tensor is nonsingular at `points`.
pub fn metric_field_from_integral(
    g: &MetricField,
    f: &QuadraticIntegral,
    points: &[[f64; 2]],
    signature: Signature,
) -> Result<MetricField, IntegralError> {
    for p in points {
        metric_from_integral(g, f, *p)?;
    }
    let (g, f) = (g.clone(), f.clone());
    Ok(MetricField::from_jet_fn(move |x, y| gbar_jets(&g.jets(x, y), &f.tensor_jets(x, y)), signature))
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0]).sqrt();
    half_tr - r
}

/// Output of [`riemannianize`].
#[derive(Debug, Clone)]
pub struct Riemannianization {
    pub pair: MetricPair,
    /// `H + F / (x_min + y_max)`.
    pub fbar: QuadraticIntegral,
    pub x_min: f64,
    pub y_max: f64,
    pub certificates: Vec<Certificate>,
}

/// Riemannian metric geodesically equivalent to a Liouville metric with
/// `X > Y`: build the positive definite integral `H + F / (X_min + Y_max)`
/// and invert it.
pub fn riemannianize(sys: &TorusSystem, grid: usize) -> Result<Riemannianization, IntegralError> {
    let FamilyProfile::Liouville { x, y, .. } = &sys.profile else {
        return Err(GeometryError::InvalidInput(format!("{} is not a Liouville family", sys.family_tag)).into());
    };
    let (x_min, _) = x.extrema();
    let (_, y_max) = y.extrema();
    if !(x_min > y_max) {
        return Err(IntegralError::Ordering { x_min, y_max });
    }
    let h = QuadraticIntegral::hamiltonian(&sys.metric);
    let fbar = h.combine(1.0, &sys.integral, 1.0 / (x_min + y_max));
    let points = sys.grid(grid);
    let mut f_min = f64::INFINITY;
    for p in &points {
        let e = min_eigenvalue(&fbar.tensor_at(p[0], p[1]));
        if !(e > 0.0) {
            return Err(IntegralError::NotPositiveDefinite { x: p[0], y: p[1] });
        }
        f_min = f_min.min(e);
    }
    let gbar = metric_field_from_integral(&sys.metric, &fbar, &points, Signature::Riemannian)?;
    let mut g_min = f64::INFINITY;
    for p in &points {
        let e = min_eigenvalue(&gbar.metric_at(*p)?);
        if !(e > 0.0) {
            return Err(IntegralError::NotPositiveDefinite { x: p[0], y: p[1] });
        }
        g_min = g_min.min(e);
    }
    let certificates = vec![
        Certificate::above("ordering", x_min - y_max, 0.0).with_detail("X_min - Y_max"),
        Certificate::above("integral_positive_definite", f_min, 0.0).with_detail("min eigenvalue of the integral tensor"),
        Certificate::above("gbar_positive_definite", g_min, 0.0).with_detail("min eigenvalue of gbar"),
    ];
    Ok(Riemannianization { pair: MetricPair::new(sys.metric.clone(), gbar), fbar, x_min, y_max, certificates })
}

/// `K = (det g / det gbar)^{1/3} g^{-1} gbar Kbar`: Killing for `g` when
/// `Kbar` is Killing for `gbar` and the pair is geodesically equivalent.
/// `gbar(Kbar, xi)` is conserved along `gbar`-geodesics; rewritten in the
/// `g`-parametrization it becomes `g(K, xi)`.
pub fn transfer_killing(g: &MetricField, gbar: &MetricField, kbar: &VectorField2D) -> VectorField2D {
    let (g, gbar, kbar) = (g.clone(), gbar.clone(), kbar.clone());
    let field = move |comp: usize| {
        let (g, gbar, kbar) = (g.clone(), gbar.clone(), kbar.clone());
        ScalarField2D::analytic(move |x, y| {
            let gj = g.jets(x, y);
            let bj = gbar.jets(x, y);
            let s = (gj.det() / bj.det()).cbrt();
            let m = mat_mul(&gj.inverse().full(), &bj.full());
            let k = kbar.jets(x, y);
            (m[comp][0] * k[0] + m[comp][1] * k[1]) * s
        })
    };
    VectorField2D::new(field(0), field(1))
}

/// `I(xi) = (L_v g)(xi, xi) - 2/3 tr(g^{-1} L_v g) g(xi, xi)`, a quadratic
/// function of velocities; as a phase function it is evaluated at
/// `xi = g^{-1} p`.
#[derive(Debug, Clone)]
pub struct ProjectiveIntegral {
    pub metric: MetricField,
    pub field: VectorField2D,
}

impl ProjectiveIntegral {
    /// Symmetric coefficient matrix of `I` at `p`.
    pub fn coefficients_at(&self, p: [f64; 2]) -> Mat2 {
        let g = self.metric.jets(p[0], p[1]);
        let l = lie_derivative(&g, &self.field.jets(p[0], p[1]));
        let lm = [[l[0], l[1]], [l[1], l[2]]];
        let gv = g.values();
        let gi = inverse2(&gv);
        let mut tr = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                tr += gi[i][j] * lm[i][j];
            }
        }
        let mut q = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                q[i][j] = lm[i][j] - 2.0 / 3.0 * tr * gv[i][j];
            }
        }
        q
    }

    pub fn eval_velocity(&self, p: [f64; 2], xi: [f64; 2]) -> f64 {
        crate::metric::bilinear(&self.coefficients_at(p), xi, xi)
    }
}

impl PhaseFunction for ProjectiveIntegral {
    fn eval(&self, s: &PhaseState) -> f64 {
        let gi = self.metric.values(s.x, s.y);
        let gi = inverse2(&gi);
        let xi = [gi[0][0] * s.px + gi[0][1] * s.py, gi[1][0] * s.px + gi[1][1] * s.py];
        self.eval_velocity(s.position(), xi)
    }
}

pub fn projective_integral(metric: &MetricField, v: &VectorField2D) -> ProjectiveIntegral {
    ProjectiveIntegral { metric: metric.clone(), field: v.clone() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// Names whose bracket residual exceeded the tolerance; excluded from the rank.
    pub rejected: Vec<String>,
    pub bracket_residuals: Vec<(String, f64)>,
}

/// Rank of the sampled coefficient vectors of the candidates that pass the
/// bracket check; singular values below `1e-8 sigma_max` count as zero.
pub fn superintegrability_rank_screened(
    metric: &MetricField,
    integrals: &[(String, QuadraticIntegral)],
    points: &[[f64; 2]],
    bracket_tol: f64,
) -> Result<RankReport, GeometryError> {
    let mut accepted = vec![];
    let mut rejected = vec![];
    let mut residuals = vec![];
    for (name, f) in integrals {
        let mut worst: f64 = 0.0;
        for p in points {
            worst = worst.max(poisson_bracket_residual(metric, f, *p)?);
        }
        residuals.push((name.clone(), worst));
        if worst <= bracket_tol {
            accepted.push(f);
        } else {
            rejected.push(name.clone());
        }
    }
    let (rank, singular_values) = coefficient_rank(&accepted, points);
    Ok(RankReport { rank, singular_values, rejected, bracket_residuals: residuals })
}

/// As [`superintegrability_rank_screened`], but any failing candidate is an error.
pub fn superintegrability_rank(
    metric: &MetricField,
    integrals: &[(String, QuadraticIntegral)],
    points: &[[f64; 2]],
    bracket_tol: f64,
) -> Result<usize, IntegralError> {
    let report = superintegrability_rank_screened(metric, integrals, points, bracket_tol)?;
    if let Some(name) = report.rejected.first() {
        let residual = report.bracket_residuals.iter().find(|(n, _)| n == name).map(|(_, r)| *r).unwrap_or(f64::NAN);
        return Err(IntegralError::NotAnIntegral { name: name.clone(), residual });
    }
    Ok(report.rank)
}

fn coefficient_rank(integrals: &[&QuadraticIntegral], points: &[[f64; 2]]) -> (usize, Vec<f64>) {
    if integrals.is_empty() || points.is_empty() {
        return (0, vec![]);
    }
    let cols = 3 * points.len();
    let mut m = DMatrix::<f64>::zeros(integrals.len(), cols);
    for (r, f) in integrals.iter().enumerate() {
        for (k, p) in points.iter().enumerate() {
            let c = f.coefficients(p[0], p[1]);
            for i in 0..3 {
                m[(r, 3 * k + i)] = c[i];
            }
        }
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|s| **s > 1e-8 * smax && **s > 0.0).count();
    (rank, sv)
}

/// Integrates `n_samples` geodesics of `g` with unit energy from seeded
/// random starts in `domain` and returns the largest
/// [`unparam_geodesic_residual`] of those curves with respect to `gbar`.
pub fn geodesic_equivalence_check(
    pair: &mut MetricPair,
    domain: &Domain,
    n_samples: usize,
    t_end: f64,
    seed: u64,
    control: &StepControl,
    workers: usize,
) -> Result<f64, FlowError> {
    let starts = random_initial_conditions(&pair.g, domain, n_samples, seed, 0.5)?;
    let (g, gbar) = (&pair.g, &pair.gbar);
    let results = parallel_map(&starts, workers, |s| -> Result<f64, FlowError> {
        let traj = integrate(g, s, t_end, control)?;
        let curve = traj.curve(g)?;
        unparam_geodesic_residual(gbar, &curve, traj.step)
    });
    let mut worst: f64 = 0.0;
    for r in results {
        worst = worst.max(r?);
    }
    pair.equivalence_residual = Some(worst);
    Ok(worst)
}
