//! Constructors for the metric + integral families, with validity certificates.
//!
//! Local normal forms (Liouville, complex-Liouville, Jordan block) return a
//! bare `(MetricField, QuadraticIntegral)` pair; the global constructors
//! package the pair with a lattice, a sampling domain and certificates into a
//! [`TorusSystem`].

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::certificate::{all_passed, Certificate};
use crate::error::{FamilyError, GeometryError};
use crate::field::{ScalarField2D, TrigPoly, VectorField2D};
use crate::integrals::{max_bracket_residual, max_killing_residual, QuadraticIntegral};
use crate::jet::{Jet, SymJet};
use crate::lattice::{Domain, Lattice};
use crate::metric::{inverse2, Mat2, MetricField, Signature};

/// `X` and `Y` closer than this count as colliding.
pub const COLLISION_GAP: f64 = 1e-9;
/// Bracket residual accepted by the constructor certificates.
pub const BRACKET_TOL: f64 = 1e-8;
/// Relative tolerance for periodicity and lattice invariance.
pub const PERIODICITY_TOL: f64 = 1e-12;

const VALIDATION_GRID: usize = 64;
const INVARIANCE_SAMPLES: usize = 100;

/// Strictness for requirements that only matter globally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    #[default]
    Strict,
    Lenient,
}

/// Deterministic, well spread points in the unit square (additive recurrence
/// with the plastic-number increments).
pub fn spread_points(n: usize) -> Vec<[f64; 2]> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_2;
    (1..=n)
        .map(|k| {
            let s = 0.5 + A1 * k as f64;
            let t = 0.5 + A2 * k as f64;
            [s - s.floor(), t - t.floor()]
        })
        .collect()
}

/// Holomorphic `h(z) = sum_k c_k z^k`, `z = x + i y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolomorphicData {
    pub complex_coeffs: Vec<Complex64>,
}

impl HolomorphicData {
    pub fn new(complex_coeffs: Vec<Complex64>) -> Self {
        Self { complex_coeffs }
    }

    /// `(Re h, Im h)` with partials.
    pub fn jets(&self, x: f64, y: f64) -> (Jet, Jet) {
        let (zr, zi) = (Jet::var_x(x), Jet::var_y(y));
        let mut re = Jet::constant(0.0);
        let mut im = Jet::constant(0.0);
        for c in self.complex_coeffs.iter().rev() {
            let r = re * zr - im * zi + c.re;
            let i = re * zi + im * zr + c.im;
            re = r;
            im = i;
        }
        (re, im)
    }

    /// `max(|u_x - v_y|, |u_y + v_x|)` at `(x, y)`.
    pub fn cauchy_riemann_residual(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.jets(x, y);
        (u.dx - v.dy).abs().max((u.dy + v.dx).abs())
    }
}

/// `(X(x) - Y(y))(dx^2 + eps dy^2)` with
/// `F = (X p_y^2 + eps Y p_x^2) / (X - Y)`.
pub fn make_liouville(x: &TrigPoly, y: &TrigPoly, eps: f64) -> Result<(MetricField, QuadraticIntegral), FamilyError> {
    let gap = separation_gap(x, y);
    if gap <= COLLISION_GAP {
        return Err(FamilyError::Collision { gap: gap.max(0.0) });
    }
    let eps = eps.signum();
    let (xa, ya) = (x.clone(), y.clone());
    let lam = ScalarField2D::analytic(move |px, py| xa.jet_in_x(px) - ya.jet_in_y(py));
    let metric = MetricField::conformal_diagonal(lam, eps);
    let (xb, yb) = (x.clone(), y.clone());
    let integral = QuadraticIntegral::from_jet_fn(move |px, py| {
        let (xv, yv) = (xb.jet_in_x(px), yb.jet_in_y(py));
        let d = xv - yv;
        [yv * eps / d, Jet::constant(0.0), xv / d]
    });
    Ok((metric, integral))
}

/// Signed separation of the ranges of `X` and `Y`: positive iff
/// `X(x) != Y(y)` for all `x, y`, and then equal to `min |X - Y|`.
pub fn separation_gap(x: &TrigPoly, y: &TrigPoly) -> f64 {
    let (xmin, xmax) = x.extrema();
    let (ymin, ymax) = y.extrema();
    (xmin - ymax).max(ymin - xmax)
}

/// `Im(h) dx dy` with `F = p_x^2 - p_y^2 + 2 Re(h)/Im(h) p_x p_y`,
/// validated on an `n x n` grid of `domain`.
pub fn make_complex_liouville(
    h: &HolomorphicData,
    domain: &Domain,
) -> Result<(MetricField, QuadraticIntegral), FamilyError> {
    for p in domain.grid(VALIDATION_GRID) {
        let residual = h.cauchy_riemann_residual(p[0], p[1]);
        if residual > 1e-10 {
            return Err(FamilyError::CauchyRiemann { x: p[0], y: p[1], residual });
        }
        let (_, im) = h.jets(p[0], p[1]);
        if !(im.v > 0.0) {
            return Err(FamilyError::NonpositiveConformalFactor { x: p[0], y: p[1], value: im.v });
        }
    }
    let h1 = h.clone();
    let metric = MetricField::null_coordinates(ScalarField2D::analytic(move |x, y| h1.jets(x, y).1));
    let h2 = h.clone();
    let integral = QuadraticIntegral::from_jet_fn(move |x, y| {
        let (re, im) = h2.jets(x, y);
        [Jet::constant(1.0), re * 2.0 / im, Jet::constant(-1.0)]
    });
    Ok((metric, integral))
}

/// `(Yhat(y) + x/2 Y'(y)) dx dy` with
/// `F = eps (p_x^2 - Y / (Yhat + x/2 Y') p_x p_y)`; the conformal factor must
/// stay away from zero on `domain`.
pub fn make_jordan_block(
    y: &TrigPoly,
    yhat: &TrigPoly,
    eps: f64,
    domain: &Domain,
) -> Result<(MetricField, QuadraticIntegral), FamilyError> {
    let eps = eps.signum();
    let factor = jordan_factor(y, yhat);
    // a sign change between samples means the factor vanishes in between
    let mut sign = 0.0;
    for p in domain.grid(VALIDATION_GRID).into_iter().chain(corners(domain)) {
        let v = factor(p[0], p[1]).v;
        if v.abs() < COLLISION_GAP || (sign != 0.0 && v.signum() != sign) {
            return Err(FamilyError::Degenerate { x: p[0], y: p[1] });
        }
        sign = v.signum();
    }
    let f1 = factor.clone();
    let metric = MetricField::null_coordinates(ScalarField2D::analytic(move |x, yy| f1(x, yy)));
    let (f2, y2) = (factor, y.clone());
    let integral = QuadraticIntegral::from_jet_fn(move |x, yy| {
        let f = f2(x, yy);
        let yv = y2.jet_in_y(yy);
        [Jet::constant(eps), yv * -eps / f, Jet::constant(0.0)]
    });
    Ok((metric, integral))
}

fn jordan_factor(y: &TrigPoly, yhat: &TrigPoly) -> impl Fn(f64, f64) -> Jet + Clone + Send + Sync + 'static {
    let (yp, yh) = (y.differentiate(), yhat.clone());
    move |x: f64, yy: f64| yh.jet_in_y(yy) + Jet::var_x(x) * 0.5 * yp.jet_in_y(yy)
}

fn corners(domain: &Domain) -> Vec<[f64; 2]> {
    [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]].iter().map(|c| domain.point(c[0], c[1])).collect()
}

/// Leaf-direction angle `theta(y)` of an `x`-invariant foliation, periodic in
/// `y` with period 1 (as a line field, i.e. modulo `pi`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "profile")]
pub enum FoliationAngle {
    Constant { theta: f64 },
    /// `theta(y)` given by a trigonometric polynomial of period 1.
    Trig { theta: TrigPoly },
    /// `height` on `[y0 + ramp, y1 - ramp]`, zero off `[y0, y1]`, joined by
    /// smooth flat-ended ramps (`y` taken modulo 1).
    Plateau { height: f64, y0: f64, y1: f64, ramp: f64 },
    /// Turns from `0` at `y0` to `pi` at `y1`, `pi` beyond (`y` modulo 1).
    Reeb { y0: f64, y1: f64 },
}

/// `C^infinity` step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smooth_step(t: Jet) -> Jet {
    let h = |s: Jet| if s.v <= 0.0 { Jet::constant(0.0) } else { (-s.recip()).exp() };
    if t.v <= 0.0 {
        return Jet::constant(0.0);
    }
    if t.v >= 1.0 {
        return Jet::constant(1.0);
    }
    let a = h(t);
    let b = h(-t + 1.0);
    a / (a + b)
}

impl FoliationAngle {
    pub fn jet(&self, y: f64) -> Jet {
        let yv = Jet::var_y(y);
        let frac = yv - y.floor();
        match self {
            FoliationAngle::Constant { theta } => Jet::constant(*theta),
            FoliationAngle::Trig { theta } => theta.jet_in_y(y),
            FoliationAngle::Plateau { height, y0, y1, ramp } => {
                if frac.v <= *y0 || frac.v >= *y1 {
                    return Jet::constant(0.0);
                }
                smooth_step((frac - *y0) / *ramp) * smooth_step((-frac + *y1) / *ramp) * *height
            }
            FoliationAngle::Reeb { y0, y1 } => {
                if frac.v <= *y0 {
                    return Jet::constant(0.0);
                }
                smooth_step((frac - *y0) / (*y1 - *y0)) * PI
            }
        }
    }

    pub fn field(&self) -> ScalarField2D {
        let me = self.clone();
        ScalarField2D::analytic(move |_, y| me.jet(y))
    }

    /// Leaf direction `U1 = (cos theta, sin theta)` at height `y`.
    pub fn leaf_direction(&self, y: f64) -> [f64; 2] {
        let t = self.jet(y).v;
        [t.cos(), t.sin()]
    }
}

/// Metric with matrix `((0, 1), (1, 0))` in the frame `U1 = (cos, sin)`,
/// `U2 = (-sin, cos)`: `g = U1 U2^T + U2 U1^T`.
pub fn foliation_metric(angle: &FoliationAngle) -> MetricField {
    let a = angle.clone();
    MetricField::from_jet_fn(
        move |_, y| {
            let t = a.jet(y) * 2.0;
            let (s, c) = (t.sin(), t.cos());
            SymJet::new(-s, c, s)
        },
        Signature::Lorentzian,
    )
}

/// Data the system was built from.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyProfile {
    Liouville { x: TrigPoly, y: TrigPoly, eps: f64 },
    ComplexLiouville { h: HolomorphicData },
    JordanBlock { y: TrigPoly, yhat: TrigPoly, eps: f64 },
    LinearIntegral { k: TrigPoly, l: TrigPoly, m: TrigPoly },
    Foliation { angle: FoliationAngle },
    Flat,
}

/// Linear chart `(x, y) = M (u, v)` in which the metric reads `f du dv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullChart {
    pub matrix: Mat2,
    /// Region of `(u, v)` used for checks.
    pub domain: Domain,
}

/// Jet of `u -> j(M u)` from the jet `j` at `M u`.
fn pull_jet(j: Jet, m: &Mat2) -> Jet {
    let g = [j.dx, j.dy];
    let h = [[j.dxx, j.dxy], [j.dxy, j.dyy]];
    let d = |a: usize| m[0][a] * g[0] + m[1][a] * g[1];
    let dd = |a: usize, b: usize| {
        let mut s = 0.0;
        for i in 0..2 {
            for k in 0..2 {
                s += m[i][a] * m[k][b] * h[i][k];
            }
        }
        s
    };
    Jet::new(j.v, d(0), d(1), dd(0, 0), dd(0, 1), dd(1, 1))
}

impl NullChart {
    pub fn identity(domain: Domain) -> Self {
        Self { matrix: [[1.0, 0.0], [0.0, 1.0]], domain }
    }

    pub fn to_original(&self, uv: [f64; 2]) -> [f64; 2] {
        let m = &self.matrix;
        [m[0][0] * uv[0] + m[0][1] * uv[1], m[1][0] * uv[0] + m[1][1] * uv[1]]
    }

    /// `M^T g(M u) M`.
    pub fn metric(&self, g: &MetricField) -> MetricField {
        let (g, chart) = (g.clone(), *self);
        let sig = g.signature;
        MetricField::from_jet_fn(
            move |u, v| {
                let m = chart.matrix;
                let [x, y] = chart.to_original([u, v]);
                let j = g.jets(x, y);
                let gj = [[pull_jet(j.m11, &m), pull_jet(j.m12, &m)], [pull_jet(j.m12, &m), pull_jet(j.m22, &m)]];
                let entry = |a: usize, b: usize| {
                    let mut s = Jet::constant(0.0);
                    for i in 0..2 {
                        for k in 0..2 {
                            s += gj[i][k] * (m[i][a] * m[k][b]);
                        }
                    }
                    s
                };
                SymJet::new(entry(0, 0), entry(0, 1), entry(1, 1))
            },
            sig,
        )
    }

    /// `f` with `M^T g M = f du dv`.
    pub fn conformal_factor(&self, g: &MetricField) -> ScalarField2D {
        self.metric(g).g12.map(|j| j * 2.0)
    }

    /// Coefficients in `(u, v)`: the tensor becomes `M^{-1} T M^{-T}`.
    pub fn integral(&self, f: &QuadraticIntegral) -> QuadraticIntegral {
        let (f, chart) = (f.clone(), *self);
        QuadraticIntegral::from_jet_fn(move |u, v| {
            let m = chart.matrix;
            let n = inverse2(&m);
            let [x, y] = chart.to_original([u, v]);
            let t = f.tensor_jets(x, y);
            let tj = [[pull_jet(t.m11, &m), pull_jet(t.m12, &m)], [pull_jet(t.m12, &m), pull_jet(t.m22, &m)]];
            let entry = |a: usize, b: usize| {
                let mut s = Jet::constant(0.0);
                for i in 0..2 {
                    for k in 0..2 {
                        s += tj[i][k] * (n[a][i] * n[b][k]);
                    }
                }
                s
            };
            [entry(0, 0), entry(0, 1) * 2.0, entry(1, 1)]
        })
    }
}

/// Gluing map `(x, y) -> (x + shift, -y)` of a Klein-bottle quotient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gluing {
    pub shift: f64,
}

impl Gluing {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0] + self.shift, -p[1]]
    }
}

/// Metric, integral and lattice with their certificates.
#[derive(Debug, Clone)]
pub struct TorusSystem {
    pub family_tag: String,
    pub metric: MetricField,
    pub integral: QuadraticIntegral,
    pub lattice: Option<Lattice>,
    pub domain: Domain,
    pub certificates: Vec<Certificate>,
    pub profile: FamilyProfile,
    /// Killing field whose momentum is a linear integral, if known.
    pub killing: Option<VectorField2D>,
    /// Further named quadratic integrals besides `integral`.
    pub extra_integrals: Vec<(String, QuadraticIntegral)>,
    pub null_chart: Option<NullChart>,
    pub gluing: Option<Gluing>,
}

impl TorusSystem {
    fn new(
        family_tag: &str,
        metric: MetricField,
        integral: QuadraticIntegral,
        lattice: Option<Lattice>,
        domain: Domain,
        profile: FamilyProfile,
    ) -> Self {
        let metric = match lattice {
            Some(l) => metric.with_lattice(l),
            None => metric,
        };
        Self {
            family_tag: family_tag.to_string(),
            metric,
            integral,
            lattice,
            domain,
            certificates: vec![],
            profile,
            killing: None,
            extra_integrals: vec![],
            null_chart: None,
            gluing: None,
        }
    }

    pub fn passed(&self) -> bool {
        all_passed(&self.certificates)
    }

    pub fn grid(&self, n: usize) -> Vec<[f64; 2]> {
        self.domain.grid(n)
    }

    pub fn hamiltonian(&self) -> QuadraticIntegral {
        QuadraticIntegral::hamiltonian(&self.metric)
    }

    /// All quadratic integrals with names, `F` first.
    pub fn named_integrals(&self) -> Vec<(String, QuadraticIntegral)> {
        let mut out = vec![("F".to_string(), self.integral.clone())];
        out.extend(self.extra_integrals.iter().cloned());
        out
    }

    /// Metric and integral in the null chart, if one is known.
    pub fn in_null_chart(&self) -> Option<(ScalarField2D, QuadraticIntegral, Domain)> {
        self.null_chart
            .map(|c| (c.conformal_factor(&self.metric), c.integral(&self.integral), c.domain))
    }

    /// Largest change of metric and integral coefficients under the lattice
    /// generators, relative to their magnitude, at `samples` points.
    pub fn lattice_invariance_defect(&self, samples: usize) -> f64 {
        let Some(l) = self.lattice else { return 0.0 };
        let coeffs = |p: [f64; 2]| {
            let g = self.metric.values(p[0], p[1]);
            let f = self.integral.coefficients(p[0], p[1]);
            [g[0][0], g[0][1], g[1][1], f[0], f[1], f[2]]
        };
        let mut worst: f64 = 0.0;
        for st in spread_points(samples) {
            let p = self.domain.point(st[0], st[1]);
            let c0 = coeffs(p);
            for shift in [l.xi, l.nu] {
                let c1 = coeffs([p[0] + shift[0], p[1] + shift[1]]);
                for k in 0..6 {
                    worst = worst.max((c1[k] - c0[k]).abs() / (1.0 + c0[k].abs()));
                }
            }
        }
        worst
    }

    fn certify_common(&mut self) {
        let grid = self.grid(VALIDATION_GRID);
        let sig = match self.metric.check_signature(&grid) {
            Ok(()) => Certificate::at_most("signature", 0.0, 0.0)
                .with_detail(format!("{:?}", self.metric.signature).to_lowercase()),
            Err(e) => Certificate::at_most("signature", 1.0, 0.0).with_detail(e.to_string()),
        };
        self.certificates.push(sig);
        if self.lattice.is_some() {
            let defect = self.lattice_invariance_defect(INVARIANCE_SAMPLES);
            self.certificates.push(Certificate::at_most("lattice_invariance", defect, PERIODICITY_TOL));
        }
        for (name, f) in self.named_integrals() {
            let r = max_bracket_residual(&self.metric, &f, &grid).unwrap_or(f64::INFINITY);
            self.certificates.push(Certificate::at_most(&format!("bracket_residual_{name}"), r, BRACKET_TOL));
        }
        if let Some(k) = &self.killing {
            let r = max_killing_residual(&self.metric, k, &grid);
            self.certificates.push(Certificate::at_most("killing_residual", r, BRACKET_TOL));
        }
    }

    fn into_result(self) -> Result<Self, FamilyError> {
        if self.passed() {
            Ok(self)
        } else {
            Err(FamilyError::Certificates(self.certificates))
        }
    }
}

fn shift_defect(p: &TrigPoly, shift: f64) -> f64 {
    if shift == 0.0 {
        return 0.0;
    }
    p.shift_defect(shift, 256) / (1.0 + p.coefficient_norm())
}

fn nonconstant_certificate(x: &TrigPoly, y: &TrigPoly, mode: Validation) -> Certificate {
    let constant = [x.is_constant(), y.is_constant()].iter().filter(|c| **c).count() as f64;
    match mode {
        Validation::Strict => Certificate::at_most("nonconstant", constant, 0.0),
        Validation::Lenient if constant > 0.0 => {
            Certificate::warning("nonconstant", constant, "X or Y is constant; allowed in lenient mode")
        }
        Validation::Lenient => Certificate::at_most("nonconstant", 0.0, 0.0),
    }
}

/// Liouville metric on `R^2 / lattice`: `X` must be periodic under the
/// x-components and `Y` under the y-components of both generators, and the
/// ranges of `X` and `Y` must be disjoint.
pub fn make_global_liouville(
    x: &TrigPoly,
    y: &TrigPoly,
    lattice: Lattice,
    eps: f64,
    mode: Validation,
) -> Result<TorusSystem, FamilyError> {
    let gap = separation_gap(x, y);
    let periodic = [
        shift_defect(x, lattice.xi[0]),
        shift_defect(x, lattice.nu[0]),
        shift_defect(y, lattice.xi[1]),
        shift_defect(y, lattice.nu[1]),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let mut certs = vec![
        Certificate::above("separation_a", gap, COLLISION_GAP).with_detail("min |X(x) - Y(y)| from the ranges of X and Y"),
        Certificate::at_most("periodicity_b", periodic, PERIODICITY_TOL),
        nonconstant_certificate(x, y, mode),
    ];
    if !all_passed(&certs[..2]) {
        return Err(FamilyError::Certificates(certs));
    }
    let (metric, integral) = make_liouville(x, y, eps)?;
    let mut sys = TorusSystem::new(
        "global_liouville",
        metric,
        integral,
        Some(lattice),
        Domain::Cell { lattice },
        FamilyProfile::Liouville { x: x.clone(), y: y.clone(), eps: eps.signum() },
    );
    if eps < 0.0 {
        // u = x + y, v = x - y
        sys.null_chart = Some(NullChart { matrix: [[0.5, 0.5], [0.5, -0.5]], domain: Domain::rect(0.0, 1.0, 0.0, 1.0) });
    }
    sys.certificates.append(&mut certs);
    sys.certify_common();
    sys.into_result()
}

/// Liouville metric descending to a Klein bottle: built on the oriented
/// double cover with lattice `(2c, 0), (0, d)` and gluing `(x, y) -> (x + c, -y)`.
pub fn make_klein_liouville(
    x: &TrigPoly,
    y: &TrigPoly,
    c: f64,
    d: f64,
    eps: f64,
) -> Result<TorusSystem, FamilyError> {
    if c == 0.0 || d == 0.0 {
        return Err(GeometryError::InvalidInput("c and d must be nonzero".into()).into());
    }
    let gap = separation_gap(x, y);
    let mut certs = vec![
        Certificate::above("separation_a", gap, COLLISION_GAP),
        Certificate::at_most("periodicity_x", shift_defect(x, c), PERIODICITY_TOL),
        Certificate::at_most("periodicity_y", shift_defect(y, d), PERIODICITY_TOL),
        Certificate::at_most("evenness_y", y.evenness_defect(256) / (1.0 + y.coefficient_norm()), PERIODICITY_TOL),
    ];
    if !all_passed(&certs) {
        return Err(FamilyError::Certificates(certs));
    }
    let (metric, integral) = make_liouville(x, y, eps)?;
    let lattice = Lattice::new([2.0 * c, 0.0], [0.0, d])?;
    let mut sys = TorusSystem::new(
        "klein_liouville",
        metric,
        integral,
        Some(lattice),
        Domain::Cell { lattice },
        FamilyProfile::Liouville { x: x.clone(), y: y.clone(), eps: eps.signum() },
    );
    if eps < 0.0 {
        sys.null_chart = Some(NullChart { matrix: [[0.5, 0.5], [0.5, -0.5]], domain: Domain::rect(0.0, 1.0, 0.0, 1.0) });
    }
    let gluing = Gluing { shift: c };
    sys.gluing = Some(gluing);
    certs.push(Certificate::at_most("gluing_invariance", gluing_defect(&sys, gluing), PERIODICITY_TOL));
    sys.certificates.append(&mut certs);
    sys.certify_common();
    sys.into_result()
}

/// Largest change of metric and integral under the pullback by the gluing
/// map (its differential is `diag(1, -1)`).
pub fn gluing_defect(sys: &TorusSystem, gluing: Gluing) -> f64 {
    let mut worst: f64 = 0.0;
    for st in spread_points(INVARIANCE_SAMPLES) {
        let p = sys.domain.point(st[0], st[1]);
        let q = gluing.apply(p);
        let (g0, g1) = (sys.metric.values(p[0], p[1]), sys.metric.values(q[0], q[1]));
        let (f0, f1) = (sys.integral.coefficients(p[0], p[1]), sys.integral.coefficients(q[0], q[1]));
        let pairs = [
            (g0[0][0], g1[0][0]),
            (g0[0][1], -g1[0][1]),
            (g0[1][1], g1[1][1]),
            (f0[0], f1[0]),
            (f0[1], -f1[1]),
            (f0[2], f1[2]),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs() / (1.0 + a.abs()));
        }
    }
    worst
}

/// `K(y) dx^2 + 2 L(y) dx dy + M(y) dy^2` with `K M - L^2 < 0`; the linear
/// integral is `p_x` and the stored quadratic integral is `p_x^2`.
pub fn make_linear_integral_torus(k: &TrigPoly, l: &TrigPoly, m: &TrigPoly) -> Result<TorusSystem, FamilyError> {
    let period = k.period;
    const N: usize = 256;
    for i in 0..N {
        let t = period * i as f64 / N as f64;
        let det = k.value(t) * m.value(t) - l.value(t).powi(2);
        if !(det < 0.0) {
            return Err(GeometryError::Signature { x: 0.0, y: t, reason: format!("K M - L^2 = {det:e} is not negative") }.into());
        }
    }
    let (ka, la, ma) = (k.clone(), l.clone(), m.clone());
    let metric = MetricField::from_jet_fn(
        move |_, y| SymJet::new(ka.jet_in_y(y), la.jet_in_y(y), ma.jet_in_y(y)),
        Signature::Lorentzian,
    );
    let lattice = Lattice::new([1.0, 0.0], [0.0, period])?;
    let mut sys = TorusSystem::new(
        "linear_integral_torus",
        metric,
        QuadraticIntegral::constant(1.0, 0.0, 0.0),
        Some(lattice),
        Domain::Cell { lattice },
        FamilyProfile::LinearIntegral { k: k.clone(), l: l.clone(), m: m.clone() },
    );
    let periodic = [shift_defect(l, period), shift_defect(m, period)].into_iter().fold(0.0, f64::max);
    sys.certificates.push(Certificate::at_most("periodicity_b", periodic, PERIODICITY_TOL));
    sys.killing = Some(VectorField2D::constant(1.0, 0.0));
    sys.certify_common();
    sys.into_result()
}

/// Metric of an `x`-invariant foliation with light-like leaves; `d/dx` is
/// Killing and `p_x^2` is the stored integral.
pub fn make_foliation_metric(tag: &str, angle: &FoliationAngle) -> Result<TorusSystem, FamilyError> {
    let lattice = Lattice::unit_square();
    let mut sys = TorusSystem::new(
        tag,
        foliation_metric(angle),
        QuadraticIntegral::constant(1.0, 0.0, 0.0),
        Some(lattice),
        Domain::Cell { lattice },
        FamilyProfile::Foliation { angle: angle.clone() },
    );
    sys.killing = Some(VectorField2D::constant(1.0, 0.0));
    let theta = angle.field();
    let mut x_defect: f64 = 0.0;
    let mut leaf_norm: f64 = 0.0;
    for st in spread_points(INVARIANCE_SAMPLES) {
        let t0 = theta.value(st[0], st[1]);
        x_defect = x_defect.max((theta.value(st[0] + 0.37, st[1]) - t0).abs());
        let u1 = angle.leaf_direction(st[1]);
        leaf_norm = leaf_norm.max(sys.metric.inner(st, u1, u1).abs());
    }
    sys.certificates.push(Certificate::at_most("x_invariance", x_defect, 0.0));
    sys.certificates.push(Certificate::at_most("leaves_light_like", leaf_norm, 1e-12));
    sys.certify_common();
    sys.into_result()
}

/// Flat `dx dy` on `R^2 / lattice` with integrals `p_x^2` and `p_y^2`.
pub fn make_flat_torus(lattice: Lattice) -> Result<TorusSystem, FamilyError> {
    let domain = Domain::Cell { lattice };
    let mut sys = TorusSystem::new(
        "flat_torus",
        MetricField::null_coordinates(ScalarField2D::constant(1.0)),
        QuadraticIntegral::constant(1.0, 0.0, 0.0),
        Some(lattice),
        domain,
        FamilyProfile::Flat,
    );
    sys.extra_integrals.push(("F2".to_string(), QuadraticIntegral::constant(0.0, 0.0, 1.0)));
    sys.killing = Some(VectorField2D::constant(1.0, 0.0));
    sys.null_chart = Some(NullChart::identity(domain));
    let curvature = spread_points(25)
        .iter()
        .map(|st| {
            let p = domain.point(st[0], st[1]);
            sys.metric.gauss_curvature_at(p).map(f64::abs).unwrap_or(f64::INFINITY)
        })
        .fold(0.0, f64::max);
    sys.certificates.push(Certificate::at_most("flat_curvature", curvature, 1e-10));
    sys.certify_common();
    sys.into_result()
}

/// Jordan-block pair on a rectangle, packaged without a lattice.
pub fn jordan_block_system(y: &TrigPoly, yhat: &TrigPoly, eps: f64, domain: Domain) -> Result<TorusSystem, FamilyError> {
    let (metric, integral) = make_jordan_block(y, yhat, eps, &domain)?;
    let mut sys = TorusSystem::new(
        "jordan_block",
        metric,
        integral,
        None,
        domain,
        FamilyProfile::JordanBlock { y: y.clone(), yhat: yhat.clone(), eps: eps.signum() },
    );
    sys.null_chart = Some(NullChart::identity(domain));
    sys.certify_common();
    sys.into_result()
}

/// Complex-Liouville pair on a rectangle, packaged without a lattice.
pub fn complex_liouville_system(h: &HolomorphicData, domain: Domain) -> Result<TorusSystem, FamilyError> {
    let (metric, integral) = make_complex_liouville(h, &domain)?;
    let mut sys = TorusSystem::new(
        "complex_liouville",
        metric,
        integral,
        None,
        domain,
        FamilyProfile::ComplexLiouville { h: h.clone() },
    );
    sys.null_chart = Some(NullChart::identity(domain));
    sys.certify_common();
    sys.into_result()
}
