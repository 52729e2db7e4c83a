//! Quadratic first integrals `F = a p_x^2 + b p_x p_y + c p_y^2`.
//!
//! Bracket and PDE residuals, the integral's mixed tensor and its
//! eigenstructure, pointwise type classification, the 1-forms
//! `dx / sqrt|a|`, `dy / sqrt|c|`, perfect coordinates, and Killing checks.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, IntegralError};
use crate::field::{ScalarField2D, VectorField2D};
use crate::jet::{Jet, SymJet};
use crate::lattice::Domain;
use crate::metric::{inverse2, mul2, null_frame_jets, Mat2, MetricField};

/// Number of unit covectors used when maximizing the bracket over a fiber.
pub const MOMENTUM_DIRECTIONS: usize = 8;

/// Relative zero threshold for classification.
pub const CLASSIFICATION_REL_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct QuadraticIntegral {
    pub a: ScalarField2D,
    pub b: ScalarField2D,
    pub c: ScalarField2D,
}

impl QuadraticIntegral {
    pub fn new(a: ScalarField2D, b: ScalarField2D, c: ScalarField2D) -> Self {
        Self { a, b, c }
    }

    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        Self::new(ScalarField2D::constant(a), ScalarField2D::constant(b), ScalarField2D::constant(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0, 0.0)
    }

    /// Coefficients of `H = 1/2 g^{ij} p_i p_j`.
    pub fn hamiltonian(metric: &MetricField) -> Self {
        let g = metric.clone();
        let inv = move |x: f64, y: f64| g.jets(x, y).inverse();
        let (i1, i2, i3) = (inv.clone(), inv.clone(), inv);
        let analytic = metric.g11.has_analytic_partials()
            && metric.g12.has_analytic_partials()
            && metric.g22.has_analytic_partials();
        let q = Self::new(
            ScalarField2D::analytic(move |x, y| i1(x, y).m11 * 0.5),
            ScalarField2D::analytic(move |x, y| i2(x, y).m12),
            ScalarField2D::analytic(move |x, y| i3(x, y).m22 * 0.5),
        );
        if analytic {
            q
        } else {
            q.to_sampled()
        }
    }

    /// Build from a jet-valued coefficient function.
    pub fn from_jet_fn(f: impl Fn(f64, f64) -> [Jet; 3] + Send + Sync + 'static) -> Self {
        let f = Arc::new(f);
        let (f1, f2, f3) = (f.clone(), f.clone(), f);
        Self::new(
            ScalarField2D::analytic(move |x, y| f1(x, y)[0]),
            ScalarField2D::analytic(move |x, y| f2(x, y)[1]),
            ScalarField2D::analytic(move |x, y| f3(x, y)[2]),
        )
    }

    pub fn to_sampled(&self) -> Self {
        Self::new(self.a.to_sampled(), self.b.to_sampled(), self.c.to_sampled())
    }

    pub fn coefficients(&self, x: f64, y: f64) -> [f64; 3] {
        [self.a.value(x, y), self.b.value(x, y), self.c.value(x, y)]
    }

    pub fn jets(&self, x: f64, y: f64) -> [Jet; 3] {
        [self.a.jet(x, y), self.b.jet(x, y), self.c.jet(x, y)]
    }

    /// `F(x, y, px, py)`.
    pub fn eval(&self, x: f64, y: f64, px: f64, py: f64) -> f64 {
        let [a, b, c] = self.coefficients(x, y);
        a * px * px + b * px * py + c * py * py
    }

    /// Contravariant tensor `((a, b/2), (b/2, c))`.
    pub fn tensor_at(&self, x: f64, y: f64) -> Mat2 {
        let [a, b, c] = self.coefficients(x, y);
        [[a, 0.5 * b], [0.5 * b, c]]
    }

    pub fn tensor_jets(&self, x: f64, y: f64) -> SymJet {
        let [a, b, c] = self.jets(x, y);
        SymJet::new(a, b * 0.5, c)
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &QuadraticIntegral, beta: f64) -> Self {
        let lin = move |u: Jet, v: Jet| u * alpha + v * beta;
        Self::new(
            self.a.zip_with(&other.a, lin),
            self.b.zip_with(&other.b, lin),
            self.c.zip_with(&other.c, lin),
        )
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.a.map(move |j| j * s), self.b.map(move |j| j * s), self.c.map(move |j| j * s))
    }
}

/// PDE residuals for `F` and `g = f dx dy`:
/// `(a_y, f a_x + f b_y + 2 f_x a + f_y b, f b_x + f c_y + f_x b + 2 f_y c, c_x)`.
pub fn sys_residuals(f: &ScalarField2D, integral: &QuadraticIntegral, p: [f64; 2]) -> [f64; 4] {
    let fj = f.jet(p[0], p[1]);
    let [a, b, c] = integral.jets(p[0], p[1]);
    [
        a.dy,
        fj.v * a.dx + fj.v * b.dy + 2.0 * fj.dx * a.v + fj.dy * b.v,
        fj.v * b.dx + fj.v * c.dy + fj.dx * b.v + 2.0 * fj.dy * c.v,
        c.dx,
    ]
}

/// `{H, F}` for `g = f dx dy` assembled from [`sys_residuals`]:
/// `2/f^2 (f a_y px^3 + R2 px^2 py + R3 px py^2 + f c_x py^3)`.
pub fn bracket_from_sys(f: &ScalarField2D, integral: &QuadraticIntegral, p: [f64; 2], momentum: [f64; 2]) -> f64 {
    let fv = f.value(p[0], p[1]);
    let [r1, r2, r3, r4] = sys_residuals(f, integral, p);
    let [px, py] = momentum;
    2.0 / (fv * fv) * (fv * r1 * px.powi(3) + r2 * px * px * py + r3 * px * py * py + fv * r4 * py.powi(3))
}

/// Derivative of `F` along the Hamiltonian vector field of `H = 1/2 g^{ij} p_i p_j`:
/// `sum_k dH/dp_k dF/dx^k - dH/dx^k dF/dp_k`.
pub fn poisson_bracket(
    metric: &MetricField,
    integral: &QuadraticIntegral,
    p: [f64; 2],
    momentum: [f64; 2],
) -> Result<f64, GeometryError> {
    let g = metric.checked_jets(p)?;
    let ginv = inverse2(&g.values());
    let t = integral.tensor_jets(p[0], p[1]);
    Ok(bracket_with(&g, &ginv, &t, momentum))
}

fn bracket_with(g: &SymJet, ginv: &Mat2, t: &SymJet, momentum: [f64; 2]) -> f64 {
    let q = momentum;
    let mut total = 0.0;
    for k in 0..2 {
        // dH/dp_k = g^{kj} p_j
        let dh_dp = ginv[k][0] * q[0] + ginv[k][1] * q[1];
        // dF/dx^k = d_k T^{ij} p_i p_j
        let mut df_dx = 0.0;
        // dH/dx^k = 1/2 d_k g^{ij} p_i p_j, d_k g^{-1} = -g^{-1} d_k g g^{-1}
        let mut dh_dx = 0.0;
        let mut u = [0.0; 2]; // g^{-1} p
        for i in 0..2 {
            u[i] = ginv[i][0] * q[0] + ginv[i][1] * q[1];
        }
        for i in 0..2 {
            for j in 0..2 {
                df_dx += t.get(i, j).d(k) * q[i] * q[j];
                dh_dx -= 0.5 * u[i] * g.get(i, j).d(k) * u[j];
            }
        }
        // dF/dp_k = 2 T^{kj} p_j
        let df_dp = 2.0 * (t.get(k, 0).v * q[0] + t.get(k, 1).v * q[1]);
        total += dh_dp * df_dx - dh_dx * df_dp;
    }
    total
}

/// `max |{H, F}|` over [`MOMENTUM_DIRECTIONS`] unit covectors at equal angles.
pub fn poisson_bracket_residual(
    metric: &MetricField,
    integral: &QuadraticIntegral,
    p: [f64; 2],
) -> Result<f64, GeometryError> {
    poisson_bracket_residual_dirs(metric, integral, p, MOMENTUM_DIRECTIONS)
}

pub fn poisson_bracket_residual_dirs(
    metric: &MetricField,
    integral: &QuadraticIntegral,
    p: [f64; 2],
    directions: usize,
) -> Result<f64, GeometryError> {
    let g = metric.checked_jets(p)?;
    let ginv = inverse2(&g.values());
    let t = integral.tensor_jets(p[0], p[1]);
    Ok((0..directions)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / directions as f64;
            bracket_with(&g, &ginv, &t, [th.cos(), th.sin()]).abs()
        })
        .fold(0.0, f64::max))
}

/// Largest bracket residual over a set of points.
pub fn max_bracket_residual(
    metric: &MetricField,
    integral: &QuadraticIntegral,
    points: &[[f64; 2]],
) -> Result<f64, GeometryError> {
    let mut worst: f64 = 0.0;
    for p in points {
        worst = worst.max(poisson_bracket_residual(metric, integral, *p)?);
    }
    Ok(worst)
}

/// Mixed tensor `F^i_j = F^{ik} g_{kj}`.
pub fn mixed_tensor_at(integral: &QuadraticIntegral, metric: &MetricField, p: [f64; 2]) -> Result<Mat2, GeometryError> {
    let g = metric.metric_at(p)?;
    Ok(mul2(&integral.tensor_at(p[0], p[1]), &g))
}

/// `L = F^{ij} g_{ij}`, the trace of the mixed tensor.
pub fn trace_l(integral: &QuadraticIntegral, metric: &MetricField, p: [f64; 2]) -> Result<f64, GeometryError> {
    let m = mixed_tensor_at(integral, metric, p)?;
    Ok(m[0][0] + m[1][1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    pub e1: Complex64,
    pub e2: Complex64,
    /// `(tr/2)^2 - det` of the mixed tensor.
    pub discriminant: f64,
}

pub fn eigen_data(integral: &QuadraticIntegral, metric: &MetricField, p: [f64; 2]) -> Result<EigenData, GeometryError> {
    let m = mixed_tensor_at(integral, metric, p)?;
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    // (tr/2)^2 - det written as ((m11 - m22)/2)^2 + m12 m21 to avoid cancellation.
    let disc = (0.5 * (m[0][0] - m[1][1])).powi(2) + m[0][1] * m[1][0];
    let (e1, e2) = if disc >= 0.0 {
        let r = disc.sqrt();
        (Complex64::new(half_tr - r, 0.0), Complex64::new(half_tr + r, 0.0))
    } else {
        let r = (-disc).sqrt();
        (Complex64::new(half_tr, -r), Complex64::new(half_tr, r))
    };
    Ok(EigenData { e1, e2, discriminant: disc })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TypeLabel {
    /// `a c > 0`
    Liouville,
    /// `a c < 0`
    ComplexLiouville,
    /// `a != 0, c = 0`
    JordanA,
    /// `a = 0, c != 0`
    JordanB,
    /// `a = c = 0`
    Degenerate,
}

impl TypeLabel {
    pub const ALL: [TypeLabel; 5] = [
        TypeLabel::Liouville,
        TypeLabel::ComplexLiouville,
        TypeLabel::JordanA,
        TypeLabel::JordanB,
        TypeLabel::Degenerate,
    ];

    pub fn is_jordan(self) -> bool {
        matches!(self, TypeLabel::JordanA | TypeLabel::JordanB)
    }

    pub fn name(self) -> &'static str {
        match self {
            TypeLabel::Liouville => "LIOUVILLE",
            TypeLabel::ComplexLiouville => "COMPLEX_LIOUVILLE",
            TypeLabel::JordanA => "JORDAN_A",
            TypeLabel::JordanB => "JORDAN_B",
            TypeLabel::Degenerate => "DEGENERATE",
        }
    }
}

/// Sign test on `(a, c)` with `|.| <= tol` counted as zero.
pub fn label_from_coefficients(a: f64, c: f64, tol: f64) -> TypeLabel {
    let az = a.abs() <= tol;
    let cz = c.abs() <= tol;
    match (az, cz) {
        (true, true) => TypeLabel::Degenerate,
        (false, true) => TypeLabel::JordanA,
        (true, false) => TypeLabel::JordanB,
        (false, false) if a * c > 0.0 => TypeLabel::Liouville,
        _ => TypeLabel::ComplexLiouville,
    }
}

/// The integral's `(a, c)` coefficients in the null frame at `p`:
/// `F(theta1, theta1)` and `F(theta2, theta2)` for the coframe dual to
/// the null frame. In null coordinates `f dx dy` with `f > 0` these are
/// `a f / 2` and `c f / 2`, so their signs agree with the coordinate `a`, `c`.
pub fn frame_coefficients(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    p: [f64; 2],
) -> Result<(f64, f64), GeometryError> {
    let (v1, v2) = metric.null_frame_at(p)?;
    let d = v1[0] * v2[1] - v1[1] * v2[0];
    // rows of the inverse of [V1 V2]
    let th1 = [v2[1] / d, -v2[0] / d];
    let th2 = [-v1[1] / d, v1[0] / d];
    let t = integral.tensor_at(p[0], p[1]);
    let q = |w: [f64; 2]| crate::metric::bilinear(&t, w, w);
    Ok((q(th1), q(th2)))
}

/// Local type of the integral at `p`.
pub fn classify_point(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    p: [f64; 2],
    tol: f64,
) -> Result<TypeLabel, GeometryError> {
    let (a, c) = frame_coefficients(integral, metric, p)?;
    Ok(label_from_coefficients(a, c, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFraction {
    pub label: TypeLabel,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub grid_dims: [usize; 2],
    /// Row-major labels, row index along the second domain axis.
    pub labels: Vec<TypeLabel>,
    pub fractions: Vec<LabelFraction>,
    pub boundary_cells: usize,
    pub zero_threshold: f64,
}

impl ClassificationReport {
    pub fn fraction(&self, label: TypeLabel) -> f64 {
        self.fractions.iter().find(|f| f.label == label).map(|f| f.fraction).unwrap_or(0.0)
    }

    pub fn jordan_fraction(&self) -> f64 {
        self.fraction(TypeLabel::JordanA) + self.fraction(TypeLabel::JordanB)
    }
}

/// Classifies every cell of an `n x n` grid. Zero threshold is
/// [`CLASSIFICATION_REL_TOL`] times the grid maximum of `|a| + |c|`.
/// A boundary cell has a 4-neighbour with a different label (neighbours
/// wrap around on lattice cells).
pub fn classify_grid(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    domain: &Domain,
    n: usize,
) -> Result<ClassificationReport, GeometryError> {
    let pts = domain.grid(n);
    let mut coeffs = Vec::with_capacity(pts.len());
    let mut scale: f64 = 0.0;
    for p in &pts {
        let (a, c) = frame_coefficients(integral, metric, *p)?;
        scale = scale.max(a.abs() + c.abs());
        coeffs.push((a, c));
    }
    let tol = CLASSIFICATION_REL_TOL * scale;
    let labels: Vec<TypeLabel> = coeffs.iter().map(|(a, c)| label_from_coefficients(*a, *c, tol)).collect();
    let wrap = matches!(domain, Domain::Cell { .. });
    let mut boundary = 0;
    for j in 0..n {
        for i in 0..n {
            let here = labels[j * n + i];
            let mut neighbours = vec![];
            if i + 1 < n || wrap {
                neighbours.push(j * n + (i + 1) % n);
            }
            if i > 0 || wrap {
                neighbours.push(j * n + (i + n - 1) % n);
            }
            if j + 1 < n || wrap {
                neighbours.push(((j + 1) % n) * n + i);
            }
            if j > 0 || wrap {
                neighbours.push(((j + n - 1) % n) * n + i);
            }
            if neighbours.iter().any(|k| labels[*k] != here) {
                boundary += 1;
            }
        }
    }
    let total = labels.len() as f64;
    let fractions = TypeLabel::ALL
        .iter()
        .map(|l| LabelFraction { label: *l, fraction: labels.iter().filter(|x| *x == l).count() as f64 / total })
        .collect();
    Ok(ClassificationReport { grid_dims: [n, n], labels, fractions, boundary_cells: boundary, zero_threshold: tol })
}

/// Values of `1/sqrt|a|` and `1/sqrt|c|` (the coefficients of
/// `dx / sqrt|a|` and `dy / sqrt|c|`) in null coordinates; `None` where the
/// coefficient vanishes.
pub fn bk_form_values(integral: &QuadraticIntegral, p: [f64; 2], tol: f64) -> (Option<f64>, Option<f64>) {
    let [a, _, c] = integral.coefficients(p[0], p[1]);
    let form = |v: f64| if v.abs() > tol { Some(1.0 / v.abs().sqrt()) } else { None };
    (form(a), form(c))
}

/// In null coordinates: largest variation of `a` along vertical lines and of
/// `c` along horizontal lines of an `n x n` grid on `domain`.
pub fn bk_structure_defect(integral: &QuadraticIntegral, domain: &Domain, n: usize) -> (f64, f64) {
    let mut a_var: f64 = 0.0;
    let mut c_var: f64 = 0.0;
    let at = |i: usize, j: usize| {
        let p = domain.point((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
        integral.coefficients(p[0], p[1])
    };
    let grid: Vec<Vec<[f64; 3]>> = (0..n).map(|j| (0..n).map(|i| at(i, j)).collect()).collect();
    for i in 0..n {
        let col: Vec<f64> = (0..n).map(|j| grid[j][i][0]).collect();
        a_var = a_var.max(spread(&col));
    }
    for row in grid.iter() {
        let cs: Vec<f64> = row.iter().map(|v| v[2]).collect();
        c_var = c_var.max(spread(&cs));
    }
    (a_var, c_var)
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Exterior derivatives of the 1-forms `B1 = w1 / sqrt|F(w1, w1)|` and
/// `B2 = w2 / sqrt|F(w2, w2)|`, where `w1` annihilates the null direction
/// `V2` and `w2` annihilates `V1`. In null coordinates these are
/// `dx / sqrt|a|` and `dy / sqrt|c|`; the value returned is the coefficient
/// of `dx ^ dy`, in any coordinates. `None` where the form is undefined.
pub fn bk_closedness(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    p: [f64; 2],
    tol: f64,
) -> Result<(Option<f64>, Option<f64>), GeometryError> {
    let g = metric.checked_jets(p)?;
    let (v1, v2) = null_frame_jets(&g, p)?;
    let t = integral.tensor_jets(p[0], p[1]);
    let curl = |w: [Jet; 2]| -> Option<f64> {
        let q = t.m11 * w[0] * w[0] + t.m12 * w[0] * w[1] * 2.0 + t.m22 * w[1] * w[1];
        let wn = (w[0] * w[0] + w[1] * w[1]).v;
        if q.v.abs() <= tol * wn {
            return None;
        }
        let norm = q.abs().sqrt();
        let b = [w[0] / norm, w[1] / norm];
        Some(b[1].dx - b[0].dy)
    };
    let w1 = [v2[1], -v2[0]];
    let w2 = [v1[1], -v1[0]];
    Ok((curl(w1), curl(w2)))
}

/// Sampled antiderivative `x_new(x) = int_{x0}^{x} |a(t)|^{-1/2} dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfectCoordinate {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub sign: f64,
}

impl PerfectCoordinate {
    /// `d x_new / dx` at sample `k` from fourth-order differences of the samples.
    pub fn derivative_at(&self, k: usize) -> f64 {
        let n = self.values.len();
        let h = self.xs[1] - self.xs[0];
        let v = &self.values;
        if k >= 2 && k + 2 < n {
            (-v[k + 2] + 8.0 * v[k + 1] - 8.0 * v[k - 1] + v[k - 2]) / (12.0 * h)
        } else if k + 4 < n {
            (-25.0 * v[k] + 48.0 * v[k + 1] - 36.0 * v[k + 2] + 16.0 * v[k + 3] - 3.0 * v[k + 4]) / (12.0 * h)
        } else {
            (25.0 * v[k] - 48.0 * v[k - 1] + 36.0 * v[k - 2] - 16.0 * v[k - 3] + 3.0 * v[k - 4]) / (12.0 * h)
        }
    }

    /// `(dx_new/dx)^2 a` at every sample.
    pub fn pulled_back_a(&self, a: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.xs.len())
            .map(|k| {
                let d = self.derivative_at(k);
                d * d * a(self.xs[k])
            })
            .collect()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Perfect coordinate along `[x0, x1]`, sampled at `n_steps + 1` points,
/// with 5-point Gauss-Legendre quadrature on each step.
pub fn perfect_coordinate(
    a: impl Fn(f64) -> f64,
    x0: f64,
    x1: f64,
    n_steps: usize,
) -> Result<PerfectCoordinate, IntegralError> {
    if n_steps < 5 || !(x1 > x0) {
        return Err(GeometryError::InvalidInput("perfect_coordinate needs x1 > x0 and n_steps >= 5".into()).into());
    }
    let h = (x1 - x0) / n_steps as f64;
    let sign = a(x0).signum();
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut acc = 0.0;
    xs.push(x0);
    values.push(0.0);
    for k in 0..n_steps {
        let lo = x0 + k as f64 * h;
        let mut s = 0.0;
        for (node, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
            let t = lo + 0.5 * h * (node + 1.0);
            let at = a(t);
            if at == 0.0 || at.signum() != sign || !at.is_finite() {
                return Err(IntegralError::ZeroCrossing { t });
            }
            s += w / at.abs().sqrt();
        }
        let hi = lo + h;
        let ah = a(hi);
        if ah == 0.0 || ah.signum() != sign {
            return Err(IntegralError::ZeroCrossing { t: hi });
        }
        acc += 0.5 * h * s;
        xs.push(hi);
        values.push(acc);
    }
    Ok(PerfectCoordinate { xs, values, sign })
}

/// `(L_v g)_{11}, (L_v g)_{12}, (L_v g)_{22}` at `p`.
pub fn killing_residual(metric: &MetricField, v: &VectorField2D, p: [f64; 2]) -> [f64; 3] {
    let g = metric.jets(p[0], p[1]);
    let vj = v.jets(p[0], p[1]);
    lie_derivative(&g, &vj)
}

/// `(L_v g)_{ij} = v^k d_k g_ij + g_kj d_i v^k + g_ik d_j v^k`.
pub fn lie_derivative(g: &SymJet, v: &[Jet; 2]) -> [f64; 3] {
    let comp = |i: usize, j: usize| {
        let mut s = 0.0;
        for k in 0..2 {
            s += v[k].v * g.get(i, j).d(k) + g.get(k, j).v * v[k].d(i) + g.get(i, k).v * v[k].d(j);
        }
        s
    };
    [comp(0, 0), comp(0, 1), comp(1, 1)]
}

pub fn max_killing_residual(metric: &MetricField, v: &VectorField2D, points: &[[f64; 2]]) -> f64 {
    points
        .iter()
        .map(|p| killing_residual(metric, v, *p).iter().fold(0.0f64, |m, c| m.max(c.abs())))
        .fold(0.0, f64::max)
}

/// Outcome of testing whether `F` is the square of a linear integral.
#[derive(Debug, Clone)]
pub enum SquareTest {
    /// `F = s (w . p)^2` with `s = +-1`; `field` is `w`.
    Square { field: VectorField2D, sign: f64, killing_residual: f64 },
    NotSquare { max_rank_defect: f64 },
    Degenerate,
}

impl SquareTest {
    pub fn field(&self) -> Option<&VectorField2D> {
        match self {
            SquareTest::Square { field, .. } => Some(field),
            _ => None,
        }
    }
}

fn linear_factor(t: &SymJet) -> [Jet; 2] {
    let (a, b2, c) = (t.m11, t.m12, t.m22);
    let w = if a.v.abs() >= c.v.abs() {
        let s = a.v.signum();
        let w1 = a.abs().sqrt();
        [w1, b2 / w1 * s]
    } else {
        let s = c.v.signum();
        let w2 = c.abs().sqrt();
        [b2 / w2 * s, w2]
    };
    if w[0].v < 0.0 || (w[0].v == 0.0 && w[1].v < 0.0) {
        [-w[0], -w[1]]
    } else {
        w
    }
}

/// Checks `rank F <= 1` with a fixed sign on all `points`; on success
/// returns the linear factor as a vector field and its Killing residual.
pub fn is_square_of_linear(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    points: &[[f64; 2]],
    tol: f64,
) -> SquareTest {
    let mut sign = 0.0;
    let mut worst_defect: f64 = 0.0;
    let mut all_zero = true;
    for p in points {
        let [a, b, c] = integral.coefficients(p[0], p[1]);
        let scale = a.abs() + b.abs() + c.abs();
        if scale <= tol {
            continue;
        }
        all_zero = false;
        let defect = (a * c - 0.25 * b * b).abs() / (scale * scale);
        worst_defect = worst_defect.max(defect);
        let s = (a + c).signum();
        if sign == 0.0 {
            sign = s;
        } else if s != sign {
            return SquareTest::NotSquare { max_rank_defect: worst_defect.max(1.0) };
        }
    }
    if all_zero {
        return SquareTest::Degenerate;
    }
    if worst_defect > tol {
        return SquareTest::NotSquare { max_rank_defect: worst_defect };
    }
    let f1 = integral.clone();
    let f2 = integral.clone();
    let field = VectorField2D::analytic(
        move |x, y| linear_factor(&f1.tensor_jets(x, y))[0],
        move |x, y| linear_factor(&f2.tensor_jets(x, y))[1],
    );
    let killing_residual = max_killing_residual(metric, &field, points);
    SquareTest::Square { field, sign, killing_residual }
}

/// Least-squares fit `F ~ k H` over the points; returns `k` and the
/// relative residual `|F - k H| / |F|` of the sampled coefficient vectors.
pub fn fit_to_hamiltonian(
    integral: &QuadraticIntegral,
    metric: &MetricField,
    points: &[[f64; 2]],
) -> (f64, f64) {
    let h = QuadraticIntegral::hamiltonian(metric);
    let mut fh = 0.0;
    let mut hh = 0.0;
    let mut ff = 0.0;
    let mut samples = vec![];
    for p in points {
        let fc = integral.coefficients(p[0], p[1]);
        let hc = h.coefficients(p[0], p[1]);
        for k in 0..3 {
            fh += fc[k] * hc[k];
            hh += hc[k] * hc[k];
            ff += fc[k] * fc[k];
        }
        samples.push((fc, hc));
    }
    let k = fh / hh;
    let res: f64 = samples
        .iter()
        .map(|(fc, hc)| (0..3).map(|i| (fc[i] - k * hc[i]).powi(2)).sum::<f64>())
        .sum();
    (k, (res / ff.max(f64::MIN_POSITIVE)).sqrt())
}

/// An admissible change `x_new = phi(x)`, `y_new = psi(y)`, given by
/// forward maps with derivatives and their inverses.
#[derive(Clone)]
pub struct AdmissibleChange {
    pub phi: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    pub phi_inv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub psi: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
    pub psi_inv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl AdmissibleChange {
    /// Coefficients in the new coordinates: momenta transform by
    /// `p_x_old = p_x_new phi'`, so `a_new = phi'^2 a`, `b_new = phi' psi' b`,
    /// `c_new = psi'^2 c`.
    pub fn transform(&self, integral: &QuadraticIntegral) -> QuadraticIntegral {
        let make = |k: usize| {
            let ch = self.clone();
            let f = integral.clone();
            ScalarField2D::sampled(
                move |xn, yn| {
                    let x = (ch.phi_inv)(xn);
                    let y = (ch.psi_inv)(yn);
                    let (_, dphi) = (ch.phi)(x);
                    let (_, dpsi) = (ch.psi)(y);
                    let c = f.coefficients(x, y);
                    match k {
                        0 => dphi * dphi * c[0],
                        1 => dphi * dpsi * c[1],
                        _ => dpsi * dpsi * c[2],
                    }
                },
                crate::field::DEFAULT_FD_STEP,
            )
        };
        QuadraticIntegral::new(make(0), make(1), make(2))
    }

    pub fn inverse(&self) -> AdmissibleChange {
        let (phi, phi_inv, psi, psi_inv) = (self.phi.clone(), self.phi_inv.clone(), self.psi.clone(), self.psi_inv.clone());
        let (phi2, psi2) = (phi.clone(), psi.clone());
        AdmissibleChange {
            phi: Arc::new(move |xn| {
                let x = phi_inv(xn);
                (x, 1.0 / phi2(x).1)
            }),
            phi_inv: Arc::new(move |x| phi(x).0),
            psi: Arc::new(move |yn| {
                let y = psi_inv(yn);
                (y, 1.0 / psi2(y).1)
            }),
            psi_inv: Arc::new(move |y| psi(y).0),
        }
    }
}
