//! Scalar and vector fields with analytic derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::jet::Jet;

/// Default central-difference step for fields without analytic partials.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Truncated trigonometric polynomial
/// `c0 + sum_k cos_k cos(2 pi k t / P) + sin_k sin(2 pi k t / P)`, `k = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant_term: f64,
    /// `cosine_coeffs[k - 1]` multiplies `cos(2 pi k t / P)`.
    pub cosine_coeffs: Vec<f64>,
    pub sine_coeffs: Vec<f64>,
    pub period: f64,
}

impl TrigPoly {
    pub fn new(constant_term: f64, cosine_coeffs: Vec<f64>, sine_coeffs: Vec<f64>, period: f64) -> Self {
        assert!(period > 0.0 && period.is_finite(), "period must be positive");
        Self { constant_term, cosine_coeffs, sine_coeffs, period }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, vec![], vec![], 1.0)
    }

    /// `c0 + amp * cos(2 pi k t / period)`.
    pub fn cosine(c0: f64, k: usize, amp: f64, period: f64) -> Self {
        let mut cos = vec![0.0; k];
        cos[k - 1] = amp;
        Self::new(c0, cos, vec![], period)
    }

    pub fn sine(c0: f64, k: usize, amp: f64, period: f64) -> Self {
        let mut sin = vec![0.0; k];
        sin[k - 1] = amp;
        Self::new(c0, vec![], sin, period)
    }

    pub fn is_constant(&self) -> bool {
        self.cosine_coeffs.iter().chain(&self.sine_coeffs).all(|c| *c == 0.0)
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `n`-th derivative at `t` (`n = 0` is the value).
    pub fn derivative(&self, n: u32, t: f64) -> f64 {
        let w = self.omega();
        let mut acc = if n == 0 { self.constant_term } else { 0.0 };
        // d^n/dt^n cos(u) = cos(u + n pi/2) * (wk)^n, same shift for sin.
        let shift = n as f64 * PI / 2.0;
        for (i, c) in self.cosine_coeffs.iter().enumerate() {
            if *c != 0.0 {
                let wk = w * (i + 1) as f64;
                acc += c * wk.powi(n as i32) * (wk * t + shift).cos();
            }
        }
        for (i, s) in self.sine_coeffs.iter().enumerate() {
            if *s != 0.0 {
                let wk = w * (i + 1) as f64;
                acc += s * wk.powi(n as i32) * (wk * t + shift).sin();
            }
        }
        acc
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(0, t)
    }

    /// Value, first and second derivative.
    pub fn eval3(&self, t: f64) -> (f64, f64, f64) {
        let w = self.omega();
        let mut v = self.constant_term;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for (i, c) in self.cosine_coeffs.iter().enumerate() {
            if *c != 0.0 {
                let wk = w * (i + 1) as f64;
                let (s, co) = (wk * t).sin_cos();
                v += c * co;
                d1 -= c * wk * s;
                d2 -= c * wk * wk * co;
            }
        }
        for (i, sc) in self.sine_coeffs.iter().enumerate() {
            if *sc != 0.0 {
                let wk = w * (i + 1) as f64;
                let (s, co) = (wk * t).sin_cos();
                v += sc * s;
                d1 += sc * wk * co;
                d2 -= sc * wk * wk * s;
            }
        }
        (v, d1, d2)
    }

    /// The derivative as a new trigonometric polynomial.
    pub fn differentiate(&self) -> TrigPoly {
        let w = self.omega();
        let n = self.cosine_coeffs.len().max(self.sine_coeffs.len());
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for (i, c) in self.cosine_coeffs.iter().enumerate() {
            sin[i] -= c * w * (i + 1) as f64;
        }
        for (i, s) in self.sine_coeffs.iter().enumerate() {
            cos[i] += s * w * (i + 1) as f64;
        }
        TrigPoly::new(0.0, cos, sin, self.period)
    }

    pub fn jet_in_x(&self, x: f64) -> Jet {
        let (v, d1, d2) = self.eval3(x);
        Jet::of_x(v, d1, d2)
    }

    pub fn jet_in_y(&self, y: f64) -> Jet {
        let (v, d1, d2) = self.eval3(y);
        Jet::of_y(v, d1, d2)
    }

    /// Global minimum and maximum: dense scan over one period followed by
    /// golden-section refinement around the best samples.
    pub fn extrema(&self) -> (f64, f64) {
        if self.is_constant() {
            return (self.constant_term, self.constant_term);
        }
        const SAMPLES: usize = 4096;
        let h = self.period / SAMPLES as f64;
        let (mut imin, mut imax) = (0, 0);
        let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..SAMPLES {
            let v = self.value(i as f64 * h);
            if v < vmin {
                vmin = v;
                imin = i;
            }
            if v > vmax {
                vmax = v;
                imax = i;
            }
        }
        let tmin = golden_section(|t| self.value(t), (imin as f64 - 1.0) * h, (imin as f64 + 1.0) * h);
        let tmax = golden_section(|t| -self.value(t), (imax as f64 - 1.0) * h, (imax as f64 + 1.0) * h);
        (self.value(tmin).min(vmin), self.value(tmax).max(vmax))
    }

    /// Largest deviation of `t -> f(t + shift) - f(t)` over `n` samples of one
    /// period; zero (to round-off) iff `shift` is a period.
    pub fn shift_defect(&self, shift: f64, n: usize) -> f64 {
        let h = self.period / n as f64;
        (0..n)
            .map(|i| {
                let t = i as f64 * h;
                (self.value(t + shift) - self.value(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|f(-t) - f(t)|` over `n` samples.
    pub fn evenness_defect(&self, n: usize) -> f64 {
        let h = self.period / n as f64;
        (0..n)
            .map(|i| {
                let t = i as f64 * h;
                (self.value(-t) - self.value(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Sum of absolute coefficients; bounds the function's magnitude.
    pub fn coefficient_norm(&self) -> f64 {
        self.constant_term.abs()
            + self.cosine_coeffs.iter().chain(&self.sine_coeffs).map(|c| c.abs()).sum::<f64>()
    }
}

/// Minimizer of a unimodal function on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() < 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

type JetFn = Arc<dyn Fn(f64, f64) -> Jet + Send + Sync>;
type ValueFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Repr {
    Analytic(JetFn),
    Sampled(ValueFn),
}

/// Smooth function of `(x, y)`.
///
/// Either analytic (evaluates to a [`Jet`] with exact partials) or
/// value-only, in which case partials come from Richardson-extrapolated
/// central differences with step `fd_step`.
#[derive(Clone)]
pub struct ScalarField2D {
    repr: Repr,
    fd_step: f64,
}

impl fmt::Debug for ScalarField2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            Repr::Analytic(_) => "analytic",
            Repr::Sampled(_) => "sampled",
        };
        f.debug_struct("ScalarField2D").field("kind", &kind).field("fd_step", &self.fd_step).finish()
    }
}

impl ScalarField2D {
    pub fn analytic(f: impl Fn(f64, f64) -> Jet + Send + Sync + 'static) -> Self {
        Self { repr: Repr::Analytic(Arc::new(f)), fd_step: DEFAULT_FD_STEP }
    }

    pub fn sampled(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, fd_step: f64) -> Self {
        assert!(fd_step > 0.0);
        Self { repr: Repr::Sampled(Arc::new(f)), fd_step }
    }

    pub fn constant(c: f64) -> Self {
        Self::analytic(move |_, _| Jet::constant(c))
    }

    pub fn from_x(p: TrigPoly) -> Self {
        Self::analytic(move |x, _| p.jet_in_x(x))
    }

    pub fn from_y(p: TrigPoly) -> Self {
        Self::analytic(move |_, y| p.jet_in_y(y))
    }

    pub fn has_analytic_partials(&self) -> bool {
        matches!(self.repr, Repr::Analytic(_))
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    /// Drops analytic partials, keeping only values.
    pub fn to_sampled(&self) -> Self {
        let me = self.clone();
        Self::sampled(move |x, y| me.value(x, y), DEFAULT_FD_STEP)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        match &self.repr {
            Repr::Analytic(f) => f(x, y).v,
            Repr::Sampled(f) => f(x, y),
        }
    }

    /// Value and partials up to second order.
    pub fn jet(&self, x: f64, y: f64) -> Jet {
        match &self.repr {
            Repr::Analytic(f) => f(x, y),
            Repr::Sampled(_) => self.fd_jet(x, y),
        }
    }

    /// Partials from central differences regardless of representation.
    pub fn fd_jet(&self, x: f64, y: f64) -> Jet {
        let f = |x: f64, y: f64| self.value(x, y);
        let h = self.fd_step;
        let d1 = |h: f64, ex: f64, ey: f64| (f(x + h * ex, y + h * ey) - f(x - h * ex, y - h * ey)) / (2.0 * h);
        let rich = |a: f64, b: f64| (4.0 * b - a) / 3.0;
        let dx = rich(d1(h, 1.0, 0.0), d1(h / 2.0, 1.0, 0.0));
        let dy = rich(d1(h, 0.0, 1.0), d1(h / 2.0, 0.0, 1.0));

        let k = h.sqrt().max(h);
        let v = f(x, y);
        let d2 = |k: f64, ex: f64, ey: f64| (f(x + k * ex, y + k * ey) - 2.0 * v + f(x - k * ex, y - k * ey)) / (k * k);
        let mixed = |k: f64| {
            (f(x + k, y + k) - f(x + k, y - k) - f(x - k, y + k) + f(x - k, y - k)) / (4.0 * k * k)
        };
        let dxx = rich(d2(k, 1.0, 0.0), d2(k / 2.0, 1.0, 0.0));
        let dyy = rich(d2(k, 0.0, 1.0), d2(k / 2.0, 0.0, 1.0));
        let dxy = rich(mixed(k), mixed(k / 2.0));
        Jet::new(v, dx, dy, dxx, dxy, dyy)
    }

    /// Pointwise combination of two fields; stays analytic when both are.
    pub fn zip_with(&self, other: &ScalarField2D, op: impl Fn(Jet, Jet) -> Jet + Send + Sync + 'static) -> Self {
        let (a, b) = (self.clone(), other.clone());
        if self.has_analytic_partials() && other.has_analytic_partials() {
            Self::analytic(move |x, y| op(a.jet(x, y), b.jet(x, y)))
        } else {
            Self::sampled(
                move |x, y| op(Jet::constant(a.value(x, y)), Jet::constant(b.value(x, y))).v,
                self.fd_step.max(other.fd_step),
            )
        }
    }

    pub fn map(&self, op: impl Fn(Jet) -> Jet + Send + Sync + 'static) -> Self {
        let a = self.clone();
        if self.has_analytic_partials() {
            Self::analytic(move |x, y| op(a.jet(x, y)))
        } else {
            Self::sampled(move |x, y| op(Jet::constant(a.value(x, y))).v, self.fd_step)
        }
    }
}

/// Vector field `vx d/dx + vy d/dy`.
#[derive(Debug, Clone)]
pub struct VectorField2D {
    pub vx: ScalarField2D,
    pub vy: ScalarField2D,
}

impl VectorField2D {
    pub fn new(vx: ScalarField2D, vy: ScalarField2D) -> Self {
        Self { vx, vy }
    }

    pub fn constant(vx: f64, vy: f64) -> Self {
        Self::new(ScalarField2D::constant(vx), ScalarField2D::constant(vy))
    }

    pub fn analytic(
        vx: impl Fn(f64, f64) -> Jet + Send + Sync + 'static,
        vy: impl Fn(f64, f64) -> Jet + Send + Sync + 'static,
    ) -> Self {
        Self::new(ScalarField2D::analytic(vx), ScalarField2D::analytic(vy))
    }

    pub fn value(&self, x: f64, y: f64) -> [f64; 2] {
        [self.vx.value(x, y), self.vy.value(x, y)]
    }

    pub fn jets(&self, x: f64, y: f64) -> [Jet; 2] {
        [self.vx.jet(x, y), self.vy.jet(x, y)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.vx.map(move |j| j * s), self.vy.map(move |j| j * s))
    }
}
