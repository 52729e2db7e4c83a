//! Second-order forward-mode jets in two variables.
//!
//! A [`Jet`] carries the value of a function of `(x, y)` together with its
//! first and second partial derivatives. Arithmetic on jets applies the
//! product, quotient and chain rules, so any closed-form composite built out
//! of jets has exact (round-off limited) derivatives.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    pub const fn new(v: f64, dx: f64, dy: f64, dxx: f64, dxy: f64, dyy: f64) -> Self {
        Self { v, dx, dy, dxx, dxy, dyy }
    }

    pub const fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    /// The coordinate function `x` at abscissa `x`.
    pub const fn var_x(x: f64) -> Self {
        Self::new(x, 1.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub const fn var_y(y: f64) -> Self {
        Self::new(y, 0.0, 1.0, 0.0, 0.0, 0.0)
    }

    /// Jet of `t -> g(t)` composed with a function of `x` only, given
    /// `g, g', g''` at the point.
    pub const fn of_x(g: f64, g1: f64, g2: f64) -> Self {
        Self::new(g, g1, 0.0, g2, 0.0, 0.0)
    }

    pub const fn of_y(g: f64, g1: f64, g2: f64) -> Self {
        Self::new(g, 0.0, g1, 0.0, 0.0, g2)
    }

    /// Gradient `(d/dx, d/dy)`.
    pub fn grad(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }

    /// Partial derivative along coordinate `k` (0 = x, 1 = y).
    pub fn d(&self, k: usize) -> f64 {
        match k {
            0 => self.dx,
            _ => self.dy,
        }
    }

    /// Second partial derivative along coordinates `k`, `l`.
    pub fn dd(&self, k: usize, l: usize) -> f64 {
        match (k, l) {
            (0, 0) => self.dxx,
            (1, 1) => self.dyy,
            _ => self.dxy,
        }
    }

    /// Chain rule: `g(self)` given `g, g', g''` evaluated at `self.v`.
    pub fn chain(&self, g: f64, g1: f64, g2: f64) -> Self {
        Self {
            v: g,
            dx: g1 * self.dx,
            dy: g1 * self.dy,
            dxx: g2 * self.dx * self.dx + g1 * self.dxx,
            dxy: g2 * self.dx * self.dy + g1 * self.dxy,
            dyy: g2 * self.dy * self.dy + g1 * self.dyy,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    /// Real power `self^p` for positive base.
    pub fn powf(self, p: f64) -> Self {
        let v = self.v.powf(p);
        let v1 = p * self.v.powf(p - 1.0);
        let v2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.chain(v, v1, v2)
    }

    /// Real cube root, defined for negative arguments too.
    pub fn cbrt(self) -> Self {
        let r = self.v.cbrt();
        let r1 = 1.0 / (3.0 * r * r);
        let r2 = -2.0 / (9.0 * r * r * r * r * r);
        self.chain(r, r1, r2)
    }

    pub fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            v: s * self.v,
            dx: s * self.dx,
            dy: s * self.dy,
            dxx: s * self.dxx,
            dxy: s * self.dxy,
            dyy: s * self.dyy,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.v, self.dx, self.dy, self.dxx, self.dxy, self.dyy]
            .iter()
            .all(|c| c.is_finite())
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, c: f64) -> Jet {
        self.scale(c)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self.scale(1.0 / c)
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        (-j) + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}

impl Div<Jet> for f64 {
    type Output = Jet;
    fn div(self, j: Jet) -> Jet {
        j.recip().scale(self)
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

impl MulAssign for Jet {
    fn mul_assign(&mut self, o: Jet) {
        *self = *self * o;
    }
}

/// Symmetric 2x2 matrix of jets, stored as `(m11, m12, m22)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymJet {
    pub m11: Jet,
    pub m12: Jet,
    pub m22: Jet,
}

impl SymJet {
    pub fn new(m11: Jet, m12: Jet, m22: Jet) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn det(&self) -> Jet {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn inverse(&self) -> SymJet {
        let det = self.det();
        let r = det.recip();
        SymJet::new(self.m22 * r, -self.m12 * r, self.m11 * r)
    }

    pub fn get(&self, i: usize, j: usize) -> Jet {
        match (i, j) {
            (0, 0) => self.m11,
            (1, 1) => self.m22,
            _ => self.m12,
        }
    }

    pub fn values(&self) -> [[f64; 2]; 2] {
        [[self.m11.v, self.m12.v], [self.m12.v, self.m22.v]]
    }

    pub fn full(&self) -> [[Jet; 2]; 2] {
        [[self.m11, self.m12], [self.m12, self.m22]]
    }
}

/// Product of two general 2x2 jet matrices.
pub fn mat_mul(a: &[[Jet; 2]; 2], b: &[[Jet; 2]; 2]) -> [[Jet; 2]; 2] {
    let mut out = [[Jet::default(); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_det(a: &[[Jet; 2]; 2]) -> Jet {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}
