//! Metric fields on surfaces: Levi-Civita connection, curvature, null frames.
//!
//! A metric is stored by its three coefficient fields `g11, g12, g22`. The
//! symmetric product `f dx dy` is stored with `g12 = f / 2`, so that the
//! quadratic form is `f * xdot * ydot`.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::field::ScalarField2D;
use crate::jet::{Jet, SymJet};
use crate::lattice::Lattice;

/// Below this `|det g|` the metric is treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

pub type Mat2 = [[f64; 2]; 2];

/// `Gamma[i][j][k]` = Christoffel symbol of the second kind `Gamma^i_{jk}`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    /// Definite (`det g > 0`).
    Riemannian,
    /// Signature `(+, -)` (`det g < 0`).
    Lorentzian,
}

impl Signature {
    pub fn of_det(det: f64) -> Self {
        if det < 0.0 {
            Signature::Lorentzian
        } else {
            Signature::Riemannian
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetricField {
    pub g11: ScalarField2D,
    pub g12: ScalarField2D,
    pub g22: ScalarField2D,
    pub signature: Signature,
    pub lattice: Option<Lattice>,
}

impl MetricField {
    pub fn new(g11: ScalarField2D, g12: ScalarField2D, g22: ScalarField2D, signature: Signature) -> Self {
        Self { g11, g12, g22, signature, lattice: None }
    }

    pub fn with_lattice(mut self, lattice: Lattice) -> Self {
        self.lattice = Some(lattice);
        self
    }

    pub fn constant(m: Mat2) -> Self {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Self::new(
            ScalarField2D::constant(m[0][0]),
            ScalarField2D::constant(m[0][1]),
            ScalarField2D::constant(m[1][1]),
            Signature::of_det(det),
        )
    }

    /// `g = f dx dy` in null coordinates.
    pub fn null_coordinates(f: ScalarField2D) -> Self {
        Self::new(
            ScalarField2D::constant(0.0),
            f.map(|j| j * 0.5),
            ScalarField2D::constant(0.0),
            Signature::Lorentzian,
        )
    }

    /// `g = lambda (dx^2 + eps dy^2)`.
    pub fn conformal_diagonal(lambda: ScalarField2D, eps: f64) -> Self {
        let sig = if eps < 0.0 { Signature::Lorentzian } else { Signature::Riemannian };
        Self::new(lambda.clone(), ScalarField2D::constant(0.0), lambda.map(move |j| j * eps), sig)
    }

    /// Metric built from a symmetric jet-valued matrix function.
    pub fn from_jet_fn(
        f: impl Fn(f64, f64) -> SymJet + Send + Sync + Clone + 'static,
        signature: Signature,
    ) -> Self {
        let (f1, f2, f3) = (f.clone(), f.clone(), f);
        Self::new(
            ScalarField2D::analytic(move |x, y| f1(x, y).m11),
            ScalarField2D::analytic(move |x, y| f2(x, y).m12),
            ScalarField2D::analytic(move |x, y| f3(x, y).m22),
            signature,
        )
    }

    /// Same coefficients, with partials from finite differences only.
    pub fn to_sampled(&self) -> Self {
        Self {
            g11: self.g11.to_sampled(),
            g12: self.g12.to_sampled(),
            g22: self.g22.to_sampled(),
            signature: self.signature,
            lattice: self.lattice,
        }
    }

    pub fn jets(&self, x: f64, y: f64) -> SymJet {
        SymJet::new(self.g11.jet(x, y), self.g12.jet(x, y), self.g22.jet(x, y))
    }

    pub fn values(&self, x: f64, y: f64) -> Mat2 {
        let (a, b, c) = (self.g11.value(x, y), self.g12.value(x, y), self.g22.value(x, y));
        [[a, b], [b, c]]
    }

    pub fn det_at(&self, x: f64, y: f64) -> f64 {
        det2(&self.values(x, y))
    }

    /// `[[g11, g12], [g12, g22]]` at `p`.
    pub fn metric_at(&self, p: [f64; 2]) -> Result<Mat2, GeometryError> {
        let m = self.values(p[0], p[1]);
        check_nondegenerate(&m, p)?;
        Ok(m)
    }

    pub fn inverse_metric_at(&self, p: [f64; 2]) -> Result<Mat2, GeometryError> {
        let m = self.metric_at(p)?;
        Ok(inverse2(&m))
    }

    /// Checked jets: errors when the metric degenerates at `p`.
    pub fn checked_jets(&self, p: [f64; 2]) -> Result<SymJet, GeometryError> {
        let j = self.jets(p[0], p[1]);
        check_nondegenerate(&j.values(), p)?;
        Ok(j)
    }

    pub fn christoffel_at(&self, p: [f64; 2]) -> Result<Christoffel, GeometryError> {
        let g = self.checked_jets(p)?;
        Ok(christoffel_from_jets(&g).0)
    }

    /// Gaussian curvature `K = R / 2` from the Ricci scalar of the
    /// Levi-Civita connection.
    pub fn gauss_curvature_at(&self, p: [f64; 2]) -> Result<f64, GeometryError> {
        let g = self.checked_jets(p)?;
        Ok(gauss_curvature_from_jets(&g))
    }

    /// Positively oriented null frame `(V1, V2)` with `g(V1, V2) = 1`.
    pub fn null_frame_at(&self, p: [f64; 2]) -> Result<([f64; 2], [f64; 2]), GeometryError> {
        let g = self.checked_jets(p)?;
        let (v1, v2) = null_frame_jets(&g, p)?;
        Ok(([v1[0].v, v1[1].v], [v2[0].v, v2[1].v]))
    }

    /// `g(u, w)` at `p`.
    pub fn inner(&self, p: [f64; 2], u: [f64; 2], w: [f64; 2]) -> f64 {
        let m = self.values(p[0], p[1]);
        bilinear(&m, u, w)
    }

    /// Checks nondegeneracy and the declared signature at every point.
    pub fn check_signature(&self, points: &[[f64; 2]]) -> Result<(), GeometryError> {
        for p in points {
            let m = self.metric_at(*p)?;
            let sig = Signature::of_det(det2(&m));
            if sig != self.signature {
                return Err(GeometryError::Signature {
                    x: p[0],
                    y: p[1],
                    reason: format!("declared {:?}, det g = {:e}", self.signature, det2(&m)),
                });
            }
        }
        Ok(())
    }
}

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn mul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn bilinear(m: &Mat2, u: [f64; 2], w: [f64; 2]) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += m[i][j] * u[i] * w[j];
        }
    }
    s
}

fn check_nondegenerate(m: &Mat2, p: [f64; 2]) -> Result<(), GeometryError> {
    let det = det2(m);
    if !(det.abs() >= DEGENERACY_THRESHOLD) {
        return Err(GeometryError::DegenerateMetric { x: p[0], y: p[1], det });
    }
    Ok(())
}

/// Christoffel symbols and their first partials `dGamma[m][i][j][k] = d_m Gamma^i_{jk}`.
pub fn christoffel_from_jets(g: &SymJet) -> (Christoffel, [Christoffel; 2]) {
    let gv = g.values();
    let ginv = inverse2(&gv);
    // first partials d_m g_ij and second partials d_m d_n g_ij
    let dg = |m: usize, i: usize, j: usize| g.get(i, j).d(m);
    let ddg = |m: usize, n: usize, i: usize, j: usize| g.get(i, j).dd(m, n);

    let mut first = [[[0.0; 2]; 2]; 2]; // Gamma_{l, jk}
    let mut dfirst = [[[[0.0; 2]; 2]; 2]; 2]; // d_m Gamma_{l, jk}
    for l in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                first[l][j][k] = 0.5 * (dg(j, l, k) + dg(k, l, j) - dg(l, j, k));
                for m in 0..2 {
                    dfirst[m][l][j][k] = 0.5 * (ddg(m, j, l, k) + ddg(m, k, l, j) - ddg(m, l, j, k));
                }
            }
        }
    }
    // d_m g^{il} = -g^{ia} d_m g_ab g^{bl}
    let mut dginv = [[[0.0; 2]; 2]; 2];
    for (m, dm) in dginv.iter_mut().enumerate() {
        for i in 0..2 {
            for l in 0..2 {
                let mut s = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        s -= ginv[i][a] * dg(m, a, b) * ginv[b][l];
                    }
                }
                dm[i][l] = s;
            }
        }
    }
    let mut gamma = [[[0.0; 2]; 2]; 2];
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in j..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += ginv[i][l] * first[l][j][k];
                }
                gamma[i][j][k] = s;
                gamma[i][k][j] = s;
                for m in 0..2 {
                    let mut ds = 0.0;
                    for l in 0..2 {
                        ds += dginv[m][i][l] * first[l][j][k] + ginv[i][l] * dfirst[m][l][j][k];
                    }
                    dgamma[m][i][j][k] = ds;
                    dgamma[m][i][k][j] = ds;
                }
            }
        }
    }
    (gamma, dgamma)
}

pub fn gauss_curvature_from_jets(g: &SymJet) -> f64 {
    let (gamma, dgamma) = christoffel_from_jets(g);
    let ginv = inverse2(&g.values());
    // R^r_{s m n} = d_m Gamma^r_{ns} - d_n Gamma^r_{ms} + Gamma^r_{ml} Gamma^l_{ns} - Gamma^r_{nl} Gamma^l_{ms}
    let riemann = |r: usize, s: usize, m: usize, n: usize| {
        let mut v = dgamma[m][r][n][s] - dgamma[n][r][m][s];
        for l in 0..2 {
            v += gamma[r][m][l] * gamma[l][n][s] - gamma[r][n][l] * gamma[l][m][s];
        }
        v
    };
    let mut scalar = 0.0;
    for s in 0..2 {
        for n in 0..2 {
            let ricci: f64 = (0..2).map(|r| riemann(r, s, r, n)).sum();
            scalar += ginv[s][n] * ricci;
        }
    }
    0.5 * scalar
}

/// Null frame with jets. Branch: `g(V1, V2) > 0`, `det[V1 V2] > 0`, and
/// `V1` has positive x-component (positive y-component if x vanishes).
/// Each vector is scaled to the same Euclidean length so that `g(V1, V2) = 1`.
pub fn null_frame_jets(g: &SymJet, p: [f64; 2]) -> Result<([Jet; 2], [Jet; 2]), GeometryError> {
    let det = g.det();
    if det.v >= 0.0 {
        return Err(GeometryError::Signature {
            x: p[0],
            y: p[1],
            reason: format!("null frame needs det g < 0, got {:e}", det.v),
        });
    }
    let (g11, g12, g22) = (g.m11, g.m12, g.m22);
    let disc = (-det).sqrt();
    // Both solutions of g11 a^2 + 2 g12 a b + g22 b^2 = 0, written without
    // cancellation: |g12 + s disc| >= disc > 0.
    let s = if g12.v >= 0.0 { 1.0 } else { -1.0 };
    let q = g12 + disc * s;
    let u = [-q, g11];
    let mut w = [-g22, q];

    let gm = g.full();
    let pair = |a: &[Jet; 2], b: &[Jet; 2]| {
        let mut acc = Jet::constant(0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += gm[i][j] * a[i] * b[j];
            }
        }
        acc
    };
    if pair(&u, &w).v < 0.0 {
        w = [-w[0], -w[1]];
    }
    let orient = u[0].v * w[1].v - u[1].v * w[0].v;
    let (mut v1, mut v2) = if orient > 0.0 { (u, w) } else { (w, u) };
    if v1[0].v < 0.0 || (v1[0].v == 0.0 && v1[1].v < 0.0) {
        v1 = [-v1[0], -v1[1]];
        v2 = [-v2[0], -v2[1]];
    }
    let n1 = (v1[0] * v1[0] + v1[1] * v1[1]).sqrt();
    let n2 = (v2[0] * v2[0] + v2[1] * v2[1]).sqrt();
    let e1 = [v1[0] / n1, v1[1] / n1];
    let e2 = [v2[0] / n2, v2[1] / n2];
    let lam = pair(&e1, &e2).sqrt().recip();
    Ok(([e1[0] * lam, e1[1] * lam], [e2[0] * lam, e2[1] * lam]))
}
