use thiserror::Error;

use crate::certificate::Certificate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate metric at ({x}, {y}): |det g| = {det:e}")]
    DegenerateMetric { x: f64, y: f64, det: f64 },
    #[error("signature error at ({x}, {y}): {reason}")]
    Signature { x: f64, y: f64, reason: String },
    #[error("invalid lattice: |det[xi nu]| = {det:e}")]
    InvalidLattice { det: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("X and Y collide: min |X - Y| = {gap:e}")]
    Collision { gap: f64 },
    #[error("nonpositive conformal factor Im(h) = {value:e} at ({x}, {y})")]
    NonpositiveConformalFactor { x: f64, y: f64, value: f64 },
    #[error("Cauchy-Riemann violation {residual:e} at ({x}, {y})")]
    CauchyRiemann { x: f64, y: f64, residual: f64 },
    #[error("conformal factor vanishes at ({x}, {y})")]
    Degenerate { x: f64, y: f64 },
    #[error("certificate failure: {}", failed_names(.0))]
    Certificates(Vec<Certificate>),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn failed_names(certs: &[Certificate]) -> String {
    certs
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegralError {
    #[error("coefficient a vanishes near t = {t}")]
    ZeroCrossing { t: f64 },
    #[error("singular integral: det of mixed tensor = {det:e}")]
    SingularIntegral { det: f64 },
    #[error("candidate `{name}` is not an integral: bracket residual {residual:e}")]
    NotAnIntegral { name: String, residual: f64 },
    #[error("ordering violated: X_min = {x_min} <= Y_max = {y_max}")]
    Ordering { x_min: f64, y_max: f64 },
    #[error("form is not positive definite at ({x}, {y})")]
    NotPositiveDefinite { x: f64, y: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step underflow at t = {t}: step {step:e} below minimum, drift {drift:e}")]
    StepUnderflow { t: f64, step: f64, drift: f64 },
    #[error("inner iteration failed to converge at t = {t}")]
    NoConvergence { t: f64 },
    #[error("stationary point on curve sample {index}: |velocity| = {speed:e}")]
    Stationary { index: usize, speed: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
