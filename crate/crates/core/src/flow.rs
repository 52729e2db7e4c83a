//! Geodesic flow: Hamilton's equations for `H = 1/2 g^{ij} p_i p_j`.
//!
//! The Hamiltonian is not separable, so the one-step method is the implicit
//! midpoint rule solved by fixed-point iteration. By default three midpoint
//! substeps are composed with the triple-jump weights, which keeps the
//! scheme symmetric and symplectic and raises its order to four.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlowError, GeometryError};
use crate::field::VectorField2D;
use crate::integrals::QuadraticIntegral;
use crate::lattice::{Domain, Lattice};
use crate::metric::{christoffel_from_jets, inverse2, MetricField};

const MAX_INNER: usize = 25;
const INNER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn momentum(&self) -> [f64; 2] {
        [self.px, self.py]
    }

    fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Position reduced into the fundamental cell.
    pub fn reduced(&self, lattice: &Lattice) -> Self {
        let [x, y] = lattice.reduce([self.x, self.y]);
        Self { x, y, ..*self }
    }
}

/// Composition used for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Single implicit midpoint step (order 2).
    Midpoint,
    /// Triple-jump composition of midpoint steps (order 4).
    #[default]
    TripleJump,
}

impl Scheme {
    fn order(self) -> i32 {
        match self {
            Scheme::Midpoint => 2,
            Scheme::TripleJump => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub h: f64,
    pub tol: f64,
    pub h_min: f64,
    pub scheme: Scheme,
}

impl Default for StepControl {
    fn default() -> Self {
        Self { h: 1e-3, tol: 1e-8, h_min: 1e-6, scheme: Scheme::TripleJump }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// `max_k |H(s_k) - H(s_0)|`.
    pub h_drift: f64,
    pub integral_drifts: Vec<(String, f64)>,
    /// Step actually used.
    pub step: f64,
    /// Difference of the end states at `h` and `h/2`, scaled by `1/(2^order - 1)`.
    pub error_estimate: f64,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    /// Records `max_k |F(s_k) - F(s_0)|` under `name`.
    pub fn record_drift(&mut self, name: &str, f: &dyn PhaseFunction) {
        let d = conservation_report(self, f);
        self.integral_drifts.push((name.to_string(), d));
    }

    pub fn drift(&self, name: &str) -> Option<f64> {
        self.integral_drifts.iter().find(|(n, _)| n == name).map(|(_, d)| *d)
    }

    /// Positions reduced modulo the lattice; the stored states stay on the cover.
    pub fn reduced_states(&self, lattice: &Lattice) -> Vec<PhaseState> {
        self.states.iter().map(|s| s.reduced(lattice)).collect()
    }

    /// Sampled curve with exact velocities `g^{-1} p`.
    pub fn curve(&self, metric: &MetricField) -> Result<Vec<CurvePoint>, GeometryError> {
        self.states
            .iter()
            .map(|s| {
                let v = velocity(metric, s)?;
                Ok(CurvePoint { p: s.position(), v })
            })
            .collect()
    }
}

/// A function on the cotangent bundle.
pub trait PhaseFunction {
    fn eval(&self, s: &PhaseState) -> f64;
}

impl PhaseFunction for QuadraticIntegral {
    fn eval(&self, s: &PhaseState) -> f64 {
        QuadraticIntegral::eval(self, s.x, s.y, s.px, s.py)
    }
}

/// `I = v^i p_i` for a vector field `v`.
impl PhaseFunction for VectorField2D {
    fn eval(&self, s: &PhaseState) -> f64 {
        let v = self.value(s.x, s.y);
        v[0] * s.px + v[1] * s.py
    }
}

impl<F: Fn(&PhaseState) -> f64> PhaseFunction for F {
    fn eval(&self, s: &PhaseState) -> f64 {
        self(s)
    }
}

/// `H = 1/2 g^{ij} p_i p_j`.
pub fn hamiltonian(metric: &MetricField, s: &PhaseState) -> Result<f64, GeometryError> {
    let ginv = metric.inverse_metric_at(s.position())?;
    let p = s.momentum();
    Ok(0.5 * (ginv[0][0] * p[0] * p[0] + 2.0 * ginv[0][1] * p[0] * p[1] + ginv[1][1] * p[1] * p[1]))
}

/// `dx/dt = g^{-1} p`.
pub fn velocity(metric: &MetricField, s: &PhaseState) -> Result<[f64; 2], GeometryError> {
    let ginv = metric.inverse_metric_at(s.position())?;
    Ok([ginv[0][0] * s.px + ginv[0][1] * s.py, ginv[1][0] * s.px + ginv[1][1] * s.py])
}

/// Right-hand side `(g^{-1} p, 1/2 u^T d_k g u)` with `u = g^{-1} p`.
pub fn hamilton_rhs(metric: &MetricField, z: [f64; 4]) -> Result<[f64; 4], GeometryError> {
    let g = metric.checked_jets([z[0], z[1]])?;
    let ginv = inverse2(&g.values());
    let u = [ginv[0][0] * z[2] + ginv[0][1] * z[3], ginv[1][0] * z[2] + ginv[1][1] * z[3]];
    let dp = |k: usize| {
        let (a, b, c) = (g.m11.d(k), g.m12.d(k), g.m22.d(k));
        0.5 * (a * u[0] * u[0] + 2.0 * b * u[0] * u[1] + c * u[1] * u[1])
    };
    Ok([u[0], u[1], dp(0), dp(1)])
}

enum StepFailure {
    Geometry(GeometryError),
    NoConvergence,
}

fn midpoint_step(metric: &MetricField, z0: [f64; 4], h: f64) -> Result<[f64; 4], StepFailure> {
    let mut k = hamilton_rhs(metric, z0).map_err(StepFailure::Geometry)?;
    for _ in 0..MAX_INNER {
        let mid: [f64; 4] = std::array::from_fn(|i| z0[i] + 0.5 * h * k[i]);
        let k_new = hamilton_rhs(metric, mid).map_err(StepFailure::Geometry)?;
        let change = (0..4).map(|i| (h * (k_new[i] - k[i])).abs()).fold(0.0, f64::max);
        let scale = 1.0 + z0.iter().map(|v| v.abs()).fold(0.0, f64::max);
        k = k_new;
        if !change.is_finite() {
            break;
        }
        if change <= INNER_TOL * scale {
            return Ok(std::array::from_fn(|i| z0[i] + h * k[i]));
        }
    }
    Err(StepFailure::NoConvergence)
}

fn scheme_step(metric: &MetricField, z: [f64; 4], h: f64, scheme: Scheme) -> Result<[f64; 4], StepFailure> {
    match scheme {
        Scheme::Midpoint => midpoint_step(metric, z, h),
        Scheme::TripleJump => {
            let c = 2f64.cbrt();
            let w1 = 1.0 / (2.0 - c);
            let w0 = -c / (2.0 - c);
            let z = midpoint_step(metric, z, w1 * h)?;
            let z = midpoint_step(metric, z, w0 * h)?;
            midpoint_step(metric, z, w1 * h)
        }
    }
}

enum RunFailure {
    Geometry { t: f64, err: GeometryError },
    NoConvergence { t: f64 },
}

fn run_fixed(
    metric: &MetricField,
    s0: &PhaseState,
    t_end: f64,
    h: f64,
    scheme: Scheme,
) -> Result<(Vec<f64>, Vec<PhaseState>), RunFailure> {
    let n = (t_end / h).ceil().max(1.0) as usize;
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut z = s0.to_array();
    times.push(0.0);
    states.push(*s0);
    for k in 0..n {
        let t = k as f64 * h;
        z = match scheme_step(metric, z, h, scheme) {
            Ok(z) => z,
            Err(StepFailure::Geometry(err)) => return Err(RunFailure::Geometry { t, err }),
            Err(StepFailure::NoConvergence) => return Err(RunFailure::NoConvergence { t }),
        };
        times.push((k + 1) as f64 * h);
        states.push(PhaseState::from_array(z));
    }
    Ok((times, states))
}

fn max_drift(f: &dyn PhaseFunction, states: &[PhaseState]) -> f64 {
    let f0 = f.eval(&states[0]);
    states.iter().map(|s| (f.eval(s) - f0).abs()).fold(0.0, f64::max)
}

/// Integrates from `s0` over `[0, t_end]`. The step starts at `control.h`
/// and is halved until the energy drift is within `control.tol`; below
/// `control.h_min` the run fails with [`FlowError::StepUnderflow`].
pub fn integrate(
    metric: &MetricField,
    s0: &PhaseState,
    t_end: f64,
    control: &StepControl,
) -> Result<Trajectory, FlowError> {
    if !s0.is_finite() || !(t_end > 0.0) || !(control.h > 0.0) {
        return Err(GeometryError::InvalidInput("integrate needs a finite state and positive T and h".into()).into());
    }
    let h_of = |s: &PhaseState| hamiltonian(metric, s).unwrap_or(f64::NAN);
    hamiltonian(metric, s0)?;
    let mut h = control.h;
    let mut last_t = 0.0;
    let mut last_drift = f64::NAN;
    while h >= control.h_min {
        match run_fixed(metric, s0, t_end, h, control.scheme) {
            Ok((times, states)) => {
                let drift = max_drift(&h_of, &states);
                if drift <= control.tol {
                    let error_estimate = match run_fixed(metric, s0, t_end, 0.5 * h, control.scheme) {
                        Ok((_, fine)) => {
                            let (a, b) = (states.last().unwrap().to_array(), fine.last().unwrap().to_array());
                            let d = (0..4).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max);
                            d / (2f64.powi(control.scheme.order()) - 1.0)
                        }
                        Err(_) => f64::INFINITY,
                    };
                    let step = t_end / (times.len() - 1) as f64;
                    return Ok(Trajectory { times, states, h_drift: drift, integral_drifts: vec![], step, error_estimate });
                }
                last_t = t_end;
                last_drift = drift;
            }
            Err(RunFailure::Geometry { t, err }) => {
                if !matches!(err, GeometryError::DegenerateMetric { .. }) {
                    return Err(err.into());
                }
                last_t = t;
            }
            Err(RunFailure::NoConvergence { t }) => last_t = t,
        }
        h *= 0.5;
    }
    Err(FlowError::StepUnderflow { t: last_t, step: h, drift: last_drift })
}

/// `max_k |F(s_k) - F(s_0)|` along the trajectory.
pub fn conservation_report(traj: &Trajectory, f: &dyn PhaseFunction) -> f64 {
    max_drift(f, &traj.states)
}

/// Point of a sampled curve with its velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub p: [f64; 2],
    pub v: [f64; 2],
}

/// Samples of `t -> (p(t), p'(t))` at spacing `dt` from positions only
/// (fourth-order differences; needs at least 5 samples).
pub fn curve_from_positions(positions: &[[f64; 2]], dt: f64) -> Vec<CurvePoint> {
    let v = differentiate(positions, dt);
    positions.iter().zip(v).map(|(p, v)| CurvePoint { p: *p, v }).collect()
}

fn differentiate(samples: &[[f64; 2]], dt: f64) -> Vec<[f64; 2]> {
    let n = samples.len();
    assert!(n >= 5, "need at least 5 samples");
    (0..n)
        .map(|k| {
            std::array::from_fn(|c| {
                let s = |i: usize| samples[i][c];
                if k >= 2 && k + 2 < n {
                    (-s(k + 2) + 8.0 * s(k + 1) - 8.0 * s(k - 1) + s(k - 2)) / (12.0 * dt)
                } else if k + 4 < n {
                    (-25.0 * s(k) + 48.0 * s(k + 1) - 36.0 * s(k + 2) + 16.0 * s(k + 3) - 3.0 * s(k + 4)) / (12.0 * dt)
                } else {
                    (25.0 * s(k) - 48.0 * s(k - 1) + 36.0 * s(k - 2) - 16.0 * s(k - 3) + 3.0 * s(k - 4)) / (12.0 * dt)
                }
            })
        })
        .collect()
}

/// `max |det[a + Gamma(v, v), v]| / |v|^3` over the samples, with the
/// acceleration `a` from fourth-order differences of the velocities. Zero iff
/// the curve is a geodesic of `metric` up to reparametrization. The two
/// samples at each end are skipped.
pub fn unparam_geodesic_residual(metric: &MetricField, curve: &[CurvePoint], dt: f64) -> Result<f64, FlowError> {
    let n = curve.len();
    if n < 5 {
        return Err(GeometryError::InvalidInput("curve needs at least 5 samples".into()).into());
    }
    let vs: Vec<[f64; 2]> = curve.iter().map(|c| c.v).collect();
    let acc = differentiate(&vs, dt);
    let mut worst: f64 = 0.0;
    for k in 2..n - 2 {
        let CurvePoint { p, v } = curve[k];
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if speed < 1e-10 {
            return Err(FlowError::Stationary { index: k, speed });
        }
        let g = metric.checked_jets(p)?;
        let (gamma, _) = christoffel_from_jets(&g);
        let mut w = acc[k];
        for (i, wi) in w.iter_mut().enumerate() {
            for j in 0..2 {
                for l in 0..2 {
                    *wi += gamma[i][j][l] * v[j] * v[l];
                }
            }
        }
        worst = worst.max((w[0] * v[1] - w[1] * v[0]).abs() / speed.powi(3));
    }
    Ok(worst)
}

/// Random initial conditions in `domain` with `|H| = energy`; momentum
/// directions with `|H| < 1e-3` per unit covector are redrawn.
pub fn random_initial_conditions(
    metric: &MetricField,
    domain: &Domain,
    n: usize,
    seed: u64,
    energy: f64,
) -> Result<Vec<PhaseState>, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = domain.point(rng.gen(), rng.gen());
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let unit = PhaseState::new(p[0], p[1], th.cos(), th.sin());
        let h = hamiltonian(metric, &unit)?;
        if h.abs() < 1e-3 {
            continue;
        }
        let s = (energy / h.abs()).sqrt();
        out.push(PhaseState::new(p[0], p[1], unit.px * s, unit.py * s));
    }
    Ok(out)
}

/// Applies `f` to every item on up to `workers` threads, preserving order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Writes `t, x, y, px, py, H, <names...>` rows with 17 significant digits.
pub fn write_csv(
    out: &mut impl std::io::Write,
    traj: &Trajectory,
    metric: &MetricField,
    integrals: &[(&str, &dyn PhaseFunction)],
    lattice: Option<&Lattice>,
) -> std::io::Result<()> {
    let mut header = vec!["t", "x", "y", "px", "py", "H"];
    header.extend(integrals.iter().map(|(n, _)| *n));
    writeln!(out, "{}", header.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let shown = match lattice {
            Some(l) => s.reduced(l),
            None => *s,
        };
        let mut row = vec![*t, shown.x, shown.y, s.px, s.py, hamiltonian(metric, s).unwrap_or(f64::NAN)];
        row.extend(integrals.iter().map(|(_, f)| f.eval(s)));
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}
