use std::path::Path;

use liouville_lab::config::FamilyConfig;
use liouville_lab::equivalence::{geodesic_equivalence_check, riemannianize, superintegrability_rank_screened};
use liouville_lab::flow::{integrate, parallel_map, random_initial_conditions, write_csv, PhaseFunction};
use liouville_lab::integrals::{classify_grid, killing_residual, poisson_bracket_residual, TypeLabel};
use liouville_lab::{Certificate, FamilyError, FlowError, GeometryError, IntegralError, PhaseState, TorusSystem};
use serde_json::{json, Map, Value};

use crate::report::{num, summary};

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub tol: Option<f64>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub workers: usize,
}

pub enum Failure {
    /// Exit code 1.
    Input(String),
}

pub struct Outcome {
    pub report: Map<String, Value>,
    pub passed: bool,
    /// `(file name, contents)` written next to the report.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn new(command: &str, cfg: &FamilyConfig) -> Self {
        let mut report = Map::new();
        report.insert("command".into(), json!(command));
        report.insert("family".into(), json!(cfg.label()));
        report.insert("config".into(), serde_json::to_value(cfg).expect("config serializes"));
        Self { report, passed: true, files: vec![] }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.report.insert(key.into(), value);
    }

    fn fail_with(mut self, error: impl std::fmt::Display) -> Self {
        self.passed = false;
        self.set("error", json!(error.to_string()));
        self
    }
}

pub fn load_config(path: &str, common: &Common) -> Result<FamilyConfig, Failure> {
    let mut cfg = if let Some(name) = path.strip_prefix("preset:") {
        FamilyConfig::preset(name).ok_or_else(|| Failure::Input(format!("unknown preset `{name}`")))?
    } else {
        let text = std::fs::read_to_string(Path::new(path)).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
        FamilyConfig::from_json(&text).map_err(|e| Failure::Input(format!("{path}: {e}")))?
    };
    if let Some(g) = common.grid {
        cfg.grid = g;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.tolerances.bracket = t;
    }
    if cfg.grid < 2 {
        return Err(Failure::Input(format!("grid must be at least 2, got {}", cfg.grid)));
    }
    Ok(cfg)
}

fn certificates_json(certs: &[Certificate]) -> Value {
    Value::Array(
        certs
            .iter()
            .map(|c| {
                let mut m = Map::new();
                m.insert("name".into(), json!(c.name));
                m.insert("passed".into(), json!(c.passed));
                m.insert("value".into(), num(c.value));
                m.insert("threshold".into(), num(c.threshold));
                if !c.detail.is_empty() {
                    m.insert("detail".into(), json!(c.detail));
                }
                Value::Object(m)
            })
            .collect(),
    )
}

/// Builds the family; certificate and mathematical failures end up in the
/// report, malformed input in [`Failure::Input`].
fn build_system(out: &mut Outcome, cfg: &FamilyConfig) -> Result<Option<TorusSystem>, Failure> {
    match cfg.build() {
        Ok(sys) => {
            out.set("certificates", certificates_json(&sys.certificates));
            Ok(Some(sys))
        }
        Err(FamilyError::Geometry(e @ (GeometryError::InvalidInput(_) | GeometryError::InvalidLattice { .. }))) => {
            Err(Failure::Input(e.to_string()))
        }
        Err(FamilyError::Certificates(certs)) => {
            out.set("certificates", certificates_json(&certs));
            out.passed = false;
            let failed: Vec<&str> = certs.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            out.set("failed_certificates", json!(failed));
            Ok(None)
        }
        Err(e) => {
            out.passed = false;
            out.set("error", json!(e.to_string()));
            Ok(None)
        }
    }
}

pub fn build(cfg: &FamilyConfig, _common: &Common) -> Result<Outcome, Failure> {
    let mut out = Outcome::new("build", cfg);
    let Some(sys) = build_system(&mut out, cfg)? else { return Ok(out) };
    let grid = sys.grid(cfg.grid);
    let mut residuals = Map::new();
    let mut worst: f64 = 0.0;
    for (name, f) in sys.named_integrals() {
        let r: Vec<f64> = grid
            .iter()
            .map(|p| poisson_bracket_residual(&sys.metric, &f, *p).unwrap_or(f64::INFINITY))
            .collect();
        worst = r.iter().cloned().fold(worst, f64::max);
        residuals.insert(format!("bracket_{name}"), summary(&r));
    }
    if let Some(k) = &sys.killing {
        let r: Vec<f64> = grid
            .iter()
            .map(|p| killing_residual(&sys.metric, k, *p).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        residuals.insert("killing".into(), summary(&r));
    }
    out.set("residuals", Value::Object(residuals));
    out.set("grid", json!(cfg.grid));
    out.passed = sys.passed() && worst <= cfg.tolerances.bracket;
    if worst > cfg.tolerances.bracket {
        out.set("error", json!(format!("bracket residual {worst:e} exceeds {:e}", cfg.tolerances.bracket)));
    }
    Ok(out)
}

pub fn classify(cfg: &FamilyConfig, _common: &Common) -> Result<Outcome, Failure> {
    let mut out = Outcome::new("classify", cfg);
    let Some(sys) = build_system(&mut out, cfg)? else { return Ok(out) };
    let n = cfg.grid;
    let report = match classify_grid(&sys.integral, &sys.metric, &sys.domain, n) {
        Ok(r) => r,
        Err(e) => return Ok(out.fail_with(e)),
    };
    let mut fractions = Map::new();
    for l in TypeLabel::ALL {
        fractions.insert(l.name().into(), num(report.fraction(l)));
    }
    out.set(
        "classification",
        json!({
            "grid": [n, n],
            "fractions": fractions,
            "jordan_fraction": num(report.jordan_fraction()),
            "boundary_cells": report.boundary_cells,
            "zero_threshold": num(report.zero_threshold),
        }),
    );
    let mut csv = String::from("i,j,x,y,label\n");
    let pts = sys.domain.grid(n);
    for (k, (p, l)) in pts.iter().zip(&report.labels).enumerate() {
        csv.push_str(&format!("{},{},{:.16e},{:.16e},{}\n", k % n, k / n, p[0], p[1], l.name()));
    }
    out.files.push(("classification.csv".into(), csv));
    Ok(out)
}

pub struct FlowArgs {
    pub t0: f64,
    pub t_end: Option<f64>,
    pub ic: Option<String>,
    pub random: Option<usize>,
}

fn read_initial_conditions(path: &str) -> Result<Vec<PhaseState>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Input(format!("{path}: {e}")))?;
    let mut out = vec![];
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Failure::Input(format!("{path}: {e}")))?;
        let vals: Result<Vec<f64>, _> = row.iter().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) if v.len() == 4 => out.push(PhaseState::new(v[0], v[1], v[2], v[3])),
            _ => return Err(Failure::Input(format!("{path}: record {} must hold four numbers x,y,px,py", line + 1))),
        }
    }
    Ok(out)
}

pub fn flow(cfg: &FamilyConfig, common: &Common, args: &FlowArgs) -> Result<Outcome, Failure> {
    let mut out = Outcome::new("flow", cfg);
    let Some(sys) = build_system(&mut out, cfg)? else { return Ok(out) };
    let t_end = args.t_end.unwrap_or(cfg.flow.t_end);
    let duration = t_end - args.t0;
    if !(duration > 0.0) {
        return Err(Failure::Input(format!("end time {t_end} must exceed start time {}", args.t0)));
    }
    let starts = match (&args.ic, args.random) {
        (Some(path), _) => read_initial_conditions(path)?,
        (None, None) if !cfg.flow.initial_conditions.is_empty() => {
            cfg.flow.initial_conditions.iter().map(|v| PhaseState::new(v[0], v[1], v[2], v[3])).collect()
        }
        (None, n) => {
            let n = n.unwrap_or(cfg.flow.random);
            match random_initial_conditions(&sys.metric, &sys.domain, n, cfg.seed, cfg.flow.energy) {
                Ok(s) => s,
                Err(e) => return Ok(out.fail_with(e)),
            }
        }
    };
    let control = cfg.tolerances.step_control();
    let integrals = sys.named_integrals();
    let results = parallel_map(&starts, common.workers, |s| integrate(&sys.metric, s, duration, &control));
    let mut entries = vec![];
    let mut max_h: f64 = 0.0;
    let mut max_f: f64 = 0.0;
    let mut failures = 0usize;
    for (k, (s, r)) in starts.iter().zip(results).enumerate() {
        let mut entry = Map::new();
        entry.insert("index".into(), json!(k));
        entry.insert("initial".into(), json!([num(s.x), num(s.y), num(s.px), num(s.py)]));
        match r {
            Ok(mut traj) => {
                let mut fns: Vec<(&str, &dyn PhaseFunction)> =
                    integrals.iter().map(|(n, f)| (n.as_str(), f as &dyn PhaseFunction)).collect();
                if let Some(kf) = &sys.killing {
                    fns.push(("K", kf as &dyn PhaseFunction));
                }
                let mut drifts = Map::new();
                for (name, f) in &fns {
                    traj.record_drift(name, *f);
                    let d = traj.drift(name).unwrap_or(f64::NAN);
                    max_f = max_f.max(d);
                    drifts.insert((*name).into(), num(d));
                }
                max_h = max_h.max(traj.h_drift);
                let e = *traj.last();
                entry.insert("status".into(), json!("ok"));
                entry.insert("final".into(), json!([num(e.x), num(e.y), num(e.px), num(e.py)]));
                if let Some(l) = &sys.lattice {
                    let r = e.reduced(l);
                    entry.insert("final_reduced".into(), json!([num(r.x), num(r.y)]));
                }
                entry.insert("h_drift".into(), num(traj.h_drift));
                entry.insert("integral_drifts".into(), Value::Object(drifts));
                entry.insert("step".into(), num(traj.step));
                entry.insert("error_estimate".into(), num(traj.error_estimate));
                for t in traj.times.iter_mut() {
                    *t += args.t0;
                }
                let mut buf = vec![];
                write_csv(&mut buf, &traj, &sys.metric, &fns, sys.lattice.as_ref()).expect("writing to memory");
                out.files.push((format!("trajectory_{k:03}.csv"), String::from_utf8(buf).expect("ASCII")));
            }
            Err(e) => {
                failures += 1;
                let status = match e {
                    FlowError::StepUnderflow { .. } => "step_underflow",
                    FlowError::NoConvergence { .. } => "no_convergence",
                    _ => "error",
                };
                entry.insert("status".into(), json!(status));
                entry.insert("diagnostic".into(), json!(e.to_string()));
            }
        }
        entries.push(Value::Object(entry));
    }
    out.set("t0", num(args.t0));
    out.set("t_end", num(t_end));
    out.set("trajectories", Value::Array(entries));
    out.set(
        "drift",
        json!({
            "max_h_drift": num(max_h),
            "max_integral_drift": num(max_f),
            "h_tolerance": num(control.tol),
            "integral_tolerance": num(cfg.tolerances.drift),
            "failed_trajectories": failures,
        }),
    );
    out.passed = failures == 0 && max_h <= control.tol && max_f <= cfg.tolerances.drift;
    Ok(out)
}

pub fn equivalent(cfg: &FamilyConfig, common: &Common) -> Result<Outcome, Failure> {
    let mut out = Outcome::new("equivalent", cfg);
    let Some(sys) = build_system(&mut out, cfg)? else { return Ok(out) };
    let r = match riemannianize(&sys, cfg.grid) {
        Ok(r) => r,
        Err(e @ IntegralError::Ordering { x_min, y_max }) => {
            out.set("x_min", num(x_min));
            out.set("y_max", num(y_max));
            let cert = Certificate::above("ordering", x_min - y_max, 0.0).with_detail("X_min - Y_max");
            out.set("pair_certificates", certificates_json(&[cert]));
            return Ok(out.fail_with(e));
        }
        Err(IntegralError::Geometry(GeometryError::InvalidInput(m))) => return Err(Failure::Input(m)),
        Err(e) => return Ok(out.fail_with(e)),
    };
    out.set("x_min", num(r.x_min));
    out.set("y_max", num(r.y_max));
    let mut pair = r.pair;
    let mut certs = r.certificates;
    let check = geodesic_equivalence_check(
        &mut pair,
        &sys.domain,
        cfg.equivalence.geodesics,
        cfg.equivalence.t_end,
        cfg.seed,
        &cfg.tolerances.step_control(),
        common.workers,
    );
    match check {
        Ok(res) => {
            certs.push(Certificate::at_most("equivalence_residual", res, cfg.tolerances.equivalence));
            out.set("equivalence_residual", num(res));
        }
        Err(e) => {
            certs.push(Certificate::at_most("equivalence_residual", f64::INFINITY, cfg.tolerances.equivalence).with_detail(e.to_string()));
            out.passed = false;
        }
    }
    out.passed &= certs.iter().all(|c| c.passed);
    out.set("pair_certificates", certificates_json(&certs));
    Ok(out)
}

pub fn superintegrability(cfg: &FamilyConfig, _common: &Common) -> Result<Outcome, Failure> {
    let mut out = Outcome::new("super", cfg);
    let Some(sys) = build_system(&mut out, cfg)? else { return Ok(out) };
    let candidates = cfg.candidates(&sys).map_err(|e| Failure::Input(e.to_string()))?;
    let grid = sys.grid(cfg.grid);
    let report = match superintegrability_rank_screened(&sys.metric, &candidates, &grid, cfg.tolerances.bracket) {
        Ok(r) => r,
        Err(e) => return Ok(out.fail_with(e)),
    };
    let curvature: Result<Vec<f64>, _> = grid.iter().map(|p| sys.metric.gauss_curvature_at(*p)).collect();
    let curvature = match curvature {
        Ok(c) => c,
        Err(e) => return Ok(out.fail_with(e)),
    };
    let mean = curvature.iter().sum::<f64>() / curvature.len() as f64;
    let max_abs = curvature.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let max_dev = curvature.iter().fold(0.0f64, |m, k| m.max((k - mean).abs()));
    let residuals: Map<String, Value> = report.bracket_residuals.iter().map(|(n, r)| (n.clone(), num(*r))).collect();
    out.set("candidates", json!(candidates.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>()));
    out.set("bracket_residuals", Value::Object(residuals));
    out.set("rejected", json!(report.rejected));
    out.set("rank", json!(report.rank));
    out.set("singular_values", Value::Array(report.singular_values.iter().map(|s| num(*s)).collect()));
    out.set("curvature", json!({ "max_abs": num(max_abs), "max_deviation_from_mean": num(max_dev), "mean": num(mean) }));
    out.passed = report.rejected.is_empty();
    if !out.passed {
        out.set("error", json!(format!("not integrals: {}", report.rejected.join(", "))));
    }
    Ok(out)
}
