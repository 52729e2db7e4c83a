//! JSON family configuration and built-in presets.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FamilyError, GeometryError};
use crate::families::{
    complex_liouville_system, jordan_block_system, make_flat_torus, make_foliation_metric, make_global_liouville,
    make_klein_liouville, make_linear_integral_torus, FoliationAngle, HolomorphicData, TorusSystem, Validation,
};
use crate::field::{ScalarField2D, TrigPoly};
use crate::flow::{Scheme, StepControl};
use crate::integrals::QuadraticIntegral;
use crate::lattice::{Domain, Lattice};

/// One-variable function `const + sum amp cos(2 pi k t / period) + ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    #[serde(rename = "const", default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<(u32, f64)>,
    #[serde(default)]
    pub sin: Vec<(u32, f64)>,
    #[serde(default = "one")]
    pub period: f64,
}

fn one() -> f64 {
    1.0
}

impl FunctionSpec {
    pub fn to_trig(&self) -> Result<TrigPoly, GeometryError> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(GeometryError::InvalidInput(format!("period must be positive, got {}", self.period)));
        }
        let fill = |terms: &[(u32, f64)]| -> Result<Vec<f64>, GeometryError> {
            let n = terms.iter().map(|t| t.0).max().unwrap_or(0) as usize;
            let mut out = vec![0.0; n];
            for &(k, amp) in terms {
                if k == 0 {
                    return Err(GeometryError::InvalidInput("harmonic index must be >= 1".into()));
                }
                out[k as usize - 1] += amp;
            }
            Ok(out)
        };
        Ok(TrigPoly::new(self.constant, fill(&self.cos)?, fill(&self.sin)?, self.period))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    GlobalLiouville,
    KleinLiouville,
    Foliation,
    FlatTorus,
    LinearIntegralTorus,
    JordanBlock,
    ComplexLiouville,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub bracket: f64,
    pub drift: f64,
    pub step: f64,
    pub step_tol: f64,
    pub min_step: f64,
    pub equivalence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { bracket: 1e-8, drift: 1e-6, step: 1e-3, step_tol: 1e-8, min_step: 1e-6, equivalence: 1e-4 }
    }
}

impl Tolerances {
    pub fn step_control(&self) -> StepControl {
        StepControl { h: self.step, tol: self.step_tol, h_min: self.min_step, scheme: Scheme::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub t_end: f64,
    /// Number of random initial conditions when none are listed.
    pub random: usize,
    /// `[x, y, px, py]` rows.
    pub initial_conditions: Vec<[f64; 4]>,
    /// `|H|` of random initial conditions.
    pub energy: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { t_end: 10.0, random: 10, initial_conditions: vec![], energy: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquivalenceSettings {
    pub geodesics: usize,
    pub t_end: f64,
}

impl Default for EquivalenceSettings {
    fn default() -> Self {
        Self { geodesics: 10, t_end: 5.0 }
    }
}

/// Candidate integral for the rank computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub name: String,
    /// `H`, `F` or the name of an extra integral of the family.
    pub source: String,
    #[serde(default = "one")]
    pub scale: f64,
    /// Function of `x` added to the `b` coefficient.
    #[serde(default)]
    pub perturb_b: Option<FunctionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: FamilyKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub lattice: Option<Lattice>,
    #[serde(default = "minus_one")]
    pub epsilon: f64,
    #[serde(default)]
    pub validation: Validation,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub angle: Option<FoliationAngle>,
    /// Coefficients `[re, im]` of `h(z)` in increasing degree.
    #[serde(default)]
    pub h: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub domain: Option<Domain>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default)]
    pub equivalence: EquivalenceSettings,
    #[serde(default)]
    pub candidates: Vec<CandidateSpec>,
}

fn minus_one() -> f64 {
    -1.0
}
fn default_grid() -> usize {
    64
}
fn default_seed() -> u64 {
    42
}

/// JSON parse failure with its position.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at line {line}, column {column}")]
pub struct ConfigError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl FamilyConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            let full = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            let message = full.strip_suffix(&suffix).unwrap_or(&full).to_string();
            ConfigError { message, line: e.line(), column: e.column() }
        })
    }

    pub fn preset(name: &str) -> Option<Self> {
        preset_json(name).map(|t| Self::from_json(t).expect("built-in preset parses"))
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            serde_json::to_value(self.family).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        })
    }

    fn function(&self, key: &str) -> Result<TrigPoly, FamilyError> {
        let spec = self
            .functions
            .get(key)
            .ok_or_else(|| GeometryError::InvalidInput(format!("missing function `{key}`")))?;
        Ok(spec.to_trig()?)
    }

    fn require<T: Clone>(&self, v: &Option<T>, key: &str) -> Result<T, FamilyError> {
        v.clone().ok_or_else(|| GeometryError::InvalidInput(format!("missing parameter `{key}`")).into())
    }

    pub fn build(&self) -> Result<TorusSystem, FamilyError> {
        let mut sys = match self.family {
            FamilyKind::GlobalLiouville => {
                let lattice = self.lattice.unwrap_or_else(Lattice::unit_square);
                Lattice::new(lattice.xi, lattice.nu)?;
                make_global_liouville(&self.function("X")?, &self.function("Y")?, lattice, self.epsilon, self.validation)?
            }
            FamilyKind::KleinLiouville => make_klein_liouville(
                &self.function("X")?,
                &self.function("Y")?,
                self.require(&self.c, "c")?,
                self.require(&self.d, "d")?,
                self.epsilon,
            )?,
            FamilyKind::Foliation => make_foliation_metric(&self.label(), &self.require(&self.angle, "angle")?)?,
            FamilyKind::FlatTorus => {
                let l = self.require(&self.lattice, "lattice")?;
                make_flat_torus(Lattice::new(l.xi, l.nu)?)?
            }
            FamilyKind::LinearIntegralTorus => {
                make_linear_integral_torus(&self.function("K")?, &self.function("L")?, &self.function("M")?)?
            }
            FamilyKind::JordanBlock => jordan_block_system(
                &self.function("Y")?,
                &self.function("Yhat")?,
                self.epsilon,
                self.require(&self.domain, "domain")?,
            )?,
            FamilyKind::ComplexLiouville => {
                let coeffs = self.require(&self.h, "h")?;
                let h = HolomorphicData { complex_coeffs: coeffs.iter().map(|c| Complex64::new(c[0], c[1])).collect() };
                complex_liouville_system(&h, self.require(&self.domain, "domain")?)?
            }
        };
        if self.name.is_some() {
            sys.family_tag = self.label();
        }
        Ok(sys)
    }

    /// Named candidate integrals; defaults to `H` and every known integral.
    pub fn candidates(&self, sys: &TorusSystem) -> Result<Vec<(String, QuadraticIntegral)>, GeometryError> {
        let known = sys.named_integrals();
        if self.candidates.is_empty() {
            let mut out = vec![("H".to_string(), sys.hamiltonian())];
            out.extend(known);
            return Ok(out);
        }
        self.candidates
            .iter()
            .map(|c| {
                let base = if c.source == "H" {
                    sys.hamiltonian()
                } else {
                    known
                        .iter()
                        .find(|(n, _)| *n == c.source)
                        .map(|(_, f)| f.clone())
                        .ok_or_else(|| GeometryError::InvalidInput(format!("unknown candidate source `{}`", c.source)))?
                };
                let mut f = base.scaled(c.scale);
                if let Some(p) = &c.perturb_b {
                    let extra = QuadraticIntegral::new(
                        ScalarField2D::constant(0.0),
                        ScalarField2D::from_x(p.to_trig()?),
                        ScalarField2D::constant(0.0),
                    );
                    f = f.combine(1.0, &extra, 1.0);
                }
                Ok((c.name.clone(), f))
            })
            .collect()
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "global_liouville",
    "klein_liouville",
    "jordan_foliation",
    "mixed_foliation",
    "reeb_foliation",
    "liouville_foliation",
    "flat_torus",
    "linear_integral_torus",
    "jordan_block",
    "complex_liouville",
];

pub fn preset_json(name: &str) -> Option<&'static str> {
    Some(match name {
        "global_liouville" => include_str!("../presets/global_liouville.json"),
        "klein_liouville" => include_str!("../presets/klein_liouville.json"),
        "jordan_foliation" => include_str!("../presets/jordan_foliation.json"),
        "mixed_foliation" => include_str!("../presets/mixed_foliation.json"),
        "reeb_foliation" => include_str!("../presets/reeb_foliation.json"),
        "liouville_foliation" => include_str!("../presets/liouville_foliation.json"),
        "flat_torus" => include_str!("../presets/flat_torus.json"),
        "linear_integral_torus" => include_str!("../presets/linear_integral_torus.json"),
        "jordan_block" => include_str!("../presets/jordan_block.json"),
        "complex_liouville" => include_str!("../presets/complex_liouville.json"),
        _ => return None,
    })
}
