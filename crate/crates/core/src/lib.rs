//! Integrable geodesic flows on pseudo-Riemannian surfaces.
//!
//! Builds the metric + quadratic-integral normal forms (Liouville,
//! complex-Liouville, Jordan-block), global torus families, foliation
//! metrics with a Killing field, and checks integrability, local type,
//! geodesic equivalence and superintegrability numerically.

pub mod certificate;
pub mod config;
pub mod equivalence;
pub mod error;
pub mod families;
pub mod field;
pub mod flow;
pub mod integrals;
pub mod jet;
pub mod lattice;
pub mod metric;

pub use certificate::Certificate;
pub use config::{ConfigError, FamilyConfig};
pub use error::{FamilyError, FlowError, GeometryError, IntegralError};
pub use families::{FoliationAngle, HolomorphicData, TorusSystem, Validation};
pub use flow::{PhaseState, StepControl, Trajectory};
pub use field::{ScalarField2D, TrigPoly, VectorField2D};
pub use integrals::{QuadraticIntegral, TypeLabel};
pub use jet::Jet;
pub use lattice::{Domain, Lattice};
pub use metric::{MetricField, Signature};
