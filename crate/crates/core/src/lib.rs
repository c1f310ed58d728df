//! Finite-difference solver for a truncated parabolic-elliptic chemotaxis
//! system with measurable coefficients and `L^m` sources, together with the
//! norms and exponent bookkeeping used to study its regularity regimes.

pub mod coefficients;
pub mod elliptic;
pub mod grid;
pub mod harness;
pub mod norms;
pub mod regime;
pub mod source;
pub mod stepper;
pub mod truncation;

pub use coefficients::{CoefficientError, CoefficientField, Family};
pub use elliptic::{solve_elliptic, EllipticProblem, SolverError};
pub use grid::{FluxField, GridError, ScalarField, SpaceGrid};
pub use source::{generate_source, Exponent, SourceError, SourceSpec};
pub use stepper::{run, schauder_step, ProblemConfig, Trajectory};
pub use truncation::{g_k, smooth_t_k, t_k, theta_k, TruncationLevel};
