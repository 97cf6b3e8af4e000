use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by mesh construction and loading.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("icosphere level {level} exceeds the maximum supported level {max}")]
    LevelTooLarge { level: u32, max: u32 },
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("OFF parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("surface not closed: edge ({a}, {b}) is used by {count} triangle(s)")]
    NotClosed { a: usize, b: usize, count: usize },
    #[error("inconsistent orientation: directed edge ({a}, {b}) appears twice")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("inverted orientation: enclosed signed volume {volume:e} is not positive")]
    InvertedOrientation { volume: f64 },
    #[error("degenerate triangle {index}: area {area:e}")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("triangle {index} references vertex {vertex} but the mesh has {count} vertices")]
    VertexOutOfRange {
        index: usize,
        vertex: usize,
        count: usize,
    },
}

/// Errors produced by the finite-element layer (assembly, linear and eigen solvers).
#[derive(Debug, Error)]
pub enum FemError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate triangle {index} in stiffness assembly (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("BiCGStab breakdown after {iterations} iterations (relative residual {residual:e})")]
    Breakdown { iterations: usize, residual: f64 },
    #[error("linear solver did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite at pivot {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("eigensolver did not converge: {0}")]
    EigenNotConverged(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Errors produced when validating or converting model parameters.
#[derive(Debug, Error)]
pub enum ParameterError {
    #[error("parameter {name} = {value} must be positive")]
    NotPositive { name: &'static str, value: f64 },
    #[error("parameter {name} = {value} must be nonnegative")]
    Negative { name: &'static str, value: f64 },
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("q is not differentiable at u + v = 1")]
    Kink,
}

/// Errors produced by the steady-state and Turing analysis.
#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("condition {condition} violated: {detail}")]
    ConditionViolated { condition: &'static str, detail: String },
    #[error("no interior steady state found: Phi({lo:.6e}) = {phi_lo:.6e}, Phi({hi:.6e}) = {phi_hi:.6e}")]
    NoSteadyState {
        lo: f64,
        hi: f64,
        phi_lo: f64,
        phi_hi: f64,
    },
    #[error("could not bracket the saturation point u1: {0}")]
    BracketFailure(String),
    #[error("critical d not bracketed on [{lo}, {hi}]: predicate is {value} at both ends")]
    CriticalNotBracketed { lo: f64, hi: f64, value: bool },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Parameter(#[from] ParameterError),
}

/// Errors produced while time stepping.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("linear solve failed at step {step}: {source}")]
    Solve {
        step: u64,
        #[source]
        source: FemError,
    },
    #[error("non-finite value in {field} at vertex {vertex} (step {step}, t = {t})")]
    NonFinite {
        field: &'static str,
        vertex: usize,
        step: u64,
        t: f64,
    },
    #[error("{field} = {value:e} at vertex {vertex} (step {step}, t = {t}) is below the abort threshold")]
    Negative {
        field: &'static str,
        value: f64,
        vertex: usize,
        step: u64,
        t: f64,
    },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Parameter(#[from] ParameterError),
}
