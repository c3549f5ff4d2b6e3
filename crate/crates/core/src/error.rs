use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no interior equilibrium: {0}")]
    NoInteriorEquilibrium(String),
    #[error("degenerate indifference line: {0}")]
    DegenerateLine(String),
    #[error("absorbed at equilibrium")]
    AbsorbedAtEquilibrium,
    #[error("integration error: {0}")]
    Integration(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("coding undefined on J (mixed labels)")]
    MixedLabels,
    #[error("itinerary is not cyclic")]
    NotCyclic,
    #[error("closure failed: residual {0:e}")]
    Closure(f64),
    #[error("orbit not found: {0}")]
    OrbitNotFound(String),
    #[error("model violation: {0}")]
    ModelViolation(String),
    #[error("solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
