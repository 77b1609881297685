use thiserror::Error;

/// Errors produced by graph construction, solvers and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid subdomain: {0}")]
    InvalidSubdomain(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("obstacle problem is infeasible: {0}")]
    Infeasible(String),

    #[error("component of the domain containing vertex {vertex} has no boundary vertex")]
    UnanchoredComponent { vertex: usize },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("capacity certificate missing: {0}")]
    CertificateMissing(String),

    #[error("no parabolicity witness available: {0}")]
    MissingParabolicityWitness(String),

    #[error("boundary data has no limit at infinity: {0}")]
    NoLimitAtInfinity(String),

    #[error("solver did not converge: {0}")]
    NotConverged(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
