//! Experiment runner behind the `potlib` binary.

pub mod commands;
pub mod config;
pub mod domains;
pub mod output;
pub mod suites;

use std::fmt;

pub use commands::{run, Command};

/// Failure classes with their process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Validation(String),
    NotConverged(String),
    Suite(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 1,
            Failure::NotConverged(_) => 2,
            Failure::Suite(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation",
            Failure::NotConverged(_) => "not-converged",
            Failure::Suite(_) => "property-failure",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::NotConverged(m) | Failure::Suite(m) => m,
        }
    }

    /// One-line JSON diagnostic.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "message": self.message(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl From<potlib::Error> for Failure {
    fn from(e: potlib::Error) -> Self {
        match e {
            potlib::Error::NotConverged(_) => Failure::NotConverged(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}
