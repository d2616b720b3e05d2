use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// One failed check on a parameter, named by its key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl Violation {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("grid under-resolved: nv = {nv} gives fewer than 4 nodes across the velocity ball")]
    GridUnderResolved { nv: usize },

    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("degenerate collision pair: v and v_star coincide")]
    DegeneratePair,

    #[error("kernel mass {found:.6e} is below c_b = {required:.6e} at relative speed {rel_speed:.4}")]
    KernelMass {
        found: f64,
        required: f64,
        rel_speed: f64,
    },

    #[error("conservative projection: singular moment system at x-node {x}")]
    SingularProjection { x: usize },

    #[error("moment matching failed: {0}")]
    MomentMatch(String),

    #[error("range violation at step {step}: f = {value:e} at x-node {x}, v-node {v} (bound 1/alpha = {upper})")]
    RangeViolation {
        step: usize,
        x: usize,
        v: usize,
        value: f64,
        upper: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("configuration error: {}", join(.0))]
    Config(Vec<Violation>),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
