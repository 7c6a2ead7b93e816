use std::path::PathBuf;

use thiserror::Error;

use crate::network::Defect;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}: parse error at line {line}, column {column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {}", join_defects(.0))]
    InvalidNetwork(Vec<Defect>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },

    #[error("assignment is missing variable `{0}`")]
    MissingVariable(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("case {case} has zero likelihood under the current parameters")]
    ZeroLikelihood { case: usize },

    #[error("parameter of `{variable}` (config {config}, state {state}) is {value}, below the floor {floor}")]
    BelowFloor {
        variable: String,
        config: usize,
        state: usize,
        value: f64,
        floor: f64,
    },

    #[error("case {case} does not observe the target `{target}`")]
    MissingTarget { case: usize, target: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures reading or parsing input files, as opposed to domain
    /// errors in otherwise well-formed input.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. })
    }
}

fn join_defects(defects: &[Defect]) -> String {
    defects.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
