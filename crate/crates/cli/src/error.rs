use std::path::PathBuf;

use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] impctl_core::Error),

    #[error("cannot access `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown sweep output `{0}`")]
    UnknownOutput(String),
}

/// Exit status for a run whose checks did not all pass.
pub const EXIT_CHECK_FAILED: i32 = 1;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use impctl_core::Error as E;
        match self {
            CliError::Core(E::Parse { .. }) => 2,
            CliError::Core(E::Validation { .. }) | CliError::UnknownOutput(_) => 3,
            CliError::Core(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    fn kind(&self) -> &'static str {
        use impctl_core::Error as E;
        match self {
            CliError::Core(e) => match e {
                E::Parse { .. } => "parse",
                E::Validation { .. } => "validation",
                E::Solver(_) => "solver",
                E::ZeroState => "zero_state",
                E::Fit(_) => "fit",
                E::Constants { .. } => "constants",
                E::InsufficientData { .. } => "insufficient_data",
                E::Capacity { .. } => "capacity",
                _ => "domain",
            },
            CliError::Io { .. } => "io",
            CliError::UnknownOutput(_) => "validation",
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> Value {
        let mut obj = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Core(impctl_core::Error::Parse { line, column, .. }) => {
                obj["line"] = json!(line);
                obj["column"] = json!(column);
            }
            CliError::Core(impctl_core::Error::Validation { field, .. }) => {
                obj["field"] = json!(field);
            }
            CliError::UnknownOutput(name) => {
                obj["field"] = json!("sweep.outputs");
                obj["value"] = json!(name);
            }
            _ => {}
        }
        json!({ "error": obj })
    }
}

pub type CliResult<T> = Result<T, CliError>;
