use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: PathBuf, source: std::io::Error },

    #[error("malformed JSON in {path} at line {line}, column {column}: {message}")]
    Parse { path: PathBuf, line: usize, column: usize, message: String },

    #[error("invalid configuration ({} problem(s))", .0.len())]
    Config(Vec<FieldError>),

    #[error(transparent)]
    Compute(#[from] uaplab_core::Error),

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config(vec![FieldError { field: field.into(), message: message.into() }])
    }

    /// 2 for anything wrong with the input, 1 for failures while computing
    /// or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ReadConfig { .. } | CliError::Parse { .. } | CliError::Config(_) => 2,
            CliError::Compute(uaplab_core::Error::InvalidParameter { .. }) => 2,
            CliError::Compute(_) | CliError::Write { .. } => 1,
        }
    }

    pub fn to_json(&self, command: Option<&str>) -> Value {
        let kind = match self {
            CliError::ReadConfig { .. } => "read_config",
            CliError::Parse { .. } => "parse",
            CliError::Config(_) => "config",
            CliError::Compute(uaplab_core::Error::InvalidParameter { .. }) => "config",
            CliError::Compute(_) => "computation",
            CliError::Write { .. } => "write",
        };
        let mut v = json!({
            "status": "error",
            "kind": kind,
            "exit_code": self.exit_code(),
            "command": command,
            "message": self.to_string(),
        });
        match self {
            CliError::Config(errors) => v["errors"] = json!(errors),
            CliError::Parse { line, column, .. } => v["location"] = json!({ "line": line, "column": column }),
            CliError::Compute(e) => v["detail"] = json!(format!("{e:?}")),
            _ => {}
        }
        v
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
