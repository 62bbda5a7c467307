use std::path::PathBuf;

use polysketch::SketchError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Sketch(#[from] SketchError),

    #[error("failed to write output: {0}")]
    Output(String),
}

impl CliError {
    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for bad input or configuration, 2 when the computation itself failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Parse { .. } | CliError::Io { .. } => 1,
            CliError::Sketch(e) => sketch_exit_code(e),
            CliError::Output(_) => 2,
        }
    }
}

pub fn sketch_exit_code(e: &SketchError) -> i32 {
    match e {
        SketchError::InvalidDimension(_)
        | SketchError::InvalidParameter(_)
        | SketchError::Domain(_)
        | SketchError::GuardExceeded(_) => 1,
        SketchError::UndefinedValue(_)
        | SketchError::NonConvergence { .. }
        | SketchError::PreconditionerFailure(_) => 2,
    }
}

/// Stable snake_case name of an error variant, as written into reports.
pub fn sketch_error_kind(e: &SketchError) -> &'static str {
    match e {
        SketchError::InvalidDimension(_) => "invalid_dimension",
        SketchError::InvalidParameter(_) => "invalid_parameter",
        SketchError::Domain(_) => "domain",
        SketchError::GuardExceeded(_) => "guard_exceeded",
        SketchError::UndefinedValue(_) => "undefined_value",
        SketchError::NonConvergence { .. } => "non_convergence",
        SketchError::PreconditionerFailure(_) => "preconditioner_failure",
    }
}
