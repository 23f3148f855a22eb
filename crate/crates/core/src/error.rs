use std::path::PathBuf;

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error(
        "quadrature did not converge after {refinements} refinements \
         (last two estimates {previous} and {last})"
    )]
    Convergence {
        refinements: usize,
        previous: Complex64,
        last: Complex64,
    },

    #[error("impedance between elements {p} and {q}: {source}")]
    Pair {
        p: usize,
        q: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular impedance system{}: reciprocal condition estimate {rcond:e}", row_suffix(.row))]
    SingularModel { row: Option<usize>, rcond: f64 },

    #[error("rank-deficient design matrix: reciprocal condition estimate {rcond:e}")]
    DegenerateDesign { rcond: f64 },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn row_suffix(row: &Option<usize>) -> String {
    match row {
        Some(g) => format!(" at configuration {g}"),
        None => String::new(),
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::Parse { .. } | Error::Validation { .. } => {
                ErrorClass::Config
            }
            Error::DegenerateGeometry(_)
            | Error::InvalidGeometry(_)
            | Error::Convergence { .. }
            | Error::SingularModel { .. }
            | Error::DegenerateDesign { .. } => ErrorClass::Numerical,
            Error::Pair { source, .. } | Error::Context { source, .. } => source.class(),
            Error::Io { .. } | Error::Csv { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
