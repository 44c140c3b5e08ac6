use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand extents do not fit together.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A caller broke an API precondition (non-scalar backward, missing gradient, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Zero-norm vector handed to a cosine.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    /// Episodes reference sentence ids absent from the embedding store.
    #[error("integrity error: {} unresolved sentence id(s): {}", .missing.len(), preview(.missing))]
    Integrity { missing: Vec<String> },

    #[error("data error: {0}")]
    Data(String),

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}: answer={answer} kl={kl:?} recon={recon:?}")]
    Numeric { epoch: usize, batch: usize, answer: f64, kl: Option<f64>, recon: Option<f64> },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 8;
    let mut s = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension { op, detail: detail.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), detail: detail.into() }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) => 2,
            Error::Integrity { .. } | Error::Data(_) | Error::Format { .. } | Error::Io { .. } => 3,
            Error::Numeric { .. } | Error::Degenerate(_) | Error::Dimension { .. } => 4,
        }
    }
}
