use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected_raos}x{expected_preambles}, got {raos}x{preambles}")]
    ShapeMismatch {
        expected_raos: usize,
        expected_preambles: usize,
        raos: usize,
        preambles: usize,
    },

    #[error("duplicate device identity {0}")]
    DuplicateIdentity(u64),

    #[error("infeasible target: p_fa target {target:e} cannot be met with weight {weight} ({reason})")]
    Infeasible {
        weight: usize,
        target: f64,
        reason: &'static str,
    },

    #[error("fixed-point iteration did not converge; visited frame lengths {trace:?}")]
    NonConvergence { trace: Vec<usize> },

    #[error("RAO {got} delivered out of order, expected RAO {expected}")]
    OutOfOrder { expected: usize, got: usize },

    #[error("incomplete observation: {received} of {frame_len} RAOs received")]
    IncompleteObservation { received: usize, frame_len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{} malformed row(s): {}", rows.len(), format_rows(rows))]
    Malformed { rows: Vec<(usize, String)> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the underlying reader or writer.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

fn format_rows(rows: &[(usize, String)]) -> String {
    rows.iter()
        .map(|(line, msg)| format!("line {line}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}
