use thiserror::Error;

/// Every failure the toolkit reports.
///
/// The variant names double as the machine-readable `kind=` tag printed by
/// the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PufError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid netlist: {0}")]
    Netlist(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("degenerate LFSR seed: the all-zero register never leaves zero")]
    DegenerateSeed,
    #[error("population too small: {0}")]
    Population(String),
    #[error("challenge sets are not aligned across devices: {0}")]
    Alignment(String),
    #[error("noise calibration failed: {0}")]
    Calibration(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl PufError {
    pub fn kind(&self) -> &'static str {
        match self {
            PufError::Parameter(_) => "parameter",
            PufError::Netlist(_) => "netlist",
            PufError::Shape(_) => "shape",
            PufError::DegenerateSeed => "degenerate-seed",
            PufError::Population(_) => "population",
            PufError::Alignment(_) => "alignment",
            PufError::Calibration(_) => "calibration",
            PufError::InsufficientData(_) => "insufficient-data",
            PufError::Format { .. } => "format",
            PufError::Io(_) => "io",
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        PufError::Format {
            what,
            detail: detail.into(),
        }
    }
}

impl From<std::io::Error> for PufError {
    fn from(e: std::io::Error) -> Self {
        PufError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PufError>;
