use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{source_name} line {line}: {message}")]
    Malformed {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name} line {line}: attribute `{attribute}` has unknown label `{label}`")]
    UnknownLabel {
        source_name: String,
        line: u64,
        attribute: String,
        label: String,
    },

    #[error("predictions line {line}: candidate `{label}` is not in the gallery")]
    NotInGallery { line: u64, label: String },

    #[error("predictions line {line}: duplicate candidate `{candidate}` for probe `{probe_id}`")]
    DuplicateCandidate {
        line: u64,
        probe_id: String,
        candidate: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attribute}` has no label `{label}`")]
    UnknownValue { attribute: String, label: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    Numeric(String),

    #[error("rate `{rate}` is undefined for {group} (zero denominator)")]
    AbsentRate { group: String, rate: &'static str },

    #[error("no risk entry for attribute `{0}`")]
    MissingRiskEntry(String),

    #[error("more than one risk entry for attribute `{0}`")]
    DuplicateRiskEntry(String),

    #[error("network: {0}")]
    Network(String),

    #[error("evidence has probability zero: {0}")]
    InconsistentEvidence(String),

    #[error("state space of {cells} cells exceeds the cap of {cap}")]
    StateSpaceTooLarge { cells: u128, cap: u128 },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable class: `input` for unreadable or inconsistent
    /// data, `param` for invalid requests against valid data, `evidence` for
    /// zero-probability evidence, `io` for the filesystem.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Malformed { .. }
            | Error::UnknownLabel { .. }
            | Error::NotInGallery { .. }
            | Error::DuplicateCandidate { .. }
            | Error::Schema(_)
            | Error::InvalidDataset(_) => "input",
            Error::UnknownAttribute(_)
            | Error::UnknownValue { .. }
            | Error::InvalidParameter(_)
            | Error::Numeric(_)
            | Error::AbsentRate { .. }
            | Error::MissingRiskEntry(_)
            | Error::DuplicateRiskEntry(_)
            | Error::Network(_)
            | Error::StateSpaceTooLarge { .. } => "param",
            Error::InconsistentEvidence(_) => "evidence",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
