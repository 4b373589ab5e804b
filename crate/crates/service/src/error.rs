use fnvd_core::data::DataError;
use fnvd_core::explain::ExplainError;
use fnvd_core::lmt::LmtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no model is active")]
    NoActiveModel,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("action {0} was already evaluated")]
    DuplicateActionId(String),
    #[error("no record with id {0}")]
    UnknownRecord(u64),
    #[error("member {member} already flagged record {record}")]
    DuplicateFlag { record: u64, member: String },
    #[error("bad filter: {0}")]
    BadFilter(String),
    #[error("no model version {0}")]
    UnknownVersion(u64),
    #[error("cannot retrain: {0}")]
    DegenerateExport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("corrupt store: {0}")]
    CorruptStore(String),
    #[error(transparent)]
    Model(LmtError),
    #[error(transparent)]
    Explain(ExplainError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<LmtError> for ServiceError {
    fn from(e: LmtError) -> Self {
        match e {
            LmtError::SchemaMismatch(m) => ServiceError::SchemaMismatch(m),
            other => ServiceError::Model(other),
        }
    }
}

impl From<ExplainError> for ServiceError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Model(m) => m.into(),
            other => ServiceError::Explain(other),
        }
    }
}

impl ServiceError {
    /// Stable machine-readable name, used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NoActiveModel => "NoActiveModel",
            ServiceError::SchemaMismatch(_) => "SchemaMismatch",
            ServiceError::DuplicateActionId(_) => "DuplicateActionId",
            ServiceError::UnknownRecord(_) => "UnknownRecord",
            ServiceError::DuplicateFlag { .. } => "DuplicateFlag",
            ServiceError::BadFilter(_) => "BadFilter",
            ServiceError::UnknownVersion(_) => "UnknownVersion",
            ServiceError::DegenerateExport(_) => "DegenerateExport",
            ServiceError::InvalidRequest(_) => "InvalidRequest",
            ServiceError::Config(_) => "Config",
            ServiceError::CorruptStore(_) => "CorruptStore",
            ServiceError::Model(_) => "Model",
            ServiceError::Explain(_) => "Explain",
            ServiceError::Data(_) => "Data",
            ServiceError::Io(_) => "Io",
        }
    }
}
