use std::fmt;

use serde::Serialize;

use cdsbench_core::analysis::AnalysisError;
use cdsbench_core::analyzers::AnalyzerError;
use cdsbench_core::backends::BackendError;
use cdsbench_core::corpus::CorpusError;
use cdsbench_core::lexicon::LexiconError;
use cdsbench_core::protocols::ProtocolError;

/// Stable error codes. The process exit status is the code's number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Usage,
    ConfigInvalid,
    CorpusNotFound,
    CorpusInvalid,
    InsufficientData,
    LexiconInvalid,
    ProviderInvalid,
    BackendInvalid,
    RunFailed,
    RunMissing,
    AnalysisFailed,
    IoError,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 12] = [
        ErrorCode::Usage,
        ErrorCode::ConfigInvalid,
        ErrorCode::CorpusNotFound,
        ErrorCode::CorpusInvalid,
        ErrorCode::InsufficientData,
        ErrorCode::LexiconInvalid,
        ErrorCode::ProviderInvalid,
        ErrorCode::BackendInvalid,
        ErrorCode::RunFailed,
        ErrorCode::RunMissing,
        ErrorCode::AnalysisFailed,
        ErrorCode::IoError,
    ];

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCode::Usage => 2,
            ErrorCode::ConfigInvalid => 3,
            ErrorCode::CorpusNotFound => 4,
            ErrorCode::CorpusInvalid => 5,
            ErrorCode::InsufficientData => 6,
            ErrorCode::LexiconInvalid => 7,
            ErrorCode::ProviderInvalid => 8,
            ErrorCode::BackendInvalid => 9,
            ErrorCode::RunFailed => 10,
            ErrorCode::RunMissing => 11,
            ErrorCode::AnalysisFailed => 12,
            ErrorCode::IoError => 13,
        }
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.code,
                "exit_code": self.code.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.name(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        let code = match &e {
            CorpusError::NotFound(_) | CorpusError::Io { .. } => ErrorCode::CorpusNotFound,
            CorpusError::InsufficientData { .. } => ErrorCode::InsufficientData,
            _ => ErrorCode::CorpusInvalid,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<LexiconError> for CliError {
    fn from(e: LexiconError) -> Self {
        CliError::new(ErrorCode::LexiconInvalid, e.to_string())
    }
}

impl From<AnalyzerError> for CliError {
    fn from(e: AnalyzerError) -> Self {
        CliError::new(ErrorCode::ProviderInvalid, e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::new(ErrorCode::BackendInvalid, e.to_string())
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Backend(b) => b.into(),
            ProtocolError::Corpus(c) => c.into(),
            other => CliError::new(ErrorCode::RunFailed, other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::new(ErrorCode::AnalysisFailed, e.to_string())
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::new(ErrorCode::IoError, format!("{}: {e}", path.display()))
}
