use sasrate::datagen::DatagenError;
use sasrate::ingest::IngestError;
use sasrate::jsonl::JsonlError;
use sasrate::report::ReportError;
use sasrate::roundtrip::RoundTripError;
use sasrate::sas::SasError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Generate(#[from] DatagenError),
    #[error("{0}")]
    Adapter(String),
    #[error(transparent)]
    Translator(RoundTripError),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    /// 0 success, 2 usage or generation errors, 3 adapter or translator
    /// failures, 4 data errors.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Generate(_) => 2,
            CliError::Adapter(_) | CliError::Translator(_) => 3,
            CliError::Data(_) => 4,
        }
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SasError> for CliError {
    fn from(e: SasError) -> Self {
        CliError::Adapter(e.to_string())
    }
}

impl From<RoundTripError> for CliError {
    fn from(e: RoundTripError) -> Self {
        match e {
            RoundTripError::UnsupportedLanguage(_) => CliError::Usage(e.to_string()),
            RoundTripError::MismatchedReports(_) | RoundTripError::Dataset(_) => CliError::Data(e.to_string()),
            RoundTripError::TranslatorUnavailable(_) | RoundTripError::Cache(_) => CliError::Translator(e),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
