//! Pipeline runner library: configuration, artifact manifest, and stages.
//!
//! Exit codes: 1 usage, 2 config, 3 io, 4 remote service, 5 data.

pub mod config;
pub mod manifest;
pub mod stages;

use causegraph::corpus::CorpusError;
use causegraph::encode::EncodeError;
use causegraph::evalkit::EvalError;
use causegraph::extraction::ExtractionError;
use causegraph::generate::GenerateError;
use causegraph::kgstore::GraphError;
use causegraph::llm::RemoteError;
use causegraph::n2v::N2vError;
use causegraph::retrieve::RetrieveError;

pub use config::{load_config, PipelineConfig};
pub use stages::{run_stage, QueryMode, Stage, StageArgs};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("remote service: {0}")]
    Remote(String),
    #[error("data: {0}")]
    Data(String),
    #[error("stage {0:?} has not produced its artifacts yet; run it first")]
    MissingPrerequisite(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Remote(_) => 4,
            CliError::Data(_) | CliError::MissingPrerequisite(_) => 5,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(err: CorpusError) -> Self {
        match err {
            CorpusError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ExtractionError> for CliError {
    fn from(err: ExtractionError) -> Self {
        match err {
            ExtractionError::Remote(e) => CliError::Remote(e.to_string()),
            ExtractionError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(err: GraphError) -> Self {
        match err {
            GraphError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<N2vError> for CliError {
    fn from(err: N2vError) -> Self {
        match err {
            N2vError::Io(e) => CliError::Io(e.to_string()),
            N2vError::InvalidConfig(msg) => CliError::Config(msg.to_owned()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EncodeError> for CliError {
    fn from(err: EncodeError) -> Self {
        match err {
            EncodeError::Remote(e) => CliError::Remote(e.to_string()),
            EncodeError::Io(e) => CliError::Io(e.to_string()),
            EncodeError::DimensionTooSmall(_) => CliError::Config(err.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RetrieveError> for CliError {
    fn from(err: RetrieveError) -> Self {
        match err {
            RetrieveError::Encode(e) => e.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(err: GenerateError) -> Self {
        match err {
            GenerateError::Remote(e) => CliError::Remote(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(err: EvalError) -> Self {
        match err {
            EvalError::Io(e) => CliError::Io(e.to_string()),
            EvalError::Encode(EncodeError::Remote(e)) => CliError::Remote(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RemoteError> for CliError {
    fn from(err: RemoteError) -> Self {
        CliError::Remote(err.to_string())
    }
}
