use std::fmt;

use distress_core::corpus::CorpusError;
use distress_core::index::IndexError;
use distress_core::models::ModelError;
use distress_core::transfer::TransferError;

/// Pipeline stage an error is attributed to. Each stage owns one exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Usage,
    Config,
    Ingest,
    Features,
    Adapt,
    Train,
    Transfer,
    Index,
    Report,
    Io,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Usage,
        Stage::Config,
        Stage::Ingest,
        Stage::Features,
        Stage::Adapt,
        Stage::Train,
        Stage::Transfer,
        Stage::Index,
        Stage::Report,
        Stage::Io,
    ];

    /// Stable process exit code. 0 is success, 1 is reserved for panics.
    pub fn code(self) -> i32 {
        match self {
            Stage::Usage => 2,
            Stage::Config => 3,
            Stage::Ingest => 4,
            Stage::Features => 5,
            Stage::Adapt => 6,
            Stage::Train => 7,
            Stage::Transfer => 8,
            Stage::Index => 9,
            Stage::Report => 10,
            Stage::Io => 11,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Usage => "usage",
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Adapt => "adapt",
            Stage::Train => "train",
            Stage::Transfer => "transfer",
            Stage::Index => "index",
            Stage::Report => "report",
            Stage::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
}

impl CliError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        CliError {
            stage,
            message: message.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.stage.code()
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::new(Stage::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        let stage = match &e {
            TransferError::Config(_) => Stage::Config,
            TransferError::Corpus(_) => Stage::Ingest,
            TransferError::Text(_) | TransferError::Feature(_) => Stage::Features,
            TransferError::Adapt(_) => Stage::Adapt,
            TransferError::Model(ModelError::Io { .. }) => Stage::Io,
            TransferError::Model(_) => Stage::Train,
            TransferError::Precondition(_) | TransferError::NoCandidates | TransferError::EmptyTarget => Stage::Transfer,
        };
        CliError::new(stage, e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::new(Stage::Ingest, format!("ingest: {e}"))
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        let stage = match e {
            IndexError::Io { .. } => Stage::Io,
            _ => Stage::Index,
        };
        CliError::new(stage, format!("index: {e}"))
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        TransferError::Model(e).into()
    }
}
