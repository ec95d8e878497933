use contour_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    File {
        path: std::path::PathBuf,
        source: CoreError,
    },
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(CoreError::Io(e))
    }
}

impl CliError {
    /// 1 for I/O failures, 2 for contract and shape violations, 3 for
    /// unreadable files or configuration.
    pub fn exit_code(&self) -> i32 {
        let core = match self {
            CliError::Core(e) | CliError::File { source: e, .. } => e,
            CliError::Config { .. } => return 3,
            CliError::Usage(_) => return 2,
        };
        match core {
            CoreError::Format { .. } | CoreError::Parse { .. } => 3,
            CoreError::Shape(_) | CoreError::Contract(_) => 2,
            CoreError::Io(_) => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
