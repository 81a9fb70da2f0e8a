use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] mfg_torus_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed {what}: {msg}")]
    Parse { what: String, msg: String },
    #[error("verification failed: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}
