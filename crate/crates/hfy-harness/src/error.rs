//! Harness errors, split by exit code: configuration problems exit with 2,
//! data problems with 3.

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        HarnessError::Data(msg.into())
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
        }
    }
}

impl From<hfy_core::Error> for HarnessError {
    fn from(e: hfy_core::Error) -> Self {
        // Core domain/dimension/capacity failures trace back to parameter
        // choices, which is a configuration problem at the CLI level.
        HarnessError::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
