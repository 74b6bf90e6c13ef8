//! Error classes and their process exit codes.

use thiserror::Error;

use sensekit::corpus::CorpusError;
use sensekit::embedstore::StoreError;
use sensekit::eval::EvalError;
use sensekit::inventory::InventoryError;
use sensekit::profiles::ProfileError;
use sensekit::senseindex::IndexError;
use sensekit::senselearn::LearnError;

use crate::config::ConfigError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(
    std::io::Error,
    serde_json::Error,
    CorpusError,
    StoreError,
    EvalError,
    InventoryError,
    IndexError,
    LearnError
);

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        match e {
            ProfileError::NonPositiveTemperature(_) | ProfileError::TooFewLayers { .. } => {
                CliError::Config(ConfigError::Field { field: "profile".into(), reason: e.to_string() })
            }
            other => CliError::Data(other.to_string()),
        }
    }
}
