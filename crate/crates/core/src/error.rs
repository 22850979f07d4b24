use thiserror::Error;

use crate::linkmodels::ModelError;

/// A configuration value violates its invariant.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("invalid `{field}`: {reason}")]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub(crate) fn ensure(cond: bool, field: &str, reason: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(ConfigError::new(field, reason))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("iteration {iteration}, building {building}, {method} @ {band}: {source}")]
    Model {
        iteration: u32,
        building: u32,
        method: String,
        band: String,
        #[source]
        source: ModelError,
    },
    #[error("{0}")]
    Range(ModelError),
}
