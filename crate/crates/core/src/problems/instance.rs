//! Versioned JSON instance files.
//!
//! ```json
//! {"format_version": 1, "family": "qcqp", "seed": 7, "params": {...}, "data": {...}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mimo::MimoInstance;
use super::mlp::MlpInstance;
use super::qcqp::QcqpInstance;
use super::GenerateError;
use crate::oracle::Problem;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Instance {
    Qcqp(QcqpInstance),
    Mimo(MimoInstance),
    Mlp(MlpInstance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub instance: Instance,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {found} (this build reads {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Invalid(#[from] GenerateError),
}

impl Instance {
    pub fn family(&self) -> &'static str {
        match self {
            Instance::Qcqp(_) => "qcqp",
            Instance::Mimo(_) => "mimo",
            Instance::Mlp(_) => "mlp",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Instance::Qcqp(i) => i.seed,
            Instance::Mimo(i) => i.seed,
            Instance::Mlp(i) => i.seed,
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        match self {
            Instance::Qcqp(i) => i.validate(),
            Instance::Mimo(i) => i.validate(),
            Instance::Mlp(i) => i.validate(),
        }
    }

    pub fn problem(&self) -> Problem {
        match self {
            Instance::Qcqp(i) => i.problem(),
            Instance::Mimo(i) => i.problem(),
            Instance::Mlp(i) => i.problem(),
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            Instance::Qcqp(i) => i.x0(),
            Instance::Mimo(i) => i.x0(),
            Instance::Mlp(i) => i.x0(),
        }
    }

    pub fn y0(&self) -> Vec<f64> {
        match self {
            Instance::Qcqp(i) => i.y0(),
            Instance::Mimo(i) => i.y0(),
            Instance::Mlp(i) => i.y0(),
        }
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            format_version: FORMAT_VERSION,
            instance: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("instances serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let head: serde_json::Value = serde_json::from_str(text)?;
        let found = head.get("format_version").and_then(|v| v.as_u64());
        if found != Some(FORMAT_VERSION as u64) {
            return Err(InstanceError::Version {
                found: found.unwrap_or(0) as u32,
            });
        }
        let file: InstanceFile = serde_json::from_str(text)?;
        file.instance.validate()?;
        Ok(file.instance)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
