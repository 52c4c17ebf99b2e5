//! Problem families with seeded generators and analytic constant bounds.

pub mod idx;
pub mod instance;
pub mod mimo;
pub mod mlp;
pub mod qcqp;
pub mod rng;

use thiserror::Error;

pub use instance::{Instance, InstanceFile, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate instance after {attempts} attempts: {reason}")]
    Degenerate { attempts: u32, reason: &'static str },
    #[error(transparent)]
    Idx(#[from] idx::IdxError),
}
