use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use sdcam::problems::mimo::{MimoInstance, MimoParams};
use sdcam::problems::mlp::{Activation, MlpInstance, MlpParams, MlpSource};
use sdcam::problems::qcqp::{QcqpInstance, QcqpParams};
use sdcam::problems::{GenerateError, Instance};

/// Problem family with optional overrides of the generator defaults.
#[derive(Debug, Clone, Subcommand)]
pub enum FamilyArgs {
    /// Nonconvex QCQP with an lp penalty on a box.
    Qcqp(QcqpArgs),
    /// PSK symbol detection over a MIMO channel.
    Mimo(MimoArgs),
    /// Sparse lp-loss regression with a small tanh/sigmoid network.
    Mlp(MlpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct QcqpArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub scale0: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MimoArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p_psk: Option<u32>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub r_lo: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Args)]
pub struct MlpArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated layer widths ending in 1, e.g. 20,8,4,1.
    #[arg(long, value_delimiter = ',')]
    pub layer_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// IDX image file; uses synthetic data when absent.
    #[arg(long, requires = "labels")]
    pub images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    pub labels: Option<PathBuf>,
}

impl FamilyArgs {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyArgs::Qcqp(_) => "qcqp",
            FamilyArgs::Mimo(_) => "mimo",
            FamilyArgs::Mlp(_) => "mlp",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            FamilyArgs::Qcqp(a) => a.seed,
            FamilyArgs::Mimo(a) => a.seed,
            FamilyArgs::Mlp(a) => a.seed,
        }
    }

    pub fn generate(&self) -> Result<Instance, GenerateError> {
        Ok(match self {
            FamilyArgs::Qcqp(a) => {
                let d = QcqpParams::default();
                let params = QcqpParams {
                    n: a.n.unwrap_or(d.n),
                    m: a.m.unwrap_or(d.m),
                    alpha: a.alpha.unwrap_or(d.alpha),
                    p: a.p.unwrap_or(d.p),
                    scale0: a.scale0.unwrap_or(d.scale0),
                };
                Instance::Qcqp(QcqpInstance::generate(a.seed, &params)?)
            }
            FamilyArgs::Mimo(a) => {
                let d = MimoParams::default();
                let params = MimoParams {
                    n: a.n.unwrap_or(d.n),
                    m: a.m.unwrap_or(d.m),
                    p_psk: a.p_psk.unwrap_or(d.p_psk),
                    lambda1: a.lambda1.unwrap_or(d.lambda1),
                    lambda2: a.lambda2.unwrap_or(d.lambda2),
                    r_lo: a.r_lo.unwrap_or(d.r_lo),
                };
                Instance::Mimo(MimoInstance::generate(a.seed, &params)?)
            }
            FamilyArgs::Mlp(a) => {
                let d = MlpParams::default();
                let source = match (&a.images, &a.labels) {
                    (Some(images), Some(labels)) => MlpSource::Idx {
                        images: images.clone(),
                        labels: labels.clone(),
                    },
                    _ => MlpSource::Synthetic,
                };
                let params = MlpParams {
                    layer_dims: a.layer_dims.clone().unwrap_or(d.layer_dims),
                    n_samples: a.n_samples.unwrap_or(d.n_samples),
                    p: a.p.unwrap_or(d.p),
                    lambda: a.lambda.unwrap_or(d.lambda),
                    activation: match a.activation {
                        Some(ActivationArg::Tanh) => Activation::Tanh,
                        Some(ActivationArg::Sigmoid) => Activation::Sigmoid,
                        None => d.activation,
                    },
                    source,
                };
                Instance::Mlp(MlpInstance::generate(a.seed, &params)?)
            }
        })
    }
}
