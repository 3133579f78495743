//! Bridge between on-disk [`ModelFile`]s and the library's in-memory
//! [`TrainedModel`] dispatcher, for every classifier kind.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use lobflip::baselines::{FfwdNet, OvrLogistic};
use lobflip::eval::studies::TrainedModel;
use lobflip::features::Standardization;
use lobflip::rnn::{ModelFile, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Rnn,
    Ffwd,
    Logistic,
    White,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rnn => "rnn",
            ModelKind::Ffwd => "ffwd",
            ModelKind::Logistic => "logistic",
            ModelKind::White => "white",
        }
    }
}

/// A model file unpacked for inference.
pub struct LoadedModel {
    pub kind: &'static str,
    pub t_steps: usize,
    pub layout_hash: String,
    pub standardization: Option<Standardization>,
    pub trained: TrainedModel,
    /// Per-step input width; None for the white-noise control.
    pub n_features: Option<usize>,
}

pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let file = ModelFile::load(path)
        .with_context(|| format!("loading model {}", path.display()))?;
    let kind = file.params.kind();
    let t_steps = file.t_steps;
    let layout_hash = file.layout_hash.clone();
    let standardization = file.standardization.clone();
    let (trained, n_features) = match file.params {
        ModelParams::Rnn { .. } => {
            let model = file.into_rnn()?;
            let p = model.dims.p;
            (TrainedModel::Rnn(model), Some(p))
        }
        ModelParams::Ffwd { layers } => {
            if layers.is_empty() {
                bail!("ffwd model {} has no layers", path.display());
            }
            for pair in layers.windows(2) {
                if pair[1].w.cols != pair[0].w.rows {
                    bail!("ffwd model {} has inconsistent layer shapes", path.display());
                }
            }
            let flat = layers[0].w.cols;
            if t_steps == 0 || flat % t_steps != 0 {
                bail!("ffwd input width {flat} is not a multiple of t_steps {t_steps}");
            }
            let net = FfwdNet { n_inputs: flat, t_steps, layers };
            (TrainedModel::Ffwd(net), Some(flat / t_steps))
        }
        ModelParams::Logistic { weights, intercepts, alpha, lambda_en } => {
            let [w0, w1, w2]: [Vec<f64>; 3] = weights
                .try_into()
                .map_err(|_| anyhow::anyhow!("logistic model needs exactly 3 weight vectors"))?;
            if w0.len() != w1.len() || w1.len() != w2.len() {
                bail!("logistic model has ragged weight vectors");
            }
            let intercepts: [f64; 3] = intercepts
                .try_into()
                .map_err(|_| anyhow::anyhow!("logistic model needs exactly 3 intercepts"))?;
            let flat = w0.len();
            if t_steps == 0 || flat % t_steps != 0 {
                bail!("logistic input width {flat} is not a multiple of t_steps {t_steps}");
            }
            let model = OvrLogistic {
                n_inputs: flat,
                t_steps,
                weights: [w0, w1, w2],
                intercepts,
                alpha,
                lambda_en,
            };
            (TrainedModel::Logistic(model), Some(flat / t_steps))
        }
        ModelParams::WhiteNoise { noise_seed } => {
            (TrainedModel::White { seed: noise_seed }, None)
        }
    };
    Ok(LoadedModel { kind, t_steps, layout_hash, standardization, trained, n_features })
}
