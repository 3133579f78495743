//! Versioned JSON model files shared by every classifier kind, plus the
//! training-history CSV format.
//!
//! JSON numbers are written with serde_json's shortest round-trip float
//! encoding, so `load(save(m))` reproduces parameters exactly.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Standardization;
use crate::math::Mat;
use crate::rnn::{EpochStats, RnnDims, RnnModel, TrainHistory};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub const HISTORY_CSV_HEADER: &str = "epoch,train_loss,val_loss,f1_down,f1_stat,f1_up,lr";

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("feature layout hash mismatch: model {model}, data {data}")]
    LayoutHashMismatch { model: String, data: String },
    #[error("model dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("expected a {expected} model, found {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error("malformed history line {line}: {message}")]
    MalformedHistory { line: usize, message: String },
}

/// One dense affine layer, reused by the feed-forward baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Mat,
    pub b: Vec<f64>,
}

/// Parameter payload, tagged by classifier kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "snake_case")]
pub enum ModelParams {
    Rnn {
        dims: RnnDims,
        w_h: Mat,
        u_h: Mat,
        b_h: Vec<f64>,
        w_y: Mat,
        b_y: Vec<f64>,
    },
    Ffwd {
        layers: Vec<DenseLayer>,
    },
    Logistic {
        /// One weight vector over the flattened T×P input per class, in
        /// class order (down, stationary, up).
        weights: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
        alpha: f64,
        lambda_en: f64,
    },
    WhiteNoise {
        noise_seed: u64,
    },
}

impl ModelParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelParams::Rnn { .. } => "rnn",
            ModelParams::Ffwd { .. } => "ffwd",
            ModelParams::Logistic { .. } => "logistic",
            ModelParams::WhiteNoise { .. } => "white",
        }
    }
}

/// On-disk model: version, provenance, input standardization, and the
/// parameters themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub seed: u64,
    pub t_steps: usize,
    /// Hash of the feature layout the model was trained on; checked
    /// against dataset manifests before inference.
    pub layout_hash: String,
    pub standardization: Option<Standardization>,
    pub params: ModelParams,
}

impl ModelFile {
    pub fn for_rnn(
        model: &RnnModel,
        seed: u64,
        t_steps: usize,
        layout_hash: String,
        standardization: Option<Standardization>,
    ) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            seed,
            t_steps,
            layout_hash,
            standardization,
            params: ModelParams::Rnn {
                dims: model.dims,
                w_h: model.w_h.clone(),
                u_h: model.u_h.clone(),
                b_h: model.b_h.clone(),
                w_y: model.w_y.clone(),
                b_y: model.b_y.clone(),
            },
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelFile, ModelIoError> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelIoError::VersionMismatch {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(file)
    }

    /// Fail unless the model was trained on data with this layout hash.
    pub fn verify_layout(&self, data_layout_hash: &str) -> Result<(), ModelIoError> {
        if self.layout_hash != data_layout_hash {
            return Err(ModelIoError::LayoutHashMismatch {
                model: self.layout_hash.clone(),
                data: data_layout_hash.to_string(),
            });
        }
        Ok(())
    }

    /// Extract the RNN parameters, validating shapes.
    pub fn into_rnn(self) -> Result<RnnModel, ModelIoError> {
        match self.params {
            ModelParams::Rnn { dims, w_h, u_h, b_h, w_y, b_y } => {
                let shapes_ok = w_h.rows == dims.h
                    && w_h.cols == dims.p
                    && u_h.rows == dims.h
                    && u_h.cols == dims.h
                    && b_h.len() == dims.h
                    && w_y.rows == dims.k
                    && w_y.cols == dims.h
                    && b_y.len() == dims.k
                    && w_h.data.len() == dims.h * dims.p
                    && u_h.data.len() == dims.h * dims.h
                    && w_y.data.len() == dims.k * dims.h;
                if !shapes_ok {
                    return Err(ModelIoError::DimensionMismatch(format!(
                        "inconsistent shapes for dims {dims:?}"
                    )));
                }
                Ok(RnnModel { dims, w_h, u_h, b_h, w_y, b_y })
            }
            other => Err(ModelIoError::WrongKind {
                expected: "rnn",
                found: other.kind().to_string(),
            }),
        }
    }
}

/// Write a training history as CSV. Floats use Rust's shortest
/// round-trippable decimal form, so reruns are byte-identical.
pub fn write_history_csv(path: &Path, history: &TrainHistory) -> Result<(), ModelIoError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{HISTORY_CSV_HEADER}")?;
    for e in &history.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.epoch, e.train_loss, e.val_loss, e.f1[0], e.f1[1], e.f1[2], e.lr
        )?;
    }
    Ok(())
}

pub fn read_history_csv(path: &Path) -> Result<TrainHistory, ModelIoError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut history = TrainHistory::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != HISTORY_CSV_HEADER {
                return Err(ModelIoError::MalformedHistory {
                    line: 1,
                    message: format!("bad header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(ModelIoError::MalformedHistory {
                line: i + 1,
                message: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, line: usize| -> Result<f64, ModelIoError> {
            s.trim().parse::<f64>().map_err(|e| ModelIoError::MalformedHistory {
                line,
                message: e.to_string(),
            })
        };
        history.epochs.push(EpochStats {
            epoch: fields[0].trim().parse().map_err(|_| ModelIoError::MalformedHistory {
                line: i + 1,
                message: "bad epoch".into(),
            })?,
            train_loss: parse(fields[1], i + 1)?,
            val_loss: parse(fields[2], i + 1)?,
            f1: [
                parse(fields[3], i + 1)?,
                parse(fields[4], i + 1)?,
                parse(fields[5], i + 1)?,
            ],
            lr: parse(fields[6], i + 1)?,
        });
    }
    Ok(history)
}
