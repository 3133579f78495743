//! Elman recurrent network: forward pass, loss, BPTT, SGD training loop,
//! input dropout, Glorot initialization.
//!
//! The hidden state follows h_t = ReLU(W_h·x_t + U_h·h_{t−1} + b_h) with
//! h_0 = 0; class probabilities come from a softmax over W_y·h_T + b_y.

mod serialize;
mod train;

pub use serialize::{
    read_history_csv, write_history_csv, DenseLayer, ModelFile, ModelIoError, ModelParams,
    HISTORY_CSV_HEADER, MODEL_FORMAT_VERSION,
};
pub use train::{bptt, mean_loss, train, Grads, TrainConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Label;
use crate::math::{relu, softmax_inplace, Mat};

/// Log-clamp for cross-entropy on saturated softmax outputs.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnDims {
    /// Input features per time step.
    pub p: usize,
    /// Hidden units.
    pub h: usize,
    /// Output classes.
    pub k: usize,
}

impl Default for RnnDims {
    fn default() -> Self {
        RnnDims { p: 32, h: 20, k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnModel {
    pub dims: RnnDims,
    /// H×P input weights.
    pub w_h: Mat,
    /// H×H recurrent weights.
    pub u_h: Mat,
    pub b_h: Vec<f64>,
    /// K×H output weights.
    pub w_y: Mat,
    pub b_y: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum RnnError {
    #[error("non-finite input to forward pass")]
    NonFiniteInput,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    DivergedLoss { epoch: usize, history: Box<TrainHistory> },
}

/// One epoch of training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Validation F1 in class order (down, stationary, up).
    pub f1: [f64; 3],
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Inputs after dropout scaling (equals the raw input when no mask).
    pub x_used: Mat,
    /// T×H hidden states.
    pub h: Mat,
    /// Softmax class probabilities.
    pub probs: Vec<f64>,
}

impl RnnModel {
    /// Glorot/uniform initialization: each weight matrix with fan-in n and
    /// fan-out m is drawn uniform on ±√(6/(n+m)); biases start at zero.
    /// Matrices are filled row-major in the order W_h, U_h, W_y.
    pub fn glorot_init(dims: RnnDims, seed: u64) -> RnnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_h = glorot_mat(dims.h, dims.p, &mut rng);
        let u_h = glorot_mat(dims.h, dims.h, &mut rng);
        let w_y = glorot_mat(dims.k, dims.h, &mut rng);
        RnnModel {
            dims,
            w_h,
            u_h,
            b_h: vec![0.0; dims.h],
            w_y,
            b_y: vec![0.0; dims.k],
        }
    }

    pub fn zeros(dims: RnnDims) -> RnnModel {
        RnnModel {
            dims,
            w_h: Mat::zeros(dims.h, dims.p),
            u_h: Mat::zeros(dims.h, dims.h),
            b_h: vec![0.0; dims.h],
            w_y: Mat::zeros(dims.k, dims.h),
            b_y: vec![0.0; dims.k],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w_h.is_finite()
            && self.u_h.is_finite()
            && self.w_y.is_finite()
            && self.b_h.iter().all(|v| v.is_finite())
            && self.b_y.iter().all(|v| v.is_finite())
    }

    /// Sum of squared weight-matrix entries (biases excluded), halved —
    /// the φ in the λ·φ penalty.
    pub fn penalty(&self) -> f64 {
        0.5 * (self.w_h.norm_sq() + self.u_h.norm_sq() + self.w_y.norm_sq())
    }
}

fn glorot_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    // fan_in = cols (inputs), fan_out = rows (outputs).
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for v in &mut m.data {
        *v = rng.random_range(-limit..limit);
    }
    m
}

/// Run the unrolled network over a T×P input. `dropout` supplies an
/// inverted-dropout mask (T×P of {0,1}) and the keep probability θ; inputs
/// are masked and divided by θ so inference needs no rescaling. Dropout is
/// never applied to the recurrent connections.
pub fn forward(
    model: &RnnModel,
    x: &Mat,
    dropout: Option<(&Mat, f64)>,
) -> Result<Forward, RnnError> {
    let (p, h_dim, k) = (model.dims.p, model.dims.h, model.dims.k);
    if x.cols != p {
        return Err(RnnError::DimensionMismatch(format!(
            "input has {} columns, model expects {p}",
            x.cols
        )));
    }
    if !x.is_finite() {
        return Err(RnnError::NonFiniteInput);
    }
    let t_steps = x.rows;
    let mut x_used = x.clone();
    if let Some((mask, keep)) = dropout {
        debug_assert_eq!(mask.rows, x.rows);
        debug_assert_eq!(mask.cols, x.cols);
        for (v, m) in x_used.data.iter_mut().zip(mask.data.iter()) {
            *v = *v * m / keep;
        }
    }
    let mut h = Mat::zeros(t_steps, h_dim);
    let mut h_prev = vec![0.0; h_dim];
    for t in 0..t_steps {
        let mut z = model.b_h.clone();
        model.w_h.matvec_add(x_used.row(t), &mut z);
        model.u_h.matvec_add(&h_prev, &mut z);
        for (out, zv) in h.data[t * h_dim..(t + 1) * h_dim].iter_mut().zip(z.iter()) {
            *out = relu(*zv);
        }
        h_prev.copy_from_slice(&h.data[t * h_dim..(t + 1) * h_dim]);
    }
    let mut logits = model.b_y.clone();
    model.w_y.matvec_add(&h_prev, &mut logits);
    softmax_inplace(&mut logits);
    debug_assert_eq!(logits.len(), k);
    Ok(Forward { x_used, h, probs: logits })
}

/// Cross-entropy against a one-hot target plus the L2 weight penalty:
/// −Σ_k y_k·log(max(p_k, ε)) + λ·φ(W).
pub fn loss(probs: &[f64], y_one_hot: &[f64], model: &RnnModel, lambda: f64) -> f64 {
    let mut ce = 0.0;
    for (p, y) in probs.iter().zip(y_one_hot.iter()) {
        if *y != 0.0 {
            ce -= y * p.max(CE_EPSILON).ln();
        }
    }
    ce + lambda * model.penalty()
}

/// Class probabilities for one sequence (no dropout).
pub fn predict_proba(model: &RnnModel, x: &Mat) -> Result<Vec<f64>, RnnError> {
    Ok(forward(model, x, None)?.probs)
}

/// Hard prediction. Default is argmax with ties broken toward Stationary
/// then by lower class index. With per-class thresholds (one-vs-rest mode),
/// class k is positive iff prob_k ≥ threshold_k; among multiple positives
/// the highest probability wins under the same tie rule; no positive maps
/// to Stationary.
pub fn predict(model: &RnnModel, x: &Mat, thresholds: Option<&[f64]>) -> Result<Label, RnnError> {
    let probs = predict_proba(model, x)?;
    Ok(decide(&probs, thresholds))
}

/// Decision rule shared by every probabilistic classifier in the crate.
pub fn decide(probs: &[f64], thresholds: Option<&[f64]>) -> Label {
    debug_assert_eq!(probs.len(), 3);
    let candidates: Vec<usize> = match thresholds {
        None => (0..3).collect(),
        Some(th) => (0..3).filter(|&k| probs[k] >= th[k]).collect(),
    };
    if candidates.is_empty() {
        return Label::Stationary;
    }
    let best = candidates
        .iter()
        .map(|&k| probs[k])
        .fold(f64::NEG_INFINITY, f64::max);
    if candidates.contains(&Label::Stationary.index()) && probs[Label::Stationary.index()] == best {
        return Label::Stationary;
    }
    for &k in &candidates {
        if probs[k] == best {
            return Label::from_index(k).expect("index in range");
        }
    }
    Label::Stationary
}
