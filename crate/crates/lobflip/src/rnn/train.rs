//! BPTT gradients and the SGD training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SequenceSample;
use crate::eval::confusion;
use crate::math::Mat;
use crate::rnn::{forward, loss, EpochStats, RnnDims, RnnError, RnnModel, TrainHistory};

/// Training hyper-parameters. Defaults follow the reference architecture:
/// T=10 lags, H=20 hidden, 1000 epochs of mini-batch 500 SGD with an
/// exponentially decaying learning rate lr_e = lr0·κ^e, L2 λ=0.01, and
/// dropout disabled (keep probability θ=1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub t_steps: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub l2: f64,
    /// Keep probability θ ∈ (0,1]; masks are Ber(θ) per input coordinate,
    /// applied to feed-forward connections only.
    pub dropout_keep: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t_steps: 10,
            hidden: 20,
            epochs: 1000,
            batch_size: 500,
            lr0: 1e-2,
            lr_decay: 0.995,
            l2: 0.01,
            dropout_keep: 1.0,
            seed: 0,
        }
    }
}

/// Gradient set with the same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct Grads {
    pub w_h: Mat,
    pub u_h: Mat,
    pub b_h: Vec<f64>,
    pub w_y: Mat,
    pub b_y: Vec<f64>,
}

impl Grads {
    fn zeros(dims: RnnDims) -> Grads {
        Grads {
            w_h: Mat::zeros(dims.h, dims.p),
            u_h: Mat::zeros(dims.h, dims.h),
            b_h: vec![0.0; dims.h],
            w_y: Mat::zeros(dims.k, dims.h),
            b_y: vec![0.0; dims.k],
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mats = self.w_h.data.iter().chain(&self.u_h.data).chain(&self.w_y.data);
        mats.chain(&self.b_h)
            .chain(&self.b_y)
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Backpropagation through time over a mini-batch: the gradient of the mean
/// batch loss (cross-entropy plus λ·φ). Accumulation order is fixed —
/// samples by index, time steps descending — so results are bit-stable.
/// ReLU's subgradient at exactly 0 is taken as 0. `masks`, when present,
/// holds one T×P inverted-dropout mask per sample with keep probability
/// `dropout_keep`.
pub fn bptt(
    model: &RnnModel,
    batch: &[&SequenceSample],
    masks: Option<(&[Mat], f64)>,
    lambda: f64,
) -> Result<(Grads, f64), RnnError> {
    assert!(!batch.is_empty(), "bptt requires a non-empty batch");
    let dims = model.dims;
    let mut grads = Grads::zeros(dims);
    let mut mean_loss = 0.0;
    let inv_n = 1.0 / batch.len() as f64;
    for (i, sample) in batch.iter().enumerate() {
        let dropout = masks.map(|(ms, keep)| (&ms[i], keep));
        let fwd = forward(model, &sample.x, dropout)?;
        let y = sample.y.one_hot();
        mean_loss += inv_n * loss(&fwd.probs, &y, model, 0.0);

        let t_steps = sample.x.rows;
        let h_dim = dims.h;
        // Output layer: dL/dlogits = probs − y for softmax + cross-entropy.
        let mut dlogits = vec![0.0; dims.k];
        for k in 0..dims.k {
            dlogits[k] = (fwd.probs[k] - y[k]) * inv_n;
        }
        let h_last = fwd.h.row(t_steps - 1);
        grads.w_y.add_outer(1.0, &dlogits, h_last);
        for (g, d) in grads.b_y.iter_mut().zip(dlogits.iter()) {
            *g += d;
        }

        // dL/dh_T, then walk time steps backward.
        let mut dh = vec![0.0; h_dim];
        model.w_y.matvec_t_add(&dlogits, &mut dh);
        for t in (0..t_steps).rev() {
            let h_t = fwd.h.row(t);
            let mut dz = vec![0.0; h_dim];
            for j in 0..h_dim {
                // h_t[j] > 0 iff the pre-activation was > 0; at 0 the
                // subgradient is defined as 0.
                dz[j] = if h_t[j] > 0.0 { dh[j] } else { 0.0 };
            }
            for (g, d) in grads.b_h.iter_mut().zip(dz.iter()) {
                *g += d;
            }
            grads.w_h.add_outer(1.0, &dz, fwd.x_used.row(t));
            if t > 0 {
                grads.u_h.add_outer(1.0, &dz, fwd.h.row(t - 1));
            }
            dh = vec![0.0; h_dim];
            model.u_h.matvec_t_add(&dz, &mut dh);
        }
    }
    // L2 penalty: λ·W added once (the penalty is not averaged per sample).
    grads.w_h.add_scaled(lambda, &model.w_h);
    grads.u_h.add_scaled(lambda, &model.u_h);
    grads.w_y.add_scaled(lambda, &model.w_y);
    mean_loss += lambda * model.penalty();
    Ok((grads, mean_loss))
}

/// Mean loss of a dataset under the current model, dropout off.
pub fn mean_loss(model: &RnnModel, samples: &[SequenceSample], lambda: f64) -> Result<f64, RnnError> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for s in samples {
        let fwd = forward(model, &s.x, None)?;
        total += loss(&fwd.probs, &s.y.one_hot(), model, 0.0);
    }
    Ok(total / samples.len() as f64 + lambda * model.penalty())
}

/// Mini-batch SGD with per-epoch seeded shuffling, exponentially decaying
/// learning rate, optional inverted input dropout, and best-validation-loss
/// model selection. Fully deterministic under `config.seed`.
pub fn train(
    train_set: &[SequenceSample],
    val_set: &[SequenceSample],
    config: &TrainConfig,
) -> Result<(RnnModel, TrainHistory), RnnError> {
    if train_set.is_empty() {
        return Err(RnnError::DimensionMismatch("empty training set".into()));
    }
    let p = train_set[0].x.cols;
    let t_steps = train_set[0].x.rows;
    if t_steps != config.t_steps {
        return Err(RnnError::DimensionMismatch(format!(
            "samples have {t_steps} time steps, config expects {}",
            config.t_steps
        )));
    }
    for s in train_set.iter().chain(val_set) {
        if s.x.cols != p || s.x.rows != t_steps {
            return Err(RnnError::DimensionMismatch("ragged sample shapes".into()));
        }
    }
    let dims = RnnDims { p, h: config.hidden, k: 3 };
    let mut model = RnnModel::glorot_init(dims, config.seed);
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }
    // Distinct stream from the init draw so glorot_init(seed) stays the
    // documented function of seed alone.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<(f64, RnnModel)> = None;
    for epoch in 0..config.epochs {
        let lr = config.lr0 * config.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let masks_buf;
            let masks = if config.dropout_keep < 1.0 {
                masks_buf = sample_masks(&mut rng, batch.len(), t_steps, p, config.dropout_keep);
                Some((masks_buf.as_slice(), config.dropout_keep))
            } else {
                None
            };
            let (grads, batch_loss) = bptt(&model, &batch, masks, config.l2)?;
            if !batch_loss.is_finite() {
                return Err(RnnError::DivergedLoss { epoch, history: Box::new(history) });
            }
            epoch_loss += batch_loss * chunk.len() as f64;
            apply_step(&mut model, &grads, lr);
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let (val_loss, f1) = validate(&model, val_set, config.l2)?;
        history.epochs.push(EpochStats { epoch, train_loss, val_loss, f1, lr });
        let tracked = if val_loss.is_nan() { train_loss } else { val_loss };
        if best.as_ref().map_or(true, |(b, _)| tracked < *b) {
            best = Some((tracked, model.clone()));
        }
    }
    let chosen = best.map(|(_, m)| m).unwrap_or(model);
    Ok((chosen, history))
}

fn sample_masks(rng: &mut ChaCha8Rng, n: usize, t: usize, p: usize, keep: f64) -> Vec<Mat> {
    (0..n)
        .map(|_| {
            let mut m = Mat::zeros(t, p);
            for v in &mut m.data {
                *v = if rng.random::<f64>() < keep { 1.0 } else { 0.0 };
            }
            m
        })
        .collect()
}

fn apply_step(model: &mut RnnModel, grads: &Grads, lr: f64) {
    model.w_h.add_scaled(-lr, &grads.w_h);
    model.u_h.add_scaled(-lr, &grads.u_h);
    model.w_y.add_scaled(-lr, &grads.w_y);
    for (w, g) in model.b_h.iter_mut().zip(grads.b_h.iter()) {
        *w -= lr * g;
    }
    for (w, g) in model.b_y.iter_mut().zip(grads.b_y.iter()) {
        *w -= lr * g;
    }
}

fn validate(
    model: &RnnModel,
    val_set: &[SequenceSample],
    lambda: f64,
) -> Result<(f64, [f64; 3]), RnnError> {
    if val_set.is_empty() {
        return Ok((f64::NAN, [0.0; 3]));
    }
    let mut total = 0.0;
    let mut preds = Vec::with_capacity(val_set.len());
    let mut labels = Vec::with_capacity(val_set.len());
    for s in val_set {
        let fwd = forward(model, &s.x, None)?;
        total += loss(&fwd.probs, &s.y.one_hot(), model, 0.0);
        preds.push(crate::rnn::decide(&fwd.probs, None));
        labels.push(s.y);
    }
    let val_loss = total / val_set.len() as f64 + lambda * model.penalty();
    let summary = confusion(&preds, &labels);
    let f1 = [
        summary.per_class[0].f1,
        summary.per_class[1].f1,
        summary.per_class[2].f1,
    ];
    Ok((val_loss, f1))
}
