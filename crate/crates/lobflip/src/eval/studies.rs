//! Experiment drivers: walk-forward cross-validation, the retraining-decay
//! study, the horizon study, and hourly F1 buckets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    select_lambda, train_ffwd, white_noise_predict, BaselineError, FfwdConfig, FfwdNet,
    LogisticConfig, OvrLogistic,
};
use crate::dataset::{
    balance, make_sequences, n_splits, split, DatasetError, Label, LabeledRow, SequenceSample,
    SplitPlan, ALL_LABELS,
};
use crate::eval::{confusion, roc, ClassMetrics, ConfusionSummary, RocCurve, DEFAULT_ROC_THRESHOLDS};
use crate::features::{standardize, FeatureError, Standardization};
use crate::pipeline::{label_observations_horizon, Observation};
use crate::rnn::{self, RnnError, RnnModel, TrainConfig};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Rnn(#[from] RnnError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Insufficient(String),
}

/// Which classifier a study trains per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Rnn(TrainConfig),
    Ffwd(FfwdConfig),
    Logistic(LogisticConfig),
    White { seed: u64 },
}

/// A classifier trained on one split.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Rnn(RnnModel),
    Ffwd(FfwdNet),
    Logistic(OvrLogistic),
    White { seed: u64 },
}

impl TrainedModel {
    /// Hard label and per-class scores for each sample, in order.
    pub fn predict_batch(
        &self,
        samples: &[SequenceSample],
    ) -> Result<Vec<(Label, [f64; 3])>, StudyError> {
        match self {
            TrainedModel::Rnn(m) => samples
                .iter()
                .map(|s| {
                    let p = rnn::predict_proba(m, &s.x)?;
                    let probs = [p[0], p[1], p[2]];
                    Ok((rnn::decide(&probs, None), probs))
                })
                .collect(),
            TrainedModel::Ffwd(net) => Ok(samples
                .iter()
                .map(|s| {
                    let probs = net.predict_proba(&s.x);
                    (rnn::decide(&probs, None), probs)
                })
                .collect()),
            TrainedModel::Logistic(m) => Ok(samples
                .iter()
                .map(|s| {
                    let probs = m.predict_proba(&s.x);
                    (m.predict(&s.x), probs)
                })
                .collect()),
            TrainedModel::White { seed } => Ok(white_noise_predict(*seed, samples.len())),
        }
    }
}

/// Study-level configuration shared by the drivers. `t_steps` governs
/// sequence assembly and overrides the per-model value so sweeps stay
/// consistent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub spec: ModelSpec,
    pub plan: SplitPlan,
    pub t_steps: usize,
    pub balance_target: usize,
    pub balance_seed: u64,
}

/// Fit the configured model on a balanced train set.
pub fn fit(
    spec: &ModelSpec,
    train: &[SequenceSample],
    val: &[SequenceSample],
    t_steps: usize,
    variant: u64,
) -> Result<TrainedModel, StudyError> {
    match spec {
        ModelSpec::Rnn(cfg) => {
            let cfg = TrainConfig { t_steps, ..cfg.clone() };
            let (model, _) = rnn::train(train, val, &cfg)?;
            Ok(TrainedModel::Rnn(model))
        }
        ModelSpec::Ffwd(cfg) => {
            let (net, _) = train_ffwd(train, val, cfg)?;
            Ok(TrainedModel::Ffwd(net))
        }
        ModelSpec::Logistic(cfg) => {
            let grid = [1e-4, 1e-3, 1e-2, 1e-1];
            let (model, _) = select_lambda(train, val, &grid, cfg)?;
            Ok(TrainedModel::Logistic(model))
        }
        ModelSpec::White { seed } => Ok(TrainedModel::White { seed: seed.wrapping_add(variant) }),
    }
}

fn transform_rows(rows: &[LabeledRow], z: &Standardization) -> Vec<LabeledRow> {
    rows.iter()
        .map(|r| LabeledRow {
            session_id: r.session_id,
            timestamp_ns: r.timestamp_ns,
            features: z.apply(&r.features),
            label: r.label,
        })
        .collect()
}

/// Standardize (fit on the train sessions only), assemble sequences, and
/// carve one walk-forward split starting at `first_train_session`.
pub fn prepare_split(
    rows: &[LabeledRow],
    plan: &SplitPlan,
    t_steps: usize,
    first_train_session: u32,
) -> Result<(Standardization, crate::dataset::SplitSets), StudyError> {
    let train_hi = first_train_session + plan.train_sessions as u32;
    let train_features: Vec<_> = rows
        .iter()
        .filter(|r| r.session_id >= first_train_session && r.session_id < train_hi)
        .map(|r| r.features)
        .collect();
    let z = standardize(&train_features)?;
    let block: Vec<LabeledRow> = rows
        .iter()
        .filter(|r| r.session_id >= first_train_session && r.session_id <= train_hi)
        .cloned()
        .collect();
    let transformed = transform_rows(&block, &z);
    let samples = make_sequences(&transformed, t_steps);
    let sets = split(&samples, plan, first_train_session)?;
    Ok((z, sets))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub label: Label,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: usize,
    pub first_train_session: u32,
    pub eval_session: u32,
    pub balanced_train_size: usize,
    pub test_size: usize,
    pub metrics: ConfusionSummary,
    /// One-vs-rest AUC per class (down, stationary, up) on the test set.
    pub auc: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub splits: Vec<SplitReport>,
    pub aggregate: [ClassAggregate; 3],
}

fn evaluate_samples(
    model: &TrainedModel,
    test: &[SequenceSample],
) -> Result<(ConfusionSummary, [f64; 3]), StudyError> {
    let outputs = model.predict_batch(test)?;
    let preds: Vec<Label> = outputs.iter().map(|(l, _)| *l).collect();
    let labels: Vec<Label> = test.iter().map(|s| s.y).collect();
    let metrics = confusion(&preds, &labels);
    let mut auc = [0.0; 3];
    for target in ALL_LABELS {
        let scores: Vec<f64> = outputs.iter().map(|(_, p)| p[target.index()]).collect();
        let binary: Vec<bool> = labels.iter().map(|&y| y == target).collect();
        auc[target.index()] = roc(&scores, &binary, DEFAULT_ROC_THRESHOLDS).auc;
    }
    Ok((metrics, auc))
}

fn sorted_sessions(rows: &[LabeledRow]) -> Vec<u32> {
    let mut s: Vec<u32> = rows.iter().map(|r| r.session_id).collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Walk-forward cross-validation: per split, train on `plan.train_sessions`
/// consecutive sessions (balanced) and test on the remainder of the next
/// session past its validation slice. Aggregates mean/std per class.
pub fn cross_validate(rows: &[LabeledRow], config: &StudyConfig) -> Result<CvReport, StudyError> {
    let sessions = sorted_sessions(rows);
    let count = n_splits(sessions.len(), config.plan.train_sessions);
    if count == 0 {
        return Err(StudyError::Insufficient(format!(
            "{} sessions cannot form a single {}-train split",
            sessions.len(),
            config.plan.train_sessions
        )));
    }
    let mut splits = Vec::with_capacity(count);
    for i in 0..count {
        let first = sessions[i];
        let report = run_split(rows, config, i, first)?;
        splits.push(report);
    }
    let aggregate = ALL_LABELS.map(|label| {
        let k = label.index();
        let collect = |f: &dyn Fn(&ClassMetrics) -> f64| -> Vec<f64> {
            splits.iter().map(|s| f(&s.metrics.per_class[k])).collect()
        };
        ClassAggregate {
            label,
            precision: mean_std(&collect(&|m| m.precision)),
            recall: mean_std(&collect(&|m| m.recall)),
            f1: mean_std(&collect(&|m| m.f1)),
        }
    });
    Ok(CvReport { splits, aggregate })
}

fn run_split(
    rows: &[LabeledRow],
    config: &StudyConfig,
    split_index: usize,
    first: u32,
) -> Result<SplitReport, StudyError> {
    let (_, sets) = prepare_split(rows, &config.plan, config.t_steps, first)?;
    let balanced = balance(
        &sets.train,
        config.balance_target,
        config.balance_seed.wrapping_add(split_index as u64),
    )?;
    let model = fit(
        &config.spec,
        &balanced,
        &sets.validation,
        config.t_steps,
        split_index as u64,
    )?;
    let (metrics, auc) = evaluate_samples(&model, &sets.test)?;
    Ok(SplitReport {
        split: split_index,
        first_train_session: first,
        eval_session: first + config.plan.train_sessions as u32,
        balanced_train_size: balanced.len(),
        test_size: sets.test.len(),
        metrics,
        auc,
    })
}

/// Mean F1 over the two minority classes (down and up).
pub fn minority_f1(metrics: &ConfusionSummary) -> f64 {
    (metrics.per_class[Label::Down.index()].f1 + metrics.per_class[Label::Up.index()].f1) / 2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrainReport {
    pub eval_sessions: Vec<u32>,
    /// Minority-mean F1 per split for the daily-retrained series.
    pub retrained: Vec<f64>,
    /// Same metric for the model trained once on the first split.
    pub stale: Vec<f64>,
}

/// Daily-retraining study: series A refits every split; series B trains on
/// the first split only and is carried forward, keeping its original
/// standardization (that staleness is the point).
pub fn retraining_study(rows: &[LabeledRow], config: &StudyConfig) -> Result<RetrainReport, StudyError> {
    let sessions = sorted_sessions(rows);
    let count = n_splits(sessions.len(), config.plan.train_sessions);
    if count < 2 {
        return Err(StudyError::Insufficient(
            "retraining study needs at least 2 walk-forward splits".into(),
        ));
    }
    // Series B: one model, frozen after the first split.
    let first = sessions[0];
    let (z0, sets0) = prepare_split(rows, &config.plan, config.t_steps, first)?;
    let balanced0 = balance(&sets0.train, config.balance_target, config.balance_seed)?;
    let stale_model = fit(&config.spec, &balanced0, &sets0.validation, config.t_steps, 0)?;

    let mut eval_sessions = Vec::with_capacity(count);
    let mut retrained = Vec::with_capacity(count);
    let mut stale = Vec::with_capacity(count);
    for i in 0..count {
        let split_first = sessions[i];
        let report = run_split(rows, config, i, split_first)?;
        eval_sessions.push(report.eval_session);
        retrained.push(minority_f1(&report.metrics));

        // Evaluate the frozen model on the same eval session, transformed
        // with the stale standardization.
        let eval_session = split_first + config.plan.train_sessions as u32;
        let session_rows: Vec<LabeledRow> = rows
            .iter()
            .filter(|r| r.session_id == eval_session)
            .cloned()
            .collect();
        let transformed = transform_rows(&session_rows, &z0);
        let samples = make_sequences(&transformed, config.t_steps);
        let test = if samples.len() > config.plan.validation_size {
            &samples[config.plan.validation_size..]
        } else {
            &samples[..]
        };
        let (metrics, _) = evaluate_samples(&stale_model, test)?;
        stale.push(minority_f1(&metrics));
    }
    Ok(RetrainReport { eval_sessions, retrained, stale })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonResult {
    pub horizon_ns: i64,
    pub roc_up: RocCurve,
    pub dropped: usize,
}

/// Horizon study: relabel the observations at each horizon, train on the
/// first walk-forward split, and report the up-vs-rest ROC on its test set.
pub fn horizon_study(
    observations: &[Vec<Observation>],
    config: &StudyConfig,
    horizons: &[i64],
) -> Result<Vec<HorizonResult>, StudyError> {
    let mut out = Vec::with_capacity(horizons.len());
    for &horizon_ns in horizons {
        let mut rows = Vec::new();
        let mut dropped = 0;
        for session in observations {
            let (mut r, d) = label_observations_horizon(session, horizon_ns);
            rows.append(&mut r);
            dropped += d;
        }
        let sessions = sorted_sessions(&rows);
        if n_splits(sessions.len(), config.plan.train_sessions) == 0 {
            return Err(StudyError::Insufficient("not enough sessions for a split".into()));
        }
        let first = sessions[0];
        let (_, sets) = prepare_split(&rows, &config.plan, config.t_steps, first)?;
        let balanced = balance(&sets.train, config.balance_target, config.balance_seed)?;
        let model = fit(&config.spec, &balanced, &sets.validation, config.t_steps, 0)?;
        let outputs = model.predict_batch(&sets.test)?;
        let scores: Vec<f64> = outputs.iter().map(|(_, p)| p[Label::Up.index()]).collect();
        let binary: Vec<bool> = sets.test.iter().map(|s| s.y == Label::Up).collect();
        out.push(HorizonResult {
            horizon_ns,
            roc_up: roc(&scores, &binary, DEFAULT_ROC_THRESHOLDS),
            dropped,
        });
    }
    Ok(out)
}

pub const HOUR_NS: i64 = 3_600_000_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HourBucket {
    pub hour: usize,
    pub n: usize,
    /// Absent for empty buckets.
    pub metrics: Option<ConfusionSummary>,
}

/// Partition predictions by hour of session and compute per-bucket metrics.
pub fn hourly_f1(
    timestamps: &[i64],
    preds: &[Label],
    labels: &[Label],
    session_start_ns: i64,
) -> Vec<HourBucket> {
    assert_eq!(timestamps.len(), preds.len());
    assert_eq!(preds.len(), labels.len());
    let hour_of = |ts: i64| ((ts - session_start_ns).max(0) / HOUR_NS) as usize;
    let max_hour = timestamps.iter().map(|&t| hour_of(t)).max().unwrap_or(0);
    let mut buckets = Vec::with_capacity(max_hour + 1);
    for hour in 0..=max_hour {
        let idx: Vec<usize> = (0..timestamps.len()).filter(|&i| hour_of(timestamps[i]) == hour).collect();
        let metrics = if idx.is_empty() {
            None
        } else {
            let p: Vec<Label> = idx.iter().map(|&i| preds[i]).collect();
            let y: Vec<Label> = idx.iter().map(|&i| labels[i]).collect();
            Some(confusion(&p, &y))
        };
        buckets.push(HourBucket { hour, n: idx.len(), metrics });
    }
    buckets
}
