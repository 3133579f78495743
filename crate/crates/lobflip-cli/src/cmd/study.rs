//! `lobflip study` — experiment drivers over an event directory. Events are
//! featurized in-process (the studies need mid-prices and per-split
//! standardization, which the feature CSVs deliberately do not carry).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use lobflip::dataset::{balance, Label, LabeledRow};
use lobflip::eval::studies::{
    cross_validate, fit, horizon_study, hourly_f1, prepare_split, retraining_study, StudyConfig,
};
use lobflip::features::DEFAULT_FLOW_WINDOW;
use lobflip::pipeline::{featurize_sessions, label_sessions, Observation};
use lobflip::svg::Chart;

use crate::cmd::load_config;
use crate::files::read_event_sessions;
use crate::manifest::{verify_upstream, RunManifest};
use crate::model::ModelKind;
use crate::profile::{resolve, Profile, TrainOverrides};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    /// Walk-forward cross-validation with per-class aggregates.
    Cv20,
    /// Sequence-length sweep, one row of per-class F1 means per T.
    Nsteps,
    /// Daily-retrained vs trained-once minority F1 by session.
    Retrain,
    /// Up-vs-rest ROC per prediction horizon.
    Horizon,
    /// Per-class F1 by hour of the evaluation session.
    Hourly,
}

pub const DEFAULT_T_LIST: [usize; 7] = [1, 2, 5, 10, 20, 50, 100];

/// 0.1 s (≈ the next observation at default event rates) out to 10 s. The
/// horizon label compares against the latest observation inside the window,
/// so a horizon of 0 would degenerately label everything stationary.
pub const DEFAULT_HORIZONS_NS: [i64; 4] =
    [100_000_000, 1_000_000_000, 5_000_000_000, 10_000_000_000];

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// Which experiment to run.
    #[arg(value_enum)]
    pub kind: StudyKind,
    /// Directory holding events_sNN files.
    #[arg(long)]
    pub events: PathBuf,
    /// Output directory for study CSVs, SVGs, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier trained per split.
    #[arg(long, value_enum, default_value_t = ModelKind::Rnn)]
    pub model: ModelKind,
    /// Hyper-parameter profile the config file and flags override.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    /// JSON overrides (training fields plus window_length/horizons_ns/t_list).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Market-order flow window length in events.
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub t_steps: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr0: Option<f64>,
    #[arg(long)]
    pub lr_decay: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_sessions: Option<usize>,
    #[arg(long)]
    pub validation_size: Option<usize>,
    #[arg(long)]
    pub balance_target: Option<usize>,
    #[arg(long)]
    pub balance_seed: Option<u64>,
}

/// File-sourced overrides: the training fields plus study-only knobs.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyOverrides {
    pub t_steps: Option<usize>,
    pub hidden: Option<usize>,
    pub hidden_layers: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr0: Option<f64>,
    pub lr_decay: Option<f64>,
    pub l2: Option<f64>,
    pub dropout_keep: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub train_sessions: Option<usize>,
    pub validation_size: Option<usize>,
    pub balance_target: Option<usize>,
    pub balance_seed: Option<u64>,
    pub window_length: Option<usize>,
    pub horizons_ns: Option<Vec<i64>>,
    pub t_list: Option<Vec<usize>>,
}

impl StudyOverrides {
    fn train(&self) -> TrainOverrides {
        TrainOverrides {
            t_steps: self.t_steps,
            hidden: self.hidden,
            hidden_layers: self.hidden_layers.clone(),
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            lr_decay: self.lr_decay,
            l2: self.l2,
            dropout_keep: self.dropout_keep,
            alpha: self.alpha,
            lambda_grid: self.lambda_grid.clone(),
            seed: self.seed,
            train_sessions: self.train_sessions,
            validation_size: self.validation_size,
            balance_target: self.balance_target,
            balance_seed: self.balance_seed,
        }
    }
}

impl StudyArgs {
    fn overrides(&self) -> TrainOverrides {
        TrainOverrides {
            t_steps: self.t_steps,
            hidden: self.hidden,
            hidden_layers: None,
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr0: self.lr0,
            lr_decay: self.lr_decay,
            l2: self.l2,
            dropout_keep: self.dropout_keep,
            alpha: None,
            lambda_grid: None,
            seed: self.seed,
            train_sessions: self.train_sessions,
            validation_size: self.validation_size,
            balance_target: self.balance_target,
            balance_seed: self.balance_seed,
        }
    }
}

#[derive(Serialize)]
struct Effective {
    kind: StudyKind,
    study: StudyConfig,
    window_length: usize,
    horizons_ns: Vec<i64>,
    t_list: Vec<usize>,
}

fn class_name(label: Label) -> &'static str {
    match label {
        Label::Down => "down",
        Label::Stationary => "stationary",
        Label::Up => "up",
    }
}

pub fn run(args: StudyArgs) -> Result<()> {
    let file: StudyOverrides = load_config(&args.config)?;
    let overrides = TrainOverrides::layered(args.overrides(), file.train());
    let setup = resolve(args.model, args.profile, &overrides);
    let study = StudyConfig {
        spec: setup.spec.clone(),
        plan: setup.plan,
        t_steps: setup.t_steps,
        balance_target: setup.balance_target,
        balance_seed: setup.balance_seed,
    };
    let window_length =
        args.window.or(file.window_length).unwrap_or(DEFAULT_FLOW_WINDOW);
    let horizons_ns = file.horizons_ns.clone().unwrap_or_else(|| DEFAULT_HORIZONS_NS.to_vec());
    let t_list = file.t_list.clone().unwrap_or_else(|| DEFAULT_T_LIST.to_vec());

    verify_upstream(&args.events)?;
    let (event_paths, sessions) = read_event_sessions(&args.events)?;
    let observations = featurize_sessions(&sessions, window_length)
        .context("featurizing event sessions")?;
    let rows = label_sessions(&observations);
    log::info!(
        "featurized {} sessions into {} labeled rows (window {window_length})",
        observations.len(),
        rows.len()
    );

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut outputs: Vec<String> = Vec::new();
    match args.kind {
        StudyKind::Cv20 => run_cv(&args, &study, &rows, &mut outputs)?,
        StudyKind::Nsteps => run_nsteps(&args, &study, &t_list, &rows, &mut outputs)?,
        StudyKind::Retrain => run_retrain(&args, &study, &rows, &mut outputs)?,
        StudyKind::Horizon => run_horizon(&args, &study, &horizons_ns, &observations, &mut outputs)?,
        StudyKind::Hourly => run_hourly(&args, &study, &rows, &mut outputs)?,
    }

    let mut manifest = RunManifest::new(
        "study",
        &Effective { kind: args.kind, study, window_length, horizons_ns, t_list },
    )?;
    for path in &event_paths {
        manifest.record_input(path)?;
    }
    for name in &outputs {
        manifest.record_output(&args.out, name)?;
    }
    manifest.write(&args.out)?;
    Ok(())
}

fn write_output(
    args: &StudyArgs,
    outputs: &mut Vec<String>,
    name: &str,
    content: String,
) -> Result<()> {
    fs::write(args.out.join(name), content)
        .with_context(|| format!("writing {name}"))?;
    outputs.push(name.to_string());
    Ok(())
}

fn run_cv(
    args: &StudyArgs,
    study: &StudyConfig,
    rows: &[LabeledRow],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let report = cross_validate(rows, study).context("walk-forward cross-validation")?;
    let mut splits =
        String::from("split,first_train_session,eval_session,balanced_train,test_size,class,precision,recall,f1,auc\n");
    for s in &report.splits {
        for m in &s.metrics.per_class {
            writeln!(
                splits,
                "{},{},{},{},{},{},{},{},{},{}",
                s.split,
                s.first_train_session,
                s.eval_session,
                s.balanced_train_size,
                s.test_size,
                class_name(m.label),
                m.precision,
                m.recall,
                m.f1,
                s.auc[m.label.index()]
            )?;
        }
    }
    write_output(args, outputs, "cv_splits.csv", splits)?;

    let mut agg = String::from(
        "class,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,balanced_train_mean,test_size_mean\n",
    );
    let n = report.splits.len() as f64;
    let train_mean = report.splits.iter().map(|s| s.balanced_train_size as f64).sum::<f64>() / n;
    let test_mean = report.splits.iter().map(|s| s.test_size as f64).sum::<f64>() / n;
    for a in &report.aggregate {
        writeln!(
            agg,
            "{},{},{},{},{},{},{},{},{}",
            class_name(a.label),
            a.precision.mean,
            a.precision.std,
            a.recall.mean,
            a.recall.std,
            a.f1.mean,
            a.f1.std,
            train_mean,
            test_mean
        )?;
    }
    write_output(args, outputs, "cv_aggregate.csv", agg)?;

    let mut chart = Chart::new("Walk-forward F1 by split", "split", "F1");
    for label in [Label::Down, Label::Stationary, Label::Up] {
        let pts: Vec<(f64, f64)> = report
            .splits
            .iter()
            .map(|s| (s.split as f64, s.metrics.per_class[label.index()].f1))
            .collect();
        chart.add_series(class_name(label), pts);
    }
    write_output(args, outputs, "cv_f1.svg", chart.render())?;
    for a in &report.aggregate {
        log::info!(
            "{}: f1 {:.4} +/- {:.4} over {} splits",
            class_name(a.label),
            a.f1.mean,
            a.f1.std,
            report.splits.len()
        );
    }
    Ok(())
}

fn run_nsteps(
    args: &StudyArgs,
    study: &StudyConfig,
    t_list: &[usize],
    rows: &[LabeledRow],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let mut csv = String::from("t_steps,f1_down,f1_stationary,f1_up\n");
    let mut per_class: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for &t in t_list {
        let cfg = StudyConfig { t_steps: t, ..study.clone() };
        let report = cross_validate(rows, &cfg)
            .with_context(|| format!("cross-validation at T={t}"))?;
        let f1 = [
            report.aggregate[0].f1.mean,
            report.aggregate[1].f1.mean,
            report.aggregate[2].f1.mean,
        ];
        writeln!(csv, "{t},{},{},{}", f1[0], f1[1], f1[2])?;
        for (k, series) in per_class.iter_mut().enumerate() {
            series.push((t as f64, f1[k]));
        }
        log::info!("T={t}: mean F1 down {:.4} stationary {:.4} up {:.4}", f1[0], f1[1], f1[2]);
    }
    write_output(args, outputs, "nsteps.csv", csv)?;
    let mut chart = Chart::new("Mean F1 vs sequence length", "time steps", "F1");
    for (k, label) in [Label::Down, Label::Stationary, Label::Up].into_iter().enumerate() {
        chart.add_series(class_name(label), per_class[k].clone());
    }
    write_output(args, outputs, "nsteps.svg", chart.render())?;
    Ok(())
}

fn run_retrain(
    args: &StudyArgs,
    study: &StudyConfig,
    rows: &[LabeledRow],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let report = retraining_study(rows, study).context("retraining study")?;
    let mut csv = String::from("eval_session,retrained_f1,stale_f1\n");
    for i in 0..report.eval_sessions.len() {
        writeln!(csv, "{},{},{}", report.eval_sessions[i], report.retrained[i], report.stale[i])?;
    }
    write_output(args, outputs, "retrain.csv", csv)?;
    let series = |values: &[f64]| -> Vec<(f64, f64)> {
        report
            .eval_sessions
            .iter()
            .zip(values)
            .map(|(&s, &f)| (s as f64, f))
            .collect()
    };
    let mut chart = Chart::new("Minority-mean F1 by session", "evaluation session", "F1");
    chart.add_series("retrained daily", series(&report.retrained));
    chart.add_series("trained once", series(&report.stale));
    write_output(args, outputs, "retrain.svg", chart.render())?;
    Ok(())
}

fn run_horizon(
    args: &StudyArgs,
    study: &StudyConfig,
    horizons_ns: &[i64],
    observations: &[Vec<Observation>],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let results = horizon_study(observations, study, horizons_ns).context("horizon study")?;
    let mut csv = String::from("horizon_ns,auc_up,dropped\n");
    let mut chart = Chart::new("Up-vs-rest ROC by horizon", "false positive rate", "true positive rate");
    for r in &results {
        writeln!(csv, "{},{},{}", r.horizon_ns, r.roc_up.auc, r.dropped)?;
        let pts: Vec<(f64, f64)> = r.roc_up.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        chart.add_series(
            &format!("{:.1} s (AUC {:.3})", r.horizon_ns as f64 / 1e9, r.roc_up.auc),
            pts,
        );
        log::info!("horizon {} ns: up-vs-rest AUC {:.4}", r.horizon_ns, r.roc_up.auc);
    }
    chart.add_reference("chance", vec![(0.0, 0.0), (1.0, 1.0)]);
    write_output(args, outputs, "horizon.csv", csv)?;
    write_output(args, outputs, "horizon_roc.svg", chart.render())?;
    Ok(())
}

fn run_hourly(
    args: &StudyArgs,
    study: &StudyConfig,
    rows: &[LabeledRow],
    outputs: &mut Vec<String>,
) -> Result<()> {
    let (_, sets) = prepare_split(rows, &study.plan, study.t_steps, 0)
        .context("assembling the first walk-forward split")?;
    let balanced = balance(&sets.train, study.balance_target, study.balance_seed)?;
    let model = fit(&study.spec, &balanced, &sets.validation, study.t_steps, 0)
        .context("training for the hourly study")?;
    let outputs_pred = model.predict_batch(&sets.test).context("scoring the test set")?;
    let preds: Vec<Label> = outputs_pred.iter().map(|(l, _)| *l).collect();
    let labels: Vec<Label> = sets.test.iter().map(|s| s.y).collect();
    let timestamps: Vec<i64> = sets.test.iter().map(|s| s.timestamp_ns).collect();
    let eval_session = study.plan.train_sessions as u32;
    let session_start = rows
        .iter()
        .filter(|r| r.session_id == eval_session)
        .map(|r| r.timestamp_ns)
        .min()
        .context("evaluation session has no rows")?;
    let buckets = hourly_f1(&timestamps, &preds, &labels, session_start);

    let mut csv = String::from("hour,n,f1_down,f1_stationary,f1_up\n");
    let mut per_class: [Vec<(f64, f64)>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for b in &buckets {
        match &b.metrics {
            Some(m) => {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    b.hour, b.n, m.per_class[0].f1, m.per_class[1].f1, m.per_class[2].f1
                )?;
                for (k, series) in per_class.iter_mut().enumerate() {
                    series.push((b.hour as f64, m.per_class[k].f1));
                }
            }
            None => writeln!(csv, "{},0,,,", b.hour)?,
        }
    }
    write_output(args, outputs, "hourly.csv", csv)?;
    let mut chart = Chart::new("F1 by hour of session", "hour", "F1");
    for (k, label) in [Label::Down, Label::Stationary, Label::Up].into_iter().enumerate() {
        chart.add_series(class_name(label), per_class[k].clone());
    }
    write_output(args, outputs, "hourly.svg", chart.render())?;
    log::info!("hourly study: {} buckets over the evaluation session", buckets.len());
    Ok(())
}
