//! `lobflip evaluate` — score a saved model on a feature directory and
//! write per-class metrics plus one-vs-rest ROC curves.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use lobflip::dataset::{make_sequences, Label, LabeledRow, ALL_LABELS};
use lobflip::eval::{confusion, roc, RocCurve, DEFAULT_ROC_THRESHOLDS};
use lobflip::svg::Chart;

use crate::cmd::load_config;
use crate::files::load_feature_dir;
use crate::manifest::RunManifest;
use crate::model::load_model;

pub const METRICS_NAME: &str = "metrics.csv";
pub const ROC_CSV_NAME: &str = "roc.csv";
pub const ROC_SVG_NAME: &str = "roc.svg";

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model file from `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Feature directory to score.
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory for metrics.csv, roc.csv, roc.svg, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Keep only sessions with id >= this (to exclude training sessions).
    #[arg(long)]
    pub from_session: Option<u32>,
    /// Keep only sessions with id <= this.
    #[arg(long)]
    pub to_session: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// ROC threshold count over [0.5, 1).
    pub n_thresholds: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { n_thresholds: DEFAULT_ROC_THRESHOLDS }
    }
}

#[derive(Serialize)]
struct Effective<'a> {
    #[serde(flatten)]
    eval: &'a EvaluateConfig,
    model_kind: &'a str,
    t_steps: usize,
    from_session: Option<u32>,
    to_session: Option<u32>,
}

fn class_name(label: Label) -> &'static str {
    match label {
        Label::Down => "down",
        Label::Stationary => "stationary",
        Label::Up => "up",
    }
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let cfg: EvaluateConfig = load_config(&args.config)?;
    let (layout, feature_paths, rows) = load_feature_dir(&args.features)?;
    let model = load_model(&args.model)?;
    if model.layout_hash != layout.layout_hash {
        bail!(
            "model was trained on feature layout {} but the data has {}",
            model.layout_hash,
            layout.layout_hash
        );
    }

    let lo = args.from_session.unwrap_or(0);
    let hi = args.to_session.unwrap_or(u32::MAX);
    let mut rows: Vec<LabeledRow> = rows
        .into_iter()
        .filter(|r| (lo..=hi).contains(&r.session_id))
        .collect();
    if rows.is_empty() {
        bail!("no feature rows in sessions {lo}..={hi}");
    }
    if let Some(z) = &model.standardization {
        for r in &mut rows {
            z.apply_in_place(&mut r.features);
        }
    }
    let samples = make_sequences(&rows, model.t_steps);
    if samples.is_empty() {
        bail!("no session holds {} consecutive rows; nothing to score", model.t_steps);
    }
    log::info!("scoring {} sequences at T={} with a {} model", samples.len(), model.t_steps, model.kind);

    let outputs = model.trained.predict_batch(&samples).context("scoring failed")?;
    let preds: Vec<Label> = outputs.iter().map(|(l, _)| *l).collect();
    let labels: Vec<Label> = samples.iter().map(|s| s.y).collect();
    let summary = confusion(&preds, &labels);
    let curves: Vec<RocCurve> = ALL_LABELS
        .map(|target| {
            let scores: Vec<f64> = outputs.iter().map(|(_, p)| p[target.index()]).collect();
            let binary: Vec<bool> = labels.iter().map(|&y| y == target).collect();
            roc(&scores, &binary, cfg.n_thresholds)
        })
        .to_vec();

    let mut metrics = String::from("class,tp,fp,fn,tn,precision,recall,f1,auc\n");
    for (m, curve) in summary.per_class.iter().zip(&curves) {
        writeln!(
            metrics,
            "{},{},{},{},{},{},{},{},{}",
            class_name(m.label),
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            m.precision,
            m.recall,
            m.f1,
            curve.auc
        )?;
    }
    let mut roc_csv = String::from("class,threshold,tpr,fpr\n");
    for (label, curve) in ALL_LABELS.iter().zip(&curves) {
        for p in &curve.points {
            writeln!(roc_csv, "{},{},{},{}", class_name(*label), p.threshold, p.tpr, p.fpr)?;
        }
    }
    let mut chart = Chart::new("One-vs-rest ROC", "false positive rate", "true positive rate");
    for (label, curve) in ALL_LABELS.iter().zip(&curves) {
        let pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        chart.add_series(&format!("{} (AUC {:.3})", class_name(*label), curve.auc), pts);
    }
    chart.add_reference("chance", vec![(0.0, 0.0), (1.0, 1.0)]);

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join(METRICS_NAME), metrics)?;
    fs::write(args.out.join(ROC_CSV_NAME), roc_csv)?;
    fs::write(args.out.join(ROC_SVG_NAME), chart.render())?;

    let mut manifest = RunManifest::new(
        "evaluate",
        &Effective {
            eval: &cfg,
            model_kind: model.kind,
            t_steps: model.t_steps,
            from_session: args.from_session,
            to_session: args.to_session,
        },
    )?;
    manifest.record_input(&args.model)?;
    for path in &feature_paths {
        manifest.record_input(path)?;
    }
    manifest.record_input(&args.features.join(crate::cmd::featurize::LAYOUT_NAME))?;
    manifest.record_output(&args.out, METRICS_NAME)?;
    manifest.record_output(&args.out, ROC_CSV_NAME)?;
    manifest.record_output(&args.out, ROC_SVG_NAME)?;
    manifest.write(&args.out)?;

    for m in &summary.per_class {
        log::info!(
            "{}: precision {:.4} recall {:.4} f1 {:.4}",
            class_name(m.label),
            m.precision,
            m.recall,
            m.f1
        );
    }
    Ok(())
}
