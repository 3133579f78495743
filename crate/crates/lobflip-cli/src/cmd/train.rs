//! `lobflip train` — fit one classifier on a feature directory and save a
//! model file (plus the per-epoch history for the gradient-trained kinds).

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use lobflip::baselines::{select_lambda, train_ffwd};
use lobflip::dataset::balance;
use lobflip::eval::studies::{prepare_split, ModelSpec};
use lobflip::rnn::{self, write_history_csv, ModelFile, ModelParams, MODEL_FORMAT_VERSION};

use crate::cmd::load_config;
use crate::files::load_feature_dir;
use crate::manifest::RunManifest;
use crate::model::ModelKind;
use crate::profile::{resolve, Profile, TrainOverrides, TrainSetup};

pub const MODEL_NAME: &str = "model.json";
pub const HISTORY_NAME: &str = "history.csv";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature directory produced by `featurize`.
    #[arg(long)]
    pub features: PathBuf,
    /// Output directory for model.json, history.csv, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Classifier kind.
    #[arg(long, value_enum, default_value_t = ModelKind::Rnn)]
    pub kind: ModelKind,
    /// Hyper-parameter profile the config file and flags override.
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    /// JSON overrides (same field names as the flags below).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sequence length T.
    #[arg(long)]
    pub t_steps: Option<usize>,
    /// RNN hidden units.
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
    /// Dropout keep probability θ ∈ (0, 1].
    #[arg(long)]
    pub dropout_keep: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Consecutive sessions trained on before the validation session.
    #[arg(long)]
    pub train_sessions: Option<usize>,
    /// Leading sequence windows of the next session held out for validation.
    #[arg(long)]
    pub validation_size: Option<usize>,
    /// Post-balance samples per class.
    #[arg(long)]
    pub balance_target: Option<usize>,
    #[arg(long)]
    pub balance_seed: Option<u64>,
}

impl TrainArgs {
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
struct Effective<'a> {
    #[serde(flatten)]
    setup: &'a TrainSetup,
    layout_hash: &'a str,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let file_overrides: TrainOverrides = load_config(&args.config)?;
    let overrides = TrainOverrides::layered(args.overrides(), file_overrides);
    let setup = resolve(args.kind, args.profile, &overrides);

    let (layout, feature_paths, rows) = load_feature_dir(&args.features)?;
    let (z, sets) = prepare_split(&rows, &setup.plan, setup.t_steps, 0)
        .context("assembling the train/validation split")?;
    let balanced = balance(&sets.train, setup.balance_target, setup.balance_seed)
        .context("balancing the training set")?;
    log::info!(
        "train {} / validation {} / balanced {} samples at T={}",
        sets.train.len(),
        sets.validation.len(),
        balanced.len(),
        setup.t_steps
    );

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut history_written = false;
    let (seed, params) = match &setup.spec {
        ModelSpec::Rnn(cfg) => {
            let (model, history) = rnn::train(&balanced, &sets.validation, cfg)
                .context("training the recurrent model")?;
            write_history_csv(&args.out.join(HISTORY_NAME), &history)?;
            history_written = true;
            (
                cfg.seed,
                ModelParams::Rnn {
                    dims: model.dims,
                    w_h: model.w_h,
                    u_h: model.u_h,
                    b_h: model.b_h,
                    w_y: model.w_y,
                    b_y: model.b_y,
                },
            )
        }
        ModelSpec::Ffwd(cfg) => {
            let (net, history) = train_ffwd(&balanced, &sets.validation, cfg)
                .context("training the feed-forward model")?;
            write_history_csv(&args.out.join(HISTORY_NAME), &history)?;
            history_written = true;
            (cfg.seed, ModelParams::Ffwd { layers: net.layers })
        }
        ModelSpec::Logistic(cfg) => {
            let (model, lambda) =
                select_lambda(&balanced, &sets.validation, &setup.lambda_grid, cfg)
                    .context("fitting the one-vs-rest logistic model")?;
            log::info!("selected lambda_en = {lambda} (alpha = {})", model.alpha);
            (
                cfg.seed,
                ModelParams::Logistic {
                    weights: model.weights.to_vec(),
                    intercepts: model.intercepts.to_vec(),
                    alpha: model.alpha,
                    lambda_en: model.lambda_en,
                },
            )
        }
        ModelSpec::White { seed } => (*seed, ModelParams::WhiteNoise { noise_seed: *seed }),
    };
    let standardization =
        if matches!(params, ModelParams::WhiteNoise { .. }) { None } else { Some(z) };
    let model_file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        seed,
        t_steps: setup.t_steps,
        layout_hash: layout.layout_hash.clone(),
        standardization,
        params,
    };
    model_file.save(&args.out.join(MODEL_NAME)).context("saving model file")?;

    let mut manifest =
        RunManifest::new("train", &Effective { setup: &setup, layout_hash: &layout.layout_hash })?;
    for path in &feature_paths {
        manifest.record_input(path)?;
    }
    manifest.record_input(&args.features.join(crate::cmd::featurize::LAYOUT_NAME))?;
    manifest.record_output(&args.out, MODEL_NAME)?;
    if history_written {
        manifest.record_output(&args.out, HISTORY_NAME)?;
    }
    manifest.write(&args.out)?;
    log::info!("saved {} model to {}", setup.kind, args.out.join(MODEL_NAME).display());
    Ok(())
}
