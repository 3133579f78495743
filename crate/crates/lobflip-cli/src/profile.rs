//! Hyper-parameter profiles and the defaults → profile → config file →
//! flags override chain shared by `train` and `study`.
//!
//! The `desk` profile trades fidelity for turnaround: 3,000 samples per
//! class after balancing and 50 epochs. The `paper` profile keeps the
//! reference-scale settings: 1,000 epochs of mini-batch 500, ~33,000 per
//! class, and a 2×10⁵-observation validation slice.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use lobflip::baselines::{FfwdConfig, LogisticConfig};
use lobflip::dataset::SplitPlan;
use lobflip::eval::studies::ModelSpec;
use lobflip::rnn::TrainConfig;

use crate::model::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Desk,
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }

    fn rnn(self) -> TrainConfig {
        match self {
            Profile::Desk => TrainConfig {
                epochs: 50,
                batch_size: 100,
                lr0: 0.05,
                lr_decay: 0.99,
                ..TrainConfig::default()
            },
            Profile::Paper => TrainConfig::default(),
        }
    }

    fn ffwd(self) -> FfwdConfig {
        match self {
            Profile::Desk => FfwdConfig {
                epochs: 50,
                batch_size: 100,
                lr0: 0.05,
                lr_decay: 0.99,
                ..FfwdConfig::default()
            },
            Profile::Paper => FfwdConfig::default(),
        }
    }

    fn logistic(self) -> LogisticConfig {
        LogisticConfig::default()
    }

    fn balance_target(self) -> usize {
        match self {
            Profile::Desk => 3_000,
            Profile::Paper => 33_000,
        }
    }

    fn validation_size(self) -> usize {
        match self {
            Profile::Desk => 2_000,
            Profile::Paper => 200_000,
        }
    }
}

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

/// Optional overrides, file- or flag-sourced; `None` keeps the profile
/// value. Fields that only apply to some model kinds are ignored by the
/// others.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOverrides {
    pub t_steps: Option<usize>,
    /// RNN hidden units.
    pub hidden: Option<usize>,
    /// Feed-forward hidden layer widths.
    pub hidden_layers: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr0: Option<f64>,
    pub lr_decay: Option<f64>,
    pub l2: Option<f64>,
    pub dropout_keep: Option<f64>,
    /// Elastic-net mixing weight.
    pub alpha: Option<f64>,
    /// λ_en grid for the logistic validation search.
    pub lambda_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub train_sessions: Option<usize>,
    pub validation_size: Option<usize>,
    pub balance_target: Option<usize>,
    pub balance_seed: Option<u64>,
}

impl TrainOverrides {
    /// Layer two override sets; `top` wins where both are present.
    pub fn layered(top: TrainOverrides, bottom: TrainOverrides) -> TrainOverrides {
        TrainOverrides {
            t_steps: top.t_steps.or(bottom.t_steps),
            hidden: top.hidden.or(bottom.hidden),
            hidden_layers: top.hidden_layers.or(bottom.hidden_layers),
            epochs: top.epochs.or(bottom.epochs),
            batch_size: top.batch_size.or(bottom.batch_size),
            lr0: top.lr0.or(bottom.lr0),
            lr_decay: top.lr_decay.or(bottom.lr_decay),
            l2: top.l2.or(bottom.l2),
            dropout_keep: top.dropout_keep.or(bottom.dropout_keep),
            alpha: top.alpha.or(bottom.alpha),
            lambda_grid: top.lambda_grid.or(bottom.lambda_grid),
            seed: top.seed.or(bottom.seed),
            train_sessions: top.train_sessions.or(bottom.train_sessions),
            validation_size: top.validation_size.or(bottom.validation_size),
            balance_target: top.balance_target.or(bottom.balance_target),
            balance_seed: top.balance_seed.or(bottom.balance_seed),
        }
    }
}

/// Fully resolved training setup for one model kind.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSetup {
    pub kind: String,
    pub profile: String,
    pub t_steps: usize,
    pub plan: SplitPlan,
    pub balance_target: usize,
    pub balance_seed: u64,
    pub spec: ModelSpec,
    /// Grid searched by the logistic fit; unused by other kinds.
    pub lambda_grid: Vec<f64>,
}

pub fn resolve(kind: ModelKind, profile: Profile, o: &TrainOverrides) -> TrainSetup {
    let t_steps = o.t_steps.unwrap_or(10);
    let seed = o.seed.unwrap_or(0);
    let spec = match kind {
        ModelKind::Rnn => {
            let base = profile.rnn();
            ModelSpec::Rnn(TrainConfig {
                t_steps,
                hidden: o.hidden.unwrap_or(base.hidden),
                epochs: o.epochs.unwrap_or(base.epochs),
                batch_size: o.batch_size.unwrap_or(base.batch_size),
                lr0: o.lr0.unwrap_or(base.lr0),
                lr_decay: o.lr_decay.unwrap_or(base.lr_decay),
                l2: o.l2.unwrap_or(base.l2),
                dropout_keep: o.dropout_keep.unwrap_or(base.dropout_keep),
                seed,
            })
        }
        ModelKind::Ffwd => {
            let base = profile.ffwd();
            ModelSpec::Ffwd(FfwdConfig {
                hidden: o.hidden_layers.clone().unwrap_or(base.hidden),
                epochs: o.epochs.unwrap_or(base.epochs),
                batch_size: o.batch_size.unwrap_or(base.batch_size),
                lr0: o.lr0.unwrap_or(base.lr0),
                lr_decay: o.lr_decay.unwrap_or(base.lr_decay),
                l2: o.l2.unwrap_or(base.l2),
                seed,
            })
        }
        ModelKind::Logistic => {
            let base = profile.logistic();
            ModelSpec::Logistic(LogisticConfig {
                alpha: o.alpha.unwrap_or(base.alpha),
                lambda_en: base.lambda_en,
                epochs: o.epochs.unwrap_or(base.epochs),
                batch_size: o.batch_size.unwrap_or(base.batch_size),
                lr0: o.lr0.unwrap_or(base.lr0),
                lr_decay: o.lr_decay.unwrap_or(base.lr_decay),
                seed,
            })
        }
        ModelKind::White => ModelSpec::White { seed },
    };
    TrainSetup {
        kind: kind.name().to_string(),
        profile: profile.name().to_string(),
        t_steps,
        plan: SplitPlan {
            train_sessions: o.train_sessions.unwrap_or(3),
            validation_size: o.validation_size.unwrap_or(profile.validation_size()),
        },
        balance_target: o.balance_target.unwrap_or(profile.balance_target()),
        balance_seed: o.balance_seed.unwrap_or(0),
        spec,
        lambda_grid: o.lambda_grid.clone().unwrap_or_else(|| DEFAULT_LAMBDA_GRID.to_vec()),
    }
}
