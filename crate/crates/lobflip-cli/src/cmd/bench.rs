//! `lobflip bench` — single-prediction latency of a saved (or freshly
//! initialized) model. Prints the report to stdout; timings are inherently
//! non-deterministic, so nothing is written to disk.

use std::hint::black_box;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use lobflip::baselines::white_noise_predict;
use lobflip::eval::studies::TrainedModel;
use lobflip::math::Mat;
use lobflip::rnn::{self, RnnDims, RnnModel};

use crate::cmd::load_config;
use crate::model::load_model;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model file to time; defaults to a freshly initialized RNN at the
    /// reference dimensions (T=10, P=32, H=20, K=3).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Timed iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Warm-up iterations before timing starts.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Input-generation (and default-model) seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sequence length for the default model.
    #[arg(long)]
    pub t_steps: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub iters: usize,
    pub warmup: usize,
    pub seed: u64,
    pub t_steps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { iters: 100_000, warmup: 1_000, seed: 42, t_steps: 10 }
    }
}

/// Deterministic input pool so the timed loop never touches the RNG.
fn input_pool(n: usize, t_steps: usize, p: usize, seed: u64) -> Vec<Mat> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..t_steps)
                .map(|_| (0..p).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect())
                .collect();
            Mat::from_rows(rows)
        })
        .collect()
}

fn time_loop(
    pool: &[Mat],
    iters: usize,
    warmup: usize,
    mut predict: impl FnMut(&Mat) -> [f64; 3],
) -> Vec<u64> {
    for i in 0..warmup {
        black_box(predict(&pool[i % pool.len()]));
    }
    let mut durations = Vec::with_capacity(iters);
    for i in 0..iters {
        let x = &pool[i % pool.len()];
        let start = Instant::now();
        black_box(predict(black_box(x)));
        durations.push(start.elapsed().as_nanos() as u64);
    }
    durations
}

pub fn run(args: BenchArgs) -> Result<()> {
    let mut cfg: BenchConfig = load_config(&args.config)?;
    if let Some(v) = args.iters {
        cfg.iters = v;
    }
    if let Some(v) = args.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.t_steps {
        cfg.t_steps = v;
    }
    if cfg.iters == 0 {
        bail!("iters must be positive");
    }
    if cfg.iters < 100_000 {
        log::warn!("{} iterations is below the 1e5 the standard report uses", cfg.iters);
    }

    let (trained, kind, t_steps, p) = match &args.model {
        Some(path) => {
            let loaded = load_model(path).context("loading the model to bench")?;
            let p = loaded.n_features.unwrap_or(32);
            (loaded.trained, loaded.kind, loaded.t_steps, p)
        }
        None => {
            let dims = RnnDims { p: 32, h: 20, k: 3 };
            let model = RnnModel::glorot_init(dims, cfg.seed);
            (TrainedModel::Rnn(model), "rnn", cfg.t_steps, dims.p)
        }
    };
    let pool = input_pool(256, t_steps, p, cfg.seed);

    let mut durations = match &trained {
        TrainedModel::Rnn(m) => time_loop(&pool, cfg.iters, cfg.warmup, |x| {
            let probs = rnn::predict_proba(m, x).expect("well-formed model");
            [probs[0], probs[1], probs[2]]
        }),
        TrainedModel::Ffwd(net) => {
            time_loop(&pool, cfg.iters, cfg.warmup, |x| net.predict_proba(x))
        }
        TrainedModel::Logistic(m) => {
            time_loop(&pool, cfg.iters, cfg.warmup, |x| m.predict_proba(x))
        }
        TrainedModel::White { seed } => {
            let mut counter = 0u64;
            let seed = *seed;
            time_loop(&pool, cfg.iters, cfg.warmup, move |_| {
                counter += 1;
                white_noise_predict(seed.wrapping_add(counter), 1)[0].1
            })
        }
    };
    durations.sort_unstable();
    let pick = |q: f64| durations[(((durations.len() - 1) as f64) * q) as usize];
    let mean = durations.iter().sum::<u64>() as f64 / durations.len() as f64;

    println!("bench model={kind} t_steps={t_steps} p={p} iters={} warmup={}", cfg.iters, cfg.warmup);
    println!("median_ns={}", pick(0.5));
    println!("p99_ns={}", pick(0.99));
    println!("mean_ns={mean:.1}");
    println!("min_ns={}", durations[0]);
    println!("max_ns={}", durations[durations.len() - 1]);
    Ok(())
}
