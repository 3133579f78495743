//! `lobflip simulate` — generate synthetic sessions and write one event
//! file per session.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use lobflip::market_data::{write_events_csv, write_events_jsonl};
use lobflip::simulator::{simulate, SimConfig};

use crate::cmd::load_config;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventFileFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory for events_sNN files and the run manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON simulator config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Event file format.
    #[arg(long, value_enum, default_value_t = EventFileFormat::Csv)]
    pub format: EventFileFormat,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Events per session.
    #[arg(long)]
    pub n_events: Option<usize>,
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Predictability dial in [0, 1].
    #[arg(long)]
    pub imbalance_coupling: Option<f64>,
    /// Per-session compounding drift on taker intensities and sizes.
    #[arg(long)]
    pub regime_drift: Option<f64>,
    /// Base probability that a generation step emits a flip bundle.
    #[arg(long)]
    pub flip_probability: Option<f64>,
}

#[derive(Serialize)]
struct Effective {
    sim: SimConfig,
    format: EventFileFormat,
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let mut cfg: SimConfig = load_config(&args.config)?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.n_events {
        cfg.n_events = v;
    }
    if let Some(v) = args.sessions {
        cfg.sessions = v;
    }
    if let Some(v) = args.imbalance_coupling {
        cfg.imbalance_coupling = v;
    }
    if let Some(v) = args.regime_drift {
        cfg.regime_drift = v;
    }
    if let Some(v) = args.flip_probability {
        cfg.flip_probability = v;
    }

    let sessions = simulate(&cfg).context("simulation failed")?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let mut manifest =
        RunManifest::new("simulate", &Effective { sim: cfg.clone(), format: args.format })?;
    for (i, events) in sessions.iter().enumerate() {
        let ext = match args.format {
            EventFileFormat::Csv => "csv",
            EventFileFormat::Jsonl => "jsonl",
        };
        let name = format!("events_s{i:02}.{ext}");
        {
            let file = fs::File::create(args.out.join(&name))
                .with_context(|| format!("creating {name}"))?;
            let mut writer = BufWriter::new(file);
            match args.format {
                EventFileFormat::Csv => write_events_csv(&mut writer, events)?,
                EventFileFormat::Jsonl => write_events_jsonl(&mut writer, events)?,
            }
            writer.flush().with_context(|| format!("flushing {name}"))?;
        }
        manifest.record_output(&args.out, &name)?;
        log::info!("session {i}: {} events -> {name}", events.len());
    }
    manifest.write(&args.out)?;
    log::info!(
        "simulated {} sessions x {} events (seed {}) into {}",
        cfg.sessions,
        cfg.n_events,
        cfg.seed,
        args.out.display()
    );
    Ok(())
}
