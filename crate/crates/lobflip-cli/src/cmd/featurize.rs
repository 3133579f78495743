//! `lobflip featurize` — replay event files into per-session labeled
//! feature CSVs plus the layout manifest models later verify against.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use lobflip::features::DEFAULT_FLOW_WINDOW;
use lobflip::pipeline::{
    label_observations, replay_session, write_features_csv, write_layout_manifest,
};

use crate::cmd::load_config;
use crate::files::read_event_sessions;
use crate::manifest::{verify_upstream, RunManifest};

pub const LAYOUT_NAME: &str = "layout.json";

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Directory holding events_sNN files (from `simulate` or external).
    #[arg(long)]
    pub events: PathBuf,
    /// Output directory for features_sNN.csv, layout.json, and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON config; omitted fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Market-order flow window length in events.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeConfig {
    pub window_length: usize,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig { window_length: DEFAULT_FLOW_WINDOW }
    }
}

pub fn run(args: FeaturizeArgs) -> Result<()> {
    let mut cfg: FeaturizeConfig = load_config(&args.config)?;
    if let Some(v) = args.window {
        cfg.window_length = v;
    }

    verify_upstream(&args.events)?;
    let (paths, sessions) = read_event_sessions(&args.events)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let mut manifest = RunManifest::new("featurize", &cfg)?;
    for path in &paths {
        manifest.record_input(path)?;
    }
    for (i, events) in sessions.iter().enumerate() {
        let replay = replay_session(events, i as u32, cfg.window_length)
            .with_context(|| format!("replaying {}", paths[i].display()))?;
        let rows = label_observations(&replay.observations);
        let name = format!("features_s{i:02}.csv");
        write_features_csv(&args.out.join(&name), &rows)
            .with_context(|| format!("writing {name}"))?;
        manifest.record_output(&args.out, &name)?;
        log::info!(
            "session {i}: {} events -> {} rows ({} one-sided groups skipped)",
            events.len(),
            rows.len(),
            replay.skipped_groups
        );
    }
    write_layout_manifest(&args.out.join(LAYOUT_NAME), cfg.window_length)
        .context("writing layout manifest")?;
    manifest.record_output(&args.out, LAYOUT_NAME)?;
    manifest.write(&args.out)?;
    log::info!("featurized {} sessions into {}", sessions.len(), args.out.display());
    Ok(())
}
