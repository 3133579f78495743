//! Directory conventions: one file per session, `events_sNN.csv` (or
//! `.jsonl`) and `features_sNN.csv`, with dense session ids assigned by
//! sorted position.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use lobflip::dataset::LabeledRow;
use lobflip::features::LayoutManifest;
use lobflip::market_data::{read_events_file, LobEvent};
use lobflip::pipeline::{read_features_csv, read_layout_manifest};

/// List `{stem}NN.csv|jsonl` files in `dir`, sorted by the numeric suffix.
pub fn session_files(dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(u32, PathBuf)> = Vec::new();
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?;
    for entry in entries {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let Some(rest) = name.strip_prefix(stem) else { continue };
        let Some(index) = rest
            .strip_suffix(".csv")
            .or_else(|| rest.strip_suffix(".jsonl"))
        else {
            continue;
        };
        let Ok(index) = index.parse::<u32>() else { continue };
        if let Some((_, other)) = found.iter().find(|(i, _)| *i == index) {
            bail!(
                "ambiguous session {index}: both {} and {} present",
                other.display(),
                path.display()
            );
        }
        found.push((index, path));
    }
    if found.is_empty() {
        bail!("no {stem}NN.csv or {stem}NN.jsonl files in {}", dir.display());
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Read every session's events; position in the sorted list is the session id.
pub fn read_event_sessions(dir: &Path) -> Result<(Vec<PathBuf>, Vec<Vec<LobEvent>>)> {
    let paths = session_files(dir, "events_s")?;
    let mut sessions = Vec::with_capacity(paths.len());
    for path in &paths {
        let events = read_events_file(path)
            .with_context(|| format!("reading events {}", path.display()))?;
        sessions.push(events);
    }
    Ok((paths, sessions))
}

/// Read every session's labeled feature rows into one flat vector.
pub fn read_feature_sessions(dir: &Path) -> Result<(Vec<PathBuf>, Vec<LabeledRow>)> {
    let paths = session_files(dir, "features_s")?;
    let mut rows = Vec::new();
    for (i, path) in paths.iter().enumerate() {
        let session = read_features_csv(path, i as u32)
            .with_context(|| format!("reading features {}", path.display()))?;
        rows.extend(session);
    }
    Ok((paths, rows))
}

/// Verify a feature directory's manifest, check its layout, and load all
/// rows. Returns (layout, feature file paths, rows).
pub fn load_feature_dir(dir: &Path) -> Result<(LayoutManifest, Vec<PathBuf>, Vec<LabeledRow>)> {
    crate::manifest::verify_upstream(dir)?;
    let layout_path = dir.join(crate::cmd::featurize::LAYOUT_NAME);
    let layout = read_layout_manifest(&layout_path)
        .with_context(|| format!("reading {}", layout_path.display()))?;
    if !layout.verify() {
        bail!("layout manifest {} fails its own hash check", layout_path.display());
    }
    let (paths, rows) = read_feature_sessions(dir)?;
    Ok((layout, paths, rows))
}
