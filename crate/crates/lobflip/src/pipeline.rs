//! End-to-end plumbing: replay event streams into per-observation feature
//! rows, attach labels, and persist feature datasets.
//!
//! Events sharing one timestamp form a single observation (exchange
//! feeds batch the legs of one matching action at one stamp), so replay
//! emits a feature row only after each timestamp group.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{label_next_event, Label, LabeledRow};
use crate::features::{extract, FeatureVector, FlowWindow, LayoutManifest, N_FEATURES};
use crate::market_data::{apply_event, mid_price, BookError, BookSnapshot, HalfTicks, LobEvent};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("replay error at event {index}: {source}")]
    Replay { index: usize, source: BookError },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed feature row at line {line}: {message}")]
    MalformedFeatureRow { line: usize, message: String },
    #[error("bad features header: expected {expected:?}, got {found:?}")]
    BadFeaturesHeader { expected: String, found: String },
}

/// One feature row plus the book mid it was taken at (labels come later).
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub session_id: u32,
    pub timestamp_ns: i64,
    pub features: FeatureVector,
    pub mid: HalfTicks,
}

#[derive(Debug)]
pub struct SessionReplay {
    pub observations: Vec<Observation>,
    pub final_book: BookSnapshot,
    /// Timestamp groups that left the book one-sided (no mid, no row).
    pub skipped_groups: usize,
}

/// Replay one session's events from an empty book. The stream is expected
/// to open with a book-building preamble (the simulator seeds all ten
/// levels at the first timestamp); feature rows start once both sides are
/// quoted.
pub fn replay_session(
    events: &[LobEvent],
    session_id: u32,
    window_length: usize,
) -> Result<SessionReplay, PipelineError> {
    let mut book = BookSnapshot::empty(events.first().map_or(0, |e| e.timestamp_ns));
    let mut flow = FlowWindow::new(window_length);
    let mut observations = Vec::new();
    let mut skipped_groups = 0;
    let mut i = 0;
    while i < events.len() {
        let ts = events[i].timestamp_ns;
        let group_start = i;
        while i < events.len() && events[i].timestamp_ns == ts {
            book = apply_event(&book, &events[i])
                .map_err(|source| PipelineError::Replay { index: i, source })?;
            i += 1;
        }
        flow.update(&events[group_start..i]);
        match mid_price(&book) {
            Ok(mid) => observations.push(Observation {
                session_id,
                timestamp_ns: ts,
                features: extract(&book, &flow, mid),
                mid,
            }),
            Err(_) => skipped_groups += 1,
        }
    }
    Ok(SessionReplay { observations, final_book: book, skipped_groups })
}

/// Next-event labels: row i gets the sign of mid_{i+1} − mid_i; the final
/// observation of the session has no successor and is dropped.
pub fn label_observations(observations: &[Observation]) -> Vec<LabeledRow> {
    observations
        .windows(2)
        .map(|w| LabeledRow {
            session_id: w[0].session_id,
            timestamp_ns: w[0].timestamp_ns,
            features: w[0].features,
            label: label_next_event(w[0].mid, w[1].mid),
        })
        .collect()
}

/// Fixed-horizon labels; returns the rows plus the count of observations
/// dropped because their horizon crossed the session end.
pub fn label_observations_horizon(
    observations: &[Observation],
    horizon_ns: i64,
) -> (Vec<LabeledRow>, usize) {
    let mids: Vec<(i64, HalfTicks)> =
        observations.iter().map(|o| (o.timestamp_ns, o.mid)).collect();
    let mut rows = Vec::new();
    let mut dropped = 0;
    for (i, o) in observations.iter().enumerate() {
        match crate::dataset::label_horizon(&mids, i, horizon_ns) {
            Some(label) => rows.push(LabeledRow {
                session_id: o.session_id,
                timestamp_ns: o.timestamp_ns,
                features: o.features,
                label,
            }),
            None => dropped += 1,
        }
    }
    (rows, dropped)
}

/// Replay and next-event-label a set of sessions in order, concatenating
/// the rows (session ids keep sequences from straddling boundaries).
pub fn featurize_sessions(
    sessions: &[Vec<LobEvent>],
    window_length: usize,
) -> Result<Vec<Vec<Observation>>, PipelineError> {
    sessions
        .iter()
        .enumerate()
        .map(|(i, events)| Ok(replay_session(events, i as u32, window_length)?.observations))
        .collect()
}

pub fn label_sessions(observations: &[Vec<Observation>]) -> Vec<LabeledRow> {
    observations.iter().flat_map(|o| label_observations(o)).collect()
}

pub fn features_csv_header() -> String {
    let mut h = String::from("ts_ns");
    for i in 0..N_FEATURES {
        h.push_str(&format!(",f{i}"));
    }
    h.push_str(",label");
    h
}

/// Write one session's labeled rows. Floats use the shortest decimal form
/// that round-trips, so the file is byte-stable and lossless.
pub fn write_features_csv(path: &Path, rows: &[LabeledRow]) -> Result<(), PipelineError> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{}", features_csv_header())?;
    for r in rows {
        let mut line = r.timestamp_ns.to_string();
        for v in &r.features {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        line.push(',');
        line.push_str(&r.label.to_i8().to_string());
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read one session's labeled rows; the caller assigns the session id
/// (one file per session).
pub fn read_features_csv(path: &Path, session_id: u32) -> Result<Vec<LabeledRow>, PipelineError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let expected = features_csv_header();
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != expected {
                return Err(PipelineError::BadFeaturesHeader {
                    expected,
                    found: line.trim().to_string(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_FEATURES + 2 {
            return Err(PipelineError::MalformedFeatureRow {
                line: i + 1,
                message: format!("expected {} fields, got {}", N_FEATURES + 2, fields.len()),
            });
        }
        let bad = |message: String, line: usize| PipelineError::MalformedFeatureRow { line, message };
        let timestamp_ns: i64 = fields[0]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad timestamp {:?}", fields[0]), i + 1))?;
        let mut features: FeatureVector = [0.0; N_FEATURES];
        for (j, f) in features.iter_mut().enumerate() {
            *f = fields[1 + j]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad f{j} {:?}", fields[1 + j]), i + 1))?;
            if !f.is_finite() {
                return Err(bad(format!("non-finite f{j}"), i + 1));
            }
        }
        let label_raw: i8 = fields[N_FEATURES + 1]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad label {:?}", fields[N_FEATURES + 1]), i + 1))?;
        let label = Label::from_i8(label_raw)
            .ok_or_else(|| bad(format!("label {label_raw} outside {{-1,0,1}}"), i + 1))?;
        rows.push(LabeledRow { session_id, timestamp_ns, features, label });
    }
    Ok(rows)
}

pub fn write_layout_manifest(path: &Path, window_length: usize) -> Result<(), PipelineError> {
    let manifest = LayoutManifest::new(window_length);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(path, json)?;
    Ok(())
}

pub fn read_layout_manifest(path: &Path) -> Result<LayoutManifest, PipelineError> {
    let text = fs::read_to_string(path)?;
    let manifest: LayoutManifest = serde_json::from_str(&text).map_err(|e| {
        PipelineError::MalformedFeatureRow { line: 0, message: format!("bad layout manifest: {e}") }
    })?;
    Ok(manifest)
}

/// SHA-256 of a file's bytes, lowercase hex — used in run manifests.
pub fn sha256_hex_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
