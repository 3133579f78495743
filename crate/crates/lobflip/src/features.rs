//! Spatio-temporal feature extraction.
//!
//! Each book observation becomes a 32-entry vector: five levels of relative
//! prices, depths and resting-order counts on both sides, plus two order-flow
//! ratios built from a rolling window of recent market orders. The layout is
//! frozen by index and described by a manifest that downstream consumers
//! verify by hash.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::market_data::{BookSnapshot, EventKind, HalfTicks, LobEvent, Side, BOOK_DEPTH};

/// Number of features per observation.
pub const N_FEATURES: usize = 32;

/// Default rolling-window length for the order-flow ratios, in observations.
pub const DEFAULT_FLOW_WINDOW: usize = 50;

/// Index of the buy-flow ratio feature.
pub const IDX_BUY_FLOW: usize = 30;
/// Index of the sell-flow ratio feature.
pub const IDX_SELL_FLOW: usize = 31;

pub type FeatureVector = [f64; N_FEATURES];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("standardization requires at least 2 rows, got {0}")]
    InsufficientRows(usize),
}

/// Canonical feature names in layout order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_FEATURES);
    for side in ["bid", "ask"] {
        for i in 1..=BOOK_DEPTH {
            names.push(format!("{side}_px_rel_{i}"));
        }
    }
    for side in ["bid", "ask"] {
        for i in 1..=BOOK_DEPTH {
            names.push(format!("{side}_depth_{i}"));
        }
    }
    for side in ["bid", "ask"] {
        for i in 1..=BOOK_DEPTH {
            names.push(format!("{side}_count_{i}"));
        }
    }
    names.push("buy_flow_ratio".into());
    names.push("sell_flow_ratio".into());
    names
}

/// Rolling counts of market orders by aggressor side over the last
/// `window_length` book observations. One observation may contain several
/// events; counts reset at session boundaries by constructing a new window.
#[derive(Debug, Clone)]
pub struct FlowWindow {
    window_length: usize,
    slots: VecDeque<(u32, u32)>,
    buy_total: u64,
    sell_total: u64,
}

impl FlowWindow {
    pub fn new(window_length: usize) -> Self {
        assert!(window_length > 0, "window length must be positive");
        FlowWindow {
            window_length,
            slots: VecDeque::with_capacity(window_length + 1),
            buy_total: 0,
            sell_total: 0,
        }
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    /// Advance the window by one observation slot, counting the market
    /// orders (by aggressor side) that formed this observation.
    pub fn update(&mut self, events_since_last_update: &[LobEvent]) {
        let mut buys = 0u32;
        let mut sells = 0u32;
        for e in events_since_last_update {
            if e.kind == EventKind::MarketOrder {
                match e.side {
                    Side::Bid => buys += 1,
                    Side::Ask => sells += 1,
                }
            }
        }
        self.slots.push_back((buys, sells));
        self.buy_total += buys as u64;
        self.sell_total += sells as u64;
        while self.slots.len() > self.window_length {
            let (b, s) = self.slots.pop_front().expect("nonempty");
            self.buy_total -= b as u64;
            self.sell_total -= s as u64;
        }
    }

    pub fn buy_count(&self) -> u64 {
        self.buy_total
    }

    pub fn sell_count(&self) -> u64 {
        self.sell_total
    }
}

/// Order-flow ratio: market orders over the window divided by resting
/// top-of-book depth on the attacked side, with the denominator clamped at 1.
#[inline]
pub fn flow_ratio(market_orders: u64, top_depth: u32) -> f64 {
    market_orders as f64 / top_depth.max(1) as f64
}

/// Extract the 32-entry feature vector for one observation.
///
/// Prices are encoded relative to `reference_mid` in ticks; depths and
/// counts are raw. Missing deeper levels are padded with zero depth/count at
/// prices extending one tick per slot beyond the deepest quoted level.
pub fn extract(book: &BookSnapshot, flow: &FlowWindow, reference_mid: HalfTicks) -> FeatureVector {
    let mut out = [0.0; N_FEATURES];
    let mid_ticks = reference_mid.to_ticks();

    fill_side(&book.bids, Side::Bid, mid_ticks, &mut out);
    fill_side(&book.asks, Side::Ask, mid_ticks, &mut out);

    let ask_top = book.best_ask().map(|l| l.depth).unwrap_or(0);
    let bid_top = book.best_bid().map(|l| l.depth).unwrap_or(0);
    out[IDX_BUY_FLOW] = flow_ratio(flow.buy_count(), ask_top);
    out[IDX_SELL_FLOW] = flow_ratio(flow.sell_count(), bid_top);
    out
}

fn fill_side(levels: &[crate::market_data::Level], side: Side, mid_ticks: f64, out: &mut FeatureVector) {
    let (px_base, depth_base, count_base, pad_dir) = match side {
        Side::Bid => (0, 10, 20, -1.0),
        Side::Ask => (5, 15, 25, 1.0),
    };
    let deepest = levels.last().map(|l| l.price.0 as f64);
    for i in 0..BOOK_DEPTH {
        match levels.get(i) {
            Some(l) => {
                out[px_base + i] = l.price.0 as f64 - mid_ticks;
                out[depth_base + i] = l.depth as f64;
                out[count_base + i] = l.count as f64;
            }
            None => {
                // Vacant slot: extend the price ladder, zero size.
                let base = deepest.unwrap_or(mid_ticks);
                let steps = (i + 1 - levels.len()) as f64;
                out[px_base + i] = base + pad_dir * steps - mid_ticks;
                out[depth_base + i] = 0.0;
                out[count_base + i] = 0.0;
            }
        }
    }
}

/// Per-feature shift/scale fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Scale floor guarding against degenerate (constant) columns.
pub const SCALE_FLOOR: f64 = 1e-8;

/// Fit a z-score standardization: shift = column mean, scale = column
/// standard deviation floored at [`SCALE_FLOOR`].
pub fn standardize(train_rows: &[FeatureVector]) -> Result<Standardization, FeatureError> {
    let n = train_rows.len();
    if n < 2 {
        return Err(FeatureError::InsufficientRows(n));
    }
    let nf = n as f64;
    let mut shift = vec![0.0; N_FEATURES];
    for row in train_rows {
        for (s, v) in shift.iter_mut().zip(row.iter()) {
            *s += v;
        }
    }
    for s in &mut shift {
        *s /= nf;
    }
    let mut scale = vec![0.0; N_FEATURES];
    for row in train_rows {
        for (j, v) in row.iter().enumerate() {
            let d = v - shift[j];
            scale[j] += d * d;
        }
    }
    for s in &mut scale {
        *s = (*s / nf).sqrt().max(SCALE_FLOOR);
    }
    Ok(Standardization { shift, scale })
}

impl Standardization {
    pub fn apply(&self, row: &FeatureVector) -> FeatureVector {
        let mut out = *row;
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, row: &mut FeatureVector) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - self.shift[j]) / self.scale[j];
        }
    }
}

/// Manifest written alongside feature datasets; the hash freezes the
/// feature layout and flow-window length so that models refuse data with a
/// different geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutManifest {
    pub feature_names: Vec<String>,
    pub window_length: usize,
    pub layout_hash: String,
}

impl LayoutManifest {
    pub fn new(window_length: usize) -> Self {
        let feature_names = feature_names();
        let layout_hash = layout_hash(&feature_names, window_length);
        LayoutManifest { feature_names, window_length, layout_hash }
    }

    /// Recompute the hash from the listed names and verify it matches.
    pub fn verify(&self) -> bool {
        self.layout_hash == layout_hash(&self.feature_names, self.window_length)
    }
}

pub fn layout_hash(names: &[String], window_length: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(names.join(",").as_bytes());
    hasher.update(format!(";window={window_length}").as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
