//! Synthetic limit-order-book session generator.
//!
//! Events are drawn from competing exponential clocks (limit adds per slot,
//! depth-proportional cancels, market orders). Mid-price flips are injected
//! as atomic three-event bundles sharing one timestamp: a market order that
//! clears the touched best level, a refill one tick beyond the previous
//! fifth level, and an improving add on the opposite side that restores the
//! one-tick spread.
//!
//! Predictability lives in the recent order flow. Ordinary market-order
//! sides follow a logistic in the top-of-book imbalance. Flips ignite
//! preferentially after bursts of market-order volume: their occurrence
//! odds grow with the magnitude of the net signed volume of the last
//! `flow_memory` generation steps, and their direction follows its sign
//! plus the book imbalance. A sequence model spanning those steps can
//! resolve both effects; a single-step snapshot largely cannot. All
//! couplings scale with `imbalance_coupling`, which tunes predictability
//! from none (0.0) upward.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::{apply_event, BookSnapshot, EventKind, LobEvent, PriceTicks, Side};
use crate::math::sigmoid;

/// Quiet gap inserted between consecutive sessions.
pub const SESSION_GAP_NS: i64 = 3_600_000_000_000;

/// Tick index the best bid is seeded at in every session.
pub const BASE_PRICE_TICKS: i64 = 4_000;

/// Logistic gain applied to the top-of-book imbalance in flip direction.
const IMBALANCE_GAIN: f64 = 0.9;

/// Weaker imbalance gain for ordinary market-order sides.
const MO_IMBALANCE_GAIN: f64 = 0.8;

/// Market orders are at least this much larger than limit orders, making
/// their depth signature distinct from add/cancel noise.
const MO_SIZE_OFFSET: u32 = 3;

/// Net signed market-order volume is squashed by `tanh(v / scale)` before
/// entering the flip-direction logit.
const FLOW_VOLUME_SCALE: f64 = 10.0;

/// Flip occurrence multiplier is `BASE + coupling * IGNITE * |flow|`:
/// quiet tape suppresses flips, directional bursts ignite them.
const FLIP_OCC_BASE: f64 = 0.4;
const FLIP_OCC_IGNITE: f64 = 2.4;

/// Deeper seed levels are thicker by this fraction per slot.
const SEED_DEPTH_SLOPE: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    /// Events generated per session (bundle members each count).
    pub n_events: usize,
    /// Limit-add rate per second for each depth slot, identical both sides.
    pub limit_arrival_rate: [f64; 5],
    /// Cancel rate per second per resting unit beyond the last at a level.
    pub cancel_rate: f64,
    /// Market-order arrival rate per second (both sides combined).
    pub market_order_base_rate: f64,
    /// Predictability dial in `[0, 1]`; 0 makes flow direction a fair coin.
    pub imbalance_coupling: f64,
    pub mean_order_size: f64,
    /// Depth a freshly seeded or refilled queue starts near.
    pub initial_depth: u32,
    pub sessions: usize,
    /// Per-session compounding scale on taker-side intensities (market
    /// orders and cancels) and on order sizes and queue depths; shifts the
    /// flow mix and the book's scale regime across sessions.
    pub regime_drift: f64,
    /// Base probability that a generation step emits a flip bundle; the
    /// realized odds rise and fall with recent flow magnitude.
    pub flip_probability: f64,
    /// How many recent generation steps of market-order flow steer flip
    /// direction.
    pub flow_memory: usize,
    /// Logistic gain applied to the squashed net signed flow volume.
    pub flow_memory_coupling: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            n_events: 50_000,
            limit_arrival_rate: [6.0, 1.2, 0.8, 0.55, 0.45],
            cancel_rate: 0.05,
            market_order_base_rate: 18.0,
            imbalance_coupling: 0.8,
            mean_order_size: 3.0,
            initial_depth: 30,
            sessions: 4,
            regime_drift: 0.0,
            flip_probability: 0.015,
            flow_memory: 5,
            flow_memory_coupling: 8.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.sessions == 0 {
            return bad("sessions must be at least 1".into());
        }
        for (i, &r) in self.limit_arrival_rate.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return bad(format!("limit_arrival_rate[{i}] = {r} must be finite and >= 0"));
            }
        }
        if !(self.cancel_rate.is_finite() && self.cancel_rate >= 0.0) {
            return bad(format!("cancel_rate = {} must be finite and >= 0", self.cancel_rate));
        }
        if !(self.market_order_base_rate.is_finite() && self.market_order_base_rate >= 0.0) {
            return bad(format!(
                "market_order_base_rate = {} must be finite and >= 0",
                self.market_order_base_rate
            ));
        }
        let slow = self.limit_arrival_rate.iter().sum::<f64>() + self.market_order_base_rate;
        if slow <= 0.0 {
            return bad("at least one arrival rate must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.imbalance_coupling) {
            return bad(format!("imbalance_coupling = {} outside [0, 1]", self.imbalance_coupling));
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return bad(format!("flip_probability = {} outside [0, 1]", self.flip_probability));
        }
        if !(self.mean_order_size.is_finite() && self.mean_order_size >= 1.0) {
            return bad(format!("mean_order_size = {} must be >= 1", self.mean_order_size));
        }
        if self.initial_depth < 2 {
            return bad(format!("initial_depth = {} must be at least 2", self.initial_depth));
        }
        if !(self.flow_memory_coupling.is_finite() && self.flow_memory_coupling >= 0.0) {
            return bad(format!(
                "flow_memory_coupling = {} must be finite and >= 0",
                self.flow_memory_coupling
            ));
        }
        if !(self.regime_drift.is_finite() && self.regime_drift > -1.0) {
            return bad(format!("regime_drift = {} must be > -1", self.regime_drift));
        }
        Ok(())
    }
}

/// Generate all sessions. Timestamps increase globally: each session starts
/// one [`SESSION_GAP_NS`] after the previous session's last event.
pub fn simulate(config: &SimConfig) -> Result<Vec<Vec<LobEvent>>, SimError> {
    config.validate()?;
    let mut sessions = Vec::with_capacity(config.sessions);
    let mut start_ns = 0i64;
    for s in 0..config.sessions {
        let events = simulate_session(config, s, start_ns);
        start_ns = events.last().map(|e| e.timestamp_ns).unwrap_or(start_ns) + SESSION_GAP_NS;
        sessions.push(events);
    }
    Ok(sessions)
}

fn simulate_session(config: &SimConfig, session_index: usize, start_ns: i64) -> Vec<LobEvent> {
    if config.n_events == 0 {
        return Vec::new();
    }
    let mut st = SessionState::new(config, session_index, start_ns);
    st.seed_book();
    while st.events.len() < config.n_events {
        let remaining = config.n_events - st.events.len();
        st.step(remaining);
    }
    st.events.truncate(config.n_events);
    st.events
}

struct SessionState<'a> {
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    book: BookSnapshot,
    /// Signed market-order volume per recent generation step, newest last;
    /// positive for buys, zero for steps without a market order.
    flow: VecDeque<f64>,
    /// Signed volume of the market order emitted by the step in progress.
    pending_flow: f64,
    t_ns: i64,
    /// Compounded regime scale for this session; multiplies the taker-side
    /// intensities (market orders and cancels) and the size scale.
    drift: f64,
    events: Vec<LobEvent>,
}

impl<'a> SessionState<'a> {
    fn new(cfg: &'a SimConfig, session_index: usize, start_ns: i64) -> Self {
        let salt = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(session_index as u64 + 1);
        SessionState {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ salt),
            book: BookSnapshot::empty(start_ns),
            flow: VecDeque::new(),
            pending_flow: 0.0,
            t_ns: start_ns,
            drift: (1.0 + cfg.regime_drift).powi(session_index as i32),
            events: Vec::with_capacity(cfg.n_events),
        }
    }

    fn mean_size(&self) -> f64 {
        self.cfg.mean_order_size * self.drift
    }

    fn queue_base(&self) -> f64 {
        self.cfg.initial_depth as f64 * self.drift
    }

    /// Geometric order size with the configured (drift-scaled) mean.
    fn sample_size(&mut self) -> u32 {
        let mean = self.mean_size();
        if mean <= 1.0 {
            return 1;
        }
        let p = 1.0 / mean;
        let u: f64 = self.rng.random();
        let k = 1.0 + ((1.0 - u).ln() / (1.0 - p).ln()).floor();
        (k as u32).clamp(1, (mean * 8.0) as u32 + 1)
    }

    /// Depth for a fresh queue: `initial_depth` with +-25% jitter.
    fn fresh_queue_depth(&mut self) -> u32 {
        let u: f64 = self.rng.random();
        ((self.queue_base() * (0.75 + 0.5 * u)).round() as u32).max(1)
    }

    /// Resting-order count to report for a queue of `depth` units.
    fn orders_for(&self, depth: u32) -> i32 {
        let n = (depth as f64 / self.mean_size()).round() as i32;
        n.clamp(1, depth.max(1) as i32)
    }

    fn push(&mut self, kind: EventKind, side: Side, price: PriceTicks, quantity: u32, count_delta: i32) {
        let event = LobEvent { timestamp_ns: self.t_ns, kind, side, price, quantity, count_delta };
        self.book = apply_event(&self.book, &event)
            .unwrap_or_else(|e| panic!("simulator generated invalid event: {e}"));
        self.events.push(event);
    }

    fn record_flow(&mut self, aggressor: Side, quantity: u32) {
        let sign = if aggressor == Side::Bid { 1.0 } else { -1.0 };
        self.pending_flow += sign * quantity as f64;
    }

    /// Net signed market-order volume over the remembered steps, squashed
    /// to (-1, 1). The squash scale follows the regime size scale so label
    /// predictability stays constant across drifting sessions.
    fn flow_signal(&self) -> f64 {
        let net: f64 = self.flow.iter().sum();
        (net / (FLOW_VOLUME_SCALE * self.drift)).tanh()
    }

    fn imbalance(&self) -> f64 {
        match (self.book.best_bid(), self.book.best_ask()) {
            (Some(b), Some(a)) => {
                let (db, da) = (b.depth as f64, a.depth as f64);
                (db - da) / (db + da)
            }
            _ => 0.0,
        }
    }

    /// Probability an ordinary market order is buyer-initiated: imbalance
    /// only, so non-flip flow carries no memory of its own.
    fn mo_buy_probability(&self) -> f64 {
        sigmoid(self.cfg.imbalance_coupling * MO_IMBALANCE_GAIN * self.imbalance())
    }

    /// Probability this step starts a flip bundle: the configured base rate
    /// modulated by recent flow magnitude (momentum ignition).
    fn flip_probability_now(&self) -> f64 {
        let mult = FLIP_OCC_BASE
            + self.cfg.imbalance_coupling * FLIP_OCC_IGNITE * self.flow_signal().abs();
        (self.cfg.flip_probability * mult).min(1.0)
    }

    /// Probability a flip is buyer-initiated (mid moves up): imbalance plus
    /// the recent-flow term.
    fn flip_buy_probability(&self) -> f64 {
        let logit = self.cfg.imbalance_coupling
            * (IMBALANCE_GAIN * self.imbalance()
                + self.cfg.flow_memory_coupling * self.flow_signal());
        sigmoid(logit)
    }

    /// Ten seeding adds at the session's first timestamp: five contiguous
    /// levels per side around [`BASE_PRICE_TICKS`], interleaved bid/ask.
    fn seed_book(&mut self) {
        for slot in 0..5u32 {
            for side in [Side::Bid, Side::Ask] {
                if self.events.len() >= self.cfg.n_events {
                    return;
                }
                let price = match side {
                    Side::Bid => PriceTicks(BASE_PRICE_TICKS - slot as i64),
                    Side::Ask => PriceTicks(BASE_PRICE_TICKS + 1 + slot as i64),
                };
                let depth = ((self.queue_base() * (1.0 + SEED_DEPTH_SLOPE * slot as f64)).round()
                    as u32)
                    .max(1);
                let count = self.orders_for(depth);
                self.push(EventKind::LimitAdd, side, price, depth, count);
            }
        }
    }

    /// Advance the clock by one exponential inter-arrival, emit either a
    /// flip bundle (three events) or a single flow event, and append this
    /// step's net signed market-order volume to the flow memory. Bundles
    /// are only started when they fit inside the session's event budget.
    fn step(&mut self, remaining: usize) {
        self.pending_flow = 0.0;
        self.dispatch(remaining);
        if self.cfg.flow_memory > 0 {
            self.flow.push_back(self.pending_flow);
            while self.flow.len() > self.cfg.flow_memory {
                self.flow.pop_front();
            }
        }
    }

    fn dispatch(&mut self, remaining: usize) {
        let cancel_rates = self.cancel_rates();
        let cancel_total: f64 = cancel_rates.iter().map(|&(_, _, r)| r).sum();
        let add_total: f64 = 2.0 * self.cfg.limit_arrival_rate.iter().sum::<f64>();
        let total = add_total + cancel_total + self.cfg.market_order_base_rate * self.drift;
        let u: f64 = self.rng.random();
        let dt_s = -(1.0 - u).ln() / total;
        self.t_ns += ((dt_s * 1e9).ceil() as i64).max(1);

        if remaining >= 3 && self.rng.random::<f64>() < self.flip_probability_now() {
            self.emit_flip();
            return;
        }

        let mut r = self.rng.random::<f64>() * total;
        for side in [Side::Bid, Side::Ask] {
            for slot in 0..5usize {
                r -= self.cfg.limit_arrival_rate[slot];
                if r < 0.0 {
                    self.emit_add(side, slot);
                    return;
                }
            }
        }
        for &(side, idx, rate) in &cancel_rates {
            r -= rate;
            if r < 0.0 {
                self.emit_cancel(side, idx);
                return;
            }
        }
        self.emit_market_order();
    }

    fn cancel_rates(&self) -> Vec<(Side, usize, f64)> {
        let mut rates = Vec::with_capacity(10);
        for side in [Side::Bid, Side::Ask] {
            let levels = match side {
                Side::Bid => &self.book.bids,
                Side::Ask => &self.book.asks,
            };
            for (idx, level) in levels.iter().enumerate() {
                let excess = level.depth.saturating_sub(1);
                if excess > 0 {
                    rates.push((side, idx, self.cfg.cancel_rate * self.drift * excess as f64));
                }
            }
        }
        rates
    }

    /// Join (or deepen) the queue `slot` ticks behind the side's best price.
    fn emit_add(&mut self, side: Side, slot: usize) {
        let best = match side {
            Side::Bid => self.book.best_bid(),
            Side::Ask => self.book.best_ask(),
        };
        let Some(best) = best else { return };
        let price = match side {
            Side::Bid => best.price.offset(-(slot as i64)),
            Side::Ask => best.price.offset(slot as i64),
        };
        let qty = self.sample_size();
        self.push(EventKind::LimitAdd, side, price, qty, 1);
    }

    fn emit_cancel(&mut self, side: Side, idx: usize) {
        let levels = match side {
            Side::Bid => &self.book.bids,
            Side::Ask => &self.book.asks,
        };
        let Some(level) = levels.get(idx) else { return };
        let price = level.price;
        let count_delta = if level.count > 1 { -1 } else { 0 };
        self.push(EventKind::LimitCancel, side, price, 1, count_delta);
    }

    /// Non-flip market order: eats into the opposite best queue but never
    /// clears it. Against a single resting unit it becomes a replenishing
    /// add instead.
    fn emit_market_order(&mut self) {
        let aggressor =
            if self.rng.random::<f64>() < self.mo_buy_probability() { Side::Bid } else { Side::Ask };
        let resting = match aggressor {
            Side::Bid => self.book.best_ask(),
            Side::Ask => self.book.best_bid(),
        };
        let Some(resting) = resting else { return };
        let (price, depth) = (resting.price, resting.depth);
        if depth <= 1 {
            let qty = self.sample_size();
            self.push(EventKind::LimitAdd, aggressor.opposite(), price, qty, 1);
            return;
        }
        let qty = (MO_SIZE_OFFSET + self.sample_size()).min(depth - 1);
        self.push(EventKind::MarketOrder, aggressor, price, qty, 0);
        self.record_flow(aggressor, qty);
    }

    /// Atomic flip bundle: clear the touched best level, refill the far end
    /// of that side's ladder, and improve the aggressor's own side into the
    /// vacated tick so the spread returns to one.
    fn emit_flip(&mut self) {
        let aggressor =
            if self.rng.random::<f64>() < self.flip_buy_probability() { Side::Bid } else { Side::Ask };
        let resting_side = aggressor.opposite();
        let resting_levels = match resting_side {
            Side::Bid => &self.book.bids,
            Side::Ask => &self.book.asks,
        };
        let (Some(best), Some(last)) = (resting_levels.first(), resting_levels.last()) else {
            return;
        };
        let eaten_price = best.price;
        let eaten_qty = best.depth;
        let refill_price = match resting_side {
            Side::Bid => last.price.offset(-1),
            Side::Ask => last.price.offset(1),
        };
        self.push(EventKind::MarketOrder, aggressor, eaten_price, eaten_qty, 0);
        self.record_flow(aggressor, eaten_qty);
        let refill_qty = self.fresh_queue_depth();
        let refill_count = self.orders_for(refill_qty);
        self.push(EventKind::LimitAdd, resting_side, refill_price, refill_qty, refill_count);
        let improve_qty = self.fresh_queue_depth();
        let improve_count = self.orders_for(improve_qty);
        self.push(EventKind::LimitAdd, aggressor, eaten_price, improve_qty, improve_count);
    }
}
