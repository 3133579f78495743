//! Order-book event streams and five-level book replay.
//!
//! Prices are stored as integer tick counts (one tick = 0.25 index points)
//! so that book comparisons and the half-tick mid-price are exact integer
//! arithmetic; conversion to decimal happens only at I/O boundaries.

mod parse;

pub use parse::{
    parse_event_stream, read_events_file, write_events_csv, write_events_jsonl,
    write_snapshots_csv, EventFormat, ParseError,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of visible price levels per side.
pub const BOOK_DEPTH: usize = 5;

/// Index points per tick (E-mini S&P 500).
pub const TICK_POINTS: f64 = 0.25;

/// Price expressed as a signed count of minimum price increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PriceTicks(pub i64);

impl PriceTicks {
    /// Convert a decimal price to ticks, validating tick alignment.
    pub fn from_decimal(price: f64) -> Result<Self, TickError> {
        let scaled = price / TICK_POINTS;
        let rounded = scaled.round();
        if !price.is_finite() || (scaled - rounded).abs() > 1e-6 {
            return Err(TickError::OffTick(price));
        }
        Ok(PriceTicks(rounded as i64))
    }

    pub fn to_decimal(self) -> f64 {
        self.0 as f64 * TICK_POINTS
    }

    pub fn offset(self, ticks: i64) -> Self {
        PriceTicks(self.0 + ticks)
    }
}

/// Mid-price in exact half-tick units: one unit = 0.125 index points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfTicks(pub i64);

impl HalfTicks {
    pub fn to_decimal(self) -> f64 {
        self.0 as f64 * TICK_POINTS / 2.0
    }

    /// Mid-price in (possibly fractional) ticks.
    pub fn to_ticks(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

#[derive(Debug, Error)]
pub enum TickError {
    #[error("price {0} is not aligned to the 0.25 tick grid")]
    OffTick(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }

    pub fn wire_str(self) -> &'static str {
        match self {
            Side::Bid => "B",
            Side::Ask => "A",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    LimitAdd,
    LimitCancel,
    LimitModify,
    MarketOrder,
}

impl EventKind {
    pub fn wire_str(self) -> &'static str {
        match self {
            EventKind::LimitAdd => "ADD",
            EventKind::LimitCancel => "CXL",
            EventKind::LimitModify => "MOD",
            EventKind::MarketOrder => "MKT",
        }
    }
}

/// One atomic book mutation.
///
/// For `MarketOrder` the side denotes the aggressor: a `Bid` market order is
/// a buy that consumes resting asks. `count_delta` applies to the limit
/// kinds and carries the change in resting-order count at the touched level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LobEvent {
    pub timestamp_ns: i64,
    pub kind: EventKind,
    pub side: Side,
    pub price: PriceTicks,
    pub quantity: u32,
    pub count_delta: i32,
}

/// One resting price level: quoted price, total depth, resting-order count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: PriceTicks,
    pub depth: u32,
    pub count: u32,
}

/// Five-level book state at one event time. Levels are ordered best-first
/// (bids descending, asks ascending) and both vectors hold at most
/// [`BOOK_DEPTH`] entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub timestamp_ns: i64,
    pub bids: Vec<Level>,
    pub asks: Vec<Level>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BookError {
    #[error("cancel of {requested} exceeds resting depth {resting} at {price} ticks")]
    CancelExceedsDepth { price: i64, requested: u32, resting: u32 },
    #[error("market order of {requested} would consume all visible depth ({visible})")]
    MarketOrderExceedsVisibleDepth { requested: u32, visible: u64 },
    #[error("modify at {price} ticks targets an unknown price level")]
    UnknownPriceLevel { price: i64 },
    #[error("limit add at {price} ticks would cross the book")]
    WouldCrossBook { price: i64 },
    #[error("book has an empty {side:?} side")]
    EmptySide { side: Side },
    #[error("book invariant violated: {0}")]
    InvariantViolation(String),
}

impl BookSnapshot {
    pub fn empty(timestamp_ns: i64) -> Self {
        BookSnapshot { timestamp_ns, bids: Vec::new(), asks: Vec::new() }
    }

    pub fn best_bid(&self) -> Option<&Level> {
        self.bids.first()
    }

    pub fn best_ask(&self) -> Option<&Level> {
        self.asks.first()
    }

    /// Bid-ask spread in ticks.
    pub fn spread_ticks(&self) -> Option<i64> {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => Some(a.price.0 - b.price.0),
            _ => None,
        }
    }

    /// Check all book invariants: strict price ordering per side, positive
    /// spread, and depth/count consistency at every level.
    pub fn validate(&self) -> Result<(), BookError> {
        let check_side = |levels: &[Level], descending: bool| -> Result<(), BookError> {
            if levels.len() > BOOK_DEPTH {
                return Err(BookError::InvariantViolation(format!(
                    "{} levels on one side",
                    levels.len()
                )));
            }
            for w in levels.windows(2) {
                let ordered =
                    if descending { w[0].price > w[1].price } else { w[0].price < w[1].price };
                if !ordered {
                    return Err(BookError::InvariantViolation(format!(
                        "levels out of order: {} then {}",
                        w[0].price.0, w[1].price.0
                    )));
                }
            }
            for l in levels {
                if (l.depth == 0) != (l.count == 0) {
                    return Err(BookError::InvariantViolation(format!(
                        "depth {} vs count {} at {}",
                        l.depth, l.count, l.price.0
                    )));
                }
                if l.depth == 0 {
                    return Err(BookError::InvariantViolation(format!(
                        "vacant level resting in book at {}",
                        l.price.0
                    )));
                }
                if l.count > l.depth {
                    return Err(BookError::InvariantViolation(format!(
                        "count {} exceeds depth {} at {}",
                        l.count, l.depth, l.price.0
                    )));
                }
            }
            Ok(())
        };
        check_side(&self.bids, true)?;
        check_side(&self.asks, false)?;
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if a.price <= b.price {
                return Err(BookError::InvariantViolation(format!(
                    "crossed book: bid {} >= ask {}",
                    b.price.0, a.price.0
                )));
            }
        }
        Ok(())
    }
}

/// Mid-price `(p_a1 + p_b1) / 2` as an exact half-tick integer.
pub fn mid_price(book: &BookSnapshot) -> Result<HalfTicks, BookError> {
    let bid = book.best_bid().ok_or(BookError::EmptySide { side: Side::Bid })?;
    let ask = book.best_ask().ok_or(BookError::EmptySide { side: Side::Ask })?;
    // (a + b)/2 ticks == (a + b) half-ticks.
    Ok(HalfTicks(bid.price.0 + ask.price.0))
}

/// Apply one event to a book, returning the new snapshot.
///
/// Market orders consume depth from the best opposite levels in price
/// priority, deleting fully consumed levels. Limit adds insert or augment a
/// level (book truncated back to five levels). Cancels reduce depth and
/// order count; modifies set the level depth outright. The input book is
/// not mutated.
pub fn apply_event(book: &BookSnapshot, event: &LobEvent) -> Result<BookSnapshot, BookError> {
    let mut next = book.clone();
    next.timestamp_ns = event.timestamp_ns;

    match event.kind {
        EventKind::MarketOrder => {
            // A buy aggressor (Bid side) consumes asks and vice versa.
            let levels = match event.side {
                Side::Bid => &mut next.asks,
                Side::Ask => &mut next.bids,
            };
            let visible: u64 = levels.iter().map(|l| l.depth as u64).sum();
            if event.quantity as u64 >= visible {
                return Err(BookError::MarketOrderExceedsVisibleDepth {
                    requested: event.quantity,
                    visible,
                });
            }
            let mut remaining = event.quantity;
            while remaining > 0 {
                let front = &mut levels[0];
                if remaining >= front.depth {
                    remaining -= front.depth;
                    levels.remove(0);
                } else {
                    front.depth -= remaining;
                    // Partial fill: resting orders may shrink but the level
                    // keeps at least one order.
                    front.count = front.count.min(front.depth).max(1);
                    remaining = 0;
                }
            }
        }
        EventKind::LimitAdd => {
            let crossing = match event.side {
                Side::Bid => next.best_ask().map(|a| event.price >= a.price).unwrap_or(false),
                Side::Ask => next.best_bid().map(|b| event.price <= b.price).unwrap_or(false),
            };
            if crossing {
                return Err(BookError::WouldCrossBook { price: event.price.0 });
            }
            let levels = side_levels(&mut next, event.side);
            match levels.iter_mut().find(|l| l.price == event.price) {
                Some(level) => {
                    level.depth += event.quantity;
                    let count = level.count as i64 + event.count_delta as i64;
                    level.count = clamp_count(count, level.depth);
                }
                None => {
                    let count = clamp_count(event.count_delta.max(1) as i64, event.quantity);
                    levels.push(Level { price: event.price, depth: event.quantity, count });
                    sort_side(levels, event.side);
                    levels.truncate(BOOK_DEPTH);
                }
            }
        }
        EventKind::LimitCancel => {
            let levels = side_levels(&mut next, event.side);
            let idx = levels.iter().position(|l| l.price == event.price);
            let Some(idx) = idx else {
                return Err(BookError::CancelExceedsDepth {
                    price: event.price.0,
                    requested: event.quantity,
                    resting: 0,
                });
            };
            let level = &mut levels[idx];
            if event.quantity > level.depth {
                return Err(BookError::CancelExceedsDepth {
                    price: event.price.0,
                    requested: event.quantity,
                    resting: level.depth,
                });
            }
            if event.quantity == level.depth {
                levels.remove(idx);
            } else {
                level.depth -= event.quantity;
                let count = level.count as i64 + event.count_delta as i64;
                level.count = clamp_count(count, level.depth);
            }
        }
        EventKind::LimitModify => {
            let levels = side_levels(&mut next, event.side);
            let level = levels
                .iter_mut()
                .find(|l| l.price == event.price)
                .ok_or(BookError::UnknownPriceLevel { price: event.price.0 })?;
            level.depth = event.quantity;
            let count = level.count as i64 + event.count_delta as i64;
            level.count = clamp_count(count, level.depth);
        }
    }

    debug_assert!(next.validate().is_ok(), "apply_event produced invalid book");
    Ok(next)
}

fn side_levels(book: &mut BookSnapshot, side: Side) -> &mut Vec<Level> {
    match side {
        Side::Bid => &mut book.bids,
        Side::Ask => &mut book.asks,
    }
}

fn sort_side(levels: &mut [Level], side: Side) {
    match side {
        Side::Bid => levels.sort_by(|a, b| b.price.cmp(&a.price)),
        Side::Ask => levels.sort_by(|a, b| a.price.cmp(&b.price)),
    }
}

fn clamp_count(count: i64, depth: u32) -> u32 {
    count.clamp(1, depth as i64) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(price: f64, depth: u32, count: u32) -> Level {
        Level { price: PriceTicks::from_decimal(price).unwrap(), depth, count }
    }

    /// Five-level fixture: best bid 2175.75 x 103, best ask 2176.00 x 82.
    fn reference_book() -> BookSnapshot {
        BookSnapshot {
            timestamp_ns: 0,
            bids: vec![
                level(2175.75, 103, 20),
                level(2175.50, 177, 30),
                level(2175.25, 132, 25),
                level(2175.00, 110, 22),
                level(2174.75, 90, 18),
            ],
            asks: vec![
                level(2176.00, 82, 15),
                level(2176.25, 162, 28),
                level(2176.50, 140, 26),
                level(2176.75, 120, 24),
                level(2177.00, 100, 20),
            ],
        }
    }

    #[test]
    fn tick_conversion_round_trips() {
        let p = PriceTicks::from_decimal(2175.75).unwrap();
        assert_eq!(p.0, 8703);
        assert_eq!(p.to_decimal(), 2175.75);
        assert!(PriceTicks::from_decimal(2175.80).is_err());
    }

    #[test]
    fn mid_price_on_reference_quotes() {
        // Row 1: bid 2175.75 / ask 2176.00 -> 2175.875.
        let book = reference_book();
        let mid = mid_price(&book).unwrap();
        assert_eq!(mid.to_decimal(), 2175.875);

        // Row 2: bid 2175.50 / ask 2175.75 -> 2175.625.
        let book2 = BookSnapshot {
            timestamp_ns: 0,
            bids: vec![level(2175.50, 177, 30)],
            asks: vec![level(2175.75, 23, 1)],
        };
        assert_eq!(mid_price(&book2).unwrap().to_decimal(), 2175.625);
    }

    #[test]
    fn mid_price_minimal_book_half_tick() {
        // bid at 0 ticks, ask one tick up -> mid is half a tick.
        let book = BookSnapshot {
            timestamp_ns: 0,
            bids: vec![Level { price: PriceTicks(0), depth: 1, count: 1 }],
            asks: vec![Level { price: PriceTicks(1), depth: 1, count: 1 }],
        };
        let mid = mid_price(&book).unwrap();
        assert_eq!(mid, HalfTicks(1));
        assert_eq!(mid.to_ticks(), 0.5);
    }

    #[test]
    fn mid_price_empty_side() {
        let book = BookSnapshot::empty(0);
        assert!(matches!(mid_price(&book), Err(BookError::EmptySide { .. })));
    }

    #[test]
    fn mid_price_doubled_equals_tick_sum() {
        let book = reference_book();
        let mid = mid_price(&book).unwrap();
        assert_eq!(mid.0, book.best_bid().unwrap().price.0 + book.best_ask().unwrap().price.0);
    }

    #[test]
    fn sell_aggressor_consumes_best_bid_level() {
        // A sell market order for 103 clears the whole best-bid level;
        // the new best bid is 2175.50 x 177.
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::MarketOrder,
            side: Side::Ask,
            price: PriceTicks(0),
            quantity: 103,
            count_delta: 0,
        };
        let after = apply_event(&book, &event).unwrap();
        let best = after.best_bid().unwrap();
        assert_eq!(best.price.to_decimal(), 2175.50);
        assert_eq!(best.depth, 177);
        assert_eq!(after.bids.len(), 4);
        after.validate().unwrap();
    }

    #[test]
    fn limit_add_improves_best_ask() {
        // 23 new contracts offered at 2175.75 on a book whose best ask is
        // 2176.00 (right after the bid level at 2175.75 was consumed).
        let book = BookSnapshot {
            timestamp_ns: 0,
            bids: vec![level(2175.50, 177, 30), level(2175.25, 132, 25)],
            asks: vec![level(2176.00, 82, 15), level(2176.25, 162, 28)],
        };
        let event = LobEvent {
            timestamp_ns: 20,
            kind: EventKind::LimitAdd,
            side: Side::Ask,
            price: PriceTicks::from_decimal(2175.75).unwrap(),
            quantity: 23,
            count_delta: 1,
        };
        let after = apply_event(&book, &event).unwrap();
        let best = after.best_ask().unwrap();
        assert_eq!(best.price.to_decimal(), 2175.75);
        assert_eq!(best.depth, 23);
        after.validate().unwrap();
    }

    #[test]
    fn partial_market_order_reduces_depth() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::MarketOrder,
            side: Side::Bid,
            price: PriceTicks(0),
            quantity: 30,
            count_delta: 0,
        };
        let after = apply_event(&book, &event).unwrap();
        assert_eq!(after.best_ask().unwrap().depth, 52);
        assert_eq!(after.asks.len(), 5);
    }

    #[test]
    fn market_order_consuming_everything_rejected() {
        let book = reference_book();
        let visible: u64 = book.asks.iter().map(|l| l.depth as u64).sum();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::MarketOrder,
            side: Side::Bid,
            price: PriceTicks(0),
            quantity: visible as u32,
            count_delta: 0,
        };
        assert!(matches!(
            apply_event(&book, &event),
            Err(BookError::MarketOrderExceedsVisibleDepth { .. })
        ));
    }

    #[test]
    fn cancel_exceeding_depth_rejected() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::LimitCancel,
            side: Side::Bid,
            price: PriceTicks::from_decimal(2175.75).unwrap(),
            quantity: 104,
            count_delta: -1,
        };
        assert!(matches!(apply_event(&book, &event), Err(BookError::CancelExceedsDepth { .. })));
    }

    #[test]
    fn cancel_emptying_level_removes_it() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::LimitCancel,
            side: Side::Bid,
            price: PriceTicks::from_decimal(2175.75).unwrap(),
            quantity: 103,
            count_delta: -20,
        };
        let after = apply_event(&book, &event).unwrap();
        assert_eq!(after.best_bid().unwrap().price.to_decimal(), 2175.50);
        after.validate().unwrap();
    }

    #[test]
    fn crossing_add_rejected() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::LimitAdd,
            side: Side::Bid,
            price: PriceTicks::from_decimal(2176.00).unwrap(),
            quantity: 5,
            count_delta: 1,
        };
        assert!(matches!(apply_event(&book, &event), Err(BookError::WouldCrossBook { .. })));
    }

    #[test]
    fn add_beyond_fifth_level_is_truncated_away() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::LimitAdd,
            side: Side::Bid,
            price: PriceTicks::from_decimal(2174.50).unwrap(),
            quantity: 50,
            count_delta: 1,
        };
        let after = apply_event(&book, &event).unwrap();
        assert_eq!(after.bids.len(), 5);
        assert_eq!(after.bids.last().unwrap().price.to_decimal(), 2174.75);
    }

    #[test]
    fn apply_event_is_deterministic() {
        let book = reference_book();
        let event = LobEvent {
            timestamp_ns: 10,
            kind: EventKind::MarketOrder,
            side: Side::Ask,
            price: PriceTicks(0),
            quantity: 150,
            count_delta: 0,
        };
        let a = apply_event(&book, &event).unwrap();
        let b = apply_event(&book, &event).unwrap();
        assert_eq!(a, b);
    }
}
