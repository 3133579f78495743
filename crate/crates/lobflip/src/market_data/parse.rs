//! Event-stream ingestion and emission.
//!
//! CSV format: header `ts_ns,kind,side,price,qty,count_delta` with
//! kind in {ADD,CXL,MOD,MKT}, side in {B,A} and decimal prices validated
//! against the tick grid. JSONL carries one object per line with the same
//! field names.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{mid_price, BookSnapshot, EventKind, LobEvent, PriceTicks, Side, BOOK_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl EventFormat {
    /// Infer the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => EventFormat::Jsonl,
            _ => EventFormat::Csv,
        }
    }
}

pub const EVENT_CSV_HEADER: &str = "ts_ns,kind,side,price,qty,count_delta";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: malformed record ({field}): {message}")]
    MalformedRecord { line: usize, field: &'static str, message: String },
    #[error("line {line}: timestamp {current} precedes previous timestamp {previous}")]
    NonMonotoneTimestamp { line: usize, previous: i64, current: i64 },
    #[error("missing or invalid header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: &'static str, got: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Wire representation shared by the JSONL format and the CSV columns.
#[derive(Debug, Serialize, Deserialize)]
struct EventRecord {
    ts_ns: i64,
    kind: String,
    side: String,
    price: f64,
    qty: u32,
    count_delta: i32,
}

fn record_to_event(rec: EventRecord, line: usize) -> Result<LobEvent, ParseError> {
    let kind = match rec.kind.as_str() {
        "ADD" => EventKind::LimitAdd,
        "CXL" => EventKind::LimitCancel,
        "MOD" => EventKind::LimitModify,
        "MKT" => EventKind::MarketOrder,
        other => {
            return Err(ParseError::MalformedRecord {
                line,
                field: "kind",
                message: format!("unknown kind `{other}`"),
            })
        }
    };
    let side = match rec.side.as_str() {
        "B" => Side::Bid,
        "A" => Side::Ask,
        other => {
            return Err(ParseError::MalformedRecord {
                line,
                field: "side",
                message: format!("unknown side `{other}`"),
            })
        }
    };
    let price = PriceTicks::from_decimal(rec.price).map_err(|e| ParseError::MalformedRecord {
        line,
        field: "price",
        message: e.to_string(),
    })?;
    if rec.qty == 0 {
        return Err(ParseError::MalformedRecord {
            line,
            field: "qty",
            message: "quantity must be positive".into(),
        });
    }
    Ok(LobEvent {
        timestamp_ns: rec.ts_ns,
        kind,
        side,
        price,
        quantity: rec.qty,
        count_delta: rec.count_delta,
    })
}

/// Parse an ordered event stream from CSV or JSONL.
///
/// Events must arrive in non-decreasing timestamp order; blank lines are
/// skipped. The returned count equals the number of non-header, non-blank
/// lines.
pub fn parse_event_stream<R: BufRead>(
    reader: R,
    format: EventFormat,
) -> Result<Vec<LobEvent>, ParseError> {
    let mut events = Vec::new();
    let mut last_ts: Option<i64> = None;
    let mut saw_header = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        let trimmed = text.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec = match format {
            EventFormat::Csv => {
                if !saw_header {
                    saw_header = true;
                    if trimmed != EVENT_CSV_HEADER {
                        return Err(ParseError::BadHeader {
                            expected: EVENT_CSV_HEADER,
                            got: trimmed.to_string(),
                        });
                    }
                    continue;
                }
                parse_csv_record(trimmed, line_no)?
            }
            EventFormat::Jsonl => serde_json::from_str::<EventRecord>(trimmed).map_err(|e| {
                ParseError::MalformedRecord { line: line_no, field: "json", message: e.to_string() }
            })?,
        };
        let event = record_to_event(rec, line_no)?;
        if let Some(prev) = last_ts {
            if event.timestamp_ns < prev {
                return Err(ParseError::NonMonotoneTimestamp {
                    line: line_no,
                    previous: prev,
                    current: event.timestamp_ns,
                });
            }
        }
        last_ts = Some(event.timestamp_ns);
        events.push(event);
    }
    Ok(events)
}

fn parse_csv_record(line: &str, line_no: usize) -> Result<EventRecord, ParseError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 6 {
        return Err(ParseError::MalformedRecord {
            line: line_no,
            field: "record",
            message: format!("expected 6 fields, got {}", fields.len()),
        });
    }
    let parse_err = |field: &'static str, msg: String| ParseError::MalformedRecord {
        line: line_no,
        field,
        message: msg,
    };
    Ok(EventRecord {
        ts_ns: fields[0].parse().map_err(|e| parse_err("ts_ns", format!("{e}")))?,
        kind: fields[1].to_string(),
        side: fields[2].to_string(),
        price: fields[3].parse().map_err(|e| parse_err("price", format!("{e}")))?,
        qty: fields[4].parse().map_err(|e| parse_err("qty", format!("{e}")))?,
        count_delta: fields[5].parse().map_err(|e| parse_err("count_delta", format!("{e}")))?,
    })
}

/// Read events from a file, inferring the format from the extension.
pub fn read_events_file(path: &Path) -> Result<Vec<LobEvent>, ParseError> {
    let file = std::fs::File::open(path)?;
    parse_event_stream(std::io::BufReader::new(file), EventFormat::from_path(path))
}

pub fn write_events_csv<W: Write>(writer: &mut W, events: &[LobEvent]) -> std::io::Result<()> {
    writeln!(writer, "{EVENT_CSV_HEADER}")?;
    for e in events {
        writeln!(
            writer,
            "{},{},{},{:.2},{},{}",
            e.timestamp_ns,
            e.kind.wire_str(),
            e.side.wire_str(),
            e.price.to_decimal(),
            e.quantity,
            e.count_delta
        )?;
    }
    Ok(())
}

pub fn write_events_jsonl<W: Write>(writer: &mut W, events: &[LobEvent]) -> std::io::Result<()> {
    for e in events {
        let rec = EventRecord {
            ts_ns: e.timestamp_ns,
            kind: e.kind.wire_str().to_string(),
            side: e.side.wire_str().to_string(),
            price: e.price.to_decimal(),
            qty: e.quantity,
            count_delta: e.count_delta,
        };
        writeln!(writer, "{}", serde_json::to_string(&rec).expect("event record serializes"))?;
    }
    Ok(())
}

/// Write snapshots in the classic quote-board column layout:
/// `ts_ns,p_b1..p_b5,d_b1..d_b5,c_b1..c_b5,p_a1..p_a5,d_a1..d_a5,c_a1..c_a5,mid`.
/// Vacant levels are written as zeros.
pub fn write_snapshots_csv<W: Write>(
    writer: &mut W,
    snapshots: &[BookSnapshot],
) -> std::io::Result<()> {
    let mut header = String::from("ts_ns");
    for side in ["b", "a"] {
        for col in ["p", "d", "c"] {
            for i in 1..=BOOK_DEPTH {
                header.push_str(&format!(",{col}_{side}{i}"));
            }
        }
    }
    header.push_str(",mid");
    writeln!(writer, "{header}")?;
    for snap in snapshots {
        let mut row = format!("{}", snap.timestamp_ns);
        for levels in [&snap.bids, &snap.asks] {
            for i in 0..BOOK_DEPTH {
                match levels.get(i) {
                    Some(l) => row.push_str(&format!(",{:.2}", l.price.to_decimal())),
                    None => row.push_str(",0.00"),
                }
            }
            for i in 0..BOOK_DEPTH {
                row.push_str(&format!(",{}", levels.get(i).map(|l| l.depth).unwrap_or(0)));
            }
            for i in 0..BOOK_DEPTH {
                row.push_str(&format!(",{}", levels.get(i).map(|l| l.count).unwrap_or(0)));
            }
        }
        match mid_price(snap) {
            Ok(mid) => row.push_str(&format!(",{:.3}", mid.to_decimal())),
            Err(_) => row.push_str(",nan"),
        }
        writeln!(writer, "{row}")?;
    }
    Ok(())
}
