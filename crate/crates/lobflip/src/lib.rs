//! Limit-order-book price-flip classification toolkit.
//!
//! The crate reconstructs five-level book state from event streams, extracts
//! a 32-dimensional spatio-temporal feature set, trains an Elman recurrent
//! network (plus logistic / feed-forward / white-noise baselines) to classify
//! the next-event mid-price move into {down, stationary, up}, and evaluates
//! with per-class precision/recall/F1, ROC/AUC and walk-forward
//! cross-validation. A seeded microstructure simulator generates event
//! streams with tunable predictability so experiments run without
//! proprietary exchange data.

pub mod baselines;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod market_data;
pub mod math;
pub mod pipeline;
pub mod rnn;
pub mod simulator;
pub mod svg;
