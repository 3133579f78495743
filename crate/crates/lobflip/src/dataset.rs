//! Labeling, sequence assembly, class balancing, and walk-forward splits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, N_FEATURES};
use crate::market_data::HalfTicks;
use crate::math::Mat;

/// Three-state mid-price response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Down,
    Stationary,
    Up,
}

pub const N_CLASSES: usize = 3;
pub const ALL_LABELS: [Label; N_CLASSES] = [Label::Down, Label::Stationary, Label::Up];

impl Label {
    /// Signed wire value: −1, 0, +1.
    pub fn to_i8(self) -> i8 {
        match self {
            Label::Down => -1,
            Label::Stationary => 0,
            Label::Up => 1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Label> {
        match v {
            -1 => Some(Label::Down),
            0 => Some(Label::Stationary),
            1 => Some(Label::Up),
            _ => None,
        }
    }

    /// Dense class index: Down=0, Stationary=1, Up=2.
    pub fn index(self) -> usize {
        match self {
            Label::Down => 0,
            Label::Stationary => 1,
            Label::Up => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Down),
            1 => Some(Label::Stationary),
            2 => Some(Label::Up),
            _ => None,
        }
    }

    pub fn one_hot(self) -> [f64; N_CLASSES] {
        let mut v = [0.0; N_CLASSES];
        v[self.index()] = 1.0;
        v
    }
}

/// One labeled feature observation inside a session stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub session_id: u32,
    pub timestamp_ns: i64,
    pub features: FeatureVector,
    pub label: Label,
}

/// One training/evaluation record: a T×P feature matrix (row 0 is the oldest
/// lag, row T−1 the current observation) and the current observation's label.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub x: Mat,
    pub y: Label,
    pub timestamp_ns: i64,
    pub session_id: u32,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("class {0:?} absent from the sample set")]
    MissingClass(Label),
    #[error("insufficient sessions: {available} available, {required} required")]
    InsufficientSessions { available: usize, required: usize },
}

/// Sign of the one-event-ahead mid-price move.
pub fn label_next_event(mid_t: HalfTicks, mid_next: HalfTicks) -> Label {
    match mid_next.0.cmp(&mid_t.0) {
        std::cmp::Ordering::Less => Label::Down,
        std::cmp::Ordering::Equal => Label::Stationary,
        std::cmp::Ordering::Greater => Label::Up,
    }
}

/// Sign of the mid move over a fixed time horizon: the comparison point is
/// the latest event with timestamp ≤ t + horizon (equal stamps resolve by
/// stream order). Returns `None` when the horizon crosses the session end;
/// callers drop and count such samples.
pub fn label_horizon(mids: &[(i64, HalfTicks)], t: usize, horizon_ns: i64) -> Option<Label> {
    let cutoff = mids[t].0 + horizon_ns;
    if cutoff > mids.last().expect("nonempty series").0 {
        return None;
    }
    let mut j = t;
    while j + 1 < mids.len() && mids[j + 1].0 <= cutoff {
        j += 1;
    }
    Some(label_next_event(mids[t].1, mids[j].1))
}

/// Assemble length-T sequences. One sample per row with in-session index
/// ≥ T−1; sequences never straddle session boundaries.
pub fn make_sequences(rows: &[LabeledRow], t_steps: usize) -> Vec<SequenceSample> {
    assert!(t_steps > 0, "sequence length must be positive");
    let mut out = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let session = rows[start].session_id;
        let mut end = start;
        while end < rows.len() && rows[end].session_id == session {
            end += 1;
        }
        for i in (start + t_steps - 1)..end {
            let mut x = Mat::zeros(t_steps, N_FEATURES);
            for lag in 0..t_steps {
                let row = &rows[i + 1 - t_steps + lag];
                for (j, v) in row.features.iter().enumerate() {
                    *x.at_mut(lag, j) = *v;
                }
            }
            out.push(SequenceSample {
                x,
                y: rows[i].label,
                timestamp_ns: rows[i].timestamp_ns,
                session_id: session,
            });
        }
        start = end;
    }
    out
}

/// Equalize class counts at exactly `per_class_target` each: minority
/// classes are oversampled with replacement, classes at or above target are
/// subsampled without replacement. Output order is a seeded shuffle.
pub fn balance(
    samples: &[SequenceSample],
    per_class_target: usize,
    seed: u64,
) -> Result<Vec<SequenceSample>, DatasetError> {
    assert!(per_class_target > 0, "target must be positive");
    let mut by_class: [Vec<usize>; N_CLASSES] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.y.index()].push(i);
    }
    for label in ALL_LABELS {
        if by_class[label.index()].is_empty() {
            return Err(DatasetError::MissingClass(label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(per_class_target * N_CLASSES);
    for label in ALL_LABELS {
        let pool = &by_class[label.index()];
        if pool.len() >= per_class_target {
            let mut shuffled = pool.clone();
            shuffled.shuffle(&mut rng);
            chosen.extend(shuffled.into_iter().take(per_class_target));
        } else {
            for _ in 0..per_class_target {
                chosen.push(pool[rng.random_range(0..pool.len())]);
            }
        }
    }
    chosen.shuffle(&mut rng);
    Ok(chosen.into_iter().map(|i| samples[i].clone()).collect())
}

/// Walk-forward split geometry: a block of consecutive training sessions
/// followed by one evaluation session carved into validation then test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_sessions: usize,
    pub validation_size: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan { train_sessions: 3, validation_size: 200_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SplitSets {
    pub train: Vec<SequenceSample>,
    pub validation: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
}

/// Number of walk-forward splits available over `n_sessions`.
pub fn n_splits(n_sessions: usize, train_sessions: usize) -> usize {
    n_sessions.saturating_sub(train_sessions)
}

/// Carve one walk-forward split starting at `first_train_session`. Training
/// samples are returned raw; the training driver applies [`balance`] with
/// its own target and seed. The evaluation session immediately follows the
/// training block: its first `validation_size` samples become validation,
/// the remainder test, both unbalanced.
pub fn split(
    samples: &[SequenceSample],
    plan: &SplitPlan,
    first_train_session: u32,
) -> Result<SplitSets, DatasetError> {
    let mut sessions: Vec<u32> = samples.iter().map(|s| s.session_id).collect();
    sessions.sort_unstable();
    sessions.dedup();
    let required = plan.train_sessions + 1;
    let eval_session = first_train_session + plan.train_sessions as u32;
    let have_all = (first_train_session..=eval_session).all(|s| sessions.contains(&s));
    if !have_all {
        return Err(DatasetError::InsufficientSessions { available: sessions.len(), required });
    }
    let mut train = Vec::new();
    let mut eval_rows = Vec::new();
    for s in samples {
        if s.session_id >= first_train_session && s.session_id < eval_session {
            train.push(s.clone());
        } else if s.session_id == eval_session {
            eval_rows.push(s.clone());
        }
    }
    let val_len = plan.validation_size.min(eval_rows.len());
    let test = eval_rows.split_off(val_len);
    let validation = eval_rows;
    debug_assert!(no_leakage(&train, &validation, &test));
    Ok(SplitSets { train, validation, test })
}

fn no_leakage(train: &[SequenceSample], val: &[SequenceSample], test: &[SequenceSample]) -> bool {
    let max_train = train.iter().map(|s| s.timestamp_ns).max();
    let min_eval = val.iter().chain(test).map(|s| s.timestamp_ns).min();
    match (max_train, min_eval) {
        (Some(a), Some(b)) => a < b,
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::PriceTicks;

    fn half(decimal: f64) -> HalfTicks {
        // Decimal price in index points to exact half-ticks.
        let v = decimal / 0.125;
        assert!((v - v.round()).abs() < 1e-9);
        HalfTicks(v.round() as i64)
    }

    #[test]
    fn table1_mid_drop_labels_down() {
        assert_eq!(label_next_event(half(2175.875), half(2175.625)), Label::Down);
    }

    #[test]
    fn equal_mids_label_stationary() {
        assert_eq!(label_next_event(half(2175.875), half(2175.875)), Label::Stationary);
    }

    #[test]
    fn mid_rise_labels_up() {
        assert_eq!(label_next_event(half(2175.625), half(2175.875)), Label::Up);
    }

    #[test]
    fn label_is_antisymmetric() {
        let mids = [half(2175.875), half(2175.625), half(2176.0)];
        for a in mids {
            for b in mids {
                assert_eq!(
                    label_next_event(a, b).to_i8(),
                    -label_next_event(b, a).to_i8()
                );
            }
        }
    }

    fn mono_series() -> Vec<(i64, HalfTicks)> {
        // Ten events, 100ns apart, with a known mid path.
        let mids = [0i64, 0, 1, 1, 2, 1, 1, 0, 0, 1];
        mids.iter()
            .enumerate()
            .map(|(i, m)| (100 * i as i64, HalfTicks(17400 + m)))
            .collect()
    }

    #[test]
    fn horizon_zero_is_stationary() {
        let s = mono_series();
        for t in 0..s.len() {
            assert_eq!(label_horizon(&s, t, 0), Some(Label::Stationary));
        }
    }

    #[test]
    fn horizon_of_one_gap_matches_next_event() {
        let s = mono_series();
        for t in 0..s.len() - 1 {
            let gap = s[t + 1].0 - s[t].0;
            assert_eq!(
                label_horizon(&s, t, gap),
                Some(label_next_event(s[t].1, s[t + 1].1))
            );
        }
    }

    #[test]
    fn horizon_spanning_three_events_brute_force() {
        let s = mono_series();
        let horizon = 300;
        for t in 0..s.len() {
            let cutoff = s[t].0 + horizon;
            let expected = if cutoff > s.last().unwrap().0 {
                None
            } else {
                // Brute-force scan for the latest event within the horizon.
                let j = (0..s.len()).filter(|&j| s[j].0 <= cutoff).next_back().unwrap();
                Some(label_next_event(s[t].1, s[j].1))
            };
            assert_eq!(label_horizon(&s, t, horizon), expected, "t={t}");
        }
    }

    #[test]
    fn horizon_beyond_session_is_dropped() {
        let s = mono_series();
        assert_eq!(label_horizon(&s, 8, 1_000_000), None);
    }

    fn row(session: u32, i: usize, label: Label) -> LabeledRow {
        let mut f = [0.0; N_FEATURES];
        f[0] = i as f64;
        LabeledRow {
            session_id: session,
            timestamp_ns: session as i64 * 1_000_000 + i as i64,
            features: f,
            label,
        }
    }

    #[test]
    fn ten_rows_t10_yields_one_sample() {
        let rows: Vec<_> = (0..10).map(|i| row(0, i, Label::Stationary)).collect();
        let samples = make_sequences(&rows, 10);
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].x.at(0, 0), 0.0);
        assert_eq!(samples[0].x.at(9, 0), 9.0);
    }

    #[test]
    fn t1_yields_one_sample_per_row() {
        let rows: Vec<_> = (0..7).map(|i| row(0, i, Label::Up)).collect();
        assert_eq!(make_sequences(&rows, 1).len(), 7);
    }

    #[test]
    fn sequences_do_not_straddle_sessions() {
        // Enumerated oracle: 2 sessions × 12 rows, T=10 → 2·(12−10+1) = 6.
        let mut rows = Vec::new();
        for s in 0..2 {
            for i in 0..12 {
                rows.push(row(s, i, Label::Stationary));
            }
        }
        let samples = make_sequences(&rows, 10);
        assert_eq!(samples.len(), 6);
        for sample in &samples {
            let first = sample.x.at(0, 0) as usize;
            let last = sample.x.at(9, 0) as usize;
            assert_eq!(last - first, 9, "window must be contiguous within a session");
        }
    }

    fn tagged_sample(tag: usize, label: Label) -> SequenceSample {
        let mut x = Mat::zeros(1, N_FEATURES);
        *x.at_mut(0, 0) = tag as f64;
        SequenceSample { x, y: label, timestamp_ns: tag as i64, session_id: 0 }
    }

    fn class_counts(samples: &[SequenceSample]) -> [usize; 3] {
        let mut c = [0; 3];
        for s in samples {
            c[s.y.index()] += 1;
        }
        c
    }

    #[test]
    fn balance_8_1_1_to_uniform_4() {
        let mut samples = Vec::new();
        for i in 0..8 {
            samples.push(tagged_sample(i, Label::Stationary));
        }
        samples.push(tagged_sample(8, Label::Down));
        samples.push(tagged_sample(9, Label::Up));
        let out = balance(&samples, 4, 11).unwrap();
        assert_eq!(class_counts(&out), [4, 4, 4]);
        // Majority class drawn without replacement → no duplicate tags.
        let mut tags: Vec<i64> = out
            .iter()
            .filter(|s| s.y == Label::Stationary)
            .map(|s| s.timestamp_ns)
            .collect();
        tags.sort_unstable();
        tags.dedup();
        assert_eq!(tags.len(), 4);
    }

    #[test]
    fn balance_already_uniform_is_permutation() {
        let mut samples = Vec::new();
        for i in 0..4 {
            samples.push(tagged_sample(i, Label::Down));
            samples.push(tagged_sample(4 + i, Label::Stationary));
            samples.push(tagged_sample(8 + i, Label::Up));
        }
        let out = balance(&samples, 4, 3).unwrap();
        let mut in_tags: Vec<i64> = samples.iter().map(|s| s.timestamp_ns).collect();
        let mut out_tags: Vec<i64> = out.iter().map(|s| s.timestamp_ns).collect();
        in_tags.sort_unstable();
        out_tags.sort_unstable();
        assert_eq!(in_tags, out_tags);
    }

    #[test]
    fn balance_multiset_membership_oracle() {
        // Scaled-down version of the (100000, 500, 450) case; the acceptance
        // suite runs the full-size variant.
        let mut samples = Vec::new();
        let mut tag = 0;
        for _ in 0..1000 {
            samples.push(tagged_sample(tag, Label::Stationary));
            tag += 1;
        }
        for _ in 0..50 {
            samples.push(tagged_sample(tag, Label::Down));
            tag += 1;
        }
        for _ in 0..45 {
            samples.push(tagged_sample(tag, Label::Up));
            tag += 1;
        }
        let target = 330;
        let out = balance(&samples, target, 99).unwrap();
        assert_eq!(class_counts(&out), [target, target, target]);
        let mut majority: Vec<i64> = out
            .iter()
            .filter(|s| s.y == Label::Stationary)
            .map(|s| s.timestamp_ns)
            .collect();
        let n_major = majority.len();
        majority.sort_unstable();
        majority.dedup();
        assert_eq!(majority.len(), n_major, "majority draw must be without replacement");
        for minority in [Label::Down, Label::Up] {
            let mut tags: Vec<i64> = out
                .iter()
                .filter(|s| s.y == minority)
                .map(|s| s.timestamp_ns)
                .collect();
            let n = tags.len();
            tags.sort_unstable();
            tags.dedup();
            assert!(tags.len() < n, "minority must contain repeats");
        }
    }

    #[test]
    fn balance_deterministic_under_seed() {
        let mut samples = Vec::new();
        for i in 0..30 {
            samples.push(tagged_sample(i, Label::from_index(i % 3).unwrap()));
        }
        let a = balance(&samples, 7, 5).unwrap();
        let b = balance(&samples, 7, 5).unwrap();
        let ta: Vec<i64> = a.iter().map(|s| s.timestamp_ns).collect();
        let tb: Vec<i64> = b.iter().map(|s| s.timestamp_ns).collect();
        assert_eq!(ta, tb);
    }

    #[test]
    fn balance_missing_class_errors() {
        let samples = vec![tagged_sample(0, Label::Up), tagged_sample(1, Label::Down)];
        assert!(matches!(
            balance(&samples, 2, 0),
            Err(DatasetError::MissingClass(Label::Stationary))
        ));
    }

    fn session_samples(session: u32, n: usize) -> Vec<SequenceSample> {
        (0..n)
            .map(|i| {
                let mut s = tagged_sample(i, Label::from_index(i % 3).unwrap());
                s.session_id = session;
                s.timestamp_ns = session as i64 * 1_000_000 + i as i64;
                s
            })
            .collect()
    }

    #[test]
    fn split_four_sessions_plan_3_100() {
        let mut samples = Vec::new();
        for s in 0..4 {
            samples.extend(session_samples(s, 150));
        }
        let plan = SplitPlan { train_sessions: 3, validation_size: 100 };
        let sets = split(&samples, &plan, 0).unwrap();
        assert_eq!(sets.train.len(), 450);
        assert!(sets.train.iter().all(|s| s.session_id < 3));
        assert_eq!(sets.validation.len(), 100);
        assert!(sets.validation.iter().all(|s| s.session_id == 3));
        assert_eq!(sets.test.len(), 50);
        let max_train = sets.train.iter().map(|s| s.timestamp_ns).max().unwrap();
        let min_val = sets.validation.iter().map(|s| s.timestamp_ns).min().unwrap();
        assert!(max_train < min_val);
    }

    #[test]
    fn split_insufficient_sessions() {
        let samples = session_samples(0, 10);
        let plan = SplitPlan { train_sessions: 3, validation_size: 5 };
        assert!(matches!(
            split(&samples, &plan, 0),
            Err(DatasetError::InsufficientSessions { .. })
        ));
    }

    #[test]
    fn twenty_three_sessions_give_twenty_splits() {
        assert_eq!(n_splits(23, 3), 20);
        assert_eq!(n_splits(4, 3), 1);
        assert_eq!(n_splits(3, 3), 0);
    }

    #[test]
    fn one_hot_encoding() {
        assert_eq!(Label::Down.one_hot(), [1.0, 0.0, 0.0]);
        assert_eq!(Label::Stationary.one_hot(), [0.0, 1.0, 0.0]);
        assert_eq!(Label::Up.one_hot(), [0.0, 0.0, 1.0]);
        for l in ALL_LABELS {
            assert_eq!(Label::from_i8(l.to_i8()), Some(l));
            assert_eq!(Label::from_index(l.index()), Some(l));
        }
    }

    #[test]
    fn price_ticks_reexport_compiles() {
        // Guard that the dataset module's dependencies stay minimal.
        let _ = PriceTicks(0);
    }
}
