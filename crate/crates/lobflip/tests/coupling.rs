//! The imbalance-coupling knob is the simulator's ground truth for
//! predictability: at 0 the queue imbalance carries no information about
//! the next flip, at 0.8 it carries plenty. A plain logistic baseline must
//! see that difference, which pins the knob's direction end to end without
//! the cost of RNN training.

use lobflip::baselines::{train_ovr_logistic, LogisticConfig};
use lobflip::dataset::{balance, Label, SplitPlan};
use lobflip::eval::{roc, DEFAULT_ROC_THRESHOLDS};
use lobflip::features::DEFAULT_FLOW_WINDOW;
use lobflip::eval::studies::prepare_split;
use lobflip::pipeline::{featurize_sessions, label_sessions};
use lobflip::simulator::{simulate, SimConfig};

fn up_auc_at_coupling(kappa: f64) -> f64 {
    let cfg = SimConfig {
        seed: 4242,
        n_events: 30_000,
        sessions: 4,
        imbalance_coupling: kappa,
        flip_probability: 0.08,
        ..SimConfig::default()
    };
    let sessions = simulate(&cfg).unwrap();
    let observations = featurize_sessions(&sessions, DEFAULT_FLOW_WINDOW).unwrap();
    let rows = label_sessions(&observations);
    let plan = SplitPlan { train_sessions: 3, validation_size: 2_000 };
    let (_, sets) = prepare_split(&rows, &plan, 1, 0).unwrap();
    let train = balance(&sets.train, 2_000, 0).unwrap();
    let config = LogisticConfig { epochs: 100, ..LogisticConfig::default() };
    let model = train_ovr_logistic(&train, &config).unwrap();
    let scores: Vec<f64> = sets.test.iter().map(|s| model.predict_proba(&s.x)[2]).collect();
    let ups: Vec<bool> = sets.test.iter().map(|s| s.y == Label::Up).collect();
    roc(&scores, &ups, DEFAULT_ROC_THRESHOLDS).auc
}

#[test]
fn coupling_orders_linear_separability() {
    let auc_zero = up_auc_at_coupling(0.0);
    let auc_high = up_auc_at_coupling(0.8);
    assert!(
        (0.40..0.60).contains(&auc_zero),
        "decoupled tape should be unlearnable, got up-AUC {auc_zero:.4}"
    );
    assert!(
        auc_high > auc_zero + 0.05,
        "coupling 0.8 should beat 0.0 clearly: {auc_high:.4} vs {auc_zero:.4}"
    );
}
