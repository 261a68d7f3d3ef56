//! End-to-end behaviour on the standard simulated fixture.

use pwzs::compounding::{make_pair, DEFAULT_DYNAMIC_RANGE_DB};
use pwzs::metrics::evaluate;
use pwzs::simulator::Fixture;
use pwzs::zerotrain::{train_zero_shot, TrainConfig};

#[test]
fn parity_subsets_differ() {
    let stack = Fixture::standard().working_stack().unwrap();
    let pair = make_pair(&stack, DEFAULT_DYNAMIC_RANGE_DB).unwrap();
    assert!(pair.s1.pixels().mean_abs_diff(pair.s2.pixels()).unwrap() > 0.0);
}

#[test]
fn short_training_lowers_the_total_loss() {
    let stack = Fixture::standard().working_stack().unwrap();
    let cfg = TrainConfig {
        iterations: 101,
        learning_rate: 1e-4,
        ..TrainConfig::default()
    };
    let (_, trace) = train_zero_shot(&stack, &cfg).unwrap();
    // record 100 is the loss after 100 updates
    let (first, after) = (trace.records[0].total, trace.records[100].total);
    assert!(after < first, "{first} -> {after}");
}

#[test]
fn more_angles_raise_windowed_gcnr() {
    let fx = Fixture::standard();
    let refs = fx.references().unwrap();
    let low = evaluate(&refs.y_low, &refs.y_low, &fx.roi, 20, 10, 0).unwrap();
    let all = evaluate(&refs.y_all, &refs.y_low, &fx.roi, 20, 10, 0).unwrap();
    let truth = evaluate(&refs.truth, &refs.y_low, &fx.roi, 20, 10, 0).unwrap();
    assert!(low.gcnr_mean < all.gcnr_mean && all.gcnr_mean < truth.gcnr_mean);
    assert!(low.cnr_db_mean < all.cnr_db_mean);
}

#[test]
fn verify_gradients_option_runs_before_training() {
    let stack = Fixture::standard().working_stack().unwrap();
    let cfg = TrainConfig {
        iterations: 1,
        verify_gradients: true,
        ..TrainConfig::default()
    };
    let (_, trace) = train_zero_shot(&stack, &cfg).unwrap();
    assert_eq!(trace.len(), 1);
}
