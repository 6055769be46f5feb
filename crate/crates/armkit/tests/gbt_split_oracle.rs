//! The booster's first tree against an exhaustive split-enumeration
//! oracle, plus objective-descent and round-trip checks on full
//! ensembles.

mod common;

use armkit::gbt::{train, GbtHyperParams, GbtModel};
use common::{assert_trees_match, oracle_first_tree, StateSampler};

/// Random regression problem with a nonlinear ground truth.
fn random_problem(seed: u64, rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut sampler = StateSampler::new(seed);
    let mut features = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x = sampler.uniform_vec(cols, 2.0);
        let y = (x[0] * 1.3).sin() + 0.5 * x[1].abs() * x[2 % cols]
            - 0.2 * x[(cols - 1) % cols]
            + 0.05 * sampler.uniform(1.0);
        features.push(x);
        labels.push(y);
    }
    (features, labels)
}

/// Same problem but with features quantized onto a coarse grid so that
/// many rows share values and tie handling is exercised.
fn quantized_problem(seed: u64, rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (mut features, labels) = random_problem(seed, rows, cols);
    for row in &mut features {
        for v in row.iter_mut() {
            *v = (*v * 2.0).round() / 2.0;
        }
    }
    (features, labels)
}

fn single_tree_params() -> GbtHyperParams {
    GbtHyperParams {
        n_estimators: 1,
        learning_rate: 0.3,
        max_depth: 4,
        min_child_weight: 1.0,
        subsample: 1.0,
        colsample_bytree: 1.0,
        reg_lambda: 0.0,
        reg_alpha: 0.0,
        gamma: 0.0,
        seed: 0,
    }
}

#[test]
fn first_tree_matches_exhaustive_oracle_without_regularization() {
    for seed in [11, 12, 13] {
        let (features, labels) = random_problem(seed, 200, 12);
        let params = single_tree_params();
        let model = train(&features, &labels, &params).unwrap();
        let want = oracle_first_tree(&features, &labels, &params);
        assert_trees_match(&model.trees[0], &want, "root");
    }
}

#[test]
fn first_tree_matches_oracle_on_heavily_tied_features() {
    let (features, labels) = quantized_problem(21, 240, 6);
    let params = single_tree_params();
    let model = train(&features, &labels, &params).unwrap();
    let want = oracle_first_tree(&features, &labels, &params);
    assert_trees_match(&model.trees[0], &want, "root");
}

#[test]
fn first_tree_matches_oracle_with_full_regularization() {
    let (features, labels) = random_problem(31, 300, 8);
    let params = GbtHyperParams {
        reg_lambda: 3.7,
        reg_alpha: 0.15,
        gamma: 0.2,
        min_child_weight: 5.0,
        max_depth: 5,
        ..single_tree_params()
    };
    let model = train(&features, &labels, &params).unwrap();
    let want = oracle_first_tree(&features, &labels, &params);
    assert_trees_match(&model.trees[0], &want, "root");
}

#[test]
fn training_mse_never_increases_over_boosting_rounds() {
    let (features, labels) = random_problem(41, 400, 10);
    let params = GbtHyperParams {
        n_estimators: 120,
        learning_rate: 0.1,
        max_depth: 4,
        ..GbtHyperParams::default()
    };
    let model = train(&features, &labels, &params).unwrap();
    assert_eq!(model.train_mse.len(), 120);
    for w in model.train_mse.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-12,
            "objective increased: {} -> {}",
            w[0],
            w[1]
        );
    }
    let first = model.train_mse[0];
    let last = *model.train_mse.last().unwrap();
    assert!(last < 0.5 * first, "boosting should clearly reduce the MSE");
}

#[test]
fn serialization_round_trip_preserves_predictions_to_1e12() {
    let (features, labels) = random_problem(51, 250, 9);
    let params = GbtHyperParams {
        n_estimators: 60,
        subsample: 0.8,
        colsample_bytree: 0.7,
        seed: 7,
        ..GbtHyperParams::default()
    };
    let model = train(&features, &labels, &params).unwrap();
    let text = serde_json::to_string(&model).unwrap();
    let back: GbtModel = serde_json::from_str(&text).unwrap();
    for row in &features {
        let a = model.predict_row(row);
        let b = back.predict_row(row);
        assert!((a - b).abs() <= 1e-12, "round trip changed {a} into {b}");
    }
}
