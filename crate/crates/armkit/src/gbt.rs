//! Regularized gradient-boosted regression trees (squared-error loss).
//!
//! Second-order boosting with exact greedy splits: every tree fits the
//! gradient/hessian statistics of the current ensemble, candidate
//! thresholds are the midpoints between adjacent distinct feature values,
//! and a split's quality is
//!
//! ```text
//! gain = 1/2 [ G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda)
//!              - (G_L+G_R)^2/(H_L+H_R+lambda) ] - gamma
//! ```
//!
//! Leaf weights are `-soft(G, alpha) / (H + lambda)` scaled by the
//! learning rate, where `soft` is the L1 soft-threshold.  Rows go left
//! when `x < threshold`.  Ties between equally good splits resolve to the
//! lowest feature index, then the lowest threshold, so training is fully
//! deterministic; row subsampling and column subsampling draw from a
//! seeded generator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by training or prediction.
#[derive(Debug, Error)]
pub enum GbtError {
    /// A hyperparameter is out of range.
    #[error("invalid hyperparameter: {0}")]
    InvalidParams(String),
    /// The training data is unusable.
    #[error("bad training data: {0}")]
    BadData(String),
    /// Unknown hyperparameter name in get/set by name.
    #[error("unknown hyperparameter `{0}`")]
    UnknownParam(String),
}

/// The tunable hyperparameters of the learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperParams {
    /// Number of boosting rounds (trees).
    pub n_estimators: usize,
    /// Shrinkage applied to every leaf weight, in `(0, 1]`.
    pub learning_rate: f64,
    /// Maximum tree depth (root at depth 0).
    pub max_depth: usize,
    /// Minimum hessian sum (row count, for squared error) per child.
    pub min_child_weight: f64,
    /// Fraction of rows drawn (without replacement) per round, `(0, 1]`.
    pub subsample: f64,
    /// Fraction of features offered to each tree, `(0, 1]`.
    pub colsample_bytree: f64,
    /// L2 regularization on leaf weights.
    pub reg_lambda: f64,
    /// L1 regularization on leaf weights.
    pub reg_alpha: f64,
    /// Minimum gain to keep a split.
    pub gamma: f64,
    /// Seed for row/column subsampling.
    pub seed: u64,
}

impl Default for GbtHyperParams {
    fn default() -> Self {
        GbtHyperParams {
            n_estimators: 150,
            learning_rate: 0.1,
            max_depth: 6,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            reg_lambda: 1.0,
            reg_alpha: 0.0,
            gamma: 0.0,
            seed: 0,
        }
    }
}

impl GbtHyperParams {
    /// Names accepted by [`GbtHyperParams::get`] / [`GbtHyperParams::set`].
    pub const TUNABLE: [&'static str; 9] = [
        "n_estimators",
        "learning_rate",
        "max_depth",
        "min_child_weight",
        "subsample",
        "colsample_bytree",
        "reg_lambda",
        "reg_alpha",
        "gamma",
    ];

    /// Check ranges.
    pub fn validate(&self) -> Result<(), GbtError> {
        if self.n_estimators == 0 {
            return Err(GbtError::InvalidParams("n_estimators must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbtError::InvalidParams(format!(
                "learning_rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 || self.max_depth > 32 {
            return Err(GbtError::InvalidParams(format!(
                "max_depth must lie in [1, 32], got {}",
                self.max_depth
            )));
        }
        for (name, v) in [
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(GbtError::InvalidParams(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        for (name, v) in [
            ("min_child_weight", self.min_child_weight),
            ("reg_lambda", self.reg_lambda),
            ("reg_alpha", self.reg_alpha),
            ("gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(GbtError::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Read a hyperparameter by name (integers widen to `f64`).
    pub fn get(&self, name: &str) -> Result<f64, GbtError> {
        Ok(match name {
            "n_estimators" => self.n_estimators as f64,
            "learning_rate" => self.learning_rate,
            "max_depth" => self.max_depth as f64,
            "min_child_weight" => self.min_child_weight,
            "subsample" => self.subsample,
            "colsample_bytree" => self.colsample_bytree,
            "reg_lambda" => self.reg_lambda,
            "reg_alpha" => self.reg_alpha,
            "gamma" => self.gamma,
            other => return Err(GbtError::UnknownParam(other.into())),
        })
    }

    /// Write a hyperparameter by name (integers round).
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), GbtError> {
        match name {
            "n_estimators" => self.n_estimators = value.round().max(1.0) as usize,
            "learning_rate" => self.learning_rate = value,
            "max_depth" => self.max_depth = value.round().max(1.0) as usize,
            "min_child_weight" => self.min_child_weight = value,
            "subsample" => self.subsample = value,
            "colsample_bytree" => self.colsample_bytree = value,
            "reg_lambda" => self.reg_lambda = value,
            "reg_alpha" => self.reg_alpha = value,
            "gamma" => self.gamma = value,
            other => return Err(GbtError::UnknownParam(other.into())),
        }
        self.validate()
    }
}

/// One regression tree, stored as nested nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Terminal node carrying the (already learning-rate-scaled) weight.
    Leaf {
        /// Value added to the prediction.
        value: f64,
    },
    /// Internal split: rows with `x[feature] < threshold` go left.
    Split {
        /// Feature column index.
        feature: usize,
        /// Split threshold.
        threshold: f64,
        /// Subtree for `x < threshold`.
        left: Box<Node>,
        /// Subtree for `x >= threshold`.
        right: Box<Node>,
    },
}

impl Node {
    /// Evaluate the tree on one feature row.
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of leaves.
    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Depth of the deepest leaf (root split counts as 1).
    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A trained boosted ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Constant starting prediction (training label mean).
    pub base_score: f64,
    /// Trees in boosting order; leaf values are already shrunk.
    pub trees: Vec<Node>,
    /// Number of feature columns the model expects.
    pub n_features: usize,
    /// Hyperparameters used for training.
    pub params: GbtHyperParams,
    /// Training MSE after each round (diagnostic).
    pub train_mse: Vec<f64>,
}

impl GbtModel {
    /// Predict one row.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_features);
        self.base_score + self.trees.iter().map(|t| t.eval(row)).sum::<f64>()
    }

    /// Predict a batch of rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// L1 soft-threshold used by the leaf weight.
fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

fn leaf_weight(g: f64, h: f64, params: &GbtHyperParams) -> f64 {
    -params.learning_rate * soft_threshold(g, params.reg_alpha) / (h + params.reg_lambda)
}

fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, params: &GbtHyperParams) -> f64 {
    let lambda = params.reg_lambda;
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
        - (gl + gr) * (gl + gr) / (hl + hr + lambda))
        - params.gamma
}

const NO_NODE: u32 = u32::MAX;

struct ArenaNode {
    feature: usize,
    threshold: f64,
    left: u32,
    right: u32,
    leaf: Option<f64>,
}

#[derive(Clone, Copy)]
struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Train an ensemble on row-major features and one label per row.
pub fn train(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &GbtHyperParams,
) -> Result<GbtModel, GbtError> {
    params.validate()?;
    let m = features.len();
    if m == 0 {
        return Err(GbtError::BadData("no training rows".into()));
    }
    if labels.len() != m {
        return Err(GbtError::BadData(format!(
            "{} labels for {} rows",
            labels.len(),
            m
        )));
    }
    let p = features[0].len();
    if p == 0 {
        return Err(GbtError::BadData("no feature columns".into()));
    }
    for (i, row) in features.iter().enumerate() {
        if row.len() != p {
            return Err(GbtError::BadData(format!(
                "row {i} has {} columns, expected {p}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GbtError::BadData(format!("non-finite feature in row {i}")));
        }
    }
    if labels.iter().any(|v| !v.is_finite()) {
        return Err(GbtError::BadData("non-finite label".into()));
    }

    // Column-major copy and one stable presort per feature.  Ties keep
    // ascending row order, which pins the scan order exactly.
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| features.iter().map(|r| r[j]).collect())
        .collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..m as u32).collect();
            idx.sort_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .expect("features are finite")
            });
            idx
        })
        .collect();

    let base_score = labels.iter().sum::<f64>() / m as f64;
    let mut preds = vec![base_score; m];
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut train_mse = Vec::with_capacity(params.n_estimators);

    let n_in_rows = ((params.subsample * m as f64).floor() as usize).clamp(1, m);
    let n_in_cols = ((params.colsample_bytree * p as f64).floor() as usize).clamp(1, p);
    let mut all_rows: Vec<u32> = (0..m as u32).collect();
    let mut all_cols: Vec<usize> = (0..p).collect();

    for _round in 0..params.n_estimators {
        // Row and column draws advance the generator even when they keep
        // everything, so toggling subsampling does not shift later draws.
        let in_bag: Vec<u32> = if n_in_rows < m {
            all_rows.shuffle(&mut rng);
            let mut chosen = all_rows[..n_in_rows].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            all_rows.clone()
        };
        let features_used: Vec<usize> = if n_in_cols < p {
            all_cols.shuffle(&mut rng);
            let mut chosen = all_cols[..n_in_cols].to_vec();
            chosen.sort_unstable();
            chosen
        } else {
            all_cols.clone()
        };

        let grad: Vec<f64> = (0..m).map(|i| preds[i] - labels[i]).collect();

        // node_of_row: arena id per in-bag row, NO_NODE for the rest.
        let mut node_of_row = vec![NO_NODE; m];
        for &r in &in_bag {
            node_of_row[r as usize] = 0;
        }
        let mut arena: Vec<ArenaNode> = vec![ArenaNode {
            feature: 0,
            threshold: 0.0,
            left: NO_NODE,
            right: NO_NODE,
            leaf: None,
        }];
        let mut active: Vec<u32> = vec![0];

        for depth in 0..=params.max_depth {
            if active.is_empty() {
                break;
            }
            // Slot lookup and per-node totals, summed in row-index order
            // so they do not depend on any particular feature's sort.
            let mut slot_of = vec![NO_NODE; arena.len()];
            for (s, &id) in active.iter().enumerate() {
                slot_of[id as usize] = s as u32;
            }
            let k = active.len();
            let mut g_tot = vec![0.0; k];
            let mut h_tot = vec![0.0; k];
            for r in 0..m {
                let id = node_of_row[r];
                if id == NO_NODE {
                    continue;
                }
                let s = slot_of[id as usize];
                if s == NO_NODE {
                    continue;
                }
                g_tot[s as usize] += grad[r];
                h_tot[s as usize] += 1.0;
            }

            if depth == params.max_depth {
                for (s, &id) in active.iter().enumerate() {
                    arena[id as usize].leaf = Some(leaf_weight(g_tot[s], h_tot[s], params));
                }
                break;
            }

            // Scan every candidate feature once per level; running left
            // stats per active node.
            let mut best: Vec<Option<BestSplit>> = vec![None; k];
            let mut gl = vec![0.0; k];
            let mut hl = vec![0.0; k];
            let mut last = vec![0.0; k];
            let mut seen = vec![false; k];
            for &j in &features_used {
                gl.iter_mut().for_each(|v| *v = 0.0);
                hl.iter_mut().for_each(|v| *v = 0.0);
                seen.iter_mut().for_each(|v| *v = false);
                let col = &cols[j];
                for &r32 in &sorted[j] {
                    let r = r32 as usize;
                    let id = node_of_row[r];
                    if id == NO_NODE {
                        continue;
                    }
                    let s = slot_of[id as usize];
                    if s == NO_NODE {
                        continue;
                    }
                    let s = s as usize;
                    let x = col[r];
                    if seen[s] && x > last[s] {
                        let threshold = 0.5 * (last[s] + x);
                        // Guard against midpoints that collapse onto the
                        // left value, which would desynchronize the
                        // partition from the scanned statistics.
                        if threshold > last[s] {
                            let gr = g_tot[s] - gl[s];
                            let hr = h_tot[s] - hl[s];
                            if hl[s] >= params.min_child_weight
                                && hr >= params.min_child_weight
                            {
                                let gain = split_gain(gl[s], hl[s], gr, hr, params);
                                if gain > 0.0
                                    && best[s].map_or(true, |b| gain > b.gain)
                                {
                                    best[s] = Some(BestSplit {
                                        gain,
                                        feature: j,
                                        threshold,
                                    });
                                }
                            }
                        }
                    }
                    gl[s] += grad[r];
                    hl[s] += 1.0;
                    last[s] = x;
                    seen[s] = true;
                }
            }

            // Materialize splits and leaves; then repartition rows.
            let mut next_active = Vec::new();
            for (s, &id) in active.iter().enumerate() {
                match best[s] {
                    Some(b) => {
                        let left = arena.len() as u32;
                        let right = left + 1;
                        arena.push(ArenaNode {
                            feature: 0,
                            threshold: 0.0,
                            left: NO_NODE,
                            right: NO_NODE,
                            leaf: None,
                        });
                        arena.push(ArenaNode {
                            feature: 0,
                            threshold: 0.0,
                            left: NO_NODE,
                            right: NO_NODE,
                            leaf: None,
                        });
                        let node = &mut arena[id as usize];
                        node.feature = b.feature;
                        node.threshold = b.threshold;
                        node.left = left;
                        node.right = right;
                        next_active.push(left);
                        next_active.push(right);
                    }
                    None => {
                        arena[id as usize].leaf =
                            Some(leaf_weight(g_tot[s], h_tot[s], params));
                    }
                }
            }
            for r in 0..m {
                let id = node_of_row[r];
                if id == NO_NODE {
                    continue;
                }
                let node = &arena[id as usize];
                if node.leaf.is_none() && node.left != NO_NODE {
                    node_of_row[r] = if cols[node.feature][r] < node.threshold {
                        node.left
                    } else {
                        node.right
                    };
                }
            }
            active = next_active;
        }

        let tree = to_nested(&arena, 0);
        // The whole ensemble predicts every row, in-bag or not.
        for i in 0..m {
            let mut node = &tree;
            let value = loop {
                match node {
                    Node::Leaf { value } => break *value,
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        node = if cols[*feature][i] < *threshold { left } else { right };
                    }
                }
            };
            preds[i] += value;
        }
        let mse = (0..m)
            .map(|i| (preds[i] - labels[i]).powi(2))
            .sum::<f64>()
            / m as f64;
        train_mse.push(mse);
        trees.push(tree);
    }

    Ok(GbtModel {
        base_score,
        trees,
        n_features: p,
        params: params.clone(),
        train_mse,
    })
}

fn to_nested(arena: &[ArenaNode], id: u32) -> Node {
    let node = &arena[id as usize];
    match node.leaf {
        Some(value) => Node::Leaf { value },
        None => Node::Split {
            feature: node.feature,
            threshold: node.threshold,
            left: Box::new(to_nested(arena, node.left)),
            right: Box::new(to_nested(arena, node.right)),
        },
    }
}
