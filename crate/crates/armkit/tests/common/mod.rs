//! Shared oracles and helpers for the integration tests.
//!
//! Everything here is written independently of the library internals:
//! closed-form textbook dynamics for a planar 2R arm, deterministic state
//! sampling, and a handful of small utilities.  The oracles intentionally
//! use different derivations (Lagrangian closed forms, exhaustive
//! enumeration) than the code under test.

#![allow(dead_code)]

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Physical parameters of a planar 2R arm: link lengths, masses, COM
/// distances from the proximal joint, and inertias about the COM.
#[derive(Clone, Copy, Debug)]
pub struct TwoLinkParams {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
    pub lc1: f64,
    pub lc2: f64,
    pub i1: f64,
    pub i2: f64,
    /// Gravitational acceleration magnitude; gravity points along -y.
    pub g: f64,
}

impl TwoLinkParams {
    pub fn nominal() -> Self {
        TwoLinkParams {
            l1: 0.8,
            l2: 0.6,
            m1: 2.5,
            m2: 1.4,
            lc1: 0.45,
            lc2: 0.25,
            i1: 0.12,
            i2: 0.05,
            g: 9.81,
        }
    }
}

/// Closed-form mass matrix of the planar 2R arm (standard Lagrangian
/// derivation for an elbow manipulator in the x-y plane).
pub fn two_link_mass_matrix(p: &TwoLinkParams, theta2: f64) -> Matrix2<f64> {
    let c2 = theta2.cos();
    let d11 = p.m1 * p.lc1 * p.lc1
        + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2 + 2.0 * p.l1 * p.lc2 * c2)
        + p.i1
        + p.i2;
    let d12 = p.m2 * (p.lc2 * p.lc2 + p.l1 * p.lc2 * c2) + p.i2;
    let d22 = p.m2 * p.lc2 * p.lc2 + p.i2;
    Matrix2::new(d11, d12, d12, d22)
}

/// Closed-form inverse dynamics of the planar 2R arm: joint torques for
/// the given positions, velocities, and accelerations, gravity along -y.
pub fn two_link_inverse_dynamics(
    p: &TwoLinkParams,
    theta: Vector2<f64>,
    theta_dot: Vector2<f64>,
    theta_ddot: Vector2<f64>,
) -> Vector2<f64> {
    let m = two_link_mass_matrix(p, theta[1]);
    let s2 = theta[1].sin();
    let h = -p.m2 * p.l1 * p.lc2 * s2;
    let coriolis = Vector2::new(
        h * (2.0 * theta_dot[0] * theta_dot[1] + theta_dot[1] * theta_dot[1]),
        -h * theta_dot[0] * theta_dot[0],
    );
    let c1 = theta[0].cos();
    let c12 = (theta[0] + theta[1]).cos();
    let grav = Vector2::new(
        (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * c1 + p.m2 * p.lc2 * p.g * c12,
        p.m2 * p.lc2 * p.g * c12,
    );
    m * theta_ddot + coriolis + grav
}

/// Closed-form kinetic plus potential energy of the planar 2R arm, with
/// the potential referenced so that it matches a base-origin reference.
pub fn two_link_energy(
    p: &TwoLinkParams,
    theta: Vector2<f64>,
    theta_dot: Vector2<f64>,
) -> f64 {
    let m = two_link_mass_matrix(p, theta[1]);
    let kinetic = 0.5 * theta_dot.dot(&(m * theta_dot));
    let s1 = theta[0].sin();
    let s12 = (theta[0] + theta[1]).sin();
    let y1 = p.lc1 * s1;
    let y2 = p.l1 * s1 + p.lc2 * s12;
    kinetic + p.m1 * p.g * y1 + p.m2 * p.g * y2
}

/// Deterministic sampler for joint states in given ranges.
pub struct StateSampler {
    rng: ChaCha12Rng,
}

impl StateSampler {
    pub fn new(seed: u64) -> Self {
        StateSampler {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Uniform value in `[-scale, scale]`.
    pub fn uniform(&mut self, scale: f64) -> f64 {
        (self.rng.random::<f64>() * 2.0 - 1.0) * scale
    }

    /// Vector of uniform values in `[-scale, scale]`.
    pub fn uniform_vec(&mut self, n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|_| self.uniform(scale)).collect()
    }
}

/// Convert the oracle parameters into the library's planar chain input:
/// `(length, mass, com_offset_from_proximal_end, izz)` per link.
pub fn two_link_as_planar(p: &TwoLinkParams) -> [(f64, f64, f64, f64); 2] {
    [
        (p.l1, p.m1, p.lc1, p.i1),
        (p.l2, p.m2, p.lc2, p.i2),
    ]
}

// ---------------------------------------------------------------------
// Brute-force regression-tree oracle.
//
// Builds a single boosting tree by exhaustive enumeration: every feature
// and every midpoint between consecutive distinct sorted values is a
// candidate, scored straight from the regularized second-order objective.
// Recursion is depth-first, one node at a time, with the documented
// tie-breaks (positive gain only, strictly larger gain wins, earlier
// feature then lower threshold on ties).  Statistics accumulate in row
// index order for node totals and in value-sorted order for the left
// side, so a correct learner is expected to match bit for bit.
// ---------------------------------------------------------------------

use armkit::gbt::{GbtHyperParams, Node};

fn soft(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Exhaustively construct the first tree a booster should produce.
pub fn oracle_first_tree(
    features: &[Vec<f64>],
    labels: &[f64],
    params: &GbtHyperParams,
) -> Node {
    let m = features.len();
    let base = labels.iter().sum::<f64>() / m as f64;
    let grad: Vec<f64> = (0..m).map(|i| base - labels[i]).collect();
    let rows: Vec<usize> = (0..m).collect();
    oracle_node(features, &grad, &rows, 0, params)
}

fn oracle_node(
    features: &[Vec<f64>],
    grad: &[f64],
    rows: &[usize],
    depth: usize,
    params: &GbtHyperParams,
) -> Node {
    let mut g = 0.0;
    let mut h = 0.0;
    for &r in rows {
        g += grad[r];
        h += 1.0;
    }
    let as_leaf = Node::Leaf {
        value: -params.learning_rate * soft(g, params.reg_alpha) / (h + params.reg_lambda),
    };
    if depth == params.max_depth {
        return as_leaf;
    }

    let lambda = params.reg_lambda;
    let p = features[0].len();
    let mut best: Option<(f64, usize, f64)> = None;
    for j in 0..p {
        // Stable sort of an index-ascending set: ties stay in row order.
        let mut order = rows.to_vec();
        order.sort_by(|&a, &b| features[a][j].partial_cmp(&features[b][j]).unwrap());
        let mut gl = 0.0;
        let mut hl = 0.0;
        for w in 1..order.len() {
            gl += grad[order[w - 1]];
            hl += 1.0;
            let prev = features[order[w - 1]][j];
            let x = features[order[w]][j];
            if x > prev {
                let threshold = 0.5 * (prev + x);
                if threshold > prev {
                    let gr = g - gl;
                    let hr = h - hl;
                    if hl >= params.min_child_weight && hr >= params.min_child_weight {
                        let gain = 0.5
                            * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda)
                                - (gl + gr) * (gl + gr) / (hl + hr + lambda))
                            - params.gamma;
                        if gain > 0.0 && best.map_or(true, |(bg, _, _)| gain > bg) {
                            best = Some((gain, j, threshold));
                        }
                    }
                }
            }
        }
    }

    match best {
        None => as_leaf,
        Some((_, feature, threshold)) => {
            let mut left_rows = Vec::new();
            let mut right_rows = Vec::new();
            for &r in rows {
                if features[r][feature] < threshold {
                    left_rows.push(r);
                } else {
                    right_rows.push(r);
                }
            }
            Node::Split {
                feature,
                threshold,
                left: Box::new(oracle_node(features, grad, &left_rows, depth + 1, params)),
                right: Box::new(oracle_node(features, grad, &right_rows, depth + 1, params)),
            }
        }
    }
}

/// Assert two trees are structurally identical with numerically equal
/// thresholds and leaf values.
pub fn assert_trees_match(got: &Node, want: &Node, path: &str) {
    match (got, want) {
        (Node::Leaf { value: a }, Node::Leaf { value: b }) => {
            assert!(a == b, "leaf value mismatch at {path}: {a} vs {b}");
        }
        (
            Node::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            Node::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => {
            assert_eq!(fa, fb, "split feature mismatch at {path}");
            assert!(ta == tb, "threshold mismatch at {path}: {ta} vs {tb}");
            assert_trees_match(la, lb, &format!("{path}L"));
            assert_trees_match(ra, rb, &format!("{path}R"));
        }
        _ => panic!("structure mismatch at {path}: leaf vs split"),
    }
}
