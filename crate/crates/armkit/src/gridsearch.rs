//! Coordinate-descent hyperparameter search over lookup tables.
//!
//! The search sweeps one hyperparameter at a time over a caller-supplied
//! list of candidate values while all other parameters stay at their
//! current best, writes the winning value back, and moves on to the next
//! parameter.  A configured number of full passes repeats the cycle.  The
//! objective (typically a validation RMSE) is evaluated exactly
//! `passes * sum(|list_i|)` times, which keeps the cost predictable even
//! when a single evaluation means training a full ensemble.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbt::GbtHyperParams;

/// Errors raised by the hyperparameter search.
#[derive(Debug, Error)]
pub enum GridSearchError {
    /// The search space is malformed.
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    /// A candidate value could not be applied to the parameter set.
    #[error("cannot set {name} = {value}: {reason}")]
    BadCandidate {
        /// Parameter name.
        name: String,
        /// Offending value.
        value: f64,
        /// Underlying reason.
        reason: String,
    },
    /// The objective failed or returned a non-finite score.
    #[error("objective failed: {0}")]
    Objective(String),
}

/// A named candidate list for one tunable hyperparameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamList {
    /// Hyperparameter name (see [`GbtHyperParams::TUNABLE`]).
    pub name: String,
    /// Candidate values, swept in order.
    pub values: Vec<f64>,
}

/// The full search space: parameter lists in sweep order plus the number
/// of passes over all of them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperSpace {
    /// Parameter lists, swept in this order within each pass.
    pub entries: Vec<ParamList>,
    /// Number of full passes over all entries.
    pub passes: usize,
}

impl HyperSpace {
    /// Build a space from `(name, values)` pairs.
    pub fn new(entries: &[(&str, &[f64])], passes: usize) -> Self {
        HyperSpace {
            entries: entries
                .iter()
                .map(|(name, values)| ParamList {
                    name: (*name).to_string(),
                    values: values.to_vec(),
                })
                .collect(),
            passes,
        }
    }

    /// Total objective evaluations the search will perform.
    pub fn total_evaluations(&self) -> usize {
        self.passes * self.entries.iter().map(|e| e.values.len()).sum::<usize>()
    }

    /// Check names, lists, and pass count before any objective call.
    pub fn validate(&self) -> Result<(), GridSearchError> {
        if self.passes == 0 {
            return Err(GridSearchError::InvalidSpace("passes must be >= 1".into()));
        }
        if self.entries.is_empty() {
            return Err(GridSearchError::InvalidSpace("no parameter lists".into()));
        }
        let mut probe = GbtHyperParams::default();
        for entry in &self.entries {
            if entry.values.is_empty() {
                return Err(GridSearchError::InvalidSpace(format!(
                    "empty candidate list for '{}'",
                    entry.name
                )));
            }
            for &v in &entry.values {
                if !v.is_finite() {
                    return Err(GridSearchError::InvalidSpace(format!(
                        "non-finite candidate for '{}'",
                        entry.name
                    )));
                }
            }
            probe
                .set(&entry.name, entry.values[0])
                .map_err(|e| GridSearchError::InvalidSpace(e.to_string()))?;
        }
        Ok(())
    }
}

/// One objective evaluation in the search trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Zero-based pass index.
    pub pass: usize,
    /// Parameter being swept.
    pub param: String,
    /// Candidate value evaluated.
    pub value: f64,
    /// Objective score (lower is better).
    pub score: f64,
}

/// Result of a completed search.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Parameter set after the final sweep.
    pub best: GbtHyperParams,
    /// Objective score of `best` (the winning score of the last sweep).
    pub best_score: f64,
    /// Number of objective evaluations performed.
    pub evaluations: usize,
    /// Every evaluation in order.
    pub trace: Vec<EvalRecord>,
}

/// Run the coordinate search.  `objective` maps a full parameter set to a
/// score to minimize; any error aborts the search.  Within a sweep, ties
/// go to the earlier list entry.
pub fn coordinate_grid_search<F, E>(
    space: &HyperSpace,
    initial: &GbtHyperParams,
    mut objective: F,
) -> Result<SearchOutcome, GridSearchError>
where
    F: FnMut(&GbtHyperParams) -> Result<f64, E>,
    E: std::fmt::Display,
{
    space.validate()?;
    let mut current = initial.clone();
    let mut best_score = f64::INFINITY;
    let mut trace = Vec::with_capacity(space.total_evaluations());
    for pass in 0..space.passes {
        for entry in &space.entries {
            let mut sweep_best = f64::INFINITY;
            let mut sweep_value = entry.values[0];
            for &value in &entry.values {
                let mut candidate = current.clone();
                candidate
                    .set(&entry.name, value)
                    .map_err(|e| GridSearchError::BadCandidate {
                        name: entry.name.clone(),
                        value,
                        reason: e.to_string(),
                    })?;
                let score = objective(&candidate)
                    .map_err(|e| GridSearchError::Objective(e.to_string()))?;
                if !score.is_finite() {
                    return Err(GridSearchError::Objective(format!(
                        "non-finite score for {} = {}",
                        entry.name, value
                    )));
                }
                trace.push(EvalRecord {
                    pass,
                    param: entry.name.clone(),
                    value,
                    score,
                });
                if score < sweep_best {
                    sweep_best = score;
                    sweep_value = value;
                }
            }
            current
                .set(&entry.name, sweep_value)
                .map_err(|e| GridSearchError::BadCandidate {
                    name: entry.name.clone(),
                    value: sweep_value,
                    reason: e.to_string(),
                })?;
            best_score = sweep_best;
        }
    }
    let evaluations = trace.len();
    Ok(SearchOutcome {
        best: current,
        best_score,
        evaluations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Separable bowl: each parameter contributes independently, so one
    /// pass of coordinate descent must land on the global minimizer.
    fn separable(p: &GbtHyperParams) -> Result<f64, GridSearchError> {
        Ok((p.learning_rate - 0.0015).powi(2)
            + (p.reg_lambda - 3.0).powi(2)
            + (p.max_depth as f64 - 5.0).powi(2))
    }

    fn space() -> HyperSpace {
        HyperSpace::new(
            &[
                (
                    "learning_rate",
                    &[0.0005, 0.001, 0.0015, 0.002, 0.0025, 0.003][..],
                ),
                ("reg_lambda", &[0.0, 1.0, 3.0, 10.0][..]),
                ("max_depth", &[3.0, 5.0, 8.0][..]),
            ],
            3,
        )
    }

    #[test]
    fn separable_objective_finds_global_minimum_in_one_pass() {
        let mut one_pass = space();
        one_pass.passes = 1;
        let out = coordinate_grid_search(&one_pass, &GbtHyperParams::default(), separable).unwrap();
        assert_eq!(out.best.learning_rate, 0.0015);
        assert_eq!(out.best.reg_lambda, 3.0);
        assert_eq!(out.best.max_depth, 5);
        assert!(out.best_score < 1e-12);
    }

    #[test]
    fn evaluation_count_is_exactly_passes_times_list_sizes() {
        let space = space();
        let mut calls = 0usize;
        let out = coordinate_grid_search(&space, &GbtHyperParams::default(), |p| {
            calls += 1;
            separable(p)
        })
        .unwrap();
        assert_eq!(space.total_evaluations(), 3 * (6 + 4 + 3));
        assert_eq!(calls, space.total_evaluations());
        assert_eq!(out.evaluations, calls);
        assert_eq!(out.trace.len(), calls);
    }

    #[test]
    fn winner_is_written_back_before_the_next_sweep() {
        // The second parameter's best depends on the first one's winner:
        // if reg_lambda were not updated to 5 first, reg_alpha would pick
        // 0 instead of 5.
        let space = HyperSpace::new(
            &[
                ("reg_lambda", &[0.0, 5.0][..]),
                ("reg_alpha", &[0.0, 5.0][..]),
            ],
            1,
        );
        let objective = |p: &GbtHyperParams| -> Result<f64, GridSearchError> {
            Ok(2.0 * (p.reg_lambda - 5.0).powi(2) + (p.reg_alpha - p.reg_lambda).powi(2))
        };
        let out = coordinate_grid_search(&space, &GbtHyperParams::default(), objective).unwrap();
        assert_eq!(out.best.reg_lambda, 5.0);
        assert_eq!(out.best.reg_alpha, 5.0);
        assert_eq!(out.best_score, 0.0);
    }

    #[test]
    fn ties_prefer_the_earlier_list_entry() {
        let space = HyperSpace::new(&[("reg_lambda", &[2.0, 4.0][..])], 1);
        let out = coordinate_grid_search(&space, &GbtHyperParams::default(), |p| {
            Ok::<f64, GridSearchError>((p.reg_lambda - 3.0).powi(2))
        })
        .unwrap();
        assert_eq!(out.best.reg_lambda, 2.0);
    }

    #[test]
    fn unknown_parameter_is_rejected_before_any_evaluation() {
        let space = HyperSpace::new(&[("no_such_param", &[1.0][..])], 1);
        let mut calls = 0usize;
        let err = coordinate_grid_search(&space, &GbtHyperParams::default(), |_| {
            calls += 1;
            Ok::<f64, GridSearchError>(0.0)
        })
        .unwrap_err();
        assert!(matches!(err, GridSearchError::InvalidSpace(_)));
        assert_eq!(calls, 0);
    }

    #[test]
    fn integer_parameters_round_to_valid_values() {
        let space = HyperSpace::new(&[("n_estimators", &[10.4, 99.6][..])], 1);
        let out = coordinate_grid_search(&space, &GbtHyperParams::default(), |p| {
            Ok::<f64, GridSearchError>(p.n_estimators as f64)
        })
        .unwrap();
        assert_eq!(out.best.n_estimators, 10);
    }
}
