//! Windowed feature construction for the torque models.
//!
//! The learners see a sliding window of the last `window` samples,
//! flattened oldest-first into one row.  Two layouts exist:
//!
//! * joints 1-3 (trained together): each step contributes
//!   `theta_1, thetad_1, thetadd_1, theta_2, ..., thetadd_3` (9 values,
//!   so 90 features for the default 10-step window);
//! * joints 4 and 5 (trained individually): each step contributes all six
//!   positions plus that joint's velocity and acceleration (8 values).
//!
//! Labels are the measured torques of the group's channels at the newest
//! step of the window.  Joint 6 has no model; it is not used downstream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot::JointState;
use crate::trajlog::TrajectoryLog;

/// Errors raised during feature construction.
#[derive(Debug, Error)]
pub enum FeatureError {
    /// The requested torque channel has no feature layout.
    #[error("no feature layout for torque channel {0} (joint 6 is not modeled)")]
    UnsupportedChannel(usize),
    /// A log is too short for the requested window.
    #[error("log with {len} samples is shorter than the {window}-sample window")]
    LogTooShort {
        /// Samples in the log.
        len: usize,
        /// Window length.
        window: usize,
    },
    /// Invalid parameter.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// Logs with inconsistent joint counts were mixed.
    #[error("log has {got} joints, expected {expected}")]
    JointMismatch {
        /// Expected joint count.
        expected: usize,
        /// Found joint count.
        got: usize,
    },
}

/// Which torque channels a model covers, and therefore which features it
/// sees per window step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Joints 1-3, trained together on their own full state.
    Joints123,
    /// Joint 4: all six positions plus its own velocity and acceleration.
    Joint4,
    /// Joint 5: all six positions plus its own velocity and acceleration.
    Joint5,
}

impl FeatureGroup {
    /// Group responsible for a 0-based torque channel.
    pub fn for_channel(channel: usize) -> Result<Self, FeatureError> {
        match channel {
            0 | 1 | 2 => Ok(FeatureGroup::Joints123),
            3 => Ok(FeatureGroup::Joint4),
            4 => Ok(FeatureGroup::Joint5),
            other => Err(FeatureError::UnsupportedChannel(other)),
        }
    }

    /// 0-based torque channels this group predicts.
    pub fn channels(&self) -> &'static [usize] {
        match self {
            FeatureGroup::Joints123 => &[0, 1, 2],
            FeatureGroup::Joint4 => &[3],
            FeatureGroup::Joint5 => &[4],
        }
    }

    /// Number of feature values contributed by one window step.
    pub fn values_per_step(&self, n_joints: usize) -> usize {
        match self {
            FeatureGroup::Joints123 => 9,
            FeatureGroup::Joint4 | FeatureGroup::Joint5 => n_joints + 2,
        }
    }

    /// Smallest joint count a log must have for this group.
    pub fn min_joints(&self) -> usize {
        match self {
            FeatureGroup::Joints123 => 3,
            FeatureGroup::Joint4 => 4,
            FeatureGroup::Joint5 => 5,
        }
    }

    /// Append one step's feature values for `state` to `out`.
    pub fn push_step_values(&self, state: &JointState, out: &mut Vec<f64>) {
        match self {
            FeatureGroup::Joints123 => {
                for j in 0..3 {
                    out.push(state.theta[j]);
                    out.push(state.theta_dot[j]);
                    out.push(state.theta_ddot[j]);
                }
            }
            FeatureGroup::Joint4 | FeatureGroup::Joint5 => {
                let j = self.channels()[0];
                for i in 0..state.len() {
                    out.push(state.theta[i]);
                }
                out.push(state.theta_dot[j]);
                out.push(state.theta_ddot[j]);
            }
        }
    }

    /// Human-readable column names for a `window`-step layout, oldest
    /// step first; lag 0 is the newest step.
    pub fn feature_names(&self, window: usize, n_joints: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(window * self.values_per_step(n_joints));
        for step in 0..window {
            let lag = window - 1 - step;
            match self {
                FeatureGroup::Joints123 => {
                    for j in 1..=3 {
                        names.push(format!("theta_{j}_lag{lag}"));
                        names.push(format!("thetad_{j}_lag{lag}"));
                        names.push(format!("thetadd_{j}_lag{lag}"));
                    }
                }
                FeatureGroup::Joint4 | FeatureGroup::Joint5 => {
                    let own = self.channels()[0] + 1;
                    for j in 1..=n_joints {
                        names.push(format!("theta_{j}_lag{lag}"));
                    }
                    names.push(format!("thetad_{own}_lag{lag}"));
                    names.push(format!("thetadd_{own}_lag{lag}"));
                }
            }
        }
        names
    }
}

/// Per-column z-score statistics fitted on a training set.
///
/// Constant columns keep a standard deviation of 1 so normalization is
/// always well defined (the column simply maps to zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Column means.
    pub mean: Vec<f64>,
    /// Column standard deviations (population), constant columns -> 1.
    pub std: Vec<f64>,
}

impl Normalization {
    /// Fit statistics over feature rows.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, FeatureError> {
        let first = rows
            .first()
            .ok_or_else(|| FeatureError::InvalidParameter("no rows to fit".into()))?;
        let p = first.len();
        let m = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for row in rows {
            for (acc, &v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= m;
        }
        let mut var = vec![0.0; p];
        for row in rows {
            for j in 0..p {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / m).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Normalization { mean, std })
    }

    /// Normalize one row in place.
    pub fn apply_row(&self, row: &mut [f64]) {
        for j in 0..row.len() {
            row[j] = (row[j] - self.mean[j]) / self.std[j];
        }
    }

    /// Normalize many rows in place.
    pub fn apply(&self, rows: &mut [Vec<f64>]) {
        for row in rows {
            self.apply_row(row);
        }
    }
}

/// A supervised dataset: one feature matrix, one label vector per channel
/// of the group, and the row ranges contributed by each source log.
#[derive(Clone, Debug)]
pub struct Dataset {
    /// Feature layout.
    pub group: FeatureGroup,
    /// Window length in steps.
    pub window: usize,
    /// Feature rows.
    pub features: Vec<Vec<f64>>,
    /// Label vectors, one per channel in [`FeatureGroup::channels`] order.
    pub labels: Vec<Vec<f64>>,
    /// Half-open row ranges per source trajectory.
    pub blocks: Vec<std::ops::Range<usize>>,
}

impl Dataset {
    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    /// Number of feature columns.
    pub fn n_cols(&self) -> usize {
        self.features.first().map_or(0, |r| r.len())
    }

    /// Build a dataset from logs: one row per sample with a full window
    /// behind it, labels taken at the newest step.
    pub fn from_logs(
        logs: &[&TrajectoryLog],
        group: FeatureGroup,
        window: usize,
    ) -> Result<Self, FeatureError> {
        if window == 0 {
            return Err(FeatureError::InvalidParameter(
                "window must be at least 1".into(),
            ));
        }
        if logs.is_empty() {
            return Err(FeatureError::InvalidParameter("no logs given".into()));
        }
        let n_joints = logs[0].n_joints();
        if n_joints < group.min_joints() {
            return Err(FeatureError::JointMismatch {
                expected: group.min_joints(),
                got: n_joints,
            });
        }
        let mut data = Dataset {
            group,
            window,
            features: Vec::new(),
            labels: vec![Vec::new(); group.channels().len()],
            blocks: Vec::new(),
        };
        for log in logs {
            if log.n_joints() != n_joints {
                return Err(FeatureError::JointMismatch {
                    expected: n_joints,
                    got: log.n_joints(),
                });
            }
            if log.len() < window {
                return Err(FeatureError::LogTooShort {
                    len: log.len(),
                    window,
                });
            }
            let start = data.features.len();
            for k in (window - 1)..log.len() {
                data.features.push(window_row(log, group, window, k));
                for (c, &channel) in group.channels().iter().enumerate() {
                    data.labels[c].push(log.tau[k][channel]);
                }
            }
            data.blocks.push(start..data.features.len());
        }
        Ok(data)
    }

    /// Split into train and validation sets along the time axis.  The cut
    /// lands at `train_frac` of the rows, snapped to the nearest source
    /// trajectory boundary when more than one trajectory is present, so
    /// whole trajectories stay on one side.
    pub fn split_blocks(&self, train_frac: f64) -> Result<(Dataset, Dataset), FeatureError> {
        check_frac(train_frac)?;
        let n = self.n_rows();
        let target = (train_frac * n as f64).round() as usize;
        let cut = if self.blocks.len() > 1 {
            // Snap to the block edge closest to the target row count.
            self.blocks
                .iter()
                .map(|b| b.end)
                .filter(|&e| e < n)
                .min_by_key(|&e| e.abs_diff(target))
                .unwrap_or(target)
        } else {
            target
        };
        let cut = cut.clamp(1, n.saturating_sub(1));
        Ok((self.take_rows(0..cut), self.take_rows(cut..n)))
    }

    /// Split into train and validation sets by shuffled rows.
    pub fn split_rows(&self, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset), FeatureError> {
        check_frac(train_frac)?;
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..self.n_rows()).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let cut = ((train_frac * self.n_rows() as f64).round() as usize)
            .clamp(1, self.n_rows().saturating_sub(1));
        Ok((
            self.take_indices(&order[..cut]),
            self.take_indices(&order[cut..]),
        ))
    }

    fn take_rows(&self, range: std::ops::Range<usize>) -> Dataset {
        let idx: Vec<usize> = range.collect();
        self.take_indices(&idx)
    }

    fn take_indices(&self, idx: &[usize]) -> Dataset {
        Dataset {
            group: self.group,
            window: self.window,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: self
                .labels
                .iter()
                .map(|l| idx.iter().map(|&i| l[i]).collect())
                .collect(),
            blocks: vec![0..idx.len()],
        }
    }

    /// Fit normalization on this set and apply it in place.
    pub fn normalize(&mut self) -> Result<Normalization, FeatureError> {
        let norm = Normalization::fit(&self.features)?;
        norm.apply(&mut self.features);
        Ok(norm)
    }

    /// Apply existing normalization in place (for validation/test sets).
    pub fn apply_normalization(&mut self, norm: &Normalization) {
        norm.apply(&mut self.features);
    }
}

fn check_frac(frac: f64) -> Result<(), FeatureError> {
    if frac > 0.0 && frac < 1.0 {
        Ok(())
    } else {
        Err(FeatureError::InvalidParameter(format!(
            "split fraction must lie in (0, 1), got {frac}"
        )))
    }
}

/// The feature row for sample `k` of a log (requires `k >= window - 1`).
pub fn window_row(
    log: &TrajectoryLog,
    group: FeatureGroup,
    window: usize,
    k: usize,
) -> Vec<f64> {
    let n = log.n_joints();
    let mut row = Vec::with_capacity(window * group.values_per_step(n));
    for s in (k + 1 - window)..=k {
        let state = JointState {
            theta: log.theta[s].clone(),
            theta_dot: log.theta_dot[s].clone(),
            theta_ddot: log.theta_ddot[s].clone(),
        };
        group.push_step_values(&state, &mut row);
    }
    row
}
