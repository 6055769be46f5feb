//! Learned virtual force sensor: tree maps from joint angles and
//! filtered external torques to the three sensed wrench axes.
//!
//! Each axis has its own map and its own designated torque channels:
//! the moment about the end-effector x axis reads the fifth joint's
//! external torque, the moment about y reads the fourth, and the normal
//! force reads the first three.  All maps additionally see every joint
//! angle, and all inputs are windowed over the recent history exactly
//! like the torque-model features (oldest step first).

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbt::{train, GbtError, GbtHyperParams, GbtModel};
use crate::observer::Wrench;
use crate::trajlog::TrajectoryLog;

/// Errors raised by the learned wrench maps.
#[derive(Debug, Error)]
pub enum WrenchError {
    /// Tree training failed.
    #[error(transparent)]
    Gbt(#[from] GbtError),
    /// Inconsistent inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Serialization failure.
    #[error("wrench model (de)serialization failed: {0}")]
    Serde(String),
}

/// One sensed axis of the virtual force sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WrenchTarget {
    /// Moment about the end-effector x axis.
    MX,
    /// Moment about the end-effector y axis.
    MY,
    /// Normal force along the end-effector z axis.
    FZ,
}

impl WrenchTarget {
    /// All targets in serialization order.
    pub const ALL: [WrenchTarget; 3] = [WrenchTarget::MX, WrenchTarget::MY, WrenchTarget::FZ];

    /// Filtered external-torque channels this axis reads.
    pub fn torque_channels(&self) -> &'static [usize] {
        match self {
            WrenchTarget::MX => &[4],
            WrenchTarget::MY => &[3],
            WrenchTarget::FZ => &[0, 1, 2],
        }
    }

    /// Index of the labeled axis in the log's wrench vector
    /// `[fx, fy, fz, mx, my, mz]`.
    pub fn label_index(&self) -> usize {
        match self {
            WrenchTarget::MX => 3,
            WrenchTarget::MY => 4,
            WrenchTarget::FZ => 2,
        }
    }

    /// Feature values contributed per window step (six angles plus the
    /// designated torques).
    pub fn values_per_step(&self, n_joints: usize) -> usize {
        n_joints + self.torque_channels().len()
    }

    /// Display name.
    pub fn name(&self) -> &'static str {
        match self {
            WrenchTarget::MX => "m_x",
            WrenchTarget::MY => "m_y",
            WrenchTarget::FZ => "f_z",
        }
    }
}

/// One feature row for `target` at log row `k`: window steps oldest
/// first, each step contributing all joint angles then the designated
/// filtered torques.
pub fn wrench_feature_row(
    target: WrenchTarget,
    log: &TrajectoryLog,
    tau_hat: &[DVector<f64>],
    window: usize,
    k: usize,
) -> Vec<f64> {
    let n = log.n_joints();
    let mut row = Vec::with_capacity(window * target.values_per_step(n));
    for step in (0..window).rev() {
        let i = k - step;
        for j in 0..n {
            row.push(log.theta[i][j]);
        }
        for &c in target.torque_channels() {
            row.push(tau_hat[i][c]);
        }
    }
    row
}

/// One training run: a plant log plus the filtered external torques the
/// observer produced for it, aligned row for row.
pub struct WrenchRun<'a> {
    /// Plant log carrying the true wrench labels.
    pub log: &'a TrajectoryLog,
    /// Filtered external torque per log row.
    pub tau_hat: &'a [DVector<f64>],
}

impl WrenchRun<'_> {
    fn check(&self, window: usize) -> Result<(), WrenchError> {
        if self.tau_hat.len() != self.log.len() {
            return Err(WrenchError::InvalidInput(format!(
                "{} filtered-torque rows for a log of {}",
                self.tau_hat.len(),
                self.log.len()
            )));
        }
        if self.log.len() < window {
            return Err(WrenchError::InvalidInput(format!(
                "log with {} rows is shorter than the {window}-step window",
                self.log.len()
            )));
        }
        Ok(())
    }
}

const FORMAT_VERSION: u32 = 1;

/// The three learned maps plus the window they expect.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VirtualWrenchModel {
    /// Serialization format version.
    pub format_version: u32,
    /// Window length in steps.
    pub window: usize,
    /// Map for the moment about x.
    pub f_mx: GbtModel,
    /// Map for the moment about y.
    pub f_my: GbtModel,
    /// Map for the normal force.
    pub f_fz: GbtModel,
}

impl VirtualWrenchModel {
    /// Map for one target axis.
    pub fn map(&self, target: WrenchTarget) -> &GbtModel {
        match target {
            WrenchTarget::MX => &self.f_mx,
            WrenchTarget::MY => &self.f_my,
            WrenchTarget::FZ => &self.f_fz,
        }
    }

    /// First log row the maps can evaluate.
    pub fn start_row(&self) -> usize {
        self.window - 1
    }

    /// Predict the sensed axes at log row `k` (needs `start_row()` rows
    /// of history).
    pub fn predict_at(
        &self,
        log: &TrajectoryLog,
        tau_hat: &[DVector<f64>],
        k: usize,
    ) -> Result<Wrench, WrenchError> {
        if k < self.start_row() || k >= log.len() || tau_hat.len() != log.len() {
            return Err(WrenchError::InvalidInput(format!(
                "row {k} outside the predictable range of a {}-row log",
                log.len()
            )));
        }
        let mut axes = [0.0; 3];
        for (slot, target) in WrenchTarget::ALL.iter().enumerate() {
            let row = wrench_feature_row(*target, log, tau_hat, self.window, k);
            axes[slot] = self.map(*target).predict_row(&row);
        }
        Ok(Wrench {
            f_z: axes[2],
            m_x: axes[0],
            m_y: axes[1],
            full: [0.0, 0.0, axes[2], axes[0], axes[1], 0.0],
        })
    }

    /// Serialize to a single JSON document.
    pub fn to_json(&self) -> Result<String, WrenchError> {
        serde_json::to_string_pretty(self).map_err(|e| WrenchError::Serde(e.to_string()))
    }

    /// Deserialize from JSON.
    pub fn from_json(text: &str) -> Result<Self, WrenchError> {
        let model: VirtualWrenchModel =
            serde_json::from_str(text).map_err(|e| WrenchError::Serde(e.to_string()))?;
        if model.format_version != FORMAT_VERSION {
            return Err(WrenchError::Serde(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Train the three maps on labeled runs.
pub fn train_wrench_maps(
    runs: &[WrenchRun<'_>],
    window: usize,
    params: &GbtHyperParams,
) -> Result<VirtualWrenchModel, WrenchError> {
    if runs.is_empty() {
        return Err(WrenchError::InvalidInput("no training runs".into()));
    }
    if window == 0 {
        return Err(WrenchError::InvalidInput("window must be at least 1".into()));
    }
    for run in runs {
        run.check(window)?;
    }
    let maps: Result<Vec<GbtModel>, WrenchError> = WrenchTarget::ALL
        .par_iter()
        .map(|&target| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for run in runs {
                for k in (window - 1)..run.log.len() {
                    rows.push(wrench_feature_row(target, run.log, run.tau_hat, window, k));
                    labels.push(run.log.wrench[k][target.label_index()]);
                }
            }
            Ok(train(&rows, &labels, params)?)
        })
        .collect();
    let mut maps = maps?;
    let f_fz = maps.pop().expect("three targets");
    let f_my = maps.pop().expect("three targets");
    let f_mx = maps.pop().expect("three targets");
    Ok(VirtualWrenchModel {
        format_version: FORMAT_VERSION,
        window,
        f_mx,
        f_my,
        f_fz,
    })
}

/// Mean absolute error of each sensed axis over a labeled run.
pub fn wrench_mae(
    model: &VirtualWrenchModel,
    run: &WrenchRun<'_>,
) -> Result<[f64; 3], WrenchError> {
    run.check(model.window)?;
    let mut abs = [0.0; 3];
    let mut count = 0usize;
    for k in model.start_row()..run.log.len() {
        let pred = model.predict_at(run.log, run.tau_hat, k)?;
        let w = &run.log.wrench[k];
        abs[0] += (pred.m_x - w[3]).abs();
        abs[1] += (pred.m_y - w[4]).abs();
        abs[2] += (pred.f_z - w[2]).abs();
        count += 1;
    }
    for a in &mut abs {
        *a /= count as f64;
    }
    Ok(abs)
}
