//! External-torque observer and the analytic wrench path of the virtual
//! force sensor.
//!
//! The observer subtracts a free-motion torque prediction from the
//! measured motor torque and smooths the difference with one scalar
//! random-walk Kalman filter per joint.  The convention is
//! `tau_ext_raw = tau_free_predicted - tau_measured`, positive when the
//! environment loads the robot, so a wrench applied to the end effector
//! shows up as `J^T w`.  A minimum-norm solve of `J^T w = tau_ext` then
//! maps the filtered joint torques to an end-effector wrench.

use nalgebra::{DMatrix, DVector, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{forward_kinematics, geometric_jacobian, DynamicsError};
use crate::hybrid::{HybridError, HybridModel};
use crate::robot::{JointState, LossParams, RobotModel};
use crate::trajlog::{LogError, TrajectoryLog};

/// Errors raised by the observer and the wrench solve.
#[derive(Debug, Error)]
pub enum ObserverError {
    /// Bad filter noise parameters.
    #[error("invalid Kalman parameters: {0}")]
    InvalidFilter(String),
    /// Free-motion model set does not cover disjoint channels.
    #[error("invalid free-motion model: {0}")]
    InvalidModel(String),
    /// Underlying model prediction failed.
    #[error(transparent)]
    Hybrid(#[from] HybridError),
    /// Kinematics failed.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    /// Log I/O failed.
    #[error(transparent)]
    Log(#[from] LogError),
    /// The wrench solve is rank-deficient at this pose.
    #[error(
        "J^T is rank-deficient at this pose (condition {condition:.3e}): \
         unobservable wrench direction {nullspace:?}"
    )]
    RankDeficient {
        /// Ratio of largest to smallest selected singular value.
        condition: f64,
        /// Unit wrench direction that produces (near) zero joint torque.
        nullspace: [f64; 6],
    },
    /// Dimension mismatch in inputs.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Default ratio between process and measurement noise when only the
/// measurement noise has been estimated from data.
pub const DEFAULT_Q_OVER_R: f64 = 0.01;

/// One scalar random-walk Kalman filter: the state is the external
/// torque of a single joint and the prediction model holds it constant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObserverState {
    /// Current torque estimate.
    pub tau_hat: f64,
    /// Current estimate covariance.
    pub p: f64,
    /// Process noise (how fast the torque is allowed to wander).
    pub q: f64,
    /// Measurement noise of the raw torque residual.
    pub r: f64,
}

impl ObserverState {
    /// New filter at zero torque with covariance `r` (always at or above
    /// the steady-state covariance, so the gain decays monotonically).
    pub fn new(q: f64, r: f64) -> Result<Self, ObserverError> {
        if !(q > 0.0) || !q.is_finite() || !(r > 0.0) || !r.is_finite() {
            return Err(ObserverError::InvalidFilter(format!(
                "q and r must be positive and finite, got q = {q}, r = {r}"
            )));
        }
        Ok(ObserverState {
            tau_hat: 0.0,
            p: r,
            q,
            r,
        })
    }

    /// One predict-update cycle; returns the new estimate.
    pub fn kalman_step(&mut self, measurement: f64) -> f64 {
        let p_pred = self.p + self.q;
        let k = p_pred / (p_pred + self.r);
        self.tau_hat += k * (measurement - self.tau_hat);
        self.p = (1.0 - k) * p_pred;
        self.tau_hat
    }

    /// Covariance the filter converges to.
    pub fn steady_state_covariance(&self) -> f64 {
        0.5 * (-self.q + (self.q * self.q + 4.0 * self.q * self.r).sqrt())
    }

    /// Gain the filter converges to.
    pub fn steady_state_gain(&self) -> f64 {
        let p_pred = self.steady_state_covariance() + self.q;
        p_pred / (p_pred + self.r)
    }

    /// Certified number of steps for the estimate to cover `fraction` of
    /// a step change.  Valid whenever the filter started at covariance at
    /// or above steady state (as [`Self::new`] guarantees): the gain then
    /// never drops below the steady-state gain, so the remaining error
    /// shrinks at least by `1 - k_inf` per step.
    pub fn steps_to_fraction(&self, fraction: f64) -> usize {
        let k = self.steady_state_gain();
        ((1.0 - fraction).ln() / (1.0 - k).ln()).ceil() as usize
    }
}

/// Independent per-joint filters.
#[derive(Clone, Debug)]
pub struct ObserverBank {
    /// One filter per joint.
    pub filters: Vec<ObserverState>,
}

impl ObserverBank {
    /// Same noise parameters for every joint.
    pub fn uniform(n: usize, q: f64, r: f64) -> Result<Self, ObserverError> {
        Ok(ObserverBank {
            filters: (0..n).map(|_| ObserverState::new(q, r)).collect::<Result<_, _>>()?,
        })
    }

    /// Per-joint measurement noise with the default process/measurement
    /// ratio.
    pub fn from_measurement_noise(r: &[f64]) -> Result<Self, ObserverError> {
        Ok(ObserverBank {
            filters: r
                .iter()
                .map(|&ri| ObserverState::new(DEFAULT_Q_OVER_R * ri, ri))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Filter one raw torque vector.
    pub fn step(&mut self, raw: &DVector<f64>) -> Result<DVector<f64>, ObserverError> {
        if raw.len() != self.filters.len() {
            return Err(ObserverError::Dimension(format!(
                "{} raw channels for {} filters",
                raw.len(),
                self.filters.len()
            )));
        }
        Ok(DVector::from_fn(raw.len(), |j, _| {
            self.filters[j].kalman_step(raw[j])
        }))
    }
}

/// Per-joint variance of the raw torque residual on a zero-wrench run,
/// used as the measurement-noise default.
pub fn estimate_measurement_noise(raw: &[DVector<f64>]) -> Result<Vec<f64>, ObserverError> {
    let m = raw.len();
    if m < 2 {
        return Err(ObserverError::InvalidFilter(
            "need at least two samples to estimate noise".into(),
        ));
    }
    let n = raw[0].len();
    let mut mean = vec![0.0; n];
    for v in raw {
        for j in 0..n {
            mean[j] += v[j];
        }
    }
    for mj in &mut mean {
        *mj /= m as f64;
    }
    let mut var = vec![0.0; n];
    for v in raw {
        for j in 0..n {
            var[j] += (v[j] - mean[j]).powi(2);
        }
    }
    for vj in &mut var {
        *vj /= m as f64;
        if *vj <= 0.0 {
            // Perfectly clean channels still need a positive r.
            *vj = 1e-12;
        }
    }
    Ok(var)
}

/// Free-motion torque predictor assembled from per-group hybrid models.
///
/// The groups must not overlap; joints no group covers (the last wrist
/// joint in the default setup) report zero external torque and are
/// excluded from the wrench solve via [`FreeMotionModel::covered`].
#[derive(Clone, Debug)]
pub struct FreeMotionModel {
    parts: Vec<HybridModel>,
    covered: Vec<bool>,
    n_joints: usize,
}

impl FreeMotionModel {
    /// Validate and assemble; `n_joints` is the robot's joint count.
    pub fn new(parts: Vec<HybridModel>, n_joints: usize) -> Result<Self, ObserverError> {
        if parts.is_empty() {
            return Err(ObserverError::InvalidModel("no group models".into()));
        }
        let mut covered = vec![false; n_joints];
        for part in &parts {
            part.validate()?;
            for &c in part.group.channels() {
                if c >= n_joints {
                    return Err(ObserverError::InvalidModel(format!(
                        "channel {c} out of range for {n_joints} joints"
                    )));
                }
                if covered[c] {
                    return Err(ObserverError::InvalidModel(format!(
                        "channel {c} covered by two group models"
                    )));
                }
                covered[c] = true;
            }
        }
        Ok(FreeMotionModel {
            parts,
            covered,
            n_joints,
        })
    }

    /// Physics-plus-loss free-motion model over all modeled groups
    /// (channels 1-5), no trees.
    pub fn physics_with_loss(
        model: &RobotModel,
        loss: &LossParams,
    ) -> Result<Self, ObserverError> {
        use crate::features::FeatureGroup;
        use crate::hybrid::Composition;
        let parts = [FeatureGroup::Joints123, FeatureGroup::Joint4, FeatureGroup::Joint5]
            .into_iter()
            .map(|group| HybridModel {
                composition: Composition::P2,
                group,
                window: 1,
                physics: Some(model.clone()),
                loss: Some(loss.clone()),
                trees: None,
                normalization: None,
            })
            .collect();
        Self::new(parts, model.n_joints())
    }

    /// Joint count of the underlying robot.
    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    /// Whether a joint's external torque is modeled.
    pub fn covered(&self, joint: usize) -> bool {
        self.covered[joint]
    }

    /// Mask of modeled joints, for the wrench solve.
    pub fn coverage_mask(&self) -> Vec<bool> {
        self.covered.clone()
    }

    /// First log row every group model can predict.
    pub fn start_row(&self) -> usize {
        self.parts.iter().map(|p| p.start_row()).max().unwrap_or(0)
    }

    /// Free-motion torque prediction per row of `log`, full joint
    /// vectors with zeros on uncovered channels; entry `i` is row
    /// `start_row() + i`.
    pub fn predict_log(&self, log: &TrajectoryLog) -> Result<Vec<DVector<f64>>, ObserverError> {
        let start = self.start_row();
        let mut out = vec![DVector::zeros(self.n_joints); log.len().saturating_sub(start)];
        for part in &self.parts {
            let preds = part.predict_log(log)?;
            let offset = start - part.start_row();
            for (i, slot) in out.iter_mut().enumerate() {
                let pred = &preds[offset + i];
                for (c, &channel) in part.group.channels().iter().enumerate() {
                    slot[channel] = pred[c];
                }
            }
        }
        Ok(out)
    }
}

/// Raw external torque over a log: prediction minus measurement on
/// covered channels, zero elsewhere; entry `i` is row `start_row() + i`.
pub fn external_torque_raw(
    free: &FreeMotionModel,
    log: &TrajectoryLog,
) -> Result<Vec<DVector<f64>>, ObserverError> {
    if log.n_joints() != free.n_joints() {
        return Err(ObserverError::Dimension(format!(
            "log has {} joints, model has {}",
            log.n_joints(),
            free.n_joints()
        )));
    }
    let start = free.start_row();
    let preds = free.predict_log(log)?;
    let mut out = Vec::with_capacity(preds.len());
    for (i, pred) in preds.iter().enumerate() {
        let k = start + i;
        let raw = DVector::from_fn(free.n_joints(), |j, _| {
            if free.covered(j) {
                pred[j] - log.tau[k][j]
            } else {
                0.0
            }
        });
        out.push(raw);
    }
    Ok(out)
}

/// End-effector wrench estimate (the three sensed axes plus the full
/// vector it was cut from).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Wrench {
    /// Normal force along the end-effector z axis.
    pub f_z: f64,
    /// Moment about the end-effector x axis.
    pub m_x: f64,
    /// Moment about the end-effector y axis.
    pub m_y: f64,
    /// Full `[fx, fy, fz, mx, my, mz]` vector in the same frame.
    pub full: [f64; 6],
}

impl Wrench {
    /// Cut the sensed axes out of a full 6-vector.
    pub fn from_vector(w: &Vector6<f64>) -> Self {
        Wrench {
            f_z: w[2],
            m_x: w[3],
            m_y: w[4],
            full: [w[0], w[1], w[2], w[3], w[4], w[5]],
        }
    }

    /// The full vector as nalgebra type.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.full)
    }
}

/// Tolerance: singular values below `max_sv * RANK_TOL` count as zero.
const RANK_TOL: f64 = 1e-9;

/// Minimum-norm least-squares solve of `a x = b` with a rank check:
/// the rank must reach `min(rows, cols)` or the system has an
/// unobservable direction and solving it would silently misreport.
fn lsq_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, f64), ObserverError> {
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let condition = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > max_sv * RANK_TOL)
        .count();
    if rank < rows.min(cols) {
        // Right-singular vector of the smallest singular value spans the
        // unobservable direction (in the solved coordinates).
        let v_t = svd.v_t.as_ref().expect("svd computed with vectors");
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut nullspace = [0.0; 6];
        for c in 0..cols.min(6) {
            nullspace[c] = v_t[(idx, c)];
        }
        return Err(ObserverError::RankDeficient {
            condition,
            nullspace,
        });
    }
    let x = svd
        .solve(b, max_sv * RANK_TOL)
        .map_err(|e| ObserverError::InvalidModel(e.to_string()))?;
    Ok((x, condition))
}

/// Rows of `J^T` and torques restricted to the masked joints.
fn masked_system(
    model: &RobotModel,
    theta: &DVector<f64>,
    tau_ext: &DVector<f64>,
    mask: &[bool],
) -> Result<(DMatrix<f64>, DVector<f64>), ObserverError> {
    let n = model.n_joints();
    if tau_ext.len() != n || mask.len() != n {
        return Err(ObserverError::Dimension(format!(
            "{} torques / {} mask entries for {} joints",
            tau_ext.len(),
            mask.len(),
            n
        )));
    }
    let selected: Vec<usize> = (0..n).filter(|&j| mask[j]).collect();
    if selected.is_empty() {
        return Err(ObserverError::Dimension("empty joint mask".into()));
    }
    let j = geometric_jacobian(model, theta)?;
    let jt_full = j.transpose();
    let mut jt = DMatrix::zeros(selected.len(), 6);
    let mut tau = DVector::zeros(selected.len());
    for (row, &jnt) in selected.iter().enumerate() {
        for c in 0..6 {
            jt[(row, c)] = jt_full[(jnt, c)];
        }
        tau[row] = tau_ext[jnt];
    }
    Ok((jt, tau))
}

/// Minimum-norm base-frame wrench explaining the external torques:
/// solves `J^T w = tau_ext` at `theta`.  Returns the wrench and the
/// condition number of the solved system.
pub fn wrench_from_jacobian(
    model: &RobotModel,
    theta: &DVector<f64>,
    tau_ext: &DVector<f64>,
) -> Result<(Vector6<f64>, f64), ObserverError> {
    let mask = vec![true; model.n_joints()];
    wrench_from_jacobian_masked(model, theta, tau_ext, &mask)
}

/// Same solve restricted to the joints marked in `mask` (used when some
/// joints have no external-torque model).  With fewer equations than
/// wrench axes the answer is the minimum-norm wrench: the projection of
/// the true wrench onto the observable subspace.
pub fn wrench_from_jacobian_masked(
    model: &RobotModel,
    theta: &DVector<f64>,
    tau_ext: &DVector<f64>,
    mask: &[bool],
) -> Result<(Vector6<f64>, f64), ObserverError> {
    let (jt, tau) = masked_system(model, theta, tau_ext, mask)?;
    let (w, condition) = lsq_solve(&jt, &tau)?;
    Ok((Vector6::from_column_slice(w.as_slice()), condition))
}

/// Task-grade analytic solve: same joint mask, but the wrench is
/// constrained to carry no moment about the tool (end-effector z) axis —
/// the quasi-static assumption for tip contact, where axial friction
/// moments are negligible.  With five modeled joints this is a square,
/// generally well-posed system, so a contact wrench satisfying the
/// assumption is recovered exactly rather than projected.
pub fn wrench_from_jacobian_no_tool_moment(
    model: &RobotModel,
    theta: &DVector<f64>,
    tau_ext: &DVector<f64>,
    mask: &[bool],
) -> Result<(Vector6<f64>, f64), ObserverError> {
    let (jt, tau) = masked_system(model, theta, tau_ext, mask)?;
    let pose = forward_kinematics(model, theta)?;
    // Wrench basis: base-frame forces plus moments about the tool x/y
    // axes; the tool z moment is excluded by construction.
    let mut basis = DMatrix::zeros(6, 5);
    basis[(0, 0)] = 1.0;
    basis[(1, 1)] = 1.0;
    basis[(2, 2)] = 1.0;
    for r in 0..3 {
        basis[(3 + r, 3)] = pose.rotation[(r, 0)];
        basis[(3 + r, 4)] = pose.rotation[(r, 1)];
    }
    let (w5, condition) = lsq_solve(&(&jt * &basis), &tau)?;
    let w = &basis * w5;
    Ok((Vector6::from_column_slice(w.as_slice()), condition))
}

/// Rotate a base-frame wrench into the end-effector frame at `theta`.
pub fn wrench_in_ee_frame(
    model: &RobotModel,
    theta: &DVector<f64>,
    w_base: &Vector6<f64>,
) -> Result<Vector6<f64>, ObserverError> {
    let pose = forward_kinematics(model, theta)?;
    let rt = pose.rotation.transpose();
    let f = rt * nalgebra::Vector3::new(w_base[0], w_base[1], w_base[2]);
    let m = rt * nalgebra::Vector3::new(w_base[3], w_base[4], w_base[5]);
    Ok(Vector6::new(f[0], f[1], f[2], m[0], m[1], m[2]))
}

/// One output row of the streaming observer.
#[derive(Clone, Debug)]
pub struct ObserverRecord {
    /// Timestamp of the consumed sample.
    pub t: f64,
    /// Raw external torque (prediction minus measurement).
    pub tau_ext_raw: DVector<f64>,
    /// Kalman-filtered external torque.
    pub tau_ext_hat: DVector<f64>,
    /// Base-frame wrench solved from the filtered torques, if requested.
    pub wrench: Option<Vector6<f64>>,
}

/// Streaming observer: consumes `(t, state, tau_measured)` rows in order
/// and emits raw plus filtered external torques.
///
/// Windowed free-motion models need history; until the window fills, the
/// first sample is repeated backwards in time, so early estimates are
/// defined (if conservative) from the first row on.
pub struct ObserverPipeline {
    free: FreeMotionModel,
    bank: ObserverBank,
    buffer: TrajectoryLog,
    window: usize,
}

impl ObserverPipeline {
    /// Build from a free-motion model and a filter bank (one filter per
    /// joint).
    pub fn new(free: FreeMotionModel, bank: ObserverBank) -> Result<Self, ObserverError> {
        if bank.filters.len() != free.n_joints() {
            return Err(ObserverError::Dimension(format!(
                "{} filters for {} joints",
                bank.filters.len(),
                free.n_joints()
            )));
        }
        let window = free.start_row() + 1;
        Ok(ObserverPipeline {
            free,
            bank,
            buffer: TrajectoryLog::new(),
            window,
        })
    }

    /// Free-motion model in use.
    pub fn free_model(&self) -> &FreeMotionModel {
        &self.free
    }

    /// Consume one sample and return the raw and filtered estimates.
    pub fn push(
        &mut self,
        t: f64,
        state: &JointState,
        tau_measured: &DVector<f64>,
    ) -> Result<ObserverRecord, ObserverError> {
        let n = self.free.n_joints();
        if state.len() != n || tau_measured.len() != n {
            return Err(ObserverError::Dimension(format!(
                "sample with {} joints for an observer over {n}",
                state.len()
            )));
        }
        let zero6 = Vector6::zeros();
        if self.buffer.len() == 0 && self.window > 1 {
            // Repeat-pad history so the window is full from the start.
            let dt = 1.0;
            for i in 0..(self.window - 1) {
                self.buffer.push(
                    t - dt * (self.window - 1 - i) as f64,
                    state,
                    tau_measured.clone(),
                    DVector::zeros(n),
                    zero6,
                );
            }
        }
        self.buffer
            .push(t, state, tau_measured.clone(), DVector::zeros(n), zero6);
        let k = self.buffer.len() - 1;
        let preds = self.free.predict_log_row(&self.buffer, k)?;
        let raw = DVector::from_fn(n, |j, _| {
            if self.free.covered(j) {
                preds[j] - tau_measured[j]
            } else {
                0.0
            }
        });
        let hat = self.bank.step(&raw)?;
        Ok(ObserverRecord {
            t,
            tau_ext_raw: raw,
            tau_ext_hat: hat,
            wrench: None,
        })
    }
}

impl FreeMotionModel {
    /// Free-motion prediction for a single log row (full joint vector,
    /// zeros on uncovered channels).  The row must have `start_row()`
    /// rows of history before it.
    pub fn predict_log_row(
        &self,
        log: &TrajectoryLog,
        k: usize,
    ) -> Result<DVector<f64>, ObserverError> {
        if k < self.start_row() || k >= log.len() {
            return Err(ObserverError::Dimension(format!(
                "row {k} outside the predictable range {}..{}",
                self.start_row(),
                log.len()
            )));
        }
        let mut out = DVector::zeros(self.n_joints);
        for part in &self.parts {
            let parts = part.predict_parts_at(log, k)?;
            let pred = parts.total();
            for (c, &channel) in part.group.channels().iter().enumerate() {
                out[channel] = pred[c];
            }
        }
        Ok(out)
    }
}

/// Run a streaming observer over a whole log, producing one record per
/// log row (the pipeline's warm-up padding keeps the lengths equal).
pub fn observe_log(
    pipe: &mut ObserverPipeline,
    log: &TrajectoryLog,
) -> Result<Vec<ObserverRecord>, ObserverError> {
    let mut out = Vec::with_capacity(log.len());
    for k in 0..log.len() {
        out.push(pipe.push(log.t[k], &log.state_at(k), &log.tau[k])?);
    }
    Ok(out)
}

/// Write observer output rows as CSV mirroring the trajectory-log
/// timestamp column: `t, raw torques, filtered torques, wrench`.
pub fn write_observer_csv(
    path: &std::path::Path,
    records: &[ObserverRecord],
) -> Result<(), ObserverError> {
    use std::io::Write;
    if records.is_empty() {
        return Err(ObserverError::Dimension("no records to write".into()));
    }
    let n = records[0].tau_ext_raw.len();
    let mut header = vec!["t".to_string()];
    for j in 1..=n {
        header.push(format!("tauext_raw_{j}"));
    }
    for j in 1..=n {
        header.push(format!("tauext_hat_{j}"));
    }
    for axis in ["fx", "fy", "fz", "mx", "my", "mz"] {
        header.push(axis.to_string());
    }
    let file = std::fs::File::create(path).map_err(|e| {
        ObserverError::InvalidModel(format!("cannot create {}: {e}", path.display()))
    })?;
    let mut out = std::io::BufWriter::new(file);
    let io_err =
        |e: std::io::Error| ObserverError::InvalidModel(format!("write failed: {e}"));
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for rec in records {
        let mut fields = vec![format!("{}", rec.t)];
        for j in 0..n {
            fields.push(format!("{}", rec.tau_ext_raw[j]));
        }
        for j in 0..n {
            fields.push(format!("{}", rec.tau_ext_hat[j]));
        }
        let w = rec.wrench.unwrap_or_else(Vector6::zeros);
        for c in 0..6 {
            fields.push(format!("{}", w[c]));
        }
        writeln!(out, "{}", fields.join(",")).map_err(io_err)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{simulate_tracking, PlantConfig};
    use crate::quintic::QuinticSegment;
    use crate::trajectory::SampledTrajectory;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn six_dof_config() -> PlantConfig {
        let model = RobotModel::bundled_6dof();
        let loss = LossParams {
            b_m: vec![0.15, 0.2, 0.12, 0.05, 0.05, 0.02],
            c_m: vec![4.0, 5.5, 3.5, 1.2, 1.0, 0.6],
            f_c: vec![2.5, 3.5, 2.2, 0.8, 0.7, 0.4],
        };
        PlantConfig::new(model, loss)
    }

    fn reference(dt: f64) -> SampledTrajectory {
        let mut traj = SampledTrajectory::new(dt);
        traj.append_segment(
            &QuinticSegment::new(
                DVector::from_column_slice(&[0.2, -0.5, 0.6, -0.4, 0.5, 0.2]),
                DVector::from_column_slice(&[-0.4, 0.2, 1.0, 0.6, -0.5, -0.6]),
                1.6,
            )
            .unwrap(),
        );
        traj
    }

    #[test]
    fn kalman_converges_to_constant_within_certified_bound() {
        let mut f = ObserverState::new(0.01, 1.0).unwrap();
        let target = 5.0;
        let bound = f.steps_to_fraction(0.99);
        let mut estimate = 0.0f64;
        for _ in 0..bound {
            let prev = (estimate - target).abs();
            estimate = f.kalman_step(target);
            assert!(
                (estimate - target).abs() <= prev,
                "convergence must be monotone"
            );
        }
        assert!(
            (estimate - target).abs() < 0.01 * target,
            "99% of the step within {bound} steps, got {estimate}"
        );
    }

    #[test]
    fn tiny_measurement_noise_tracks_in_one_step() {
        let mut f = ObserverState::new(0.01, 1e-15).unwrap();
        f.kalman_step(3.0);
        assert!((f.tau_hat - 3.0).abs() < 1e-9);
    }

    #[test]
    fn covariance_settles_on_the_closed_form_steady_state() {
        let mut f = ObserverState::new(0.03, 2.0).unwrap();
        for _ in 0..10_000 {
            f.kalman_step(1.0);
        }
        assert!((f.p - f.steady_state_covariance()).abs() < 1e-12);
    }

    #[test]
    fn filter_reduces_white_noise_variance() {
        let mut f = ObserverState::new(0.01, 1.0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut input = Vec::new();
        let mut output = Vec::new();
        for _ in 0..20_000 {
            let x: f64 = rng.random::<f64>() * 2.0 - 1.0;
            input.push(x);
            output.push(f.kalman_step(x));
        }
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        let vi = var(&input);
        let vo = var(&output);
        assert!(vo < vi, "output variance {vo} must be below input {vi}");
        assert!(vo < 0.2 * vi, "expected strong smoothing, got {vo} vs {vi}");
    }

    #[test]
    fn jacobian_transpose_round_trip_recovers_the_wrench() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.3, -0.7, 0.9, 0.4, 0.8, -0.2]);
        let w0 = Vector6::new(12.0, -5.0, 30.0, 1.5, -0.8, 0.4);
        let j = geometric_jacobian(&model, &theta).unwrap();
        let tau = j.transpose() * w0;
        let (w, condition) = wrench_from_jacobian(&model, &theta, &tau).unwrap();
        assert!((w - w0).norm() < 1e-8, "recovered {w:?}");
        assert!(condition.is_finite());
    }

    #[test]
    fn masked_solve_returns_the_observable_projection() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.2, -0.6, 0.8, 0.3, 0.9, 0.5]);
        let w0 = Vector6::new(8.0, -3.0, 20.0, 0.7, -0.5, 0.3);
        let j = geometric_jacobian(&model, &theta).unwrap();
        let tau = j.transpose() * w0;
        let mask = [true, true, true, true, true, false];
        let (w, _) = wrench_from_jacobian_masked(&model, &theta, &tau, &mask).unwrap();
        // Oracle: project w0 onto the row space of the masked J^T.
        let (jt, _) = masked_system(&model, &theta, &tau, &mask).unwrap();
        let svd = jt.svd(true, true);
        let v_t = svd.v_t.unwrap();
        let mut proj = Vector6::zeros();
        for i in 0..v_t.nrows() {
            let vi = Vector6::from_fn(|c, _| v_t[(i, c)]);
            proj += vi * vi.dot(&w0);
        }
        assert!((w - proj).norm() < 1e-8, "got {w:?}, want {proj:?}");
    }

    #[test]
    fn tool_moment_free_wrench_is_recovered_exactly_by_the_reduced_solve() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.2, -0.6, 0.8, 0.3, 0.9, 0.5]);
        let pose = forward_kinematics(&model, &theta).unwrap();
        // True wrench with zero moment about the tool axis, as in tip
        // contact with negligible axial friction.
        let tool_z = pose.rotation.column(2).into_owned();
        let force = nalgebra::Vector3::new(8.0, -3.0, 20.0);
        let mut moment = nalgebra::Vector3::new(0.7, -0.5, 0.3);
        moment -= tool_z * moment.dot(&tool_z);
        let w0 = Vector6::new(force[0], force[1], force[2], moment[0], moment[1], moment[2]);
        let j = geometric_jacobian(&model, &theta).unwrap();
        let tau = j.transpose() * w0;
        let mask = [true, true, true, true, true, false];
        let (w, condition) =
            wrench_from_jacobian_no_tool_moment(&model, &theta, &tau, &mask).unwrap();
        assert!((w - w0).norm() < 1e-7, "got {w:?}, want {w0:?}");
        assert!(condition < 1e6, "task solve should be well conditioned");
    }

    #[test]
    fn exact_model_recovers_injected_wrench_exactly() {
        let cfg = six_dof_config();
        let wrench = Vector6::new(0.0, 0.0, -25.0, 1.2, -0.9, 0.0);
        let profile = crate::plant::WrenchProfile::pulse(0.4, 1.2, wrench);
        let log = simulate_tracking(&cfg, &reference(cfg.sample_period), Some(&profile), 11).unwrap();
        let free = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
        let raw = external_torque_raw(&free, &log).unwrap();
        for (k, r) in raw.iter().enumerate() {
            for j in 0..5 {
                assert!(
                    (r[j] - log.tau_ext[k][j]).abs() < 1e-6,
                    "row {k} joint {j}: raw {} vs true {}",
                    r[j],
                    log.tau_ext[k][j]
                );
            }
            assert_eq!(r[5], 0.0, "joint 6 is unmodeled and reports zero");
        }
    }

    #[test]
    fn filtered_step_mean_settles_within_five_percent() {
        // Constant wrench on a stationary arm: the external torque is a
        // clean per-joint step and the filtered mean must land on it.
        let mut cfg = six_dof_config();
        cfg.torque_noise_std = vec![0.3; 6];
        let mut traj = SampledTrajectory::new(cfg.sample_period);
        traj.samples.push(JointState::new(
            &[0.2, -0.5, 0.6, -0.4, 0.5, 0.2],
            &[0.0; 6],
            &[0.0; 6],
        ));
        traj.append_dwell(3.0);
        let wrench = Vector6::new(0.0, 0.0, -30.0, 0.0, 0.0, 0.0);
        let profile = crate::plant::WrenchProfile::pulse(0.5, 3.5, wrench);
        let log = simulate_tracking(&cfg, &traj, Some(&profile), 13).unwrap();
        let free = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
        let raw = external_torque_raw(&free, &log).unwrap();
        let noise = vec![0.3f64.powi(2); 6];
        let mut bank = ObserverBank::from_measurement_noise(&noise).unwrap();
        let settle = bank.filters[0].steps_to_fraction(0.95);
        let t_score = 0.5 + settle as f64 * cfg.sample_period;
        let mut sums = vec![0.0; 6];
        let mut truth = vec![0.0; 6];
        let mut count = 0usize;
        for (k, r) in raw.iter().enumerate() {
            let hat = bank.step(r).unwrap();
            if log.t[k] >= t_score {
                for j in 0..6 {
                    sums[j] += hat[j];
                    truth[j] = log.tau_ext[k][j];
                }
                count += 1;
            }
        }
        assert!(count > 50, "need a settled window to average over");
        for j in 0..5 {
            if truth[j].abs() > 0.5 {
                let mean = sums[j] / count as f64;
                let rel = (mean - truth[j]).abs() / truth[j].abs();
                assert!(
                    rel < 0.05,
                    "joint {j}: filtered mean {mean} vs true {} ({rel:.3} rel)",
                    truth[j]
                );
            }
        }
    }

    #[test]
    fn streaming_pipeline_matches_offline_raw_path() {
        let cfg = six_dof_config();
        let wrench = Vector6::new(3.0, -2.0, -10.0, 0.5, 0.2, 0.0);
        let profile = crate::plant::WrenchProfile::pulse(0.3, 1.0, wrench);
        let log = simulate_tracking(&cfg, &reference(cfg.sample_period), Some(&profile), 17).unwrap();
        let free = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
        let offline = external_torque_raw(&free, &log).unwrap();
        let bank = ObserverBank::uniform(6, 1e-4, 1e-2).unwrap();
        let free2 = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
        let mut pipe = ObserverPipeline::new(free2, bank).unwrap();
        for k in 0..log.len() {
            let rec = pipe
                .push(log.t[k], &log.state_at(k), &log.tau[k])
                .unwrap();
            let want = &offline[k]; // window-1 models start at row 0
            assert!((rec.tau_ext_raw.clone() - want).norm() < 1e-12);
        }
    }

    #[test]
    fn measurement_noise_estimate_matches_injected_noise() {
        let mut cfg = six_dof_config();
        cfg.torque_noise_std = vec![0.5; 6];
        let log = simulate_tracking(&cfg, &reference(cfg.sample_period), None, 19).unwrap();
        let free = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
        let raw = external_torque_raw(&free, &log).unwrap();
        let var = estimate_measurement_noise(&raw).unwrap();
        for j in 0..5 {
            let rel = (var[j] - 0.25).abs() / 0.25;
            assert!(rel < 0.35, "joint {j} variance {} vs 0.25", var[j]);
        }
    }

    #[test]
    fn observer_csv_round_trips_through_the_header_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("observer.csv");
        let records = vec![ObserverRecord {
            t: 0.008,
            tau_ext_raw: DVector::from_column_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 0.0]),
            tau_ext_hat: DVector::from_column_slice(&[0.9, 1.9, 2.9, 3.9, 4.9, 0.0]),
            wrench: Some(Vector6::new(0.0, 0.0, -20.0, 0.5, -0.3, 0.0)),
        }];
        write_observer_csv(&path, &records).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,tauext_raw_1"));
        assert!(header.ends_with("fx,fy,fz,mx,my,mz"));
        assert_eq!(lines.count(), 1);
    }
}
