//! Synthetic plant: a simulated arm that stands in for the physical one.
//!
//! The plant integrates the true rigid-body dynamics plus the nominal
//! joint losses plus a configurable [`ResidualSpec`] of unmodeled effects
//! (Stribeck friction, asymmetric Coulomb level, position-dependent
//! torque ripple, load-dependent losses).  A computed-torque controller
//! with PD feedback tracks a reference trajectory; external wrenches can
//! be injected at the end effector, and the measured torque channel
//! carries Gaussian noise.
//!
//! Logged samples are self-consistent by construction: the logged
//! acceleration is the plant's instantaneous acceleration under the
//! commanded torque, so the rigid-body/loss/residual/wrench torque
//! balance holds exactly at every logged row.  This is what makes the
//! downstream identification and observer stages well posed.

use nalgebra::{DVector, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::dynamics::{
    forward_kinematics, geometric_jacobian, inverse_dynamics, loss_torque, mass_matrix, sign_zero,
    DynamicsError,
};
use crate::robot::{JointState, LossParams, RobotModel};
use crate::trajectory::SampledTrajectory;
use crate::trajlog::TrajectoryLog;

/// Errors raised by the plant.
#[derive(Debug, Error)]
pub enum PlantError {
    /// Configuration inconsistency.
    #[error("invalid plant config: {0}")]
    InvalidConfig(String),
    /// Dynamics failure during simulation.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    /// The reference trajectory is unusable.
    #[error("bad reference trajectory: {0}")]
    BadReference(String),
}

/// Unmodeled joint-level effects added on top of the nominal loss model.
///
/// All vectors hold one entry per joint.  Zero entries disable the
/// corresponding effect for that joint.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ResidualSpec {
    /// Stribeck peak magnitude (N m): extra low-speed friction that
    /// decays as `exp(-(v / v_s)^2)`.
    pub stribeck_magnitude: Vec<f64>,
    /// Stribeck decay velocity `v_s` (rad/s).
    pub stribeck_velocity: Vec<f64>,
    /// Extra Coulomb level applied only for positive velocity (N m),
    /// making friction direction-asymmetric.
    pub coulomb_asymmetry: Vec<f64>,
    /// Torque ripple amplitude (N m), position-locked.
    pub ripple_magnitude: Vec<f64>,
    /// Ripple cycles per joint revolution.
    pub ripple_harmonic: Vec<f64>,
    /// Load-dependent loss coefficient (dimensionless): friction grows
    /// with the static load torque.
    pub load_coeff: Vec<f64>,
}

impl ResidualSpec {
    /// All effects disabled for an `n`-joint arm.
    pub fn zeros(n: usize) -> Self {
        ResidualSpec {
            stribeck_magnitude: vec![0.0; n],
            stribeck_velocity: vec![0.1; n],
            coulomb_asymmetry: vec![0.0; n],
            ripple_magnitude: vec![0.0; n],
            ripple_harmonic: vec![0.0; n],
            load_coeff: vec![0.0; n],
        }
    }

    /// Number of joints covered.
    pub fn len(&self) -> usize {
        self.stribeck_magnitude.len()
    }

    /// Whether the spec is empty.
    pub fn is_empty(&self) -> bool {
        self.stribeck_magnitude.is_empty()
    }

    /// Whether every effect is disabled.
    pub fn is_zero(&self) -> bool {
        self.stribeck_magnitude.iter().all(|&x| x == 0.0)
            && self.coulomb_asymmetry.iter().all(|&x| x == 0.0)
            && self.ripple_magnitude.iter().all(|&x| x == 0.0)
            && self.load_coeff.iter().all(|&x| x == 0.0)
    }

    fn validate(&self, n: usize) -> Result<(), PlantError> {
        let fields = [
            ("stribeck_magnitude", self.stribeck_magnitude.len()),
            ("stribeck_velocity", self.stribeck_velocity.len()),
            ("coulomb_asymmetry", self.coulomb_asymmetry.len()),
            ("ripple_magnitude", self.ripple_magnitude.len()),
            ("ripple_harmonic", self.ripple_harmonic.len()),
            ("load_coeff", self.load_coeff.len()),
        ];
        for (name, len) in fields {
            if len != n {
                return Err(PlantError::InvalidConfig(format!(
                    "residual {name} has {len} entries for {n} joints"
                )));
            }
        }
        for &v in &self.stribeck_velocity {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidConfig(
                    "stribeck_velocity must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Residual torque for the given state.  `tau_static` is the static
    /// load torque (rigid-body torque at zero velocity and acceleration),
    /// which drives the load-dependent term.
    pub fn torque(
        &self,
        theta: &DVector<f64>,
        theta_dot: &DVector<f64>,
        tau_static: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::from_fn(theta.len(), |j, _| {
            let v = theta_dot[j];
            let s = sign_zero(v);
            let stribeck = self.stribeck_magnitude[j]
                * (-(v / self.stribeck_velocity[j]).powi(2)).exp()
                * s;
            let asym = if v > 0.0 { self.coulomb_asymmetry[j] } else { 0.0 };
            let ripple = self.ripple_magnitude[j] * (self.ripple_harmonic[j] * theta[j]).sin();
            let load = self.load_coeff[j] * tau_static[j].abs() * s;
            stribeck + asym + ripple + load
        })
    }
}

/// A time window during which a constant wrench acts on the end effector.
#[derive(Clone, Debug)]
pub struct WrenchWindow {
    /// Window start (s).
    pub t_start: f64,
    /// Window end (s).
    pub t_end: f64,
    /// Wrench `[fx fy fz mx my mz]` in the end-effector frame (N, N m).
    pub wrench: Vector6<f64>,
}

/// Piecewise-constant external wrench schedule (end-effector frame).
#[derive(Clone, Debug, Default)]
pub struct WrenchProfile {
    /// Windows, in ascending time order, non-overlapping.
    pub windows: Vec<WrenchWindow>,
}

impl WrenchProfile {
    /// No external wrench.
    pub fn none() -> Self {
        Self::default()
    }

    /// Single constant wrench over `[t_start, t_end)`.
    pub fn pulse(t_start: f64, t_end: f64, wrench: Vector6<f64>) -> Self {
        WrenchProfile {
            windows: vec![WrenchWindow {
                t_start,
                t_end,
                wrench,
            }],
        }
    }

    /// Check ordering and disjointness.
    pub fn validate(&self) -> Result<(), PlantError> {
        for w in &self.windows {
            if !(w.t_start.is_finite() && w.t_end.is_finite() && w.t_start < w.t_end) {
                return Err(PlantError::InvalidConfig(format!(
                    "wrench window [{}, {}) is empty or non-finite",
                    w.t_start, w.t_end
                )));
            }
        }
        for pair in self.windows.windows(2) {
            if pair[1].t_start < pair[0].t_end {
                return Err(PlantError::InvalidConfig(format!(
                    "wrench windows overlap at t = {}",
                    pair[1].t_start
                )));
            }
        }
        Ok(())
    }

    /// Wrench active at time `t` (end-effector frame).
    pub fn at(&self, t: f64) -> Vector6<f64> {
        for w in &self.windows {
            if t >= w.t_start && t < w.t_end {
                return w.wrench;
            }
        }
        Vector6::zeros()
    }
}

/// Full plant configuration.
#[derive(Clone, Debug)]
pub struct PlantConfig {
    /// The arm being simulated.
    pub model: RobotModel,
    /// True transmission losses (also used by the tracking controller as
    /// its nominal loss model).
    pub true_loss: LossParams,
    /// Unmodeled effects, unknown to the controller and the learners.
    pub residual: ResidualSpec,
    /// Controller/logging sample period (s).
    pub sample_period: f64,
    /// Integration substeps per sample period.
    pub substeps: usize,
    /// Standard deviation of the measured-torque noise per joint (N m).
    pub torque_noise_std: Vec<f64>,
    /// Proportional tracking gain (1/s^2).
    pub kp: f64,
    /// Derivative tracking gain (1/s).
    pub kd: f64,
}

impl PlantConfig {
    /// Plant around the given model with standard settings: 8 ms sample
    /// period, four RK4 substeps, quiet torque sensing, stiff tracking.
    pub fn new(model: RobotModel, true_loss: LossParams) -> Self {
        let n = model.n_joints();
        PlantConfig {
            model,
            true_loss,
            residual: ResidualSpec::zeros(n),
            sample_period: 0.008,
            substeps: 4,
            torque_noise_std: vec![0.0; n],
            kp: 400.0,
            kd: 40.0,
        }
    }

    /// Validate dimensions and ranges.
    pub fn validate(&self) -> Result<(), PlantError> {
        let n = self.model.n_joints();
        self.model
            .validate()
            .map_err(|e| PlantError::InvalidConfig(e.to_string()))?;
        self.true_loss
            .validate()
            .map_err(|e| PlantError::InvalidConfig(e.to_string()))?;
        if self.true_loss.len() != n {
            return Err(PlantError::InvalidConfig(format!(
                "loss parameters cover {} joints, model has {n}",
                self.true_loss.len()
            )));
        }
        self.residual.validate(n)?;
        if !(self.sample_period.is_finite() && self.sample_period > 0.0) {
            return Err(PlantError::InvalidConfig(
                "sample_period must be positive".into(),
            ));
        }
        if self.substeps == 0 {
            return Err(PlantError::InvalidConfig("substeps must be >= 1".into()));
        }
        if self.torque_noise_std.len() != n
            || self.torque_noise_std.iter().any(|&s| !(s.is_finite() && s >= 0.0))
        {
            return Err(PlantError::InvalidConfig(
                "torque_noise_std must hold one non-negative value per joint".into(),
            ));
        }
        if !(self.kp > 0.0 && self.kd > 0.0) {
            return Err(PlantError::InvalidConfig("kp and kd must be positive".into()));
        }
        Ok(())
    }
}

/// What one plant step produced (everything a log row needs).
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Time at the start of the step (s).
    pub t: f64,
    /// State at the start of the step, with the instantaneous
    /// acceleration under the commanded torque.
    pub state: JointState,
    /// Measured torque: commanded plus sensor noise (N m).
    pub tau_measured: DVector<f64>,
    /// True external joint torque `J^T w` (N m).
    pub tau_ext: DVector<f64>,
    /// The commanded wrench in the end-effector frame.
    pub wrench_ee: Vector6<f64>,
}

/// The running plant: current state plus the noise stream.
pub struct Plant {
    cfg: PlantConfig,
    theta: DVector<f64>,
    theta_dot: DVector<f64>,
    t: f64,
    rng: ChaCha12Rng,
}

impl Plant {
    /// Create a plant at rest at `theta0`.
    pub fn new(cfg: PlantConfig, theta0: DVector<f64>, seed: u64) -> Result<Self, PlantError> {
        cfg.validate()?;
        if theta0.len() != cfg.model.n_joints() {
            return Err(PlantError::InvalidConfig(format!(
                "initial configuration has {} joints, model has {}",
                theta0.len(),
                cfg.model.n_joints()
            )));
        }
        let n = cfg.model.n_joints();
        Ok(Plant {
            cfg,
            theta: theta0,
            theta_dot: DVector::zeros(n),
            t: 0.0,
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    /// Current joint positions.
    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    /// Current joint velocities.
    pub fn theta_dot(&self) -> &DVector<f64> {
        &self.theta_dot
    }

    /// Current simulation time (s).
    pub fn time(&self) -> f64 {
        self.t
    }

    /// Plant configuration.
    pub fn config(&self) -> &PlantConfig {
        &self.cfg
    }

    /// External joint torque for a wrench given in the end-effector frame.
    fn external_torque(
        &self,
        theta: &DVector<f64>,
        wrench_ee: &Vector6<f64>,
    ) -> Result<DVector<f64>, PlantError> {
        if wrench_ee.iter().all(|&x| x == 0.0) {
            return Ok(DVector::zeros(theta.len()));
        }
        let pose = forward_kinematics(&self.cfg.model, theta)?;
        let mut wrench_base = Vector6::zeros();
        let f = pose.rotation * wrench_ee.fixed_rows::<3>(0);
        let m = pose.rotation * wrench_ee.fixed_rows::<3>(3);
        wrench_base.fixed_rows_mut::<3>(0).copy_from(&f);
        wrench_base.fixed_rows_mut::<3>(3).copy_from(&m);
        let jac = geometric_jacobian(&self.cfg.model, theta)?;
        Ok(jac.transpose() * wrench_base)
    }

    /// True plant acceleration at `(theta, theta_dot)` under torque `tau`
    /// and external joint torque `tau_ext`.
    fn acceleration(
        &self,
        theta: &DVector<f64>,
        theta_dot: &DVector<f64>,
        tau: &DVector<f64>,
        tau_ext: &DVector<f64>,
    ) -> Result<DVector<f64>, PlantError> {
        let model = &self.cfg.model;
        let n = model.n_joints();
        let mut m = mass_matrix(model, theta)?;
        let rest = JointState {
            theta: theta.clone(),
            theta_dot: theta_dot.clone(),
            theta_ddot: DVector::zeros(n),
        };
        let bias = inverse_dynamics(model, &rest)?;
        let tau_static = inverse_dynamics(
            model,
            &JointState {
                theta: theta.clone(),
                theta_dot: DVector::zeros(n),
                theta_ddot: DVector::zeros(n),
            },
        )?;
        let residual = self.cfg.residual.torque(theta, theta_dot, &tau_static);
        let loss = &self.cfg.true_loss;
        let mut rhs = tau - bias - residual + tau_ext;
        for j in 0..n {
            m[(j, j)] += loss.b_m[j];
            rhs[j] -= loss.c_m[j] * theta_dot[j] + loss.f_c[j] * sign_zero(theta_dot[j]);
        }
        m.lu()
            .solve(&rhs)
            .filter(|a| a.iter().all(|x| x.is_finite()))
            .ok_or(PlantError::Dynamics(DynamicsError::SingularMass {
                condition: f64::INFINITY,
            }))
    }

    /// Computed-torque command tracking one reference sample from the
    /// current plant state.
    fn control_torque(&self, reference: &JointState) -> Result<DVector<f64>, PlantError> {
        let e = &reference.theta - &self.theta;
        let edot = &reference.theta_dot - &self.theta_dot;
        let acc_des = &reference.theta_ddot + &e * self.cfg.kp + &edot * self.cfg.kd;
        let state = JointState {
            theta: self.theta.clone(),
            theta_dot: self.theta_dot.clone(),
            theta_ddot: acc_des,
        };
        let rigid = inverse_dynamics(&self.cfg.model, &state)?;
        Ok(rigid + loss_torque(&self.cfg.true_loss, &state))
    }

    /// Advance one sample period tracking `reference`, with an optional
    /// end-effector wrench held constant over the step.  Returns the
    /// record for the step's start instant.
    pub fn step_tracking(
        &mut self,
        reference: &JointState,
        wrench_ee: Option<&Vector6<f64>>,
    ) -> Result<StepRecord, PlantError> {
        let tau_cmd = self.control_torque(reference)?;
        self.step_torque(&tau_cmd, wrench_ee)
    }

    /// Advance one sample period under an explicit commanded torque.
    pub fn step_torque(
        &mut self,
        tau_cmd: &DVector<f64>,
        wrench_ee: Option<&Vector6<f64>>,
    ) -> Result<StepRecord, PlantError> {
        let zero = Vector6::zeros();
        let wrench_ee = wrench_ee.unwrap_or(&zero);
        let tau_ext = self.external_torque(&self.theta, wrench_ee)?;

        // Log the instantaneous acceleration at the sample instant: this
        // makes the logged row satisfy the torque balance exactly.
        let acc_now = self.acceleration(&self.theta, &self.theta_dot, tau_cmd, &tau_ext)?;
        let record_state = JointState {
            theta: self.theta.clone(),
            theta_dot: self.theta_dot.clone(),
            theta_ddot: acc_now,
        };
        let mut tau_measured = tau_cmd.clone();
        for j in 0..tau_measured.len() {
            let std = self.cfg.torque_noise_std[j];
            if std > 0.0 {
                let normal = Normal::new(0.0, std).expect("validated std");
                tau_measured[j] += normal.sample(&mut self.rng);
            }
        }
        let record = StepRecord {
            t: self.t,
            state: record_state,
            tau_measured,
            tau_ext,
            wrench_ee: *wrench_ee,
        };

        // Integrate the true dynamics across the sample period with RK4
        // substeps; torque and external wrench are held constant.
        let h = self.cfg.sample_period / self.cfg.substeps as f64;
        for _ in 0..self.cfg.substeps {
            let deriv = |theta: &DVector<f64>, dot: &DVector<f64>| {
                let text = self.external_torque(theta, wrench_ee)?;
                self.acceleration(theta, dot, tau_cmd, &text)
            };
            let (q, v) = (self.theta.clone(), self.theta_dot.clone());
            let k1v = deriv(&q, &v)?;
            let k1q = v.clone();
            let k2v = deriv(&(&q + &k1q * (h / 2.0)), &(&v + &k1v * (h / 2.0)))?;
            let k2q = &v + &k1v * (h / 2.0);
            let k3v = deriv(&(&q + &k2q * (h / 2.0)), &(&v + &k2v * (h / 2.0)))?;
            let k3q = &v + &k2v * (h / 2.0);
            let k4v = deriv(&(&q + &k3q * h), &(&v + &k3v * h))?;
            let k4q = &v + &k3v * h;
            self.theta = q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (h / 6.0);
            self.theta_dot = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        }
        self.t += self.cfg.sample_period;
        Ok(record)
    }
}

/// Track a full reference trajectory and return the log.
///
/// The plant starts at rest on the first reference sample.  The wrench
/// profile, when given, is evaluated at each sample instant and held for
/// the step.
pub fn simulate_tracking(
    cfg: &PlantConfig,
    reference: &SampledTrajectory,
    wrench: Option<&WrenchProfile>,
    seed: u64,
) -> Result<TrajectoryLog, PlantError> {
    if reference.is_empty() {
        return Err(PlantError::BadReference("empty reference".into()));
    }
    if (reference.dt - cfg.sample_period).abs() > 1e-12 {
        return Err(PlantError::BadReference(format!(
            "reference dt {} differs from plant sample period {}",
            reference.dt, cfg.sample_period
        )));
    }
    if let Some(w) = wrench {
        w.validate()?;
    }
    let mut plant = Plant::new(cfg.clone(), reference.samples[0].theta.clone(), seed)?;
    let mut log = TrajectoryLog::new();
    for sample in &reference.samples {
        let w = wrench.map(|p| p.at(plant.time()));
        let record = plant.step_tracking(sample, w.as_ref())?;
        log.push(
            record.t,
            &record.state,
            record.tau_measured,
            record.tau_ext,
            record.wrench_ee,
        );
    }
    Ok(log)
}
