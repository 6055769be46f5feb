//! Peg-in-hole insertion driven entirely by the virtual force sensor.
//!
//! The task has three layers, kept deliberately separate:
//!
//! * a contact **classifier** mapping sensed axial force, bending moment,
//!   and insertion depth to one of four contact states, plus a tracker
//!   that only ever emits legal state transitions;
//! * a **controller** that turns one [`SensorReading`] into one
//!   [`PegAction`] (advance, retreat-and-correct, correct-in-place, or
//!   stop).  Its only input is the sensor reading — it never sees the
//!   scene, the plant, or any ground truth;
//! * an **episode runner** that closes the loop: robot tracking commands
//!   through the plant, penalty contact from the scene, torque-side
//!   sensing through the external-torque observer and the tool-moment-free
//!   wrench solve, and the controller on top.
//!
//! The search strategy follows the classical moment-guided pattern: while
//! stuck on the rim outside the hole, the bending moment points from the
//! supported rim patch back toward the opening, so the peg retreats a
//! little and slides that way; once inside, wall moments are used the
//! opposite way (comply away from the jam) together with a small
//! counter-tilt, and the peg keeps descending until the bottom is
//! reached.

use std::f64::consts::TAU;

use nalgebra::{DVector, Rotation3, Vector2, Vector3, Vector6};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{forward_kinematics, DynamicsError, Pose};
use crate::ik::{ik_solve, IkError, IkOptions};
use crate::impedance::{impedance_displacement, ImpedanceParams};
use crate::observer::{
    wrench_from_jacobian_no_tool_moment, FreeMotionModel, ObserverBank, ObserverError,
    ObserverPipeline,
};
use crate::plant::{Plant, PlantConfig, PlantError};
use crate::robot::JointState;
use crate::scene::{simulate_contact, PegHoleScene, PegPose, SceneError, TrueContact};

/// Errors raised by the peg task.
#[derive(Debug, Error)]
pub enum PegError {
    /// Underlying dynamics failure.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    /// Plant simulation failure.
    #[error(transparent)]
    Plant(#[from] PlantError),
    /// Observer failure.
    #[error(transparent)]
    Observer(#[from] ObserverError),
    /// Inverse kinematics failure.
    #[error(transparent)]
    Ik(#[from] IkError),
    /// Scene failure.
    #[error(transparent)]
    Scene(#[from] SceneError),
    /// Bad task configuration.
    #[error("invalid peg task config: {0}")]
    InvalidConfig(String),
}

/// Contact regime as seen by the insertion logic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContactState {
    /// Moving freely (above the surface or descending inside the hole).
    Approach,
    /// Tip resting on the surface next to the opening.
    StuckOutside,
    /// Inside the hole but jammed against the wall.
    StuckInside,
    /// Fully inserted.
    Inserted,
}

impl ContactState {
    /// Short lowercase name for logs.
    pub fn name(self) -> &'static str {
        match self {
            ContactState::Approach => "approach",
            ContactState::StuckOutside => "stuck_outside",
            ContactState::StuckInside => "stuck_inside",
            ContactState::Inserted => "inserted",
        }
    }

    /// Whether `self -> next` is a legal transition (staying put is
    /// always legal).  Insertion can only follow from inside the hole —
    /// either a descent that never jammed or a jam that was worked free;
    /// a peg stuck outside must first come free.
    pub fn can_transition_to(self, next: ContactState) -> bool {
        use ContactState::*;
        if self == next {
            return true;
        }
        matches!(
            (self, next),
            (Approach, StuckOutside)
                | (Approach, StuckInside)
                | (Approach, Inserted)
                | (StuckOutside, Approach)
                | (StuckInside, Approach)
                | (StuckInside, Inserted)
        )
    }
}

/// Expected classifier output for a geometric ground-truth label.
pub fn expected_state(truth: TrueContact) -> ContactState {
    match truth {
        TrueContact::Free => ContactState::Approach,
        TrueContact::Surface => ContactState::StuckOutside,
        TrueContact::WallOrRim => ContactState::StuckInside,
        TrueContact::Bottom => ContactState::Inserted,
    }
}

/// Decision thresholds for the contact classifier.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContactThresholds {
    /// Axial force magnitude that counts as contact (N).
    pub f_contact: f64,
    /// Bending moment magnitude that counts as a wall jam (N m).
    pub m_contact: f64,
    /// Depth below which the peg is considered outside the hole (m).
    pub depth_entry: f64,
    /// Remaining depth margin that counts as fully inserted (m).
    pub depth_done_tol: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        ContactThresholds {
            f_contact: 3.0,
            m_contact: 0.05,
            depth_entry: 0.002,
            depth_done_tol: 0.002,
        }
    }
}

/// One virtual-sensor sample, expressed in the hole frame (z up along
/// the hole axis).  This is the complete controller input.
#[derive(Clone, Copy, Debug, Default)]
pub struct SensorReading {
    /// Estimated axial contact force on the peg (N, positive pushing the
    /// peg back up).
    pub f_z: f64,
    /// Estimated bending moment about the hole x axis (N m).
    pub m_x: f64,
    /// Estimated bending moment about the hole y axis (N m).
    pub m_y: f64,
    /// Insertion depth of the tip below the surface plane, from the
    /// robot's own kinematics (m, negative above the surface).
    pub depth: f64,
}

/// Classify one sensor reading.  `hole_depth` is the nominal hole depth
/// the task was taught.
pub fn classify_contact(
    th: &ContactThresholds,
    hole_depth: f64,
    reading: &SensorReading,
) -> ContactState {
    if reading.depth >= hole_depth - th.depth_done_tol {
        ContactState::Inserted
    } else if reading.depth >= th.depth_entry {
        let moment = (reading.m_x.powi(2) + reading.m_y.powi(2)).sqrt();
        if moment >= th.m_contact {
            ContactState::StuckInside
        } else {
            ContactState::Approach
        }
    } else if reading.f_z.abs() >= th.f_contact {
        ContactState::StuckOutside
    } else {
        ContactState::Approach
    }
}

/// Wraps the raw classifier output so the emitted sequence only contains
/// legal transitions.  When the raw label is not directly reachable the
/// tracker moves one legal step toward it (for example a raw `Inserted`
/// seen while `StuckOutside` first passes through `Approach`).
#[derive(Clone, Copy, Debug)]
pub struct ContactTracker {
    state: ContactState,
}

impl Default for ContactTracker {
    fn default() -> Self {
        ContactTracker {
            state: ContactState::Approach,
        }
    }
}

impl ContactTracker {
    /// Current (legalized) state.
    pub fn state(&self) -> ContactState {
        self.state
    }

    /// Consume one raw classification and return the legalized state.
    pub fn step(&mut self, raw: ContactState) -> ContactState {
        use ContactState::*;
        self.state = if self.state.can_transition_to(raw) {
            raw
        } else {
            match (self.state, raw) {
                // Inserted is terminal.
                (Inserted, _) => Inserted,
                // Any unreachable label routes through Approach, which is
                // legal from every non-terminal state.
                _ => Approach,
            }
        };
        self.state
    }
}

/// Controller parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PegParams {
    /// Classifier thresholds.
    pub thresholds: ContactThresholds,
    /// Impedance law for lateral corrections (error input: bending
    /// moment, N m; output: lateral step, m).
    pub lateral_impedance: ImpedanceParams,
    /// Descent per decision while approaching (m).
    pub advance_step: f64,
    /// Descent per decision while jammed inside (m).
    pub inside_advance_step: f64,
    /// Lift after each outside read (m).  Friction under the pressed tip
    /// makes lateral sliding stick, so the peg repositions in free space:
    /// read the moment while pressed, hop up, step sideways, descend
    /// again.
    pub hop_height: f64,
    /// Largest lateral correction per decision (m).
    pub max_lateral_step: f64,
    /// Counter-tilt per unit bending moment while jammed (rad per N m).
    pub tilt_gain: f64,
    /// Largest commanded tilt magnitude (rad).
    pub max_tilt: f64,
    /// Descent per decision while captured mid-hole, clear of both the
    /// mouth and the bottom (m).  The fit guides the peg there, so the
    /// descent can run much faster than the contact-hunting steps.
    pub inside_fast_step: f64,
    /// Moment magnitude below which the direction is considered
    /// unreadable and the probe pattern is used instead (N m).
    pub moment_floor: f64,
    /// Lateral step of the deterministic probe pattern (m).
    pub probe_step: f64,
    /// Nominal hole depth the task was taught (m).
    pub hole_depth: f64,
}

impl Default for PegParams {
    fn default() -> Self {
        PegParams {
            thresholds: ContactThresholds::default(),
            lateral_impedance: ImpedanceParams {
                m: 1.0,
                b: 10.0,
                k_tau: 300.0,
                k_v: 0.0,
                dt: 0.008,
            },
            advance_step: 6.0e-4,
            inside_advance_step: 5.0e-4,
            hop_height: 1.5e-3,
            max_lateral_step: 8.0e-4,
            tilt_gain: 0.04,
            max_tilt: 0.06,
            inside_fast_step: 2.0e-3,
            moment_floor: 0.015,
            probe_step: 4.0e-4,
            hole_depth: 0.030,
        }
    }
}

/// One controller decision, expressed as command increments in the hole
/// frame.
#[derive(Clone, Copy, Debug, Default)]
pub struct PegAction {
    /// Vertical command increment (m, negative descends).
    pub dz: f64,
    /// Lateral command increment (m).
    pub lateral: Vector2<f64>,
    /// Commanded tilt increment as a rotation vector about hole x/y
    /// (rad).
    pub tilt: Vector2<f64>,
    /// Task complete: hold position.
    pub stop: bool,
}

/// The insertion strategy.  `decide` consumes nothing but sensor
/// readings; the struct holds only controller-internal state.
#[derive(Clone, Debug)]
pub struct PegController {
    params: PegParams,
    tracker: ContactTracker,
    /// Commanded tilt accumulated so far (the controller tracks its own
    /// orientation command so it can decay it — proprioception, not
    /// scene knowledge).
    tilt_cmd: Vector2<f64>,
    /// Consecutive stuck-outside decisions with an unreadable moment.
    unresolved_probes: u32,
    /// Current lateral stride while searching outside (m).  For a flat
    /// tip the bending-moment magnitude barely depends on the offset, so
    /// distance must be inferred from direction reversals: passing over
    /// the opening flips the sensed direction, and the stride halves to
    /// bracket it.
    stride: f64,
    /// Sensed lateral direction at the previous outside decision.
    last_dir: Option<Vector2<f64>>,
    /// Whether a full settled decision period has passed since touching
    /// down.  The first outside decision after a touch only dwells: the
    /// landing transient and the observer lag corrupt that period's
    /// moment average.
    outside_dwelled: bool,
}

impl PegController {
    /// New controller in the approach state.
    pub fn new(params: PegParams) -> Self {
        let stride = params.max_lateral_step;
        PegController {
            params,
            tracker: ContactTracker::default(),
            tilt_cmd: Vector2::zeros(),
            unresolved_probes: 0,
            stride,
            last_dir: None,
            outside_dwelled: false,
        }
    }

    /// Parameters in use.
    pub fn params(&self) -> &PegParams {
        &self.params
    }

    /// Current contact state.
    pub fn state(&self) -> ContactState {
        self.tracker.state()
    }

    /// Commanded tilt the controller believes it holds.
    pub fn tilt_cmd(&self) -> Vector2<f64> {
        self.tilt_cmd
    }

    fn lateral_magnitude(&self, moment: f64) -> f64 {
        impedance_displacement(&self.params.lateral_impedance, moment)
            .abs()
            .min(self.params.max_lateral_step)
    }

    /// Map one sensor reading to one action.
    pub fn decide(&mut self, reading: &SensorReading) -> PegAction {
        let p = self.params.clone();
        let raw = classify_contact(&p.thresholds, p.hole_depth, reading);
        let state = self.tracker.step(raw);
        let moment = Vector2::new(reading.m_x, reading.m_y);
        let moment_mag = moment.norm();
        // The bending moment maps to the in-plane direction it encodes:
        // for rim support outside it points at the opening; for a wall
        // jam inside the same construction points at the jam, so the
        // correction flips sign.
        let moment_dir = if moment_mag > 0.0 {
            Vector2::new(moment[1], -moment[0]) / moment_mag
        } else {
            Vector2::zeros()
        };

        let mut action = PegAction::default();
        match state {
            ContactState::Approach => {
                // Where the one-step airborne drop aims, just above the
                // taught surface plane (m).
                const LAND_MARGIN: f64 = 2.0e-4;
                // The sensed depth picks the descent rate: close the gap
                // in one step while clearly airborne, creep near the
                // surface and the bottom, and run quickly through the
                // captured mid-hole region where the fit keeps the peg
                // aligned.  The search memory (stride, last direction)
                // survives these decisions: every hop of the outside
                // search passes through free flight, and forgetting the
                // bracket there would restart the search at full stride
                // after every single probe.
                let airborne_gap = -reading.depth - LAND_MARGIN;
                action.dz = if airborne_gap > p.advance_step {
                    -airborne_gap
                } else if reading.depth >= p.thresholds.depth_entry
                    && reading.depth < p.hole_depth - 2.0 * p.thresholds.depth_entry
                {
                    -p.inside_fast_step
                } else {
                    -p.advance_step
                };
                self.outside_dwelled = false;
            }
            ContactState::StuckOutside => {
                if !self.outside_dwelled {
                    // Fresh touch: hold for one full period so the
                    // landing transient dies out and the observer
                    // converges on the settled contact before the moment
                    // is trusted.
                    self.outside_dwelled = true;
                } else if moment_mag >= p.moment_floor {
                    // The moment was read under a settled press.  Hop
                    // clear of the surface and take the lateral step
                    // unloaded — under the pressed tip, stiction swallows
                    // steps smaller than roughly the friction force over
                    // the lateral servo stiffness, which is coarser than
                    // the fit clearance.
                    action.dz = p.hop_height;
                    self.outside_dwelled = false;
                    self.unresolved_probes = 0;
                    if let Some(prev) = self.last_dir {
                        let agreement = prev.dot(&moment_dir);
                        if agreement < 0.0 {
                            // The direction flipped: the last step crossed
                            // the opening, so halve the stride to bracket
                            // it.
                            self.stride = (0.5 * self.stride).max(0.25 * p.probe_step);
                        } else if agreement > 0.7 {
                            // Tight agreement between settled reads only
                            // happens well away from the opening, where
                            // the support crescent is stable; the stride
                            // may grow back.  Near the mouth the sensed
                            // direction wanders by tens of degrees, and
                            // that wander must not re-inflate the stride.
                            self.stride = (1.3 * self.stride).min(p.max_lateral_step);
                        }
                    }
                    self.last_dir = Some(moment_dir);
                    action.lateral =
                        moment_dir * self.lateral_magnitude(moment_mag).min(self.stride);
                } else {
                    // Moment too weak to trust: hop to the next position
                    // of a deterministic spiral walked around the spot
                    // where the signal faded.
                    action.dz = p.hop_height;
                    self.outside_dwelled = false;
                    let k = self.unresolved_probes as f64;
                    let pos = |i: f64| -> Vector2<f64> {
                        let angle = i * (TAU * 0.381_966_011_250_105);
                        let radius = p.probe_step * (1.0 + 0.2 * i).min(4.0);
                        Vector2::new(angle.cos(), angle.sin()) * radius
                    };
                    action.lateral = pos(k + 1.0) - pos(k);
                    self.unresolved_probes += 1;
                    self.last_dir = None;
                }
            }
            ContactState::StuckInside => {
                action.dz = -p.inside_advance_step;
                self.outside_dwelled = false;
                if moment_mag >= p.moment_floor {
                    // Comply away from the jam and counter-tilt against
                    // the sensed moment.
                    action.lateral = -moment_dir * self.lateral_magnitude(moment_mag);
                    let tilt_step = Vector2::new(-reading.m_x, -reading.m_y) * p.tilt_gain;
                    self.tilt_cmd += tilt_step;
                }
            }
            ContactState::Inserted => {
                action.stop = true;
            }
        }
        // Commanded tilt leaks slowly back toward the taught axis: fast
        // enough that corrections cannot accumulate without fresh
        // evidence, slow enough that alignment learned from one jam
        // survives the clean descent that follows.  When the taught axis
        // itself is wrong (initial tilt), the standing correction is
        // re-earned from each jam's moment.
        self.tilt_cmd *= 0.98;
        let norm = self.tilt_cmd.norm();
        if norm > p.max_tilt {
            self.tilt_cmd *= p.max_tilt / norm;
        }
        action.tilt = self.tilt_cmd;
        action
    }
}

/// Episode configuration around the controller.
#[derive(Clone, Debug)]
pub struct PegSetup {
    /// Contact scene.
    pub scene: PegHoleScene,
    /// Controller parameters.
    pub params: PegParams,
    /// Samples between controller decisions.  The period must leave room
    /// for the tracking loop to settle after each commanded step:
    /// while the peg is still sliding, friction adds a bending-moment
    /// component aligned with the motion, which corrupts the direction
    /// read from the virtual sensor.
    pub decision_period: usize,
    /// Sensor samples averaged per decision, taken from the settled tail
    /// of the period when the peg has (nearly) stopped moving.  A wider
    /// window sharpens the moment direction: per-sample noise leaves a
    /// direction error of tens of degrees at task-scale moments.
    pub sense_window: usize,
    /// Hard step budget per episode.
    pub max_steps: usize,
    /// Largest random lateral offset of the true hole center (m).
    pub offset_limit: f64,
    /// Largest random initial tilt of the peg axis away from the true
    /// hole axis (rad).  The tilt rides on the taught orientation, so
    /// the controller cannot see it directly; it has to be worked out of
    /// the moment feedback, because the fit only passes a peg aligned to
    /// a fraction of a degree.
    pub tilt_limit: f64,
    /// Tip height above the surface at the start (m).
    pub approach_height: f64,
    /// Process-to-measurement noise ratio of the torque filters.
    pub q_over_r: f64,
    /// Assumed torque measurement variance per joint for the filters;
    /// when zero, a small default keeps the filters well posed.
    pub torque_noise_var: f64,
    /// Largest distance the vertical command may run past the measured
    /// tip (m).  Anti-windup against the tracking compliance, and the
    /// bound on how hard a stalled descent can press: the servo force
    /// grows with the command-to-tip gap.
    pub press_cap: f64,
    /// Record a per-sample trace.
    pub record_trace: bool,
    /// When set, the ground-truth reporting channels (true-contact label
    /// and true contact moment) are replaced with seeded garbage before
    /// they reach the trace.  The physics is untouched.  This exists to
    /// prove the control loop cannot see scene truth: a corrupted run
    /// must command the exact same motion.
    pub truth_scramble_seed: Option<u64>,
}

impl Default for PegSetup {
    fn default() -> Self {
        PegSetup {
            scene: PegHoleScene::default(),
            params: PegParams::default(),
            decision_period: 32,
            sense_window: 8,
            max_steps: 5000,
            offset_limit: 0.002,
            tilt_limit: 2.0_f64.to_radians(),
            approach_height: 0.005,
            q_over_r: 0.25,
            torque_noise_var: 0.03f64.powi(2),
            press_cap: 1.5e-3,
            record_trace: false,
            truth_scramble_seed: None,
        }
    }
}

/// One trace row of an episode.
#[derive(Clone, Debug, Serialize)]
pub struct PegTraceRow {
    /// Sample time (s).
    pub t: f64,
    /// Legalized contact state at the last decision.
    pub state: ContactState,
    /// Sensed depth (m).
    pub depth: f64,
    /// Sensed axial force (N).
    pub f_z: f64,
    /// Sensed bending moments (N m).
    pub m_x: f64,
    /// Sensed bending moments (N m).
    pub m_y: f64,
    /// True contact regime from the scene.
    pub truth: TrueContact,
    /// True contact bending moment in the hole frame (N m), for
    /// comparing the virtual sensor against the plant.
    pub m_true: [f64; 2],
    /// Commanded tip position in the hole frame (m).
    pub cmd: [f64; 3],
    /// Actual tip position in the hole frame (m).
    pub tip: [f64; 3],
}

/// Episode outcome.
#[derive(Clone, Debug)]
pub struct PegEpisode {
    /// Whether the peg reached full depth within the budget.
    pub success: bool,
    /// Samples consumed.
    pub steps: usize,
    /// Final sensed depth (m).
    pub final_depth: f64,
    /// Deepest point reached (m).  Success tests this rather than the
    /// last sample: after the stop decision the held peg still dithers
    /// through stiction by a few hundredths of a millimetre, which must
    /// not flip an episode that crossed the depth line.
    pub max_depth: f64,
    /// Final contact state.
    pub final_state: ContactState,
    /// True lateral offset of this episode (m).
    pub offset: Vector2<f64>,
    /// True initial axis tilt of this episode, as a rotation vector
    /// about the hole x/y axes (rad).
    pub tilt: Vector2<f64>,
    /// Decisions spent in each state (approach, outside, inside,
    /// inserted).
    pub state_decisions: [usize; 4],
    /// Optional per-sample trace.
    pub trace: Vec<PegTraceRow>,
}

/// Everything the episode needs besides the setup: the simulated robot
/// and the free-motion model of the sensing chain.
pub struct PegWorld<'a> {
    /// Plant configuration (model, losses, noise, tracking gains).
    pub plant_cfg: &'a PlantConfig,
    /// Free-motion torque model used by the observer.
    pub free: &'a FreeMotionModel,
}

/// Nominal flange target over the bench: tool z straight down.
fn bench_target() -> Pose {
    Pose {
        rotation: nalgebra::Matrix3::from_columns(&[
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
            Vector3::new(0.0, 0.0, -1.0),
        ]),
        translation: Vector3::new(0.40, 0.0, 0.25),
    }
}

fn ik_seed() -> DVector<f64> {
    DVector::from_column_slice(&[0.0, -0.5, 1.0, 0.0, 1.0, 0.0])
}

/// Corruption modes for the sensing chain, used to show that the
/// controller genuinely depends on the virtual sensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorMode {
    /// Normal operation.
    Live,
    /// Force and moment channels forced to zero (depth still available).
    Zeroed,
}

/// Run one insertion episode.  `seed` drives both the plant noise and
/// the hole-offset randomization; a fixed seed reproduces the episode
/// bit for bit.
pub fn run_peg_episode(
    world: &PegWorld,
    setup: &PegSetup,
    seed: u64,
) -> Result<PegEpisode, PegError> {
    run_peg_episode_with_sensor(world, setup, seed, SensorMode::Live)
}

/// Episode runner with an explicit sensor mode.
pub fn run_peg_episode_with_sensor(
    world: &PegWorld,
    setup: &PegSetup,
    seed: u64,
    sensor_mode: SensorMode,
) -> Result<PegEpisode, PegError> {
    setup.scene.validate()?;
    if setup.decision_period == 0 || setup.sense_window == 0 || setup.max_steps == 0 {
        return Err(PegError::InvalidConfig(
            "decision_period, sense_window and max_steps must be positive".into(),
        ));
    }
    if !(setup.tilt_limit >= 0.0) || !setup.tilt_limit.is_finite() {
        return Err(PegError::InvalidConfig(
            "tilt_limit must be non-negative and finite".into(),
        ));
    }
    let model = &world.plant_cfg.model;
    let n = model.n_joints();
    let dt = world.plant_cfg.sample_period;
    let tool_len = setup.scene.peg_length;

    // Nominal approach configuration: tool pointing straight down.
    let theta0 = ik_solve(model, &ik_seed(), &bench_target(), &IkOptions::default())?;
    let pose0 = forward_kinematics(model, &theta0)?;
    let tool_z0 = pose0.rotation * Vector3::new(0.0, 0.0, 1.0);
    let tip0 = pose0.translation + tool_z0 * tool_len;

    // Hole frame: z up along the approach axis, x/y spanning the bench.
    let z_h = -tool_z0;
    let x_h = {
        let x = Vector3::new(1.0, 0.0, 0.0);
        (x - z_h * x.dot(&z_h)).normalize()
    };
    let y_h = z_h.cross(&x_h);
    let r_wh = nalgebra::Matrix3::from_columns(&[x_h, y_h, z_h]);

    // True hole center: believed center plus an unknown offset.
    let mut offset_rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let offset = loop {
        let x = (offset_rng.random::<f64>() * 2.0 - 1.0) * setup.offset_limit;
        let y = (offset_rng.random::<f64>() * 2.0 - 1.0) * setup.offset_limit;
        let v = Vector2::new(x, y);
        if v.norm() <= setup.offset_limit {
            break v;
        }
    };
    let origin_w = tip0 - r_wh * Vector3::new(offset[0], offset[1], setup.approach_height);

    // The taught tool orientation carries the episode's initial tilt:
    // the robot believes this slightly wrong axis points straight into
    // the hole, so every commanded orientation is biased by it.
    let tilt0 = {
        let ang = offset_rng.random::<f64>() * TAU;
        let mag = offset_rng.random::<f64>() * setup.tilt_limit;
        Vector2::new(ang.cos(), ang.sin()) * mag
    };
    let taught_rot = Rotation3::from_scaled_axis(r_wh * Vector3::new(tilt0[0], tilt0[1], 0.0))
        .matrix()
        * pose0.rotation;

    // Sensing chain.
    let r_var = setup.torque_noise_var.max(1e-6);
    let bank = ObserverBank::uniform(n, setup.q_over_r * r_var, r_var)?;
    let mut pipe = ObserverPipeline::new(world.free.clone(), bank)?;
    let mask = world.free.coverage_mask();

    let mut controller = PegController::new(setup.params.clone());

    // Command state, tip coordinates in the hole frame.  The controller
    // starts believing it is centered; its true start is the offset.
    let mut cmd_tip = Vector3::new(offset[0], offset[1], setup.approach_height);
    let start_xy = Vector2::new(cmd_tip[0], cmd_tip[1]);
    let lateral_cap = setup.offset_limit + 0.004;

    // The robot starts where it was taught to start: tip at the believed
    // center, axis along the (tilt-biased) taught orientation.
    let axis0_h = r_wh.transpose() * (-(taught_rot * Vector3::new(0.0, 0.0, 1.0)));
    let start_target = Pose {
        rotation: taught_rot,
        translation: origin_w + r_wh * (cmd_tip + axis0_h * tool_len),
    };
    let theta_start = ik_solve(model, &theta0, &start_target, &IkOptions::default())?;
    let mut plant = Plant::new(world.plant_cfg.clone(), theta_start.clone(), seed)?;
    let mut theta_ref = theta_start;

    let mut truth_scramble = setup.truth_scramble_seed.map(ChaCha12Rng::seed_from_u64);
    let mut readings: Vec<SensorReading> = Vec::new();
    let mut trace = Vec::new();
    let mut state_decisions = [0usize; 4];
    let mut prev_tip_h: Option<Vector3<f64>> = None;
    let mut last_state = ContactState::Approach;
    let mut stopped = false;
    let mut steps = 0usize;
    let mut final_depth = f64::NEG_INFINITY;
    let mut max_depth = f64::NEG_INFINITY;

    for k in 0..setup.max_steps {
        // True peg pose in the hole frame from the current plant state.
        let pose = forward_kinematics(model, plant.theta())?;
        let tool_z = pose.rotation * Vector3::new(0.0, 0.0, 1.0);
        let tip_w = pose.translation + tool_z * tool_len;
        let tip_h = r_wh.transpose() * (tip_w - origin_w);
        let axis_h = r_wh.transpose() * (-tool_z);
        let tip_vel_h = match prev_tip_h {
            Some(prev) => (tip_h - prev) / dt,
            None => Vector3::zeros(),
        };
        prev_tip_h = Some(tip_h);

        let contact = simulate_contact(
            &setup.scene,
            &PegPose {
                tip: tip_h,
                axis: axis_h,
                tip_velocity: tip_vel_h,
            },
        );
        // Contact wrench (on the robot, about the flange) to the
        // end-effector frame for the plant.
        let f_w = r_wh * contact.wrench_ee.fixed_rows::<3>(0);
        let m_w = r_wh * contact.wrench_ee.fixed_rows::<3>(3);
        let rt = pose.rotation.transpose();
        let (f_e, m_e) = (rt * f_w, rt * m_w);
        let w_ee = Vector6::new(f_e[0], f_e[1], f_e[2], m_e[0], m_e[1], m_e[2]);

        let reference = JointState {
            theta: theta_ref.clone(),
            theta_dot: DVector::zeros(n),
            theta_ddot: DVector::zeros(n),
        };
        let record = plant.step_tracking(&reference, Some(&w_ee))?;
        steps = k + 1;

        // Virtual sensor: observer + tool-moment-free wrench solve, then
        // into the hole frame.
        let obs = pipe.push(record.t, &record.state, &record.tau_measured)?;
        let (w_base, _cond) =
            wrench_from_jacobian_no_tool_moment(model, plant.theta(), &obs.tau_ext_hat, &mask)?;
        let f_h = r_wh.transpose() * Vector3::new(w_base[0], w_base[1], w_base[2]);
        let m_h = r_wh.transpose() * Vector3::new(w_base[3], w_base[4], w_base[5]);
        let depth = -tip_h[2];
        final_depth = depth;
        max_depth = max_depth.max(depth);
        let reading = match sensor_mode {
            SensorMode::Live => SensorReading {
                f_z: f_h[2],
                m_x: m_h[0],
                m_y: m_h[1],
                depth,
            },
            SensorMode::Zeroed => SensorReading {
                f_z: 0.0,
                m_x: 0.0,
                m_y: 0.0,
                depth,
            },
        };
        readings.push(reading);

        if setup.record_trace {
            let (truth, m_true) = match truth_scramble.as_mut() {
                Some(rng) => {
                    let labels = [
                        TrueContact::Free,
                        TrueContact::Surface,
                        TrueContact::WallOrRim,
                        TrueContact::Bottom,
                    ];
                    (
                        labels[(rng.random::<u32>() % 4) as usize],
                        [rng.random::<f64>(), rng.random::<f64>()],
                    )
                }
                None => (
                    contact.true_contact,
                    [contact.wrench_ee[3], contact.wrench_ee[4]],
                ),
            };
            trace.push(PegTraceRow {
                t: record.t,
                state: last_state,
                depth,
                f_z: reading.f_z,
                m_x: reading.m_x,
                m_y: reading.m_y,
                truth,
                m_true,
                cmd: [cmd_tip[0], cmd_tip[1], cmd_tip[2]],
                tip: [tip_h[0], tip_h[1], tip_h[2]],
            });
        }

        if stopped {
            // Hold position briefly after stopping so the episode ends
            // in a quiet state.
            if readings.len() >= setup.decision_period {
                break;
            }
            continue;
        }

        if (k + 1) % setup.decision_period == 0 {
            // Average the freshest readings for the decision.
            let w = setup.sense_window.min(readings.len());
            let tail = &readings[readings.len() - w..];
            let mut avg = SensorReading::default();
            for r in tail {
                avg.f_z += r.f_z;
                avg.m_x += r.m_x;
                avg.m_y += r.m_y;
            }
            avg.f_z /= w as f64;
            avg.m_x /= w as f64;
            avg.m_y /= w as f64;
            avg.depth = depth;

            let action = controller.decide(&avg);
            last_state = controller.state();
            state_decisions[match last_state {
                ContactState::Approach => 0,
                ContactState::StuckOutside => 1,
                ContactState::StuckInside => 2,
                ContactState::Inserted => 3,
            }] += 1;

            if action.stop {
                stopped = true;
                readings.clear();
                continue;
            }

            // Apply the action to the commanded tip pose, with caps that
            // reference only commands and proprioception.
            cmd_tip[0] += action.lateral[0];
            cmd_tip[1] += action.lateral[1];
            cmd_tip[2] += action.dz;
            let lat = Vector2::new(cmd_tip[0], cmd_tip[1]) - start_xy;
            let lat_norm = lat.norm();
            if lat_norm > lateral_cap {
                let lat = lat * (lateral_cap / lat_norm);
                cmd_tip[0] = start_xy[0] + lat[0];
                cmd_tip[1] = start_xy[1] + lat[1];
            }
            let tip_z_meas = tip_h[2];
            cmd_tip[2] = cmd_tip[2]
                .max(tip_z_meas - setup.press_cap)
                .max(-setup.scene.hole_depth - 0.002)
                .min(setup.approach_height);

            // Commanded flange pose: tilt about the hole x/y axes on top
            // of the taught (tilt-biased) orientation.
            let tilt_w = r_wh * Vector3::new(action.tilt[0], action.tilt[1], 0.0);
            let r_cmd = Rotation3::from_scaled_axis(tilt_w).matrix() * taught_rot;
            let axis_cmd_h = r_wh.transpose() * (-(r_cmd * Vector3::new(0.0, 0.0, 1.0)));
            let flange_h = cmd_tip + axis_cmd_h * tool_len;
            let target = Pose {
                rotation: r_cmd,
                translation: origin_w + r_wh * flange_h,
            };
            theta_ref = ik_solve(model, &theta_ref, &target, &IkOptions::default())?;
        }
    }

    let success = last_state == ContactState::Inserted
        && max_depth >= setup.scene.hole_depth - setup.params.thresholds.depth_done_tol;
    Ok(PegEpisode {
        success,
        steps,
        final_depth,
        max_depth,
        final_state: last_state,
        offset,
        tilt: tilt0,
        state_decisions,
        trace,
    })
}

/// Batch summary over seeded episodes.
#[derive(Clone, Debug)]
pub struct PegBatch {
    /// Per-episode outcomes, in seed order.
    pub episodes: Vec<PegEpisode>,
    /// Fraction of successful episodes.
    pub success_rate: f64,
    /// Mean steps of the successful episodes.
    pub mean_steps_success: f64,
}

/// Run `count` episodes with seeds `base_seed..base_seed+count` in
/// parallel.
pub fn run_peg_batch(
    world: &PegWorld,
    setup: &PegSetup,
    base_seed: u64,
    count: usize,
) -> Result<PegBatch, PegError> {
    use rayon::prelude::*;
    let episodes: Result<Vec<_>, PegError> = (0..count)
        .into_par_iter()
        .map(|i| run_peg_episode(world, setup, base_seed + i as u64))
        .collect();
    let episodes = episodes?;
    let successes: Vec<_> = episodes.iter().filter(|e| e.success).collect();
    let success_rate = successes.len() as f64 / episodes.len().max(1) as f64;
    let mean_steps_success = if successes.is_empty() {
        f64::NAN
    } else {
        successes.iter().map(|e| e.steps as f64).sum::<f64>() / successes.len() as f64
    };
    Ok(PegBatch {
        episodes,
        success_rate,
        mean_steps_success,
    })
}
