//! Robot description: kinematic chain, inertial parameters, joint limits.
//!
//! A [`RobotModel`] is a standard Denavit-Hartenberg chain of revolute
//! joints with per-link mass, center of mass, and inertia.  Models are
//! usually loaded from a TOML file (angles in degrees on disk, radians in
//! memory); [`RobotModel::bundled_6dof`] returns the 700 mm reach arm that
//! ships with the crate, and [`RobotModel::planar`] builds the flat
//! rod-link arms used throughout the tests.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::Deserialize;
use thiserror::Error;

/// Errors raised while loading or validating a robot description.
#[derive(Debug, Error)]
pub enum RobotError {
    /// The file could not be read.
    #[error("failed to read robot config: {0}")]
    Io(#[from] std::io::Error),
    /// The TOML document did not match the expected schema.
    #[error("failed to parse robot config: {0}")]
    Parse(#[from] toml::de::Error),
    /// A physical or structural constraint was violated.
    #[error("invalid robot model: {0}")]
    Invalid(String),
}

/// One standard Denavit-Hartenberg row (angles in radians).
///
/// The transform from frame `i-1` to frame `i` is
/// `RotZ(theta + theta_offset) * TransZ(d) * TransX(a) * RotX(alpha)`,
/// so joint `i` rotates about the z axis of frame `i-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DhRow {
    /// Link length along the common normal (m).
    pub a: f64,
    /// Link twist about the moved x axis (rad).
    pub alpha: f64,
    /// Link offset along the previous z axis (m).
    pub d: f64,
    /// Constant added to the joint variable before the z rotation (rad).
    pub theta_offset: f64,
}

/// Symmetric position limit for one joint (rad).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointLimit {
    /// Lower bound (rad).
    pub min: f64,
    /// Upper bound (rad).
    pub max: f64,
}

impl JointLimit {
    /// Whether `theta` lies inside the closed interval.
    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.min && theta <= self.max
    }

    /// Width of the interval (rad).
    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Kinematic and inertial description of a serial arm with revolute joints.
///
/// All vectors are indexed by joint/link from base (`0`) to flange
/// (`n_joints() - 1`).  Link frames follow the Denavit-Hartenberg
/// convention: frame `i` sits at the distal end of link `i`, and `com[i]`
/// and `inertia[i]` are expressed in that frame (inertia about the COM).
#[derive(Clone, Debug)]
pub struct RobotModel {
    /// Denavit-Hartenberg rows, base to flange.
    pub dh: Vec<DhRow>,
    /// Link masses (kg).
    pub link_mass: Vec<f64>,
    /// Link COM positions in the link frame (m).
    pub link_com: Vec<Vector3<f64>>,
    /// Link inertia tensors about the COM, in the link frame (kg m^2).
    pub link_inertia: Vec<Matrix3<f64>>,
    /// Joint position limits (rad).
    pub joint_limits: Vec<JointLimit>,
    /// Joint velocity limits (rad/s).
    pub v_max: Vec<f64>,
    /// Joint acceleration limits (rad/s^2).
    pub a_max: Vec<f64>,
    /// Gravity vector in the base frame (m/s^2).
    pub gravity: Vector3<f64>,
    /// Combined mass of the wrist bodies, used by [`RobotModel::lumped_wrist`].
    pub wrist_lump_mass: f64,
}

impl RobotModel {
    /// Number of joints (equals the number of links).
    pub fn n_joints(&self) -> usize {
        self.dh.len()
    }

    /// Parse a robot description from TOML text (file angles in degrees).
    pub fn from_toml_str(text: &str) -> Result<Self, RobotError> {
        let raw: RawRobot = toml::from_str(text)?;
        let model = raw.into_model();
        model.validate()?;
        Ok(model)
    }

    /// Load a robot description from a TOML file.
    pub fn from_file(path: &std::path::Path) -> Result<Self, RobotError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The 6-DOF arm bundled with the crate (700 mm reach class).
    pub fn bundled_6dof() -> Self {
        Self::from_toml_str(include_str!("../config/robot_6dof.toml"))
            .expect("bundled robot config is valid")
    }

    /// Build a planar arm in the x-y plane: all joints about +z, gravity
    /// along -y.  Each entry of `links` is `(length, mass, com_offset,
    /// izz)` where `com_offset` is the COM distance from the *proximal*
    /// end of the link and `izz` the inertia about the COM.
    ///
    /// Useful for tests and examples where closed-form dynamics exist.
    pub fn planar(links: &[(f64, f64, f64, f64)]) -> Self {
        let n = links.len();
        let mut model = RobotModel {
            dh: Vec::with_capacity(n),
            link_mass: Vec::with_capacity(n),
            link_com: Vec::with_capacity(n),
            link_inertia: Vec::with_capacity(n),
            joint_limits: vec![
                JointLimit {
                    min: -std::f64::consts::PI,
                    max: std::f64::consts::PI,
                };
                n
            ],
            v_max: vec![2.0 * std::f64::consts::PI; n],
            a_max: vec![8.0 * std::f64::consts::PI; n],
            gravity: Vector3::new(0.0, -9.81, 0.0),
            wrist_lump_mass: 0.0,
        };
        for &(length, mass, com_offset, izz) in links {
            model.dh.push(DhRow {
                a: length,
                alpha: 0.0,
                d: 0.0,
                theta_offset: 0.0,
            });
            model.link_mass.push(mass);
            // Link frame sits at the distal end, so shift the COM back.
            model.link_com.push(Vector3::new(com_offset - length, 0.0, 0.0));
            model
                .link_inertia
                .push(Matrix3::from_diagonal(&Vector3::new(1e-6, 1e-6, izz)));
        }
        model.validate().expect("planar model is valid");
        model
    }

    /// Reduced model with the wrist links folded into the forearm as a
    /// point mass of `wrist_lump_mass` at the wrist center.  The chain
    /// keeps only the first three joints; the lumped mass is appended to
    /// link 3 via the parallel axis theorem.
    ///
    /// Returns an error when the model has fewer than four joints.
    pub fn lumped_wrist(&self) -> Result<RobotModel, RobotError> {
        if self.n_joints() < 4 {
            return Err(RobotError::Invalid(
                "lumped wrist model needs at least 4 joints".into(),
            ));
        }
        let mut reduced = self.clone();
        reduced.dh.truncate(3);
        reduced.link_mass.truncate(3);
        reduced.link_com.truncate(3);
        reduced.link_inertia.truncate(3);
        reduced.joint_limits.truncate(3);
        reduced.v_max.truncate(3);
        reduced.a_max.truncate(3);

        // Place the lump at the wrist center: the origin of frame 4 lies at
        // d_4 along z_3 from the origin of frame 3, expressed in frame 3.
        let lump = self.wrist_lump_mass;
        let lump_pos = Vector3::new(0.0, 0.0, self.dh[3].d);
        let m3 = self.link_mass[2];
        let total = m3 + lump;
        let com = (self.link_com[2] * m3 + lump_pos * lump) / total;
        // Parallel axis: move link-3 inertia and the point mass to the new COM.
        let shift = |m: f64, r: Vector3<f64>| -> Matrix3<f64> {
            m * (Matrix3::identity() * r.norm_squared() - r * r.transpose())
        };
        let inertia = self.link_inertia[2]
            + shift(m3, self.link_com[2] - com)
            + shift(lump, lump_pos - com);
        reduced.link_mass[2] = total;
        reduced.link_com[2] = com;
        reduced.link_inertia[2] = inertia;
        reduced.wrist_lump_mass = 0.0;
        reduced.validate()?;
        Ok(reduced)
    }

    /// Check structural and physical plausibility.
    pub fn validate(&self) -> Result<(), RobotError> {
        let n = self.n_joints();
        if n == 0 {
            return Err(RobotError::Invalid("model has no joints".into()));
        }
        let lengths = [
            ("mass", self.link_mass.len()),
            ("com", self.link_com.len()),
            ("inertia", self.link_inertia.len()),
            ("limits", self.joint_limits.len()),
            ("v_max", self.v_max.len()),
            ("a_max", self.a_max.len()),
        ];
        for (name, len) in lengths {
            if len != n {
                return Err(RobotError::Invalid(format!(
                    "{name} has {len} entries but the chain has {n} joints"
                )));
            }
        }
        for (i, &m) in self.link_mass.iter().enumerate() {
            if !(m.is_finite() && m > 0.0) {
                return Err(RobotError::Invalid(format!(
                    "link {} mass must be finite and positive, got {m}",
                    i + 1
                )));
            }
        }
        for (i, inertia) in self.link_inertia.iter().enumerate() {
            let asym = (inertia - inertia.transpose()).norm();
            if asym > 1e-9 {
                return Err(RobotError::Invalid(format!(
                    "link {} inertia is not symmetric (|I - I^T| = {asym:.2e})",
                    i + 1
                )));
            }
            let eig = inertia.symmetric_eigenvalues();
            if eig.min() <= 0.0 {
                return Err(RobotError::Invalid(format!(
                    "link {} inertia is not positive definite",
                    i + 1
                )));
            }
        }
        for (i, lim) in self.joint_limits.iter().enumerate() {
            if !(lim.min.is_finite() && lim.max.is_finite() && lim.min < lim.max) {
                return Err(RobotError::Invalid(format!(
                    "joint {} limits must satisfy min < max",
                    i + 1
                )));
            }
        }
        for (i, &v) in self.v_max.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(RobotError::Invalid(format!(
                    "joint {} v_max must be positive",
                    i + 1
                )));
            }
        }
        for (i, &a) in self.a_max.iter().enumerate() {
            if !(a.is_finite() && a > 0.0) {
                return Err(RobotError::Invalid(format!(
                    "joint {} a_max must be positive",
                    i + 1
                )));
            }
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(RobotError::Invalid("gravity must be finite".into()));
        }
        if !(self.wrist_lump_mass.is_finite() && self.wrist_lump_mass >= 0.0) {
            return Err(RobotError::Invalid(
                "wrist_lump_mass must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Whether every joint of `theta` lies within its position limits.
    pub fn within_limits(&self, theta: &DVector<f64>) -> bool {
        theta.len() == self.n_joints()
            && theta
                .iter()
                .zip(&self.joint_limits)
                .all(|(&t, lim)| lim.contains(t))
    }
}

/// Joint-space state: position, velocity, acceleration (rad, rad/s, rad/s^2).
#[derive(Clone, Debug, PartialEq)]
pub struct JointState {
    /// Joint positions (rad).
    pub theta: DVector<f64>,
    /// Joint velocities (rad/s).
    pub theta_dot: DVector<f64>,
    /// Joint accelerations (rad/s^2).
    pub theta_ddot: DVector<f64>,
}

impl JointState {
    /// Build a state from three equal-length slices.
    pub fn new(theta: &[f64], theta_dot: &[f64], theta_ddot: &[f64]) -> Self {
        assert_eq!(theta.len(), theta_dot.len(), "state dimensions must agree");
        assert_eq!(theta.len(), theta_ddot.len(), "state dimensions must agree");
        JointState {
            theta: DVector::from_column_slice(theta),
            theta_dot: DVector::from_column_slice(theta_dot),
            theta_ddot: DVector::from_column_slice(theta_ddot),
        }
    }

    /// All-zero state of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        JointState {
            theta: DVector::zeros(n),
            theta_dot: DVector::zeros(n),
            theta_ddot: DVector::zeros(n),
        }
    }

    /// State dimension.
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    /// Whether the state is empty.
    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Per-joint mechanical loss parameters.
///
/// The loss torque of joint `j` is
/// `b_m[j] * theta_ddot[j] + c_m[j] * theta_dot[j] + f_c[j] * sign(theta_dot[j])`
/// with `sign(0) = 0`: a rotor/transmission inertia term, viscous drag, and
/// Coulomb friction.
#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
pub struct LossParams {
    /// Rotor plus transmission inertia (kg m^2).
    pub b_m: Vec<f64>,
    /// Viscous coefficients (N m s/rad).
    pub c_m: Vec<f64>,
    /// Coulomb friction magnitudes (N m).
    pub f_c: Vec<f64>,
}

impl LossParams {
    /// All-zero losses for an `n`-joint arm.
    pub fn zeros(n: usize) -> Self {
        LossParams {
            b_m: vec![0.0; n],
            c_m: vec![0.0; n],
            f_c: vec![0.0; n],
        }
    }

    /// Number of joints covered.
    pub fn len(&self) -> usize {
        self.b_m.len()
    }

    /// Whether the parameter set is empty.
    pub fn is_empty(&self) -> bool {
        self.b_m.is_empty()
    }

    /// Check finite values, matching lengths, and non-negative coefficients.
    pub fn validate(&self) -> Result<(), RobotError> {
        if self.c_m.len() != self.b_m.len() || self.f_c.len() != self.b_m.len() {
            return Err(RobotError::Invalid(
                "loss parameter vectors must have equal lengths".into(),
            ));
        }
        let all = self.b_m.iter().chain(&self.c_m).chain(&self.f_c);
        for &v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RobotError::Invalid(format!(
                    "loss parameters must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRobot {
    gravity: [f64; 3],
    #[serde(default)]
    wrist_lump_mass: f64,
    joint: Vec<RawJoint>,
}

#[derive(Deserialize)]
struct RawJoint {
    a: f64,
    alpha: f64,
    d: f64,
    #[serde(default)]
    theta_offset: f64,
    mass: f64,
    com: [f64; 3],
    inertia: [[f64; 3]; 3],
    limit: [f64; 2],
    v_max: f64,
    a_max: f64,
}

impl RawRobot {
    fn into_model(self) -> RobotModel {
        let deg = std::f64::consts::PI / 180.0;
        let n = self.joint.len();
        let mut model = RobotModel {
            dh: Vec::with_capacity(n),
            link_mass: Vec::with_capacity(n),
            link_com: Vec::with_capacity(n),
            link_inertia: Vec::with_capacity(n),
            joint_limits: Vec::with_capacity(n),
            v_max: Vec::with_capacity(n),
            a_max: Vec::with_capacity(n),
            gravity: Vector3::from_column_slice(&self.gravity),
            wrist_lump_mass: self.wrist_lump_mass,
        };
        for j in self.joint {
            model.dh.push(DhRow {
                a: j.a,
                alpha: j.alpha * deg,
                d: j.d,
                theta_offset: j.theta_offset * deg,
            });
            model.link_mass.push(j.mass);
            model.link_com.push(Vector3::from_column_slice(&j.com));
            model.link_inertia.push(Matrix3::from_fn(|r, c| j.inertia[r][c]));
            model.joint_limits.push(JointLimit {
                min: j.limit[0] * deg,
                max: j.limit[1] * deg,
            });
            model.v_max.push(j.v_max * deg);
            model.a_max.push(j.a_max * deg);
        }
        model
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bundled_model_loads_and_validates() {
        let model = RobotModel::bundled_6dof();
        assert_eq!(model.n_joints(), 6);
        assert_relative_eq!(model.gravity.z, -9.81);
        // File angles are degrees; alpha_1 = 90 deg.
        assert_relative_eq!(model.dh[0].alpha, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(model.joint_limits[1].max, 80.0_f64.to_radians());
        assert_relative_eq!(model.wrist_lump_mass, 3.7);
    }

    #[test]
    fn validation_rejects_negative_mass() {
        let mut model = RobotModel::bundled_6dof();
        model.link_mass[2] = -1.0;
        assert!(matches!(model.validate(), Err(RobotError::Invalid(_))));
    }

    #[test]
    fn validation_rejects_length_mismatch() {
        let mut model = RobotModel::bundled_6dof();
        model.v_max.pop();
        assert!(model.validate().is_err());
    }

    #[test]
    fn validation_rejects_indefinite_inertia() {
        let mut model = RobotModel::bundled_6dof();
        model.link_inertia[0][(0, 0)] = -0.5;
        assert!(model.validate().is_err());
    }

    #[test]
    fn planar_model_places_com_from_proximal_end() {
        let model = RobotModel::planar(&[(1.0, 2.0, 0.5, 0.1)]);
        // COM 0.5 m from the proximal end of a 1 m link sits at -0.5 in the
        // distal link frame.
        assert_relative_eq!(model.link_com[0].x, -0.5);
        assert_eq!(model.n_joints(), 1);
    }

    #[test]
    fn lumped_wrist_preserves_total_mass() {
        let model = RobotModel::bundled_6dof();
        let reduced = model.lumped_wrist().unwrap();
        assert_eq!(reduced.n_joints(), 3);
        let full: f64 = model.link_mass[..3].iter().sum::<f64>() + model.wrist_lump_mass;
        let lumped: f64 = reduced.link_mass.iter().sum();
        assert_relative_eq!(full, lumped, epsilon = 1e-12);
    }

    #[test]
    fn within_limits_checks_every_joint() {
        let model = RobotModel::bundled_6dof();
        let ok = DVector::zeros(6);
        assert!(model.within_limits(&ok));
        let mut bad = DVector::zeros(6);
        bad[1] = 2.0; // beyond the +-80 deg shoulder limit
        assert!(!model.within_limits(&bad));
    }

    #[test]
    fn loss_params_validate_rejects_negative() {
        let mut loss = LossParams::zeros(3);
        loss.f_c[1] = -0.1;
        assert!(loss.validate().is_err());
    }
}
