//! Rigid-body dynamics of the serial chain.
//!
//! Provides forward kinematics, the geometric Jacobian, inverse dynamics
//! via a recursive Newton-Euler pass, joint-loss torques, forward dynamics
//! (mass-matrix factorization), and mechanical energy.  The rigid-body
//! torque and the loss torque are kept separate on purpose: the rigid-body
//! model is what an idealized arm would need, while [`loss_torque`] adds
//! the transmission losses, so the full actuation torque is
//! `inverse_dynamics(state) + loss_torque(params, state)`.
//!
//! All recursions run in world coordinates: link rotations, joint axes,
//! and COM positions are resolved into the base frame once per call, which
//! keeps every cross product in a single frame.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::robot::{JointState, LossParams, RobotModel};

/// Errors raised by the dynamics routines.
#[derive(Debug, Error)]
pub enum DynamicsError {
    /// An input vector did not match the number of joints.
    #[error("dimension mismatch: expected {expected} joints, got {got}")]
    DimensionMismatch {
        /// Number of joints in the model.
        expected: usize,
        /// Length of the offending input.
        got: usize,
    },
    /// The (augmented) mass matrix could not be factorized.
    #[error("mass matrix is numerically singular (condition estimate {condition:.3e})")]
    SingularMass {
        /// Ratio of largest to smallest singular value.
        condition: f64,
    },
    /// An input contained NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Rigid transform of a link frame relative to the base.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    /// Rotation matrix, base from frame.
    pub rotation: Matrix3<f64>,
    /// Frame origin in base coordinates (m).
    pub translation: Vector3<f64>,
}

impl Pose {
    /// Identity pose.
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Map a point from this frame into the base frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Whether the rotation part is orthonormal within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r * r.transpose() - Matrix3::identity()).norm() <= tol
            && (r.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// World-frame quantities of every link, computed once per configuration.
struct ChainFrames {
    /// Rotation of frame `i` (1-based; index 0 is the base).
    rot: Vec<Matrix3<f64>>,
    /// Origin of frame `i` in base coordinates.
    origin: Vec<Vector3<f64>>,
    /// Axis of joint `i` (the z axis of frame `i-1`), index 1..=n.
    axis: Vec<Vector3<f64>>,
    /// COM of link `i` in base coordinates, index 1..=n.
    com: Vec<Vector3<f64>>,
}

fn chain_frames(model: &RobotModel, theta: &DVector<f64>) -> ChainFrames {
    let n = model.n_joints();
    let mut rot = Vec::with_capacity(n + 1);
    let mut origin = Vec::with_capacity(n + 1);
    let mut axis = Vec::with_capacity(n + 1);
    let mut com = Vec::with_capacity(n + 1);
    rot.push(Matrix3::identity());
    origin.push(Vector3::zeros());
    axis.push(Vector3::z()); // placeholder for 1-based indexing
    com.push(Vector3::zeros());
    for i in 0..n {
        let row = &model.dh[i];
        let q = theta[i] + row.theta_offset;
        let (sq, cq) = q.sin_cos();
        let (sa, ca) = row.alpha.sin_cos();
        // Local DH transform RotZ(q) TransZ(d) TransX(a) RotX(alpha).
        let r_local = Matrix3::new(
            cq,
            -sq * ca,
            sq * sa,
            sq,
            cq * ca,
            -cq * sa,
            0.0,
            sa,
            ca,
        );
        let t_local = Vector3::new(row.a * cq, row.a * sq, row.d);
        let r_prev = rot[i];
        axis.push(r_prev * Vector3::z());
        rot.push(r_prev * r_local);
        origin.push(origin[i] + r_prev * t_local);
        com.push(origin[i + 1] + rot[i + 1] * model.link_com[i]);
    }
    ChainFrames {
        rot,
        origin,
        axis,
        com,
    }
}

fn check_dim(model: &RobotModel, v: &DVector<f64>) -> Result<(), DynamicsError> {
    if v.len() != model.n_joints() {
        return Err(DynamicsError::DimensionMismatch {
            expected: model.n_joints(),
            got: v.len(),
        });
    }
    Ok(())
}

fn check_finite(name: &'static str, v: &DVector<f64>) -> Result<(), DynamicsError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite(name))
    }
}

fn warn_if_outside_limits(model: &RobotModel, theta: &DVector<f64>) {
    if !model.within_limits(theta) {
        log::warn!("joint configuration outside position limits; continuing");
    }
}

/// Pose of the flange (last link frame) for the given joint positions.
pub fn forward_kinematics(
    model: &RobotModel,
    theta: &DVector<f64>,
) -> Result<Pose, DynamicsError> {
    check_dim(model, theta)?;
    check_finite("theta", theta)?;
    warn_if_outside_limits(model, theta);
    let frames = chain_frames(model, theta);
    let n = model.n_joints();
    Ok(Pose {
        rotation: frames.rot[n],
        translation: frames.origin[n],
    })
}

/// Poses of every link frame, base to flange (`n` entries).
pub fn link_poses(model: &RobotModel, theta: &DVector<f64>) -> Result<Vec<Pose>, DynamicsError> {
    check_dim(model, theta)?;
    check_finite("theta", theta)?;
    let frames = chain_frames(model, theta);
    Ok((1..=model.n_joints())
        .map(|i| Pose {
            rotation: frames.rot[i],
            translation: frames.origin[i],
        })
        .collect())
}

/// Geometric Jacobian of the flange, rows `[v; omega]`, size `6 x n`.
///
/// Column `i` holds `z_i x (p_ee - o_{i-1})` on top and `z_i` below, where
/// `z_i` is the axis of joint `i` and `o_{i-1}` a point on that axis.
pub fn geometric_jacobian(
    model: &RobotModel,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>, DynamicsError> {
    check_dim(model, theta)?;
    check_finite("theta", theta)?;
    let n = model.n_joints();
    let frames = chain_frames(model, theta);
    let p_ee = frames.origin[n];
    let mut jac = DMatrix::zeros(6, n);
    for i in 1..=n {
        let z = frames.axis[i];
        let lin = z.cross(&(p_ee - frames.origin[i - 1]));
        for r in 0..3 {
            jac[(r, i - 1)] = lin[r];
            jac[(r + 3, i - 1)] = z[r];
        }
    }
    Ok(jac)
}

/// Newton-Euler recursion with an explicit gravity vector.  Passing zero
/// gravity and zero velocity turns this into a mass-matrix probe.
fn rnea(
    model: &RobotModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    theta_ddot: &DVector<f64>,
    gravity: &Vector3<f64>,
) -> DVector<f64> {
    let n = model.n_joints();
    let frames = chain_frames(model, theta);

    // Forward pass: angular velocity/acceleration and linear acceleration
    // of each frame origin and COM.  Accelerating the base by -gravity is
    // equivalent to applying the gravity field to every link.
    let mut omega = vec![Vector3::zeros(); n + 1];
    let mut alpha = vec![Vector3::zeros(); n + 1];
    let mut acc_origin = vec![-gravity; n + 1];
    let mut acc_com = vec![Vector3::zeros(); n + 1];
    for i in 1..=n {
        let z = frames.axis[i];
        let qd = theta_dot[i - 1];
        let qdd = theta_ddot[i - 1];
        omega[i] = omega[i - 1] + z * qd;
        alpha[i] = alpha[i - 1] + z * qdd + omega[i - 1].cross(&(z * qd));
        // The origin of frame i-1 lies on the axis of joint i, so the rigid
        // body formula applies across the joint.
        let r = frames.origin[i] - frames.origin[i - 1];
        acc_origin[i] =
            acc_origin[i - 1] + alpha[i].cross(&r) + omega[i].cross(&omega[i].cross(&r));
        let s = frames.com[i] - frames.origin[i];
        acc_com[i] = acc_origin[i] + alpha[i].cross(&s) + omega[i].cross(&omega[i].cross(&s));
    }

    // Backward pass: force/moment balance from the flange inward.
    let mut tau = DVector::zeros(n);
    let mut f_child = Vector3::zeros();
    let mut m_child = Vector3::zeros();
    for i in (1..=n).rev() {
        let mass = model.link_mass[i - 1];
        let inertia_w = frames.rot[i] * model.link_inertia[i - 1] * frames.rot[i].transpose();
        let force = acc_com[i] * mass;
        let torque_com = inertia_w * alpha[i] + omega[i].cross(&(inertia_w * omega[i]));
        let f_joint = f_child + force;
        // Moment about the origin of frame i-1 (a point on the joint axis).
        let m_joint = torque_com
            + m_child
            + (frames.com[i] - frames.origin[i - 1]).cross(&force)
            + (frames.origin[i] - frames.origin[i - 1]).cross(&f_child);
        tau[i - 1] = m_joint.dot(&frames.axis[i]);
        f_child = f_joint;
        m_child = m_joint;
    }
    tau
}

/// Rigid-body joint torques for the given state (no transmission losses).
pub fn inverse_dynamics(
    model: &RobotModel,
    state: &JointState,
) -> Result<DVector<f64>, DynamicsError> {
    check_dim(model, &state.theta)?;
    check_dim(model, &state.theta_dot)?;
    check_dim(model, &state.theta_ddot)?;
    check_finite("theta", &state.theta)?;
    check_finite("theta_dot", &state.theta_dot)?;
    check_finite("theta_ddot", &state.theta_ddot)?;
    warn_if_outside_limits(model, &state.theta);
    Ok(rnea(
        model,
        &state.theta,
        &state.theta_dot,
        &state.theta_ddot,
        &model.gravity,
    ))
}

/// Sign with `sign(0) = 0`, as used by the Coulomb friction term.
pub fn sign_zero(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Transmission loss torque per joint:
/// `b_m * theta_ddot + c_m * theta_dot + f_c * sign(theta_dot)`.
pub fn loss_torque(params: &LossParams, state: &JointState) -> DVector<f64> {
    assert_eq!(
        params.len(),
        state.len(),
        "loss parameters must match the state dimension"
    );
    DVector::from_fn(state.len(), |j, _| {
        params.b_m[j] * state.theta_ddot[j]
            + params.c_m[j] * state.theta_dot[j]
            + params.f_c[j] * sign_zero(state.theta_dot[j])
    })
}

/// Joint-space mass matrix `M(theta)` (rigid-body part only).
///
/// Computed by probing the Newton-Euler recursion with unit accelerations
/// at zero velocity and zero gravity, so column `i` is exactly `M e_i`.
pub fn mass_matrix(model: &RobotModel, theta: &DVector<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    check_dim(model, theta)?;
    check_finite("theta", theta)?;
    let n = model.n_joints();
    let zero_g = Vector3::zeros();
    let zero_v = DVector::zeros(n);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let col = rnea(model, theta, &zero_v, &e, &zero_g);
        m.set_column(i, &col);
    }
    Ok(m)
}

/// Joint accelerations for applied torques `tau`.
///
/// When `loss` is given, the rotor inertia `b_m` is folded into the mass
/// matrix and the velocity-dependent loss terms into the bias, so the
/// result is consistent with `tau = inverse_dynamics + loss_torque`.
pub fn forward_dynamics(
    model: &RobotModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
    tau: &DVector<f64>,
    loss: Option<&LossParams>,
) -> Result<DVector<f64>, DynamicsError> {
    check_dim(model, theta)?;
    check_dim(model, theta_dot)?;
    check_dim(model, tau)?;
    check_finite("theta", theta)?;
    check_finite("theta_dot", theta_dot)?;
    check_finite("tau", tau)?;
    let n = model.n_joints();
    let mut m = mass_matrix(model, theta)?;
    // Bias: Coriolis, centrifugal and gravity torques at zero acceleration.
    let zero_a = DVector::zeros(n);
    let bias = rnea(model, theta, theta_dot, &zero_a, &model.gravity);
    let mut rhs = tau - bias;
    if let Some(p) = loss {
        for j in 0..n {
            m[(j, j)] += p.b_m[j];
            rhs[j] -= p.c_m[j] * theta_dot[j] + p.f_c[j] * sign_zero(theta_dot[j]);
        }
    }
    match m.clone().lu().solve(&rhs) {
        Some(acc) if acc.iter().all(|a| a.is_finite()) => Ok(acc),
        _ => {
            let svd = m.svd(false, false);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            Err(DynamicsError::SingularMass {
                condition: if smin > 0.0 { smax / smin } else { f64::INFINITY },
            })
        }
    }
}

/// Kinetic and potential energy `(T, V)` of the rigid-body model (J).
///
/// The potential is referenced to the base origin, so only differences and
/// time derivatives of `V` are meaningful.
pub fn mechanical_energy(
    model: &RobotModel,
    theta: &DVector<f64>,
    theta_dot: &DVector<f64>,
) -> Result<(f64, f64), DynamicsError> {
    check_dim(model, theta)?;
    check_dim(model, theta_dot)?;
    check_finite("theta", theta)?;
    check_finite("theta_dot", theta_dot)?;
    let n = model.n_joints();
    let frames = chain_frames(model, theta);
    let mut omega = Vector3::zeros();
    let mut v_origin = Vector3::zeros();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 1..=n {
        omega += frames.axis[i] * theta_dot[i - 1];
        let r = frames.origin[i] - frames.origin[i - 1];
        v_origin += omega.cross(&r);
        let s = frames.com[i] - frames.origin[i];
        let v_com = v_origin + omega.cross(&s);
        let inertia_w = frames.rot[i] * model.link_inertia[i - 1] * frames.rot[i].transpose();
        let mass = model.link_mass[i - 1];
        kinetic += 0.5 * (mass * v_com.norm_squared() + omega.dot(&(inertia_w * omega)));
        potential -= mass * model.gravity.dot(&frames.com[i]);
    }
    Ok((kinetic, potential))
}
