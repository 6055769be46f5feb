//! Damped least-squares inverse kinematics.
//!
//! The contact tasks command small end-effector pose increments at every
//! control step; this solver turns those into joint references.  It is a
//! plain Newton iteration on the geometric Jacobian with Levenberg-style
//! damping, warm-started from the previous solution, which is exactly
//! the regime (tiny pose changes, good seed) where it converges in a
//! handful of iterations.

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3, Vector6};
use thiserror::Error;

use crate::dynamics::{forward_kinematics, geometric_jacobian, DynamicsError, Pose};
use crate::robot::RobotModel;

/// Errors raised by the solver.
#[derive(Debug, Error)]
pub enum IkError {
    /// Kinematics evaluation failed.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    /// The iteration did not reach the tolerance within the budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        /// Iterations spent.
        iterations: usize,
        /// Final pose-error norm.
        residual: f64,
    },
    /// Invalid options.
    #[error("invalid option: {0}")]
    InvalidOption(String),
}

/// Solver options.
#[derive(Clone, Copy, Debug)]
pub struct IkOptions {
    /// Convergence tolerance on the pose-error norm (meters and radians
    /// share the scale at desk dimensions).
    pub tolerance: f64,
    /// Iteration budget.
    pub max_iterations: usize,
    /// Levenberg damping added to `J J^T`.
    pub damping: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            tolerance: 1e-10,
            max_iterations: 100,
            damping: 1e-6,
        }
    }
}

/// Rotation difference `log(b a^T)` as a rotation vector.
fn rotation_error(target: &Matrix3<f64>, current: &Matrix3<f64>) -> Vector3<f64> {
    let rel = target * current.transpose();
    Rotation3::from_matrix(&rel).scaled_axis()
}

/// Pose error `[translation; rotation vector]` from `current` to
/// `target`.
pub fn pose_error(target: &Pose, current: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dr = rotation_error(&target.rotation, &current.rotation);
    Vector6::new(dp[0], dp[1], dp[2], dr[0], dr[1], dr[2])
}

/// Solve for joint angles reaching `target`, warm-started at `seed`.
pub fn ik_solve(
    model: &RobotModel,
    seed: &DVector<f64>,
    target: &Pose,
    opts: &IkOptions,
) -> Result<DVector<f64>, IkError> {
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 || !(opts.damping >= 0.0) {
        return Err(IkError::InvalidOption(
            "tolerance > 0, max_iterations >= 1, damping >= 0 required".into(),
        ));
    }
    let mut theta = seed.clone();
    let mut residual = f64::INFINITY;
    for iteration in 0..opts.max_iterations {
        let pose = forward_kinematics(model, &theta)?;
        let err = pose_error(target, &pose);
        residual = err.norm();
        if residual < opts.tolerance {
            return Ok(theta);
        }
        let jac = geometric_jacobian(model, &theta)?;
        // Damped least squares: dq = J^T (J J^T + damping I)^-1 err.
        let jjt = &jac * jac.transpose() + DMatrix::identity(6, 6) * opts.damping;
        let rhs = DVector::from_column_slice(err.as_slice());
        let sol = jjt.lu().solve(&rhs).ok_or(IkError::NoConvergence {
            iterations: iteration,
            residual,
        })?;
        let dq = jac.transpose() * sol;
        // Trust region keeps the linearization honest far from the goal.
        let step = dq.norm();
        let max_step = 0.5;
        theta += if step > max_step { dq * (max_step / step) } else { dq };
    }
    Err(IkError::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn round_trips_forward_kinematics_from_a_nearby_seed() {
        let model = RobotModel::bundled_6dof();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..50 {
            let theta = DVector::from_fn(6, |_, _| (rng.random::<f64>() - 0.5) * 1.6);
            let target = forward_kinematics(&model, &theta).unwrap();
            let seed = DVector::from_fn(6, |j, _| theta[j] + (rng.random::<f64>() - 0.5) * 0.2);
            let solved = ik_solve(&model, &seed, &target, &IkOptions::default()).unwrap();
            let reached = forward_kinematics(&model, &solved).unwrap();
            assert!(pose_error(&target, &reached).norm() < 1e-9);
        }
    }

    #[test]
    fn tracks_a_small_pose_increment_in_few_iterations() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.3, -0.6, 0.9, 0.2, 0.7, -0.1]);
        let mut target = forward_kinematics(&model, &theta).unwrap();
        target.translation += Vector3::new(0.0005, -0.0003, -0.001);
        let opts = IkOptions {
            max_iterations: 5,
            ..IkOptions::default()
        };
        let solved = ik_solve(&model, &theta, &target, &opts).unwrap();
        let reached = forward_kinematics(&model, &solved).unwrap();
        assert!(pose_error(&target, &reached).norm() < 1e-10);
    }

    #[test]
    fn pose_error_is_zero_at_identity_and_linear_for_small_rotations() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.1, -0.4, 0.8, 0.3, 0.5, 0.2]);
        let pose = forward_kinematics(&model, &theta).unwrap();
        assert_eq!(pose_error(&pose, &pose).norm(), 0.0);
        let mut rotated = pose.clone();
        let small = Rotation3::from_scaled_axis(Vector3::new(0.001, -0.002, 0.0015));
        rotated.rotation = small.matrix() * rotated.rotation;
        let err = pose_error(&rotated, &pose);
        let dr = Vector3::new(err[3], err[4], err[5]);
        assert!((dr - Vector3::new(0.001, -0.002, 0.0015)).norm() < 1e-9);
    }

    #[test]
    fn unreachable_target_reports_no_convergence() {
        let model = RobotModel::bundled_6dof();
        let theta = DVector::from_column_slice(&[0.0, -0.3, 0.5, 0.0, 0.4, 0.0]);
        let mut target = forward_kinematics(&model, &theta).unwrap();
        target.translation = Vector3::new(5.0, 0.0, 0.0); // far outside reach
        let err = ik_solve(&model, &theta, &target, &IkOptions::default());
        assert!(matches!(err, Err(IkError::NoConvergence { .. })));
    }
}
