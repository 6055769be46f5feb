//! Scratch probe (not part of the shipped examples): measure the
//! Cartesian stiffness of the tracking loop at the bench pose by
//! applying constant tip forces and reading the steady deflection.

use armkit::dynamics::{forward_kinematics, Pose};
use armkit::ik::{ik_solve, IkOptions};
use armkit::plant::{Plant, PlantConfig};
use armkit::robot::{JointState, LossParams, RobotModel};
use nalgebra::{DVector, Matrix3, Vector3, Vector6};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = RobotModel::bundled_6dof();
    let loss = LossParams {
        b_m: vec![0.02; 6],
        c_m: vec![0.8, 0.7, 0.6, 0.3, 0.2, 0.1],
        f_c: vec![0.5, 0.5, 0.4, 0.2, 0.15, 0.1],
    };
    let mut cfg = PlantConfig::new(model.clone(), loss);
    cfg.torque_noise_std = vec![0.03; 6];
    let n = model.n_joints();
    for &x in &[0.30f64, 0.35, 0.40, 0.45, 0.50] {
        for &z in &[0.15f64, 0.20, 0.25, 0.30] {
            let target = Pose {
                rotation: Matrix3::from_columns(&[
                    Vector3::new(1.0, 0.0, 0.0),
                    Vector3::new(0.0, -1.0, 0.0),
                    Vector3::new(0.0, 0.0, -1.0),
                ]),
                translation: Vector3::new(x, 0.0, z),
            };
            let seed_v = DVector::from_vec(vec![0.0, -0.5, 1.0, 0.0, 1.0, 0.0]);
            let theta0 = match ik_solve(&model, &seed_v, &target, &IkOptions::default()) {
                Ok(t) => t,
                Err(_) => {
                    println!("x {x:.2} z {z:.2}: IK failed");
                    continue;
                }
            };
            let pose0 = forward_kinematics(&model, &theta0)?;
            let mut report = String::new();
            for (name, f_w) in [
                ("x", Vector3::new(5.0, 0.0, 0.0)),
                ("y", Vector3::new(0.0, 5.0, 0.0)),
                ("z", Vector3::new(0.0, 0.0, 5.0)),
            ] {
                let mut plant = Plant::new(cfg.clone(), theta0.clone(), 7)?;
                let reference = JointState {
                    theta: theta0.clone(),
                    theta_dot: DVector::zeros(n),
                    theta_ddot: DVector::zeros(n),
                };
                let mut last = pose0.translation;
                for _ in 0..400 {
                    let th = plant.theta().clone();
                    let pose = forward_kinematics(&model, &th)?;
                    last = pose.translation;
                    let f_e = pose.rotation.transpose() * f_w;
                    let w_ee = Vector6::new(f_e[0], f_e[1], f_e[2], 0.0, 0.0, 0.0);
                    plant.step_tracking(&reference, Some(&w_ee))?;
                }
                let d = last - pose0.translation;
                let along = d.dot(&f_w.normalize());
                let k = 5.0 / along.abs().max(1e-12);
                if name == "z" {
                    let lat = (d[0] * d[0] + d[1] * d[1]).sqrt();
                    report += &format!(" kz {k:5.0} couple {:4.2}", lat / along.abs().max(1e-12));
                } else {
                    report += &format!(" k{name} {k:5.0}");
                }
            }
            println!("x {x:.2} z {z:.2}:{report}");
        }
    }
    Ok(())
}
