//! Scratch probe (not part of the shipped examples).
use armkit::dynamics::{forward_kinematics, Pose};
use armkit::ik::{ik_solve, IkOptions};
use armkit::plant::PlantConfig;
use armkit::robot::{JointState, LossParams, RobotModel};
use nalgebra::{DVector, Matrix3, Vector3};

fn main() {
    let model = RobotModel::bundled_6dof();
    let tool_len = 0.048;
    let rot = Matrix3::from_columns(&[
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
    ]);
    let target = Pose {
        rotation: rot,
        translation: Vector3::new(0.40, 0.0, 0.25),
    };
    let seed = DVector::from_column_slice(&[0.0, -0.5, 1.0, 0.0, 1.0, 0.0]);
    let theta0 = ik_solve(&model, &seed, &target, &IkOptions::default()).unwrap();
    let pose0 = forward_kinematics(&model, &theta0).unwrap();
    let tool_z0 = pose0.rotation * Vector3::new(0.0, 0.0, 1.0);
    let tip0 = pose0.translation + tool_z0 * tool_len;
    let z_h = -tool_z0;
    let x_h = {
        let x = Vector3::new(1.0, 0.0, 0.0);
        (x - z_h * x.dot(&z_h)).normalize()
    };
    let y_h = z_h.cross(&x_h);
    let r_wh = Matrix3::from_columns(&[x_h, y_h, z_h]);
    let origin_w = tip0 - r_wh * Vector3::new(0.0, 0.0, 0.005);

    // Command a few pure lateral tip targets and check the IK round trip.
    let mut theta_ref = theta0.clone();
    for cmd in [
        Vector3::new(0.0, 0.0, 0.005),
        Vector3::new(0.001, 0.0, 0.005),
        Vector3::new(0.0, 0.001, 0.004),
        Vector3::new(-0.0016, 0.0008, 0.001),
        Vector3::new(-0.0016, 0.0008, -0.002),
    ] {
        let axis_cmd_h = r_wh.transpose() * (-(pose0.rotation * Vector3::new(0.0, 0.0, 1.0)));
        let flange_h = cmd + axis_cmd_h * tool_len;
        let target = Pose {
            rotation: pose0.rotation,
            translation: origin_w + r_wh * flange_h,
        };
        theta_ref = ik_solve(&model, &theta_ref, &target, &IkOptions::default()).unwrap();
        let pose = forward_kinematics(&model, &theta_ref).unwrap();
        let tool_z = pose.rotation * Vector3::new(0.0, 0.0, 1.0);
        let tip_w = pose.translation + tool_z * tool_len;
        let tip_h = r_wh.transpose() * (tip_w - origin_w);
        println!(
            "cmd {:?} -> ik tip {:?} err {:.2e}",
            cmd.as_slice(),
            tip_h.as_slice(),
            (tip_h - cmd).norm()
        );
    }

    // Now hold the nominal reference on the noisy plant and watch drift.
    let loss = LossParams {
        b_m: vec![0.02; 6],
        c_m: vec![0.8, 0.7, 0.6, 0.3, 0.2, 0.1],
        f_c: vec![0.5, 0.5, 0.4, 0.2, 0.15, 0.1],
    };
    let mut cfg = PlantConfig::new(model.clone(), loss);
    cfg.torque_noise_std = vec![0.03; 6];
    let mut plant = armkit::plant::Plant::new(cfg, theta0.clone(), 7).unwrap();
    let reference = JointState {
        theta: theta0.clone(),
        theta_dot: DVector::zeros(6),
        theta_ddot: DVector::zeros(6),
    };
    for k in 0..400 {
        plant.step_tracking(&reference, None).unwrap();
        if k % 50 == 49 {
            let pose = forward_kinematics(&model, plant.theta()).unwrap();
            let tool_z = pose.rotation * Vector3::new(0.0, 0.0, 1.0);
            let tip_w = pose.translation + tool_z * tool_len;
            let tip_h = r_wh.transpose() * (tip_w - origin_w);
            println!(
                "hold k {k:3} tip_h {:?} (want [0, 0, 0.005])",
                tip_h.as_slice()
            );
        }
    }
}
