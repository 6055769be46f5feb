//! Scratch probe (not part of the shipped examples).
use armkit::dynamics::{forward_kinematics, geometric_jacobian, Pose};
use armkit::ik::{ik_solve, IkOptions};
use armkit::robot::RobotModel;
use nalgebra::{DVector, Matrix3, Vector3};

fn main() {
    let model = RobotModel::bundled_6dof();
    for seed in [
        DVector::from_column_slice(&[0.0, -0.5, 1.0, 0.0, 1.0, 0.0]),
        DVector::from_column_slice(&[0.0, -0.7, 1.3, 0.0, 0.9, 0.0]),
        DVector::from_column_slice(&[0.0, 0.5, -1.0, 0.0, -1.0, 0.0]),
        DVector::from_column_slice(&[0.0, 0.3, 0.6, 0.0, 0.6, 0.0]),
    ] {
        let pose = forward_kinematics(&model, &seed).unwrap();
        println!(
            "seed {:?} -> p {:?} tool_z {:?}",
            seed.as_slice(),
            pose.translation.as_slice(),
            (pose.rotation * Vector3::new(0.0, 0.0, 1.0)).as_slice()
        );
    }
    // Target: tool z pointing straight down over a bench point.
    let rot = Matrix3::from_columns(&[
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, -1.0, 0.0),
        Vector3::new(0.0, 0.0, -1.0),
    ]);
    for (x, z) in [(0.35, 0.20), (0.40, 0.25), (0.45, 0.15), (0.30, 0.30)] {
        let target = Pose {
            rotation: rot,
            translation: Vector3::new(x, 0.0, z),
        };
        for seed0 in [
            DVector::from_column_slice(&[0.0, -0.5, 1.0, 0.0, 1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 0.4, 0.9, 0.0, 1.2, 0.0]),
            DVector::from_column_slice(&[0.0, 0.2, 0.7, 0.0, 0.8, 0.0]),
        ] {
            match ik_solve(&model, &seed0, &target, &IkOptions::default()) {
                Ok(theta) => {
                    let jac = geometric_jacobian(&model, &theta).unwrap();
                    let svd = jac.svd(false, false);
                    let cond = svd.singular_values[0]
                        / svd.singular_values[svd.singular_values.len() - 1];
                    let within = model.within_limits(&theta);
                    println!(
                        "target ({x},{z}) seed {:?}: theta {:?} cond {cond:.1} limits_ok {within}",
                        seed0.as_slice(),
                        theta.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
                    );
                    break;
                }
                Err(e) => println!("target ({x},{z}) seed {:?}: IK failed: {e}", seed0.as_slice()),
            }
        }
    }
}
