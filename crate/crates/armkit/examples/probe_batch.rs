//! Scratch probe: peg batch success rate over many seeds.

use armkit::observer::FreeMotionModel;
use armkit::peg::{run_peg_batch, PegSetup, PegWorld};
use armkit::plant::PlantConfig;
use armkit::robot::{LossParams, RobotModel};
use std::time::Instant;

fn main() {
    let model = RobotModel::bundled_6dof();
    let loss = LossParams {
        b_m: vec![0.02; 6],
        c_m: vec![0.8, 0.7, 0.6, 0.3, 0.2, 0.1],
        f_c: vec![0.5, 0.5, 0.4, 0.2, 0.15, 0.1],
    };
    let mut cfg = PlantConfig::new(model, loss);
    cfg.torque_noise_std = vec![0.03; 6];
    cfg.kp = 3600.0;
    cfg.kd = 120.0;
    let free = FreeMotionModel::physics_with_loss(&cfg.model, &cfg.true_loss).unwrap();
    let world = PegWorld {
        plant_cfg: &cfg,
        free: &free,
    };
    let setup = PegSetup::default();

    let base: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let t0 = Instant::now();
    let batch = run_peg_batch(&world, &setup, base, 100).expect("batch");
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "success_rate {:.3} mean_steps {:.0} wall {:.1}s",
        batch.success_rate, batch.mean_steps_success, dt
    );
    let max_tilt = batch
        .episodes
        .iter()
        .map(|e| e.tilt.norm())
        .fold(0.0f64, f64::max);
    let mean_tilt = batch.episodes.iter().map(|e| e.tilt.norm()).sum::<f64>()
        / batch.episodes.len() as f64;
    println!(
        "tilt deg: mean {:.2} max {:.2}",
        mean_tilt.to_degrees(),
        max_tilt.to_degrees()
    );
    for (i, e) in batch.episodes.iter().enumerate() {
        if !e.success {
            println!(
                "  seed {} FAIL steps {} depth {:.5} state {:?} offset ({:.5},{:.5}) decisions {:?}",
                base + i as u64,
                e.steps,
                e.final_depth,
                e.final_state,
                e.offset[0],
                e.offset[1],
                e.state_decisions
            );
        }
    }

    // Corruption control: with zeroed force channels the episode must fail.
    let z = armkit::peg::run_peg_episode_with_sensor(
        &world,
        &setup,
        base,
        armkit::peg::SensorMode::Zeroed,
    )
    .expect("zeroed");
    println!(
        "zeroed-sensor episode: success {} depth {:.5} state {:?}",
        z.success, z.final_depth, z.final_state
    );
}
