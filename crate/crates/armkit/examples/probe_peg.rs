//! Scratch probe (not part of the shipped examples).
use armkit::observer::FreeMotionModel;
use armkit::peg::{run_peg_episode, PegSetup, PegWorld};
use armkit::plant::PlantConfig;
use armkit::robot::{LossParams, RobotModel};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(424242);
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
    let mut setup = PegSetup::default();
    setup.record_trace = true;
    let mode = if std::env::args().nth(2).as_deref() == Some("zeroed") {
        armkit::peg::SensorMode::Zeroed
    } else {
        armkit::peg::SensorMode::Live
    };
    let run = armkit::peg::run_peg_episode_with_sensor(&world, &setup, seed, mode).unwrap();
    println!(
        "seed {seed} success {} steps {} final_depth {:.5} state {:?} offset {:?} decisions {:?}",
        run.success, run.steps, run.final_depth, run.final_state, run.offset, run.state_decisions
    );
    // Print the rows on which decisions are made (end of each period).
    for (i, row) in run.trace.iter().enumerate() {
        if i % 32 == 31 {
            println!(
                "{i:5} t {:6.3} state {:13} truth {:9} depth {:8.5} fz {:7.2} mx {:7.3} my {:7.3} mtx {:7.3} mty {:7.3} cmd ({:8.5},{:8.5},{:8.5}) tip ({:8.5},{:8.5},{:8.5})",
                row.t,
                format!("{:?}", row.state),
                format!("{:?}", row.truth),
                row.depth,
                row.f_z,
                row.m_x,
                row.m_y,
                row.m_true[0],
                row.m_true[1],
                row.cmd[0],
                row.cmd[1],
                row.cmd[2],
                row.tip[0],
                row.tip[1],
                row.tip[2],
            );
        }
    }
}
