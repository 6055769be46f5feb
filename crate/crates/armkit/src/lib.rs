//! armkit: dynamic modeling, virtual force sensing, and contact-task
//! control for serial manipulators, on a synthetic plant.
//!
//! The crate covers a complete desk-scale pipeline:
//!
//! * [`robot`], [`dynamics`] — chain description, Newton-Euler inverse
//!   dynamics, forward dynamics, Jacobians, energy.
//! * [`plant`], [`trajlog`] — a simulated arm with configurable
//!   unmodeled effects, logged in a stable CSV format.
//! * [`trajgen`], [`quintic`], [`collision`] — excitation trajectory
//!   generation over a digitized joint grid with box-collision filtering.
//! * [`features`], [`gbt`], [`hybrid`], [`metrics`], [`gridsearch`] —
//!   windowed feature extraction, gradient-boosted tree regression,
//!   physics/data/hybrid model compositions, and hyperparameter search.
//! * [`observer`], [`wrench`] — external torque observation with scalar
//!   Kalman filtering and virtual force/moment sensing.
//! * [`impedance`], [`peg`], [`wipe`] — torque-triggered compliance and
//!   the two contact tasks built on it.
//! * [`planner`] — reward-driven trajectory speed optimization.
//! * [`harness`] — the pipeline driver behind the `armkit` binary.
//!
//! Each major capability has a runnable demonstration under `examples/`;
//! start with `cargo run --release --example dynamics_basics`.

pub mod collision;
pub mod dynamics;
pub mod features;
pub mod gbt;
pub mod gridsearch;
pub mod hybrid;
pub mod ik;
pub mod impedance;
pub mod metrics;
pub mod observer;
pub mod plant;
pub mod quintic;
pub mod robot;
pub mod peg;
pub mod scene;
pub mod trajectory;
pub mod trajgen;
pub mod trajlog;
pub mod wrench;
