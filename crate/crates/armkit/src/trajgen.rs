//! Excitation trajectory generation over a digitized joint grid.
//!
//! The generator digitizes each joint range into a small number of values,
//! takes the cartesian product, filters configurations by box collision
//! checks, and then connects every ordered pair of surviving
//! configurations at every requested speed.  Because each configuration
//! has as many outgoing as incoming pairs, the ordered pairs form an
//! Eulerian circuit: the whole set can be driven as one continuous
//! trajectory in which every leg starts where the previous one ended.
//!
//! All legs are rest-to-rest quintics (see [`crate::quintic`]), so the
//! chained trajectory is smooth in position and velocity and only ever
//! pauses momentarily at the shared waypoints.

use nalgebra::DVector;
use thiserror::Error;

use crate::collision::{collision_free, LinkBox, Obb};
use crate::quintic::{QuinticError, QuinticSegment};
use crate::robot::RobotModel;
use crate::trajectory::SampledTrajectory;

/// Errors raised during trajectory generation.
#[derive(Debug, Error)]
pub enum TrajGenError {
    /// The digitized grid would exceed the configuration cap.
    #[error("grid of {got} configurations exceeds the cap of {cap}")]
    GridTooLarge {
        /// Number of configurations the grid would produce.
        got: u128,
        /// Configured cap.
        cap: usize,
    },
    /// Fewer than two collision-free configurations survive filtering.
    #[error("only {0} collision-free configurations; need at least 2")]
    TooFewConfigurations(usize),
    /// Invalid generation parameters.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A leg could not be time-parameterized.
    #[error("leg construction failed: {0}")]
    Leg(#[from] QuinticError),
    /// Kinematics failed while collision checking.
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// How configuration pairs are enumerated into legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairMode {
    /// Every ordered pair `(i, j)`, `i != j`: `M (M - 1)` legs per speed.
    /// The legs chain into a single continuous trajectory.
    Ordered,
    /// Every unordered pair once, traversed from the lower to the higher
    /// index: `M (M - 1) / 2` legs per speed.  For more than three
    /// configurations these legs cannot all chain (every configuration
    /// would need an even number of visits), so they are emitted as
    /// independent legs.
    Unordered,
}

/// Digitize each joint's limit range into `segments[j] + 1` evenly spaced
/// values (inclusive of both ends) and return the cartesian product.
///
/// Fails when the product would exceed `cap`.
pub fn digitize(
    model: &RobotModel,
    segments: &[usize],
    cap: usize,
) -> Result<Vec<DVector<f64>>, TrajGenError> {
    let n = model.n_joints();
    if segments.len() != n {
        return Err(TrajGenError::InvalidParameter(format!(
            "segments has {} entries for {} joints",
            segments.len(),
            n
        )));
    }
    let mut total: u128 = 1;
    for &s in segments {
        total = total.saturating_mul(s as u128 + 1);
    }
    if total > cap as u128 {
        return Err(TrajGenError::GridTooLarge { got: total, cap });
    }
    let mut per_joint: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let lim = &model.joint_limits[j];
        let count = segments[j] + 1;
        let values = (0..count)
            .map(|k| {
                if count == 1 {
                    0.5 * (lim.min + lim.max)
                } else {
                    lim.min + lim.span() * k as f64 / (count - 1) as f64
                }
            })
            .collect();
        per_joint.push(values);
    }
    let mut configs = Vec::with_capacity(total as usize);
    let mut index = vec![0usize; n];
    loop {
        configs.push(DVector::from_fn(n, |j, _| per_joint[j][index[j]]));
        // Odometer increment, last joint fastest.
        let mut j = n;
        loop {
            if j == 0 {
                return Ok(configs);
            }
            j -= 1;
            index[j] += 1;
            if index[j] <= segments[j] {
                break;
            }
            index[j] = 0;
        }
    }
}

/// Keep only configurations whose arm pose is collision free.
pub fn filter_collision_free(
    model: &RobotModel,
    configs: &[DVector<f64>],
    link_boxes: &[LinkBox],
    obstacles: &[Obb],
) -> Result<Vec<DVector<f64>>, TrajGenError> {
    let mut kept = Vec::new();
    for c in configs {
        if collision_free(model, c, link_boxes, obstacles)? {
            kept.push(c.clone());
        }
    }
    Ok(kept)
}

/// One leg of the excitation set: move from configuration `from` to
/// configuration `to` at the given speed factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    /// Index of the start configuration.
    pub from: usize,
    /// Index of the end configuration.
    pub to: usize,
    /// Speed factor in `(0, 1]`; 1 runs at the joint limits.
    pub speed: f64,
}

/// Enumerate legs for the given pair mode, one full set per speed.
///
/// In [`PairMode::Ordered`] the pairs of each speed block are arranged as
/// an Eulerian circuit (lexicographically smallest one), so consecutive
/// legs always share their endpoint configuration — including across
/// speed blocks, because a circuit ends where it started.
pub fn enumerate_legs(
    n_configs: usize,
    speeds: &[f64],
    mode: PairMode,
) -> Result<Vec<Leg>, TrajGenError> {
    if n_configs < 2 {
        return Err(TrajGenError::TooFewConfigurations(n_configs));
    }
    if speeds.is_empty() {
        return Err(TrajGenError::InvalidParameter("no speeds given".into()));
    }
    for &s in speeds {
        if !(s.is_finite() && s > 0.0 && s <= 1.0) {
            return Err(TrajGenError::InvalidParameter(format!(
                "speed factors must lie in (0, 1], got {s}"
            )));
        }
    }
    let pairs: Vec<(usize, usize)> = match mode {
        PairMode::Ordered => eulerian_circuit(n_configs),
        PairMode::Unordered => {
            let mut p = Vec::new();
            for i in 0..n_configs {
                for j in (i + 1)..n_configs {
                    p.push((i, j));
                }
            }
            p
        }
    };
    let mut legs = Vec::with_capacity(pairs.len() * speeds.len());
    for &speed in speeds {
        for &(from, to) in &pairs {
            legs.push(Leg { from, to, speed });
        }
    }
    Ok(legs)
}

/// Lexicographically smallest Eulerian circuit of the complete digraph on
/// `n` vertices (every ordered pair used exactly once), starting at 0.
///
/// Hierholzer's algorithm: follow the smallest unused edge; when stuck at
/// the start, splice in sub-circuits from the earliest vertex that still
/// has unused edges.
fn eulerian_circuit(n: usize) -> Vec<(usize, usize)> {
    // next_to[v] tracks which targets v has already used, in ascending
    // order with the diagonal skipped.
    let mut used = vec![vec![false; n]; n];
    let mut circuit: Vec<usize> = vec![0];
    let mut pos = 0;
    while pos < circuit.len() {
        let v = circuit[pos];
        // Find the smallest unused edge out of v.
        let next = (0..n).find(|&w| w != v && !used[v][w]);
        match next {
            Some(w) => {
                // Walk a closed tour from v and splice it in after pos.
                let mut tour = Vec::new();
                let mut cur = v;
                let mut target = Some(w);
                while let Some(t) = target {
                    used[cur][t] = true;
                    tour.push(t);
                    cur = t;
                    if cur == v {
                        break;
                    }
                    target = (0..n).find(|&x| x != cur && !used[cur][x]);
                }
                let tail: Vec<usize> = circuit.drain(pos + 1..).collect();
                circuit.extend(tour);
                circuit.extend(tail);
            }
            None => pos += 1,
        }
    }
    circuit.windows(2).map(|w| (w[0], w[1])).collect()
}

/// A chained excitation trajectory plus the metadata of every leg.
#[derive(Clone, Debug)]
pub struct TrajectorySet {
    /// The sampled, chained trajectory.
    pub trajectory: SampledTrajectory,
    /// Legs in execution order.
    pub legs: Vec<Leg>,
    /// Sample index at which each leg starts; legs share boundary samples.
    pub leg_starts: Vec<usize>,
    /// The configurations referenced by [`Leg::from`] / [`Leg::to`].
    pub configs: Vec<DVector<f64>>,
}

/// Time-parameterize one leg.  The nominal duration is the smallest one
/// that respects the velocity and acceleration limits; the speed factor
/// divides it, so halving the speed doubles the duration.  Factors above
/// 1 are clipped back to the limit-respecting minimum.
pub fn time_parameterize(
    model: &RobotModel,
    from: &DVector<f64>,
    to: &DVector<f64>,
    speed: f64,
) -> Result<QuinticSegment, TrajGenError> {
    if !(speed.is_finite() && speed > 0.0) {
        return Err(TrajGenError::InvalidParameter(format!(
            "speed factor must be positive, got {speed}"
        )));
    }
    let t_limit = QuinticSegment::min_duration(from, to, &model.v_max, &model.a_max);
    let duration = (t_limit / speed).max(t_limit);
    QuinticSegment::new(from.clone(), to.clone(), duration).map_err(TrajGenError::from)
}

/// Build the full excitation set: enumerate legs over `configs`, stretch
/// each to its speed, and sample everything into one chained trajectory.
pub fn build_trajectory_set(
    model: &RobotModel,
    configs: &[DVector<f64>],
    speeds: &[f64],
    mode: PairMode,
    dt: f64,
) -> Result<TrajectorySet, TrajGenError> {
    if dt <= 0.0 {
        return Err(TrajGenError::InvalidParameter(format!(
            "sample period must be positive, got {dt}"
        )));
    }
    let legs = enumerate_legs(configs.len(), speeds, mode)?;
    let mut trajectory = SampledTrajectory::new(dt);
    let mut leg_starts = Vec::with_capacity(legs.len());
    for leg in &legs {
        let seg = time_parameterize(model, &configs[leg.from], &configs[leg.to], leg.speed)?;
        leg_starts.push(trajectory.len().saturating_sub(1));
        trajectory.append_segment(&seg);
    }
    Ok(TrajectorySet {
        trajectory,
        legs,
        leg_starts,
        configs: configs.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn digitize_counts_match_product_formula() {
        let model = RobotModel::bundled_6dof();
        let configs = digitize(&model, &[1, 1, 1, 1, 1, 1], 1_000_000).unwrap();
        assert_eq!(configs.len(), 64);
        let configs = digitize(&model, &[2, 1, 1, 0, 0, 0], 1_000_000).unwrap();
        assert_eq!(configs.len(), 3 * 2 * 2);
        // A zero-segment joint pins its midpoint.
        assert_relative_eq!(configs[0][3], 0.0);
    }

    #[test]
    fn digitize_respects_cap() {
        let model = RobotModel::bundled_6dof();
        let err = digitize(&model, &[9, 9, 9, 9, 9, 9], 1000).unwrap_err();
        assert!(matches!(err, TrajGenError::GridTooLarge { got: 1_000_000, .. }));
    }

    #[test]
    fn digitized_values_span_the_limits() {
        let model = RobotModel::bundled_6dof();
        let configs = digitize(&model, &[1, 1, 1, 1, 1, 1], 1_000_000).unwrap();
        for c in &configs {
            assert!(model.within_limits(c));
        }
        assert_relative_eq!(configs[0][0], model.joint_limits[0].min);
        assert_relative_eq!(configs.last().unwrap()[0], model.joint_limits[0].max);
    }

    #[test]
    fn ordered_legs_count_is_m_times_m_minus_1_per_speed() {
        let legs = enumerate_legs(4, &[0.5, 1.0], PairMode::Ordered).unwrap();
        assert_eq!(legs.len(), 4 * 3 * 2);
        let legs = enumerate_legs(4, &[0.5], PairMode::Unordered).unwrap();
        assert_eq!(legs.len(), 6);
    }

    #[test]
    fn eulerian_circuit_uses_every_ordered_pair_once_and_chains() {
        for n in 2..=6 {
            let pairs = eulerian_circuit(n);
            assert_eq!(pairs.len(), n * (n - 1));
            let mut seen = std::collections::BTreeSet::new();
            for &(a, b) in &pairs {
                assert_ne!(a, b);
                assert!(seen.insert((a, b)), "pair ({a},{b}) repeated");
            }
            for w in pairs.windows(2) {
                assert_eq!(w[0].1, w[1].0, "circuit must chain");
            }
            // A circuit returns to its start.
            assert_eq!(pairs.first().unwrap().0, pairs.last().unwrap().1);
        }
    }

    #[test]
    fn chained_legs_share_endpoints_across_speed_blocks() {
        let legs = enumerate_legs(3, &[0.5, 1.0], PairMode::Ordered).unwrap();
        for w in legs.windows(2) {
            assert_eq!(w[0].to, w[1].from);
        }
    }

    #[test]
    fn halving_speed_doubles_duration_until_clipped() {
        let model = RobotModel::bundled_6dof();
        let from = DVector::zeros(6);
        let mut to = DVector::zeros(6);
        to[0] = 1.2;
        let full = time_parameterize(&model, &from, &to, 1.0).unwrap();
        let half = time_parameterize(&model, &from, &to, 0.5).unwrap();
        assert_relative_eq!(half.duration, 2.0 * full.duration, epsilon = 1e-9);

        // Factors above 1 are clipped back to the limit-respecting minimum.
        let over = time_parameterize(&model, &from, &to, 2.0).unwrap();
        assert_relative_eq!(over.duration, full.duration, epsilon = 1e-12);
    }

    #[test]
    fn identical_endpoints_error_instead_of_zero_leg() {
        let model = RobotModel::bundled_6dof();
        let q = DVector::zeros(6);
        let mut eps = q.clone();
        eps[2] = 1e-11;
        assert!(matches!(
            time_parameterize(&model, &q, &eps, 1.0),
            Err(TrajGenError::Leg(QuinticError::Degenerate(_)))
        ));
    }

    #[test]
    fn trajectory_set_respects_joint_limits_and_chains() {
        let model = RobotModel::bundled_6dof();
        // Small safe grid around home.
        let configs = vec![
            DVector::from_column_slice(&[-0.4, -0.3, 0.3, 0.0, 0.3, 0.0]),
            DVector::from_column_slice(&[0.4, 0.2, 0.6, 0.3, -0.3, 0.5]),
            DVector::from_column_slice(&[0.0, -0.5, 0.9, -0.3, 0.0, -0.5]),
        ];
        let set =
            build_trajectory_set(&model, &configs, &[0.5, 1.0], PairMode::Ordered, 0.008).unwrap();
        assert_eq!(set.legs.len(), 3 * 2 * 2);
        let peak = set.trajectory.peak_velocity().unwrap();
        for j in 0..6 {
            assert!(
                peak[j] <= model.v_max[j] * (1.0 + 1e-9),
                "joint {} exceeds velocity limit",
                j + 1
            );
        }
        for s in &set.trajectory.samples {
            assert!(model.within_limits(&s.theta));
        }
        // Leg boundaries land on the recorded start samples.
        for (leg, &k) in set.legs.iter().zip(&set.leg_starts) {
            let at = &set.trajectory.samples[k];
            assert_relative_eq!(
                (&at.theta - &set.configs[leg.from]).amax(),
                0.0,
                epsilon = 1e-9
            );
        }
    }
}
