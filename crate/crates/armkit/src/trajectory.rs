//! Uniformly sampled joint-space reference trajectories.
//!
//! A [`SampledTrajectory`] is the common currency between the trajectory
//! generator, the plant, and the planner: positions, velocities, and
//! accelerations on a fixed time grid.

use nalgebra::DVector;

use crate::quintic::QuinticSegment;
use crate::robot::JointState;

/// A reference trajectory sampled on a uniform time grid.
#[derive(Clone, Debug)]
pub struct SampledTrajectory {
    /// Sample period (s).
    pub dt: f64,
    /// Per-sample joint states; sample `k` is at time `k * dt`.
    pub samples: Vec<JointState>,
}

impl SampledTrajectory {
    /// Empty trajectory with the given sample period.
    pub fn new(dt: f64) -> Self {
        assert!(dt > 0.0, "sample period must be positive");
        SampledTrajectory {
            dt,
            samples: Vec::new(),
        }
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Whether the trajectory has no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total duration (s); zero for fewer than two samples.
    pub fn duration(&self) -> f64 {
        match self.samples.len() {
            0 | 1 => 0.0,
            n => (n - 1) as f64 * self.dt,
        }
    }

    /// Sample a quintic segment on the grid and append it.  The segment
    /// duration is rounded up to a whole number of periods (rounding up
    /// only lengthens the move, so limits stay respected).  When the
    /// trajectory already ends at the segment start, the duplicated
    /// boundary sample is dropped so legs chain seamlessly.
    pub fn append_segment(&mut self, seg: &QuinticSegment) {
        let steps = (seg.duration / self.dt).ceil().max(1.0) as usize;
        let duration = steps as f64 * self.dt;
        let stretched = QuinticSegment {
            start: seg.start.clone(),
            end: seg.end.clone(),
            duration,
        };
        let skip_first = match self.samples.last() {
            Some(last) => (&last.theta - &seg.start).amax() < 1e-9,
            None => false,
        };
        let from = if skip_first { 1 } else { 0 };
        for k in from..=steps {
            let (theta, theta_dot, theta_ddot) = stretched.eval(k as f64 * self.dt);
            self.samples.push(JointState {
                theta,
                theta_dot,
                theta_ddot,
            });
        }
    }

    /// Hold the final configuration for `duration` seconds (zero velocity
    /// and acceleration).  No-op on an empty trajectory.
    pub fn append_dwell(&mut self, duration: f64) {
        let Some(last) = self.samples.last() else {
            return;
        };
        let theta = last.theta.clone();
        let n = theta.len();
        let steps = (duration / self.dt).round().max(0.0) as usize;
        for _ in 0..steps {
            self.samples.push(JointState {
                theta: theta.clone(),
                theta_dot: DVector::zeros(n),
                theta_ddot: DVector::zeros(n),
            });
        }
    }

    /// Largest absolute velocity per joint over the trajectory.
    pub fn peak_velocity(&self) -> Option<DVector<f64>> {
        let first = self.samples.first()?;
        let mut peak = DVector::<f64>::zeros(first.len());
        for s in &self.samples {
            for j in 0..peak.len() {
                peak[j] = peak[j].max(s.theta_dot[j].abs());
            }
        }
        Some(peak)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn seg(a: f64, b: f64, t: f64) -> QuinticSegment {
        QuinticSegment::new(
            DVector::from_column_slice(&[a]),
            DVector::from_column_slice(&[b]),
            t,
        )
        .unwrap()
    }

    #[test]
    fn append_rounds_duration_up_to_grid() {
        let mut traj = SampledTrajectory::new(0.008);
        traj.append_segment(&seg(0.0, 1.0, 0.0301));
        // 0.0301 / 0.008 = 3.76... -> 4 steps -> 5 samples, 32 ms total.
        assert_eq!(traj.len(), 5);
        assert_relative_eq!(traj.duration(), 0.032, epsilon = 1e-12);
        assert_relative_eq!(traj.samples.last().unwrap().theta[0], 1.0);
    }

    #[test]
    fn chained_segments_share_boundary_sample() {
        let mut traj = SampledTrajectory::new(0.01);
        traj.append_segment(&seg(0.0, 1.0, 0.1));
        let len_first = traj.len();
        traj.append_segment(&seg(1.0, 0.5, 0.1));
        // The shared waypoint appears exactly once.
        assert_eq!(traj.len(), len_first + 10);
        let at_boundary = &traj.samples[len_first - 1];
        assert_relative_eq!(at_boundary.theta[0], 1.0);
        assert_relative_eq!(at_boundary.theta_dot[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dwell_holds_position_at_zero_velocity() {
        let mut traj = SampledTrajectory::new(0.01);
        traj.append_segment(&seg(0.0, 1.0, 0.1));
        let len = traj.len();
        traj.append_dwell(0.05);
        assert_eq!(traj.len(), len + 5);
        let last = traj.samples.last().unwrap();
        assert_relative_eq!(last.theta[0], 1.0);
        assert_relative_eq!(last.theta_dot[0], 0.0);
    }
}
