//! Quintic (fifth-order polynomial) point-to-point profiles.
//!
//! A [`QuinticSegment`] interpolates between two joint configurations with
//! zero velocity and acceleration at both ends:
//! `s(u) = 10 u^3 - 15 u^4 + 6 u^5` with `u = t / T`.  The peak velocity
//! of a joint moving by `dq` is `15 dq / (8 T)` (at mid-stroke) and the
//! peak acceleration is `10 dq / (sqrt(3) T^2)`, which is what
//! [`QuinticSegment::min_duration`] uses to respect joint limits.

use nalgebra::DVector;
use thiserror::Error;

/// Errors raised while constructing a profile.
#[derive(Debug, Error)]
pub enum QuinticError {
    /// Start and end configurations are (nearly) identical.
    #[error("degenerate segment: start and end differ by at most {0:.3e} rad")]
    Degenerate(f64),
    /// Mismatched vector lengths.
    #[error("dimension mismatch: start has {start} joints, end has {end}")]
    DimensionMismatch {
        /// Length of the start configuration.
        start: usize,
        /// Length of the end configuration.
        end: usize,
    },
    /// A non-positive duration or limit was requested.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Smoothstep basis `s(u)` and its first two derivatives.
fn basis(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        10.0 * u3 - 15.0 * u2 * u2 + 6.0 * u2 * u3,
        30.0 * u2 - 60.0 * u3 + 30.0 * u2 * u2,
        60.0 * u - 180.0 * u2 + 120.0 * u3,
    )
}

/// A rest-to-rest quintic joint-space segment.
#[derive(Clone, Debug)]
pub struct QuinticSegment {
    /// Start configuration (rad).
    pub start: DVector<f64>,
    /// End configuration (rad).
    pub end: DVector<f64>,
    /// Segment duration (s).
    pub duration: f64,
}

impl QuinticSegment {
    /// Build a segment with an explicit duration.
    pub fn new(start: DVector<f64>, end: DVector<f64>, duration: f64) -> Result<Self, QuinticError> {
        if start.len() != end.len() {
            return Err(QuinticError::DimensionMismatch {
                start: start.len(),
                end: end.len(),
            });
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(QuinticError::InvalidParameter(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let max_delta = (&end - &start).amax();
        if max_delta < 1e-9 {
            return Err(QuinticError::Degenerate(max_delta));
        }
        Ok(QuinticSegment {
            start,
            end,
            duration,
        })
    }

    /// Smallest duration that keeps every joint inside its velocity and
    /// acceleration limits, given the quintic peak factors.
    pub fn min_duration(
        start: &DVector<f64>,
        end: &DVector<f64>,
        v_max: &[f64],
        a_max: &[f64],
    ) -> f64 {
        let mut t = 0.0_f64;
        for j in 0..start.len() {
            let dq = (end[j] - start[j]).abs();
            if dq == 0.0 {
                continue;
            }
            let t_vel = 15.0 * dq / (8.0 * v_max[j]);
            let t_acc = (10.0 * dq / (3.0_f64.sqrt() * a_max[j])).sqrt();
            t = t.max(t_vel).max(t_acc);
        }
        t
    }

    /// Position, velocity, and acceleration at time `t`, clamped to rest
    /// at either end outside `[0, duration]`.
    pub fn eval(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let n = self.start.len();
        if t <= 0.0 {
            return (self.start.clone(), DVector::zeros(n), DVector::zeros(n));
        }
        if t >= self.duration {
            return (self.end.clone(), DVector::zeros(n), DVector::zeros(n));
        }
        let u = t / self.duration;
        let (s, sd, sdd) = basis(u);
        let delta = &self.end - &self.start;
        (
            &self.start + &delta * s,
            &delta * (sd / self.duration),
            &delta * (sdd / (self.duration * self.duration)),
        )
    }

    /// Largest per-joint speed reached over the segment (rad/s).
    pub fn peak_velocity(&self) -> DVector<f64> {
        (&self.end - &self.start).abs() * (15.0 / (8.0 * self.duration))
    }

    /// Largest per-joint acceleration reached over the segment (rad/s^2).
    pub fn peak_acceleration(&self) -> DVector<f64> {
        (&self.end - &self.start).abs()
            * (10.0 / (3.0_f64.sqrt() * self.duration * self.duration))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn segment() -> QuinticSegment {
        QuinticSegment::new(
            DVector::from_column_slice(&[0.0, 1.0]),
            DVector::from_column_slice(&[2.0, -1.0]),
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn boundary_conditions_are_rest_to_rest() {
        let seg = segment();
        for t in [0.0, seg.duration] {
            let (_, vel, acc) = seg.eval(t);
            assert_relative_eq!(vel.amax(), 0.0, epsilon = 1e-12);
            assert_relative_eq!(acc.amax(), 0.0, epsilon = 1e-12);
        }
        let (q0, _, _) = seg.eval(0.0);
        let (q1, _, _) = seg.eval(seg.duration);
        assert_relative_eq!(q0[0], 0.0);
        assert_relative_eq!(q1[0], 2.0);
    }

    #[test]
    fn midpoint_velocity_matches_peak_formula() {
        let seg = segment();
        let (_, vel, _) = seg.eval(seg.duration / 2.0);
        // Peak velocity of a quintic is 15 dq / (8 T), reached at u = 1/2.
        assert_relative_eq!(vel[0], 15.0 * 2.0 / (8.0 * 4.0), epsilon = 1e-12);
        assert_relative_eq!(vel.amax(), seg.peak_velocity().amax(), epsilon = 1e-12);
    }

    #[test]
    fn numeric_peak_acceleration_matches_formula() {
        let seg = segment();
        let mut peak = 0.0_f64;
        for k in 0..=10_000 {
            let t = seg.duration * k as f64 / 10_000.0;
            let (_, _, acc) = seg.eval(t);
            peak = peak.max(acc.amax());
        }
        assert_relative_eq!(peak, seg.peak_acceleration().amax(), epsilon = 1e-4);
    }

    #[test]
    fn velocity_is_consistent_with_position_derivative() {
        let seg = segment();
        let h = 1e-6;
        for k in 1..20 {
            let t = seg.duration * k as f64 / 20.0;
            let (qp, _, _) = seg.eval(t + h);
            let (qm, _, _) = seg.eval(t - h);
            let (_, vel, _) = seg.eval(t);
            for j in 0..2 {
                assert_relative_eq!(vel[j], (qp[j] - qm[j]) / (2.0 * h), epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn degenerate_segment_is_rejected() {
        let q = DVector::from_column_slice(&[0.5, 0.5]);
        let almost = DVector::from_column_slice(&[0.5, 0.5 + 1e-12]);
        assert!(matches!(
            QuinticSegment::new(q, almost, 1.0),
            Err(QuinticError::Degenerate(_))
        ));
    }

    #[test]
    fn min_duration_respects_both_limits() {
        let start = DVector::from_column_slice(&[0.0]);
        let end = DVector::from_column_slice(&[1.0]);
        // Generous acceleration, tight velocity: velocity bound wins.
        let t = QuinticSegment::min_duration(&start, &end, &[1.0], &[1e6]);
        assert_relative_eq!(t, 15.0 / 8.0, epsilon = 1e-12);
        // Tight acceleration: acceleration bound wins.
        let t = QuinticSegment::min_duration(&start, &end, &[1e6], &[1.0]);
        assert_relative_eq!(t, (10.0 / 3.0_f64.sqrt()).sqrt(), epsilon = 1e-12);
    }
}
