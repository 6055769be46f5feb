//! Discrete impedance law turning a sensed torque/force error into a
//! position correction.
//!
//! The correction comes from discretizing a virtual spring-damper-mass
//! driven by the error signal:
//!
//! ```text
//! d = (k_tau * e + k_v * e / dt) / (m / dt^2 + b / dt)
//! ```
//!
//! which is linear in the error, so doubling the error doubles the
//! correction.  The rate term divides the *current* error by the period
//! rather than differencing it, matching the printed discrete form; both
//! gains act on whatever error signal the caller supplies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised by parameter validation.
#[derive(Debug, Error)]
pub enum ImpedanceError {
    /// A parameter is outside its allowed range.
    #[error("invalid impedance parameters: {0}")]
    InvalidParams(String),
}

/// Virtual spring-damper-mass parameters of the discrete impedance law.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ImpedanceParams {
    /// Virtual mass (kg).
    pub m: f64,
    /// Virtual damping (N s/m).
    pub b: f64,
    /// Displacement per unit error.
    pub k_tau: f64,
    /// Displacement per unit error rate.
    pub k_v: f64,
    /// Control period (s).
    pub dt: f64,
}

impl ImpedanceParams {
    /// Check ranges: `m`, `b`, `dt` positive; gains non-negative.
    pub fn validate(&self) -> Result<(), ImpedanceError> {
        if !(self.m > 0.0) || !(self.b > 0.0) || !(self.dt > 0.0) {
            return Err(ImpedanceError::InvalidParams(format!(
                "m, b, dt must be positive, got m = {}, b = {}, dt = {}",
                self.m, self.b, self.dt
            )));
        }
        if !(self.k_tau >= 0.0) || !(self.k_v >= 0.0) {
            return Err(ImpedanceError::InvalidParams(format!(
                "gains must be non-negative, got k_tau = {}, k_v = {}",
                self.k_tau, self.k_v
            )));
        }
        if [self.m, self.b, self.k_tau, self.k_v, self.dt]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(ImpedanceError::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Position correction for one error sample.
pub fn impedance_displacement(p: &ImpedanceParams, error: f64) -> f64 {
    let numerator = p.k_tau * error + p.k_v * error / p.dt;
    let denominator = p.m / (p.dt * p.dt) + p.b / p.dt;
    numerator / denominator
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ImpedanceParams {
        ImpedanceParams {
            m: 1.0,
            b: 10.0,
            k_tau: 0.01,
            k_v: 0.001,
            dt: 0.008,
        }
    }

    #[test]
    fn zero_error_gives_zero_correction() {
        assert_eq!(impedance_displacement(&params(), 0.0), 0.0);
    }

    #[test]
    fn matches_direct_substitution() {
        // m = 1, b = 10, k_tau = 0.01, k_v = 0.001, dt = 0.008, e = 2:
        // numerator 2 * (0.01 + 0.125), denominator 15625 + 1250.
        let d = impedance_displacement(&params(), 2.0);
        let want = 2.0 * (0.01 + 0.001 / 0.008) / (1.0 / 0.008f64.powi(2) + 10.0 / 0.008);
        assert_eq!(d, want);
        assert!((d - 1.6e-5).abs() < 1e-6);
    }

    #[test]
    fn correction_is_linear_in_the_error() {
        let p = params();
        let one = impedance_displacement(&p, 1.3);
        let two = impedance_displacement(&p, 2.6);
        assert!((two - 2.0 * one).abs() < 1e-15);
        let neg = impedance_displacement(&p, -1.3);
        assert_eq!(neg, -one);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut p = params();
        p.m = 0.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.k_tau = -0.1;
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());
    }
}
