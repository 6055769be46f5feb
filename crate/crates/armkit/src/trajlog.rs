//! Trajectory logs: the on-disk record of a plant run.
//!
//! A [`TrajectoryLog`] holds per-sample joint positions, velocities,
//! accelerations, measured actuation torques, true external joint
//! torques, and the true end-effector wrench.  The CSV layout is stable:
//!
//! ```text
//! t,theta_1..theta_n,thetad_1..thetad_n,thetadd_1..thetadd_n,
//! tau_1..tau_n,tauext_1..tauext_n,fx,fy,fz,mx,my,mz
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle reproduces the values bit for bit.

use nalgebra::DVector;
use nalgebra::Vector6;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::robot::JointState;

/// Errors raised while reading or writing logs.
#[derive(Debug, Error)]
pub enum LogError {
    /// Underlying I/O failure.
    #[error("log I/O failed: {0}")]
    Io(#[from] std::io::Error),
    /// CSV-level failure.
    #[error("log CSV error: {0}")]
    Csv(#[from] csv::Error),
    /// The header row did not match the expected layout.
    #[error("unexpected log header: expected `{expected}`, got `{got}`")]
    HeaderMismatch {
        /// Expected header.
        expected: String,
        /// Header found in the file.
        got: String,
    },
    /// A data row had the wrong number of fields or a bad value.
    #[error("bad log row {row}: {reason}")]
    BadRow {
        /// 1-based data row number.
        row: usize,
        /// What was wrong.
        reason: String,
    },
    /// The log contains no samples.
    #[error("log holds no samples")]
    Empty,
}

/// A uniformly sampled record of one plant run.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryLog {
    /// Sample times (s), uniformly spaced.
    pub t: Vec<f64>,
    /// Joint positions per sample (rad).
    pub theta: Vec<DVector<f64>>,
    /// Joint velocities per sample (rad/s).
    pub theta_dot: Vec<DVector<f64>>,
    /// Joint accelerations per sample (rad/s^2).
    pub theta_ddot: Vec<DVector<f64>>,
    /// Measured actuation torques per sample (N m).
    pub tau: Vec<DVector<f64>>,
    /// True external joint torques per sample (N m).
    pub tau_ext: Vec<DVector<f64>>,
    /// True end-effector wrench per sample, `[fx fy fz mx my mz]`, in the
    /// end-effector frame (N, N m).
    pub wrench: Vec<Vector6<f64>>,
}

impl TrajectoryLog {
    /// Empty log.
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// Whether the log has no samples.
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Number of joints, from the first sample.
    pub fn n_joints(&self) -> usize {
        self.theta.first().map_or(0, |v| v.len())
    }

    /// Sample period (s) inferred from the first two samples.
    pub fn dt(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    /// Joint state at sample `k`.
    pub fn state_at(&self, k: usize) -> JointState {
        JointState {
            theta: self.theta[k].clone(),
            theta_dot: self.theta_dot[k].clone(),
            theta_ddot: self.theta_ddot[k].clone(),
        }
    }

    /// Append one sample.
    pub fn push(
        &mut self,
        t: f64,
        state: &JointState,
        tau: DVector<f64>,
        tau_ext: DVector<f64>,
        wrench: Vector6<f64>,
    ) {
        self.t.push(t);
        self.theta.push(state.theta.clone());
        self.theta_dot.push(state.theta_dot.clone());
        self.theta_ddot.push(state.theta_ddot.clone());
        self.tau.push(tau);
        self.tau_ext.push(tau_ext);
        self.wrench.push(wrench);
    }

    /// The expected CSV header for an `n`-joint log.
    pub fn csv_header(n: usize) -> String {
        let mut cols = vec!["t".to_string()];
        for prefix in ["theta", "thetad", "thetadd", "tau", "tauext"] {
            for j in 1..=n {
                cols.push(format!("{prefix}_{j}"));
            }
        }
        for axis in ["fx", "fy", "fz", "mx", "my", "mz"] {
            cols.push(axis.to_string());
        }
        cols.join(",")
    }

    /// Write the log as CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), LogError> {
        if self.is_empty() {
            return Err(LogError::Empty);
        }
        let n = self.n_joints();
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(Self::csv_header(n).split(','))?;
        let mut row: Vec<String> = Vec::with_capacity(1 + 5 * n + 6);
        for k in 0..self.len() {
            row.clear();
            row.push(format!("{}", self.t[k]));
            for source in [
                &self.theta[k],
                &self.theta_dot[k],
                &self.theta_ddot[k],
                &self.tau[k],
                &self.tau_ext[k],
            ] {
                for j in 0..n {
                    row.push(format!("{}", source[j]));
                }
            }
            for i in 0..6 {
                row.push(format!("{}", self.wrench[k][i]));
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Write the log to a file.
    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Read a log from CSV, validating the header and every value.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, LogError> {
        let mut input = csv::Reader::from_reader(reader);
        let header: Vec<String> = input
            .headers()?
            .iter()
            .map(|s| s.to_string())
            .collect();
        // Infer n from the column count: 1 + 5 n + 6.
        let n = match header.len().checked_sub(7) {
            Some(rest) if rest % 5 == 0 && rest > 0 => rest / 5,
            _ => {
                return Err(LogError::HeaderMismatch {
                    expected: Self::csv_header(6),
                    got: header.join(","),
                })
            }
        };
        let expected = Self::csv_header(n);
        if header.join(",") != expected {
            return Err(LogError::HeaderMismatch {
                expected,
                got: header.join(","),
            });
        }
        let mut log = TrajectoryLog::new();
        for (idx, record) in input.records().enumerate() {
            let record = record?;
            let parse = |field: usize| -> Result<f64, LogError> {
                let text = record.get(field).ok_or_else(|| LogError::BadRow {
                    row: idx + 1,
                    reason: format!("missing field {field}"),
                })?;
                let value: f64 = text.parse().map_err(|_| LogError::BadRow {
                    row: idx + 1,
                    reason: format!("unparseable value `{text}`"),
                })?;
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(LogError::BadRow {
                        row: idx + 1,
                        reason: format!("non-finite value `{text}`"),
                    })
                }
            };
            if record.len() != 1 + 5 * n + 6 {
                return Err(LogError::BadRow {
                    row: idx + 1,
                    reason: format!("expected {} fields, got {}", 1 + 5 * n + 6, record.len()),
                });
            }
            log.t.push(parse(0)?);
            let block = |base: usize| -> Result<DVector<f64>, LogError> {
                let mut v = DVector::zeros(n);
                for j in 0..n {
                    v[j] = parse(base + j)?;
                }
                Ok(v)
            };
            log.theta.push(block(1)?);
            log.theta_dot.push(block(1 + n)?);
            log.theta_ddot.push(block(1 + 2 * n)?);
            log.tau.push(block(1 + 3 * n)?);
            log.tau_ext.push(block(1 + 4 * n)?);
            let mut w = Vector6::zeros();
            for i in 0..6 {
                w[i] = parse(1 + 5 * n + i)?;
            }
            log.wrench.push(w);
        }
        if log.is_empty() {
            return Err(LogError::Empty);
        }
        Ok(log)
    }

    /// Read a log from a file.
    pub fn load(path: &Path) -> Result<Self, LogError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
