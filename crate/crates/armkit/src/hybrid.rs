//! Physics, data-driven, and hybrid torque model compositions.
//!
//! A [`HybridModel`] predicts the measured torques of a channel group
//! from some combination of three ingredients:
//!
//! | composition | rigid-body physics | loss terms | trees |
//! |-------------|--------------------|------------|-------|
//! | `P1`        | yes                |            |       |
//! | `P2`        | yes                | yes        |       |
//! | `D`         |                    |            | yes   |
//! | `H1`        | yes                | yes        | yes   |
//! | `H2`        | yes                |            | yes   |
//! | `H3`        |                    | yes        | yes   |
//!
//! The tree ensembles always fit the *residual* of whatever physics and
//! loss terms the composition includes, so a composition and its training
//! target are two views of the same row of the table.  Loss parameters
//! are identified from logged data by linear least squares
//! ([`identify_loss`]).

use nalgebra::{DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{inverse_dynamics, loss_torque, DynamicsError};
use crate::features::{window_row, Dataset, FeatureError, FeatureGroup, Normalization};
use crate::gbt::{train, GbtError, GbtHyperParams, GbtModel};
use crate::metrics::{MetricError, SummaryStats};
use crate::robot::{JointState, LossParams, RobotModel};
use crate::trajlog::TrajectoryLog;

/// Errors raised while assembling, training, or using hybrid models.
#[derive(Debug, Error)]
pub enum HybridError {
    /// The model's assets do not match its composition.
    #[error("composition {0}: {1}")]
    CompositionMismatch(&'static str, String),
    /// Feature construction failed.
    #[error(transparent)]
    Feature(#[from] FeatureError),
    /// Tree training failed.
    #[error(transparent)]
    Gbt(#[from] GbtError),
    /// Dynamics evaluation failed.
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    /// Metric aggregation failed.
    #[error(transparent)]
    Metric(#[from] MetricError),
    /// Serialization failure.
    #[error("model (de)serialization failed: {0}")]
    Serde(String),
    /// Anything else inconsistent in the inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Which ingredients a model combines (one row of the composition table).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Composition {
    /// Rigid-body physics only.
    P1,
    /// Rigid-body physics plus identified loss terms.
    P2,
    /// Trees only (pure data-driven).
    D,
    /// Physics plus loss plus trees on the remaining residual.
    H1,
    /// Physics plus trees (trees learn loss and unmodeled effects).
    H2,
    /// Loss plus trees (trees learn the motion dynamics).
    H3,
}

impl Composition {
    /// All compositions in table order.
    pub const ALL: [Composition; 6] = [
        Composition::P1,
        Composition::P2,
        Composition::D,
        Composition::H1,
        Composition::H2,
        Composition::H3,
    ];

    /// Whether the rigid-body terms are part of the prediction.
    pub fn uses_physics(&self) -> bool {
        matches!(self, Composition::P1 | Composition::P2 | Composition::H1 | Composition::H2)
    }

    /// Whether the loss terms are part of the prediction.
    pub fn uses_loss(&self) -> bool {
        matches!(self, Composition::P2 | Composition::H1 | Composition::H3)
    }

    /// Whether tree ensembles are part of the prediction.
    pub fn uses_trees(&self) -> bool {
        matches!(
            self,
            Composition::D | Composition::H1 | Composition::H2 | Composition::H3
        )
    }

    /// Display name.
    pub fn name(&self) -> &'static str {
        match self {
            Composition::P1 => "P1",
            Composition::P2 => "P2",
            Composition::D => "D",
            Composition::H1 => "H1",
            Composition::H2 => "H2",
            Composition::H3 => "H3",
        }
    }
}

/// A composed torque predictor for one channel group.
#[derive(Clone, Debug)]
pub struct HybridModel {
    /// Which ingredients are active.
    pub composition: Composition,
    /// Channel group and feature layout.
    pub group: FeatureGroup,
    /// Window length used by the tree features.
    pub window: usize,
    /// Rigid-body model (present iff the composition uses physics).
    pub physics: Option<RobotModel>,
    /// Loss parameters (present iff the composition uses loss).
    pub loss: Option<LossParams>,
    /// One ensemble per group channel (present iff the composition uses
    /// trees).
    pub trees: Option<Vec<GbtModel>>,
    /// Feature normalization fitted on the training set, if enabled.
    pub normalization: Option<Normalization>,
}

/// Split of one prediction into its additive parts (group channels).
#[derive(Clone, Debug)]
pub struct PredictionParts {
    /// Physics-plus-loss part (zero for compositions without it).
    pub physics: DVector<f64>,
    /// Tree part (zero for compositions without trees).
    pub trees: DVector<f64>,
}

impl PredictionParts {
    /// Total prediction.
    pub fn total(&self) -> DVector<f64> {
        &self.physics + &self.trees
    }
}

impl HybridModel {
    /// Check that the stored assets match the composition's table row.
    pub fn validate(&self) -> Result<(), HybridError> {
        let name = self.composition.name();
        if self.composition.uses_physics() != self.physics.is_some() {
            return Err(HybridError::CompositionMismatch(
                name,
                format!(
                    "physics model must be {}",
                    if self.composition.uses_physics() { "present" } else { "absent" }
                ),
            ));
        }
        if self.composition.uses_loss() != self.loss.is_some() {
            return Err(HybridError::CompositionMismatch(
                name,
                format!(
                    "loss parameters must be {}",
                    if self.composition.uses_loss() { "present" } else { "absent" }
                ),
            ));
        }
        if self.composition.uses_trees() != self.trees.is_some() {
            return Err(HybridError::CompositionMismatch(
                name,
                format!(
                    "tree ensembles must be {}",
                    if self.composition.uses_trees() { "present" } else { "absent" }
                ),
            ));
        }
        if let Some(trees) = &self.trees {
            if trees.len() != self.group.channels().len() {
                return Err(HybridError::CompositionMismatch(
                    name,
                    format!(
                        "{} ensembles for {} channels",
                        trees.len(),
                        self.group.channels().len()
                    ),
                ));
            }
            if self.window == 0 {
                return Err(HybridError::CompositionMismatch(
                    name,
                    "window must be at least 1 when trees are present".into(),
                ));
            }
        }
        Ok(())
    }

    /// First log row this model can predict (`window - 1` when trees need
    /// history, otherwise 0).
    pub fn start_row(&self) -> usize {
        if self.composition.uses_trees() {
            self.window - 1
        } else {
            0
        }
    }

    /// Physics-plus-loss torque for the group channels at one state.
    ///
    /// This is the exact code path shared by every composition that
    /// includes physics or loss terms, so e.g. `H1` minus its tree part
    /// reproduces `P2` bit for bit.
    fn physics_part(&self, state: &JointState) -> Result<DVector<f64>, HybridError> {
        let channels = self.group.channels();
        let mut out = DVector::zeros(channels.len());
        let mut full: Option<DVector<f64>> = None;
        if let Some(model) = &self.physics {
            full = Some(inverse_dynamics(model, state)?);
        }
        if let Some(loss) = &self.loss {
            let l = loss_torque(loss, state);
            full = Some(match full {
                Some(f) => f + l,
                None => l,
            });
        }
        if let Some(f) = full {
            for (c, &channel) in channels.iter().enumerate() {
                out[c] = f[channel];
            }
        }
        Ok(out)
    }

    /// Tree contribution for one (already windowed, unnormalized) feature
    /// row.
    fn tree_part(&self, row: &[f64]) -> DVector<f64> {
        let channels = self.group.channels();
        match &self.trees {
            Some(trees) => {
                let mut row = row.to_vec();
                if let Some(norm) = &self.normalization {
                    norm.apply_row(&mut row);
                }
                DVector::from_fn(channels.len(), |c, _| trees[c].predict_row(&row))
            }
            None => DVector::zeros(channels.len()),
        }
    }

    /// Prediction parts at one row of a log.  The row needs
    /// `start_row()` samples of history before it.
    pub fn predict_parts_at(
        &self,
        log: &TrajectoryLog,
        k: usize,
    ) -> Result<PredictionParts, HybridError> {
        if k < self.start_row() || k >= log.len() {
            return Err(HybridError::InvalidInput(format!(
                "row {k} outside the predictable range {}..{}",
                self.start_row(),
                log.len()
            )));
        }
        let physics = self.physics_part(&log.state_at(k))?;
        let trees = if self.composition.uses_trees() {
            let row = window_row(log, self.group, self.window, k);
            self.tree_part(&row)
        } else {
            DVector::zeros(self.group.channels().len())
        };
        Ok(PredictionParts { physics, trees })
    }

    /// Predict over a log, split into parts; entry `i` corresponds to log
    /// row `start_row() + i`.
    pub fn predict_log_parts(
        &self,
        log: &TrajectoryLog,
    ) -> Result<Vec<PredictionParts>, HybridError> {
        self.validate()?;
        if log.len() <= self.start_row() {
            return Err(HybridError::InvalidInput(format!(
                "log with {} samples is shorter than the model window {}",
                log.len(),
                self.window
            )));
        }
        let mut out = Vec::with_capacity(log.len() - self.start_row());
        for k in self.start_row()..log.len() {
            out.push(self.predict_parts_at(log, k)?);
        }
        Ok(out)
    }

    /// Predict total torques over a log (see [`Self::predict_log_parts`]).
    pub fn predict_log(&self, log: &TrajectoryLog) -> Result<Vec<DVector<f64>>, HybridError> {
        Ok(self
            .predict_log_parts(log)?
            .into_iter()
            .map(|p| p.total())
            .collect())
    }

    /// Serialize to a single JSON document.  The rigid-body model is not
    /// embedded; it is re-attached on load.
    pub fn to_json(&self) -> Result<String, HybridError> {
        self.validate()?;
        let doc = SavedModel {
            format_version: FORMAT_VERSION,
            composition: self.composition,
            group: self.group,
            window: self.window,
            loss_params: self.loss.clone(),
            normalization: self.normalization.clone(),
            hyperparams: self.trees.as_ref().map(|t| t[0].params.clone()),
            trees: self.trees.clone(),
        };
        serde_json::to_string_pretty(&doc).map_err(|e| HybridError::Serde(e.to_string()))
    }

    /// Deserialize from JSON, re-attaching a rigid-body model for
    /// compositions that need one.
    pub fn from_json(text: &str, physics: Option<RobotModel>) -> Result<Self, HybridError> {
        let doc: SavedModel =
            serde_json::from_str(text).map_err(|e| HybridError::Serde(e.to_string()))?;
        if doc.format_version != FORMAT_VERSION {
            return Err(HybridError::Serde(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let model = HybridModel {
            composition: doc.composition,
            group: doc.group,
            window: doc.window,
            physics: if doc.composition.uses_physics() { physics } else { None },
            loss: doc.loss_params,
            trees: doc.trees,
            normalization: doc.normalization,
        };
        model.validate()?;
        Ok(model)
    }
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SavedModel {
    format_version: u32,
    composition: Composition,
    group: FeatureGroup,
    window: usize,
    loss_params: Option<LossParams>,
    normalization: Option<Normalization>,
    hyperparams: Option<GbtHyperParams>,
    trees: Option<Vec<GbtModel>>,
}

/// Training options for the tree part of a composition.
#[derive(Clone, Debug)]
pub struct TrainSpec {
    /// Window length in steps.
    pub window: usize,
    /// Whether to z-score the features on the training set.
    pub normalize: bool,
    /// Tree hyperparameters.
    pub params: GbtHyperParams,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            window: 10,
            normalize: false,
            params: GbtHyperParams::default(),
        }
    }
}

/// Assemble (and for tree compositions, train) a model from logs.
///
/// `physics` and `loss` must match the composition row.  The trees fit
/// the residual `tau_measured - physics_part` on the given training logs.
pub fn train_hybrid(
    composition: Composition,
    group: FeatureGroup,
    physics: Option<RobotModel>,
    loss: Option<LossParams>,
    logs: &[&TrajectoryLog],
    spec: &TrainSpec,
) -> Result<HybridModel, HybridError> {
    let mut model = HybridModel {
        composition,
        group,
        window: spec.window,
        physics,
        loss,
        trees: None,
        normalization: None,
    };
    if !composition.uses_trees() {
        model.validate()?;
        return Ok(model);
    }
    if logs.is_empty() {
        return Err(HybridError::InvalidInput("no training logs".into()));
    }
    // Feature rows plus residual labels per channel.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<Vec<f64>> = vec![Vec::new(); group.channels().len()];
    for log in logs {
        if log.len() < spec.window {
            return Err(HybridError::InvalidInput(format!(
                "log with {} samples is shorter than the {}-step window",
                log.len(),
                spec.window
            )));
        }
        for k in (spec.window - 1)..log.len() {
            rows.push(window_row(log, group, spec.window, k));
            let physics = model.physics_part(&log.state_at(k))?;
            for (c, &channel) in group.channels().iter().enumerate() {
                labels[c].push(log.tau[k][channel] - physics[c]);
            }
        }
    }
    if spec.normalize {
        let norm = Normalization::fit(&rows)?;
        norm.apply(&mut rows);
        model.normalization = Some(norm);
    }
    let trees: Result<Vec<GbtModel>, GbtError> = labels
        .par_iter()
        .map(|y| train(&rows, y, &spec.params))
        .collect();
    model.trees = Some(trees?);
    model.validate()?;
    Ok(model)
}

/// Train the tree part on a prebuilt dataset whose labels are already the
/// desired targets (used by the hyperparameter search, which reuses one
/// feature matrix across many trainings).
pub fn train_trees_on_dataset(
    dataset: &Dataset,
    params: &GbtHyperParams,
) -> Result<Vec<GbtModel>, HybridError> {
    let trees: Result<Vec<GbtModel>, GbtError> = dataset
        .labels
        .par_iter()
        .map(|y| train(&dataset.features, y, params))
        .collect();
    Ok(trees?)
}

/// Identify loss parameters per joint from logs by least squares on
/// `tau_measured - rigid_body_torque = b_m thetadd + c_m thetad + f_c sign(thetad)`.
///
/// Coefficients driven slightly negative by noise are clamped to zero.
pub fn identify_loss(
    model: &RobotModel,
    logs: &[&TrajectoryLog],
) -> Result<LossParams, HybridError> {
    if logs.is_empty() {
        return Err(HybridError::InvalidInput("no logs".into()));
    }
    let n = model.n_joints();
    // Per joint: accumulate the 3x3 normal equations.
    let mut ata = vec![Matrix3::<f64>::zeros(); n];
    let mut atb = vec![Vector3::<f64>::zeros(); n];
    for log in logs {
        if log.n_joints() != n {
            return Err(HybridError::InvalidInput(format!(
                "log has {} joints, model has {n}",
                log.n_joints()
            )));
        }
        for k in 0..log.len() {
            let state = log.state_at(k);
            let rigid = inverse_dynamics(model, &state)?;
            for j in 0..n {
                let row = Vector3::new(
                    state.theta_ddot[j],
                    state.theta_dot[j],
                    crate::dynamics::sign_zero(state.theta_dot[j]),
                );
                let y = log.tau[k][j] - rigid[j];
                ata[j] += row * row.transpose();
                atb[j] += row * y;
            }
        }
    }
    let mut loss = LossParams::zeros(n);
    for j in 0..n {
        let solved = ata[j]
            .svd(true, true)
            .solve(&atb[j], 1e-12)
            .map_err(|e| HybridError::InvalidInput(format!("loss solve failed: {e}")))?;
        loss.b_m[j] = solved[0].max(0.0);
        loss.c_m[j] = solved[1].max(0.0);
        loss.f_c[j] = solved[2].max(0.0);
    }
    Ok(loss)
}

/// Per-model evaluation summary over a set of test trajectories.
#[derive(Clone, Debug)]
pub struct EvalReport {
    /// Display name of the evaluated model.
    pub model: String,
    /// One pooled RMSE per trajectory (group channels pooled).
    pub per_trajectory_rmse: Vec<f64>,
    /// Statistics over the per-trajectory RMSE values.
    pub stats: SummaryStats,
}

/// Evaluate models on test logs: one RMSE per trajectory per model
/// (channels of the group pooled), then mean/std/max/min over
/// trajectories.  All models score the same rows: predictions start at
/// the largest `start_row()` among them.
pub fn evaluate_models(
    models: &[(&str, &HybridModel)],
    logs: &[&TrajectoryLog],
) -> Result<Vec<EvalReport>, HybridError> {
    if models.is_empty() || logs.is_empty() {
        return Err(HybridError::InvalidInput(
            "need at least one model and one trajectory".into(),
        ));
    }
    let start = models.iter().map(|(_, m)| m.start_row()).max().unwrap();
    let mut reports = Vec::with_capacity(models.len());
    for (name, model) in models {
        let mut per_traj = Vec::with_capacity(logs.len());
        for log in logs {
            let preds = model.predict_log_parts(log)?;
            let offset = start - model.start_row();
            let mut sq_sum = 0.0;
            let mut count = 0usize;
            for (i, k) in (start..log.len()).enumerate() {
                let pred = preds[offset + i].total();
                for (c, &channel) in model.group.channels().iter().enumerate() {
                    let err = pred[c] - log.tau[k][channel];
                    sq_sum += err * err;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(HybridError::InvalidInput(
                    "trajectory too short to score".into(),
                ));
            }
            per_traj.push((sq_sum / count as f64).sqrt());
        }
        let stats = SummaryStats::from_values(&per_traj)?;
        reports.push(EvalReport {
            model: name.to_string(),
            per_trajectory_rmse: per_traj,
            stats,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{simulate_tracking, PlantConfig};
    use crate::quintic::QuinticSegment;
    use crate::trajectory::SampledTrajectory;

    fn plant_config() -> PlantConfig {
        let model = RobotModel::planar(&[
            (0.8, 2.5, 0.45, 0.12),
            (0.6, 1.4, 0.25, 0.05),
            (0.4, 0.8, 0.18, 0.02),
        ]);
        let loss = LossParams {
            b_m: vec![0.05, 0.03, 0.02],
            c_m: vec![1.5, 0.8, 0.5],
            f_c: vec![0.8, 0.5, 0.3],
        };
        PlantConfig::new(model, loss)
    }

    fn reference(cfg: &PlantConfig, seed_shift: f64) -> SampledTrajectory {
        let mut traj = SampledTrajectory::new(cfg.sample_period);
        traj.append_segment(
            &QuinticSegment::new(
                DVector::from_column_slice(&[0.1 + seed_shift, -0.4, 0.3]),
                DVector::from_column_slice(&[0.9, 0.5 - seed_shift, -0.4]),
                1.1,
            )
            .unwrap(),
        );
        traj.append_segment(
            &QuinticSegment::new(
                DVector::from_column_slice(&[0.9, 0.5 - seed_shift, -0.4]),
                DVector::from_column_slice(&[-0.3, -0.1, 0.5]),
                0.9,
            )
            .unwrap(),
        );
        traj
    }

    fn quick_params() -> GbtHyperParams {
        GbtHyperParams {
            n_estimators: 40,
            learning_rate: 0.2,
            max_depth: 4,
            ..GbtHyperParams::default()
        }
    }

    #[test]
    fn composition_table_is_enforced() {
        let model = HybridModel {
            composition: Composition::P2,
            group: FeatureGroup::Joints123,
            window: 1,
            physics: Some(plant_config().model),
            loss: None, // P2 requires loss
            trees: None,
            normalization: None,
        };
        assert!(matches!(
            model.validate(),
            Err(HybridError::CompositionMismatch("P2", _))
        ));
    }

    #[test]
    fn p2_exactly_explains_a_residual_free_plant() {
        let cfg = plant_config();
        let log = simulate_tracking(&cfg, &reference(&cfg, 0.0), None, 1).unwrap();
        let p2 = HybridModel {
            composition: Composition::P2,
            group: FeatureGroup::Joints123,
            window: 1,
            physics: Some(cfg.model.clone()),
            loss: Some(cfg.true_loss.clone()),
            trees: None,
            normalization: None,
        };
        let preds = p2.predict_log(&log).unwrap();
        for (k, pred) in preds.iter().enumerate() {
            for c in 0..3 {
                assert!(
                    (pred[c] - log.tau[k][c]).abs() < 1e-8,
                    "P2 should be exact on a clean plant"
                );
            }
        }
    }

    #[test]
    fn identify_loss_recovers_exact_parameters_from_clean_logs() {
        let cfg = plant_config();
        let log_a = simulate_tracking(&cfg, &reference(&cfg, 0.0), None, 1).unwrap();
        let log_b = simulate_tracking(&cfg, &reference(&cfg, 0.2), None, 2).unwrap();
        let loss = identify_loss(&cfg.model, &[&log_a, &log_b]).unwrap();
        for j in 0..3 {
            assert!((loss.b_m[j] - cfg.true_loss.b_m[j]).abs() < 1e-6);
            assert!((loss.c_m[j] - cfg.true_loss.c_m[j]).abs() < 1e-6);
            assert!((loss.f_c[j] - cfg.true_loss.f_c[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn h1_physics_part_equals_p2_total_bitwise() {
        let mut cfg = plant_config();
        cfg.residual.stribeck_magnitude = vec![0.5, 0.4, 0.3];
        let log = simulate_tracking(&cfg, &reference(&cfg, 0.0), None, 3).unwrap();
        let spec = TrainSpec {
            params: quick_params(),
            ..TrainSpec::default()
        };
        let h1 = train_hybrid(
            Composition::H1,
            FeatureGroup::Joints123,
            Some(cfg.model.clone()),
            Some(cfg.true_loss.clone()),
            &[&log],
            &spec,
        )
        .unwrap();
        let p2 = HybridModel {
            composition: Composition::P2,
            group: FeatureGroup::Joints123,
            window: 1,
            physics: Some(cfg.model.clone()),
            loss: Some(cfg.true_loss.clone()),
            trees: None,
            normalization: None,
        };
        let h1_parts = h1.predict_log_parts(&log).unwrap();
        let p2_preds = p2.predict_log(&log).unwrap();
        let offset = h1.start_row();
        for (i, parts) in h1_parts.iter().enumerate() {
            let p2_pred = &p2_preds[offset + i];
            for c in 0..3 {
                assert!(
                    parts.physics[c] == p2_pred[c],
                    "H1 physics part must equal P2 bit for bit"
                );
            }
        }
    }

    #[test]
    fn h1_beats_p2_on_a_residual_heavy_plant() {
        let mut cfg = plant_config();
        cfg.residual.stribeck_magnitude = vec![1.2, 0.9, 0.6];
        cfg.residual.ripple_magnitude = vec![0.5, 0.4, 0.3];
        cfg.residual.ripple_harmonic = vec![9.0, 7.0, 11.0];
        cfg.residual.coulomb_asymmetry = vec![0.3, 0.25, 0.2];
        let train_log = simulate_tracking(&cfg, &reference(&cfg, 0.0), None, 4).unwrap();
        let test_log = simulate_tracking(&cfg, &reference(&cfg, 0.15), None, 5).unwrap();
        let spec = TrainSpec {
            params: quick_params(),
            ..TrainSpec::default()
        };
        let h1 = train_hybrid(
            Composition::H1,
            FeatureGroup::Joints123,
            Some(cfg.model.clone()),
            Some(cfg.true_loss.clone()),
            &[&train_log],
            &spec,
        )
        .unwrap();
        let p2 = HybridModel {
            composition: Composition::P2,
            group: FeatureGroup::Joints123,
            window: 1,
            physics: Some(cfg.model.clone()),
            loss: Some(cfg.true_loss.clone()),
            trees: None,
            normalization: None,
        };
        let reports = evaluate_models(&[("P2", &p2), ("H1", &h1)], &[&test_log]).unwrap();
        assert!(
            reports[1].stats.mean < reports[0].stats.mean,
            "H1 {} should beat P2 {}",
            reports[1].stats.mean,
            reports[0].stats.mean
        );
        // A single trajectory yields degenerate stats.
        assert_eq!(reports[0].stats.std, 0.0);
        assert_eq!(reports[0].stats.mean, reports[0].stats.max);
    }

    #[test]
    fn json_round_trip_reproduces_predictions() {
        let mut cfg = plant_config();
        cfg.residual.stribeck_magnitude = vec![0.6, 0.5, 0.4];
        let log = simulate_tracking(&cfg, &reference(&cfg, 0.0), None, 6).unwrap();
        let spec = TrainSpec {
            normalize: true,
            params: quick_params(),
            ..TrainSpec::default()
        };
        let h2 = train_hybrid(
            Composition::H2,
            FeatureGroup::Joints123,
            Some(cfg.model.clone()),
            None,
            &[&log],
            &spec,
        )
        .unwrap();
        let text = h2.to_json().unwrap();
        let back = HybridModel::from_json(&text, Some(cfg.model.clone())).unwrap();
        let a = h2.predict_log(&log).unwrap();
        let b = back.predict_log(&log).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for c in 0..3 {
                assert!((x[c] - y[c]).abs() < 1e-12);
            }
        }
        // Loading a physics-bearing composition without a model fails.
        assert!(HybridModel::from_json(&text, None).is_err());
    }

    #[test]
    fn joint4_group_trains_and_predicts() {
        let model6 = RobotModel::bundled_6dof();
        let loss6 = LossParams {
            b_m: vec![0.15, 0.2, 0.12, 0.05, 0.05, 0.02],
            c_m: vec![4.0, 5.5, 3.5, 1.2, 1.0, 0.6],
            f_c: vec![2.5, 3.5, 2.2, 0.8, 0.7, 0.4],
        };
        let mut cfg = PlantConfig::new(model6, loss6);
        cfg.residual.stribeck_magnitude = vec![0.0, 0.0, 0.0, 0.4, 0.3, 0.0];
        let mut traj = SampledTrajectory::new(cfg.sample_period);
        traj.append_segment(
            &QuinticSegment::new(
                DVector::from_column_slice(&[0.2, -0.4, 0.5, -0.8, 0.4, 0.3]),
                DVector::from_column_slice(&[-0.5, 0.3, 0.9, 0.9, -0.6, -0.9]),
                1.4,
            )
            .unwrap(),
        );
        let log = simulate_tracking(&cfg, &traj, None, 8).unwrap();
        let spec = TrainSpec {
            params: quick_params(),
            ..TrainSpec::default()
        };
        let h1 = train_hybrid(
            Composition::H1,
            FeatureGroup::Joint4,
            Some(cfg.model.clone()),
            Some(cfg.true_loss.clone()),
            &[&log],
            &spec,
        )
        .unwrap();
        let preds = h1.predict_log(&log).unwrap();
        assert_eq!(preds[0].len(), 1);
        let report = evaluate_models(&[("H1", &h1)], &[&log]).unwrap();
        assert!(report[0].stats.mean < 0.5, "joint 4 residual largely learned");
    }
}
