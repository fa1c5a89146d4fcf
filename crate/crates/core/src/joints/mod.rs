//! Calibrated per-family joint models.
//!
//! A [`JointFamilyModel`] predicts the bending force `F_b(θ[, T])` and the
//! return angle `θ_r(θ[, T])` of one joint geometry. Published coefficients
//! exist for the curve and symmetric square-wave families; everything else is
//! fitted from bench data.

mod envelope;
mod poly;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FamilyKind, JointDataset, MeasurementSample};
use crate::gpr::{
    self, fit, log_space, tune_hyperparams, BetaMode, FittedGp, GprError, GridSpec,
    KernelHyperParams,
};

pub use envelope::{
    envelope_for, envelope_table, EnvelopeRow, EnvelopeTable, JointEnvelope,
    ENVELOPE_TABLE_VERSION, THIN_CURVE_MAX_MM,
};
pub use poly::{fit_poly, poly_loo_rmse, PolyModel, PolySolve, NORMAL_EQUATIONS_MAX_CONDITION};

/// Angle window over which the curve-family regression is trusted, degrees.
pub const CURVE_VALIDATED_WINDOW_DEG: (f64, f64) = (30.0, 150.0);

/// Fewest samples `fit_family_model` accepts.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Published square-wave coefficients over `[1, θ, θ²]`.
pub const SQUARE_SYM_BETA: [f64; 3] = [1.6940, 0.0225, -0.0002];
/// Published square-wave residual scale.
pub const SQUARE_SYM_EPSILON: f64 = 0.2916;
/// Published curve coefficients over `[1, θ, T, θ², T²]`.
pub const CURVE_BETA: [f64; 5] = [-2.4933, 0.1164, 0.0, -0.0007, 8.4377];
/// Published curve residual scale.
pub const CURVE_EPSILON: f64 = 1.9272;

pub const DEFAULT_LENGTH_SCALE_ANGLE_DEG: f64 = 20.0;
pub const DEFAULT_LENGTH_SCALE_THICKNESS_MM: f64 = 0.4;
/// Noise variance used with default hyperparameters, as a fraction of the
/// target sample variance.
pub const DEFAULT_NOISE_FRACTION: f64 = 0.01;

/// Full recovery: the joint returned to flat.
pub const FULL_RECOVERY_DEG: f64 = 180.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JointModelError {
    #[error("no published model for {0}; fit one from data")]
    NoPublishedModel(FamilyKind),
    #[error("θ = {angle_deg}° is outside the validated window [{lo}°, {hi}°]")]
    OutOfValidatedRange { angle_deg: f64, lo: f64, hi: f64 },
    #[error("curve joints need a thickness")]
    MissingThickness,
    #[error("{0} joints take no thickness")]
    UnexpectedThickness(FamilyKind),
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("polynomial system is ill-conditioned")]
    IllConditioned,
    #[error("model has no return-angle predictor")]
    NoReturnModel,
    #[error("model input dimension {got} does not match {family} (expected {expected})")]
    FamilyMismatch {
        family: FamilyKind,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Gpr(#[from] GprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Published,
    Fitted,
}

/// Leave-one-out RMSE of the two predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub force_rmse_n: f64,
    pub return_rmse_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointFamilyModel {
    kind: FamilyKind,
    source: ModelSource,
    force_model: FittedGp,
    return_model: Option<FittedGp>,
    loo: Option<LooSummary>,
}

/// What to do with curve queries outside the validated window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangePolicy {
    #[default]
    Strict,
    AllowExtrapolation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PredictionFlags {
    /// Query lies outside the angles the model was validated or trained on.
    pub extrapolated: bool,
    /// Near rest, yet the model predicts a non-vanishing force at θ = 0.
    pub nonzero_rest_force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForcePrediction {
    pub force_n: f64,
    /// Latent variance, N².
    pub variance: f64,
    /// Measurement noise variance of the model, N².
    pub noise_variance: f64,
    pub flags: PredictionFlags,
}

impl ForcePrediction {
    /// Standard deviation of a new measurement: latent plus noise.
    pub fn predictive_std(&self) -> f64 {
        (self.variance + self.noise_variance).sqrt()
    }
}

/// Model inputs for one query: `[θ]` or `[θ, T]`.
fn query_point(
    kind: FamilyKind,
    theta: f64,
    thickness: Option<f64>,
) -> Result<Vec<f64>, JointModelError> {
    match (kind, thickness) {
        (FamilyKind::Curve, Some(t)) => Ok(vec![theta, t]),
        (FamilyKind::Curve, None) => Err(JointModelError::MissingThickness),
        (_, None) => Ok(vec![theta]),
        (k, Some(_)) => Err(JointModelError::UnexpectedThickness(k)),
    }
}

fn sample_point(s: &MeasurementSample) -> Vec<f64> {
    match s.family.thickness_mm() {
        Some(t) if s.family.kind() == FamilyKind::Curve => vec![s.deformation_angle_deg, t],
        _ => vec![s.deformation_angle_deg],
    }
}

/// The published model for `kind`, evaluating `h(x)ᵀβ` with no training
/// residuals. Only the force predictor is published.
pub fn builtin_model(kind: FamilyKind) -> Result<JointFamilyModel, JointModelError> {
    let (beta, eps, scales) = match kind {
        FamilyKind::SquareWaveSymmetric => (
            SQUARE_SYM_BETA.to_vec(),
            SQUARE_SYM_EPSILON,
            vec![DEFAULT_LENGTH_SCALE_ANGLE_DEG],
        ),
        FamilyKind::Curve => (
            CURVE_BETA.to_vec(),
            CURVE_EPSILON,
            vec![
                DEFAULT_LENGTH_SCALE_ANGLE_DEG,
                DEFAULT_LENGTH_SCALE_THICKNESS_MM,
            ],
        ),
        other => return Err(JointModelError::NoPublishedModel(other)),
    };
    // No kernel amplitude was published; the residual process is switched off.
    let hyper = KernelHyperParams::new(0.0, scales)?;
    let force_model = FittedGp::prior_only(beta, hyper, eps * eps)?;
    Ok(JointFamilyModel {
        kind,
        source: ModelSource::Published,
        force_model,
        return_model: None,
        loo: None,
    })
}

impl JointFamilyModel {
    /// Assemble a model from already-trained predictors.
    pub fn from_parts(
        kind: FamilyKind,
        source: ModelSource,
        force_model: FittedGp,
        return_model: Option<FittedGp>,
        loo: Option<LooSummary>,
    ) -> Result<Self, JointModelError> {
        let expected = kind.input_dim();
        for m in std::iter::once(&force_model).chain(return_model.as_ref()) {
            if m.input_dim() != expected {
                return Err(JointModelError::FamilyMismatch {
                    family: kind,
                    expected,
                    got: m.input_dim(),
                });
            }
        }
        Ok(Self {
            kind,
            source,
            force_model,
            return_model,
            loo,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn source(&self) -> ModelSource {
        self.source
    }

    pub fn force_model(&self) -> &FittedGp {
        &self.force_model
    }

    pub fn return_model(&self) -> Option<&FittedGp> {
        self.return_model.as_ref()
    }

    pub fn loo(&self) -> Option<LooSummary> {
        self.loo
    }

    /// Angles the predictions are trusted over: the published window for
    /// curves and published models, the training span otherwise.
    pub fn validated_window(&self) -> (f64, f64) {
        if self.kind == FamilyKind::Curve || self.force_model.n_train() == 0 {
            return CURVE_VALIDATED_WINDOW_DEG;
        }
        let angles = self.force_model.train_x().column(0);
        (angles.min(), angles.max())
    }

    fn check_range(&self, theta: f64, policy: RangePolicy) -> Result<bool, JointModelError> {
        let (lo, hi) = self.validated_window();
        let outside = theta < lo || theta > hi;
        if outside && self.kind == FamilyKind::Curve && policy == RangePolicy::Strict {
            return Err(JointModelError::OutOfValidatedRange {
                angle_deg: theta,
                lo,
                hi,
            });
        }
        Ok(outside)
    }

    pub fn predict_force(
        &self,
        theta_deg: f64,
        thickness_mm: Option<f64>,
    ) -> Result<ForcePrediction, JointModelError> {
        self.predict_force_with(theta_deg, thickness_mm, RangePolicy::Strict)
    }

    pub fn predict_force_with(
        &self,
        theta_deg: f64,
        thickness_mm: Option<f64>,
        policy: RangePolicy,
    ) -> Result<ForcePrediction, JointModelError> {
        let x = query_point(self.kind, theta_deg, thickness_mm)?;
        let extrapolated = self.check_range(theta_deg, policy)?;
        let p = self.force_model.predict(&x)?;
        let nonzero_rest_force = theta_deg < CURVE_VALIDATED_WINDOW_DEG.0 && {
            let mut rest = x.clone();
            rest[0] = 0.0;
            self.force_model.predict(&rest)?.mean.abs() > 1e-6
        };
        Ok(ForcePrediction {
            force_n: p.mean,
            variance: p.variance,
            noise_variance: self.force_model.noise_variance(),
            flags: PredictionFlags {
                extrapolated,
                nonzero_rest_force,
            },
        })
    }

    /// Predicted return angle in degrees, clamped to `[0, 180]`. Zero
    /// deformation always recovers fully.
    pub fn predict_return_angle(
        &self,
        theta_deg: f64,
        thickness_mm: Option<f64>,
    ) -> Result<f64, JointModelError> {
        self.predict_return_angle_with(theta_deg, thickness_mm, RangePolicy::Strict)
    }

    pub fn predict_return_angle_with(
        &self,
        theta_deg: f64,
        thickness_mm: Option<f64>,
        policy: RangePolicy,
    ) -> Result<f64, JointModelError> {
        let x = query_point(self.kind, theta_deg, thickness_mm)?;
        if theta_deg == 0.0 {
            return Ok(FULL_RECOVERY_DEG);
        }
        self.check_range(theta_deg, policy)?;
        let model = self
            .return_model
            .as_ref()
            .ok_or(JointModelError::NoReturnModel)?;
        Ok(model.predict(&x)?.mean.clamp(0.0, FULL_RECOVERY_DEG))
    }
}

/// How kernel hyperparameters are chosen when fitting a family.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum HyperChoice {
    /// Grid search over a grid scaled to the data.
    #[default]
    Tune,
    /// Grid search over the given grid.
    TuneGrid(GridSpec),
    /// Length scales 20° (and 0.4 mm), signal variance = target variance.
    Defaults,
    Fixed {
        hyper: KernelHyperParams,
        noise_variance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GprConfig {
    pub hyper: HyperChoice,
}

fn sample_variance(y: &DVector<f64>) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean = y.mean();
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Variance floor so that constant targets still give a usable grid.
const VARIANCE_FLOOR: f64 = 1e-6;

/// Grid scaled to the spread of the targets and the default length scales.
pub fn default_grid(dim: usize, y: &DVector<f64>) -> GridSpec {
    let var = sample_variance(y).max(VARIANCE_FLOOR);
    let mut length_scales = vec![log_space(5.0, 160.0, 7)];
    if dim == 2 {
        length_scales.push(log_space(0.2, 3.2, 4));
    }
    GridSpec {
        signal_variances: log_space(1e-3, 10.0, 7)
            .into_iter()
            .map(|s| s * var)
            .collect(),
        length_scales,
        noise_variances: log_space(1e-5, 1.0, 9)
            .into_iter()
            .map(|s| s * var)
            .collect(),
    }
}

fn default_hyper(dim: usize, y: &DVector<f64>) -> Result<(KernelHyperParams, f64), GprError> {
    let var = sample_variance(y).max(VARIANCE_FLOOR);
    let mut scales = vec![DEFAULT_LENGTH_SCALE_ANGLE_DEG];
    if dim == 2 {
        scales.push(DEFAULT_LENGTH_SCALE_THICKNESS_MM);
    }
    Ok((
        KernelHyperParams::new(var, scales)?,
        DEFAULT_NOISE_FRACTION * var,
    ))
}

/// Choose hyperparameters for `(x, y)` according to `choice`.
pub fn select_hyper(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    choice: &HyperChoice,
) -> Result<(KernelHyperParams, f64), GprError> {
    match choice {
        HyperChoice::Tune => {
            let t = tune_hyperparams(x, y, &default_grid(x.ncols(), y))?;
            Ok((t.hyper, t.noise_variance))
        }
        HyperChoice::TuneGrid(grid) => {
            let t = tune_hyperparams(x, y, grid)?;
            Ok((t.hyper, t.noise_variance))
        }
        HyperChoice::Defaults => default_hyper(x.ncols(), y),
        HyperChoice::Fixed {
            hyper,
            noise_variance,
        } => Ok((hyper.clone(), *noise_variance)),
    }
}

/// Leave-one-out RMSE of a GLS-mean GP with fixed hyperparameters.
pub fn gp_loo_rmse(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    hyper: &KernelHyperParams,
    noise_variance: f64,
) -> Result<f64, GprError> {
    let n = x.nrows();
    let mut sq = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let xi = x.select_rows(&keep);
        let yi = y.select_rows(&keep);
        let m = fit(&xi, &yi, hyper, noise_variance, BetaMode::EstimateGls)?;
        let query: Vec<f64> = x.row(i).iter().copied().collect();
        let e = m.predict(&query)?.mean - y[i];
        sq += e * e;
    }
    Ok((sq / n as f64).sqrt())
}

fn fit_target(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    config: &GprConfig,
) -> Result<(FittedGp, f64), GprError> {
    let (hyper, noise) = select_hyper(x, y, &config.hyper)?;
    let model = fit(x, y, &hyper, noise, BetaMode::EstimateGls)?;
    let loo = gp_loo_rmse(x, y, &hyper, noise)?;
    Ok((model, loo))
}

/// Training inputs and the two targets (force, return angle) for `kind`.
pub fn training_set(
    ds: &JointDataset,
    kind: FamilyKind,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let samples: Vec<&MeasurementSample> = ds.of_kind(kind).collect();
    let d = kind.input_dim();
    let rows: Vec<f64> = samples.iter().flat_map(|s| sample_point(s)).collect();
    let x = DMatrix::from_row_slice(samples.len(), d, &rows);
    let force = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.force_n));
    let ret = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.return_angle_deg));
    (x, force, ret)
}

/// Fit force and return-angle predictors for one family from bench data.
/// Forward and reverse readings are pooled.
pub fn fit_family_model(
    ds: &JointDataset,
    kind: FamilyKind,
    config: &GprConfig,
) -> Result<JointFamilyModel, JointModelError> {
    let (x, force, ret) = training_set(ds, kind);
    if x.nrows() < MIN_FIT_SAMPLES {
        return Err(JointModelError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: x.nrows(),
        });
    }
    let (force_model, force_rmse_n) = fit_target(&x, &force, config)?;
    let (return_model, return_rmse_deg) = fit_target(&x, &ret, config)?;
    JointFamilyModel::from_parts(
        kind,
        ModelSource::Fitted,
        force_model,
        Some(return_model),
        Some(LooSummary {
            force_rmse_n,
            return_rmse_deg,
        }),
    )
}

/// Polynomial baseline of force against angle. Curve joints are fitted at
/// one thickness, `thickness_mm`.
pub fn fit_poly_baseline(
    ds: &JointDataset,
    kind: FamilyKind,
    thickness_mm: Option<f64>,
    degree: usize,
) -> Result<PolyModel, JointModelError> {
    let (theta, force) = poly_series(ds, kind, thickness_mm)?;
    fit_poly(&theta, &force, degree)
}

/// `(θ, F_b)` pairs of one family at one thickness.
pub fn poly_series(
    ds: &JointDataset,
    kind: FamilyKind,
    thickness_mm: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>), JointModelError> {
    match (kind, thickness_mm) {
        (FamilyKind::Curve, None) => return Err(JointModelError::MissingThickness),
        (FamilyKind::Curve, Some(_)) | (_, None) => {}
        (k, Some(_)) => return Err(JointModelError::UnexpectedThickness(k)),
    }
    Ok(ds
        .of_kind(kind)
        .filter(|s| match thickness_mm {
            Some(t) => s
                .family
                .thickness_mm()
                .is_some_and(|st| (st - t).abs() < 1e-9),
            None => true,
        })
        .map(|s| (s.deformation_angle_deg, s.force_n))
        .unzip())
}

/// Distinct curve thicknesses present in the dataset, ascending.
pub fn thicknesses(ds: &JointDataset, kind: FamilyKind) -> Vec<f64> {
    let mut t: Vec<f64> = ds
        .of_kind(kind)
        .filter_map(|s| s.family.thickness_mm())
        .collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Evaluate `h(x)ᵀβ` for a published family directly from the constants.
pub fn published_mean(
    kind: FamilyKind,
    theta: f64,
    thickness: Option<f64>,
) -> Result<f64, JointModelError> {
    let x = query_point(kind, theta, thickness)?;
    let beta: &[f64] = match kind {
        FamilyKind::SquareWaveSymmetric => &SQUARE_SYM_BETA,
        FamilyKind::Curve => &CURVE_BETA,
        other => return Err(JointModelError::NoPublishedModel(other)),
    };
    Ok(gpr::basis_expand(&x)?
        .iter()
        .zip(beta)
        .map(|(h, b)| h * b)
        .sum())
}
