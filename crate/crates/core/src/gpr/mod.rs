//! Gaussian-process regression with an explicit polynomial mean.
//!
//! The model is `y = h(x)ᵀβ + f(x) + ε`, where `h(x) = [1, x₁..x_d, x₁²..x_d²]`
//! is the pure-quadratic basis, `f ~ GP(0, k)` with a squared-exponential
//! kernel, and `ε ~ N(0, σ²)`. All solves go through a Cholesky factor of
//! `K + σ²I`; nothing is ever inverted explicitly.

pub(crate) mod linalg;
mod tune;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tune::{log_space, tune_hyperparams, GridSpec, TunedHyperParams};

use linalg::{cholesky_lower, cholesky_solve, solve_lower};

/// Diagonal jitter added on the single retry after a failed factorization.
pub const JITTER: f64 = 1e-8;

/// Largest input dimension the quadratic basis supports.
pub const MAX_INPUT_DIM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GprError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis supports 1 or 2 input dimensions, got {0}")]
    UnsupportedDimension(usize),
    #[error("kernel matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("basis columns are linearly dependent on the training inputs")]
    DegenerateBasis,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperParams {
    signal_variance: f64,
    length_scales: Vec<f64>,
}

impl KernelHyperParams {
    pub fn new(signal_variance: f64, length_scales: Vec<f64>) -> Result<Self, GprError> {
        if !(signal_variance >= 0.0 && signal_variance.is_finite()) {
            return Err(GprError::InvalidHyperParams(format!(
                "signal variance must be non-negative, got {signal_variance}"
            )));
        }
        if length_scales.is_empty() {
            return Err(GprError::InvalidHyperParams("no length scales".into()));
        }
        if let Some(bad) = length_scales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(GprError::InvalidHyperParams(format!(
                "length scales must be positive, got {bad}"
            )));
        }
        Ok(Self {
            signal_variance,
            length_scales,
        })
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }
}

/// `σ_f² · exp(−½ Σ ((a_j − b_j)/ℓ_j)²)`.
pub fn kernel_se(a: &[f64], b: &[f64], h: &KernelHyperParams) -> Result<f64, GprError> {
    let d = h.dim();
    for len in [a.len(), b.len()] {
        if len != d {
            return Err(GprError::DimensionMismatch {
                expected: d,
                got: len,
            });
        }
    }
    Ok(kernel_unchecked(a, b, h))
}

#[inline]
fn kernel_unchecked(a: &[f64], b: &[f64], h: &KernelHyperParams) -> f64 {
    let r2: f64 = a
        .iter()
        .zip(b)
        .zip(&h.length_scales)
        .map(|((ai, bi), l)| {
            let z = (ai - bi) / l;
            z * z
        })
        .sum();
    h.signal_variance * (-0.5 * r2).exp()
}

/// Number of basis terms for a `d`-dimensional input.
pub fn basis_len(d: usize) -> usize {
    2 * d + 1
}

/// `[1, x₁..x_d, x₁²..x_d²]`.
pub fn basis_expand(x: &[f64]) -> Result<Vec<f64>, GprError> {
    let d = x.len();
    if d == 0 || d > MAX_INPUT_DIM {
        return Err(GprError::UnsupportedDimension(d));
    }
    let mut h = Vec::with_capacity(basis_len(d));
    h.push(1.0);
    h.extend_from_slice(x);
    h.extend(x.iter().map(|v| v * v));
    Ok(h)
}

/// `H` with one basis row per training input.
pub fn design_matrix(x: &DMatrix<f64>) -> Result<DMatrix<f64>, GprError> {
    let d = x.ncols();
    if d == 0 || d > MAX_INPUT_DIM {
        return Err(GprError::UnsupportedDimension(d));
    }
    let p = basis_len(d);
    Ok(DMatrix::from_fn(x.nrows(), p, |i, j| match j {
        0 => 1.0,
        j if j <= d => x[(i, j - 1)],
        j => x[(i, j - 1 - d)] * x[(i, j - 1 - d)],
    }))
}

fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// `K + σ²I` on the training inputs.
pub fn kernel_matrix(x: &DMatrix<f64>, h: &KernelHyperParams, noise_variance: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_unchecked(&rows[i], &rows[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise_variance;
    }
    k
}

/// How the basis coefficients are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaMode {
    /// Generalized least squares under the GP covariance.
    EstimateGls,
    /// Use the given coefficients as-is.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    /// Posterior variance of the latent function, excluding `σ²`.
    pub variance: f64,
}

/// A trained model. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedGp {
    beta: DVector<f64>,
    noise_variance: f64,
    hyper: KernelHyperParams,
    train_x: DMatrix<f64>,
    train_y: DVector<f64>,
    chol_factor: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

fn validate_inputs(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    h: &KernelHyperParams,
    noise_variance: f64,
) -> Result<(), GprError> {
    if x.nrows() == 0 {
        return Err(GprError::EmptyTrainingSet);
    }
    if x.nrows() != y.len() {
        return Err(GprError::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.ncols() != h.dim() {
        return Err(GprError::DimensionMismatch {
            expected: h.dim(),
            got: x.ncols(),
        });
    }
    if x.ncols() > MAX_INPUT_DIM {
        return Err(GprError::UnsupportedDimension(x.ncols()));
    }
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(GprError::InvalidHyperParams(format!(
            "noise variance must be non-negative, got {noise_variance}"
        )));
    }
    Ok(())
}

fn has_duplicate_rows(x: &DMatrix<f64>) -> bool {
    let n = x.nrows();
    (0..n).any(|i| (0..i).any(|j| x.row(i) == x.row(j)))
}

/// Factor `K + σ²I`, retrying once with diagonal jitter.
fn factorize(
    x: &DMatrix<f64>,
    h: &KernelHyperParams,
    noise_variance: f64,
) -> Result<(DMatrix<f64>, f64), GprError> {
    // Exact duplicates without noise make K singular; jitter would mask it.
    if noise_variance == 0.0 && has_duplicate_rows(x) {
        return Err(GprError::NotPositiveDefinite);
    }
    let mut a = kernel_matrix(x, h, noise_variance);
    if let Some(l) = cholesky_lower(&a) {
        return Ok((l, 0.0));
    }
    for i in 0..a.nrows() {
        a[(i, i)] += JITTER;
    }
    cholesky_lower(&a)
        .map(|l| (l, JITTER))
        .ok_or(GprError::NotPositiveDefinite)
}

/// GLS estimate `β = (Hᵀ A⁻¹ H)⁻¹ Hᵀ A⁻¹ y` given `A = L Lᵀ`.
fn gls_beta(
    chol: &DMatrix<f64>,
    hmat: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<DVector<f64>, GprError> {
    let p = hmat.ncols();
    // A⁻¹H column by column.
    let mut ainv_h = DMatrix::<f64>::zeros(hmat.nrows(), p);
    for j in 0..p {
        let col = cholesky_solve(chol, &hmat.column(j).into_owned());
        ainv_h.set_column(j, &col);
    }
    let m = hmat.transpose() * &ainv_h;
    let rhs = ainv_h.transpose() * y;

    // Equilibrate: the quadratic columns can be orders of magnitude larger
    // than the intercept column.
    let scale: Vec<f64> = (0..p).map(|j| m[(j, j)].sqrt()).collect();
    if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(GprError::DegenerateBasis);
    }
    let m_scaled = DMatrix::from_fn(p, p, |i, j| m[(i, j)] / (scale[i] * scale[j]));
    let rhs_scaled = DVector::from_fn(p, |i, _| rhs[i] / scale[i]);
    let lm = cholesky_lower(&m_scaled).ok_or(GprError::DegenerateBasis)?;
    // Reject near-collinear bases whose factor is numerically rank deficient.
    let (dmin, dmax) = (0..p).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        (lo.min(lm[(i, i)]), hi.max(lm[(i, i)]))
    });
    if dmin < 1e-7 * dmax {
        return Err(GprError::DegenerateBasis);
    }
    let z = cholesky_solve(&lm, &rhs_scaled);
    Ok(DVector::from_fn(p, |i, _| z[i] / scale[i]))
}

/// Train a model on inputs `x` (one row per point) and targets `y`.
pub fn fit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    h: &KernelHyperParams,
    noise_variance: f64,
    beta_mode: BetaMode,
) -> Result<FittedGp, GprError> {
    validate_inputs(x, y, h, noise_variance)?;
    let hmat = design_matrix(x)?;
    let (chol_factor, jitter) = factorize(x, h, noise_variance)?;
    let beta = match beta_mode {
        BetaMode::Fixed(b) => {
            if b.len() != hmat.ncols() {
                return Err(GprError::DimensionMismatch {
                    expected: hmat.ncols(),
                    got: b.len(),
                });
            }
            DVector::from_vec(b)
        }
        BetaMode::EstimateGls => gls_beta(&chol_factor, &hmat, y)?,
    };
    let residual = y - &hmat * &beta;
    let alpha = cholesky_solve(&chol_factor, &residual);
    Ok(FittedGp {
        beta,
        noise_variance,
        hyper: h.clone(),
        train_x: x.clone(),
        train_y: y.clone(),
        chol_factor,
        alpha,
        jitter,
    })
}

impl FittedGp {
    /// A model with no training data: predictions are the basis mean with
    /// prior variance `σ_f²`.
    pub fn prior_only(
        beta: Vec<f64>,
        hyper: KernelHyperParams,
        noise_variance: f64,
    ) -> Result<Self, GprError> {
        let d = hyper.dim();
        if d > MAX_INPUT_DIM {
            return Err(GprError::UnsupportedDimension(d));
        }
        if beta.len() != basis_len(d) {
            return Err(GprError::DimensionMismatch {
                expected: basis_len(d),
                got: beta.len(),
            });
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(GprError::InvalidHyperParams(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self {
            beta: DVector::from_vec(beta),
            noise_variance,
            hyper,
            train_x: DMatrix::zeros(0, d),
            train_y: DVector::zeros(0),
            chol_factor: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        })
    }

    pub fn beta(&self) -> &[f64] {
        self.beta.as_slice()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn hyper(&self) -> &KernelHyperParams {
        &self.hyper
    }

    pub fn train_x(&self) -> &DMatrix<f64> {
        &self.train_x
    }

    pub fn train_y(&self) -> &DVector<f64> {
        &self.train_y
    }

    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol_factor
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter that was needed to factorize, 0 if none.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn input_dim(&self) -> usize {
        self.hyper.dim()
    }

    pub fn n_train(&self) -> usize {
        self.train_y.len()
    }

    /// `h(x)ᵀβ` alone.
    pub fn prior_mean(&self, x_star: &[f64]) -> Result<f64, GprError> {
        self.check_dim(x_star)?;
        let h = basis_expand(x_star)?;
        Ok(h.iter().zip(self.beta.iter()).map(|(a, b)| a * b).sum())
    }

    fn check_dim(&self, x_star: &[f64]) -> Result<(), GprError> {
        if x_star.len() != self.input_dim() {
            return Err(GprError::DimensionMismatch {
                expected: self.input_dim(),
                got: x_star.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x_star: &[f64]) -> Result<Prediction, GprError> {
        let prior = self.prior_mean(x_star)?;
        let n = self.n_train();
        let k_star = DVector::from_fn(n, |i, _| {
            let xi: Vec<f64> = self.train_x.row(i).iter().copied().collect();
            kernel_unchecked(&xi, x_star, &self.hyper)
        });
        let mean = prior + k_star.dot(&self.alpha);
        let v = solve_lower(&self.chol_factor, &k_star);
        let variance = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        Ok(Prediction { mean, variance })
    }

    /// Log marginal likelihood of the training targets under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let hmat = design_matrix(&self.train_x).expect("dimension checked at fit");
        let residual = &self.train_y - hmat * &self.beta;
        lml_from_factor(&self.chol_factor, &residual)
    }
}

fn lml_from_factor(chol: &DMatrix<f64>, residual: &DVector<f64>) -> f64 {
    let n = residual.len() as f64;
    let z = solve_lower(chol, residual);
    let log_det_half: f64 = chol.diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * z.dot(&z) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// `−½ rᵀA⁻¹r − ½ log|A| − (n/2) log 2π` with `A = K + σ²I`, `r = y − Hβ`.
pub fn log_marginal_likelihood(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    h: &KernelHyperParams,
    noise_variance: f64,
    beta: &[f64],
) -> Result<f64, GprError> {
    validate_inputs(x, y, h, noise_variance)?;
    let hmat = design_matrix(x)?;
    if beta.len() != hmat.ncols() {
        return Err(GprError::DimensionMismatch {
            expected: hmat.ncols(),
            got: beta.len(),
        });
    }
    let (chol, _) = factorize(x, h, noise_variance)?;
    let residual = y - hmat * DVector::from_column_slice(beta);
    Ok(lml_from_factor(&chol, &residual))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(sf2: f64, ls: &[f64]) -> KernelHyperParams {
        KernelHyperParams::new(sf2, ls.to_vec()).unwrap()
    }

    #[test]
    fn kernel_at_same_point_is_signal_variance() {
        assert_eq!(kernel_se(&[90.0], &[90.0], &hp(1.0, &[20.0])).unwrap(), 1.0);
        assert_eq!(
            kernel_se(&[1.0, 2.0], &[1.0, 2.0], &hp(2.5, &[1.0, 3.0])).unwrap(),
            2.5
        );
    }

    #[test]
    fn kernel_unit_distance() {
        let k = kernel_se(&[0.0], &[1.0], &hp(1.0, &[1.0])).unwrap();
        assert!((k - 0.606_530_659_712_633_4).abs() < 1e-15);
    }

    #[test]
    fn kernel_dimension_mismatch() {
        assert_eq!(
            kernel_se(&[0.0, 1.0], &[1.0], &hp(1.0, &[1.0, 1.0])),
            Err(GprError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn hyperparams_validate() {
        assert!(KernelHyperParams::new(-1.0, vec![1.0]).is_err());
        assert!(KernelHyperParams::new(1.0, vec![0.0]).is_err());
        assert!(KernelHyperParams::new(1.0, vec![]).is_err());
        assert!(KernelHyperParams::new(0.0, vec![1.0]).is_ok());
    }

    #[test]
    fn basis_terms() {
        assert_eq!(basis_expand(&[90.0]).unwrap(), vec![1.0, 90.0, 8100.0]);
        let b = basis_expand(&[90.0, 0.4]).unwrap();
        assert_eq!(b[..4], [1.0, 90.0, 0.4, 8100.0]);
        assert!((b[4] - 0.16).abs() < 1e-15);
        assert_eq!(basis_expand(&[0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(
            basis_expand(&[1.0, 2.0, 3.0]),
            Err(GprError::UnsupportedDimension(3))
        );
    }

    #[test]
    fn design_matrix_matches_basis_rows() {
        let x = DMatrix::from_row_slice(2, 2, &[90.0, 0.4, 30.0, 1.2]);
        let h = design_matrix(&x).unwrap();
        for i in 0..2 {
            let expect = basis_expand(&[x[(i, 0)], x[(i, 1)]]).unwrap();
            let got: Vec<f64> = h.row(i).iter().copied().collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn single_point_interpolates() {
        let x = DMatrix::from_row_slice(1, 1, &[3.0]);
        let y = DVector::from_vec(vec![1.7]);
        let m = fit(&x, &y, &hp(1.0, &[1.0]), 0.0, BetaMode::Fixed(vec![0.0; 3])).unwrap();
        assert!((m.predict(&[3.0]).unwrap().mean - 1.7).abs() < 1e-12);
        assert!(m.predict(&[3.0]).unwrap().variance < 1e-12);
    }

    #[test]
    fn duplicate_rows_without_noise_fail() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 1.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 0.5]);
        assert_eq!(
            fit(&x, &y, &hp(1.0, &[1.0]), 0.0, BetaMode::Fixed(vec![0.0; 3])),
            Err(GprError::NotPositiveDefinite)
        );
        // With noise the same data is fine.
        assert!(fit(&x, &y, &hp(1.0, &[1.0]), 0.1, BetaMode::Fixed(vec![0.0; 3])).is_ok());
    }

    #[test]
    fn near_duplicates_fall_back_to_jitter() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 1.0 + 1e-9]);
        let y = DVector::from_vec(vec![0.0, 0.0]);
        let m = fit(&x, &y, &hp(1.0, &[1.0]), 0.0, BetaMode::Fixed(vec![0.0; 3])).unwrap();
        assert_eq!(m.jitter(), JITTER);
    }

    #[test]
    fn fixed_beta_length_checked() {
        let x = DMatrix::from_row_slice(1, 1, &[3.0]);
        let y = DVector::from_vec(vec![1.7]);
        assert_eq!(
            fit(&x, &y, &hp(1.0, &[1.0]), 0.0, BetaMode::Fixed(vec![0.0; 2])),
            Err(GprError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn predict_dimension_checked() {
        let m = FittedGp::prior_only(vec![1.0, 0.0, 0.0], hp(1.0, &[1.0]), 0.0).unwrap();
        assert!(matches!(
            m.predict(&[1.0, 2.0]),
            Err(GprError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn prior_only_returns_basis_mean() {
        let m = FittedGp::prior_only(vec![1.694, 0.0225, -0.0002], hp(0.5, &[20.0]), 0.0).unwrap();
        let p = m.predict(&[90.0]).unwrap();
        assert!((p.mean - 2.099).abs() < 1e-12);
        assert_eq!(p.variance, 0.5);
    }

    #[test]
    fn lml_single_point_closed_form() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DVector::from_vec(vec![2.0]);
        // K + σ²I = [1], residual y − Hβ = 2 − 2 = 0.
        let v = log_marginal_likelihood(&x, &y, &hp(0.75, &[1.0]), 0.25, &[2.0, 0.0, 0.0]).unwrap();
        assert!((v - (-0.918_938_533_204_672_8)).abs() < 1e-12);
    }

    #[test]
    fn lml_data_fit_term_peaks_at_zero_residual() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let beta = [0.5, -1.0, 0.25];
        let h = hp(1.0, &[1.0]);
        let y_exact = design_matrix(&x).unwrap() * DVector::from_column_slice(&beta);
        let at_zero = log_marginal_likelihood(&x, &y_exact, &h, 0.1, &beta).unwrap();
        for shift in [-0.3, 0.1, 0.5] {
            let y = y_exact.add_scalar(shift);
            assert!(log_marginal_likelihood(&x, &y, &h, 0.1, &beta).unwrap() < at_zero);
        }
    }

    #[test]
    fn fitted_lml_matches_free_function() {
        let x = DMatrix::from_row_slice(5, 1, &[0.0, 1.0, 2.5, 3.0, 4.2]);
        let y = DVector::from_vec(vec![0.1, 0.9, 0.2, -0.4, 0.3]);
        let h = hp(0.8, &[1.3]);
        let m = fit(&x, &y, &h, 0.05, BetaMode::EstimateGls).unwrap();
        let free = log_marginal_likelihood(&x, &y, &h, 0.05, m.beta()).unwrap();
        assert_eq!(m.log_marginal_likelihood(), free);
    }

    #[test]
    fn collinear_basis_is_degenerate() {
        // Every thickness equal: T and T² columns are multiples of the intercept.
        let x = DMatrix::from_row_slice(4, 2, &[30.0, 0.4, 60.0, 0.4, 90.0, 0.4, 120.0, 0.4]);
        let y = DVector::from_vec(vec![1.0, 2.0, 2.5, 3.0]);
        assert_eq!(
            fit(&x, &y, &hp(1.0, &[20.0, 0.4]), 0.01, BetaMode::EstimateGls),
            Err(GprError::DegenerateBasis)
        );
    }
}
