//! Least-squares polynomial baseline in the deformation angle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::JointModelError;
use crate::gpr::linalg::{cholesky_lower, cholesky_solve};

/// Normal equations are abandoned for QR above this condition estimate.
pub const NORMAL_EQUATIONS_MAX_CONDITION: f64 = 1e12;

/// How a [`PolyModel`] was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolySolve {
    NormalEquations,
    Qr,
}

/// `p(θ) = Σ c_k u^k` with `u = (θ − center) / scale`.
///
/// The angle is mapped onto roughly `[−1, 1]` before fitting; raw powers of
/// angles up to 180° overflow the useful range of `f64` by degree 7.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub center: f64,
    pub scale: f64,
    pub solve: PolySolve,
}

impl PolyModel {
    pub fn eval(&self, theta: f64) -> f64 {
        let u = (theta - self.center) / self.scale;
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * u + c)
    }
}

fn vandermonde(u: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(u.len(), degree + 1, |i, k| u[i].powi(k as i32))
}

/// Fit a degree-`degree` polynomial to `(theta, y)` pairs.
pub fn fit_poly(theta: &[f64], y: &[f64], degree: usize) -> Result<PolyModel, JointModelError> {
    if degree == 0 || theta.len() != y.len() || theta.len() < degree + 1 {
        return Err(JointModelError::InsufficientData {
            needed: degree.max(1) + 1,
            got: theta.len().min(y.len()),
        });
    }
    let (lo, hi) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), t| {
            (l.min(*t), h.max(*t))
        });
    let center = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let u: Vec<f64> = theta.iter().map(|t| (t - center) / scale).collect();
    let v = vandermonde(&u, degree);
    let rhs = DVector::from_column_slice(y);

    let normal = v.transpose() * &v;
    let eig = normal.clone().symmetric_eigenvalues();
    let (emin, emax) = eig
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), e| (l.min(*e), h.max(*e)));
    let condition = if emin > 0.0 {
        emax / emin
    } else {
        f64::INFINITY
    };

    if condition <= NORMAL_EQUATIONS_MAX_CONDITION {
        if let Some(l) = cholesky_lower(&normal) {
            let c = cholesky_solve(&l, &(v.transpose() * &rhs));
            return Ok(PolyModel {
                degree,
                coefficients: c.iter().copied().collect(),
                center,
                scale,
                solve: PolySolve::NormalEquations,
            });
        }
    }

    let qr = v.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if r.diagonal().iter().any(|d| d.abs() <= 1e-13 * rmax) {
        return Err(JointModelError::IllConditioned);
    }
    let qty = qr.q().transpose() * rhs;
    let c = r
        .solve_upper_triangular(&qty)
        .ok_or(JointModelError::IllConditioned)?;
    Ok(PolyModel {
        degree,
        coefficients: c.iter().copied().collect(),
        center,
        scale,
        solve: PolySolve::Qr,
    })
}

/// Leave-one-out RMSE of a degree-`degree` polynomial fit.
pub fn poly_loo_rmse(theta: &[f64], y: &[f64], degree: usize) -> Result<f64, JointModelError> {
    let n = theta.len();
    let mut sq = 0.0;
    for i in 0..n {
        let (t, v): (Vec<f64>, Vec<f64>) =
            (0..n).filter(|&j| j != i).map(|j| (theta[j], y[j])).unzip();
        let model = fit_poly(&t, &v, degree)?;
        let e = model.eval(theta[i]) - y[i];
        sq += e * e;
    }
    Ok((sq / n as f64).sqrt())
}
