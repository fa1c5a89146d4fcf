//! Exhaustive grid search over kernel hyperparameters by log marginal
//! likelihood.

use nalgebra::{DMatrix, DVector};

use super::{fit, BetaMode, GprError, KernelHyperParams};

/// `count` values spaced evenly in log between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// Candidate values per hyperparameter. Candidates are visited with signal
/// variance outermost, then length scales in dimension order, then noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub signal_variances: Vec<f64>,
    /// One candidate list per input dimension.
    pub length_scales: Vec<Vec<f64>>,
    pub noise_variances: Vec<f64>,
}

impl GridSpec {
    pub fn candidate_count(&self) -> usize {
        self.signal_variances.len()
            * self.length_scales.iter().map(Vec::len).product::<usize>()
            * self.noise_variances.len()
    }

    fn length_scale_combos(&self) -> Vec<Vec<f64>> {
        let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
        for dim in &self.length_scales {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    dim.iter().map(move |l| {
                        let mut c = prefix.clone();
                        c.push(*l);
                        c
                    })
                })
                .collect();
        }
        combos
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedHyperParams {
    pub hyper: KernelHyperParams,
    pub noise_variance: f64,
    pub log_marginal_likelihood: f64,
}

/// Pick the grid candidate with the largest log marginal likelihood, with β
/// re-estimated by GLS for every candidate. Ties keep the earlier candidate.
/// Candidates whose covariance cannot be factorized are skipped.
pub fn tune_hyperparams(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &GridSpec,
) -> Result<TunedHyperParams, GprError> {
    if grid.candidate_count() == 0 {
        return Err(GprError::EmptyGrid);
    }
    if grid.length_scales.len() != x.ncols() {
        return Err(GprError::DimensionMismatch {
            expected: x.ncols(),
            got: grid.length_scales.len(),
        });
    }

    let combos = grid.length_scale_combos();
    let mut best: Option<TunedHyperParams> = None;
    for &sf2 in &grid.signal_variances {
        for ls in &combos {
            let hyper = KernelHyperParams::new(sf2, ls.clone())?;
            for &noise in &grid.noise_variances {
                let model = match fit(x, y, &hyper, noise, BetaMode::EstimateGls) {
                    Ok(m) => m,
                    Err(GprError::NotPositiveDefinite) => continue,
                    Err(e) => return Err(e),
                };
                let lml = model.log_marginal_likelihood();
                if !lml.is_finite() {
                    continue;
                }
                if best
                    .as_ref()
                    .is_none_or(|b| lml > b.log_marginal_likelihood)
                {
                    best = Some(TunedHyperParams {
                        hyper: hyper.clone(),
                        noise_variance: noise,
                        log_marginal_likelihood: lml,
                    });
                }
            }
        }
    }
    best.ok_or(GprError::NotPositiveDefinite)
}
