//! Stage I for curves: robust location of the smoothing coefficients per
//! class, mapped back to a mean curve, plus a pointwise noise curve from the
//! untrimmed curves.

use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::robust::{
    extract_class_priors, LabeledDataset, McdConfig, MrcdTarget, RobustClassSummary,
};

use super::basis::{BasisSpec, Smoother};
use super::CurveSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalKnownPrior {
    /// f̄_j on the grid.
    pub mean_curve: Vec<f64>,
    /// σ̄²_j on the grid.
    pub noise_curve: Vec<f64>,
    /// Prior variance of f_j(t) around f̄_j(t); 0 freezes the mean curve.
    pub phi_j: f64,
    /// Prior variance of σ²_j(t) around σ̄²_j(t); 0 freezes the noise curve.
    pub v_j: f64,
    pub class_size: usize,
    pub grid: Vec<f64>,
    /// Robust estimate of the class coefficient distribution.
    pub coefficients: RobustClassSummary,
}

/// Options of [`extract_functional_priors`] beyond the robust estimator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct PriorOptions {
    pub basis: BasisSpec,
    pub phi_j: f64,
    pub v_j: f64,
}

impl Default for PriorOptions {
    fn default() -> Self {
        PriorOptions {
            basis: BasisSpec::default(),
            phi_j: 0.0,
            v_j: 0.0,
        }
    }
}

impl FunctionalKnownPrior {
    pub fn mean_frozen(&self) -> bool {
        self.phi_j <= 0.0
    }

    pub fn noise_frozen(&self) -> bool {
        self.v_j <= 0.0
    }

    /// Inverse-gamma (shape, scale) at grid point `t` with mean σ̄²(t) and
    /// variance v_j.
    pub fn noise_prior(&self, t: usize) -> (f64, f64) {
        ig_from_moments(self.noise_curve[t], self.v_j)
    }
}

/// Inverse-gamma (shape, scale) with the given mean and variance.
pub fn ig_from_moments(mean: f64, variance: f64) -> (f64, f64) {
    let ratio = mean * mean / variance;
    (2.0 + ratio, mean * (1.0 + ratio))
}

/// Robust known-class priors from labeled training curves. Coefficients
/// share the unit of the curves, so the MRCD shrinks towards a scaled
/// identity whatever target `cfg` names.
pub fn extract_functional_priors(
    train: &CurveSet,
    options: &PriorOptions,
    cfg: &McdConfig,
) -> Result<Vec<FunctionalKnownPrior>> {
    let labels = train
        .labels()
        .ok_or_else(|| BrandError::InvalidInput("training curves need class labels".into()))?;
    if !(options.phi_j >= 0.0 && options.v_j >= 0.0) {
        return Err(BrandError::InvalidInput(
            "prior variances phi_j and v_j must be non-negative".into(),
        ));
    }
    let smoother = Smoother::new(&options.basis, train.grid())?;
    let coef = smoother.project(train.values());
    let dataset = LabeledDataset::new(coef, labels.to_vec())?;
    let cfg = McdConfig {
        mrcd_target: MrcdTarget::ScaledIdentity,
        ..cfg.clone()
    };
    let summaries = extract_class_priors(&dataset, &cfg)?;
    let t_len = train.n_points();
    summaries
        .into_iter()
        .enumerate()
        .map(|(j, summary)| {
            let class = j + 1;
            let n_j = labels.iter().filter(|&&l| l == class).count();
            let mean_curve = smoother.evaluate(summary.mean.as_slice());
            let mut noise_curve = vec![0.0; t_len];
            for &n in &summary.untrimmed {
                for (t, s) in noise_curve.iter_mut().enumerate() {
                    *s += (train.values()[(n, t)] - mean_curve[t]).powi(2);
                }
            }
            let denom = (n_j.max(2) - 1) as f64;
            noise_curve.iter_mut().for_each(|s| *s /= denom);
            if noise_curve.iter().any(|&s| !(s > 0.0)) {
                return Err(BrandError::DegenerateData.in_class(class));
            }
            Ok(FunctionalKnownPrior {
                mean_curve,
                noise_curve,
                phi_j: options.phi_j,
                v_j: options.v_j,
                class_size: n_j,
                grid: train.grid().to_vec(),
                coefficients: summary,
            })
        })
        .collect()
}
