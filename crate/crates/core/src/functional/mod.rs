//! Functional extension: curves observed on a common grid, smoothed on a
//! B-spline basis, with robust known-class priors and a novelty DP whose atoms
//! are random basis expansions with pointwise noise.

mod basis;
mod model;
mod prior;

pub use basis::{bspline_basis, smooth_curves, BasisSpec, Smoother};
pub use model::{
    psi_conditional, rho_conditional, run_functional_chain, sigma2_conditional, tau2_conditional,
    FunctionalHyper, FunctionalKnownAtom, FunctionalModel, FunctionalNovelAtom, InvGamma, Normal1,
};
pub use prior::{extract_functional_priors, ig_from_moments, FunctionalKnownPrior, PriorOptions};

use crate::error::{BrandError, Result};
use crate::linalg::Matrix;

/// Curves sampled on a shared, strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    grid: Vec<f64>,
    /// n_curves x T.
    values: Matrix,
    labels: Option<Vec<usize>>,
}

impl CurveSet {
    pub fn new(grid: Vec<f64>, values: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if grid.is_empty() {
            return Err(BrandError::InvalidInput("empty time grid".into()));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BrandError::InvalidInput(
                "time grid must be finite and strictly increasing".into(),
            ));
        }
        if values.ncols() != grid.len() {
            return Err(BrandError::DimensionMismatch {
                expected: grid.len(),
                found: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BrandError::InvalidInput("non-finite curve value".into()));
        }
        if let Some(l) = &labels {
            if l.len() != values.nrows() {
                return Err(BrandError::LengthMismatch {
                    left: values.nrows(),
                    right: l.len(),
                });
            }
            if l.contains(&0) {
                return Err(BrandError::InvalidInput("class labels start at 1".into()));
            }
        }
        Ok(CurveSet {
            grid,
            values,
            labels,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.grid.len()
    }

    pub fn curve(&self, n: usize) -> Vec<f64> {
        self.values.row(n).iter().copied().collect()
    }

    /// Same curves without labels.
    pub fn unlabeled(&self) -> CurveSet {
        CurveSet {
            labels: None,
            ..self.clone()
        }
    }
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_set_validation() {
        let v = Matrix::zeros(2, 3);
        assert!(CurveSet::new(vec![0.0, 1.0, 2.0], v.clone(), Some(vec![1, 2])).is_ok());
        assert!(CurveSet::new(vec![0.0, 1.0, 1.0], v.clone(), None).is_err());
        assert!(matches!(
            CurveSet::new(vec![0.0, 1.0], v.clone(), None),
            Err(BrandError::DimensionMismatch { .. })
        ));
        assert!(CurveSet::new(vec![0.0, 1.0, 2.0], v, Some(vec![0, 1])).is_err());
    }
}
