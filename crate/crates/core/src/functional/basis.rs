//! B-spline bases on a uniform clamped knot vector and least-squares smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::linalg::{self, Matrix};

use super::CurveSet;

/// Relative eigenvalue cutoff of the normal equations below which the fit is
/// rank deficient.
const RANK_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BasisSpec {
    pub n_basis: usize,
    /// Spline order (degree + 1).
    pub order: usize,
    /// Weight of the squared second-difference penalty on the coefficients.
    #[serde(default)]
    pub penalty: f64,
}

impl Default for BasisSpec {
    /// 100 bases of order 5. On 100 equispaced points this design has rank
    /// 98, so a small roughness penalty is included.
    fn default() -> Self {
        BasisSpec {
            n_basis: 100,
            order: 5,
            penalty: 1e-6,
        }
    }
}

impl BasisSpec {
    pub fn new(n_basis: usize, order: usize) -> Self {
        BasisSpec {
            n_basis,
            order,
            penalty: 0.0,
        }
    }

    pub fn with_penalty(self, penalty: f64) -> Self {
        BasisSpec { penalty, ..self }
    }

    /// Clamped knot vector with uniform interior knots over `[lo, hi]`.
    pub fn knots(&self, lo: f64, hi: f64) -> Result<Vec<f64>> {
        if self.order == 0 {
            return Err(BrandError::InvalidKnots("order must be at least 1".into()));
        }
        if self.n_basis < self.order {
            return Err(BrandError::InvalidKnots(format!(
                "{} bases cannot carry order {}",
                self.n_basis, self.order
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(BrandError::InvalidKnots(format!(
                "knot range [{lo}, {hi}] is empty"
            )));
        }
        let spans = self.n_basis - self.order + 1;
        let mut knots = vec![lo; self.order];
        knots.extend((1..spans).map(|i| lo + (hi - lo) * i as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(hi, self.order));
        Ok(knots)
    }
}

/// Index `i` with `knots[i] <= t < knots[i + 1]`, the last non-empty span
/// absorbing the right end point.
fn find_span(knots: &[f64], order: usize, n_basis: usize, t: f64) -> usize {
    let last = n_basis - 1;
    if t >= knots[n_basis] {
        return last;
    }
    let mut lo = order - 1;
    let mut hi = n_basis;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if t < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Basis functions at `t` by the Cox-de Boor recursion; returns the first
/// non-zero index and the `order` non-zero values.
fn basis_at(knots: &[f64], order: usize, n_basis: usize, t: f64) -> (usize, Vec<f64>) {
    let span = find_span(knots, order, n_basis, t);
    let mut values = vec![0.0; order];
    values[0] = 1.0;
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    for d in 1..order {
        left[d] = t - knots[span + 1 - d];
        right[d] = knots[span + d] - t;
        let mut saved = 0.0;
        for r in 0..d {
            let denom = right[r + 1] + left[d - r];
            let temp = if denom > 0.0 { values[r] / denom } else { 0.0 };
            values[r] = saved + right[r + 1] * temp;
            saved = left[d - r] * temp;
        }
        values[d] = saved;
    }
    (span + 1 - order, values)
}

/// T x B matrix of basis functions evaluated on `grid`.
pub fn bspline_basis(spec: &BasisSpec, grid: &[f64]) -> Result<Matrix> {
    let (lo, hi) = match (grid.first(), grid.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(BrandError::InvalidKnots("empty grid".into())),
    };
    let knots = spec.knots(lo, hi)?;
    let mut phi = Matrix::zeros(grid.len(), spec.n_basis);
    for (i, &t) in grid.iter().enumerate() {
        if !(lo..=hi).contains(&t) {
            return Err(BrandError::InvalidKnots(format!(
                "grid point {t} outside [{lo}, {hi}]"
            )));
        }
        let (first, values) = basis_at(&knots, spec.order, spec.n_basis, t);
        for (k, v) in values.into_iter().enumerate() {
            phi[(i, first + k)] = v;
        }
    }
    Ok(phi)
}

/// Second-difference penalty matrix DᵀD of size B x B.
fn difference_penalty(b: usize) -> Matrix {
    let mut d = Matrix::zeros(b.saturating_sub(2), b);
    for i in 0..b.saturating_sub(2) {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    d.transpose() * d
}

/// (Penalized) least-squares projection of curves on a basis.
#[derive(Debug, Clone)]
pub struct Smoother {
    basis: Matrix,
    /// (ΦᵀΦ + λDᵀD)⁻¹Φᵀ, B x T.
    projector: Matrix,
}

impl Smoother {
    pub fn new(spec: &BasisSpec, grid: &[f64]) -> Result<Self> {
        if !(spec.penalty >= 0.0 && spec.penalty.is_finite()) {
            return Err(BrandError::InvalidInput(format!(
                "smoothing penalty must be non-negative, got {}",
                spec.penalty
            )));
        }
        let basis = bspline_basis(spec, grid)?;
        if spec.penalty == 0.0 && basis.nrows() < basis.ncols() {
            return Err(BrandError::RankDeficientBasis);
        }
        let mut gram = basis.transpose() * &basis;
        if spec.penalty > 0.0 {
            gram += difference_penalty(basis.ncols()) * spec.penalty;
        }
        let eig = gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > RANK_TOL * max) {
            return Err(BrandError::RankDeficientBasis);
        }
        let chol = linalg::cholesky(&gram).map_err(|_| BrandError::RankDeficientBasis)?;
        let projector = chol.solve(&basis.transpose());
        Ok(Smoother { basis, projector })
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Coefficients of one curve.
    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        let y = nalgebra::DVectorView::from_slice(values, values.len());
        (&self.projector * y).iter().copied().collect()
    }

    /// n x B coefficients of the rows of an n x T matrix.
    pub fn project(&self, values: &Matrix) -> Matrix {
        values * self.projector.transpose()
    }

    /// Basis expansion of a coefficient vector.
    pub fn evaluate(&self, coefficients: &[f64]) -> Vec<f64> {
        let c = nalgebra::DVectorView::from_slice(coefficients, coefficients.len());
        (&self.basis * c).iter().copied().collect()
    }
}

/// n x B least-squares coefficients of every curve.
pub fn smooth_curves(curves: &CurveSet, spec: &BasisSpec) -> Result<Matrix> {
    Ok(Smoother::new(spec, curves.grid())?.project(curves.values()))
}
