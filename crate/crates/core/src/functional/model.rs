//! Stage II for curves.
//!
//! Known atoms are pointwise normal mean curves with pointwise noise; novelty
//! atoms are B-spline expansions f(t) = Σ_b ρ_b φ_b(t) with
//! ρ_b ~ N(ψ, τ²), ψ ~ N(0, s²), τ² ~ IG(a_τ, b_τ), σ²(t) ~ IG(a_H, b_H).
//!
//! Full conditionals of a novelty atom given its n curves y_1..y_n, with
//! D = diag(σ²(t)) and Φ the T x B basis matrix:
//!
//! * ρ | rest ~ N(Q⁻¹c, Q⁻¹), Q = I/τ² + n ΦᵀD⁻¹Φ, c = (ψ/τ²)1 + ΦᵀD⁻¹Σ_i y_i
//! * ψ | rest ~ N(m, w), 1/w = 1/s² + B/τ², m = w Σ_b ρ_b / τ²
//! * τ² | rest ~ IG(a_τ + B/2, b_τ + ½Σ_b (ρ_b − ψ)²)
//! * σ²(t) | rest ~ IG(a_H + n/2, b_H + ½Σ_i (y_i(t) − f(t))²)
//!
//! Known atoms with prior f_j(t) ~ N(f̄_j(t), φ_j) and
//! σ²_j(t) ~ IG(2 + σ̄⁴/v_j, σ̄²(1 + σ̄⁴/v_j)) update pointwise the same way;
//! φ_j = 0 or v_j = 0 holds the corresponding curve at its Stage I value.

use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::error::{BrandError, Result};
use crate::linalg::{self, Matrix, Vector, LN_2PI};
use crate::model::Hyperparameters;
use crate::sampler::{run_model, ChainOutput, ComponentModel, SamplerSettings};
use crate::seed::BrandRng;

use super::basis::{bspline_basis, BasisSpec};
use super::prior::FunctionalKnownPrior;
use super::{same_grid, CurveSet};

/// Hyperparameters of the functional model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FunctionalHyper {
    pub a_tau: f64,
    pub b_tau: f64,
    pub s2: f64,
    pub a_h: f64,
    pub b_h: f64,
    pub basis: BasisSpec,
    /// Dirichlet weights, γ, κ and chain controls; the NIW fields are unused.
    pub chain: Hyperparameters,
}

impl Default for FunctionalHyper {
    fn default() -> Self {
        FunctionalHyper {
            a_tau: 3.0,
            b_tau: 1.0,
            s2: 1.0,
            a_h: 5.0,
            b_h: 1.0,
            basis: BasisSpec::default(),
            chain: Hyperparameters::default(),
        }
    }
}

impl FunctionalHyper {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("s2", self.s2),
            ("a_h", self.a_h),
            ("b_h", self.b_h),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BrandError::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        self.chain.validate()
    }
}

/// Univariate normal law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal1 {
    pub mean: f64,
    pub var: f64,
}

impl Normal1 {
    pub fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * (LN_2PI + self.var.ln() + (x - self.mean).powi(2) / self.var)
    }

    pub fn sample(&self, rng: &mut BrandRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.var.sqrt() * z
    }
}

/// Inverse-gamma law with density ∝ x^{-shape-1} exp(-scale / x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGamma {
    pub shape: f64,
    pub scale: f64,
}

impl InvGamma {
    pub fn log_pdf(&self, x: f64) -> f64 {
        self.shape * self.scale.ln()
            - statrs::function::gamma::ln_gamma(self.shape)
            - (self.shape + 1.0) * x.ln()
            - self.scale / x
    }

    pub fn sample(&self, rng: &mut BrandRng) -> Result<f64> {
        let g = Gamma::new(self.shape, 1.0).map_err(|e| {
            BrandError::NotPositiveDefinite(format!("inverse-gamma shape {}: {e}", self.shape))
        })?;
        Ok(self.scale / g.sample(rng))
    }
}

/// Normal full conditional of ρ as (mean, precision).
pub fn rho_conditional(
    basis: &Matrix,
    sigma2: &[f64],
    psi: f64,
    tau2: f64,
    sum_y: &[f64],
    n: usize,
) -> (Vector, Matrix) {
    let b = basis.ncols();
    let mut q = Matrix::identity(b, b) / tau2;
    let mut c = Vector::from_element(b, psi / tau2);
    for t in 0..basis.nrows() {
        let w = 1.0 / sigma2[t];
        let row = basis.row(t);
        let nz: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k, v))
            .collect();
        for &(k, vk) in &nz {
            c[k] += w * vk * sum_y[t];
            for &(l, vl) in &nz {
                q[(k, l)] += n as f64 * w * vk * vl;
            }
        }
    }
    let mean = match linalg::cholesky(&q) {
        Ok(chol) => chol.solve(&c),
        Err(_) => Vector::from_element(b, f64::NAN),
    };
    (mean, q)
}

pub fn psi_conditional(rho: &[f64], tau2: f64, s2: f64) -> Normal1 {
    let precision = 1.0 / s2 + rho.len() as f64 / tau2;
    let var = 1.0 / precision;
    Normal1 {
        mean: var * rho.iter().sum::<f64>() / tau2,
        var,
    }
}

pub fn tau2_conditional(rho: &[f64], psi: f64, a_tau: f64, b_tau: f64) -> InvGamma {
    InvGamma {
        shape: a_tau + 0.5 * rho.len() as f64,
        scale: b_tau + 0.5 * rho.iter().map(|r| (r - psi).powi(2)).sum::<f64>(),
    }
}

/// IG full conditional of a pointwise noise variance given n residuals with
/// sum of squares `ss`.
pub fn sigma2_conditional(shape: f64, scale: f64, ss: f64, n: usize) -> InvGamma {
    InvGamma {
        shape: shape + 0.5 * n as f64,
        scale: scale + 0.5 * ss,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionalKnownAtom {
    pub mean: Vec<f64>,
    pub sigma2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionalNovelAtom {
    pub rho: Vec<f64>,
    pub psi: f64,
    pub tau2: f64,
    pub sigma2: Vec<f64>,
    /// Φρ on the grid.
    pub mean: Vec<f64>,
}

fn curve_log_lik(y: &[f64], mean: &[f64], sigma2: &[f64]) -> f64 {
    let mut out = 0.0;
    for t in 0..y.len() {
        out += sigma2[t].ln() + (y[t] - mean[t]).powi(2) / sigma2[t];
    }
    -0.5 * (out + y.len() as f64 * LN_2PI)
}

pub struct FunctionalModel<'a> {
    test: &'a CurveSet,
    priors: &'a [FunctionalKnownPrior],
    hyper: &'a FunctionalHyper,
    basis: Matrix,
    outlier_cutoff: f64,
    /// Curves row-major, n x T.
    rows: Vec<f64>,
}

impl<'a> FunctionalModel<'a> {
    pub fn new(
        test: &'a CurveSet,
        priors: &'a [FunctionalKnownPrior],
        hyper: &'a FunctionalHyper,
    ) -> Result<Self> {
        hyper.validate()?;
        if priors.is_empty() {
            return Err(BrandError::InvalidInput("no known classes".into()));
        }
        for p in priors {
            if !same_grid(&p.grid, test.grid()) {
                return Err(BrandError::GridMismatch);
            }
        }
        let basis = bspline_basis(&hyper.basis, test.grid())?;
        let chi = ChiSquaredLaw::new(test.n_points() as f64)
            .map_err(|e| BrandError::InvalidInput(e.to_string()))?;
        Ok(FunctionalModel {
            test,
            priors,
            hyper,
            basis,
            outlier_cutoff: chi.inverse_cdf(0.999),
            rows: test.values().transpose().as_slice().to_vec(),
        })
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    fn curve(&self, unit: usize) -> &[f64] {
        let t = self.test.n_points();
        &self.rows[unit * t..(unit + 1) * t]
    }

    fn sum_curves(&self, members: &[usize]) -> Vec<f64> {
        let mut sum = vec![0.0; self.test.n_points()];
        for &m in members {
            for (s, y) in sum.iter_mut().zip(self.curve(m)) {
                *s += y;
            }
        }
        sum
    }

    fn residual_ss(&self, members: &[usize], mean: &[f64]) -> Vec<f64> {
        let mut ss = vec![0.0; mean.len()];
        for &m in members {
            for ((s, y), f) in ss.iter_mut().zip(self.curve(m)).zip(mean) {
                *s += (y - f).powi(2);
            }
        }
        ss
    }

    fn expand(&self, rho: &[f64]) -> Vec<f64> {
        let r = nalgebra::DVectorView::from_slice(rho, rho.len());
        (&self.basis * r).iter().copied().collect()
    }

    fn prior_novel(&self, rng: &mut BrandRng) -> Result<FunctionalNovelAtom> {
        let h = self.hyper;
        let psi = Normal1 {
            mean: 0.0,
            var: h.s2,
        }
        .sample(rng);
        let tau2 = InvGamma {
            shape: h.a_tau,
            scale: h.b_tau,
        }
        .sample(rng)?;
        let coef = Normal1 {
            mean: psi,
            var: tau2,
        };
        let rho: Vec<f64> = (0..self.basis.ncols()).map(|_| coef.sample(rng)).collect();
        let noise = InvGamma {
            shape: h.a_h,
            scale: h.b_h,
        };
        let sigma2 = (0..self.test.n_points())
            .map(|_| noise.sample(rng))
            .collect::<Result<Vec<f64>>>()?;
        let mean = self.expand(&rho);
        Ok(FunctionalNovelAtom {
            rho,
            psi,
            tau2,
            sigma2,
            mean,
        })
    }
}

impl ComponentModel for FunctionalModel<'_> {
    type Known = FunctionalKnownAtom;
    type Novel = FunctionalNovelAtom;

    fn n_units(&self) -> usize {
        self.test.n_curves()
    }

    fn n_known(&self) -> usize {
        self.priors.len()
    }

    fn initial_known(&self) -> Result<Vec<FunctionalKnownAtom>> {
        Ok(self
            .priors
            .iter()
            .map(|p| FunctionalKnownAtom {
                mean: p.mean_curve.clone(),
                sigma2: p.noise_curve.clone(),
            })
            .collect())
    }

    fn log_lik_known(&self, unit: usize, atom: &FunctionalKnownAtom) -> f64 {
        curve_log_lik(self.curve(unit), &atom.mean, &atom.sigma2)
    }

    fn log_lik_novel(&self, unit: usize, atom: &FunctionalNovelAtom) -> f64 {
        curve_log_lik(self.curve(unit), &atom.mean, &atom.sigma2)
    }

    fn update_known(
        &self,
        class: usize,
        members: &[usize],
        current: &FunctionalKnownAtom,
        rng: &mut BrandRng,
    ) -> Result<FunctionalKnownAtom> {
        let prior = &self.priors[class];
        if prior.mean_frozen() && prior.noise_frozen() {
            return Ok(current.clone());
        }
        let n = members.len() as f64;
        let sum = self.sum_curves(members);
        let mut mean = current.mean.clone();
        if !prior.mean_frozen() {
            for t in 0..mean.len() {
                let precision = 1.0 / prior.phi_j + n / current.sigma2[t];
                let var = 1.0 / precision;
                mean[t] = Normal1 {
                    mean: var * (prior.mean_curve[t] / prior.phi_j + sum[t] / current.sigma2[t]),
                    var,
                }
                .sample(rng);
            }
        }
        let mut sigma2 = current.sigma2.clone();
        if !prior.noise_frozen() {
            let ss = self.residual_ss(members, &mean);
            for t in 0..sigma2.len() {
                let (a, b) = prior.noise_prior(t);
                sigma2[t] = sigma2_conditional(a, b, ss[t], members.len()).sample(rng)?;
            }
        }
        Ok(FunctionalKnownAtom { mean, sigma2 })
    }

    fn update_novel(
        &self,
        members: &[usize],
        current: Option<&FunctionalNovelAtom>,
        rng: &mut BrandRng,
    ) -> Result<FunctionalNovelAtom> {
        if members.is_empty() {
            return self.prior_novel(rng);
        }
        let h = self.hyper;
        let start = match current {
            Some(a) => a.clone(),
            None => self.prior_novel(rng)?,
        };
        let sum = self.sum_curves(members);
        let (mean, q) = rho_conditional(
            &self.basis,
            &start.sigma2,
            start.psi,
            start.tau2,
            &sum,
            members.len(),
        );
        let chol = linalg::cholesky(&q)?;
        let z = Vector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
        // L⁻ᵀz has covariance Q⁻¹.
        let lt = chol.l().transpose();
        let step = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| BrandError::NotPositiveDefinite("rho precision".into()))?;
        let rho: Vec<f64> = (mean + step).iter().copied().collect();
        let psi = psi_conditional(&rho, start.tau2, h.s2).sample(rng);
        let tau2 = tau2_conditional(&rho, psi, h.a_tau, h.b_tau).sample(rng)?;
        let fitted = self.expand(&rho);
        let ss = self.residual_ss(members, &fitted);
        let sigma2 = ss
            .iter()
            .map(|&s| sigma2_conditional(h.a_h, h.b_h, s, members.len()).sample(rng))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FunctionalNovelAtom {
            rho,
            psi,
            tau2,
            sigma2,
            mean: fitted,
        })
    }

    fn poorly_fit(&self, unit: usize, atom: &FunctionalKnownAtom) -> bool {
        let y = self.curve(unit);
        let stat: f64 = (0..y.len())
            .map(|t| (y[t] - atom.mean[t]).powi(2) / atom.sigma2[t])
            .sum();
        stat > self.outlier_cutoff
    }

    fn features(&self, unit: usize) -> Vec<f64> {
        self.curve(unit).to_vec()
    }

    fn snapshot(
        &self,
        _known: &[FunctionalKnownAtom],
        novel: &[(usize, &FunctionalNovelAtom)],
    ) -> serde_json::Value {
        // Known curves are summarized by the priors when frozen, so only the
        // novelty atoms are kept.
        serde_json::json!({
            "novel": novel
                .iter()
                .map(|(h, a)| serde_json::json!({
                    "cluster": h,
                    "psi": a.psi,
                    "tau2": a.tau2,
                    "mean": &a.mean,
                }))
                .collect::<Vec<_>>(),
        })
    }
}

/// Stage II for curves: one chain of the functional model.
pub fn run_functional_chain(
    test: &CurveSet,
    priors: &[FunctionalKnownPrior],
    hyper: &FunctionalHyper,
) -> Result<ChainOutput> {
    let model = FunctionalModel::new(test, priors, hyper)?;
    let sizes: Vec<usize> = priors.iter().map(|p| p.class_size).collect();
    let a = hyper.chain.dirichlet_weights(&sizes)?;
    run_model(&model, &SamplerSettings::new(&hyper.chain, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> BrandRng {
        BrandRng::seed_from_u64(seed)
    }

    #[test]
    fn inverse_gamma_density_integrates_to_one() {
        let law = InvGamma {
            shape: 3.5,
            scale: 2.0,
        };
        let (lo, hi, n) = (1e-4, 60.0, 600_000);
        let dx = (hi - lo) / n as f64;
        let total: f64 = (0..n)
            .map(|i| law.log_pdf(lo + (i as f64 + 0.5) * dx).exp() * dx)
            .sum();
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn inverse_gamma_sampler_mean() {
        let law = InvGamma {
            shape: 6.0,
            scale: 10.0,
        };
        let mut r = rng(3);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut r).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (10.0f64 / 5.0) / (4.0f64).sqrt();
        assert!((mean - 2.0).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn psi_and_tau2_conditionals_by_hand() {
        let rho = [1.0, 2.0, 3.0];
        let psi = psi_conditional(&rho, 2.0, 1.0);
        // precision 1 + 3/2 = 2.5
        assert!((psi.var - 0.4).abs() < 1e-15);
        assert!((psi.mean - 0.4 * 3.0).abs() < 1e-15);
        let tau = tau2_conditional(&rho, 2.0, 3.0, 1.0);
        assert_eq!(tau.shape, 4.5);
        assert_eq!(tau.scale, 2.0);
    }

    #[test]
    fn rho_conditional_with_identity_basis() {
        // Φ = I: each coordinate is an independent normal-normal update.
        let basis = Matrix::identity(3, 3);
        let sigma2 = [0.5, 1.0, 2.0];
        let sum_y = [1.0, -2.0, 4.0];
        let (mean, q) = rho_conditional(&basis, &sigma2, 0.3, 4.0, &sum_y, 2);
        for t in 0..3 {
            let prec = 0.25 + 2.0 / sigma2[t];
            assert!((q[(t, t)] - prec).abs() < 1e-14);
            let m = (0.3 / 4.0 + sum_y[t] / sigma2[t]) / prec;
            assert!((mean[t] - m).abs() < 1e-14);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let grid: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let test = CurveSet::new(grid.clone(), Matrix::zeros(2, 10), None).unwrap();
        let summary = crate::robust::RobustClassSummary {
            mean: Vector::zeros(1),
            scatter: Matrix::identity(1, 1),
            untrimmed: vec![],
            method: crate::robust::RobustMethod::Mcd,
            determinant: 1.0,
            log_determinant: 0.0,
            consistency_factor: 1.0,
            class_size: 2,
        };
        let prior = FunctionalKnownPrior {
            mean_curve: vec![0.0; 10],
            noise_curve: vec![1.0; 10],
            phi_j: 0.0,
            v_j: 0.0,
            class_size: 2,
            grid: grid.iter().map(|t| t * 2.0).collect(),
            coefficients: summary,
        };
        let hyper = FunctionalHyper {
            basis: BasisSpec::new(4, 3),
            ..Default::default()
        };
        assert!(matches!(
            FunctionalModel::new(&test, std::slice::from_ref(&prior), &hyper).err(),
            Some(BrandError::GridMismatch)
        ));
    }
}
