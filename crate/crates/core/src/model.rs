//! Stage II probability model: hyperparameters, the slice-sampler
//! ξ-sequence, stick-breaking weights, Gaussian and NIW primitives, and the
//! closed-form prior moments of the semiparametric mixing measure.

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::linalg::{self, Matrix, Vector, LN_2PI};
use crate::robust::RobustClassSummary;

/// Unlabeled test observations (M × p).
#[derive(Debug, Clone)]
pub struct TestDataset {
    data: Matrix,
}

impl TestDataset {
    pub fn new(data: Matrix) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(BrandError::InvalidInput("observations need p >= 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BrandError::InvalidInput("non-finite test value".into()));
        }
        Ok(TestDataset { data })
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NiwParams {
    #[serde(with = "linalg::serde_vector")]
    pub mean: Vector,
    /// λ, the number of pseudo-observations behind the mean.
    pub precision_scale: f64,
    /// ν, inverse-Wishart degrees of freedom.
    pub dof: f64,
    #[serde(with = "linalg::serde_matrix")]
    pub scale_matrix: Matrix,
}

impl NiwParams {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.dim();
        if self.scale_matrix.shape() != (p, p) {
            return Err(BrandError::DimensionMismatch {
                expected: p,
                found: self.scale_matrix.nrows(),
            });
        }
        if !(self.precision_scale > 0.0) {
            return Err(BrandError::InvalidInput(format!(
                "NIW precision scale must be positive, got {}",
                self.precision_scale
            )));
        }
        if !(self.dof > p as f64 - 1.0) {
            return Err(BrandError::InvalidInput(format!(
                "NIW degrees of freedom must exceed p - 1 = {}, got {}",
                p as f64 - 1.0,
                self.dof
            )));
        }
        linalg::cholesky(&self.scale_matrix).map(|_| ())
    }

    /// Prior for a known class centred on its Stage I estimate. The scale
    /// matrix is chosen so that the inverse-Wishart mean equals the robust
    /// scatter.
    pub fn from_summary(summary: &RobustClassSummary, lambda_tr: f64, nu_tr: f64) -> Self {
        let p = summary.mean.len() as f64;
        NiwParams {
            mean: summary.mean.clone(),
            precision_scale: lambda_tr,
            dof: nu_tr,
            scale_matrix: &summary.scatter * (nu_tr - p - 1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GaussianAtom {
    #[serde(with = "linalg::serde_vector")]
    pub mean: Vector,
    #[serde(with = "linalg::serde_matrix")]
    pub cov: Matrix,
}

/// A Gaussian atom with its Cholesky factor cached for density evaluation.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    pub atom: GaussianAtom,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl GaussianKernel {
    pub fn new(atom: GaussianAtom) -> Result<Self> {
        let chol = linalg::cholesky(&atom.cov)?;
        let p = atom.mean.len() as f64;
        let log_norm = -0.5 * (p * LN_2PI + linalg::log_det_from_cholesky(&chol));
        Ok(GaussianKernel {
            atom,
            chol,
            log_norm,
        })
    }

    /// Squared Mahalanobis distance of `x` from the atom mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let l = self.chol.l_dirty();
        let p = x.len();
        let mut buf = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if p <= 16 {
            &mut buf[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..p {
            let mut s = x[i] - self.atom.mean[i];
            for k in 0..i {
                s -= l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)];
            quad += z[i] * z[i];
        }
        quad
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }
}

/// `log N(x; μ, Σ)`.
pub fn log_gaussian_density(x: &Vector, atom: &GaussianAtom) -> Result<f64> {
    if x.len() != atom.mean.len() {
        return Err(BrandError::DimensionMismatch {
            expected: atom.mean.len(),
            found: x.len(),
        });
    }
    Ok(GaussianKernel::new(atom.clone())?.log_density(x.as_slice()))
}

/// ξ_l: mass (1-κ)/(J+1) on each of the first J+1 slots, geometric decay
/// with ratio (J+1)κ/(Jκ+1) afterwards.
pub fn xi_sequence(kappa: f64, n_known: usize, l: usize) -> f64 {
    assert!(l >= 1, "xi is indexed from 1");
    let head = xi_head(kappa, n_known);
    if l <= n_known + 1 {
        head
    } else {
        head * xi_ratio(kappa, n_known).powi((l - n_known - 1) as i32)
    }
}

fn xi_head(kappa: f64, n_known: usize) -> f64 {
    (1.0 - kappa) / (n_known as f64 + 1.0)
}

fn xi_ratio(kappa: f64, n_known: usize) -> f64 {
    let j = n_known as f64;
    (j + 1.0) * kappa / (j * kappa + 1.0)
}

/// Mass of the geometric tail beyond slot J+1.
pub fn xi_tail_mass(kappa: f64, n_known: usize) -> f64 {
    let r = xi_ratio(kappa, n_known);
    xi_head(kappa, n_known) * r / (1.0 - r)
}

/// Real-valued bound `J + 1 + (log u - log ξ_1) / log r`; the truncation
/// level is the largest integer strictly below it.
pub fn truncation_bound(min_u: f64, kappa: f64, n_known: usize) -> f64 {
    let head = xi_head(kappa, n_known);
    n_known as f64 + 1.0 + (min_u.ln() - head.ln()) / xi_ratio(kappa, n_known).ln()
}

/// Number of mixture slots that can be active given the slice variables,
/// never less than J+1.
pub fn truncation_level(u: &[f64], kappa: f64, n_known: usize) -> Result<usize> {
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    if u.is_empty() {
        return Err(BrandError::EmptySlice);
    }
    if !(min_u > 0.0) {
        return Err(BrandError::InvalidInput(format!(
            "slice variables must be positive, got {min_u}"
        )));
    }
    let bound = truncation_bound(min_u, kappa, n_known);
    let mut level = (bound.ceil() as usize).saturating_sub(1).max(n_known + 1);
    // rounding in the logarithms can misplace the level by one slot
    while xi_sequence(kappa, n_known, level + 1) > min_u {
        level += 1;
    }
    while level > n_known + 1 && xi_sequence(kappa, n_known, level) <= min_u {
        level -= 1;
    }
    Ok(level)
}

/// ω_k = v_k ∏_{l<k} (1 - v_l).
pub fn stick_breaking(v: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    v.iter()
        .map(|&vk| {
            let w = vk * remaining;
            remaining *= 1.0 - vk;
            w
        })
        .collect()
}

/// Slot index ζ (1-based) to (α, β): known class or novelty cluster.
pub fn zeta_to_alpha_beta(zeta: usize, n_known: usize) -> (usize, usize) {
    debug_assert!(zeta >= 1);
    if zeta <= n_known {
        (zeta, 0)
    } else {
        (0, zeta - n_known)
    }
}

pub fn alpha_beta_to_zeta(alpha: usize, beta: usize, n_known: usize) -> usize {
    debug_assert!((alpha > 0) != (beta > 0));
    if alpha > 0 {
        alpha
    } else {
        n_known + beta
    }
}

/// How the DP concentration γ is handled.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GammaSpec {
    Fixed {
        value: f64,
    },
    /// Gamma(shape, rate) prior, started at `initial`.
    Random {
        shape: f64,
        rate: f64,
        initial: f64,
    },
}

impl GammaSpec {
    pub fn initial(&self) -> f64 {
        match *self {
            GammaSpec::Fixed { value } => value,
            GammaSpec::Random { initial, .. } => initial,
        }
    }
}

/// Prior constants and chain controls of the multivariate model.
///
/// Quantities that depend on the data (the Dirichlet weights of the known
/// classes, ν^Tr, the base-measure dimension) are left optional here and
/// resolved by [`Hyperparameters::resolve`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Hyperparameters {
    /// Dirichlet weight of the novelty component.
    pub a0: f64,
    /// Dirichlet weights of the known classes; `n_j / N` when unset.
    pub a_known: Option<Vec<f64>>,
    pub lambda_tr: f64,
    /// Defaults to `lambda_tr`, floored at p + 2.
    pub nu_tr: Option<f64>,
    /// Base measure H = NIW(m0·1, λ0, ν0, s0·I).
    pub m0: f64,
    pub lambda0: f64,
    pub nu0: f64,
    pub s0: f64,
    pub gamma: GammaSpec,
    pub kappa: f64,
    pub n_iter: usize,
    pub n_burnin: usize,
    pub seed: u64,
    /// Keep atoms every this many retained iterations (0 disables).
    pub snapshot_every: usize,
    /// λ^Tr and ν^Tr at or above this value freeze the known atoms.
    pub freeze_threshold: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            a0: 0.1,
            a_known: None,
            lambda_tr: 1000.0,
            nu_tr: None,
            m0: 0.0,
            lambda0: 0.01,
            nu0: 10.0,
            s0: 1.0,
            gamma: GammaSpec::Random {
                shape: 1.0,
                rate: 1.0,
                initial: 1.0,
            },
            kappa: 0.5,
            n_iter: 2000,
            n_burnin: 1000,
            seed: 0,
            snapshot_every: 10,
            freeze_threshold: 1e5,
        }
    }
}

/// Data-dependent prior quantities ready for the sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedPriors {
    /// (a_0, a_1, ..., a_J).
    pub a: Vec<f64>,
    pub known: Vec<NiwParams>,
    /// Known atoms held at their prior centre.
    pub frozen: bool,
    pub base: NiwParams,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(BrandError::InvalidInput(format!(
                "{what} is out of range: {v}"
            )))
        };
        if !(self.a0 > 0.0) {
            return bad("a0", self.a0);
        }
        if let Some(a) = &self.a_known {
            if let Some(&v) = a.iter().find(|&&v| !(v > 0.0)) {
                return bad("a_known entry", v);
            }
        }
        if !(self.lambda_tr > 0.0) {
            return bad("lambda_tr", self.lambda_tr);
        }
        if !(self.lambda0 > 0.0) {
            return bad("lambda0", self.lambda0);
        }
        if !(self.s0 > 0.0) {
            return bad("s0", self.s0);
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad("kappa", self.kappa);
        }
        match self.gamma {
            GammaSpec::Fixed { value } if !(value > 0.0) => return bad("gamma", value),
            GammaSpec::Random {
                shape,
                rate,
                initial,
            } if !(shape > 0.0 && rate > 0.0 && initial > 0.0) => {
                return bad("gamma prior", shape.min(rate).min(initial))
            }
            _ => {}
        }
        if self.n_iter <= self.n_burnin {
            return Err(BrandError::InvalidInput(format!(
                "n_iter ({}) must exceed n_burnin ({})",
                self.n_iter, self.n_burnin
            )));
        }
        Ok(())
    }

    pub fn nu_tr_for(&self, p: usize) -> f64 {
        self.nu_tr.unwrap_or(self.lambda_tr.max(p as f64 + 2.0))
    }

    pub fn base_measure(&self, p: usize) -> NiwParams {
        NiwParams {
            mean: Vector::from_element(p, self.m0),
            precision_scale: self.lambda0,
            dof: self.nu0,
            scale_matrix: Matrix::identity(p, p) * self.s0,
        }
    }

    /// Dirichlet weights (a_0, ..., a_J) given training class sizes.
    pub fn dirichlet_weights(&self, class_sizes: &[usize]) -> Result<Vec<f64>> {
        let known = match &self.a_known {
            Some(a) if a.len() != class_sizes.len() => {
                return Err(BrandError::LengthMismatch {
                    left: a.len(),
                    right: class_sizes.len(),
                })
            }
            Some(a) => a.clone(),
            None => {
                let total: usize = class_sizes.iter().sum();
                class_sizes
                    .iter()
                    .map(|&n| n as f64 / total as f64)
                    .collect()
            }
        };
        Ok(std::iter::once(self.a0).chain(known).collect())
    }

    pub fn frozen(&self, p: usize) -> bool {
        self.lambda_tr >= self.freeze_threshold && self.nu_tr_for(p) >= self.freeze_threshold
    }

    pub fn resolve(
        &self,
        summaries: &[RobustClassSummary],
        class_sizes: &[usize],
    ) -> Result<ResolvedPriors> {
        self.validate()?;
        let p = summaries
            .first()
            .map(|s| s.mean.len())
            .ok_or_else(|| BrandError::InvalidInput("no known classes".into()))?;
        let nu_tr = self.nu_tr_for(p);
        if !(nu_tr > p as f64 + 1.0) {
            return Err(BrandError::InvalidInput(format!(
                "nu_tr must exceed p + 1 = {} so the prior covariance mean exists, got {nu_tr}",
                p + 1
            )));
        }
        let known: Vec<NiwParams> = summaries
            .iter()
            .map(|s| NiwParams::from_summary(s, self.lambda_tr, nu_tr))
            .collect();
        for (j, k) in known.iter().enumerate() {
            k.validate().map_err(|e| e.in_class(j + 1))?;
        }
        let base = self.base_measure(p);
        base.validate()?;
        Ok(ResolvedPriors {
            a: self.dirichlet_weights(class_sizes)?,
            known,
            frozen: self.frozen(p),
            base,
        })
    }
}

/// Univariate moments of the known priors P_j (j ≥ 1) and of the base
/// measure H (j = 0), together with the Dirichlet weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMoments {
    pub a: Vec<f64>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl PriorMoments {
    pub fn new(a: Vec<f64>, mean: Vec<f64>, second_moment: Vec<f64>) -> Result<Self> {
        if a.len() != mean.len() || a.len() != second_moment.len() {
            return Err(BrandError::LengthMismatch {
                left: a.len(),
                right: mean.len().min(second_moment.len()),
            });
        }
        Ok(PriorMoments {
            a,
            mean,
            second_moment,
        })
    }

    /// Builds the moments from means and variances.
    pub fn from_variances(a: Vec<f64>, mean: Vec<f64>, variance: &[f64]) -> Result<Self> {
        let second = mean.iter().zip(variance).map(|(m, v)| v + m * m).collect();
        Self::new(a, mean, second)
    }

    pub fn a_total(&self) -> f64 {
        self.a.iter().sum()
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.second_moment[j] - self.mean[j] * self.mean[j]
    }

    /// ϱ = (1/(1+γ), 1, ..., 1).
    pub fn rho(&self, gamma: f64) -> Vec<f64> {
        let mut rho = vec![1.0; self.a.len()];
        rho[0] = 1.0 / (1.0 + gamma);
        rho
    }
}

pub fn prior_mean(m: &PriorMoments) -> f64 {
    let a = m.a_total();
    m.a.iter().zip(&m.mean).map(|(aj, mu)| aj / a * mu).sum()
}

pub fn prior_variance(m: &PriorMoments) -> f64 {
    let a = m.a_total();
    let n = m.a.len();
    let mut v = 0.0;
    for j in 0..n {
        let w = m.a[j] / a;
        v += w * (m.second_moment[j] - w * m.mean[j] * m.mean[j]);
    }
    for j in 0..n {
        for l in j + 1..n {
            v -= 2.0 * m.a[j] * m.a[l] / (a * a) * m.mean[l] * m.mean[j];
        }
    }
    v
}

/// Covariance of two draws Θ_m, Θ_m' from the random mixing measure.
pub fn prior_covariance(m: &PriorMoments, gamma: f64) -> f64 {
    let a = m.a_total();
    let n = m.a.len();
    let rho = m.rho(gamma);
    let mut c = 0.0;
    for j in 0..n {
        let aj = m.a[j];
        c += aj * (aj + 1.0) / (a * (a + 1.0)) * rho[j] * m.second_moment[j]
            - aj * aj / (a * a) * m.mean[j] * m.mean[j];
    }
    for j in 0..n {
        for l in 0..j {
            c -= 2.0 / (a * a * (a + 1.0)) * m.a[j] * m.a[l] * m.mean[j] * m.mean[l];
        }
    }
    let a0 = m.a[0];
    c + a0 * (a0 + 1.0) / (a * (a + 1.0)) * gamma / (1.0 + gamma) * m.mean[0] * m.mean[0]
}

/// Amount by which the novelty DP lowers the finite-mixture covariance.
pub fn covariance_decrement(m: &PriorMoments, gamma: f64) -> f64 {
    let a = m.a_total();
    let a0 = m.a[0];
    -a0 * (a0 + 1.0) / (a * (a + 1.0)) * gamma / (1.0 + gamma) * m.variance(0)
}

/// P(Θ_m = Θ_m') for two draws from the mixing measure, with `a[0]` the
/// novelty weight.
pub fn tie_probability(a: &[f64], gamma: f64) -> f64 {
    let total: f64 = a.iter().sum();
    let pair = |aj: f64| aj * (aj + 1.0) / (total * (total + 1.0));
    let known: f64 = a[1..].iter().map(|&aj| pair(aj)).sum();
    if gamma.is_infinite() {
        return known;
    }
    known + pair(a[0]) / (1.0 + gamma)
}
