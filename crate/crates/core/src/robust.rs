//! Stage I: class-wise robust location and scatter.
//!
//! Each labeled class is summarised by the raw Minimum Covariance Determinant
//! estimate (FAST-MCD with random elemental starts and C-steps). When the
//! subset size cannot support a nonsingular covariance, or MCD lands on an
//! exact fit, the regularized variant (MRCD) is used instead: the subset
//! covariance is shrunk towards a positive definite target and the subset is
//! chosen to minimise the determinant of that regularized scatter.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{BrandError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::seed;

/// Training observations with class labels in `1..=J`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    data: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(data: Matrix, labels: Vec<usize>) -> Result<Self> {
        if data.nrows() != labels.len() {
            return Err(BrandError::LengthMismatch {
                left: data.nrows(),
                right: labels.len(),
            });
        }
        if data.ncols() == 0 {
            return Err(BrandError::InvalidInput("observations need p >= 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BrandError::InvalidInput("non-finite training value".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l == 0) {
            return Err(BrandError::InvalidInput(format!(
                "class labels start at 1, found {bad}"
            )));
        }
        let n_classes = labels.iter().copied().max().unwrap_or(0);
        let ds = LabeledDataset {
            data,
            labels,
            n_classes,
        };
        for (j, &n_j) in ds.class_sizes().iter().enumerate() {
            if n_j < 2 {
                return Err(BrandError::InvalidInput(format!(
                    "class {} has {n_j} observations; at least 2 are required",
                    j + 1
                )));
            }
        }
        Ok(ds)
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_classes];
        for &l in &self.labels {
            sizes[l - 1] += 1;
        }
        sizes
    }

    /// Row indices of class `class` (1-based label).
    pub fn class_rows(&self, class: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_matrix(&self, class: usize) -> Matrix {
        let rows = self.class_rows(class);
        self.data.select_rows(rows.iter())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct McdConfig {
    /// Fraction of each class kept in the optimal subset.
    pub eta: f64,
    pub n_starts: usize,
    pub max_csteps: usize,
    pub seed: u64,
    /// Per-class subset fractions, keyed by 1-based class label.
    pub eta_overrides: BTreeMap<usize, f64>,
    /// Fixed MRCD shrinkage weight; chosen from the conditioning rule when unset.
    pub mrcd_rho: Option<f64>,
    /// Largest admissible condition number of the MRCD scatter.
    pub max_condition: f64,
    pub mrcd_target: MrcdTarget,
}

/// Shrinkage target of the MRCD.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MrcdTarget {
    /// Diagonal of the sample covariance.
    #[default]
    Diagonal,
    /// Mean robust (MAD) variance times the identity, for coordinates that
    /// share a unit such as spline coefficients.
    ScaledIdentity,
}

impl Default for McdConfig {
    fn default() -> Self {
        McdConfig {
            eta: 0.75,
            n_starts: 500,
            max_csteps: 100,
            seed: 0,
            eta_overrides: BTreeMap::new(),
            mrcd_rho: None,
            max_condition: 1000.0,
            mrcd_target: MrcdTarget::Diagonal,
        }
    }
}

impl McdConfig {
    pub fn with_eta(eta: f64) -> Self {
        McdConfig {
            eta,
            ..Default::default()
        }
    }

    pub fn eta_for(&self, class: usize) -> f64 {
        self.eta_overrides.get(&class).copied().unwrap_or(self.eta)
    }

    fn validate(&self) -> Result<()> {
        let etas = std::iter::once(self.eta).chain(self.eta_overrides.values().copied());
        for eta in etas {
            if !(0.5..=1.0).contains(&eta) {
                return Err(BrandError::InvalidInput(format!(
                    "subset fraction must lie in [0.5, 1], got {eta}"
                )));
            }
        }
        if self.n_starts == 0 || self.max_csteps == 0 {
            return Err(BrandError::InvalidInput(
                "n_starts and max_csteps must be positive".into(),
            ));
        }
        if let Some(rho) = self.mrcd_rho {
            if !(rho > 0.0 && rho <= 1.0) {
                return Err(BrandError::InvalidInput(format!(
                    "MRCD shrinkage must lie in (0, 1], got {rho}"
                )));
            }
        }
        Ok(())
    }

    /// Subset size `floor(eta * n)`.
    pub fn subset_size(eta: f64, n: usize) -> usize {
        // Nudge guards against 0.75 * 28 evaluating to 20.999...
        ((eta * n as f64) + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum RobustMethod {
    Mcd,
    Mrcd { rho: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustClassSummary {
    #[serde(with = "linalg::serde_vector")]
    pub mean: Vector,
    /// Consistency-corrected (and, for MRCD, regularized) scatter.
    #[serde(with = "linalg::serde_matrix")]
    pub scatter: Matrix,
    /// Row indices (into the matrix handed to the estimator) of the optimal subset.
    pub untrimmed: Vec<usize>,
    pub method: RobustMethod,
    /// Objective value: determinant of the raw subset covariance (MCD) or of
    /// the regularized scatter (MRCD).
    pub determinant: f64,
    pub log_determinant: f64,
    pub consistency_factor: f64,
    /// Number of rows the estimate was computed from.
    pub class_size: usize,
}

/// Croux-Haesbroeck consistency factor `eta / F_{p+2}(q_eta)`, with `q_eta` the
/// `eta`-quantile of a chi-square with `p` degrees of freedom.
pub fn consistency_factor(eta: f64, p: usize) -> f64 {
    if eta >= 1.0 {
        return 1.0;
    }
    let q = ChiSquared::new(p as f64).expect("p >= 1").inverse_cdf(eta);
    let tail = ChiSquared::new(p as f64 + 2.0).expect("p >= 1").cdf(q);
    eta / tail
}

/// Subset covariance determinant scaled by the product of its diagonal, so the
/// singularity test is invariant to column scaling.
fn is_singular(cov: &Matrix) -> bool {
    let diag_log: f64 = cov.diagonal().iter().map(|d| d.ln()).sum();
    if cov.diagonal().iter().any(|&d| !(d > 0.0)) {
        return true;
    }
    match linalg::cholesky(cov) {
        Ok(chol) => linalg::log_det_from_cholesky(&chol) - diag_log < (1e-12f64).ln(),
        Err(_) => true,
    }
}

/// Indices of the `h` smallest distances, ties broken by lower row index.
fn smallest(distances: &[f64], h: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    order.truncate(h);
    order.sort_unstable();
    order
}

/// Outcome of iterating C-steps from one starting subset.
#[derive(Debug, Clone)]
pub(crate) struct Concentration {
    pub subset: Vec<usize>,
    pub log_det: f64,
    /// Objective after each C-step, starting with the initial subset.
    #[cfg_attr(not(test), allow(dead_code))]
    pub history: Vec<f64>,
}

/// Objective and distance map of an estimator family: plain MCD or MRCD with a
/// fixed shrinkage weight in standardized coordinates.
trait ScatterObjective: Sync {
    /// Scatter of a subset and its log-determinant; `None` when singular.
    fn scatter(&self, data: &Matrix, subset: &[usize]) -> Option<(Vector, Matrix, f64)>;
}

struct RawCovariance;

impl ScatterObjective for RawCovariance {
    fn scatter(&self, data: &Matrix, subset: &[usize]) -> Option<(Vector, Matrix, f64)> {
        let mean = linalg::subset_mean(data, subset);
        let cov = linalg::subset_covariance(data, subset, &mean);
        if is_singular(&cov) {
            return None;
        }
        let chol = linalg::cholesky(&cov).ok()?;
        let log_det = linalg::log_det_from_cholesky(&chol);
        Some((mean, cov, log_det))
    }
}

struct Regularized {
    rho: f64,
    c0: f64,
}

impl Regularized {
    fn combine(&self, cov: &Matrix) -> Matrix {
        let p = cov.nrows();
        cov * ((1.0 - self.rho) * self.c0) + Matrix::identity(p, p) * self.rho
    }
}

impl ScatterObjective for Regularized {
    fn scatter(&self, data: &Matrix, subset: &[usize]) -> Option<(Vector, Matrix, f64)> {
        let mean = linalg::subset_mean(data, subset);
        let cov = self.combine(&linalg::subset_covariance(data, subset, &mean));
        let chol = linalg::cholesky(&cov).ok()?;
        let log_det = linalg::log_det_from_cholesky(&chol);
        Some((mean, cov, log_det))
    }
}

fn concentrate<O: ScatterObjective>(
    objective: &O,
    data: &Matrix,
    initial: Vec<usize>,
    h: usize,
    max_csteps: usize,
) -> Concentration {
    let mut subset = initial;
    let mut history = Vec::new();
    for _ in 0..max_csteps {
        let Some((mean, scatter, log_det)) = objective.scatter(data, &subset) else {
            // exact fit: the determinant is zero and cannot decrease further
            history.push(f64::NEG_INFINITY);
            break;
        };
        if let Some(&prev) = history.last() {
            debug_assert!(
                log_det <= prev + 1e-9 * prev.abs().max(1.0),
                "C-step increased the determinant: {prev} -> {log_det}"
            );
        }
        history.push(log_det);
        let chol = linalg::cholesky(&scatter).expect("scatter checked nonsingular");
        let next = smallest(&linalg::mahalanobis_sq(data, &mean, &chol), h);
        if next == subset {
            break;
        }
        subset = next;
    }
    Concentration {
        log_det: *history.last().unwrap_or(&f64::NEG_INFINITY),
        subset,
        history,
    }
}

/// Random elemental start of `p + 1` rows, grown one row at a time until its
/// covariance is nonsingular, then expanded to the `h` closest rows.
fn elemental_start<R: rand::Rng>(data: &Matrix, h: usize, rng: &mut R) -> Vec<usize> {
    let (n, p) = data.shape();
    let mut perm = index::sample(rng, n, n).into_vec();
    let mut size = (p + 1).min(n);
    loop {
        let subset = &perm[..size];
        let mean = linalg::subset_mean(data, subset);
        let cov = linalg::subset_covariance(data, subset, &mean);
        if !is_singular(&cov) || size == n {
            return match linalg::cholesky(&cov) {
                Ok(chol) if !is_singular(&cov) => {
                    smallest(&linalg::mahalanobis_sq(data, &mean, &chol), h)
                }
                _ => {
                    perm.truncate(h);
                    perm.sort_unstable();
                    perm
                }
            };
        }
        size += 1;
    }
}

fn best_of(results: Vec<Concentration>) -> Concentration {
    // lowest objective, earliest start on ties
    results
        .into_iter()
        .reduce(|best, c| if c.log_det < best.log_det { c } else { best })
        .expect("at least one start")
}

fn check_finite(data: &Matrix) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(BrandError::InvalidInput(
            "data contain non-finite values".into(),
        ));
    }
    Ok(())
}

/// C-step paths of every random start, for inspection.
pub(crate) fn mcd_paths(data: &Matrix, cfg: &McdConfig) -> Vec<Concentration> {
    let h = McdConfig::subset_size(cfg.eta, data.nrows());
    (0..cfg.n_starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng_for(cfg.seed, "mcd-start", s as u64);
            let start = elemental_start(data, h, &mut rng);
            concentrate(&RawCovariance, data, start, h, cfg.max_csteps)
        })
        .collect()
}

/// Raw FAST-MCD location and scatter.
pub fn fast_mcd(data: &Matrix, cfg: &McdConfig) -> Result<RobustClassSummary> {
    cfg.validate()?;
    check_finite(data)?;
    let (n, p) = data.shape();
    let h = McdConfig::subset_size(cfg.eta, n);
    if h < p + 1 {
        return Err(BrandError::InsufficientRows { h, p });
    }

    let best = if h == n {
        let rows = linalg::all_rows(n);
        match RawCovariance.scatter(data, &rows) {
            Some((_, _, log_det)) => Concentration {
                subset: rows,
                log_det,
                history: vec![log_det],
            },
            None => Concentration {
                subset: rows,
                log_det: f64::NEG_INFINITY,
                history: vec![],
            },
        }
    } else {
        best_of(mcd_paths(data, cfg))
    };

    let Some((mean, cov, log_det)) = RawCovariance.scatter(data, &best.subset) else {
        return Err(BrandError::SingularSubset { determinant: 0.0 });
    };
    let c0 = consistency_factor(cfg.eta, p);
    Ok(RobustClassSummary {
        mean,
        scatter: cov * c0,
        untrimmed: best.subset,
        method: RobustMethod::Mcd,
        determinant: log_det.exp(),
        log_determinant: log_det,
        consistency_factor: c0,
        class_size: n,
    })
}

/// Largest and smallest eigenvalue of the subset covariance, computed on the
/// smaller of the covariance and the Gram matrix.
fn extreme_eigenvalues(z: &Matrix, subset: &[usize]) -> (f64, f64) {
    let p = z.ncols();
    let h = subset.len();
    let mean = linalg::subset_mean(z, subset);
    if h - 1 >= p {
        let cov = linalg::subset_covariance(z, subset, &mean);
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues.max(), eig.eigenvalues.min().max(0.0))
    } else {
        let mut centered = z.select_rows(subset.iter());
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let gram = &centered * centered.transpose() / (h - 1) as f64;
        let eig = SymmetricEigen::new(gram);
        (eig.eigenvalues.max(), 0.0)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn column_medians(z: &Matrix) -> Vec<f64> {
    (0..z.ncols())
        .map(|c| median(&mut z.column(c).iter().copied().collect::<Vec<_>>()))
        .collect()
}

/// Weiszfeld iterations for the spatial median.
fn spatial_median(z: &Matrix, start: Vec<f64>) -> Vec<f64> {
    let p = z.ncols();
    let mut m = start;
    for _ in 0..200 {
        let mut num = vec![0.0; p];
        let mut den = 0.0;
        for row in z.row_iter() {
            let d = (0..p).map(|c| (row[c] - m[c]).powi(2)).sum::<f64>().sqrt();
            if d < 1e-12 {
                continue;
            }
            for c in 0..p {
                num[c] += row[c] / d;
            }
            den += 1.0 / d;
        }
        if den == 0.0 {
            break;
        }
        let next: Vec<f64> = num.iter().map(|v| v / den).collect();
        let shift: f64 = next.iter().zip(&m).map(|(a, b)| (a - b).powi(2)).sum();
        m = next;
        if shift.sqrt() < 1e-10 {
            break;
        }
    }
    m
}

/// The `h` rows nearest (Euclidean) to the coordinatewise and to the spatial
/// median. Random starts rarely avoid every outlier when h is small, and with
/// h < p the C-steps seldom leave the region of their start.
fn deterministic_starts(z: &Matrix, h: usize) -> Vec<Vec<usize>> {
    let nearest = |centre: &[f64]| {
        let d: Vec<f64> = z
            .row_iter()
            .map(|row| row.iter().zip(centre).map(|(a, b)| (a - b).powi(2)).sum())
            .collect();
        smallest(&d, h)
    };
    let coordinatewise = column_medians(z);
    let spatial = spatial_median(z, coordinatewise.clone());
    vec![nearest(&coordinatewise), nearest(&spatial)]
}

/// Smallest grid value of rho in {0.01, ..., 1} for which the regularized
/// scatter has condition number at most `max_condition`.
fn rho_for(lambda_max: f64, lambda_min: f64, c0: f64, max_condition: f64) -> f64 {
    (1..=100)
        .map(|k| k as f64 / 100.0)
        .find(|&rho| {
            let top = rho + (1.0 - rho) * c0 * lambda_max;
            let bottom = rho + (1.0 - rho) * c0 * lambda_min;
            top <= max_condition * bottom
        })
        .unwrap_or(1.0)
}

/// Minimum Regularized Covariance Determinant.
///
/// The data are standardized by the target (`z = L^-1 (x - xbar)` with
/// `target = L L^T`), so the target becomes the identity. In those coordinates
/// the scatter of a subset `H` is `rho I + (1 - rho) c0 S(H)`, and the
/// condition-number rule for `rho` is evaluated there. The returned scatter is
/// mapped back: `rho target + (1 - rho) c0 S_x(H)`.
pub fn mrcd(data: &Matrix, cfg: &McdConfig, target: &Matrix) -> Result<RobustClassSummary> {
    cfg.validate()?;
    check_finite(data)?;
    let (n, p) = data.shape();
    if n < 2 {
        return Err(BrandError::InsufficientRows { h: n, p });
    }
    if target.shape() != (p, p) {
        return Err(BrandError::DimensionMismatch {
            expected: p,
            found: target.nrows(),
        });
    }
    let first = data.row(0);
    if data.row_iter().all(|r| r == first) {
        return Err(BrandError::DegenerateData);
    }
    let target_chol = linalg::cholesky(target)?;
    let l = target_chol.l();

    let center = linalg::subset_mean(data, &linalg::all_rows(n));
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= center.transpose();
    }
    // z^T = L^-1 x^T, row by row
    let z = l
        .solve_lower_triangular(&centered.transpose())
        .expect("target Cholesky factor is nonsingular")
        .transpose();

    let h = McdConfig::subset_size(cfg.eta, n).max(2);
    let c0 = consistency_factor(cfg.eta, p);

    let mut starts = deterministic_starts(&z, h);
    starts.extend((0..cfg.n_starts).map(|s| {
        let mut rng = seed::rng_for(cfg.seed, "mrcd-start", s as u64);
        let mut rows = index::sample(&mut rng, n, h).into_vec();
        rows.sort_unstable();
        rows
    }));

    let rho = match cfg.mrcd_rho {
        Some(rho) => rho,
        None => starts
            .par_iter()
            .map(|s| {
                let (max, min) = extreme_eigenvalues(&z, s);
                rho_for(max, min, c0, cfg.max_condition)
            })
            .reduce(|| 0.0, f64::max),
    };
    let objective = Regularized { rho, c0 };

    let results: Vec<Concentration> = starts
        .into_par_iter()
        .map(|start| concentrate(&objective, &z, start, h, cfg.max_csteps))
        .collect();
    let best = best_of(results);

    let mean_x = linalg::subset_mean(data, &best.subset);
    let cov_x = linalg::subset_covariance(data, &best.subset, &mean_x);
    let mut scatter = target * rho + cov_x * ((1.0 - rho) * c0);
    linalg::symmetrize(&mut scatter);
    let log_det = linalg::log_det_from_cholesky(&linalg::cholesky(&scatter)?);
    Ok(RobustClassSummary {
        mean: mean_x,
        scatter,
        untrimmed: best.subset,
        method: RobustMethod::Mrcd { rho },
        determinant: log_det.exp(),
        log_determinant: log_det,
        consistency_factor: c0,
        class_size: n,
    })
}

/// Mean squared MAD (normal-consistent) of the columns times the identity.
pub fn scaled_identity_target(data: &Matrix) -> Result<Matrix> {
    let p = data.ncols();
    let scales: Vec<f64> = (0..p)
        .map(|c| {
            let mut col: Vec<f64> = data.column(c).iter().copied().collect();
            let med = median(&mut col);
            let mut dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
            (1.482_602_218_505_602 * median(&mut dev)).powi(2)
        })
        .collect();
    let mut level = scales.iter().sum::<f64>() / p as f64;
    if !(level > 0.0) {
        level = diagonal_target(data)?.trace() / p as f64;
    }
    if !(level > 0.0) {
        return Err(BrandError::DegenerateData);
    }
    Ok(Matrix::identity(p, p) * level)
}

/// Diagonal of the sample covariance, the default MRCD target. Columns with
/// zero variance borrow the mean variance of the others.
pub fn diagonal_target(data: &Matrix) -> Result<Matrix> {
    let rows = linalg::all_rows(data.nrows());
    let mean = linalg::subset_mean(data, &rows);
    let cov = linalg::subset_covariance(data, &rows, &mean);
    let diag: Vec<f64> = cov.diagonal().iter().copied().collect();
    let positive: Vec<f64> = diag.iter().copied().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        return Err(BrandError::DegenerateData);
    }
    let fallback = positive.iter().sum::<f64>() / positive.len() as f64;
    let diag = diag.into_iter().map(|d| if d > 0.0 { d } else { fallback });
    Ok(Matrix::from_diagonal(&Vector::from_iterator(
        data.ncols(),
        diag,
    )))
}

/// Robust summary of one class: MCD when the subset can carry a nonsingular
/// covariance, MRCD otherwise or when MCD hits an exact fit.
pub fn robust_summary(data: &Matrix, cfg: &McdConfig) -> Result<RobustClassSummary> {
    let h = McdConfig::subset_size(cfg.eta, data.nrows());
    if h > data.ncols() {
        match fast_mcd(data, cfg) {
            Err(BrandError::SingularSubset { .. }) => {}
            other => return other,
        }
    }
    let target = match cfg.mrcd_target {
        MrcdTarget::Diagonal => diagonal_target(data)?,
        MrcdTarget::ScaledIdentity => scaled_identity_target(data)?,
    };
    mrcd(data, cfg, &target)
}

/// Stage I: one robust summary per observed class, with untrimmed indices
/// expressed as row numbers of the full training matrix.
pub fn extract_class_priors(
    train: &LabeledDataset,
    cfg: &McdConfig,
) -> Result<Vec<RobustClassSummary>> {
    cfg.validate()?;
    (1..=train.n_classes())
        .map(|class| {
            let rows = train.class_rows(class);
            let class_cfg = McdConfig {
                eta: cfg.eta_for(class),
                seed: seed::derive_seed(cfg.seed, "class", class as u64),
                ..cfg.clone()
            };
            let mut summary = robust_summary(&train.class_matrix(class), &class_cfg)
                .map_err(|e| e.in_class(class))?;
            summary.untrimmed = summary.untrimmed.iter().map(|&i| rows[i]).collect();
            Ok(summary)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn full_subset_reduces_to_sample_moments() {
        let data = gaussian(40, 3, 1);
        let s = fast_mcd(&data, &McdConfig::with_eta(1.0)).unwrap();
        let rows = linalg::all_rows(40);
        let mean = linalg::subset_mean(&data, &rows);
        let cov = linalg::subset_covariance(&data, &rows, &mean);
        assert_eq!(s.untrimmed, rows);
        assert_eq!(s.consistency_factor, 1.0);
        assert!((s.mean - mean).amax() < 1e-14);
        assert!((s.scatter - cov).amax() < 1e-14);
    }

    #[test]
    fn one_dimensional_outlier_is_trimmed() {
        let data = Matrix::from_column_slice(8, 1, &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 100.0]);
        let s = fast_mcd(&data, &McdConfig::with_eta(7.0 / 8.0)).unwrap();
        assert_eq!(s.untrimmed, vec![0, 1, 2, 3, 4, 5, 6]);
        assert!((s.mean[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn too_small_subset_is_rejected() {
        let data = gaussian(6, 4, 2);
        assert!(matches!(
            fast_mcd(&data, &McdConfig::with_eta(0.75)),
            Err(BrandError::InsufficientRows { h: 4, p: 4 })
        ));
    }

    #[test]
    fn collinear_majority_reports_singular_subset() {
        // 8 of 10 points on the line y = 2x
        let mut rows = Vec::new();
        for i in 0..8 {
            rows.extend_from_slice(&[i as f64, 2.0 * i as f64]);
        }
        rows.extend_from_slice(&[3.0, -5.0, -4.0, 7.0]);
        let data = Matrix::from_row_slice(10, 2, &rows);
        let err = fast_mcd(&data, &McdConfig::with_eta(0.8)).unwrap_err();
        assert!(matches!(err, BrandError::SingularSubset { .. }));
        // the class-level wrapper falls back to MRCD
        let s = robust_summary(&data, &McdConfig::with_eta(0.8)).unwrap();
        assert!(matches!(s.method, RobustMethod::Mrcd { .. }));
        assert!(linalg::cholesky(&s.scatter).is_ok());
    }

    #[test]
    fn consistency_factor_limits() {
        assert_eq!(consistency_factor(1.0, 5), 1.0);
        for p in 1..6 {
            for eta in [0.5, 0.6, 0.75, 0.9, 0.99] {
                assert!(consistency_factor(eta, p) >= 1.0);
            }
        }
    }

    #[test]
    fn consistency_factor_matches_frozen_quantiles() {
        // chi-square CDF/quantile values computed offline with scipy.stats.chi2
        let frozen = [
            (0.75, 2, 1.859_075_117_368_965_5),
            (0.5, 1, 7.010_074_539_703_252),
            (0.8, 2, 1.673_246_648_060_436_4),
            (0.875, 1, 1.758_244_037_821_889_3),
            (0.95, 7, 1.079_492_554_682_182_3),
            (0.75, 150, 1.052_755_318_093_396_6),
        ];
        for (eta, p, expected) in frozen {
            let got = consistency_factor(eta, p);
            assert!((got - expected).abs() < 1e-9 * expected, "{eta} {p}: {got}");
        }
    }

    #[test]
    fn csteps_never_increase_the_determinant() {
        let mut data = gaussian(60, 3, 7);
        for r in 0..12 {
            data[(r, 1)] += 8.0;
        }
        let cfg = McdConfig {
            n_starts: 40,
            ..McdConfig::with_eta(0.75)
        };
        for path in mcd_paths(&data, &cfg) {
            for w in path.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-10 * w[0].abs().max(1.0));
            }
        }
    }

    #[test]
    fn forced_full_shrinkage_returns_target() {
        let data = gaussian(20, 3, 3);
        let target = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]);
        let cfg = McdConfig {
            mrcd_rho: Some(1.0),
            ..McdConfig::with_eta(0.75)
        };
        let s = mrcd(&data, &cfg, &target).unwrap();
        assert!((s.scatter - target).amax() < 1e-12);
    }

    #[test]
    fn mrcd_rejects_identical_rows() {
        let data = Matrix::from_element(5, 2, 1.5);
        assert!(matches!(
            mrcd(&data, &McdConfig::default(), &Matrix::identity(2, 2)),
            Err(BrandError::DegenerateData)
        ));
    }

    #[test]
    fn high_dimensional_mrcd_is_well_conditioned() {
        let data = gaussian(28, 150, 4);
        let cfg = McdConfig {
            n_starts: 50,
            ..McdConfig::with_eta(0.75)
        };
        let s = robust_summary(&data, &cfg).unwrap();
        let RobustMethod::Mrcd { rho } = s.method else {
            panic!("expected MRCD");
        };
        assert!(rho > 0.0 && rho <= 1.0);
        assert_eq!(s.untrimmed.len(), 21);
        // condition number measured where the target is the identity
        let target = diagonal_target(&data).unwrap();
        let scale = target.map_diagonal(|d| 1.0 / d.sqrt());
        let d = Matrix::from_diagonal(&scale);
        let standardized = &d * &s.scatter * &d;
        assert!(linalg::condition_number(&standardized) <= 1000.0 * (1.0 + 1e-9));
    }

    #[test]
    fn class_extraction_maps_indices_to_training_rows() {
        let mut data = gaussian(30, 2, 5);
        for r in 15..30 {
            data[(r, 0)] += 10.0;
        }
        let labels: Vec<usize> = (0..30).map(|i| if i % 2 == 0 { 1 } else { 2 }).collect();
        let train = LabeledDataset::new(data, labels.clone()).unwrap();
        let cfg = McdConfig {
            n_starts: 50,
            ..McdConfig::with_eta(0.8)
        };
        let summaries = extract_class_priors(&train, &cfg).unwrap();
        assert_eq!(summaries.len(), 2);
        for (j, s) in summaries.iter().enumerate() {
            assert_eq!(s.untrimmed.len(), 12);
            assert!(s.untrimmed.iter().all(|&r| labels[r] == j + 1));
        }
    }

    #[test]
    fn labeled_dataset_validation() {
        let data = gaussian(4, 2, 6);
        assert!(LabeledDataset::new(data.clone(), vec![1, 1, 2]).is_err());
        assert!(LabeledDataset::new(data.clone(), vec![0, 1, 1, 1]).is_err());
        assert!(LabeledDataset::new(data.clone(), vec![1, 1, 1, 2]).is_err());
        let ds = LabeledDataset::new(data, vec![2, 1, 2, 1]).unwrap();
        assert_eq!(ds.class_sizes(), vec![2, 2]);
        assert_eq!(ds.class_rows(2), vec![0, 2]);
    }
}
