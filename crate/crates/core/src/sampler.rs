//! Independent slice-efficient Gibbs sampler.
//!
//! The sweep is written once against [`ComponentModel`], which supplies the
//! kernel densities and the conjugate atom updates; the multivariate Gaussian
//! model lives here and the functional model in [`crate::functional`].

use rand::distr::Open01;
use rand::{Rng, RngExt};
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::error::{BrandError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::model::{
    alpha_beta_to_zeta, stick_breaking, truncation_level, xi_sequence, zeta_to_alpha_beta,
    GammaSpec, GaussianAtom, GaussianKernel, Hyperparameters, NiwParams, ResolvedPriors,
    TestDataset,
};
use crate::robust::RobustClassSummary;
use crate::seed::{self, BrandRng};

/// Floor on normalized allocation weights of eligible slots.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Kernel family plugged into the slice sampler.
pub trait ComponentModel: Sync {
    type Known: Clone + Send + Sync;
    type Novel: Clone + Send + Sync;

    fn n_units(&self) -> usize;
    fn n_known(&self) -> usize;

    fn initial_known(&self) -> Result<Vec<Self::Known>>;
    fn log_lik_known(&self, unit: usize, atom: &Self::Known) -> f64;
    fn log_lik_novel(&self, unit: usize, atom: &Self::Novel) -> f64;

    /// Draw of known atom `class` (0-based) given its current members.
    fn update_known(
        &self,
        class: usize,
        members: &[usize],
        current: &Self::Known,
        rng: &mut BrandRng,
    ) -> Result<Self::Known>;

    /// Draw of a novelty atom given its members; a prior draw when empty.
    /// `current` is the atom held by the slot in the previous sweep.
    fn update_novel(
        &self,
        members: &[usize],
        current: Option<&Self::Novel>,
        rng: &mut BrandRng,
    ) -> Result<Self::Novel>;

    /// Whether a unit is implausible under a known atom; used only to
    /// initialise the chain.
    fn poorly_fit(&self, unit: usize, atom: &Self::Known) -> bool;

    /// Coordinates used to split initially novel units into clusters.
    fn features(&self, unit: usize) -> Vec<f64>;

    fn snapshot(&self, known: &[Self::Known], novel: &[(usize, &Self::Novel)])
        -> serde_json::Value;
}

/// Settings shared by every chain regardless of kernel family.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SamplerSettings {
    /// Dirichlet weights (a_0, ..., a_J).
    pub a: Vec<f64>,
    pub kappa: f64,
    pub gamma: GammaSpec,
    pub n_iter: usize,
    pub n_burnin: usize,
    pub seed: u64,
    pub snapshot_every: usize,
}

impl SamplerSettings {
    pub fn new(hp: &Hyperparameters, a: Vec<f64>) -> Self {
        SamplerSettings {
            a,
            kappa: hp.kappa,
            gamma: hp.gamma,
            n_iter: hp.n_iter,
            n_burnin: hp.n_burnin,
            seed: hp.seed,
            snapshot_every: hp.snapshot_every,
        }
    }

    pub fn n_known(&self) -> usize {
        self.a.len() - 1
    }
}

/// Current values of every latent quantity of the chain.
#[derive(Debug, Clone)]
pub struct ChainState<K, N> {
    /// (π_0, π_1, ..., π_J).
    pub pi: Vec<f64>,
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub known: Vec<K>,
    /// Novelty atoms by stick index (slot h is `novel[h - 1]`).
    pub novel: Vec<N>,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub u: Vec<f64>,
    pub l_star: usize,
    pub gamma: f64,
}

impl<K, N> ChainState<K, N> {
    pub fn zeta(&self, m: usize) -> usize {
        alpha_beta_to_zeta(self.alpha[m], self.beta[m], self.known.len())
    }

    /// Number of novelty units and of occupied novelty clusters.
    pub fn novelty_occupancy(&self) -> (usize, usize) {
        let mut occupied: Vec<usize> = self.beta.iter().copied().filter(|&b| b > 0).collect();
        let n = occupied.len();
        occupied.sort_unstable();
        occupied.dedup();
        (n, occupied.len())
    }
}

/// Opaque record of the atoms at one retained iteration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AtomSnapshot {
    pub iteration: usize,
    pub atoms: serde_json::Value,
}

/// Retained draws, one row per post-burn-in iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub n_units: usize,
    pub n_known: usize,
    /// Row-major I × M.
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    /// Row-major I × (J+1).
    pub pi: Vec<f64>,
    pub gamma: Vec<f64>,
    pub n_active: Vec<u32>,
    pub snapshots: Vec<AtomSnapshot>,
}

impl ChainOutput {
    fn with_capacity(n_units: usize, n_known: usize, iters: usize) -> Self {
        ChainOutput {
            n_units,
            n_known,
            alpha: Vec::with_capacity(iters * n_units),
            beta: Vec::with_capacity(iters * n_units),
            pi: Vec::with_capacity(iters * (n_known + 1)),
            gamma: Vec::with_capacity(iters),
            n_active: Vec::with_capacity(iters),
            snapshots: Vec::new(),
        }
    }

    pub fn n_iter(&self) -> usize {
        self.gamma.len()
    }

    pub fn alpha_row(&self, i: usize) -> &[u32] {
        &self.alpha[i * self.n_units..(i + 1) * self.n_units]
    }

    pub fn beta_row(&self, i: usize) -> &[u32] {
        &self.beta[i * self.n_units..(i + 1) * self.n_units]
    }

    pub fn pi_row(&self, i: usize) -> &[f64] {
        let w = self.n_known + 1;
        &self.pi[i * w..(i + 1) * w]
    }

    /// α trace of one unit across retained iterations.
    pub fn alpha_of(&self, unit: usize) -> Vec<u32> {
        (0..self.n_iter())
            .map(|i| self.alpha_row(i)[unit])
            .collect()
    }

    pub fn beta_of(&self, unit: usize) -> Vec<u32> {
        (0..self.n_iter()).map(|i| self.beta_row(i)[unit]).collect()
    }

    fn record<K, N>(&mut self, state: &ChainState<K, N>) {
        self.alpha.extend(state.alpha.iter().map(|&a| a as u32));
        self.beta.extend(state.beta.iter().map(|&b| b as u32));
        self.pi.extend_from_slice(&state.pi);
        self.gamma.push(state.gamma);
        self.n_active.push(state.l_star as u32);
    }
}

pub fn sample_dirichlet<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = weights
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter().map(|g| g / total).collect()
    } else {
        // every shape tiny enough to underflow: the mass sits on the largest
        let best = weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        (0..weights.len())
            .map(|i| f64::from(u8::from(i == best)))
            .collect()
    }
}

/// Conjugate NIW update with the rows of `obs` as observations.
pub fn niw_posterior(prior: &NiwParams, obs: &Matrix) -> NiwParams {
    niw_posterior_rows(prior, obs, &linalg::all_rows(obs.nrows()))
}

pub fn niw_posterior_rows(prior: &NiwParams, data: &Matrix, rows: &[usize]) -> NiwParams {
    let n = rows.len();
    if n == 0 {
        return prior.clone();
    }
    let nf = n as f64;
    let xbar = linalg::subset_mean(data, rows);
    let scatter = if n > 1 {
        linalg::subset_covariance(data, rows, &xbar) * (nf - 1.0)
    } else {
        Matrix::zeros(xbar.len(), xbar.len())
    };
    let lambda = prior.precision_scale;
    let diff = &xbar - &prior.mean;
    let mut scale =
        &prior.scale_matrix + scatter + (&diff * diff.transpose()) * (lambda * nf / (lambda + nf));
    linalg::symmetrize(&mut scale);
    NiwParams {
        mean: (&prior.mean * lambda + &xbar * nf) / (lambda + nf),
        precision_scale: lambda + nf,
        dof: prior.dof + nf,
        scale_matrix: scale,
    }
}

/// Σ ~ IW(ν, S) via the Bartlett decomposition, then μ | Σ ~ N(m, Σ/λ).
pub fn sample_niw<R: Rng + ?Sized>(params: &NiwParams, rng: &mut R) -> Result<GaussianAtom> {
    let p = params.dim();
    let lower = linalg::cholesky(&params.scale_matrix)?.l();
    // W0 = A A^T ~ Wishart(ν, I); Σ = U (A A^T)^{-1} U^T with S = U U^T
    let mut a = Matrix::zeros(p, p);
    for i in 0..p {
        let dof = params.dof - i as f64;
        a[(i, i)] = ChiSquared::new(dof)
            .map_err(|_| BrandError::InvalidInput(format!("inverse-Wishart dof {dof}")))?
            .sample(rng)
            .sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    // C = U A^{-T}: solve A X = U^T for X = C^T
    let ct = a
        .solve_lower_triangular(&lower.transpose())
        .ok_or_else(|| BrandError::NotPositiveDefinite("Bartlett factor is singular".into()))?;
    let mut cov = ct.transpose() * &ct;
    linalg::symmetrize(&mut cov);
    let chol = linalg::cholesky(&cov)?;
    let z = Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
    let mean = &params.mean + chol.l() * z / params.precision_scale.sqrt();
    Ok(GaussianAtom { mean, cov })
}

/// DP concentration update given `n_novel` units in `k_novel` clusters,
/// using the auxiliary-variable scheme for a Gamma(shape, rate) prior.
pub fn update_gamma<R: Rng + ?Sized>(
    spec: &GammaSpec,
    current: f64,
    n_novel: usize,
    k_novel: usize,
    rng: &mut R,
) -> f64 {
    let GammaSpec::Random { shape, rate, .. } = *spec else {
        return current;
    };
    if n_novel == 0 || k_novel == 0 {
        return Gamma::new(shape, 1.0 / rate)
            .expect("valid prior")
            .sample(rng);
    }
    let n = n_novel as f64;
    let k = k_novel as f64;
    let eta: f64 = Beta::new(current + 1.0, n).expect("valid beta").sample(rng);
    let post_rate = rate - eta.ln();
    let odds = (shape + k - 1.0) / (n * post_rate);
    let post_shape = if rng.random::<f64>() < odds / (1.0 + odds) {
        shape + k
    } else {
        shape + k - 1.0
    };
    Gamma::new(post_shape, 1.0 / post_rate)
        .expect("valid posterior")
        .sample(rng)
}

/// Lloyd's algorithm with k-means++ seeding. Returns labels in `0..k`.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut BrandRng) -> Vec<usize> {
    let n = points.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| dist(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, di) in d.iter().enumerate() {
            if target < *di {
                pick = i;
                break;
            }
            target -= di;
        }
        centers.push(points[pick].clone());
    }
    let mut labels = vec![0; n];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..centers.len())
                .min_by(|&a, &b| dist(p, &centers[a]).total_cmp(&dist(p, &centers[b])))
                .unwrap_or(0);
            if best != labels[i] {
                labels[i] = best;
                changed = true;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (d, x) in center.iter_mut().enumerate() {
                *x = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    // relabel by order of first appearance so labels are dense
    let mut map = vec![usize::MAX; centers.len()];
    let mut next = 0;
    labels
        .into_iter()
        .map(|l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect()
}

/// Largest number of clusters used to split the initially novel units.
const MAX_INITIAL_CLUSTERS: usize = 10;

/// Starting state: known atoms at their prior centres, each unit with its
/// best known class unless it is implausible there, in which case it starts
/// in one of up to ten k-means novelty clusters.
pub fn initial_state<M: ComponentModel>(
    model: &M,
    settings: &SamplerSettings,
    rng: &mut BrandRng,
) -> Result<ChainState<M::Known, M::Novel>> {
    let n_units = model.n_units();
    let known = model.initial_known()?;
    let mut alpha = vec![0; n_units];
    let mut beta = vec![0; n_units];
    let mut novel_units = Vec::new();
    for m in 0..n_units {
        let best = (0..known.len())
            .map(|j| (j, model.log_lik_known(m, &known[j])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(j, _)| j);
        match best {
            Some(j) if !model.poorly_fit(m, &known[j]) => alpha[m] = j + 1,
            _ => novel_units.push(m),
        }
    }
    if !novel_units.is_empty() {
        let points: Vec<Vec<f64>> = novel_units.iter().map(|&m| model.features(m)).collect();
        let k = MAX_INITIAL_CLUSTERS.min(novel_units.len());
        for (&m, l) in novel_units.iter().zip(kmeans(&points, k, rng)) {
            beta[m] = l + 1;
        }
    }
    let mut pi = settings.a.clone();
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(ChainState {
        pi,
        v: Vec::new(),
        omega: Vec::new(),
        known,
        novel: Vec::new(),
        alpha,
        beta,
        u: vec![0.0; n_units],
        l_star: settings.n_known() + 1,
        gamma: settings.gamma.initial(),
    })
}

/// One sweep of the slice-efficient sampler.
pub fn gibbs_step<M: ComponentModel>(
    state: &mut ChainState<M::Known, M::Novel>,
    model: &M,
    settings: &SamplerSettings,
    rng: &mut BrandRng,
) -> Result<()> {
    let n_known = settings.n_known();
    let n_units = model.n_units();
    let kappa = settings.kappa;

    // slice variables and the truncation they induce
    for m in 0..n_units {
        let xi = xi_sequence(kappa, n_known, state.zeta(m));
        let draw: f64 = rng.sample(Open01);
        state.u[m] = draw * xi;
    }
    state.l_star = if n_units == 0 {
        n_known + 1
    } else {
        truncation_level(&state.u, kappa, n_known)?
    };
    let n_sticks = state.l_star - n_known;

    // component weights
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); n_known + 1];
    let mut cluster_members: Vec<Vec<usize>> = vec![Vec::new(); n_sticks];
    for m in 0..n_units {
        class_members[state.alpha[m]].push(m);
        if state.beta[m] > 0 {
            cluster_members[state.beta[m] - 1].push(m);
        }
    }
    let posterior_a: Vec<f64> = settings
        .a
        .iter()
        .zip(&class_members)
        .map(|(a, members)| a + members.len() as f64)
        .collect();
    state.pi = sample_dirichlet(&posterior_a, rng);

    let (n_novel, k_novel) = state.novelty_occupancy();
    state.gamma = update_gamma(&settings.gamma, state.gamma, n_novel, k_novel, rng);

    let mut beyond = n_novel;
    state.v = cluster_members
        .iter()
        .map(|members| {
            beyond -= members.len();
            let a = 1.0 + members.len() as f64;
            let b = state.gamma + beyond as f64;
            Beta::new(a, b)
                .expect("positive Beta parameters")
                .sample(rng)
        })
        .collect();
    state.omega = stick_breaking(&state.v);
    let mut log_weight: Vec<f64> = Vec::with_capacity(state.l_star);
    log_weight.extend(state.pi[1..].iter().map(|p| p.ln()));
    log_weight.extend(state.omega.iter().map(|w| (state.pi[0] * w).ln()));
    for (l, lw) in log_weight.iter_mut().enumerate() {
        *lw -= xi_sequence(kappa, n_known, l + 1).ln();
    }

    // atoms
    for j in 0..n_known {
        state.known[j] = model.update_known(j, &class_members[j + 1], &state.known[j], rng)?;
    }
    let previous = std::mem::take(&mut state.novel);
    state.novel = cluster_members
        .iter()
        .enumerate()
        .map(|(h, members)| model.update_novel(members, previous.get(h), rng))
        .collect::<Result<_>>()?;

    // allocations
    let l_star = state.l_star;
    let mut loglik = vec![0.0; n_units * l_star];
    let fill = |(m, row): (usize, &mut [f64])| {
        for (l, slot) in row.iter_mut().enumerate() {
            *slot = if l < n_known {
                model.log_lik_known(m, &state.known[l])
            } else {
                model.log_lik_novel(m, &state.novel[l - n_known])
            };
        }
    };
    if n_units * l_star >= 2048 {
        loglik.par_chunks_mut(l_star).enumerate().for_each(fill);
    } else {
        loglik.chunks_mut(l_star).enumerate().for_each(fill);
    }

    let mut weights = vec![0.0; l_star];
    for m in 0..n_units {
        let row = &loglik[m * l_star..(m + 1) * l_star];
        let u = state.u[m];
        let mut eligible = 0;
        let mut top = f64::NEG_INFINITY;
        for l in 0..l_star {
            if xi_sequence(kappa, n_known, l + 1) > u {
                eligible = l + 1;
                top = top.max(log_weight[l] + row[l]);
            }
        }
        if eligible == 0 {
            return Err(BrandError::AllSlicesEmpty { unit: m });
        }
        let mut total = 0.0;
        for l in 0..eligible {
            let w = (log_weight[l] + row[l] - top).exp();
            weights[l] = if w.is_nan() {
                WEIGHT_FLOOR
            } else {
                w.max(WEIGHT_FLOOR)
            };
            total += weights[l];
        }
        let mut target = rng.random::<f64>() * total;
        let mut zeta = eligible;
        for (l, w) in weights[..eligible].iter().enumerate() {
            if target < *w {
                zeta = l + 1;
                break;
            }
            target -= w;
        }
        let (a, b) = zeta_to_alpha_beta(zeta, n_known);
        state.alpha[m] = a;
        state.beta[m] = b;
    }
    Ok(())
}

/// Runs a full chain, keeping every iteration after burn-in.
pub fn run_model<M: ComponentModel>(model: &M, settings: &SamplerSettings) -> Result<ChainOutput> {
    if settings.n_iter <= settings.n_burnin {
        return Err(BrandError::InvalidInput(format!(
            "n_iter ({}) must exceed n_burnin ({})",
            settings.n_iter, settings.n_burnin
        )));
    }
    if settings.a.len() != model.n_known() + 1 {
        return Err(BrandError::LengthMismatch {
            left: settings.a.len(),
            right: model.n_known() + 1,
        });
    }
    let mut rng = seed::rng_for(settings.seed, "chain", 0);
    let mut state = initial_state(model, settings, &mut rng)?;
    let kept = settings.n_iter - settings.n_burnin;
    let mut out = ChainOutput::with_capacity(model.n_units(), model.n_known(), kept);
    for it in 0..settings.n_iter {
        gibbs_step(&mut state, model, settings, &mut rng).map_err(|e| e.at_iteration(it))?;
        if it < settings.n_burnin {
            continue;
        }
        out.record(&state);
        let retained = it - settings.n_burnin;
        if settings.snapshot_every > 0 && retained % settings.snapshot_every == 0 {
            let mut occupied: Vec<usize> = state.beta.iter().copied().filter(|&b| b > 0).collect();
            occupied.sort_unstable();
            occupied.dedup();
            let novel: Vec<(usize, &M::Novel)> =
                occupied.iter().map(|&h| (h, &state.novel[h - 1])).collect();
            out.snapshots.push(AtomSnapshot {
                iteration: it,
                atoms: model.snapshot(&state.known, &novel),
            });
        }
    }
    Ok(out)
}

/// Multivariate Gaussian kernels with NIW priors.
pub struct GaussianModel<'a> {
    data: &'a TestDataset,
    priors: &'a ResolvedPriors,
    outlier_cutoff: f64,
    /// Row-major copy of the observations.
    rows: Vec<f64>,
}

impl<'a> GaussianModel<'a> {
    pub fn new(data: &'a TestDataset, priors: &'a ResolvedPriors) -> Result<Self> {
        let p = priors.base.dim();
        if data.dim() != p {
            return Err(BrandError::DimensionMismatch {
                expected: p,
                found: data.dim(),
            });
        }
        let cutoff = ChiSquaredLaw::new(p as f64)
            .expect("p >= 1")
            .inverse_cdf(0.999);
        let rows = data.data().transpose().as_slice().to_vec();
        Ok(GaussianModel {
            data,
            priors,
            outlier_cutoff: cutoff,
            rows,
        })
    }

    fn row(&self, unit: usize) -> &[f64] {
        let p = self.data.dim();
        &self.rows[unit * p..(unit + 1) * p]
    }
}

impl ComponentModel for GaussianModel<'_> {
    type Known = GaussianKernel;
    type Novel = GaussianKernel;

    fn n_units(&self) -> usize {
        self.data.len()
    }

    fn n_known(&self) -> usize {
        self.priors.known.len()
    }

    fn initial_known(&self) -> Result<Vec<GaussianKernel>> {
        self.priors
            .known
            .iter()
            .map(|niw| {
                let p = niw.dim() as f64;
                GaussianKernel::new(GaussianAtom {
                    mean: niw.mean.clone(),
                    cov: &niw.scale_matrix / (niw.dof - p - 1.0),
                })
            })
            .collect()
    }

    fn log_lik_known(&self, unit: usize, atom: &GaussianKernel) -> f64 {
        atom.log_density(self.row(unit))
    }

    fn log_lik_novel(&self, unit: usize, atom: &GaussianKernel) -> f64 {
        atom.log_density(self.row(unit))
    }

    fn update_known(
        &self,
        class: usize,
        members: &[usize],
        current: &GaussianKernel,
        rng: &mut BrandRng,
    ) -> Result<GaussianKernel> {
        if self.priors.frozen {
            return Ok(current.clone());
        }
        let post = niw_posterior_rows(&self.priors.known[class], self.data.data(), members);
        GaussianKernel::new(sample_niw(&post, rng)?)
    }

    fn update_novel(
        &self,
        members: &[usize],
        _current: Option<&GaussianKernel>,
        rng: &mut BrandRng,
    ) -> Result<GaussianKernel> {
        let post = niw_posterior_rows(&self.priors.base, self.data.data(), members);
        GaussianKernel::new(sample_niw(&post, rng)?)
    }

    fn poorly_fit(&self, unit: usize, atom: &GaussianKernel) -> bool {
        atom.mahalanobis_sq(self.row(unit)) > self.outlier_cutoff
    }

    fn features(&self, unit: usize) -> Vec<f64> {
        self.row(unit).to_vec()
    }

    fn snapshot(
        &self,
        known: &[GaussianKernel],
        novel: &[(usize, &GaussianKernel)],
    ) -> serde_json::Value {
        serde_json::json!({
            "known": known.iter().map(|k| &k.atom).collect::<Vec<_>>(),
            "novel": novel
                .iter()
                .map(|(h, k)| serde_json::json!({ "cluster": h, "atom": &k.atom }))
                .collect::<Vec<_>>(),
        })
    }
}

/// Stage II for multivariate data: resolves the priors from the Stage I
/// summaries and runs one chain.
pub fn run_chain(
    data: &TestDataset,
    priors: &[RobustClassSummary],
    hp: &Hyperparameters,
) -> Result<ChainOutput> {
    let sizes: Vec<usize> = priors.iter().map(|s| s.class_size).collect();
    let resolved = hp.resolve(priors, &sizes)?;
    let model = GaussianModel::new(data, &resolved)?;
    run_model(&model, &SamplerSettings::new(hp, resolved.a.clone()))
}
