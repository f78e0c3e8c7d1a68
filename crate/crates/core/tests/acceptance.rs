//! Acceptance suite. Runs as a plain binary (`harness = false`) so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion fails.
//!
//! `BRAND_SEEDS_PATH` may point at `seeds_dataset.txt` to enable the seeds
//! criterion; without it that criterion reports SKIP.

use std::collections::BTreeSet;
use std::time::Instant;

use brand::functional::{
    extract_functional_priors, psi_conditional, rho_conditional, run_functional_chain,
    sigma2_conditional, tau2_conditional, FunctionalHyper, InvGamma, Normal1, PriorOptions,
};
use brand::io;
use brand::linalg::{cholesky, condition_number, Matrix, Vector};
use brand::model::{
    covariance_decrement, prior_covariance, prior_mean, prior_variance, tie_probability,
    xi_sequence, xi_tail_mass, Hyperparameters, NiwParams, PriorMoments, TestDataset,
};
use brand::postprocess::{
    best_partition_vi, canonical, metrics, summarize, Metrics, PostprocessConfig, UnitLabel,
};
use brand::robust::{extract_class_priors, fast_mcd, LabeledDataset, McdConfig, RobustMethod};
use brand::sampler::{
    gibbs_step, initial_state, niw_posterior, run_chain, run_model, GaussianModel, SamplerSettings,
};
use brand::seed::{rng_for, BrandRng};
use brand::simulate::{
    generate_functional_simulation, generate_simulation, FunctionalSimulationSpec, Scenario,
    Simulation, SimulationSpec,
};
use rand::seq::SliceRandom;
use rand::RngExt;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

const SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

/// Base measure of the simulation study: m0 = 0, λ0 = 0.01, ν0 = 10, S0 = 10 I.
fn simulation_hyper(lambda_tr: f64, iters: usize) -> Hyperparameters {
    Hyperparameters {
        lambda_tr,
        m0: 0.0,
        lambda0: 0.01,
        nu0: 10.0,
        s0: 10.0,
        n_iter: 2 * iters,
        n_burnin: iters,
        seed: SEED,
        ..Hyperparameters::default()
    }
}

fn fit_simulation(sim: &Simulation, eta: f64, lambda_tr: f64, iters: usize) -> Metrics {
    let priors = extract_class_priors(&sim.train, &McdConfig::with_eta(eta)).expect("stage I");
    let out = run_chain(&sim.test, &priors, &simulation_hyper(lambda_tr, iters)).expect("chain");
    let s = summarize(&out, &PostprocessConfig::default()).expect("summary");
    metrics(&s.labels, &sim.truth, sim.train.n_classes()).expect("metrics")
}

fn notsmall_noise() -> Simulation {
    generate_simulation(&SimulationSpec::scenario(Scenario::NotSmallNoise, SEED)).expect("sim")
}

fn criterion_1(robust: &Metrics, secs: f64) -> Outcome {
    let pass = robust.known_accuracy >= 0.95
        && robust.ari >= 0.85
        && robust.novelty_precision >= 0.95
        && secs <= 900.0;
    Outcome::new(
        pass,
        format!(
            "accuracy {:.3} (>= 0.95), ARI {:.3} (>= 0.85), precision {:.3} (>= 0.95), {:.0}s",
            robust.known_accuracy, robust.ari, robust.novelty_precision, secs
        ),
    )
}

fn criterion_2(robust: &Metrics, sim: &Simulation) -> Outcome {
    let naive = fit_simulation(sim, 1.0, 1000.0, 10_000);
    Outcome::new(
        naive.known_accuracy <= 0.6 && robust.known_accuracy >= 0.95,
        format!(
            "eta=1/lambda=1000 accuracy {:.3} (<= 0.6), eta=0.75/lambda=10 accuracy {:.3} (>= 0.95)",
            naive.known_accuracy, robust.known_accuracy
        ),
    )
}

fn criterion_3() -> Outcome {
    let Ok(path) = std::env::var("BRAND_SEEDS_PATH") else {
        return Outcome::new(true, "SKIP: BRAND_SEEDS_PATH not set, not verified".into());
    };
    let (data, labels) =
        io::load_multivariate(std::path::Path::new(&path), true).expect("seeds file");
    let labels = labels.expect("labels");
    let mut rng = rng_for(SEED, "seeds-split", 0);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for class in 1..=3 {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        rows.shuffle(&mut rng);
        if class < 3 {
            train_rows.extend_from_slice(&rows[..35]);
            test_rows.extend_from_slice(&rows[35..70]);
        } else {
            test_rows.extend_from_slice(&rows[..35]);
        }
    }
    let pick =
        |rows: &[usize]| Matrix::from_fn(rows.len(), data.ncols(), |i, j| data[(rows[i], j)]);
    let train = LabeledDataset::new(
        pick(&train_rows),
        train_rows.iter().map(|&r| labels[r]).collect(),
    )
    .expect("train");
    let test = TestDataset::new(pick(&test_rows)).expect("test");
    let truth: Vec<usize> = test_rows.iter().map(|&r| labels[r]).collect();
    let priors = extract_class_priors(&train, &McdConfig::with_eta(0.95)).expect("stage I");
    let hp = Hyperparameters {
        lambda_tr: 1000.0,
        nu_tr: Some(250.0),
        m0: 0.0,
        lambda0: 0.01,
        nu0: 10.0,
        s0: 1.0,
        n_iter: 30_000,
        n_burnin: 20_000,
        seed: SEED,
        ..Hyperparameters::default()
    };
    let out = run_chain(&test, &priors, &hp).expect("chain");
    let s = summarize(&out, &PostprocessConfig::default()).expect("summary");
    let correct = s
        .labels
        .iter()
        .zip(&truth)
        .filter(|(l, &t)| match l {
            UnitLabel::Known(j) => *j == t,
            UnitLabel::Novel(_) => t == 3,
        })
        .count();
    let captured = s
        .labels
        .iter()
        .zip(&truth)
        .filter(|(l, &t)| l.is_novel() && t == 3)
        .count();
    Outcome::new(
        correct >= 85 && captured >= 24,
        format!("{correct}/105 correct (>= 85), {captured}/35 novel grains captured (>= 24)"),
    )
}

fn normal(rng: &mut BrandRng) -> f64 {
    StandardNormal.sample(rng)
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut s, mut s2) = (0.0, 0.0, 0.0);
    for x in xs {
        n += 1.0;
        s += x;
        s2 += x * x;
    }
    let mean = s / n;
    let var = (s2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two draws from the random measure Σ_j π_j δ_{Θ_j} + π_0 Σ_h ω_h δ_{Θ_h^nov},
/// with normal P_j and H. Returns the two values and whether they share an
/// atom. `gamma = 0` is the single-novelty-atom limit.
fn draw_pair(m: &PriorMoments, sd: &[f64], gamma: f64, rng: &mut BrandRng) -> (f64, f64, bool) {
    let g: Vec<f64> =
        m.a.iter()
            .map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng))
            .collect();
    let total: f64 = g.iter().sum();
    let mut sticks: Vec<f64> = Vec::new();
    let mut novel: Vec<f64> = Vec::new();
    let mut known: Vec<Option<f64>> = vec![None; m.a.len()];
    let mut pick = |rng: &mut BrandRng| -> (f64, (usize, usize)) {
        let mut u = rng.random::<f64>() * total;
        let mut comp = m.a.len() - 1;
        for (j, gj) in g.iter().enumerate() {
            if u < *gj {
                comp = j;
                break;
            }
            u -= gj;
        }
        if comp > 0 {
            let v = *known[comp].get_or_insert_with(|| m.mean[comp] + sd[comp] * normal(rng));
            return (v, (comp, 0));
        }
        let mut w = rng.random::<f64>();
        let mut h = 0;
        loop {
            if h == sticks.len() {
                let v = if gamma == 0.0 {
                    1.0
                } else {
                    Beta::new(1.0, gamma).unwrap().sample(rng)
                };
                sticks.push(v);
                novel.push(m.mean[0] + sd[0] * normal(rng));
            }
            if w < sticks[h] {
                return (novel[h], (0, h));
            }
            w = (w - sticks[h]) / (1.0 - sticks[h]);
            h += 1;
        }
    };
    let (x, ix) = pick(rng);
    let (y, iy) = pick(rng);
    (x, y, ix == iy)
}

fn criterion_4() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut rng = rng_for(SEED, "prior-moments", 0);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let j = rng.random_range(1..=3usize);
        let a: Vec<f64> = (0..=j).map(|_| rng.random_range(0.2..3.0)).collect();
        let mean: Vec<f64> = (0..=j).map(|_| rng.random_range(-3.0..3.0)).collect();
        let sd: Vec<f64> = (0..=j).map(|_| rng.random_range(0.3..2.0)).collect();
        let var: Vec<f64> = sd.iter().map(|s| s * s).collect();
        let gamma = rng.random_range(0.2..5.0);
        let m = PriorMoments::from_variances(a.clone(), mean, &var).unwrap();
        let mu = prior_mean(&m);
        let draws: Vec<(f64, f64, bool)> = (0..DRAWS)
            .map(|_| draw_pair(&m, &sd, gamma, &mut rng))
            .collect();
        let limit: Vec<(f64, f64, bool)> = (0..DRAWS)
            .map(|_| draw_pair(&m, &sd, 0.0, &mut rng))
            .collect();
        let z = |(est, se): (f64, f64), target: f64| ((est - target) / se).abs();
        let (cg, sg) = mean_se(draws.iter().map(|d| (d.0 - mu) * (d.1 - mu)));
        let (c0, s0) = mean_se(limit.iter().map(|d| (d.0 - mu) * (d.1 - mu)));
        let decrement_z =
            ((cg - c0) - covariance_decrement(&m, gamma)).abs() / (sg * sg + s0 * s0).sqrt();
        let zs = [
            z(mean_se(draws.iter().map(|d| d.0)), mu),
            z(
                mean_se(draws.iter().map(|d| (d.0 - mu).powi(2))),
                prior_variance(&m),
            ),
            z(
                mean_se(draws.iter().map(|d| f64::from(u8::from(d.2)))),
                tie_probability(&a, gamma),
            ),
            z((cg, sg), prior_covariance(&m, gamma)),
            decrement_z,
        ];
        worst = zs.iter().copied().fold(worst, f64::max);
    }
    Outcome::new(
        worst < 4.0,
        format!("largest deviation {worst:.2} standard errors over 5 configurations (< 4)"),
    )
}

fn exhaustive_mcd(data: &Matrix, h: usize) -> Vec<usize> {
    let n = data.nrows();
    let mut best = (f64::INFINITY, Vec::new());
    let mut subset: Vec<usize> = (0..h).collect();
    loop {
        let k = h as f64;
        let (mut mx, mut my) = (0.0, 0.0);
        for &r in &subset {
            mx += data[(r, 0)];
            my += data[(r, 1)];
        }
        mx /= k;
        my /= k;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for &r in &subset {
            let (dx, dy) = (data[(r, 0)] - mx, data[(r, 1)] - my);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        let det = sxx * syy - sxy * sxy;
        if det < best.0 {
            best = (det, subset.clone());
        }
        // next combination in lexicographic order
        let mut i = h;
        while i > 0 && subset[i - 1] == n - h + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best.1;
        }
        subset[i - 1] += 1;
        for k in i..h {
            subset[k] = subset[k - 1] + 1;
        }
    }
}

fn criterion_5() -> Outcome {
    let mut rng = rng_for(SEED, "mcd-oracle", 0);
    let mut matches = 0;
    for inst in 0..50u64 {
        let n = rng.random_range(6..=12usize);
        let eta = rng.random_range(0.5..0.9);
        let h = McdConfig::subset_size(eta, n);
        if h < 3 {
            matches += 1;
            continue;
        }
        let data = Matrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let mut data = data;
        for r in 0..n / 4 {
            data[(r, 0)] += 6.0;
        }
        let cfg = McdConfig {
            eta,
            seed: inst,
            ..McdConfig::default()
        };
        let got: BTreeSet<usize> = fast_mcd(&data, &cfg)
            .unwrap()
            .untrimmed
            .into_iter()
            .collect();
        let want: BTreeSet<usize> = exhaustive_mcd(&data, h).into_iter().collect();
        if got == want {
            matches += 1;
        }
    }
    Outcome::new(
        matches == 50,
        format!("{matches}/50 untrimmed sets equal the exhaustive optimum"),
    )
}

fn criterion_6() -> Outcome {
    let mut spec = SimulationSpec::scenario(Scenario::NotSmallNoise, SEED);
    spec.train_sizes = vec![60, 60, 80];
    spec.test_sizes = vec![40, 40, 50, 18, 20, 20, 2];
    let sim = generate_simulation(&spec).unwrap();
    let priors = extract_class_priors(&sim.train, &McdConfig::with_eta(0.75)).unwrap();
    let hp = Hyperparameters {
        n_iter: 600,
        n_burnin: 100,
        ..simulation_hyper(10.0, 300)
    };
    let sizes: Vec<usize> = priors.iter().map(|s| s.class_size).collect();
    let resolved = hp.resolve(&priors, &sizes).unwrap();
    let model = GaussianModel::new(&sim.test, &resolved).unwrap();
    let settings = SamplerSettings::new(&hp, resolved.a.clone());
    let j = settings.n_known();

    let head: f64 = (1..=j + 1).map(|l| xi_sequence(hp.kappa, j, l)).sum();
    let xi_error = (head + xi_tail_mass(hp.kappa, j) - 1.0).abs();

    let mut rng = rng_for(hp.seed, "chain", 0);
    let mut state = initial_state(&model, &settings, &mut rng).unwrap();
    let (mut pi_error, mut min_l, mut exclusive, mut slices) = (0.0f64, usize::MAX, true, true);
    for _ in 0..hp.n_iter {
        gibbs_step(&mut state, &model, &settings, &mut rng).unwrap();
        pi_error = pi_error.max((state.pi.iter().sum::<f64>() - 1.0).abs());
        min_l = min_l.min(state.l_star);
        for m in 0..state.alpha.len() {
            exclusive &= (state.alpha[m] > 0) != (state.beta[m] > 0);
            slices &= state.u[m] < xi_sequence(hp.kappa, j, state.zeta(m));
        }
    }
    let first = run_model(&model, &settings).unwrap();
    let second = run_model(&model, &settings).unwrap();
    let identical = first == second
        && first
            .pi
            .iter()
            .zip(&second.pi)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    Outcome::new(
        xi_error <= 1e-12 && pi_error <= 1e-12 && min_l > j && exclusive && slices && identical,
        format!(
            "xi mass error {xi_error:.1e}, pi simplex error {pi_error:.1e}, min L* {min_l} (J+1 = {}), \
             exclusivity {exclusive}, slices {slices}, bit-identical rerun {identical}",
            j + 1
        ),
    )
}

/// Composite Simpson weights on `n` (odd) equispaced points with spacing `h`.
fn simpson(n: usize, h: f64) -> Vec<f64> {
    assert!(n % 2 == 1);
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Sup-norm distance between a density and the grid-normalized version of an
/// unnormalized log density, on a grid over `[lo, hi]`.
fn grid_oracle_1d(
    lo: f64,
    hi: f64,
    log_unnorm: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
) -> f64 {
    let n = 4001;
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_unnorm(x)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = simpson(n, h);
    let z: f64 = logs.iter().zip(&w).map(|(l, w)| (l - top).exp() * w).sum();
    xs.iter()
        .zip(&logs)
        .map(|(&x, l)| ((l - top).exp() / z - pdf(x)).abs())
        .fold(0.0, f64::max)
}

/// Same for a positive variable, integrating over log x.
fn grid_oracle_positive(
    lo: f64,
    hi: f64,
    log_unnorm: impl Fn(f64) -> f64,
    pdf: impl Fn(f64) -> f64,
) -> f64 {
    let n = 4001;
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| (a + i as f64 * h).exp()).collect();
    // density of log x is x p(x)
    let logs: Vec<f64> = xs.iter().map(|&x| log_unnorm(x) + x.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = simpson(n, h);
    let z: f64 = logs.iter().zip(&w).map(|(l, w)| (l - top).exp() * w).sum();
    xs.iter()
        .zip(&logs)
        .map(|(&x, l)| ((l - top).exp() / z / x - pdf(x)).abs())
        .fold(0.0, f64::max)
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

fn log_inv_gamma(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

fn niw_grid_error() -> f64 {
    let prior = NiwParams {
        mean: Vector::from_element(1, 0.5),
        precision_scale: 2.0,
        dof: 8.0,
        scale_matrix: Matrix::from_element(1, 1, 1.5),
    };
    let obs = [1.2, -0.3];
    let post = niw_posterior(&prior, &Matrix::from_column_slice(2, 1, &obs));
    let (m, l, nu, s) = (
        post.mean[0],
        post.precision_scale,
        post.dof,
        post.scale_matrix[(0, 0)],
    );
    let closed =
        |mu: f64, v: f64| (log_normal(mu, m, v / l) + log_inv_gamma(v, nu / 2.0, s / 2.0)).exp();
    let unnorm = |mu: f64, v: f64| {
        log_normal(mu, 0.5, v / 2.0)
            + log_inv_gamma(v, 8.0 / 2.0, 1.5 / 2.0)
            + obs.iter().map(|&x| log_normal(x, mu, v)).sum::<f64>()
    };
    // σ² on a logarithmic grid, where the integrand is smooth
    let n = 1601;
    let (mlo, mhi, llo, lhi) = (-8.0, 8.0, (1e-3f64).ln(), (1e3f64).ln());
    let (hm, hl) = ((mhi - mlo) / (n - 1) as f64, (lhi - llo) / (n - 1) as f64);
    let (wm, wl) = (simpson(n, hm), simpson(n, hl));
    let mu = |i: usize| mlo + i as f64 * hm;
    let var = |k: usize| (llo + k as f64 * hl).exp();
    let mut logs = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            logs[i * n + k] = unnorm(mu(i), var(k)) + var(k).ln();
        }
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for i in 0..n {
        for k in 0..n {
            z += (logs[i * n + k] - top).exp() * wm[i] * wl[k];
        }
    }
    let mut err = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            let g = (logs[i * n + k] - top).exp() / z / var(k);
            err = err.max((g - closed(mu(i), var(k))).abs());
        }
    }
    err
}

fn criterion_7() -> Outcome {
    let niw = niw_grid_error();

    // two curves on four grid points
    let y = [[0.4, 1.1, 0.9, -0.2], [0.1, 0.8, 1.4, 0.3]];
    let sum_y: Vec<f64> = (0..4).map(|t| y[0][t] + y[1][t]).collect();
    let sigma2 = [0.5, 0.8, 0.3, 1.1];
    let (psi, tau2) = (0.3, 0.7);
    let phi = [0.2, 0.7, 1.0, 0.4];
    let basis1 = Matrix::from_column_slice(4, 1, &phi);
    let (mean1, q1) = rho_conditional(&basis1, &sigma2, psi, tau2, &sum_y, 2);
    let rho1 = Normal1 {
        mean: mean1[0],
        var: 1.0 / q1[(0, 0)],
    };
    let lik = |f: &dyn Fn(usize) -> f64| -> f64 {
        (0..2)
            .map(|c| {
                (0..4)
                    .map(|t| log_normal(y[c][t], f(t), sigma2[t]))
                    .sum::<f64>()
            })
            .sum()
    };
    let rho_err = grid_oracle_1d(
        rho1.mean - 12.0 * rho1.var.sqrt(),
        rho1.mean + 12.0 * rho1.var.sqrt(),
        |r| log_normal(r, psi, tau2) + lik(&|t| phi[t] * r),
        |r| rho1.log_pdf(r).exp(),
    );

    // two basis functions: conditional of ρ_1 given ρ_2 from the joint
    let phi2 = [0.9, 0.5, 0.1, 0.6];
    let basis2 = Matrix::from_fn(4, 2, |t, k| if k == 0 { phi[t] } else { phi2[t] });
    let (mean2, q2) = rho_conditional(&basis2, &sigma2, psi, tau2, &sum_y, 2);
    let r2 = 0.4;
    let cond = Normal1 {
        mean: mean2[0] - q2[(0, 1)] / q2[(0, 0)] * (r2 - mean2[1]),
        var: 1.0 / q2[(0, 0)],
    };
    let rho2_err = grid_oracle_1d(
        cond.mean - 12.0 * cond.var.sqrt(),
        cond.mean + 12.0 * cond.var.sqrt(),
        |r| {
            log_normal(r, psi, tau2)
                + log_normal(r2, psi, tau2)
                + lik(&|t| phi[t] * r + phi2[t] * r2)
        },
        |r| cond.log_pdf(r).exp(),
    );

    let rho = [0.8, -0.1];
    let s2 = 1.0;
    let psi_law = psi_conditional(&rho, tau2, s2);
    let psi_err = grid_oracle_1d(
        psi_law.mean - 12.0 * psi_law.var.sqrt(),
        psi_law.mean + 12.0 * psi_law.var.sqrt(),
        |p| log_normal(p, 0.0, s2) + rho.iter().map(|&r| log_normal(r, p, tau2)).sum::<f64>(),
        |p| psi_law.log_pdf(p).exp(),
    );

    let (a_tau, b_tau) = (3.0, 1.0);
    let tau_law: InvGamma = tau2_conditional(&rho, psi, a_tau, b_tau);
    let tau_err = grid_oracle_positive(
        1e-4,
        1e4,
        |t| {
            log_inv_gamma(t, a_tau, b_tau) + rho.iter().map(|&r| log_normal(r, psi, t)).sum::<f64>()
        },
        |t| tau_law.log_pdf(t).exp(),
    );

    let (a_h, b_h) = (5.0, 1.0);
    let f = 0.6;
    let resid = [y[0][2] - f, y[1][2] - f];
    let ss: f64 = resid.iter().map(|r| r * r).sum();
    let sigma_law = sigma2_conditional(a_h, b_h, ss, 2);
    let sigma_err = grid_oracle_positive(
        1e-4,
        1e4,
        |v| log_inv_gamma(v, a_h, b_h) + resid.iter().map(|&r| log_normal(r, 0.0, v)).sum::<f64>(),
        |v| sigma_law.log_pdf(v).exp(),
    );

    let worst = [niw, rho_err, rho2_err, psi_err, tau_err, sigma_err]
        .into_iter()
        .fold(0.0, f64::max);
    Outcome::new(
        worst <= 1e-5,
        format!(
            "sup-norm NIW {niw:.1e}, rho {rho_err:.1e}, rho|rho' {rho2_err:.1e}, psi {psi_err:.1e}, \
             tau2 {tau_err:.1e}, sigma2 {sigma_err:.1e} (<= 1e-5)"
        ),
    )
}

fn functional_toy() -> brand::simulate::FunctionalSimulation {
    let spec = FunctionalSimulationSpec {
        curves_per_group: 25,
        noise_sd: 0.25,
        seed: SEED,
        ..FunctionalSimulationSpec::default()
    }
    .contaminated();
    generate_functional_simulation(&spec).expect("functional simulation")
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let sim = functional_toy();
    let priors = extract_functional_priors(
        &sim.train,
        &PriorOptions::default(),
        &McdConfig::with_eta(0.75),
    )
    .expect("functional stage I");
    let mut hyper = FunctionalHyper::default();
    hyper.chain.n_iter = 10_000;
    hyper.chain.n_burnin = 5_000;
    hyper.chain.seed = SEED;
    let out = run_functional_chain(&sim.test, &priors, &hyper).expect("functional chain");
    let s = summarize(&out, &PostprocessConfig::default()).expect("summary");
    let n_known = priors.len();
    let split = s
        .labels
        .iter()
        .zip(&sim.truth)
        .filter(|(l, &t)| l.is_novel() == (t > n_known))
        .count() as f64
        / sim.truth.len() as f64;
    let clusters: BTreeSet<usize> = s.best_partition.iter().copied().collect();
    let secs = t0.elapsed().as_secs_f64();
    Outcome::new(
        split >= 0.95 && clusters.len() == 3 && secs <= 1200.0,
        format!(
            "known/novel split accuracy {split:.3} (>= 0.95), {} novelty clusters (3), {secs:.0}s",
            clusters.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let sim = functional_toy();
    let priors = extract_functional_priors(
        &sim.train,
        &PriorOptions::default(),
        &McdConfig::with_eta(0.75),
    )
    .expect("functional stage I");
    let mut pass = true;
    let mut parts = Vec::new();
    for p in &priors {
        let s = &p.coefficients;
        let spd = cholesky(&s.scatter).is_ok();
        let cond = condition_number(&s.scatter);
        let mrcd = matches!(s.method, RobustMethod::Mrcd { .. });
        pass &= spd && mrcd && cond <= 1000.0 && s.scatter.nrows() == 100;
        parts.push(format!(
            "{}x{} cond {cond:.0}",
            s.scatter.nrows(),
            s.scatter.ncols()
        ));
    }
    Outcome::new(
        pass,
        format!("MRCD scatters SPD: {} (<= 1000)", parts.join(", ")),
    )
}

/// Every set partition of `n` items as restricted growth strings.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.iter().map(|c| c + 1).collect());
            return;
        }
        for c in 0..=max + 1 {
            cur.push(c);
            rec(cur, max.max(c), n, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = vec![0];
    rec(&mut cur, 0, n, &mut out);
    out
}

/// Lower bound of the expected VI, written directly from its definition.
fn vi_oracle(p: &Matrix, c: &[usize]) -> f64 {
    let n = c.len();
    let mut total = 0.0;
    for i in 0..n {
        let same: Vec<usize> = (0..n).filter(|&j| c[j] == c[i]).collect();
        let a = same.len() as f64;
        let b: f64 = (0..n).map(|j| p[(i, j)]).sum();
        let d: f64 = same.iter().map(|&j| p[(i, j)]).sum();
        total += a.log2() + b.log2() - 2.0 * d.log2();
    }
    total / n as f64
}

fn criterion_10() -> Outcome {
    let mut rng = rng_for(SEED, "vi-brute-force", 0);
    let mut agree = 0;
    for _ in 0..20 {
        let n = rng.random_range(3..=8usize);
        let draws: Vec<Vec<usize>> = (0..40)
            .map(|_| {
                let k = rng.random_range(1..=4usize);
                (0..n).map(|_| rng.random_range(0..k)).collect()
            })
            .collect();
        let w: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
        let wt: f64 = w.iter().sum();
        let ppcm = Matrix::from_fn(n, n, |i, j| {
            draws
                .iter()
                .zip(&w)
                .filter(|(d, _)| d[i] == d[j])
                .map(|(_, w)| w / wt)
                .sum::<f64>()
        });
        let partitions = all_partitions(n);
        let oracle = partitions
            .iter()
            .min_by(|a, b| vi_oracle(&ppcm, a).total_cmp(&vi_oracle(&ppcm, b)))
            .unwrap()
            .clone();
        let mut shuffled = partitions.clone();
        shuffled.shuffle(&mut rng);
        let (best, _) = best_partition_vi(&ppcm, &shuffled).unwrap();
        if canonical(&best) == canonical(&oracle) {
            agree += 1;
        }
    }
    Outcome::new(
        agree == 20,
        format!("{agree}/20 PPCMs: VI search equals exhaustive enumeration"),
    )
}

fn report(n: usize, name: &str, o: &Outcome, failures: &mut usize) {
    let tag = if o.detail.starts_with("SKIP") {
        "SKIP"
    } else if o.pass {
        "PASS"
    } else {
        *failures += 1;
        "FAIL"
    };
    println!("criterion {n:>2} [{tag}] {name}: {}", o.detail);
}

fn main() {
    let mut failures = 0;
    let sim = notsmall_noise();
    let t0 = Instant::now();
    let robust = fit_simulation(&sim, 0.75, 10.0, 10_000);
    let secs = t0.elapsed().as_secs_f64();
    report(
        1,
        "simulation replication",
        &criterion_1(&robust, secs),
        &mut failures,
    );
    report(
        2,
        "robustness contrast",
        &criterion_2(&robust, &sim),
        &mut failures,
    );
    report(3, "seeds dataset", &criterion_3(), &mut failures);
    report(
        4,
        "prior moments vs Monte Carlo",
        &criterion_4(),
        &mut failures,
    );
    report(5, "MCD exact oracle", &criterion_5(), &mut failures);
    report(6, "slice sampler structure", &criterion_6(), &mut failures);
    report(7, "conjugacy grid oracles", &criterion_7(), &mut failures);
    report(8, "functional toy", &criterion_8(), &mut failures);
    report(9, "high-dimensional MRCD", &criterion_9(), &mut failures);
    report(10, "VI brute force", &criterion_10(), &mut failures);
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
