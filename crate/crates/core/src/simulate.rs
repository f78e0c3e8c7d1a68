//! Synthetic data of the simulation study and of the six-function toy.

use rand::seq::index::sample as sample_indices;
use rand::RngExt;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::functional::CurveSet;
use crate::linalg::{self, Matrix};
use crate::model::TestDataset;
use crate::robust::LabeledDataset;
use crate::seed::{self, BrandRng};

/// Gaussian mixture design: components 1..=J generate training and test
/// units, the remaining ones only test units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimulationSpec {
    pub means: Vec<Vec<f64>>,
    /// Row-major covariance per component.
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub train_sizes: Vec<usize>,
    pub test_sizes: Vec<usize>,
    /// Fraction of class 2 and of class 3 training labels swapped.
    pub label_noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    NotSmallNoise,
    NotSmallClean,
    SmallNoise,
    SmallClean,
}

impl std::str::FromStr for Scenario {
    type Err = BrandError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "notsmall-noise" => Ok(Scenario::NotSmallNoise),
            "notsmall-clean" => Ok(Scenario::NotSmallClean),
            "small-noise" => Ok(Scenario::SmallNoise),
            "small-clean" => Ok(Scenario::SmallClean),
            other => Err(BrandError::InvalidInput(format!(
                "unknown scenario '{other}' (expected notsmall-noise, notsmall-clean, small-noise or small-clean)"
            ))),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::NotSmallNoise => "notsmall-noise",
            Scenario::NotSmallClean => "notsmall-clean",
            Scenario::SmallNoise => "small-noise",
            Scenario::SmallClean => "small-clean",
        }
    }
}

fn corr2(rho: f64, var: f64) -> Vec<Vec<f64>> {
    vec![vec![var, rho * var], vec![rho * var, var]]
}

impl SimulationSpec {
    pub fn scenario(scenario: Scenario, seed: u64) -> Self {
        let (test_sizes, noisy) = match scenario {
            Scenario::NotSmallNoise => (vec![200, 200, 250, 90, 100, 100, 10], true),
            Scenario::NotSmallClean => (vec![200, 200, 250, 90, 100, 100, 10], false),
            Scenario::SmallNoise => (vec![350, 250, 250, 49, 50, 50, 1], true),
            Scenario::SmallClean => (vec![350, 250, 250, 49, 50, 50, 1], false),
        };
        SimulationSpec {
            means: vec![
                vec![-5.0, 5.0],
                vec![-4.0, -4.0],
                vec![4.0, 4.0],
                vec![0.0, 0.0],
                vec![5.0, -10.0],
                vec![5.0, -10.0],
                vec![-10.0, -10.0],
            ],
            covariances: vec![
                corr2(0.9, 1.0),
                corr2(0.0, 1.0),
                corr2(0.0, 1.0),
                corr2(-0.75, 1.0),
                corr2(0.9, 1.0),
                corr2(-0.9, 1.0),
                corr2(0.0, 0.01),
            ],
            train_sizes: vec![300, 300, 400],
            test_sizes,
            label_noise: if noisy { 0.12 } else { 0.0 },
            seed,
        }
    }

    pub fn n_known(&self) -> usize {
        self.train_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.means.len();
        if k == 0 || self.covariances.len() != k || self.test_sizes.len() != k {
            return Err(BrandError::InvalidInput(
                "means, covariances and test sizes must have one entry per component".into(),
            ));
        }
        if self.train_sizes.is_empty() || self.train_sizes.len() > k {
            return Err(BrandError::InvalidInput(
                "training classes must be a non-empty prefix of the components".into(),
            ));
        }
        if self
            .train_sizes
            .iter()
            .chain(&self.test_sizes)
            .any(|&n| n == 0)
        {
            return Err(BrandError::InvalidInput("sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(BrandError::InvalidInput(format!(
                "label noise must lie in [0, 1), got {}",
                self.label_noise
            )));
        }
        if self.label_noise > 0.0 && self.train_sizes.len() < 3 {
            return Err(BrandError::InvalidInput(
                "label noise swaps classes 2 and 3".into(),
            ));
        }
        let p = self.means[0].len();
        for (mean, cov) in self.means.iter().zip(&self.covariances) {
            if mean.len() != p || cov.len() != p || cov.iter().any(|r| r.len() != p) {
                return Err(BrandError::DimensionMismatch {
                    expected: p,
                    found: mean.len(),
                });
            }
        }
        Ok(())
    }

    fn cov_matrix(&self, k: usize) -> Matrix {
        let p = self.means[k].len();
        Matrix::from_fn(p, p, |i, j| self.covariances[k][i][j])
    }
}

/// Simulated training set, test set and the generating component (1-based)
/// of every test unit.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub train: LabeledDataset,
    /// Generating component of every training unit, before label noise.
    pub train_truth: Vec<usize>,
    pub test: TestDataset,
    pub truth: Vec<usize>,
}

fn draw_component(
    spec: &SimulationSpec,
    k: usize,
    n: usize,
    rng: &mut BrandRng,
    out: &mut Vec<Vec<f64>>,
) -> Result<()> {
    let chol = linalg::cholesky(&spec.cov_matrix(k)).map_err(|e| e.in_class(k + 1))?;
    let l = chol.l();
    let p = spec.means[k].len();
    for _ in 0..n {
        let z = linalg::Vector::from_fn(p, |_, _| StandardNormal.sample(rng));
        let x = &l * z;
        out.push((0..p).map(|i| spec.means[k][i] + x[i]).collect());
    }
    Ok(())
}

fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    let p = rows.first().map_or(0, |r| r.len());
    Matrix::from_fn(rows.len(), p, |i, j| rows[i][j])
}

pub fn generate_simulation(spec: &SimulationSpec) -> Result<Simulation> {
    spec.validate()?;
    let mut rng = seed::rng_for(spec.seed, "simulation", 0);
    let mut train_rows = Vec::new();
    let mut train_truth = Vec::new();
    for (k, &n) in spec.train_sizes.iter().enumerate() {
        draw_component(spec, k, n, &mut rng, &mut train_rows)?;
        train_truth.extend(std::iter::repeat_n(k + 1, n));
    }
    let mut labels = train_truth.clone();
    if spec.label_noise > 0.0 {
        let offset2: usize = spec.train_sizes[0];
        let offset3 = offset2 + spec.train_sizes[1];
        let n2 = (spec.label_noise * spec.train_sizes[1] as f64).round() as usize;
        let n3 = (spec.label_noise * spec.train_sizes[2] as f64).round() as usize;
        for i in sample_indices(&mut rng, spec.train_sizes[1], n2) {
            labels[offset2 + i] = 3;
        }
        for i in sample_indices(&mut rng, spec.train_sizes[2], n3) {
            labels[offset3 + i] = 2;
        }
    }
    let mut test_rows = Vec::new();
    let mut truth = Vec::new();
    for (k, &n) in spec.test_sizes.iter().enumerate() {
        draw_component(spec, k, n, &mut rng, &mut test_rows)?;
        truth.extend(std::iter::repeat_n(k + 1, n));
    }
    // Shuffle the test units so their order carries no information.
    let perm = sample_indices(&mut rng, truth.len(), truth.len()).into_vec();
    let test_rows: Vec<Vec<f64>> = perm.iter().map(|&i| test_rows[i].clone()).collect();
    let truth: Vec<usize> = perm.iter().map(|&i| truth[i]).collect();
    Ok(Simulation {
        train: LabeledDataset::new(to_matrix(&train_rows), labels)?,
        train_truth,
        test: TestDataset::new(to_matrix(&test_rows))?,
        truth,
    })
}

/// The six mean functions of the functional toy.
pub fn toy_function(k: usize, t: f64) -> f64 {
    match k {
        1 => 5.0 * t.sin().exp().cos(),
        2 => 3.0 * ((t.powf(1.5)).sin() + 1.0).ln(),
        3 => 2.0 * t * (t - 2.5).cos(),
        4 => -3.0 * (t - 1.0).abs() * t.sin(),
        5 => (t - 2.0).abs() * t.cos(),
        6 => (t - 1.0).powi(2) * t.sin(),
        _ => panic!("toy functions are numbered 1 to 6"),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionalSimulationSpec {
    pub n_points: usize,
    pub curves_per_group: usize,
    pub noise_sd: f64,
    /// Add N(0, spike_var) spikes to 5/4/6 training curves of groups 1/2/3
    /// at `spike_points` random time points each.
    pub contaminate: bool,
    pub spike_var: f64,
    pub spike_points: usize,
    /// Fraction of training curves whose label is shuffled across groups.
    pub label_shuffle: f64,
    pub seed: u64,
}

impl Default for FunctionalSimulationSpec {
    fn default() -> Self {
        FunctionalSimulationSpec {
            n_points: 100,
            curves_per_group: 50,
            noise_sd: 0.25,
            contaminate: false,
            spike_var: 25.0,
            spike_points: 15,
            label_shuffle: 0.0,
            seed: 0,
        }
    }
}

impl FunctionalSimulationSpec {
    pub fn contaminated(self) -> Self {
        FunctionalSimulationSpec {
            contaminate: true,
            label_shuffle: 0.1,
            ..self
        }
    }
}

#[derive(Debug, Clone)]
pub struct FunctionalSimulation {
    pub train: CurveSet,
    /// Groups before label shuffling.
    pub train_truth: Vec<usize>,
    /// Indices of spike-contaminated training curves.
    pub spiked: Vec<usize>,
    pub test: CurveSet,
    pub truth: Vec<usize>,
}

pub fn generate_functional_simulation(
    spec: &FunctionalSimulationSpec,
) -> Result<FunctionalSimulation> {
    if spec.n_points < 2 || spec.curves_per_group == 0 || !(spec.noise_sd >= 0.0) {
        return Err(BrandError::InvalidInput(
            "invalid functional simulation".into(),
        ));
    }
    let grid: Vec<f64> = (0..spec.n_points)
        .map(|i| 6.0 * i as f64 / (spec.n_points - 1) as f64)
        .collect();
    let mut rng = seed::rng_for(spec.seed, "functional-simulation", 0);
    let noise = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| BrandError::InvalidInput(e.to_string()))?;
    let draw = |k: usize, n: usize, rng: &mut BrandRng| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                grid.iter()
                    .map(|&t| {
                        let e = if spec.noise_sd > 0.0 {
                            noise.sample(rng)
                        } else {
                            0.0
                        };
                        toy_function(k, t) + e
                    })
                    .collect()
            })
            .collect()
    };
    let n = spec.curves_per_group;
    let mut train_rows = Vec::new();
    let mut train_truth = Vec::new();
    for k in 1..=3 {
        train_rows.extend(draw(k, n, &mut rng));
        train_truth.extend(std::iter::repeat_n(k, n));
    }
    let mut spiked = Vec::new();
    if spec.contaminate {
        let spike = Normal::new(0.0, spec.spike_var.sqrt())
            .map_err(|e| BrandError::InvalidInput(e.to_string()))?;
        for (g, count) in [5usize, 4, 6].into_iter().enumerate() {
            for i in sample_indices(&mut rng, n, count.min(n)) {
                let row = g * n + i;
                for t in sample_indices(
                    &mut rng,
                    spec.n_points,
                    spec.spike_points.min(spec.n_points),
                ) {
                    train_rows[row][t] += spike.sample(&mut rng);
                }
                spiked.push(row);
            }
        }
        spiked.sort_unstable();
    }
    let mut labels = train_truth.clone();
    let n_shuffle = (spec.label_shuffle * labels.len() as f64).round() as usize;
    for i in sample_indices(&mut rng, labels.len(), n_shuffle) {
        let shift = rng.random_range(1..3);
        labels[i] = (labels[i] - 1 + shift) % 3 + 1;
    }
    let mut test_rows = Vec::new();
    let mut truth = Vec::new();
    for k in 1..=6 {
        test_rows.extend(draw(k, n, &mut rng));
        truth.extend(std::iter::repeat_n(k, n));
    }
    Ok(FunctionalSimulation {
        train: CurveSet::new(grid.clone(), to_matrix(&train_rows), Some(labels))?,
        train_truth,
        spiked,
        test: CurveSet::new(grid, to_matrix(&test_rows), None)?,
        truth,
    })
}
