//! Flat key-value run configuration (TOML), with string overrides so that
//! command-line flags can replace any file value.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `mode` | `multivariate` | `multivariate` or `functional` |
//! | `train`, `test`, `output` | | input files and output directory |
//! | `test_labels` | `false` | the test file carries true components in its last (multivariate) or `label` (curves) column |
//! | `curve_layout` | `wide` | `wide` or `long` curve CSV |
//! | `trace_format` | `csv` | `csv` or `binary` chain traces |
//! | `seed` | `0` | root seed of every random stream |
//! | `eta`, `n_starts`, `max_csteps`, `mrcd_rho`, `max_condition` | `0.75`, `500`, `100`, unset, `1000` | Stage I |
//! | `a0`, `lambda_tr`, `nu_tr`, `m0`, `lambda0`, `nu0`, `s0` | `0.1`, `1000`, `= lambda_tr`, `0`, `0.01`, `10`, `1` | Stage II priors |
//! | `gamma` | unset | fixed DP concentration; when unset γ ~ Gamma(`gamma_shape`, `gamma_rate`) |
//! | `kappa`, `n_iter`, `n_burnin`, `snapshot_every`, `freeze_threshold` | `0.5`, `2000`, `1000`, `10`, `1e5` | chain controls (`n_iter` counts burn-in) |
//! | `n_basis`, `spline_order`, `smoothing_penalty` | `100`, `5`, `1e-6` | curves only |
//! | `phi_j`, `v_j`, `a_tau`, `b_tau`, `s2`, `a_h`, `b_h` | `0`, `0`, `3`, `1`, `1`, `5`, `1` | curves only |
//! | `ppn_threshold`, `min_size` | `0.5`, `max(5, ⌈M/100⌉)` | post-processing |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::functional::{BasisSpec, FunctionalHyper, PriorOptions};
use crate::io::{CurveLayout, TraceFormat};
use crate::model::{GammaSpec, Hyperparameters};
use crate::postprocess::PostprocessConfig;
use crate::robust::McdConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Multivariate,
    Functional,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub test_labels: bool,
    pub curve_layout: CurveLayout,
    pub trace_format: TraceFormat,
    pub seed: u64,

    pub eta: f64,
    pub n_starts: usize,
    pub max_csteps: usize,
    pub mrcd_rho: Option<f64>,
    pub max_condition: f64,

    pub a0: f64,
    pub lambda_tr: f64,
    pub nu_tr: Option<f64>,
    pub m0: f64,
    pub lambda0: f64,
    pub nu0: f64,
    pub s0: f64,
    pub gamma: Option<f64>,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub kappa: f64,
    pub n_iter: usize,
    pub n_burnin: usize,
    pub snapshot_every: usize,
    pub freeze_threshold: f64,

    pub n_basis: usize,
    pub spline_order: usize,
    pub smoothing_penalty: f64,
    pub phi_j: f64,
    pub v_j: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub s2: f64,
    pub a_h: f64,
    pub b_h: f64,

    pub ppn_threshold: f64,
    pub min_size: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = Hyperparameters::default();
        let mcd = McdConfig::default();
        let fh = FunctionalHyper::default();
        let post = PostprocessConfig::default();
        let basis = BasisSpec::default();
        let (gamma_shape, gamma_rate) = match hp.gamma {
            GammaSpec::Random { shape, rate, .. } => (shape, rate),
            GammaSpec::Fixed { .. } => (1.0, 1.0),
        };
        RunConfig {
            mode: Mode::Multivariate,
            train: None,
            test: None,
            output: None,
            test_labels: false,
            curve_layout: CurveLayout::Wide,
            trace_format: TraceFormat::Csv,
            seed: 0,
            eta: mcd.eta,
            n_starts: mcd.n_starts,
            max_csteps: mcd.max_csteps,
            mrcd_rho: mcd.mrcd_rho,
            max_condition: mcd.max_condition,
            a0: hp.a0,
            lambda_tr: hp.lambda_tr,
            nu_tr: hp.nu_tr,
            m0: hp.m0,
            lambda0: hp.lambda0,
            nu0: hp.nu0,
            s0: hp.s0,
            gamma: None,
            gamma_shape,
            gamma_rate,
            kappa: hp.kappa,
            n_iter: hp.n_iter,
            n_burnin: hp.n_burnin,
            snapshot_every: hp.snapshot_every,
            freeze_threshold: hp.freeze_threshold,
            n_basis: basis.n_basis,
            spline_order: basis.order,
            smoothing_penalty: basis.penalty,
            phi_j: 0.0,
            v_j: 0.0,
            a_tau: fh.a_tau,
            b_tau: fh.b_tau,
            s2: fh.s2,
            a_h: fh.a_h,
            b_h: fh.b_h,
            ppn_threshold: post.ppn_threshold,
            min_size: post.min_size,
        }
    }
}

/// Parses an override value as a TOML scalar, falling back to a string.
fn override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl RunConfig {
    /// Builds a configuration from TOML text and `key=value` overrides
    /// applied on top of it.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| BrandError::Format(format!("config: {e}")))?;
        for (key, value) in overrides {
            let mut v = override_value(value);
            // integers are accepted where floats are expected
            if let toml::Value::Integer(i) = v {
                if is_float_key(key) {
                    v = toml::Value::Float(i as f64);
                }
            }
            table.insert(key.clone(), v);
        }
        for (key, v) in table.iter_mut() {
            if let toml::Value::Integer(i) = *v {
                if is_float_key(key) {
                    *v = toml::Value::Float(i as f64);
                }
            }
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| BrandError::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| BrandError::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.hyperparameters().validate()?;
        if self.mode == Mode::Functional {
            self.functional_hyper().validate()?;
        }
        if !(0.0..1.0).contains(&self.ppn_threshold) {
            return Err(BrandError::InvalidInput(format!(
                "ppn_threshold must lie in [0, 1), got {}",
                self.ppn_threshold
            )));
        }
        Ok(())
    }

    pub fn mcd_config(&self) -> McdConfig {
        McdConfig {
            eta: self.eta,
            n_starts: self.n_starts,
            max_csteps: self.max_csteps,
            seed: self.seed,
            mrcd_rho: self.mrcd_rho,
            max_condition: self.max_condition,
            ..McdConfig::default()
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            a0: self.a0,
            a_known: None,
            lambda_tr: self.lambda_tr,
            nu_tr: self.nu_tr,
            m0: self.m0,
            lambda0: self.lambda0,
            nu0: self.nu0,
            s0: self.s0,
            gamma: match self.gamma {
                Some(value) => GammaSpec::Fixed { value },
                None => GammaSpec::Random {
                    shape: self.gamma_shape,
                    rate: self.gamma_rate,
                    initial: self.gamma_shape / self.gamma_rate,
                },
            },
            kappa: self.kappa,
            n_iter: self.n_iter,
            n_burnin: self.n_burnin,
            seed: self.seed,
            snapshot_every: self.snapshot_every,
            freeze_threshold: self.freeze_threshold,
        }
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec::new(self.n_basis, self.spline_order).with_penalty(self.smoothing_penalty)
    }

    pub fn prior_options(&self) -> PriorOptions {
        PriorOptions {
            basis: self.basis(),
            phi_j: self.phi_j,
            v_j: self.v_j,
        }
    }

    pub fn functional_hyper(&self) -> FunctionalHyper {
        FunctionalHyper {
            a_tau: self.a_tau,
            b_tau: self.b_tau,
            s2: self.s2,
            a_h: self.a_h,
            b_h: self.b_h,
            basis: self.basis(),
            chain: self.hyperparameters(),
        }
    }

    pub fn postprocess(&self) -> PostprocessConfig {
        PostprocessConfig {
            ppn_threshold: self.ppn_threshold,
            min_size: self.min_size,
        }
    }

    pub fn require_train(&self) -> Result<&Path> {
        self.train
            .as_deref()
            .ok_or_else(|| BrandError::InvalidInput("no training file given (train)".into()))
    }

    pub fn require_test(&self) -> Result<&Path> {
        self.test
            .as_deref()
            .ok_or_else(|| BrandError::InvalidInput("no test file given (test)".into()))
    }

    pub fn require_output(&self) -> Result<&Path> {
        self.output
            .as_deref()
            .ok_or_else(|| BrandError::InvalidInput("no output directory given (output)".into()))
    }
}

fn is_float_key(key: &str) -> bool {
    matches!(
        key,
        "eta"
            | "mrcd_rho"
            | "max_condition"
            | "a0"
            | "lambda_tr"
            | "nu_tr"
            | "m0"
            | "lambda0"
            | "nu0"
            | "s0"
            | "gamma"
            | "gamma_shape"
            | "gamma_rate"
            | "kappa"
            | "freeze_threshold"
            | "smoothing_penalty"
            | "phi_j"
            | "v_j"
            | "a_tau"
            | "b_tau"
            | "s2"
            | "a_h"
            | "b_h"
            | "ppn_threshold"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml_with_overrides(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_beat_file_values() {
        let text = "lambda_tr = 1000\neta = 1\nseed = 4\ntrain = \"a.csv\"\n";
        let cfg = RunConfig::from_toml_with_overrides(
            text,
            &[
                ("lambda_tr".into(), "10".into()),
                ("train".into(), "b.csv".into()),
                ("mode".into(), "functional".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.lambda_tr, 10.0);
        assert_eq!(cfg.eta, 1.0);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.train.as_deref(), Some(Path::new("b.csv")));
        assert_eq!(cfg.mode, Mode::Functional);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml_with_overrides("lamda_tr = 3", &[]).is_err());
        assert!(RunConfig::from_toml_with_overrides("kappa = 1.5", &[]).is_err());
        assert!(RunConfig::from_toml_with_overrides("n_iter = 10\nn_burnin = 20", &[]).is_err());
    }

    #[test]
    fn gamma_key_fixes_concentration() {
        let cfg = RunConfig::from_toml_with_overrides("gamma = 2", &[]).unwrap();
        assert_eq!(cfg.hyperparameters().gamma, GammaSpec::Fixed { value: 2.0 });
    }
}
