//! End-to-end runs: Stage I, Stage II and post-processing, writing
//!
//! ```text
//! <output>/manifest.json
//! <output>/traces/{alpha,beta,pi,gamma,n_active}.{csv,bin}, atoms.json, metadata.json
//! <output>/summary/labels.csv, ppcm.bin, ppcm.json, summary.json, priors.json
//! <output>/summary/metrics.json       (when true labels are available)
//! <output>/summary/mean_curves.csv    (curves only)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};
use crate::error::{BrandError, Result};
use crate::functional::{extract_functional_priors, run_functional_chain, CurveSet};
use crate::io::{self, CurveLayout};
use crate::linalg::Matrix;
use crate::model::TestDataset;
use crate::postprocess::{metrics, summarize, Metrics, PosteriorSummary, UnitLabel};
use crate::robust::{extract_class_priors, LabeledDataset};
use crate::sampler::{run_chain, ChainOutput};

pub const TRACES_DIR: &str = "traces";
pub const SUMMARY_DIR: &str = "summary";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FileDigest {
    pub path: String,
    pub blob_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    /// Output files relative to the run directory.
    pub outputs: Vec<FileDigest>,
}

fn digest(path: &Path, shown: String) -> Result<FileDigest> {
    Ok(FileDigest {
        path: shown,
        blob_sha256: io::file_hash(path)?,
    })
}

fn list_files(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| BrandError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| BrandError::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            list_files(&p, root, out)?;
        } else if p.strip_prefix(root).ok() != Some(Path::new(MANIFEST)) {
            out.push(p);
        }
    }
    Ok(())
}

/// Writes `manifest.json` hashing the given inputs and every file already in
/// the run directory.
pub fn write_manifest(
    output: &Path,
    command: &str,
    cfg: &RunConfig,
    inputs: &[&Path],
) -> Result<Manifest> {
    let mut files = Vec::new();
    list_files(output, output, &mut files)?;
    let outputs = files
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(output).unwrap_or(p);
            digest(p, rel.to_string_lossy().replace('\\', "/"))
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs = inputs
        .iter()
        .map(|p| digest(p, p.display().to_string()))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: "brand".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: cfg.seed,
        config: cfg.clone(),
        inputs,
        outputs,
    };
    io::write_json(&output.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_training(cfg: &RunConfig) -> Result<LabeledDataset> {
    let (data, labels) = io::load_multivariate(cfg.require_train()?, true)?;
    LabeledDataset::new(data, labels.expect("labels requested"))
}

pub fn load_test(cfg: &RunConfig) -> Result<(TestDataset, Option<Vec<usize>>)> {
    let (data, truth) = io::load_multivariate(cfg.require_test()?, cfg.test_labels)?;
    Ok((TestDataset::new(data)?, truth))
}

fn load_test_curves(cfg: &RunConfig) -> Result<(CurveSet, Option<Vec<usize>>)> {
    let curves = io::load_curves(cfg.require_test()?, cfg.curve_layout)?;
    let truth = curves.labels().map(<[usize]>::to_vec);
    if cfg.test_labels && truth.is_none() {
        return Err(BrandError::Format(format!(
            "{}: test_labels is set but the curves carry no label column",
            cfg.require_test()?.display()
        )));
    }
    Ok((curves.unlabeled(), truth.filter(|_| cfg.test_labels)))
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: PosteriorSummary,
    pub metrics: Option<Metrics>,
    pub n_known: usize,
}

fn finish(
    output: &Path,
    chain: &ChainOutput,
    cfg: &RunConfig,
    truth: Option<&[usize]>,
) -> Result<RunReport> {
    io::write_chain(&output.join(TRACES_DIR), chain, cfg.trace_format)?;
    let summary = summarize(chain, &cfg.postprocess())?;
    let summary_dir = output.join(SUMMARY_DIR);
    io::write_summary(&summary_dir, &summary)?;
    let metrics = match truth {
        Some(t) => {
            let m = metrics(&summary.labels, t, chain.n_known)?;
            io::write_metrics(&summary_dir.join("metrics.json"), &m)?;
            Some(m)
        }
        None => None,
    };
    Ok(RunReport {
        summary,
        metrics,
        n_known: chain.n_known,
    })
}

/// Stage I only: writes `summary/priors.json`.
pub fn extract_priors(cfg: &RunConfig) -> Result<()> {
    let output = cfg.require_output()?;
    let path = output.join(SUMMARY_DIR).join("priors.json");
    match cfg.mode {
        Mode::Multivariate => {
            let train = load_training(cfg)?;
            io::write_json(&path, &extract_class_priors(&train, &cfg.mcd_config())?)?;
        }
        Mode::Functional => {
            let train = io::load_curves(cfg.require_train()?, cfg.curve_layout)?;
            let priors =
                extract_functional_priors(&train, &cfg.prior_options(), &cfg.mcd_config())?;
            io::write_json(&path, &priors)?;
        }
    }
    write_manifest(output, "extract-priors", cfg, &[cfg.require_train()?])?;
    Ok(())
}

/// Full multivariate pipeline.
pub fn fit(cfg: &RunConfig) -> Result<RunReport> {
    if cfg.mode == Mode::Functional {
        return fit_functional(cfg);
    }
    let output = cfg.require_output()?;
    let train = load_training(cfg)?;
    let (test, truth) = load_test(cfg)?;
    if train.dim() != test.dim() {
        return Err(BrandError::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    let priors = extract_class_priors(&train, &cfg.mcd_config())?;
    io::write_json(&output.join(SUMMARY_DIR).join("priors.json"), &priors)?;
    let chain = run_chain(&test, &priors, &cfg.hyperparameters())?;
    let report = finish(output, &chain, cfg, truth.as_deref())?;
    write_manifest(
        output,
        "fit",
        cfg,
        &[cfg.require_train()?, cfg.require_test()?],
    )?;
    Ok(report)
}

/// Full functional pipeline; also writes the mean curve of every final
/// cluster.
pub fn fit_functional(cfg: &RunConfig) -> Result<RunReport> {
    let output = cfg.require_output()?;
    let train = io::load_curves(cfg.require_train()?, cfg.curve_layout)?;
    let (test, truth) = load_test_curves(cfg)?;
    let priors = extract_functional_priors(&train, &cfg.prior_options(), &cfg.mcd_config())?;
    io::write_json(&output.join(SUMMARY_DIR).join("priors.json"), &priors)?;
    let chain = run_functional_chain(&test, &priors, &cfg.functional_hyper())?;
    let report = finish(output, &chain, cfg, truth.as_deref())?;
    write_mean_curves(
        &output.join(SUMMARY_DIR).join("mean_curves.csv"),
        &test,
        &report.summary.labels,
    )?;
    write_manifest(
        output,
        "fit-functional",
        cfg,
        &[cfg.require_train()?, cfg.require_test()?],
    )?;
    Ok(report)
}

/// Pointwise mean of the test curves in each final cluster, one row per
/// cluster (`known-j` / `novel-h`) with its size.
pub fn write_mean_curves(path: &Path, test: &CurveSet, labels: &[UnitLabel]) -> Result<()> {
    let mut groups: Vec<UnitLabel> = labels.to_vec();
    groups.sort_by_key(|l| match *l {
        UnitLabel::Known(j) => (0, j),
        UnitLabel::Novel(h) => (1, h),
    });
    groups.dedup();
    let t = test.n_points();
    let mut means = Matrix::zeros(groups.len(), t);
    let mut sizes = vec![0usize; groups.len()];
    for (m, l) in labels.iter().enumerate() {
        let g = groups.iter().position(|x| x == l).expect("label listed");
        sizes[g] += 1;
        for k in 0..t {
            means[(g, k)] += test.values()[(m, k)];
        }
    }
    let mut out = String::from("cluster,size");
    for x in test.grid() {
        out.push_str(&format!(",{x}"));
    }
    out.push('\n');
    for (g, label) in groups.iter().enumerate() {
        out.push_str(&format!("{},{}", io::label_text(label), sizes[g]));
        for k in 0..t {
            out.push_str(&format!(",{}", means[(g, k)] / sizes[g] as f64));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| BrandError::io(path, e))
}

/// Recomputes the posterior summary of an existing run directory.
pub fn summarize_run(run: &Path, cfg: &RunConfig) -> Result<PosteriorSummary> {
    let chain = io::read_chain(&run.join(TRACES_DIR))?;
    let summary = summarize(&chain, &cfg.postprocess())?;
    io::write_summary(&run.join(SUMMARY_DIR), &summary)?;
    Ok(summary)
}

/// True components from the last column of a table, or from the `label`
/// column of a wide curve file.
pub fn read_truth(path: &Path, mode: Mode, layout: CurveLayout) -> Result<Vec<usize>> {
    match mode {
        Mode::Multivariate => Ok(io::load_multivariate(path, true)?
            .1
            .expect("labels requested")),
        Mode::Functional => io::load_curves(path, layout)?
            .labels()
            .map(<[usize]>::to_vec)
            .ok_or_else(|| BrandError::Format(format!("{}: no label column", path.display()))),
    }
}

/// Metrics of a finished run against true components; writes
/// `summary/metrics.json`.
pub fn run_metrics(run: &Path, truth: &[usize]) -> Result<Metrics> {
    let meta: io::ChainMetadata = io::read_json(&run.join(TRACES_DIR).join("metadata.json"))?;
    let labels = io::read_labels(&run.join(SUMMARY_DIR))?;
    let m = metrics(&labels, truth, meta.n_known)?;
    io::write_metrics(&run.join(SUMMARY_DIR).join("metrics.json"), &m)?;
    Ok(m)
}
