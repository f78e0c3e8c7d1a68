//! From traces to decisions: posterior probability of novelty, majority-vote
//! classification, the coclustering matrix of the novelty units, the
//! VI-optimal novelty partition, anomaly flags and evaluation metrics.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BrandError, Result};
use crate::linalg::Matrix;
use crate::sampler::ChainOutput;

/// Final label of a test unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum UnitLabel {
    /// Training class, 1-based.
    Known(usize),
    /// Novelty cluster of the best partition, 1-based.
    Novel(usize),
}

impl UnitLabel {
    pub fn is_novel(&self) -> bool {
        matches!(self, UnitLabel::Novel(_))
    }

    /// Integer code: known classes keep their label, novelty cluster `c`
    /// becomes `J + c`.
    pub fn code(&self, n_known: usize) -> usize {
        match *self {
            UnitLabel::Known(j) => j,
            UnitLabel::Novel(c) => n_known + c,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PostprocessConfig {
    /// Units with PPN above this enter the novelty partition.
    pub ppn_threshold: f64,
    /// Clusters smaller than this are anomalies; `max(5, ceil(M/100))` when unset.
    pub min_size: Option<usize>,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            ppn_threshold: 0.5,
            min_size: None,
        }
    }
}

pub fn default_min_size(n_units: usize) -> usize {
    5.max(n_units.div_ceil(100))
}

/// Posterior probability of novelty: the frequency of α_m = 0.
pub fn ppn(output: &ChainOutput) -> Vec<f64> {
    let n_iter = output.n_iter();
    let mut zeros = vec![0usize; output.n_units];
    for i in 0..n_iter {
        for (z, &a) in zeros.iter_mut().zip(output.alpha_row(i)) {
            *z += usize::from(a == 0);
        }
    }
    zeros.iter().map(|&z| z as f64 / n_iter as f64).collect()
}

/// Most frequent value, smallest on ties.
fn mode<I: IntoIterator<Item = u32>>(values: I) -> Option<u32> {
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(v, _)| v)
}

/// Majority-vote label of every unit. Units whose modal α is 0 take their
/// cluster of `partition` (indexed like `novelty_units`); a unit with modal
/// α = 0 left out of the partition falls back to its modal known class.
pub fn classify(
    output: &ChainOutput,
    novelty_units: &[usize],
    partition: &[usize],
) -> Vec<UnitLabel> {
    let cluster: HashMap<usize, usize> = novelty_units
        .iter()
        .copied()
        .zip(partition.iter().copied())
        .collect();
    (0..output.n_units)
        .map(|m| {
            let trace = output.alpha_of(m);
            match mode(trace.iter().copied()) {
                Some(0) => match cluster.get(&m) {
                    Some(&c) => UnitLabel::Novel(c),
                    None => {
                        let known = mode(trace.iter().copied().filter(|&a| a > 0));
                        UnitLabel::Known(known.unwrap_or(1) as usize)
                    }
                },
                Some(j) => UnitLabel::Known(j as usize),
                None => UnitLabel::Known(1),
            }
        })
        .collect()
}

/// Posterior coclustering probabilities among `units`, counting only
/// iterations where both units are novelties.
#[derive(Debug, Clone, PartialEq)]
pub struct Coclustering {
    pub units: Vec<usize>,
    pub matrix: Matrix,
    /// Pairs (positions in `units`) never jointly novel; their entry is 0.
    pub missing: Vec<(usize, usize)>,
}

pub fn coclustering(output: &ChainOutput, units: &[usize]) -> Coclustering {
    let k = units.len();
    let traces: Vec<Vec<u32>> = units.iter().map(|&m| output.beta_of(m)).collect();
    let rows: Vec<Vec<(f64, bool)>> = (0..k)
        .into_par_iter()
        .map(|a| {
            (0..k)
                .map(|b| {
                    if a == b {
                        return (1.0, false);
                    }
                    let (mut both, mut same) = (0usize, 0usize);
                    for (x, y) in traces[a].iter().zip(&traces[b]) {
                        if *x > 0 && *y > 0 {
                            both += 1;
                            same += usize::from(x == y);
                        }
                    }
                    if both == 0 {
                        (0.0, true)
                    } else {
                        (same as f64 / both as f64, false)
                    }
                })
                .collect()
        })
        .collect();
    let mut matrix = Matrix::zeros(k, k);
    let mut missing = Vec::new();
    for a in 0..k {
        for b in 0..k {
            matrix[(a, b)] = rows[a][b].0;
            if a < b && rows[a][b].1 {
                missing.push((a, b));
            }
        }
    }
    Coclustering {
        units: units.to_vec(),
        matrix,
        missing,
    }
}

/// Relabels clusters 1, 2, ... by order of first appearance.
pub fn canonical(partition: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    partition
        .iter()
        .map(|&c| {
            let next = map.len() + 1;
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Partition of `units` visited at every retained iteration, in canonical
/// form, deduplicated in order of first visit. Units held by a known class
/// at an iteration are grouped by that class.
pub fn visited_partitions(output: &ChainOutput, units: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let offset = output.n_known;
    for i in 0..output.n_iter() {
        let alpha = output.alpha_row(i);
        let beta = output.beta_row(i);
        let raw: Vec<usize> = units
            .iter()
            .map(|&m| {
                if beta[m] > 0 {
                    offset + beta[m] as usize
                } else {
                    alpha[m] as usize
                }
            })
            .collect();
        let c = canonical(&raw);
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Lower bound of the posterior expected variation of information (bits).
pub fn vi_score(ppcm: &Matrix, partition: &[usize]) -> f64 {
    let k = partition.len();
    (0..k)
        .map(|m| {
            let mut size = 0.0f64;
            let mut total = 0.0f64;
            let mut shared = 0.0f64;
            for j in 0..k {
                let p = ppcm[(m, j)];
                total += p;
                if partition[j] == partition[m] {
                    size += 1.0;
                    shared += p;
                }
            }
            size.log2() + total.log2() - 2.0 * shared.log2()
        })
        .sum()
}

/// Candidate with the smallest VI score; the earliest wins ties.
pub fn best_partition_vi(ppcm: &Matrix, candidates: &[Vec<usize>]) -> Result<(Vec<usize>, f64)> {
    if candidates.is_empty() {
        return Err(BrandError::InvalidInput("no candidate partitions".into()));
    }
    let scores: Vec<f64> = candidates.par_iter().map(|c| vi_score(ppcm, c)).collect();
    let (best, score) =
        scores.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc },
        );
    Ok((candidates[best].clone(), score))
}

/// True for units in clusters with fewer than `min_size` members.
pub fn flag_anomalies(partition: &[usize], min_size: usize) -> Vec<bool> {
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &c in partition {
        *sizes.entry(c).or_default() += 1;
    }
    partition.iter().map(|c| sizes[c] < min_size).collect()
}

fn choose2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same units.
pub fn ari(p1: &[usize], p2: &[usize]) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(BrandError::LengthMismatch {
            left: p1.len(),
            right: p2.len(),
        });
    }
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in p1.iter().zip(p2) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&n| choose2(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| choose2(n)).sum();
    let total = choose2(p1.len());
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        // both partitions trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Share of units labeled novel whose true component is not a training class.
pub fn novelty_precision(labels: &[UnitLabel], truth: &[usize], n_known: usize) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(BrandError::LengthMismatch {
            left: labels.len(),
            right: truth.len(),
        });
    }
    let flagged: Vec<usize> = (0..labels.len())
        .filter(|&m| labels[m].is_novel())
        .collect();
    if flagged.is_empty() {
        return Ok(0.0);
    }
    let hits = flagged.iter().filter(|&&m| truth[m] > n_known).count();
    Ok(hits as f64 / flagged.len() as f64)
}

/// Accuracy over the units whose true component is a training class.
pub fn known_accuracy(labels: &[UnitLabel], truth: &[usize], n_known: usize) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(BrandError::LengthMismatch {
            left: labels.len(),
            right: truth.len(),
        });
    }
    let known: Vec<usize> = (0..labels.len()).filter(|&m| truth[m] <= n_known).collect();
    if known.is_empty() {
        return Ok(0.0);
    }
    let hits = known
        .iter()
        .filter(|&&m| labels[m] == UnitLabel::Known(truth[m]))
        .count();
    Ok(hits as f64 / known.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Metrics {
    pub ari: f64,
    pub novelty_precision: f64,
    pub known_accuracy: f64,
}

pub fn metrics(labels: &[UnitLabel], truth: &[usize], n_known: usize) -> Result<Metrics> {
    let codes: Vec<usize> = labels.iter().map(|l| l.code(n_known)).collect();
    Ok(Metrics {
        ari: ari(&codes, truth)?,
        novelty_precision: novelty_precision(labels, truth, n_known)?,
        known_accuracy: known_accuracy(labels, truth, n_known)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub ppn: Vec<f64>,
    pub labels: Vec<UnitLabel>,
    /// Units with PPN above the threshold, ascending.
    pub novelty_units: Vec<usize>,
    pub ppcm: Coclustering,
    /// Cluster of each novelty unit, 1-based.
    pub best_partition: Vec<usize>,
    pub vi_score: f64,
    pub n_candidates: usize,
    /// Anomaly flag of each novelty unit.
    pub anomaly_flags: Vec<bool>,
    pub min_size: usize,
}

pub fn summarize(output: &ChainOutput, cfg: &PostprocessConfig) -> Result<PosteriorSummary> {
    if output.n_iter() == 0 {
        return Err(BrandError::InvalidInput(
            "chain output has no iterations".into(),
        ));
    }
    let ppn = ppn(output);
    let novelty_units: Vec<usize> = (0..ppn.len())
        .filter(|&m| ppn[m] > cfg.ppn_threshold)
        .collect();
    let ppcm = coclustering(output, &novelty_units);
    let (best_partition, vi_score, n_candidates) = if novelty_units.is_empty() {
        (Vec::new(), 0.0, 0)
    } else {
        let candidates = visited_partitions(output, &novelty_units);
        let (best, score) = best_partition_vi(&ppcm.matrix, &candidates)?;
        // clusters numbered by decreasing size, then by first member
        (order_by_size(&best), score, candidates.len())
    };
    let min_size = cfg
        .min_size
        .unwrap_or_else(|| default_min_size(output.n_units));
    Ok(PosteriorSummary {
        labels: classify(output, &novelty_units, &best_partition),
        anomaly_flags: flag_anomalies(&best_partition, min_size),
        ppn,
        novelty_units,
        ppcm,
        best_partition,
        vi_score,
        n_candidates,
        min_size,
    })
}

fn order_by_size(partition: &[usize]) -> Vec<usize> {
    let mut sizes: HashMap<usize, (usize, usize)> = HashMap::new();
    for (i, &c) in partition.iter().enumerate() {
        let e = sizes.entry(c).or_insert((0, i));
        e.0 += 1;
    }
    let mut order: Vec<(usize, (usize, usize))> = sizes.into_iter().collect();
    order.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
    let rank: HashMap<usize, usize> = order
        .iter()
        .enumerate()
        .map(|(r, (c, _))| (*c, r + 1))
        .collect();
    partition.iter().map(|c| rank[c]).collect()
}
