//! File formats: data CSVs, chain directories, posterior summaries and
//! content hashes.
//!
//! Floats are written with Rust's shortest round-trip representation, so every
//! reader returns bit-identical values to what the matching writer was given.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BrandError, Result};
use crate::functional::CurveSet;
use crate::linalg::Matrix;
use crate::postprocess::{Metrics, PosteriorSummary, UnitLabel};
use crate::sampler::{AtomSnapshot, ChainOutput};

/// One parsed record with its 1-based line number.
type Record = (usize, Vec<String>);

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| BrandError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| BrandError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| BrandError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| BrandError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| BrandError::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| BrandError::io(path, e))
}

/// Records of a comma-separated file, or of a whitespace-separated one when
/// the first non-blank line has no comma.
fn read_records(path: &Path) -> Result<Vec<Record>> {
    let text = read_text(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if !first.contains(',') {
        return Ok(text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split_whitespace().map(str::to_owned).collect()))
            .collect());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, 0, &e.to_string())
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(out)
}

fn parse_error(path: &Path, row: usize, column: usize, message: &str) -> BrandError {
    BrandError::Parse {
        path: path.display().to_string(),
        row,
        column,
        message: message.to_owned(),
    }
}

fn parse_f64(path: &Path, row: usize, column: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(path, row, column, &format!("'{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, row, column, "value is not finite"));
    }
    Ok(v)
}

fn parse_label(path: &Path, row: usize, column: usize, field: &str) -> Result<usize> {
    let v: f64 = field.parse().map_err(|_| {
        parse_error(
            path,
            row,
            column,
            &format!("'{field}' is not a class label"),
        )
    })?;
    if !(v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64) {
        return Err(parse_error(
            path,
            row,
            column,
            &format!("class labels are positive integers, found '{field}'"),
        ));
    }
    Ok(v as usize)
}

fn is_header(fields: &[String]) -> bool {
    fields.iter().any(|f| f.parse::<f64>().is_err())
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut line = fields.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

/// Writes observations (one row per unit) with an optional trailing label
/// column and a header `x1,...,xp[,label]`.
pub fn write_multivariate(path: &Path, data: &Matrix, labels: Option<&[usize]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != data.nrows() {
            return Err(BrandError::LengthMismatch {
                left: data.nrows(),
                right: l.len(),
            });
        }
    }
    let p = data.ncols();
    let mut header: Vec<String> = (1..=p).map(|c| format!("x{c}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    let mut out = csv_line(header);
    for r in 0..data.nrows() {
        let mut fields: Vec<String> = (0..p).map(|c| data[(r, c)].to_string()).collect();
        if let Some(l) = labels {
            fields.push(l[r].to_string());
        }
        out.push_str(&csv_line(fields));
    }
    write_text(path, &out)
}

/// Numeric table with an optional header line; the last column holds class
/// labels when `has_labels`. Comma- or whitespace-separated.
pub fn load_multivariate(path: &Path, has_labels: bool) -> Result<(Matrix, Option<Vec<usize>>)> {
    let mut records = read_records(path)?;
    if records.first().is_some_and(|(_, f)| is_header(f)) {
        records.remove(0);
    }
    let Some((_, first)) = records.first() else {
        return Err(BrandError::Format(format!(
            "{}: no data rows",
            path.display()
        )));
    };
    let width = first.len();
    let p = if has_labels {
        width.saturating_sub(1)
    } else {
        width
    };
    if p == 0 {
        return Err(BrandError::Format(format!(
            "{}: no feature columns",
            path.display()
        )));
    }
    let mut values = Vec::with_capacity(records.len() * p);
    let mut labels = Vec::new();
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(parse_error(
                path,
                *line,
                fields.len().min(width) + 1,
                &BrandError::DimensionMismatch {
                    expected: width,
                    found: fields.len(),
                }
                .to_string(),
            ));
        }
        for (c, f) in fields[..p].iter().enumerate() {
            values.push(parse_f64(path, *line, c + 1, f)?);
        }
        if has_labels {
            labels.push(parse_label(path, *line, width, &fields[p])?);
        }
    }
    let data = Matrix::from_row_slice(records.len(), p, &values);
    Ok((data, has_labels.then_some(labels)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CurveLayout {
    /// First column the time grid, one column per curve. An optional row
    /// starting with `label` carries class labels.
    Long,
    /// One row per curve, header of time stamps. An optional first column
    /// named `label` carries class labels.
    #[default]
    Wide,
}

impl std::str::FromStr for CurveLayout {
    type Err = BrandError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(CurveLayout::Long),
            "wide" => Ok(CurveLayout::Wide),
            other => Err(BrandError::InvalidInput(format!(
                "unknown curve layout '{other}' (expected long or wide)"
            ))),
        }
    }
}

pub fn write_curves(path: &Path, curves: &CurveSet, layout: CurveLayout) -> Result<()> {
    let labels = curves.labels();
    let n = curves.n_curves();
    let mut out = String::new();
    match layout {
        CurveLayout::Wide => {
            let mut header: Vec<String> = Vec::new();
            if labels.is_some() {
                header.push("label".into());
            }
            header.extend(curves.grid().iter().map(|t| t.to_string()));
            out.push_str(&csv_line(header));
            for i in 0..n {
                let mut fields = Vec::new();
                if let Some(l) = labels {
                    fields.push(l[i].to_string());
                }
                fields.extend(curves.values().row(i).iter().map(|v| v.to_string()));
                out.push_str(&csv_line(fields));
            }
        }
        CurveLayout::Long => {
            let header = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("c{i}")));
            out.push_str(&csv_line(header));
            if let Some(l) = labels {
                let row =
                    std::iter::once("label".to_string()).chain(l.iter().map(|v| v.to_string()));
                out.push_str(&csv_line(row));
            }
            for (t, time) in curves.grid().iter().enumerate() {
                let column = curves.values().column(t);
                let row =
                    std::iter::once(time.to_string()).chain(column.iter().map(|v| v.to_string()));
                out.push_str(&csv_line(row));
            }
        }
    }
    write_text(path, &out)
}

pub fn load_curves(path: &Path, layout: CurveLayout) -> Result<CurveSet> {
    let records = read_records(path)?;
    let Some((header_line, header)) = records.first() else {
        return Err(BrandError::Format(format!(
            "{}: empty file",
            path.display()
        )));
    };
    let width = header.len();
    for (line, fields) in &records {
        if fields.len() != width {
            return Err(parse_error(
                path,
                *line,
                fields.len().min(width) + 1,
                &BrandError::DimensionMismatch {
                    expected: width,
                    found: fields.len(),
                }
                .to_string(),
            ));
        }
    }
    let (grid, values, labels) = match layout {
        CurveLayout::Wide => {
            let labeled = header[0].eq_ignore_ascii_case("label");
            let skip = usize::from(labeled);
            let grid = header[skip..]
                .iter()
                .enumerate()
                .map(|(c, f)| parse_f64(path, *header_line, c + skip + 1, f))
                .collect::<Result<Vec<f64>>>()?;
            let rows = &records[1..];
            let mut values = Vec::with_capacity(rows.len() * grid.len());
            let mut labels = Vec::new();
            for (line, fields) in rows {
                if labeled {
                    labels.push(parse_label(path, *line, 1, &fields[0])?);
                }
                for (c, f) in fields[skip..].iter().enumerate() {
                    values.push(parse_f64(path, *line, c + skip + 1, f)?);
                }
            }
            let m = Matrix::from_row_slice(rows.len(), grid.len(), &values);
            (grid, m, labeled.then_some(labels))
        }
        CurveLayout::Long => {
            let mut rows = &records[1..];
            let mut labels = None;
            if let Some((line, fields)) = rows.first() {
                if fields[0].eq_ignore_ascii_case("label") {
                    labels = Some(
                        fields[1..]
                            .iter()
                            .enumerate()
                            .map(|(c, f)| parse_label(path, *line, c + 2, f))
                            .collect::<Result<Vec<usize>>>()?,
                    );
                    rows = &rows[1..];
                }
            }
            let n = width - 1;
            let mut grid = Vec::with_capacity(rows.len());
            let mut m = Matrix::zeros(n, rows.len());
            for (t, (line, fields)) in rows.iter().enumerate() {
                grid.push(parse_f64(path, *line, 1, &fields[0])?);
                for (c, f) in fields[1..].iter().enumerate() {
                    m[(c, t)] = parse_f64(path, *line, c + 2, f)?;
                }
            }
            (grid, m, labels)
        }
    };
    CurveSet::new(grid, values, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    /// Flat little-endian arrays (u32 for allocations, f64 otherwise).
    Binary,
}

impl std::str::FromStr for TraceFormat {
    type Err = BrandError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "binary" | "bin" => Ok(TraceFormat::Binary),
            other => Err(BrandError::InvalidInput(format!(
                "unknown trace format '{other}' (expected csv or binary)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChainMetadata {
    pub n_units: usize,
    pub n_known: usize,
    pub n_iter: usize,
    pub format: TraceFormat,
}

trait Cell: Copy + std::fmt::Display + std::str::FromStr {
    const WIDTH: usize;
    fn put(self, out: &mut Vec<u8>);
    fn get(bytes: &[u8]) -> Self;
}

impl Cell for u32 {
    const WIDTH: usize = 4;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        u32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Cell for f64 {
    const WIDTH: usize = 8;
    fn put(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn get(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

fn write_table<T: Cell>(
    path: &Path,
    values: &[T],
    width: usize,
    format: TraceFormat,
) -> Result<()> {
    match format {
        TraceFormat::Binary => {
            let mut bytes = Vec::with_capacity(values.len() * T::WIDTH);
            values.iter().for_each(|v| v.put(&mut bytes));
            write_bytes(path, &bytes)
        }
        TraceFormat::Csv => {
            let mut out = String::new();
            for row in values.chunks(width.max(1)) {
                out.push_str(&csv_line(row.iter().map(|v| v.to_string())));
            }
            write_text(path, &out)
        }
    }
}

fn read_table<T: Cell>(
    path: &Path,
    len: usize,
    width: usize,
    format: TraceFormat,
) -> Result<Vec<T>> {
    let values: Vec<T> = match format {
        TraceFormat::Binary => {
            let bytes = read_bytes(path)?;
            if bytes.len() != len * T::WIDTH {
                return Err(BrandError::Format(format!(
                    "{}: expected {} bytes, found {}",
                    path.display(),
                    len * T::WIDTH,
                    bytes.len()
                )));
            }
            bytes.chunks_exact(T::WIDTH).map(T::get).collect()
        }
        TraceFormat::Csv => {
            let mut out = Vec::with_capacity(len);
            for (line, fields) in read_records(path)? {
                if fields.len() != width {
                    return Err(parse_error(
                        path,
                        line,
                        fields.len().min(width) + 1,
                        &format!("expected {width} fields, found {}", fields.len()),
                    ));
                }
                for (c, f) in fields.iter().enumerate() {
                    out.push(
                        f.parse::<T>()
                            .map_err(|_| parse_error(path, line, c + 1, "bad trace value"))?,
                    );
                }
            }
            out
        }
    };
    if values.len() != len {
        return Err(BrandError::Format(format!(
            "{}: expected {len} values, found {}",
            path.display(),
            values.len()
        )));
    }
    Ok(values)
}

fn trace_path(dir: &Path, name: &str, format: TraceFormat) -> PathBuf {
    let ext = match format {
        TraceFormat::Csv => "csv",
        TraceFormat::Binary => "bin",
    };
    dir.join(format!("{name}.{ext}"))
}

/// Persists a chain as `alpha`, `beta`, `pi`, `gamma`, `n_active` traces plus
/// `atoms.json` and `metadata.json` inside `dir`.
pub fn write_chain(dir: &Path, output: &ChainOutput, format: TraceFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BrandError::io(dir, e))?;
    let m = output.n_units;
    write_table(&trace_path(dir, "alpha", format), &output.alpha, m, format)?;
    write_table(&trace_path(dir, "beta", format), &output.beta, m, format)?;
    write_table(
        &trace_path(dir, "pi", format),
        &output.pi,
        output.n_known + 1,
        format,
    )?;
    write_table(&trace_path(dir, "gamma", format), &output.gamma, 1, format)?;
    write_table(
        &trace_path(dir, "n_active", format),
        &output.n_active,
        1,
        format,
    )?;
    write_json(&dir.join("atoms.json"), &output.snapshots)?;
    write_json(
        &dir.join("metadata.json"),
        &ChainMetadata {
            n_units: output.n_units,
            n_known: output.n_known,
            n_iter: output.n_iter(),
            format,
        },
    )
}

pub fn read_chain(dir: &Path) -> Result<ChainOutput> {
    let meta: ChainMetadata = read_json(&dir.join("metadata.json"))?;
    let (m, i, w) = (meta.n_units, meta.n_iter, meta.n_known + 1);
    let f = meta.format;
    let snapshots: Vec<AtomSnapshot> = read_json(&dir.join("atoms.json"))?;
    Ok(ChainOutput {
        n_units: m,
        n_known: meta.n_known,
        alpha: read_table(&trace_path(dir, "alpha", f), i * m, m, f)?,
        beta: read_table(&trace_path(dir, "beta", f), i * m, m, f)?,
        pi: read_table(&trace_path(dir, "pi", f), i * w, w, f)?,
        gamma: read_table(&trace_path(dir, "gamma", f), i, 1, f)?,
        n_active: read_table(&trace_path(dir, "n_active", f), i, 1, f)?,
        snapshots,
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| BrandError::Format(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.column(), &e.to_string()))
}

/// Header of the flat PPCM file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PpcmHeader {
    pub dimension: usize,
    /// Test-unit indices (0-based) of the rows and columns.
    pub unit_ids: Vec<usize>,
    pub dtype: String,
    pub layout: String,
    /// Pairs (row, column positions) never novel together, stored as 0.
    pub missing_pairs: Vec<(usize, usize)>,
}

pub fn label_text(label: &UnitLabel) -> String {
    match label {
        UnitLabel::Known(j) => format!("known-{j}"),
        UnitLabel::Novel(h) => format!("novel-{h}"),
    }
}

/// `labels.csv`, `ppcm.bin` + `ppcm.json` and `summary.json` in `dir`.
pub fn write_summary(dir: &Path, summary: &PosteriorSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| BrandError::io(dir, e))?;
    let mut flags = vec![false; summary.labels.len()];
    for (k, &m) in summary.novelty_units.iter().enumerate() {
        flags[m] = summary.anomaly_flags[k];
    }
    let mut out = csv_line(["unit", "label", "ppn", "anomaly"].map(String::from));
    for (m, label) in summary.labels.iter().enumerate() {
        out.push_str(&csv_line([
            m.to_string(),
            label_text(label),
            summary.ppn[m].to_string(),
            flags[m].to_string(),
        ]));
    }
    write_text(&dir.join("labels.csv"), &out)?;

    let ppcm = &summary.ppcm;
    let d = ppcm.units.len();
    let mut bytes = Vec::with_capacity(d * d * 8);
    for r in 0..d {
        for c in 0..d {
            ppcm.matrix[(r, c)].put(&mut bytes);
        }
    }
    write_bytes(&dir.join("ppcm.bin"), &bytes)?;
    write_json(
        &dir.join("ppcm.json"),
        &PpcmHeader {
            dimension: d,
            unit_ids: ppcm.units.clone(),
            dtype: "f64-le".into(),
            layout: "row-major".into(),
            missing_pairs: ppcm.missing.clone(),
        },
    )?;
    write_json(
        &dir.join("summary.json"),
        &serde_json::json!({
            "novelty_units": summary.novelty_units,
            "best_partition": summary.best_partition,
            "vi_score": summary.vi_score,
            "n_candidates": summary.n_candidates,
            "min_size": summary.min_size,
        }),
    )
}

pub fn read_ppcm(dir: &Path) -> Result<(PpcmHeader, Matrix)> {
    let header: PpcmHeader = read_json(&dir.join("ppcm.json"))?;
    let d = header.dimension;
    let values: Vec<f64> = read_table(&dir.join("ppcm.bin"), d * d, d, TraceFormat::Binary)?;
    Ok((header, Matrix::from_row_slice(d, d, &values)))
}

/// Labels written by [`write_summary`], in unit order.
pub fn read_labels(dir: &Path) -> Result<Vec<UnitLabel>> {
    let path = dir.join("labels.csv");
    let mut records = read_records(&path)?;
    if records
        .first()
        .is_some_and(|(_, f)| f.first().is_some_and(|x| x == "unit"))
    {
        records.remove(0);
    }
    records
        .iter()
        .map(|(line, fields)| {
            let bad = || parse_error(&path, *line, 2, "label must be known-J or novel-H");
            let text = fields.get(1).ok_or_else(bad)?;
            let (kind, id) = text.split_once('-').ok_or_else(bad)?;
            let id: usize = id.parse().map_err(|_| bad())?;
            match kind {
                "known" => Ok(UnitLabel::Known(id)),
                "novel" => Ok(UnitLabel::Novel(id)),
                _ => Err(bad()),
            }
        })
        .collect()
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    write_json(path, metrics)
}

/// Git blob id of `content`: SHA-256 of `blob {len}\0{content}`.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(blob_hash(&read_bytes(path)?))
}

/// Appends a line to a text file, creating it when absent.
pub fn append_line(path: &Path, line: &str) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| BrandError::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| BrandError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};

    fn random_matrix(n: usize, p: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, p, |_, _| rng.random::<f64>() * 200.0 - 100.0)
    }

    #[test]
    fn multivariate_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let data = random_matrix(10, 3, 1);
        let labels: Vec<usize> = (0..10).map(|i| i % 3 + 1).collect();
        write_multivariate(&path, &data, Some(&labels)).unwrap();
        let (back, l) = load_multivariate(&path, true).unwrap();
        assert_eq!(l.unwrap(), labels);
        for (a, b) in data.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        write_multivariate(&path, &data, None).unwrap();
        let (back, l) = load_multivariate(&path, false).unwrap();
        assert!(l.is_none());
        assert_eq!(back, data);
    }

    #[test]
    fn whitespace_table_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.txt");
        fs::write(&path, "15.26\t14.84\t1\n14.88  14.57 2\n\n13.0 12.0 3\n").unwrap();
        let (x, l) = load_multivariate(&path, true).unwrap();
        assert_eq!(x.shape(), (3, 2));
        assert_eq!(l.unwrap(), vec![1, 2, 3]);
        assert_eq!(x[(1, 1)], 14.57);
    }

    #[test]
    fn malformed_row_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "x1,x2\n1,2\n3,oops\n").unwrap();
        match load_multivariate(&path, false) {
            Err(BrandError::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "1,2\n3\n").unwrap();
        match load_multivariate(&path, false) {
            Err(BrandError::Parse { row, message, .. }) => {
                assert_eq!(row, 2);
                assert!(message.contains("dimension mismatch"));
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "1,2,0\n").unwrap();
        assert!(matches!(
            load_multivariate(&path, true),
            Err(BrandError::Parse { column: 3, .. })
        ));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_multivariate(Path::new("/no/such/file.csv"), false).unwrap_err();
        assert!(err.to_string().contains("/no/such/file.csv"));
    }

    #[test]
    fn curves_round_trip_in_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let grid: Vec<f64> = (0..7).map(|i| 0.1 * i as f64 + 0.05).collect();
        let values = random_matrix(4, 7, 2);
        for labels in [None, Some(vec![1, 2, 2, 1])] {
            let curves = CurveSet::new(grid.clone(), values.clone(), labels).unwrap();
            for layout in [CurveLayout::Wide, CurveLayout::Long] {
                let path = dir.path().join("c.csv");
                write_curves(&path, &curves, layout).unwrap();
                let back = load_curves(&path, layout).unwrap();
                assert_eq!(back, curves, "{layout:?}");
            }
        }
    }

    #[test]
    fn chain_round_trip_in_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let out = ChainOutput {
            n_units: 3,
            n_known: 2,
            alpha: vec![0, 1, 2, 0, 0, 2],
            beta: vec![1, 0, 0, 1, 2, 0],
            pi: vec![0.1, 0.2, 0.7, 1.0 / 3.0, 0.5, 1.0 / 6.0],
            gamma: vec![0.73, 1e-9],
            n_active: vec![4, 5],
            snapshots: vec![AtomSnapshot {
                iteration: 1,
                atoms: serde_json::json!({"novel": [1.5]}),
            }],
        };
        for format in [TraceFormat::Csv, TraceFormat::Binary] {
            let d = dir.path().join(format!("{format:?}"));
            write_chain(&d, &out, format).unwrap();
            assert_eq!(read_chain(&d).unwrap(), out);
        }
    }

    #[test]
    fn blob_hash_matches_git_construction() {
        // sha256 of "blob 0\0"
        assert_eq!(
            blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }
}
