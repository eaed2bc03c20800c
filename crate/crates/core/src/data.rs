//! Sparse binary-classification datasets: LIBSVM text I/O, row normalization,
//! bias augmentation and a seeded synthetic generator.
//!
//! Feature indices are 1-based on disk and 0-based in memory; the conversion
//! happens only in [`parse_libsvm`] and [`write_libsvm`].

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    /// 0-based, strictly increasing.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn new(indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid("index/value length mismatch"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("row indices must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("row contains non-finite values"));
        }
        Ok(SparseRow { indices, values })
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, v)| v * x[j])
            .sum()
    }

    /// `out += alpha * row`
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        for (&j, v) in self.indices.iter().zip(&self.values) {
            out[j] += alpha * v;
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Labelled sparse rows with labels in {−1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl SparseDataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset must contain at least one row"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid("row/label count mismatch"));
        }
        if let Some(b) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::invalid(format!("label {b} is not in {{-1, +1}}")));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if rows.iter().any(|r| r.indices.last().is_some_and(|&j| j >= dim)) {
            return Err(Error::invalid("feature index exceeds dataset dimension"));
        }
        Ok(SparseDataset { rows, labels, dim })
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rows with no nonzero entries.
    pub fn zero_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.values.iter().all(|&v| v == 0.0))
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMode {
    /// Any positive label maps to +1, everything else to −1.
    #[default]
    Lenient,
    /// Only −1, +1, 0 and 1 are accepted (0 maps to −1).
    Strict,
}

fn map_label(raw: f64, mode: LabelMode) -> Option<f64> {
    match mode {
        LabelMode::Lenient => Some(if raw > 0.0 { 1.0 } else { -1.0 }),
        LabelMode::Strict => {
            if raw == 1.0 {
                Some(1.0)
            } else if raw == -1.0 || raw == 0.0 {
                Some(-1.0)
            } else {
                None
            }
        }
    }
}

/// Parses LIBSVM lines `<label> <idx>:<val> ...`; blank lines are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R, mode: LabelMode) -> Result<SparseDataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        // Trailing comments are allowed by the format.
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a token");
        let raw: f64 = label_tok
            .parse()
            .map_err(|_| perr(format!("malformed label '{label_tok}'")))?;
        let label = map_label(raw, mode)
            .ok_or_else(|| perr(format!("label '{label_tok}' outside {{-1, +1, 0, 1}}")))?;

        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| perr(format!("malformed feature token '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| perr(format!("malformed feature index in '{tok}'")))?;
            if idx == 0 {
                return Err(perr("feature indices are 1-based; got 0".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| perr(format!("malformed feature value in '{tok}'")))?;
            if !val.is_finite() {
                return Err(perr(format!("non-finite feature value in '{tok}'")));
            }
            let j = idx - 1;
            if indices.last().is_some_and(|&prev| prev >= j) {
                return Err(perr(format!("feature index {idx} is not strictly increasing")));
            }
            indices.push(j);
            values.push(val);
        }
        if let Some(&last) = indices.last() {
            dim = dim.max(last + 1);
        }
        rows.push(SparseRow { indices, values });
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "dataset is empty".into(),
        });
    }
    SparseDataset::new(rows, labels, dim.max(1))
}

/// Reads a LIBSVM file, transparently decompressing gzip input.
pub fn read_libsvm_path(path: impl AsRef<Path>, mode: LabelMode) -> Result<SparseDataset> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let got = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if got == 2 && magic == [0x1f, 0x8b] {
        parse_libsvm(BufReader::new(MultiGzDecoder::new(file)), mode)
    } else {
        parse_libsvm(BufReader::new(file), mode)
    }
}

pub fn write_libsvm<W: Write>(ds: &SparseDataset, mut out: W) -> std::io::Result<()> {
    for (row, &b) in ds.rows.iter().zip(&ds.labels) {
        write!(out, "{}", if b > 0.0 { "+1" } else { "-1" })?;
        for (&j, v) in row.indices.iter().zip(&row.values) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn to_libsvm_string(ds: &SparseDataset) -> String {
    let mut buf = Vec::new();
    write_libsvm(ds, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("LIBSVM output is ASCII")
}

/// Scales every nonzero row to unit Euclidean norm and returns the indices
/// of all-zero rows, which are left untouched.
///
/// Rows already at unit norm up to rounding are not rescaled, which makes
/// the operation bit-wise idempotent.
pub fn normalize_rows(ds: &SparseDataset) -> (SparseDataset, Vec<usize>) {
    let mut flagged = Vec::new();
    let rows = ds
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let nrm = row.norm_sq().sqrt();
            if nrm == 0.0 {
                flagged.push(i);
                return row.clone();
            }
            let tol = 4.0 * f64::EPSILON * (row.nnz().max(1) as f64);
            if (nrm - 1.0).abs() <= tol {
                return row.clone();
            }
            SparseRow {
                indices: row.indices.clone(),
                values: row.values.iter().map(|v| v / nrm).collect(),
            }
        })
        .collect();
    (
        SparseDataset {
            rows,
            labels: ds.labels.clone(),
            dim: ds.dim,
        },
        flagged,
    )
}

/// Appends a constant feature (value 1) at the new last index.
pub fn append_bias(ds: &SparseDataset) -> SparseDataset {
    let bias = ds.dim;
    let rows = ds
        .rows
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.indices.push(bias);
            r.values.push(1.0);
            r
        })
        .collect();
    SparseDataset {
        rows,
        labels: ds.labels.clone(),
        dim: ds.dim + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocess {
    pub bias: bool,
    pub normalize: bool,
    /// Normalize before appending the bias column (default: bias first).
    pub normalize_first: bool,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            bias: true,
            normalize: true,
            normalize_first: false,
        }
    }
}

pub fn preprocess(ds: &SparseDataset, opts: Preprocess) -> SparseDataset {
    let normalize = |d: &SparseDataset| {
        if opts.normalize {
            normalize_rows(d).0
        } else {
            d.clone()
        }
    };
    let bias = |d: &SparseDataset| if opts.bias { append_bias(d) } else { d.clone() };
    if opts.normalize_first {
        bias(&normalize(ds))
    } else {
        normalize(&bias(ds))
    }
}

/// Seeded synthetic logistic-regression data.
///
/// Feature `j` of each row is drawn from `N(0, 1/(1+j))`, so the feature
/// covariance has a decaying spectrum. Labels are
/// `sign(separability · ⟨w, a⟩ + ξ)` with a planted unit direction `w` and
/// standard normal noise `ξ`; `separability = 0` makes labels independent
/// of the features.
pub fn synth_dataset(seed: u64, n: usize, d: usize, separability: f64) -> Result<SparseDataset> {
    if n == 0 || d == 0 {
        return Err(Error::invalid("synthetic dataset needs n >= 1 and d >= 1"));
    }
    if !separability.is_finite() || separability < 0.0 {
        return Err(Error::invalid("separability must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    w.iter_mut().for_each(|v| *v /= wn);
    let scales: Vec<f64> = (0..d).map(|j| (1.0 / (1.0 + j as f64)).sqrt()).collect();

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let values: Vec<f64> = scales
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let margin: f64 = values.iter().zip(&w).map(|(a, b)| a * b).sum();
        let noise: f64 = rng.sample(StandardNormal);
        labels.push(if separability * margin + noise >= 0.0 { 1.0 } else { -1.0 });
        rows.push(SparseRow {
            indices: (0..d).collect(),
            values,
        });
    }
    SparseDataset::new(rows, labels, d)
}
