//! Synthetic data, comma-separated matrix files and plot-ready series.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::predictors::Observation;
use crate::protocol::OnlineLedger;

/// `y = α + β·x + σξ` with independent standard normal features and noise,
/// drawn from ChaCha8 seeded by `seed`. Per observation the `K` features
/// are drawn first, then the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub observations: usize,
    pub features: usize,
    pub intercept: f64,
    /// `β`; `None` selects [`default_coefficient`].
    pub coefficients: Option<Vec<f64>>,
    pub noise_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            observations: 600,
            features: 100,
            intercept: 100.0,
            coefficients: None,
            noise_scale: 1.0,
        }
    }
}

/// `β_k = (-1)^{k-1} · 10` for `k ≤ 10` and `(-1)^{k-1}` after, `k` from 1.
pub fn default_coefficient(k: usize) -> f64 {
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    if k <= 10 {
        10.0 * sign
    } else {
        sign
    }
}

impl SyntheticConfig {
    pub fn coefficient_vector(&self) -> Result<Vec<f64>> {
        match &self.coefficients {
            Some(beta) if beta.len() != self.features => Err(Error::DimensionMismatch {
                expected: self.features,
                found: beta.len(),
            }),
            Some(beta) => Ok(beta.clone()),
            None => Ok((1..=self.features).map(default_coefficient).collect()),
        }
    }
}

pub fn gen_synthetic(config: &SyntheticConfig) -> Result<Vec<Observation<f64>>> {
    let beta = config.coefficient_vector()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok((0..config.observations)
        .map(|_| {
            let x: Vec<f64> = (0..config.features).map(|_| rng.sample(StandardNormal)).collect();
            let noise: f64 = rng.sample(StandardNormal);
            let y = config.intercept + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + config.noise_scale * noise;
            Observation::new(x, y)
        })
        .collect())
}

/// Rectangular matrix of reals with an optional header line.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub header: Option<Vec<String>>,
    pub columns: usize,
    pub rows: Vec<Vec<f64>>,
}

impl MatrixFile {
    pub fn new(columns: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(bad) = rows.iter().find(|r| r.len() != columns) {
            return Err(Error::DimensionMismatch {
                expected: columns,
                found: bad.len(),
            });
        }
        Ok(Self {
            header: None,
            columns,
            rows,
        })
    }

    pub fn with_header(mut self, header: Vec<String>) -> Self {
        self.header = Some(header);
        self
    }

    /// Training layout: `K` feature columns, response last.
    pub fn from_observations(dim: usize, observations: &[Observation<f64>]) -> Self {
        let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        Self {
            header: Some(header),
            columns: dim + 1,
            rows: observations
                .iter()
                .map(|o| {
                    let mut r = o.explanatory.clone();
                    r.push(o.response);
                    r
                })
                .collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Reads the training layout; every entry must be finite.
    pub fn to_observations(&self) -> Result<Vec<Observation<f64>>> {
        if self.columns == 0 {
            return Err(Error::InvalidArgument("training data needs a response column".into()));
        }
        self.check_finite()?;
        Ok(self
            .rows
            .iter()
            .map(|r| Observation::new(r[..self.columns - 1].to_vec(), r[self.columns - 1]))
            .collect())
    }

    /// Reads the test layout of explanatory vectors.
    pub fn to_features(&self) -> Result<Vec<Vec<f64>>> {
        self.check_finite()?;
        Ok(self.rows.clone())
    }

    fn check_finite(&self) -> Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {} has a non-finite entry", i + 1)));
            }
        }
        Ok(())
    }
}

/// Parses comma-separated values. A first line that is not numeric is the
/// header; blank lines are skipped.
pub fn parse_matrix(text: &str, path: &Path) -> Result<MatrixFile> {
    let parse_error = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut header = None;
    let mut columns = None;
    let mut rows = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if header.is_none() && columns.is_none() => {
                columns = Some(fields.len());
                header = Some(fields.iter().map(|f| f.to_string()).collect());
                continue;
            }
            Err(_) => {
                let bad = fields.iter().find(|f| f.parse::<f64>().is_err()).expect("a field failed");
                return Err(parse_error(line_no, format!("non-numeric field {bad:?}")));
            }
        };
        if values.iter().any(|v| v.is_nan()) {
            return Err(parse_error(line_no, "NaN entry".into()));
        }
        match columns {
            Some(c) if c != values.len() => {
                return Err(parse_error(line_no, format!("expected {c} fields, found {}", values.len())));
            }
            _ => columns = Some(values.len()),
        }
        rows.push(values);
    }
    Ok(MatrixFile {
        header,
        columns: columns.unwrap_or(0),
        rows,
    })
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<MatrixFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

/// Shortest round-tripping decimal form; infinities as `inf` and `-inf`.
pub fn format_matrix(m: &MatrixFile) -> String {
    let mut out = String::new();
    if let Some(h) = &m.header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in &m.rows {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_matrix(m: &MatrixFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesKind {
    CumulativeErrors,
    MedianAccuracy,
}

/// Column `n` followed by one column per level.
pub fn format_series(ledger: &OnlineLedger, kind: SeriesKind) -> String {
    let mut out = String::from("n");
    for eps in &ledger.levels {
        write!(out, ",{eps}").expect("writing to a string");
    }
    out.push('\n');
    for step in 0..ledger.steps() {
        write!(out, "{}", step + 1).expect("writing to a string");
        for level in 0..ledger.levels.len() {
            match kind {
                SeriesKind::CumulativeErrors => write!(out, ",{}", ledger.cumulative(level)[step]),
                SeriesKind::MedianAccuracy => write!(out, ",{}", ledger.medians(level)[step]),
            }
            .expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn emit_series(ledger: &OnlineLedger, kind: SeriesKind, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_series(ledger, kind)).map_err(|e| Error::io(path, e))
}

pub fn write_json<V: Serialize>(value: &V, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<V: DeserializeOwned>(path: impl AsRef<Path>) -> Result<V> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
