//! Loan records: delimited-text ingestion, causal feature normalisation and a
//! seeded synthetic stream generator with optional concept drift.
//!
//! File schema (first line is the header):
//!
//! ```text
//! id,label,loan_amount,total_interest,f1,...,fk
//! ```
//!
//! `label` is `1` for a fully paid (positive) loan and `0` for a default. An
//! empty feature cell is kept as a missing value (`NaN`) and imputed by the
//! [`Normalizer`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NeatError, Result};
use crate::phenotype::Class;

pub const HEADER_PREFIX: [&str; 4] = ["id", "label", "loan_amount", "total_interest"];

#[derive(Clone, Debug, PartialEq)]
pub struct LoanRecord {
    pub id: String,
    pub label: Class,
    /// Principal `L`.
    pub loan_amount: f64,
    /// Total interest `I` earned if the loan is repaid.
    pub total_interest: f64,
    /// `NaN` marks a missing cell.
    pub features: Vec<f64>,
}

impl LoanRecord {
    pub fn has_missing(&self) -> bool {
        self.features.iter().any(|x| x.is_nan())
    }
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<Vec<LoanRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| NeatError::io(path, e))?;
    read_stream(file, path)
}

/// Parses the record schema from any reader; `origin` only labels errors.
pub fn read_stream<R: Read>(reader: R, origin: impl AsRef<Path>) -> Result<Vec<LoanRecord>> {
    let origin = origin.as_ref();
    let parse_err = |line: u64, message: String| NeatError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = csv
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let prefix_ok = header.len() > HEADER_PREFIX.len()
        && header.iter().zip(HEADER_PREFIX).all(|(got, want)| got == want);
    if !prefix_ok {
        return Err(parse_err(
            1,
            format!(
                "header must be `id,label,loan_amount,total_interest,f1,...` with at least one feature, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let n_features = header.len() - HEADER_PREFIX.len();

    let mut records = Vec::new();
    for row in csv.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label = match &row[1] {
            "1" => Class::Positive,
            "0" => Class::Negative,
            other => return Err(parse_err(line, format!("label must be 0 or 1, got `{other}`"))),
        };
        let amount = |col: usize, name: &str| -> Result<f64> {
            let cell = &row[col];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                _ => Err(parse_err(line, format!("{name} must be a nonnegative number, got `{cell}`"))),
            }
        };
        let loan_amount = amount(2, "loan_amount")?;
        let total_interest = amount(3, "total_interest")?;
        let mut features = Vec::with_capacity(n_features);
        for (k, cell) in row.iter().skip(HEADER_PREFIX.len()).enumerate() {
            if cell.is_empty() {
                features.push(f64::NAN);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(parse_err(
                        line,
                        format!("feature `{}` is not a number: `{cell}`", &header[k + HEADER_PREFIX.len()]),
                    ))
                }
            }
        }
        records.push(LoanRecord {
            id: row[0].to_string(),
            label,
            loan_amount,
            total_interest,
            features,
        });
    }
    Ok(records)
}

pub fn write_stream<W: Write>(mut out: W, records: &[LoanRecord]) -> std::io::Result<()> {
    let n_features = records.first().map_or(0, |r| r.features.len());
    let mut header: Vec<String> = HEADER_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((1..=n_features).map(|k| format!("f{k}")));
    writeln!(out, "{}", header.join(","))?;
    for r in records {
        write!(
            out,
            "{},{},{},{}",
            r.id,
            u8::from(r.label == Class::Positive),
            r.loan_amount,
            r.total_interest
        )?;
        for x in &r.features {
            if x.is_nan() {
                write!(out, ",")?;
            } else {
                write!(out, ",{x}")?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_stream(path: impl AsRef<Path>, records: &[LoanRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| NeatError::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_stream(&mut out, records)
        .and_then(|_| out.flush())
        .map_err(|e| NeatError::io(path, e))
}

#[derive(Clone, Copy, Debug, Default)]
struct RunningStats {
    min: f64,
    max: f64,
    sum: f64,
    count: u64,
}

impl RunningStats {
    fn scale(&self, x: f64) -> f64 {
        if self.count == 0 || self.max <= self.min {
            return 0.5;
        }
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.sum += x;
        self.count += 1;
    }
}

/// Min-max scaling with statistics from earlier records only. A feature seen
/// for the first time, or with a degenerate range so far, maps to 0.5; a
/// missing cell takes the running mean.
#[derive(Clone, Debug)]
pub struct Normalizer {
    stats: Vec<RunningStats>,
}

impl Normalizer {
    pub fn new(n_features: usize) -> Self {
        Normalizer {
            stats: vec![RunningStats::default(); n_features],
        }
    }

    pub fn count(&self, feature: usize) -> u64 {
        self.stats[feature].count
    }

    pub fn normalize(&mut self, record: &LoanRecord) -> Result<LoanRecord> {
        if record.features.len() != self.stats.len() {
            return Err(NeatError::InvalidInput(format!(
                "record {} has {} features, stream has {}",
                record.id,
                record.features.len(),
                self.stats.len()
            )));
        }
        let features = record
            .features
            .iter()
            .zip(&mut self.stats)
            .map(|(&x, s)| {
                if x.is_nan() {
                    if s.count == 0 {
                        0.5
                    } else {
                        s.scale(s.sum / s.count as f64)
                    }
                } else {
                    let scaled = s.scale(x);
                    s.push(x);
                    scaled
                }
            })
            .collect();
        Ok(LoanRecord {
            features,
            ..record.clone()
        })
    }
}

/// Normalises a whole stream in order.
pub fn normalize_stream(records: &[LoanRecord]) -> Result<Vec<LoanRecord>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let mut normalizer = Normalizer::new(first.features.len());
    records.iter().map(|r| normalizer.normalize(r)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftKind {
    /// Rotates the ground-truth weight vector by 90 degrees.
    BoundaryRotation,
    /// Inverts every label.
    LabelFlip,
}

impl DriftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DriftKind::BoundaryRotation => "boundary_rotation",
            DriftKind::LabelFlip => "label_flip",
        }
    }
}

impl std::str::FromStr for DriftKind {
    type Err = NeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boundary_rotation" | "rotation" => Ok(DriftKind::BoundaryRotation),
            "label_flip" | "flip" => Ok(DriftKind::LabelFlip),
            other => Err(NeatError::Config(format!(
                "unknown drift kind `{other}` (expected boundary_rotation or label_flip)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_records: usize,
    pub n_features: usize,
    pub positive_fraction: f64,
    /// Index of the first record generated under the drifted concept.
    pub drift_at: Option<usize>,
    pub drift_kind: DriftKind,
    /// Steepness of the logistic label model in units of the projected
    /// feature; `None` gives a hard, linearly separable boundary.
    pub sharpness: Option<f64>,
    pub loan_range: (f64, f64),
    pub rate_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 10_000,
            n_features: 5,
            positive_fraction: 0.75,
            drift_at: None,
            drift_kind: DriftKind::LabelFlip,
            sharpness: None,
            loan_range: (1_000.0, 40_000.0),
            rate_range: (0.05, 0.30),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NeatError::Config(msg));
        if self.n_records == 0 {
            return bad("n_records must be positive".into());
        }
        if self.n_features == 0 {
            return bad("n_features must be positive".into());
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad(format!(
                "positive_fraction must lie in (0, 1), got {}",
                self.positive_fraction
            ));
        }
        if self.drift_kind == DriftKind::BoundaryRotation && self.drift_at.is_some() && self.n_features < 2 {
            return bad("boundary rotation needs at least two features".into());
        }
        if let Some(s) = self.sharpness {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sharpness must be positive and finite, got {s}"));
            }
        }
        let (lo, hi) = self.loan_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("loan range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"));
        }
        let (lo, hi) = self.rate_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return bad(format!("rate range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"));
        }
        Ok(())
    }
}

/// Labelling rule of one segment: positive iff `w . x > threshold` in hard
/// mode, with probability `sigmoid(sharpness * (w . x - threshold))` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Concept {
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub flipped: bool,
}

impl Concept {
    pub fn margin(&self, features: &[f64]) -> f64 {
        dot(&self.weights, features) - self.threshold
    }

    /// Noise-free label (the hard-boundary rule).
    pub fn label(&self, features: &[f64]) -> Class {
        let positive = (self.margin(features) > 0.0) != self.flipped;
        if positive {
            Class::Positive
        } else {
            Class::Negative
        }
    }
}

/// The concepts a synthetic stream was generated from.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub before: Concept,
    pub after: Option<Concept>,
    pub drift_at: Option<usize>,
}

impl GroundTruth {
    pub fn concept_at(&self, index: usize) -> &Concept {
        match (self.drift_at, &self.after) {
            (Some(d), Some(after)) if index >= d => after,
            _ => &self.before,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A unit vector orthogonal to `w`.
fn orthogonal_to(rng: &mut ChaCha8Rng, w: &[f64]) -> Vec<f64> {
    loop {
        let v = unit_vector(rng, w.len());
        let proj = dot(&v, w);
        let r: Vec<f64> = v.iter().zip(w).map(|(a, b)| a - proj * b).collect();
        let norm = dot(&r, &r).sqrt();
        if norm > 1e-6 {
            return r.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Threshold giving the requested positive share over `margins`.
fn fit_threshold(projections: &[f64], positive_fraction: f64, sharpness: Option<f64>) -> f64 {
    let mut sorted = projections.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let n_neg = ((1.0 - positive_fraction) * n as f64).round() as usize;
    let hard = match n_neg {
        0 => sorted[0] - 1.0,
        k if k >= n => sorted[n - 1] + 1.0,
        // Midpoint keeps every point strictly off the boundary.
        k => 0.5 * (sorted[k - 1] + sorted[k]),
    };
    let Some(s) = sharpness else {
        return hard;
    };
    // Mean positive probability falls monotonically in the threshold.
    let share = |t: f64| projections.iter().map(|z| logistic(s * (z - t))).sum::<f64>() / n as f64;
    let (mut lo, mut hi) = (sorted[0] - 50.0 / s, sorted[n - 1] + 50.0 / s);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if share(mid) > positive_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn synthesize(cfg: &SynthConfig) -> Result<Vec<LoanRecord>> {
    synthesize_with_truth(cfg).map(|(records, _)| records)
}

/// Generates a stream and returns the concepts that labelled it. Features are
/// uniform in `[0, 1]`; the interest is `L * rate` with the rate uniform in
/// `rate_range`.
pub fn synthesize_with_truth(cfg: &SynthConfig) -> Result<(Vec<LoanRecord>, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w_before = unit_vector(&mut rng, cfg.n_features);
    let w_after = match (cfg.drift_at, cfg.drift_kind) {
        (Some(_), DriftKind::BoundaryRotation) => orthogonal_to(&mut rng, &w_before),
        _ => w_before.clone(),
    };

    let mut features = Vec::with_capacity(cfg.n_records);
    let mut money = Vec::with_capacity(cfg.n_records);
    for _ in 0..cfg.n_records {
        let x: Vec<f64> = (0..cfg.n_features).map(|_| rng.random::<f64>()).collect();
        let (lo, hi) = cfg.loan_range;
        let loan = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let (lo, hi) = cfg.rate_range;
        let rate = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        features.push(x);
        money.push((loan, loan * rate));
    }

    let split = cfg.drift_at.unwrap_or(cfg.n_records).min(cfg.n_records);
    let concept = |weights: &[f64], range: std::ops::Range<usize>, flipped: bool| {
        let projections: Vec<f64> = features[range].iter().map(|x| dot(weights, x)).collect();
        let threshold = if projections.is_empty() {
            0.0
        } else {
            fit_threshold(&projections, cfg.positive_fraction, cfg.sharpness)
        };
        Concept {
            weights: weights.to_vec(),
            threshold,
            flipped,
        }
    };
    let before = concept(&w_before, 0..split, false);
    let after = cfg.drift_at.map(|_| match cfg.drift_kind {
        DriftKind::LabelFlip => Concept {
            flipped: true,
            ..before.clone()
        },
        DriftKind::BoundaryRotation => concept(&w_after, split..cfg.n_records, false),
    });
    let truth = GroundTruth {
        before,
        after,
        drift_at: cfg.drift_at,
    };

    let width = cfg.n_records.saturating_sub(1).to_string().len();
    let records = features
        .into_iter()
        .zip(money)
        .enumerate()
        .map(|(i, (x, (loan_amount, total_interest)))| {
            let concept = truth.concept_at(i);
            let label = match cfg.sharpness {
                None => concept.label(&x),
                Some(s) => {
                    let positive = rng.random_bool(logistic(s * concept.margin(&x)));
                    if positive != concept.flipped {
                        Class::Positive
                    } else {
                        Class::Negative
                    }
                }
            };
            LoanRecord {
                id: format!("r{i:0width$}"),
                label,
                loan_amount,
                total_interest,
                features: x,
            }
        })
        .collect();
    Ok((records, truth))
}
