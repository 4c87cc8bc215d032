//! Confusion counts, the classification ratios built on them, the loan
//! profit matrix, and the four fitness functions (ACC, PAN, PRO, PAP).

use std::fmt;
use std::str::FromStr;

use crate::data::LoanRecord;
use crate::error::{NeatError, Result};
use crate::genome::Genome;
use crate::phenotype::{classify, Class, Network};

/// Default decision threshold on the network score.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Scale applied to profit in the PAP fitness.
pub const DEFAULT_ALPHA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn record(&mut self, label: Class, prediction: Class) {
        match (label, prediction) {
            (Class::Positive, Class::Positive) => self.tp += 1,
            (Class::Positive, Class::Negative) => self.fn_ += 1,
            (Class::Negative, Class::Positive) => self.fp += 1,
            (Class::Negative, Class::Negative) => self.tn += 1,
        }
    }
}

/// Accuracy, recall (sensitivity) and specificity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub recall: f64,
    pub specificity: f64,
    pub profit: f64,
}

/// A class with no members in the window can't be missed, so its rate is 1.
pub fn classification_metrics(c: &ConfusionCounts) -> Result<Rates> {
    let total = c.total();
    if total == 0 {
        return Err(NeatError::EmptyWindow);
    }
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(Rates {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        recall: ratio(c.tp, c.tp + c.fn_),
        specificity: ratio(c.tn, c.tn + c.fp),
    })
}

/// Profit matrix entry: a good loan earns its interest if granted and loses it
/// if refused; a bad loan loses the principal if granted and saves it if
/// refused.
pub fn record_profit(label: Class, prediction: Class, loan_amount: f64, total_interest: f64) -> Result<f64> {
    if !(loan_amount >= 0.0) || !(total_interest >= 0.0) {
        return Err(NeatError::InvalidRecord(format!(
            "loan amount and interest must be >= 0, got L={loan_amount}, I={total_interest}"
        )));
    }
    Ok(profit_unchecked(label, prediction, loan_amount, total_interest))
}

#[inline]
fn profit_unchecked(label: Class, prediction: Class, loan_amount: f64, total_interest: f64) -> f64 {
    match (label, prediction) {
        (Class::Positive, Class::Positive) => total_interest,
        (Class::Positive, Class::Negative) => -total_interest,
        (Class::Negative, Class::Positive) => -loan_amount,
        (Class::Negative, Class::Negative) => loan_amount,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FitnessKind {
    /// Accuracy.
    Acc,
    /// Recall plus specificity.
    Pan,
    /// Summed loan profit.
    Pro,
    /// `alpha * profit + beta * previous fitness`.
    Pap,
}

impl FitnessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FitnessKind::Acc => "acc",
            FitnessKind::Pan => "pan",
            FitnessKind::Pro => "pro",
            FitnessKind::Pap => "pap",
        }
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitnessKind {
    type Err = NeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acc" => Ok(FitnessKind::Acc),
            "pan" => Ok(FitnessKind::Pan),
            "pro" => Ok(FitnessKind::Pro),
            "pap" => Ok(FitnessKind::Pap),
            other => Err(NeatError::Config(format!(
                "unknown fitness `{other}` (expected acc, pan, pro or pap)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessSpec {
    pub kind: FitnessKind,
    pub alpha: f64,
    pub beta: f64,
    pub threshold: f64,
}

impl FitnessSpec {
    pub fn new(kind: FitnessKind) -> Self {
        FitnessSpec {
            kind,
            alpha: DEFAULT_ALPHA,
            beta: 0.0,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn pap(alpha: f64, beta: f64) -> Self {
        FitnessSpec {
            alpha,
            beta,
            ..FitnessSpec::new(FitnessKind::Pap)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == FitnessKind::Pap && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(NeatError::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.beta.is_finite() {
            return Err(NeatError::Config("beta must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(NeatError::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Combines one window's tally with the genome's carried fitness.
    pub fn score(&self, tally: &Tally, historical_fitness: f64) -> Result<f64> {
        let rates = classification_metrics(&tally.counts)?;
        Ok(match self.kind {
            FitnessKind::Acc => rates.accuracy,
            FitnessKind::Pan => rates.recall + rates.specificity,
            FitnessKind::Pro => tally.profit,
            FitnessKind::Pap => self.alpha * tally.profit + self.beta * historical_fitness,
        })
    }
}

/// Confusion counts and summed profit of one network over a window.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub counts: ConfusionCounts,
    pub profit: f64,
}

impl Tally {
    pub fn metrics(&self) -> Result<Metrics> {
        let r = classification_metrics(&self.counts)?;
        Ok(Metrics {
            accuracy: r.accuracy,
            recall: r.recall,
            specificity: r.specificity,
            profit: self.profit,
        })
    }
}

pub fn tally(network: &Network, records: &[LoanRecord], threshold: f64) -> Result<Tally> {
    let mut out = Tally::default();
    let mut scratch = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.features.len() != network.n_inputs() {
            return Err(NeatError::InvalidInput(format!(
                "record {i} ({}) has {} features, network expects {}",
                r.id,
                r.features.len(),
                network.n_inputs()
            )));
        }
        if r.features.iter().any(|x| !x.is_finite()) {
            return Err(NeatError::InvalidInput(format!(
                "record {i} ({}) has a missing or non-finite feature",
                r.id
            )));
        }
        let prediction = classify(network.activate_unchecked(&r.features, &mut scratch), threshold);
        out.counts.record(r.label, prediction);
        out.profit += profit_unchecked(r.label, prediction, r.loan_amount, r.total_interest);
    }
    Ok(out)
}

pub fn confusion(genome: &Genome, records: &[LoanRecord], threshold: f64) -> Result<ConfusionCounts> {
    Ok(tally(&Network::compile(genome)?, records, threshold)?.counts)
}

pub fn evaluate(genome: &Genome, records: &[LoanRecord], threshold: f64) -> Result<Metrics> {
    if records.is_empty() {
        return Err(NeatError::NoData("cannot evaluate on an empty window".into()));
    }
    tally(&Network::compile(genome)?, records, threshold)?.metrics()
}

/// Fitness of `genome` on a window. For PAP the carried term is the genome's
/// `historical_fitness`; the caller stores the result back at window end.
pub fn fitness_value(genome: &Genome, records: &[LoanRecord], spec: &FitnessSpec) -> Result<f64> {
    if records.is_empty() {
        return Err(NeatError::NoData("fitness needs a nonempty window".into()));
    }
    let t = tally(&Network::compile(genome)?, records, spec.threshold)?;
    spec.score(&t, genome.historical_fitness)
}
