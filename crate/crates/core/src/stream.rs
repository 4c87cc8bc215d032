//! The online loop: split the stream into time windows, score the previous
//! champion on each new window before training on it, then evolve.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LoanRecord;
use crate::error::{NeatError, Result};
use crate::evolution::{EvolutionConfig, Population};
use crate::fitness::{evaluate, FitnessKind, FitnessSpec, Metrics};
use crate::genome::{compatibility_distance, DistanceConfig, Genome};

/// A contiguous slice of the ordered stream.
#[derive(Clone, Copy, Debug)]
pub struct TimeWindow<'a> {
    pub index: usize,
    pub records: &'a [LoanRecord],
}

/// `len / window_size` full windows, plus one shorter window for any
/// remainder.
pub fn partition(records: &[LoanRecord], window_size: usize) -> Result<Vec<TimeWindow<'_>>> {
    if records.is_empty() {
        return Err(NeatError::NoData("cannot partition an empty stream".into()));
    }
    if window_size == 0 {
        return Err(NeatError::Config("window_size must be positive".into()));
    }
    Ok(records
        .chunks(window_size)
        .enumerate()
        .map(|(index, records)| TimeWindow { index, records })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Evolve on every window.
    #[default]
    Online,
    /// Train on the first window only, then keep scoring that champion.
    FrozenInitial,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Online => "online",
            Mode::FrozenInitial => "frozen-initial",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = NeatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "online" => Ok(Mode::Online),
            "frozen-initial" | "frozen_initial" => Ok(Mode::FrozenInitial),
            other => Err(NeatError::Config(format!(
                "unknown mode `{other}` (expected online or frozen-initial)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamConfig {
    pub window_size: usize,
    pub fitness: FitnessSpec,
    pub evolution: EvolutionConfig,
    pub seed: u64,
    pub mode: Mode,
}

impl StreamConfig {
    pub fn new(window_size: usize, fitness: FitnessSpec) -> Self {
        StreamConfig {
            window_size,
            fitness,
            evolution: EvolutionConfig::default(),
            seed: 0,
            mode: Mode::Online,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 {
            return Err(NeatError::Config(format!(
                "window_size must be at least 2, got {}",
                self.window_size
            )));
        }
        self.fitness.validate()?;
        self.evolution.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub window_index: usize,
    pub n_records: usize,
    /// Metrics of the previous window's champion on this window, computed
    /// before any training on it. `None` for the first window.
    pub test: Option<Metrics>,
    /// Best raw fitness after training; `None` when no training happened.
    pub best_fitness: Option<f64>,
    pub generations_run: usize,
    pub species_count: usize,
    pub champion_nodes: usize,
    pub champion_connections: usize,
    /// Compatibility distance to the previous window's champion.
    pub champion_drift: Option<f64>,
}

/// Distance between consecutive champions.
pub fn champion_drift(prev: &Genome, curr: &Genome, config: &DistanceConfig) -> f64 {
    compatibility_distance(prev, curr, config)
}

/// Stateful test-then-train learner; one call to [`OnlineLearner::process`]
/// per window, in stream order.
#[derive(Clone, Debug)]
pub struct OnlineLearner {
    config: StreamConfig,
    population: Population,
    champion: Option<Genome>,
    rng: ChaCha8Rng,
    n_features: usize,
    windows_seen: usize,
}

impl OnlineLearner {
    pub fn new(n_features: usize, config: StreamConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let population = Population::new(n_features, &config.evolution, &mut rng)?;
        Ok(OnlineLearner {
            config,
            population,
            champion: None,
            rng,
            n_features,
            windows_seen: 0,
        })
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn champion(&self) -> Option<&Genome> {
        self.champion.as_ref()
    }

    pub fn config(&self) -> &StreamConfig {
        &self.config
    }

    pub fn process(&mut self, window: &TimeWindow<'_>) -> Result<WindowReport> {
        if window.records.is_empty() {
            return Err(NeatError::NoData(format!("window {} is empty", window.index)));
        }
        if let Some(r) = window.records.iter().find(|r| r.features.len() != self.n_features) {
            return Err(NeatError::InvalidInput(format!(
                "record {} has {} features, stream has {}",
                r.id,
                r.features.len(),
                self.n_features
            )));
        }

        let test = match &self.champion {
            Some(champion) => Some(evaluate(champion, window.records, self.config.fitness.threshold)?),
            None => None,
        };

        let frozen = self.config.mode == Mode::FrozenInitial && self.champion.is_some();
        let (best_fitness, generations_run, champion_drift) = if frozen {
            (None, 0, Some(0.0))
        } else {
            let spec = &self.config.fitness;
            let outcome = self
                .population
                .evolve_on_window(window.records, spec, &self.config.evolution, &mut self.rng)?;
            if spec.kind == FitnessKind::Pap {
                let fitness = self.population.fitness().to_vec();
                for (g, f) in self.population.genomes_mut().iter_mut().zip(fitness) {
                    g.historical_fitness = f;
                }
            }
            let mut best = outcome.best;
            if spec.kind == FitnessKind::Pap {
                best.historical_fitness = outcome.best_fitness;
            }
            let drift = self
                .champion
                .as_ref()
                .map(|prev| champion_drift(prev, &best, &self.config.evolution.distance));
            self.champion = Some(best);
            (Some(outcome.best_fitness), outcome.generations_run, drift)
        };

        let champion = self.champion.as_ref().expect("set above");
        self.windows_seen += 1;
        Ok(WindowReport {
            window_index: window.index,
            n_records: window.records.len(),
            test,
            best_fitness,
            generations_run,
            species_count: self.population.species().len(),
            champion_nodes: champion.nodes().len(),
            champion_connections: champion.enabled_count(),
            champion_drift,
        })
    }

    pub fn into_parts(self) -> (Population, Option<Genome>) {
        (self.population, self.champion)
    }
}

#[derive(Clone, Debug)]
pub struct OnlineRun {
    pub reports: Vec<WindowReport>,
    /// Champion after the last window.
    pub champion: Genome,
    pub population: Population,
}

/// Runs the whole stream. The population is created once and carried across
/// windows.
pub fn run_online(records: &[LoanRecord], config: &StreamConfig) -> Result<OnlineRun> {
    config.validate()?;
    let windows = partition(records, config.window_size)?;
    let n_features = records[0].features.len();
    let mut learner = OnlineLearner::new(n_features, config.clone())?;
    let reports = windows
        .iter()
        .map(|w| learner.process(w))
        .collect::<Result<Vec<_>>>()?;
    let (population, champion) = learner.into_parts();
    Ok(OnlineRun {
        reports,
        champion: champion.expect("at least one window was processed"),
        population,
    })
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "window_index",
    "n_records",
    "test_accuracy",
    "test_recall",
    "test_specificity",
    "test_profit",
    "best_fitness",
    "generations_run",
    "species_count",
    "champion_nodes",
    "champion_connections",
    "champion_drift",
];

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

impl WindowReport {
    /// Value of a named report column; `None` for a null cell.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "window_index" => Some(self.window_index as f64),
            "n_records" => Some(self.n_records as f64),
            "test_accuracy" => self.test.map(|m| m.accuracy),
            "test_recall" => self.test.map(|m| m.recall),
            "test_specificity" => self.test.map(|m| m.specificity),
            "test_profit" => self.test.map(|m| m.profit),
            "best_fitness" => self.best_fitness,
            "generations_run" => Some(self.generations_run as f64),
            "species_count" => Some(self.species_count as f64),
            "champion_nodes" => Some(self.champion_nodes as f64),
            "champion_connections" => Some(self.champion_connections as f64),
            "champion_drift" => self.champion_drift,
            _ => None,
        }
    }

    pub fn to_tsv_line(&self) -> String {
        let mut line = String::new();
        let _ = write!(line, "{}\t{}", self.window_index, self.n_records);
        for v in [
            self.test.map(|m| m.accuracy),
            self.test.map(|m| m.recall),
            self.test.map(|m| m.specificity),
            self.test.map(|m| m.profit),
            self.best_fitness,
        ] {
            let _ = write!(line, "\t{}", cell(v));
        }
        let _ = write!(
            line,
            "\t{}\t{}\t{}\t{}\t{}",
            self.generations_run,
            self.species_count,
            self.champion_nodes,
            self.champion_connections,
            cell(self.champion_drift)
        );
        line
    }
}

/// Tab-separated report, one line per window, header prefixed with `#`.
/// Null cells are written as `NA`.
pub fn write_report<W: Write>(mut out: W, reports: &[WindowReport]) -> io::Result<()> {
    writeln!(out, "#{}", REPORT_COLUMNS.join("\t"))?;
    for r in reports {
        writeln!(out, "{}", r.to_tsv_line())?;
    }
    Ok(())
}

/// Columns that get their own `(window_index, value)` plot file.
pub const PLOT_METRICS: [&str; 6] = [
    "test_accuracy",
    "test_recall",
    "test_specificity",
    "test_profit",
    "best_fitness",
    "champion_drift",
];

/// Two whitespace-separated columns; windows with a null value are skipped.
pub fn write_plot_data<W: Write>(mut out: W, reports: &[WindowReport], metric: &str) -> io::Result<()> {
    writeln!(out, "# window_index {metric}")?;
    for r in reports {
        if let Some(v) = r.column(metric) {
            writeln!(out, "{} {}", r.window_index, v)?;
        }
    }
    Ok(())
}
