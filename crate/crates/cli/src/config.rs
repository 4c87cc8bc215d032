//! Run configuration: a flat `key = value` format shared by config files,
//! command-line overrides and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use online_neat::data::{DriftKind, SynthConfig};
use online_neat::fitness::{FitnessKind, FitnessSpec};
use online_neat::stream::StreamConfig;

pub const DEFAULT_WINDOW_SIZE: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Data(PathBuf),
    /// Comma-separated synthetic stream spec, resolved lazily so the run
    /// seed can fill in a missing `seed`.
    Synth(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub source: Option<Source>,
    pub stream: StreamConfig,
    /// Apply causal min-max scaling before the run.
    pub normalize: bool,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            source: None,
            stream: StreamConfig::new(DEFAULT_WINDOW_SIZE, FitnessSpec::new(FitnessKind::Acc)),
            normalize: true,
            out: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("invalid value `{value}` for `{key}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid value `{value}` for `{key}`: expected true or false"),
    }
}

/// Splits `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", origin.display(), n + 1))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut config = RunConfig::default();
        let mut sources = 0;
        for (key, value) in parse_pairs(&text, path)? {
            if key == "data" || key == "synth" {
                sources += 1;
            }
            config
                .set(&key, &value)
                .with_context(|| format!("{}", path.display()))?;
        }
        if sources > 1 {
            bail!("{}: give either `data` or `synth`, not both", path.display());
        }
        Ok(config)
    }

    /// Sets one key. Later calls override earlier ones.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.stream;
        let e = &mut s.evolution;
        match key {
            "data" => self.source = Some(Source::Data(PathBuf::from(value))),
            "synth" => self.source = Some(Source::Synth(value.to_string())),
            "out" => self.out = Some(PathBuf::from(value)),
            "normalize" => self.normalize = parse_bool(key, value)?,
            "window_size" => s.window_size = parse(key, value)?,
            "fitness" => s.fitness.kind = parse(key, value)?,
            "alpha" => s.fitness.alpha = parse(key, value)?,
            "beta" => s.fitness.beta = parse(key, value)?,
            "threshold" => s.fitness.threshold = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "mode" => s.mode = parse(key, value)?,
            "population_size" => e.population_size = parse(key, value)?,
            "distance_threshold" => e.distance_threshold = parse(key, value)?,
            "survival_fraction" => e.survival_fraction = parse(key, value)?,
            "elitism" => e.elitism = parse(key, value)?,
            "elitism_min_species_size" => e.elitism_min_species_size = parse(key, value)?,
            "stagnation_limit" => e.stagnation_limit = parse(key, value)?,
            "interspecies_mating_prob" => e.interspecies_mating_prob = parse(key, value)?,
            "crossover_prob" => e.crossover_prob = parse(key, value)?,
            "max_generations_per_window" => e.max_generations_per_window = parse(key, value)?,
            "plateau_generations" => e.plateau_generations = parse(key, value)?,
            "plateau_epsilon" => e.plateau_epsilon = parse(key, value)?,
            "execution" => e.execution = parse(key, value)?,
            "p_weight_mutate" => e.mutation.p_weight_mutate = parse(key, value)?,
            "p_perturb" => e.mutation.p_perturb = parse(key, value)?,
            "perturb_std" => e.mutation.perturb_std = parse(key, value)?,
            "p_add_connection" => e.mutation.p_add_connection = parse(key, value)?,
            "p_add_node" => e.mutation.p_add_node = parse(key, value)?,
            "p_keep_disabled" => e.mutation.p_keep_disabled = parse(key, value)?,
            "init_weight_bound" => e.mutation.init_weight_bound = parse(key, value)?,
            "weight_bound" => e.mutation.weight_bound = parse(key, value)?,
            "c_excess" => e.distance.c_excess = parse(key, value)?,
            "c_disjoint" => e.distance.c_disjoint = parse(key, value)?,
            "c_weight" => e.distance.c_weight = parse(key, value)?,
            "small_genome_threshold" => e.distance.small_genome_threshold = parse(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// The synthetic stream config, if the source is synthetic. A spec
    /// without `seed` uses the run seed.
    pub fn synth_config(&self) -> Result<Option<SynthConfig>> {
        match &self.source {
            Some(Source::Synth(spec)) => parse_synth_spec(spec, self.stream.seed).map(Some),
            _ => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.is_none() {
            bail!("no data source: give `data` or `synth`");
        }
        if self.out.is_none() {
            bail!("no output directory: give `out`");
        }
        if let Some(synth) = self.synth_config()? {
            synth.validate()?;
        }
        self.stream.validate()?;
        Ok(())
    }

    /// Every key with its resolved value, in the config file format. Feeding
    /// the result back through [`RunConfig::from_file`] gives an equal config.
    pub fn to_manifest(&self) -> Result<String> {
        let s = &self.stream;
        let e = &s.evolution;
        let m = &e.mutation;
        let d = &e.distance;
        let mut out = String::from("# online-neat run manifest\n");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.source {
            Some(Source::Data(path)) => put("data", path.display().to_string()),
            Some(Source::Synth(_)) => {
                let synth = self.synth_config()?.expect("synthetic source");
                put("synth", format_synth_spec(&synth));
            }
            None => {}
        }
        if let Some(path) = &self.out {
            put("out", path.display().to_string());
        }
        put("normalize", self.normalize.to_string());
        put("window_size", s.window_size.to_string());
        put("fitness", s.fitness.kind.to_string());
        put("alpha", s.fitness.alpha.to_string());
        put("beta", s.fitness.beta.to_string());
        put("threshold", s.fitness.threshold.to_string());
        put("seed", s.seed.to_string());
        put("mode", s.mode.as_str().to_string());
        put("population_size", e.population_size.to_string());
        put("distance_threshold", e.distance_threshold.to_string());
        put("survival_fraction", e.survival_fraction.to_string());
        put("elitism", e.elitism.to_string());
        put("elitism_min_species_size", e.elitism_min_species_size.to_string());
        put("stagnation_limit", e.stagnation_limit.to_string());
        put("interspecies_mating_prob", e.interspecies_mating_prob.to_string());
        put("crossover_prob", e.crossover_prob.to_string());
        put("max_generations_per_window", e.max_generations_per_window.to_string());
        put("plateau_generations", e.plateau_generations.to_string());
        put("plateau_epsilon", e.plateau_epsilon.to_string());
        put("execution", e.execution.as_str().to_string());
        put("p_weight_mutate", m.p_weight_mutate.to_string());
        put("p_perturb", m.p_perturb.to_string());
        put("perturb_std", m.perturb_std.to_string());
        put("p_add_connection", m.p_add_connection.to_string());
        put("p_add_node", m.p_add_node.to_string());
        put("p_keep_disabled", m.p_keep_disabled.to_string());
        put("init_weight_bound", m.init_weight_bound.to_string());
        put("weight_bound", m.weight_bound.to_string());
        put("c_excess", d.c_excess.to_string());
        put("c_disjoint", d.c_disjoint.to_string());
        put("c_weight", d.c_weight.to_string());
        put("small_genome_threshold", d.small_genome_threshold.to_string());
        Ok(out)
    }
}

/// Parses `n=5000,features=5,drift_at=2500,...`. Unknown keys are errors.
pub fn parse_synth_spec(spec: &str, default_seed: u64) -> Result<SynthConfig> {
    let mut cfg = SynthConfig {
        seed: default_seed,
        ..SynthConfig::default()
    };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("synth spec item `{item}` is not `key=value`"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => cfg.n_records = parse(key, value)?,
            "features" => cfg.n_features = parse(key, value)?,
            "positive_fraction" => cfg.positive_fraction = parse(key, value)?,
            "drift_at" => {
                cfg.drift_at = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "drift_kind" => cfg.drift_kind = parse::<DriftKind>(key, value)?,
            "sharpness" => {
                cfg.sharpness = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "loan_min" => cfg.loan_range.0 = parse(key, value)?,
            "loan_max" => cfg.loan_range.1 = parse(key, value)?,
            "rate_min" => cfg.rate_range.0 = parse(key, value)?,
            "rate_max" => cfg.rate_range.1 = parse(key, value)?,
            "seed" => cfg.seed = parse(key, value)?,
            _ => bail!("unknown synth key `{key}`"),
        }
    }
    Ok(cfg)
}

pub fn format_synth_spec(cfg: &SynthConfig) -> String {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
    format!(
        "n={},features={},positive_fraction={},drift_at={},drift_kind={},sharpness={},loan_min={},loan_max={},rate_min={},rate_max={},seed={}",
        cfg.n_records,
        cfg.n_features,
        cfg.positive_fraction,
        opt(cfg.drift_at.map(|d| d.to_string())),
        cfg.drift_kind.as_str(),
        opt(cfg.sharpness.map(|s| s.to_string())),
        cfg.loan_range.0,
        cfg.loan_range.1,
        cfg.rate_range.0,
        cfg.rate_range.1,
        cfg.seed,
    )
}
