use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use online_neat::data::{load_stream, normalize_stream, save_stream, synthesize, LoanRecord, SynthConfig};
use online_neat::fitness::{evaluate, Metrics};
use online_neat::genome::Genome;
use online_neat::stream::{run_online, write_plot_data, write_report, OnlineRun, PLOT_METRICS};

use crate::config::{format_synth_spec, RunConfig, Source};

pub const REPORT_FILE: &str = "report.tsv";
pub const CHAMPION_FILE: &str = "champion.genome";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn plot_file(metric: &str) -> String {
    format!("{metric}.dat")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_file(path: &Path, fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut out = create(path)?;
    fill(&mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Records of the configured source, normalised if asked to.
pub fn load_records(config: &RunConfig) -> Result<Vec<LoanRecord>> {
    let records = match &config.source {
        Some(Source::Data(path)) => load_stream(path)?,
        Some(Source::Synth(_)) => synthesize(&config.synth_config()?.expect("synthetic source"))?,
        None => bail!("no data source: give `data` or `synth`"),
    };
    if config.normalize {
        Ok(normalize_stream(&records)?)
    } else {
        Ok(records)
    }
}

/// Runs the stream and writes the report, one plot file per metric, the
/// final champion and the manifest into the output directory.
pub fn cmd_run(config: &RunConfig) -> Result<OnlineRun> {
    config.validate()?;
    let out_dir = config.out.as_ref().expect("validated");
    let manifest = config.to_manifest()?;
    let records = load_records(config)?;
    let run = run_online(&records, &config.stream)?;

    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_file(&out_dir.join(REPORT_FILE), |w| write_report(w, &run.reports))?;
    for metric in PLOT_METRICS {
        write_file(&out_dir.join(plot_file(metric)), |w| write_plot_data(w, &run.reports, metric))?;
    }
    write_file(&out_dir.join(CHAMPION_FILE), |w| write!(w, "{}", run.champion))?;
    write_file(&out_dir.join(MANIFEST_FILE), |w| w.write_all(manifest.as_bytes()))?;
    Ok(run)
}

pub fn synth_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes a synthetic stream to `out` and its generating spec next to it
/// (`<out>.manifest`). Nothing is written if the config is invalid.
pub fn cmd_synth(config: &SynthConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let records = synthesize(config)?;
    save_stream(out, &records)?;
    let drift = config
        .drift_at
        .map_or_else(|| "none".to_string(), |d| d.to_string());
    let manifest = format!(
        "# online-neat synthetic stream\nsynth = {}\nrecords = {}\ndrift_at = {}\ndrift_kind = {}\n",
        format_synth_spec(config),
        records.len(),
        drift,
        config.drift_kind.as_str(),
    );
    write_file(&synth_manifest_path(out), |w| w.write_all(manifest.as_bytes()))
}

pub fn load_genome(path: &Path) -> Result<Genome> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.parse::<Genome>()
        .with_context(|| format!("cannot parse genome {}", path.display()))
}

/// Metrics of a saved genome over a whole stream file.
pub fn cmd_eval(genome: &Path, data: &Path, threshold: f64, normalize: bool) -> Result<Metrics> {
    let genome = load_genome(genome)?;
    let mut records = load_stream(data)?;
    let Some(first) = records.first() else {
        bail!("{} has no records", data.display());
    };
    let n_features = first.features.len();
    if genome.n_inputs() != n_features {
        bail!(
            "genome expects {} inputs but {} has {} features",
            genome.n_inputs(),
            data.display(),
            n_features
        );
    }
    if normalize {
        records = normalize_stream(&records)?;
    }
    Ok(evaluate(&genome, &records, threshold)?)
}

pub fn format_metrics(m: &Metrics) -> String {
    format!(
        "accuracy\t{}\nrecall\t{}\nspecificity\t{}\nprofit\t{}\n",
        m.accuracy, m.recall, m.specificity, m.profit
    )
}
