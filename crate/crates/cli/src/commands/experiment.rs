use std::path::{Path, PathBuf};

use serde_json::Value;

use featdiv::data::InputDigest;
use featdiv::experiments::{
    load_data, run_depth_sweep, run_epoch_tracking, run_gap_correlation, DataSpec, DepthSweepConfig,
    EpochTrackingConfig, Event, ExperimentKind, ExperimentManifest, GapCorrelationConfig,
};
use featdiv::Scalar;

use crate::config::{decode, load_experiment_file, merge, preset_value, set_path, Precision, Preset};
use crate::error::{CliError, CliResult};
use crate::rundir::{default_run_dir, timestamp, PartialCsv, RunDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExperimentName {
    GapCorrelation,
    EpochTracking,
    DepthSweep,
}

impl From<ExperimentName> for ExperimentKind {
    fn from(n: ExperimentName) -> Self {
        match n {
            ExperimentName::GapCorrelation => ExperimentKind::GapCorrelation,
            ExperimentName::EpochTracking => ExperimentKind::EpochTracking,
            ExperimentName::DepthSweep => ExperimentKind::DepthSweep,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentName,
    /// TOML file with optional `preset`, `precision`, `[data]` and `[experiment]` entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Starting point for the settings (default: paper).
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory (default: runs/<kind>-<timestamp>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Training-set sizes (gap-correlation only).
    #[arg(long, value_delimiter = ',')]
    pub train_sizes: Option<Vec<usize>>,
    /// Depths (depth-sweep only).
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Override any setting, e.g. `--set train.batch_size=128`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub quiet: bool,
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_set(arg: &str) -> CliResult<(String, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{arg}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::usage(format!("--set expects KEY=VALUE, got `{arg}`")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").unwrap())?,
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.to_string(), value))
}

fn build_config(kind: ExperimentKind, args: &ExperimentArgs, file_preset: Option<Preset>, table: Option<toml::Table>) -> CliResult<Value> {
    let preset = args.preset.or(file_preset).unwrap_or(Preset::Paper);
    let mut cfg = preset_value(kind, preset)?;
    if let Some(t) = table {
        merge(&mut cfg, serde_json::to_value(t)?);
    }
    let not_for = |flag: &str| CliError::usage(format!("--{flag} does not apply to {}", kind.as_str()));
    if let Some(s) = &args.seeds {
        set_path(&mut cfg, "seeds", serde_json::to_value(s)?);
    }
    if let Some(e) = args.epochs {
        set_path(&mut cfg, "train.epochs", e.into());
    }
    if let Some(lr) = args.lr {
        set_path(&mut cfg, "train.lr", lr.into());
    }
    if let Some(w) = &args.widths {
        if kind == ExperimentKind::EpochTracking {
            match w.as_slice() {
                [one] => set_path(&mut cfg, "width", (*one).into()),
                _ => return Err(CliError::usage("epoch-tracking takes a single --widths value")),
            }
        } else {
            set_path(&mut cfg, "widths", serde_json::to_value(w)?);
        }
    }
    if let Some(s) = &args.train_sizes {
        if kind != ExperimentKind::GapCorrelation {
            return Err(not_for("train-sizes"));
        }
        set_path(&mut cfg, "train_sizes", serde_json::to_value(s)?);
    }
    if let Some(d) = &args.depths {
        if kind != ExperimentKind::DepthSweep {
            return Err(not_for("depths"));
        }
        set_path(&mut cfg, "depths", serde_json::to_value(d)?);
    }
    for s in &args.sets {
        let (k, v) = parse_set(s)?;
        set_path(&mut cfg, &k, v);
    }
    // Decode once so that bad settings are reported before any data is read.
    validate(kind, &cfg)?;
    Ok(cfg)
}

fn validate(kind: ExperimentKind, cfg: &Value) -> CliResult<Vec<u64>> {
    let origin = kind.as_str();
    Ok(match kind {
        ExperimentKind::GapCorrelation => {
            let c: GapCorrelationConfig = decode(cfg.clone(), origin)?;
            c.validate()?;
            c.seeds
        }
        ExperimentKind::EpochTracking => {
            let c: EpochTrackingConfig = decode(cfg.clone(), origin)?;
            c.validate()?;
            c.seeds
        }
        ExperimentKind::DepthSweep => {
            let c: DepthSweepConfig = decode(cfg.clone(), origin)?;
            c.validate()?;
            c.seeds
        }
        ExperimentKind::Train => return Err(CliError::usage("not an experiment kind: train")),
    })
}

pub fn run(args: ExperimentArgs) -> CliResult<()> {
    let kind = ExperimentKind::from(args.kind);
    let file = load_experiment_file(args.config.as_deref())?;
    if let Some(k) = &file.kind {
        if k != kind.as_str() {
            return Err(CliError::usage(format!(
                "config is for `{k}` but the command asked for `{}`",
                kind.as_str()
            )));
        }
    }
    let cfg = build_config(kind, &args, file.preset, file.experiment)?;
    let precision = args.precision.or(file.precision).unwrap_or_default();
    let data = file.data.unwrap_or_default().resolve(args.data_dir.as_deref())?;
    let out = args.out.clone().unwrap_or_else(|| default_run_dir(kind.as_str()));
    let summary = execute(kind, cfg, data, precision, &out, args.quiet)?;
    print!("{summary}");
    println!("run directory: {}", out.display());
    Ok(())
}

pub fn notes(kind: ExperimentKind) -> Vec<String> {
    let mut n = vec![
        "MNIST pixels are scaled to [0, 1] by dividing by 255".to_string(),
        "error is the misclassification rate; gap = test error - train error on the full test set".to_string(),
        "every sub-run trains single-threaded; results depend only on this manifest and the input files".to_string(),
    ];
    match kind {
        ExperimentKind::GapCorrelation => {
            n.push("d_min_sq is the minimum per-sample diversity of the last hidden layer over each run's training subset".into());
            n.push("proxy = (C5^2 - d_min_sq) / sqrt(n); the scaled proxy is min-max mapped onto the seed-averaged gap range".into());
        }
        ExperimentKind::EpochTracking => {
            n.push("diversity is measured after every recorded epoch on a fixed training subsample".into());
            n.push("the gate statistic is the mean over seeds of Spearman(epoch, diversity)".into());
        }
        ExperimentKind::DepthSweep => {
            n.push("final diversity of the last hidden layer, measured on a fixed training subsample".into());
        }
        ExperimentKind::Train => {}
    }
    n
}

/// Runs an experiment into `out`, writing a preliminary manifest first and the
/// complete one (with output digests) last. Returns a printable summary.
pub fn execute(kind: ExperimentKind, cfg: Value, data: DataSpec, precision: Precision, out: &Path, quiet: bool) -> CliResult<String> {
    let seeds = validate(kind, &cfg)?;
    let mut dir = RunDir::create(out)?;
    let mut manifest = ExperimentManifest::new(kind, timestamp(), seeds, precision.as_str(), data.clone(), cfg.clone());
    manifest.notes = notes(kind);
    manifest.notes.push("incomplete: the run has not finished".into());
    dir.write("manifest.json", &manifest.to_json()?)?;

    let (inputs, summary) = match precision {
        Precision::F64 => dispatch::<f64>(kind, cfg, &data, &mut dir, quiet)?,
        Precision::F32 => dispatch::<f32>(kind, cfg, &data, &mut dir, quiet)?,
    };
    manifest.notes.pop();
    manifest.inputs = inputs;
    manifest.outputs = dir.outputs.clone();
    dir.write("manifest.json", &manifest.to_json()?)?;
    Ok(summary)
}

fn dispatch<T: Scalar>(
    kind: ExperimentKind,
    cfg: Value,
    data: &DataSpec,
    dir: &mut RunDir,
    quiet: bool,
) -> CliResult<(Vec<InputDigest>, String)> {
    let loaded = load_data::<T>(data)?;
    let prefix = match kind {
        ExperimentKind::GapCorrelation => "gap",
        ExperimentKind::EpochTracking => "epoch",
        ExperimentKind::DepthSweep => "depth",
        ExperimentKind::Train => unreachable!(),
    };
    let mut partial = PartialCsv::new(dir.path.join(format!("{prefix}_runs.partial.csv")));
    let mut observer = |e: Event<'_>| match e {
        Event::Message(m) => {
            if !quiet {
                eprintln!("{m}");
            }
        }
        Event::Row { header, line } => partial.push(header, &line),
    };
    let origin = kind.as_str();
    let summary = match kind {
        ExperimentKind::GapCorrelation => {
            let c: GapCorrelationConfig = decode(cfg, origin)?;
            let r = run_gap_correlation(&c, &loaded.train, &loaded.test, &mut observer)?;
            dir.write_csv("gap_runs.csv", &r.rows_csv())?;
            dir.write_csv("gap_summary.csv", &r.summary_csv())?;
            dir.write_csv("gap_correlations.csv", &r.correlations_csv())?;
            for &w in &c.widths {
                dir.write(&format!("gap_width{w}.svg"), &r.svg(w))?;
            }
            r.correlations_csv()
        }
        ExperimentKind::EpochTracking => {
            let c: EpochTrackingConfig = decode(cfg, origin)?;
            let r = run_epoch_tracking(&c, &loaded.train, &loaded.test, &mut observer)?;
            dir.write_csv("epoch_runs.csv", &r.rows_csv())?;
            dir.write_csv("epoch_summary.csv", &r.summary_csv())?;
            dir.write_csv("epoch_spearman.csv", &r.spearman_csv())?;
            dir.write("epoch_tracking.svg", &r.svg())?;
            r.spearman_csv()
        }
        ExperimentKind::DepthSweep => {
            let c: DepthSweepConfig = decode(cfg, origin)?;
            let r = run_depth_sweep(&c, &loaded.train, &loaded.test, &mut observer)?;
            dir.write_csv("depth_runs.csv", &r.rows_csv())?;
            dir.write_csv("depth_summary.csv", &r.summary_csv())?;
            dir.write("depth_sweep.svg", &r.svg())?;
            r.summary_csv()
        }
        ExperimentKind::Train => unreachable!(),
    };
    partial.finish();
    Ok((loaded.inputs, summary))
}

#[derive(Debug, clap::Args)]
pub struct RerunArgs {
    /// manifest.json of a finished run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Where to write the regenerated outputs.
    #[arg(long)]
    pub out: PathBuf,
    /// Read MNIST from here instead of the recorded directory.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

pub fn rerun(args: RerunArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::usage(format!("cannot read manifest {}: {e}", args.manifest.display())))?;
    let manifest = ExperimentManifest::from_json(&text).map_err(|e| CliError::usage(e.to_string()))?;
    let mut data = manifest.data.clone();
    if let (Some(flag), DataSpec::Mnist { dir }) = (&args.data_dir, &mut data) {
        *dir = flag.clone();
    }
    let precision = Precision::parse(&manifest.precision)?;
    let outputs = if manifest.kind == ExperimentKind::Train {
        let file: crate::config::TrainFile = serde_json::from_value(manifest.config.clone())
            .map_err(|e| CliError::usage(format!("manifest config is not a train config: {e}")))?;
        let mut dir = RunDir::create(&args.out)?;
        super::train::execute(&file, &data, &mut dir, args.quiet)?;
        dir.outputs
    } else {
        execute(manifest.kind, manifest.config.clone(), data.clone(), precision, &args.out, args.quiet)?;
        ExperimentManifest::read(&args.out.join("manifest.json"))?.outputs
    };
    check_inputs(&manifest, &data)?;
    compare_outputs(&manifest.outputs, &outputs)
}

fn check_inputs(manifest: &ExperimentManifest, data: &DataSpec) -> CliResult<()> {
    if let DataSpec::Mnist { dir } = data {
        let (_, _, now) = featdiv::data::load_mnist::<f32>(dir)?;
        for rec in &manifest.inputs {
            let name = Path::new(&rec.path).file_name();
            if let Some(cur) = now.iter().find(|d| Path::new(&d.path).file_name() == name) {
                if cur.sha256 != rec.sha256 {
                    return Err(CliError::failure(format!("input {} changed since the recorded run", rec.path)));
                }
            }
        }
    }
    Ok(())
}

/// Compares regenerated CSV digests against the recorded ones and prints one line per file.
pub fn compare_outputs(recorded: &[InputDigest], regenerated: &[InputDigest]) -> CliResult<()> {
    let mut mismatches = 0;
    for rec in recorded {
        let status = match regenerated.iter().find(|d| d.path == rec.path) {
            Some(d) if d.sha256 == rec.sha256 => "identical",
            Some(_) => "DIFFERS",
            None => "MISSING",
        };
        if status != "identical" {
            mismatches += 1;
        }
        println!("{status:<9} {}", rec.path);
    }
    for extra in regenerated.iter().filter(|d| !recorded.iter().any(|r| r.path == d.path)) {
        mismatches += 1;
        println!("{:<9} {}", "EXTRA", extra.path);
    }
    if recorded.is_empty() {
        return Err(CliError::failure("the manifest records no outputs; was the run complete?"));
    }
    if mismatches > 0 {
        return Err(CliError::failure(format!("{mismatches} output file(s) differ from the manifest")));
    }
    println!("all {} outputs byte-identical", recorded.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_values_parse_as_toml() {
        assert_eq!(parse_set("train.lr=0.05").unwrap(), ("train.lr".into(), serde_json::json!(0.05)));
        assert_eq!(parse_set("seeds=[1,2]").unwrap().1, serde_json::json!([1, 2]));
        assert_eq!(parse_set("train.loss=hinge").unwrap().1, serde_json::json!("hinge"));
        assert!(parse_set("nokey").is_err());
    }

    #[test]
    fn digest_comparison() {
        let a = InputDigest {
            path: "a.csv".into(),
            sha256: "00".into(),
        };
        let b = InputDigest {
            sha256: "11".into(),
            ..a.clone()
        };
        assert!(compare_outputs(&[a.clone()], &[a.clone()]).is_ok());
        assert_eq!(compare_outputs(&[a.clone()], &[b]).unwrap_err().code, 1);
        assert!(compare_outputs(&[a], &[]).is_err());
    }
}
