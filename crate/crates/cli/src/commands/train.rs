use std::fmt::Write as _;
use std::path::PathBuf;

use featdiv::data::{binarize, sample_rows, Dataset, InputDigest};
use featdiv::diversity::{estimate_dmin, DiversityReport};
use featdiv::experiments::{load_data, DataSpec, ExperimentKind, ExperimentManifest, LineChart, Series};
use featdiv::model::{init_model, save_checkpoint, train, MlpModel, ProbeFn, RunRecord};
use featdiv::numkit::ActivationSpec;
use featdiv::Scalar;

use crate::config::{load_train_file, Precision, ProbeOn, TrainFile};
use crate::error::{CliError, CliResult};
use crate::rundir::{default_run_dir, timestamp, RunDir};

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// TOML config with [data], [subset], [model], [train] and [probe] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (default: runs/train-<timestamp>).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// MNIST directory, overriding the config and FEATDIV_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub quiet: bool,
}

pub fn run(args: TrainArgs) -> CliResult<()> {
    let mut file = load_train_file(args.config.as_deref())?;
    if let Some(v) = args.epochs {
        file.train.epochs = v;
    }
    if let Some(v) = args.lr {
        file.train.lr = v;
    }
    if let Some(v) = args.batch_size {
        file.train.batch_size = v;
    }
    if let Some(v) = args.seed {
        file.train.seed = v;
    }
    if let Some(v) = args.widths {
        file.model.widths = v;
    }
    if let Some(p) = args.precision {
        file.precision = p;
    }
    file.train.validate()?;
    let data = file.data.resolve(args.data_dir.as_deref())?;
    if let DataSpec::Mnist { dir } = &data {
        file.data.dir = Some(dir.clone());
    }
    let out = args.out.unwrap_or_else(|| default_run_dir("train"));
    let mut dir = RunDir::create(&out)?;
    let (inputs, summary) = execute(&file, &data, &mut dir, args.quiet)?;
    let mut manifest = ExperimentManifest::new(
        ExperimentKind::Train,
        timestamp(),
        vec![file.train.seed],
        file.precision.as_str(),
        data,
        serde_json::to_value(&file)?,
    );
    manifest.inputs = inputs;
    manifest.outputs = dir.outputs.clone();
    manifest.notes = notes(&file);
    dir.write("manifest.json", &manifest.to_json()?)?;
    print!("{summary}");
    println!("run directory: {}", out.display());
    Ok(())
}

pub fn notes(file: &TrainFile) -> Vec<String> {
    let mut n = vec![
        "MNIST pixels are scaled to [0, 1] by dividing by 255".to_string(),
        "error is the misclassification rate; gap = test error - train error".to_string(),
    ];
    if file.model.bias {
        n.push("WARNING: bias terms enabled; the generalization bounds assume a bias-free network".to_string());
    }
    n
}

/// Trains per `file` and writes the CSV, SVG and checkpoint outputs into `dir`.
pub fn execute(file: &TrainFile, data: &DataSpec, dir: &mut RunDir, quiet: bool) -> CliResult<(Vec<InputDigest>, String)> {
    match file.precision {
        Precision::F64 => execute_typed::<f64>(file, data, dir, quiet),
        Precision::F32 => execute_typed::<f32>(file, data, dir, quiet),
    }
}

fn prepare<T: Scalar>(file: &TrainFile, data: &DataSpec) -> CliResult<(Dataset<T>, Dataset<T>, Vec<InputDigest>)> {
    let loaded = load_data::<T>(data)?;
    let (mut tr, mut te) = (loaded.train, loaded.test);
    if let Some([a, b]) = file.subset.binarize {
        tr = binarize(&tr, a, b)?;
        te = binarize(&te, a, b)?;
    }
    if let Some(n) = file.subset.train_size {
        if n < tr.len() {
            tr = sample_rows(&tr, n, file.subset.seed)?.0;
        } else if n > tr.len() {
            return Err(CliError::usage(format!(
                "[subset] train_size {n} exceeds the {} available samples",
                tr.len()
            )));
        }
    }
    if !file.train.loss.supports(tr.task()) {
        return Err(CliError::usage(format!(
            "[train] loss `{}` cannot train on {} data",
            file.train.loss,
            tr.task()
        )));
    }
    Ok((tr, te, loaded.inputs))
}

fn execute_typed<T: Scalar>(
    file: &TrainFile,
    data: &DataSpec,
    dir: &mut RunDir,
    quiet: bool,
) -> CliResult<(Vec<InputDigest>, String)> {
    let (tr, te, inputs) = prepare::<T>(file, data)?;
    let act = ActivationSpec::from(file.model.activation);
    let mut model = init_model::<T>(&file.model.widths, tr.input_dim(), tr.output_dim(), act, file.train.seed)?;
    if file.model.bias {
        model = model.with_biases();
    }
    let layer = file.probe.layer.unwrap_or(model.depth() - 1);
    if layer >= model.depth() {
        return Err(CliError::usage(format!(
            "[probe] layer {layer} out of range for {} hidden layers",
            model.depth()
        )));
    }
    let source = match file.probe.on {
        ProbeOn::Train => &tr,
        ProbeOn::Test => &te,
    };
    let probe_set = if file.probe.size >= source.len() {
        source.clone()
    } else {
        sample_rows(source, file.probe.size.max(1), file.probe.seed)?.0
    };
    let batch = file.probe.batch.max(1);
    let epochs = file.train.epochs;
    let mut probe = |m: &MlpModel<T>, epoch: usize| -> featdiv::Result<DiversityReport> {
        let r = estimate_dmin(m, &probe_set, layer, batch)?;
        if !quiet {
            eprintln!("epoch {epoch}/{epochs}: diversity {:.5e} d_min^2 {:.5e}", r.dataset_diversity, r.d_min_sq);
        }
        Ok(r)
    };
    let record = train(&mut model, &tr, &te, &file.train, Some(&mut probe as &mut ProbeFn<'_, T>))?;

    dir.write_csv("run.csv", &record.to_csv())?;
    let mut probes = format!("epoch,{}\n", DiversityReport::CSV_HEADER);
    let probed = record.epochs.iter().filter(|e| e.diversity.is_some());
    for (e, p) in probed.zip(&record.probes) {
        writeln!(probes, "{},{}", e.epoch, p.csv_row()).unwrap();
    }
    dir.write_csv("probes.csv", &probes)?;
    let summary = summary_csv(&record, tr.len(), te.len());
    dir.write_csv("summary.csv", &summary)?;
    dir.write("training.svg", &curves_svg(&record))?;
    save_checkpoint(&model, &dir.path.join("checkpoints").join("final"), serde_json::to_value(file)?)?;
    Ok((inputs, summary))
}

fn summary_csv(record: &RunRecord, n_train: usize, n_test: usize) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into());
    let mut s = String::from("split,n,loss,error\n");
    writeln!(s, "train,{n_train},{},{}", record.final_train.loss, opt(record.final_train.error)).unwrap();
    writeln!(s, "test,{n_test},{},{}", record.final_test.loss, opt(record.final_test.error)).unwrap();
    writeln!(s, "gap,,,{}", opt(record.generalization_gap())).unwrap();
    s
}

fn curves_svg(record: &RunRecord) -> String {
    let mut series = vec![Series {
        name: "train loss".into(),
        points: record.epochs.iter().map(|e| (e.epoch as f64, e.train_loss)).collect(),
    }];
    let div: Vec<(f64, f64)> = record
        .epochs
        .iter()
        .filter_map(|e| e.diversity.map(|d| (e.epoch as f64, d)))
        .collect();
    if !div.is_empty() {
        series.push(Series {
            name: "diversity".into(),
            points: div,
        });
    }
    LineChart {
        title: "training".into(),
        x_label: "epoch".into(),
        y_label: "value".into(),
        series,
    }
    .render()
}
