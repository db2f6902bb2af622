use std::fmt::Write as _;
use std::path::PathBuf;

use featdiv::bounds::{
    bound_multilayer, estimate_constants, evaluate_theorem, BoundReport, ConstantsReport, MultilayerVariant, Theorem,
    DEFAULT_DELTA,
};
use featdiv::data::{binarize, read_csv, sample_rows, Dataset, Task};
use featdiv::diversity::{estimate_dmin, DiversityReport};
use featdiv::model::{load_checkpoint, MlpModel};

use crate::config::mnist_dir;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitName {
    Train,
    Test,
}

/// Where the evaluation samples come from: MNIST or a CSV file.
#[derive(Debug, clap::Args)]
pub struct DatasetArgs {
    /// Use MNIST (see --data-dir and --split).
    #[arg(long, conflicts_with = "csv")]
    pub mnist: bool,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitName,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// CSV of features followed by target columns.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Task of the CSV file: scalar_regression, binary_classification,
    /// multivariate_regression or multiclass_classification.
    #[arg(long, requires = "csv")]
    pub task: Option<Task>,
    /// Keep two classes and relabel them -1 / +1.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub binarize: Option<Vec<u32>>,
    /// Draw this many rows (seeded by --subset-seed).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub subset_seed: u64,
}

impl DatasetArgs {
    pub fn load(&self) -> CliResult<Dataset<f64>> {
        let mut ds = match (&self.csv, self.mnist) {
            (Some(path), _) => {
                let task = self
                    .task
                    .ok_or_else(|| CliError::usage("--csv needs --task"))?;
                read_csv::<f64>(path, task, &path.display().to_string())?
            }
            (None, true) => {
                let dir = mnist_dir(self.data_dir.as_deref(), None);
                let (train, test, _) = featdiv::data::load_mnist::<f64>(&dir)?;
                match self.split {
                    SplitName::Train => train,
                    SplitName::Test => test,
                }
            }
            (None, false) => return Err(CliError::usage("choose a dataset with --mnist or --csv")),
        };
        if let Some(pair) = &self.binarize {
            ds = binarize(&ds, pair[0], pair[1])?;
        }
        if let Some(n) = self.size {
            if n < ds.len() {
                ds = sample_rows(&ds, n, self.subset_seed)?.0;
            }
        }
        Ok(ds)
    }
}

fn load_model(path: &PathBuf, ds: &Dataset<f64>) -> CliResult<MlpModel<f64>> {
    let (model, _) = load_checkpoint::<f64>(path)?;
    if model.input_dim() != ds.input_dim() || model.output_dim() != ds.output_dim() {
        return Err(CliError::usage(format!(
            "checkpoint expects {} inputs / {} outputs, dataset has {} / {}",
            model.input_dim(),
            model.output_dim(),
            ds.input_dim(),
            ds.output_dim()
        )));
    }
    Ok(model)
}

#[derive(Debug, clap::Args)]
pub struct BoundArgs {
    /// Checkpoint directory written by `featdiv train`.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// thm1, thm2, thm3, thm4, thm5, multilayer or rademacher.
    #[arg(long)]
    pub theorem: Theorem,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Use these d_min^2 values (one per hidden layer) instead of estimating them.
    #[arg(long, value_delimiter = ',')]
    pub d_min_sq: Option<Vec<f64>>,
    #[arg(long, default_value = "norm_consistent")]
    pub variant: MultilayerVariant,
    /// Print the constants and terms instead of JSON.
    #[arg(long)]
    pub explain: bool,
    /// Also write the report as a one-row CSV.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
}

/// Rejects theorem/model/task combinations the bound does not cover.
pub fn check_compatible(theorem: Theorem, depth: usize, task: Task, d_out: usize) -> CliResult<()> {
    let fail = |why: String| Err(CliError::usage(format!("{theorem} does not apply: {why}")));
    if theorem != Theorem::ThmMultilayer && depth != 1 {
        return fail(format!("it covers one hidden layer, the checkpoint has {depth}"));
    }
    match theorem {
        Theorem::Thm1Mse | Theorem::ThmMultilayer | Theorem::RademacherF if d_out != 1 => {
            fail(format!("it needs a scalar output, the model has {d_out}"))
        }
        Theorem::Thm2Hinge | Theorem::Thm3Logistic if task != Task::BinaryClassification => {
            fail(format!("it needs a binary classification task, got {task}"))
        }
        Theorem::Thm5Crossentropy if task != Task::MulticlassClassification => {
            fail(format!("it needs a multiclass classification task, got {task}"))
        }
        _ => Ok(()),
    }
}

pub fn compute(args: &BoundArgs) -> CliResult<(ConstantsReport, BoundReport)> {
    let ds = args.dataset.load()?;
    let model = load_model(&args.checkpoint, &ds)?;
    if model.includes_bias() {
        return Err(CliError::usage("the bounds assume a bias-free network; this checkpoint has biases"));
    }
    check_compatible(args.theorem, model.depth(), ds.task(), model.output_dim())?;
    let consts = estimate_constants(&model, &ds)?;
    let d = match &args.d_min_sq {
        Some(v) => {
            if v.len() != model.depth() {
                return Err(CliError::usage(format!(
                    "--d-min-sq needs {} value(s), one per hidden layer",
                    model.depth()
                )));
            }
            v.clone()
        }
        None => (0..model.depth())
            .map(|l| estimate_dmin(&model, &ds, l, args.batch.max(1)).map(|r| r.d_min_sq))
            .collect::<featdiv::Result<_>>()?,
    };
    let report = if args.theorem == Theorem::ThmMultilayer {
        bound_multilayer(&consts, &d, ds.len(), args.delta, args.variant)?
    } else {
        evaluate_theorem(args.theorem, &consts, d[0], ds.len(), args.delta, model.output_dim())?
    };
    Ok((consts, report))
}

pub fn run(args: BoundArgs) -> CliResult<()> {
    let (consts, report) = compute(&args)?;
    if let Some(p) = &args.out_csv {
        let text = format!("{}\n{}\n", BoundReport::CSV_HEADER, report.csv_row());
        std::fs::write(p, text).map_err(|e| CliError::failure(format!("cannot write {}: {e}", p.display())))?;
    }
    if args.explain {
        print!("{}", report.explain(&consts));
    } else {
        let v = serde_json::json!({ "constants": consts, "bound": report });
        println!("{}", serde_json::to_string_pretty(&v)?);
    }
    Ok(())
}

#[derive(Debug, clap::Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Hidden layer index (0-based); default probes every hidden layer.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    /// Write the summary rows here as CSV.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Write every sample's diversity (sample,layer,diversity) here.
    #[arg(long)]
    pub per_sample_csv: Option<PathBuf>,
}

pub fn probe(args: ProbeArgs) -> CliResult<()> {
    let ds = args.dataset.load()?;
    let model = load_model(&args.checkpoint, &ds)?;
    let layers: Vec<usize> = match args.layer {
        Some(l) if l >= model.depth() => {
            return Err(CliError::usage(format!(
                "--layer {l} out of range for {} hidden layers",
                model.depth()
            )))
        }
        Some(l) => vec![l],
        None => (0..model.depth()).collect(),
    };
    let reports = layers
        .iter()
        .map(|&l| estimate_dmin(&model, &ds, l, args.batch.max(1)))
        .collect::<featdiv::Result<Vec<DiversityReport>>>()?;
    let mut summary = format!("{}\n", DiversityReport::CSV_HEADER);
    for r in &reports {
        writeln!(summary, "{}", r.csv_row()).unwrap();
    }
    print!("{summary}");
    if let Some(p) = &args.out_csv {
        std::fs::write(p, &summary).map_err(|e| CliError::failure(format!("cannot write {}: {e}", p.display())))?;
    }
    if let Some(p) = &args.per_sample_csv {
        let mut s = String::from("sample,layer,diversity\n");
        for r in &reports {
            for (i, v) in r.per_sample.iter().enumerate() {
                writeln!(s, "{i},{},{v}", r.layer_index).unwrap();
            }
        }
        std::fs::write(p, s).map_err(|e| CliError::failure(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compatibility_table() {
        use Task::*;
        assert!(check_compatible(Theorem::Thm2Hinge, 1, MulticlassClassification, 10).is_err());
        assert!(check_compatible(Theorem::Thm2Hinge, 1, BinaryClassification, 1).is_ok());
        assert!(check_compatible(Theorem::Thm5Crossentropy, 1, BinaryClassification, 1).is_err());
        assert!(check_compatible(Theorem::Thm5Crossentropy, 1, MulticlassClassification, 10).is_ok());
        assert!(check_compatible(Theorem::Thm1Mse, 1, MultivariateRegression, 3).is_err());
        assert!(check_compatible(Theorem::Thm4Multivariate, 1, MultivariateRegression, 3).is_ok());
        assert!(check_compatible(Theorem::Thm1Mse, 2, ScalarRegression, 1).is_err());
        assert!(check_compatible(Theorem::ThmMultilayer, 3, ScalarRegression, 1).is_ok());
        assert_eq!(check_compatible(Theorem::Thm3Logistic, 1, ScalarRegression, 1).unwrap_err().code, 2);
    }
}
