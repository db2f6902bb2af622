use featdiv::oracle::{run_suite, SuiteConfig, VerificationReport};

use crate::error::{CliError, CliResult};

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sampled inputs per model for the sup checks.
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Random single-hidden-layer models per sup check.
    #[arg(long, default_value_t = 20)]
    pub models: usize,
    /// Print the reports as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: VerifyArgs) -> CliResult<()> {
    if args.trials == 0 || args.models == 0 {
        return Err(CliError::usage("--trials and --models must be at least 1"));
    }
    let cfg = SuiteConfig {
        seed: args.seed,
        trials: args.trials,
        models: args.models,
        ..SuiteConfig::default()
    };
    let reports = run_suite(&cfg)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        println!("{}", VerificationReport::table_header());
        for r in &reports {
            println!("{}", r.table_row());
            if !r.passed && !r.detail.is_empty() {
                println!("    {}", r.detail);
            }
        }
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(CliError::failure(format!("{failed} of {} checks failed", reports.len())));
    }
    if !args.json {
        println!("all {} checks passed", reports.len());
    }
    Ok(())
}
