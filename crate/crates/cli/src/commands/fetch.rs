use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use featdiv::data::{file_sha256, sha256_hex, MNIST_FILES};

use crate::config::DEFAULT_DATA_DIR;
use crate::error::{CliError, CliResult};

pub const DEFAULT_BASE_URL: &str = "https://ossci-datasets.s3.amazonaws.com/mnist";

#[derive(Debug, clap::Args)]
pub struct FetchArgs {
    /// Destination directory.
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    pub out: PathBuf,
    /// Copy from a local directory holding the files, plain or `.gz`.
    #[arg(long, conflicts_with = "base_url")]
    pub from: Option<PathBuf>,
    /// Download `<name>.gz` from this URL prefix.
    #[arg(long)]
    pub base_url: Option<String>,
    /// Replace files that are already present.
    #[arg(long)]
    pub force: bool,
}

fn gunzip(bytes: &[u8], what: &str) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    GzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| CliError::failure(format!("cannot decompress {what}: {e}")))?;
    Ok(out)
}

fn read_local(dir: &Path, name: &str) -> CliResult<Vec<u8>> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(std::fs::read(&plain)?);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return gunzip(&std::fs::read(&gz)?, &gz.display().to_string());
    }
    Err(CliError::usage(format!("{} has neither {name} nor {name}.gz", dir.display())))
}

fn download(base: &str, name: &str) -> CliResult<Vec<u8>> {
    let url = format!("{}/{name}.gz", base.trim_end_matches('/'));
    let resp = ureq::get(&url)
        .call()
        .map_err(|e| CliError::failure(format!("download {url} failed: {e}")))?;
    let mut bytes = Vec::new();
    resp.into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| CliError::failure(format!("download {url} failed: {e}")))?;
    gunzip(&bytes, &url)
}

pub fn run(args: FetchArgs) -> CliResult<()> {
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::failure(format!("cannot create {}: {e}", args.out.display())))?;
    let base = args.base_url.as_deref().unwrap_or(DEFAULT_BASE_URL);
    for (name, expected) in MNIST_FILES {
        let dest = args.out.join(name);
        if dest.is_file() && !args.force {
            if file_sha256(&dest)? == expected {
                println!("ok       {name} (already present)");
                continue;
            }
            return Err(CliError::failure(format!(
                "{} exists with an unexpected digest; pass --force to replace it",
                dest.display()
            )));
        }
        let bytes = match &args.from {
            Some(dir) => read_local(dir, name)?,
            None => download(base, name)?,
        };
        let got = sha256_hex(&bytes);
        if got != expected {
            return Err(CliError::failure(format!(
                "{name}: sha256 {got} does not match the expected {expected}"
            )));
        }
        std::fs::write(&dest, &bytes).map_err(|e| CliError::failure(format!("cannot write {}: {e}", dest.display())))?;
        println!("fetched  {name}");
    }
    println!("MNIST ready in {}", args.out.display());
    Ok(())
}
