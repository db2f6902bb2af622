use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use featdiv::data::{sha256_hex, InputDigest};

use crate::error::{CliError, CliResult};

/// An output directory that records the digest of every CSV written to it.
pub struct RunDir {
    pub path: PathBuf,
    pub outputs: Vec<InputDigest>,
}

impl RunDir {
    pub fn create(path: &Path) -> CliResult<Self> {
        fs::create_dir_all(path)
            .map_err(|e| CliError::failure(format!("cannot create run directory {}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn write(&self, name: &str, content: &str) -> CliResult<()> {
        let p = self.path.join(name);
        fs::write(&p, content).map_err(|e| CliError::failure(format!("cannot write {}: {e}", p.display())))
    }

    pub fn write_csv(&mut self, name: &str, content: &str) -> CliResult<()> {
        self.write(name, content)?;
        self.outputs.push(InputDigest {
            path: name.to_string(),
            sha256: sha256_hex(content.as_bytes()),
        });
        Ok(())
    }
}

/// Sub-run rows appended as they finish, so a failed experiment keeps what it had.
pub struct PartialCsv {
    path: PathBuf,
    out: Option<BufWriter<File>>,
    error: Option<String>,
}

impl PartialCsv {
    pub fn new(path: PathBuf) -> Self {
        Self {
            path,
            out: None,
            error: None,
        }
    }

    pub fn push(&mut self, header: &str, line: &str) {
        if self.error.is_some() {
            return;
        }
        let res = (|| -> std::io::Result<()> {
            if self.out.is_none() {
                let mut w = BufWriter::new(File::create(&self.path)?);
                writeln!(w, "{header}")?;
                self.out = Some(w);
            }
            let w = self.out.as_mut().unwrap();
            writeln!(w, "{line}")?;
            w.flush()
        })();
        if let Err(e) = res {
            self.error = Some(format!("{}: {e}", self.path.display()));
        }
    }

    /// Removes the partial file once the complete outputs are written.
    pub fn finish(mut self) {
        self.out.take();
        let _ = fs::remove_file(&self.path);
    }
}

pub fn default_run_dir(kind: &str) -> PathBuf {
    PathBuf::from("runs").join(format!("{kind}-{}", chrono::Utc::now().format("%Y%m%dT%H%M%S")))
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
