//! Run directories and result files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::Result;

/// Everything one experiment produced, minus the bulky per-file data.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult<R, S> {
    pub experiment: &'static str,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub records: Vec<R>,
    pub summary: S,
    /// Excluded from every CSV so the numeric outputs stay reproducible.
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Serialize `rows` under the header implied by their field names.
    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_config(&self, cfg: &ScenarioConfig) -> Result<()> {
        self.write_json("config.json", cfg)
    }

    pub fn write_result<R: Serialize, S: Serialize>(&self, result: &ExperimentResult<R, S>) -> Result<()> {
        self.write_json("result.json", result)
    }
}
