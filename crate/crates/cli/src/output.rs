//! Output files. CSVs start with a `#` provenance line followed by the
//! header row; JSON reports carry the same provenance under `provenance`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub problem_seed: Option<u64>,
    pub tool_version: &'static str,
}

impl Provenance {
    pub fn comment(&self) -> String {
        let mut s = format!("# config_sha256={} seed={}", self.config_sha256, self.seed);
        if let Some(ps) = self.problem_seed {
            s.push_str(&format!(" problem_seed={ps}"));
        }
        s
    }
}

/// Report metadata; the timestamp is the only nondeterministic field.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub timestamp_unix: u64,
    pub command: &'static str,
}

impl Metadata {
    pub fn now(command: &'static str) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            timestamp_unix,
            command,
        }
    }
}

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// CSV writer positioned after the provenance line.
    pub fn csv(&self, name: &str, prov: &Provenance) -> Result<csv::Writer<BufWriter<File>>> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{}", prov.comment())?;
        Ok(csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w))
    }

    pub fn json<S: Serialize>(&self, name: &str, value: &S) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip representation, in exponent form for very large or
/// small magnitudes.
pub fn real(v: f64) -> String {
    format!("{v:?}")
}

/// [`real`], empty for missing values.
pub fn num(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}
