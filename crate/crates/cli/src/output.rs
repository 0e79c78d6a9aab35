//! CSV files with a provenance comment line.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What every output file records about the run that produced it.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    /// Hashes the config text together with the tolerance flags, which
    /// change results without appearing in the file.
    pub fn new(config_text: &str, seed: u64, success_tol: f64, lp_tol: f64) -> Self {
        let mut h = Sha256::new();
        h.update(config_text.as_bytes());
        h.update(format!("\nsuccess_tol={success_tol:e}\nlp_tol={lp_tol:e}\n").as_bytes());
        let config_hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Self { config_hash, seed }
    }

    pub fn header(&self) -> String {
        format!("# config_hash={}, seed={}, version={VERSION}", self.config_hash, self.seed)
    }
}

pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    /// Creates `dir/name`, writes the provenance line, any `extra` comment
    /// lines, then the column header.
    pub fn create(dir: &Path, name: &str, prov: &Provenance, extra: &[String], columns: &[&str]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{}", prov.header())?;
        for line in extra {
            writeln!(buf, "# {line}")?;
        }
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(buf);
        inner.write_record(columns)?;
        Ok(Self { path, inner })
    }

    pub fn row<S: Serialize>(&mut self, record: S) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn record<I, T>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush()?;
        log::info!("wrote {}", self.path.display());
        Ok(self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_text_and_tolerances() {
        let a = Provenance::new("x", 1, 1e-5, 1e-8);
        assert_eq!(a.config_hash.len(), 64);
        assert_eq!(a.config_hash, Provenance::new("x", 2, 1e-5, 1e-8).config_hash);
        assert_ne!(a.config_hash, Provenance::new("y", 1, 1e-5, 1e-8).config_hash);
        assert_ne!(a.config_hash, Provenance::new("x", 1, 1e-6, 1e-8).config_hash);
        assert!(a.header().starts_with("# config_hash="));
        assert!(a.header().contains(", seed=1, version="));
    }

    #[test]
    fn files_start_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let prov = Provenance::new("x", 3, 1e-5, 1e-8);
        let mut out = CsvOut::create(dir.path(), "t.csv", &prov, &["note=1".into()], &["a", "b"]).unwrap();
        out.row((1u32, 0.5f64)).unwrap();
        let path = out.finish().unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], prov.header());
        assert_eq!(&lines[1..], &["# note=1", "a,b", "1,0.5"]);
    }
}
