//! CSV and JSON writers. Each file starts with a manifest line carrying the
//! config hash and the code version.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::{CliError, VERSION};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub command: String,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, command: &str) -> Result<Self, CliError> {
        Ok(Self { config_hash: config_hash(config)?, version: VERSION.to_string(), command: command.to_string() })
    }

    fn csv_line(&self) -> String {
        format!("# manifest,config_hash={},version={},command={}", self.config_hash, self.version, self.command)
    }
}

/// Hex SHA-256 of the normalized config (defaults filled in).
pub fn config_hash(config: &ExperimentConfig) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(config).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Output directory plus manifest; creates the directory on construction.
pub struct OutputDir {
    dir: PathBuf,
    manifest: Manifest,
}

impl OutputDir {
    pub fn create(dir: &Path, manifest: Manifest) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `rows` under `header`; rows are written in the given order.
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "{}", self.manifest.csv_line())?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(path)
    }

    /// `run.json`: manifest, config echo and a command-specific summary.
    pub fn write_run_json(&self, config: &ExperimentConfig, summary: serde_json::Value) -> Result<PathBuf, CliError> {
        let path = self.path(config.output_name("report", "run.json"));
        let doc = serde_json::json!({
            "manifest": self.manifest,
            "config": config,
            "summary": summary,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// Reads a CSV written by [`OutputDir::write_csv`], skipping the manifest line.
pub fn read_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<String>>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let (manifest, body) = text.split_once('\n').ok_or_else(|| CliError::Io(format!("{} is empty", path.display())))?;
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    Ok((manifest.to_string(), header, rows))
}

/// Shortest round-trip formatting; bit-identical across runs.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_json(r#"{"model": "dnls", "grid": {"m": 16, "n_steps": 2, "t_final": 0.1, "alpha": 1.5}}"#)
            .unwrap()
    }

    #[test]
    fn hash_tracks_content() {
        let a = config();
        let mut b = config();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.seed = 1;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn csv_round_trip_keeps_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), Manifest::new(&config(), "solve").unwrap()).unwrap();
        let path = out.write_csv("x.csv", &["a", "b"], &[vec![num(0.1), num(2.0)]]).unwrap();
        let (manifest, header, rows) = read_csv(&path).unwrap();
        assert!(manifest.starts_with("# manifest,config_hash="));
        assert!(manifest.ends_with("command=solve"));
        assert_eq!(header, ["a", "b"]);
        assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
    }
}
