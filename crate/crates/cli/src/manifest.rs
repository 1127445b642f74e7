use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use freqstab_core::{io, Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one CLI invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chaos_seed: Option<f64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
    pub wall_clock_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub struct Recorder {
    started: Instant,
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Recorder {
            started: Instant::now(),
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_owned(),
                args: std::env::args().skip(1).collect(),
                config,
                rng_seed: None,
                chaos_seed: None,
                inputs: vec![],
                outputs: vec![],
                warnings: vec![],
                wall_clock_s: 0.0,
            },
        }
    }

    pub fn seeds(&mut self, rng_seed: u64, chaos_seed: Option<f64>) {
        self.manifest.rng_seed = Some(rng_seed);
        self.manifest.chaos_seed = chaos_seed;
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.manifest.outputs.push(FileDigest {
            path: path.to_path_buf(),
            sha256,
        });
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.manifest.warnings.push(msg);
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.manifest.wall_clock_s = self.started.elapsed().as_secs_f64();
        let path = dir.join("manifest.json");
        io::write_json(&path, &self.manifest)?;
        Ok(path)
    }
}
