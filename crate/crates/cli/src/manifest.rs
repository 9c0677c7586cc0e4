//! Run manifests: what was run, on which inputs, for how long.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: BTreeMap<String, String>,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub version: String,
    pub duration_secs: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

impl RunManifest {
    pub fn start(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            flags: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl ToString) {
        self.flags.insert(name.to_string(), value.to_string());
    }

    /// Hashes a file that the run reads.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path).with_context(|| format!("hashing {}", path.display()))?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn inputs_in(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        for n in names {
            self.input(&dir.join(n))?;
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Stamps the duration and writes pretty JSON to `path`.
    pub fn finish(mut self, path: &Path) -> Result<PathBuf> {
        self.duration_secs = self.started.map_or(0.0, |t| t.elapsed().as_secs_f64());
        let json = serde_json::to_string_pretty(&self)? + "\n";
        std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path.to_path_buf())
    }
}
