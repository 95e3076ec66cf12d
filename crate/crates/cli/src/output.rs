use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{CmdResult, Failure};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: Option<String>,
    seeds: &'a [u64],
    out_dir: String,
    tool_version: &'static str,
    started_unix_secs: u64,
    wall_clock_secs: f64,
    /// File name to sha256 of its contents.
    outputs: &'a BTreeMap<String, String>,
}

/// An output directory that records what was written into it.
pub struct OutDir {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
    started: SystemTime,
    clock: Instant,
}

impl OutDir {
    /// Creates `dir`, refusing a non-empty one unless `force` is set.
    pub fn prepare(dir: &Path, force: bool) -> CmdResult<Self> {
        if dir.exists() {
            if !dir.is_dir() {
                return Err(Failure::usage(format!(
                    "{} is not a directory",
                    dir.display()
                )));
            }
            let occupied = fs::read_dir(dir)?.next().is_some();
            if occupied && !force {
                return Err(Failure::usage(format!(
                    "{} is not empty; pass --force to overwrite",
                    dir.display()
                )));
            }
        } else {
            fs::create_dir_all(dir)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CmdResult {
        fs::write(self.dir.join(name), bytes)?;
        self.hashes
            .insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn finish(self, command: &str, config: Option<&Path>, seeds: &[u64]) -> CmdResult {
        let manifest = RunManifest {
            command,
            config: config.map(|p| p.display().to_string()),
            seeds,
            out_dir: self.dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION"),
            started_unix_secs: self
                .started
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
            outputs: &self.hashes,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        fs::write(self.dir.join(MANIFEST), json + "\n")?;
        Ok(())
    }
}
