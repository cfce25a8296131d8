//! Run manifests: what was run, on what, and what came out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

/// Deterministic record of one command. Wall-clock data lives in
/// [`Timing`] and is written to a sibling file so that identical runs
/// produce identical manifests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub command_line: Vec<String>,
    pub config_hash: Option<String>,
    pub dataset_hash: Option<String>,
    pub seed: Option<u64>,
    pub metrics: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub started_unix: f64,
    pub finished_unix: f64,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Timing {
    pub fn wall_seconds(&self) -> f64 {
        self.finished_unix - self.started_unix
    }
}

impl RunManifest {
    pub fn new(command: &str, command_line: &[String]) -> Self {
        RunManifest {
            command: command.to_string(),
            command_line: command_line.to_vec(),
            ..Default::default()
        }
    }

    pub fn metric(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metrics.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "command_line={}", self.command_line.join(" "));
        if let Some(h) = &self.config_hash {
            let _ = writeln!(s, "config_hash={h}");
        }
        if let Some(h) = &self.dataset_hash {
            let _ = writeln!(s, "dataset_hash={h}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// Writes the manifest to `path` and the timing to `path.timing`.
    pub fn write(&self, path: &Path, timing: &Timing) -> Result<()> {
        std::fs::write(path, self.to_kv()).map_err(|e| Error::io(path, e))?;
        let tpath = timing_path(path);
        let body = format!(
            "started_unix={:.3}\nfinished_unix={:.3}\nwall_seconds={:.3}\n",
            timing.started_unix,
            timing.finished_unix,
            timing.wall_seconds()
        );
        std::fs::write(&tpath, body).map_err(|e| Error::io(&tpath, e))
    }
}

pub fn timing_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".timing");
    PathBuf::from(p)
}
