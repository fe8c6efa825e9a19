//! Append-only JSON-lines store for simulated null moments.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Schema version written into every record.
pub const CACHE_VERSION: u32 = 1;
/// Environment variable naming the cache directory.
pub const CACHE_DIR_ENV: &str = "CGKDM_CACHE_DIR";
pub const CACHE_FILE: &str = "null_moments.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentKey {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub version: u32,
    pub key: MomentKey,
    pub mean: f64,
    pub variance: f64,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
}

/// Moment store rooted at a directory. Writes from one process go through a
/// single lock; each record is one appended line.
#[derive(Debug)]
pub struct MomentCache {
    path: PathBuf,
    writer: Mutex<()>,
}

impl MomentCache {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self { path: dir.as_ref().join(CACHE_FILE), writer: Mutex::new(()) }
    }

    /// `$CGKDM_CACHE_DIR`, falling back to `<tmp>/cgkdm`.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("cgkdm"));
        Self::new(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Latest record for `key`; unreadable lines and other versions are skipped.
    pub fn get(&self, key: &MomentKey) -> Option<MomentRecord> {
        let file = fs::File::open(&self.path).ok()?;
        BufReader::new(file)
            .lines()
            .map_while(|l| l.ok())
            .filter_map(|l| serde_json::from_str::<MomentRecord>(&l).ok())
            .filter(|r| r.version == CACHE_VERSION && same_key(&r.key, key))
            .last()
    }

    pub fn put(&self, key: MomentKey, mean: f64, variance: f64) -> Result<MomentRecord> {
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let record = MomentRecord { version: CACHE_VERSION, key, mean, variance, created_at };
        let mut line = serde_json::to_string(&record).map_err(|e| crate::Error::Io(e.to_string()))?;
        line.push('\n');
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        f.write_all(line.as_bytes())?;
        Ok(record)
    }
}

fn same_key(a: &MomentKey, b: &MomentKey) -> bool {
    a.n == b.n && a.d == b.d && a.sigma.to_bits() == b.sigma.to_bits() && a.reps == b.reps && a.seed == b.seed
}
