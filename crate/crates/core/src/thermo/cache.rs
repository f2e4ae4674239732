//! On-disk memo of `K` and `K'` values.
//!
//! One CSV file per quadrature specification, named
//! `thermo-<first 16 hex digits of SHA-256 of the spec key>.csv`, with the
//! header `d,y,method,points,seed,K,Kprime,err` and one LF-terminated record
//! per `(d, y)`. Numbers use the shortest round-trip decimal form. Writes go
//! to a temporary file that is renamed into place, so concurrent writers of
//! the same (deterministic) values are last-writer-wins.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::QuadratureSpec;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "DNLS_CACHE_DIR";

pub const HEADER: &str = "d,y,method,points,seed,K,Kprime,err";

/// Default cache directory: `$DNLS_CACHE_DIR`, else `$XDG_CACHE_HOME/dnls`,
/// else `$HOME/.cache/dnls`, else `.dnls-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Some(p) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(p);
    }
    if let Some(p) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(p).join("dnls");
    }
    if let Some(p) = std::env::var_os("HOME") {
        return PathBuf::from(p).join(".cache").join("dnls");
    }
    PathBuf::from(".dnls-cache")
}

/// A cached `(K, K', err)` triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheRecord {
    pub k: f64,
    pub k_prime: f64,
    pub err: f64,
}

#[derive(Debug)]
pub struct DiskCache {
    path: PathBuf,
    quad: QuadratureSpec,
    entries: BTreeMap<(usize, u64), CacheRecord>,
    dirty: bool,
}

impl DiskCache {
    /// Opens (or prepares) the cache file for `quad` inside `dir`.
    pub fn open(dir: &Path, quad: &QuadratureSpec) -> Result<Self> {
        let path = dir.join(format!("thermo-{}.csv", quad.hash_hex()));
        let mut cache = Self {
            path,
            quad: *quad,
            entries: BTreeMap::new(),
            dirty: false,
        };
        cache.merge_from_disk()?;
        Ok(cache)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn merge_from_disk(&mut self) -> Result<()> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == HEADER => {}
            _ => return Err(Error::Parse(format!("{}: bad header", self.path.display()))),
        }
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!(
                    "{}:{}: expected 8 fields",
                    self.path.display(),
                    i + 2
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{}:{}: {e}", self.path.display(), i + 2)))
            };
            let d: usize = f[0]
                .parse()
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", self.path.display(), i + 2)))?;
            let y = num(f[1])?;
            let rec = CacheRecord {
                k: num(f[5])?,
                k_prime: num(f[6])?,
                err: num(f[7])?,
            };
            self.entries.insert((d, y.to_bits()), rec);
        }
        Ok(())
    }

    pub fn get(&self, d: usize, y: f64) -> Option<CacheRecord> {
        self.entries.get(&(d, y.to_bits())).copied()
    }

    pub fn insert(&mut self, d: usize, y: f64, rec: CacheRecord) {
        self.entries.insert((d, y.to_bits()), rec);
        self.dirty = true;
    }

    /// Writes all records, merging anything another writer stored meanwhile.
    pub fn flush(&mut self) -> Result<()> {
        if !self.dirty {
            return Ok(());
        }
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mine = std::mem::take(&mut self.entries);
        self.merge_from_disk()?;
        self.entries.extend(mine);
        let tmp = self.path.with_extension(format!("csv.tmp{}", std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            writeln!(f, "{HEADER}")?;
            for (&(d, ybits), r) in &self.entries {
                writeln!(
                    f,
                    "{},{},{},{},{},{},{},{}",
                    d,
                    f64::from_bits(ybits),
                    self.quad.method.name(),
                    self.quad.points,
                    self.quad.seed,
                    r.k,
                    r.k_prime,
                    r.err
                )?;
            }
        }
        fs::rename(&tmp, &self.path)?;
        self.dirty = false;
        Ok(())
    }
}

pub(crate) fn sha_hex(s: &str) -> String {
    let digest = Sha256::digest(s.as_bytes());
    hex::encode(&digest[..8])
}
