//! Hash stamps for stage outputs and an exclusive lock on an output directory.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash over labelled parts, so `("a", "bc")` and `("ab", "c")` differ.
pub fn hash_parts(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn stamp_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".stamp");
    output.with_file_name(name)
}

/// True when `output` exists and was produced from inputs hashing to `key`.
pub fn is_fresh(output: &Path, key: &str) -> bool {
    output.exists() && std::fs::read_to_string(stamp_path(output)).is_ok_and(|s| s.trim() == key)
}

pub fn record(output: &Path, key: &str) -> Result<()> {
    let p = stamp_path(output);
    std::fs::write(&p, format!("{key}\n")).map_err(|e| Error::io(&p, e))
}

/// Exclusive lock file, removed on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

pub const LOCK_FILE: &str = ".firegrid.lock";

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
