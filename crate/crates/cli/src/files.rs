use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fairsched::instance::{parse_instance, serialize_instance, Instance};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FAIRSCHED_OUT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Explicit path, else `$FAIRSCHED_OUT/<name>`, else `./out/<name>`.
pub fn output_path(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out"))
            .join(name),
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Instance with the hash of its canonical serialization.
pub struct LoadedInstance {
    pub instance: Instance,
    pub sha256: String,
}

impl LoadedInstance {
    pub fn new(instance: Instance) -> Self {
        let sha256 = sha256_hex(&serialize_instance(&instance));
        Self { instance, sha256 }
    }
}

pub fn load_instance(path: &Path) -> CliResult<LoadedInstance> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let instance = parse_instance(&bytes)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let report = instance.validate();
    if !report.is_valid() {
        return Err(CliError::Usage(format!("{}: {report}", path.display())));
    }
    Ok(LoadedInstance::new(instance))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = std::env::temp_dir().join(format!("fairsched-files-{}", std::process::id()));
        let path = dir.join("nested/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        let entries: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
