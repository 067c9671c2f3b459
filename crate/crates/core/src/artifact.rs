//! Atomic artifact writes and checksum manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Write via a sibling temp file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `<sha256>  <path relative to root>` per file, sorted by path.
pub fn write_manifest(root: &Path, manifest: &Path, files: &[PathBuf]) -> Result<()> {
    let mut entries = Vec::with_capacity(files.len());
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(f);
        entries.push((rel.to_string_lossy().replace('\\', "/"), sha256_file(f)?));
    }
    entries.sort();
    let text: String = entries.iter().map(|(p, h)| format!("{h}  {p}\n")).collect();
    write_atomic(manifest, text.as_bytes())
}

/// Parse a manifest back into `(path, sha256)` pairs.
pub fn read_manifest(manifest: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once("  ")
                .map(|(h, p)| (p.to_string(), h.to_string()))
                .ok_or_else(|| Error::data(format!("bad manifest line `{l}`")))
        })
        .collect()
}
