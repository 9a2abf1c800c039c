//! Outputs are staged in a sibling temp directory and renamed into place on success.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

use crate::config::Manifest;
use crate::error::{CliError, CliResult};

pub struct Staging {
    dir: TempDir,
    target: PathBuf,
    force: bool,
    files: Vec<String>,
}

/// Refuses a `target` that is a file, or a non-empty directory unless `force` is set.
pub fn check_target(target: &Path, force: bool) -> CliResult<()> {
    if target.exists() {
        if !target.is_dir() {
            return Err(CliError::Validation(format!(
                "{} exists and is not a directory",
                target.display()
            )));
        }
        if !force && fs::read_dir(target)?.next().is_some() {
            return Err(CliError::Validation(format!(
                "output directory {} is not empty (pass --force to replace it)",
                target.display()
            )));
        }
    }
    Ok(())
}

impl Staging {
    pub fn new(target: &Path, force: bool) -> CliResult<Self> {
        check_target(target, force)?;
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent)?;
        let dir = tempfile::Builder::new()
            .prefix(".rfblt-staging-")
            .tempdir_in(&parent)?;
        Ok(Self {
            dir,
            target: target.to_path_buf(),
            force,
            files: Vec::new(),
        })
    }

    /// Opens `rel` for writing inside the staging area and records it.
    pub fn create(&mut self, rel: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.path().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(rel.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    pub fn write_with<F>(&mut self, rel: &str, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> CliResult<()>,
    {
        let mut w = self.create(rel)?;
        body(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Writes a CSV table of pre-formatted cells.
    pub fn write_table(
        &mut self,
        rel: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> CliResult<()> {
        self.write_with(rel, |w| {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(header)?;
            for row in rows {
                csv.write_record(row)?;
            }
            csv.flush()?;
            Ok(())
        })
    }

    pub fn write_json<T: serde::Serialize>(&mut self, rel: &str, value: &T) -> CliResult<()> {
        self.write_with(rel, |w| {
            serde_json::to_writer_pretty(&mut *w, value)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes `manifest.json` listing every staged file, then moves the directory into place.
    pub fn commit(mut self, manifest: impl FnOnce(Vec<String>) -> Manifest) -> CliResult<PathBuf> {
        let mut files = std::mem::take(&mut self.files);
        files.sort();
        let manifest = manifest(files);
        self.write_json("manifest.json", &manifest)?;
        if self.target.exists() {
            if self.force {
                fs::remove_dir_all(&self.target)?;
            } else {
                fs::remove_dir(&self.target)?;
            }
        }
        let staged = self.dir.keep();
        if let Err(e) = fs::rename(&staged, &self.target) {
            let _ = fs::remove_dir_all(&staged);
            return Err(e.into());
        }
        Ok(self.target)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Sorted `trajectory_*.csv` files of a simulate output directory.
pub fn trajectory_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trajectory_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Validation(format!(
            "{} contains no trajectory_*.csv files",
            dir.display()
        )));
    }
    Ok(files)
}

/// Fingerprint of a file, or of a directory's trajectory files (names and contents).
pub fn fingerprint(input: &Path) -> CliResult<String> {
    if input.is_dir() {
        let mut hasher = Sha256::new();
        for f in trajectory_files(input)? {
            hasher.update(f.file_name().unwrap_or_default().as_encoded_bytes());
            hasher.update([0u8]);
            hasher.update(fs::read(&f)?);
        }
        Ok(hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    } else {
        Ok(sha256_hex(&fs::read(input)?))
    }
}
