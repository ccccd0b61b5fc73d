//! Run directories, CSV tables and the run manifest.
//!
//! A run is written into a hidden staging directory next to its final
//! location. Only after every file is written and checksummed is the
//! manifest added and the directory renamed into place; on failure the
//! staging directory is removed.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sde::{RunCounters, TrajectoryArchive};

/// Bumped whenever a CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub const SNAPSHOTS_HEADER: [&str; 3] = ["time", "particle_id", "x"];
pub const MOMENTS_HEADER: [&str; 5] = ["time", "mean", "var", "skew", "kurt"];
pub const DENSITY_HEADER: [&str; 4] = ["x", "n", "V_Bohm", "drift"];
pub const AUTOCORR_HEADER: [&str; 3] = ["lag", "classical", "quantum"];
pub const RESIDENCY_HEADER: [&str; 2] = ["duration", "label"];
pub const VARIANCE_HEADER: [&str; 5] = ["time", "S_ode", "S_ensemble", "ci_lo", "ci_hi"];
pub const STIFFNESS_HEADER: [&str; 4] = ["time", "kappa", "kappa_bar", "kappa_bar_cl"];
pub const HISTOGRAM_HEADER: [&str; 3] = ["x", "classical", "quantum"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    /// The effective configuration in config-file syntax.
    pub config: String,
    pub counters: Vec<(String, RunCounters)>,
    pub wall_time_seconds: f64,
    pub files: Vec<FileEntry>,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes every checksum and reports the first mismatch.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let actual = sha256_file(&dir.join(&f.path))?;
            if actual != f.sha256 {
                return Err(Error::invalid("checksum", format!("{} does not match its manifest entry", f.path)));
            }
        }
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// A run directory under construction.
#[derive(Debug)]
pub struct RunDir {
    staging: PathBuf,
    target: PathBuf,
    files: Vec<FileEntry>,
    committed: bool,
}

impl RunDir {
    /// Starts a run at `root/name`. Refuses to touch an existing directory
    /// unless `overwrite` is set.
    pub fn create(root: &Path, name: &str, overwrite: bool) -> Result<Self> {
        let target = root.join(name);
        if target.exists() && !overwrite {
            return Err(Error::invalid(
                "output",
                format!("{} already exists (use --force to replace it)", target.display()),
            ));
        }
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let staging = root.join(format!(".{name}.partial-{}", std::process::id()));
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(Self {
            staging,
            target,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Writes a CSV table at `relative` and records its checksum.
    pub fn write_csv<I>(&mut self, relative: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.staging.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        drop(w);
        self.record(relative, header)
    }

    fn record(&mut self, relative: &str, header: &[&str]) -> Result<()> {
        let path = self.staging.join(relative);
        let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        self.files.push(FileEntry {
            path: relative.to_string(),
            sha256: sha256_file(&path)?,
            bytes,
            columns: header.iter().map(|s| s.to_string()).collect(),
        });
        Ok(())
    }

    /// Writes the manifest and moves the directory into place.
    pub fn commit(mut self, mut manifest: RunManifest) -> Result<PathBuf> {
        manifest.files = std::mem::take(&mut self.files);
        let tmp = self.staging.join(format!("{MANIFEST_FILE}.tmp"));
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        let final_manifest = self.staging.join(MANIFEST_FILE);
        fs::rename(&tmp, &final_manifest).map_err(|e| Error::io(&final_manifest, e))?;
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.staging, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

pub fn fmt(v: f64) -> String {
    v.to_string()
}

/// Rows of `snapshots.csv` for the first `max_particles` particles (all if 0).
pub fn snapshot_rows(archive: &TrajectoryArchive, max_particles: usize) -> impl Iterator<Item = Vec<String>> + '_ {
    archive
        .times
        .iter()
        .zip(&archive.positions)
        .flat_map(move |(&t, positions)| {
            let keep = if max_particles == 0 { positions.len() } else { max_particles.min(positions.len()) };
            let ts = fmt(t);
            positions[..keep]
                .iter()
                .enumerate()
                .map(move |(i, &x)| vec![ts.clone(), i.to_string(), fmt(x)])
        })
}

/// Rows of `moments.csv`; snapshots too small for moments are skipped.
pub fn moment_rows(archive: &TrajectoryArchive) -> Vec<Vec<String>> {
    archive
        .times
        .iter()
        .zip(&archive.summaries)
        .filter_map(|(&t, m)| {
            m.map(|m| vec![fmt(t), fmt(m.mean), fmt(m.variance), fmt(m.skewness), fmt(m.excess_kurtosis)])
        })
        .collect()
}

/// Reads `snapshots.csv` back into an archive (positions only).
pub fn read_snapshots(path: &Path) -> Result<TrajectoryArchive> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut archive = TrajectoryArchive::default();
    let mut current: Vec<f64> = Vec::new();
    let mut current_t: Option<f64> = None;
    for record in reader.deserialize() {
        let (t, id, x): (f64, usize, f64) = record?;
        if current_t != Some(t) {
            if let Some(ct) = current_t {
                archive.times.push(ct);
                archive.positions.push(std::mem::take(&mut current));
            }
            current_t = Some(t);
        }
        if id != current.len() {
            return Err(Error::invalid(
                "snapshots",
                format!("{}: particle ids at t = {t} are not 0, 1, 2, ...", path.display()),
            ));
        }
        current.push(x);
    }
    if let Some(ct) = current_t {
        archive.times.push(ct);
        archive.positions.push(current);
    }
    archive.summaries = archive
        .positions
        .iter()
        .map(|p| crate::observables::moments::ensemble_moments(p).ok())
        .collect();
    archive.steps = (0..archive.times.len() as u64).collect();
    Ok(archive)
}
