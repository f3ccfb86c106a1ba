use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sampler::{sample_seed, SampleRole};
use super::task::{Sample, Task, TaskSpec};
use crate::error::{Error, Result};
use crate::learner::Dataset;
use crate::pde::Matrix;

pub const DATASET_FORMAT: &str = "opstep-dataset";
pub const X_BLOB: &str = "x.f64";
pub const Y_BLOB: &str = "y.f64";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobInfo {
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataRole {
    Train,
    Test,
}

impl DataRole {
    fn sample_role(self) -> SampleRole {
        match self {
            DataRole::Train => SampleRole::Train,
            DataRole::Test => SampleRole::Test,
        }
    }
}

/// Provenance of a dataset; enough to regenerate it bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub scheme: String,
    pub task: TaskSpec,
    pub n: usize,
    pub seed: u64,
    pub role: DataRole,
    pub sample_seeds: Vec<u64>,
    pub x: BlobInfo,
    pub y: BlobInfo,
}

/// Draws `n` pairs `(E(u_i), S(u_i))`; sample `i` uses its own seed derived from `(seed, role, i)`.
pub fn generate_samples(task: &Task, n: usize, seed: u64, role: DataRole) -> Result<Vec<Sample>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            task.sample(sample_seed(seed, role.sample_role(), i))
                .map_err(|e| Error::at_sample(i as usize, e))
        })
        .collect()
}

pub fn generate_dataset(task: &Task, n: usize, seed: u64, role: DataRole) -> Result<Dataset> {
    let samples = generate_samples(task, n, seed, role)?;
    let (dx, dy) = (task.input_dim(), task.output_dim());
    let mut x = Vec::with_capacity(n * dx);
    let mut y = Vec::with_capacity(n * dy);
    for s in &samples {
        x.extend_from_slice(&s.input);
        y.extend_from_slice(s.target.values());
    }
    let manifest = Manifest {
        format: DATASET_FORMAT.into(),
        version: 1,
        scheme: scheme_name(task),
        task: task.spec().clone(),
        n,
        seed,
        role,
        sample_seeds: (0..n as u64)
            .map(|i| sample_seed(seed, role.sample_role(), i))
            .collect(),
        x: blob_info(X_BLOB, n, dx, &x),
        y: blob_info(Y_BLOB, n, dy, &y),
    };
    let mut ds = Dataset::new(Matrix::from_row_major(n, dx, x)?, Matrix::from_row_major(n, dy, y)?)?;
    ds.manifest = Some(manifest);
    Ok(ds)
}

/// Rebuilds the dataset described by `manifest` and checks the recorded digests.
pub fn regenerate(manifest: &Manifest) -> Result<Dataset> {
    let task = Task::new(manifest.task.clone())?;
    let ds = generate_dataset(&task, manifest.n, manifest.seed, manifest.role)?;
    let fresh = ds.manifest.as_ref().expect("generated datasets carry a manifest");
    if fresh.x.sha256 != manifest.x.sha256 || fresh.y.sha256 != manifest.y.sha256 {
        return Err(Error::Format("regenerated blobs differ from the manifest digests".into()));
    }
    Ok(ds)
}

fn scheme_name(task: &Task) -> String {
    serde_json::to_value(task.id().scheme())
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

pub fn blob_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn blob_info(file: &str, rows: usize, cols: usize, values: &[f64]) -> BlobInfo {
    BlobInfo {
        file: file.into(),
        rows,
        cols,
        sha256: hex::encode(Sha256::digest(blob_bytes(values))),
    }
}

pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    let manifest = ds
        .manifest
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("dataset has no manifest".into()))?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(&manifest.x.file), blob_bytes(ds.inputs.as_slice()))?;
    fs::write(dir.join(&manifest.y.file), blob_bytes(ds.outputs.as_slice()))?;
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    if m.format != DATASET_FORMAT || m.version != 1 {
        return Err(Error::Format(format!("unsupported dataset format {} v{}", m.format, m.version)));
    }
    Ok(m)
}

/// Loads a dataset written by [`write_dataset`], verifying sizes and digests.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest = read_manifest(dir)?;
    let x = read_blob(dir, &manifest.x)?;
    let y = read_blob(dir, &manifest.y)?;
    let mut ds = Dataset::new(
        Matrix::from_row_major(manifest.x.rows, manifest.x.cols, x)?,
        Matrix::from_row_major(manifest.y.rows, manifest.y.cols, y)?,
    )?;
    ds.manifest = Some(manifest);
    Ok(ds)
}

fn read_blob(dir: &Path, info: &BlobInfo) -> Result<Vec<f64>> {
    let bytes = fs::read(dir.join(&info.file))?;
    if bytes.len() != info.rows * info.cols * 8 {
        return Err(Error::Format(format!(
            "{} holds {} bytes, expected {}",
            info.file,
            bytes.len(),
            info.rows * info.cols * 8
        )));
    }
    if hex::encode(Sha256::digest(&bytes)) != info.sha256 {
        return Err(Error::Format(format!("{} digest mismatch", info.file)));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
