//! Memory bank construction from normal samples and nearest-neighbor
//! scoring of test samples.
//!
//! The bank stores every group feature from every training cloud, in
//! deterministic order (sample order, then center selection order), with
//! per-vector provenance. Scoring is the exact minimum L2 distance to the
//! bank, accumulated in f64 with a fixed component order, so accelerated or
//! parallel paths cannot drift from the brute-force definition.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureExtractor;
use crate::geometry::{pcm_map, PointCloud};
use crate::io::rifw::{self, Tensor};
use crate::sampling::{fps, knn_group};

/// Origin of one bank vector.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub sample_id: String,
    pub center_index: usize,
}

/// Frozen collection of normal-sample group features.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    dim: usize,
    data: Vec<f32>,
    provenance: Vec<Provenance>,
}

impl MemoryBank {
    pub fn new(dim: usize) -> Self {
        MemoryBank { dim, data: Vec::new(), provenance: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn push(&mut self, vector: &[f32], provenance: Provenance) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch { expected: self.dim, got: vector.len() });
        }
        self.data.extend_from_slice(vector);
        self.provenance.push(provenance);
        Ok(())
    }

    /// Estimated resident size of the vectors (count x dim x 4 bytes).
    pub fn memory_bytes(&self) -> usize {
        self.len() * self.dim * 4
    }
}

/// Per-sample anomaly scores: one score per FPS center, a propagated score
/// per point (each point inherits its nearest center), and the object score
/// (the maximum center score).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub center_indices: Vec<usize>,
    pub center_scores: Vec<f64>,
    pub per_point_scores: Vec<f64>,
    pub object_score: f64,
}

impl ScoreReport {
    /// Position (within the center list) of the maximal score; first wins on
    /// ties.
    pub fn argmax_center(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &s) in self.center_scores.iter().enumerate() {
            match best {
                None => best = Some((i, s)),
                Some((_, bs)) if s > bs => best = Some((i, s)),
                _ => {}
            }
        }
        best.map(|(i, _)| i)
    }
}

fn attach_sample(err: Error, id: &str) -> Error {
    match err {
        Error::DegenerateCloud { .. } => Error::DegenerateCloud { sample: Some(id.to_string()) },
        other => other,
    }
}

/// Extracts the feature of every FPS group of an already-mapped cloud, in
/// center order. Groups are independent, so the work runs in parallel and is
/// collected back in order.
fn group_features(
    mapped: &PointCloud,
    extractor: &dyn FeatureExtractor,
    g: usize,
    k: usize,
) -> Result<(Vec<usize>, Vec<Vec<f32>>)> {
    let centers = fps(mapped, g).center_indices;
    let features: Result<Vec<Vec<f32>>> = centers
        .par_iter()
        .map(|&c| extractor.extract(&knn_group(mapped, c, k)))
        .collect();
    Ok((centers, features?))
}

/// Builds the bank from normal training clouds: canonicalize, sample G
/// centers, group K neighbors, extract, append.
pub fn build_bank(
    train_clouds: &[(String, PointCloud)],
    extractor: &dyn FeatureExtractor,
    g: usize,
    k: usize,
) -> Result<MemoryBank> {
    if g == 0 || k == 0 {
        return Err(Error::InvalidConfig("G and K must be at least 1".into()));
    }
    if train_clouds.is_empty() {
        return Err(Error::InvalidConfig("need at least one training cloud".into()));
    }
    let mut bank = MemoryBank::new(extractor.dim());
    for (id, cloud) in train_clouds {
        let mapped = pcm_map(cloud).map_err(|e| attach_sample(e, id))?;
        let (centers, features) = group_features(&mapped.cloud, extractor, g, k)?;
        for (center, feature) in centers.into_iter().zip(features) {
            bank.push(&feature, Provenance { sample_id: id.clone(), center_index: center })?;
        }
    }
    Ok(bank)
}

/// Exact nearest-neighbor search: minimum L2 distance over all bank vectors
/// and the argmin index (lowest index on ties). Distances accumulate in f64
/// in ascending component order.
pub fn nn_distance(bank: &MemoryBank, feature: &[f32]) -> Result<(f64, usize)> {
    if bank.is_empty() {
        return Err(Error::EmptyBank);
    }
    if feature.len() != bank.dim() {
        return Err(Error::DimMismatch { expected: bank.dim(), got: feature.len() });
    }
    let mut best = f64::INFINITY;
    let mut best_idx = 0usize;
    for i in 0..bank.len() {
        let v = bank.vector(i);
        let mut acc = 0.0f64;
        for (a, b) in v.iter().zip(feature) {
            let d = *a as f64 - *b as f64;
            acc += d * d;
        }
        if acc < best {
            best = acc;
            best_idx = i;
        }
    }
    Ok((best.sqrt(), best_idx))
}

/// Scores one test cloud against the bank.
pub fn score_sample(
    bank: &MemoryBank,
    cloud: &PointCloud,
    extractor: &dyn FeatureExtractor,
    g: usize,
    k: usize,
) -> Result<ScoreReport> {
    if g == 0 || k == 0 {
        return Err(Error::InvalidConfig("G and K must be at least 1".into()));
    }
    if extractor.dim() != bank.dim() {
        return Err(Error::DimMismatch { expected: bank.dim(), got: extractor.dim() });
    }
    let mapped = pcm_map(cloud)?;
    let (center_indices, features) = group_features(&mapped.cloud, extractor, g, k)?;
    let center_scores: Result<Vec<f64>> = features
        .par_iter()
        .map(|f| nn_distance(bank, f).map(|(d, _)| d))
        .collect();
    let center_scores = center_scores?;

    // each point inherits the score of its nearest center (first on ties)
    let pts = mapped.cloud.points();
    let per_point_scores: Vec<f64> = pts
        .par_iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            let mut score = 0.0f64;
            for (ci, &c) in center_indices.iter().enumerate() {
                let d = p.dist_sq(&pts[c]);
                if d < best {
                    best = d;
                    score = center_scores[ci];
                }
            }
            score
        })
        .collect();

    let object_score = center_scores.iter().copied().fold(0.0f64, f64::max);
    Ok(ScoreReport { center_indices, center_scores, per_point_scores, object_score })
}

const BANK_TENSOR: &str = "bank.vectors";

pub fn sidecar_meta_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.jsonl");
    PathBuf::from(os)
}

/// Persists the bank as a RIFW container plus a JSON-lines provenance
/// sidecar (`<path>.meta.jsonl`, one `{sample_id, center_index}` per line,
/// row-aligned with the vectors).
pub fn save_bank(bank: &MemoryBank, path: &Path) -> Result<()> {
    let tensor = Tensor::new(
        BANK_TENSOR,
        vec![bank.len() as u32, bank.dim() as u32],
        bank.data.clone(),
    );
    rifw::write(&[tensor], path)?;
    let mut meta = String::new();
    for p in bank.provenance() {
        meta.push_str(&serde_json::to_string(p).unwrap());
        meta.push('\n');
    }
    std::fs::write(sidecar_meta_path(path), meta)?;
    Ok(())
}

pub fn load_bank(path: &Path) -> Result<MemoryBank> {
    let tensors = rifw::read(path)?;
    let tensor = tensors
        .into_iter()
        .find(|t| t.name == BANK_TENSOR)
        .ok_or_else(|| Error::MissingTensor(BANK_TENSOR.into()))?;
    if tensor.dims.len() != 2 {
        return Err(Error::Shape(format!(
            "{BANK_TENSOR} must be rank 2, got rank {}",
            tensor.dims.len()
        )));
    }
    let (count, dim) = (tensor.dims[0] as usize, tensor.dims[1] as usize);
    let meta = std::fs::read_to_string(sidecar_meta_path(path))?;
    let provenance: Vec<Provenance> = meta
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| Error::Parse { line: 0, msg: format!("bad provenance line: {e}") })
        })
        .collect::<Result<_>>()?;
    if provenance.len() != count {
        return Err(Error::Shape(format!(
            "bank has {count} vectors but {} provenance rows",
            provenance.len()
        )));
    }
    Ok(MemoryBank { dim, data: tensor.data, provenance })
}
