//! Implementations behind the CLI subcommands. Everything here is a plain
//! function over paths and [`RunConfig`] so the test suites can drive the
//! pipeline without spawning processes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rif::augment::{s3da, RngStream};
use rif::bank::{self, MemoryBank, ScoreReport};
use rif::error::{Error, Result};
use rif::features::FeatureExtractor;
use rif::geometry::{pcm_map, PointCloud};
use rif::io::{self, CategoryLayout, GroundTruth};
use rif::metrics::{evaluate, regions_from_ground_truth, MetricReport, SampleEval};
use rif::sampling::{fps, knn_group};

use crate::config::RunConfig;

/// Nine-significant-digit float formatting with sub-tolerance snapping to
/// zero, so canonicalized outputs are byte-comparable across rigid motions
/// of the input.
fn format_canonical(v: f64, snap_tol: f64) -> String {
    let v = if v.abs() < snap_tol { 0.0 } else { v };
    format!("{v:.8e}")
}

/// Canonicalizes one cloud file. Returns the text written to `output` plus a
/// human-readable frame summary.
pub fn cmd_pcm(input: &Path, output: &Path) -> Result<String> {
    let cloud = io::load_cloud(input)?;
    let mapped = pcm_map(&cloud)?;
    let snap_tol = 1e-9 * mapped.cloud.diameter_about(&rif::geometry::Point3::ZERO);
    let mut text = String::new();
    for p in mapped.cloud.points() {
        let _ = writeln!(
            text,
            "{} {} {}",
            format_canonical(p.x, snap_tol),
            format_canonical(p.y, snap_tol),
            format_canonical(p.z, snap_tol)
        );
    }
    std::fs::write(output, &text)?;
    let f = &mapped.frame;
    let mut summary = String::new();
    let _ = writeln!(summary, "centroid: {} {} {}", f.centroid.x, f.centroid.y, f.centroid.z);
    for (i, e) in f.basis.iter().enumerate() {
        let _ = writeln!(summary, "e{}: {} {} {}", i + 1, e.x, e.y, e.z);
    }
    let _ = writeln!(summary, "det: {}", f.determinant());
    Ok(summary)
}

/// Applies the scale/jitter/zero augmentation with the configured stream.
pub fn cmd_augment(input: &Path, output: &Path, cfg: &RunConfig) -> Result<String> {
    let cloud = io::load_cloud(input)?;
    let mut rng = RngStream::new(cfg.seed);
    let out = s3da(&cloud, &mut rng, &cfg.s3da);
    io::write_xyz(&out, output)?;
    Ok(format!("augmented {} points (seed {})\n", out.len(), cfg.seed))
}

/// Picks the requested category, or the only one present.
pub fn select_category<'a>(
    layout: &'a io::DatasetLayout,
    category: Option<&str>,
) -> Result<&'a CategoryLayout> {
    match category {
        Some(name) => layout
            .categories
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::InvalidConfig(format!("no category named {name:?}"))),
        None if layout.categories.len() == 1 => Ok(&layout.categories[0]),
        None => Err(Error::InvalidConfig(format!(
            "dataset has {} categories; pick one with --category ({})",
            layout.categories.len(),
            layout.categories.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn load_train_clouds(cat: &CategoryLayout) -> Result<Vec<(String, PointCloud)>> {
    if cat.train.is_empty() {
        return Err(Error::InvalidConfig(format!("category {} has no training clouds", cat.name)));
    }
    cat.train
        .iter()
        .map(|path| {
            let stem =
                path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            Ok((stem, io::load_cloud(path)?))
        })
        .collect()
}

pub fn cmd_build_bank(
    dataset: &Path,
    category: Option<&str>,
    output: &Path,
    cfg: &RunConfig,
) -> Result<String> {
    let layout = io::read_dataset(dataset)?;
    let cat = select_category(&layout, category)?;
    let clouds = load_train_clouds(cat)?;
    let extractor = cfg.build_extractor()?;
    let bank = bank::build_bank(&clouds, extractor.as_ref(), cfg.g, cfg.k)?;
    bank::save_bank(&bank, output)?;
    Ok(format!(
        "bank: {} vectors x {} dims from {} samples ({} bytes)\n",
        bank.len(),
        bank.dim(),
        clouds.len(),
        bank.memory_bytes()
    ))
}

pub fn cmd_score(
    bank_path: &Path,
    input: &Path,
    output: &Path,
    cfg: &RunConfig,
) -> Result<String> {
    let bank = bank::load_bank(bank_path)?;
    let cloud = io::load_cloud(input)?;
    let extractor = cfg.build_extractor()?;
    let report = bank::score_sample(&bank, &cloud, extractor.as_ref(), cfg.g, cfg.k)?;
    io::write_scores(&report, &cfg.echo(), output)?;
    Ok(format!("object_score: {}\n", report.object_score))
}

fn ground_truth_for(entry: &io::TestEntry, n_points: usize) -> Result<GroundTruth> {
    let gt = match &entry.gt {
        Some(path) => io::parse_labels(&std::fs::read_to_string(path)?)?,
        None => GroundTruth::all_normal(n_points),
    };
    if gt.labels.len() != n_points {
        return Err(Error::Shape(format!(
            "sample {}: {} labels for {} points",
            entry.stem,
            gt.labels.len(),
            n_points
        )));
    }
    Ok(gt)
}

/// Scores the whole test split of a category and computes the metric report.
pub fn evaluate_category(
    cat: &CategoryLayout,
    bank: &MemoryBank,
    extractor: &dyn FeatureExtractor,
    cfg: &RunConfig,
) -> Result<(MetricReport, Vec<(String, ScoreReport)>)> {
    if cat.test.is_empty() {
        return Err(Error::InvalidConfig(format!("category {} has no test clouds", cat.name)));
    }
    let mut samples = Vec::with_capacity(cat.test.len());
    let mut reports = Vec::with_capacity(cat.test.len());
    for entry in &cat.test {
        let cloud = io::load_cloud(&entry.cloud)?;
        let report = bank::score_sample(bank, &cloud, extractor, cfg.g, cfg.k)?;
        let gt = ground_truth_for(entry, cloud.len())?;
        let regions = regions_from_ground_truth(&cloud, &gt);
        let object_label = u8::from(gt.labels.iter().any(|&l| l == 1));
        samples.push(SampleEval {
            per_point_scores: report.per_point_scores.clone(),
            labels: gt.labels,
            regions,
            object_score: report.object_score,
            object_label,
        });
        reports.push((entry.stem.clone(), report));
    }
    let metrics = evaluate(&samples, cfg.fpr_cap)?;
    Ok((metrics, reports))
}

/// The evaluate command's primary output: the metric report with the
/// effective configuration attached.
pub fn evaluation_json(metrics: &MetricReport, cfg: &RunConfig) -> Result<String> {
    #[derive(serde::Serialize)]
    struct EvalOutput<'a> {
        #[serde(flatten)]
        metrics: &'a MetricReport,
        config: serde_json::Value,
    }
    let out = EvalOutput { metrics, config: cfg.echo() };
    serde_json::to_string_pretty(&out)
        .map(|s| s + "\n")
        .map_err(|e| Error::Internal(format!("serializing report: {e}")))
}

pub fn cmd_evaluate(
    dataset: &Path,
    category: Option<&str>,
    bank_path: &Path,
    output: &Path,
    cfg: &RunConfig,
) -> Result<String> {
    let layout = io::read_dataset(dataset)?;
    let cat = select_category(&layout, category)?;
    let bank = bank::load_bank(bank_path)?;
    let extractor = cfg.build_extractor()?;
    let (metrics, _) = evaluate_category(cat, &bank, extractor.as_ref(), cfg)?;
    let json = evaluation_json(&metrics, cfg)?;
    std::fs::write(output, &json)?;
    Ok(json)
}

#[derive(Debug, serde::Serialize)]
pub struct BenchReport {
    pub stages: BenchStages,
    pub samples: usize,
    pub per_sample_s: f64,
    pub throughput_samples_per_s: f64,
    pub bank_vectors: usize,
    pub bank_dim: usize,
    pub bank_memory_bytes: usize,
    pub config: serde_json::Value,
}

#[derive(Debug, serde::Serialize)]
pub struct BenchStages {
    pub load_s: f64,
    pub pcm_s: f64,
    pub group_s: f64,
    pub extract_s: f64,
    pub score_s: f64,
}

/// Runs the full pipeline over one category with per-stage wall timing.
/// Reporting only; nothing here asserts a threshold.
pub fn cmd_bench(dataset: &Path, category: Option<&str>, cfg: &RunConfig) -> Result<BenchReport> {
    let layout = io::read_dataset(dataset)?;
    let cat = select_category(&layout, category)?;
    let extractor = cfg.build_extractor()?;

    let t = Instant::now();
    let train = load_train_clouds(cat)?;
    let test: Vec<PointCloud> =
        cat.test.iter().map(|e| io::load_cloud(&e.cloud)).collect::<Result<_>>()?;
    let load_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let train_mapped: Vec<PointCloud> = train
        .iter()
        .map(|(id, c)| {
            pcm_map(c).map(|m| m.cloud).map_err(|e| match e {
                Error::DegenerateCloud { .. } => {
                    Error::DegenerateCloud { sample: Some(id.clone()) }
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let test_mapped: Vec<PointCloud> =
        test.iter().map(|c| pcm_map(c).map(|m| m.cloud)).collect::<Result<_>>()?;
    let pcm_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let group_of = |mapped: &PointCloud| -> Vec<rif::sampling::Group> {
        fps(mapped, cfg.g)
            .center_indices
            .iter()
            .map(|&c| knn_group(mapped, c, cfg.k))
            .collect()
    };
    let train_groups: Vec<Vec<rif::sampling::Group>> = train_mapped.iter().map(group_of).collect();
    let test_groups: Vec<Vec<rif::sampling::Group>> = test_mapped.iter().map(group_of).collect();
    let group_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    use rayon::prelude::*;
    let mut bank = MemoryBank::new(extractor.dim());
    for (ci, groups) in train_groups.iter().enumerate() {
        let features: Result<Vec<_>> =
            groups.par_iter().map(|g| extractor.extract(g)).collect();
        for (g, f) in groups.iter().zip(features?) {
            bank.push(
                &f,
                rif::bank::Provenance {
                    sample_id: train[ci].0.clone(),
                    center_index: g.center_index,
                },
            )?;
        }
    }
    let test_features: Vec<Vec<Vec<f32>>> = test_groups
        .iter()
        .map(|groups| {
            groups.par_iter().map(|g| extractor.extract(g)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let extract_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut scored = 0usize;
    for features in &test_features {
        for f in features {
            let _ = bank::nn_distance(&bank, f)?;
            scored += 1;
        }
    }
    let score_s = t.elapsed().as_secs_f64();
    let _ = scored;

    let samples = train.len() + test.len();
    let total = load_s + pcm_s + group_s + extract_s + score_s;
    Ok(BenchReport {
        stages: BenchStages { load_s, pcm_s, group_s, extract_s, score_s },
        samples,
        per_sample_s: total / samples as f64,
        throughput_samples_per_s: samples as f64 / total,
        bank_vectors: bank.len(),
        bank_dim: bank.dim(),
        bank_memory_bytes: bank.memory_bytes(),
        config: cfg.echo(),
    })
}

pub fn cmd_gen_synthetic(
    seed: u64,
    spec: &rif::io::synth::GenSpec,
    output: &Path,
) -> Result<String> {
    let layout = rif::io::synth::gen_synthetic(seed, spec, output)?;
    let clouds: usize =
        layout.categories.iter().map(|c| c.train.len() + c.test.len()).sum();
    let gts: usize = layout
        .categories
        .iter()
        .map(|c| c.test.iter().filter(|t| t.gt.is_some()).count())
        .sum();
    Ok(format!(
        "generated {} categories, {clouds} clouds, {gts} ground-truth files under {}\n",
        layout.categories.len(),
        output.display()
    ))
}

/// Builds the rayon pool for the configured thread count and runs `f`
/// inside it. Zero means rayon's default (all cores).
pub fn with_thread_pool<T: Send>(
    threads: usize,
    f: impl FnOnce() -> Result<T> + Send,
) -> Result<T> {
    if threads == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(f)
}

/// Stable file path helper for commands writing next to their input.
pub fn sibling_with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}
