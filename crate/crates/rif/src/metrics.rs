//! Threshold-free evaluation: pixel/object AUROC and AUPRO.
//!
//! AUROC is the tie-averaged Mann-Whitney rank statistic. AUPRO sweeps
//! thresholds over the union of scores (descending); at each it pools false
//! positives over all normal points and averages per-region overlap, then
//! integrates PRO over FPR in [0, fpr_cap] by trapezoid and normalizes by
//! the cap. Between FPR 0 and the first operating point the curve is taken
//! as constant at the first PRO value (every admitted point set below the
//! top threshold is already on the curve; nothing exists to interpolate
//! toward at FPR 0).
//!
//! Object-level AUPRO has no regions to overlap, so it is reported as the
//! partial AUROC at the cap, normalized; reports echo that interpretation.

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::io::GroundTruth;

/// Scores with parallel binary labels (1 = anomalous).
#[derive(Debug, Clone)]
pub struct LabeledScores {
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

impl LabeledScores {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() || scores.is_empty() {
            return Err(Error::Shape(format!(
                "scores ({}) and labels ({}) must be equal-length and non-empty",
                scores.len(),
                labels.len()
            )));
        }
        Ok(LabeledScores { scores, labels })
    }
}

/// Tie-averaged rank AUROC.
pub fn auroc(ls: &LabeledScores) -> Result<f64> {
    let n = ls.scores.len();
    let n1 = ls.labels.iter().filter(|&&l| l == 1).count();
    let n0 = n - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ls.scores[a].total_cmp(&ls.scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ls.scores[order[j + 1]] == ls.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if ls.labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(u / (n1 as f64 * n0 as f64))
}

/// A polyline with non-decreasing x, trapezoid-integrated over [0, cap] and
/// normalized by the cap. The curve is extended as constant beyond its last
/// point.
fn partial_area(points: &[(f64, f64)], cap: f64) -> f64 {
    let mut area = 0.0f64;
    let mut prev = points[0];
    for &(x, y) in &points[1..] {
        if x >= cap {
            let y_cap = if x > prev.0 {
                prev.1 + (y - prev.1) * (cap - prev.0) / (x - prev.0)
            } else {
                y
            };
            area += (cap - prev.0) * (prev.1 + y_cap) / 2.0;
            return area / cap;
        }
        area += (x - prev.0) * (prev.1 + y) / 2.0;
        prev = (x, y);
    }
    area += (cap - prev.0) * prev.1;
    area / cap
}

fn check_cap(fpr_cap: f64) -> Result<()> {
    if !(fpr_cap > 0.0 && fpr_cap <= 1.0) {
        return Err(Error::InvalidConfig(format!("fpr_cap must be in (0, 1], got {fpr_cap}")));
    }
    Ok(())
}

/// Partial AUROC: ROC integrated over FPR in [0, cap], normalized by the
/// cap. Equal scores enter together, so ties trace diagonal segments and the
/// cap-1 value matches the rank statistic.
pub fn partial_auroc(ls: &LabeledScores, fpr_cap: f64) -> Result<f64> {
    check_cap(fpr_cap)?;
    let n1 = ls.labels.iter().filter(|&&l| l == 1).count();
    let n0 = ls.labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both classes"));
    }
    let mut order: Vec<usize> = (0..ls.scores.len()).collect();
    order.sort_by(|&a, &b| ls.scores[b].total_cmp(&ls.scores[a]));
    let mut curve = vec![(0.0f64, 0.0f64)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && ls.scores[order[j + 1]] == ls.scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if ls.labels[idx] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        curve.push((fp as f64 / n0 as f64, tp as f64 / n1 as f64));
        i = j + 1;
    }
    Ok(partial_area(&curve, fpr_cap))
}

/// Per-sample input to [`aupro`]: dense point scores, disjoint anomalous
/// regions (point index sets), and the normal-point mask.
#[derive(Debug, Clone)]
pub struct AuproSample {
    pub scores: Vec<f64>,
    pub regions: Vec<Vec<usize>>,
    pub normal_mask: Vec<bool>,
}

/// Area under the per-region-overlap curve up to `fpr_cap`, normalized.
pub fn aupro(samples: &[AuproSample], fpr_cap: f64) -> Result<f64> {
    check_cap(fpr_cap)?;
    // tag 0 = normal point, tag r+1 = member of flattened region r
    let mut region_sizes: Vec<usize> = Vec::new();
    let mut events: Vec<(f64, u32)> = Vec::new();
    let mut normal_total = 0usize;
    for s in samples {
        let mut tag = vec![u32::MAX; s.scores.len()];
        for region in &s.regions {
            if region.is_empty() {
                continue;
            }
            let id = region_sizes.len() as u32;
            region_sizes.push(region.len());
            for &p in region {
                tag[p] = id + 1;
            }
        }
        for (i, &is_normal) in s.normal_mask.iter().enumerate() {
            if is_normal {
                tag[i] = 0;
                normal_total += 1;
            }
        }
        for (i, &t) in tag.iter().enumerate() {
            if t != u32::MAX {
                events.push((s.scores[i], t));
            }
        }
    }
    if region_sizes.is_empty() {
        return Err(Error::UndefinedMetric("AUPRO needs at least one region"));
    }
    if normal_total == 0 {
        return Err(Error::UndefinedMetric("AUPRO needs normal points for the FPR axis"));
    }

    events.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut hits = vec![0usize; region_sizes.len()];
    let mut fp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < events.len() {
        let mut j = i;
        while j + 1 < events.len() && events[j + 1].0 == events[i].0 {
            j += 1;
        }
        for &(_, tag) in &events[i..=j] {
            if tag == 0 {
                fp += 1;
            } else {
                hits[(tag - 1) as usize] += 1;
            }
        }
        let fpr = fp as f64 / normal_total as f64;
        let pro = hits
            .iter()
            .zip(&region_sizes)
            .map(|(&h, &s)| h as f64 / s as f64)
            .sum::<f64>()
            / region_sizes.len() as f64;
        curve.push((fpr, pro));
        i = j + 1;
    }

    let mut points = Vec::with_capacity(curve.len() + 1);
    points.push((0.0, curve[0].1));
    points.extend(curve);
    Ok(partial_area(&points, fpr_cap))
}

/// Rule used to construct regions when ground truth has no explicit ids.
pub const REGION_RULE: &str =
    "explicit region ids when present; otherwise connected components of anomalous points \
     within 2x the median nearest-neighbor spacing";

/// Builds anomalous regions for a sample: explicit ids take precedence,
/// otherwise connected components under a radius graph with radius twice the
/// median nearest-neighbor spacing of the whole sample.
pub fn regions_from_ground_truth(cloud: &PointCloud, gt: &GroundTruth) -> Vec<Vec<usize>> {
    if let Some(ids) = &gt.region_ids {
        let mut by_id: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (i, (&id, &label)) in ids.iter().zip(&gt.labels).enumerate() {
            if label == 1 && id > 0 {
                by_id.entry(id).or_default().push(i);
            }
        }
        return by_id.into_values().collect();
    }
    let anomalous: Vec<usize> = gt
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 1)
        .map(|(i, _)| i)
        .collect();
    if anomalous.is_empty() {
        return Vec::new();
    }
    let radius = 2.0 * median_nn_spacing(cloud);
    let r2 = radius * radius;
    let pts = cloud.points();
    let mut assigned = vec![false; anomalous.len()];
    let mut regions = Vec::new();
    for start in 0..anomalous.len() {
        if assigned[start] {
            continue;
        }
        let mut component = vec![start];
        assigned[start] = true;
        let mut queue = vec![start];
        while let Some(cur) = queue.pop() {
            for other in 0..anomalous.len() {
                if !assigned[other]
                    && pts[anomalous[cur]].dist_sq(&pts[anomalous[other]]) <= r2
                {
                    assigned[other] = true;
                    component.push(other);
                    queue.push(other);
                }
            }
        }
        let mut region: Vec<usize> = component.into_iter().map(|k| anomalous[k]).collect();
        region.sort_unstable();
        regions.push(region);
    }
    regions
}

/// Median over points of the distance to the nearest other point.
fn median_nn_spacing(cloud: &PointCloud) -> f64 {
    let pts = cloud.points();
    let n = pts.len();
    if n < 2 {
        return 0.0;
    }
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| pts[i].dist_sq(&pts[j]))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    nearest.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        nearest[n / 2]
    } else {
        (nearest[n / 2 - 1] + nearest[n / 2]) / 2.0
    }
}

/// Everything evaluation needs from one scored test sample.
#[derive(Debug, Clone)]
pub struct SampleEval {
    pub per_point_scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub regions: Vec<Vec<usize>>,
    pub object_score: f64,
    pub object_label: u8,
}

/// The four metrics plus the configuration echoed for reproducibility.
/// Metrics a dataset cannot define (single-class, no regions) are null.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricReport {
    pub p_auroc: Option<f64>,
    pub o_auroc: Option<f64>,
    pub p_aupro: Option<f64>,
    pub o_aupro: Option<f64>,
    pub fpr_cap: f64,
    pub region_rule: String,
    pub o_aupro_rule: String,
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Pools per-point scores for the pixel metrics and object scores for the
/// object metrics.
pub fn evaluate(samples: &[SampleEval], fpr_cap: f64) -> Result<MetricReport> {
    check_cap(fpr_cap)?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig("evaluation needs at least one sample".into()));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.per_point_scores.len() != s.labels.len() {
            return Err(Error::Shape(format!(
                "sample {i}: {} scores but {} labels",
                s.per_point_scores.len(),
                s.labels.len()
            )));
        }
    }

    let pooled_scores: Vec<f64> =
        samples.iter().flat_map(|s| s.per_point_scores.iter().copied()).collect();
    let pooled_labels: Vec<u8> = samples.iter().flat_map(|s| s.labels.iter().copied()).collect();
    let p_auroc = defined(
        LabeledScores::new(pooled_scores, pooled_labels).and_then(|ls| auroc(&ls)),
    )?;

    let object_scores: Vec<f64> = samples.iter().map(|s| s.object_score).collect();
    let object_labels: Vec<u8> = samples.iter().map(|s| s.object_label).collect();
    let o_auroc = defined(
        LabeledScores::new(object_scores.clone(), object_labels.clone()).and_then(|ls| auroc(&ls)),
    )?;

    let aupro_samples: Vec<AuproSample> = samples
        .iter()
        .map(|s| AuproSample {
            scores: s.per_point_scores.clone(),
            regions: s.regions.clone(),
            normal_mask: s.labels.iter().map(|&l| l == 0).collect(),
        })
        .collect();
    let p_aupro = defined(aupro(&aupro_samples, fpr_cap))?;

    let o_aupro = defined(
        LabeledScores::new(object_scores, object_labels)
            .and_then(|ls| partial_auroc(&ls, fpr_cap)),
    )?;

    Ok(MetricReport {
        p_auroc,
        o_auroc,
        p_aupro,
        o_aupro,
        fpr_cap,
        region_rule: REGION_RULE.to_string(),
        o_aupro_rule: "partial AUROC of object scores at fpr_cap, normalized".to_string(),
    })
}
