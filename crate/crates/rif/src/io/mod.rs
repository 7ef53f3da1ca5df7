//! File formats and dataset layout: xyz/ply point clouds, per-point label
//! files, score reports, the RIFW tensor container, and the synthetic
//! dataset generator.
//!
//! Coordinates always parse into f64 regardless of the source precision, and
//! non-finite values are rejected at parse time.

pub mod ply;
pub mod rifw;
pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bank::ScoreReport;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Per-point ground-truth labels, optionally with explicit region ids
/// (positive only on anomalous points; 0 means background).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub labels: Vec<u8>,
    pub region_ids: Option<Vec<u32>>,
}

impl GroundTruth {
    pub fn all_normal(n: usize) -> Self {
        GroundTruth { labels: vec![0; n], region_ids: None }
    }
}

/// One point per line: three whitespace-separated decimals. Blank lines and
/// `#` comments are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut count = 0;
        for tok in line.split_whitespace() {
            if count == 3 {
                count += 1;
                break;
            }
            coords[count] = tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("expected a number, got {tok:?}"),
            })?;
            count += 1;
        }
        if count != 3 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected 3 coordinates per line, got {count}"),
            });
        }
        let p = Point3::new(coords[0], coords[1], coords[2]);
        if !p.is_finite() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "non-finite coordinate".into(),
            });
        }
        points.push(p);
    }
    Ok(PointCloud::new(points))
}

/// Shortest round-trip float formatting, one `x y z` line per point.
pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    fs::write(path, xyz_string(cloud))?;
    Ok(())
}

pub fn xyz_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in cloud.points() {
        let _ = writeln!(out, "{} {} {}", p.x, p.y, p.z);
    }
    out
}

/// One label per line (0 or 1), optionally followed by a region id. If any
/// anomalous line carries a region id, all of them must.
pub fn parse_labels(text: &str) -> Result<GroundTruth> {
    let mut labels = Vec::new();
    let mut ids: Vec<u32> = Vec::new();
    let mut saw_id = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().unwrap();
        let label: u8 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: format!("expected 0 or 1, got {label_tok:?}"),
        })?;
        if label > 1 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("labels must be 0 or 1, got {label}"),
            });
        }
        let id = match toks.next() {
            Some(tok) => {
                let id: u32 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected a region id, got {tok:?}"),
                })?;
                if label == 0 && id != 0 {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: "region id must be 0 on normal points".into(),
                    });
                }
                if label == 1 {
                    saw_id = true;
                }
                id
            }
            None => 0,
        };
        if toks.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "expected at most 2 columns".into(),
            });
        }
        labels.push(label);
        ids.push(id);
    }
    if saw_id {
        for (i, (&l, &id)) in labels.iter().zip(&ids).enumerate() {
            if l == 1 && id == 0 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "anomalous point without a region id in an id-bearing file".into(),
                });
            }
        }
        Ok(GroundTruth { labels, region_ids: Some(ids) })
    } else {
        Ok(GroundTruth { labels, region_ids: None })
    }
}

pub fn write_labels(gt: &GroundTruth, path: &Path) -> Result<()> {
    let mut out = String::new();
    match &gt.region_ids {
        Some(ids) => {
            for (l, id) in gt.labels.iter().zip(ids) {
                let _ = writeln!(out, "{l} {id}");
            }
        }
        None => {
            for l in &gt.labels {
                let _ = writeln!(out, "{l}");
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a cloud, dispatching on the file extension (`.xyz` or `.ply`).
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") | Some("txt") => parse_xyz(&fs::read_to_string(path)?),
        Some("ply") => ply::parse_ply(&fs::read(path)?),
        other => Err(Error::UnsupportedFormat(format!(
            "cloud file extension {other:?} (expected .xyz or .ply)"
        ))),
    }
}

/// Writes the per-point score CSV plus a JSON sidecar (`<path>.json`) with
/// the object score, the center arrays, and the effective config.
pub fn write_scores(report: &ScoreReport, config_echo: &serde_json::Value, path: &Path) -> Result<()> {
    let mut csv = String::from("point_index,score,is_center\n");
    let centers: std::collections::HashSet<usize> = report.center_indices.iter().copied().collect();
    for (i, s) in report.per_point_scores.iter().enumerate() {
        let flag = u8::from(centers.contains(&i));
        let _ = writeln!(csv, "{i},{s},{flag}");
    }
    fs::write(path, csv)?;
    let sidecar = serde_json::json!({
        "object_score": report.object_score,
        "center_indices": report.center_indices,
        "center_scores": report.center_scores,
        "config": config_echo,
    });
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar).unwrap() + "\n")?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

/// Reads back a score CSV + sidecar pair written by [`write_scores`].
pub fn read_scores(path: &Path) -> Result<(ScoreReport, serde_json::Value)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "point_index,score,is_center")) => {}
        _ => return Err(Error::Parse { line: 1, msg: "missing score CSV header".into() }),
    }
    let mut per_point = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse { line: lineno + 1, msg: "expected 3 CSV columns".into() });
        }
        let idx: usize = cols[0].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: "bad point index".into(),
        })?;
        if idx != per_point.len() {
            return Err(Error::Parse { line: lineno + 1, msg: "non-contiguous point index".into() });
        }
        let score: f64 = cols[1].parse().map_err(|_| Error::Parse {
            line: lineno + 1,
            msg: "bad score".into(),
        })?;
        per_point.push(score);
    }
    let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)
        .map_err(|e| Error::Parse { line: 0, msg: format!("bad sidecar JSON: {e}") })?;
    let center_indices: Vec<usize> = sidecar["center_indices"]
        .as_array()
        .ok_or(Error::Parse { line: 0, msg: "sidecar missing center_indices".into() })?
        .iter()
        .map(|v| v.as_u64().unwrap_or(0) as usize)
        .collect();
    let center_scores: Vec<f64> = sidecar["center_scores"]
        .as_array()
        .ok_or(Error::Parse { line: 0, msg: "sidecar missing center_scores".into() })?
        .iter()
        .map(|v| v.as_f64().unwrap_or(f64::NAN))
        .collect();
    let object_score = sidecar["object_score"]
        .as_f64()
        .ok_or(Error::Parse { line: 0, msg: "sidecar missing object_score".into() })?;
    let config = sidecar["config"].clone();
    Ok((ScoreReport { center_indices, center_scores, per_point_scores: per_point, object_score }, config))
}

/// A dataset on disk: `root/<category>/{train,test,gt}` with clouds in train
/// and test and per-point label files in gt matched by file stem.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub categories: Vec<CategoryLayout>,
}

#[derive(Debug, Clone)]
pub struct CategoryLayout {
    pub name: String,
    pub train: Vec<PathBuf>,
    pub test: Vec<TestEntry>,
}

#[derive(Debug, Clone)]
pub struct TestEntry {
    pub stem: String,
    pub cloud: PathBuf,
    /// Missing ground truth means the sample is implicitly all-normal.
    pub gt: Option<PathBuf>,
}

fn is_cloud_file(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("xyz") | Some("ply"))
}

fn cloud_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_file() && is_cloud_file(p))
        .collect();
    files.sort();
    let mut stems = std::collections::HashSet::new();
    for f in &files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if !stems.insert(stem.clone()) {
            return Err(Error::InvalidConfig(format!(
                "duplicate stem {stem:?} in {}",
                dir.display()
            )));
        }
    }
    Ok(files)
}

/// Scans a dataset root. Every immediate subdirectory containing a `train`
/// or `test` directory is a category.
pub fn read_dataset(root: &Path) -> Result<DatasetLayout> {
    if !root.is_dir() {
        return Err(Error::InvalidConfig(format!("{} is not a directory", root.display())));
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    let mut categories = Vec::new();
    for dir in dirs {
        let train_dir = dir.join("train");
        let test_dir = dir.join("test");
        if !train_dir.is_dir() && !test_dir.is_dir() {
            continue;
        }
        let name = dir.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let train = cloud_files(&train_dir)?;
        let gt_dir = dir.join("gt");
        let test = cloud_files(&test_dir)?
            .into_iter()
            .map(|cloud| {
                let stem = cloud.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
                let gt_path = gt_dir.join(format!("{stem}.txt"));
                TestEntry { stem, gt: gt_path.is_file().then_some(gt_path), cloud }
            })
            .collect();
        categories.push(CategoryLayout { name, train, test });
    }
    if categories.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no categories found under {}",
            root.display()
        )));
    }
    Ok(DatasetLayout { root: root.to_path_buf(), categories })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_xyz_two_points() {
        let c = parse_xyz("0 0 0\n1 0 0").unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.points()[1], Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn parse_xyz_skips_comments_and_blanks() {
        let c = parse_xyz("# c\n\n1 2 3").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.points()[0], Point3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn parse_xyz_wrong_column_count_reports_line() {
        match parse_xyz("1 2") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_xyz("1 2 3\n4 5 6 7") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_xyz_rejects_non_numeric_and_non_finite() {
        assert!(matches!(parse_xyz("a b c"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_xyz("1 2 inf"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_xyz("NaN 0 0"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn xyz_round_trip_is_lossless() {
        let c = parse_xyz("0.1 -2.25 3e-7\n1e300 -4.9406564584124654e-324 0").unwrap();
        let text = xyz_string(&c);
        let back = parse_xyz(&text).unwrap();
        assert_eq!(c.points(), back.points());
    }

    #[test]
    fn parse_labels_basic_and_with_region() {
        let gt = parse_labels("0\n1\n1").unwrap();
        assert_eq!(gt.labels, vec![0, 1, 1]);
        assert_eq!(gt.region_ids, None);

        let gt = parse_labels("0 0\n1 2").unwrap();
        assert_eq!(gt.labels, vec![0, 1]);
        assert_eq!(gt.region_ids, Some(vec![0, 2]));
    }

    #[test]
    fn parse_labels_rejects_invalid() {
        assert!(matches!(parse_labels("2"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_labels("0 3"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_labels("1 1 1"), Err(Error::Parse { line: 1, .. })));
        // id-bearing file with a bare anomalous line
        assert!(parse_labels("1 1\n1").is_err());
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.txt");
        let gt = GroundTruth { labels: vec![0, 1, 1, 0], region_ids: Some(vec![0, 1, 2, 0]) };
        write_labels(&gt, &path).unwrap();
        let back = parse_labels(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(gt, back);
    }

    #[test]
    fn scores_round_trip_and_golden_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let report = ScoreReport {
            center_indices: vec![2, 0],
            center_scores: vec![0.5, 0.25],
            per_point_scores: vec![0.25, 0.25, 0.5],
            object_score: 0.5,
        };
        let echo = serde_json::json!({"g": 2, "k": 2});
        write_scores(&report, &echo, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "point_index,score,is_center\n0,0.25,1\n1,0.25,0\n2,0.5,1\n");
        let (back, cfg) = read_scores(&path).unwrap();
        assert_eq!(back.per_point_scores, report.per_point_scores);
        assert_eq!(back.center_indices, report.center_indices);
        assert_eq!(back.center_scores, report.center_scores);
        assert_eq!(back.object_score, report.object_score);
        assert_eq!(cfg, echo);
    }

    #[test]
    fn empty_report_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let report = ScoreReport {
            center_indices: vec![],
            center_scores: vec![],
            per_point_scores: vec![],
            object_score: 0.0,
        };
        write_scores(&report, &serde_json::Value::Null, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "point_index,score,is_center\n");
    }
}
