//! Seeded synthetic defect dataset generator.
//!
//! Each category models one rigid product: a master sampling of a base shape
//! (unit sphere for even category indices, unit cube surface for odd ones)
//! plus three fixed anchor points that give the shape a distinct farthest
//! point, a distinct second-farthest point, and a distinct nearest-to-center
//! point. The anchors keep the canonical frame locked to the object geometry
//! across scans and are never touched by a defect. Every file is the master
//! cloud under fresh per-point scan jitter and a random rotation +
//! translation, so the dataset exercises the canonicalization end to end.
//!
//! Anomalous test samples carry exactly one defect: a Gaussian radial bump,
//! a dent (negative bump), or a crater (points near the defect center
//! removed, rim pushed outward). Ground-truth labels mark the displaced
//! points, all in region 1. Defect displacement (0.08) is an order of
//! magnitude above the scan jitter (0.006), mirroring datasets where defects
//! are large against sensor noise.
//!
//! Draw order is pinned. Master stream (seed, [category, 2]): the n-3
//! surface points. File stream (seed, [category, split, index]): jitter for
//! all n points (point-major, axis-minor), then for defect samples the
//! defect kind and centers until one touches at least `MIN_DEFECT_POINTS`
//! points, then the rotation axis (3 Gaussians), angle (1 uniform), and
//! translation (3 uniforms).

use std::fs;
use std::path::Path;

use crate::augment::RngStream;
use crate::error::Result;
use crate::geometry::{apply_rigid, rotation_about_axis, Point3, PointCloud};

use super::{read_dataset, write_labels, write_xyz, DatasetLayout, GroundTruth};

pub const DEFECT_HEIGHT: f64 = 0.08;
pub const BUMP_RADIUS: f64 = 0.2;
pub const BUMP_SIGMA: f64 = BUMP_RADIUS;
pub const CRATER_RADIUS: f64 = 0.15;
pub const CRATER_RIM_WIDTH: f64 = 0.05;
pub const SCAN_SIGMA: f64 = 0.006;
const MIN_DEFECT_POINTS: usize = 10;
const MASTER_SALT: u64 = 2;

/// Shape and size of the generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct GenSpec {
    pub categories: usize,
    pub train: usize,
    pub normal_test: usize,
    pub defect_test: usize,
    pub points: usize,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec { categories: 1, train: 4, normal_test: 5, defect_test: 5, points: 2048 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseShape {
    Sphere,
    CubeSurface,
}

impl BaseShape {
    /// Frame anchors: strictly farthest, strictly second-farthest (linearly
    /// independent), and strictly nearest to the center, with gaps far above
    /// the scan jitter and above any defect displacement.
    fn anchors(self) -> [Point3; 3] {
        match self {
            BaseShape::Sphere => [
                Point3::new(0.0, 0.0, 1.4),
                Point3::new(1.2, 0.0, 0.0),
                Point3::new(0.0, 0.3, 0.0),
            ],
            BaseShape::CubeSurface => [
                Point3::new(0.0, 0.0, 1.2),
                Point3::new(1.05, 0.0, 0.0),
                Point3::new(0.0, 0.2, 0.0),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefectKind {
    Bump,
    Dent,
    Crater,
}

/// One generated sample; `gt` is present for test samples only.
#[derive(Debug, Clone)]
pub struct SampleData {
    pub stem: String,
    pub cloud: PointCloud,
    pub gt: Option<GroundTruth>,
}

#[derive(Debug, Clone)]
pub struct CategoryData {
    pub name: String,
    pub train: Vec<SampleData>,
    pub test: Vec<SampleData>,
}

fn unit_direction(rng: &mut RngStream) -> Point3 {
    loop {
        let v = Point3::new(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
        let n = v.norm();
        if n > 1e-9 {
            return v.scale(1.0 / n);
        }
    }
}

fn surface_point(rng: &mut RngStream, shape: BaseShape) -> Point3 {
    match shape {
        BaseShape::Sphere => unit_direction(rng),
        BaseShape::CubeSurface => {
            let face = rng.next_u64() % 6;
            let u = rng.next_f64() - 0.5;
            let v = rng.next_f64() - 0.5;
            match face {
                0 => Point3::new(0.5, u, v),
                1 => Point3::new(-0.5, u, v),
                2 => Point3::new(u, 0.5, v),
                3 => Point3::new(u, -0.5, v),
                4 => Point3::new(u, v, 0.5),
                _ => Point3::new(u, v, -0.5),
            }
        }
    }
}

/// The category's nominal point set: n-3 surface samples plus the three
/// anchors at the end.
fn master_cloud(seed: u64, cat_index: usize, shape: BaseShape, n: usize) -> PointCloud {
    let mut rng = RngStream::derive(seed, &[cat_index as u64, MASTER_SALT]);
    let surface = n.saturating_sub(3);
    let mut points: Vec<Point3> = (0..surface).map(|_| surface_point(&mut rng, shape)).collect();
    points.extend(shape.anchors());
    PointCloud::new(points)
}

fn scan_jitter(cloud: &PointCloud, rng: &mut RngStream) -> PointCloud {
    cloud
        .points()
        .iter()
        .map(|p| {
            Point3::new(
                p.x + rng.next_gaussian() * SCAN_SIGMA,
                p.y + rng.next_gaussian() * SCAN_SIGMA,
                p.z + rng.next_gaussian() * SCAN_SIGMA,
            )
        })
        .collect()
}

/// Radial push away from the shape origin.
fn radial(p: &Point3) -> Point3 {
    let n = p.norm();
    if n > 1e-12 {
        p.scale(1.0 / n)
    } else {
        Point3::new(0.0, 0.0, 1.0)
    }
}

fn apply_defect(cloud: &PointCloud, kind: DefectKind, center: Point3) -> (PointCloud, Vec<u8>) {
    let mut points = Vec::with_capacity(cloud.len());
    let mut labels = Vec::with_capacity(cloud.len());
    for p in cloud.points() {
        let d = p.dist(&center);
        match kind {
            DefectKind::Bump | DefectKind::Dent => {
                if d <= BUMP_RADIUS {
                    let sign = if kind == DefectKind::Bump { 1.0 } else { -1.0 };
                    let w = (-d * d / (2.0 * BUMP_SIGMA * BUMP_SIGMA)).exp();
                    points.push(p.add(&radial(p).scale(sign * DEFECT_HEIGHT * w)));
                    labels.push(1);
                } else {
                    points.push(*p);
                    labels.push(0);
                }
            }
            DefectKind::Crater => {
                if d < CRATER_RADIUS {
                    continue; // removed
                }
                if d <= CRATER_RADIUS + CRATER_RIM_WIDTH {
                    points.push(p.add(&radial(p).scale(DEFECT_HEIGHT)));
                    labels.push(1);
                } else {
                    points.push(*p);
                    labels.push(0);
                }
            }
        }
    }
    (PointCloud::new(points), labels)
}

fn random_rigid(rng: &mut RngStream, cloud: &PointCloud) -> PointCloud {
    let axis = unit_direction(rng);
    let angle = rng.next_f64() * std::f64::consts::TAU;
    let rot = rotation_about_axis(axis, angle);
    let t = Point3::new(
        rng.next_range(-1.0, 1.0),
        rng.next_range(-1.0, 1.0),
        rng.next_range(-1.0, 1.0),
    );
    apply_rigid(cloud, &rot, t)
}

fn generate_sample(
    master: &PointCloud,
    seed: u64,
    cat_index: usize,
    split_salt: u64,
    file_index: usize,
    shape: BaseShape,
    defect: bool,
) -> (PointCloud, Option<GroundTruth>) {
    let mut rng = RngStream::derive(seed, &[cat_index as u64, split_salt, file_index as u64]);
    let scanned = scan_jitter(master, &mut rng);
    let (cloud, gt) = if defect {
        let kind = match rng.next_u64() % 3 {
            0 => DefectKind::Bump,
            1 => DefectKind::Dent,
            _ => DefectKind::Crater,
        };
        loop {
            let center = surface_point(&mut rng, shape);
            let (cloud, labels) = apply_defect(&scanned, kind, center);
            let hit = labels.iter().filter(|&&l| l == 1).count();
            if hit >= MIN_DEFECT_POINTS {
                let ids = labels.iter().map(|&l| u32::from(l == 1)).collect();
                let gt = GroundTruth { labels, region_ids: Some(ids) };
                break (cloud, Some(gt));
            }
        }
    } else {
        (scanned, None)
    };
    (random_rigid(&mut rng, &cloud), gt)
}

/// Generates one category fully in memory.
pub fn generate_category(seed: u64, spec: &GenSpec, cat_index: usize) -> CategoryData {
    let shape = if cat_index % 2 == 0 { BaseShape::Sphere } else { BaseShape::CubeSurface };
    let master = master_cloud(seed, cat_index, shape, spec.points);
    let train = (0..spec.train)
        .map(|i| {
            let (cloud, _) = generate_sample(&master, seed, cat_index, 0, i, shape, false);
            SampleData { stem: format!("train_{i:03}"), cloud, gt: None }
        })
        .collect();
    let test = (0..spec.normal_test + spec.defect_test)
        .map(|i| {
            let defect = i >= spec.normal_test;
            let (cloud, gt) = generate_sample(&master, seed, cat_index, 1, i, shape, defect);
            let gt = gt.unwrap_or_else(|| GroundTruth::all_normal(cloud.len()));
            SampleData { stem: format!("test_{i:03}"), cloud, gt: Some(gt) }
        })
        .collect();
    CategoryData { name: format!("cat{cat_index:03}"), train, test }
}

/// Writes the generated dataset under `root` and returns the layout read
/// back from disk.
pub fn gen_synthetic(seed: u64, spec: &GenSpec, root: &Path) -> Result<DatasetLayout> {
    for cat_index in 0..spec.categories {
        let cat = generate_category(seed, spec, cat_index);
        let dir = root.join(&cat.name);
        let train_dir = dir.join("train");
        let test_dir = dir.join("test");
        let gt_dir = dir.join("gt");
        fs::create_dir_all(&train_dir)?;
        fs::create_dir_all(&test_dir)?;
        fs::create_dir_all(&gt_dir)?;
        for s in &cat.train {
            write_xyz(&s.cloud, &train_dir.join(format!("{}.xyz", s.stem)))?;
        }
        for s in &cat.test {
            write_xyz(&s.cloud, &test_dir.join(format!("{}.xyz", s.stem)))?;
            if let Some(gt) = &s.gt {
                write_labels(gt, &gt_dir.join(format!("{}.txt", s.stem)))?;
            }
        }
    }
    read_dataset(root)
}
