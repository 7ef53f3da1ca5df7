//! Point Coordinate Mapping (PCM): a rigid canonicalization that makes the
//! coordinate representation of a cloud invariant to rotation and translation.
//!
//! The frame is built from three key displacement vectors about the centroid:
//! the farthest point, the next point (in descending centroid-distance order)
//! that is linearly independent of the first, and the nearest point that
//! completes a rank-3 triple. Gram-Schmidt turns the triple into an
//! orthonormal basis and every point is expressed in that basis, centered at
//! the centroid.
//!
//! All geometry is f64. Independence checks use a scale-relative tolerance:
//! a candidate counts as independent when its Gram-Schmidt residual against
//! the accepted vectors exceeds `1e-9 * diameter`, where `diameter` is the
//! bounding-sphere diameter about the centroid (twice the largest centroid
//! distance). Degenerate clouds are a hard error, never a fallback frame.

use crate::error::{Error, Result};

pub const RANK_TOLERANCE_FACTOR: f64 = 1e-9;

/// A 3D point (also used for displacement vectors).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn add(&self, o: &Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(&self, o: &Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, o: &Point3) -> f64 {
        self.sub(o).norm_sq()
    }

    pub fn dist(&self, o: &Point3) -> f64 {
        self.dist_sq(o).sqrt()
    }

    /// Total order on the coordinate tuple (x, then y, then z); used for
    /// deterministic tie-breaking.
    pub fn lex_cmp(&self, o: &Point3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.z.total_cmp(&o.z))
    }
}

/// An ordered list of points. Order is load order and every transform in this
/// crate preserves it.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        debug_assert!(points.iter().all(Point3::is_finite));
        PointCloud { points }
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Bounding-sphere diameter about the centroid: twice the largest
    /// centroid distance. Zero for a single point or all-coincident cloud.
    pub fn diameter_about(&self, c: &Point3) -> f64 {
        2.0 * self
            .points
            .iter()
            .map(|p| p.dist(c))
            .fold(0.0_f64, f64::max)
    }
}

impl FromIterator<Point3> for PointCloud {
    fn from_iter<T: IntoIterator<Item = Point3>>(iter: T) -> Self {
        PointCloud::new(iter.into_iter().collect())
    }
}

/// The three key displacement vectors with their source indices and the
/// tolerance under which the rank-3 property was certified.
#[derive(Debug, Clone, Copy)]
pub struct KeyVectors {
    pub u1: Point3,
    pub u2: Point3,
    pub u3: Point3,
    pub idx1: usize,
    pub idx2: usize,
    pub idx3: usize,
    pub tolerance: f64,
}

/// Centroid plus the orthonormal basis rows e1, e2, e3.
#[derive(Debug, Clone, Copy)]
pub struct CanonicalFrame {
    pub centroid: Point3,
    pub basis: [Point3; 3],
}

impl CanonicalFrame {
    /// det[e1; e2; e3]; +-1 up to round-off (reflections are not excluded).
    pub fn determinant(&self) -> f64 {
        self.basis[0].dot(&self.basis[1].cross(&self.basis[2]))
    }

    /// Largest entry-wise deviation of basis * basis^T from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut err = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let d = self.basis[i].dot(&self.basis[j]) - if i == j { 1.0 } else { 0.0 };
                err = err.max(d.abs());
            }
        }
        err
    }

    /// Expresses a point in this frame: ((p - c)·e1, (p - c)·e2, (p - c)·e3).
    pub fn to_local(&self, p: &Point3) -> Point3 {
        let r = p.sub(&self.centroid);
        Point3::new(r.dot(&self.basis[0]), r.dot(&self.basis[1]), r.dot(&self.basis[2]))
    }
}

/// A cloud expressed in its own canonical frame, together with that frame.
#[derive(Debug, Clone)]
pub struct MappedCloud {
    pub cloud: PointCloud,
    pub frame: CanonicalFrame,
}

/// Arithmetic mean of all points.
pub fn centroid(cloud: &PointCloud) -> Result<Point3> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut sum = Point3::ZERO;
    for p in cloud.points() {
        sum = sum.add(p);
    }
    Ok(sum.scale(1.0 / cloud.len() as f64))
}

/// Residual of `v` against an already-orthonormal set.
fn residual(v: &Point3, basis: &[Point3]) -> Point3 {
    let mut r = *v;
    for e in basis {
        r = r.sub(&e.scale(r.dot(e)));
    }
    r
}

/// Selects the three key displacement vectors.
///
/// u1 is the farthest point's displacement; u2 is found scanning in
/// descending centroid-distance order for the first candidate independent of
/// u1; u3 scans in ascending order (nearest first) for the first candidate
/// completing rank 3. Distance ties are broken by the lowest input index.
pub fn select_key_vectors(cloud: &PointCloud, c: Point3) -> Result<KeyVectors> {
    let n = cloud.len();
    if n < 3 {
        return Err(Error::DegenerateCloud { sample: None });
    }
    let pts = cloud.points();
    let disp: Vec<Point3> = pts.iter().map(|p| p.sub(&c)).collect();
    let d2: Vec<f64> = disp.iter().map(Point3::norm_sq).collect();

    // Descending distance, ties by lowest index.
    let mut desc: Vec<usize> = (0..n).collect();
    desc.sort_by(|&a, &b| d2[b].total_cmp(&d2[a]).then(a.cmp(&b)));

    let tol = RANK_TOLERANCE_FACTOR * cloud.diameter_about(&c);

    let idx1 = desc[0];
    let u1 = disp[idx1];
    if u1.norm() <= tol {
        return Err(Error::DegenerateCloud { sample: None });
    }
    let e1 = u1.scale(1.0 / u1.norm());

    let mut found2 = None;
    for &i in &desc[1..] {
        if residual(&disp[i], &[e1]).norm() > tol {
            found2 = Some(i);
            break;
        }
    }
    let idx2 = found2.ok_or(Error::DegenerateCloud { sample: None })?;
    let u2 = disp[idx2];
    let r2 = residual(&u2, &[e1]);
    let e2 = r2.scale(1.0 / r2.norm());

    // Ascending distance (nearest first), ties by lowest index.
    let mut asc: Vec<usize> = (0..n).collect();
    asc.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(a.cmp(&b)));

    let mut found3 = None;
    for &i in &asc {
        if residual(&disp[i], &[e1, e2]).norm() > tol {
            found3 = Some(i);
            break;
        }
    }
    let idx3 = found3.ok_or(Error::DegenerateCloud { sample: None })?;

    Ok(KeyVectors { u1, u2, u3: disp[idx3], idx1, idx2, idx3, tolerance: tol })
}

/// Gram-Schmidt orthonormalization of the key vectors.
///
/// e1 is parallel to u1; e2 lies in span(u1, u2) with u2·e2 > 0; u3·e3 > 0.
pub fn gram_schmidt(kv: &KeyVectors) -> Result<[Point3; 3]> {
    let tol = kv.tolerance;
    let n1 = kv.u1.norm();
    if n1 <= tol {
        return Err(Error::NumericallyDegenerate);
    }
    let e1 = kv.u1.scale(1.0 / n1);

    let v2 = residual(&kv.u2, &[e1]);
    let n2 = v2.norm();
    if n2 <= tol {
        return Err(Error::NumericallyDegenerate);
    }
    let e2 = v2.scale(1.0 / n2);

    let v3 = residual(&kv.u3, &[e1, e2]);
    let n3 = v3.norm();
    if n3 <= tol {
        return Err(Error::NumericallyDegenerate);
    }
    let e3 = v3.scale(1.0 / n3);

    Ok([e1, e2, e3])
}

/// Full canonicalization: centroid, key vectors, Gram-Schmidt, then the
/// per-point transform p* = (p - c)[e1; e2; e3]^T. Point order is preserved.
pub fn pcm_map(cloud: &PointCloud) -> Result<MappedCloud> {
    let c = centroid(cloud)?;
    let kv = select_key_vectors(cloud, c)?;
    let basis = gram_schmidt(&kv)?;
    let frame = CanonicalFrame { centroid: c, basis };
    let mapped = cloud.points().iter().map(|p| frame.to_local(p)).collect();
    Ok(MappedCloud { cloud: mapped, frame })
}

/// Rotation matrix (three row vectors) about a unit axis by `angle` radians,
/// via the Rodrigues formula.
pub fn rotation_about_axis(axis: Point3, angle: f64) -> [Point3; 3] {
    let k = axis.scale(1.0 / axis.norm());
    let (s, c) = angle.sin_cos();
    let one_c = 1.0 - c;
    // R = c*I + s*[k]_x + (1-c) k k^T, written out row by row.
    [
        Point3::new(
            c + k.x * k.x * one_c,
            k.x * k.y * one_c - k.z * s,
            k.x * k.z * one_c + k.y * s,
        ),
        Point3::new(
            k.y * k.x * one_c + k.z * s,
            c + k.y * k.y * one_c,
            k.y * k.z * one_c - k.x * s,
        ),
        Point3::new(
            k.z * k.x * one_c - k.y * s,
            k.z * k.y * one_c + k.x * s,
            c + k.z * k.z * one_c,
        ),
    ]
}

/// Applies p -> R p + t to every point.
pub fn apply_rigid(cloud: &PointCloud, rotation: &[Point3; 3], translation: Point3) -> PointCloud {
    cloud
        .points()
        .iter()
        .map(|p| {
            Point3::new(rotation[0].dot(p), rotation[1].dot(p), rotation[2].dot(p))
                .add(&translation)
        })
        .collect()
}
