//! A dependency-free handcrafted descriptor, mainly useful as a second
//! extractor behind the same interface.
//!
//! Layout (33 values): the three covariance eigenvalues of the local points
//! in descending order, mean and population std of the non-center member
//! distances, a 16-bin normalized histogram of those distances over
//! [0, max], and a 12-bin normalized histogram of elevation angles
//! asin(z/r) over [-pi/2, pi/2]. The center point (distance zero) is
//! excluded from the statistics and histograms.

use crate::sampling::Group;

use super::{FeatureExtractor, FeatureVector};

pub const BASELINE_DIM: usize = 33;

const DIST_BINS: usize = 16;
const ELEV_BINS: usize = 12;

/// Eigenvalues of a symmetric 3x3 matrix in descending order, via the
/// closed-form trigonometric method.
fn sym_eigenvalues3(m: [[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    if p1 == 0.0 {
        let mut d = [m[0][0], m[1][1], m[2][2]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let mut b = m;
    for (i, row) in b.iter_mut().enumerate() {
        row[i] -= q;
        for v in row.iter_mut() {
            *v /= p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

fn histogram(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0f64; bins];
    let mut count = 0usize;
    let span = hi - lo;
    for v in values {
        let bin = if span <= 0.0 {
            0
        } else {
            (((v - lo) / span * bins as f64).floor() as usize).min(bins - 1)
        };
        h[bin] += 1.0;
        count += 1;
    }
    if count > 0 {
        for b in &mut h {
            *b /= count as f64;
        }
    }
    h
}

/// The 33-dimensional handcrafted descriptor of a group.
pub fn baseline_descriptor(group: &Group) -> FeatureVector {
    let pts = &group.local_points;
    let n = pts.len();

    // covariance over all local points (the center contributes the origin)
    let mut mean = [0.0f64; 3];
    for p in pts {
        mean[0] += p.x;
        mean[1] += p.y;
        mean[2] += p.z;
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = [[0.0f64; 3]; 3];
    for p in pts {
        let d = [p.x - mean[0], p.y - mean[1], p.z - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n as f64;
        }
    }
    let evals = sym_eigenvalues3(cov);

    let mut out = Vec::with_capacity(BASELINE_DIM);
    out.extend(evals.iter().map(|&v| v as f32));

    // member statistics exclude the center itself (member 0, distance 0)
    let members = &pts[1.min(n)..];
    let dists: Vec<f64> = members.iter().map(|p| p.norm()).collect();
    if dists.is_empty() {
        out.extend(std::iter::repeat(0.0f32).take(2 + DIST_BINS + ELEV_BINS));
        return out;
    }
    let m = dists.len() as f64;
    let d_mean = dists.iter().sum::<f64>() / m;
    let d_var = dists.iter().map(|d| (d - d_mean).powi(2)).sum::<f64>() / m;
    out.push(d_mean as f32);
    out.push(d_var.sqrt() as f32);

    let d_max = dists.iter().copied().fold(0.0f64, f64::max);
    let dist_hist = histogram(dists.iter().copied(), 0.0, d_max, DIST_BINS);
    out.extend(dist_hist.iter().map(|&v| v as f32));

    let half_pi = std::f64::consts::FRAC_PI_2;
    let elevations = members.iter().map(|p| {
        let r = p.norm();
        if r > 0.0 {
            (p.z / r).clamp(-1.0, 1.0).asin()
        } else {
            0.0
        }
    });
    let elev_hist = histogram(elevations, -half_pi, half_pi, ELEV_BINS);
    out.extend(elev_hist.iter().map(|&v| v as f32));

    debug_assert_eq!(out.len(), BASELINE_DIM);
    out
}

/// Handcrafted extractor behind the common interface.
pub struct BaselineExtractor;

impl FeatureExtractor for BaselineExtractor {
    fn dim(&self) -> usize {
        BASELINE_DIM
    }

    fn name(&self) -> &'static str {
        "baseline"
    }

    fn extract(&self, group: &Group) -> crate::error::Result<FeatureVector> {
        Ok(baseline_descriptor(group))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::RngStream;
    use crate::geometry::Point3;

    fn group_from_locals(locals: &[(f64, f64, f64)]) -> Group {
        Group {
            center_index: 0,
            member_indices: (0..locals.len()).collect(),
            local_points: locals.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(),
        }
    }

    #[test]
    fn single_member_group_is_all_zero() {
        let g = group_from_locals(&[(0.0, 0.0, 0.0)]);
        let d = baseline_descriptor(&g);
        assert_eq!(d.len(), BASELINE_DIM);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    // Hand case: center plus two antipodal unit points. Both distances equal
    // the max, so the whole distance histogram mass lands in the top bin;
    // elevations are +-pi/2 (last and first bin); covariance of
    // {0, +z, -z} has eigenvalues {2/3, 0, 0}.
    #[test]
    fn antipodal_pair_golden() {
        let g = group_from_locals(&[(0.0, 0.0, 0.0), (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)]);
        let d = baseline_descriptor(&g);
        assert!((d[0] as f64 - 2.0 / 3.0).abs() < 1e-6);
        assert!(d[1].abs() < 1e-6);
        assert!(d[2].abs() < 1e-6);
        assert!((d[3] - 1.0).abs() < 1e-6); // mean distance
        assert!(d[4].abs() < 1e-6); // std
        let dist_hist = &d[5..5 + DIST_BINS];
        assert_eq!(dist_hist[DIST_BINS - 1], 1.0);
        assert!(dist_hist[..DIST_BINS - 1].iter().all(|&v| v == 0.0));
        let elev_hist = &d[5 + DIST_BINS..];
        assert_eq!(elev_hist[0], 0.5);
        assert_eq!(elev_hist[ELEV_BINS - 1], 0.5);
    }

    #[test]
    fn histograms_sum_to_one_for_multi_member_groups() {
        let mut rng = RngStream::new(17);
        for _ in 0..10 {
            let k = 2 + (rng.next_u64() % 30) as usize;
            let locals: Vec<(f64, f64, f64)> = std::iter::once((0.0, 0.0, 0.0))
                .chain((1..k).map(|_| {
                    (rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0), rng.next_range(-1.0, 1.0))
                }))
                .collect();
            let d = baseline_descriptor(&group_from_locals(&locals));
            let s_dist: f32 = d[5..5 + DIST_BINS].iter().sum();
            let s_elev: f32 = d[5 + DIST_BINS..].iter().sum();
            assert!((s_dist - 1.0).abs() < 1e-5);
            assert!((s_elev - 1.0).abs() < 1e-5);
        }
    }

    // The three symmetric functions (trace, Frobenius norm, determinant)
    // determine the eigenvalue multiset; checking them against the matrix is
    // an implementation-independent verification.
    #[test]
    fn eigenvalues_satisfy_invariant_identities() {
        let mut rng = RngStream::new(404);
        for _ in 0..50 {
            let a = rng.next_range(-2.0, 2.0);
            let b = rng.next_range(-2.0, 2.0);
            let c = rng.next_range(-2.0, 2.0);
            let d = rng.next_range(-2.0, 2.0);
            let e = rng.next_range(-2.0, 2.0);
            let f = rng.next_range(-2.0, 2.0);
            let m = [[a, d, e], [d, b, f], [e, f, c]];
            let ev = sym_eigenvalues3(m);
            assert!(ev[0] >= ev[1] && ev[1] >= ev[2]);
            let trace = a + b + c;
            assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-9 * trace.abs().max(1.0));
            let frob2: f64 = m.iter().flatten().map(|v| v * v).sum();
            let sum_sq: f64 = ev.iter().map(|v| v * v).sum();
            assert!((sum_sq - frob2).abs() < 1e-8 * frob2.max(1.0));
            let det = a * (b * c - f * f) - d * (d * c - f * e) + e * (d * f - b * e);
            let prod: f64 = ev.iter().product();
            assert!((prod - det).abs() < 1e-8 * det.abs().max(1.0));
        }
    }

    #[test]
    fn diagonal_matrix_eigenvalues_are_sorted_diagonal() {
        let ev = sym_eigenvalues3([[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, -2.0]]);
        assert_eq!(ev, [5.0, 1.0, -2.0]);
    }
}
