//! Farthest point sampling over a canonicalized cloud and k-nearest-neighbor
//! group extraction.
//!
//! Both operations are coordinate-deterministic: ties are broken by the
//! lexicographic coordinate tuple, then by the lowest index, so outputs
//! depend only on the (canonical) coordinates, not on thread scheduling.

use crate::geometry::{Point3, PointCloud};

/// Ordered FPS center indices into the sampled cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FpsResult {
    pub center_indices: Vec<usize>,
}

/// An FPS center with its K nearest members (the center itself first),
/// ordered by ascending distance. `local_points` are member coordinates
/// relative to the center.
#[derive(Debug, Clone)]
pub struct Group {
    pub center_index: usize,
    pub member_indices: Vec<usize>,
    pub local_points: Vec<Point3>,
}

/// True when candidate (d2, point, index) beats the incumbent under the
/// max-distance / min-lex-coords / min-index rule.
fn beats(cand: (f64, &Point3, usize), best: (f64, &Point3, usize)) -> bool {
    match cand.0.total_cmp(&best.0) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match cand.1.lex_cmp(best.1) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => cand.2 < best.2,
        },
    }
}

/// Greedy max-min farthest point sampling.
///
/// The seed is the point farthest from the origin (the mapped centroid), so
/// the selection is independent of input point order. Each following center
/// maximizes the minimum distance to the chosen set. Requesting more centers
/// than points returns all indices.
pub fn fps(cloud: &PointCloud, count: usize) -> FpsResult {
    let pts = cloud.points();
    let n = pts.len();
    let g = count.min(n);
    if g == 0 {
        return FpsResult { center_indices: Vec::new() };
    }

    let origin = Point3::ZERO;
    let mut best = (pts[0].dist_sq(&origin), &pts[0], 0usize);
    for (i, p) in pts.iter().enumerate().skip(1) {
        let cand = (p.dist_sq(&origin), p, i);
        if beats(cand, best) {
            best = cand;
        }
    }
    let seed = best.2;

    let mut centers = Vec::with_capacity(g);
    let mut selected = vec![false; n];
    centers.push(seed);
    selected[seed] = true;
    let mut min_d2: Vec<f64> = pts.iter().map(|p| p.dist_sq(&pts[seed])).collect();

    while centers.len() < g {
        let mut best: Option<(f64, &Point3, usize)> = None;
        for (i, p) in pts.iter().enumerate() {
            if selected[i] {
                continue;
            }
            let cand = (min_d2[i], p, i);
            match best {
                None => best = Some(cand),
                Some(b) if beats(cand, b) => best = Some(cand),
                _ => {}
            }
        }
        let next = best.expect("g <= n leaves at least one unselected point").2;
        centers.push(next);
        selected[next] = true;
        for (i, p) in pts.iter().enumerate() {
            let d = p.dist_sq(&pts[next]);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }

    FpsResult { center_indices: centers }
}

/// The K nearest points to `center_index` (the center itself always first),
/// with ties beyond the center broken by lexicographic coordinates then
/// lowest index. K larger than the cloud truncates to all points.
pub fn knn_group(cloud: &PointCloud, center_index: usize, k: usize) -> Group {
    let pts = cloud.points();
    let n = pts.len();
    let center = pts[center_index];
    let take = k.min(n);

    let mut others: Vec<usize> = (0..n).filter(|&i| i != center_index).collect();
    others.sort_by(|&a, &b| {
        pts[a]
            .dist_sq(&center)
            .total_cmp(&pts[b].dist_sq(&center))
            .then(pts[a].lex_cmp(&pts[b]))
            .then(a.cmp(&b))
    });

    let mut member_indices = Vec::with_capacity(take);
    member_indices.push(center_index);
    member_indices.extend(others.into_iter().take(take.saturating_sub(1)));

    let local_points = member_indices.iter().map(|&i| pts[i].sub(&center)).collect();
    Group { center_index, member_indices, local_points }
}
