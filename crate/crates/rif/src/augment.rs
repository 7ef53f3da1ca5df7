//! Spatial 3D data augmentation: per-axis random scaling, clipped Gaussian
//! jitter, and random point zeroing, composed as Z(J(S(P))) on one shared
//! random stream.
//!
//! The random stream is pinned to SplitMix64 so that augmented outputs are
//! reproducible across runs, threads, and implementations.

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Deterministic SplitMix64 stream.
///
/// Uniform doubles are `output / 2^64` in [0,1); Gaussians come from
/// Box-Muller on two consecutive uniforms (cosine branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { state: seed }
    }

    /// Independent stream for parallel work: the base seed is mixed with each
    /// salt in turn, so `(base_seed, sample_index)` &c. yield disjoint streams.
    pub fn derive(base_seed: u64, salts: &[u64]) -> Self {
        let mut s = base_seed;
        for &salt in salts {
            s = mix64(s ^ salt);
        }
        RngStream::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        mix64(self.state)
    }

    /// Uniform in [0,1).
    pub fn next_f64(&mut self) -> f64 {
        self.next_u64() as f64 / 18_446_744_073_709_551_616.0
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.next_f64() * (hi - lo)
    }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    pub fn next_gaussian(&mut self) -> f64 {
        let a = self.next_f64();
        let b = self.next_f64();
        // `a` can round to 1.0 once in ~2^53 draws; keep the log argument positive.
        let mut u = 1.0 - a;
        if u <= 0.0 {
            u = 2.0_f64.powi(-64);
        }
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
    }
}

fn mix64(x: u64) -> u64 {
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Parameters for the scale/jitter/zero composition.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct S3daConfig {
    pub scale_low: f64,
    pub scale_high: f64,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
    pub zero_fraction: f64,
}

impl Default for S3daConfig {
    fn default() -> Self {
        S3daConfig {
            scale_low: 0.8,
            scale_high: 1.2,
            jitter_sigma: 0.01,
            jitter_clip: 0.05,
            zero_fraction: 0.05,
        }
    }
}

impl S3daConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_low > 0.0 && self.scale_low <= self.scale_high) {
            return Err(Error::InvalidConfig(format!(
                "scale bounds must satisfy 0 < low <= high, got [{}, {}]",
                self.scale_low, self.scale_high
            )));
        }
        if self.jitter_sigma < 0.0 || self.jitter_clip < 0.0 {
            return Err(Error::InvalidConfig(
                "jitter_sigma and jitter_clip must be non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.zero_fraction) {
            return Err(Error::InvalidConfig(format!(
                "zero_fraction must be in [0,1), got {}",
                self.zero_fraction
            )));
        }
        Ok(())
    }
}

/// Anisotropic scaling: one factor per axis, drawn uniform in
/// [scale_low, scale_high] in axis order x, y, z.
pub fn random_scale(cloud: &PointCloud, rng: &mut RngStream, cfg: &S3daConfig) -> PointCloud {
    let sx = rng.next_range(cfg.scale_low, cfg.scale_high);
    let sy = rng.next_range(cfg.scale_low, cfg.scale_high);
    let sz = rng.next_range(cfg.scale_low, cfg.scale_high);
    let points = cloud
        .points()
        .iter()
        .map(|p| Point3::new(p.x * sx, p.y * sy, p.z * sz))
        .collect();
    PointCloud::new(points)
}

/// Per-point, per-axis clipped Gaussian jitter. Draw order is point-major,
/// axis-minor; draws are consumed even when sigma is zero so the stream
/// position depends only on the cloud size.
pub fn jitter(cloud: &PointCloud, rng: &mut RngStream, cfg: &S3daConfig) -> PointCloud {
    let clip = cfg.jitter_clip;
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            let dx = (rng.next_gaussian() * cfg.jitter_sigma).clamp(-clip, clip);
            let dy = (rng.next_gaussian() * cfg.jitter_sigma).clamp(-clip, clip);
            let dz = (rng.next_gaussian() * cfg.jitter_sigma).clamp(-clip, clip);
            Point3::new(p.x + dx, p.y + dy, p.z + dz)
        })
        .collect();
    PointCloud::new(points)
}

/// Sets floor(zero_fraction * n) distinct points to the origin. Selection is
/// a partial Fisher-Yates shuffle: at step i, swap index i with
/// i + (next_u64 mod (n - i)).
pub fn zero_mask(cloud: &PointCloud, rng: &mut RngStream, cfg: &S3daConfig) -> PointCloud {
    let n = cloud.len();
    let m = (cfg.zero_fraction * n as f64).floor() as usize;
    let mut points = cloud.points().to_vec();
    if m == 0 {
        return PointCloud::new(points);
    }
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..m {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        order.swap(i, j);
    }
    for &idx in &order[..m] {
        points[idx] = Point3::new(0.0, 0.0, 0.0);
    }
    PointCloud::new(points)
}

/// Full composition Z(J(S(P))) on one shared stream.
pub fn s3da(cloud: &PointCloud, rng: &mut RngStream, cfg: &S3daConfig) -> PointCloud {
    let scaled = random_scale(cloud, rng, cfg);
    let jittered = jitter(&scaled, rng, cfg);
    zero_mask(&jittered, rng, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[(f64, f64, f64)]) -> PointCloud {
        PointCloud::new(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect())
    }

    // Published SplitMix64 reference vector for seed 0.
    #[test]
    fn splitmix64_reference_vector() {
        let mut rng = RngStream::new(0);
        assert_eq!(rng.next_u64(), 0xE220A8397B1DCDAF);
        assert_eq!(rng.next_u64(), 0x6E789E6AA1B965F4);
        assert_eq!(rng.next_u64(), 0x06C45D188009454F);
        assert_eq!(rng.next_u64(), 0xF88BB8A8724C81EC);
    }

    #[test]
    fn uniform_is_in_unit_interval() {
        let mut rng = RngStream::new(12345);
        for _ in 0..10_000 {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn scale_identity_when_bounds_degenerate() {
        let p = cloud(&[(1.0, 2.0, 3.0), (-4.0, 5.0, -6.0)]);
        let cfg = S3daConfig { scale_low: 1.0, scale_high: 1.0, ..Default::default() };
        let out = random_scale(&p, &mut RngStream::new(9), &cfg);
        assert_eq!(out.points(), p.points());
    }

    #[test]
    fn scale_two_on_unit_cube() {
        let corners: Vec<(f64, f64, f64)> = (0..8)
            .map(|i| (((i >> 2) & 1) as f64, ((i >> 1) & 1) as f64, (i & 1) as f64))
            .collect();
        let p = cloud(&corners);
        let cfg = S3daConfig { scale_low: 2.0, scale_high: 2.0, ..Default::default() };
        let out = random_scale(&p, &mut RngStream::new(0), &cfg);
        for (a, b) in out.points().iter().zip(p.points()) {
            assert_eq!(a.x, 2.0 * b.x);
            assert_eq!(a.y, 2.0 * b.y);
            assert_eq!(a.z, 2.0 * b.z);
        }
    }

    // Golden factors computed with an independent implementation of the
    // pinned stream (pure arithmetic, so comparison is exact).
    #[test]
    fn scale_seed42_golden_factors() {
        let mut rng = RngStream::new(42);
        let fx = rng.next_range(0.8, 1.2);
        let fy = rng.next_range(0.8, 1.2);
        let fz = rng.next_range(0.8, 1.2);
        assert_eq!(fx, 1.0966259515087293);
        assert_eq!(fy, 0.8639641571507681);
        assert_eq!(fz, 0.9114404521020555);
    }

    #[test]
    fn jitter_sigma_zero_is_identity() {
        let p = cloud(&[(1.0, 2.0, 3.0), (0.5, 0.5, 0.5)]);
        let cfg = S3daConfig { jitter_sigma: 0.0, ..Default::default() };
        let out = jitter(&p, &mut RngStream::new(1), &cfg);
        assert_eq!(out.points(), p.points());
    }

    #[test]
    fn jitter_clip_zero_is_identity() {
        let p = cloud(&[(1.0, 2.0, 3.0)]);
        let cfg = S3daConfig { jitter_clip: 0.0, ..Default::default() };
        let out = jitter(&p, &mut RngStream::new(1), &cfg);
        assert_eq!(out.points(), p.points());
    }

    // Golden values from the independent oracle; the Gaussian path goes
    // through libm (ln/cos) so allow a few ulps.
    #[test]
    fn jitter_seed7_golden() {
        let p = cloud(&[(0.0, 0.0, 0.0), (1.0, 2.0, 3.0)]);
        let cfg = S3daConfig { jitter_sigma: 0.01, jitter_clip: 0.05, ..Default::default() };
        let out = jitter(&p, &mut RngStream::new(7), &cfg);
        let expected = [
            [0.009884743323187353, -0.018642558067312274, 3.920207215189096e-05],
            [0.9947072929952581, 1.9954103038225914, 3.0045281521788407],
        ];
        for (got, want) in out.points().iter().zip(expected.iter()) {
            for (g, w) in [got.x, got.y, got.z].iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn zero_mask_fraction_zero_is_identity() {
        let p = cloud(&[(1.0, 1.0, 1.0), (2.0, 2.0, 2.0)]);
        let cfg = S3daConfig { zero_fraction: 0.0, ..Default::default() };
        let out = zero_mask(&p, &mut RngStream::new(3), &cfg);
        assert_eq!(out.points(), p.points());
    }

    #[test]
    fn zero_mask_floor_rounds_down_to_identity() {
        // 0.12 * 8 = 0.96 -> floor 0
        let pts: Vec<(f64, f64, f64)> = (0..8).map(|i| (i as f64, 0.0, 0.0)).collect();
        let p = cloud(&pts);
        let cfg = S3daConfig { zero_fraction: 0.12, ..Default::default() };
        let out = zero_mask(&p, &mut RngStream::new(3), &cfg);
        assert_eq!(out.points(), p.points());
    }

    // Oracle run: seed 3, n=8, fraction 0.25 selects indices {4, 5}.
    #[test]
    fn zero_mask_seed3_golden_indices() {
        let pts: Vec<(f64, f64, f64)> = (1..=8).map(|i| (i as f64, i as f64, i as f64)).collect();
        let p = cloud(&pts);
        let cfg = S3daConfig { zero_fraction: 0.25, ..Default::default() };
        let out = zero_mask(&p, &mut RngStream::new(3), &cfg);
        let zeroed: Vec<usize> = out
            .points()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.x == 0.0 && p.y == 0.0 && p.z == 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(zeroed, vec![4, 5]);
    }

    #[test]
    fn s3da_identity_config() {
        let p = cloud(&[(1.0, 2.0, 3.0), (4.0, 5.0, 6.0)]);
        let cfg = S3daConfig {
            scale_low: 1.0,
            scale_high: 1.0,
            jitter_sigma: 0.0,
            jitter_clip: 0.0,
            zero_fraction: 0.0,
        };
        let out = s3da(&p, &mut RngStream::new(77), &cfg);
        assert_eq!(out.points(), p.points());
    }

    #[test]
    fn s3da_equals_manual_chain_on_shared_stream() {
        let p = cloud(&[(1.0, 2.0, 3.0), (-1.0, 0.5, 2.0), (0.0, 0.0, 9.0), (4.0, 4.0, 4.0)]);
        let cfg = S3daConfig::default();
        let composed = s3da(&p, &mut RngStream::new(99), &cfg);
        let mut rng = RngStream::new(99);
        let manual = zero_mask(&jitter(&random_scale(&p, &mut rng, &cfg), &mut rng, &cfg), &mut rng, &cfg);
        assert_eq!(composed.points(), manual.points());
    }

    // Oracle run: seed 1, default config, 4-point cloud. floor(0.05*4) = 0 so
    // the zeroing stage is the identity here.
    #[test]
    fn s3da_seed1_golden_output() {
        let p = cloud(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]);
        let out = s3da(&p, &mut RngStream::new(1), &S3daConfig::default());
        let expected = [
            [-0.010182986524741384, 0.01217260101262496, -0.0026924503449684595],
            [1.0119768292532647, -0.013094711798319027, -0.01130838017330788],
            [-0.003695512979907237, 1.0906650899478239, 0.01901166249502236],
            [-0.004119795238234909, -0.0011781667121976357, 1.1852827312866403],
        ];
        for (got, want) in out.points().iter().zip(expected.iter()) {
            for (g, w) in [got.x, got.y, got.z].iter().zip(want.iter()) {
                assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let p = cloud(&[(1.0, 2.0, 3.0), (4.0, 5.0, 6.0), (7.0, 8.0, 9.0)]);
        let cfg = S3daConfig::default();
        let a = s3da(&p, &mut RngStream::new(5), &cfg);
        let b = s3da(&p, &mut RngStream::new(5), &cfg);
        for (x, y) in a.points().iter().zip(b.points()) {
            assert_eq!(x.x.to_bits(), y.x.to_bits());
            assert_eq!(x.y.to_bits(), y.y.to_bits());
            assert_eq!(x.z.to_bits(), y.z.to_bits());
        }
    }

    #[test]
    fn jitter_bounded_by_clip_when_no_zeroing() {
        let pts: Vec<(f64, f64, f64)> = (0..64).map(|i| (i as f64, -(i as f64), 0.5 * i as f64)).collect();
        let p = cloud(&pts);
        let cfg = S3daConfig {
            jitter_sigma: 10.0, // force clipping
            jitter_clip: 0.25,
            zero_fraction: 0.0,
            ..Default::default()
        };
        let mut rng = RngStream::new(11);
        let scaled = random_scale(&p, &mut rng, &cfg);
        let mut rng2 = RngStream::new(11);
        let out = s3da(&p, &mut rng2, &cfg);
        for (o, s) in out.points().iter().zip(scaled.points()) {
            assert!((o.x - s.x).abs() <= cfg.jitter_clip + 1e-15);
            assert!((o.y - s.y).abs() <= cfg.jitter_clip + 1e-15);
            assert!((o.z - s.z).abs() <= cfg.jitter_clip + 1e-15);
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = S3daConfig::default();
        cfg.scale_low = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = S3daConfig::default();
        cfg.zero_fraction = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = S3daConfig::default();
        cfg.jitter_sigma = -0.1;
        assert!(cfg.validate().is_err());
        assert!(S3daConfig::default().validate().is_ok());
    }

    #[test]
    fn derived_streams_differ_per_salt() {
        let a = RngStream::derive(7, &[0]);
        let b = RngStream::derive(7, &[1]);
        assert_ne!(a, b);
        let mut a2 = RngStream::derive(7, &[0]);
        let mut a3 = RngStream::derive(7, &[0]);
        assert_eq!(a2.next_u64(), a3.next_u64());
    }
}
