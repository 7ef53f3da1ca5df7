//! Run configuration: defaults, TOML file override, and command-line flags,
//! with flags winning over the file. The effective values (minus the thread
//! count, which never affects results) are echoed into every output for
//! reproducibility audits.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rif::augment::S3daConfig;
use rif::error::{Error, Result};
use rif::features::{BaselineExtractor, CtfNet, FeatureExtractor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Ctfnet,
    Baseline,
}

/// Effective configuration after merging defaults, file, and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g: usize,
    pub k: usize,
    pub extractor: ExtractorKind,
    pub weights: Option<PathBuf>,
    pub seed: u64,
    pub fpr_cap: f64,
    pub threads: usize,
    pub s3da: S3daConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            g: 512,
            k: 512,
            extractor: ExtractorKind::Ctfnet,
            weights: None,
            seed: 0,
            fpr_cap: 0.3,
            threads: 0,
            s3da: S3daConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g == 0 || self.k == 0 {
            return Err(Error::InvalidConfig("G and K must be at least 1".into()));
        }
        if !(self.fpr_cap > 0.0 && self.fpr_cap <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fpr_cap must be in (0, 1], got {}",
                self.fpr_cap
            )));
        }
        self.s3da.validate()
    }

    pub fn build_extractor(&self) -> Result<Box<dyn FeatureExtractor>> {
        Ok(match self.extractor {
            ExtractorKind::Ctfnet => match &self.weights {
                Some(path) => Box::new(CtfNet::new(rif::features::load_weights(path)?)),
                None => Box::new(CtfNet::with_seed(self.seed)),
            },
            ExtractorKind::Baseline => Box::new(BaselineExtractor),
        })
    }

    /// JSON value echoed into outputs. Thread count is omitted: results are
    /// required to be independent of it.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({
            "g": self.g,
            "k": self.k,
            "extractor": match self.extractor {
                ExtractorKind::Ctfnet => "ctfnet",
                ExtractorKind::Baseline => "baseline",
            },
            "weights": self.weights.as_ref().map(|p| p.display().to_string()),
            "seed": self.seed,
            "fpr_cap": self.fpr_cap,
            "s3da": self.s3da,
        })
    }
}

/// Optional overrides loaded from `--config FILE` (TOML).
#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub g: Option<usize>,
    pub k: Option<usize>,
    pub extractor: Option<ExtractorKind>,
    pub weights: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fpr_cap: Option<f64>,
    pub threads: Option<usize>,
    pub s3da: Option<S3daFileConfig>,
}

#[derive(Debug, Default, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S3daFileConfig {
    pub scale_low: Option<f64>,
    pub scale_high: Option<f64>,
    pub jitter_sigma: Option<f64>,
    pub jitter_clip: Option<f64>,
    pub zero_fraction: Option<f64>,
}

/// Shared configuration flags. Flags win over the config file, which wins
/// over the defaults.
#[derive(Debug, Default, Args)]
pub struct ConfigArgs {
    /// TOML config file with the same keys as the flags below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Number of FPS groups per sample.
    #[arg(short = 'G', long)]
    pub groups: Option<usize>,
    /// Number of points per group.
    #[arg(short = 'K', long)]
    pub group_size: Option<usize>,
    /// Feature extractor.
    #[arg(long, value_enum)]
    pub extractor: Option<ExtractorKind>,
    /// Weight file; absent means seeded random initialization.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed for weight initialization and any randomized step.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integration cap for the AUPRO metrics.
    #[arg(long)]
    pub fpr_cap: Option<f64>,
    /// Worker threads (0 = all cores). Falls back to RI3D_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub scale_low: Option<f64>,
    #[arg(long)]
    pub scale_high: Option<f64>,
    #[arg(long)]
    pub jitter_sigma: Option<f64>,
    #[arg(long)]
    pub jitter_clip: Option<f64>,
    #[arg(long)]
    pub zero_fraction: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let file: FileConfig = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str(&text).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {e}", path.display()))
                })?
            }
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig::default();
        let fs3 = file.s3da.unwrap_or_default();

        cfg.g = self.groups.or(file.g).unwrap_or(cfg.g);
        cfg.k = self.group_size.or(file.k).unwrap_or(cfg.k);
        cfg.extractor = self.extractor.or(file.extractor).unwrap_or(cfg.extractor);
        cfg.weights = self.weights.clone().or(file.weights);
        cfg.seed = self.seed.or(file.seed).unwrap_or(cfg.seed);
        cfg.fpr_cap = self.fpr_cap.or(file.fpr_cap).unwrap_or(cfg.fpr_cap);
        cfg.threads = self
            .threads
            .or(file.threads)
            .or_else(|| std::env::var("RI3D_THREADS").ok().and_then(|v| v.parse().ok()))
            .unwrap_or(0);
        cfg.s3da.scale_low = self.scale_low.or(fs3.scale_low).unwrap_or(cfg.s3da.scale_low);
        cfg.s3da.scale_high = self.scale_high.or(fs3.scale_high).unwrap_or(cfg.s3da.scale_high);
        cfg.s3da.jitter_sigma =
            self.jitter_sigma.or(fs3.jitter_sigma).unwrap_or(cfg.s3da.jitter_sigma);
        cfg.s3da.jitter_clip = self.jitter_clip.or(fs3.jitter_clip).unwrap_or(cfg.s3da.jitter_clip);
        cfg.s3da.zero_fraction =
            self.zero_fraction.or(fs3.zero_fraction).unwrap_or(cfg.s3da.zero_fraction);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.g, 512);
        assert_eq!(cfg.k, 512);
        assert_eq!(cfg.extractor, ExtractorKind::Ctfnet);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.fpr_cap, 0.3);
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "g = 16\nk = 8\nseed = 5\n[s3da]\nscale_low = 0.5\n").unwrap();
        let args = ConfigArgs {
            config: Some(path),
            groups: Some(32),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.g, 32); // flag wins
        assert_eq!(cfg.k, 8); // file wins over default
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.s3da.scale_low, 0.5);
        assert_eq!(cfg.s3da.scale_high, 1.2); // default survives
    }

    #[test]
    fn invalid_values_are_rejected() {
        let args = ConfigArgs { groups: Some(0), ..Default::default() };
        assert!(args.resolve().is_err());
        let args = ConfigArgs { fpr_cap: Some(1.5), ..Default::default() };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "unknown_key = 1\n").unwrap();
        let args = ConfigArgs { config: Some(path), ..Default::default() };
        assert!(args.resolve().is_err());
    }

    #[test]
    fn echo_omits_threads() {
        let cfg = RunConfig::default();
        let echo = cfg.echo();
        assert!(echo.get("threads").is_none());
        assert_eq!(echo["g"], 512);
        assert_eq!(echo["extractor"], "ctfnet");
    }
}
