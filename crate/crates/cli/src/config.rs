//! Run settings from flags and an optional TOML file. Flags win over the file; the output
//! directory falls back to `DLFPCA_OUTPUT_DIR` and then to `dlfpca-out`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use dlfpca::pipeline::{BandwidthChoice, BiasMode, FitOptions};
use dlfpca::WeightScheme;
use serde::Deserialize;

pub const OUTPUT_DIR_ENV: &str = "DLFPCA_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "dlfpca-out";

#[derive(Debug, Clone, Default, Args, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// TOML file with any of these settings as keys (flags take precedence).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    /// Number of evaluation grid points.
    #[arg(long = "grid")]
    pub grid_size: Option<usize>,
    /// Fixed bandwidth for mean and covariance.
    #[arg(long, conflicts_with = "candidates")]
    pub bandwidth: Option<f64>,
    /// Cross-validation candidates, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub candidates: Option<Vec<f64>>,
    /// OBS or SUBJ.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Fraction of variance the retained components must explain.
    #[arg(long)]
    pub fve: Option<f64>,
    /// Noise standard deviation; estimated when absent.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Detection limit; inferred from censored rows when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub dl: Option<f64>,
    /// Time domain as `start,end`.
    #[arg(long, allow_hyphen_values = true)]
    pub domain: Option<Domain>,
    /// auto, none or monte-carlo.
    #[arg(long)]
    pub bias: Option<String>,
    #[arg(long)]
    pub bias_replicates: Option<usize>,
    #[arg(long)]
    pub max_components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Drop uncensored observations more than 3 SD from the pooled mean.
    #[arg(long)]
    pub exclude_outliers: Option<bool>,
}

impl Settings {
    /// Fills unset fields from the config file, if one was named.
    pub fn resolve(mut self) -> Result<Settings> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = load_file(&path)?;
        macro_rules! fill {
            ($($f:ident),*) => { $( if self.$f.is_none() { self.$f = file.$f; } )* };
        }
        fill!(
            output_dir, grid_size, bandwidth, candidates, scheme, fve, sigma, dl, domain, bias,
            bias_replicates, max_components, seed, replicates, exclude_outliers
        );
        if self.bandwidth.is_some() && self.candidates.is_some() {
            bail!("bandwidth and candidates are mutually exclusive");
        }
        Ok(self)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn domain(&self) -> Result<Option<(f64, f64)>> {
        match self.domain {
            None => Ok(None),
            Some(Domain(a, b)) if b > a => Ok(Some((a, b))),
            Some(Domain(a, b)) => bail!("domain needs start < end, got {a},{b}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn fit_options(&self) -> Result<FitOptions> {
        let mut o = FitOptions::default();
        if let Some(g) = self.grid_size {
            if g < 2 {
                bail!("grid needs at least 2 points, got {g}");
            }
            o.grid_size = g;
        }
        o.bandwidth = match (&self.bandwidth, &self.candidates) {
            (Some(h), _) => BandwidthChoice::Fixed(*h),
            (None, Some(c)) => BandwidthChoice::CrossValidate(c.clone()),
            (None, None) => BandwidthChoice::CrossValidate(Vec::new()),
        };
        if let Some(s) = &self.scheme {
            o.scheme = s.parse::<WeightScheme>()?;
        }
        if let Some(f) = self.fve {
            if !(f > 0.0 && f <= 1.0) {
                bail!("FVE threshold must lie in (0, 1], got {f}");
            }
            o.fve_threshold = f;
        }
        o.sigma = self.sigma;
        if let Some(b) = &self.bias {
            o.bias = b.parse::<BiasMode>()?;
        }
        if let Some(r) = self.bias_replicates {
            o.bias_replicates = r;
        }
        o.seed = self.seed();
        o.max_components = self.max_components;
        Ok(o)
    }
}

/// `start,end` on the command line, `[start, end]` in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(from = "[f64; 2]")]
pub struct Domain(pub f64, pub f64);

impl From<[f64; 2]> for Domain {
    fn from([a, b]: [f64; 2]) -> Self {
        Domain(a, b)
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').collect();
        let [a, b] = parts.as_slice() else {
            return Err(format!("expected start,end, got {s:?}"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("{v:?} is not a number"));
        Ok(Domain(num(a)?, num(b)?))
    }
}

pub fn load_file(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("dlfpca-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "grid_size = 51\nfve = 0.8\nscheme = \"subj\"\ndomain = [0.0, 2.0]\n").unwrap();
        let s = Settings {
            config: Some(path),
            fve: Some(0.95),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        std::fs::remove_dir_all(&dir).unwrap();
        assert_eq!(s.grid_size, Some(51));
        assert_eq!(s.fve, Some(0.95));
        assert_eq!(s.domain().unwrap(), Some((0.0, 2.0)));
        let o = s.fit_options().unwrap();
        assert_eq!(o.scheme, WeightScheme::Subj);
        assert_eq!(o.fve_threshold, 0.95);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |s: Settings| s.fit_options().is_err();
        assert!(bad(Settings { grid_size: Some(1), ..Default::default() }));
        assert!(bad(Settings { fve: Some(0.0), ..Default::default() }));
        assert!(bad(Settings { fve: Some(1.5), ..Default::default() }));
        assert!(bad(Settings { scheme: Some("pairs".into()), ..Default::default() }));
        assert!(toml::from_str::<Settings>("gird_size = 3").is_err());
        assert!(Settings { domain: Some(Domain(1.0, 0.0)), ..Default::default() }.domain().is_err());
        assert_eq!("-1,2.5".parse::<Domain>().unwrap(), Domain(-1.0, 2.5));
        assert!("1".parse::<Domain>().is_err());
    }
}
