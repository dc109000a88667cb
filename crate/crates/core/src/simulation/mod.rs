//! Data generation for the single-component model `Y = xi psi(t) + eps`, censoring at a
//! detection limit, the naive baseline, accuracy metrics and the replicate runner.

mod metrics;
mod study;

pub use metrics::{ise_eigenfunction, score_metrics, ScoreMetrics};
pub use study::{
    fit_simulated, naive_fit, run_replicates, EigenStudyOptions, ReplicateRow, ReplicateRun,
    ReplicateSummary, SimFit, Study,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Trajectory};
use crate::error::{invalid_argument, invalid_input, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Density {
    /// `N_i ~ U{3..10}`, scaled by `M / 100`.
    Sparse,
    /// `N_i ~ U{ceil(3M/4)..M}`.
    Dense,
}

impl Density {
    pub fn name(self) -> &'static str {
        match self {
            Density::Sparse => "sparse",
            Density::Dense => "dense",
        }
    }
}

impl std::str::FromStr for Density {
    type Err = crate::error::FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(Density::Sparse),
            "dense" => Ok(Density::Dense),
            _ => Err(invalid_argument(format!("unknown density '{s}' (sparse or dense)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eigenfunction {
    /// `sqrt(2) cos(2 pi k t)`, orthonormal on `[0, 1]` for integer `k >= 1`.
    Cosine { frequency: f64 },
}

impl Default for Eigenfunction {
    fn default() -> Self {
        Eigenfunction::Cosine { frequency: 2.0 }
    }
}

impl Eigenfunction {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Eigenfunction::Cosine { frequency } => {
                std::f64::consts::SQRT_2 * (2.0 * std::f64::consts::PI * frequency * t).cos()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub density: Density,
    pub m: usize,
    pub dl: Option<f64>,
    pub sigma_eps: f64,
    pub lambda: f64,
    pub eigenfunction: Eigenfunction,
    pub seed: u64,
    pub replicates: usize,
}

impl SimConfig {
    /// 100 subjects, `lambda = 2`, unit noise, 100 replicates.
    pub fn standard(density: Density, m: usize, dl: Option<f64>) -> Self {
        Self {
            n: 100,
            density,
            m,
            dl,
            sigma_eps: 1.0,
            lambda: 2.0,
            eigenfunction: Eigenfunction::default(),
            seed: 0,
            replicates: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid_argument("need at least one subject"));
        }
        if self.replicates == 0 {
            return Err(invalid_argument("need at least one replicate"));
        }
        match self.density {
            Density::Sparse if self.m < 100 => {
                return Err(invalid_argument(format!(
                    "sparse designs need M >= 100, got {}",
                    self.m
                )))
            }
            Density::Dense if self.m == 0 => return Err(invalid_argument("M must be positive")),
            _ => {}
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(invalid_argument(format!("sigma_eps must be >= 0, got {}", self.sigma_eps)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid_argument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(c) = self.dl {
            if !c.is_finite() {
                return Err(invalid_argument(format!("detection limit must be finite, got {c}")));
            }
        }
        Ok(())
    }

    /// True curve of subject `i` given its score.
    pub fn curve(&self, xi: f64, t: f64) -> f64 {
        xi * self.eigenfunction.eval(t)
    }
}

/// Uncensored data with the scores that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub scores: Vec<f64>,
}

const STREAM_SCORES: u64 = 0;
const STREAM_COUNTS: u64 = 1;
const STREAM_OBSERVATIONS: u64 = 2;
const STREAMS_PER_REPLICATE: u64 = 4;

/// Independent generator for one purpose within one replicate.
pub(crate) fn stream(seed: u64, replicate: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 * STREAMS_PER_REPLICATE + purpose);
    rng
}

fn draw_count(rng: &mut ChaCha8Rng, density: Density, m: usize) -> usize {
    match density {
        Density::Sparse => {
            let base: usize = rng.random_range(3..=10);
            ((base * m) as f64 / 100.0).round().max(1.0) as usize
        }
        Density::Dense => {
            let lo = (3 * m).div_ceil(4).max(1);
            rng.random_range(lo..=m)
        }
    }
}

/// Draws one replicate. Scores and observation counts come from their own streams, so they
/// are shared across configurations that differ only in `M`, noise or censoring.
pub fn generate_dataset(config: &SimConfig, replicate: usize) -> Result<SimulatedData> {
    config.validate()?;
    let mut score_rng = stream(config.seed, replicate, STREAM_SCORES);
    let mut count_rng = stream(config.seed, replicate, STREAM_COUNTS);
    let mut obs_rng = stream(config.seed, replicate, STREAM_OBSERVATIONS);
    let sd = config.lambda.sqrt();

    let mut scores = Vec::with_capacity(config.n);
    let mut trajectories = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let z: f64 = score_rng.sample(StandardNormal);
        let xi = sd * z;
        let count = draw_count(&mut count_rng, config.density, config.m);
        let mut times: Vec<f64> = (0..count).map(|_| obs_rng.random::<f64>()).collect();
        times.sort_by(f64::total_cmp);
        let values = times
            .iter()
            .map(|&t| {
                let e: f64 = obs_rng.sample(StandardNormal);
                config.curve(xi, t) + config.sigma_eps * e
            })
            .collect();
        trajectories.push(Trajectory::new(format!("{}", i + 1), times, values, vec![false; count])?);
        scores.push(xi);
    }
    let dataset = Dataset::new(trajectories, None, Some((0.0, 1.0)))?;
    Ok(SimulatedData { dataset, scores })
}

/// Replaces values strictly below `c` by `c` and flags them. `None` leaves the data as is.
pub fn apply_detection_limit(dataset: &Dataset, c: Option<f64>) -> Result<Dataset> {
    let Some(c) = c else {
        return Ok(dataset.clone());
    };
    if let Some(existing) = dataset.detection_limit() {
        if existing != c {
            return Err(invalid_input(format!(
                "data are already censored at {existing}; cannot censor at {c}"
            )));
        }
    }
    if dataset.is_centered() {
        return Err(invalid_input("apply the detection limit before removing the mean"));
    }
    let trajectories = dataset
        .trajectories()
        .iter()
        .map(|tr| {
            let mut values = tr.values().to_vec();
            let mut censored = tr.censored().to_vec();
            for j in 0..values.len() {
                if !censored[j] && values[j] < c {
                    values[j] = c;
                    censored[j] = true;
                }
            }
            Trajectory::new(tr.subject_id(), tr.times().to_vec(), values, censored)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(trajectories, Some(c), Some(dataset.domain()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_null_model_is_zero() {
        let mut cfg = SimConfig::standard(Density::Sparse, 100, None);
        cfg.sigma_eps = 0.0;
        cfg.lambda = 0.0;
        let sim = generate_dataset(&cfg, 0).unwrap();
        assert!(sim.dataset.trajectories().iter().all(|t| t.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn deterministic_per_replicate() {
        let cfg = SimConfig::standard(Density::Dense, 100, None);
        assert_eq!(generate_dataset(&cfg, 3).unwrap(), generate_dataset(&cfg, 3).unwrap());
        assert_ne!(generate_dataset(&cfg, 3).unwrap(), generate_dataset(&cfg, 4).unwrap());
    }

    #[test]
    fn counts_follow_design() {
        let sparse = generate_dataset(&SimConfig::standard(Density::Sparse, 200, None), 0).unwrap();
        for tr in sparse.dataset.trajectories() {
            assert!(tr.len() % 2 == 0 && (6..=20).contains(&tr.len()));
        }
        let dense = generate_dataset(&SimConfig::standard(Density::Dense, 100, None), 0).unwrap();
        for tr in dense.dataset.trajectories() {
            assert!((75..=100).contains(&tr.len()));
        }
    }

    #[test]
    fn scores_shared_across_m() {
        let a = generate_dataset(&SimConfig::standard(Density::Sparse, 100, None), 2).unwrap();
        let b = generate_dataset(&SimConfig::standard(Density::Sparse, 1000, None), 2).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn strict_censoring() {
        let tr = Trajectory::new("a", vec![0.1, 0.2, 0.3], vec![-2.0, 0.0, 1.0], vec![false; 3]).unwrap();
        let ds = Dataset::new(vec![tr], None, Some((0.0, 1.0))).unwrap();
        let out = apply_detection_limit(&ds, Some(0.0)).unwrap();
        let t = &out.trajectories()[0];
        assert_eq!(t.censored(), &[true, false, false]);
        assert_eq!(t.values(), &[0.0, 0.0, 1.0]);
        assert_eq!(apply_detection_limit(&ds, None).unwrap(), ds);
    }

    #[test]
    fn invalid_configs() {
        assert!(SimConfig::standard(Density::Sparse, 50, None).validate().is_err());
        let mut cfg = SimConfig::standard(Density::Dense, 100, None);
        cfg.n = 0;
        assert!(cfg.validate().is_err());
    }
}
