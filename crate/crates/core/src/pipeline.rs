//! End-to-end analysis of a censored longitudinal dataset: noise level, bandwidths, mean,
//! covariance, eigen system, component count, scores and reconstruction error.

use nalgebra::DVector;
use thiserror::Error;

use crate::data::{Dataset, WeightScheme};
use crate::eigen::{
    adjust_covariance, calibrate_bias_design, eigen_decompose, select_num_components,
    BiasCorrection, CovSurface, EigenSystem,
};
use crate::error::FpcaError;
use crate::grid::{make_uniform_grid, Grid};
use crate::kernel::Kernel;
use crate::reconstruct::{observed_imse, reconstruct_curves};
use crate::scores::{estimate_all_scores, EigenBasis, ScoreEstimate};
use crate::smoothing::{
    center_dataset, default_candidates, estimate_sigma, local_constant_covariance,
    local_constant_mean, select_bandwidth, BandwidthObjective, BandwidthTarget, CovSurfaceRaw,
    MeanEstimate, SigmaEstimate, SmoothingSetup,
};

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthChoice {
    Fixed(f64),
    /// Leave-one-subject-out cross-validation over the candidates, separately for the mean
    /// and the covariance. An empty list means the default candidate grid.
    CrossValidate(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasMode {
    /// Monte-Carlo calibration when the data are censored and sigma is positive.
    Auto,
    None,
    MonteCarlo,
}

impl std::str::FromStr for BiasMode {
    type Err = FpcaError;

    fn from_str(s: &str) -> Result<Self, FpcaError> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(BiasMode::Auto),
            "none" => Ok(BiasMode::None),
            "monte-carlo" | "montecarlo" | "mc" => Ok(BiasMode::MonteCarlo),
            _ => Err(FpcaError::InvalidArgument(format!(
                "unknown bias correction '{s}' (auto, none, monte-carlo)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub grid_size: usize,
    pub bandwidth: BandwidthChoice,
    pub scheme: WeightScheme,
    pub fve_threshold: f64,
    /// Overrides the polynomial noise estimate.
    pub sigma: Option<f64>,
    pub sigma_degree: usize,
    pub bias: BiasMode,
    pub bias_replicates: usize,
    pub seed: u64,
    /// Upper bound on the number of components regardless of the FVE rule.
    pub max_components: Option<usize>,
    /// Grid points whose mean support falls below this fraction of the maximum are reported.
    pub support_fraction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_size: 100,
            bandwidth: BandwidthChoice::CrossValidate(Vec::new()),
            scheme: WeightScheme::Obs,
            fve_threshold: 0.9,
            sigma: None,
            sigma_degree: 4,
            bias: BiasMode::Auto,
            bias_replicates: 200,
            seed: 0,
            max_components: None,
            support_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Setup,
    Sigma,
    MeanBandwidth,
    Mean,
    Centering,
    CovarianceBandwidth,
    Covariance,
    BiasCorrection,
    Eigen,
    Components,
    Scores,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Setup => "setup",
            Stage::Sigma => "sigma",
            Stage::MeanBandwidth => "mean bandwidth",
            Stage::Mean => "mean",
            Stage::Centering => "centering",
            Stage::CovarianceBandwidth => "covariance bandwidth",
            Stage::Covariance => "covariance",
            Stage::BiasCorrection => "bias correction",
            Stage::Eigen => "eigen",
            Stage::Components => "components",
            Stage::Scores => "scores",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{} stage failed: {source}", stage.name())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: FpcaError,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T, FpcaError> {
    fn at(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectScores {
    pub subject_id: String,
    pub result: Result<ScoreEstimate, FpcaError>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub grid: Grid,
    pub sigma: SigmaEstimate,
    pub mean_bandwidth: f64,
    pub covariance_bandwidth: f64,
    pub mean: MeanEstimate,
    pub covariance: CovSurfaceRaw,
    pub correction: BiasCorrection,
    pub adjusted: CovSurface,
    /// Full spectrum of the adjusted surface.
    pub eigen: EigenSystem,
    pub components: usize,
    pub scores: Vec<SubjectScores>,
    /// Approximate reconstruction error against interpolated uncensored observations.
    pub imse: Option<f64>,
    /// Maximal runs of grid points with low mean support, as `(start, end)` times.
    pub low_support: Vec<(f64, f64)>,
}

impl FitResult {
    pub fn fve_shares(&self) -> Vec<f64> {
        self.eigen.fve_shares()
    }
}

fn choose(
    data: &Dataset,
    choice: &BandwidthChoice,
    target: BandwidthTarget,
    setup: &SmoothingSetup,
) -> Result<f64, FpcaError> {
    match choice {
        BandwidthChoice::Fixed(h) => Ok(*h),
        BandwidthChoice::CrossValidate(candidates) => {
            let defaults;
            let candidates = if candidates.is_empty() {
                defaults = default_candidates(data.domain());
                &defaults
            } else {
                candidates
            };
            select_bandwidth(data, candidates, BandwidthObjective::CrossValidation(target), setup)
        }
    }
}

fn low_support_runs(mean: &MeanEstimate, fraction: f64) -> Vec<(f64, f64)> {
    let max = mean.support.iter().copied().fold(0.0f64, f64::max);
    let pts = mean.grid.points();
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for g in 0..pts.len() {
        let low = !(mean.support[g] >= fraction * max) || !mean.is_estimable(g);
        match (low, start) {
            (true, None) => start = Some(g),
            (false, Some(s)) => {
                runs.push((pts[s], pts[g - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((pts[s], pts[pts.len() - 1]));
    }
    runs
}

/// Runs the complete analysis.
pub fn fit(dataset: &Dataset, options: &FitOptions) -> Result<FitResult, StageError> {
    if !(options.fve_threshold > 0.0 && options.fve_threshold <= 1.0) {
        return Err(StageError {
            stage: Stage::Setup,
            source: FpcaError::InvalidArgument(format!(
                "FVE threshold must lie in (0, 1], got {}",
                options.fve_threshold
            )),
        });
    }
    let (a, b) = dataset.domain();
    let grid = make_uniform_grid(a, b, options.grid_size).at(Stage::Setup)?;

    let sigma = match options.sigma {
        Some(s) => SigmaEstimate::fixed(s).at(Stage::Sigma)?,
        None => estimate_sigma(dataset, options.sigma_degree).at(Stage::Sigma)?,
    };
    let setup = SmoothingSetup {
        scheme: options.scheme,
        sigma: sigma.sigma,
        grid: grid.clone(),
        kernel: Kernel::Gaussian,
    };

    let mean_bandwidth =
        choose(dataset, &options.bandwidth, BandwidthTarget::Mean, &setup).at(Stage::MeanBandwidth)?;
    let mean = local_constant_mean(dataset, mean_bandwidth, setup.scheme, setup.sigma, &grid, setup.kernel)
        .at(Stage::Mean)?;
    let centered = center_dataset(dataset, &mean).at(Stage::Centering)?;

    let covariance_bandwidth = choose(&centered, &options.bandwidth, BandwidthTarget::Covariance, &setup)
        .at(Stage::CovarianceBandwidth)?;
    let covariance = local_constant_covariance(
        &centered,
        covariance_bandwidth,
        setup.scheme,
        setup.sigma,
        &grid,
        setup.kernel,
    )
    .at(Stage::Covariance)?;

    let calibrate = match options.bias {
        BiasMode::None => false,
        BiasMode::MonteCarlo => true,
        BiasMode::Auto => centered.has_censoring() && setup.sigma > 0.0,
    };
    let correction = if calibrate {
        calibrate_bias_design(&centered, covariance_bandwidth, &setup, options.bias_replicates, options.seed)
            .at(Stage::BiasCorrection)?
    } else {
        BiasCorrection::None
    };
    let adjusted = adjust_covariance(&covariance, &correction, setup.sigma).at(Stage::BiasCorrection)?;
    let eigen = eigen_decompose(&adjusted, &grid).at(Stage::Eigen)?;

    let mut components =
        select_num_components(&eigen.eigenvalues, options.fve_threshold).at(Stage::Components)?;
    if let Some(cap) = options.max_components {
        if cap == 0 {
            return Err(StageError {
                stage: Stage::Components,
                source: FpcaError::InvalidArgument("at least one component is required".into()),
            });
        }
        components = components.min(cap);
    }

    let basis = EigenBasis::new(&eigen, components);
    let scores: Vec<SubjectScores> = estimate_all_scores(&centered, &basis, setup.sigma)
        .into_iter()
        .zip(dataset.trajectories())
        .map(|(result, tr)| SubjectScores {
            subject_id: tr.subject_id().to_string(),
            result,
        })
        .collect();

    let truncated = eigen.truncated(components);
    let ok: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].result.is_ok()).collect();
    let xi: Vec<DVector<f64>> = ok
        .iter()
        .map(|&i| scores[i].result.as_ref().map(|e| e.xi.clone()).unwrap())
        .collect();
    let imse = if ok.is_empty() {
        None
    } else {
        let fitted = reconstruct_curves(&mean.values, &truncated, &xi).at(Stage::Scores)?;
        let subset = Dataset::from_parts_unchecked(
            ok.iter().map(|&i| dataset.trajectories()[i].clone()).collect(),
            dataset.detection_limit(),
            dataset.domain(),
        );
        observed_imse(&subset, &grid, &fitted).at(Stage::Scores)?
    };

    let low_support = low_support_runs(&mean, options.support_fraction);
    Ok(FitResult {
        grid,
        sigma,
        mean_bandwidth,
        covariance_bandwidth,
        mean,
        covariance,
        correction,
        adjusted,
        eigen,
        components,
        scores,
        imse,
        low_support,
    })
}
