use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::{Dataset, WeightScheme};
use crate::eigen::{
    adjust_covariance, calibrate_bias_mc, eigen_decompose, BiasCorrection, CovSurface,
    EigenSystem,
};
use crate::error::{FpcaError, Result};
use crate::grid::{make_uniform_grid, Grid};
use crate::kernel::Kernel;
use crate::reconstruct::{imse, reconstruct_curves};
use crate::scores::{
    asymptotic_moments, subject_scores, traditional_scores, EigenBasis, FunctionBasis,
};
use crate::smoothing::{
    center_dataset, default_candidates, estimate_sigma, local_constant_covariance,
    local_constant_mean, select_bandwidth, BandwidthObjective, CovSurfaceRaw, MeanEstimate,
    SmoothingSetup,
};

use super::metrics::{ise_eigenfunction, score_metrics};
use super::{apply_detection_limit, generate_dataset, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Scores with the true eigenfunction known.
    Scores,
    /// Full estimation pipeline against the naive baseline.
    Eigen,
    Both,
}

impl Study {
    fn scores(self) -> bool {
        matches!(self, Study::Scores | Study::Both)
    }

    fn eigen(self) -> bool {
        matches!(self, Study::Eigen | Study::Both)
    }
}

/// Settings of the full pipeline used in simulation. Bandwidths are chosen by integrated
/// squared error against the known mean (zero) and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenStudyOptions {
    pub grid_size: usize,
    pub candidates: Vec<f64>,
    pub sigma_degree: usize,
    pub scheme: WeightScheme,
    /// Replicates for a pure-noise bias calibration; `None` applies no correction.
    pub bias_replicates: Option<usize>,
}

impl Default for EigenStudyOptions {
    fn default() -> Self {
        Self {
            grid_size: 100,
            candidates: default_candidates((0.0, 1.0)),
            sigma_degree: 4,
            scheme: WeightScheme::Obs,
            bias_replicates: None,
        }
    }
}

/// Everything the simulation pipeline estimates for one dataset.
#[derive(Debug, Clone)]
pub struct SimFit {
    pub sigma: f64,
    pub mean: MeanEstimate,
    pub centered: Dataset,
    pub covariance: CovSurfaceRaw,
    pub adjusted: CovSurface,
    pub eigen: EigenSystem,
    /// First-component scores per subject.
    pub scores: Vec<f64>,
}

/// Mean, covariance and leading eigenfunction of `data`, with oracle bandwidths.
///
/// With `traditional_scores` set the scores are the plain averages `(1/N) sum y psi`,
/// otherwise the censoring-aware estimates.
pub fn fit_simulated(
    data: &Dataset,
    model: &SimConfig,
    options: &EigenStudyOptions,
    traditional: bool,
) -> Result<SimFit> {
    let domain = data.domain();
    let grid = make_uniform_grid(domain.0, domain.1, options.grid_size)?;
    let sigma = estimate_sigma(data, options.sigma_degree)?.sigma;
    let setup = SmoothingSetup {
        scheme: options.scheme,
        sigma,
        grid: grid.clone(),
        kernel: Kernel::Gaussian,
    };

    let zero = |_t: f64| 0.0;
    let h_mean = select_bandwidth(data, &options.candidates, BandwidthObjective::OracleMean(&zero), &setup)?;
    let mean = local_constant_mean(data, h_mean, setup.scheme, sigma, &grid, setup.kernel)?;
    let centered = center_dataset(data, &mean)?;

    let ef = model.eigenfunction;
    let lambda = model.lambda;
    let truth = move |s: f64, t: f64| lambda * ef.eval(s) * ef.eval(t);
    let h_cov = select_bandwidth(
        &centered,
        &options.candidates,
        BandwidthObjective::OracleCovariance(&truth),
        &setup,
    )?;
    let covariance = local_constant_covariance(&centered, h_cov, setup.scheme, sigma, &grid, setup.kernel)?;
    let correction = match options.bias_replicates {
        Some(reps) if centered.has_censoring() && sigma > 0.0 => {
            let null = SimConfig {
                lambda: 0.0,
                sigma_eps: sigma,
                ..model.clone()
            };
            calibrate_bias_mc(&null, &grid, h_cov, reps, model.seed ^ 0x5DEE_CE66)?
        }
        _ => BiasCorrection::None,
    };
    let adjusted = adjust_covariance(&covariance, &correction, sigma)?;
    let eigen = eigen_decompose(&adjusted, &grid)?;

    let basis = EigenBasis::new(&eigen, 1);
    let scores = centered
        .trajectories()
        .par_iter()
        .map(|tr| {
            if traditional {
                traditional_scores(tr, &basis).map(|s| s[0])
            } else {
                subject_scores(tr, &basis, sigma).map(|e| e.xi[0])
            }
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SimFit {
        sigma,
        mean,
        centered,
        covariance,
        adjusted,
        eigen,
        scores,
    })
}

/// Baseline that treats values recorded at the limit as ordinary observations.
pub fn naive_fit(data: &Dataset, model: &SimConfig, options: &EigenStudyOptions) -> Result<SimFit> {
    fit_simulated(&data.without_censoring(), model, options, true)
}

/// Per-replicate metrics; fields of a study that was not run are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplicateSummary {
    pub ise_local: Option<f64>,
    pub ise_naive: Option<f64>,
    pub imse_local: Option<f64>,
    pub imse_naive: Option<f64>,
    pub score_mean: Option<f64>,
    pub score_var: Option<f64>,
    pub mse_star: Option<f64>,
    pub mse_dstar: Option<f64>,
    pub score_var_trad: Option<f64>,
    pub mse_star_trad: Option<f64>,
    pub censored_fraction: Option<f64>,
}

impl ReplicateSummary {
    fn fields(&self) -> [Option<f64>; 11] {
        [
            self.ise_local,
            self.ise_naive,
            self.imse_local,
            self.imse_naive,
            self.score_mean,
            self.score_var,
            self.mse_star,
            self.mse_dstar,
            self.score_var_trad,
            self.mse_star_trad,
            self.censored_fraction,
        ]
    }

    fn from_fields(f: [Option<f64>; 11]) -> Self {
        Self {
            ise_local: f[0],
            ise_naive: f[1],
            imse_local: f[2],
            imse_naive: f[3],
            score_mean: f[4],
            score_var: f[5],
            mse_star: f[6],
            mse_dstar: f[7],
            score_var_trad: f[8],
            mse_star_trad: f[9],
            censored_fraction: f[10],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRow {
    pub index: usize,
    pub result: std::result::Result<ReplicateSummary, FpcaError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRun {
    pub rows: Vec<ReplicateRow>,
    /// Field-wise arithmetic mean over successful replicates, in replicate order.
    pub aggregate: ReplicateSummary,
    pub failed: usize,
}

fn score_study(config: &SimConfig, data: &Dataset, xi_true: &[f64]) -> Result<[f64; 6]> {
    let ef = config.eigenfunction;
    let basis = FunctionBasis::single(move |t| ef.eval(t));
    let per_subject = data
        .trajectories()
        .par_iter()
        .zip(xi_true)
        .map(|(tr, &xi)| {
            let est = subject_scores(tr, &basis, config.sigma_eps)?;
            let a = asymptotic_moments(tr, &basis, config.sigma_eps, &[xi])?.a[0];
            let trad = traditional_scores(tr, &basis)?[0];
            Ok((est.xi[0], a, trad))
        })
        .collect::<Result<Vec<_>>>()?;
    let xi_hat: Vec<f64> = per_subject.iter().map(|p| p.0).collect();
    let a: Vec<f64> = per_subject.iter().map(|p| p.1).collect();
    let trad: Vec<f64> = per_subject.iter().map(|p| p.2).collect();
    let m = score_metrics(&xi_hat, xi_true, &a)?;
    let t = score_metrics(&trad, xi_true, &trad)?;
    Ok([m.mean, m.variance, m.mse_star, m.mse_dstar, t.variance, t.mse_star])
}

fn eigen_study(
    config: &SimConfig,
    data: &Dataset,
    xi_true: &[f64],
    options: &EigenStudyOptions,
) -> Result<[f64; 4]> {
    let local = fit_simulated(data, config, options, false)?;
    let naive = naive_fit(data, config, options)?;
    let truth = |t: f64| config.eigenfunction.eval(t);
    let grid: &Grid = &local.eigen.grid;
    let curves: Vec<Vec<f64>> = xi_true
        .iter()
        .map(|&xi| grid.points().iter().map(|&t| config.curve(xi, t)).collect())
        .collect();
    let imse_of = |fit: &SimFit| -> Result<f64> {
        let scores: Vec<DVector<f64>> = fit.scores.iter().map(|&s| DVector::from_element(1, s)).collect();
        let fitted = reconstruct_curves(&fit.mean.values, &fit.eigen, &scores)?;
        imse(grid, &curves, &fitted)
    };
    Ok([
        ise_eigenfunction(&local.eigen, truth)?,
        ise_eigenfunction(&naive.eigen, truth)?,
        imse_of(&local)?,
        imse_of(&naive)?,
    ])
}

fn run_one(
    config: &SimConfig,
    study: Study,
    options: &EigenStudyOptions,
    replicate: usize,
) -> Result<ReplicateSummary> {
    let sim = generate_dataset(config, replicate)?;
    let data = apply_detection_limit(&sim.dataset, config.dl)?;
    let mut out = ReplicateSummary {
        censored_fraction: Some(data.censored_fraction()),
        ..Default::default()
    };
    if study.scores() {
        let [mean, var, mse, mse2, var1, mse1] = score_study(config, &data, &sim.scores)?;
        out.score_mean = Some(mean);
        out.score_var = Some(var);
        out.mse_star = Some(mse);
        out.mse_dstar = Some(mse2);
        out.score_var_trad = Some(var1);
        out.mse_star_trad = Some(mse1);
    }
    if study.eigen() {
        let [il, inv, ml, mn] = eigen_study(config, &data, &sim.scores, options)?;
        out.ise_local = Some(il);
        out.ise_naive = Some(inv);
        out.imse_local = Some(ml);
        out.imse_naive = Some(mn);
    }
    Ok(out)
}

/// Runs `config.replicates` replicates in parallel and aggregates them in index order.
pub fn run_replicates(
    config: &SimConfig,
    study: Study,
    options: &EigenStudyOptions,
) -> Result<ReplicateRun> {
    config.validate()?;
    let rows: Vec<ReplicateRow> = (0..config.replicates)
        .into_par_iter()
        .map(|index| ReplicateRow {
            index,
            result: run_one(config, study, options, index),
        })
        .collect();

    let mut sums = [0.0f64; 11];
    let mut counts = [0usize; 11];
    let mut failed = 0;
    for row in &rows {
        match &row.result {
            Ok(summary) => {
                for (k, v) in summary.fields().iter().enumerate() {
                    if let Some(v) = v {
                        sums[k] += v;
                        counts[k] += 1;
                    }
                }
            }
            Err(_) => failed += 1,
        }
    }
    let mut agg = [None; 11];
    for k in 0..11 {
        if counts[k] > 0 {
            agg[k] = Some(sums[k] / counts[k] as f64);
        }
    }
    Ok(ReplicateRun {
        rows,
        aggregate: ReplicateSummary::from_fields(agg),
        failed,
    })
}
