use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{Dataset, Trajectory, WeightScheme};
use crate::error::{invalid_argument, FpcaError, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;
use crate::simulation::{apply_detection_limit, generate_dataset, stream, SimConfig};
use crate::smoothing::{local_constant_covariance, SmoothingSetup};

use super::BiasCorrection;

const MIN_REPLICATES: usize = 100;

/// Estimates `B(s, t)` as the average of `C_tilde / sigma^2` over pure-noise data drawn
/// from `model` (which must have `lambda = 0`) and censored at its detection limit.
pub fn calibrate_bias_mc(
    model: &SimConfig,
    grid: &Grid,
    h: f64,
    replicates: usize,
    seed: u64,
) -> Result<BiasCorrection> {
    if model.lambda != 0.0 {
        return Err(invalid_argument("bias calibration needs a no-signal model (lambda = 0)"));
    }
    if !(model.sigma_eps > 0.0) {
        return Err(invalid_argument("bias calibration needs sigma_eps > 0"));
    }
    check_replicates(replicates)?;
    let model = SimConfig { seed, ..model.clone() };
    let s2 = model.sigma_eps * model.sigma_eps;
    let surfaces: Vec<DMatrix<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let data = apply_detection_limit(&generate_dataset(&model, r)?.dataset, model.dl)?;
            noise_surface(&data, h, WeightScheme::Obs, model.sigma_eps, grid, Kernel::Gaussian)
        })
        .collect::<Result<_>>()?;
    Ok(BiasCorrection::MonteCarlo(average(surfaces, replicates, s2)))
}

/// Design-matched calibration: pure noise `N(0, sigma^2)` at the dataset's own observation
/// times, censored at each observation's effective limit, smoothed with the dataset's
/// settings.
pub fn calibrate_bias_design(
    dataset: &Dataset,
    h: f64,
    setup: &SmoothingSetup,
    replicates: usize,
    seed: u64,
) -> Result<BiasCorrection> {
    if !(setup.sigma > 0.0 && setup.sigma.is_finite()) {
        return Err(invalid_argument("bias calibration needs a positive noise level"));
    }
    check_replicates(replicates)?;
    let c = dataset.detection_limit();
    let sigma = setup.sigma;
    let surfaces: Vec<DMatrix<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r, 0);
            let trajectories = dataset
                .trajectories()
                .iter()
                .map(|tr| {
                    let n = tr.len();
                    let mut values = Vec::with_capacity(n);
                    let mut censored = Vec::with_capacity(n);
                    for j in 0..n {
                        let z: f64 = rng.sample(StandardNormal);
                        let y = sigma * z;
                        match c.map(|c| c - tr.offsets()[j]) {
                            Some(limit) if y < limit => {
                                values.push(limit);
                                censored.push(true);
                            }
                            _ => {
                                values.push(y);
                                censored.push(false);
                            }
                        }
                    }
                    Trajectory::with_offsets(
                        tr.subject_id().to_string(),
                        tr.times().to_vec(),
                        values,
                        censored,
                        tr.offsets().to_vec(),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let data = Dataset::from_parts_unchecked(trajectories, c, dataset.domain());
            noise_surface(&data, h, setup.scheme, sigma, &setup.grid, setup.kernel)
        })
        .collect::<Result<_>>()?;
    Ok(BiasCorrection::MonteCarlo(average(surfaces, replicates, sigma * sigma)))
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < MIN_REPLICATES {
        return Err(invalid_argument(format!(
            "bias calibration needs at least {MIN_REPLICATES} replicates, got {replicates}"
        )));
    }
    Ok(())
}

fn noise_surface(
    data: &Dataset,
    h: f64,
    scheme: WeightScheme,
    sigma: f64,
    grid: &Grid,
    kernel: Kernel,
) -> Result<DMatrix<f64>> {
    let raw = local_constant_covariance(data, h, scheme, sigma, grid, kernel)?;
    let bad = raw.non_estimable_cells();
    if bad > 0 {
        return Err(FpcaError::NonEstimableSurface { cells: bad });
    }
    Ok(raw.values)
}

fn average(surfaces: Vec<DMatrix<f64>>, replicates: usize, s2: f64) -> DMatrix<f64> {
    let mut iter = surfaces.into_iter();
    let mut acc = iter.next().expect("at least one replicate");
    for s in iter {
        acc += s;
    }
    acc / (replicates as f64 * s2)
}
