use crate::constants::{information_weight, pseudo_value};
use crate::data::{Dataset, WeightScheme};
use crate::error::Result;
use crate::grid::Grid;
use crate::kernel::Kernel;

use super::{check_smoothing_args, SUPPORT_FLOOR};

/// Local-constant mean estimate on a grid. Non-estimable points hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Denominator `S_0` at each grid point; the local information available there.
    pub support: Vec<f64>,
    pub bandwidth: f64,
    pub scheme: WeightScheme,
    pub sigma: f64,
}

impl MeanEstimate {
    pub fn is_estimable(&self, g: usize) -> bool {
        self.values[g].is_finite()
    }

    pub fn all_estimable(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Linear interpolation between grid points; `None` if a needed point is non-estimable.
    pub fn at(&self, t: f64) -> Option<f64> {
        self.grid.interpolate(&self.values, t)
    }

    /// Identically-zero mean on `grid` (used when the mean is known).
    pub fn zero(grid: Grid) -> Self {
        let g = grid.len();
        Self {
            grid,
            values: vec![0.0; g],
            support: vec![f64::INFINITY; g],
            bandwidth: f64::NAN,
            scheme: WeightScheme::Obs,
            sigma: 0.0,
        }
    }
}

/// Accumulates `(R_0, S_0)` at each evaluation point over the given subjects.
pub(crate) fn mean_sums<'a>(
    subjects: impl Iterator<Item = (usize, &'a crate::data::Trajectory)>,
    weights: &[f64],
    h: f64,
    sigma: f64,
    points: &[f64],
    kernel: Kernel,
) -> (Vec<f64>, Vec<f64>) {
    let mut num = vec![0.0; points.len()];
    let mut den = vec![0.0; points.len()];
    for (i, tr) in subjects {
        let w = weights[i];
        for j in 0..tr.len() {
            let d = tr.censored()[j];
            let p = w * pseudo_value(tr.values()[j], d, sigma);
            let q = w * information_weight(d);
            let tj = tr.times()[j];
            for (g, &t) in points.iter().enumerate() {
                let k = kernel.scaled_unchecked(h, tj - t);
                num[g] += p * k;
                den[g] += q * k;
            }
        }
    }
    (num, den)
}

/// Local-constant likelihood estimate of the mean, `R_0 / S_0`, on `grid`.
pub fn local_constant_mean(
    dataset: &Dataset,
    h: f64,
    scheme: WeightScheme,
    sigma: f64,
    grid: &Grid,
    kernel: Kernel,
) -> Result<MeanEstimate> {
    check_smoothing_args(dataset, h, sigma)?;
    let weights = scheme.mean_weights(dataset);
    let (num, den) = mean_sums(
        dataset.trajectories().iter().enumerate(),
        &weights,
        h,
        sigma,
        grid.points(),
        kernel,
    );
    let values = num
        .iter()
        .zip(&den)
        .map(|(&r, &s)| if s > SUPPORT_FLOOR { r / s } else { f64::NAN })
        .collect();
    Ok(MeanEstimate {
        grid: grid.clone(),
        values,
        support: den,
        bandwidth: h,
        scheme,
        sigma,
    })
}
