//! Curve reconstruction `X_hat = mu_hat + sum_l xi_l psi_l` and integrated squared errors.

use nalgebra::DVector;

use crate::data::Dataset;
use crate::eigen::EigenSystem;
use crate::error::{invalid_argument, Result};
use crate::grid::Grid;

/// Reconstructed curves on the eigen system's grid, one per score vector.
pub fn reconstruct_curves(
    mean: &[f64],
    eigen: &EigenSystem,
    scores: &[DVector<f64>],
) -> Result<Vec<Vec<f64>>> {
    let g = eigen.grid.len();
    if mean.len() != g {
        return Err(invalid_argument(format!(
            "mean has {} values for a {g}-point grid",
            mean.len()
        )));
    }
    scores
        .iter()
        .map(|xi| {
            if xi.len() > eigen.len() {
                return Err(invalid_argument(format!(
                    "{} scores but only {} components",
                    xi.len(),
                    eigen.len()
                )));
            }
            let mut curve = mean.to_vec();
            for (l, &x) in xi.iter().enumerate() {
                for (c, &psi) in curve.iter_mut().zip(&eigen.eigenfunctions[l]) {
                    *c += x * psi;
                }
            }
            Ok(curve)
        })
        .collect()
}

/// `(1/n) sum_i int (X_i - X_hat_i)^2` with both curves given on `grid`.
pub fn imse(grid: &Grid, truth: &[Vec<f64>], fitted: &[Vec<f64>]) -> Result<f64> {
    if truth.is_empty() || truth.len() != fitted.len() {
        return Err(invalid_argument(format!(
            "need matching non-empty curve sets ({} vs {})",
            truth.len(),
            fitted.len()
        )));
    }
    let mut total = 0.0;
    for (x, xh) in truth.iter().zip(fitted) {
        if x.len() != grid.len() || xh.len() != grid.len() {
            return Err(invalid_argument("curve length differs from the grid"));
        }
        let sq: Vec<f64> = x.iter().zip(xh).map(|(a, b)| (a - b).powi(2)).collect();
        total += grid.integrate(&sq);
    }
    Ok(total / truth.len() as f64)
}

/// Approximate IMSE for real data: each subject's uncensored observations, linearly
/// interpolated, stand in for its curve over the range they span. Subjects with fewer than
/// two uncensored observations are skipped; `None` if none remain.
pub fn observed_imse(dataset: &Dataset, grid: &Grid, fitted: &[Vec<f64>]) -> Result<Option<f64>> {
    if fitted.len() != dataset.n() {
        return Err(invalid_argument(format!(
            "{} fitted curves for {} subjects",
            fitted.len(),
            dataset.n()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (tr, xh) in dataset.trajectories().iter().zip(fitted) {
        let raw = tr.raw_values();
        let obs: Vec<(f64, f64)> = (0..tr.len())
            .filter(|&j| !tr.censored()[j])
            .map(|j| (tr.times()[j], raw[j]))
            .collect();
        if obs.len() < 2 || obs[0].0 == obs[obs.len() - 1].0 {
            continue;
        }
        let (lo, hi) = (obs[0].0, obs[obs.len() - 1].0);
        let mut err = 0.0;
        let mut len = 0.0;
        for (g, (&t, &w)) in grid.points().iter().zip(grid.weights()).enumerate() {
            if t < lo || t > hi {
                continue;
            }
            let k = obs.partition_point(|(s, _)| *s <= t).clamp(1, obs.len() - 1);
            let (t0, y0) = obs[k - 1];
            let (t1, y1) = obs[k];
            let y = if t1 > t0 { y0 + (y1 - y0) * (t - t0) / (t1 - t0) } else { y0 };
            err += w * (y - xh[g]).powi(2);
            len += w;
        }
        if len > 0.0 {
            total += err;
            used += 1;
        }
    }
    Ok((used > 0).then(|| total / used as f64))
}
