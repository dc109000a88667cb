use rayon::prelude::*;

use crate::data::{Dataset, WeightScheme};
use crate::error::{invalid_argument, invalid_input, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;

use super::covariance::covariance_pair_sums;
use super::mean::mean_sums;
use super::{local_constant_covariance, local_constant_mean, SUPPORT_FLOOR};

/// Everything besides the bandwidth that the local estimators need.
#[derive(Debug, Clone)]
pub struct SmoothingSetup {
    pub scheme: WeightScheme,
    pub sigma: f64,
    pub grid: Grid,
    pub kernel: Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthTarget {
    Mean,
    Covariance,
}

/// Criterion minimised over the candidate bandwidths.
#[derive(Clone, Copy)]
pub enum BandwidthObjective<'a> {
    /// Integrated squared error of the mean estimate against a known mean (simulation).
    OracleMean(&'a (dyn Fn(f64) -> f64 + Sync)),
    /// Integrated squared error of the raw covariance surface against a known surface.
    OracleCovariance(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
    /// Leave-one-subject-out squared prediction error on uncensored values (mean) or on
    /// products of uncensored within-subject pairs (covariance, centered data). Candidates
    /// whose full-data estimate is non-estimable anywhere on the grid are infeasible.
    CrossValidation(BandwidthTarget),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    pub candidates: Vec<f64>,
    /// Objective per candidate; `None` marks a candidate that left needed points
    /// non-estimable.
    pub scores: Vec<Option<f64>>,
}

/// 20 log-spaced values spanning 2% to 50% of the domain length.
pub fn default_candidates(domain: (f64, f64)) -> Vec<f64> {
    let len = domain.1 - domain.0;
    let (lo, hi) = ((0.02 * len).ln(), (0.5 * len).ln());
    (0..20)
        .map(|k| (lo + (hi - lo) * k as f64 / 19.0).exp())
        .collect()
}

pub fn select_bandwidth(
    dataset: &Dataset,
    candidates: &[f64],
    objective: BandwidthObjective<'_>,
    setup: &SmoothingSetup,
) -> Result<f64> {
    select_bandwidth_detailed(dataset, candidates, objective, setup).map(|s| s.bandwidth)
}

/// Scores every candidate and returns the minimiser; ties go to the smaller bandwidth.
pub fn select_bandwidth_detailed(
    dataset: &Dataset,
    candidates: &[f64],
    objective: BandwidthObjective<'_>,
    setup: &SmoothingSetup,
) -> Result<BandwidthSelection> {
    if candidates.is_empty() {
        return Err(invalid_argument("no candidate bandwidths supplied"));
    }
    if let Some(h) = candidates.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
        return Err(invalid_argument(format!("candidate bandwidth {h} is not positive")));
    }
    let scores: Vec<Option<f64>> = candidates
        .par_iter()
        .map(|&h| evaluate(dataset, h, objective, setup))
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, f64)> = None;
    for (&h, score) in candidates.iter().zip(&scores) {
        let Some(score) = *score else { continue };
        let better = match best {
            None => true,
            Some((bs, bh)) => score < bs || (score == bs && h < bh),
        };
        if better {
            best = Some((score, h));
        }
    }
    let (_, bandwidth) =
        best.ok_or_else(|| invalid_input("no candidate bandwidth yields estimable values"))?;
    Ok(BandwidthSelection {
        bandwidth,
        candidates: candidates.to_vec(),
        scores,
    })
}

fn evaluate(
    dataset: &Dataset,
    h: f64,
    objective: BandwidthObjective<'_>,
    setup: &SmoothingSetup,
) -> Result<Option<f64>> {
    let grid = &setup.grid;
    match objective {
        BandwidthObjective::OracleMean(truth) => {
            let est = local_constant_mean(dataset, h, setup.scheme, setup.sigma, grid, setup.kernel)?;
            if !est.all_estimable() {
                return Ok(None);
            }
            let sq: Vec<f64> = est
                .values
                .iter()
                .zip(grid.points())
                .map(|(v, &t)| (v - truth(t)).powi(2))
                .collect();
            Ok(Some(grid.integrate(&sq)))
        }
        BandwidthObjective::OracleCovariance(truth) => {
            let est =
                local_constant_covariance(dataset, h, setup.scheme, setup.sigma, grid, setup.kernel)?;
            if est.non_estimable_cells() > 0 {
                return Ok(None);
            }
            let w = grid.weights();
            let pts = grid.points();
            let mut ise = 0.0;
            for a in 0..grid.len() {
                for b in 0..grid.len() {
                    let e = est.values[(a, b)] - truth(pts[a], pts[b]);
                    ise += w[a] * w[b] * e * e;
                }
            }
            Ok(Some(ise))
        }
        BandwidthObjective::CrossValidation(BandwidthTarget::Mean) => {
            super::check_smoothing_args(dataset, h, setup.sigma)?;
            Ok(mean_cv(dataset, h, setup))
        }
        BandwidthObjective::CrossValidation(BandwidthTarget::Covariance) => {
            super::check_smoothing_args(dataset, h, setup.sigma)?;
            Ok(covariance_cv(dataset, h, setup))
        }
    }
}

/// Leave-one-out ratio with a relative guard against cancellation in the subtraction.
#[inline]
fn loo_ratio(num: f64, num_i: f64, den: f64, den_i: f64) -> Option<f64> {
    let rest = den - den_i;
    if rest > SUPPORT_FLOOR && rest > 1e-10 * den {
        Some((num - num_i) / rest)
    } else {
        None
    }
}

fn mean_cv(dataset: &Dataset, h: f64, setup: &SmoothingSetup) -> Option<f64> {
    let grid = &setup.grid;
    let weights = setup.scheme.mean_weights(dataset);
    let per_subject: Vec<(Vec<f64>, Vec<f64>)> = dataset
        .trajectories()
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            mean_sums(std::iter::once((i, tr)), &weights, h, setup.sigma, grid.points(), setup.kernel)
        })
        .collect();
    let g = grid.len();
    let mut num = vec![0.0; g];
    let mut den = vec![0.0; g];
    for (r, s) in &per_subject {
        for a in 0..g {
            num[a] += r[a];
            den[a] += s[a];
        }
    }

    if den.iter().any(|&d| d <= SUPPORT_FLOOR) {
        return None;
    }

    let mut sse = 0.0;
    let mut count = 0usize;
    let mut loo = vec![0.0; g];
    for (tr, (r, s)) in dataset.trajectories().iter().zip(&per_subject) {
        for a in 0..g {
            loo[a] = loo_ratio(num[a], r[a], den[a], s[a]).unwrap_or(f64::NAN);
        }
        for j in 0..tr.len() {
            if tr.censored()[j] {
                continue;
            }
            let pred = grid.interpolate(&loo, tr.times()[j])?;
            sse += (tr.values()[j] - pred).powi(2);
            count += 1;
        }
    }
    (count > 0).then(|| sse / count as f64)
}

fn covariance_cv(dataset: &Dataset, h: f64, setup: &SmoothingSetup) -> Option<f64> {
    let grid = &setup.grid;
    let weights = setup.scheme.covariance_weights(dataset);
    let full = covariance_pair_sums(
        dataset.trajectories().iter().zip(weights.iter().copied()),
        h,
        setup.sigma,
        grid,
        setup.kernel,
    );
    if full.den.iter().any(|&d| d <= SUPPORT_FLOOR) {
        return None;
    }

    let mut sse = 0.0;
    let mut count = 0usize;
    for (tr, &w) in dataset.trajectories().iter().zip(&weights) {
        let uncensored: Vec<usize> = (0..tr.len()).filter(|&j| !tr.censored()[j]).collect();
        if uncensored.len() < 2 {
            continue;
        }
        let own = covariance_pair_sums(std::iter::once((tr, w)), h, setup.sigma, grid, setup.kernel);
        let cell = |a: usize, b: usize| -> Option<f64> {
            loo_ratio(full.num[(a, b)], own.num[(a, b)], full.den[(a, b)], own.den[(a, b)])
        };
        for (x, &j) in uncensored.iter().enumerate() {
            for &l in &uncensored[x + 1..] {
                let (s, t) = (tr.times()[j], tr.times()[l]);
                let pred = bilinear(grid, &cell, s, t)?;
                sse += (tr.values()[j] * tr.values()[l] - pred).powi(2);
                count += 1;
            }
        }
    }
    (count > 0).then(|| sse / count as f64)
}

fn bilinear(grid: &Grid, cell: &dyn Fn(usize, usize) -> Option<f64>, s: f64, t: f64) -> Option<f64> {
    let (a, fa) = grid.bracket(s)?;
    let (b, fb) = grid.bracket(t)?;
    let mut out = 0.0;
    for (da, wa) in [(0, 1.0 - fa), (1, fa)] {
        for (db, wb) in [(0, 1.0 - fb), (1, fb)] {
            let w = wa * wb;
            if w > 0.0 {
                let (x, y) = (a + da, b + db);
                let v = 0.5 * (cell(x, y)? + cell(y, x)?);
                out += w * v;
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Trajectory;
    use crate::grid::make_uniform_grid;

    fn setup() -> SmoothingSetup {
        SmoothingSetup {
            scheme: WeightScheme::Obs,
            sigma: 1.0,
            grid: make_uniform_grid(0.0, 1.0, 21).unwrap(),
            kernel: Kernel::Gaussian,
        }
    }

    fn toy() -> Dataset {
        let trajs = (0..6)
            .map(|i| {
                let t: Vec<f64> = (0..5).map(|j| (i as f64 * 0.03 + j as f64 * 0.19).min(1.0)).collect();
                let y: Vec<f64> = t.iter().map(|t| (6.0 * t).sin() + 0.1 * i as f64).collect();
                Trajectory::new(format!("s{i}"), t, y, vec![false; 5]).unwrap()
            })
            .collect();
        Dataset::new(trajs, None, Some((0.0, 1.0))).unwrap()
    }

    #[test]
    fn single_candidate_is_returned() {
        let h = select_bandwidth(&toy(), &[0.1], BandwidthObjective::CrossValidation(BandwidthTarget::Mean), &setup()).unwrap();
        assert_eq!(h, 0.1);
    }

    #[test]
    fn empty_candidates_rejected() {
        assert!(select_bandwidth(&toy(), &[], BandwidthObjective::CrossValidation(BandwidthTarget::Mean), &setup()).is_err());
    }

    #[test]
    fn infeasible_candidate_excluded() {
        let sel = select_bandwidth_detailed(
            &toy(),
            &[1e-5, 0.1],
            BandwidthObjective::CrossValidation(BandwidthTarget::Mean),
            &setup(),
        )
        .unwrap();
        assert_eq!(sel.scores[0], None);
        assert_eq!(sel.bandwidth, 0.1);
    }

    #[test]
    fn ties_prefer_smaller_bandwidth() {
        // constant data: every bandwidth reproduces the constant exactly
        let trajs = (0..4)
            .map(|i| Trajectory::new(format!("s{i}"), vec![0.1, 0.5, 0.9], vec![2.0; 3], vec![false; 3]).unwrap())
            .collect();
        let ds = Dataset::new(trajs, None, Some((0.0, 1.0))).unwrap();
        let truth = |_t: f64| 2.0;
        let sel = select_bandwidth_detailed(&ds, &[0.4, 0.2, 0.3], BandwidthObjective::OracleMean(&truth), &setup()).unwrap();
        assert!(sel.scores.iter().all(|s| s.unwrap() < 1e-24));
        assert_eq!(sel.bandwidth, 0.2);
    }

    #[test]
    fn covariance_cv_runs() {
        let sel = select_bandwidth_detailed(
            &toy(),
            &[0.05, 0.1, 0.3],
            BandwidthObjective::CrossValidation(BandwidthTarget::Covariance),
            &setup(),
        )
        .unwrap();
        assert!(sel.scores.iter().any(|s| s.is_some()));
    }

    #[test]
    fn default_grid_shape() {
        let c = default_candidates((0.0, 2.0));
        assert_eq!(c.len(), 20);
        assert!((c[0] - 0.04).abs() < 1e-12);
        assert!((c[19] - 1.0).abs() < 1e-12);
        assert!(c.windows(2).all(|w| w[1] > w[0]));
    }
}
