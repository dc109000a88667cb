use nalgebra::DMatrix;

use crate::constants::{information_weight, pseudo_value};
use crate::data::{Dataset, Trajectory, WeightScheme};
use crate::error::{invalid_input, Result};
use crate::grid::Grid;
use crate::kernel::Kernel;

use super::{check_smoothing_args, SUPPORT_FLOOR};

/// Raw local-constant covariance surface `R_00 / S_00` on `grid x grid`, symmetrized.
/// Non-estimable cells hold `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSurfaceRaw {
    pub grid: Grid,
    pub values: DMatrix<f64>,
    /// Denominator `S_00` per cell.
    pub support: DMatrix<f64>,
    pub bandwidth: f64,
    pub scheme: WeightScheme,
    pub sigma: f64,
}

impl CovSurfaceRaw {
    pub fn non_estimable_cells(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }
}

/// Numerator and denominator of the pair-based estimator over ordered pairs `j != l`.
pub(crate) struct PairSums {
    pub num: DMatrix<f64>,
    pub den: DMatrix<f64>,
}

/// Sums `v_i K_h(t_ij - s) K_h(t_il - t) C_ijl` (and the `D_ijl` analogue) over
/// ordered within-subject pairs.
///
/// The inner sum over `l != j` is formed from prefix and suffix sums, so no term is ever
/// added and then subtracted again.
pub(crate) fn covariance_pair_sums<'a>(
    subjects: impl IntoIterator<Item = (&'a Trajectory, f64)>,
    h: f64,
    sigma: f64,
    grid: &Grid,
    kernel: Kernel,
) -> PairSums {
    let g = grid.len();
    let subjects: Vec<(&Trajectory, f64)> = subjects
        .into_iter()
        .filter(|(tr, w)| tr.len() >= 2 && *w > 0.0)
        .collect();
    let cols: usize = subjects.iter().map(|(tr, _)| tr.len()).sum();

    let mut x_num = DMatrix::<f64>::zeros(g, cols);
    let mut y_num = DMatrix::<f64>::zeros(g, cols);
    let mut x_den = DMatrix::<f64>::zeros(g, cols);
    let mut y_den = DMatrix::<f64>::zeros(g, cols);

    let mut col = 0;
    let mut kern = Vec::new();
    for (tr, w) in subjects {
        let n = tr.len();
        kern.clear();
        kern.resize(n * g, 0.0);
        let mut p = Vec::with_capacity(n);
        let mut d = Vec::with_capacity(n);
        for j in 0..n {
            let tj = tr.times()[j];
            for (a, &s) in grid.points().iter().enumerate() {
                kern[j * g + a] = kernel.scaled_unchecked(h, tj - s);
            }
            p.push(pseudo_value(tr.values()[j], tr.censored()[j], sigma));
            d.push(information_weight(tr.censored()[j]));
        }

        // suffix sums land in the Y columns first, the prefix is added on the way forward
        let mut run_p = vec![0.0; g];
        let mut run_d = vec![0.0; g];
        for j in (0..n).rev() {
            for a in 0..g {
                y_num[(a, col + j)] = run_p[a];
                y_den[(a, col + j)] = run_d[a];
                run_p[a] += p[j] * kern[j * g + a];
                run_d[a] += d[j] * kern[j * g + a];
            }
        }
        run_p.iter_mut().for_each(|v| *v = 0.0);
        run_d.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            for a in 0..g {
                let k = kern[j * g + a];
                y_num[(a, col + j)] += run_p[a];
                y_den[(a, col + j)] += run_d[a];
                x_num[(a, col + j)] = w * p[j] * k;
                x_den[(a, col + j)] = w * d[j] * k;
                run_p[a] += p[j] * k;
                run_d[a] += d[j] * k;
            }
        }
        col += n;
    }

    PairSums {
        num: &x_num * y_num.transpose(),
        den: &x_den * y_den.transpose(),
    }
}

pub(crate) fn ratio_surface(sums: &PairSums) -> DMatrix<f64> {
    let g = sums.num.nrows();
    let ratio = DMatrix::from_fn(g, g, |a, b| {
        let s = sums.den[(a, b)];
        if s > SUPPORT_FLOOR {
            sums.num[(a, b)] / s
        } else {
            f64::NAN
        }
    });
    symmetrize(&ratio)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| 0.5 * (m[(a, b)] + m[(b, a)]))
}

/// Local-constant likelihood estimate of the covariance surface of a mean-zero
/// (already centered) dataset.
pub fn local_constant_covariance(
    dataset: &Dataset,
    h: f64,
    scheme: WeightScheme,
    sigma: f64,
    grid: &Grid,
    kernel: Kernel,
) -> Result<CovSurfaceRaw> {
    check_smoothing_args(dataset, h, sigma)?;
    if dataset.trajectories().iter().all(|t| t.len() < 2) {
        return Err(invalid_input(
            "covariance estimation needs at least one subject with two or more observations",
        ));
    }
    let weights = scheme.covariance_weights(dataset);
    let sums = covariance_pair_sums(
        dataset.trajectories().iter().zip(weights.iter().copied()),
        h,
        sigma,
        grid,
        kernel,
    );
    let values = ratio_surface(&sums);
    Ok(CovSurfaceRaw {
        grid: grid.clone(),
        values,
        support: symmetrize(&sums.den),
        bandwidth: h,
        scheme,
        sigma,
    })
}
