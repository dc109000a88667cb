//! Per-subject principal component scores from the approximated censored likelihood,
//! together with their finite-sample centering and variance surrogates.

mod basis;
mod likelihood;

pub use basis::{Basis, EigenBasis, FunctionBasis};
pub use likelihood::{ln_normal_cdf, ln_normal_pdf, log_phi_approx, score_log_likelihood};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::constants::{information_weight, pseudo_value};
use crate::data::{Dataset, Trajectory};
use crate::error::{invalid_argument, invalid_input, FpcaError, Result};

/// A score system `T xi = r + s` with condition estimates above this is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// `T_kl = sum_j (1 - 0.498 delta_j) psi_k psi_l`, `r_l = sum_j (1 - delta_j) y_j psi_l`,
/// `s_l = sum_j delta_j (0.502 c_j - 0.8194 sigma) psi_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSystem {
    pub t: DMatrix<f64>,
    pub r: DVector<f64>,
    pub s: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEstimate {
    pub xi: DVector<f64>,
    /// `T^-1`.
    pub q: DMatrix<f64>,
    /// Ratio of the extreme eigenvalues of `T`.
    pub cond: f64,
}

/// Finite-sample centering `A` and covariance `V` of `sqrt(N) (xi_hat - A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticMoments {
    pub a: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// `N x L` matrix of basis values at the observation times.
pub(crate) fn basis_matrix(traj: &Trajectory, basis: &dyn Basis) -> Result<DMatrix<f64>> {
    let mut p = DMatrix::zeros(traj.len(), basis.len());
    for (j, &t) in traj.times().iter().enumerate() {
        for l in 0..basis.len() {
            p[(j, l)] = basis.eval(l, t).ok_or_else(|| {
                invalid_input(format!(
                    "subject {}: component {} cannot be evaluated at t = {t}",
                    traj.subject_id(),
                    l + 1
                ))
            })?;
        }
    }
    Ok(p)
}

fn check_inputs(traj: &Trajectory, basis: &dyn Basis, sigma: f64) -> Result<()> {
    if basis.is_empty() {
        return Err(invalid_argument("at least one component is required"));
    }
    if traj.censored_count() > 0 && !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid_argument(format!(
            "censored data need a positive noise level, got sigma = {sigma}"
        )));
    }
    Ok(())
}

/// Assembles the linear system for one (centered) trajectory. Censored entries carry their
/// effective detection limit as the recorded value.
pub fn build_score_system(traj: &Trajectory, basis: &dyn Basis, sigma: f64) -> Result<ScoreSystem> {
    check_inputs(traj, basis, sigma)?;
    let p = basis_matrix(traj, basis)?;
    Ok(system_from_matrix(traj, &p, sigma))
}

fn system_from_matrix(traj: &Trajectory, p: &DMatrix<f64>, sigma: f64) -> ScoreSystem {
    let l = p.ncols();
    let mut t = DMatrix::zeros(l, l);
    let mut r = DVector::zeros(l);
    let mut s = DVector::zeros(l);
    for j in 0..traj.len() {
        let d = traj.censored()[j];
        let y = traj.values()[j];
        let w = information_weight(d);
        for a in 0..l {
            let pa = p[(j, a)];
            if d {
                s[a] += pseudo_value(y, true, sigma) * pa;
            } else {
                r[a] += y * pa;
            }
            for b in 0..=a {
                t[(a, b)] += w * pa * p[(j, b)];
            }
        }
    }
    for a in 0..l {
        for b in 0..a {
            t[(b, a)] = t[(a, b)];
        }
    }
    ScoreSystem { t, r, s }
}

/// Solves `T xi = r + s`.
pub fn estimate_scores(system: &ScoreSystem) -> Result<ScoreEstimate> {
    let l = system.t.nrows();
    let eig = SymmetricEigen::new(system.t.clone());
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(v.abs())));
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= CONDITION_LIMIT) {
        return Err(FpcaError::IllConditioned {
            components: l,
            condition: cond,
        });
    }
    let chol = system.t.clone().cholesky().ok_or(FpcaError::IllConditioned {
        components: l,
        condition: cond,
    })?;
    let rhs = &system.r + &system.s;
    let xi = chol.solve(&rhs);
    let q = chol.inverse();
    Ok(ScoreEstimate { xi, q, cond })
}

/// Builds and solves in one step.
pub fn subject_scores(traj: &Trajectory, basis: &dyn Basis, sigma: f64) -> Result<ScoreEstimate> {
    estimate_scores(&build_score_system(traj, basis, sigma)?)
}

/// Scores for every subject, in dataset order.
pub fn estimate_all_scores(
    dataset: &Dataset,
    basis: &dyn Basis,
    sigma: f64,
) -> Vec<Result<ScoreEstimate>> {
    dataset
        .trajectories()
        .par_iter()
        .map(|tr| subject_scores(tr, basis, sigma))
        .collect()
}

/// The unadjusted estimate `(1/N) sum_j y_j psi_l(t_j)` that treats recorded values at the
/// limit as genuine observations.
pub fn traditional_scores(traj: &Trajectory, basis: &dyn Basis) -> Result<DVector<f64>> {
    if basis.is_empty() {
        return Err(invalid_argument("at least one component is required"));
    }
    let p = basis_matrix(traj, basis)?;
    let y = DVector::from_column_slice(traj.values());
    Ok(p.transpose() * y / traj.len() as f64)
}

/// `A_l = sum_k Q_kl [sum_j (1-delta_j) (sum_k' xi_k' psi_k') psi_k + S_k]` and
/// `V_ll' = N sigma^2 sum_kk' Q_kl Q_k'l' sum_j (1-delta_j)^2 psi_k psi_k'`, evaluated at the
/// given true scores without passing to the limit.
pub fn asymptotic_moments(
    traj: &Trajectory,
    basis: &dyn Basis,
    sigma: f64,
    xi_true: &[f64],
) -> Result<AsymptoticMoments> {
    check_inputs(traj, basis, sigma)?;
    if xi_true.len() != basis.len() {
        return Err(invalid_argument(format!(
            "{} true scores given for {} components",
            xi_true.len(),
            basis.len()
        )));
    }
    let p = basis_matrix(traj, basis)?;
    let system = system_from_matrix(traj, &p, sigma);
    let q = estimate_scores(&system)?.q;

    let l = basis.len();
    let xi = DVector::from_column_slice(xi_true);
    let mut signal = DVector::zeros(l);
    let mut h = DMatrix::zeros(l, l);
    for j in 0..traj.len() {
        if traj.censored()[j] {
            continue;
        }
        let row = p.row(j).transpose();
        let x = row.dot(&xi);
        signal += &row * x;
        h += &row * row.transpose();
    }
    // Q is symmetric, so sum_k Q_kl u_k = (Q u)_l
    let a = &q * (signal + &system.s);
    let mut v = &q * h * &q * (traj.len() as f64 * sigma * sigma);
    let vt = v.transpose();
    v = (&v + vt) * 0.5;
    Ok(AsymptoticMoments { a, v })
}
