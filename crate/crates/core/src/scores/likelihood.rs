use statrs::function::erf::erfc;

use crate::constants::{LOG_PHI_CURVATURE, LOG_PHI_INTERCEPT, LOG_PHI_SLOPE};
use crate::data::Trajectory;
use crate::error::{invalid_argument, Result};

use super::{basis_matrix, Basis};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `-0.7127 + 0.8194 x - 0.251 x^2`; accurate on `[-1, 2]` only.
#[inline]
pub fn log_phi_approx(x: f64) -> f64 {
    LOG_PHI_INTERCEPT + LOG_PHI_SLOPE * x - LOG_PHI_CURVATURE * x * x
}

/// `log Phi(x)` without cancellation in either tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p()
    } else if x > -37.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Mills-ratio expansion once erfc underflows
        let z = -x;
        let z2 = z * z;
        -0.5 * z2 - z.ln() - LN_SQRT_2PI + (-1.0 / z2 + 3.0 / (z2 * z2)).ln_1p()
    }
}

#[inline]
pub fn ln_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Exact log-likelihood of one trajectory given scores `xi`: normal densities for observed
/// values and normal CDFs at the detection limit for censored ones.
pub fn score_log_likelihood(
    traj: &Trajectory,
    basis: &dyn Basis,
    sigma: f64,
    xi: &[f64],
) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid_argument(format!("sigma must be positive, got {sigma}")));
    }
    if xi.len() != basis.len() {
        return Err(invalid_argument(format!(
            "{} scores given for {} components",
            xi.len(),
            basis.len()
        )));
    }
    let p = basis_matrix(traj, basis)?;
    let mut ll = 0.0;
    for j in 0..traj.len() {
        let fitted: f64 = (0..xi.len()).map(|l| xi[l] * p[(j, l)]).sum();
        let z = (traj.values()[j] - fitted) / sigma;
        ll += if traj.censored()[j] {
            ln_normal_cdf(z)
        } else {
            ln_normal_pdf(z) - sigma.ln()
        };
    }
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::FunctionBasis;

    #[test]
    fn approximation_constants() {
        assert_eq!(log_phi_approx(0.0), -0.7127);
        assert!((ln_normal_cdf(0.0) + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn tails_are_continuous() {
        let left = ln_normal_cdf(-37.0 + 1e-9);
        let right = ln_normal_cdf(-37.0 - 1e-9);
        assert!((left - right).abs() / left.abs() < 1e-6);
        assert!(ln_normal_cdf(8.0) < 0.0 && ln_normal_cdf(8.0) > -1e-14);
    }

    #[test]
    fn uncensored_likelihood_is_gaussian() {
        let tr = Trajectory::new("a", vec![0.0, 1.0], vec![1.0, 3.0], vec![false, false]).unwrap();
        let basis = FunctionBasis::single(|t| 1.0 + t);
        // fitted values 2 and 4, residuals -1, -1, sigma 2
        let ll = score_log_likelihood(&tr, &basis, 2.0, &[2.0]).unwrap();
        let expected = 2.0 * (-(0.5f64 * 0.25) - 0.5 * (2.0 * std::f64::consts::PI).ln() - 2f64.ln());
        assert!((ll - expected).abs() < 1e-14);
    }
}
