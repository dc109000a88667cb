//! Coefficients of the quadratic stand-in for the log normal CDF,
//! `log Phi(x) ~ LOG_PHI_INTERCEPT + LOG_PHI_SLOPE x - LOG_PHI_CURVATURE x^2` on `[-1, 2]`.
//!
//! Every estimator derives its censored-observation terms from these, so the
//! mean, covariance and score equations agree bit for bit.

pub const LOG_PHI_INTERCEPT: f64 = -0.7127;
pub const LOG_PHI_SLOPE: f64 = 0.8194;
pub const LOG_PHI_CURVATURE: f64 = 0.251;

/// Weight of a censored observation in the estimating equations (`2 * 0.251`).
pub const CENSORED_WEIGHT: f64 = 0.502;

/// Down-weighting of a censored observation's information (`1 - 0.502`).
pub const CENSORED_DEFICIT: f64 = 0.498;

/// Validity range of the quadratic approximation.
pub const LOG_PHI_RANGE: (f64, f64) = (-1.0, 2.0);

/// Numerator contribution of one observation: `-0.8194 delta sigma + 0.502 delta c + (1 - delta) y`.
///
/// For censored entries `value` carries the (possibly shifted) detection limit.
#[inline]
pub fn pseudo_value(value: f64, censored: bool, sigma: f64) -> f64 {
    if censored {
        CENSORED_WEIGHT * value - LOG_PHI_SLOPE * sigma
    } else {
        value
    }
}

/// Denominator contribution of one observation: `1 - 0.498 delta`.
#[inline]
pub fn information_weight(censored: bool) -> f64 {
    if censored {
        1.0 - CENSORED_DEFICIT
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_agree() {
        assert_eq!(CENSORED_WEIGHT, 2.0 * LOG_PHI_CURVATURE);
        assert_eq!(information_weight(true), CENSORED_WEIGHT);
        assert_eq!(information_weight(false), 1.0);
    }

    #[test]
    fn pseudo_value_matches_closed_form() {
        assert_eq!(pseudo_value(4.0, false, 1.0), 4.0);
        assert!((pseudo_value(0.0, true, 1.0) + 0.8194).abs() < 1e-15);
        assert!((pseudo_value(-1.0, true, 2.0) - (-0.502 - 1.6388)).abs() < 1e-14);
    }
}
