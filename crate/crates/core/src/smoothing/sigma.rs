use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{invalid_argument, FpcaError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMethod {
    /// Residual root mean square of a global polynomial fit of the given degree.
    PolynomialLeastSquares { degree: usize },
    /// Supplied by the caller.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub sigma: f64,
    pub method: SigmaMethod,
}

impl SigmaEstimate {
    pub fn fixed(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid_argument(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(Self {
            sigma,
            method: SigmaMethod::Fixed,
        })
    }

    pub fn describe(&self) -> String {
        match self.method {
            SigmaMethod::PolynomialLeastSquares { degree } => {
                format!("polynomial least squares, degree {degree}")
            }
            SigmaMethod::Fixed => "fixed".to_string(),
        }
    }
}

/// Fits a global polynomial in time to all pooled `(t, y)` pairs, censored entries at
/// their recorded value, and returns the residual root mean square with `N - degree - 1`
/// degrees of freedom.
pub fn estimate_sigma(dataset: &Dataset, degree: usize) -> Result<SigmaEstimate> {
    let total = dataset.total_observations();
    if total <= degree + 1 {
        return Err(invalid_argument(format!(
            "{total} observations cannot support a degree-{degree} fit"
        )));
    }
    let (a, b) = dataset.domain();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut design = DMatrix::<f64>::zeros(total, degree + 1);
    let mut response = DVector::<f64>::zeros(total);
    let mut row = 0;
    for tr in dataset.trajectories() {
        for (&t, y) in tr.times().iter().zip(tr.raw_values()) {
            let x = (t - mid) / half;
            let mut p = 1.0;
            for k in 0..=degree {
                design[(row, k)] = p;
                p *= x;
            }
            response[row] = y;
            row += 1;
        }
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return Err(FpcaError::SingularFit(format!(
            "design of degree {degree} is rank deficient (observation times are not distinct enough)"
        )));
    }
    let coef = svd
        .solve(&response, 0.0)
        .map_err(|e| FpcaError::SingularFit(e.to_string()))?;
    let resid = &response - &design * coef;
    let dof = (total - degree - 1) as f64;
    Ok(SigmaEstimate {
        sigma: (resid.norm_squared() / dof).sqrt(),
        method: SigmaMethod::PolynomialLeastSquares { degree },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Trajectory;

    fn dataset(points: &[(f64, f64)]) -> Dataset {
        let trajs = points
            .chunks(3)
            .enumerate()
            .map(|(i, c)| {
                Trajectory::new(
                    format!("s{i}"),
                    c.iter().map(|p| p.0).collect(),
                    c.iter().map(|p| p.1).collect(),
                    vec![false; c.len()],
                )
                .unwrap()
            })
            .collect();
        Dataset::new(trajs, None, Some((0.0, 1.0))).unwrap()
    }

    #[test]
    fn constant_data_has_zero_sigma() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 / 8.0, 3.0)).collect();
        let s = estimate_sigma(&dataset(&pts), 0).unwrap();
        assert!(s.sigma.abs() < 1e-12);
    }

    #[test]
    fn linear_data_has_zero_sigma() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64 / 8.0, 2.0 * i as f64 / 8.0)).collect();
        let s = estimate_sigma(&dataset(&pts), 1).unwrap();
        assert!(s.sigma.abs() < 1e-12);
    }

    #[test]
    fn identical_times_are_singular() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (0.5, i as f64)).collect();
        let err = estimate_sigma(&dataset(&pts), 1).unwrap_err();
        assert!(matches!(err, FpcaError::SingularFit(_)));
    }

    #[test]
    fn too_few_observations() {
        let pts = [(0.1, 1.0), (0.2, 2.0), (0.3, 0.0)];
        assert!(estimate_sigma(&dataset(&pts), 2).is_err());
    }
}
