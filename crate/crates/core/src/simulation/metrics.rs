use crate::eigen::EigenSystem;
use crate::error::{invalid_argument, Result};

/// `min_s sum_g w_g (s psi_hat_1 - psi)^2` over signs `s`.
pub fn ise_eigenfunction(est: &EigenSystem, truth: impl Fn(f64) -> f64) -> Result<f64> {
    let f = est
        .eigenfunctions
        .first()
        .ok_or_else(|| invalid_argument("eigen system has no components"))?;
    let grid = &est.grid;
    let (mut plus, mut minus) = (0.0, 0.0);
    for ((&w, &t), &v) in grid.weights().iter().zip(grid.points()).zip(f) {
        let p = truth(t);
        plus += w * (v - p).powi(2);
        minus += w * (v + p).powi(2);
    }
    Ok(plus.min(minus))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMetrics {
    pub mean: f64,
    /// Sample variance with denominator `n - 1` (0 for a single subject).
    pub variance: f64,
    /// `(1/n) sum (xi_hat - xi)^2`.
    pub mse_star: f64,
    /// `(1/n) sum (xi_hat - A)^2`.
    pub mse_dstar: f64,
}

pub fn score_metrics(xi_hat: &[f64], xi_true: &[f64], centering: &[f64]) -> Result<ScoreMetrics> {
    let n = xi_hat.len();
    if n == 0 || xi_true.len() != n || centering.len() != n {
        return Err(invalid_argument(format!(
            "score arrays must be non-empty and equal in length ({n}, {}, {})",
            xi_true.len(),
            centering.len()
        )));
    }
    let nf = n as f64;
    let mean = xi_hat.iter().sum::<f64>() / nf;
    let variance = if n > 1 {
        xi_hat.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
    } else {
        0.0
    };
    let mse = |other: &[f64]| xi_hat.iter().zip(other).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / nf;
    Ok(ScoreMetrics {
        mean,
        variance,
        mse_star: mse(xi_true),
        mse_dstar: mse(centering),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_uniform_grid;

    fn psi(t: f64) -> f64 {
        2f64.sqrt() * (4.0 * std::f64::consts::PI * t).cos()
    }

    fn system(f: impl Fn(f64) -> f64) -> EigenSystem {
        let grid = make_uniform_grid(0.0, 1.0, 101).unwrap();
        let v = grid.points().iter().map(|&t| f(t)).collect();
        EigenSystem {
            grid,
            eigenvalues: vec![1.0],
            raw_eigenvalues: vec![1.0],
            eigenfunctions: vec![v],
            raw_trace: 1.0,
        }
    }

    #[test]
    fn ise_cases() {
        assert_eq!(ise_eigenfunction(&system(psi), psi).unwrap(), 0.0);
        assert_eq!(ise_eigenfunction(&system(|t| -psi(t)), psi).unwrap(), 0.0);
        let shifted = ise_eigenfunction(&system(|t| psi(t) + 0.1), psi).unwrap();
        assert!((shifted - 0.01).abs() < 1e-6);
    }

    #[test]
    fn metric_cases() {
        let x = [0.5, -1.0, 2.0];
        let m = score_metrics(&x, &x, &x).unwrap();
        assert_eq!((m.mse_star, m.mse_dstar), (0.0, 0.0));
        let plus: Vec<f64> = x.iter().map(|v| v + 1.0).collect();
        let m = score_metrics(&plus, &x, &x).unwrap();
        assert!((m.mse_star - 1.0).abs() < 1e-15);
        assert!((m.mean - 1.5).abs() < 1e-15);
        assert!((m.variance - 2.25).abs() < 1e-15);
        assert!(score_metrics(&x, &x[..2], &x).is_err());
    }
}
