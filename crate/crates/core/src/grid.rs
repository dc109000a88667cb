use crate::error::{invalid_argument, Result};

/// Evaluation points on the domain together with trapezoidal quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Builds a grid from strictly increasing points, assigning trapezoidal weights.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid_argument(format!(
                "a grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid_argument("grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid_argument("grid points must be strictly increasing"));
        }
        let g = points.len();
        let weights = (0..g)
            .map(|i| {
                let left = if i > 0 { points[i] - points[i - 1] } else { 0.0 };
                let right = if i + 1 < g { points[i + 1] - points[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        Ok(Self { points, weights })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    /// Quadrature approximation of the integral of `f` over the domain.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Locates `t` for linear interpolation: the left index and the weight of the right
    /// neighbour. Returns `None` outside the grid.
    pub fn bracket(&self, t: f64) -> Option<(usize, f64)> {
        if !self.contains(t) {
            return None;
        }
        let g = self.points.len();
        // partition_point gives the first index with point > t
        let upper = self.points.partition_point(|&p| p <= t);
        if upper >= g {
            return Some((g - 2, 1.0));
        }
        let lower = upper - 1;
        let span = self.points[upper] - self.points[lower];
        Some((lower, (t - self.points[lower]) / span))
    }

    /// Linear interpolation of grid values at `t`. `None` outside the grid or when a
    /// neighbour carrying positive weight is not finite.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Option<f64> {
        debug_assert_eq!(values.len(), self.len());
        let (i, frac) = self.bracket(t)?;
        let mut out = 0.0;
        if frac < 1.0 {
            if !values[i].is_finite() {
                return None;
            }
            out += (1.0 - frac) * values[i];
        }
        if frac > 0.0 {
            if !values[i + 1].is_finite() {
                return None;
            }
            out += frac * values[i + 1];
        }
        Some(out)
    }
}

/// Equally spaced grid on `[a, b]` with trapezoidal weights.
pub fn make_uniform_grid(a: f64, b: f64, size: usize) -> Result<Grid> {
    if size < 2 {
        return Err(invalid_argument(format!("grid size must be at least 2, got {size}")));
    }
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(invalid_argument(format!("grid needs a < b, got [{a}, {b}]")));
    }
    let step = (b - a) / (size - 1) as f64;
    let mut points: Vec<f64> = (0..size).map(|i| a + step * i as f64).collect();
    points[size - 1] = b;
    let mut weights = vec![step; size];
    weights[0] = 0.5 * step;
    weights[size - 1] = 0.5 * step;
    Ok(Grid { points, weights })
}

/// Quadrature inner product of two functions sampled on `grid`.
pub fn inner_product(f: &[f64], g: &[f64], grid: &Grid) -> Result<f64> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(invalid_argument(format!(
            "inner product needs arrays of length {}, got {} and {}",
            grid.len(),
            f.len(),
            g.len()
        )));
    }
    Ok(grid
        .weights
        .iter()
        .zip(f.iter().zip(g))
        .map(|(w, (a, b))| w * a * b)
        .sum())
}
