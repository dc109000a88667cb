use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid_argument, FpcaError, Result};
use crate::grid::Grid;

use super::CovSurface;

/// Spectrum of the covariance operator discretized with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub grid: Grid,
    /// Descending and clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Descending, before clamping.
    pub raw_eigenvalues: Vec<f64>,
    /// `eigenfunctions[l][g]`, orthonormal under the grid's quadrature.
    pub eigenfunctions: Vec<Vec<f64>>,
    /// `sum_g w_g C(t_g, t_g)`.
    pub raw_trace: f64,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Fraction of the clamped total carried by each component.
    pub fn fve_shares(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues
            .iter()
            .map(|l| if total > 0.0 { l / total } else { 0.0 })
            .collect()
    }

    /// Linear interpolation of component `l` at `t`.
    pub fn evaluate(&self, l: usize, t: f64) -> Option<f64> {
        self.grid.interpolate(&self.eigenfunctions[l], t)
    }

    /// Copy restricted to the leading `l` components.
    pub fn truncated(&self, l: usize) -> EigenSystem {
        let l = l.min(self.len());
        EigenSystem {
            grid: self.grid.clone(),
            eigenvalues: self.eigenvalues[..l].to_vec(),
            raw_eigenvalues: self.raw_eigenvalues[..l].to_vec(),
            eigenfunctions: self.eigenfunctions[..l].to_vec(),
            raw_trace: self.raw_trace,
        }
    }
}

/// Solves `int C(s, t) psi(s) ds = lambda psi(t)` on the grid via the symmetric matrix
/// `W^1/2 C W^1/2`.
///
/// Eigenfunctions are signed so that their largest-magnitude entry is positive (ties go to
/// the smallest grid index).
pub fn eigen_decompose(surface: &CovSurface, grid: &Grid) -> Result<EigenSystem> {
    let c = &surface.values;
    let g = grid.len();
    if c.nrows() != g || c.ncols() != g {
        return Err(invalid_argument(format!(
            "surface is {}x{} but the grid has {g} points",
            c.nrows(),
            c.ncols()
        )));
    }
    let bad = c.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(FpcaError::NonEstimableSurface { cells: bad });
    }
    let scale = c.amax().max(1.0);
    let mut asym = 0.0f64;
    for a in 0..g {
        for b in (a + 1)..g {
            asym = asym.max((c[(a, b)] - c[(b, a)]).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(invalid_argument(format!(
            "covariance surface is not symmetric (max deviation {asym:e})"
        )));
    }

    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let m = DMatrix::from_fn(g, g, |a, b| {
        // average the two triangles so the solver sees an exactly symmetric matrix
        0.5 * (c[(a, b)] + c[(b, a)]) * sw[a] * sw[b]
    });
    let raw_trace: f64 = (0..g).map(|a| grid.weights()[a] * c[(a, a)]).sum();

    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));

    let mut raw_eigenvalues = Vec::with_capacity(g);
    let mut eigenfunctions = Vec::with_capacity(g);
    for &k in &order {
        raw_eigenvalues.push(eig.eigenvalues[k]);
        let mut f: Vec<f64> = (0..g).map(|a| eig.eigenvectors[(a, k)] / sw[a]).collect();
        orient(&mut f);
        eigenfunctions.push(f);
    }
    let eigenvalues = raw_eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    Ok(EigenSystem {
        grid: grid.clone(),
        eigenvalues,
        raw_eigenvalues,
        eigenfunctions,
        raw_trace,
    })
}

fn orient(f: &mut [f64]) {
    let mut best = 0;
    for (g, v) in f.iter().enumerate() {
        if v.abs() > f[best].abs() {
            best = g;
        }
    }
    if f[best] < 0.0 {
        f.iter_mut().for_each(|v| *v = -*v);
    }
}

/// Smallest `L` whose leading eigenvalues reach `threshold` of the total.
pub fn select_num_components(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid_argument(format!(
            "FVE threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if eigenvalues.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(invalid_argument("eigenvalues must be finite and non-negative"));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(FpcaError::NoSignal);
    }
    let mut cum = 0.0;
    for (l, v) in eigenvalues.iter().enumerate() {
        cum += v;
        if cum / total >= threshold {
            return Ok(l + 1);
        }
    }
    // rounding can keep the full sum a hair below 1
    Ok(eigenvalues.iter().rposition(|&v| v > 0.0).unwrap() + 1)
}
