//! Covariance adjustment, eigen-decomposition of the discretized covariance operator and
//! component selection by fraction of variance explained.

mod bias;
mod decompose;

pub use bias::{calibrate_bias_design, calibrate_bias_mc};
pub use decompose::{eigen_decompose, select_num_components, EigenSystem};

use nalgebra::DMatrix;

use crate::data::WeightScheme;
use crate::error::{invalid_argument, Result};
use crate::grid::Grid;
use crate::smoothing::{symmetrize, CovSurfaceRaw};

/// Additive correction `B(s, t)` applied as `C - B sigma^2`.
#[derive(Debug, Clone, PartialEq)]
pub enum BiasCorrection {
    None,
    MonteCarlo(DMatrix<f64>),
}

impl BiasCorrection {
    pub fn name(&self) -> &'static str {
        match self {
            BiasCorrection::None => "none",
            BiasCorrection::MonteCarlo(_) => "monte-carlo",
        }
    }

    pub fn surface(&self) -> Option<&DMatrix<f64>> {
        match self {
            BiasCorrection::None => None,
            BiasCorrection::MonteCarlo(b) => Some(b),
        }
    }
}

/// Covariance surface after the bias adjustment; symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSurface {
    pub grid: Grid,
    pub values: DMatrix<f64>,
    pub bandwidth: f64,
    pub scheme: WeightScheme,
    pub correction: &'static str,
}

impl CovSurface {
    /// Wraps an analytic or externally computed surface.
    pub fn from_values(grid: Grid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != grid.len() || values.ncols() != grid.len() {
            return Err(invalid_argument(format!(
                "surface is {}x{} but the grid has {} points",
                values.nrows(),
                values.ncols(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            bandwidth: f64::NAN,
            scheme: WeightScheme::Obs,
            correction: "none",
        })
    }
}

pub fn adjust_covariance(
    raw: &CovSurfaceRaw,
    correction: &BiasCorrection,
    sigma: f64,
) -> Result<CovSurface> {
    let values = match correction {
        BiasCorrection::None => raw.values.clone(),
        BiasCorrection::MonteCarlo(b) => {
            if b.shape() != raw.values.shape() {
                return Err(invalid_argument(format!(
                    "correction surface is {}x{} but the covariance is {}x{}",
                    b.nrows(),
                    b.ncols(),
                    raw.values.nrows(),
                    raw.values.ncols()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(invalid_argument("correction surface has non-finite entries"));
            }
            symmetrize(&(&raw.values - b * (sigma * sigma)))
        }
    };
    Ok(CovSurface {
        grid: raw.grid.clone(),
        values,
        bandwidth: raw.bandwidth,
        scheme: raw.scheme,
        correction: correction.name(),
    })
}
