//! Local-constant kernel-weighted likelihood estimators of the mean function and the
//! covariance surface, noise-level estimation, mean removal and bandwidth selection.

mod bandwidth;
mod centering;
mod covariance;
mod mean;
mod sigma;

pub use bandwidth::{
    default_candidates, select_bandwidth, select_bandwidth_detailed, BandwidthObjective,
    BandwidthSelection, BandwidthTarget, SmoothingSetup,
};
pub use centering::center_dataset;
pub use covariance::{local_constant_covariance, CovSurfaceRaw};
pub use mean::{local_constant_mean, MeanEstimate};
pub use sigma::{estimate_sigma, SigmaEstimate, SigmaMethod};

pub(crate) use covariance::symmetrize;

use crate::data::Dataset;
use crate::error::{invalid_argument, Result};

/// Estimates below this support are reported as non-estimable.
pub(crate) const SUPPORT_FLOOR: f64 = f64::EPSILON;

pub(crate) fn check_smoothing_args(dataset: &Dataset, h: f64, sigma: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid_argument(format!("bandwidth must be positive, got {h}")));
    }
    if dataset.has_censoring() && !(sigma > 0.0 && sigma.is_finite()) {
        return Err(invalid_argument(format!(
            "censored data need a positive noise level, got sigma = {sigma}"
        )));
    }
    Ok(())
}
