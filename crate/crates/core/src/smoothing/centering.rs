use crate::data::{Dataset, Trajectory};
use crate::error::{FpcaError, Result};

use super::MeanEstimate;

/// Subtracts the linearly interpolated mean from every observation.
///
/// Uncensored values become `y - mu(t)`. A censored entry's limit moves to
/// `c - mu(t)`, which is also what it records afterwards; the subtracted amount is kept
/// in the trajectory offsets so repeated centering composes.
pub fn center_dataset(dataset: &Dataset, mean: &MeanEstimate) -> Result<Dataset> {
    let c = dataset.detection_limit();
    let mut out = Vec::with_capacity(dataset.n());
    for tr in dataset.trajectories() {
        let n = tr.len();
        let mut values = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for j in 0..n {
            let t = tr.times()[j];
            let mu = mean.at(t).ok_or(FpcaError::NonEstimable { time: t })?;
            let offset = tr.offsets()[j] + mu;
            offsets.push(offset);
            if tr.censored()[j] {
                // the dataset invariant guarantees c is present here
                values.push(c.unwrap_or(0.0) - offset);
            } else {
                values.push(tr.values()[j] - mu);
            }
        }
        out.push(Trajectory::with_offsets(
            tr.subject_id().to_string(),
            tr.times().to_vec(),
            values,
            tr.censored().to_vec(),
            offsets,
        )?);
    }
    Dataset::new(out, c, Some(dataset.domain()))
}
