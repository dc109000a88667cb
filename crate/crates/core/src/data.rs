use crate::error::{invalid_argument, invalid_input, Result};

/// One subject's observation times, recorded values and censoring flags.
///
/// Censored entries record the detection limit in `values`. After mean removal
/// (see [`crate::smoothing::center_dataset`]) `offsets` holds the subtracted mean at
/// each time and a censored entry stores its shifted limit `c - offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    subject_id: String,
    times: Vec<f64>,
    values: Vec<f64>,
    censored: Vec<bool>,
    offsets: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        subject_id: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
        censored: Vec<bool>,
    ) -> Result<Self> {
        let n = times.len();
        let offsets = vec![0.0; n];
        Self::with_offsets(subject_id.into(), times, values, censored, offsets)
    }

    pub(crate) fn with_offsets(
        subject_id: String,
        times: Vec<f64>,
        values: Vec<f64>,
        censored: Vec<bool>,
        offsets: Vec<f64>,
    ) -> Result<Self> {
        let n = times.len();
        if n == 0 {
            return Err(invalid_input(format!("subject {subject_id} has no observations")));
        }
        if values.len() != n || censored.len() != n || offsets.len() != n {
            return Err(invalid_input(format!(
                "subject {subject_id}: times, values and flags differ in length ({n}, {}, {})",
                values.len(),
                censored.len()
            )));
        }
        if let Some(j) = (0..n).find(|&j| !times[j].is_finite() || !values[j].is_finite()) {
            return Err(invalid_input(format!(
                "subject {subject_id}: observation {j} is not finite"
            )));
        }
        Ok(Self {
            subject_id,
            times,
            values,
            censored,
            offsets,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn censored(&self) -> &[bool] {
        &self.censored
    }

    /// Mean values subtracted at each observation (all zero unless centered).
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&d| d).count()
    }

    /// Values on the original measurement scale (offsets added back).
    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().zip(&self.offsets).map(|(v, o)| v + o).collect()
    }
}

/// Per-observation or per-subject weighting of the pooled kernel sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Every observation carries the same weight.
    #[default]
    Obs,
    /// Every subject carries the same total weight.
    Subj,
}

impl WeightScheme {
    /// Mean-estimator weights `w_i`.
    pub fn mean_weights(self, dataset: &Dataset) -> Vec<f64> {
        let n = dataset.n() as f64;
        let total = dataset.total_observations() as f64;
        dataset
            .trajectories()
            .iter()
            .map(|tr| match self {
                WeightScheme::Obs => 1.0 / total,
                WeightScheme::Subj => 1.0 / (n * tr.len() as f64),
            })
            .collect()
    }

    /// Covariance-estimator weights `v_i`; subjects with a single observation get 0.
    pub fn covariance_weights(self, dataset: &Dataset) -> Vec<f64> {
        let n = dataset.n() as f64;
        let pairs: f64 = dataset
            .trajectories()
            .iter()
            .map(|tr| (tr.len() * (tr.len().saturating_sub(1))) as f64)
            .sum();
        dataset
            .trajectories()
            .iter()
            .map(|tr| {
                let own = (tr.len() * tr.len().saturating_sub(1)) as f64;
                if own == 0.0 {
                    0.0
                } else {
                    match self {
                        WeightScheme::Obs => 1.0 / pairs,
                        WeightScheme::Subj => 1.0 / (n * own),
                    }
                }
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::Obs => "OBS",
            WeightScheme::Subj => "SUBJ",
        }
    }
}

impl std::str::FromStr for WeightScheme {
    type Err = crate::error::FpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "obs" => Ok(WeightScheme::Obs),
            "subj" => Ok(WeightScheme::Subj),
            other => Err(invalid_argument(format!("unknown weight scheme {other:?}"))),
        }
    }
}

/// A collection of trajectories sharing one detection limit and one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    detection_limit: Option<f64>,
    domain: (f64, f64),
}

impl Dataset {
    /// Validates and assembles a dataset.
    ///
    /// `domain` defaults to the range of observed times. A detection limit is kept only
    /// when at least one observation is censored.
    pub fn new(
        trajectories: Vec<Trajectory>,
        detection_limit: Option<f64>,
        domain: Option<(f64, f64)>,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(invalid_input("dataset has no subjects"));
        }
        let any_censored = trajectories.iter().any(|t| t.censored_count() > 0);
        if any_censored && detection_limit.is_none() {
            return Err(invalid_input(
                "censored observations present but no detection limit given",
            ));
        }
        if let Some(c) = detection_limit {
            if !c.is_finite() {
                return Err(invalid_input(format!("detection limit must be finite, got {c}")));
            }
        }
        let domain = match domain {
            Some((a, b)) => {
                if !(b > a) {
                    return Err(invalid_input(format!("domain needs a < b, got [{a}, {b}]")));
                }
                (a, b)
            }
            None => {
                let (lo, hi) = trajectories
                    .iter()
                    .flat_map(|t| t.times().iter().copied())
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                        (lo.min(t), hi.max(t))
                    });
                if !(hi > lo) {
                    return Err(invalid_input(
                        "all observation times coincide; supply a domain explicitly",
                    ));
                }
                (lo, hi)
            }
        };
        for tr in &trajectories {
            if let Some(&t) = tr.times().iter().find(|&&t| t < domain.0 || t > domain.1) {
                return Err(invalid_input(format!(
                    "subject {}: time {t} lies outside the domain [{}, {}]",
                    tr.subject_id(),
                    domain.0,
                    domain.1
                )));
            }
            if let Some(c) = detection_limit {
                for j in 0..tr.len() {
                    if tr.censored()[j] && tr.values()[j] != c - tr.offsets()[j] {
                        return Err(invalid_input(format!(
                            "subject {}: censored observation at t = {} records {} instead of the detection limit {}",
                            tr.subject_id(),
                            tr.times()[j],
                            tr.values()[j] + tr.offsets()[j],
                            c
                        )));
                    }
                }
            }
        }
        Ok(Self {
            trajectories,
            detection_limit: if any_censored { detection_limit } else { None },
            domain,
        })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn detection_limit(&self) -> Option<f64> {
        self.detection_limit
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn total_observations(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn censored_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::censored_count).sum()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored_count() as f64 / self.total_observations() as f64
    }

    pub fn has_censoring(&self) -> bool {
        self.detection_limit.is_some()
    }

    /// True once a mean has been subtracted.
    pub fn is_centered(&self) -> bool {
        self.trajectories
            .iter()
            .any(|t| t.offsets().iter().any(|&o| o != 0.0))
    }

    /// Same observations with every censoring flag cleared; censored entries keep their
    /// recorded value.
    pub fn without_censoring(&self) -> Dataset {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| Trajectory {
                censored: vec![false; t.len()],
                ..t.clone()
            })
            .collect();
        Dataset {
            trajectories,
            detection_limit: None,
            domain: self.domain,
        }
    }

    pub(crate) fn from_parts_unchecked(
        trajectories: Vec<Trajectory>,
        detection_limit: Option<f64>,
        domain: (f64, f64),
    ) -> Dataset {
        let any_censored = trajectories.iter().any(|t| t.censored_count() > 0);
        Dataset {
            trajectories,
            detection_limit: if any_censored { detection_limit } else { None },
            domain,
        }
    }
}
