//! Monte Carlo aggregation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal quantile for a two-sided 95% interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean with its standard error and a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
    pub ci95: (f64, f64),
}

impl EstimateWithCI {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoTrials);
        }
        let n = samples.len() as f64;
        let mean = neumaier_sum(samples.iter().copied()) / n;
        let var = if samples.len() > 1 {
            neumaier_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0)
        } else {
            0.0
        };
        let std_error = (var / n).sqrt();
        Ok(Self {
            mean,
            std_error,
            trials: samples.len() as u64,
            ci95: (mean - Z95 * std_error, mean + Z95 * std_error),
        })
    }

    /// Multiplies the estimate (and its error) by a positive constant.
    pub fn scaled(self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        Self {
            mean: self.mean * factor,
            std_error: self.std_error * factor,
            trials: self.trials,
            ci95: (self.ci95.0 * factor, self.ci95.1 * factor),
        }
    }

    /// `(mean − target) / std_error`; infinite when the error is zero and the
    /// mean misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.std_error
        }
    }

    pub fn covers(&self, target: f64) -> bool {
        self.ci95.0 <= target && target <= self.ci95.1
    }

    /// `self ≥ other` up to interval overlap.
    pub fn dominates_up_to_overlap(&self, other: &EstimateWithCI) -> bool {
        self.ci95.1 >= other.ci95.0
    }

    /// `|self − other| ≤ k·√(σ₁² + σ₂²)`.
    pub fn agrees_within(&self, other: &EstimateWithCI, k: f64) -> bool {
        (self.mean - other.mean).abs() <= k * self.std_error.hypot(other.std_error)
    }
}

/// Compensated (Neumaier) summation; the result depends only on the order of
/// the input, never on thread scheduling.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Runs `trial(i)` for `i in 0..trials` on the rayon pool, returning results
/// in trial order.
pub fn run_trials<T, F>(trials: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..trials).into_par_iter().map(trial).collect()
}
