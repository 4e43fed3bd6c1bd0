use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::introspect::{match_scores, weights, MatchMode, WeightVariant};
use crate::teacher::CausalTeacher;

/// Marker thresholds reported alongside the histogram: the far-left spike,
/// the bulk below/above the midpoint, and the right tail.
pub const MARKER_THRESHOLDS: [f64; 4] = [0.05, 0.4, 0.5, 0.6];

/// Distribution of the soft ID weight over a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    /// `bins + 1` increasing edges spanning `[0, 1]`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub thresholds: Vec<f64>,
    pub fraction_below: Vec<f64>,
    pub fraction_above: Vec<f64>,
    pub n_samples: usize,
}

impl WeightHistogram {
    /// True if some maximal-count bin covers `x` (edges inclusive).
    pub fn modal_bin_contains(&self, x: f64) -> bool {
        let max = match self.counts.iter().max() {
            Some(&m) => m,
            None => return false,
        };
        self.counts.iter().enumerate().any(|(i, &c)| {
            c == max && self.bin_edges[i] <= x && x <= self.bin_edges[i + 1]
        })
    }

    pub fn fraction_below(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.fraction_below[i])
    }

    pub fn fraction_above(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.fraction_above[i])
    }
}

/// Computes the soft `w_id` for every training sample under `mode` and bins
/// it into `bins` uniform cells on `[0, 1]`.
pub fn weight_histogram(
    teacher: &CausalTeacher,
    train: &Dataset,
    mode: MatchMode,
    bins: usize,
) -> Result<WeightHistogram> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidInput("need at least 2 bins".into()));
    }
    let mut counts = vec![0u64; bins];
    let mut below = vec![0usize; MARKER_THRESHOLDS.len()];
    let mut above = vec![0usize; MARKER_THRESHOLDS.len()];
    for sample in &train.samples {
        let out = teacher.outputs(sample)?;
        let scores = match_scores(&out.p_id, &out.p_ood, sample, mode)?;
        let w = weights(&scores, WeightVariant::Soft)?.w_id;
        let idx = ((w * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
        for (k, &t) in MARKER_THRESHOLDS.iter().enumerate() {
            if w < t {
                below[k] += 1;
            }
            if w > t {
                above[k] += 1;
            }
        }
    }
    let n = train.len();
    Ok(WeightHistogram {
        bin_edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        counts,
        thresholds: MARKER_THRESHOLDS.to_vec(),
        fraction_below: below.iter().map(|&c| c as f64 / n as f64).collect(),
        fraction_above: above.iter().map(|&c| c as f64 / n as f64).collect(),
        n_samples: n,
    })
}
