use serde::{Deserialize, Serialize};

use super::{evaluate_predictor, MetricsReport};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::introspect::{blend, BlendWeights};
use crate::teacher::CausalTeacher;

/// One row of the ensemble sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub w_id: f64,
    pub report: MetricsReport,
}

/// Evaluates the fixed convex combination `w * p_id + (1-w) * p_ood` as a
/// predictor for every `w` in the grid (no distillation involved).
pub fn ensemble_eval(
    teacher: &CausalTeacher,
    w_id_grid: &[f64],
    id_eval: &Dataset,
    ood_eval: &Dataset,
) -> Result<Vec<EnsemblePoint>> {
    let mut out = Vec::with_capacity(w_id_grid.len());
    for &w in w_id_grid {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidConfig(format!(
                "ensemble weight must lie in [0,1], got {w}"
            )));
        }
        let weights = BlendWeights {
            w_id: w,
            w_ood: 1.0 - w,
        };
        let report = evaluate_predictor(
            |sample| {
                let o = teacher.outputs(sample)?;
                blend(&weights, &o.p_id, &o.p_ood)
            },
            id_eval,
            ood_eval,
        )?;
        out.push(EnsemblePoint { w_id: w, report });
    }
    Ok(out)
}
