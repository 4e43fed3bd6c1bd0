//! Introspective knowledge blending.
//!
//! For every training sample the two teacher readouts are scored against the
//! ground truth, the scores become per-sample convex weights (inversely
//! proportional to how well each world already fits the sample), and the
//! weights blend oracle ID knowledge with the counterfactual OOD prediction
//! into the distillation target.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::num::{cross_entropy, kl_divergence, softmax, LogitVector, ProbVector, PROB_EPS};
use crate::teacher::TeacherOutputs;

/// How a readout's fit to the ground truth is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Summed probability mass on the ground-truth answers.
    Prob,
    /// Inverse cross-entropy against the ground-truth distribution.
    Xe,
}

impl std::str::FromStr for MatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prob" => Ok(MatchMode::Prob),
            "xe" => Ok(MatchMode::Xe),
            other => Err(Error::InvalidConfig(format!("unknown match mode `{other}`"))),
        }
    }
}

/// Per-sample fit of the ID and OOD readouts; always finite and positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScores {
    pub s_id: f64,
    pub s_ood: f64,
    pub mode: MatchMode,
}

/// How match scores become blend weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightVariant {
    /// `w_id = s_ood / (s_id + s_ood)`: inversely proportional to fit.
    Soft,
    /// All-or-nothing version of `Soft`; ties go to the ID side.
    Hard,
    /// A constant `w_id`, ignoring the scores.
    Fixed(f64),
    /// `w_id = s_id / (s_id + s_ood)`: directly proportional to fit, kept as
    /// a deliberately wrong-way ablation.
    Proportional,
}

/// Convex weights over the two knowledge sources; `w_id + w_ood = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendWeights {
    pub w_id: f64,
    pub w_ood: f64,
}

impl BlendWeights {
    fn from_id(w_id: f64) -> Self {
        BlendWeights {
            w_id,
            w_ood: 1.0 - w_id,
        }
    }
}

/// What stands in for the ID world when blending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdKnowledge {
    /// The ground-truth label distribution (the oracle; default).
    GroundTruth,
    /// The teacher's factual prediction (ablation).
    IdPrediction,
}

impl std::str::FromStr for IdKnowledge {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt" | "ground_truth" => Ok(IdKnowledge::GroundTruth),
            "id_pred" | "id_prediction" => Ok(IdKnowledge::IdPrediction),
            other => Err(Error::InvalidConfig(format!(
                "unknown id-knowledge source `{other}`"
            ))),
        }
    }
}

/// Full introspection policy for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrodConfig {
    pub mode: MatchMode,
    pub variant: WeightVariant,
    pub id_knowledge: IdKnowledge,
}

impl Default for IntrodConfig {
    fn default() -> Self {
        IntrodConfig {
            mode: MatchMode::Xe,
            variant: WeightVariant::Soft,
            id_knowledge: IdKnowledge::GroundTruth,
        }
    }
}

/// Scores both readouts against the sample's ground truth.
pub fn match_scores(
    p_id: &ProbVector,
    p_ood: &ProbVector,
    sample: &Sample,
    mode: MatchMode,
) -> Result<MatchScores> {
    if sample.gt_answers.is_empty() {
        return Err(Error::InvalidSample("empty ground-truth set".into()));
    }
    let score = |p: &ProbVector| -> Result<f64> {
        match mode {
            MatchMode::Prob => {
                let mut s = 0.0;
                for &a in &sample.gt_answers {
                    if a >= p.len() {
                        return Err(Error::InvalidSample(format!("gt answer {a} out of range")));
                    }
                    s += p.values()[a];
                }
                Ok(s)
            }
            // The epsilon floor keeps the score finite even for an exact fit.
            MatchMode::Xe => Ok(1.0 / cross_entropy(&sample.gt_dist, p)?.max(PROB_EPS)),
        }
    };
    Ok(MatchScores {
        s_id: score(p_id)?,
        s_ood: score(p_ood)?,
        mode,
    })
}

/// Turns match scores into convex blend weights.
pub fn weights(scores: &MatchScores, variant: WeightVariant) -> Result<BlendWeights> {
    let MatchScores { s_id, s_ood, .. } = *scores;
    let w_id = match variant {
        WeightVariant::Soft => s_ood / (s_id + s_ood),
        WeightVariant::Hard => {
            if s_id <= s_ood {
                1.0
            } else {
                0.0
            }
        }
        WeightVariant::Fixed(w) => {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidConfig(format!(
                    "fixed weight must lie in [0,1], got {w}"
                )));
            }
            w
        }
        WeightVariant::Proportional => s_id / (s_id + s_ood),
    };
    Ok(BlendWeights::from_id(w_id))
}

/// `p_t = w_id * id_knowledge + w_ood * p_ood`. A convex combination already
/// sums to one; renormalize only if float drift exceeds 1e-12.
pub fn blend(
    w: &BlendWeights,
    id_knowledge: &ProbVector,
    p_ood: &ProbVector,
) -> Result<ProbVector> {
    if id_knowledge.len() != p_ood.len() {
        return Err(Error::DimensionMismatch {
            left: id_knowledge.len(),
            right: p_ood.len(),
        });
    }
    let mut out: Vec<f64> = id_knowledge
        .values()
        .iter()
        .zip(p_ood.values())
        .map(|(&i, &o)| w.w_id * i + w.w_ood * o)
        .collect();
    let sum: f64 = out.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        for v in out.iter_mut() {
            *v /= sum;
        }
    }
    ProbVector::new(out)
}

/// Distillation objective: `KL(p_t, softmax(z))` and its gradient in the
/// student logits, which reduces to `softmax(z) - p_t`.
pub fn distill_loss(p_t: &ProbVector, student_logits: &LogitVector) -> Result<(f64, Vec<f64>)> {
    if p_t.len() != student_logits.len() {
        return Err(Error::DimensionMismatch {
            left: p_t.len(),
            right: student_logits.len(),
        });
    }
    let p_s = softmax(student_logits)?;
    let loss = kl_divergence(p_t, &p_s)?;
    let grad = p_s
        .values()
        .iter()
        .zip(p_t.values())
        .map(|(&s, &t)| s - t)
        .collect();
    Ok((loss, grad))
}

/// Composes scoring, weighting and blending into the per-sample target.
pub fn make_target(
    sample: &Sample,
    teacher_out: &TeacherOutputs,
    cfg: &IntrodConfig,
) -> Result<ProbVector> {
    let scores = match_scores(&teacher_out.p_id, &teacher_out.p_ood, sample, cfg.mode)?;
    let w = weights(&scores, cfg.variant)?;
    let id_knowledge = match cfg.id_knowledge {
        IdKnowledge::GroundTruth => &sample.gt_dist,
        IdKnowledge::IdPrediction => &teacher_out.p_id,
    };
    blend(&w, id_knowledge, &teacher_out.p_ood)
}
