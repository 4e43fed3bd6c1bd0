//! Accuracy and trade-off metrics, student training, and the weight
//! distribution analysis.

mod ensemble;
mod hist;
mod student;

pub use ensemble::{ensemble_eval, EnsemblePoint};
pub use hist::{weight_histogram, WeightHistogram};
pub use student::{distill_student, student_loss, train_baseline, Student};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::num::ProbVector;

/// `2ab / (a+b)`, the trade-off metric over ID and OOD accuracies, and zero
/// when both sides are zero. Scale-equivariant, so it accepts fractions or
/// percentage points alike.
pub fn harmonic_mean(id_acc: f64, ood_acc: f64) -> f64 {
    if id_acc + ood_acc == 0.0 {
        return 0.0;
    }
    2.0 * id_acc * ood_acc / (id_acc + ood_acc)
}

/// Fraction of samples whose argmax prediction is a ground-truth answer.
/// Argmax ties break to the lowest class index.
pub fn accuracy<F>(mut predict: F, eval: &Dataset) -> Result<f64>
where
    F: FnMut(&Sample) -> Result<ProbVector>,
{
    Ok(accuracy_by_type(&mut predict, eval)?.0)
}

/// Accuracy plus the per-question-type breakdown.
pub fn accuracy_by_type<F>(predict: &mut F, eval: &Dataset) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&Sample) -> Result<ProbVector>,
{
    if eval.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let n_types = eval.bias_config.n_types;
    let mut hits = vec![0usize; n_types];
    let mut counts = vec![0usize; n_types];
    let mut correct = 0usize;
    for sample in &eval.samples {
        let p = predict(sample)?;
        counts[sample.question_type] += 1;
        if sample.gt_answers.contains(&p.argmax()) {
            correct += 1;
            hits[sample.question_type] += 1;
        }
    }
    let per_type = hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| if c == 0 { 0.0 } else { h as f64 / c as f64 })
        .collect();
    Ok((correct as f64 / eval.len() as f64, per_type))
}

/// ID/OOD/HM results for one predictor. `per_type_accuracy` is the breakdown
/// on the OOD test split, where type-level behaviour is most informative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
    pub hm: f64,
    pub per_type_accuracy: Vec<f64>,
    pub n_id_eval: usize,
    pub n_ood_eval: usize,
}

impl MetricsReport {
    pub fn from_accuracies(
        id_accuracy: f64,
        ood_accuracy: f64,
        per_type_accuracy: Vec<f64>,
        n_id_eval: usize,
        n_ood_eval: usize,
    ) -> Self {
        MetricsReport {
            id_accuracy,
            ood_accuracy,
            hm: harmonic_mean(id_accuracy, ood_accuracy),
            per_type_accuracy,
            n_id_eval,
            n_ood_eval,
        }
    }
}

/// Runs one predictor over both test splits.
pub fn evaluate_predictor<F>(
    mut predict: F,
    id_eval: &Dataset,
    ood_eval: &Dataset,
) -> Result<MetricsReport>
where
    F: FnMut(&Sample) -> Result<ProbVector>,
{
    let (id_acc, _) = accuracy_by_type(&mut predict, id_eval)?;
    let (ood_acc, per_type) = accuracy_by_type(&mut predict, ood_eval)?;
    Ok(MetricsReport::from_accuracies(
        id_acc,
        ood_acc,
        per_type,
        id_eval.len(),
        ood_eval.len(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_position, BiasConfig, Split};
    use crate::num::RngState;

    #[test]
    fn harmonic_mean_reproduces_reference_pairs() {
        assert!((harmonic_mean(52.01, 56.35) - 54.09).abs() <= 0.01);
        assert!((harmonic_mean(39.79, 63.42) - 48.90).abs() <= 0.01);
    }

    #[test]
    fn harmonic_mean_identity_and_degenerate_cases() {
        for x in [0.1, 0.5, 0.99] {
            assert!((harmonic_mean(x, x) - x).abs() < 1e-15);
        }
        assert_eq!(harmonic_mean(0.0, 0.7), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }

    #[test]
    fn harmonic_mean_never_exceeds_arithmetic_mean() {
        let mut rng = RngState::new(3);
        for _ in 0..1000 {
            let a = rng.next_f64();
            let b = rng.next_f64();
            let hm = harmonic_mean(a, b);
            let am = 0.5 * (a + b);
            assert!(hm <= am + 1e-12);
            if (a - b).abs() > 1e-9 {
                assert!(hm < am);
            }
        }
    }

    fn position_sets() -> (Dataset, Dataset) {
        // Fully biased so the ID split's answers sit at slot 0 exactly.
        let cfg = BiasConfig {
            n_train: 100,
            n_id_test: 2_000,
            n_ood_test: 4_000,
            beta: 1.0,
            ..BiasConfig::position_default(11)
        };
        let rng = RngState::new(cfg.seed);
        (
            gen_position(&cfg, Split::IdTest, &rng).unwrap(),
            gen_position(&cfg, Split::OodTest, &rng).unwrap(),
        )
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let (id_eval, _) = position_sets();
        let acc = accuracy(
            |s: &Sample| Ok(ProbVector::one_hot(8, s.gt_answers[0])),
            &id_eval,
        )
        .unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn uniform_predictions_tie_break_to_class_zero() {
        // On the position ID split every answer is slot 0, so the tie-break
        // happens to be right every time; on a split where slot 0 is never
        // correct it scores zero.
        let (id_eval, mut ood_eval) = position_sets();
        let uniform = |_: &Sample| Ok(ProbVector::uniform(8));
        assert_eq!(accuracy(uniform, &id_eval).unwrap(), 1.0);
        ood_eval.samples.retain(|s| s.gt_answers[0] != 0);
        assert_eq!(accuracy(uniform, &ood_eval).unwrap(), 0.0);
    }

    #[test]
    fn prior_only_predictor_collapses_out_of_distribution() {
        let (id_eval, ood_eval) = position_sets();
        let prior_only = |_: &Sample| Ok(ProbVector::one_hot(8, 0));
        assert_eq!(accuracy(prior_only, &id_eval).unwrap(), 1.0);
        let ood = accuracy(prior_only, &ood_eval).unwrap();
        assert!((ood - 0.125).abs() < 0.03, "ood={ood}");
    }

    #[test]
    fn accuracy_is_invariant_under_monotone_transforms() {
        let (_, ood_eval) = position_sets();
        let mut rng = RngState::new(5);
        let raw: Vec<ProbVector> = (0..ood_eval.len())
            .map(|_| {
                let mut v: Vec<f64> = (0..8).map(|_| rng.next_f64() + 1e-3).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                ProbVector::new(v).unwrap()
            })
            .collect();
        let base = {
            let mut i = 0;
            accuracy(
                |_s| {
                    i += 1;
                    Ok(raw[i - 1].clone())
                },
                &ood_eval,
            )
            .unwrap()
        };
        // Cubing preserves order; renormalize to keep a valid distribution.
        let transformed = {
            let mut i = 0;
            accuracy(
                |_s| {
                    i += 1;
                    let mut v: Vec<f64> =
                        raw[i - 1].values().iter().map(|&x| x.powi(3)).collect();
                    let s: f64 = v.iter().sum();
                    v.iter_mut().for_each(|x| *x /= s);
                    ProbVector::new(v)
                },
                &ood_eval,
            )
            .unwrap()
        };
        assert_eq!(base, transformed);
    }

    #[test]
    fn report_hm_is_consistent() {
        let r = MetricsReport::from_accuracies(0.6, 0.4, vec![], 10, 10);
        assert!((r.hm - harmonic_mean(0.6, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let (mut id_eval, _) = position_sets();
        id_eval.samples.clear();
        assert!(accuracy(|_s| Ok(ProbVector::uniform(8)), &id_eval).is_err());
    }
}
