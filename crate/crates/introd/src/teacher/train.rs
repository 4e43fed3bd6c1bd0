use super::{fuse_slices, sigmoid, CausalTeacher, Fusion};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::num::{
    cross_entropy, sgd_step, softmax, LogitVector, MomentumBuffer, ProbVector, SgdConfig, RngState,
};

/// Detached factual predictions used as alignment targets for the
/// counterfactual constant.
pub fn counterfactual_targets(teacher: &CausalTeacher, batch: &[&Sample]) -> Result<Vec<ProbVector>> {
    batch.iter().map(|s| teacher.predict_id(s)).collect()
}

/// Mean KL from `targets` to the fused output with the main branch imagined
/// away (`softmax(fuse(c*1, z_short))`), plus its derivative with respect to
/// the counterfactual constant. This is the only route by which `c` learns.
pub fn counterfactual_alignment_grad(
    teacher: &CausalTeacher,
    batch: &[&Sample],
    targets: &[ProbVector],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut dc = 0.0;
    let inv_b = 1.0 / batch.len() as f64;
    for (sample, target) in batch.iter().zip(targets) {
        let z_short = teacher.shortcut.logits(sample);
        let cf = vec![teacher.cf_value; z_short.len()];
        let y = fuse_slices(&cf, &z_short, teacher.fusion)?;
        let q = softmax(&LogitVector(y))?;
        loss += inv_b * crate::num::kl_divergence(target, &q)?;
        for (k, (&qk, &tk)) in q.values().iter().zip(target.values()).enumerate() {
            let dy_dc = match teacher.fusion {
                Fusion::Sum => 1.0,
                Fusion::Gate => sigmoid(z_short[k]),
            };
            dc += inv_b * (qk - tk) * dy_dc;
        }
    }
    Ok((loss, dc))
}

/// Training objective and analytic gradients, with the counterfactual
/// alignment targets supplied by the caller.
///
/// The returned scalar is the supervised loss,
/// `mean(XE(gt, fused) + lambda_short * XE(gt, shortcut))`; the gradient of
/// the counterfactual constant comes from the separate alignment term (its
/// value is not folded into the scalar so the supervised loss stays
/// comparable across debias modes).
pub fn teacher_loss_with_targets(
    teacher: &CausalTeacher,
    batch: &[&Sample],
    targets: &[ProbVector],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let n_main = teacher.main.n_params();
    let n_short = teacher.shortcut.n_params();
    let mut grads = vec![0.0; teacher.n_params()];
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;

    for sample in batch {
        let cache = teacher.main.forward_cached(sample);
        let z_main = cache.logits().to_vec();
        let z_short = teacher.shortcut.logits(sample);
        if z_main.iter().chain(&z_short).any(|v| !v.is_finite()) {
            return Err(Error::Diverged { epoch: 0 });
        }
        let fused = fuse_slices(&z_main, &z_short, teacher.fusion)?;
        let p_f = softmax(&LogitVector(fused))?;
        let p_s = softmax(&LogitVector(z_short.clone()))?;
        let gt = &sample.gt_dist;
        loss += inv_b
            * (cross_entropy(gt, &p_f)? + teacher.lambda_short * cross_entropy(gt, &p_s)?);

        let a = z_main.len();
        let mut g_main = vec![0.0; a];
        let mut g_short = vec![0.0; a];
        for k in 0..a {
            let g_f = inv_b * (p_f.values()[k] - gt.values()[k]);
            match teacher.fusion {
                Fusion::Sum => {
                    g_main[k] += g_f;
                    g_short[k] += g_f;
                }
                Fusion::Gate => {
                    let s = sigmoid(z_short[k]);
                    g_main[k] += g_f * s;
                    g_short[k] += g_f * z_main[k] * s * (1.0 - s);
                }
            }
            g_short[k] +=
                inv_b * teacher.lambda_short * (p_s.values()[k] - gt.values()[k]);
        }
        teacher.main.backward(&cache, &g_main, &mut grads[..n_main]);
        teacher
            .shortcut
            .backward(sample, &g_short, &mut grads[n_main..n_main + n_short]);
    }

    let (_, dc) = counterfactual_alignment_grad(teacher, batch, targets)?;
    grads[n_main + n_short] = dc;

    if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged { epoch: 0 });
    }
    Ok((loss, grads))
}

/// Convenience wrapper: alignment targets are the current factual
/// predictions, detached. Non-finite activations count as divergence here.
pub fn teacher_loss(teacher: &CausalTeacher, batch: &[&Sample]) -> Result<(f64, Vec<f64>)> {
    let targets = counterfactual_targets(teacher, batch).map_err(|e| match e {
        Error::NonFinite(_) => Error::Diverged { epoch: 0 },
        other => other,
    })?;
    teacher_loss_with_targets(teacher, batch, &targets)
}

/// Minibatch SGD over the supervised loss. Deterministic given the rng seed;
/// returns the per-epoch mean loss curve.
pub fn train_teacher(
    teacher: &mut CausalTeacher,
    train: &Dataset,
    cfg: &SgdConfig,
    rng: &mut RngState,
) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if train.bias_config.n_answers != teacher.main.out_dim() {
        return Err(Error::DimensionMismatch {
            left: train.bias_config.n_answers,
            right: teacher.main.out_dim(),
        });
    }
    let mut params = teacher.params();
    let mut momentum = MomentumBuffer::zeros(params.len());
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train.samples[i]).collect();
            let (loss, grads) =
                teacher_loss(teacher, &batch).map_err(|e| at_epoch(e, epoch))?;
            epoch_loss += loss * batch.len() as f64;
            sgd_step(&mut params, &grads, &mut momentum, cfg).map_err(|e| at_epoch(e, epoch))?;
            teacher.set_params(&params)?;
        }
        epoch_loss /= train.len() as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Diverged { .. } => Error::Diverged { epoch },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_answer_prior, gen_position, BiasConfig, Preset, Split};
    use crate::num::{finite_diff_gradient, max_rel_error, DEFAULT_FD_STEP};
    use crate::teacher::{Debias, MainBranch, ShortcutBranch, TeacherConfig};

    fn small_bias(preset: Preset, seed: u64) -> BiasConfig {
        match preset {
            Preset::AnswerPrior => BiasConfig {
                n_types: 4,
                n_answers: 4,
                n_train: 400,
                n_id_test: 100,
                n_ood_test: 100,
                ..BiasConfig::answer_prior_default(seed)
            },
            Preset::Position => BiasConfig {
                n_types: 4,
                n_answers: 4,
                n_train: 400,
                n_id_test: 100,
                n_ood_test: 100,
                ..BiasConfig::position_default(seed)
            },
        }
    }

    fn make(preset: Preset, fusion: Fusion, seed: u64) -> (Dataset, CausalTeacher) {
        let bias = small_bias(preset, seed);
        let train = match preset {
            Preset::AnswerPrior => {
                gen_answer_prior(&bias, Split::Train, &RngState::new(bias.seed)).unwrap()
            }
            Preset::Position => {
                gen_position(&bias, Split::Train, &RngState::new(bias.seed)).unwrap()
            }
        };
        let cfg = TeacherConfig {
            fusion,
            debias: Debias::Tie,
            hidden: 8,
            ..TeacherConfig::default()
        };
        let teacher = CausalTeacher::new(&cfg, &bias, &train, &mut RngState::new(seed + 1)).unwrap();
        (train, teacher)
    }

    fn randomize(teacher: &mut CausalTeacher, seed: u64) {
        let mut rng = RngState::new(seed);
        let p: Vec<f64> = (0..teacher.n_params())
            .map(|_| 0.5 * rng.next_normal())
            .collect();
        teacher.set_params(&p).unwrap();
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (preset, fusion, seed) in [
            (Preset::AnswerPrior, Fusion::Sum, 10),
            (Preset::AnswerPrior, Fusion::Gate, 11),
            (Preset::Position, Fusion::Sum, 12),
            (Preset::Position, Fusion::Gate, 13),
        ] {
            let (train, mut teacher) = make(preset, fusion, seed);
            randomize(&mut teacher, seed * 7 + 1);
            let batch: Vec<&Sample> = train.samples[..10].iter().collect();
            let targets = counterfactual_targets(&teacher, &batch).unwrap();
            let (_, analytic) = teacher_loss_with_targets(&teacher, &batch, &targets).unwrap();

            let theta = teacher.params();
            let mut probe = teacher.clone();
            let n_c = theta.len() - 1;
            let fd_primary = finite_diff_gradient(
                |t| {
                    probe.set_params(t).unwrap();
                    teacher_loss_with_targets(&probe, &batch, &targets).unwrap().0
                },
                &theta,
                DEFAULT_FD_STEP,
            )
            .unwrap();
            let err = max_rel_error(&analytic[..n_c], &fd_primary[..n_c]);
            assert!(err < 1e-4, "{preset:?}/{fusion:?}: supervised grad err {err}");

            // The constant's gradient comes from the alignment term.
            let mut probe = teacher.clone();
            let fd_c = finite_diff_gradient(
                |t| {
                    let mut full = theta.clone();
                    full[n_c] = t[0];
                    probe.set_params(&full).unwrap();
                    counterfactual_alignment_grad(&probe, &batch, &targets)
                        .unwrap()
                        .0
                },
                &[theta[n_c]],
                DEFAULT_FD_STEP,
            )
            .unwrap();
            let err_c = max_rel_error(&[analytic[n_c]], &fd_c);
            assert!(err_c < 1e-4, "{preset:?}/{fusion:?}: cf-constant grad err {err_c}");
        }
    }

    #[test]
    fn uniform_prediction_loss_is_ln_a_per_term() {
        let (train, mut teacher) = make(Preset::AnswerPrior, Fusion::Sum, 20);
        let zeros = vec![0.0; teacher.n_params()];
        teacher.set_params(&zeros).unwrap();
        let batch: Vec<&Sample> = train.samples[..16].iter().collect();
        let (loss, _) = teacher_loss(&teacher, &batch).unwrap();
        let ln_a = (4.0f64).ln();
        // lambda_short = 1, so ln A from the fused term plus ln A from the
        // shortcut term.
        assert!((loss - 2.0 * ln_a).abs() < 1e-9, "loss={loss}");
    }

    #[test]
    fn perfect_fused_prediction_with_no_aux_weight_has_near_zero_loss() {
        let (train, mut teacher) = make(Preset::AnswerPrior, Fusion::Sum, 21);
        teacher.lambda_short = 0.0;
        let sample = train.samples[0].clone();
        let gt = sample.gt_answers[0];
        // Hand-build a shortcut that nails the answer for this sample's type.
        if let ShortcutBranch::TypeEmbedding {
            n_answers, logits, ..
        } = &mut teacher.shortcut
        {
            logits[sample.question_type * *n_answers + gt] = 60.0;
        }
        if let MainBranch::Dense(mlp) = &mut teacher.main {
            mlp.w1.iter_mut().for_each(|w| *w = 0.0);
            mlp.w2.iter_mut().for_each(|w| *w = 0.0);
            mlp.b2.iter_mut().for_each(|b| *b = 0.0);
        }
        let batch = [&sample];
        let (loss, _) = teacher_loss(&teacher, &batch).unwrap();
        assert!(loss <= 1e-10, "loss={loss}");
    }

    #[test]
    fn zero_epochs_leave_parameters_unchanged() {
        let (train, mut teacher) = make(Preset::AnswerPrior, Fusion::Sum, 22);
        let before = teacher.params();
        let cfg = SgdConfig {
            epochs: 0,
            ..SgdConfig::default()
        };
        let curve = train_teacher(&mut teacher, &train, &cfg, &mut RngState::new(1)).unwrap();
        assert!(curve.is_empty());
        assert_eq!(teacher.params(), before);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 3,
            batch_size: 32,
        };
        let (train, mut t1) = make(Preset::AnswerPrior, Fusion::Sum, 23);
        let mut t2 = t1.clone();
        let c1 = train_teacher(&mut t1, &train, &cfg, &mut RngState::new(9)).unwrap();
        let c2 = train_teacher(&mut t2, &train, &cfg, &mut RngState::new(9)).unwrap();
        assert_eq!(t1.params(), t2.params());
        assert_eq!(c1, c2);
        assert!(c1.last().unwrap() < c1.first().unwrap());
    }

    #[test]
    fn trained_teacher_leans_on_the_prior_for_ambiguous_samples() {
        // Noiseless data makes ambiguity detectable: the context is exactly
        // zero. The fused readout should then answer from the learned prior.
        let bias = BiasConfig {
            noise_sigma: 0.0,
            n_train: 4_000,
            n_id_test: 100,
            n_ood_test: 100,
            ..BiasConfig::answer_prior_default(31)
        };
        let train = gen_answer_prior(&bias, Split::Train, &RngState::new(bias.seed)).unwrap();
        let mut teacher = CausalTeacher::new(
            &TeacherConfig::default(),
            &bias,
            &train,
            &mut RngState::new(32),
        )
        .unwrap();
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 10,
            batch_size: 64,
        };
        train_teacher(&mut teacher, &train, &cfg, &mut RngState::new(33)).unwrap();
        let mut mean_head_mass = 0.0;
        let mut n = 0.0;
        for s in &train.samples {
            if s.context_vec.iter().all(|&v| v == 0.0) {
                let p = teacher.predict_id(s).unwrap();
                mean_head_mass += p.values()[bias.head(s.question_type)];
                n += 1.0;
            }
        }
        assert!(n > 100.0, "expected ambiguous samples, found {n}");
        mean_head_mass /= n;
        assert!(mean_head_mass > 0.5, "mean head mass {mean_head_mass}");
    }

    #[test]
    fn balanced_data_gives_matching_readouts() {
        // Needs the full training scale: with few samples the empirical
        // per-type priors are noisy enough to split the readouts.
        let bias = BiasConfig {
            beta: 1.0 / 8.0,
            n_id_test: 2_000,
            n_ood_test: 2_000,
            ..BiasConfig::answer_prior_default(41)
        };
        let rng = RngState::new(bias.seed);
        let train = gen_answer_prior(&bias, Split::Train, &rng).unwrap();
        let id_eval = gen_answer_prior(&bias, Split::IdTest, &rng).unwrap();
        let ood_eval = gen_answer_prior(&bias, Split::OodTest, &rng).unwrap();
        let mut teacher = CausalTeacher::new(
            &TeacherConfig::default(),
            &bias,
            &train,
            &mut RngState::new(42),
        )
        .unwrap();
        let cfg = SgdConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 8,
            batch_size: 64,
        };
        train_teacher(&mut teacher, &train, &cfg, &mut RngState::new(43)).unwrap();
        for eval in [&id_eval, &ood_eval] {
            let id_acc =
                crate::eval::accuracy(|s| teacher.predict_id(s), eval).unwrap();
            let ood_acc =
                crate::eval::accuracy(|s| teacher.predict_ood(s), eval).unwrap();
            assert!(
                (id_acc - ood_acc).abs() <= 0.02,
                "readouts disagree on balanced data: {id_acc} vs {ood_acc}"
            );
        }
    }

    #[test]
    fn divergent_learning_rate_reports_epoch() {
        let (train, mut teacher) = make(Preset::AnswerPrior, Fusion::Sum, 24);
        let cfg = SgdConfig {
            learning_rate: 1e12,
            momentum: 0.9,
            epochs: 5,
            batch_size: 32,
        };
        match train_teacher(&mut teacher, &train, &cfg, &mut RngState::new(2)) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
