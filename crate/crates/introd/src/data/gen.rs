use super::{BiasConfig, Dataset, Preset, Sample, Split, DATASET_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::num::{ProbVector, RngState};

/// Scale of the answer signal written into the context.
pub const CONTEXT_SIGNAL: f64 = 1.0;
/// Stddev of the noise added to the one-hot question encoding.
pub const QUESTION_NOISE: f64 = 0.05;

/// Dispatches to the preset named in the config.
pub fn generate(cfg: &BiasConfig, split: Split, rng: &RngState) -> Result<Dataset> {
    match cfg.preset {
        Preset::AnswerPrior => gen_answer_prior(cfg, split, rng),
        Preset::Position => gen_position(cfg, split, rng),
    }
}

/// Answer-prior preset: training priors put mass `beta` on `head(t)` per
/// question type; the OOD test split moves that mass to the deranged head.
/// With probability `eta` the context signal is zeroed, leaving the prior as
/// the only evidence.
pub fn gen_answer_prior(cfg: &BiasConfig, split: Split, rng: &RngState) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.preset != Preset::AnswerPrior {
        return Err(Error::InvalidConfig(
            "gen_answer_prior requires preset = answer_prior".into(),
        ));
    }
    let n = cfg.split_len(split);
    let split_rng = rng.substream(split.id());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = split_rng.substream(i as u64);
        let t = r.next_below(cfg.n_types);
        let head = match split {
            Split::Train | Split::IdTest => cfg.head(t),
            Split::OodTest => cfg.head_ood(t),
        };
        let answer = draw_from_prior(&mut r, cfg.n_answers, head, cfg.beta);
        let ambiguous = r.next_f64() < cfg.eta;

        let mut question_vec = vec![0.0; cfg.n_types];
        question_vec[t] = 1.0;
        for v in question_vec.iter_mut() {
            *v += QUESTION_NOISE * r.next_normal();
        }

        let mut context_vec = vec![0.0; cfg.n_answers];
        if !ambiguous {
            context_vec[answer] = CONTEXT_SIGNAL;
        }
        for v in context_vec.iter_mut() {
            *v += cfg.noise_sigma * r.next_normal();
        }

        samples.push(Sample {
            question_type: t,
            question_vec,
            context_vec,
            gt_answers: vec![answer],
            gt_dist: ProbVector::one_hot(cfg.n_answers, answer),
        });
    }
    Ok(Dataset {
        samples,
        split,
        bias_config: cfg.clone(),
        format_version: DATASET_FORMAT_VERSION,
    })
}

/// Position preset: the context is S slots holding a random permutation of
/// S tokens, the question names a target token, and the answer is the slot
/// holding it. Training and ID test concentrate that slot on `slot_k` with
/// mass `beta` (1.0 pins it outright); the OOD test draws it uniformly.
pub fn gen_position(cfg: &BiasConfig, split: Split, rng: &RngState) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.preset != Preset::Position {
        return Err(Error::InvalidConfig(
            "gen_position requires preset = position".into(),
        ));
    }
    let slots = cfg.n_answers;
    let vocab = cfg.n_answers;
    let n = cfg.split_len(split);
    let split_rng = rng.substream(split.id());
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = split_rng.substream(i as u64);
        let answer_slot = match split {
            Split::Train | Split::IdTest => {
                if r.next_f64() < cfg.beta {
                    cfg.slot_k
                } else {
                    r.next_below(slots)
                }
            }
            Split::OodTest => r.next_below(slots),
        };
        let target = r.next_below(vocab);
        let mut tokens: Vec<usize> = (0..vocab).collect();
        r.shuffle(&mut tokens);
        let at = tokens.iter().position(|&tok| tok == target).unwrap();
        tokens.swap(at, answer_slot);

        let mut question_vec = vec![0.0; vocab];
        question_vec[target] = 1.0;
        for v in question_vec.iter_mut() {
            *v += QUESTION_NOISE * r.next_normal();
        }

        let mut context_vec = vec![0.0; slots * vocab];
        for (slot, &tok) in tokens.iter().enumerate() {
            context_vec[slot * vocab + tok] = CONTEXT_SIGNAL;
        }
        for v in context_vec.iter_mut() {
            *v += cfg.noise_sigma * r.next_normal();
        }

        samples.push(Sample {
            question_type: target,
            question_vec,
            context_vec,
            gt_answers: vec![answer_slot],
            gt_dist: ProbVector::one_hot(slots, answer_slot),
        });
    }
    Ok(Dataset {
        samples,
        split,
        bias_config: cfg.clone(),
        format_version: DATASET_FORMAT_VERSION,
    })
}

fn draw_from_prior(r: &mut RngState, n_answers: usize, head: usize, beta: f64) -> usize {
    if r.next_f64() < beta {
        head
    } else {
        // Uniform over the other answers.
        let k = r.next_below(n_answers - 1);
        if k >= head {
            k + 1
        } else {
            k
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> BiasConfig {
        BiasConfig {
            preset: Preset::AnswerPrior,
            n_types: 8,
            n_answers: 8,
            beta: 0.9,
            eta: 0.15,
            noise_sigma: 0.5,
            n_train: 2_000,
            n_id_test: 500,
            n_ood_test: 500,
            seed: 7,
            slot_k: 0,
        }
    }

    #[test]
    fn beta_below_balanced_is_rejected() {
        let cfg = BiasConfig {
            beta: 0.05,
            ..base_cfg()
        };
        assert!(matches!(
            gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn balanced_beta_means_train_and_ood_priors_match() {
        // A derangement of a uniform prior is the same uniform prior; check
        // per-(type, answer) frequencies agree between the two splits.
        let cfg = BiasConfig {
            beta: 1.0 / 8.0,
            n_train: 40_000,
            n_ood_test: 40_000,
            eta: 0.0,
            ..base_cfg()
        };
        let rng = RngState::new(cfg.seed);
        let train = gen_answer_prior(&cfg, Split::Train, &rng).unwrap();
        let ood = gen_answer_prior(&cfg, Split::OodTest, &rng).unwrap();
        for ds in [&train, &ood] {
            let mut counts = vec![0usize; 8];
            for s in &ds.samples {
                counts[s.gt_answers[0]] += 1;
            }
            for &c in &counts {
                let freq = c as f64 / ds.len() as f64;
                assert!((freq - 0.125).abs() < 0.02, "freq={freq}");
            }
        }
    }

    #[test]
    fn head_answer_frequency_matches_beta() {
        // Spec'd check: T=8, A=8, beta=0.9, eta=0.15, sigma=0.5, 20k, seed 7.
        let cfg = BiasConfig {
            n_train: 20_000,
            ..base_cfg()
        };
        let ds = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        let mut head_counts = vec![0usize; cfg.n_types];
        let mut type_counts = vec![0usize; cfg.n_types];
        for s in &ds.samples {
            type_counts[s.question_type] += 1;
            if s.gt_answers[0] == cfg.head(s.question_type) {
                head_counts[s.question_type] += 1;
            }
        }
        for t in 0..cfg.n_types {
            let freq = head_counts[t] as f64 / type_counts[t] as f64;
            assert!((freq - 0.9).abs() <= 0.02, "type {t}: head freq {freq}");
        }
    }

    #[test]
    fn prior_reversal_flips_the_argmax_answer() {
        let cfg = base_cfg();
        let rng = RngState::new(cfg.seed);
        let train = gen_answer_prior(&cfg, Split::Train, &rng).unwrap();
        let ood = gen_answer_prior(&cfg, Split::OodTest, &rng).unwrap();
        let empirical_head = |ds: &Dataset| -> Vec<usize> {
            let mut counts = vec![vec![0usize; 8]; 8];
            for s in &ds.samples {
                counts[s.question_type][s.gt_answers[0]] += 1;
            }
            counts
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .max_by_key(|&(_, c)| *c)
                        .map(|(a, _)| a)
                        .unwrap()
                })
                .collect()
        };
        let train_heads = empirical_head(&train);
        let ood_heads = empirical_head(&ood);
        for t in 0..8 {
            assert_eq!(train_heads[t], cfg.head(t));
            assert_eq!(ood_heads[t], cfg.head_ood(t));
            assert_ne!(train_heads[t], ood_heads[t]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = base_cfg();
        let a = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        let b = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_context_determines_the_answer() {
        let cfg = BiasConfig {
            eta: 0.0,
            noise_sigma: 0.0,
            n_train: 500,
            ..base_cfg()
        };
        let rng = RngState::new(cfg.seed);
        for split in Split::ALL {
            let ds = gen_answer_prior(&cfg, split, &rng).unwrap();
            for s in &ds.samples {
                let guess = s
                    .context_vec
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                assert_eq!(guess, s.gt_answers[0]);
            }
        }
    }

    #[test]
    fn generated_samples_validate() {
        let cfg = base_cfg();
        let ds = gen_answer_prior(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        for s in &ds.samples {
            s.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn fully_biased_fully_ambiguous_defeats_the_train_optimal_rule() {
        // With beta = 1 and eta = 1 the only usable evidence is the prior,
        // and the OOD split deranges it, so the train-optimal rule
        // (answer = head of the question type) never scores.
        let cfg = BiasConfig {
            beta: 1.0,
            eta: 1.0,
            ..base_cfg()
        };
        let ood = gen_answer_prior(&cfg, Split::OodTest, &RngState::new(cfg.seed)).unwrap();
        let hits = ood
            .samples
            .iter()
            .filter(|s| s.gt_answers.contains(&cfg.head(s.question_type)))
            .count();
        assert_eq!(hits, 0);
    }

    fn pos_cfg() -> BiasConfig {
        BiasConfig {
            n_train: 2_000,
            n_id_test: 500,
            n_ood_test: 4_000,
            ..BiasConfig::position_default(7)
        }
    }

    #[test]
    fn training_answers_are_all_at_slot_k_when_fully_biased() {
        let cfg = BiasConfig {
            n_types: 2,
            n_answers: 2,
            beta: 1.0,
            ..pos_cfg()
        };
        let ds = gen_position(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        assert!(ds.samples.iter().all(|s| s.gt_answers[0] == 0));
    }

    #[test]
    fn train_slot_concentration_follows_beta() {
        let cfg = BiasConfig {
            beta: 0.95,
            ..pos_cfg()
        };
        let ds = gen_position(&cfg, Split::Train, &RngState::new(cfg.seed)).unwrap();
        let at_k = ds.samples.iter().filter(|s| s.gt_answers[0] == 0).count();
        let freq = at_k as f64 / ds.len() as f64;
        // beta mass plus the uniform draw's 1/S share of the remainder.
        let expected = 0.95 + 0.05 / 8.0;
        assert!((freq - expected).abs() < 0.02, "freq={freq}");
    }

    #[test]
    fn ood_slots_are_roughly_uniform() {
        let cfg = pos_cfg();
        let ds = gen_position(&cfg, Split::OodTest, &RngState::new(cfg.seed)).unwrap();
        let mut counts = vec![0usize; cfg.n_answers];
        for s in &ds.samples {
            counts[s.gt_answers[0]] += 1;
        }
        for &c in &counts {
            let freq = c as f64 / ds.len() as f64;
            assert!((freq - 0.125).abs() < 0.03, "slot freq {freq}");
        }
    }

    #[test]
    fn slot_k_out_of_range_is_rejected() {
        let cfg = BiasConfig {
            slot_k: 8,
            ..pos_cfg()
        };
        assert!(matches!(
            gen_position(&cfg, Split::Train, &RngState::new(1)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn noiseless_position_context_determines_the_answer() {
        let cfg = BiasConfig {
            noise_sigma: 0.0,
            ..pos_cfg()
        };
        let rng = RngState::new(cfg.seed);
        for split in Split::ALL {
            let ds = gen_position(&cfg, split, &rng).unwrap();
            let v = cfg.n_answers;
            for s in &ds.samples {
                let target = s
                    .question_vec
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                let slot = (0..v)
                    .find(|&j| s.context_vec[j * v + target] > 0.5)
                    .unwrap();
                assert_eq!(slot, s.gt_answers[0]);
                // The target token appears in exactly one slot.
                let hits = (0..v)
                    .filter(|&j| s.context_vec[j * v + target] > 0.5)
                    .count();
                assert_eq!(hits, 1);
            }
        }
    }
}
