//! Synthetic biased QA datasets.
//!
//! Two presets: `answer_prior` skews the per-question-type answer
//! distribution in training and reverses it in the OOD test split;
//! `position` pins every training answer to one context slot while OOD
//! answers move freely. Both are deterministic functions of
//! `(BiasConfig, split, seed)`.

mod gen;
pub(crate) mod io;

pub use gen::{gen_answer_prior, gen_position, generate, CONTEXT_SIGNAL, QUESTION_NOISE};
pub use io::{dataset_checksum, load_dataset, save_dataset, DATASET_FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::ProbVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    AnswerPrior,
    Position,
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Preset::AnswerPrior => write!(f, "answer_prior"),
            Preset::Position => write!(f, "position"),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "answer_prior" => Ok(Preset::AnswerPrior),
            "position" => Ok(Preset::Position),
            other => Err(Error::InvalidConfig(format!("unknown preset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    IdTest,
    OodTest,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::IdTest, Split::OodTest];

    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::IdTest => "id_test",
            Split::OodTest => "ood_test",
        }
    }

    pub(crate) fn id(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::IdTest => 1,
            Split::OodTest => 2,
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "id_test" => Ok(Split::IdTest),
            "ood_test" => Ok(Split::OodTest),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub preset: Preset,
    /// Number of question types T. For the position preset this doubles as
    /// the token vocabulary and must equal `n_answers`.
    pub n_types: usize,
    /// Number of answer classes A; for the position preset, the slot count S.
    pub n_answers: usize,
    /// Training mass on the per-type head answer; `1/A` means balanced.
    pub beta: f64,
    /// Fraction of samples whose context signal is suppressed
    /// (answer_prior preset only).
    pub eta: f64,
    /// Stddev of Gaussian context noise.
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_id_test: usize,
    pub n_ood_test: usize,
    pub seed: u64,
    /// Forced training answer slot for the position preset.
    pub slot_k: usize,
}

impl BiasConfig {
    /// Desk-scale answer-prior default: skewed priors, some ambiguity.
    pub fn answer_prior_default(seed: u64) -> Self {
        BiasConfig {
            preset: Preset::AnswerPrior,
            n_types: 8,
            n_answers: 8,
            beta: 0.9,
            eta: 0.15,
            noise_sigma: 0.5,
            n_train: 20_000,
            n_id_test: 5_000,
            n_ood_test: 5_000,
            seed,
            slot_k: 0,
        }
    }

    /// Desk-scale position default: training answers concentrate on slot 0.
    /// The residual off-slot mass is what lets an ensembled teacher's main
    /// branch pick up token matching at all.
    pub fn position_default(seed: u64) -> Self {
        BiasConfig {
            preset: Preset::Position,
            n_types: 8,
            n_answers: 8,
            beta: 0.98,
            eta: 0.0,
            noise_sigma: 0.65,
            n_train: 20_000,
            n_id_test: 5_000,
            n_ood_test: 5_000,
            seed,
            slot_k: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_types == 0 || self.n_answers == 0 {
            return Err(Error::InvalidConfig(
                "n_types and n_answers must be positive".into(),
            ));
        }
        if self.n_train == 0 || self.n_id_test == 0 || self.n_ood_test == 0 {
            return Err(Error::InvalidConfig("sample counts must be positive".into()));
        }
        if !self.beta.is_finite() || self.beta > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "beta must lie in [1/A, 1], got {}",
                self.beta
            )));
        }
        if self.beta < 1.0 / self.n_answers as f64 - 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "beta {} is below the balanced prior 1/A = {}",
                self.beta,
                1.0 / self.n_answers as f64
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in [0,1], got {}",
                self.eta
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        match self.preset {
            Preset::AnswerPrior => {}
            Preset::Position => {
                if self.slot_k >= self.n_answers {
                    return Err(Error::InvalidConfig(format!(
                        "slot_k {} out of range for {} slots",
                        self.slot_k, self.n_answers
                    )));
                }
                if self.n_types != self.n_answers {
                    return Err(Error::InvalidConfig(
                        "position preset requires n_types == n_answers (token vocabulary = slot count)"
                            .into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn split_len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::IdTest => self.n_id_test,
            Split::OodTest => self.n_ood_test,
        }
    }

    /// Training head answer for a question type.
    pub fn head(&self, question_type: usize) -> usize {
        question_type % self.n_answers
    }

    /// OOD head answer: a fixed derangement of the training head.
    pub fn head_ood(&self, question_type: usize) -> usize {
        (question_type + 1) % self.n_answers
    }

    /// Dimension of `question_vec`.
    pub fn question_dim(&self) -> usize {
        self.n_types
    }

    /// Dimension of `context_vec`.
    pub fn context_dim(&self) -> usize {
        match self.preset {
            Preset::AnswerPrior => self.n_answers,
            // S slots, each a one-hot token over a vocabulary of size S.
            Preset::Position => self.n_answers * self.n_answers,
        }
    }

    /// Conventional on-disk name: `<preset>_<seed>_<split>.ds`.
    pub fn dataset_filename(&self, split: Split) -> String {
        format!("{}_{}_{}.ds", self.preset, self.seed, split.tag())
    }
}

/// One synthetic QA instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub question_type: usize,
    pub question_vec: Vec<f64>,
    pub context_vec: Vec<f64>,
    /// Ground-truth answer ids, sorted, non-empty.
    pub gt_answers: Vec<usize>,
    /// Normalized label distribution, supported exactly on `gt_answers`.
    pub gt_dist: ProbVector,
}

impl Sample {
    pub fn validate(&self, cfg: &BiasConfig) -> Result<()> {
        if self.gt_answers.is_empty() {
            return Err(Error::InvalidSample("empty ground-truth set".into()));
        }
        if self.question_type >= cfg.n_types {
            return Err(Error::InvalidSample(format!(
                "question_type {} out of range",
                self.question_type
            )));
        }
        if self.question_vec.len() != cfg.question_dim()
            || self.context_vec.len() != cfg.context_dim()
            || self.gt_dist.len() != cfg.n_answers
        {
            return Err(Error::InvalidSample("inconsistent dimensions".into()));
        }
        let sum: f64 = self.gt_dist.values().iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSample("gt_dist does not sum to 1".into()));
        }
        for (a, &p) in self.gt_dist.values().iter().enumerate() {
            let supported = self.gt_answers.binary_search(&a).is_ok();
            if supported && p <= 0.0 {
                return Err(Error::InvalidSample(format!("gt answer {a} has no mass")));
            }
            if !supported && p != 0.0 {
                return Err(Error::InvalidSample(format!(
                    "mass on non-ground-truth answer {a}"
                )));
            }
        }
        Ok(())
    }
}

/// An ordered, versioned list of samples for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split: Split,
    pub bias_config: BiasConfig,
    pub format_version: u32,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
