//! Declarative experiment configuration and orchestration.
//!
//! One TOML file describes data, teacher, introspection, and optimizer
//! settings; every command is a deterministic function of that file plus a
//! seed list. Unknown keys are rejected so a manifest's config echo is
//! always complete.

mod run;
mod tables;

pub use run::{
    build_and_train_teacher, cmd_ablate, cmd_distill, cmd_gen, cmd_hist, cmd_run,
    cmd_train_teacher, dataset_path, distill_with, manifest_path, student_path, teacher_path,
    teacher_readouts, RunManifest, SeedOutcome, TeacherReadouts, HISTOGRAM_BINS,
};
pub use tables::{write_csv_table, AblationSuite, AblationTable, TableRow};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{BiasConfig, Preset};
use crate::error::{Error, Result};
use crate::introspect::{IdKnowledge, IntrodConfig, MatchMode, WeightVariant};
use crate::num::SgdConfig;
use crate::teacher::{Debias, Fusion, TeacherConfig};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "INTROD_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasSection {
    pub preset: Preset,
    pub n_types: usize,
    pub n_answers: usize,
    pub beta: f64,
    pub eta: f64,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_id_test: usize,
    pub n_ood_test: usize,
    pub slot_k: usize,
}

impl Default for BiasSection {
    fn default() -> Self {
        let b = BiasConfig::answer_prior_default(0);
        BiasSection {
            preset: b.preset,
            n_types: b.n_types,
            n_answers: b.n_answers,
            beta: b.beta,
            eta: b.eta,
            noise_sigma: b.noise_sigma,
            n_train: b.n_train,
            n_id_test: b.n_id_test,
            n_ood_test: b.n_ood_test,
            slot_k: b.slot_k,
        }
    }
}

impl BiasSection {
    pub fn position_default() -> Self {
        let b = BiasConfig::position_default(0);
        BiasSection {
            preset: b.preset,
            n_types: b.n_types,
            n_answers: b.n_answers,
            beta: b.beta,
            eta: b.eta,
            noise_sigma: b.noise_sigma,
            n_train: b.n_train,
            n_id_test: b.n_id_test,
            n_ood_test: b.n_ood_test,
            slot_k: b.slot_k,
        }
    }

    pub fn to_bias_config(&self, seed: u64) -> BiasConfig {
        BiasConfig {
            preset: self.preset,
            n_types: self.n_types,
            n_answers: self.n_answers,
            beta: self.beta,
            eta: self.eta,
            noise_sigma: self.noise_sigma,
            n_train: self.n_train,
            n_id_test: self.n_id_test,
            n_ood_test: self.n_ood_test,
            seed,
            slot_k: self.slot_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TeacherSection {
    pub fusion: Fusion,
    pub debias: Debias,
    pub hidden: usize,
    pub lambda_short: f64,
    pub prior_smoothing: f64,
}

impl Default for TeacherSection {
    fn default() -> Self {
        // The sigmoid-masked fusion keeps the factual readout's confidence
        // at content level, which is what gives the introspection its
        // per-sample discrimination on answer-prior data.
        TeacherSection {
            fusion: Fusion::Gate,
            debias: Debias::Nie,
            hidden: 64,
            lambda_short: 1.0,
            prior_smoothing: 1.0,
        }
    }
}

impl TeacherSection {
    pub fn to_teacher_config(&self) -> TeacherConfig {
        TeacherConfig {
            fusion: self.fusion,
            debias: self.debias,
            hidden: self.hidden,
            lambda_short: self.lambda_short,
            prior_smoothing: self.prior_smoothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntrodSection {
    pub mode: MatchMode,
    /// One of `soft`, `hard`, `fixed`, `proportional`.
    pub variant: String,
    /// The constant weight used when `variant = "fixed"`.
    pub fixed_w: f64,
    pub id_knowledge: IdKnowledge,
}

impl Default for IntrodSection {
    fn default() -> Self {
        // Hard weights suit the weak desk-scale OOD readouts; the soft
        // variant stays a config/ablation choice.
        IntrodSection {
            mode: MatchMode::Xe,
            variant: "hard".into(),
            fixed_w: 0.5,
            id_knowledge: IdKnowledge::GroundTruth,
        }
    }
}

impl IntrodSection {
    pub fn to_introd_config(&self) -> Result<IntrodConfig> {
        let variant = match self.variant.as_str() {
            "soft" => WeightVariant::Soft,
            "hard" => WeightVariant::Hard,
            "proportional" => WeightVariant::Proportional,
            "fixed" => {
                if !(0.0..=1.0).contains(&self.fixed_w) {
                    return Err(Error::InvalidConfig(format!(
                        "introd.fixed_w must lie in [0,1], got {}",
                        self.fixed_w
                    )));
                }
                WeightVariant::Fixed(self.fixed_w)
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown introd.variant `{other}`"
                )))
            }
        };
        Ok(IntrodConfig {
            mode: self.mode,
            variant,
            id_knowledge: self.id_knowledge,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdSection {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for SgdSection {
    fn default() -> Self {
        SgdSection {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 12,
            batch_size: 64,
        }
    }
}

impl SgdSection {
    pub fn to_sgd_config(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch_size,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

/// A full experiment description; the unit of reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub bias: BiasSection,
    pub teacher: TeacherSection,
    pub introd: IntrodSection,
    pub sgd_teacher: SgdSection,
    pub sgd_student: SgdSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: default_output_dir(),
            seeds: default_seeds(),
            bias: BiasSection::default(),
            teacher: TeacherSection::default(),
            introd: IntrodSection::default(),
            sgd_teacher: SgdSection::default(),
            sgd_student: SgdSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for a preset, with the position preset getting the teacher
    /// and optimizer settings its dynamics need: log-space fusion, a larger
    /// training set so the off-slot residue carries enough matching signal,
    /// a longer-trained teacher, and a short-trained student/baseline.
    pub fn default_for(preset: Preset) -> Self {
        match preset {
            Preset::AnswerPrior => ExperimentConfig::default(),
            Preset::Position => ExperimentConfig {
                bias: BiasSection {
                    n_train: 60_000,
                    ..BiasSection::position_default()
                },
                teacher: TeacherSection {
                    fusion: Fusion::Sum,
                    ..TeacherSection::default()
                },
                sgd_teacher: SgdSection {
                    learning_rate: 0.2,
                    epochs: 12,
                    ..SgdSection::default()
                },
                sgd_student: SgdSection {
                    learning_rate: 0.1,
                    epochs: 6,
                    ..SgdSection::default()
                },
                output_dir: PathBuf::from("runs/position"),
                ..ExperimentConfig::default()
            },
        }
    }

    /// Parses TOML, applies the `INTROD_OUT` override, and validates.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.output_dir = PathBuf::from(dir);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("duplicate seeds".into()));
        }
        self.bias.to_bias_config(0).validate()?;
        if self.teacher.hidden == 0 {
            return Err(Error::InvalidConfig("teacher.hidden must be positive".into()));
        }
        if !(self.teacher.lambda_short >= 0.0 && self.teacher.lambda_short.is_finite()) {
            return Err(Error::InvalidConfig(
                "teacher.lambda_short must be a finite non-negative number".into(),
            ));
        }
        if !(self.teacher.prior_smoothing > 0.0 && self.teacher.prior_smoothing.is_finite()) {
            return Err(Error::InvalidConfig(
                "teacher.prior_smoothing must be positive".into(),
            ));
        }
        self.introd.to_introd_config()?;
        self.sgd_teacher.to_sgd_config().validate()?;
        self.sgd_student.to_sgd_config().validate()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding; stamped on every artifact.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self).expect("config serializes"));
        crate::data::io::hex_string(&hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_toml_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.bias.preset, Preset::AnswerPrior);
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("definitely_not_a_key = 3").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
        let err = ExperimentConfig::from_toml("[bias]\nbogus = 1").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn invalid_beta_fails_validation() {
        let err =
            ExperimentConfig::from_toml("[bias]\nbeta = 0.01").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn bad_variant_fails_validation() {
        let err = ExperimentConfig::from_toml("[introd]\nvariant = \"softish\"").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = ExperimentConfig::default();
        c.bias.beta = 0.8;
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
