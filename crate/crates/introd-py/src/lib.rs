//! Python bindings: the numeric core plus the config-driven experiment
//! pipeline. Structured results cross the boundary as JSON strings so the
//! Python side stays dependency-free.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use introd::data::Preset;
use introd::exp::{AblationSuite, ExperimentConfig};
use introd::introspect::{MatchScores, WeightVariant};
use introd::num::{LogitVector, ProbVector};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn prob(values: Vec<f64>) -> PyResult<ProbVector> {
    ProbVector::new(values).map_err(err)
}

/// Numerically stable softmax.
#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(introd::num::softmax(&LogitVector(logits))
        .map_err(err)?
        .values()
        .to_vec())
}

/// Cross-entropy of `p` against the target distribution `p_gt`, in nats.
#[pyfunction]
fn cross_entropy(p_gt: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    introd::num::cross_entropy(&prob(p_gt)?, &prob(p)?).map_err(err)
}

/// KL divergence from `p_s` to `p_t`, in nats.
#[pyfunction]
fn kl_divergence(p_t: Vec<f64>, p_s: Vec<f64>) -> PyResult<f64> {
    introd::num::kl_divergence(&prob(p_t)?, &prob(p_s)?).map_err(err)
}

/// Harmonic mean of two accuracies (any common scale).
#[pyfunction]
fn harmonic_mean(id_acc: f64, ood_acc: f64) -> f64 {
    introd::eval::harmonic_mean(id_acc, ood_acc)
}

fn weights_for(s_id: f64, s_ood: f64, variant: WeightVariant) -> PyResult<(f64, f64)> {
    let scores = MatchScores {
        s_id,
        s_ood,
        mode: introd::introspect::MatchMode::Xe,
    };
    let w = introd::introspect::weights(&scores, variant).map_err(err)?;
    Ok((w.w_id, w.w_ood))
}

/// Soft blend weights `(w_id, w_ood)`, inversely proportional to the scores.
#[pyfunction]
fn soft_weights(s_id: f64, s_ood: f64) -> PyResult<(f64, f64)> {
    weights_for(s_id, s_ood, WeightVariant::Soft)
}

/// Hard blend weights; ties assign the ID side.
#[pyfunction]
fn hard_weights(s_id: f64, s_ood: f64) -> PyResult<(f64, f64)> {
    weights_for(s_id, s_ood, WeightVariant::Hard)
}

/// Convex combination `w_id * id_knowledge + (1 - w_id) * p_ood`.
#[pyfunction]
fn blend(w_id: f64, id_knowledge: Vec<f64>, p_ood: Vec<f64>) -> PyResult<Vec<f64>> {
    let w = introd::introspect::BlendWeights {
        w_id,
        w_ood: 1.0 - w_id,
    };
    Ok(
        introd::introspect::blend(&w, &prob(id_knowledge)?, &prob(p_ood)?)
            .map_err(err)?
            .values()
            .to_vec(),
    )
}

/// Distillation loss `KL(p_t, softmax(logits))` and its gradient in the
/// logits.
#[pyfunction]
fn distill_loss(p_t: Vec<f64>, logits: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    introd::introspect::distill_loss(&prob(p_t)?, &LogitVector(logits)).map_err(err)
}

fn parse_config(config_toml: &str, output_dir: Option<&str>) -> PyResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir.into();
        cfg.validate().map_err(err)?;
    }
    Ok(cfg)
}

/// Default experiment config for a preset, as editable TOML.
#[pyfunction]
fn default_config(preset: &str) -> PyResult<String> {
    let preset: Preset = preset.parse().map_err(err)?;
    toml::to_string_pretty(&ExperimentConfig::default_for(preset)).map_err(err)
}

/// Generates and writes the dataset files; returns their paths.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None))]
fn gen_datasets(config_toml: &str, output_dir: Option<&str>) -> PyResult<Vec<String>> {
    let cfg = parse_config(config_toml, output_dir)?;
    let paths = introd::exp::cmd_gen(&cfg, None).map_err(err)?;
    Ok(paths
        .into_iter()
        .map(|p| p.to_string_lossy().into_owned())
        .collect())
}

/// Full pipeline (generate, train teacher, distill, evaluate); returns the
/// run manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None))]
fn run_experiment(config_toml: &str, output_dir: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config_toml, output_dir)?;
    let manifest = introd::exp::cmd_run(&cfg).map_err(err)?;
    serde_json::to_string(&manifest).map_err(err)
}

/// Runs one ablation suite (`q1`..`q7`); returns the table as JSON.
#[pyfunction]
#[pyo3(signature = (config_toml, suite, output_dir=None))]
fn ablate(config_toml: &str, suite: &str, output_dir: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config_toml, output_dir)?;
    let suite: AblationSuite = suite.parse().map_err(err)?;
    let table = introd::exp::cmd_ablate(&cfg, suite).map_err(err)?;
    serde_json::to_string(&table).map_err(err)
}

#[pymodule]
fn introd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(harmonic_mean, m)?)?;
    m.add_function(wrap_pyfunction!(soft_weights, m)?)?;
    m.add_function(wrap_pyfunction!(hard_weights, m)?)?;
    m.add_function(wrap_pyfunction!(blend, m)?)?;
    m.add_function(wrap_pyfunction!(distill_loss, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(gen_datasets, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(ablate, m)?)?;
    m.add("__version__", introd::VERSION)?;
    Ok(())
}
