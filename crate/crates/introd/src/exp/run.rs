use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::tables::{write_csv_table, AblationSuite, AblationTable, SeedMetrics, TableRow};
use super::ExperimentConfig;
use crate::data::{dataset_checksum, generate, load_dataset, save_dataset, Dataset, Split};
use crate::error::{Error, Result};
use crate::eval::{
    distill_student, ensemble_eval, evaluate_predictor, weight_histogram, MetricsReport, Student,
    WeightHistogram,
};
use crate::introspect::{IdKnowledge, IntrodConfig, WeightVariant};
use crate::num::RngState;
use crate::teacher::{
    load_teacher, save_teacher, teacher_checksum, train_teacher, CausalTeacher,
};

// Fixed substream tags so each pipeline stage gets its own random stream.
const TAG_TEACHER_INIT: u64 = 1;
const TAG_TEACHER_TRAIN: u64 = 2;
const TAG_STUDENT_INIT: u64 = 3;
const TAG_STUDENT_TRAIN: u64 = 4;

pub const HISTOGRAM_BINS: usize = 20;

pub fn dataset_path(cfg: &ExperimentConfig, seed: u64, split: Split) -> PathBuf {
    let bias = cfg.bias.to_bias_config(seed);
    cfg.output_dir
        .join("data")
        .join(bias.dataset_filename(split))
}

pub fn teacher_path(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.output_dir.join(format!("teacher_{seed}.ck"))
}

pub fn student_path(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.output_dir.join(format!("student_{seed}.ck"))
}

pub fn manifest_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("manifest.json")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("bad path {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", file_name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("json serializes");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Generates and writes datasets for every seed; `only` restricts to one
/// split. Returns the written paths.
pub fn cmd_gen(cfg: &ExperimentConfig, only: Option<Split>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let data_dir = cfg.output_dir.join("data");
    fs::create_dir_all(&data_dir)?;
    let splits: Vec<Split> = match only {
        Some(s) => vec![s],
        None => Split::ALL.to_vec(),
    };
    let mut written = Vec::new();
    for &seed in &cfg.seeds {
        let bias = cfg.bias.to_bias_config(seed);
        for &split in &splits {
            let ds = generate(&bias, split, &RngState::new(bias.seed))?;
            let path = dataset_path(cfg, seed, split);
            save_dataset(&ds, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

fn load_splits(cfg: &ExperimentConfig, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    Ok((
        load_dataset(&dataset_path(cfg, seed, Split::Train))?,
        load_dataset(&dataset_path(cfg, seed, Split::IdTest))?,
        load_dataset(&dataset_path(cfg, seed, Split::OodTest))?,
    ))
}

/// Trains a fresh teacher for one seed on an already-loaded training set.
pub fn build_and_train_teacher(
    cfg: &ExperimentConfig,
    seed: u64,
    train: &Dataset,
) -> Result<CausalTeacher> {
    let bias = cfg.bias.to_bias_config(seed);
    let mut teacher = CausalTeacher::new(
        &cfg.teacher.to_teacher_config(),
        &bias,
        train,
        &mut RngState::new(seed).substream(TAG_TEACHER_INIT),
    )?;
    train_teacher(
        &mut teacher,
        train,
        &cfg.sgd_teacher.to_sgd_config(),
        &mut RngState::new(seed).substream(TAG_TEACHER_TRAIN),
    )?;
    Ok(teacher)
}

/// Metrics of the two teacher readouts on both test splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherReadouts {
    pub id_readout: MetricsReport,
    pub ood_readout: MetricsReport,
}

pub fn teacher_readouts(
    teacher: &CausalTeacher,
    id_eval: &Dataset,
    ood_eval: &Dataset,
) -> Result<TeacherReadouts> {
    Ok(TeacherReadouts {
        id_readout: evaluate_predictor(|s| teacher.predict_id(s), id_eval, ood_eval)?,
        ood_readout: evaluate_predictor(|s| teacher.predict_ood(s), id_eval, ood_eval)?,
    })
}

/// Distills a fresh student from a frozen teacher under `introd`.
pub fn distill_with(
    cfg: &ExperimentConfig,
    seed: u64,
    teacher: &CausalTeacher,
    train: &Dataset,
    introd: &IntrodConfig,
) -> Result<Student> {
    let bias = cfg.bias.to_bias_config(seed);
    let mut student = Student::new(
        &bias,
        cfg.teacher.hidden,
        &mut RngState::new(seed).substream(TAG_STUDENT_INIT),
    );
    distill_student(
        &mut student,
        teacher,
        train,
        introd,
        &cfg.sgd_student.to_sgd_config(),
        &mut RngState::new(seed).substream(TAG_STUDENT_TRAIN),
    )?;
    Ok(student)
}

fn metrics_csv(rows: &[(String, u64, &MetricsReport)]) -> String {
    let mut out = String::from("label,seed,ood_accuracy,id_accuracy,hm\n");
    for (label, seed, r) in rows {
        writeln!(
            out,
            "{label},{seed},{},{},{}",
            r.ood_accuracy, r.id_accuracy, r.hm
        )
        .expect("string write");
    }
    out
}

/// Trains and checkpoints a teacher per seed, evaluating both readouts.
pub fn cmd_train_teacher(cfg: &ExperimentConfig) -> Result<Vec<(u64, TeacherReadouts)>> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut results = Vec::new();
    let mut csv_rows = Vec::new();
    for &seed in &cfg.seeds {
        let (train, id_eval, ood_eval) = load_splits(cfg, seed)?;
        let teacher = build_and_train_teacher(cfg, seed, &train)?;
        save_teacher(&teacher, &teacher_path(cfg, seed))?;
        let readouts = teacher_readouts(&teacher, &id_eval, &ood_eval)?;
        write_json(
            &cfg.output_dir.join(format!("teacher_metrics_{seed}.json")),
            &serde_json::json!({
                "seed": seed,
                "config_hash": cfg.config_hash(),
                "id_readout": readouts.id_readout,
                "ood_readout": readouts.ood_readout,
            }),
        )?;
        results.push((seed, readouts));
    }
    for (seed, r) in &results {
        csv_rows.push(("id_readout".to_string(), *seed, &r.id_readout));
        csv_rows.push(("ood_readout".to_string(), *seed, &r.ood_readout));
    }
    write_atomic(
        &cfg.output_dir.join("teacher_metrics.csv"),
        metrics_csv(&csv_rows).as_bytes(),
    )?;
    Ok(results)
}

/// Distills the configured student from each seed's checkpointed teacher.
/// Verifies the teacher checkpoint is byte-identical afterwards.
pub fn cmd_distill(cfg: &ExperimentConfig) -> Result<Vec<(u64, MetricsReport)>> {
    cfg.validate()?;
    let introd = cfg.introd.to_introd_config()?;
    let mut results = Vec::new();
    let mut csv_rows = Vec::new();
    for &seed in &cfg.seeds {
        let (train, id_eval, ood_eval) = load_splits(cfg, seed)?;
        let teacher = load_teacher(&teacher_path(cfg, seed))?;
        let checksum_before = teacher_checksum(&teacher);
        let student = distill_with(cfg, seed, &teacher, &train, &introd)?;
        if teacher_checksum(&teacher) != checksum_before {
            return Err(Error::IncompatibleArtifact(
                "teacher changed during distillation".into(),
            ));
        }
        crate::teacher::save_student(&student.net, &student_path(cfg, seed))?;
        let report = evaluate_predictor(|s| student.predict(s), &id_eval, &ood_eval)?;
        write_json(
            &cfg.output_dir.join(format!("student_metrics_{seed}.json")),
            &serde_json::json!({
                "seed": seed,
                "config_hash": cfg.config_hash(),
                "teacher_checksum": checksum_before,
                "student": report,
            }),
        )?;
        results.push((seed, report));
    }
    for (seed, r) in &results {
        csv_rows.push(("student".to_string(), *seed, r));
    }
    write_atomic(
        &cfg.output_dir.join("student_metrics.csv"),
        metrics_csv(&csv_rows).as_bytes(),
    )?;
    Ok(results)
}

fn histogram_csv(h: &WeightHistogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, &c) in h.counts.iter().enumerate() {
        writeln!(out, "{},{},{c}", h.bin_edges[i], h.bin_edges[i + 1]).expect("string write");
    }
    out
}

/// Soft-weight histogram of each seed's checkpointed teacher over its
/// training set.
pub fn cmd_hist(cfg: &ExperimentConfig) -> Result<Vec<(u64, WeightHistogram)>> {
    cfg.validate()?;
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let train = load_dataset(&dataset_path(cfg, seed, Split::Train))?;
        let teacher = load_teacher(&teacher_path(cfg, seed))?;
        let hist = weight_histogram(&teacher, &train, cfg.introd.mode, HISTOGRAM_BINS)?;
        write_json(&cfg.output_dir.join(format!("hist_{seed}.json")), &hist)?;
        write_atomic(
            &cfg.output_dir.join(format!("hist_{seed}.csv")),
            histogram_csv(&hist).as_bytes(),
        )?;
        results.push((seed, hist));
    }
    Ok(results)
}

struct SeedContext {
    seed: u64,
    train: Dataset,
    id_eval: Dataset,
    ood_eval: Dataset,
    teacher: CausalTeacher,
    readouts: TeacherReadouts,
}

fn seed_contexts(cfg: &ExperimentConfig) -> Result<Vec<SeedContext>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let (train, id_eval, ood_eval) = load_splits(cfg, seed)?;
        let teacher = build_and_train_teacher(cfg, seed, &train)?;
        let readouts = teacher_readouts(&teacher, &id_eval, &ood_eval)?;
        out.push(SeedContext {
            seed,
            train,
            id_eval,
            ood_eval,
            teacher,
            readouts,
        });
    }
    Ok(out)
}

fn student_row(
    cfg: &ExperimentConfig,
    contexts: &[SeedContext],
    label: &str,
    introd: &IntrodConfig,
) -> Result<TableRow> {
    let mut per_seed = Vec::new();
    for ctx in contexts {
        let student = distill_with(cfg, ctx.seed, &ctx.teacher, &ctx.train, introd)?;
        let report = evaluate_predictor(|s| student.predict(s), &ctx.id_eval, &ctx.ood_eval)?;
        per_seed.push(SeedMetrics {
            seed: ctx.seed,
            report,
        });
    }
    Ok(TableRow::from_seed_reports(label, per_seed))
}

fn readout_rows(contexts: &[SeedContext]) -> (TableRow, TableRow) {
    let id = TableRow::from_seed_reports(
        "id_teacher",
        contexts
            .iter()
            .map(|c| SeedMetrics {
                seed: c.seed,
                report: c.readouts.id_readout.clone(),
            })
            .collect(),
    );
    let ood = TableRow::from_seed_reports(
        "ood_teacher",
        contexts
            .iter()
            .map(|c| SeedMetrics {
                seed: c.seed,
                report: c.readouts.ood_readout.clone(),
            })
            .collect(),
    );
    (id, ood)
}

/// Runs one ablation suite with shared seeds and shared per-seed teachers,
/// emitting the table as JSON and CSV.
pub fn cmd_ablate(cfg: &ExperimentConfig, suite: AblationSuite) -> Result<AblationTable> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let contexts = seed_contexts(cfg)?;
    let default_introd = cfg.introd.to_introd_config()?;
    let (id_row, ood_row) = readout_rows(&contexts);
    let mut rows = vec![id_row, ood_row];
    match suite {
        AblationSuite::Q1 => {
            for (label, mode) in [
                ("introd_prob", crate::introspect::MatchMode::Prob),
                ("introd_xe", crate::introspect::MatchMode::Xe),
            ] {
                let introd = IntrodConfig {
                    mode,
                    ..default_introd
                };
                rows.push(student_row(cfg, &contexts, label, &introd)?);
            }
        }
        AblationSuite::Q2 => {
            let weight_avg = IntrodConfig {
                variant: WeightVariant::Proportional,
                ..default_introd
            };
            rows.push(student_row(cfg, &contexts, "weight_avg", &weight_avg)?);
            rows.push(student_row(cfg, &contexts, "introd", &default_introd)?);
        }
        AblationSuite::Q3 => {
            let simple_avg = IntrodConfig {
                variant: WeightVariant::Fixed(0.5),
                ..default_introd
            };
            rows.push(student_row(cfg, &contexts, "simple_avg", &simple_avg)?);
            rows.push(student_row(cfg, &contexts, "introd", &default_introd)?);
        }
        AblationSuite::Q4 => {
            let cfd = IntrodConfig {
                variant: WeightVariant::Fixed(0.0),
                ..default_introd
            };
            rows.push(student_row(cfg, &contexts, "cfd", &cfd)?);
            rows.push(student_row(cfg, &contexts, "introd", &default_introd)?);
        }
        AblationSuite::Q5 => {
            for (label, variant) in [
                ("hard_variant", WeightVariant::Hard),
                ("soft_variant", WeightVariant::Soft),
            ] {
                let introd = IntrodConfig {
                    variant,
                    ..default_introd
                };
                rows.push(student_row(cfg, &contexts, label, &introd)?);
            }
        }
        AblationSuite::Q6 => {
            for (label, id_knowledge) in [
                ("id_pred_knowledge", IdKnowledge::IdPrediction),
                ("gt_knowledge", IdKnowledge::GroundTruth),
            ] {
                let introd = IntrodConfig {
                    id_knowledge,
                    ..default_introd
                };
                rows.push(student_row(cfg, &contexts, label, &introd)?);
            }
        }
        AblationSuite::Q7 => {
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let mut per_w: Vec<Vec<SeedMetrics>> = vec![Vec::new(); grid.len()];
            for ctx in &contexts {
                let points = ensemble_eval(&ctx.teacher, &grid, &ctx.id_eval, &ctx.ood_eval)?;
                for (k, point) in points.into_iter().enumerate() {
                    per_w[k].push(SeedMetrics {
                        seed: ctx.seed,
                        report: point.report,
                    });
                }
            }
            for (k, seeds) in per_w.into_iter().enumerate() {
                rows.push(TableRow::from_seed_reports(
                    format!("ensemble_w_{:.1}", grid[k]),
                    seeds,
                ));
            }
            rows.push(student_row(cfg, &contexts, "introd", &default_introd)?);
        }
    }
    let table = AblationTable {
        suite: suite.name().into(),
        description: suite.description().into(),
        seeds: cfg.seeds.clone(),
        config_hash: cfg.config_hash(),
        rows,
    };
    write_json(
        &cfg.output_dir.join(format!("ablate_{}.json", suite.name())),
        &table,
    )?;
    write_csv_table(
        &table,
        &cfg.output_dir.join(format!("ablate_{}.csv", suite.name())),
    )?;
    Ok(table)
}

/// Everything recorded for one seed of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub train_checksum: String,
    pub teacher_checksum: String,
    pub id_readout: MetricsReport,
    pub ood_readout: MetricsReport,
    pub student: MetricsReport,
    pub weight_histogram: WeightHistogram,
}

/// The deterministic record of a full pipeline run. Wall-clock time is
/// written to a sibling `timing.json` so the manifest is byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedOutcome>,
}

/// Full pipeline: generate, train teacher, distill, evaluate, histogram,
/// manifest. Byte-identical outputs for identical configs.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    cmd_gen(cfg, None)?;
    let introd = cfg.introd.to_introd_config()?;
    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let (train, id_eval, ood_eval) = load_splits(cfg, seed)?;
        let teacher = build_and_train_teacher(cfg, seed, &train)?;
        save_teacher(&teacher, &teacher_path(cfg, seed))?;
        let readouts = teacher_readouts(&teacher, &id_eval, &ood_eval)?;
        let student = distill_with(cfg, seed, &teacher, &train, &introd)?;
        crate::teacher::save_student(&student.net, &student_path(cfg, seed))?;
        let report = evaluate_predictor(|s| student.predict(s), &id_eval, &ood_eval)?;
        let hist = weight_histogram(&teacher, &train, cfg.introd.mode, HISTOGRAM_BINS)?;
        outcomes.push(SeedOutcome {
            seed,
            train_checksum: dataset_checksum(&train),
            teacher_checksum: teacher_checksum(&teacher),
            id_readout: readouts.id_readout,
            ood_readout: readouts.ood_readout,
            student: report,
            weight_histogram: hist,
        });
    }
    let manifest = RunManifest {
        tool_version: crate::VERSION.into(),
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
        seeds: outcomes,
    };
    write_json(&manifest_path(cfg), &manifest)?;
    write_json(
        &cfg.output_dir.join("timing.json"),
        &serde_json::json!({ "wall_clock_seconds": started.elapsed().as_secs_f64() }),
    )?;
    Ok(manifest)
}
