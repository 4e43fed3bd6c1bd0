//! Experiment runner: generate biased datasets, train the causal teacher,
//! distill the student, sweep ablations, and emit plot-ready tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use introd::data::{Preset, Split};
use introd::error::Error;
use introd::exp::{
    cmd_ablate, cmd_distill, cmd_gen, cmd_hist, cmd_run, cmd_train_teacher, AblationSuite,
    ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "introd", version, about = "Introspective distillation lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset preset override.
    #[arg(long)]
    preset: Option<String>,
    /// Run a single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Run seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate dataset files for every configured seed.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Restrict to one split (train, id_test, ood_test).
        #[arg(long)]
        split: Option<String>,
    },
    /// Train and checkpoint the causal teacher; report both readouts.
    TrainTeacher {
        #[command(flatten)]
        common: Common,
    },
    /// Distill the student from the checkpointed teacher.
    Distill {
        #[command(flatten)]
        common: Common,
    },
    /// Run one ablation suite (q1..q7) and emit its table.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        suite: String,
    },
    /// Emit the soft-weight histogram of the checkpointed teacher.
    Hist {
        #[command(flatten)]
        common: Common,
    },
    /// Full pipeline: gen, train-teacher, distill, evaluate, manifest.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn build_config(common: &Common) -> introd::Result<ExperimentConfig> {
    let preset = common
        .preset
        .as_deref()
        .map(str::parse::<Preset>)
        .transpose()?;
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default_for(preset.unwrap_or(Preset::AnswerPrior)),
    };
    if let Some(p) = preset {
        cfg.bias.preset = p;
    }
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(n) = common.seeds {
        if n == 0 {
            return Err(Error::InvalidConfig("--seeds must be positive".into()));
        }
        cfg.seeds = (0..n).collect();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) => 2,
        Error::MissingInput(_) => 3,
        Error::VersionMismatch { .. } | Error::IncompatibleArtifact(_) | Error::Format { .. } => 4,
        _ => 1,
    }
}

fn run(cli: Cli) -> introd::Result<()> {
    match cli.command {
        Command::Gen { common, split } => {
            let cfg = build_config(&common)?;
            let only = split.as_deref().map(str::parse::<Split>).transpose()?;
            let paths = cmd_gen(&cfg, only)?;
            let total: usize = paths
                .iter()
                .map(|p| introd::data::load_dataset(p).map(|d| d.len()).unwrap_or(0))
                .sum();
            println!("wrote {} dataset files ({total} samples)", paths.len());
            for p in paths {
                println!("  {}", p.display());
            }
        }
        Command::TrainTeacher { common } => {
            let cfg = build_config(&common)?;
            for (seed, r) in cmd_train_teacher(&cfg)? {
                println!(
                    "seed {seed}: id-readout id/ood/hm = {:.4}/{:.4}/{:.4}  ood-readout id/ood/hm = {:.4}/{:.4}/{:.4}",
                    r.id_readout.id_accuracy,
                    r.id_readout.ood_accuracy,
                    r.id_readout.hm,
                    r.ood_readout.id_accuracy,
                    r.ood_readout.ood_accuracy,
                    r.ood_readout.hm,
                );
            }
        }
        Command::Distill { common } => {
            let cfg = build_config(&common)?;
            for (seed, report) in cmd_distill(&cfg)? {
                println!(
                    "seed {seed}: student id/ood/hm = {:.4}/{:.4}/{:.4} (teacher checksum unchanged)",
                    report.id_accuracy, report.ood_accuracy, report.hm
                );
            }
        }
        Command::Ablate { common, suite } => {
            let cfg = build_config(&common)?;
            let suite: AblationSuite = suite.parse()?;
            let table = cmd_ablate(&cfg, suite)?;
            println!("suite {} ({})", table.suite, table.description);
            for row in &table.rows {
                println!(
                    "  {:<16} ood={:.4} id={:.4} hm={:.4}",
                    row.label, row.ood_accuracy, row.id_accuracy, row.hm
                );
            }
        }
        Command::Hist { common } => {
            let cfg = build_config(&common)?;
            for (seed, h) in cmd_hist(&cfg)? {
                let below = h.fraction_below(0.05).unwrap_or(0.0);
                let above = h.fraction_above(0.6).unwrap_or(0.0);
                println!(
                    "seed {seed}: {} samples, frac(w_id<0.05)={below:.4}, frac(w_id>0.6)={above:.4}",
                    h.n_samples
                );
            }
        }
        Command::Run { common } => {
            let cfg = build_config(&common)?;
            let manifest = cmd_run(&cfg)?;
            println!(
                "run complete: {} seeds, config {}",
                manifest.seeds.len(),
                &manifest.config_hash[..12]
            );
            for s in &manifest.seeds {
                println!(
                    "  seed {}: teacher id/ood readout hm = {:.4}/{:.4}, student hm = {:.4}",
                    s.seed, s.id_readout.hm, s.ood_readout.hm, s.student.hm
                );
            }
            println!("manifest: {}", introd::exp::manifest_path(&cfg).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
