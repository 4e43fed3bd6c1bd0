use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{harmonic_mean, MetricsReport};

/// The ablation suites: matching scores, weighting direction, simple
/// averaging, counterfactual-only distillation, hard vs soft weights,
/// ID-knowledge source, and the no-distillation ensemble sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationSuite {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
}

impl AblationSuite {
    pub const ALL: [AblationSuite; 7] = [
        AblationSuite::Q1,
        AblationSuite::Q2,
        AblationSuite::Q3,
        AblationSuite::Q4,
        AblationSuite::Q5,
        AblationSuite::Q6,
        AblationSuite::Q7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationSuite::Q1 => "q1",
            AblationSuite::Q2 => "q2",
            AblationSuite::Q3 => "q3",
            AblationSuite::Q4 => "q4",
            AblationSuite::Q5 => "q5",
            AblationSuite::Q6 => "q6",
            AblationSuite::Q7 => "q7",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            AblationSuite::Q1 => "matching scores: probability mass vs inverse cross-entropy",
            AblationSuite::Q2 => "weight direction: proportional-to-fit vs inverse-to-fit",
            AblationSuite::Q3 => "fixed even blend vs introspective blend",
            AblationSuite::Q4 => "counterfactual-only distillation vs introspective blend",
            AblationSuite::Q5 => "hard vs soft weight variant",
            AblationSuite::Q6 => "ID knowledge source: teacher prediction vs ground truth",
            AblationSuite::Q7 => "fixed-weight readout ensembles vs the distilled student",
        }
    }
}

impl std::str::FromStr for AblationSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationSuite::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ablation suite `{s}`")))
    }
}

/// Per-seed result attached to a table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub report: MetricsReport,
}

/// One table row: seed-mean accuracies with the harmonic mean recomputed
/// from those means, plus the per-seed detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub ood_accuracy: f64,
    pub id_accuracy: f64,
    pub hm: f64,
    pub per_seed: Vec<SeedMetrics>,
}

impl TableRow {
    pub fn from_seed_reports(label: impl Into<String>, per_seed: Vec<SeedMetrics>) -> Self {
        let n = per_seed.len().max(1) as f64;
        let id = per_seed.iter().map(|s| s.report.id_accuracy).sum::<f64>() / n;
        let ood = per_seed.iter().map(|s| s.report.ood_accuracy).sum::<f64>() / n;
        TableRow {
            label: label.into(),
            ood_accuracy: ood,
            id_accuracy: id,
            hm: harmonic_mean(id, ood),
            per_seed,
        }
    }
}

/// A complete emitted table with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub suite: String,
    pub description: String,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub rows: Vec<TableRow>,
}

fn seeds_field(seeds: &[u64]) -> String {
    seeds
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

/// Writes the diff-friendly CSV twin of a table. Row order is preserved;
/// every row repeats the seed list and config hash.
pub fn write_csv_table(table: &AblationTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("label,ood_accuracy,id_accuracy,hm,seeds,config_hash\n");
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.label,
            row.ood_accuracy,
            row.id_accuracy,
            row.hm,
            seeds_field(&table.seeds),
            table.config_hash
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: f64, ood: f64) -> MetricsReport {
        MetricsReport::from_accuracies(id, ood, vec![], 10, 10)
    }

    #[test]
    fn suite_parsing_round_trips() {
        for q in AblationSuite::ALL {
            assert_eq!(q.name().parse::<AblationSuite>().unwrap(), q);
        }
        assert!("q8".parse::<AblationSuite>().is_err());
    }

    #[test]
    fn row_hm_is_recomputable_from_its_columns() {
        let row = TableRow::from_seed_reports(
            "x",
            vec![
                SeedMetrics {
                    seed: 0,
                    report: report(0.6, 0.4),
                },
                SeedMetrics {
                    seed: 1,
                    report: report(0.8, 0.5),
                },
            ],
        );
        assert!((row.hm - harmonic_mean(row.id_accuracy, row.ood_accuracy)).abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_line_per_row_plus_header() {
        let table = AblationTable {
            suite: "q3".into(),
            description: "d".into(),
            seeds: vec![0, 1],
            config_hash: "beef".into(),
            rows: vec![
                TableRow::from_seed_reports("a", vec![]),
                TableRow::from_seed_reports("b", vec![]),
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv_table(&table, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a,"));
        assert!(lines[1].ends_with("0;1,beef"));
    }
}
