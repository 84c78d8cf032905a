//! Scenario report emission: a directory of CSVs plus `summary.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioReport;
use crate::incentives::{write_contributor_payments_csv, write_rater_updates_csv};
use crate::pacap::{write_cycle_stats_csv, write_ratings_csv};
use crate::profiling::write_profile_csv;
use crate::reshaping::write_reshaped_csv;
use crate::Result;

/// Headline numbers for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub success: bool,
    pub effective: u64,
    pub offers: u64,
    pub cycles: u32,
    pub posterior_ratio_at_truth: f64,
    pub false_peaks: Vec<FalsePeakSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsePeakSummary {
    pub value: f64,
    pub ratio: f64,
}

/// Top-level `summary.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub case: String,
    pub truth: f64,
    pub seed: u64,
    pub bin_width: f64,
    pub primary_strategy: String,
    /// Primary strategy's posterior/interim ratio at the truth bin.
    pub posterior_ratio_at_truth: f64,
    pub strategies: BTreeMap<String, StrategySummary>,
}

impl Summary {
    pub fn from_report(report: &ScenarioReport) -> Self {
        let strategies = report
            .outcomes
            .iter()
            .map(|o| {
                (
                    o.strategy.name().to_string(),
                    StrategySummary {
                        success: o.success,
                        effective: o.effective,
                        offers: o.stats.iter().map(|s| s.offers).sum(),
                        cycles: o.stats.len() as u32,
                        posterior_ratio_at_truth: o.ratio_at_truth,
                        false_peaks: o
                            .false_peak_ratios
                            .iter()
                            .map(|&(value, ratio)| FalsePeakSummary { value, ratio })
                            .collect(),
                    },
                )
            })
            .collect();
        Summary {
            case: report.case.to_string(),
            truth: report.truth,
            seed: report.seed,
            bin_width: report.bin_width,
            primary_strategy: report.primary_strategy.name().to_string(),
            posterior_ratio_at_truth: report.primary().ratio_at_truth,
            strategies,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Write the full report directory: interim profile, per-strategy cycle
/// stats, ratings, and reshaped profiles, the primary strategy's
/// incentives, and the summary.
pub fn write_report(report: &ScenarioReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    write_json(&dir.join("profile.json"), &report.profile)?;
    write_profile_csv(
        &report.profile,
        BufWriter::new(File::create(dir.join("profile.csv"))?),
    )?;

    for outcome in &report.outcomes {
        let name = outcome.strategy.name();
        write_cycle_stats_csv(
            &outcome.stats,
            BufWriter::new(File::create(dir.join(format!("cycles_{name}.csv")))?),
        )?;
        write_ratings_csv(
            &outcome.ratings,
            BufWriter::new(File::create(dir.join(format!("ratings_{name}.csv")))?),
        )?;
        write_reshaped_csv(
            &outcome.reshaped,
            BufWriter::new(File::create(dir.join(format!("reshaped_{name}.csv")))?),
        )?;
        write_json(&dir.join(format!("reshaped_{name}.json")), &outcome.reshaped)?;
    }

    write_rater_updates_csv(
        &report.incentives.raters,
        BufWriter::new(File::create(dir.join("incentives_raters.csv"))?),
    )?;
    write_contributor_payments_csv(
        &report.incentives.contributors,
        BufWriter::new(File::create(dir.join("incentives_contributors.csv"))?),
    )?;

    write_json(&dir.join("summary.json"), &Summary::from_report(report))?;
    Ok(())
}
