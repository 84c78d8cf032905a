//! Command-line surface for batch use: profile a readings file, run
//! scenarios, reshape profiles against rating files, compute incentives,
//! and tabulate per-strategy comparisons from a report directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::incentives::{
    revise_payments, reputation_update, Contribution, LinearPayment, RaterUpdate,
    write_contributor_payments_csv, write_rater_updates_csv,
};
use crate::pacap::read_ratings_csv;
use crate::profiling::{build_profile, read_readings_file, write_profile_csv, Profile};
use crate::reshaping::{reshape, tally_ratings, BinTally, RatingScale, ReshapedProfile};
use crate::sampling::SamplingStrategy;
use crate::simulator::{run_scenario, write_report, ScenarioSpec};
use crate::{Error, Result};

/// Exit code for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code when a simulated campaign misses its quota.
pub const EXIT_CAMPAIGN_FAIL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "crowdval",
    about = "Cross-validate crowd-sensed data with a validating crowd",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a profile (representatives + interim beliefs) from readings CSV.
    Profile {
        /// Readings CSV with header contributor_id,value.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        bin_width: f64,
        /// Profile JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV rendering of the same profile.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run an end-to-end scenario and write a report directory.
    Simulate {
        /// Scenario spec JSON; alternative to --case.
        #[arg(long, conflicts_with = "case")]
        spec: Option<PathBuf>,
        /// Built-in scenario: A (obscure truth) or B (hidden truth).
        #[arg(long)]
        case: Option<String>,
        /// Campaign seed; required unless the spec file carries one.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's primary sampling strategy.
        #[arg(long)]
        strategy: Option<String>,
        /// Override the rating rescaling factor.
        #[arg(long)]
        eta: Option<f64>,
        /// Renormalize revised payments to the original budget.
        #[arg(long)]
        budget_mode: bool,
    },
    /// Reshape a profile with a ratings file.
    Reshape {
        /// Profile JSON.
        #[arg(long = "in")]
        input: PathBuf,
        /// Ratings CSV with header rater_id,value_index,score,received_time.
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Top score of the rating scale (1 for a 3-level scale).
        #[arg(long, default_value_t = 1)]
        max_score: i32,
        /// Reshaped CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON rendering of the reshaped profile.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compute incentive reports from a reshaped profile.
    Incentives {
        /// Reshaped profile JSON (from reshape or a report directory).
        #[arg(long = "in")]
        input: PathBuf,
        /// Ratings CSV; drives rater reputation updates.
        #[arg(long)]
        ratings: PathBuf,
        /// Contributions CSV with header contributor_id,quality,value_index.
        #[arg(long)]
        contributions: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        max_score: i32,
        #[arg(long)]
        budget_mode: bool,
        /// Output directory for the incentive CSVs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate per-strategy posteriors from a report directory.
    Report {
        /// Report directory written by simulate.
        #[arg(long = "in")]
        input: PathBuf,
        /// Comparison CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Run the CLI; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            EXIT_CONFIG
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Profile {
            input,
            bin_width,
            out,
            csv,
        } => {
            let readings = read_readings_file(&check_exists(input)?)?;
            let profile = build_profile(&readings, bin_width)?;
            write_json(&out, &profile)?;
            if let Some(path) = csv {
                write_profile_csv(&profile, BufWriter::new(File::create(path)?))?;
            }
            Ok(0)
        }
        Command::Simulate {
            spec,
            case,
            seed,
            out,
            strategy,
            eta,
            budget_mode,
        } => run_simulate(spec, case, seed, out, strategy, eta, budget_mode),
        Command::Reshape {
            input,
            ratings,
            eta,
            max_score,
            out,
            json,
        } => {
            let profile: Profile = read_json(&check_exists(input)?)?;
            profile.validate()?;
            let ratings = read_ratings_csv(BufReader::new(File::open(check_exists(ratings)?)?))?;
            let scale = scale_for_max_score(max_score)?;
            let tally = if ratings.is_empty() {
                BinTally::zeros(profile.len())
            } else {
                tally_ratings(&ratings, &scale, profile.len())?
            };
            let reshaped = reshape(&profile, &tally, ratings.len() as u64, eta)?;
            crate::reshaping::write_reshaped_csv(&reshaped, BufWriter::new(File::create(out)?))?;
            if let Some(path) = json {
                write_json(&path, &reshaped)?;
            }
            Ok(0)
        }
        Command::Incentives {
            input,
            ratings,
            contributions,
            max_score,
            budget_mode,
            out,
        } => {
            let reshaped: ReshapedProfile = read_json(&check_exists(input)?)?;
            let ratings = read_ratings_csv(BufReader::new(File::open(check_exists(ratings)?)?))?;

            // Rater updates from scratch reputations; campaign-time
            // reputations live in the registry, which batch mode has no
            // access to.
            let mut raters = Vec::with_capacity(ratings.len());
            for rating in &ratings {
                let bin = reshaped.bins.get(rating.value_index).ok_or(
                    Error::RatingIndexOutOfRange {
                        index: rating.value_index,
                        bins: reshaped.len(),
                    },
                )?;
                let (delta, after) =
                    reputation_update(0.0, bin.p_interim, bin.p_posterior, rating.score, max_score)?;
                raters.push(RaterUpdate {
                    rater_id: rating.rater_id.clone(),
                    before: 0.0,
                    delta,
                    after,
                });
            }

            let contributions = match contributions {
                Some(path) => read_contributions_csv(&check_exists(path)?)?,
                None => BTreeMap::new(),
            };
            let payments =
                revise_payments(&LinearPayment, &contributions, &reshaped, budget_mode)?;

            std::fs::create_dir_all(&out)?;
            write_rater_updates_csv(
                &raters,
                BufWriter::new(File::create(out.join("incentives_raters.csv"))?),
            )?;
            write_contributor_payments_csv(
                &payments,
                BufWriter::new(File::create(out.join("incentives_contributors.csv"))?),
            )?;
            Ok(0)
        }
        Command::Report { input, out } => {
            let dir = check_exists(input)?;
            write_comparison_csv(&dir, &out)?;
            Ok(0)
        }
    }
}

fn run_simulate(
    spec: Option<PathBuf>,
    case: Option<String>,
    seed: Option<u64>,
    out: PathBuf,
    strategy: Option<String>,
    eta: Option<f64>,
    budget_mode: bool,
) -> Result<i32> {
    let mut scenario = match (spec, case) {
        (Some(path), None) => {
            let spec: ScenarioSpec = read_json(&check_exists(path)?)?;
            spec
        }
        (None, Some(case)) => match case.to_ascii_uppercase().as_str() {
            "A" => ScenarioSpec::case_a(seed.unwrap_or(0)),
            "B" => ScenarioSpec::case_b(seed.unwrap_or(0)),
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown case {other:?} (expected A or B)"
                )))
            }
        },
        _ => {
            return Err(Error::InvalidConfig(
                "simulate needs exactly one of --spec or --case".into(),
            ))
        }
    };

    // No silent nondeterminism: a seed must come from the flag or the spec.
    match seed {
        Some(s) => scenario.config.seed = s,
        None => {
            return Err(Error::InvalidConfig(
                "--seed is required for simulate".into(),
            ))
        }
    }
    if let Some(name) = strategy {
        scenario.config.strategy = name.parse::<SamplingStrategy>()?;
    }
    if let Some(eta) = eta {
        scenario.config.eta = eta;
    }
    if budget_mode {
        scenario.budget_mode = true;
    }

    let report = run_scenario(&scenario)?;
    write_report(&report, &out)?;
    if report.primary().success {
        Ok(0)
    } else {
        eprintln!(
            "campaign FAIL: {} effective ratings of {} required",
            report.primary().effective,
            scenario.config.target
        );
        Ok(EXIT_CAMPAIGN_FAIL)
    }
}

fn scale_for_max_score(max_score: i32) -> Result<RatingScale> {
    match max_score {
        1 => Ok(RatingScale::three_level()),
        2 => Ok(RatingScale::five_level()),
        other => {
            let scores: Vec<i32> = (-other..=other).collect();
            let labels = scores.iter().map(|s| format!("score {s}")).collect();
            let scale = RatingScale {
                scores,
                labels,
            };
            scale.validate()?;
            Ok(scale)
        }
    }
}

fn read_contributions_csv(path: &Path) -> Result<BTreeMap<String, Contribution>> {
    #[derive(serde::Deserialize)]
    struct Row {
        contributor_id: String,
        quality: f64,
        value_index: usize,
    }
    let mut reader = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut contributions = BTreeMap::new();
    for record in reader.deserialize() {
        let row: Row = record?;
        contributions.insert(
            row.contributor_id,
            Contribution {
                quality: row.quality,
                bin: row.value_index,
            },
        );
    }
    Ok(contributions)
}

/// Per-bin posterior comparison across the four strategies, in the layout
/// a plotting script can consume directly.
fn write_comparison_csv(report_dir: &Path, out: &Path) -> Result<()> {
    let mut posteriors: Vec<(SamplingStrategy, ReshapedProfile)> = Vec::new();
    for strategy in SamplingStrategy::ALL {
        let path = report_dir.join(format!("reshaped_{}.json", strategy.name()));
        let reshaped: ReshapedProfile = read_json(&check_exists(path)?)?;
        posteriors.push((strategy, reshaped));
    }
    let base = &posteriors[0].1;
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(
        w,
        "v,p_interim,p_random,p_proportional,p_reverse,p_inverse"
    )?;
    for (i, bin) in base.bins.iter().enumerate() {
        write!(w, "{},{}", bin.representative, bin.p_interim)?;
        for (_, reshaped) in &posteriors {
            write!(w, ",{}", reshaped.bins[i].p_posterior)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn check_exists(path: PathBuf) -> Result<PathBuf> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no such file or directory: {}", path.display()),
        )));
    }
    Ok(path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        Error::InvalidConfig(format!(
            "{}: malformed JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}
