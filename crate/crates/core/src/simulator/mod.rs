//! Synthetic world for end-to-end validation scenarios.
//!
//! Generates a worker population with stochastic response behavior, a
//! crowd-sensed dataset with configurable shape (competing peaks, a
//! hidden truth, broadband noise), and runs the full pipeline — profile,
//! campaign, reshape, incentives — once per sampling strategy on the same
//! world. Everything is driven by a single master seed.

mod behavior;
mod dataset;
mod report;

pub use behavior::{
    generate_population, simulate_response, ModelResponder, Population, WorkerBehavior,
};
pub use dataset::generate_dataset;
pub use report::{write_report, FalsePeakSummary, StrategySummary, Summary};

use std::collections::BTreeMap;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::incentives::{
    revise_payments, update_rater_reputations, Contribution, IncentiveReport, LinearPayment,
};
use crate::pacap::{run_campaign, CampaignConfig, CycleStats, Rating};
use crate::profiling::{build_profile_indexed, Profile};
use crate::reshaping::{reshape, tally_ratings, BinTally, RatingScale, ReshapedProfile};
use crate::sampling::SamplingStrategy;
use crate::{Error, Result};

/// All campaign randomness flows from explicitly seeded streams.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Obscure truth (competing peaks) or hidden truth (minority bin).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioCase {
    A,
    B,
}

impl std::fmt::Display for ScenarioCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioCase::A => f.write_str("A"),
            ScenarioCase::B => f.write_str("B"),
        }
    }
}

/// One concentrated component of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    /// Lower edge of the component; values land in `[center, center + span]`.
    pub center: f64,
    /// Fraction of all readings carried by this component.
    pub mass: f64,
    /// Width of the value band, small enough to stay inside one bin.
    #[serde(default = "default_span")]
    pub span: f64,
}

fn default_span() -> f64 {
    0.45
}

/// Dataset shape: peaks, optional hidden truth, and noise placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub range_lo: f64,
    pub range_hi: f64,
    pub peaks: Vec<PeakSpec>,
    /// Minority component carrying the hidden truth (Case B).
    #[serde(default)]
    pub hidden: Option<PeakSpec>,
    /// Intervals tiled into bins that evenly share the leftover noise mass.
    pub noise_regions: Vec<[f64; 2]>,
}

/// Stochastic worker-response model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    /// Spread of each worker's private truth estimate around the real truth.
    pub truth_sd: f64,
    /// Rating threshold mean, as a fraction of the worker's estimate.
    pub threshold_mean_factor: f64,
    /// Rating threshold spread, as a fraction of the worker's estimate.
    pub threshold_sd_factor: f64,
    /// Mean response delay, in campaign clock units (minutes).
    pub delay_mean: f64,
    /// Among non-accepting workers, the share that declines explicitly
    /// (a neutral rating) rather than ignoring the offer.
    pub neutral_share: f64,
    /// Workers signed up uniformly over this window before the campaign.
    pub signup_horizon: f64,
    /// Chance a responding worker attaches each privacy action.
    pub privacy_more_prob: f64,
    pub privacy_less_prob: f64,
    pub privacy_stop_prob: f64,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        Self {
            truth_sd: 5.0,
            threshold_mean_factor: 0.1,
            threshold_sd_factor: 0.1,
            delay_mean: 15.0,
            neutral_share: 0.5,
            signup_horizon: 10_080.0,
            privacy_more_prob: 0.0,
            privacy_less_prob: 0.0,
            privacy_stop_prob: 0.0,
        }
    }
}

/// Full description of one synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Registered workers, including the contributors.
    pub population: u64,
    /// Contributors; each supplies exactly one reading.
    pub contributors: u64,
    #[serde(rename = "case")]
    pub case: ScenarioCase,
    /// The real truth the behavior model centers on.
    pub truth: f64,
    pub bin_width: f64,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub behavior: BehaviorParams,
    pub config: CampaignConfig,
    #[serde(default)]
    pub budget_mode: bool,
}

impl ScenarioSpec {
    /// Obscure-truth scenario: the 45 mph mode is real, the 72 mph mode
    /// competes, and chunky noise blocks fill the rest of the range.
    pub fn case_a(seed: u64) -> Self {
        Self {
            population: 50_000,
            contributors: 1_000,
            case: ScenarioCase::A,
            truth: 45.0,
            bin_width: 5.0,
            dataset: DatasetSpec {
                range_lo: 10.0,
                range_hi: 95.0,
                peaks: vec![
                    PeakSpec {
                        center: 45.0,
                        mass: 0.115,
                        span: default_span(),
                    },
                    PeakSpec {
                        center: 72.0,
                        mass: 0.15,
                        span: default_span(),
                    },
                ],
                hidden: None,
                noise_regions: vec![[10.0, 30.0], [60.0, 65.0], [80.0, 95.0]],
            },
            behavior: BehaviorParams::default(),
            config: default_campaign(SamplingStrategy::Proportional, seed),
            budget_mode: false,
        }
    }

    /// Hidden-truth scenario: both modes are false and the real truth at
    /// 20 mph is carried by a 3% minority of the readings.
    pub fn case_b(seed: u64) -> Self {
        Self {
            population: 50_000,
            contributors: 1_000,
            case: ScenarioCase::B,
            truth: 20.0,
            bin_width: 5.0,
            dataset: DatasetSpec {
                range_lo: 10.0,
                range_hi: 95.0,
                peaks: vec![
                    PeakSpec {
                        center: 45.0,
                        mass: 0.14,
                        span: default_span(),
                    },
                    PeakSpec {
                        center: 72.0,
                        mass: 0.13,
                        span: default_span(),
                    },
                ],
                hidden: Some(PeakSpec {
                    center: 20.0,
                    mass: 0.03,
                    span: default_span(),
                }),
                noise_regions: vec![[25.0, 45.0], [55.0, 65.0]],
            },
            behavior: BehaviorParams::default(),
            config: default_campaign(SamplingStrategy::Reverse, seed),
            budget_mode: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.contributors == 0 || self.contributors >= self.population {
            return Err(Error::InvalidScenario(format!(
                "need 0 < contributors < population, got {} of {}",
                self.contributors, self.population
            )));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::InvalidBinWidth(self.bin_width));
        }
        let ds = &self.dataset;
        if ds.range_hi <= ds.range_lo {
            return Err(Error::InvalidScenario("empty value range".into()));
        }
        let mut mass = 0.0;
        for peak in ds.peaks.iter().chain(ds.hidden.iter()) {
            if peak.mass < 0.0 || peak.span <= 0.0 {
                return Err(Error::InvalidScenario(
                    "component masses must be nonnegative and spans positive".into(),
                ));
            }
            if peak.center < ds.range_lo || peak.center + peak.span > ds.range_hi {
                return Err(Error::InvalidScenario(format!(
                    "component at {} leaves the value range",
                    peak.center
                )));
            }
            mass += peak.mass;
        }
        if mass > 1.0 + 1e-12 {
            return Err(Error::InvalidScenario(format!(
                "component masses sum to {mass} > 1"
            )));
        }
        let noise_mass = 1.0 - mass;
        if noise_mass > 1e-12 && dataset::noise_tiles(ds, self.bin_width)?.is_empty() {
            return Err(Error::InvalidScenario(
                "leftover noise mass but no noise regions".into(),
            ));
        }
        dataset::check_alignment(ds, self.bin_width)?;
        if self.behavior.delay_mean <= 0.0 {
            return Err(Error::InvalidScenario("delay mean must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.behavior.neutral_share) {
            return Err(Error::InvalidScenario(
                "neutral share must lie in [0,1]".into(),
            ));
        }
        if self.config.target > 0 {
            self.config.validate()?;
        }
        Ok(())
    }

    /// False-peak values: dataset peaks that do not carry the truth.
    pub fn false_peaks(&self) -> Vec<f64> {
        self.dataset
            .peaks
            .iter()
            .map(|p| p.center)
            .filter(|&c| (c - self.truth).abs() > self.bin_width / 2.0)
            .collect()
    }
}

fn default_campaign(strategy: SamplingStrategy, seed: u64) -> CampaignConfig {
    CampaignConfig {
        target: 1_000,
        shortfall_tolerance: 0.1,
        deadline: 60.0,
        cycle_length: 10.0,
        strategy,
        rating_scale: RatingScale::three_level(),
        eta: 1.0,
        seed,
        task_description:
            "Is the following value representative of the average traffic speed observed today?"
                .to_string(),
    }
}

/// Outcome of one strategy's campaign over the shared world.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub strategy: SamplingStrategy,
    pub success: bool,
    pub effective: u64,
    pub stats: Vec<CycleStats>,
    pub ratings: Vec<Rating>,
    pub reshaped: ReshapedProfile,
    pub ratio_at_truth: f64,
    /// (false peak value, posterior/interim ratio at its bin)
    pub false_peak_ratios: Vec<(f64, f64)>,
}

/// Everything a scenario run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub case: ScenarioCase,
    pub truth: f64,
    pub seed: u64,
    pub bin_width: f64,
    pub primary_strategy: SamplingStrategy,
    pub profile: Profile,
    pub outcomes: Vec<StrategyOutcome>,
    pub incentives: IncentiveReport,
}

impl ScenarioReport {
    pub fn outcome(&self, strategy: SamplingStrategy) -> &StrategyOutcome {
        self.outcomes
            .iter()
            .find(|o| o.strategy == strategy)
            .expect("every strategy runs")
    }

    pub fn primary(&self) -> &StrategyOutcome {
        self.outcome(self.primary_strategy)
    }
}

/// Run the full pipeline once per sampling strategy on one shared world.
///
/// The dataset, profile, and population are generated once; each strategy
/// then runs its own campaign against a fresh copy of the registry.
/// Incentives (rater reputations, contributor payments) are computed for
/// the spec's configured strategy.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    spec.validate()?;

    let mut master = seeded_rng(spec.config.seed);
    let dataset_seed = master.next_u64();
    let population_seed = master.next_u64();
    let campaign_seeds: Vec<u64> = SamplingStrategy::ALL
        .iter()
        .map(|_| master.next_u64())
        .collect();

    let readings = generate_dataset(spec, &mut seeded_rng(dataset_seed))?;
    let (profile, contributor_bins) = build_profile_indexed(&readings, spec.bin_width)?;
    let population = generate_population(spec, &mut seeded_rng(population_seed));

    let mut outcomes = Vec::with_capacity(SamplingStrategy::ALL.len());
    let mut incentives = IncentiveReport::default();

    for (strategy, campaign_seed) in SamplingStrategy::ALL.into_iter().zip(campaign_seeds) {
        let mut registry = population.registry.clone();
        let (success, stats, ratings) = if spec.config.target == 0 {
            // No validation requested; the interim belief stands.
            (true, Vec::new(), Vec::new())
        } else {
            let mut config = spec.config.clone();
            config.strategy = strategy;
            config.seed = campaign_seed;
            let mut responder = ModelResponder::new(&population, &spec.behavior);
            match run_campaign(&config, &mut registry, &profile, &mut responder, 0.0)? {
                crate::pacap::CampaignOutcome::Success { ratings, stats } => {
                    (true, stats, ratings)
                }
                crate::pacap::CampaignOutcome::Fail { stats } => (false, stats, Vec::new()),
            }
        };

        let tally = if ratings.is_empty() {
            BinTally::zeros(profile.len())
        } else {
            tally_ratings(&ratings, &spec.config.rating_scale, profile.len())?
        };
        let reshaped = reshape(&profile, &tally, ratings.len() as u64, spec.config.eta)?;

        let ratio_at_truth = reshaped.ratio_at(spec.truth).unwrap_or(1.0);
        let false_peak_ratios = spec
            .false_peaks()
            .into_iter()
            .map(|v| (v, reshaped.ratio_at(v).unwrap_or(1.0)))
            .collect();

        if strategy == spec.config.strategy {
            let max_score = spec.config.rating_scale.max_score();
            let raters = update_rater_reputations(&ratings, &reshaped, &mut registry, max_score)?;
            let contributions: BTreeMap<String, Contribution> = contributor_bins
                .iter()
                .map(|(id, &bin)| (id.clone(), Contribution { quality: 1.0, bin }))
                .collect();
            let contributors =
                revise_payments(&LinearPayment, &contributions, &reshaped, spec.budget_mode)?;
            incentives = IncentiveReport {
                raters,
                contributors,
            };
        }

        outcomes.push(StrategyOutcome {
            strategy,
            success,
            effective: ratings.len() as u64,
            stats,
            ratings,
            reshaped,
            ratio_at_truth,
            false_peak_ratios,
        });
    }

    Ok(ScenarioReport {
        case: spec.case,
        truth: spec.truth,
        seed: spec.config.seed,
        bin_width: spec.bin_width,
        primary_strategy: spec.config.strategy,
        profile,
        outcomes,
        incentives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_specs_validate() {
        ScenarioSpec::case_a(1).validate().unwrap();
        ScenarioSpec::case_b(1).validate().unwrap();
    }

    #[test]
    fn false_peaks_exclude_the_truth() {
        let a = ScenarioSpec::case_a(1);
        assert_eq!(a.false_peaks(), vec![72.0]);
        let b = ScenarioSpec::case_b(1);
        assert_eq!(b.false_peaks(), vec![45.0, 72.0]);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ScenarioSpec::case_b(42);
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn zero_target_keeps_interim_belief() {
        let mut spec = ScenarioSpec::case_b(5);
        spec.population = 2_000;
        spec.contributors = 200;
        spec.config.target = 0;
        let report = run_scenario(&spec).unwrap();
        for outcome in &report.outcomes {
            assert!(outcome.success);
            assert_eq!(outcome.effective, 0);
            for bin in &outcome.reshaped.bins {
                assert_eq!(bin.p_posterior, bin.p_interim);
            }
        }
    }

    #[test]
    fn scenario_is_deterministic_per_seed() {
        let mut spec = ScenarioSpec::case_a(9);
        spec.population = 3_000;
        spec.contributors = 300;
        spec.config.target = 120;
        let a = run_scenario(&spec).unwrap();
        let b = run_scenario(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn small_scenario_runs_end_to_end() {
        let mut spec = ScenarioSpec::case_b(3);
        spec.population = 4_000;
        spec.contributors = 400;
        spec.config.target = 200;
        let report = run_scenario(&spec).unwrap();
        assert_eq!(report.outcomes.len(), 4);
        let primary = report.primary();
        assert!(primary.success);
        assert!(primary.effective >= 180);
        // Incentives cover the primary strategy's raters and all contributors.
        assert_eq!(report.incentives.raters.len(), primary.ratings.len());
        assert_eq!(report.incentives.contributors.len(), 400);
    }
}
