//! Progressive push campaign engine.
//!
//! The campaign divides its deadline into cycles. Each cycle selects a
//! fresh group of raters, pushes one rating task to each, then collects
//! the responses that arrive during the cycle. The outreach size for the
//! next cycle is re-estimated from the yield observed so far. The campaign
//! succeeds as soon as the effective-rating target is met, or at the
//! deadline if the shortfall stays within tolerance.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::profiling::Profile;
use crate::registry::{PrivacyAction, Registry};
use crate::reshaping::RatingScale;
use crate::sampling::{SamplingStrategy, ValueSampler};
use crate::{Error, Result};

/// Campaign parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    /// Desired number of effective ratings.
    pub target: u64,
    /// Fraction of the target that may go uncollected before FAIL.
    pub shortfall_tolerance: f64,
    /// Campaign deadline, in clock units from the start.
    pub deadline: f64,
    /// Cycle length; the deadline must be a whole number of cycles.
    pub cycle_length: f64,
    pub strategy: SamplingStrategy,
    pub rating_scale: RatingScale,
    /// Weight of a full-score rating against a sensing contribution.
    pub eta: f64,
    pub seed: u64,
    /// Task description template shown to raters.
    #[serde(default = "default_task_description")]
    pub task_description: String,
}

fn default_task_description() -> String {
    "Is the following value representative of the sensed quantity?".to_string()
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shortfall_tolerance <= 0.0 || self.shortfall_tolerance >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "shortfall tolerance must lie in (0,1), got {}",
                self.shortfall_tolerance
            )));
        }
        if !(self.cycle_length > 0.0) || self.cycle_length > self.deadline {
            return Err(Error::InvalidConfig(format!(
                "cycle length {} must be positive and at most the deadline {}",
                self.cycle_length, self.deadline
            )));
        }
        let cycles = self.deadline / self.cycle_length;
        if (cycles - cycles.round()).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "deadline {} is not a whole number of cycles of length {}",
                self.deadline, self.cycle_length
            )));
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "eta must be nonnegative, got {}",
                self.eta
            )));
        }
        self.rating_scale.validate()?;
        Ok(())
    }

    pub fn cycles(&self) -> u32 {
        (self.deadline / self.cycle_length).round() as u32
    }
}

/// An offer pushed to a single rater: one representative value plus the
/// rating options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingTask {
    pub task_id: u64,
    pub value: f64,
    pub value_index: usize,
    pub description: String,
    /// Rating options as (label, score) pairs; always includes a neutral
    /// score-0 entry so a rater can decline without penalty.
    pub options: Vec<(String, i32)>,
    pub rater_id: String,
}

/// An effective (nonzero-score) rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub rater_id: String,
    pub value_index: usize,
    pub score: i32,
    pub received_time: f64,
}

/// Per-cycle bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStats {
    pub cycle: u32,
    /// Offers sent out this cycle.
    pub offers: u64,
    /// Effective ratings collected this cycle.
    pub effective: u64,
    /// Neutral ratings (including declines) collected this cycle.
    pub neutral: u64,
    pub cum_effective: u64,
    pub cum_neutral: u64,
}

/// Campaign result: the rating set on success, stats either way.
#[derive(Debug, Clone, PartialEq)]
pub enum CampaignOutcome {
    Success {
        ratings: Vec<Rating>,
        stats: Vec<CycleStats>,
    },
    Fail {
        stats: Vec<CycleStats>,
    },
}

impl CampaignOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, CampaignOutcome::Success { .. })
    }

    pub fn stats(&self) -> &[CycleStats] {
        match self {
            CampaignOutcome::Success { stats, .. } => stats,
            CampaignOutcome::Fail { stats } => stats,
        }
    }

    pub fn ratings(&self) -> &[Rating] {
        match self {
            CampaignOutcome::Success { ratings, .. } => ratings,
            CampaignOutcome::Fail { .. } => &[],
        }
    }
}

/// What a rater does with an offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponderOutcome {
    /// Nonzero-score rating arriving at the given time.
    Effective {
        score: i32,
        arrival: f64,
        privacy_action: Option<PrivacyAction>,
    },
    /// Explicit neutral rating (a sanctioned decline) arriving at the
    /// given time.
    Neutral {
        arrival: f64,
        privacy_action: Option<PrivacyAction>,
    },
    /// The offer is ignored; nothing ever arrives.
    Silent,
}

/// Source of rating responses; the simulator provides the stochastic
/// worker model, tests provide canned behaviors.
pub trait RatingSource {
    fn respond(
        &mut self,
        task: &RatingTask,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ResponderOutcome>;
}

impl<F> RatingSource for F
where
    F: FnMut(&RatingTask, f64, &mut dyn RngCore) -> Result<ResponderOutcome>,
{
    fn respond(
        &mut self,
        task: &RatingTask,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ResponderOutcome> {
        self(task, now, rng)
    }
}

/// Outreach size for the next cycle.
///
/// With effective ratings in hand, the per-offer yield so far is
/// `cum_effective / (cum_effective + cum_neutral)`; dividing the remaining
/// target by it gives `ceil((target - cum_effective) * (1 + cum_neutral /
/// cum_effective))`, capped by the pool. Before any effective rating
/// arrives the yield is unknown, so the previous outreach is doubled.
pub fn next_outreach(
    target: u64,
    cum_effective: u64,
    cum_neutral: u64,
    pool_size: u64,
    prev_outreach: u64,
) -> u64 {
    if pool_size == 0 {
        return 0;
    }
    if cum_effective == 0 {
        return pool_size.min(prev_outreach.saturating_mul(2));
    }
    let remaining = target.saturating_sub(cum_effective);
    // ceil(remaining * (cum_effective + cum_neutral) / cum_effective),
    // exact in integers.
    let numerator = (remaining as u128) * ((cum_effective + cum_neutral) as u128);
    let denominator = cum_effective as u128;
    let exact = ((numerator + denominator - 1) / denominator) as u64;
    exact.min(pool_size)
}

/// One scheduled response waiting to arrive.
#[derive(Debug, Clone, PartialEq)]
struct PendingArrival {
    arrival: f64,
    task_id: u64,
    rater_index: usize,
    rater_id: String,
    value_index: usize,
    score: i32,
    privacy_action: Option<PrivacyAction>,
}

impl Eq for PendingArrival {}

impl Ord for PendingArrival {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.arrival
            .total_cmp(&other.arrival)
            .then_with(|| self.task_id.cmp(&other.task_id))
    }
}

impl PartialOrd for PendingArrival {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Run one progressive push campaign against the registry.
///
/// The eligible pool starts as all non-contributor, non-opted-out workers
/// and shrinks as offers go out: no worker is ever offered twice within a
/// campaign. Responses arriving after their dispatch cycle are collected
/// in the cycle of their arrival; anything after the deadline is ignored.
pub fn run_campaign(
    config: &CampaignConfig,
    registry: &mut Registry,
    profile: &Profile,
    responder: &mut dyn RatingSource,
    start_time: f64,
) -> Result<CampaignOutcome> {
    config.validate()?;
    if profile.is_empty() {
        return Err(Error::EmptyProfile);
    }

    let mut rng = crate::simulator::seeded_rng(config.seed);
    let sampler = ValueSampler::new(profile, config.strategy)?;
    let options: Vec<(String, i32)> = config
        .rating_scale
        .labels
        .iter()
        .cloned()
        .zip(config.rating_scale.scores.iter().copied())
        .collect();

    let mut pool = registry.eligible_pool();
    let mut pending: BinaryHeap<Reverse<PendingArrival>> = BinaryHeap::new();
    let mut ratings: Vec<Rating> = Vec::new();
    let mut stats: Vec<CycleStats> = Vec::new();
    let mut cum_effective = 0u64;
    let mut cum_neutral = 0u64;
    let mut outreach = config.target;
    let mut next_task_id = 0u64;

    for cycle in 1..=config.cycles() {
        let dispatch_time = start_time + (cycle - 1) as f64 * config.cycle_length;
        let window_end = start_time + cycle as f64 * config.cycle_length;

        // Select this cycle's raters and push one task to each.
        let selected = registry.select_raters(&pool, dispatch_time, outreach as usize, &mut rng)?;
        let offers = selected.len() as u64;
        if !selected.is_empty() {
            let chosen: std::collections::HashSet<usize> = selected.iter().copied().collect();
            pool.retain(|idx| !chosen.contains(idx));
        }
        for rater_index in selected {
            let value_index = sampler.draw(&mut rng);
            let task = RatingTask {
                task_id: next_task_id,
                value: profile.bins[value_index].representative,
                value_index,
                description: config.task_description.clone(),
                options: options.clone(),
                rater_id: registry.worker(rater_index).id.clone(),
            };
            next_task_id += 1;
            // A responder failure means the offer goes unanswered.
            let outcome = responder
                .respond(&task, dispatch_time, &mut rng)
                .unwrap_or(ResponderOutcome::Silent);
            let (arrival, score, privacy_action) = match outcome {
                ResponderOutcome::Effective {
                    score,
                    arrival,
                    privacy_action,
                } => {
                    if score == 0 {
                        return Err(Error::NeutralLeak(task.rater_id));
                    }
                    (arrival, score, privacy_action)
                }
                ResponderOutcome::Neutral {
                    arrival,
                    privacy_action,
                } => (arrival, 0, privacy_action),
                ResponderOutcome::Silent => continue,
            };
            if !config.rating_scale.contains(score) {
                return Err(Error::ScoreNotInScale(score));
            }
            pending.push(Reverse(PendingArrival {
                arrival,
                task_id: task.task_id,
                rater_index,
                rater_id: task.rater_id,
                value_index,
                score,
                privacy_action,
            }));
        }

        // Collect everything arriving by the end of this cycle's window,
        // including stragglers dispatched in earlier cycles.
        let mut effective_now = 0u64;
        let mut neutral_now = 0u64;
        while let Some(Reverse(head)) = pending.peek() {
            if head.arrival > window_end {
                break;
            }
            let event = pending.pop().expect("peeked").0;
            if let Some(action) = event.privacy_action {
                registry.apply_privacy_action(event.rater_index, action);
            }
            if event.score != 0 {
                effective_now += 1;
                ratings.push(Rating {
                    rater_id: event.rater_id,
                    value_index: event.value_index,
                    score: event.score,
                    received_time: event.arrival,
                });
            } else {
                neutral_now += 1;
            }
        }
        cum_effective += effective_now;
        cum_neutral += neutral_now;
        stats.push(CycleStats {
            cycle,
            offers,
            effective: effective_now,
            neutral: neutral_now,
            cum_effective,
            cum_neutral,
        });

        if cum_effective >= config.target {
            return Ok(CampaignOutcome::Success { ratings, stats });
        }

        outreach = next_outreach(
            config.target,
            cum_effective,
            cum_neutral,
            pool.len() as u64,
            outreach.max(1),
        );
    }

    let floor = config.target as f64 * (1.0 - config.shortfall_tolerance);
    if (cum_effective as f64) < floor {
        Ok(CampaignOutcome::Fail { stats })
    } else {
        Ok(CampaignOutcome::Success { ratings, stats })
    }
}

/// Write per-cycle stats as CSV `k,offers,effective,neutral,cum_effective,cum_neutral`.
pub fn write_cycle_stats_csv<W: Write>(stats: &[CycleStats], mut w: W) -> Result<()> {
    writeln!(w, "k,offers,effective,neutral,cum_effective,cum_neutral")?;
    for s in stats {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.cycle, s.offers, s.effective, s.neutral, s.cum_effective, s.cum_neutral
        )?;
    }
    Ok(())
}

/// Write the rating set as CSV `rater_id,value_index,score,received_time`.
pub fn write_ratings_csv<W: Write>(ratings: &[Rating], mut w: W) -> Result<()> {
    writeln!(w, "rater_id,value_index,score,received_time")?;
    for r in ratings {
        writeln!(
            w,
            "{},{},{},{}",
            r.rater_id, r.value_index, r.score, r.received_time
        )?;
    }
    Ok(())
}

/// Read a rating set from CSV.
pub fn read_ratings_csv<R: std::io::BufRead>(reader: R) -> Result<Vec<Rating>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut ratings = Vec::new();
    for record in csv.deserialize() {
        let rating: Rating = record?;
        ratings.push(rating);
    }
    Ok(ratings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiling::ProfileBin;
    use crate::registry::{RegistryParams, Worker};

    fn test_profile() -> Profile {
        Profile {
            bin_width: 5.0,
            bins: vec![
                ProfileBin {
                    representative: 20.0,
                    mass: 0.4,
                    volume: 4,
                },
                ProfileBin {
                    representative: 45.0,
                    mass: 0.6,
                    volume: 6,
                },
            ],
        }
    }

    fn test_registry(total: usize, contributors: usize) -> Registry {
        let params = RegistryParams::default();
        let workers = (0..total)
            .map(|i| {
                let mut w = Worker::new(format!("w{i:05}"), -100.0, &params);
                w.is_contributor = i < contributors;
                w
            })
            .collect();
        Registry::from_workers(workers, params)
    }

    fn config(target: u64, strategy: SamplingStrategy, seed: u64) -> CampaignConfig {
        CampaignConfig {
            target,
            shortfall_tolerance: 0.1,
            deadline: 60.0,
            cycle_length: 10.0,
            strategy,
            rating_scale: RatingScale::three_level(),
            eta: 1.0,
            seed,
            task_description: default_task_description(),
        }
    }

    fn always_agree(
        _task: &RatingTask,
        now: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<ResponderOutcome> {
        Ok(ResponderOutcome::Effective {
            score: 1,
            arrival: now,
            privacy_action: None,
        })
    }

    fn always_silent(
        _task: &RatingTask,
        _now: f64,
        _rng: &mut dyn RngCore,
    ) -> Result<ResponderOutcome> {
        Ok(ResponderOutcome::Silent)
    }

    #[test]
    fn outreach_follows_yield_estimate() {
        assert_eq!(next_outreach(1000, 400, 200, 49_000, 100), 900);
        assert_eq!(next_outreach(1000, 300, 0, 49_000, 100), 700);
        assert_eq!(next_outreach(1000, 0, 50, 49_000, 100), 200);
    }

    #[test]
    fn outreach_caps_and_degenerates() {
        assert_eq!(next_outreach(1000, 400, 200, 0, 100), 0);
        assert_eq!(next_outreach(1000, 400, 200, 500, 100), 500);
        assert_eq!(next_outreach(1000, 0, 0, 49_000, 30_000), 49_000);
    }

    #[test]
    fn all_accept_world_succeeds_in_first_cycle() {
        let mut registry = test_registry(100, 0);
        let profile = test_profile();
        let cfg = config(10, SamplingStrategy::Random, 1);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut always_agree, 0.0).unwrap();
        match outcome {
            CampaignOutcome::Success { ratings, stats } => {
                assert_eq!(ratings.len(), 10);
                assert_eq!(stats.len(), 1);
                assert_eq!(stats[0].offers, 10);
                assert_eq!(stats[0].cum_effective, 10);
            }
            CampaignOutcome::Fail { .. } => panic!("expected success"),
        }
    }

    #[test]
    fn all_silent_world_fails_after_deadline() {
        let mut registry = test_registry(1000, 0);
        let profile = test_profile();
        let cfg = config(10, SamplingStrategy::Random, 2);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut always_silent, 0.0).unwrap();
        match outcome {
            CampaignOutcome::Fail { stats } => {
                assert_eq!(stats.len(), 6);
                assert_eq!(stats.last().unwrap().cum_effective, 0);
                // Outreach doubles while yield is unknown.
                assert_eq!(stats[1].offers, 20);
                assert_eq!(stats[2].offers, 40);
            }
            CampaignOutcome::Success { .. } => panic!("expected failure"),
        }
    }

    #[test]
    fn raters_are_distinct_and_exclude_contributors() {
        let mut registry = test_registry(60, 10);
        let profile = test_profile();
        // Half the raters stay silent so several cycles run.
        let mut flip = false;
        let mut responder = move |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            flip = !flip;
            Ok(if flip {
                ResponderOutcome::Effective {
                    score: 1,
                    arrival: now + 1.0,
                    privacy_action: None,
                }
            } else {
                ResponderOutcome::Silent
            })
        };
        let cfg = config(40, SamplingStrategy::Proportional, 3);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        let mut seen = std::collections::HashSet::new();
        for rating in outcome.ratings() {
            assert!(seen.insert(rating.rater_id.clone()), "duplicate rater");
            let idx = registry.index_of(&rating.rater_id).unwrap();
            assert!(!registry.worker(idx).is_contributor);
        }
        let total_offers: u64 = outcome.stats().iter().map(|s| s.offers).sum();
        assert!(total_offers <= 50);
    }

    #[test]
    fn late_responses_count_in_arrival_cycle() {
        let mut registry = test_registry(50, 0);
        let profile = test_profile();
        // Ratings arrive 15 units after dispatch: outside the dispatch
        // cycle, inside the next one.
        let mut responder = |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            Ok(ResponderOutcome::Effective {
                score: -1,
                arrival: now + 15.0,
                privacy_action: None,
            })
        };
        let cfg = config(5, SamplingStrategy::Random, 4);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        let stats = outcome.stats();
        assert_eq!(stats[0].effective, 0);
        assert!(stats[1].effective > 0);
        assert!(outcome.is_success());
    }

    #[test]
    fn responses_after_deadline_are_dropped() {
        let mut registry = test_registry(50, 0);
        let profile = test_profile();
        let mut responder = |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            Ok(ResponderOutcome::Effective {
                score: 1,
                arrival: now + 1000.0,
                privacy_action: None,
            })
        };
        let cfg = config(5, SamplingStrategy::Random, 5);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        assert!(!outcome.is_success());
    }

    #[test]
    fn neutral_responses_feed_outreach_estimate() {
        let mut registry = test_registry(200, 0);
        let profile = test_profile();
        // Alternate effective/neutral: yield estimate settles at 1/2.
        let mut flip = false;
        let mut responder = move |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            flip = !flip;
            Ok(if flip {
                ResponderOutcome::Effective {
                    score: 1,
                    arrival: now,
                    privacy_action: None,
                }
            } else {
                ResponderOutcome::Neutral {
                    arrival: now,
                    privacy_action: None,
                }
            })
        };
        let cfg = config(20, SamplingStrategy::Random, 6);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        let stats = outcome.stats();
        assert_eq!(stats[0].offers, 20);
        assert_eq!(stats[0].effective, 10);
        assert_eq!(stats[0].neutral, 10);
        // Remaining 10 at the observed 1/2 yield: 20 more offers.
        assert_eq!(stats[1].offers, 20);
        assert!(outcome.is_success());
    }

    #[test]
    fn deterministic_given_seed() {
        let profile = test_profile();
        let run = || {
            let mut registry = test_registry(300, 20);
            let mut responder = |task: &RatingTask, now: f64, rng: &mut dyn RngCore| {
                let coin = (rng.next_u32() % 4) as i32;
                Ok(match coin {
                    0 => ResponderOutcome::Silent,
                    1 => ResponderOutcome::Neutral {
                        arrival: now + 2.0,
                        privacy_action: None,
                    },
                    _ => ResponderOutcome::Effective {
                        score: if task.value_index == 0 { 1 } else { -1 },
                        arrival: now + (rng.next_u32() % 20) as f64,
                        privacy_action: None,
                    },
                })
            };
            let cfg = config(60, SamplingStrategy::Reverse, 7);
            run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.ratings(), b.ratings());
        assert_eq!(a.stats(), b.stats());
    }

    #[test]
    fn empty_profile_rejected_before_dispatch() {
        let mut registry = test_registry(10, 0);
        let profile = Profile {
            bin_width: 5.0,
            bins: vec![],
        };
        let cfg = config(5, SamplingStrategy::Random, 8);
        assert!(matches!(
            run_campaign(&cfg, &mut registry, &profile, &mut always_agree, 0.0),
            Err(Error::EmptyProfile)
        ));
    }

    #[test]
    fn responder_errors_count_as_non_response() {
        let mut registry = test_registry(30, 0);
        let profile = test_profile();
        let mut calls = 0u32;
        let mut responder = move |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            calls += 1;
            if calls % 2 == 0 {
                Err(Error::NoData)
            } else {
                Ok(ResponderOutcome::Effective {
                    score: 1,
                    arrival: now,
                    privacy_action: None,
                })
            }
        };
        let cfg = config(10, SamplingStrategy::Random, 9);
        let outcome = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        assert!(outcome.is_success());
        assert_eq!(outcome.stats()[0].effective, 5);
    }

    #[test]
    fn privacy_actions_applied_on_arrival() {
        let mut registry = test_registry(20, 0);
        let profile = test_profile();
        let mut responder = |_task: &RatingTask, now: f64, _rng: &mut dyn RngCore| {
            Ok(ResponderOutcome::Neutral {
                arrival: now,
                privacy_action: Some(PrivacyAction::Stop),
            })
        };
        let cfg = config(5, SamplingStrategy::Random, 10);
        let _ = run_campaign(&cfg, &mut registry, &profile, &mut responder, 0.0).unwrap();
        let stopped = registry.workers().iter().filter(|w| w.opted_out()).count();
        assert!(stopped > 0, "stop requests must reach the registry");
    }
}
