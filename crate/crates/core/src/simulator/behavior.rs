//! Stochastic worker population and response model.
//!
//! Each worker accepts an offer with a personal probability, holds a
//! private estimate of the truth, and agrees with a presented value only
//! when it falls within a personal threshold of that estimate. Responses
//! arrive after an exponentially distributed delay; non-accepting workers
//! either decline explicitly (a neutral rating) or stay silent.

use std::collections::HashMap;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp, Normal};

use super::{BehaviorParams, ScenarioSpec};
use crate::pacap::{RatingSource, RatingTask, ResponderOutcome};
use crate::registry::{PrivacyAction, Registry, RegistryParams, Worker};
use crate::Result;

/// Per-worker response traits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkerBehavior {
    /// Probability of accepting an offer and rating effectively.
    pub acceptance: f64,
    /// The worker's private estimate of the truth.
    pub truth_estimate: f64,
    /// Agreement threshold: rate +1 iff the offered value is within this
    /// distance of the estimate.
    pub threshold: f64,
}

/// Registry records plus behavior traits, index-aligned.
#[derive(Debug, Clone)]
pub struct Population {
    pub registry: Registry,
    pub behaviors: Vec<WorkerBehavior>,
}

/// Generate the worker population for a scenario.
///
/// Worker `i` gets id `w{i:05}`; the first `contributors` workers are the
/// contributor set. Signup times are spread uniformly over the configured
/// window before the campaign starts.
pub fn generate_population<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Population {
    let params = RegistryParams::default();
    let truth_dist =
        Normal::new(spec.truth, spec.behavior.truth_sd).expect("validated truth spread");
    let mut workers = Vec::with_capacity(spec.population as usize);
    let mut behaviors = Vec::with_capacity(spec.population as usize);
    for i in 0..spec.population {
        let signup = -(rng.random::<f64>() * spec.behavior.signup_horizon);
        let mut worker = Worker::new(format!("w{i:05}"), signup, &params);
        worker.is_contributor = i < spec.contributors;
        workers.push(worker);

        let acceptance = rng.random::<f64>();
        let truth_estimate = truth_dist.sample(rng);
        let mean = spec.behavior.threshold_mean_factor * truth_estimate;
        let sd = (spec.behavior.threshold_sd_factor * truth_estimate).abs();
        let threshold = if sd > 0.0 {
            Normal::new(mean, sd).expect("positive spread").sample(rng)
        } else {
            mean
        };
        behaviors.push(WorkerBehavior {
            acceptance,
            truth_estimate,
            threshold: threshold.max(0.0),
        });
    }
    Population {
        registry: Registry::from_workers(workers, params),
        behaviors,
    }
}

/// Simulate one worker's reaction to a rating task at time `now`.
pub fn simulate_response(
    behavior: &WorkerBehavior,
    params: &BehaviorParams,
    task: &RatingTask,
    now: f64,
    rng: &mut dyn RngCore,
) -> ResponderOutcome {
    let delay_dist = Exp::new(1.0 / params.delay_mean).expect("positive delay mean");
    let accepts = rng.random::<f64>() < behavior.acceptance;
    if accepts {
        let score = if (task.value - behavior.truth_estimate).abs() <= behavior.threshold {
            1
        } else {
            -1
        };
        ResponderOutcome::Effective {
            score,
            arrival: now + delay_dist.sample(rng),
            privacy_action: draw_privacy_action(params, rng),
        }
    } else if rng.random::<f64>() < params.neutral_share {
        ResponderOutcome::Neutral {
            arrival: now + delay_dist.sample(rng),
            privacy_action: draw_privacy_action(params, rng),
        }
    } else {
        ResponderOutcome::Silent
    }
}

fn draw_privacy_action(params: &BehaviorParams, rng: &mut dyn RngCore) -> Option<PrivacyAction> {
    let total = params.privacy_more_prob + params.privacy_less_prob + params.privacy_stop_prob;
    if total <= 0.0 {
        return None;
    }
    let x = rng.random::<f64>();
    if x < params.privacy_more_prob {
        Some(PrivacyAction::More)
    } else if x < params.privacy_more_prob + params.privacy_less_prob {
        Some(PrivacyAction::Less)
    } else if x < total {
        Some(PrivacyAction::Stop)
    } else {
        None
    }
}

/// Rating source backed by the population's behavior traits.
pub struct ModelResponder<'a> {
    behaviors: &'a [WorkerBehavior],
    params: &'a BehaviorParams,
    index_of: HashMap<&'a str, usize>,
}

impl<'a> ModelResponder<'a> {
    pub fn new(population: &'a Population, params: &'a BehaviorParams) -> Self {
        let index_of = population
            .registry
            .workers()
            .iter()
            .enumerate()
            .map(|(i, w)| (w.id.as_str(), i))
            .collect();
        Self {
            behaviors: &population.behaviors,
            params,
            index_of,
        }
    }
}

impl RatingSource for ModelResponder<'_> {
    fn respond(
        &mut self,
        task: &RatingTask,
        now: f64,
        rng: &mut dyn RngCore,
    ) -> Result<ResponderOutcome> {
        let idx = *self
            .index_of
            .get(task.rater_id.as_str())
            .ok_or_else(|| crate::Error::UnknownWorker(task.rater_id.clone()))?;
        Ok(simulate_response(
            &self.behaviors[idx],
            self.params,
            task,
            now,
            rng,
        ))
    }
}
