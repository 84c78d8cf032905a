//! Worker registry: reputations, privacy elasticities, and rater selection.
//!
//! A worker's chance of receiving an offer at time `t` is proportional to
//! `1 - exp(-elasticity * (t - last_offer) * (reputation + epsilon))`: more
//! reputable workers are favored, long-unoffered workers catch up, and the
//! per-worker elasticity lets each worker throttle (or stop) the pushes.

use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Registry record for one crowdworker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Worker {
    pub id: String,
    pub reputation: f64,
    pub elasticity: f64,
    /// Time of the last offer, or the signup time if never offered.
    pub last_offer_time: f64,
    pub is_contributor: bool,
    pub signup_time: f64,
}

impl Worker {
    pub fn new(id: impl Into<String>, signup_time: f64, params: &RegistryParams) -> Self {
        Self {
            id: id.into(),
            reputation: 0.0,
            elasticity: params.elasticity_init,
            last_offer_time: signup_time,
            is_contributor: false,
            signup_time,
        }
    }

    /// Opted out of offers entirely.
    pub fn opted_out(&self) -> bool {
        self.elasticity == 0.0
    }
}

/// Tuning constants for selection and privacy handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegistryParams {
    /// Keeps zero-reputation workers selectable.
    pub epsilon: f64,
    /// Elasticity adjustment per privacy action.
    pub step: f64,
    /// Cap preventing elasticity from offsetting low reputation.
    pub elasticity_cap: f64,
    pub elasticity_init: f64,
}

impl Default for RegistryParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            step: 0.2,
            elasticity_cap: 1.6,
            elasticity_init: 1.0,
        }
    }
}

/// Optional action a rater may attach to an offer response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyAction {
    /// "Send me more": raise elasticity up to the cap.
    More,
    /// "Send me less": lower elasticity down to the epsilon floor.
    Less,
    /// "Stop sending to me": opt out of all future offers.
    Stop,
}

/// Unnormalized selection weight of `worker` at time `t`.
pub fn selection_weight(worker: &Worker, t: f64, params: &RegistryParams) -> Result<f64> {
    if t < worker.last_offer_time {
        return Err(Error::ClockRegression {
            now: t,
            last_offer: worker.last_offer_time,
        });
    }
    let exponent = worker.elasticity * (t - worker.last_offer_time) * (worker.reputation + params.epsilon);
    Ok(1.0 - (-exponent).exp())
}

/// The worker population with single-writer mutation semantics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    params: RegistryParams,
    workers: Vec<Worker>,
}

impl Registry {
    pub fn new(params: RegistryParams) -> Self {
        Self {
            params,
            workers: Vec::new(),
        }
    }

    pub fn from_workers(workers: Vec<Worker>, params: RegistryParams) -> Self {
        Self { params, workers }
    }

    pub fn params(&self) -> &RegistryParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.workers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workers.is_empty()
    }

    pub fn worker(&self, idx: usize) -> &Worker {
        &self.workers[idx]
    }

    pub fn workers(&self) -> &[Worker] {
        &self.workers
    }

    pub fn push(&mut self, worker: Worker) -> usize {
        self.workers.push(worker);
        self.workers.len() - 1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.workers.iter().position(|w| w.id == id)
    }

    /// Indices of workers eligible for offers: non-contributors that have
    /// not opted out.
    pub fn eligible_pool(&self) -> Vec<usize> {
        self.workers
            .iter()
            .enumerate()
            .filter(|(_, w)| !w.is_contributor && !w.opted_out())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn selection_weight(&self, idx: usize, t: f64) -> Result<f64> {
        selection_weight(&self.workers[idx], t, &self.params)
    }

    /// Select up to `count` distinct raters from `pool` at time `t`.
    ///
    /// Draws are made without replacement, each proportional to the
    /// selection weight over the remaining pool. Zero-weight workers are
    /// never selected; if fewer than `count` workers carry positive weight,
    /// all of them are returned. Selected workers get their last-offer time
    /// set to `t`.
    pub fn select_raters<R: Rng + ?Sized>(
        &mut self,
        pool: &[usize],
        t: f64,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let mut weights = Vec::with_capacity(pool.len());
        for &idx in pool {
            weights.push(self.selection_weight(idx, t)?);
        }
        let mut picker = WeightedPicker::new(&weights);
        let mut selected = Vec::with_capacity(count.min(pool.len()));
        while selected.len() < count {
            match picker.draw(rng) {
                Some(slot) => selected.push(pool[slot]),
                None => break,
            }
        }
        for &idx in &selected {
            self.workers[idx].last_offer_time = t;
        }
        Ok(selected)
    }

    pub fn apply_privacy_action(&mut self, idx: usize, action: PrivacyAction) {
        let worker = &mut self.workers[idx];
        worker.elasticity = match action {
            PrivacyAction::More => (worker.elasticity + self.params.step).min(self.params.elasticity_cap),
            PrivacyAction::Less => (worker.elasticity - self.params.step).max(self.params.epsilon),
            PrivacyAction::Stop => 0.0,
        };
    }

    pub fn set_reputation(&mut self, idx: usize, reputation: f64) {
        self.workers[idx].reputation = reputation;
    }

    /// Export the registry as a JSON array of worker records.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self.workers)?;
        Ok(())
    }

    pub fn load_snapshot(path: &Path, params: RegistryParams) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let workers: Vec<Worker> = serde_json::from_reader(BufReader::new(file))?;
        Ok(Self::from_workers(workers, params))
    }
}

/// Fenwick-tree weighted sampler without replacement: each draw removes
/// the chosen slot, which renormalizes the remaining weights implicitly.
struct WeightedPicker {
    tree: Vec<f64>,
    weights: Vec<f64>,
    remaining: f64,
}

impl WeightedPicker {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            let mut j = i + 1;
            while j <= n {
                tree[j] += w;
                j += j & j.wrapping_neg();
            }
        }
        Self {
            tree,
            weights: weights.to_vec(),
            remaining: weights.iter().sum(),
        }
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<usize> {
        if self.remaining <= 0.0 {
            return None;
        }
        let target = rng.random::<f64>() * self.remaining;
        let slot = self.locate(target);
        if self.weights[slot] <= 0.0 {
            // Float residue picked an emptied slot; nothing left to draw.
            return None;
        }
        self.remove(slot);
        Some(slot)
    }

    /// Smallest index whose prefix sum exceeds `target`.
    fn locate(&self, mut target: f64) -> usize {
        let n = self.weights.len();
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                target -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        pos.min(n - 1)
    }

    fn remove(&mut self, slot: usize) {
        let w = self.weights[slot];
        self.weights[slot] = 0.0;
        self.remaining -= w;
        let n = self.weights.len();
        let mut j = slot + 1;
        while j <= n {
            self.tree[j] -= w;
            j += j & j.wrapping_neg();
        }
    }
}
