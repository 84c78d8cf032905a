//! Value-selection strategies for rating tasks.
//!
//! Each offer presents a single representative value, drawn with a
//! per-strategy sampling weight. Proportional sampling concentrates
//! validation on frequently observed values; reverse and inverse sampling
//! deliberately favor rare values to scavenge truths buried in the noise.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::profiling::Profile;
use crate::{Error, Result};

/// The four value-sampling strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingStrategy {
    Random,
    Proportional,
    Reverse,
    Inverse,
}

impl SamplingStrategy {
    pub const ALL: [SamplingStrategy; 4] = [
        SamplingStrategy::Random,
        SamplingStrategy::Proportional,
        SamplingStrategy::Reverse,
        SamplingStrategy::Inverse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplingStrategy::Random => "random",
            SamplingStrategy::Proportional => "proportional",
            SamplingStrategy::Reverse => "reverse",
            SamplingStrategy::Inverse => "inverse",
        }
    }
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(SamplingStrategy::Random),
            "proportional" => Ok(SamplingStrategy::Proportional),
            "reverse" => Ok(SamplingStrategy::Reverse),
            "inverse" => Ok(SamplingStrategy::Inverse),
            other => Err(Error::UnknownStrategy(other.to_string())),
        }
    }
}

/// Per-representative sampling weights for `strategy` over `profile`.
///
/// Random: `1/n`. Proportional: `p_i`. Reverse: `(d - p_i) / (n*d - 1)`
/// with `d = p_min + p_max`, which mirrors the mass distribution about its
/// waistline instead of flattening it. Inverse: `p_i^-1 / sum(p_j^-1)`.
pub fn strategy_weights(profile: &Profile, strategy: SamplingStrategy) -> Result<Vec<f64>> {
    let masses = profile.masses();
    let n = masses.len();
    if n == 0 {
        return Err(Error::EmptyProfile);
    }
    if n == 1 {
        // Only one candidate; every strategy degenerates to certainty.
        return Ok(vec![1.0]);
    }
    let weights = match strategy {
        SamplingStrategy::Random => vec![1.0 / n as f64; n],
        SamplingStrategy::Proportional => masses,
        SamplingStrategy::Reverse => {
            let min = masses.iter().copied().fold(f64::INFINITY, f64::min);
            let max = masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let d = min + max;
            let denom = n as f64 * d - 1.0;
            masses.iter().map(|p| (d - p) / denom).collect()
        }
        SamplingStrategy::Inverse => {
            let inverses: Vec<f64> = masses.iter().map(|p| 1.0 / p).collect();
            let total: f64 = inverses.iter().sum();
            inverses.into_iter().map(|x| x / total).collect()
        }
    };
    Ok(weights)
}

/// Draw one representative index with probability equal to its strategy weight.
pub fn draw_value<R: Rng + ?Sized>(
    profile: &Profile,
    strategy: SamplingStrategy,
    rng: &mut R,
) -> Result<usize> {
    let sampler = ValueSampler::new(profile, strategy)?;
    Ok(sampler.draw(rng))
}

/// Precomputed weights for repeated draws within one campaign (the interim
/// belief is fixed while validation runs, so weights never change).
#[derive(Debug, Clone)]
pub struct ValueSampler {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ValueSampler {
    pub fn new(profile: &Profile, strategy: SamplingStrategy) -> Result<Self> {
        let weights = strategy_weights(profile, strategy)?;
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            weights,
            cumulative,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty sampler");
        let x = rng.random::<f64>() * total;
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&x).expect("finite weights"))
        {
            Ok(i) | Err(i) => i.min(self.weights.len() - 1),
        }
    }
}
