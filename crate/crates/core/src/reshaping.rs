//! Consolidating the rating set with the interim profile.
//!
//! Effective ratings on bin `i` are normalized by the top score into
//! positive mass `g_i` and negative mass `b_i`. The interim belief is then
//! updated per bin as
//!
//! ```text
//! p_hat_i = (p_i + eta * g_i / R) / (1 + eta * (g_i + b_i) / R)
//! ```
//!
//! where `R` is the number of effective ratings. The `1/R` terms equalize
//! the contributing and validating crowd sizes, and `eta` weights a
//! full-score rating against an actual sensing contribution. The posterior
//! is `p_hat` renormalized.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::pacap::Rating;
use crate::profiling::Profile;
use crate::{Error, Result};

/// Symmetric score scale for rating options, e.g. `{-1, 0, 1}` for
/// Disagree / Neutral / Agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub scores: Vec<i32>,
    pub labels: Vec<String>,
}

impl RatingScale {
    /// Disagree / Neutral / Agree.
    pub fn three_level() -> Self {
        Self {
            scores: vec![-1, 0, 1],
            labels: vec!["Disagree".into(), "Neutral".into(), "Agree".into()],
        }
    }

    /// Very unlikely .. Very likely.
    pub fn five_level() -> Self {
        Self {
            scores: vec![-2, -1, 0, 1, 2],
            labels: vec![
                "Very unlikely".into(),
                "Unlikely".into(),
                "Not Sure".into(),
                "Likely".into(),
                "Very likely".into(),
            ],
        }
    }

    /// Largest positive score; Eq. (5)-(6) normalize by this.
    pub fn max_score(&self) -> i32 {
        *self.scores.last().expect("validated scale is non-empty")
    }

    pub fn contains(&self, score: i32) -> bool {
        self.scores.contains(&score)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::InvalidScale("empty score list".into()));
        }
        if self.labels.len() != self.scores.len() {
            return Err(Error::InvalidScale(format!(
                "{} labels for {} scores",
                self.labels.len(),
                self.scores.len()
            )));
        }
        if !self.scores.contains(&0) {
            return Err(Error::InvalidScale("scale must include a neutral 0".into()));
        }
        if self.scores.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScale("scores must be strictly increasing".into()));
        }
        let negatives: Vec<i32> = self.scores.iter().filter(|&&s| s < 0).map(|s| -s).collect();
        let mut positives: Vec<i32> = self.scores.iter().filter(|&&s| s > 0).copied().collect();
        positives.reverse();
        if negatives != positives {
            return Err(Error::InvalidScale("scores must be symmetric about 0".into()));
        }
        Ok(())
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::three_level()
    }
}

/// Normalized positive and negative rating mass per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinTally {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl BinTally {
    pub fn zeros(bins: usize) -> Self {
        Self {
            positive: vec![0.0; bins],
            negative: vec![0.0; bins],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.positive.iter().all(|&g| g == 0.0) && self.negative.iter().all(|&b| b == 0.0)
    }
}

/// One bin of the reshaped profile: interim and posterior beliefs with
/// the rating mass that moved them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapedBin {
    #[serde(rename = "v")]
    pub representative: f64,
    pub p_interim: f64,
    pub p_posterior: f64,
    #[serde(rename = "g")]
    pub positive: f64,
    #[serde(rename = "b")]
    pub negative: f64,
}

/// Posterior belief profile paired with the interim it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapedProfile {
    pub eta: f64,
    pub bins: Vec<ReshapedBin>,
}

impl ReshapedProfile {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index of the bin whose representative is closest to `value`.
    pub fn nearest_bin(&self, value: f64) -> Option<usize> {
        self.bins
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (a.representative - value)
                    .abs()
                    .total_cmp(&(b.representative - value).abs())
            })
            .map(|(i, _)| i)
    }

    /// Posterior-to-interim ratio at the bin nearest `value`.
    pub fn ratio_at(&self, value: f64) -> Option<f64> {
        self.nearest_bin(value)
            .map(|i| self.bins[i].p_posterior / self.bins[i].p_interim)
    }
}

/// Tally the effective ratings into per-bin normalized positive and
/// negative mass. The set must contain no neutral (score 0) entries.
pub fn tally_ratings(ratings: &[Rating], scale: &RatingScale, bins: usize) -> Result<BinTally> {
    scale.validate()?;
    let top = scale.max_score() as f64;
    let mut tally = BinTally::zeros(bins);
    for rating in ratings {
        if rating.score == 0 {
            return Err(Error::NeutralLeak(rating.rater_id.clone()));
        }
        if !scale.contains(rating.score) {
            return Err(Error::ScoreNotInScale(rating.score));
        }
        if rating.value_index >= bins {
            return Err(Error::RatingIndexOutOfRange {
                index: rating.value_index,
                bins,
            });
        }
        if rating.score > 0 {
            tally.positive[rating.value_index] += rating.score as f64 / top;
        } else {
            tally.negative[rating.value_index] += -rating.score as f64 / top;
        }
    }
    Ok(tally)
}

/// Reshape the interim profile with the rating tally.
///
/// `effective_count` is the number of effective ratings collected (the
/// campaign output size), not the normalized tally mass; with multi-level
/// scales the two differ. With no evidence (`eta == 0` or an empty rating
/// set) the posterior equals the interim exactly.
pub fn reshape(
    profile: &Profile,
    tally: &BinTally,
    effective_count: u64,
    eta: f64,
) -> Result<ReshapedProfile> {
    if profile.is_empty() {
        return Err(Error::EmptyProfile);
    }
    if tally.positive.len() != profile.len() || tally.negative.len() != profile.len() {
        return Err(Error::RatingIndexOutOfRange {
            index: tally.positive.len().max(tally.negative.len()),
            bins: profile.len(),
        });
    }
    if effective_count == 0 && !tally.is_zero() {
        return Err(Error::InconsistentRatingCount);
    }

    let identity = effective_count == 0 || eta == 0.0;
    let mut bins = Vec::with_capacity(profile.len());
    if identity {
        for (bin, (&g, &b)) in profile
            .bins
            .iter()
            .zip(tally.positive.iter().zip(&tally.negative))
        {
            bins.push(ReshapedBin {
                representative: bin.representative,
                p_interim: bin.mass,
                p_posterior: bin.mass,
                positive: g,
                negative: b,
            });
        }
        return Ok(ReshapedProfile { eta, bins });
    }

    let count = effective_count as f64;
    let mut unnormalized = Vec::with_capacity(profile.len());
    for (bin, (&g, &b)) in profile
        .bins
        .iter()
        .zip(tally.positive.iter().zip(&tally.negative))
    {
        let updated = (bin.mass + eta * g / count) / (1.0 + eta * (g + b) / count);
        unnormalized.push(updated);
    }
    let total: f64 = unnormalized.iter().sum();
    for ((bin, updated), (&g, &b)) in profile
        .bins
        .iter()
        .zip(unnormalized)
        .zip(tally.positive.iter().zip(&tally.negative))
    {
        bins.push(ReshapedBin {
            representative: bin.representative,
            p_interim: bin.mass,
            p_posterior: updated / total,
            positive: g,
            negative: b,
        });
    }
    Ok(ReshapedProfile { eta, bins })
}

/// Write the reshaped profile as CSV `v,p_interim,p_posterior,g,b`.
pub fn write_reshaped_csv<W: Write>(reshaped: &ReshapedProfile, mut w: W) -> Result<()> {
    writeln!(w, "v,p_interim,p_posterior,g,b")?;
    for bin in &reshaped.bins {
        writeln!(
            w,
            "{},{},{},{},{}",
            bin.representative, bin.p_interim, bin.p_posterior, bin.positive, bin.negative
        )?;
    }
    Ok(())
}
