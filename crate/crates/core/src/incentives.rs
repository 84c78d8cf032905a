//! Post-campaign incentives: reputation updates for raters and payment
//! revision for contributors.
//!
//! A rater gains reputation when the rating agrees with the direction the
//! belief actually moved, and loses it otherwise; both the belief shift
//! and the score are normalized so the adjustment stays within [-1, 1].
//! Contributor payments keep the host application's incentive scheme
//! intact and substitute each quality `u` with `u * p'/p` for the bin the
//! contribution fell in, optionally renormalized to the original budget.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::pacap::Rating;
use crate::registry::Registry;
use crate::reshaping::ReshapedProfile;
use crate::{Error, Result};

/// Host-application payment scheme: maps one contributor's quality plus
/// everyone else's to a payment. Implementations must be deterministic.
pub trait PaymentFunction {
    /// Payment for the contributor at `index` given all qualities
    /// (ordered by contributor id).
    fn payment(&self, index: usize, qualities: &[f64]) -> f64;
}

/// Default scheme used for testing: payment equals quality.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearPayment;

impl PaymentFunction for LinearPayment {
    fn payment(&self, index: usize, qualities: &[f64]) -> f64 {
        qualities[index]
    }
}

/// Look up a payment function by config key.
pub fn payment_function_by_key(key: &str) -> Result<Box<dyn PaymentFunction>> {
    match key {
        "linear" => Ok(Box::new(LinearPayment)),
        other => Err(Error::InvalidConfig(format!(
            "unknown payment function {other:?} (built in: linear)"
        ))),
    }
}

/// Reputation change for one effective rating.
///
/// The belief shift is normalized by the headroom it had to move: by
/// `1 - p` on an increase and by `p` on a decrease; an unchanged belief
/// yields no adjustment. The final reputation is clamped at zero.
pub fn reputation_update(
    reputation: f64,
    p_interim: f64,
    p_posterior: f64,
    score: i32,
    max_score: i32,
) -> Result<(f64, f64)> {
    if !(p_interim > 0.0 && p_interim < 1.0) {
        return Err(Error::DegenerateBelief(p_interim));
    }
    if score == 0 {
        return Err(Error::NeutralLeak(String::new()));
    }
    let shift = p_posterior - p_interim;
    let normalized_shift = if shift > 0.0 {
        shift / (1.0 - p_interim)
    } else if shift < 0.0 {
        shift / p_interim
    } else {
        0.0
    };
    let delta = normalized_shift * score as f64 / max_score as f64;
    Ok((delta, (reputation + delta).max(0.0)))
}

/// One rater's reputation change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterUpdate {
    pub rater_id: String,
    pub before: f64,
    pub delta: f64,
    pub after: f64,
}

/// One contributor's original, revised, and (optionally) budget-normalized
/// payment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributorPayment {
    pub contributor_id: String,
    pub quality: f64,
    pub pi: f64,
    pub pi_prime: f64,
    pub pi_budget: Option<f64>,
}

/// A contributor's recorded quality and the profile bin their data fell in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub quality: f64,
    pub bin: usize,
}

/// Combined incentive outcome for a campaign.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IncentiveReport {
    pub raters: Vec<RaterUpdate>,
    pub contributors: Vec<ContributorPayment>,
}

/// Apply reputation updates for every effective rating, atomically against
/// the registry, and report the changes in rating order.
pub fn update_rater_reputations(
    ratings: &[Rating],
    reshaped: &ReshapedProfile,
    registry: &mut Registry,
    max_score: i32,
) -> Result<Vec<RaterUpdate>> {
    let mut updates = Vec::with_capacity(ratings.len());
    for rating in ratings {
        let bin = reshaped
            .bins
            .get(rating.value_index)
            .ok_or(Error::RatingIndexOutOfRange {
                index: rating.value_index,
                bins: reshaped.len(),
            })?;
        let idx = registry
            .index_of(&rating.rater_id)
            .ok_or_else(|| Error::UnknownWorker(rating.rater_id.clone()))?;
        let before = registry.worker(idx).reputation;
        let (delta, after) =
            reputation_update(before, bin.p_interim, bin.p_posterior, rating.score, max_score)?;
        registry.set_reputation(idx, after);
        updates.push(RaterUpdate {
            rater_id: rating.rater_id.clone(),
            before,
            delta,
            after,
        });
    }
    Ok(updates)
}

/// Revise contributor payments against the reshaped profile.
///
/// Every quality is rectified by its bin's posterior-to-interim ratio
/// before the payment function is re-evaluated. With `budget_mode` the
/// revised payments are rescaled so their total matches the original
/// total.
pub fn revise_payments(
    payment_fn: &dyn PaymentFunction,
    contributions: &BTreeMap<String, Contribution>,
    reshaped: &ReshapedProfile,
    budget_mode: bool,
) -> Result<Vec<ContributorPayment>> {
    let ids: Vec<&String> = contributions.keys().collect();
    let mut original_q = Vec::with_capacity(ids.len());
    let mut rectified_q = Vec::with_capacity(ids.len());
    for id in &ids {
        let c = &contributions[*id];
        let bin = reshaped.bins.get(c.bin).ok_or(Error::RatingIndexOutOfRange {
            index: c.bin,
            bins: reshaped.len(),
        })?;
        if !(bin.p_interim > 0.0) {
            return Err(Error::DegenerateBelief(bin.p_interim));
        }
        original_q.push(c.quality);
        rectified_q.push(c.quality * bin.p_posterior / bin.p_interim);
    }

    let original: Vec<f64> = (0..ids.len())
        .map(|i| payment_fn.payment(i, &original_q))
        .collect();
    let revised: Vec<f64> = (0..ids.len())
        .map(|i| payment_fn.payment(i, &rectified_q))
        .collect();

    let budget_scale = if budget_mode {
        let original_total: f64 = original.iter().sum();
        let revised_total: f64 = revised.iter().sum();
        if revised_total == 0.0 && original_total > 0.0 {
            return Err(Error::BudgetUndefined);
        }
        Some(if revised_total == 0.0 {
            0.0
        } else {
            original_total / revised_total
        })
    } else {
        None
    };

    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| ContributorPayment {
            contributor_id: id.clone(),
            quality: original_q[i],
            pi: original[i],
            pi_prime: revised[i],
            pi_budget: budget_scale.map(|s| revised[i] * s),
        })
        .collect())
}

/// Write rater updates as CSV `rater_id,R_before,delta,R_after`.
pub fn write_rater_updates_csv<W: Write>(updates: &[RaterUpdate], mut w: W) -> Result<()> {
    writeln!(w, "rater_id,R_before,delta,R_after")?;
    for u in updates {
        writeln!(w, "{},{},{},{}", u.rater_id, u.before, u.delta, u.after)?;
    }
    Ok(())
}

/// Write contributor payments as CSV `contributor_id,pi,pi_prime,pi_budget`.
pub fn write_contributor_payments_csv<W: Write>(
    payments: &[ContributorPayment],
    mut w: W,
) -> Result<()> {
    writeln!(w, "contributor_id,pi,pi_prime,pi_budget")?;
    for p in payments {
        match p.pi_budget {
            Some(b) => writeln!(w, "{},{},{},{}", p.contributor_id, p.pi, p.pi_prime, b)?,
            None => writeln!(w, "{},{},{},", p.contributor_id, p.pi, p.pi_prime)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiling::{Profile, ProfileBin};
    use crate::registry::{RegistryParams, Worker};
    use crate::reshaping::{reshape, BinTally};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gain_for_supporting_the_verdict() {
        let (delta, after) = reputation_update(0.0, 0.5, 0.75, 1, 1).unwrap();
        assert_abs_diff_eq!(delta, 0.5);
        assert_abs_diff_eq!(after, 0.5);
    }

    #[test]
    fn penalty_for_opposing_the_verdict() {
        let (delta, _) = reputation_update(1.0, 0.5, 0.25, 1, 1).unwrap();
        assert_abs_diff_eq!(delta, -0.5);
    }

    #[test]
    fn no_movement_no_adjustment() {
        let (delta, after) = reputation_update(0.7, 0.4, 0.4, -1, 1).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(after, 0.7);
    }

    #[test]
    fn reputation_clamped_at_zero() {
        let (delta, after) = reputation_update(0.2, 0.5, 0.25, 1, 1).unwrap();
        assert_abs_diff_eq!(delta, -0.5);
        assert_eq!(after, 0.0);
    }

    #[test]
    fn degenerate_belief_rejected() {
        assert!(matches!(
            reputation_update(0.0, 0.0, 0.5, 1, 1),
            Err(Error::DegenerateBelief(_))
        ));
        assert!(matches!(
            reputation_update(0.0, 1.0, 0.5, 1, 1),
            Err(Error::DegenerateBelief(_))
        ));
    }

    #[test]
    fn adjustment_magnitude_bounded() {
        for &(p, q) in &[(0.01, 0.99), (0.99, 0.01), (0.5, 0.500001), (0.3, 0.9)] {
            for score in [-2, -1, 1, 2] {
                let (delta, _) = reputation_update(1.0, p, q, score, 2).unwrap();
                assert!(delta.abs() <= 1.0 + 1e-12, "delta {delta} out of range");
            }
        }
    }

    #[test]
    fn sign_consistency() {
        for &(p, q) in &[(0.3, 0.6), (0.6, 0.3)] {
            for score in [-1, 1] {
                let (delta, _) = reputation_update(1.0, p, q, score, 1).unwrap();
                let expected = (score as f64).signum() * (q - p).signum();
                assert_eq!(delta.signum(), expected, "p={p} q={q} score={score}");
            }
        }
    }

    fn reshaped_fixture() -> ReshapedProfile {
        let profile = Profile {
            bin_width: 5.0,
            bins: vec![
                ProfileBin {
                    representative: 20.0,
                    mass: 0.5,
                    volume: 5,
                },
                ProfileBin {
                    representative: 45.0,
                    mass: 0.5,
                    volume: 5,
                },
            ],
        };
        let mut tally = BinTally::zeros(2);
        tally.positive[0] = 2.0;
        tally.negative[1] = 2.0;
        reshape(&profile, &tally, 4, 1.0).unwrap()
    }

    #[test]
    fn linear_payment_rectifies_by_belief_ratio() {
        let reshaped = reshaped_fixture();
        let ratio = reshaped.bins[0].p_posterior / reshaped.bins[0].p_interim;
        let mut contributions = BTreeMap::new();
        contributions.insert("c1".to_string(), Contribution { quality: 2.0, bin: 0 });
        let payments =
            revise_payments(&LinearPayment, &contributions, &reshaped, false).unwrap();
        assert_abs_diff_eq!(payments[0].pi, 2.0);
        assert_abs_diff_eq!(payments[0].pi_prime, 2.0 * ratio, epsilon = 1e-12);
        assert!(payments[0].pi_budget.is_none());
    }

    #[test]
    fn unchanged_beliefs_leave_payments_intact() {
        let profile = Profile {
            bin_width: 5.0,
            bins: vec![
                ProfileBin {
                    representative: 20.0,
                    mass: 0.5,
                    volume: 5,
                },
                ProfileBin {
                    representative: 45.0,
                    mass: 0.5,
                    volume: 5,
                },
            ],
        };
        let reshaped = reshape(&profile, &BinTally::zeros(2), 0, 1.0).unwrap();
        let mut contributions = BTreeMap::new();
        contributions.insert("a".to_string(), Contribution { quality: 1.5, bin: 0 });
        contributions.insert("b".to_string(), Contribution { quality: 2.5, bin: 1 });
        let payments =
            revise_payments(&LinearPayment, &contributions, &reshaped, false).unwrap();
        for p in payments {
            assert_abs_diff_eq!(p.pi, p.pi_prime);
        }
    }

    #[test]
    fn budget_mode_preserves_total() {
        let reshaped = reshaped_fixture();
        let mut contributions = BTreeMap::new();
        contributions.insert("a".to_string(), Contribution { quality: 1.0, bin: 0 });
        contributions.insert("b".to_string(), Contribution { quality: 2.0, bin: 1 });
        let payments = revise_payments(&LinearPayment, &contributions, &reshaped, true).unwrap();
        let original: f64 = payments.iter().map(|p| p.pi).sum();
        let budgeted: f64 = payments.iter().map(|p| p.pi_budget.unwrap()).sum();
        assert_abs_diff_eq!(original, budgeted, epsilon = 1e-9);
    }

    #[test]
    fn budget_rescale_hand_computed() {
        // pi' = {2, 4} with original total 3 rescales to {1, 2}.
        struct Fixed;
        impl PaymentFunction for Fixed {
            fn payment(&self, index: usize, qualities: &[f64]) -> f64 {
                // Original qualities {1,2} pay {1,2}; rectified pay double.
                qualities[index]
            }
        }
        let profile = Profile {
            bin_width: 5.0,
            bins: vec![
                ProfileBin {
                    representative: 20.0,
                    mass: 0.25,
                    volume: 1,
                },
                ProfileBin {
                    representative: 45.0,
                    mass: 0.75,
                    volume: 3,
                },
            ],
        };
        // Force posterior = 2x interim on both bins via a crafted reshape.
        let reshaped = ReshapedProfile {
            eta: 1.0,
            bins: profile
                .bins
                .iter()
                .map(|b| crate::reshaping::ReshapedBin {
                    representative: b.representative,
                    p_interim: b.mass,
                    p_posterior: b.mass * 2.0,
                    positive: 0.0,
                    negative: 0.0,
                })
                .collect(),
        };
        let mut contributions = BTreeMap::new();
        contributions.insert("a".to_string(), Contribution { quality: 1.0, bin: 0 });
        contributions.insert("b".to_string(), Contribution { quality: 2.0, bin: 1 });
        let payments = revise_payments(&Fixed, &contributions, &reshaped, true).unwrap();
        assert_abs_diff_eq!(payments[0].pi_prime, 2.0);
        assert_abs_diff_eq!(payments[1].pi_prime, 4.0);
        assert_abs_diff_eq!(payments[0].pi_budget.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(payments[1].pi_budget.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn budget_undefined_when_revised_vanish() {
        struct Collapse;
        impl PaymentFunction for Collapse {
            fn payment(&self, index: usize, qualities: &[f64]) -> f64 {
                // Pays only for qualities above a threshold the rectified
                // set cannot reach.
                if qualities[index] > 10.0 {
                    1.0
                } else if qualities[index] > 0.9 {
                    1.0
                } else {
                    0.0
                }
            }
        }
        let reshaped = ReshapedProfile {
            eta: 1.0,
            bins: vec![crate::reshaping::ReshapedBin {
                representative: 20.0,
                p_interim: 0.5,
                p_posterior: 0.1,
                positive: 0.0,
                negative: 5.0,
            }],
        };
        let mut contributions = BTreeMap::new();
        contributions.insert("a".to_string(), Contribution { quality: 1.0, bin: 0 });
        assert!(matches!(
            revise_payments(&Collapse, &contributions, &reshaped, true),
            Err(Error::BudgetUndefined)
        ));
    }

    #[test]
    fn rater_updates_hit_the_registry() {
        let reshaped = reshaped_fixture();
        let params = RegistryParams::default();
        let workers = vec![
            Worker::new("r1", 0.0, &params),
            Worker::new("r2", 0.0, &params),
        ];
        let mut registry = Registry::from_workers(workers, params);
        let ratings = vec![
            Rating {
                rater_id: "r1".into(),
                value_index: 0,
                score: 1,
                received_time: 1.0,
            },
            Rating {
                rater_id: "r2".into(),
                value_index: 1,
                score: 1,
                received_time: 2.0,
            },
        ];
        let updates = update_rater_reputations(&ratings, &reshaped, &mut registry, 1).unwrap();
        assert_eq!(updates.len(), 2);
        // Bin 0 rose, so r1's +1 gains; bin 1 fell, so r2's +1 loses (clamped).
        assert!(updates[0].delta > 0.0);
        assert!(updates[1].delta < 0.0);
        assert_eq!(registry.worker(0).reputation, updates[0].after);
        assert_eq!(registry.worker(1).reputation, 0.0);
    }

    #[test]
    fn payment_key_lookup() {
        assert!(payment_function_by_key("linear").is_ok());
        assert!(payment_function_by_key("tullock").is_err());
    }
}
