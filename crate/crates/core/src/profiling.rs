//! Histogram profiling of raw crowd-sensed readings.
//!
//! A profile condenses the dataset into per-bin representative values
//! (bin medians) and normalized probability masses, the interim belief
//! over where the ground truth lies. Bins are anchored at the data
//! minimum with half-open intervals `[lo, lo + width)`; empty bins are
//! omitted.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One raw sensed data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub contributor_id: String,
    pub value: f64,
}

impl Reading {
    pub fn new(contributor_id: impl Into<String>, value: f64) -> Self {
        Self {
            contributor_id: contributor_id.into(),
            value,
        }
    }
}

/// A non-empty histogram bin: representative value, probability mass,
/// and the raw count it was normalized from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    #[serde(rename = "v")]
    pub representative: f64,
    #[serde(rename = "p")]
    pub mass: f64,
    #[serde(rename = "kappa")]
    pub volume: u64,
}

/// The profile of a crowd-sensed dataset: representatives and interim beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub bin_width: f64,
    pub bins: Vec<ProfileBin>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Total number of readings behind the profile.
    pub fn total_volume(&self) -> u64 {
        self.bins.iter().map(|b| b.volume).sum()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b.mass).collect()
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

    /// Sanity checks for profiles loaded from files.
    pub fn validate(&self) -> Result<()> {
        if self.bins.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::InvalidBinWidth(self.bin_width));
        }
        let total: f64 = self.bins.iter().map(|b| b.mass).sum();
        if (total - 1.0).abs() > 1e-9 || self.bins.iter().any(|b| b.mass <= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "profile masses must be positive and sum to 1 (sum = {total})"
            )));
        }
        Ok(())
    }
}

/// Build the profile of `readings` with the given bin width.
///
/// Representatives are per-bin medians (lower-middle element for even
/// counts, so the representative is always an observed value); masses are
/// bin counts normalized by the total.
pub fn build_profile(readings: &[Reading], bin_width: f64) -> Result<Profile> {
    build_profile_indexed(readings, bin_width).map(|(p, _)| p)
}

/// Like [`build_profile`], additionally returning each contributor's bin
/// index (first reading wins), which payment revision later looks up.
pub fn build_profile_indexed(
    readings: &[Reading],
    bin_width: f64,
) -> Result<(Profile, BTreeMap<String, usize>)> {
    if readings.is_empty() {
        return Err(Error::NoData);
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::InvalidBinWidth(bin_width));
    }
    for (index, r) in readings.iter().enumerate() {
        if !r.value.is_finite() {
            return Err(Error::NonFiniteReading {
                index,
                contributor: r.contributor_id.clone(),
                value: r.value,
            });
        }
    }

    let anchor = readings
        .iter()
        .map(|r| r.value)
        .fold(f64::INFINITY, f64::min);

    // Bucket values by bin index relative to the anchor.
    let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut contributor_key: BTreeMap<String, i64> = BTreeMap::new();
    for r in readings {
        let idx = ((r.value - anchor) / bin_width).floor() as i64;
        buckets.entry(idx).or_default().push(r.value);
        contributor_key
            .entry(r.contributor_id.clone())
            .or_insert(idx);
    }

    let total: u64 = readings.len() as u64;
    let mut bins = Vec::with_capacity(buckets.len());
    let mut position: BTreeMap<i64, usize> = BTreeMap::new();
    for (key, values) in &mut buckets {
        values.sort_by(f64::total_cmp);
        let median = values[(values.len() - 1) / 2];
        position.insert(*key, bins.len());
        bins.push(ProfileBin {
            representative: median,
            mass: values.len() as f64 / total as f64,
            volume: values.len() as u64,
        });
    }

    let contributor_bins = contributor_key
        .into_iter()
        .map(|(id, key)| (id, position[&key]))
        .collect();

    Ok((Profile { bin_width, bins }, contributor_bins))
}

/// Read readings from CSV with header `contributor_id,value`.
pub fn read_readings_csv<R: BufRead>(reader: R) -> Result<Vec<Reading>> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut readings = Vec::new();
    for record in csv.deserialize() {
        let reading: Reading = record?;
        readings.push(reading);
    }
    Ok(readings)
}

pub fn read_readings_file(path: &Path) -> Result<Vec<Reading>> {
    let file = std::fs::File::open(path)?;
    read_readings_csv(std::io::BufReader::new(file))
}

/// Write the profile as CSV `v,p,kappa`.
pub fn write_profile_csv<W: Write>(profile: &Profile, mut w: W) -> Result<()> {
    writeln!(w, "v,p,kappa")?;
    for bin in &profile.bins {
        writeln!(w, "{},{},{}", bin.representative, bin.mass, bin.volume)?;
    }
    Ok(())
}
