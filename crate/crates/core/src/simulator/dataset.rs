//! Synthetic crowd-sensed dataset generation.
//!
//! The dataset is assembled from components: the configured peaks, the
//! optional hidden-truth minority, and noise spread evenly over the bins
//! tiling the noise regions. Component counts are apportioned
//! deterministically (largest remainder), so the profiled masses match the
//! configured shape exactly; only the values within each component are
//! random. The lowest component emits its lower edge as an actual reading,
//! anchoring the histogram grid.

use rand::Rng;

use super::{DatasetSpec, ScenarioSpec};
use crate::profiling::Reading;
use crate::{Error, Result};

/// One value band to fill: readings land in `[lo, lo + span)`.
#[derive(Debug, Clone, Copy)]
struct Component {
    lo: f64,
    span: f64,
    mass: f64,
}

/// Tile the noise regions into bin-width intervals.
pub(super) fn noise_tiles(dataset: &DatasetSpec, bin_width: f64) -> Result<Vec<f64>> {
    let mut tiles = Vec::new();
    for region in &dataset.noise_regions {
        let [lo, hi] = *region;
        if hi <= lo || lo < dataset.range_lo || hi > dataset.range_hi {
            return Err(Error::InvalidScenario(format!(
                "noise region [{lo}, {hi}) outside the value range"
            )));
        }
        let width = hi - lo;
        let count = width / bin_width;
        if (count - count.round()).abs() > 1e-9 {
            return Err(Error::InvalidScenario(format!(
                "noise region [{lo}, {hi}) is not a whole number of bins"
            )));
        }
        for i in 0..count.round() as usize {
            tiles.push(lo + i as f64 * bin_width);
        }
    }
    Ok(tiles)
}

fn components(spec: &ScenarioSpec) -> Result<Vec<Component>> {
    let dataset = &spec.dataset;
    let mut parts: Vec<Component> = dataset
        .peaks
        .iter()
        .chain(dataset.hidden.iter())
        .map(|p| Component {
            lo: p.center,
            span: p.span,
            mass: p.mass,
        })
        .collect();
    let concentrated: f64 = parts.iter().map(|c| c.mass).sum();
    let noise_mass = (1.0 - concentrated).max(0.0);
    if noise_mass > 1e-12 {
        let tiles = noise_tiles(dataset, spec.bin_width)?;
        let per_tile = noise_mass / tiles.len() as f64;
        for lo in tiles {
            parts.push(Component {
                lo,
                span: spec.bin_width,
                mass: per_tile,
            });
        }
    }
    Ok(parts)
}

/// Every component must stay inside a single bin of the grid anchored at
/// the lowest component edge, otherwise peaks would straddle bin borders.
pub(super) fn check_alignment(dataset: &DatasetSpec, bin_width: f64) -> Result<()> {
    let mut lows: Vec<(f64, f64)> = dataset
        .peaks
        .iter()
        .chain(dataset.hidden.iter())
        .map(|p| (p.center, p.span))
        .collect();
    if let Ok(tiles) = noise_tiles(dataset, bin_width) {
        lows.extend(tiles.into_iter().map(|lo| (lo, bin_width)));
    }
    let anchor = lows
        .iter()
        .map(|(lo, _)| *lo)
        .fold(f64::INFINITY, f64::min);
    for (lo, span) in lows {
        let first = ((lo - anchor) / bin_width).floor();
        let last = ((lo + span - anchor) / bin_width - 1e-9).floor();
        if first != last {
            return Err(Error::InvalidScenario(format!(
                "component at {lo} (span {span}) straddles a bin border"
            )));
        }
    }
    Ok(())
}

/// Largest-remainder apportionment of `total` readings across masses.
fn apportion(masses: &[f64], total: u64) -> Vec<u64> {
    let sum: f64 = masses.iter().sum();
    let mut counts: Vec<u64> = Vec::with_capacity(masses.len());
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(masses.len());
    let mut assigned = 0u64;
    for (i, &mass) in masses.iter().enumerate() {
        let exact = mass / sum * total as f64;
        let floor = exact.floor() as u64;
        counts.push(floor);
        assigned += floor;
        remainders.push((i, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut leftover = total - assigned;
    for (i, _) in remainders {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Generate the contributors' readings for a scenario.
///
/// Contributor `i` (id `w00000`-style) supplies the `i`-th reading. For a
/// hidden-truth scenario the minority mass must stay below every peak
/// mass, or the scenario is mislabeled.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<Vec<Reading>> {
    spec.validate()?;
    if let Some(hidden) = &spec.dataset.hidden {
        let weakest_peak = spec
            .dataset
            .peaks
            .iter()
            .map(|p| p.mass)
            .fold(f64::INFINITY, f64::min);
        if hidden.mass >= weakest_peak {
            return Err(Error::InvalidScenario(format!(
                "hidden mass {} is not below the weakest peak {}",
                hidden.mass, weakest_peak
            )));
        }
    }

    let parts = components(spec)?;
    let masses: Vec<f64> = parts.iter().map(|c| c.mass).collect();
    let counts = apportion(&masses, spec.contributors);
    let anchor = parts
        .iter()
        .map(|c| c.lo)
        .fold(f64::INFINITY, f64::min);

    let mut values = Vec::with_capacity(spec.contributors as usize);
    let mut anchored = false;
    for (component, count) in parts.iter().zip(counts) {
        for i in 0..count {
            // The very first reading of the lowest component sits exactly
            // on its edge, pinning the histogram grid.
            if i == 0 && !anchored && component.lo == anchor {
                values.push(component.lo);
                anchored = true;
            } else {
                values.push(component.lo + rng.random::<f64>() * component.span);
            }
        }
    }

    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, value)| Reading::new(format!("w{i:05}"), value))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiling::build_profile;
    use crate::simulator::{seeded_rng, PeakSpec, ScenarioCase, ScenarioSpec};

    #[test]
    fn apportionment_is_exact_and_deterministic() {
        let counts = apportion(&[0.14, 0.125, 0.735], 1000);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts, apportion(&[0.14, 0.125, 0.735], 1000));
        assert_eq!(counts[0], 140);
        assert_eq!(counts[1], 125);
    }

    #[test]
    fn case_a_two_largest_masses_at_the_peaks() {
        let mut spec = ScenarioSpec::case_a(1);
        // Construction check with explicit peak masses.
        spec.dataset.peaks[0].mass = 0.25;
        spec.dataset.peaks[1].mass = 0.22;
        let readings = generate_dataset(&spec, &mut seeded_rng(11)).unwrap();
        assert_eq!(readings.len(), 1000);
        let profile = build_profile(&readings, spec.bin_width).unwrap();
        let mut by_mass: Vec<(f64, f64)> = profile
            .bins
            .iter()
            .map(|b| (b.mass, b.representative))
            .collect();
        by_mass.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top_two = [by_mass[0].1, by_mass[1].1];
        assert!(top_two.iter().any(|v| (45.0..50.0).contains(v)));
        assert!(top_two.iter().any(|v| (70.0..75.0).contains(v)));
    }

    #[test]
    fn case_b_hidden_bin_carries_its_fraction() {
        let spec = ScenarioSpec::case_b(2);
        let readings = generate_dataset(&spec, &mut seeded_rng(7)).unwrap();
        let profile = build_profile(&readings, spec.bin_width).unwrap();
        let hidden = profile.nearest_bin(20.0).unwrap();
        let mass = profile.bins[hidden].mass;
        assert!((mass - 0.03).abs() < 0.01, "hidden mass {mass}");
        // The hidden bin stays below every peak mass.
        let p45 = profile.bins[profile.nearest_bin(45.0).unwrap()].mass;
        let p72 = profile.bins[profile.nearest_bin(72.0).unwrap()].mass;
        assert!(mass < p45 && mass < p72);
    }

    #[test]
    fn zero_noise_single_peak_is_a_point_mass() {
        let mut spec = ScenarioSpec::case_a(3);
        spec.dataset.peaks = vec![PeakSpec {
            center: 45.0,
            mass: 1.0,
            span: 0.45,
        }];
        spec.dataset.noise_regions.clear();
        spec.case = ScenarioCase::A;
        let readings = generate_dataset(&spec, &mut seeded_rng(5)).unwrap();
        let profile = build_profile(&readings, spec.bin_width).unwrap();
        assert_eq!(profile.len(), 1);
        assert_eq!(profile.bins[0].mass, 1.0);
    }

    #[test]
    fn values_stay_in_range_and_anchor_is_pinned() {
        for spec in [ScenarioSpec::case_a(4), ScenarioSpec::case_b(4)] {
            let readings = generate_dataset(&spec, &mut seeded_rng(9)).unwrap();
            let lo = readings.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
            let hi = readings
                .iter()
                .map(|r| r.value)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(lo >= spec.dataset.range_lo && hi <= spec.dataset.range_hi);
            // The minimum sits exactly on a component edge.
            assert_eq!(lo, lo.round());
        }
    }

    #[test]
    fn inflated_masses_rejected() {
        let mut spec = ScenarioSpec::case_a(5);
        spec.dataset.peaks[0].mass = 0.9;
        spec.dataset.peaks[1].mass = 0.3;
        assert!(generate_dataset(&spec, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn mislabeled_hidden_truth_rejected() {
        let mut spec = ScenarioSpec::case_b(6);
        spec.dataset.hidden.as_mut().unwrap().mass = 0.2;
        assert!(matches!(
            generate_dataset(&spec, &mut seeded_rng(1)),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn misaligned_component_rejected() {
        let mut spec = ScenarioSpec::case_a(7);
        // 49.8 + span 0.45 straddles the 50 edge of the grid anchored at 15.
        spec.dataset.peaks[0].center = 49.8;
        assert!(matches!(
            spec.validate(),
            Err(Error::InvalidScenario(_))
        ));
    }
}
