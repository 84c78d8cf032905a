//! Run the built-in scenarios across seeds and print per-strategy medians
//! of the posterior/interim ratio at the truth bin and at the false peaks.
//!
//!     cargo run --release --example strategy_sweep [seeds]

use crowdval::sampling::SamplingStrategy;
use crowdval::simulator::{run_scenario, ScenarioSpec};

fn median(values: &mut Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn sweep(label: &str, make: impl Fn(u64) -> ScenarioSpec, seeds: u64) {
    println!("== {label} over {seeds} seeds ==");
    let mut truth: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut peaks: Vec<Vec<Vec<f64>>> = vec![Vec::new(); 4];
    let mut effective: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut failures = 0u64;
    let started = std::time::Instant::now();
    for seed in 0..seeds {
        let report = run_scenario(&make(seed)).expect("scenario runs");
        for (i, outcome) in report.outcomes.iter().enumerate() {
            truth[i].push(outcome.ratio_at_truth);
            effective[i].push(outcome.effective as f64);
            if peaks[i].is_empty() {
                peaks[i] = vec![Vec::new(); outcome.false_peak_ratios.len()];
            }
            for (j, &(_, ratio)) in outcome.false_peak_ratios.iter().enumerate() {
                peaks[i][j].push(ratio);
            }
            if !outcome.success {
                failures += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    for (i, strategy) in SamplingStrategy::ALL.iter().enumerate() {
        let t = median(&mut truth[i]);
        let e = median(&mut effective[i]);
        let fp: Vec<String> = peaks[i]
            .iter_mut()
            .map(|v| format!("{:.3}", median(v)))
            .collect();
        println!(
            "{strategy:>13}: truth ratio {t:.3}  false peaks [{}]  effective {e:.0}",
            fp.join(", ")
        );
    }
    println!("failures: {failures}, elapsed: {elapsed:.2?}\n");
}

fn main() {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    sweep("Case A (obscure truth at 45)", ScenarioSpec::case_a, seeds);
    sweep("Case B (hidden truth at 20)", ScenarioSpec::case_b, seeds);
}
