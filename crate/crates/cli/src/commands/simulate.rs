use std::io::{self, Write};
use std::time::{Duration, Instant};

use ppe_core::sim::{self, ClassNoise, NoiseModel, Scenario};
use ppe_core::{ClassThresholds, EndReason, SequenceSpec};

use crate::error::{CliError, CliResult};
use crate::metrics::Metrics;
use crate::pipeline::Pipeline;

/// Hit rates swept by `simulate --sweep`; the other noise parameters come
/// from the flags.
pub const SWEEP_HIT_RATES: [f64; 7] = [1.0, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5];

/// Compliant schedule with an optional adjacent swap of schedule entries
/// `a` and `b` (0-based, `b = a + 1`).
pub fn build_scenario(spec: &SequenceSpec, spacing: u64, fps: f64, swap: Option<(usize, usize)>) -> CliResult<Scenario> {
    let mut scenario = Scenario::compliant(spec.clone(), spacing, fps);
    if let Some((a, b)) = swap {
        if b != a + 1 {
            return Err(CliError::Config(format!("--inject-swap needs adjacent entries, got {a} {b}")));
        }
        scenario = scenario.with_swap(a);
    }
    scenario.validate().map_err(CliError::config)?;
    Ok(scenario)
}

pub fn print_sweep(
    out: &mut dyn Write,
    scenario: &Scenario,
    base: ClassNoise,
    seeds: u64,
    thresholds: ClassThresholds,
) -> CliResult<()> {
    let grid = SWEEP_HIT_RATES
        .iter()
        .map(|&hit_rate| NoiseModel::uniform(ClassNoise { hit_rate, ..base }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::config)?;
    let seeds: Vec<u64> = (0..seeds.max(1)).collect();
    let rows = sim::sweep(scenario, &grid, &seeds, thresholds).map_err(CliError::config)?;
    let w = |e: io::Error| CliError::Parse(e.to_string());
    writeln!(out, "expected: {:?}", scenario.expected_outcome()).map_err(w)?;
    writeln!(out, "{:>8} {:>6} {:>8} {:>9} {:>14}", "hit_rate", "runs", "correct", "fraction", "latency_frames").map_err(w)?;
    for row in rows {
        let latency = row
            .mean_latency_frames
            .map_or_else(|| "-".to_string(), |l| format!("{l:.1}"));
        writeln!(
            out,
            "{:>8.2} {:>6} {:>8} {:>9.3} {:>14}",
            SWEEP_HIT_RATES[row.noise_index], row.runs, row.correct, row.correct_fraction, latency
        )
        .map_err(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub sessions: usize,
    pub batches: u64,
    pub detections: u64,
    pub elapsed: Duration,
    pub p50: Duration,
    pub p99: Duration,
}

impl BenchReport {
    pub fn detections_per_sec(&self) -> f64 {
        self.detections as f64 / self.elapsed.as_secs_f64().max(1e-9)
    }
}

/// Noise used by the bench: a busy, imperfect detector.
pub fn bench_noise() -> NoiseModel {
    NoiseModel::uniform(ClassNoise {
        hit_rate: 0.95,
        false_positive_rate: 0.3,
        conf_mean_worn: 0.8,
        conf_mean_absent: 0.3,
        conf_stddev: 0.15,
    })
    .expect("valid bench noise")
}

/// Feed `sessions` pre-generated streams through one engine context,
/// starting a new session whenever the previous one finishes.
pub fn run_bench(spec: &SequenceSpec, thresholds: ClassThresholds, sessions: usize, seed: u64) -> CliResult<BenchReport> {
    let scenario = Scenario::compliant(spec.clone(), 60, 30.0);
    let noise = bench_noise();
    let streams = (0..sessions.max(1) as u64)
        .map(|i| sim::generate(&scenario, &noise, seed.wrapping_add(i)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::config)?;

    let mut pipeline = Pipeline::new(spec.clone(), thresholds, None, Vec::new());
    let mut metrics = Metrics::default();
    let start = Instant::now();
    for stream in &streams {
        for batch in stream {
            let t0 = Instant::now();
            let n = pipeline.process(batch).len();
            metrics.record_batch(batch.len(), n, t0.elapsed());
            if pipeline.is_finished() {
                pipeline.finish(EndReason::EndOfStream);
            }
        }
        pipeline.finish(EndReason::EndOfStream);
    }
    let elapsed = start.elapsed();
    Ok(BenchReport {
        sessions: streams.len(),
        batches: metrics.batches,
        detections: metrics.detections,
        elapsed,
        p50: metrics.percentile(0.5).unwrap_or_default(),
        p99: metrics.percentile(0.99).unwrap_or_default(),
    })
}
