//! Seeded synthetic detection streams.
//!
//! A [`Scenario`] says when each checklist item is put on (donning) or taken
//! off (doffing); a [`NoiseModel`] says how reliably the detector sees worn
//! items and how often it hallucinates absent ones. [`generate`] is a pure
//! function of `(scenario, noise, seed)`.
//!
//! An item scheduled at `start_frame` changes state during that frame: it is
//! visible from `start_frame + 1` (donning) or invisible from
//! `start_frame + 1` (doffing).
//!
//! In doffing, steps missing from the schedule keep their first alternative
//! on for the whole stream, so the baseline still forms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::engine::{EndReason, Monitor};
use crate::error::{Error, Result};
use crate::types::{
    Alert, AlertKind, BBox, ClassThresholds, FrameBatch, Mode, Outcome, PpeClass, SequenceSpec,
    Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassNoise {
    /// Probability a worn item yields a detection in a frame.
    pub hit_rate: f64,
    /// Probability an item that is not worn yields a detection.
    pub false_positive_rate: f64,
    pub conf_mean_worn: f64,
    pub conf_mean_absent: f64,
    pub conf_stddev: f64,
}

impl ClassNoise {
    pub const NOISE_FREE: ClassNoise = ClassNoise {
        hit_rate: 1.0,
        false_positive_rate: 0.0,
        conf_mean_worn: 1.0,
        conf_mean_absent: 0.0,
        conf_stddev: 0.0,
    };

    fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.hit_rate) && unit(self.false_positive_rate)) {
            return Err(Error::InvalidNoise("rates must lie in [0,1]".into()));
        }
        if !(unit(self.conf_mean_worn) && unit(self.conf_mean_absent)) {
            return Err(Error::InvalidNoise("confidence means must lie in [0,1]".into()));
        }
        if !(self.conf_stddev >= 0.0 && self.conf_stddev.is_finite()) {
            return Err(Error::InvalidNoise("conf_stddev must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    per_class: [ClassNoise; PpeClass::COUNT],
}

impl NoiseModel {
    pub fn noise_free() -> Self {
        NoiseModel {
            per_class: [ClassNoise::NOISE_FREE; PpeClass::COUNT],
        }
    }

    pub fn uniform(n: ClassNoise) -> Result<Self> {
        n.validate()?;
        Ok(NoiseModel {
            per_class: [n; PpeClass::COUNT],
        })
    }

    pub fn with(mut self, class: PpeClass, n: ClassNoise) -> Result<Self> {
        n.validate()?;
        self.per_class[class.index()] = n;
        Ok(self)
    }

    pub fn get(&self, class: PpeClass) -> &ClassNoise {
        &self.per_class[class.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleEntry {
    pub step_index: usize,
    pub class: PpeClass,
    pub start_frame: u64,
}

/// What the scenario's schedule should produce, independent of detector
/// noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedOutcome {
    Compliant,
    NonCompliant,
    Incomplete,
}

impl ExpectedOutcome {
    pub fn matches(&self, outcome: &Outcome) -> bool {
        matches!(
            (self, outcome),
            (ExpectedOutcome::Compliant, Outcome::Compliant)
                | (ExpectedOutcome::NonCompliant, Outcome::NonCompliant { .. })
                | (ExpectedOutcome::Incomplete, Outcome::Incomplete { .. })
        )
    }
}

pub const DEFAULT_WARMUP_FRAMES: u64 = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: SequenceSpec,
    pub schedule: Vec<ScheduleEntry>,
    pub total_frames: u64,
    pub fps: f64,
    /// Swap entries `i` and `i + 1` (their items, not their start frames).
    pub injected_violation: Option<usize>,
    /// Frames needed after the last event (and, for doffing, before the
    /// first) for the accumulator to react.
    pub warmup_frames: u64,
}

impl Scenario {
    /// Every step in checklist order, first alternative of each, one event
    /// every `spacing` frames.
    pub fn compliant(spec: SequenceSpec, spacing: u64, fps: f64) -> Self {
        let order: Vec<(usize, PpeClass)> = spec
            .steps()
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.alternatives[0]))
            .collect();
        Self::ordered(spec, &order, spacing, fps)
    }

    /// Events in the given `(step, class)` order, `spacing` frames apart.
    pub fn ordered(spec: SequenceSpec, order: &[(usize, PpeClass)], spacing: u64, fps: f64) -> Self {
        let first = match spec.mode() {
            Mode::Donning => spacing,
            Mode::Doffing => spacing.max(DEFAULT_WARMUP_FRAMES),
        };
        let schedule: Vec<ScheduleEntry> = order
            .iter()
            .enumerate()
            .map(|(k, &(step_index, class))| ScheduleEntry {
                step_index,
                class,
                start_frame: first + spacing * k as u64,
            })
            .collect();
        let last = schedule.last().map_or(0, |e| e.start_frame);
        Scenario {
            spec,
            schedule,
            total_frames: last + spacing.max(DEFAULT_WARMUP_FRAMES),
            fps,
            injected_violation: None,
            warmup_frames: DEFAULT_WARMUP_FRAMES,
        }
    }

    pub fn with_swap(mut self, i: usize) -> Self {
        self.injected_violation = Some(i);
        self
    }

    pub fn mode(&self) -> Mode {
        self.spec.mode()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidScenario(m));
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return fail(format!("fps must be positive, got {}", self.fps));
        }
        let mut seen = vec![false; self.spec.len()];
        for (k, e) in self.schedule.iter().enumerate() {
            let Some(step) = self.spec.steps().get(e.step_index) else {
                return fail(format!("entry {k} names missing step {}", e.step_index));
            };
            if !step.accepts(e.class) {
                return fail(format!("entry {k}: {} is not part of step {:?}", e.class, step.label));
            }
            if std::mem::replace(&mut seen[e.step_index], true) {
                return fail(format!("step {} scheduled twice", e.step_index));
            }
            if k > 0 && e.start_frame <= self.schedule[k - 1].start_frame {
                return fail(format!("start frames not strictly increasing at entry {k}"));
            }
        }
        if let Some(first) = self.schedule.first() {
            if self.mode() == Mode::Doffing && first.start_frame < self.warmup_frames {
                return fail(format!(
                    "first removal at frame {} leaves no {}-frame baseline",
                    first.start_frame, self.warmup_frames
                ));
            }
        }
        let last = self.schedule.last().map_or(0, |e| e.start_frame);
        if self.total_frames < last + self.warmup_frames {
            return fail(format!(
                "total_frames {} < last event {} + warm-up {}",
                self.total_frames, last, self.warmup_frames
            ));
        }
        if let Some(i) = self.injected_violation {
            if i + 1 >= self.schedule.len() {
                return fail(format!("cannot swap entries {i} and {}", i + 1));
            }
        }
        Ok(())
    }

    /// The schedule actually performed, with any injected swap applied.
    pub fn effective_schedule(&self) -> Vec<ScheduleEntry> {
        let mut s = self.schedule.clone();
        if let Some(i) = self.injected_violation {
            if i + 1 < s.len() {
                let (a, b) = (s[i], s[i + 1]);
                s[i] = ScheduleEntry { start_frame: a.start_frame, ..b };
                s[i + 1] = ScheduleEntry { start_frame: b.start_frame, ..a };
            }
        }
        s
    }

    pub fn expected_outcome(&self) -> ExpectedOutcome {
        let mut done = vec![false; self.spec.len()];
        let mut violated = false;
        for e in self.effective_schedule() {
            violated |= done[..e.step_index].iter().any(|d| !d);
            done[e.step_index] = true;
        }
        if violated {
            ExpectedOutcome::NonCompliant
        } else if done.iter().all(|d| *d) {
            ExpectedOutcome::Compliant
        } else {
            ExpectedOutcome::Incomplete
        }
    }
}

fn class_bbox(class: PpeClass) -> BBox {
    match class {
        PpeClass::Coverall => BBox::new(0.5, 0.55, 0.45, 0.8),
        PpeClass::FaceShield => BBox::new(0.5, 0.15, 0.18, 0.16),
        PpeClass::Gloves => BBox::new(0.35, 0.6, 0.08, 0.1),
        PpeClass::Goggles => BBox::new(0.5, 0.13, 0.12, 0.05),
        PpeClass::Mask => BBox::new(0.5, 0.2, 0.1, 0.07),
    }
}

pub fn frame_timestamp_ms(frame: u64, fps: f64) -> u64 {
    (frame as f64 * 1000.0 / fps).round() as u64
}

/// Generate the frame stream for a scenario.
pub fn generate(scenario: &Scenario, noise: &NoiseModel, seed: u64) -> Result<Vec<FrameBatch>> {
    scenario.validate()?;
    let schedule = scenario.effective_schedule();
    // Frame range during which each class is worn: [on, off).
    let mut worn: [Option<(u64, u64)>; PpeClass::COUNT] = [None; PpeClass::COUNT];
    for e in &schedule {
        worn[e.class.index()] = Some(match scenario.mode() {
            Mode::Donning => (e.start_frame + 1, u64::MAX),
            Mode::Doffing => (0, e.start_frame + 1),
        });
    }
    if scenario.mode() == Mode::Doffing {
        for (i, step) in scenario.spec.steps().iter().enumerate() {
            if !schedule.iter().any(|e| e.step_index == i) {
                worn[step.alternatives[0].index()] = Some((0, u64::MAX));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(scenario.total_frames as usize);
    for frame in 0..scenario.total_frames {
        let mut batch = FrameBatch::empty(frame, frame_timestamp_ms(frame, scenario.fps));
        for class in PpeClass::ALL {
            let n = noise.get(class);
            let is_worn = worn[class.index()].is_some_and(|(on, off)| (on..off).contains(&frame));
            let (p, mean) = if is_worn {
                (n.hit_rate, n.conf_mean_worn)
            } else {
                (n.false_positive_rate, n.conf_mean_absent)
            };
            let roll: f64 = rng.random();
            let z: f64 = rng.sample(StandardNormal);
            if roll < p {
                let conf = (mean + n.conf_stddev * z).clamp(0.0, 1.0);
                batch.push(class, conf, class_bbox(class))?;
            }
        }
        out.push(batch);
    }
    Ok(out)
}

/// A generated stream run through a fresh [`Monitor`].
#[derive(Debug, Clone)]
pub struct SimRun {
    pub batches: Vec<FrameBatch>,
    pub alerts: Vec<Alert>,
    pub verdict: Verdict,
}

pub fn run_monitor(spec: &SequenceSpec, thresholds: ClassThresholds, batches: &[FrameBatch]) -> Result<(Vec<Alert>, Verdict)> {
    let mut monitor = Monitor::new(spec.clone(), thresholds)?;
    let mut alerts = Vec::new();
    for b in batches {
        alerts.extend(monitor.process(b)?);
    }
    let (tail, verdict) = monitor.finish(EndReason::EndOfStream);
    alerts.extend(tail);
    Ok((alerts, verdict))
}

pub fn simulate(
    scenario: &Scenario,
    noise: &NoiseModel,
    seed: u64,
    thresholds: ClassThresholds,
) -> Result<SimRun> {
    let batches = generate(scenario, noise, seed)?;
    let (alerts, verdict) = run_monitor(&scenario.spec, thresholds, &batches)?;
    Ok(SimRun {
        batches,
        alerts,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub noise_index: usize,
    pub runs: usize,
    pub correct: usize,
    pub correct_fraction: f64,
    /// Mean frames from a schedule event to its `StepCompleted` alert.
    pub mean_latency_frames: Option<f64>,
}

/// Run every seed at every noise point and score verdicts against the
/// scenario's ground truth.
pub fn sweep(
    scenario: &Scenario,
    noise_grid: &[NoiseModel],
    seeds: &[u64],
    thresholds: ClassThresholds,
) -> Result<Vec<SweepRow>> {
    if noise_grid.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidScenario("sweep needs at least one noise point and seed".into()));
    }
    let expected = scenario.expected_outcome();
    let starts: Vec<Option<u64>> = {
        let mut v = vec![None; scenario.spec.len()];
        for e in scenario.effective_schedule() {
            v[e.step_index] = Some(e.start_frame);
        }
        v
    };

    noise_grid
        .iter()
        .enumerate()
        .map(|(noise_index, noise)| {
            let mut correct = 0;
            let (mut lat_sum, mut lat_n) = (0u64, 0u64);
            for &seed in seeds {
                let run = simulate(scenario, noise, seed, thresholds)?;
                if expected.matches(&run.verdict.outcome) {
                    correct += 1;
                }
                for a in &run.alerts {
                    if let AlertKind::StepCompleted { step_index, .. } = a.kind {
                        if let Some(start) = starts[step_index].filter(|s| a.frame_index >= *s) {
                            lat_sum += a.frame_index - start;
                            lat_n += 1;
                        }
                    }
                }
            }
            Ok(SweepRow {
                noise_index,
                runs: seeds.len(),
                correct,
                correct_fraction: correct as f64 / seeds.len() as f64,
                mean_latency_frames: (lat_n > 0).then(|| lat_sum as f64 / lat_n as f64),
            })
        })
        .collect()
}
