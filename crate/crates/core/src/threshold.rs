//! Per-class threshold gating.
//!
//! A class counts as worn once it has at least `th_frequency` qualifying
//! frames (some detection with confidence >= `th_confidence`) among the last
//! `window_frames` frames. Several boxes of one class in a frame are one hit.
//! Frames missing from the input count as frames without hits.
//!
//! In doffing mode a worn class is declared removed after
//! `removal_window_frames` consecutive frames without a qualifying hit. The
//! class's window is cleared at that point so stale hits cannot re-arm it.

use crate::error::{Error, Result};
use crate::types::{ClassThresholds, FrameBatch, Mode, PpeClass};

/// Linear-clamp mapping from a class's average precision to its confidence
/// threshold: `clamp(alpha * ap, floor, ceil)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdPolicy {
    pub alpha: f64,
    pub floor: f64,
    pub ceil: f64,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            alpha: 0.5,
            floor: 0.25,
            ceil: 0.9,
        }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidPolicy(format!("alpha {} must be > 0", self.alpha)));
        }
        if !(self.floor > 0.0 && self.floor <= self.ceil && self.ceil <= 1.0) {
            return Err(Error::InvalidPolicy(format!(
                "need 0 < floor <= ceil <= 1, got floor {} ceil {}",
                self.floor, self.ceil
            )));
        }
        Ok(())
    }
}

pub fn derive_confidence_threshold(ap: f64, policy: &ThresholdPolicy) -> Result<f64> {
    policy.validate()?;
    if !(0.0..=1.0).contains(&ap) {
        return Err(Error::InvalidPolicy(format!("average precision {ap} outside [0,1]")));
    }
    Ok((policy.alpha * ap).clamp(policy.floor, policy.ceil))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    BecameSatisfied,
    BecameAbsent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub class: PpeClass,
    pub kind: TransitionKind,
    pub frame_index: u64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone)]
struct ClassState {
    ring: Vec<bool>,
    pos: usize,
    hits: u32,
    absent_run: u64,
    satisfied: bool,
    satisfied_at: Option<(u64, u64)>,
}

impl ClassState {
    fn new(window: u32) -> Self {
        ClassState {
            ring: vec![false; window as usize],
            pos: 0,
            hits: 0,
            absent_run: 0,
            satisfied: false,
            satisfied_at: None,
        }
    }

    fn clear_window(&mut self) {
        self.ring.iter_mut().for_each(|slot| *slot = false);
        self.hits = 0;
    }

    fn push(&mut self, hit: bool) {
        let slot = &mut self.ring[self.pos];
        if *slot {
            self.hits -= 1;
        }
        *slot = hit;
        if hit {
            self.hits += 1;
        }
        self.pos = (self.pos + 1) % self.ring.len();
    }

    fn skip_empty(&mut self, frames: u64) {
        if frames == 0 {
            return;
        }
        if frames >= self.ring.len() as u64 {
            self.clear_window();
        } else {
            for _ in 0..frames {
                self.push(false);
            }
        }
        self.absent_run += frames;
    }
}

/// Sliding-window accumulators for all five classes.
///
/// Single writer: `observe` and `reset` must be called from one context.
#[derive(Debug, Clone)]
pub struct Accumulator {
    thresholds: ClassThresholds,
    mode: Mode,
    classes: [ClassState; PpeClass::COUNT],
    last_frame: Option<u64>,
}

impl Accumulator {
    pub fn new(thresholds: ClassThresholds, mode: Mode) -> Self {
        let classes = PpeClass::ALL.map(|c| ClassState::new(thresholds.get(c).window_frames));
        Accumulator {
            thresholds,
            mode,
            classes,
            last_frame: None,
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn thresholds(&self) -> &ClassThresholds {
        &self.thresholds
    }

    pub fn last_frame(&self) -> Option<u64> {
        self.last_frame
    }

    /// Feed one frame. Returned transitions are in `PpeClass::ALL` order.
    pub fn observe(&mut self, batch: &FrameBatch) -> Result<Vec<Transition>> {
        let mut out = Vec::new();
        self.observe_into(batch, &mut out)?;
        Ok(out)
    }

    /// Like [`observe`](Self::observe) but appends into a caller-owned buffer.
    pub fn observe_into(&mut self, batch: &FrameBatch, out: &mut Vec<Transition>) -> Result<()> {
        let frame = batch.frame_index;
        let gap = match self.last_frame {
            Some(last) if frame <= last => {
                return Err(Error::NonMonotonicFrame { last, got: frame });
            }
            Some(last) => frame - last - 1,
            None => 0,
        };
        self.last_frame = Some(frame);

        let mut hit = [false; PpeClass::COUNT];
        for d in batch.detections() {
            if d.confidence >= self.thresholds.get(d.class).th_confidence {
                hit[d.class.index()] = true;
            }
        }

        for class in PpeClass::ALL {
            let th = self.thresholds.get(class);
            let state = &mut self.classes[class.index()];
            let hit = hit[class.index()];

            state.skip_empty(gap);
            state.push(hit);

            if !state.satisfied && state.hits >= th.th_frequency {
                state.satisfied = true;
                state.satisfied_at = Some((frame, batch.timestamp_ms));
                out.push(Transition {
                    class,
                    kind: TransitionKind::BecameSatisfied,
                    frame_index: frame,
                    timestamp_ms: batch.timestamp_ms,
                });
            }

            if hit {
                state.absent_run = 0;
            } else {
                state.absent_run += 1;
            }

            if self.mode == Mode::Doffing
                && state.satisfied
                && state.absent_run >= u64::from(th.removal_window_frames)
            {
                state.satisfied = false;
                state.satisfied_at = None;
                state.clear_window();
                out.push(Transition {
                    class,
                    kind: TransitionKind::BecameAbsent,
                    frame_index: frame,
                    timestamp_ms: batch.timestamp_ms,
                });
            }
        }
        Ok(())
    }

    pub fn is_satisfied(&self, class: PpeClass) -> bool {
        self.classes[class.index()].satisfied
    }

    /// Frame and timestamp at which the class last became satisfied.
    pub fn satisfied_at(&self, class: PpeClass) -> Option<(u64, u64)> {
        self.classes[class.index()].satisfied_at
    }

    /// Qualifying frames currently inside the class's window.
    pub fn hit_count(&self, class: PpeClass) -> u32 {
        self.classes[class.index()].hits
    }

    pub fn consecutive_absent_frames(&self, class: PpeClass) -> u64 {
        self.classes[class.index()].absent_run
    }

    /// Return one class to its initial state.
    pub fn reset(&mut self, class: PpeClass) {
        self.classes[class.index()] = ClassState::new(self.thresholds.get(class).window_frames);
    }

    /// Return every class to its initial state and forget the last frame.
    pub fn reset_all(&mut self) {
        for class in PpeClass::ALL {
            self.reset(class);
        }
        self.last_frame = None;
    }
}
