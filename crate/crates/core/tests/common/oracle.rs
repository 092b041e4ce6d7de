//! Brute-force reference for the threshold accumulator.
//!
//! Recomputes every quantity from the full frame history at each frame,
//! with no incremental state beyond the satisfaction flag itself.

#![allow(dead_code)]

use ppe_core::{BBox, ClassThreshold, ClassThresholds, FrameBatch, PpeClass};
use rand::Rng;

pub fn random_thresholds<R: Rng>(rng: &mut R, max_window: u32) -> ClassThresholds {
    ClassThresholds::from_fn(|_| {
        let window_frames = rng.random_range(1..=max_window);
        ClassThreshold {
            th_confidence: rng.random_range(0.05..=1.0),
            th_frequency: rng.random_range(1..=window_frames),
            window_frames,
            removal_window_frames: rng.random_range(1..=2 * max_window),
        }
    })
    .unwrap()
}

/// Random stream with occasional frame gaps and duplicate boxes. Presence
/// of each class drifts in runs so that satisfaction and removal both occur.
pub fn random_stream<R: Rng>(rng: &mut R, frames: usize) -> Vec<FrameBatch> {
    let mut out = Vec::with_capacity(frames);
    let mut frame: u64 = rng.random_range(0..5);
    let mut present = [false; PpeClass::COUNT];
    for _ in 0..frames {
        for p in present.iter_mut() {
            if rng.random_bool(0.02) {
                *p = !*p;
            }
        }
        let mut b = FrameBatch::empty(frame, frame * 33);
        for c in PpeClass::ALL {
            let rate = if present[c.index()] { 0.7 } else { 0.05 };
            if rng.random_bool(rate) {
                let boxes = if rng.random_bool(0.1) { 2 } else { 1 };
                for _ in 0..boxes {
                    let conf = match rng.random_range(0..10) {
                        0 => 1.0,
                        1 => 0.0,
                        _ => rng.random_range(0.0..=1.0),
                    };
                    b.push(c, conf, BBox::new(0.5, 0.5, 0.2, 0.2)).unwrap();
                }
            }
        }
        out.push(b);
        frame += if rng.random_bool(0.05) { rng.random_range(2..6) } else { 1 };
    }
    out
}

/// Dense per-frame qualifying flags, indexed by frame number from 0 to the
/// last frame. Frames absent from the stream are all-false.
pub fn qualifying(batches: &[FrameBatch], th: &ClassThresholds) -> Vec<[bool; PpeClass::COUNT]> {
    let last = batches.last().map_or(0, |b| b.frame_index as usize);
    let mut q = vec![[false; PpeClass::COUNT]; last + 1];
    for b in batches {
        for d in b.detections() {
            if d.confidence >= th.get(d.class).th_confidence {
                q[b.frame_index as usize][d.class.index()] = true;
            }
        }
    }
    q
}

fn count_window(q: &[[bool; PpeClass::COUNT]], class: usize, lo: usize, hi: usize) -> u32 {
    q[lo..=hi].iter().filter(|f| f[class]).count() as u32
}

/// Monotone satisfaction (donning): satisfied after frame k iff some
/// observed frame j <= k had >= th_frequency qualifying frames among
/// (j - window + 1 ..= j).
pub fn satisfied_donning(batches: &[FrameBatch], th: &ClassThresholds) -> Vec<[bool; PpeClass::COUNT]> {
    let q = qualifying(batches, th);
    let mut sat = [false; PpeClass::COUNT];
    batches
        .iter()
        .map(|b| {
            let k = b.frame_index as usize;
            for c in PpeClass::ALL {
                let t = th.get(c);
                let lo = (k + 1).saturating_sub(t.window_frames as usize);
                if count_window(&q, c.index(), lo, k) >= t.th_frequency {
                    sat[c.index()] = true;
                }
            }
            sat
        })
        .collect()
}

/// Trailing run of non-qualifying frames ending at `k`, counted back to the
/// first observed frame.
pub fn absent_run(q: &[[bool; PpeClass::COUNT]], class: usize, first: usize, k: usize) -> u64 {
    (first..=k).rev().take_while(|&f| !q[f][class]).count() as u64
}

/// Doffing reference: satisfaction as above but counted only over frames
/// after the class's last removal; removal once a satisfied class's
/// trailing absence run reaches the removal window.
pub fn doffing_states(
    batches: &[FrameBatch],
    th: &ClassThresholds,
) -> Vec<([bool; PpeClass::COUNT], [u64; PpeClass::COUNT])> {
    let q = qualifying(batches, th);
    let first = batches.first().map_or(0, |b| b.frame_index as usize);
    let mut sat = [false; PpeClass::COUNT];
    let mut epoch = [0usize; PpeClass::COUNT];
    batches
        .iter()
        .map(|b| {
            let k = b.frame_index as usize;
            let mut runs = [0u64; PpeClass::COUNT];
            for c in PpeClass::ALL {
                let i = c.index();
                let t = th.get(c);
                let lo = (k + 1).saturating_sub(t.window_frames as usize).max(epoch[i]);
                if !sat[i] && count_window(&q, i, lo, k) >= t.th_frequency {
                    sat[i] = true;
                }
                runs[i] = absent_run(&q, i, first, k);
                if sat[i] && runs[i] >= u64::from(t.removal_window_frames) {
                    sat[i] = false;
                    epoch[i] = k + 1;
                }
            }
            (sat, runs)
        })
        .collect()
}
