use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use super::{load_file, FileFormat, Strictness};
use crate::error::{Error, Result};
use crate::types::FrameBatch;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pacing {
    /// Deliver as fast as the consumer accepts.
    AsFastAsPossible,
    /// Honour timestamp gaps divided by this speed factor (> 0).
    Scaled(f64),
}

impl Pacing {
    pub fn scaled(speed_factor: f64) -> Result<Pacing> {
        if speed_factor > 0.0 && speed_factor.is_finite() {
            Ok(Pacing::Scaled(speed_factor))
        } else {
            Err(Error::InvalidSource(format!(
                "speed factor must be > 0 (got {speed_factor}); use as-fast-as-possible instead"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplayStats {
    pub batches: usize,
    pub detections: usize,
    pub dropped: usize,
    pub wall_time: Duration,
}

/// Push `batches` into `sink` in order, pacing by their timestamps.
pub fn replay_batches<F>(batches: &[FrameBatch], pacing: Pacing, mut sink: F) -> Result<ReplayStats>
where
    F: FnMut(&FrameBatch) -> Result<()>,
{
    let start = Instant::now();
    let origin_ms = batches.first().map_or(0, |b| b.timestamp_ms);
    let mut stats = ReplayStats::default();
    for batch in batches {
        if let Pacing::Scaled(speed) = pacing {
            let offset_ms = batch.timestamp_ms.saturating_sub(origin_ms) as f64 / speed;
            let due = start + Duration::from_secs_f64(offset_ms / 1000.0);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        sink(batch)?;
        stats.batches += 1;
        stats.detections += batch.len();
    }
    stats.wall_time = start.elapsed();
    Ok(stats)
}

/// Load a recorded file in full, then replay it.
pub fn run_replay<F>(
    path: &Path,
    format: Option<FileFormat>,
    fps: f64,
    strictness: Strictness,
    pacing: Pacing,
    sink: F,
) -> Result<ReplayStats>
where
    F: FnMut(&FrameBatch) -> Result<()>,
{
    let parsed = load_file(path, format, fps, strictness)?;
    let mut stats = replay_batches(&parsed.batches, pacing, sink)?;
    stats.dropped = parsed.dropped;
    Ok(stats)
}
