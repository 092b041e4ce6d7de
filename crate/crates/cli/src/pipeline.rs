//! Engine plus sinks for a sequence of sessions.
//!
//! Every command that runs the engine goes through [`Pipeline`], so a given
//! batch sequence yields the same alerts no matter where it came from.

use std::time::Instant;

use ppe_core::{Alert, ClassThresholds, EndReason, FrameBatch, Monitor, SequenceSpec, Verdict};

use crate::config::Settings;
use crate::metrics::{Metrics, Summary};
use crate::sinks::{AlertSink, SinkStats};

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub spec: SequenceSpec,
    pub alerts: Vec<Alert>,
    pub verdict: Verdict,
    pub stats: Summary,
    /// Cumulative per-sink delivery counters at the end of the session.
    pub sinks: Vec<(String, SinkStats)>,
}

pub struct Pipeline {
    spec: SequenceSpec,
    thresholds: ClassThresholds,
    timeout_ms: Option<u64>,
    sinks: Vec<Box<dyn AlertSink>>,
    monitor: Monitor,
    metrics: Metrics,
    alerts: Vec<Alert>,
}

impl Pipeline {
    pub fn new(
        spec: SequenceSpec,
        thresholds: ClassThresholds,
        timeout_ms: Option<u64>,
        sinks: Vec<Box<dyn AlertSink>>,
    ) -> Self {
        let monitor = Self::fresh_monitor(&spec, thresholds, timeout_ms);
        Pipeline {
            spec,
            thresholds,
            timeout_ms,
            sinks,
            monitor,
            metrics: Metrics::default(),
            alerts: Vec::new(),
        }
    }

    pub fn from_settings(settings: &Settings, sinks: Vec<Box<dyn AlertSink>>) -> Self {
        Self::new(
            settings.spec.clone(),
            settings.thresholds,
            Some(settings.session_timeout_ms),
            sinks,
        )
    }

    fn fresh_monitor(spec: &SequenceSpec, thresholds: ClassThresholds, timeout_ms: Option<u64>) -> Monitor {
        // The sequence was validated when it was built, so starting cannot fail.
        let m = Monitor::new(spec.clone(), thresholds).expect("validated spec");
        match timeout_ms {
            Some(t) => m.with_timeout_ms(t),
            None => m,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.monitor.is_finished()
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    /// Run one batch through the engine and hand its alerts to every sink.
    /// A batch the engine rejects (out of order) is counted as dropped.
    pub fn process(&mut self, batch: &FrameBatch) -> &[Alert] {
        let start = self.alerts.len();
        let t0 = Instant::now();
        let result = self.monitor.process(batch);
        let elapsed = t0.elapsed();
        match result {
            Ok(alerts) => {
                self.metrics.record_batch(batch.len(), alerts.len(), elapsed);
                self.dispatch(alerts);
            }
            Err(e) => {
                log::warn!("frame {} rejected: {e}", batch.frame_index);
                self.metrics.dropped += 1;
            }
        }
        &self.alerts[start..]
    }

    pub fn note_dropped(&mut self, n: usize) {
        self.metrics.dropped += n as u64;
    }

    fn dispatch(&mut self, alerts: Vec<Alert>) {
        for a in &alerts {
            for s in self.sinks.iter_mut() {
                s.emit(a);
            }
        }
        self.alerts.extend(alerts);
    }

    /// Close the current session and start a fresh one.
    pub fn finish(&mut self, reason: EndReason) -> SessionReport {
        let (tail, verdict) = self.monitor.finish(reason);
        self.metrics.alerts += tail.len() as u64;
        self.dispatch(tail);
        let report = SessionReport {
            spec: self.spec.clone(),
            alerts: std::mem::take(&mut self.alerts),
            verdict,
            stats: self.metrics.summary(),
            sinks: self.sinks.iter().map(|s| (s.name(), s.stats())).collect(),
        };
        self.monitor = Self::fresh_monitor(&self.spec, self.thresholds, self.timeout_ms);
        self.metrics = Metrics::default();
        report
    }
}
