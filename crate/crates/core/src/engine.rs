//! Checklist verification over accumulator transitions.
//!
//! A [`Session`] walks one [`SequenceSpec`]. Completing step `i` while some
//! earlier step is still pending raises a `MissedStep` alert for each such
//! step in the same call, then records step `i` as done. Violations are
//! kept: a step completed late is marked done but the verdict stays
//! non-compliant.
//!
//! In doffing mode the session first waits for a fully-donned baseline
//! (every step has one of its classes currently detected as worn); removal
//! transitions before that point are not interpreted.

use crate::error::{Error, Result};
use crate::threshold::{Accumulator, Transition, TransitionKind};
use crate::types::{
    Alert, AlertKind, ClassThresholds, Completion, FrameBatch, Mode, Outcome, PpeClass,
    SequenceSpec, StepRecord, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionStatus {
    Running,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndReason {
    EndOfStream,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct Session {
    spec: SequenceSpec,
    records: Vec<StepRecord>,
    alerts: Vec<Alert>,
    cursor: usize,
    status: SessionStatus,
    /// Doffing only: classes currently worn while the baseline is forming.
    present: [bool; PpeClass::COUNT],
    baseline_ready: bool,
    last_frame: u64,
    last_ms: u64,
}

impl Session {
    pub fn start(spec: SequenceSpec) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::InvalidSpec("sequence has no steps".into()));
        }
        let records = (0..spec.len()).map(StepRecord::pending).collect();
        Ok(Session {
            baseline_ready: spec.mode() == Mode::Donning,
            spec,
            records,
            alerts: Vec::new(),
            cursor: 0,
            status: SessionStatus::Running,
            present: [false; PpeClass::COUNT],
            last_frame: 0,
            last_ms: 0,
        })
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.spec.mode()
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.status == SessionStatus::Finished
    }

    /// Lowest pending step, or `steps.len()` when all are done.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    /// Whether removal transitions are being interpreted yet. Always true
    /// for donning.
    pub fn baseline_ready(&self) -> bool {
        self.baseline_ready
    }

    /// Advance the session clock without a transition.
    pub fn note_time(&mut self, frame_index: u64, timestamp_ms: u64) {
        self.last_frame = self.last_frame.max(frame_index);
        self.last_ms = self.last_ms.max(timestamp_ms);
    }

    pub fn on_transition(&mut self, t: &Transition) -> Result<Vec<Alert>> {
        if self.is_finished() {
            return Err(Error::SessionFinished);
        }
        self.note_time(t.frame_index, t.timestamp_ms);
        let Some(step) = self.spec.step_of(t.class) else {
            return Ok(Vec::new());
        };
        match (self.spec.mode(), t.kind) {
            (Mode::Donning, TransitionKind::BecameSatisfied) => Ok(self.complete(step, t)),
            (Mode::Donning, TransitionKind::BecameAbsent) => Ok(Vec::new()),
            (Mode::Doffing, kind) if !self.baseline_ready => {
                self.present[t.class.index()] = kind == TransitionKind::BecameSatisfied;
                self.baseline_ready = self
                    .spec
                    .steps()
                    .iter()
                    .all(|s| s.alternatives.iter().any(|c| self.present[c.index()]));
                Ok(Vec::new())
            }
            (Mode::Doffing, TransitionKind::BecameAbsent) => Ok(self.complete(step, t)),
            (Mode::Doffing, TransitionKind::BecameSatisfied) => Ok(Vec::new()),
        }
    }

    fn complete(&mut self, step: usize, t: &Transition) -> Vec<Alert> {
        if self.records[step].is_done() {
            return Vec::new();
        }
        let stamp = |kind| Alert {
            kind,
            frame_index: t.frame_index,
            timestamp_ms: t.timestamp_ms,
        };
        let mut out: Vec<Alert> = self.records[..step]
            .iter()
            .filter(|r| !r.is_done())
            .map(|r| {
                stamp(AlertKind::MissedStep {
                    missed_step_index: r.step_index,
                    missed_label: self.spec.label(r.step_index).to_string(),
                    triggered_by_class: t.class,
                })
            })
            .collect();

        self.records[step].completion = Some(Completion {
            class: t.class,
            frame_index: t.frame_index,
            timestamp_ms: t.timestamp_ms,
        });
        out.push(stamp(AlertKind::StepCompleted {
            step_index: step,
            label: self.spec.label(step).to_string(),
            class: t.class,
        }));

        self.cursor = self
            .records
            .iter()
            .position(|r| !r.is_done())
            .unwrap_or(self.records.len());
        if self.cursor == self.records.len() {
            out.push(stamp(AlertKind::SessionComplete));
            self.status = SessionStatus::Finished;
        }
        self.alerts.extend(out.iter().cloned());
        out
    }

    /// End the session. A timeout with steps still pending raises a
    /// `SessionTimeout` alert. Calling again returns the same verdict and no
    /// new alerts.
    pub fn finish(&mut self, reason: EndReason) -> (Vec<Alert>, Verdict) {
        let mut out = Vec::new();
        if self.status == SessionStatus::Running {
            if reason == EndReason::Timeout && self.cursor < self.records.len() {
                let alert = Alert {
                    kind: AlertKind::SessionTimeout,
                    frame_index: self.last_frame,
                    timestamp_ms: self.last_ms,
                };
                self.alerts.push(alert.clone());
                out.push(alert);
            }
            self.status = SessionStatus::Finished;
        }
        (out, self.verdict())
    }

    /// Verdict for the session as it stands now.
    pub fn verdict(&self) -> Verdict {
        let violations: Vec<Alert> = self
            .alerts
            .iter()
            .filter(|a| a.is_missed_step())
            .cloned()
            .collect();
        let outcome = if !violations.is_empty() {
            Outcome::NonCompliant { violations }
        } else if self.cursor == self.records.len() {
            Outcome::Compliant
        } else {
            Outcome::Incomplete {
                pending_steps: self
                    .records
                    .iter()
                    .filter(|r| !r.is_done())
                    .map(|r| r.step_index)
                    .collect(),
            }
        };
        Verdict {
            outcome,
            step_records: self.records.clone(),
            session_duration_ms: self.last_ms,
        }
    }
}

/// Accumulator and session wired together: frame batches in, alerts out.
#[derive(Debug, Clone)]
pub struct Monitor {
    accumulator: Accumulator,
    session: Session,
    timeout_ms: Option<u64>,
    scratch: Vec<Transition>,
}

impl Monitor {
    pub fn new(spec: SequenceSpec, thresholds: ClassThresholds) -> Result<Self> {
        let accumulator = Accumulator::new(thresholds, spec.mode());
        Ok(Monitor {
            accumulator,
            session: Session::start(spec)?,
            timeout_ms: None,
            scratch: Vec::new(),
        })
    }

    /// End the session with a timeout once a batch arrives stamped later
    /// than `timeout_ms` after session start.
    pub fn with_timeout_ms(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = Some(timeout_ms);
        self
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn accumulator(&self) -> &Accumulator {
        &self.accumulator
    }

    pub fn is_finished(&self) -> bool {
        self.session.is_finished()
    }

    /// Feed one frame. Batches arriving after the session finished are
    /// ignored.
    pub fn process(&mut self, batch: &FrameBatch) -> Result<Vec<Alert>> {
        if self.session.is_finished() {
            return Ok(Vec::new());
        }
        if let Some(limit) = self.timeout_ms {
            if batch.timestamp_ms > limit {
                self.session.note_time(batch.frame_index, batch.timestamp_ms);
                return Ok(self.session.finish(EndReason::Timeout).0);
            }
        }
        self.scratch.clear();
        self.accumulator.observe_into(batch, &mut self.scratch)?;
        self.session.note_time(batch.frame_index, batch.timestamp_ms);

        // Evidence that lands in the same frame is applied in checklist order.
        let spec = self.session.spec();
        self.scratch
            .sort_by_key(|t| spec.step_of(t.class).unwrap_or(usize::MAX));

        let mut alerts = Vec::new();
        for t in &self.scratch {
            if self.session.is_finished() {
                break;
            }
            alerts.extend(self.session.on_transition(t)?);
        }
        Ok(alerts)
    }

    pub fn finish(&mut self, reason: EndReason) -> (Vec<Alert>, Verdict) {
        self.session.finish(reason)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{default_sequence, StepSpec};
    use PpeClass::*;

    fn sat(class: PpeClass, frame: u64) -> Transition {
        Transition {
            class,
            kind: TransitionKind::BecameSatisfied,
            frame_index: frame,
            timestamp_ms: frame * 100,
        }
    }

    fn gone(class: PpeClass, frame: u64) -> Transition {
        Transition {
            kind: TransitionKind::BecameAbsent,
            ..sat(class, frame)
        }
    }

    fn feed(session: &mut Session, ts: &[Transition]) -> Vec<Alert> {
        ts.iter()
            .flat_map(|t| session.on_transition(t).unwrap())
            .collect()
    }

    fn completed(step_index: usize, label: &str, class: PpeClass) -> AlertKind {
        AlertKind::StepCompleted {
            step_index,
            label: label.into(),
            class,
        }
    }

    fn missed(idx: usize, label: &str, by: PpeClass) -> AlertKind {
        AlertKind::MissedStep {
            missed_step_index: idx,
            missed_label: label.into(),
            triggered_by_class: by,
        }
    }

    #[test]
    fn start_has_all_steps_pending() {
        for mode in [Mode::Donning, Mode::Doffing] {
            let s = Session::start(default_sequence(mode)).unwrap();
            assert_eq!(s.records().len(), 4);
            assert!(s.records().iter().all(|r| !r.is_done()));
            assert!(s.alerts().is_empty());
            assert_eq!(s.cursor(), 0);
        }
    }

    #[test]
    fn compliant_donning() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        let alerts = feed(
            &mut s,
            &[sat(Coverall, 1), sat(Mask, 2), sat(Goggles, 3), sat(Gloves, 4)],
        );
        let kinds: Vec<_> = alerts.iter().map(|a| a.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                completed(0, "Gown", Coverall),
                completed(1, "Mask", Mask),
                completed(2, "Goggles/Face shield", Goggles),
                completed(3, "Gloves", Gloves),
                AlertKind::SessionComplete,
            ]
        );
        assert!(s.is_finished());
        let (extra, verdict) = s.finish(EndReason::EndOfStream);
        assert!(extra.is_empty());
        assert_eq!(verdict.outcome, Outcome::Compliant);
        assert_eq!(verdict.session_duration_ms, 400);
        assert_eq!(verdict.step_records[3].completed_at_frame(), Some(4));
    }

    #[test]
    fn gloves_after_gown_misses_two_steps() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        let alerts = feed(&mut s, &[sat(Coverall, 1), sat(Gloves, 2)]);
        let kinds: Vec<_> = alerts.iter().map(|a| a.kind.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                completed(0, "Gown", Coverall),
                missed(1, "Mask", Gloves),
                missed(2, "Goggles/Face shield", Gloves),
                completed(3, "Gloves", Gloves),
            ]
        );
        assert_eq!(s.cursor(), 1);
        assert!(alerts[1..].iter().all(|a| a.frame_index == 2));
    }

    #[test]
    fn face_shield_completes_eye_step_and_goggles_ignored() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        feed(&mut s, &[sat(Coverall, 1), sat(Mask, 2)]);
        let a = feed(&mut s, &[sat(FaceShield, 3)]);
        assert_eq!(a[0].kind, completed(2, "Goggles/Face shield", FaceShield));
        assert_eq!(s.records()[2].completed_class(), Some(FaceShield));
        let before = (s.records().to_vec(), s.alerts().to_vec());
        assert!(feed(&mut s, &[sat(Goggles, 4)]).is_empty());
        assert_eq!((s.records().to_vec(), s.alerts().to_vec()), before);
    }

    #[test]
    fn late_completion_keeps_violation() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        feed(
            &mut s,
            &[sat(Mask, 1), sat(Coverall, 2), sat(Goggles, 3), sat(Gloves, 4)],
        );
        assert!(s.records().iter().all(|r| r.is_done()));
        let verdict = s.finish(EndReason::EndOfStream).1;
        match verdict.outcome {
            Outcome::NonCompliant { violations } => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].kind, missed(0, "Gown", Mask));
            }
            other => panic!("expected NonCompliant, got {other:?}"),
        }
    }

    #[test]
    fn incomplete_when_mask_pending() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        feed(&mut s, &[sat(Coverall, 1)]);
        let (alerts, verdict) = s.finish(EndReason::EndOfStream);
        assert!(alerts.is_empty());
        assert_eq!(
            verdict.outcome,
            Outcome::Incomplete {
                pending_steps: vec![1, 2, 3]
            }
        );

        let spec = SequenceSpec::new(
            Mode::Donning,
            vec![StepSpec::new("Gown", [Coverall]), StepSpec::new("Mask", [Mask])],
        )
        .unwrap();
        let mut s = Session::start(spec).unwrap();
        feed(&mut s, &[sat(Coverall, 1)]);
        assert_eq!(
            s.finish(EndReason::EndOfStream).1.outcome,
            Outcome::Incomplete {
                pending_steps: vec![1]
            }
        );
    }

    #[test]
    fn timeout_emits_alert_only_when_pending() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        feed(&mut s, &[sat(Coverall, 7)]);
        let (alerts, verdict) = s.finish(EndReason::Timeout);
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].kind, AlertKind::SessionTimeout);
        assert_eq!(alerts[0].frame_index, 7);
        assert!(matches!(verdict.outcome, Outcome::Incomplete { .. }));
        // Second call adds nothing.
        assert!(s.finish(EndReason::Timeout).0.is_empty());
    }

    #[test]
    fn finished_session_rejects_transitions() {
        let mut s = Session::start(default_sequence(Mode::Donning)).unwrap();
        feed(
            &mut s,
            &[sat(Coverall, 1), sat(Mask, 2), sat(Goggles, 3), sat(Gloves, 4)],
        );
        assert_eq!(s.on_transition(&sat(Mask, 5)), Err(Error::SessionFinished));
    }

    #[test]
    fn doffing_requires_baseline() {
        let mut s = Session::start(default_sequence(Mode::Doffing)).unwrap();
        // Removal before anything is worn is not interpreted.
        assert!(feed(&mut s, &[sat(Gloves, 1), gone(Gloves, 2)]).is_empty());
        assert!(!s.baseline_ready());
        assert!(feed(&mut s, &[sat(Gloves, 3), sat(FaceShield, 4), sat(Coverall, 5)]).is_empty());
        assert!(!s.baseline_ready());
        feed(&mut s, &[sat(Mask, 6)]);
        assert!(s.baseline_ready());

        let alerts = feed(
            &mut s,
            &[gone(Gloves, 10), gone(FaceShield, 11), gone(Coverall, 12), gone(Mask, 13)],
        );
        assert_eq!(alerts.len(), 5);
        assert_eq!(alerts[4].kind, AlertKind::SessionComplete);
        assert!(s.finish(EndReason::EndOfStream).1.is_compliant());
    }

    #[test]
    fn doffing_out_of_order_removal() {
        let mut s = Session::start(default_sequence(Mode::Doffing)).unwrap();
        feed(&mut s, &[sat(Gloves, 1), sat(Goggles, 1), sat(Coverall, 1), sat(Mask, 1)]);
        let alerts = feed(&mut s, &[gone(Goggles, 5)]);
        assert_eq!(alerts[0].kind, missed(0, "Gloves", Goggles));
        assert_eq!(alerts[1].kind, completed(1, "Goggles/Face shield", Goggles));
        // Satisfaction after baseline does not complete doffing steps.
        assert!(feed(&mut s, &[sat(Goggles, 6)]).is_empty());
    }

    #[test]
    fn transitions_for_classes_outside_spec_are_ignored() {
        let spec = SequenceSpec::new(Mode::Donning, vec![StepSpec::new("Mask", [Mask])]).unwrap();
        let mut s = Session::start(spec).unwrap();
        assert!(feed(&mut s, &[sat(Gloves, 1)]).is_empty());
        assert_eq!(s.records()[0].completion, None);
    }

    #[test]
    fn monitor_orders_same_frame_evidence_by_step() {
        use crate::types::{BBox, ClassThreshold};
        let th = ClassThresholds::uniform(ClassThreshold {
            th_confidence: 0.5,
            th_frequency: 1,
            window_frames: 1,
            removal_window_frames: 10,
        })
        .unwrap();
        let mut m = Monitor::new(default_sequence(Mode::Donning), th).unwrap();
        let mut b = FrameBatch::empty(1, 0);
        // Gloves sorts before Goggles by class, but Goggles is the earlier step.
        for c in [Mask, Gloves, Goggles, Coverall] {
            b.push(c, 0.9, BBox::new(0.5, 0.5, 0.1, 0.1)).unwrap();
        }
        let alerts = m.process(&b).unwrap();
        assert!(!alerts.iter().any(Alert::is_missed_step));
        assert!(m.is_finished());
        assert!(m.process(&FrameBatch::empty(2, 33)).unwrap().is_empty());
    }

    #[test]
    fn monitor_timeout_on_stream_time() {
        let mut m = Monitor::new(default_sequence(Mode::Donning), ClassThresholds::default())
            .unwrap()
            .with_timeout_ms(1000);
        assert!(m.process(&FrameBatch::empty(1, 500)).unwrap().is_empty());
        let alerts = m.process(&FrameBatch::empty(2, 1001)).unwrap();
        assert_eq!(alerts.len(), 1);
        assert_eq!(alerts[0].kind, AlertKind::SessionTimeout);
        assert_eq!((alerts[0].frame_index, alerts[0].timestamp_ms), (2, 1001));
        assert!(m.is_finished());
    }
}
