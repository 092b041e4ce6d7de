//! PPE donning/doffing compliance engine.
//!
//! Consumes per-frame object-detection output from an external PPE detector
//! and decides, in real time, whether a worker puts protective equipment on
//! (donning) or takes it off (doffing) in the prescribed order:
//!
//! - [`threshold`] turns raw detections into "item worn" / "item removed"
//!   transitions using per-class confidence and frequency thresholds.
//! - [`engine`] checks those transitions against an ordered step list and
//!   raises alerts naming any missed step.
//! - [`ingest`] reads the native JSON-lines wire format, darknet JSON output,
//!   and drives timed replays and a TCP listener.
//! - [`sim`] generates seeded synthetic detection streams for testing and
//!   threshold tuning.

pub mod engine;
pub mod error;
pub mod ingest;
pub mod sim;
pub mod threshold;
pub mod types;

pub use engine::{EndReason, Monitor, Session, SessionStatus};
pub use error::{Error, Result};
pub use threshold::{Accumulator, Transition, TransitionKind};
pub use types::{
    default_sequence, parse_class, Alert, AlertKind, BBox, ClassThreshold, ClassThresholds,
    Completion, DetectionEvent, FrameBatch, Mode, Outcome, PpeClass, SequenceSpec, StepRecord,
    StepSpec, StepStatus, Verdict,
};
