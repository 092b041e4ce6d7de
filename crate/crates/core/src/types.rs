//! Domain vocabulary shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The five detector classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PpeClass {
    Coverall,
    FaceShield,
    Gloves,
    Goggles,
    Mask,
}

impl PpeClass {
    pub const ALL: [PpeClass; 5] = [
        PpeClass::Coverall,
        PpeClass::FaceShield,
        PpeClass::Gloves,
        PpeClass::Goggles,
        PpeClass::Mask,
    ];
    pub const COUNT: usize = 5;

    /// Dense index in `0..COUNT`, stable across releases.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Canonical wire name.
    pub fn as_str(self) -> &'static str {
        match self {
            PpeClass::Coverall => "coverall",
            PpeClass::FaceShield => "face_shield",
            PpeClass::Gloves => "gloves",
            PpeClass::Goggles => "goggles",
            PpeClass::Mask => "mask",
        }
    }

    /// Display name as it appears on checklists.
    pub fn display_name(self) -> &'static str {
        match self {
            PpeClass::Coverall => "Coverall",
            PpeClass::FaceShield => "Face shield",
            PpeClass::Gloves => "Gloves",
            PpeClass::Goggles => "Goggles",
            PpeClass::Mask => "Mask",
        }
    }
}

/// Alias table, keyed by the normalized form (lowercase, no spaces,
/// underscores or hyphens).
const CLASS_ALIASES: &[(&str, PpeClass)] = &[
    ("coverall", PpeClass::Coverall),
    ("gown", PpeClass::Coverall),
    ("ppe", PpeClass::Coverall),
    ("faceshield", PpeClass::FaceShield),
    ("gloves", PpeClass::Gloves),
    ("goggles", PpeClass::Goggles),
    ("googles", PpeClass::Goggles),
    ("glasses", PpeClass::Goggles),
    ("mask", PpeClass::Mask),
];

/// Parse a class name. Case-insensitive; spaces, underscores and hyphens are
/// ignored, so `"Face Shield"`, `"face_shield"` and `"FACE-SHIELD"` all match.
pub fn parse_class(name: &str) -> Result<PpeClass> {
    let normalized: String = name
        .chars()
        .filter(|c| !matches!(c, ' ' | '_' | '-'))
        .flat_map(char::to_lowercase)
        .collect();
    CLASS_ALIASES
        .iter()
        .find(|(alias, _)| *alias == normalized)
        .map(|(_, class)| *class)
        .ok_or_else(|| Error::UnknownClass(name.to_string()))
}

impl FromStr for PpeClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_class(s)
    }
}

impl fmt::Display for PpeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for PpeClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for PpeClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        parse_class(&name).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Donning,
    Doffing,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Donning => "donning",
            Mode::Doffing => "doffing",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "donning" => Ok(Mode::Donning),
            "doffing" => Ok(Mode::Doffing),
            _ => Err(Error::InvalidSpec(format!("unknown mode {s:?}"))),
        }
    }
}

/// Normalized bounding box, center/size form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        BBox { cx, cy, w, h }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.cx) || !unit(self.cy) {
            return Err(Error::malformed(format!(
                "bbox center ({}, {}) outside [0,1]",
                self.cx, self.cy
            )));
        }
        if !(self.w > 0.0 && self.w <= 1.0 && self.h > 0.0 && self.h <= 1.0) {
            return Err(Error::malformed(format!(
                "bbox size ({}, {}) outside (0,1]",
                self.w, self.h
            )));
        }
        Ok(())
    }
}

/// One detector hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEvent {
    pub frame_index: u64,
    pub timestamp_ms: u64,
    pub class: PpeClass,
    pub confidence: f64,
    pub bbox: BBox,
}

impl DetectionEvent {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::malformed(format!(
                "confidence {} outside [0,1]",
                self.confidence
            )));
        }
        self.bbox.validate()
    }
}

/// All detections the detector reported for a single frame.
///
/// An empty batch still counts: it advances window and absence bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBatch {
    pub frame_index: u64,
    pub timestamp_ms: u64,
    detections: Vec<DetectionEvent>,
}

impl FrameBatch {
    pub fn empty(frame_index: u64, timestamp_ms: u64) -> Self {
        FrameBatch {
            frame_index,
            timestamp_ms,
            detections: Vec::new(),
        }
    }

    /// Build a batch, checking every detection against the batch's frame
    /// and the value-range invariants.
    pub fn new(frame_index: u64, timestamp_ms: u64, detections: Vec<DetectionEvent>) -> Result<Self> {
        for d in &detections {
            if d.frame_index != frame_index || d.timestamp_ms != timestamp_ms {
                return Err(Error::malformed(format!(
                    "detection stamped frame {} / {} ms inside batch for frame {} / {} ms",
                    d.frame_index, d.timestamp_ms, frame_index, timestamp_ms
                )));
            }
            d.validate()?;
        }
        Ok(FrameBatch {
            frame_index,
            timestamp_ms,
            detections,
        })
    }

    /// Append a detection stamped with this batch's frame and time.
    pub fn push(&mut self, class: PpeClass, confidence: f64, bbox: BBox) -> Result<()> {
        let d = DetectionEvent {
            frame_index: self.frame_index,
            timestamp_ms: self.timestamp_ms,
            class,
            confidence,
            bbox,
        };
        d.validate()?;
        self.detections.push(d);
        Ok(())
    }

    pub fn detections(&self) -> &[DetectionEvent] {
        &self.detections
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }
}

/// Gating parameters for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThreshold {
    /// Minimum confidence for a detection to count.
    pub th_confidence: f64,
    /// Qualifying frames needed inside the window.
    pub th_frequency: u32,
    pub window_frames: u32,
    /// Consecutive frames without a qualifying detection that mark removal.
    pub removal_window_frames: u32,
}

impl Default for ClassThreshold {
    fn default() -> Self {
        ClassThreshold {
            th_confidence: 0.5,
            th_frequency: 5,
            window_frames: 30,
            removal_window_frames: 45,
        }
    }
}

impl ClassThreshold {
    pub fn validate(&self, class: PpeClass) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidThresholds {
                class: class.as_str().to_string(),
                reason,
            })
        };
        if !(self.th_confidence > 0.0 && self.th_confidence <= 1.0) {
            return fail(format!("th_confidence {} outside (0,1]", self.th_confidence));
        }
        if self.th_frequency == 0 {
            return fail("th_frequency must be positive".into());
        }
        if self.window_frames < self.th_frequency {
            return fail(format!(
                "window_frames {} smaller than th_frequency {}",
                self.window_frames, self.th_frequency
            ));
        }
        if self.removal_window_frames == 0 {
            return fail("removal_window_frames must be positive".into());
        }
        Ok(())
    }
}

/// A validated threshold entry for every class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassThresholds {
    per_class: [ClassThreshold; PpeClass::COUNT],
}

impl Default for ClassThresholds {
    fn default() -> Self {
        ClassThresholds {
            per_class: [ClassThreshold::default(); PpeClass::COUNT],
        }
    }
}

impl ClassThresholds {
    /// Same thresholds for every class.
    pub fn uniform(t: ClassThreshold) -> Result<Self> {
        Self::from_fn(|_| t)
    }

    pub fn from_fn(mut f: impl FnMut(PpeClass) -> ClassThreshold) -> Result<Self> {
        let mut per_class = [ClassThreshold::default(); PpeClass::COUNT];
        for class in PpeClass::ALL {
            let t = f(class);
            t.validate(class)?;
            per_class[class.index()] = t;
        }
        Ok(ClassThresholds { per_class })
    }

    /// Replace one class's entry, keeping the others.
    pub fn with(mut self, class: PpeClass, t: ClassThreshold) -> Result<Self> {
        t.validate(class)?;
        self.per_class[class.index()] = t;
        Ok(self)
    }

    pub fn get(&self, class: PpeClass) -> &ClassThreshold {
        &self.per_class[class.index()]
    }
}

/// One checklist step: any of `alternatives` satisfies it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSpec {
    pub label: String,
    pub alternatives: Vec<PpeClass>,
}

impl StepSpec {
    pub fn new(label: impl Into<String>, alternatives: impl IntoIterator<Item = PpeClass>) -> Self {
        let mut alternatives: Vec<PpeClass> = alternatives.into_iter().collect();
        alternatives.sort();
        alternatives.dedup();
        StepSpec {
            label: label.into(),
            alternatives,
        }
    }

    pub fn accepts(&self, class: PpeClass) -> bool {
        self.alternatives.contains(&class)
    }
}

/// Ordered checklist for one mode. Steps are nonempty and pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceSpec {
    mode: Mode,
    steps: Vec<StepSpec>,
    step_of: [Option<usize>; PpeClass::COUNT],
}

impl SequenceSpec {
    pub fn new(mode: Mode, steps: Vec<StepSpec>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidSpec("sequence has no steps".into()));
        }
        let mut step_of = [None; PpeClass::COUNT];
        for (i, step) in steps.iter().enumerate() {
            if step.alternatives.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "step {i} ({:?}) has no classes",
                    step.label
                )));
            }
            for &class in &step.alternatives {
                if let Some(prev) = step_of[class.index()].replace(i) {
                    if prev != i {
                        return Err(Error::InvalidSpec(format!(
                            "class {class} appears in steps {prev} and {i}"
                        )));
                    }
                }
            }
        }
        Ok(SequenceSpec {
            mode,
            steps,
            step_of,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn steps(&self) -> &[StepSpec] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Index of the step that `class` belongs to, if any.
    pub fn step_of(&self, class: PpeClass) -> Option<usize> {
        self.step_of[class.index()]
    }

    pub fn label(&self, step: usize) -> &str {
        &self.steps[step].label
    }
}

/// Built-in WHO-aligned checklists. Doffing follows the unfastening-ties
/// gown strategy.
pub fn default_sequence(mode: Mode) -> SequenceSpec {
    let gown = || StepSpec::new("Gown", [PpeClass::Coverall]);
    let mask = || StepSpec::new("Mask", [PpeClass::Mask]);
    let eyes = || StepSpec::new("Goggles/Face shield", [PpeClass::Goggles, PpeClass::FaceShield]);
    let gloves = || StepSpec::new("Gloves", [PpeClass::Gloves]);
    let steps = match mode {
        Mode::Donning => vec![gown(), mask(), eyes(), gloves()],
        Mode::Doffing => vec![gloves(), eyes(), gown(), mask()],
    };
    SequenceSpec::new(mode, steps).expect("built-in sequences are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepStatus {
    Pending,
    Done,
}

/// How and when a step was completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub class: PpeClass,
    pub frame_index: u64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub completion: Option<Completion>,
}

impl StepRecord {
    pub fn pending(step_index: usize) -> Self {
        StepRecord {
            step_index,
            completion: None,
        }
    }

    pub fn status(&self) -> StepStatus {
        if self.completion.is_some() {
            StepStatus::Done
        } else {
            StepStatus::Pending
        }
    }

    pub fn is_done(&self) -> bool {
        self.completion.is_some()
    }

    pub fn completed_class(&self) -> Option<PpeClass> {
        self.completion.map(|c| c.class)
    }

    pub fn completed_at_frame(&self) -> Option<u64> {
        self.completion.map(|c| c.frame_index)
    }

    pub fn completed_at_ms(&self) -> Option<u64> {
        self.completion.map(|c| c.timestamp_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlertKind {
    StepCompleted {
        step_index: usize,
        label: String,
        class: PpeClass,
    },
    MissedStep {
        missed_step_index: usize,
        missed_label: String,
        triggered_by_class: PpeClass,
    },
    SessionComplete,
    SessionTimeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alert {
    pub kind: AlertKind,
    pub frame_index: u64,
    pub timestamp_ms: u64,
}

impl Alert {
    pub fn is_missed_step(&self) -> bool {
        matches!(self.kind, AlertKind::MissedStep { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Compliant,
    NonCompliant { violations: Vec<Alert> },
    Incomplete { pending_steps: Vec<usize> },
}

impl Outcome {
    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Compliant => "compliant",
            Outcome::NonCompliant { .. } => "non_compliant",
            Outcome::Incomplete { .. } => "incomplete",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub step_records: Vec<StepRecord>,
    pub session_duration_ms: u64,
}

impl Verdict {
    pub fn is_compliant(&self) -> bool {
        self.outcome == Outcome::Compliant
    }
}
