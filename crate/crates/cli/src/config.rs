//! TOML configuration.
//!
//! Every table rejects unknown keys so a typo fails loudly instead of being
//! silently ignored. Values given on the command line win over the file.
//!
//! ```toml
//! mode = "donning"
//! fps = 30.0
//! strict = true
//! session_timeout_s = 300.0
//!
//! [sequence]
//! builtin = "donning"
//!
//! [thresholds.default]
//! th_frequency = 5
//! window_frames = 30
//!
//! [thresholds.policy]
//! alpha = 0.5
//!
//! [thresholds.classes.mask]
//! ap = 0.8
//!
//! [source]
//! kind = "listener"
//! bind = "127.0.0.1:7878"
//!
//! [[sinks]]
//! kind = "json_log"
//! path = "alerts.jsonl"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ppe_core::ingest::{FileFormat, Pacing, StreamSource, Strictness};
use ppe_core::threshold::{derive_confidence_threshold, ThresholdPolicy};
use ppe_core::{
    default_sequence, parse_class, ClassThreshold, ClassThresholds, Mode, SequenceSpec, StepSpec,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_BIND: &str = "127.0.0.1:7878";
pub const DEFAULT_FPS: f64 = 30.0;
pub const DEFAULT_SESSION_TIMEOUT_S: f64 = 300.0;
pub const DEFAULT_WEBHOOK_TIMEOUT_MS: u64 = 2_000;
pub const DEFAULT_WEBHOOK_QUEUE: usize = 256;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub mode: Option<Mode>,
    pub fps: Option<f64>,
    pub strict: Option<bool>,
    pub session_timeout_s: Option<f64>,
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub thresholds: ThresholdsConfig,
    pub source: Option<SourceConfig>,
    #[serde(default)]
    pub sinks: Vec<SinkConfig>,
}

/// Either a built-in checklist or an explicit list of steps.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub builtin: Option<Mode>,
    pub steps: Option<Vec<StepConfig>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub label: String,
    pub alternatives: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsConfig {
    pub default: Option<ThresholdPatch>,
    pub policy: Option<ThresholdPolicy>,
    /// Keyed by class name (aliases accepted).
    #[serde(default)]
    pub classes: BTreeMap<String, ClassEntry>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdPatch {
    pub th_confidence: Option<f64>,
    pub th_frequency: Option<u32>,
    pub window_frames: Option<u32>,
    pub removal_window_frames: Option<u32>,
}

impl ThresholdPatch {
    fn apply(&self, mut t: ClassThreshold) -> ClassThreshold {
        if let Some(v) = self.th_confidence {
            t.th_confidence = v;
        }
        if let Some(v) = self.th_frequency {
            t.th_frequency = v;
        }
        if let Some(v) = self.window_frames {
            t.window_frames = v;
        }
        if let Some(v) = self.removal_window_frames {
            t.removal_window_frames = v;
        }
        t
    }
}

/// Per-class entry: `ap` (derive the confidence threshold through the
/// policy) or `th_confidence`, not both.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub ap: Option<f64>,
    pub th_confidence: Option<f64>,
    pub th_frequency: Option<u32>,
    pub window_frames: Option<u32>,
    pub removal_window_frames: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatName {
    Native,
    Darknet,
}

impl From<FormatName> for FileFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Native => FileFormat::Native,
            FormatName::Darknet => FileFormat::Darknet,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Listener {
        bind: String,
    },
    File {
        path: PathBuf,
        speed: Option<f64>,
        #[serde(default)]
        as_fast_as_possible: bool,
        format: Option<FormatName>,
    },
    Stdin,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SinkConfig {
    Terminal,
    JsonLog {
        path: PathBuf,
    },
    Webhook {
        url: String,
        #[serde(default = "default_webhook_timeout")]
        timeout_ms: u64,
        #[serde(default)]
        retry_count: u32,
        #[serde(default = "default_webhook_queue")]
        queue_capacity: usize,
    },
}

fn default_webhook_timeout() -> u64 {
    DEFAULT_WEBHOOK_TIMEOUT_MS
}

fn default_webhook_queue() -> usize {
    DEFAULT_WEBHOOK_QUEUE
}

impl SinkConfig {
    pub fn validate(&self) -> CliResult<()> {
        if let SinkConfig::Webhook {
            url,
            timeout_ms,
            queue_capacity,
            ..
        } = self
        {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return Err(CliError::Config(format!("sinks.url: expected an http(s) URL, got {url:?}")));
            }
            if *timeout_ms < 1 {
                return Err(CliError::Config("sinks.timeout_ms must be >= 1".into()));
            }
            if *queue_capacity < 1 {
                return Err(CliError::Config("sinks.queue_capacity must be >= 1".into()));
            }
        }
        Ok(())
    }
}

impl AppConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub strict: Option<bool>,
    pub fps: Option<f64>,
    pub session_timeout_s: Option<f64>,
    pub source: Option<SourceConfig>,
    /// Extra sinks added on top of the configured ones.
    pub extra_sinks: Vec<SinkConfig>,
}

/// A validated, fully defaulted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub spec: SequenceSpec,
    pub thresholds: ClassThresholds,
    pub fps: f64,
    pub strictness: Strictness,
    pub session_timeout_ms: u64,
    pub source: StreamSource,
    pub file_format: Option<FileFormat>,
    pub sinks: Vec<SinkConfig>,
}

impl Settings {
    pub fn mode(&self) -> Mode {
        self.spec.mode()
    }

    pub fn resolve(config: &AppConfig, overrides: &Overrides) -> CliResult<Settings> {
        let seq = config.sequence.clone().unwrap_or_default();
        let mode = overrides
            .mode
            .or(config.mode)
            .or(seq.builtin)
            .unwrap_or(Mode::Donning);

        let spec = match (seq.builtin, seq.steps) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("sequence: set either builtin or steps, not both".into()))
            }
            (Some(b), None) if b != mode => {
                return Err(CliError::Config(format!("sequence.builtin = {b:?} does not match mode {mode}")))
            }
            (_, Some(steps)) => {
                let steps = steps
                    .iter()
                    .map(|s| {
                        let alts = s
                            .alternatives
                            .iter()
                            .map(|a| parse_class(a))
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|e| CliError::Config(format!("sequence.steps: {e}")))?;
                        Ok(StepSpec::new(s.label.clone(), alts))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                SequenceSpec::new(mode, steps).map_err(|e| CliError::Config(format!("sequence.steps: {e}")))?
            }
            (_, None) => default_sequence(mode),
        };

        let fps = overrides.fps.or(config.fps).unwrap_or(DEFAULT_FPS);
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(CliError::Config(format!("fps must be positive, got {fps}")));
        }
        let timeout_s = overrides
            .session_timeout_s
            .or(config.session_timeout_s)
            .unwrap_or(DEFAULT_SESSION_TIMEOUT_S);
        if !(timeout_s > 0.0 && timeout_s.is_finite()) {
            return Err(CliError::Config(format!("session_timeout_s must be positive, got {timeout_s}")));
        }
        let strictness = if overrides.strict.or(config.strict).unwrap_or(true) {
            Strictness::Strict
        } else {
            Strictness::Lenient
        };

        let thresholds = resolve_thresholds(&config.thresholds)?;

        let source_cfg = overrides.source.clone().or_else(|| config.source.clone());
        let (source, file_format) = match source_cfg {
            None => (
                StreamSource::NetworkListener {
                    bind: DEFAULT_BIND.into(),
                },
                None,
            ),
            Some(SourceConfig::Listener { bind }) => (StreamSource::NetworkListener { bind }, None),
            Some(SourceConfig::Stdin) => (StreamSource::StandardInput, None),
            Some(SourceConfig::File {
                path,
                speed,
                as_fast_as_possible,
                format,
            }) => {
                let pacing = match (speed, as_fast_as_possible) {
                    (Some(_), true) => {
                        return Err(CliError::Config(
                            "source: speed and as_fast_as_possible are mutually exclusive".into(),
                        ))
                    }
                    (_, true) => Pacing::AsFastAsPossible,
                    (s, false) => Pacing::scaled(s.unwrap_or(1.0))
                        .map_err(|e| CliError::Config(format!("source.speed: {e}")))?,
                };
                (StreamSource::FileReplay { path, pacing }, format.map(FileFormat::from))
            }
        };

        let mut sinks = config.sinks.clone();
        sinks.extend(overrides.extra_sinks.iter().cloned());
        for s in &sinks {
            s.validate()?;
        }

        Ok(Settings {
            spec,
            thresholds,
            fps,
            strictness,
            session_timeout_ms: (timeout_s * 1000.0).round() as u64,
            source,
            file_format,
            sinks,
        })
    }
}

fn resolve_thresholds(cfg: &ThresholdsConfig) -> CliResult<ClassThresholds> {
    let base = cfg
        .default
        .map_or_else(ClassThreshold::default, |p| p.apply(ClassThreshold::default()));
    let policy = cfg.policy.unwrap_or_default();
    policy
        .validate()
        .map_err(|e| CliError::Config(format!("thresholds.policy: {e}")))?;

    let mut per_class = [None; ppe_core::PpeClass::COUNT];
    for (name, entry) in &cfg.classes {
        let class = parse_class(name).map_err(|e| CliError::Config(format!("thresholds.classes: {e}")))?;
        let key = format!("thresholds.classes.{name}");
        if per_class[class.index()].is_some() {
            return Err(CliError::Config(format!("{key}: {class} configured twice")));
        }
        let th_confidence = match (entry.ap, entry.th_confidence) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(format!("{key}: set either ap or th_confidence, not both")))
            }
            (Some(ap), None) => Some(
                derive_confidence_threshold(ap, &policy).map_err(|e| CliError::Config(format!("{key}.ap: {e}")))?,
            ),
            (None, c) => c,
        };
        let patch = ThresholdPatch {
            th_confidence,
            th_frequency: entry.th_frequency,
            window_frames: entry.window_frames,
            removal_window_frames: entry.removal_window_frames,
        };
        per_class[class.index()] = Some(patch);
    }

    ClassThresholds::from_fn(|c| per_class[c.index()].map_or(base, |p| p.apply(base))).map_err(CliError::config)
}
