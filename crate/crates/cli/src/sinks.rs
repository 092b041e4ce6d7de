//! Alert delivery.
//!
//! Sinks see alerts in engine emission order. Delivery failures are counted
//! and logged; they never reach the engine.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::Path;

use ppe_core::{Alert, AlertKind};
use serde::Serialize;

use crate::config::SinkConfig;
use crate::error::{CliError, CliResult};
use crate::webhook::WebhookSink;

pub const ALERT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SinkStats {
    pub delivered: u64,
    pub failed: u64,
    /// Alerts discarded because a delivery queue was full.
    pub dropped: u64,
}

pub trait AlertSink: Send {
    fn name(&self) -> String;
    fn emit(&mut self, alert: &Alert);
    fn stats(&self) -> SinkStats;
}

#[derive(Serialize)]
struct AlertRecord<'a> {
    v: u32,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    step_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    triggered_by: Option<&'static str>,
    frame: u64,
    t_ms: u64,
}

pub fn alert_kind_name(kind: &AlertKind) -> &'static str {
    match kind {
        AlertKind::StepCompleted { .. } => "step_completed",
        AlertKind::MissedStep { .. } => "missed_step",
        AlertKind::SessionComplete => "session_complete",
        AlertKind::SessionTimeout => "session_timeout",
    }
}

/// The versioned JSON object for one alert, without a trailing newline.
pub fn alert_json(alert: &Alert) -> String {
    let mut rec = AlertRecord {
        v: ALERT_SCHEMA_VERSION,
        kind: alert_kind_name(&alert.kind),
        step_index: None,
        label: None,
        class: None,
        triggered_by: None,
        frame: alert.frame_index,
        t_ms: alert.timestamp_ms,
    };
    match &alert.kind {
        AlertKind::StepCompleted {
            step_index,
            label,
            class,
        } => {
            rec.step_index = Some(*step_index);
            rec.label = Some(label);
            rec.class = Some(class.as_str());
        }
        AlertKind::MissedStep {
            missed_step_index,
            missed_label,
            triggered_by_class,
        } => {
            rec.step_index = Some(*missed_step_index);
            rec.label = Some(missed_label);
            rec.triggered_by = Some(triggered_by_class.as_str());
        }
        AlertKind::SessionComplete | AlertKind::SessionTimeout => {}
    }
    serde_json::to_string(&rec).expect("alert record serializes")
}

/// `mm:ss.mmm`, with hours prepended once they are needed.
pub fn format_ms(ms: u64) -> String {
    let (h, rem) = (ms / 3_600_000, ms % 3_600_000);
    let (m, rem) = (rem / 60_000, rem % 60_000);
    let (s, milli) = (rem / 1000, rem % 1000);
    if h > 0 {
        format!("{h}:{m:02}:{s:02}.{milli:03}")
    } else {
        format!("{m:02}:{s:02}.{milli:03}")
    }
}

/// Human-readable description of an alert.
pub fn describe_alert(alert: &Alert) -> String {
    match &alert.kind {
        AlertKind::StepCompleted {
            step_index,
            label,
            class,
        } => format!("step {} done: {label} ({})", step_index + 1, class.display_name()),
        AlertKind::MissedStep {
            missed_step_index,
            missed_label,
            triggered_by_class,
        } => format!(
            "MISSED step {}: {missed_label} (before {})",
            missed_step_index + 1,
            triggered_by_class.display_name()
        ),
        AlertKind::SessionComplete => "sequence complete".to_string(),
        AlertKind::SessionTimeout => "session timed out with steps pending".to_string(),
    }
}

pub struct TerminalSink {
    out: Box<dyn Write + Send>,
    color: bool,
    stats: SinkStats,
}

impl TerminalSink {
    /// Colour only when stdout is a terminal.
    pub fn stdout() -> Self {
        let color = io::stdout().is_terminal();
        TerminalSink::new(Box::new(io::stdout()), color)
    }

    pub fn new(out: Box<dyn Write + Send>, color: bool) -> Self {
        TerminalSink {
            out,
            color,
            stats: SinkStats::default(),
        }
    }

    fn line(&self, alert: &Alert) -> String {
        let text = format!(
            "[{}] frame {:>6}  {}",
            format_ms(alert.timestamp_ms),
            alert.frame_index,
            describe_alert(alert)
        );
        if !self.color {
            return text;
        }
        let code = match alert.kind {
            AlertKind::StepCompleted { .. } => "32",
            AlertKind::MissedStep { .. } => "1;31",
            AlertKind::SessionComplete => "1;32",
            AlertKind::SessionTimeout => "33",
        };
        format!("\x1b[{code}m{text}\x1b[0m")
    }
}

impl AlertSink for TerminalSink {
    fn name(&self) -> String {
        "terminal".into()
    }

    fn emit(&mut self, alert: &Alert) {
        let line = self.line(alert);
        match writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
            Ok(()) => self.stats.delivered += 1,
            Err(e) => {
                self.stats.failed += 1;
                log::warn!("terminal sink: {e}");
            }
        }
    }

    fn stats(&self) -> SinkStats {
        self.stats
    }
}

/// One alert JSON object per line, appended to a file.
pub struct JsonLogSink {
    path: String,
    out: BufWriter<File>,
    stats: SinkStats,
}

impl JsonLogSink {
    pub fn open(path: &Path) -> CliResult<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::Config(format!("json_log {}: {e}", path.display())))?;
        Ok(JsonLogSink {
            path: path.display().to_string(),
            out: BufWriter::new(file),
            stats: SinkStats::default(),
        })
    }
}

impl AlertSink for JsonLogSink {
    fn name(&self) -> String {
        format!("json_log {}", self.path)
    }

    fn emit(&mut self, alert: &Alert) {
        let line = alert_json(alert);
        // Flushed per alert so followers of the file see it immediately.
        match writeln!(self.out, "{line}").and_then(|_| self.out.flush()) {
            Ok(()) => self.stats.delivered += 1,
            Err(e) => {
                self.stats.failed += 1;
                log::warn!("json_log {}: {e}", self.path);
            }
        }
    }

    fn stats(&self) -> SinkStats {
        self.stats
    }
}

pub fn build_sink(cfg: &SinkConfig) -> CliResult<Box<dyn AlertSink>> {
    cfg.validate()?;
    Ok(match cfg {
        SinkConfig::Terminal => Box::new(TerminalSink::stdout()),
        SinkConfig::JsonLog { path } => Box::new(JsonLogSink::open(path)?),
        SinkConfig::Webhook {
            url,
            timeout_ms,
            retry_count,
            queue_capacity,
        } => Box::new(WebhookSink::spawn(url.clone(), *timeout_ms, *retry_count, *queue_capacity)),
    })
}

pub fn build_sinks(cfgs: &[SinkConfig]) -> CliResult<Vec<Box<dyn AlertSink>>> {
    cfgs.iter().map(build_sink).collect()
}
