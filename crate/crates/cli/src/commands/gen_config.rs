use std::fmt::Write as _;

use ppe_core::threshold::{derive_confidence_threshold, ThresholdPolicy};
use ppe_core::{parse_class, ClassThreshold, Mode, PpeClass};

use crate::config::{DEFAULT_BIND, DEFAULT_FPS, DEFAULT_SESSION_TIMEOUT_S};
use crate::error::{CliError, CliResult};

/// Output filters of each darknet YOLO detection layer:
/// `(classes + 5) * 3`, three anchors each predicting box, objectness and
/// class scores.
pub fn darknet_filters(num_classes: u32) -> u32 {
    (num_classes + 5) * 3
}

/// Parse `class=ap`.
pub fn parse_ap(arg: &str) -> CliResult<(PpeClass, f64)> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--ap expects CLASS=AP, got {arg:?}")))?;
    let class = parse_class(name.trim()).map_err(CliError::config)?;
    let ap: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("--ap {name}: {value:?} is not a number")))?;
    Ok((class, ap))
}

/// A starter config file with confidence thresholds derived from per-class
/// AP, headed by the darknet filter count for cross-checking a `.cfg`.
pub fn render(num_classes: u32, mode: Mode, aps: &[(PpeClass, f64)], policy: &ThresholdPolicy) -> CliResult<String> {
    if num_classes < 1 {
        return Err(CliError::Config("--classes must be >= 1".into()));
    }
    let mut derived: Vec<(PpeClass, f64, f64)> = Vec::new();
    for &(class, ap) in aps {
        if derived.iter().any(|d| d.0 == class) {
            return Err(CliError::Config(format!("--ap {class} given twice")));
        }
        let th = derive_confidence_threshold(ap, policy).map_err(|e| CliError::Config(format!("--ap {class}: {e}")))?;
        derived.push((class, ap, th));
    }
    derived.sort_by_key(|d| d.0);

    let d = ClassThreshold::default();
    let mut s = String::new();
    let _ = writeln!(s, "# ppewatch starter configuration");
    let _ = writeln!(s, "# darknet cfg cross-check: classes={num_classes} filters={}", darknet_filters(num_classes));
    let _ = writeln!(s);
    let _ = writeln!(s, "mode = \"{mode}\"");
    let _ = writeln!(s, "fps = {DEFAULT_FPS:?}");
    let _ = writeln!(s, "strict = true");
    let _ = writeln!(s, "session_timeout_s = {DEFAULT_SESSION_TIMEOUT_S:?}");
    let _ = writeln!(s);
    let _ = writeln!(s, "[sequence]\nbuiltin = \"{mode}\"\n");
    let _ = writeln!(s, "[thresholds.default]");
    let _ = writeln!(s, "th_confidence = {:?}", d.th_confidence);
    let _ = writeln!(s, "th_frequency = {}", d.th_frequency);
    let _ = writeln!(s, "window_frames = {}", d.window_frames);
    let _ = writeln!(s, "removal_window_frames = {}", d.removal_window_frames);
    let _ = writeln!(s);
    let _ = writeln!(s, "[thresholds.policy]");
    let _ = writeln!(s, "alpha = {:?}\nfloor = {:?}\nceil = {:?}", policy.alpha, policy.floor, policy.ceil);
    for (class, ap, th) in &derived {
        let _ = writeln!(s);
        let _ = writeln!(s, "# ap = {ap:?}");
        let _ = writeln!(s, "[thresholds.classes.{}]", class.as_str());
        let _ = writeln!(s, "th_confidence = {th:?}");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "[source]\nkind = \"listener\"\nbind = \"{DEFAULT_BIND}\"");
    let _ = writeln!(s);
    let _ = writeln!(s, "[[sinks]]\nkind = \"terminal\"");
    Ok(s)
}
