use std::io::{self, Write};

use ppe_core::{AlertKind, Outcome};

use crate::pipeline::SessionReport;
use crate::sinks::{describe_alert, format_ms};

/// Step table, alert list, verdict and statistics for one session.
pub fn write_report(out: &mut dyn Write, r: &SessionReport) -> io::Result<()> {
    writeln!(out, "sequence: {} ({} steps)", r.spec.mode(), r.spec.len())?;
    for rec in &r.verdict.step_records {
        let label = r.spec.label(rec.step_index);
        match rec.completion {
            Some(c) => writeln!(
                out,
                "  {}. {:<22} done     {:<12} frame {:>6}  {}",
                rec.step_index + 1,
                label,
                c.class.as_str(),
                c.frame_index,
                format_ms(c.timestamp_ms)
            )?,
            None => writeln!(out, "  {}. {:<22} pending", rec.step_index + 1, label)?,
        }
    }
    writeln!(out, "alerts: {}", r.alerts.len())?;
    for a in &r.alerts {
        writeln!(out, "  [{}] frame {:>6}  {}", format_ms(a.timestamp_ms), a.frame_index, describe_alert(a))?;
    }
    write!(out, "verdict: {}", r.verdict.outcome.name())?;
    match &r.verdict.outcome {
        Outcome::Compliant => {}
        Outcome::NonCompliant { violations } => {
            let labels: Vec<&str> = violations
                .iter()
                .filter_map(|a| match &a.kind {
                    AlertKind::MissedStep { missed_label, .. } => Some(missed_label.as_str()),
                    _ => None,
                })
                .collect();
            write!(out, " (missed: {})", labels.join(", "))?;
        }
        Outcome::Incomplete { pending_steps } => {
            let labels: Vec<&str> = pending_steps.iter().map(|&i| r.spec.label(i)).collect();
            write!(out, " (pending: {})", labels.join(", "))?;
        }
    }
    writeln!(out, " duration {}", format_ms(r.verdict.session_duration_ms))?;
    writeln!(out, "stats: {}", r.stats)?;
    for (name, s) in &r.sinks {
        if s.failed > 0 || s.dropped > 0 {
            writeln!(
                out,
                "sink {name}: delivered={} failed={} dropped={}",
                s.delivered, s.failed, s.dropped
            )?;
        }
    }
    Ok(())
}
