use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::Path;

use ppe_core::ingest::{
    load_file, replay_batches, BatchConsumer, ConnectionStats, FileFormat, LineDecoder, Listener, Pacing,
    ShutdownHandle,
};
use ppe_core::{EndReason, FrameBatch, Verdict};

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::pipeline::{Pipeline, SessionReport};
use crate::report::write_report;
use crate::sinks::AlertSink;

/// Live TCP monitoring: each client connection is one session.
pub struct MonitorService {
    listener: Listener,
    pipeline: Pipeline,
}

impl MonitorService {
    pub fn bind(settings: &Settings, bind: &str, sinks: Vec<Box<dyn AlertSink>>) -> CliResult<Self> {
        let listener = Listener::bind(bind, settings.strictness).map_err(|e| CliError::Bind(e.to_string()))?;
        Ok(MonitorService {
            listener,
            pipeline: Pipeline::from_settings(settings, sinks),
        })
    }

    pub fn local_addr(&self) -> CliResult<SocketAddr> {
        self.listener.local_addr().map_err(|e| CliError::Bind(e.to_string()))
    }

    pub fn shutdown_handle(&self) -> CliResult<ShutdownHandle> {
        self.listener.shutdown_handle().map_err(|e| CliError::Bind(e.to_string()))
    }

    /// Serve until shut down; returns the verdict of every session.
    pub fn run(mut self, out: &mut dyn Write) -> CliResult<Vec<Verdict>> {
        let mut consumer = SessionConsumer {
            pipeline: &mut self.pipeline,
            out,
            verdicts: Vec::new(),
        };
        self.listener
            .run(&mut consumer)
            .map_err(|e| CliError::Bind(e.to_string()))?;
        Ok(consumer.verdicts)
    }
}

struct SessionConsumer<'a> {
    pipeline: &'a mut Pipeline,
    out: &'a mut dyn Write,
    verdicts: Vec<Verdict>,
}

impl BatchConsumer for SessionConsumer<'_> {
    fn begin_session(&mut self, peer: SocketAddr) {
        log::info!("session started: {peer}");
        let _ = writeln!(self.out, "session: client {peer}");
    }

    fn on_batch(&mut self, batch: FrameBatch) {
        self.pipeline.process(&batch);
    }

    fn end_session(&mut self, stats: &ConnectionStats) {
        if let Some(e) = &stats.error {
            log::warn!("connection closed on error: {e}");
            let _ = writeln!(self.out, "input error: {e}");
        }
        self.pipeline.note_dropped(stats.dropped);
        let report = self.pipeline.finish(EndReason::EndOfStream);
        let _ = write_report(self.out, &report);
        let _ = self.out.flush();
        self.verdicts.push(report.verdict);
    }
}

/// One session from newline-delimited records on `input`. A strict-mode
/// error ends the session early; it is returned next to the report.
pub fn run_lines(
    settings: &Settings,
    input: impl BufRead,
    sinks: Vec<Box<dyn AlertSink>>,
) -> (SessionReport, Option<CliError>) {
    let mut pipeline = Pipeline::from_settings(settings, sinks);
    let mut decoder = LineDecoder::new(settings.strictness);
    let mut error = None;
    for line in input.lines() {
        let decoded = line
            .map_err(|e| ppe_core::Error::from(e))
            .and_then(|l| decoder.decode(&l));
        match decoded {
            Ok(Some(batch)) => {
                pipeline.process(&batch);
            }
            Ok(None) => {}
            Err(e) => {
                error = Some(CliError::parse(e));
                break;
            }
        }
    }
    pipeline.note_dropped(decoder.dropped());
    (pipeline.finish(EndReason::EndOfStream), error)
}

/// One session from a recorded file, delivered with the given pacing.
pub fn run_file(
    settings: &Settings,
    path: &Path,
    format: Option<FileFormat>,
    pacing: Pacing,
    sinks: Vec<Box<dyn AlertSink>>,
) -> CliResult<SessionReport> {
    let parsed = load_file(path, format, settings.fps, settings.strictness).map_err(CliError::parse)?;
    let mut pipeline = Pipeline::from_settings(settings, sinks);
    pipeline.note_dropped(parsed.dropped);
    replay_batches(&parsed.batches, pacing, |b| {
        pipeline.process(b);
        Ok(())
    })
    .map_err(CliError::parse)?;
    Ok(pipeline.finish(EndReason::EndOfStream))
}
