//! Detector output to ordered [`FrameBatch`]es.
//!
//! Two file formats are understood: the native JSON-lines wire format (one
//! frame per line) and darknet's JSON array output. Batches can then be
//! replayed with timestamp pacing or received live over TCP.

mod darknet;
mod listener;
mod replay;
mod wire;

use std::fs;
use std::path::{Path, PathBuf};

pub use darknet::parse_darknet_json;
pub use listener::{BatchConsumer, ConnectionStats, Listener, ShutdownHandle, DEFAULT_QUEUE_CAPACITY};
pub use replay::{replay_batches, run_replay, Pacing, ReplayStats};
pub use wire::{
    parse_event_line, read_event_lines, render_event_line, write_event_lines, Decoded, LineDecoder,
};

use crate::error::{Error, Result};
use crate::types::FrameBatch;

/// How to treat records that violate the format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Reject the record (and, for streams, stop).
    #[default]
    Strict,
    /// Drop what cannot be used, count it, and carry on. Out-of-range
    /// confidences are clamped instead of dropped.
    Lenient,
}

/// Frames plus the number of records or detections that were discarded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Parsed {
    pub batches: Vec<FrameBatch>,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// One JSON object per line.
    Native,
    /// A darknet JSON array of frame objects.
    Darknet,
}

impl FileFormat {
    /// Guess from the extension, falling back to the first non-blank byte.
    pub fn detect(path: &Path, content: &str) -> FileFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => FileFormat::Native,
            Some("json") => FileFormat::Darknet,
            _ => match content.trim_start().as_bytes().first() {
                Some(b'[') => FileFormat::Darknet,
                _ => FileFormat::Native,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamSource {
    NetworkListener { bind: String },
    FileReplay { path: PathBuf, pacing: Pacing },
    StandardInput,
}

/// Read and parse a recorded detector file in full.
pub fn load_file(
    path: &Path,
    format: Option<FileFormat>,
    fps: f64,
    strictness: Strictness,
) -> Result<Parsed> {
    let content = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format.unwrap_or_else(|| FileFormat::detect(path, &content)) {
        FileFormat::Native => read_event_lines(content.as_bytes(), strictness),
        FileFormat::Darknet => parse_darknet_json(&content, fps, strictness),
    }
}
