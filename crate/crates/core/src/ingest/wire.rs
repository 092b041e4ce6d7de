//! Native wire format: UTF-8, one JSON object per `\n`-terminated line.
//!
//! ```text
//! {"frame":12,"t_ms":400,"detections":[{"class":"mask","conf":0.87,"bbox":[0.5,0.4,0.1,0.1]}]}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Parsed, Strictness};
use crate::error::{Error, Result};
use crate::types::{parse_class, BBox, DetectionEvent, FrameBatch, PpeClass};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord<'a> {
    frame: u64,
    t_ms: u64,
    #[serde(borrow)]
    detections: Vec<WireDetection<'a>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDetection<'a> {
    #[serde(borrow)]
    class: std::borrow::Cow<'a, str>,
    conf: f64,
    bbox: [f64; 4],
}

/// A parsed line and how many of its detections were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub batch: FrameBatch,
    pub dropped: usize,
}

/// Validate one detection under `strictness`. `Ok(None)` means "drop it".
pub(super) fn admit_detection(
    name: &str,
    conf: f64,
    bbox: BBox,
    frame: u64,
    t_ms: u64,
    strictness: Strictness,
) -> Result<Option<DetectionEvent>> {
    let class: PpeClass = match parse_class(name) {
        Ok(c) => c,
        Err(e) if strictness == Strictness::Strict => return Err(e),
        Err(_) => return Ok(None),
    };
    let confidence = match strictness {
        Strictness::Lenient if conf.is_nan() => return Ok(None),
        Strictness::Lenient => conf.clamp(0.0, 1.0),
        Strictness::Strict => conf,
    };
    let d = DetectionEvent {
        frame_index: frame,
        timestamp_ms: t_ms,
        class,
        confidence,
        bbox,
    };
    match d.validate() {
        Ok(()) => Ok(Some(d)),
        Err(e) if strictness == Strictness::Strict => Err(e),
        Err(_) => Ok(None),
    }
}

/// Parse one native-format record.
pub fn parse_event_line(line: &str, strictness: Strictness) -> Result<Decoded> {
    let record: WireRecord<'_> =
        serde_json::from_str(line.trim_end()).map_err(|e| Error::malformed(e.to_string()))?;
    let mut dropped = 0;
    let mut detections = Vec::with_capacity(record.detections.len());
    for d in &record.detections {
        let [cx, cy, w, h] = d.bbox;
        match admit_detection(&d.class, d.conf, BBox { cx, cy, w, h }, record.frame, record.t_ms, strictness)? {
            Some(ev) => detections.push(ev),
            None => dropped += 1,
        }
    }
    Ok(Decoded {
        batch: FrameBatch::new(record.frame, record.t_ms, detections)?,
        dropped,
    })
}

/// Render a batch as one native-format line, without the trailing newline.
pub fn render_event_line(batch: &FrameBatch) -> String {
    let record = WireRecord {
        frame: batch.frame_index,
        t_ms: batch.timestamp_ms,
        detections: batch
            .detections()
            .iter()
            .map(|d| WireDetection {
                class: d.class.as_str().into(),
                conf: d.confidence,
                bbox: [d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h],
            })
            .collect(),
    };
    serde_json::to_string(&record).expect("wire records always serialize")
}

pub fn write_event_lines<W: Write>(batches: &[FrameBatch], mut out: W) -> std::io::Result<()> {
    for b in batches {
        out.write_all(render_event_line(b).as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Stateful line decoder for a stream: numbers lines, enforces strictly
/// increasing frame indices and applies the strict/lenient policy.
#[derive(Debug, Clone)]
pub struct LineDecoder {
    strictness: Strictness,
    line_no: usize,
    last_frame: Option<u64>,
    dropped: usize,
}

impl LineDecoder {
    pub fn new(strictness: Strictness) -> Self {
        LineDecoder {
            strictness,
            line_no: 0,
            last_frame: None,
            dropped: 0,
        }
    }

    pub fn strictness(&self) -> Strictness {
        self.strictness
    }

    /// Records or detections discarded so far (lenient mode only).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn lines(&self) -> usize {
        self.line_no
    }

    /// Decode the next line. Blank lines and dropped records yield `None`.
    pub fn decode(&mut self, line: &str) -> Result<Option<FrameBatch>> {
        self.line_no += 1;
        if line.trim().is_empty() {
            return Ok(None);
        }
        let lenient = self.strictness == Strictness::Lenient;
        let decoded = match parse_event_line(line, self.strictness) {
            Ok(d) => d,
            Err(_) if lenient => {
                self.dropped += 1;
                return Ok(None);
            }
            Err(e) => return Err(e.at_line(self.line_no)),
        };
        if let Some(last) = self.last_frame {
            if decoded.batch.frame_index <= last {
                if lenient {
                    self.dropped += 1;
                    return Ok(None);
                }
                return Err(Error::NonMonotonicFrame {
                    last,
                    got: decoded.batch.frame_index,
                });
            }
        }
        self.last_frame = Some(decoded.batch.frame_index);
        self.dropped += decoded.dropped;
        Ok(Some(decoded.batch))
    }
}

/// Parse a whole native-format stream.
pub fn read_event_lines<R: BufRead>(reader: R, strictness: Strictness) -> Result<Parsed> {
    let mut decoder = LineDecoder::new(strictness);
    let mut batches = Vec::new();
    for line in reader.lines() {
        if let Some(b) = decoder.decode(&line?)? {
            batches.push(b);
        }
    }
    Ok(Parsed {
        batches,
        dropped: decoder.dropped(),
    })
}
