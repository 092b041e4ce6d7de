//! Darknet `-out result.json` output: a JSON array of frame objects.
//!
//! ```text
//! [{"frame_id":1,"filename":"...","objects":[
//!   {"class_id":2,"name":"Gloves","confidence":0.9,
//!    "relative_coordinates":{"center_x":0.5,"center_y":0.5,"width":0.2,"height":0.2}}]}]
//! ```
//!
//! Darknet emits no timestamps; they are synthesized as
//! `round(frame_id * 1000 / fps)` milliseconds.

use serde::Deserialize;

use super::wire::admit_detection;
use super::{Parsed, Strictness};
use crate::error::{Error, Result};
use crate::types::{BBox, FrameBatch};

#[derive(Deserialize)]
struct DarknetFrame {
    frame_id: u64,
    #[serde(default)]
    objects: Vec<DarknetObject>,
}

#[derive(Deserialize)]
struct DarknetObject {
    name: String,
    confidence: f64,
    relative_coordinates: RelativeCoordinates,
}

#[derive(Deserialize)]
struct RelativeCoordinates {
    center_x: f64,
    center_y: f64,
    width: f64,
    height: f64,
}

pub fn parse_darknet_json(document: &str, fps: f64, strictness: Strictness) -> Result<Parsed> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::InvalidSource(format!("fps must be positive, got {fps}")));
    }
    let frames: Vec<DarknetFrame> =
        serde_json::from_str(document).map_err(|e| Error::malformed(e.to_string()))?;

    let mut parsed = Parsed::default();
    let mut last: Option<u64> = None;
    for frame in frames {
        if let Some(last) = last {
            if frame.frame_id <= last {
                return Err(Error::NonMonotonicFrame {
                    last,
                    got: frame.frame_id,
                });
            }
        }
        last = Some(frame.frame_id);

        let t_ms = (frame.frame_id as f64 * 1000.0 / fps).round() as u64;
        let mut detections = Vec::with_capacity(frame.objects.len());
        for obj in &frame.objects {
            let rc = &obj.relative_coordinates;
            let bbox = BBox::new(rc.center_x, rc.center_y, rc.width, rc.height);
            match admit_detection(&obj.name, obj.confidence, bbox, frame.frame_id, t_ms, strictness)? {
                Some(d) => detections.push(d),
                None => parsed.dropped += 1,
            }
        }
        parsed
            .batches
            .push(FrameBatch::new(frame.frame_id, t_ms, detections)?);
    }
    Ok(parsed)
}
