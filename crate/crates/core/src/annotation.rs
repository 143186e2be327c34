//! Annotation derivations: box interpolation between keyframes and the
//! low-depth-quality flag computed from the confidence map.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{Attribute, AttributeFlags, BoundingBox, ConfidenceMap};

/// Default fraction of low-confidence pixels above which a box is flagged LD.
pub const LD_THRESHOLD: f64 = 0.5;

/// Keyframe boxes of one target. `None` marks a keyframe where the target is invisible.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeTrack {
    keys: Vec<(u64, Option<BoundingBox>)>,
}

impl KeyframeTrack {
    pub fn new(keys: Vec<(u64, Option<BoundingBox>)>) -> Result<Self> {
        if keys.is_empty() {
            return Err(Error::invalid("keyframes", "track has no keyframes"));
        }
        if keys.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("keyframes", "keyframe indices are not strictly increasing"));
        }
        Ok(Self { keys })
    }

    pub fn keys(&self) -> &[(u64, Option<BoundingBox>)] {
        &self.keys
    }
}

/// Linearly interpolates `(x, y, w, h)` for every frame in `frames`.
///
/// Frames before the first or after the last keyframe get `None`, as do frames
/// between two keyframes when either one is invisible.
pub fn interpolate_boxes(track: &KeyframeTrack, frames: Range<u64>) -> Result<Vec<Option<BoundingBox>>> {
    let keys = &track.keys;
    if keys.iter().any(|(f, _)| !frames.contains(f)) {
        return Err(Error::invalid("frames", "keyframe index outside the frame range"));
    }
    let mut out = Vec::with_capacity((frames.end - frames.start) as usize);
    let mut seg = 0;
    for t in frames {
        while seg + 1 < keys.len() && keys[seg + 1].0 <= t {
            seg += 1;
        }
        let (t0, b0) = keys[seg];
        let b = if t == t0 {
            b0
        } else if t < t0 || seg + 1 == keys.len() {
            None
        } else {
            let (t1, b1) = keys[seg + 1];
            match (b0, b1) {
                (Some(a), Some(b)) => Some(lerp_box(&a, &b, (t - t0) as f64 / (t1 - t0) as f64)?),
                _ => None,
            }
        };
        out.push(b);
    }
    Ok(out)
}

fn lerp_box(a: &BoundingBox, b: &BoundingBox, s: f64) -> Result<BoundingBox> {
    let l = |p: f64, q: f64| p + (q - p) * s;
    BoundingBox::new(l(a.x(), b.x()), l(a.y(), b.y()), l(a.w(), b.w()), l(a.h(), b.h()))
}

/// Pixel columns and rows covered by `b`, clipped to a `width x height` image.
pub(crate) fn pixel_span(b: &BoundingBox, width: usize, height: usize) -> (Range<usize>, Range<usize>) {
    let clip = |lo: f64, hi: f64, n: usize| {
        let a = lo.floor().clamp(0.0, n as f64) as usize;
        let z = hi.ceil().clamp(0.0, n as f64) as usize;
        a..z.max(a)
    };
    (clip(b.x(), b.right(), width), clip(b.y(), b.bottom(), height))
}

/// True when more than `threshold` of the box's pixels have confidence below 2.
pub fn compute_ld_flag(conf: &ConfidenceMap, b: &BoundingBox, threshold: f64) -> Result<bool> {
    let (cols, rows) = pixel_span(b, conf.width(), conf.height());
    if cols.is_empty() || rows.is_empty() {
        return Err(Error::invalid("box", "box lies outside the confidence map"));
    }
    let total = cols.len() * rows.len();
    let low = rows
        .flat_map(|y| cols.clone().map(move |x| (x, y)))
        .filter(|&(x, y)| conf.get(x, y) < 2)
        .count();
    Ok(low as f64 / total as f64 > threshold)
}

/// Replaces the LD flag on every frame with the value derived from its confidence map.
/// Frames without a box, or whose box misses the map, lose the flag.
pub fn relabel_ld(
    flags: &mut [AttributeFlags],
    boxes: &[Option<BoundingBox>],
    confidence: &[&ConfidenceMap],
    threshold: f64,
) -> Result<()> {
    if flags.len() != boxes.len() || boxes.len() != confidence.len() {
        return Err(Error::shape(format!("{} frames", flags.len()), format!("{} boxes, {} maps", boxes.len(), confidence.len())));
    }
    for ((f, b), c) in flags.iter_mut().zip(boxes).zip(confidence) {
        let ld = match b {
            Some(b) => compute_ld_flag(c, b, threshold).unwrap_or(false),
            None => false,
        };
        f.set(Attribute::LowDepthQuality, ld);
    }
    Ok(())
}
