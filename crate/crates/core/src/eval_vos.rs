//! Segmentation metrics: region similarity J (mask IoU), contour accuracy F
//! (boundary F-measure under a distance tolerance) and their aggregation.

use std::path::Path;

use rayon::prelude::*;

use crate::dataset::{read_mask_png, write_mask_png, DatasetLayout};
use crate::error::{Error, Result};
use crate::eval_vot::ExactSum;
use crate::model::{mask_iou, TargetMask, Track};

pub fn region_similarity(pred: &TargetMask, gt: &TargetMask) -> Result<f64> {
    mask_iou(pred, gt)
}

/// Set pixels with at least one unset 4-neighbour, or lying on the image border.
pub fn boundary(m: &TargetMask) -> Vec<bool> {
    let (w, h) = (m.width(), m.height());
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            let edge = x == 0 || y == 0 || x + 1 == w || y + 1 == h;
            out[y * w + x] = edge || !m.get(x - 1, y) || !m.get(x + 1, y) || !m.get(x, y - 1) || !m.get(x, y + 1);
        }
    }
    out
}

/// Marks every pixel within Euclidean distance `radius` of a set pixel.
fn dilate(b: &[bool], w: usize, h: usize, radius: f64) -> Vec<bool> {
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let disc: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r2)
        .collect();
    let mut out = vec![false; w * h];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if !b[y as usize * w + x as usize] {
                continue;
            }
            for &(dx, dy) in &disc {
                let (u, v) = (x + dx, y + dy);
                if u >= 0 && v >= 0 && (u as usize) < w && (v as usize) < h {
                    out[v as usize * w + u as usize] = true;
                }
            }
        }
    }
    out
}

/// Boundary F-measure of `pred` against `gt` with matching tolerance `radius` pixels.
pub fn contour_accuracy(pred: &TargetMask, gt: &TargetMask, radius: f64) -> Result<f64> {
    if (pred.width(), pred.height()) != (gt.width(), gt.height()) {
        return Err(Error::shape(
            format!("{}x{}", gt.width(), gt.height()),
            format!("{}x{}", pred.width(), pred.height()),
        ));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("{radius} is not a non-negative distance")));
    }
    let (w, h) = (gt.width(), gt.height());
    let bp = boundary(pred);
    let bg = boundary(gt);
    let np = bp.iter().filter(|&&v| v).count();
    let ng = bg.iter().filter(|&&v| v).count();
    match (np, ng) {
        (0, 0) => return Ok(1.0),
        (0, _) | (_, 0) => return Ok(0.0),
        _ => {}
    }
    let near_gt = dilate(&bg, w, h, radius);
    let near_pred = dilate(&bp, w, h, radius);
    let hits_p = bp.iter().zip(&near_gt).filter(|(b, d)| **b && **d).count();
    let hits_g = bg.iter().zip(&near_pred).filter(|(b, d)| **b && **d).count();
    let precision = hits_p as f64 / np as f64;
    let recall = hits_g as f64 / ng as f64;
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// `round(0.008 * diagonal)` pixels.
pub fn default_radius(width: usize, height: usize) -> f64 {
    (0.008 * ((width * width + height * height) as f64).sqrt()).round()
}

/// Per-frame J and F of one track, over the frames where ground truth has a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackScores {
    pub name: String,
    pub frames: Vec<u64>,
    pub j: Vec<f64>,
    pub f: Vec<f64>,
}

/// Scores `preds` (aligned with `track.frames`) against the track's masks.
/// A missing prediction on an annotated frame counts as an empty mask.
pub fn evaluate_track(track: &Track, preds: &[Option<TargetMask>], radius: Option<f64>) -> Result<TrackScores> {
    if preds.len() != track.len() {
        return Err(Error::shape(format!("{} predictions", track.len()), preds.len()));
    }
    let rows: Vec<(u64, f64, f64)> = track
        .masks
        .par_iter()
        .zip(preds)
        .zip(&track.frames)
        .filter_map(|((gt, p), &frame)| gt.as_ref().map(|g| (frame, g, p)))
        .map(|(frame, g, p)| {
            let empty;
            let p = match p {
                Some(p) => p,
                None => {
                    empty = TargetMask::empty(g.width(), g.height());
                    &empty
                }
            };
            let r = radius.unwrap_or_else(|| default_radius(g.width(), g.height()));
            Ok((frame, region_similarity(p, g)?, contour_accuracy(p, g, r)?))
        })
        .collect::<Result<_>>()?;
    Ok(TrackScores {
        name: track.name(),
        frames: rows.iter().map(|r| r.0).collect(),
        j: rows.iter().map(|r| r.1).collect(),
        f: rows.iter().map(|r| r.2).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VosAggregate {
    pub j_m: f64,
    pub f_m: f64,
    pub j_and_f: f64,
}

fn exact_mean(values: &[f64]) -> f64 {
    let s: ExactSum = values.iter().copied().collect();
    s.value() / values.len() as f64
}

/// Per-track means over frames, then the mean over tracks.
///
/// With `exclude_ends` the first and last annotated frame of each track are
/// dropped; tracks left without frames are skipped.
pub fn aggregate(tracks: &[TrackScores], exclude_ends: bool) -> Result<VosAggregate> {
    let mut js = Vec::with_capacity(tracks.len());
    let mut fs = Vec::with_capacity(tracks.len());
    for t in tracks {
        if t.j.len() != t.f.len() {
            return Err(Error::shape(format!("{} contour scores", t.j.len()), t.f.len()));
        }
        let n = t.j.len();
        let range = if exclude_ends { 1..n.saturating_sub(1).max(1) } else { 0..n };
        if range.is_empty() {
            continue;
        }
        js.push(exact_mean(&t.j[range.clone()]));
        fs.push(exact_mean(&t.f[range]));
    }
    if js.is_empty() {
        return Err(Error::invalid("tracks", "no annotated frames to aggregate"));
    }
    let j_m = exact_mean(&js);
    let f_m = exact_mean(&fs);
    Ok(VosAggregate {
        j_m,
        f_m,
        j_and_f: (j_m + f_m) / 2.0,
    })
}

/// Reads mask predictions for `track` from `<preds>/<sequence>/`, using the
/// dataset mask naming. Absent files yield `None`.
pub fn read_mask_predictions(preds_root: &Path, track: &Track) -> Result<Vec<Option<TargetMask>>> {
    let layout = DatasetLayout::default();
    let dir = preds_root.join(&track.sequence);
    track
        .frames
        .iter()
        .map(|&f| {
            let p = dir.join(layout.mask_path(f, track.target));
            if p.is_file() {
                read_mask_png(&p).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Writes `masks` (aligned with `track.frames`) in the layout [`read_mask_predictions`] expects.
pub fn write_mask_predictions(preds_root: &Path, track: &Track, masks: &[Option<TargetMask>]) -> Result<()> {
    let layout = DatasetLayout::default();
    let dir = preds_root.join(&track.sequence);
    for (&f, m) in track.frames.iter().zip(masks) {
        if let Some(m) = m {
            write_mask_png(&dir.join(layout.mask_path(f, track.target)), m)?;
        }
    }
    Ok(())
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn rect_mask() -> impl Strategy<Value = (i64, i64, i64, i64)> {
        (2i64..10, 2i64..10, 1i64..8, 1i64..8)
    }

    proptest! {
        #[test]
        fn translation_invariance(a in rect_mask(), b in rect_mask(), dx in -2i64..3, dy in -2i64..3) {
            let m = |r: (i64, i64, i64, i64), ox: i64, oy: i64| TargetMask::from_rect(24, 24, r.0 + ox, r.1 + oy, r.0 + r.2 + ox, r.1 + r.3 + oy);
            let (p, g) = (m(a, 0, 0), m(b, 0, 0));
            let (ps, gs) = (m(a, dx, dy), m(b, dx, dy));
            prop_assert_eq!(region_similarity(&p, &g).unwrap(), region_similarity(&ps, &gs).unwrap());
            prop_assert_eq!(contour_accuracy(&p, &g, 2.0).unwrap(), contour_accuracy(&ps, &gs, 2.0).unwrap());
        }

        #[test]
        fn contour_monotone_in_radius(bits in proptest::collection::vec(any::<bool>(), 144), other in proptest::collection::vec(any::<bool>(), 144), r1 in 0.0..4.0f64, r2 in 0.0..4.0f64) {
            let p = TargetMask::from_fn(12, 12, |x, y| bits[y * 12 + x]);
            let g = TargetMask::from_fn(12, 12, |x, y| other[y * 12 + x]);
            let (lo, hi) = (r1.min(r2), r1.max(r2));
            prop_assert!(contour_accuracy(&p, &g, lo).unwrap() <= contour_accuracy(&p, &g, hi).unwrap());
        }

        #[test]
        fn aggregate_permutation_invariant(vals in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..12), split in 1usize..4) {
            let tracks: Vec<TrackScores> = vals
                .chunks(split)
                .map(|c| TrackScores { name: String::new(), frames: vec![], j: c.iter().map(|v| v.0).collect(), f: c.iter().map(|v| v.1).collect() })
                .collect();
            let mut rev: Vec<TrackScores> = tracks.iter().rev().cloned().collect();
            for t in &mut rev {
                t.j.reverse();
                t.f.reverse();
            }
            prop_assert_eq!(aggregate(&tracks, false).unwrap(), aggregate(&rev, false).unwrap());
        }
    }
}
