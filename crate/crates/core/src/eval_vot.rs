//! Long-term box tracking evaluation: precision, recall and F-score at a
//! confidence threshold, the exhaustive threshold sweep, and per-attribute
//! breakdowns.
//!
//! A prediction counts at threshold `tau` when it has a box and its confidence
//! is at least `tau`. Precision averages IoU over counted predictions (a
//! prediction on a frame where the target is absent scores 0); recall averages
//! IoU over frames where the target is visible.
//!
//! IoU sums are accumulated with [`ExactSum`], so every aggregate is the
//! correctly rounded value of the exact sum regardless of frame order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{box_iou, Attribute, AttributeFlags, BoundingBox, TrackPrediction};

/// Exact floating-point summation (Shewchuk partials with a correctly rounded result).
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(&last) = p.last() else {
            return 0.0;
        };
        let mut n = p.len() - 1;
        let mut hi = last;
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // round half-even across the remaining partials
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Per-frame predictions of one track, aligned with its ground truth.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackResult {
    pub predictions: Vec<TrackPrediction>,
}

impl TrackResult {
    pub fn new(predictions: Vec<TrackPrediction>) -> Self {
        Self { predictions }
    }

    /// Ground truth replayed as a prediction with full confidence.
    pub fn from_ground_truth(gt: &[Option<BoundingBox>]) -> Self {
        Self {
            predictions: gt
                .iter()
                .map(|b| TrackPrediction {
                    bbox: *b,
                    confidence: 1.0,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

/// What one frame contributes to the measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub confidence: f64,
    pub has_box: bool,
    pub visible: bool,
    /// IoU with the ground truth; 0 when either side is absent.
    pub iou: f64,
}

impl FrameScore {
    fn counted(&self, tau: f64) -> bool {
        self.has_box && self.confidence >= tau
    }
}

pub fn score_frames(result: &TrackResult, gt: &[Option<BoundingBox>]) -> Result<Vec<FrameScore>> {
    if result.len() != gt.len() {
        return Err(Error::shape(format!("{} predictions", gt.len()), result.len()));
    }
    Ok(result
        .predictions
        .iter()
        .zip(gt)
        .map(|(p, g)| FrameScore {
            confidence: p.confidence,
            has_box: p.bbox.is_some(),
            visible: g.is_some(),
            iou: match (&p.bbox, g) {
                (Some(a), Some(b)) => box_iou(a, b),
                _ => 0.0,
            },
        })
        .collect())
}

/// Precision at one threshold, with the number of counted predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Precision {
    /// 0 when no prediction is counted.
    pub value: f64,
    pub predicted: usize,
}

impl Precision {
    /// False when no prediction passed the threshold.
    pub fn defined(&self) -> bool {
        self.predicted > 0
    }
}

fn precision_of(frames: &[FrameScore], tau: f64) -> Precision {
    let counted: Vec<&FrameScore> = frames.iter().filter(|f| f.counted(tau)).collect();
    let sum: ExactSum = counted.iter().map(|f| f.iou).collect();
    Precision {
        value: ratio(sum.value(), counted.len()),
        predicted: counted.len(),
    }
}

fn recall_of(frames: &[FrameScore], tau: f64) -> (f64, usize) {
    let visible = frames.iter().filter(|f| f.visible).count();
    let sum: ExactSum = frames
        .iter()
        .filter(|f| f.visible && f.counted(tau))
        .map(|f| f.iou)
        .collect();
    (ratio(sum.value(), visible), visible)
}

fn ratio(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn precision_at(result: &TrackResult, gt: &[Option<BoundingBox>], tau: f64) -> Result<Precision> {
    Ok(precision_of(&score_frames(result, gt)?, tau))
}

pub fn recall_at(result: &TrackResult, gt: &[Option<BoundingBox>], tau: f64) -> Result<f64> {
    let (re, visible) = recall_of(&score_frames(result, gt)?, tau);
    if visible == 0 {
        return Err(Error::invalid("ground truth", "track has no visible frames"));
    }
    Ok(re)
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_score(pr: f64, re: f64) -> f64 {
    if pr + re == 0.0 {
        0.0
    } else {
        2.0 * pr * re / (pr + re)
    }
}

/// How per-frame contributions combine across tracks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Sum over all frames of all tracks, then normalize by global counts.
    #[default]
    Pooled,
    /// Precision and recall per track, then averaged over tracks where defined.
    PerTrack,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Aggregation::Pooled),
            "per-track" => Ok(Aggregation::PerTrack),
            other => Err(Error::invalid("mode", format!("unknown aggregation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    /// `-inf` is the sentinel that admits every prediction.
    pub tau: f64,
    pub pr: f64,
    pub re: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PRCurve {
    /// Ascending in `tau`, sentinel first.
    pub points: Vec<CurvePoint>,
    pub best: CurvePoint,
}

/// Ground truth and predictions of one track.
#[derive(Debug, Clone, Copy)]
pub struct EvalTrack<'a> {
    pub result: &'a TrackResult,
    pub gt: &'a [Option<BoundingBox>],
}

fn scored_tracks(tracks: &[EvalTrack<'_>]) -> Result<Vec<Vec<FrameScore>>> {
    if tracks.is_empty() {
        return Err(Error::invalid("tracks", "evaluation needs at least one track"));
    }
    tracks.par_iter().map(|t| score_frames(t.result, t.gt)).collect()
}

/// Candidate thresholds: sentinel, then every distinct confidence ascending.
fn thresholds(frames: &[Vec<FrameScore>]) -> Vec<f64> {
    let mut taus: Vec<f64> = frames.iter().flatten().map(|f| f.confidence).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    let mut out = Vec::with_capacity(taus.len() + 1);
    out.push(f64::NEG_INFINITY);
    out.extend(taus);
    out
}

/// For each threshold (ascending) the exact IoU sum and count of counted predictions.
fn counted_sums(frames: &[FrameScore], taus: &[f64]) -> Vec<(f64, usize)> {
    let mut boxed: Vec<&FrameScore> = frames.iter().filter(|f| f.has_box).collect();
    boxed.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut out = vec![(0.0, 0); taus.len()];
    let mut sum = ExactSum::new();
    let mut next = 0;
    for (slot, &tau) in out.iter_mut().zip(taus).rev() {
        while next < boxed.len() && boxed[next].confidence >= tau {
            sum.add(boxed[next].iou);
            next += 1;
        }
        *slot = (sum.value(), next);
    }
    out
}

fn point(tau: f64, pr: f64, re: f64) -> CurvePoint {
    CurvePoint {
        tau,
        pr,
        re,
        f: f_score(pr, re),
    }
}

fn best_of(points: &[CurvePoint]) -> CurvePoint {
    let mut best = points[0];
    for p in &points[1..] {
        if p.f > best.f {
            best = *p;
        }
    }
    best
}

/// Precision-recall curve over every distinct confidence and the best F point.
pub fn sweep(tracks: &[EvalTrack<'_>], mode: Aggregation) -> Result<PRCurve> {
    let frames = scored_tracks(tracks)?;
    let taus = thresholds(&frames);
    let points: Vec<CurvePoint> = match mode {
        Aggregation::Pooled => {
            let all: Vec<FrameScore> = frames.into_iter().flatten().collect();
            let visible = all.iter().filter(|f| f.visible).count();
            // IoU is 0 on invisible frames, so the precision and recall sums coincide
            counted_sums(&all, &taus)
                .into_iter()
                .zip(&taus)
                .map(|((sum, n_p), &tau)| point(tau, ratio(sum, n_p), ratio(sum, visible)))
                .collect()
        }
        Aggregation::PerTrack => {
            let per_track: Vec<(Vec<(f64, usize)>, usize)> = frames
                .par_iter()
                .map(|f| (counted_sums(f, &taus), f.iter().filter(|s| s.visible).count()))
                .collect();
            taus.iter()
                .enumerate()
                .map(|(i, &tau)| {
                    let prs = per_track.iter().filter(|(s, _)| s[i].1 > 0).map(|(s, _)| s[i].0 / s[i].1 as f64);
                    let res = per_track.iter().filter(|(_, v)| *v > 0).map(|(s, v)| s[i].0 / *v as f64);
                    point(tau, mean(prs), mean(res))
                })
                .collect()
        }
    };
    let best = best_of(&points);
    Ok(PRCurve { points, best })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let sum: ExactSum = values.inspect(|_| n += 1).collect();
    ratio(sum.value(), n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub pr: f64,
    pub re: f64,
    pub f: f64,
    /// Visible ground-truth frames the score was computed over.
    pub visible_frames: usize,
}

/// Pr/Re/F at a fixed `tau` over the frames each track's `keep` admits.
pub fn evaluate_at<K>(tracks: &[EvalTrack<'_>], tau: f64, mode: Aggregation, keep: K) -> Result<Score>
where
    K: Fn(usize, usize) -> bool + Sync,
{
    let frames = scored_tracks(tracks)?;
    let selected: Vec<Vec<FrameScore>> = frames
        .into_iter()
        .enumerate()
        .map(|(t, f)| f.into_iter().enumerate().filter(|(i, _)| keep(t, *i)).map(|(_, s)| s).collect())
        .collect();
    let visible_frames = selected.iter().flatten().filter(|f| f.visible).count();
    let (pr, re) = match mode {
        Aggregation::Pooled => {
            let all: Vec<FrameScore> = selected.into_iter().flatten().collect();
            (precision_of(&all, tau).value, recall_of(&all, tau).0)
        }
        Aggregation::PerTrack => {
            let prs = selected.iter().map(|f| precision_of(f, tau)).filter(Precision::defined).map(|p| p.value);
            let res = selected
                .iter()
                .map(|f| recall_of(f, tau))
                .filter(|(_, v)| *v > 0)
                .map(|(r, _)| r);
            (mean(prs), mean(res))
        }
    };
    Ok(Score {
        pr,
        re,
        f: f_score(pr, re),
        visible_frames,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeReport {
    pub tau: f64,
    pub overall: Score,
    /// `None` when no visible frame carries the attribute.
    pub attributes: BTreeMap<Attribute, Option<Score>>,
}

/// Scores restricted to the frames flagged with each attribute, at `curve`'s best threshold.
pub fn attribute_report(
    tracks: &[EvalTrack<'_>],
    flags: &[Vec<AttributeFlags>],
    curve: &PRCurve,
    mode: Aggregation,
) -> Result<AttributeReport> {
    if flags.len() != tracks.len() {
        return Err(Error::shape(format!("flags for {} tracks", tracks.len()), flags.len()));
    }
    for (t, f) in tracks.iter().zip(flags) {
        if f.len() != t.gt.len() {
            return Err(Error::shape(format!("{} attribute rows", t.gt.len()), f.len()));
        }
    }
    let tau = curve.best.tau;
    let overall = evaluate_at(tracks, tau, mode, |_, _| true)?;
    let mut attributes = BTreeMap::new();
    for a in Attribute::ALL {
        let visible = tracks
            .iter()
            .zip(flags)
            .any(|(t, f)| t.gt.iter().zip(f).any(|(g, fl)| g.is_some() && fl.contains(a)));
        let score = if visible {
            Some(evaluate_at(tracks, tau, mode, |t, i| flags[t][i].contains(a))?)
        } else {
            None
        };
        attributes.insert(a, score);
    }
    Ok(AttributeReport {
        tau,
        overall,
        attributes,
    })
}

/// Parses a per-track prediction file: one `x,y,w,h,conf` or `absent,conf` line per frame.
pub fn parse_predictions(text: &str) -> std::result::Result<TrackResult, String> {
    let mut predictions = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("line {}: `{s}`: {e}", n + 1));
        let pred = match fields.as_slice() {
            ["absent", conf] => TrackPrediction::absent(num(conf)?),
            [x, y, w, h, conf] => {
                let b = BoundingBox::new(num(x)?, num(y)?, num(w)?, num(h)?).map_err(|e| format!("line {}: {e}", n + 1))?;
                TrackPrediction::present(b, num(conf)?)
            }
            _ => return Err(format!("line {}: expected `x,y,w,h,conf` or `absent,conf`", n + 1)),
        }
        .map_err(|e| format!("line {}: {e}", n + 1))?;
        predictions.push(pred);
    }
    Ok(TrackResult { predictions })
}

pub fn read_predictions(path: &Path) -> Result<TrackResult> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text).map_err(|r| Error::format(path, r))
}

pub fn format_predictions(result: &TrackResult) -> String {
    let mut out = String::new();
    for p in &result.predictions {
        match &p.bbox {
            Some(b) => out.push_str(&format!("{},{},{},{},{}\n", b.x(), b.y(), b.w(), b.h(), p.confidence)),
            None => out.push_str(&format!("absent,{}\n", p.confidence)),
        }
    }
    out
}

pub fn write_predictions(path: &Path, result: &TrackResult) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(format_predictions(result).as_bytes()).map_err(|e| Error::io(path, e))
}
