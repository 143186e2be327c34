//! Post-network decisions: box decoding from VOT head maps and the dynamic
//! template memory used by the VOS head.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::BoundingBox;

/// Score, offset and size maps over an `H x W` grid, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadMaps {
    height: usize,
    width: usize,
    score: Vec<f32>,
    offset: Vec<f32>,
    size: Vec<f32>,
}

impl HeadMaps {
    /// `score` is `1 x H x W`, `offset` and `size` are `2 x H x W` (x then y, w then h).
    pub fn new(height: usize, width: usize, score: Vec<f32>, offset: Vec<f32>, size: Vec<f32>) -> Result<Self> {
        let n = height * width;
        if n == 0 {
            return Err(Error::shape("nonempty head maps", format!("{height}x{width}")));
        }
        if score.len() != n {
            return Err(Error::shape(format!("{n} score values"), score.len()));
        }
        if offset.len() != 2 * n {
            return Err(Error::shape(format!("{} offset values", 2 * n), offset.len()));
        }
        if size.len() != 2 * n {
            return Err(Error::shape(format!("{} size values", 2 * n), size.len()));
        }
        Ok(Self {
            height,
            width,
            score,
            offset,
            size,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn score(&self) -> &[f32] {
        &self.score
    }

    pub fn score_at(&self, x: usize, y: usize) -> f32 {
        self.score[y * self.width + x]
    }

    pub fn offset_at(&self, x: usize, y: usize) -> (f32, f32) {
        let n = self.height * self.width;
        let i = y * self.width + x;
        (self.offset[i], self.offset[n + i])
    }

    pub fn size_at(&self, x: usize, y: usize) -> (f32, f32) {
        let n = self.height * self.width;
        let i = y * self.width + x;
        (self.size[i], self.size[n + i])
    }

    /// Copy with every score multiplied by `factor`.
    pub fn with_scaled_scores(&self, factor: f32) -> HeadMaps {
        let mut out = self.clone();
        for s in &mut out.score {
            *s *= factor;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedBox {
    /// Box in score-map coordinates.
    pub bbox: BoundingBox,
    /// Center `(x + x_off, y + y_off)`.
    pub center: (f64, f64),
    /// Peak score location `(x, y)`.
    pub peak: (usize, usize),
    pub confidence: f64,
}

/// Locates the score peak and reads the offset and size there.
///
/// Ties resolve to the smallest row, then the smallest column.
pub fn decode_box(maps: &HeadMaps) -> Result<DecodedBox> {
    if maps.score.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("score map", "non-finite score"));
    }
    // first strict maximum in row-major order
    let mut best = 0usize;
    for (i, &s) in maps.score.iter().enumerate() {
        if s > maps.score[best] {
            best = i;
        }
    }
    let (x, y) = (best % maps.width, best / maps.width);
    let (x_off, y_off) = maps.offset_at(x, y);
    let (w, h) = maps.size_at(x, y);
    let center = (x as f64 + x_off as f64, y as f64 + y_off as f64);
    let bbox = BoundingBox::from_center(center.0, center.1, w as f64, h as f64)?;
    Ok(DecodedBox {
        bbox,
        center,
        peak: (x, y),
        confidence: maps.score[best] as f64,
    })
}

/// Maps score-map coordinates into full-image pixels: `image = origin + map * stride`.
///
/// `origin` is the top-left corner of the search crop in the image and
/// `stride` the number of image pixels per score-map cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub origin: (f64, f64),
    pub stride: f64,
}

impl SearchRegion {
    pub fn new(origin: (f64, f64), stride: f64) -> Result<Self> {
        if !(stride > 0.0 && stride.is_finite()) {
            return Err(Error::invalid("stride", format!("{stride} must be positive")));
        }
        Ok(Self { origin, stride })
    }

    pub fn to_image(&self, b: &BoundingBox) -> Result<BoundingBox> {
        BoundingBox::new(
            self.origin.0 + b.x() * self.stride,
            self.origin.1 + b.y() * self.stride,
            b.w() * self.stride,
            b.h() * self.stride,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryStrategy {
    /// A single dynamic slot, replaced on every accepted update.
    One,
    /// Append dynamic templates, evicting the oldest past `capacity`.
    Add { capacity: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryPolicy {
    pub strategy: MemoryStrategy,
    /// Updates are considered only on frames that are multiples of this.
    pub interval: u64,
    /// When set, the predicted IoU must exceed it (IoU-prediction gating).
    pub iou_threshold: Option<f64>,
}

pub const DEFAULT_UPDATE_INTERVAL: u64 = 30;
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.7;
pub const DEFAULT_CAPACITY: usize = 5;

impl Default for MemoryPolicy {
    fn default() -> Self {
        Self {
            strategy: MemoryStrategy::Add {
                capacity: DEFAULT_CAPACITY,
            },
            interval: DEFAULT_UPDATE_INTERVAL,
            iou_threshold: Some(DEFAULT_IOU_THRESHOLD),
        }
    }
}

impl MemoryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return Err(Error::invalid("interval", "update interval must be at least 1"));
        }
        if let MemoryStrategy::Add { capacity: 0 } = self.strategy {
            return Err(Error::invalid("capacity", "ADD needs capacity of at least 1"));
        }
        if let Some(t) = self.iou_threshold {
            if t.is_nan() {
                return Err(Error::invalid("iou_threshold", "NaN threshold"));
            }
        }
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        match self.strategy {
            MemoryStrategy::One => 1,
            MemoryStrategy::Add { capacity } => capacity,
        }
    }
}

/// A memorized frame reference plus its payload (typically frame features and mask).
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRecord<T> {
    pub frame: u64,
    pub payload: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// Not a multiple of the update interval.
    NotEligible,
    /// Predicted IoU did not clear the threshold.
    Rejected,
    Stored,
    /// Stored, dropping the oldest dynamic template.
    StoredWithEviction,
}

/// Initial template plus a bounded set of dynamic templates.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMemory<T> {
    policy: MemoryPolicy,
    initial: TemplateRecord<T>,
    dynamic: VecDeque<TemplateRecord<T>>,
}

impl<T: Clone> TemplateMemory<T> {
    pub fn new(policy: MemoryPolicy, initial: TemplateRecord<T>) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            policy,
            initial,
            dynamic: VecDeque::new(),
        })
    }

    pub fn policy(&self) -> &MemoryPolicy {
        &self.policy
    }

    pub fn initial(&self) -> &TemplateRecord<T> {
        &self.initial
    }

    pub fn dynamic(&self) -> impl Iterator<Item = &TemplateRecord<T>> {
        self.dynamic.iter()
    }

    pub fn dynamic_len(&self) -> usize {
        self.dynamic.len()
    }

    /// Templates in the order they are concatenated: initial first, then oldest to newest.
    pub fn templates(&self) -> impl Iterator<Item = &TemplateRecord<T>> {
        std::iter::once(&self.initial).chain(self.dynamic.iter())
    }

    pub fn len(&self) -> usize {
        1 + self.dynamic.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn maybe_update(&mut self, frame: u64, predicted_iou: f64, candidate: T) -> UpdateOutcome {
        if !frame.is_multiple_of(self.policy.interval) {
            return UpdateOutcome::NotEligible;
        }
        if let Some(threshold) = self.policy.iou_threshold {
            if !(predicted_iou > threshold) {
                return UpdateOutcome::Rejected;
            }
        }
        let record = TemplateRecord {
            frame,
            payload: candidate,
        };
        match self.policy.strategy {
            MemoryStrategy::One => {
                let replaced = self.dynamic.pop_front().is_some();
                self.dynamic.push_back(record);
                if replaced {
                    UpdateOutcome::StoredWithEviction
                } else {
                    UpdateOutcome::Stored
                }
            }
            MemoryStrategy::Add { capacity } => {
                self.dynamic.push_back(record);
                if self.dynamic.len() > capacity {
                    self.dynamic.pop_front();
                    UpdateOutcome::StoredWithEviction
                } else {
                    UpdateOutcome::Stored
                }
            }
        }
    }

    /// Value-style variant of [`maybe_update`](Self::maybe_update).
    pub fn updated(mut self, frame: u64, predicted_iou: f64, candidate: T) -> Self {
        self.maybe_update(frame, predicted_iou, candidate);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn maps_with_peak(h: usize, w: usize, peak: (usize, usize), score: f32) -> HeadMaps {
        let n = h * w;
        let mut s = vec![0.1; n];
        s[peak.1 * w + peak.0] = score;
        let mut off = vec![0.0; 2 * n];
        let mut size = vec![1.0; 2 * n];
        let i = peak.1 * w + peak.0;
        off[i] = 0.5;
        off[n + i] = -0.25;
        size[i] = 10.0;
        size[n + i] = 20.0;
        HeadMaps::new(h, w, s, off, size).unwrap()
    }

    #[test]
    fn decode_substitution() {
        let d = decode_box(&maps_with_peak(6, 6, (3, 4), 0.9)).unwrap();
        assert_eq!(d.peak, (3, 4));
        assert_eq!(d.center, (3.5, 3.75));
        assert_eq!((d.bbox.w(), d.bbox.h()), (10.0, 20.0));
        assert_eq!(d.bbox.center(), (3.5, 3.75));
        assert!((d.confidence - 0.9).abs() < 1e-7);
    }

    #[test]
    fn uniform_scores_pick_origin() {
        let n = 12;
        let maps = HeadMaps::new(3, 4, vec![0.5; n], vec![0.0; 2 * n], vec![2.0; 2 * n]).unwrap();
        assert_eq!(decode_box(&maps).unwrap().peak, (0, 0));
    }

    #[test]
    fn tie_prefers_row_then_column() {
        let mut s = vec![0.0; 12];
        let at = |x: usize, y: usize| y * 4 + x;
        s[at(0, 2)] = 1.0;
        s[at(3, 1)] = 1.0;
        s[at(2, 1)] = 1.0;
        let maps = HeadMaps::new(3, 4, s, vec![0.0; 24], vec![1.0; 24]).unwrap();
        assert_eq!(decode_box(&maps).unwrap().peak, (2, 1));
    }

    #[test]
    fn decode_errors() {
        let mut s = vec![0.0; 4];
        s[1] = f32::NAN;
        let maps = HeadMaps::new(2, 2, s, vec![0.0; 8], vec![1.0; 8]).unwrap();
        assert!(decode_box(&maps).is_err());
        assert!(HeadMaps::new(2, 2, vec![0.0; 3], vec![0.0; 8], vec![1.0; 8]).is_err());
        let zero_size = HeadMaps::new(1, 1, vec![1.0], vec![0.0; 2], vec![0.0, 1.0]).unwrap();
        assert!(decode_box(&zero_size).is_err());
    }

    #[test]
    fn search_region_affine() {
        let r = SearchRegion::new((100.0, 50.0), 16.0).unwrap();
        let b = BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap();
        assert_eq!(r.to_image(&b).unwrap().to_array(), [116.0, 82.0, 48.0, 64.0]);
        assert!(SearchRegion::new((0.0, 0.0), 0.0).is_err());
    }

    fn policy(strategy: MemoryStrategy, threshold: Option<f64>) -> MemoryPolicy {
        MemoryPolicy {
            strategy,
            interval: 10,
            iou_threshold: threshold,
        }
    }

    fn init() -> TemplateRecord<&'static str> {
        TemplateRecord {
            frame: 0,
            payload: "init",
        }
    }

    #[test]
    fn gated_one_slot() {
        let mut m = TemplateMemory::new(policy(MemoryStrategy::One, Some(0.8)), init()).unwrap();
        assert_eq!(m.maybe_update(10, 0.9, "a"), UpdateOutcome::Stored);
        assert_eq!(m.maybe_update(20, 0.7, "b"), UpdateOutcome::Rejected);
        assert_eq!(m.maybe_update(25, 0.99, "c"), UpdateOutcome::NotEligible);
        assert_eq!(m.maybe_update(30, 0.95, "d"), UpdateOutcome::StoredWithEviction);
        let names: Vec<_> = m.templates().map(|t| t.payload).collect();
        assert_eq!(names, ["init", "d"]);
    }

    #[test]
    fn add_keeps_newest() {
        let mut m = TemplateMemory::new(policy(MemoryStrategy::Add { capacity: 3 }, None), init()).unwrap();
        for (i, p) in ["a", "b", "c", "d"].into_iter().enumerate() {
            m.maybe_update((i as u64 + 1) * 10, 0.0, p);
        }
        let names: Vec<_> = m.templates().map(|t| t.payload).collect();
        assert_eq!(names, ["init", "b", "c", "d"]);
    }

    #[test]
    fn threshold_one_freezes() {
        let mut m = TemplateMemory::new(policy(MemoryStrategy::Add { capacity: 3 }, Some(1.0)), init()).unwrap();
        for f in 0..100 {
            m.maybe_update(f * 10, 1.0, "x");
        }
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn policy_validation() {
        let mut p = MemoryPolicy::default();
        assert_eq!(p.interval, 30);
        assert_eq!(p.capacity(), 5);
        p.interval = 0;
        assert!(TemplateMemory::new(p, init()).is_err());
        assert!(TemplateMemory::new(policy(MemoryStrategy::Add { capacity: 0 }, None), init()).is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn maps(h: usize, w: usize) -> impl Strategy<Value = HeadMaps> {
        let n = h * w;
        (
            proptest::collection::vec(0u8..8, n),
            proptest::collection::vec(-1.0f32..1.0, 2 * n),
            proptest::collection::vec(0.5f32..5.0, 2 * n),
        )
            .prop_map(move |(s, o, z)| {
                // quantized scores make ties common
                let s = s.into_iter().map(|v| v as f32 / 8.0).collect();
                HeadMaps::new(h, w, s, o, z).unwrap()
            })
    }

    proptest! {
        #[test]
        fn confidence_is_global_max(m in maps(5, 7)) {
            let d = decode_box(&m).unwrap();
            let max = m.score().iter().cloned().fold(f32::MIN, f32::max);
            prop_assert_eq!(d.confidence, max as f64);
        }

        #[test]
        fn scaling_keeps_geometry(m in maps(4, 6), factor in 0.01f32..50.0) {
            let a = decode_box(&m).unwrap();
            let b = decode_box(&m.with_scaled_scores(factor)).unwrap();
            prop_assert_eq!(a.peak, b.peak);
            prop_assert_eq!(a.bbox, b.bbox);
        }

        #[test]
        fn memory_bounds(steps in proptest::collection::vec((0u64..4, 0.0f64..1.0), 0..80), cap in 1usize..5, add in any::<bool>()) {
            let strategy = if add { MemoryStrategy::Add { capacity: cap } } else { MemoryStrategy::One };
            let p = MemoryPolicy { strategy, interval: 2, iou_threshold: Some(0.5) };
            let initial = TemplateRecord { frame: 0, payload: 0u64 };
            let mut m = TemplateMemory::new(p, initial.clone()).unwrap();
            let mut frame = 0;
            for (dt, iou) in steps {
                frame += dt;
                m.maybe_update(frame, iou, frame);
                prop_assert!(m.dynamic_len() <= p.capacity());
                prop_assert_eq!(m.initial(), &initial);
            }
        }
    }
}
