//! Domain types shared by every module, plus elementary box and mask geometry.
//!
//! All types are immutable value objects once constructed. Constructors
//! validate their invariants so downstream code never sees a degenerate box,
//! a mask of the wrong length or a non-rotation pose.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a target inside one sequence.
pub type TargetId = u32;

/// Axis-aligned box in continuous pixel coordinates, `(x, y)` is the top-left corner.
///
/// A target that is not visible is represented by `Option::<BoundingBox>::None`,
/// never by a zero-sized box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::invalid("box", format!("non-finite box ({x}, {y}, {w}, {h})")));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::invalid("box", format!("non-positive size {w}x{h}")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Area of the intersection with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Intersection over union of two boxes in continuous area.
pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    // areas from the same extents as the intersection, so identical boxes give exactly 1
    let extent_area = |r: &BoundingBox| (r.right() - r.x) * (r.bottom() - r.y);
    let union = extent_area(a) + extent_area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Binary per-pixel target labelling, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl TargetMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(
                format!("{} mask values ({width}x{height})", width * height),
                data.len(),
            ));
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            return Err(Error::invalid("mask", format!("value {v} is not binary")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    /// Builds a mask by evaluating `f(x, y)` on every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(u8::from(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Mask covering the integer pixel rectangle `[x0, x1) x [y0, y1)`, clipped to the image.
    pub fn from_rect(width: usize, height: usize, x0: i64, y0: i64, x1: i64, y1: i64) -> Self {
        Self::from_fn(width, height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            x >= x0 && x < x1 && y >= y0 && y < y1
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    fn check_same_dims(&self, other: &TargetMask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        Ok(())
    }
}

/// Tightest box (integer pixel extents) enclosing every set pixel.
pub fn mask_to_box(m: &TargetMask) -> Option<BoundingBox> {
    let mut min_x = usize::MAX;
    let mut min_y = usize::MAX;
    let mut max_x = 0;
    let mut max_y = 0;
    let mut any = false;
    for y in 0..m.height {
        for x in 0..m.width {
            if m.get(x, y) {
                any = true;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
        }
    }
    if !any {
        return None;
    }
    Some(BoundingBox {
        x: min_x as f64,
        y: min_y as f64,
        w: (max_x - min_x + 1) as f64,
        h: (max_y - min_y + 1) as f64,
    })
}

/// Pixel-count intersection over union. Two empty masks agree perfectly (1.0).
pub fn mask_iou(a: &TargetMask, b: &TargetMask) -> Result<f64> {
    a.check_same_dims(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in a.data.iter().zip(&b.data) {
        let (p, q) = (p != 0, q != 0);
        inter += usize::from(p && q);
        union += usize::from(p || q);
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// One frame's tracker output: an optional box plus its confidence.
///
/// The confidence is kept even when the box is absent; the threshold sweep
/// uses it as a candidate threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPrediction {
    pub bbox: Option<BoundingBox>,
    pub confidence: f64,
}

impl TrackPrediction {
    pub fn new(bbox: Option<BoundingBox>, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid("confidence", format!("{confidence} outside [0, 1]")));
        }
        Ok(Self { bbox, confidence })
    }

    pub fn present(bbox: BoundingBox, confidence: f64) -> Result<Self> {
        Self::new(Some(bbox), confidence)
    }

    pub fn absent(confidence: f64) -> Result<Self> {
        Self::new(None, confidence)
    }
}

/// Pinhole intrinsics in pixels, valid for an image of `width x height`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRecord", into = "IntrinsicsRecord")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: usize,
    height: usize,
}

impl TryFrom<IntrinsicsRecord> for CameraIntrinsics {
    type Error = Error;

    fn try_from(r: IntrinsicsRecord) -> Result<Self> {
        Self::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for IntrinsicsRecord {
    fn from(k: CameraIntrinsics) -> Self {
        IntrinsicsRecord {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::invalid("intrinsics", format!("focal lengths ({fx}, {fy}) must be positive")));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::invalid(
                "intrinsics",
                format!("principal point ({cx}, {cy}) outside {width}x{height}"),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Intrinsics for the same camera sampled on a `width x height` grid.
    pub fn scaled_to(&self, width: usize, height: usize) -> Result<Self> {
        if width == self.width && height == self.height {
            return Ok(*self);
        }
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height)
    }
}

/// Camera-to-world rigid transform. Stored and validated, not otherwise consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

pub const POSE_TOLERANCE: f64 = 1e-6;

impl CameraPose {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if !((dot - expected).abs() <= POSE_TOLERANCE) {
                    return Err(Error::invalid("pose", "rotation is not orthonormal"));
                }
            }
        }
        let r = &rotation;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if !((det - 1.0).abs() <= POSE_TOLERANCE) {
            return Err(Error::invalid("pose", format!("rotation determinant {det} is not +1")));
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("pose", "non-finite translation"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Pose from a row-major 3x3 rotation and a translation.
    pub fn from_row_major(r: &[f64; 9], t: [f64; 3]) -> Result<Self> {
        Self::new([[r[0], r[1], r[2]], [r[3], r[4], r[5]], [r[6], r[7], r[8]]], t)
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2]]
    }
}

/// Metric depth per pixel. `0.0` or a non-finite value marks invalid depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

pub const DEPTH_WIDTH: usize = 256;
pub const DEPTH_HEIGHT: usize = 192;

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(format!("{} depth values", width * height), values.len()));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::invalid("depth", format!("negative depth {v}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, depth: f32) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Depth at `(x, y)` when it is a usable measurement.
    pub fn valid_at(&self, x: usize, y: usize) -> Option<f64> {
        let d = self.get(x, y);
        (d.is_finite() && d > 0.0).then_some(d as f64)
    }

    /// Nearest-neighbour resampling onto a `width x height` grid.
    pub fn resample_nearest(&self, width: usize, height: usize) -> DepthMap {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = nearest_source(y, height, self.height);
            for x in 0..width {
                let sx = nearest_source(x, width, self.width);
                values.push(self.get(sx, sy));
            }
        }
        DepthMap {
            width,
            height,
            values,
        }
    }
}

/// Index of the source sample whose cell center is nearest to destination cell `i`.
pub(crate) fn nearest_source(i: usize, dst: usize, src: usize) -> usize {
    let pos = (i as f64 + 0.5) * src as f64 / dst as f64;
    (pos.floor() as usize).min(src - 1)
}

/// Per-pixel depth reliability: 2 high, 1 medium, 0 low.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(format!("{} confidence values", width * height), values.len()));
        }
        if let Some(v) = values.iter().find(|&&v| v > 2) {
            return Err(Error::invalid("confidence", format!("illegal level {v}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, level: u8) -> Result<Self> {
        Self::new(width, height, vec![level; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }
}

/// The sixteen per-frame challenge attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Attribute {
    AspectRatioChange,
    BackgroundClutter,
    NonRigidDeformation,
    FastMotion,
    FullOcclusion,
    OutOfPlaneRotation,
    OutOfView,
    PartialOcclusion,
    ReflectiveTarget,
    SizeChange,
    SimilarObjects,
    Unassigned,
    DepthClutter,
    ExtremeIllumination,
    LowDepthQuality,
    TargetBlur,
}

impl Attribute {
    pub const ALL: [Attribute; 16] = [
        Attribute::AspectRatioChange,
        Attribute::BackgroundClutter,
        Attribute::NonRigidDeformation,
        Attribute::FastMotion,
        Attribute::FullOcclusion,
        Attribute::OutOfPlaneRotation,
        Attribute::OutOfView,
        Attribute::PartialOcclusion,
        Attribute::ReflectiveTarget,
        Attribute::SizeChange,
        Attribute::SimilarObjects,
        Attribute::Unassigned,
        Attribute::DepthClutter,
        Attribute::ExtremeIllumination,
        Attribute::LowDepthQuality,
        Attribute::TargetBlur,
    ];

    /// Short code used in annotation files and reports.
    pub fn code(self) -> &'static str {
        match self {
            Attribute::AspectRatioChange => "AC",
            Attribute::BackgroundClutter => "BC",
            Attribute::NonRigidDeformation => "ND",
            Attribute::FastMotion => "FM",
            Attribute::FullOcclusion => "FO",
            Attribute::OutOfPlaneRotation => "OP",
            Attribute::OutOfView => "OV",
            Attribute::PartialOcclusion => "PO",
            Attribute::ReflectiveTarget => "RT",
            Attribute::SizeChange => "SC",
            Attribute::SimilarObjects => "SO",
            Attribute::Unassigned => "NaN",
            Attribute::DepthClutter => "DC",
            Attribute::ExtremeIllumination => "EI",
            Attribute::LowDepthQuality => "LD",
            Attribute::TargetBlur => "TB",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.code() == s)
            .ok_or_else(|| Error::invalid("attribute", format!("unknown attribute code `{s}`")))
    }
}

/// Set of attributes flagged on one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct AttributeFlags(u16);

impl AttributeFlags {
    pub fn none() -> Self {
        Self(0)
    }

    pub fn with(mut self, a: Attribute) -> Self {
        self.0 |= a.bit();
        self
    }

    pub fn set(&mut self, a: Attribute, on: bool) {
        if on {
            self.0 |= a.bit();
        } else {
            self.0 &= !a.bit();
        }
    }

    pub fn contains(&self, a: Attribute) -> bool {
        self.0 & a.bit() != 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        Attribute::ALL.into_iter().filter(|a| self.contains(*a))
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }
}

impl FromIterator<Attribute> for AttributeFlags {
    fn from_iter<I: IntoIterator<Item = Attribute>>(iter: I) -> Self {
        iter.into_iter().fold(Self::none(), Self::with)
    }
}

impl TryFrom<Vec<String>> for AttributeFlags {
    type Error = Error;

    fn try_from(codes: Vec<String>) -> Result<Self> {
        codes.iter().map(|c| c.parse::<Attribute>()).collect()
    }
}

impl From<AttributeFlags> for Vec<String> {
    fn from(f: AttributeFlags) -> Self {
        f.iter().map(|a| a.code().to_string()).collect()
    }
}

/// Everything annotated for one target on one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetAnnotation {
    pub bbox: Option<BoundingBox>,
    pub mask: Option<TargetMask>,
    pub attributes: Option<AttributeFlags>,
    /// Keyframes carry a mask; other frames carry interpolated boxes.
    pub keyframe: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RGBDFrame {
    pub index: u64,
    /// RGB pixels are loaded on demand from this path.
    pub rgb: Option<PathBuf>,
    pub depth: DepthMap,
    pub confidence: ConfidenceMap,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub annotations: BTreeMap<TargetId, TargetAnnotation>,
}

impl RGBDFrame {
    pub fn new(
        index: u64,
        rgb: Option<PathBuf>,
        depth: DepthMap,
        confidence: ConfidenceMap,
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
        annotations: BTreeMap<TargetId, TargetAnnotation>,
    ) -> Result<Self> {
        if depth.width() != confidence.width() || depth.height() != confidence.height() {
            return Err(Error::shape(
                format!("confidence {}x{}", depth.width(), depth.height()),
                format!("{}x{}", confidence.width(), confidence.height()),
            ));
        }
        Ok(Self {
            index,
            rgb,
            depth,
            confidence,
            intrinsics,
            pose,
            annotations,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    frames: Vec<RGBDFrame>,
    targets: Vec<TargetId>,
}

impl Sequence {
    pub fn new(id: impl Into<String>, frames: Vec<RGBDFrame>, targets: Vec<TargetId>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("sequence", "a sequence needs at least one frame"));
        }
        if frames.windows(2).any(|w| w[1].index <= w[0].index) {
            return Err(Error::invalid("sequence", "frame indices are not strictly increasing"));
        }
        for f in &frames {
            if let Some(t) = f.annotations.keys().find(|t| !targets.contains(t)) {
                return Err(Error::invalid(
                    "sequence",
                    format!("frame {} annotates unknown target {t}", f.index),
                ));
            }
        }
        Ok(Self {
            id: id.into(),
            frames,
            targets,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frames(&self) -> &[RGBDFrame] {
        &self.frames
    }

    pub fn targets(&self) -> &[TargetId] {
        &self.targets
    }

    /// Flattens the sequence into one evaluation track per target.
    pub fn tracks(&self) -> Vec<Track> {
        self.targets
            .iter()
            .map(|&target| {
                let mut track = Track {
                    sequence: self.id.clone(),
                    target,
                    frames: Vec::with_capacity(self.frames.len()),
                    boxes: Vec::with_capacity(self.frames.len()),
                    masks: Vec::with_capacity(self.frames.len()),
                    attributes: Vec::with_capacity(self.frames.len()),
                    keyframes: Vec::with_capacity(self.frames.len()),
                };
                for f in &self.frames {
                    let ann = f.annotations.get(&target);
                    track.frames.push(f.index);
                    track.boxes.push(ann.and_then(|a| a.bbox));
                    track.masks.push(ann.and_then(|a| a.mask.clone()));
                    track.attributes.push(ann.and_then(|a| a.attributes).unwrap_or_default());
                    track.keyframes.push(ann.is_some_and(|a| a.keyframe));
                }
                track
            })
            .collect()
    }
}

/// Ground truth of one `(sequence, target)` pair, the unit of evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub sequence: String,
    pub target: TargetId,
    pub frames: Vec<u64>,
    pub boxes: Vec<Option<BoundingBox>>,
    pub masks: Vec<Option<TargetMask>>,
    pub attributes: Vec<AttributeFlags>,
    pub keyframes: Vec<bool>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Track from boxes alone, frames numbered from zero.
    pub fn from_boxes(sequence: impl Into<String>, target: TargetId, boxes: Vec<Option<BoundingBox>>) -> Self {
        let n = boxes.len();
        Self {
            sequence: sequence.into(),
            target,
            frames: (0..n as u64).collect(),
            boxes,
            masks: vec![None; n],
            attributes: vec![AttributeFlags::none(); n],
            keyframes: vec![false; n],
        }
    }

    /// Display name `sequence/target`.
    pub fn name(&self) -> String {
        format!("{}/{}", self.sequence, self.target)
    }
}
