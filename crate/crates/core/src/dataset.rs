//! On-disk RGB-D sequences: reading, validation and synthetic generation.
//!
//! A dataset root holds one directory per sequence:
//!
//! ```text
//! <seq>/rgb/000000.jpg           colour frames (only headers are read)
//! <seq>/depth/000000.tiff        32-bit float depth in meters, 0 = invalid
//! <seq>/confidence/000000.png    8-bit levels 0/1/2
//! <seq>/camera.jsonl             {frame, fx, fy, cx, cy, R[9], t[3]} per line
//! <seq>/annotations.json         boxes, keyframes, mask references, attributes
//! <seq>/masks/000000_01.png      keyframe masks, 0 background / 255 target
//! ```
//!
//! An optional `manifest.json` in the sequence directory (or the root) remaps
//! these names, see [`DatasetLayout`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::{compute_ld_flag, LD_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{
    mask_to_box, Attribute, AttributeFlags, BoundingBox, CameraIntrinsics, CameraPose, ConfidenceMap, DepthMap,
    RGBDFrame, Sequence, TargetAnnotation, TargetId, TargetMask, Track,
};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";

/// How confidence levels are stored in the PNGs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceEncoding {
    /// Pixel values 0, 1, 2.
    #[default]
    Raw,
    /// Pixel values 0, 128, 255.
    Scaled,
}

/// File naming inside a sequence directory.
///
/// Templates accept `{frame}` and `{target}` with optional zero padding,
/// e.g. `{frame:06}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetLayout {
    pub rgb: String,
    pub depth: String,
    pub confidence: String,
    pub mask: String,
    pub camera: String,
    pub annotations: String,
    pub confidence_encoding: ConfidenceEncoding,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        Self {
            rgb: "rgb/{frame:06}.jpg".into(),
            depth: "depth/{frame:06}.tiff".into(),
            confidence: "confidence/{frame:06}.png".into(),
            mask: "masks/{frame:06}_{target:02}.png".into(),
            camera: "camera.jsonl".into(),
            annotations: "annotations.json".into(),
            confidence_encoding: ConfidenceEncoding::Raw,
        }
    }
}

impl DatasetLayout {
    /// Layout for `seq_dir`: its own manifest, else the parent's, else the default.
    pub fn discover(seq_dir: &Path) -> Result<Self> {
        let candidates = [Some(seq_dir.join(MANIFEST)), seq_dir.parent().map(|p| p.join(MANIFEST))];
        for path in candidates.into_iter().flatten() {
            if path.is_file() {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                return serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()));
            }
        }
        Ok(Self::default())
    }

    pub fn rgb_path(&self, frame: u64) -> PathBuf {
        render(&self.rgb, frame, 0).into()
    }

    pub fn depth_path(&self, frame: u64) -> PathBuf {
        render(&self.depth, frame, 0).into()
    }

    pub fn confidence_path(&self, frame: u64) -> PathBuf {
        render(&self.confidence, frame, 0).into()
    }

    pub fn mask_path(&self, frame: u64, target: TargetId) -> PathBuf {
        render(&self.mask, frame, target as u64).into()
    }
}

/// Expands `{frame}`, `{frame:0N}`, `{target}` and `{target:0N}`.
pub fn render(template: &str, frame: u64, target: u64) -> String {
    let mut out = String::with_capacity(template.len() + 8);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let Some(close) = rest[open..].find('}') else {
            out.push_str(&rest[open..]);
            return out;
        };
        let field = &rest[open + 1..open + close];
        let (name, width) = match field.split_once(':') {
            Some((n, w)) => (n, w.trim_start_matches('0').parse::<usize>().ok()),
            None => (field, None),
        };
        let value = match name {
            "frame" => Some(frame),
            "target" => Some(target),
            _ => None,
        };
        match value {
            Some(v) => out.push_str(&format!("{v:0w$}", w = width.unwrap_or(0))),
            None => out.push_str(&rest[open..=open + close]),
        }
        rest = &rest[open + close + 1..];
    }
    out.push_str(rest);
    out
}

/// One problem found in a sequence. Paths are relative to the sequence directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    MissingStream { stream: &'static str },
    MissingFile { path: PathBuf },
    Unreadable { path: PathBuf, reason: String },
    DepthNotFloat32 { path: PathBuf },
    DimensionMismatch { path: PathBuf, expected: (usize, usize), actual: (usize, usize) },
    IllegalConfidence { path: PathBuf, value: u8 },
    IllegalValue { path: PathBuf, reason: String },
    NonOrthonormalPose { frame: u64 },
    NonMonotonicFrames { frame: u64 },
    CountMismatch { what: String, expected: usize, actual: usize },
    Metadata { path: PathBuf, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingStream { stream } => write!(f, "missing stream: {stream}"),
            Violation::MissingFile { path } => write!(f, "missing file: {}", path.display()),
            Violation::Unreadable { path, reason } => write!(f, "unreadable file {}: {reason}", path.display()),
            Violation::DepthNotFloat32 { path } => write!(f, "depth is not a 32-bit float TIFF: {}", path.display()),
            Violation::DimensionMismatch { path, expected, actual } => write!(
                f,
                "dimension mismatch in {}: expected {}x{}, got {}x{}",
                path.display(),
                expected.0,
                expected.1,
                actual.0,
                actual.1
            ),
            Violation::IllegalConfidence { path, value } => {
                write!(f, "illegal confidence value {value} in {}", path.display())
            }
            Violation::IllegalValue { path, reason } => write!(f, "illegal value in {}: {reason}", path.display()),
            Violation::NonOrthonormalPose { frame } => write!(f, "non-orthonormal pose at frame {frame}"),
            Violation::NonMonotonicFrames { frame } => write!(f, "non-monotonic frame index {frame}"),
            Violation::CountMismatch { what, expected, actual } => {
                write!(f, "count mismatch in {what}: expected {expected}, got {actual}")
            }
            Violation::Metadata { path, reason } => write!(f, "invalid metadata in {}: {reason}", path.display()),
        }
    }
}

/// `annotations.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub schema_version: u32,
    pub sequence: String,
    pub frames: Vec<u64>,
    pub targets: Vec<TargetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRecord {
    pub id: TargetId,
    /// One entry per frame, `null` where the target is not visible.
    pub boxes: Vec<Option<BoundingBox>>,
    #[serde(default)]
    pub keyframes: Vec<u64>,
    /// Frame index to mask path, relative to the sequence directory.
    #[serde(default)]
    pub masks: BTreeMap<u64, String>,
    /// One entry per frame; may be empty when no attributes are annotated.
    #[serde(default)]
    pub attributes: Vec<AttributeFlags>,
}

/// One line of `camera.jsonl`. `width`/`height` default to the depth map size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub frame: u64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    /// Directory name under the root.
    pub directory: String,
    pub frames: usize,
    pub targets: usize,
    #[serde(serialize_with = "display_all")]
    pub violations: Vec<Violation>,
}

fn display_all<S: serde::Serializer>(v: &[Violation], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub sequences: usize,
    pub frames: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub summary: ValidationSummary,
    pub sequences: Vec<SequenceReport>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.summary.violations == 0
    }
}

struct Checker {
    dir: PathBuf,
    violations: Vec<Violation>,
}

impl Checker {
    fn flag(&mut self, v: Violation) {
        self.violations.push(v);
    }

    fn full(&self, rel: &Path) -> PathBuf {
        self.dir.join(rel)
    }

    fn exists(&mut self, rel: &Path) -> bool {
        if self.full(rel).is_file() {
            true
        } else {
            self.flag(Violation::MissingFile { path: rel.to_path_buf() });
            false
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(full: &Path, rel: &Path) -> std::result::Result<T, Violation> {
    let text = fs::read_to_string(full).map_err(|e| Violation::Unreadable {
        path: rel.to_path_buf(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| Violation::Metadata {
        path: rel.to_path_buf(),
        reason: e.to_string(),
    })
}

fn depth_from_tiff(full: &Path, rel: &Path) -> std::result::Result<DepthMap, Violation> {
    use tiff::decoder::{Decoder, DecodingResult};
    let unreadable = |e: &dyn fmt::Display| Violation::Unreadable {
        path: rel.to_path_buf(),
        reason: e.to_string(),
    };
    let file = fs::File::open(full).map_err(|e| unreadable(&e))?;
    let mut dec = Decoder::new(BufReader::new(file)).map_err(|e| unreadable(&e))?;
    if dec.colortype().map_err(|e| unreadable(&e))? != tiff::ColorType::Gray(32) {
        return Err(Violation::DepthNotFloat32 { path: rel.to_path_buf() });
    }
    let (w, h) = dec.dimensions().map_err(|e| unreadable(&e))?;
    match dec.read_image().map_err(|e| unreadable(&e))? {
        DecodingResult::F32(values) => DepthMap::new(w as usize, h as usize, values).map_err(|e| Violation::IllegalValue {
            path: rel.to_path_buf(),
            reason: e.to_string(),
        }),
        _ => Err(Violation::DepthNotFloat32 { path: rel.to_path_buf() }),
    }
}

fn read_gray(full: &Path, rel: &Path) -> std::result::Result<image::GrayImage, Violation> {
    let img = image::open(full).map_err(|e| Violation::Unreadable {
        path: rel.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok(img.to_luma8())
}

fn confidence_from_png(full: &Path, rel: &Path, enc: ConfidenceEncoding) -> std::result::Result<ConfidenceMap, Violation> {
    let img = read_gray(full, rel)?;
    let (w, h) = img.dimensions();
    let mut levels = Vec::with_capacity((w * h) as usize);
    for &v in img.as_raw() {
        let level = match (enc, v) {
            (ConfidenceEncoding::Raw, 0..=2) => v,
            (ConfidenceEncoding::Scaled, 0) => 0,
            (ConfidenceEncoding::Scaled, 128) => 1,
            (ConfidenceEncoding::Scaled, 255) => 2,
            _ => {
                return Err(Violation::IllegalConfidence {
                    path: rel.to_path_buf(),
                    value: v,
                })
            }
        };
        levels.push(level);
    }
    ConfidenceMap::new(w as usize, h as usize, levels).map_err(|e| Violation::IllegalValue {
        path: rel.to_path_buf(),
        reason: e.to_string(),
    })
}

fn mask_from_png(full: &Path, rel: &Path) -> std::result::Result<TargetMask, Violation> {
    let img = read_gray(full, rel)?;
    let (w, h) = img.dimensions();
    Ok(TargetMask::from_fn(w as usize, h as usize, |x, y| img.get_pixel(x as u32, y as u32)[0] != 0))
}

/// Reads a single-channel 32-bit float TIFF depth map.
pub fn read_depth_tiff(path: &Path) -> Result<DepthMap> {
    depth_from_tiff(path, path).map_err(Error::Validation)
}

pub fn write_depth_tiff(path: &Path, depth: &DepthMap) -> Result<()> {
    use tiff::encoder::{colortype::Gray32Float, TiffEncoder};
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(|e| Error::format(path, e.to_string()))?;
    enc.write_image::<Gray32Float>(depth.width() as u32, depth.height() as u32, depth.values())
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_mask_png(path: &Path) -> Result<TargetMask> {
    mask_from_png(path, path).map_err(Error::Validation)
}

/// Writes a mask as an 8-bit PNG with 0 for background and 255 for the target.
pub fn write_mask_png(path: &Path, mask: &TargetMask) -> Result<()> {
    let data: Vec<u8> = mask.data().iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    write_gray_png(path, mask.width(), mask.height(), data)
}

pub fn write_confidence_png(path: &Path, conf: &ConfidenceMap, enc: ConfidenceEncoding) -> Result<()> {
    let data = conf
        .values()
        .iter()
        .map(|&v| match enc {
            ConfidenceEncoding::Raw => v,
            ConfidenceEncoding::Scaled => [0, 128, 255][v as usize],
        })
        .collect();
    write_gray_png(path, conf.width(), conf.height(), data)
}

fn write_gray_png(path: &Path, w: usize, h: usize, data: Vec<u8>) -> Result<()> {
    ensure_parent(path)?;
    let img = image::GrayImage::from_raw(w as u32, h as u32, data).expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

/// Streams whose directory must exist, named as in violation messages.
fn stream_dirs(layout: &DatasetLayout, first: u64) -> [(&'static str, PathBuf); 3] {
    let parent = |p: PathBuf| p.parent().map(Path::to_path_buf).unwrap_or_default();
    [
        ("rgb", parent(layout.rgb_path(first))),
        ("depth", parent(layout.depth_path(first))),
        ("confidence", parent(layout.confidence_path(first))),
    ]
}

/// Inspects one sequence directory, collecting every violation; builds the
/// sequence only when there are none.
fn check_sequence(dir: &Path) -> (Option<Sequence>, Vec<Violation>, usize, usize) {
    let mut c = Checker {
        dir: dir.to_path_buf(),
        violations: Vec::new(),
    };
    let layout = match DatasetLayout::discover(dir) {
        Ok(l) => l,
        Err(e) => {
            c.flag(Violation::Metadata {
                path: MANIFEST.into(),
                reason: e.to_string(),
            });
            return (None, c.violations, 0, 0);
        }
    };
    let ann_rel = PathBuf::from(&layout.annotations);
    if !c.full(&ann_rel).is_file() {
        c.flag(Violation::MissingStream { stream: "annotations" });
        return (None, c.violations, 0, 0);
    }
    let ann: AnnotationFile = match read_json(&c.full(&ann_rel), &ann_rel) {
        Ok(a) => a,
        Err(v) => {
            c.flag(v);
            return (None, c.violations, 0, 0);
        }
    };
    let n = ann.frames.len();
    let nt = ann.targets.len();
    if ann.schema_version != SCHEMA_VERSION {
        c.flag(Violation::Metadata {
            path: ann_rel.clone(),
            reason: format!("unsupported schema_version {}", ann.schema_version),
        });
        return (None, c.violations, n, nt);
    }
    if n == 0 {
        c.flag(Violation::Metadata {
            path: ann_rel.clone(),
            reason: "sequence lists no frames".into(),
        });
        return (None, c.violations, n, nt);
    }
    for w in ann.frames.windows(2) {
        if w[1] <= w[0] {
            c.flag(Violation::NonMonotonicFrames { frame: w[1] });
        }
    }

    // camera
    let cam_rel = PathBuf::from(&layout.camera);
    let mut cameras: Vec<Option<CameraRecord>> = vec![None; n];
    if !c.full(&cam_rel).is_file() {
        c.flag(Violation::MissingStream { stream: "camera" });
    } else {
        match fs::read_to_string(c.full(&cam_rel)) {
            Err(e) => c.flag(Violation::Unreadable {
                path: cam_rel.clone(),
                reason: e.to_string(),
            }),
            Ok(text) => {
                let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
                if lines.len() != n {
                    c.flag(Violation::CountMismatch {
                        what: layout.camera.clone(),
                        expected: n,
                        actual: lines.len(),
                    });
                }
                for (i, line) in lines.iter().enumerate().take(n) {
                    match serde_json::from_str::<CameraRecord>(line) {
                        Err(e) => c.flag(Violation::Metadata {
                            path: cam_rel.clone(),
                            reason: format!("line {}: {e}", i + 1),
                        }),
                        Ok(r) if r.frame != ann.frames[i] => c.flag(Violation::Metadata {
                            path: cam_rel.clone(),
                            reason: format!("line {} describes frame {}, expected {}", i + 1, r.frame, ann.frames[i]),
                        }),
                        Ok(r) => cameras[i] = Some(r),
                    }
                }
            }
        }
    }

    // image streams
    let mut present = [true; 3];
    for (i, (stream, sub)) in stream_dirs(&layout, ann.frames[0]).into_iter().enumerate() {
        if !c.full(&sub).is_dir() {
            c.flag(Violation::MissingStream { stream });
            present[i] = false;
        }
    }
    let mut rgb_dims: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depths: Vec<Option<DepthMap>> = vec![None; n];
    let mut confs: Vec<Option<ConfidenceMap>> = vec![None; n];
    for (i, &frame) in ann.frames.iter().enumerate() {
        if present[0] {
            let rel = layout.rgb_path(frame);
            if c.exists(&rel) {
                match image::image_dimensions(c.full(&rel)) {
                    Ok((w, h)) => rgb_dims[i] = Some((w as usize, h as usize)),
                    Err(e) => c.flag(Violation::Unreadable {
                        path: rel,
                        reason: e.to_string(),
                    }),
                }
            }
        }
        if present[1] {
            let rel = layout.depth_path(frame);
            if c.exists(&rel) {
                match depth_from_tiff(&c.full(&rel), &rel) {
                    Ok(d) => depths[i] = Some(d),
                    Err(v) => c.flag(v),
                }
            }
        }
        if present[2] {
            let rel = layout.confidence_path(frame);
            if c.exists(&rel) {
                match confidence_from_png(&c.full(&rel), &rel, layout.confidence_encoding) {
                    Ok(m) => confs[i] = Some(m),
                    Err(v) => c.flag(v),
                }
            }
        }
        if let (Some(d), Some(m)) = (&depths[i], &confs[i]) {
            if (d.width(), d.height()) != (m.width(), m.height()) {
                c.flag(Violation::DimensionMismatch {
                    path: layout.confidence_path(frame),
                    expected: (d.width(), d.height()),
                    actual: (m.width(), m.height()),
                });
                confs[i] = None;
            }
        }
    }

    // poses and intrinsics
    let mut poses: Vec<Option<(CameraIntrinsics, CameraPose)>> = vec![None; n];
    for (i, rec) in cameras.iter().enumerate() {
        let Some(r) = rec else { continue };
        let pose = match CameraPose::from_row_major(&r.r, r.t) {
            Ok(p) => Some(p),
            Err(_) => {
                c.flag(Violation::NonOrthonormalPose { frame: r.frame });
                None
            }
        };
        let dims = depths[i].as_ref().map(|d| (d.width(), d.height()));
        let (w, h) = match (r.width, r.height, dims) {
            (Some(w), Some(h), _) => (w, h),
            (None, None, Some(d)) => d,
            (None, None, None) => continue,
            _ => {
                c.flag(Violation::Metadata {
                    path: cam_rel.clone(),
                    reason: format!("frame {}: width and height must be given together", r.frame),
                });
                continue;
            }
        };
        match CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, w, h) {
            Ok(k) => poses[i] = pose.map(|p| (k, p)),
            Err(e) => c.flag(Violation::Metadata {
                path: cam_rel.clone(),
                reason: format!("frame {}: {e}", r.frame),
            }),
        }
    }

    // targets
    let frame_pos: BTreeMap<u64, usize> = ann.frames.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut annotations: Vec<BTreeMap<TargetId, TargetAnnotation>> = vec![BTreeMap::new(); n];
    let mut target_ids = Vec::with_capacity(nt);
    for t in &ann.targets {
        if target_ids.contains(&t.id) {
            c.flag(Violation::Metadata {
                path: ann_rel.clone(),
                reason: format!("duplicate target id {}", t.id),
            });
            continue;
        }
        target_ids.push(t.id);
        if t.boxes.len() != n {
            c.flag(Violation::CountMismatch {
                what: format!("boxes of target {}", t.id),
                expected: n,
                actual: t.boxes.len(),
            });
        }
        if !t.attributes.is_empty() && t.attributes.len() != n {
            c.flag(Violation::CountMismatch {
                what: format!("attributes of target {}", t.id),
                expected: n,
                actual: t.attributes.len(),
            });
        }
        for k in t.keyframes.iter().chain(t.masks.keys()) {
            if !frame_pos.contains_key(k) {
                c.flag(Violation::Metadata {
                    path: ann_rel.clone(),
                    reason: format!("target {} references unknown frame {k}", t.id),
                });
            }
        }
        for (i, ann_frame) in annotations.iter_mut().enumerate() {
            ann_frame.insert(
                t.id,
                TargetAnnotation {
                    bbox: t.boxes.get(i).copied().flatten(),
                    mask: None,
                    attributes: t.attributes.get(i).copied(),
                    keyframe: t.keyframes.contains(&ann.frames[i]),
                },
            );
        }
        for (frame, rel) in &t.masks {
            let Some(&i) = frame_pos.get(frame) else { continue };
            let rel = PathBuf::from(rel);
            if !c.exists(&rel) {
                continue;
            }
            match mask_from_png(&c.full(&rel), &rel) {
                Err(v) => c.flag(v),
                Ok(m) => {
                    if let Some(d) = rgb_dims[i] {
                        if d != (m.width(), m.height()) {
                            c.flag(Violation::DimensionMismatch {
                                path: rel,
                                expected: d,
                                actual: (m.width(), m.height()),
                            });
                            continue;
                        }
                    }
                    if let Some(a) = annotations[i].get_mut(&t.id) {
                        a.mask = Some(m);
                    }
                }
            }
        }
    }

    if !c.violations.is_empty() {
        return (None, c.violations, n, nt);
    }
    let mut frames = Vec::with_capacity(n);
    for (i, ann_frame) in annotations.into_iter().enumerate() {
        let (k, pose) = poses[i].expect("checked");
        let frame = RGBDFrame::new(
            ann.frames[i],
            Some(c.full(&layout.rgb_path(ann.frames[i]))),
            depths[i].take().expect("checked"),
            confs[i].take().expect("checked"),
            k,
            pose,
            ann_frame,
        );
        match frame {
            Ok(f) => frames.push(f),
            Err(e) => {
                c.flag(Violation::Metadata {
                    path: ann_rel,
                    reason: e.to_string(),
                });
                return (None, c.violations, n, nt);
            }
        }
    }
    match Sequence::new(ann.sequence, frames, target_ids) {
        Ok(s) => (Some(s), c.violations, n, nt),
        Err(e) => {
            c.flag(Violation::Metadata {
                path: ann_rel,
                reason: e.to_string(),
            });
            (None, c.violations, n, nt)
        }
    }
}

/// Loads one sequence directory; fails with the first violation found.
pub fn load_sequence(dir: &Path) -> Result<Sequence> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    match check_sequence(dir) {
        (Some(s), _, _, _) => Ok(s),
        (None, mut v, _, _) => Err(Error::Validation(v.swap_remove(0))),
    }
}

/// Sequence directories under `root`, sorted by name.
pub fn sequence_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        if entry.path().is_dir() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Loads every sequence under `root` in parallel, in directory-name order.
pub fn load_dataset(root: &Path) -> Result<Vec<Sequence>> {
    sequence_dirs(root)?.par_iter().map(|d| load_sequence(d)).collect()
}

/// Checks every sequence under `root` without stopping at the first problem.
pub fn validate_dataset(root: &Path) -> Result<ValidationReport> {
    let dirs = sequence_dirs(root)?;
    let sequences: Vec<SequenceReport> = dirs
        .par_iter()
        .map(|d| {
            let (_, violations, frames, targets) = check_sequence(d);
            SequenceReport {
                directory: d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                frames,
                targets,
                violations,
            }
        })
        .collect();
    let summary = ValidationSummary {
        sequences: sequences.len(),
        frames: sequences.iter().map(|s| s.frames).sum(),
        violations: sequences.iter().map(|s| s.violations.len()).sum(),
    };
    Ok(ValidationReport { summary, sequences })
}

/// Background depth of a synthetic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DepthModel {
    /// Constant depth.
    Planar { depth: f32 },
    /// Depth varying linearly with the row, `far` at the top and `near` at the bottom.
    Ramp { near: f32, far: f32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpan {
    pub attributes: AttributeFlags,
    /// Half-open frame range `[start, end)`.
    pub frames: [u64; 2],
}

/// A rectangle moving at constant velocity, snapped to whole pixels each frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthTarget {
    pub id: TargetId,
    /// Top-left corner at frame 0.
    pub start: [f64; 2],
    /// Pixels per frame.
    pub velocity: [f64; 2],
    pub size: [u32; 2],
    pub depth: f32,
    /// Confidence level on target pixels.
    pub confidence: u8,
    /// Half-open frame ranges where the target is fully occluded.
    pub hidden: Vec<[u64; 2]>,
    pub attributes: Vec<AttributeSpan>,
}

impl Default for SynthTarget {
    fn default() -> Self {
        Self {
            id: 1,
            start: [8.0, 8.0],
            velocity: [2.0, 1.0],
            size: [12, 10],
            depth: 2.0,
            confidence: 2,
            hidden: Vec::new(),
            attributes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub id: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels; the principal point is the image center.
    pub focal: f64,
    pub depth_model: DepthModel,
    pub targets: Vec<SynthTarget>,
    pub keyframe_interval: u64,
    pub noise_seed: u64,
    /// Standard deviation of additive Gaussian depth noise, meters.
    pub noise_std: f32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            id: "synth".into(),
            frames: 5,
            width: 64,
            height: 48,
            focal: 60.0,
            depth_model: DepthModel::Planar { depth: 4.0 },
            targets: vec![SynthTarget::default()],
            keyframe_interval: 3,
            noise_seed: 0,
            noise_std: 0.0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::invalid("frames", "a synthetic sequence needs at least one frame"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("size", "image dimensions must be positive"));
        }
        if self.keyframe_interval == 0 {
            return Err(Error::invalid("keyframe_interval", "must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be finite and non-negative"));
        }
        let depth_ok = match self.depth_model {
            DepthModel::Planar { depth } => depth > 0.0,
            DepthModel::Ramp { near, far } => near > 0.0 && far > 0.0,
        };
        if !depth_ok {
            return Err(Error::invalid("depth_model", "depths must be positive"));
        }
        let mut ids = Vec::new();
        for t in &self.targets {
            if ids.contains(&t.id) {
                return Err(Error::invalid("targets", format!("duplicate target id {}", t.id)));
            }
            ids.push(t.id);
            if t.size[0] == 0 || t.size[1] == 0 || !(t.depth > 0.0) || t.confidence > 2 {
                return Err(Error::invalid("targets", format!("target {} has invalid size, depth or confidence", t.id)));
            }
            if !t.start.iter().chain(&t.velocity).all(|v| v.is_finite()) {
                return Err(Error::invalid("targets", format!("target {} motion is not finite", t.id)));
            }
        }
        Ok(())
    }

    /// Integer pixel rectangle `[x0, x1) x [y0, y1)` of `target` at `frame`, before clipping.
    pub fn target_rect(&self, target: &SynthTarget, frame: u64) -> [i64; 4] {
        let x0 = (target.start[0] + target.velocity[0] * frame as f64).round() as i64;
        let y0 = (target.start[1] + target.velocity[1] * frame as f64).round() as i64;
        [x0, y0, x0 + target.size[0] as i64, y0 + target.size[1] as i64]
    }

    fn background_depth(&self, row: usize) -> f32 {
        match self.depth_model {
            DepthModel::Planar { depth } => depth,
            DepthModel::Ramp { near, far } => {
                let s = if self.height > 1 { row as f32 / (self.height - 1) as f32 } else { 0.0 };
                far + (near - far) * s
            }
        }
    }
}

/// Exact content of a synthetic sequence as it should load back.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGroundTruth {
    pub sequence: String,
    pub frames: Vec<u64>,
    pub intrinsics: CameraIntrinsics,
    /// Per target; masks only on keyframes where the target is visible.
    pub tracks: Vec<Track>,
    /// Visible-part masks on every frame, keyframe or not.
    pub full_masks: Vec<Vec<Option<TargetMask>>>,
    pub depth: Vec<DepthMap>,
    pub confidence: Vec<ConfidenceMap>,
}

fn target_colour(id: TargetId) -> [u8; 3] {
    let h = id.wrapping_mul(2_654_435_761);
    [64 + (h >> 24) as u8 % 192, 64 + (h >> 16) as u8 % 192, 64 + (h >> 8) as u8 % 192]
}

/// Renders `spec` into the sequence directory `dest` with the default layout.
pub fn synth_sequence(spec: &SynthSpec, dest: &Path) -> Result<SynthGroundTruth> {
    spec.validate()?;
    let layout = DatasetLayout::default();
    let (w, h) = (spec.width, spec.height);
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let intrinsics = CameraIntrinsics::new(spec.focal, spec.focal, w as f64 / 2.0, h as f64 / 2.0, w, h)?;
    let noise = Normal::new(0.0f32, spec.noise_std).map_err(|e| Error::invalid("noise_std", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    let frames: Vec<u64> = (0..spec.frames as u64).collect();
    let nt = spec.targets.len();

    let mut tracks: Vec<Track> = spec
        .targets
        .iter()
        .map(|t| Track {
            sequence: spec.id.clone(),
            target: t.id,
            frames: frames.clone(),
            boxes: Vec::new(),
            masks: Vec::new(),
            attributes: Vec::new(),
            keyframes: Vec::new(),
        })
        .collect();
    let mut full_masks = vec![Vec::with_capacity(spec.frames); nt];
    let mut depths = Vec::with_capacity(spec.frames);
    let mut confidences = Vec::with_capacity(spec.frames);
    let mut camera_lines = String::new();

    for &f in &frames {
        // later targets are drawn over earlier ones
        let mut owner: Vec<Option<usize>> = vec![None; w * h];
        for (ti, t) in spec.targets.iter().enumerate() {
            if t.hidden.iter().any(|[a, b]| (*a..*b).contains(&f)) {
                continue;
            }
            let [x0, y0, x1, y1] = spec.target_rect(t, f);
            for y in y0.max(0)..y1.min(h as i64) {
                for x in x0.max(0)..x1.min(w as i64) {
                    owner[y as usize * w + x as usize] = Some(ti);
                }
            }
        }
        let mut depth = Vec::with_capacity(w * h);
        let mut conf = Vec::with_capacity(w * h);
        let mut rgb = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let o = owner[y * w + x];
                let base = o.map_or_else(|| spec.background_depth(y), |ti| spec.targets[ti].depth);
                let d = if spec.noise_std > 0.0 { base + noise.sample(&mut rng) } else { base };
                depth.push(d.max(0.0));
                conf.push(o.map_or(2, |ti| spec.targets[ti].confidence));
                let px = o.map_or([96, 96, 96], |ti| target_colour(spec.targets[ti].id));
                rgb.put_pixel(x as u32, y as u32, image::Rgb(px));
            }
        }
        let depth = DepthMap::new(w, h, depth)?;
        let conf = ConfidenceMap::new(w, h, conf)?;
        let keyframe = f % spec.keyframe_interval == 0;

        for (ti, t) in spec.targets.iter().enumerate() {
            let mask = TargetMask::from_fn(w, h, |x, y| owner[y * w + x] == Some(ti));
            let bbox = mask_to_box(&mask);
            let mut flags: AttributeFlags = AttributeFlags::none();
            for span in &t.attributes {
                if (span.frames[0]..span.frames[1]).contains(&f) {
                    for a in span.attributes.iter() {
                        flags = flags.with(a);
                    }
                }
            }
            let ld = match &bbox {
                Some(b) => compute_ld_flag(&conf, b, LD_THRESHOLD)?,
                None => false,
            };
            flags.set(Attribute::LowDepthQuality, ld);
            let tr = &mut tracks[ti];
            tr.boxes.push(bbox);
            tr.attributes.push(flags);
            tr.keyframes.push(keyframe);
            let visible = bbox.map(|_| mask.clone());
            tr.masks.push(if keyframe { visible.clone() } else { None });
            full_masks[ti].push(visible);
        }

        let full = |p: PathBuf| dest.join(p);
        let rgb_path = full(layout.rgb_path(f));
        ensure_parent(&rgb_path)?;
        rgb.save_with_format(&rgb_path, image::ImageFormat::Jpeg)
            .map_err(|e| Error::format(&rgb_path, e.to_string()))?;
        write_depth_tiff(&full(layout.depth_path(f)), &depth)?;
        write_confidence_png(&full(layout.confidence_path(f)), &conf, layout.confidence_encoding)?;
        let pose = CameraPose::identity();
        let rec = CameraRecord {
            frame: f,
            fx: intrinsics.fx(),
            fy: intrinsics.fy(),
            cx: intrinsics.cx(),
            cy: intrinsics.cy(),
            r: pose.rotation_row_major(),
            t: pose.translation(),
            width: None,
            height: None,
        };
        camera_lines.push_str(&serde_json::to_string(&rec)?);
        camera_lines.push('\n');
        depths.push(depth);
        confidences.push(conf);
    }

    let mut targets = Vec::with_capacity(nt);
    for tr in &tracks {
        let mut masks = BTreeMap::new();
        for (i, m) in tr.masks.iter().enumerate() {
            if let Some(m) = m {
                let rel = layout.mask_path(frames[i], tr.target);
                write_mask_png(&dest.join(&rel), m)?;
                masks.insert(frames[i], rel.to_string_lossy().into_owned());
            }
        }
        targets.push(TargetRecord {
            id: tr.target,
            boxes: tr.boxes.clone(),
            keyframes: frames.iter().zip(&tr.keyframes).filter(|(_, k)| **k).map(|(f, _)| *f).collect(),
            masks,
            attributes: tr.attributes.clone(),
        });
    }
    let ann = AnnotationFile {
        schema_version: SCHEMA_VERSION,
        sequence: spec.id.clone(),
        frames: frames.clone(),
        targets,
    };
    write_text(&dest.join(&layout.annotations), &(serde_json::to_string_pretty(&ann)? + "\n"))?;
    write_text(&dest.join(&layout.camera), &camera_lines)?;

    Ok(SynthGroundTruth {
        sequence: spec.id.clone(),
        frames,
        intrinsics,
        tracks,
        full_masks,
        depth: depths,
        confidence: confidences,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
