//! Independent reference implementations shared by the integration tests and
//! the acceptance harness. Nothing here calls the library routine it checks.

#![allow(dead_code)]

use num::rational::BigRational;
use num::bigint::BigInt;
use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rgbdkit::bev::PointCloud;
use rgbdkit::dataset::{AttributeSpan, DepthModel, SynthSpec, SynthTarget};
use rgbdkit::eval_vot::TrackResult;
use rgbdkit::geometry::{BEVGridSpec, Point3};
use rgbdkit::model::{box_iou, Attribute, AttributeFlags, BoundingBox, TargetMask, TrackPrediction};

// ---------------------------------------------------------------------------
// exact arithmetic

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        return f64::from_bits(1);
    }
    let b = x.to_bits();
    f64::from_bits(if x > 0.0 { b + 1 } else { b - 1 })
}

fn next_down(x: f64) -> f64 {
    -next_up(-x)
}

/// Nearest f64 to `q`, ties to even mantissa.
pub fn round_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    // start near the answer, then settle it with exact comparisons
    let mut c = q.to_f64().expect("representable magnitude");
    // walk until c bounds q from below and next_up(c) from above
    while exact(c) > *q {
        c = next_down(c);
    }
    while exact(next_up(c)) <= *q {
        c = next_up(c);
    }
    let lo = c;
    if exact(lo) == *q {
        return lo;
    }
    let hi = next_up(lo);
    let d_lo = q - exact(lo);
    let d_hi = exact(hi) - q;
    match d_lo.cmp(&d_hi) {
        std::cmp::Ordering::Less => lo,
        std::cmp::Ordering::Greater => hi,
        std::cmp::Ordering::Equal => {
            if lo.to_bits() & 1 == 0 {
                lo
            } else {
                hi
            }
        }
    }
}

/// Every finite f64 is an integer multiple of 2^-FIXED_SHIFT.
const FIXED_SHIFT: u32 = 1100;

fn fixed(x: f64) -> BigInt {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { -1 } else { 1 };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mantissa, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    BigInt::from(sign) * (BigInt::from(mantissa) << (e + FIXED_SHIFT as i64) as usize)
}

/// Correctly rounded sum of `values`.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = BigInt::zero();
    for v in values {
        assert!(v.is_finite());
        acc += fixed(v);
    }
    round_to_f64(&BigRational::new(acc, BigInt::one() << FIXED_SHIFT as usize))
}

fn mean_exact(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        exact_sum(values.iter().copied()) / values.len() as f64
    }
}

// ---------------------------------------------------------------------------
// long-term VOT protocol

#[derive(Debug, Clone)]
pub struct VotCase {
    pub result: TrackResult,
    pub gt: Vec<Option<BoundingBox>>,
}

fn jitter(rng: &mut ChaCha8Rng, b: &BoundingBox, amount: f64) -> BoundingBox {
    let w = (b.w() + rng.gen_range(-amount..amount)).max(1.0);
    let h = (b.h() + rng.gen_range(-amount..amount)).max(1.0);
    BoundingBox::new(
        b.x() + rng.gen_range(-amount..amount),
        b.y() + rng.gen_range(-amount..amount),
        w,
        h,
    )
    .unwrap()
}

/// Tracks with drifting boxes, occlusions, false alarms, misses and tied confidences.
pub fn vot_cases(seed: u64, n_tracks: usize, max_len: usize) -> Vec<VotCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_tracks)
        .map(|t| {
            let n = rng.gen_range(max_len / 2..=max_len);
            let mut x = rng.gen_range(10.0..100.0);
            let mut y = rng.gen_range(10.0..100.0);
            let (w, h) = (rng.gen_range(8.0..40.0), rng.gen_range(8.0..40.0));
            let mut gt = Vec::with_capacity(n);
            let mut preds = Vec::with_capacity(n);
            // the last track is fully invisible to cover tracks without recall
            let never_visible = t == n_tracks - 1 && n_tracks > 2;
            for _ in 0..n {
                x += rng.gen_range(-2.0..2.0);
                y += rng.gen_range(-2.0..2.0);
                let visible = !never_visible && rng.gen_bool(0.85);
                let g = visible.then(|| BoundingBox::new(x, y, w, h).unwrap());
                // quantized confidences produce ties across frames and tracks
                let conf = if rng.gen_bool(0.5) {
                    f64::from(rng.gen_range(0..20u32)) / 20.0
                } else {
                    rng.gen_range(0.0..1.0)
                };
                let p = match (&g, rng.gen_range(0..10)) {
                    (_, 0) => TrackPrediction::absent(conf).unwrap(),
                    (Some(b), 1..=7) => TrackPrediction::present(jitter(&mut rng, b, 6.0), conf).unwrap(),
                    (_, 8) => TrackPrediction::present(
                        BoundingBox::new(rng.gen_range(0.0..150.0), rng.gen_range(0.0..150.0), w, h).unwrap(),
                        conf,
                    )
                    .unwrap(),
                    (Some(_), _) => TrackPrediction::absent(conf).unwrap(),
                    (None, _) => TrackPrediction::present(BoundingBox::new(x, y, w, h).unwrap(), conf).unwrap(),
                };
                gt.push(g);
                preds.push(p);
            }
            VotCase {
                result: TrackResult::new(preds),
                gt,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub tau: f64,
    pub pr: f64,
    pub re: f64,
    pub f: f64,
}

fn harmonic(pr: f64, re: f64) -> f64 {
    if pr + re == 0.0 {
        0.0
    } else {
        2.0 * pr * re / (pr + re)
    }
}

/// Per-frame (counted, iou, visible) at threshold `tau`, straight from the definitions.
fn frame_terms(case: &VotCase, tau: f64) -> Vec<(bool, f64, bool)> {
    case.result
        .predictions
        .iter()
        .zip(&case.gt)
        .map(|(p, g)| {
            let counted = p.bbox.is_some() && p.confidence >= tau;
            let iou = match (&p.bbox, g) {
                (Some(a), Some(b)) => box_iou(a, b),
                _ => 0.0,
            };
            (counted, iou, g.is_some())
        })
        .collect()
}

fn oracle_point(cases: &[VotCase], tau: f64, per_track: bool) -> OraclePoint {
    if per_track {
        let mut prs = Vec::new();
        let mut res = Vec::new();
        for c in cases {
            let terms = frame_terms(c, tau);
            let counted: Vec<f64> = terms.iter().filter(|t| t.0).map(|t| t.1).collect();
            let n_vis = terms.iter().filter(|t| t.2).count();
            let hit: Vec<f64> = terms.iter().filter(|t| t.0 && t.2).map(|t| t.1).collect();
            if !counted.is_empty() {
                prs.push(exact_sum(counted.iter().copied()) / counted.len() as f64);
            }
            if n_vis > 0 {
                res.push(exact_sum(hit) / n_vis as f64);
            }
        }
        let (pr, re) = (mean_exact(&prs), mean_exact(&res));
        OraclePoint {
            tau,
            pr,
            re,
            f: harmonic(pr, re),
        }
    } else {
        let terms: Vec<(bool, f64, bool)> = cases.iter().flat_map(|c| frame_terms(c, tau)).collect();
        let counted: Vec<f64> = terms.iter().filter(|t| t.0).map(|t| t.1).collect();
        let n_vis = terms.iter().filter(|t| t.2).count();
        let hit: Vec<f64> = terms.iter().filter(|t| t.0 && t.2).map(|t| t.1).collect();
        let pr = if counted.is_empty() {
            0.0
        } else {
            exact_sum(counted.iter().copied()) / counted.len() as f64
        };
        let re = if n_vis == 0 { 0.0 } else { exact_sum(hit) / n_vis as f64 };
        OraclePoint {
            tau,
            pr,
            re,
            f: harmonic(pr, re),
        }
    }
}

/// Every candidate threshold evaluated from scratch; best is the first maximum.
pub fn oracle_sweep(cases: &[VotCase], per_track: bool) -> (Vec<OraclePoint>, OraclePoint) {
    let mut taus: Vec<f64> = cases
        .iter()
        .flat_map(|c| c.result.predictions.iter().map(|p| p.confidence))
        .collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    taus.insert(0, f64::NEG_INFINITY);
    let points: Vec<OraclePoint> = taus.iter().map(|&t| oracle_point(cases, t, per_track)).collect();
    let mut best = points[0];
    for p in &points {
        if p.f > best.f {
            best = *p;
        }
    }
    (points, best)
}

// ---------------------------------------------------------------------------
// contour accuracy by exhaustive boundary matching

pub fn oracle_boundary(m: &TargetMask) -> Vec<(i64, i64)> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let on = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && m.get(x as usize, y as usize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if on(x, y) && !(on(x - 1, y) && on(x + 1, y) && on(x, y - 1) && on(x, y + 1)) {
                out.push((x, y));
            }
        }
    }
    out
}

fn matched_fraction(from: &[(i64, i64)], to: &[(i64, i64)], radius: f64) -> f64 {
    let r2 = radius * radius;
    let hits = from
        .iter()
        .filter(|(x, y)| {
            to.iter().any(|(u, v)| {
                let (dx, dy) = ((x - u) as f64, (y - v) as f64);
                dx * dx + dy * dy <= r2
            })
        })
        .count();
    hits as f64 / from.len() as f64
}

pub fn oracle_contour(pred: &TargetMask, gt: &TargetMask, radius: f64) -> f64 {
    let bp = oracle_boundary(pred);
    let bg = oracle_boundary(gt);
    match (bp.is_empty(), bg.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    harmonic(matched_fraction(&bp, &bg, radius), matched_fraction(&bg, &bp, radius))
}

/// Union of a few random rectangles and discs, sometimes empty.
pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> TargetMask {
    let shapes: Vec<(u8, f64, f64, f64, f64)> = (0..rng.gen_range(0..4))
        .map(|_| {
            (
                rng.gen_range(0..2u8),
                rng.gen_range(0.0..w as f64),
                rng.gen_range(0.0..h as f64),
                rng.gen_range(1.0..w as f64 / 2.0 + 1.0),
                rng.gen_range(1.0..h as f64 / 2.0 + 1.0),
            )
        })
        .collect();
    let noise: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(0.03)).collect();
    TargetMask::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64, y as f64);
        noise[y * w + x]
            || shapes.iter().any(|&(kind, cx, cy, a, b)| match kind {
                0 => (px - cx).abs() <= a && (py - cy).abs() <= b,
                _ => ((px - cx) / a).powi(2) + ((py - cy) / b).powi(2) <= 1.0,
            })
    })
}

// ---------------------------------------------------------------------------
// template memory, one branch per policy

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    One,
    Add(usize),
}

/// Frames held in the dynamic slots after replaying `ious`, oldest first.
pub fn oracle_memory(kind: PolicyKind, interval: u64, threshold: Option<f64>, ious: &[f64]) -> Vec<Vec<u64>> {
    let mut slots: Vec<u64> = Vec::new();
    let mut history = Vec::with_capacity(ious.len());
    for (step, &iou) in ious.iter().enumerate() {
        let frame = step as u64;
        let eligible = frame.is_multiple_of(interval);
        let passes = match threshold {
            Some(t) => iou > t,
            None => true,
        };
        if eligible && passes {
            match kind {
                PolicyKind::One => {
                    slots.clear();
                    slots.push(frame);
                }
                PolicyKind::Add(cap) => {
                    slots.push(frame);
                    if slots.len() > cap {
                        slots.remove(0);
                    }
                }
            }
        }
        history.push(slots.clone());
    }
    history
}

/// Scripted predicted IoU: slow oscillation, a dropout stretch and seeded noise.
pub fn scripted_ious(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let base = 0.7 + 0.25 * (i as f64 / 23.0).sin();
            let v = if (200..260).contains(&i) { 0.2 } else { base };
            // exact threshold values exercise the strict comparison
            if i % 97 == 0 {
                0.7
            } else {
                (v + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0)
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// synthetic dataset specs

/// A varied spec: one to three targets, occlusions, attribute spans, noise on odd seeds.
pub fn seeded_spec(seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = rng.gen_range(40..96);
    let height = rng.gen_range(32..72);
    let frames = rng.gen_range(3..12);
    let targets = (0..rng.gen_range(1..4u32))
        .map(|i| {
            let hidden_at = rng.gen_range(0..frames as u64);
            SynthTarget {
                id: i + 1,
                start: [rng.gen_range(0.0..width as f64 / 2.0), rng.gen_range(0.0..height as f64 / 2.0)],
                velocity: [rng.gen_range(-2.5..2.5), rng.gen_range(-2.0..2.0)],
                size: [rng.gen_range(4..16), rng.gen_range(4..16)],
                depth: rng.gen_range(0.5..3.0),
                confidence: rng.gen_range(0..3),
                hidden: if rng.gen_bool(0.5) { vec![[hidden_at, hidden_at + 2]] } else { vec![] },
                attributes: vec![AttributeSpan {
                    attributes: AttributeFlags::none().with(Attribute::ALL[rng.gen_range(0..Attribute::ALL.len())]),
                    frames: [0, rng.gen_range(1..=frames as u64)],
                }],
            }
        })
        .collect();
    let depth_model = if rng.gen_bool(0.5) {
        DepthModel::Planar {
            depth: rng.gen_range(3.0..6.0),
        }
    } else {
        DepthModel::Ramp {
            near: rng.gen_range(1.0..3.0),
            far: rng.gen_range(4.0..8.0),
        }
    };
    SynthSpec {
        id: format!("seq{seed:02}"),
        frames,
        width,
        height,
        focal: rng.gen_range(40.0..120.0),
        depth_model,
        targets,
        keyframe_interval: rng.gen_range(1..4),
        noise_seed: seed,
        noise_std: if seed % 2 == 1 { 0.05 } else { 0.0 },
    }
}

// ---------------------------------------------------------------------------
// BEV pooling by direct scatter

/// Sum pooling with the cell index computed from the grid bounds directly.
/// Returns `rows x cols x channels` in f64.
pub fn oracle_scatter(cloud: &PointCloud, grid: &BEVGridSpec) -> Vec<f64> {
    let [x0, x1] = grid.x_range();
    let [z0, z1] = grid.z_range();
    let c = cloud.channels();
    let mut out = vec![0.0; grid.rows() * grid.cols() * c];
    for i in 0..cloud.len() {
        let p = cloud.position(i);
        if p.x < x0 || p.x >= x1 || p.z < z0 || p.z >= z1 {
            continue;
        }
        let row = ((p.z - z0) / grid.cell()) as usize;
        let col = ((p.x - x0) / grid.cell()) as usize;
        if row >= grid.rows() || col >= grid.cols() {
            continue;
        }
        for (ch, &f) in cloud.feature(i).iter().enumerate() {
            out[(row * grid.cols() + col) * c + ch] += f64::from(f);
        }
    }
    out
}

/// Uniform points over a slightly enlarged grid footprint, so a few fall outside.
pub fn random_cloud(seed: u64, n: usize, channels: usize, grid: &BEVGridSpec) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [x0, x1] = grid.x_range();
    let [z0, z1] = grid.z_range();
    let mut cloud = PointCloud::with_capacity(channels, n);
    let mut feat = vec![0f32; channels];
    for _ in 0..n {
        let p = Point3::new(
            rng.gen_range(x0 - 0.5..x1 + 0.5),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(z0 - 0.5..z1 + 0.5),
        );
        for f in &mut feat {
            *f = rng.gen_range(-1.0..1.0);
        }
        cloud.push(p, &feat).unwrap();
    }
    cloud
}
