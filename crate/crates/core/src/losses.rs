//! Training losses of the VOT and VOS heads with hand-derived gradients, and a
//! central finite-difference checker.
//!
//! Every loss returns a [`LossValue`]: the scalar plus its gradient with
//! respect to the prediction inputs. At non-smooth points (clamps, `|.|` at
//! zero, `min`/`max` ties, bootstrap rank ties) the gradient is the left
//! limit, i.e. the derivative obtained when the input approaches from below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BoundingBox;

/// Lower clamp for probabilities entering a logarithm.
pub const PROB_CLAMP: f64 = 1e-6;
/// Smoothing term in the dice denominator.
pub const DICE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossValue {
    /// A bare value with no inputs.
    pub fn scalar(value: f64) -> Self {
        Self {
            value,
            grad: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossConfig {
    pub lambda_giou: f64,
    pub lambda_l1: f64,
    pub lambda_bce: f64,
    pub lambda_dice: f64,
    pub focal_alpha: f64,
    pub focal_beta: f64,
    pub bootstrap_fraction: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_giou: 2.0,
            lambda_l1: 5.0,
            lambda_bce: 10.0,
            lambda_dice: 2.0,
            focal_alpha: 2.0,
            focal_beta: 4.0,
            bootstrap_fraction: 0.15,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let lambdas = [self.lambda_giou, self.lambda_l1, self.lambda_bce, self.lambda_dice];
        if lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("loss config", "all lambda weights must be positive"));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::invalid("loss config", "bootstrap fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

fn check_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::shape("nonempty input", 0));
    }
    Ok(())
}

/// Clamped probability and whether the clamp is inactive (gradient passes).
fn clamp_prob(p: f64) -> (f64, bool) {
    let hi = 1.0 - PROB_CLAMP;
    if p <= PROB_CLAMP {
        (PROB_CLAMP, false)
    } else if p > hi {
        (hi, false)
    } else {
        (p, true)
    }
}

/// Center-heatmap focal loss.
///
/// Pixels with `gt == 1` contribute `-(1-p)^alpha log p`, all others
/// `-(1-y)^beta p^alpha log(1-p)`. The sum is divided by the number of
/// positive pixels (at least one).
pub fn focal_loss(pred: &[f64], gt: &[f64], alpha: f64, beta: f64) -> Result<LossValue> {
    check_len(pred, gt)?;
    let n_pos = gt.iter().filter(|&&y| y == 1.0).count().max(1) as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&raw, &y)) in pred.iter().zip(gt).enumerate() {
        let (p, live) = clamp_prob(raw);
        let (v, d) = if y == 1.0 {
            let q = 1.0 - p;
            let v = -q.powf(alpha) * p.ln();
            let d = alpha * q.powf(alpha - 1.0) * p.ln() - q.powf(alpha) / p;
            (v, d)
        } else {
            let wneg = (1.0 - y).powf(beta);
            let v = -wneg * p.powf(alpha) * (1.0 - p).ln();
            let d = -wneg * (alpha * p.powf(alpha - 1.0) * (1.0 - p).ln() - p.powf(alpha) / (1.0 - p));
            (v, d)
        };
        value += v;
        if live {
            grad[i] = d / n_pos;
        }
    }
    Ok(LossValue {
        value: value / n_pos,
        grad,
    })
}

/// Gaussian target heatmap: exactly 1 at the pixel containing the box
/// center, with a spread derived from the box size.
pub fn center_heatmap(width: usize, height: usize, target: &BoundingBox) -> Vec<f64> {
    let radius = gaussian_radius(target.h(), target.w(), 0.7).max(0.0).floor();
    let sigma = (2.0 * radius + 1.0) / 6.0;
    let (cx, cy) = target.center();
    let (px, py) = (cx.floor(), cy.floor());
    let mut map = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let d2 = (x as f64 - px).powi(2) + (y as f64 - py).powi(2);
            if d2.sqrt() <= radius {
                map[y * width + x] = (-d2 / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    map
}

/// Largest radius such that a corner-shifted box still overlaps the original by `min_overlap`.
fn gaussian_radius(height: f64, width: f64, min_overlap: f64) -> f64 {
    let b1 = height + width;
    let c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
    let r1 = (b1 + (b1 * b1 - 4.0 * c1).sqrt()) / 2.0;
    let b2 = 2.0 * (height + width);
    let c2 = (1.0 - min_overlap) * width * height;
    let r2 = (b2 + (b2 * b2 - 16.0 * c2).sqrt()) / 2.0;
    let a3 = 4.0 * min_overlap;
    let b3 = -2.0 * min_overlap * (height + width);
    let c3 = (min_overlap - 1.0) * width * height;
    let r3 = (b3 + (b3 * b3 - 4.0 * a3 * c3).sqrt()) / 2.0;
    r1.min(r2).min(r3)
}

// derivative of max(a, b) w.r.t. a, left limit at ties
fn dmax(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else {
        0.0
    }
}

// derivative of min(a, b) w.r.t. a, left limit at ties
fn dmin(a: f64, b: f64) -> f64 {
    if a <= b {
        1.0
    } else {
        0.0
    }
}

/// Generalized IoU of two boxes.
pub fn giou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    1.0 - giou_loss(a, b).value
}

/// `1 - GIoU(pred, target)` with the gradient w.r.t. `pred`'s `(x, y, w, h)`.
pub fn giou_loss(pred: &BoundingBox, target: &BoundingBox) -> LossValue {
    let (x1, y1, x2, y2) = (pred.x(), pred.y(), pred.right(), pred.bottom());
    let (tx1, ty1, tx2, ty2) = (target.x(), target.y(), target.right(), target.bottom());

    let iw_raw = x2.min(tx2) - x1.max(tx1);
    let ih_raw = y2.min(ty2) - y1.max(ty1);
    let (iw, ih) = (iw_raw.max(0.0), ih_raw.max(0.0));
    let inter = iw * ih;
    let union = pred.area() + target.area() - inter;
    let cw = x2.max(tx2) - x1.min(tx1);
    let ch = y2.max(ty2) - y1.min(ty1);
    let enclose = cw * ch;
    let value = 2.0 - inter / union - union / enclose;

    // partials w.r.t. corners (x1, y1, x2, y2)
    let iw_live = if iw_raw > 0.0 { 1.0 } else { 0.0 };
    let ih_live = if ih_raw > 0.0 { 1.0 } else { 0.0 };
    let d_iw = [-dmax(x1, tx1) * iw_live, 0.0, dmin(x2, tx2) * iw_live, 0.0];
    let d_ih = [0.0, -dmax(y1, ty1) * ih_live, 0.0, dmin(y2, ty2) * ih_live];
    let d_cw = [-dmin(x1, tx1), 0.0, dmax(x2, tx2), 0.0];
    let d_ch = [0.0, -dmin(y1, ty1), 0.0, dmax(y2, ty2)];
    let (w, h) = (pred.w(), pred.h());
    let d_area = [-h, -w, h, w];

    let mut corner = [0.0; 4];
    for i in 0..4 {
        let d_inter = d_iw[i] * ih + iw * d_ih[i];
        let d_union = d_area[i] - d_inter;
        let d_enclose = d_cw[i] * ch + cw * d_ch[i];
        corner[i] = -(d_inter * union - inter * d_union) / (union * union)
            - (d_union * enclose - union * d_enclose) / (enclose * enclose);
    }
    // x1 = x, x2 = x + w
    let grad = vec![corner[0] + corner[2], corner[1] + corner[3], corner[2], corner[3]];
    LossValue { value, grad }
}

/// Mean absolute difference over `(x, y, w, h)`; gradient w.r.t. `pred`.
pub fn l1_loss(pred: &BoundingBox, target: &BoundingBox) -> LossValue {
    let (p, t) = (pred.to_array(), target.to_array());
    let mut value = 0.0;
    let mut grad = vec![0.0; 4];
    for i in 0..4 {
        let d = p[i] - t[i];
        value += d.abs();
        grad[i] = if d > 0.0 { 0.25 } else { -0.25 };
    }
    LossValue {
        value: value / 4.0,
        grad,
    }
}

/// `lambda_giou * giou + lambda_l1 * l1`, both w.r.t. the same predicted box.
pub fn reg_loss(pred: &BoundingBox, target: &BoundingBox, cfg: &LossConfig) -> LossValue {
    let g = giou_loss(pred, target);
    let l = l1_loss(pred, target);
    LossValue {
        value: cfg.lambda_giou * g.value + cfg.lambda_l1 * l.value,
        grad: g
            .grad
            .iter()
            .zip(&l.grad)
            .map(|(a, b)| cfg.lambda_giou * a + cfg.lambda_l1 * b)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VotComponents {
    pub focal: LossValue,
    pub giou: LossValue,
    pub l1: LossValue,
}

/// `focal + lambda_giou * giou + lambda_l1 * l1`.
///
/// The gradient is laid out as `[focal inputs..., box inputs...]`, where the
/// GIoU and L1 gradients refer to the same box and are summed.
pub fn vot_loss(c: &VotComponents, cfg: &LossConfig) -> Result<LossValue> {
    if c.giou.grad.len() != c.l1.grad.len() {
        return Err(Error::shape(c.giou.grad.len(), c.l1.grad.len()));
    }
    let value = c.focal.value + cfg.lambda_giou * c.giou.value + cfg.lambda_l1 * c.l1.value;
    let mut grad = c.focal.grad.clone();
    grad.extend(
        c.giou
            .grad
            .iter()
            .zip(&c.l1.grad)
            .map(|(g, l)| cfg.lambda_giou * g + cfg.lambda_l1 * l),
    );
    Ok(LossValue { value, grad })
}

/// Whole VOT objective from raw predictions: heatmap and box.
pub fn track_loss(
    pred_heatmap: &[f64],
    gt_heatmap: &[f64],
    pred_box: &BoundingBox,
    gt_box: &BoundingBox,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let components = VotComponents {
        focal: focal_loss(pred_heatmap, gt_heatmap, cfg.focal_alpha, cfg.focal_beta)?,
        giou: giou_loss(pred_box, gt_box),
        l1: l1_loss(pred_box, gt_box),
    };
    vot_loss(&components, cfg)
}

/// Soft dice `1 - 2 sum(p g) / (sum p + sum g + eps)`, gradient w.r.t. `pred`.
pub fn dice_loss(pred: &[f64], gt: &[f64]) -> Result<LossValue> {
    check_len(pred, gt)?;
    let num: f64 = 2.0 * pred.iter().zip(gt).map(|(p, g)| p * g).sum::<f64>();
    let den: f64 = pred.iter().sum::<f64>() + gt.iter().sum::<f64>() + DICE_EPSILON;
    let grad = gt.iter().map(|g| -(2.0 * g * den - num) / (den * den)).collect();
    Ok(LossValue {
        value: 1.0 - num / den,
        grad,
    })
}

/// Per-pixel binary cross entropy of clamped probabilities.
pub fn cross_entropy(pred: &[f64], gt: &[f64]) -> Result<Vec<f64>> {
    check_len(pred, gt)?;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(&raw, &g)| {
            let (p, _) = clamp_prob(raw);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .collect())
}

/// Number of pixels kept by bootstrapping: `ceil(fraction * n)`, at least one.
pub fn bootstrap_count(n: usize, fraction: f64) -> usize {
    // guard against 0.15 * 20 = 3.0000000000000004
    (((fraction * n as f64) - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Indices of the `k` largest values; equal values keep the lower index first.
pub fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Mean of the largest `ceil(fraction * n)` values.
pub fn top_fraction_mean(values: &[f64], fraction: f64) -> f64 {
    let k = bootstrap_count(values.len(), fraction);
    top_k_indices(values, k).iter().map(|&i| values[i]).sum::<f64>() / k as f64
}

/// Mean cross entropy over the hardest `ceil(fraction * HW)` pixels.
pub fn bootstrapped_ce(pred: &[f64], gt: &[f64], fraction: f64) -> Result<LossValue> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid("fraction", format!("{fraction} outside (0, 1]")));
    }
    let ce = cross_entropy(pred, gt)?;
    let k = bootstrap_count(ce.len(), fraction);
    let keep = top_k_indices(&ce, k);
    let mut grad = vec![0.0; pred.len()];
    let mut value = 0.0;
    for &i in &keep {
        value += ce[i];
        let (p, live) = clamp_prob(pred[i]);
        if live {
            grad[i] = (-gt[i] / p + (1.0 - gt[i]) / (1.0 - p)) / k as f64;
        }
    }
    Ok(LossValue {
        value: value / k as f64,
        grad,
    })
}

/// Squared error of the IoU prediction.
pub fn iou_l2_loss(pred_iou: f64, true_iou: f64) -> LossValue {
    let d = pred_iou - true_iou;
    LossValue {
        value: d * d,
        grad: vec![2.0 * d],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VosComponents {
    pub bce: LossValue,
    pub dice: LossValue,
    pub iou_l2: LossValue,
    /// Already-weighted box regression term, see [`reg_loss`].
    pub reg: LossValue,
}

/// `lambda_bce * bce + lambda_dice * dice + l2 + reg`.
///
/// Gradient layout: `[mask inputs..., iou input..., box inputs...]`.
pub fn vos_loss(c: &VosComponents, cfg: &LossConfig) -> Result<LossValue> {
    if c.bce.grad.len() != c.dice.grad.len() {
        return Err(Error::shape(c.bce.grad.len(), c.dice.grad.len()));
    }
    let value = cfg.lambda_bce * c.bce.value + cfg.lambda_dice * c.dice.value + c.iou_l2.value + c.reg.value;
    let mut grad: Vec<f64> = c
        .bce
        .grad
        .iter()
        .zip(&c.dice.grad)
        .map(|(b, d)| cfg.lambda_bce * b + cfg.lambda_dice * d)
        .collect();
    grad.extend_from_slice(&c.iou_l2.grad);
    grad.extend_from_slice(&c.reg.grad);
    Ok(LossValue { value, grad })
}

/// Whole VOS objective from raw predictions.
#[allow(clippy::too_many_arguments)]
pub fn segmentation_loss(
    pred_mask: &[f64],
    gt_mask: &[f64],
    pred_iou: f64,
    true_iou: f64,
    pred_box: &BoundingBox,
    gt_box: &BoundingBox,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let components = VosComponents {
        bce: bootstrapped_ce(pred_mask, gt_mask, cfg.bootstrap_fraction)?,
        dice: dice_loss(pred_mask, gt_mask)?,
        iou_l2: iou_l2_loss(pred_iou, true_iou),
        reg: reg_loss(pred_box, gt_box, cfg),
    };
    vos_loss(&components, cfg)
}

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

/// Magnitudes below this are compared absolutely in [`check_gradient`].
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// Compares `f`'s analytic gradient at `point` with `(f(x+h) - f(x-h)) / 2h`.
///
/// The per-coordinate error is `|a - n| / max(|a|, |n|, GRADIENT_FLOOR)`.
pub fn check_gradient<F>(f: F, point: &[f64], h: f64, tol: f64) -> Result<GradientReport>
where
    F: Fn(&[f64]) -> Result<LossValue>,
{
    let base = f(point)?;
    if base.grad.len() != point.len() {
        return Err(Error::shape(format!("{} gradient entries", point.len()), base.grad.len()));
    }
    let mut numeric = Vec::with_capacity(point.len());
    let mut x = point.to_vec();
    for i in 0..point.len() {
        let step = h * point[i].abs().max(1.0);
        x[i] = point[i] + step;
        let up = f(&x)?.value;
        x[i] = point[i] - step;
        let down = f(&x)?.value;
        x[i] = point[i];
        numeric.push((up - down) / (2.0 * step));
    }
    let (mut max_rel_error, mut worst_index) = (0.0f64, 0);
    for (i, (a, n)) in base.grad.iter().zip(&numeric).enumerate() {
        let err = (a - n).abs() / a.abs().max(n.abs()).max(GRADIENT_FLOOR);
        if err > max_rel_error || err.is_nan() {
            max_rel_error = err;
            worst_index = i;
        }
    }
    Ok(GradientReport {
        analytic: base.grad,
        numeric,
        max_rel_error,
        worst_index,
        passed: max_rel_error < tol,
    })
}

pub const SUITE_STEP: f64 = 1e-6;
pub const SUITE_TOLERANCE: f64 = 1e-4;
/// Sampled points stay at least this far from every non-smooth locus.
pub const SMOOTH_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub loss: &'static str,
    pub points: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

fn box_from(v: &[f64]) -> Result<BoundingBox> {
    BoundingBox::new(v[0], v[1], v[2], v[3])
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()
}

fn random_binary(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.4)))).collect();
    g[0] = 1.0;
    g
}

fn random_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    BoundingBox::new(
        rng.gen_range(0.0..10.0),
        rng.gen_range(0.0..10.0),
        rng.gen_range(1.0..8.0),
        rng.gen_range(1.0..8.0),
    )
    .expect("positive size")
}

/// Every edge pair and every overlap extent differs by at least the margin.
fn boxes_smooth(a: &BoundingBox, b: &BoundingBox) -> bool {
    let edges = [
        (a.x(), b.x()),
        (a.right(), b.right()),
        (a.y(), b.y()),
        (a.bottom(), b.bottom()),
        (a.right(), b.x()),
        (a.x(), b.right()),
        (a.bottom(), b.y()),
        (a.y(), b.bottom()),
    ];
    let coords_apart = a
        .to_array()
        .iter()
        .zip(b.to_array())
        .all(|(p, q)| (p - q).abs() >= SMOOTH_MARGIN);
    edges.iter().all(|(p, q)| (p - q).abs() >= SMOOTH_MARGIN) && coords_apart
}

fn smooth_box_pair(rng: &mut ChaCha8Rng) -> (BoundingBox, BoundingBox) {
    loop {
        let (a, b) = (random_box(rng), random_box(rng));
        if boxes_smooth(&a, &b) {
            return (a, b);
        }
    }
}

/// Mask prediction whose bootstrap selection is stable under small perturbations.
fn smooth_mask(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> (Vec<f64>, Vec<f64>) {
    loop {
        let p = random_probs(rng, n);
        let g = random_binary(rng, n);
        let ce = cross_entropy(&p, &g).expect("same length");
        let k = bootstrap_count(n, fraction);
        if k == n {
            return (p, g);
        }
        let mut sorted = ce.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if sorted[k - 1] - sorted[k] >= SMOOTH_MARGIN {
            return (p, g);
        }
    }
}

/// Runs [`check_gradient`] on every loss and both composites at `points`
/// seeded smooth points each.
pub fn gradient_suite(seed: u64, points: usize, cfg: &LossConfig) -> Result<Vec<SuiteEntry>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, tol) = (SUITE_STEP, SUITE_TOLERANCE);
    let mut entries = Vec::new();
    let mut record = |loss: &'static str, reports: Vec<GradientReport>| {
        let max_rel_error = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
        entries.push(SuiteEntry {
            loss,
            points: reports.len(),
            max_rel_error,
            passed: reports.iter().all(|r| r.passed),
        });
    };
    const HM: usize = 6;

    let mut reports = Vec::new();
    for _ in 0..points {
        let target = BoundingBox::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0), 3.0, 2.5)?;
        let gt = center_heatmap(HM, HM, &target);
        let p = random_probs(&mut rng, HM * HM);
        let (a, b) = (cfg.focal_alpha, cfg.focal_beta);
        reports.push(check_gradient(|x| focal_loss(x, &gt, a, b), &p, h, tol)?);
    }
    record("focal", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let (p, t) = smooth_box_pair(&mut rng);
        reports.push(check_gradient(|x| Ok(giou_loss(&box_from(x)?, &t)), &p.to_array(), h, tol)?);
    }
    record("giou", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let (p, t) = smooth_box_pair(&mut rng);
        reports.push(check_gradient(|x| Ok(l1_loss(&box_from(x)?, &t)), &p.to_array(), h, tol)?);
    }
    record("l1", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let p = random_probs(&mut rng, 16);
        let g = random_binary(&mut rng, 16);
        reports.push(check_gradient(|x| dice_loss(x, &g), &p, h, tol)?);
    }
    record("dice", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let (p, g) = smooth_mask(&mut rng, 20, cfg.bootstrap_fraction);
        let frac = cfg.bootstrap_fraction;
        reports.push(check_gradient(|x| bootstrapped_ce(x, &g, frac), &p, h, tol)?);
    }
    record("bootstrapped_ce", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let (p, t) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        reports.push(check_gradient(|x| Ok(iou_l2_loss(x[0], t)), &[p], h, tol)?);
    }
    record("iou_l2", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let (pb, tb) = smooth_box_pair(&mut rng);
        let gt = center_heatmap(HM, HM, &BoundingBox::new(1.0, 2.0, 2.0, 3.0)?);
        let mut x = random_probs(&mut rng, HM * HM);
        x.extend_from_slice(&pb.to_array());
        let n = HM * HM;
        let f = |v: &[f64]| track_loss(&v[..n], &gt, &box_from(&v[n..])?, &tb, cfg);
        reports.push(check_gradient(f, &x, h, tol)?);
    }
    record("vot_composite", reports);

    let mut reports = Vec::new();
    for _ in 0..points {
        let n = 20;
        let (mask, g) = smooth_mask(&mut rng, n, cfg.bootstrap_fraction);
        let (pb, tb) = smooth_box_pair(&mut rng);
        let true_iou = rng.gen_range(0.0..1.0);
        let mut x = mask;
        x.push(rng.gen_range(0.0..1.0));
        x.extend_from_slice(&pb.to_array());
        let f = |v: &[f64]| segmentation_loss(&v[..n], &g, v[n], true_iou, &box_from(&v[n + 1..])?, &tb, cfg);
        reports.push(check_gradient(f, &x, h, tol)?);
    }
    record("vos_composite", reports);

    Ok(entries)
}
