//! Image-to-BEV cross-view fusion as plain array operations.
//!
//! The pipeline runs in five steps, each exposed on its own:
//!
//! 1. [`lift`] spreads every image feature along its viewing ray over
//!    discrete depth bins, weighted by a Gaussian centered at the measured
//!    depth ([`depth_weights`]).
//! 2. [`bev_pool`] sums the lifted features into a pillar grid, either by a
//!    per-point scatter ([`PoolBackend::Naive`]) or by bucketing point indices
//!    per cell and reducing each segment ([`PoolBackend::Accelerated`]).
//! 3. [`modulate`] runs a convolution chain over the BEV grid.
//! 4. [`back_project`] samples the nearest pillar for every pixel using its
//!    raw depth, producing an image-aligned BEV feature map.
//! 5. [`fuse`] concatenates image and back-projected features along channels
//!    and applies a second convolution chain.
//!
//! All weights are supplied by the caller; [`ConvSpec::random`] creates a
//! seeded set for experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bev_cell_of, unproject, BEVGridSpec, Point3};
use crate::model::{CameraIntrinsics, ConfidenceMap, DepthMap};

/// Weights at or below this value are not lifted.
pub const LIFT_EPSILON: f64 = 1e-6;

/// Dense channel-major `C x H x W` feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(
                format!("{} values for {channels}x{height}x{width}", channels * height * width),
                data.len(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map", "non-finite value"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Seeded uniform values in `[-1, 1)`.
    pub fn random(channels: usize, height: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..channels * height * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    /// Feature vector at pixel `(x, y)`.
    pub fn column(&self, y: usize, x: usize) -> Vec<f32> {
        (0..self.channels).map(|c| self.get(c, y, x)).collect()
    }

    /// Stacks `self` over `other` along the channel axis.
    pub fn concat_channels(&self, other: &FeatureMap) -> Result<FeatureMap> {
        if self.height != other.height || self.width != other.width {
            return Err(Error::shape(
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(FeatureMap {
            channels: self.channels + other.channels,
            height: self.height,
            width: self.width,
            data,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }
}

/// Pillar features laid out cell-major: `(k * cols + l) * channels + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BEVFeature {
    grid: BEVGridSpec,
    channels: usize,
    data: Vec<f32>,
}

impl BEVFeature {
    pub fn zeros(grid: BEVGridSpec, channels: usize) -> Self {
        Self {
            grid,
            channels,
            data: vec![0.0; grid.num_cells() * channels],
        }
    }

    pub fn grid(&self) -> &BEVGridSpec {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pillar(&self, k: usize, l: usize) -> &[f32] {
        let start = (k * self.grid.cols() + l) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    /// Channel-major view `C x H_B x W_B` for convolution.
    pub fn to_feature_map(&self) -> FeatureMap {
        let (rows, cols, c) = (self.grid.rows(), self.grid.cols(), self.channels);
        let mut fm = FeatureMap::zeros(c, rows, cols);
        for k in 0..rows {
            for l in 0..cols {
                for (ch, &v) in self.pillar(k, l).iter().enumerate() {
                    fm.set(ch, k, l, v);
                }
            }
        }
        fm
    }

    pub fn from_feature_map(grid: BEVGridSpec, fm: &FeatureMap) -> Result<Self> {
        if fm.height != grid.rows() || fm.width != grid.cols() {
            return Err(Error::shape(
                format!("{}x{} grid", grid.rows(), grid.cols()),
                format!("{}x{}", fm.height, fm.width),
            ));
        }
        let mut out = BEVFeature::zeros(grid, fm.channels);
        for k in 0..grid.rows() {
            for l in 0..grid.cols() {
                let base = (k * grid.cols() + l) * fm.channels;
                for ch in 0..fm.channels {
                    out.data[base + ch] = fm.get(ch, k, l);
                }
            }
        }
        Ok(out)
    }
}

/// Discrete depth hypotheses with a Gaussian spread around the measured depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthDistributionSpec {
    pub d_min: f64,
    pub d_max: f64,
    pub n_bins: usize,
    pub sigma: f64,
}

impl Default for DepthDistributionSpec {
    /// 64 bins over the 0.25-8 m LiDAR range, sigma one bin wide.
    fn default() -> Self {
        let (d_min, d_max, n_bins) = (0.25, 8.0, 64);
        Self {
            d_min,
            d_max,
            n_bins,
            sigma: (d_max - d_min) / n_bins as f64,
        }
    }
}

impl DepthDistributionSpec {
    pub fn new(d_min: f64, d_max: f64, n_bins: usize, sigma: f64) -> Result<Self> {
        let spec = Self {
            d_min,
            d_max,
            n_bins,
            sigma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d_min < self.d_max && self.d_min.is_finite() && self.d_max.is_finite()) {
            return Err(Error::invalid("depth spec", "d_min must be below d_max"));
        }
        if self.n_bins == 0 {
            return Err(Error::invalid("depth spec", "n_bins must be at least 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("depth spec", "sigma must be positive"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.d_max - self.d_min) / self.n_bins as f64
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.d_min + (k as f64 + 0.5) * self.bin_width()
    }
}

/// Normalized Gaussian weights of `d` over the bins; all zeros for invalid depth.
pub fn depth_weights(d: f64, spec: &DepthDistributionSpec) -> Vec<f64> {
    let mut w = vec![0.0; spec.n_bins];
    if !(d > 0.0 && d.is_finite()) {
        return w;
    }
    let two_var = 2.0 * spec.sigma * spec.sigma;
    let sq: Vec<f64> = (0..spec.n_bins).map(|k| (spec.bin_center(k) - d).powi(2)).collect();
    // shift by the nearest bin so far-away depths do not underflow to all zeros
    let nearest = sq.iter().cloned().fold(f64::INFINITY, f64::min);
    for (wk, s) in w.iter_mut().zip(&sq) {
        *wk = (-(s - nearest) / two_var).exp();
    }
    let total: f64 = w.iter().sum();
    for wk in &mut w {
        *wk /= total;
    }
    w
}

/// Lifted frustum points: positions plus `channels` feature values per point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    channels: usize,
    positions: Vec<Point3>,
    features: Vec<f32>,
}

impl PointCloud {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            positions: Vec::new(),
            features: Vec::new(),
        }
    }

    pub fn with_capacity(channels: usize, n: usize) -> Self {
        Self {
            channels,
            positions: Vec::with_capacity(n),
            features: Vec::with_capacity(n * channels),
        }
    }

    pub fn push(&mut self, p: Point3, feature: &[f32]) -> Result<()> {
        if feature.len() != self.channels {
            return Err(Error::shape(self.channels, feature.len()));
        }
        if !p.is_finite() || feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("point", "non-finite point or feature"));
        }
        self.positions.push(p);
        self.features.extend_from_slice(feature);
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> Point3 {
        self.positions[i]
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    /// Same points with every position moved by `dy` along the vertical axis.
    pub fn shifted_vertically(&self, dy: f64) -> PointCloud {
        let mut out = self.clone();
        for p in &mut out.positions {
            p.y += dy;
        }
        out
    }

    pub fn feature_sum(&self) -> f64 {
        self.features.iter().map(|&v| v as f64).sum()
    }
}

/// Lifts `image_feat` into camera space using `depth` and intrinsics `k`.
///
/// Depth is resampled (nearest) to the feature resolution and the intrinsics
/// rescaled to match when their sizes differ from the feature map.
pub fn lift(
    image_feat: &FeatureMap,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    spec: &DepthDistributionSpec,
) -> Result<PointCloud> {
    lift_gated(image_feat, depth, None, k, spec)
}

/// [`lift`], optionally skipping pixels whose confidence level is 0.
pub fn lift_gated(
    image_feat: &FeatureMap,
    depth: &DepthMap,
    gate: Option<&ConfidenceMap>,
    k: &CameraIntrinsics,
    spec: &DepthDistributionSpec,
) -> Result<PointCloud> {
    spec.validate()?;
    let (h, w) = (image_feat.height(), image_feat.width());
    if h == 0 || w == 0 {
        return Err(Error::shape("nonempty feature map", format!("{}x{}", h, w)));
    }
    if let Some(c) = gate {
        if c.width() != depth.width() || c.height() != depth.height() {
            return Err(Error::shape(
                format!("confidence {}x{}", depth.width(), depth.height()),
                format!("{}x{}", c.width(), c.height()),
            ));
        }
    }
    let depth = depth.resample_nearest(w, h);
    let k = k.scaled_to(w, h)?;
    let centers: Vec<f64> = (0..spec.n_bins).map(|b| spec.bin_center(b)).collect();
    let mut cloud = PointCloud::with_capacity(image_feat.channels(), h * w);
    let mut feat = vec![0f32; image_feat.channels()];
    for v in 0..h {
        for u in 0..w {
            if let Some(c) = gate {
                let sy = crate::model::nearest_source(v, h, c.height());
                let sx = crate::model::nearest_source(u, w, c.width());
                if c.get(sx, sy) == 0 {
                    continue;
                }
            }
            let Some(d) = depth.valid_at(u, v) else {
                continue;
            };
            let weights = depth_weights(d, spec);
            for (b, &wb) in weights.iter().enumerate() {
                if wb <= LIFT_EPSILON {
                    continue;
                }
                let p = unproject((u as f64, v as f64), centers[b], &k)?;
                for (c, f) in feat.iter_mut().enumerate() {
                    *f = (wb * image_feat.get(c, v, u) as f64) as f32;
                }
                cloud.push(p, &feat)?;
            }
        }
    }
    Ok(cloud)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolBackend {
    /// Scatter-add point by point.
    Naive,
    /// Bucket point indices by cell, then reduce each cell's segment in parallel.
    #[default]
    Accelerated,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
    Max,
}

/// Pools lifted points into pillars. Out-of-grid points are dropped; empty cells stay zero.
pub fn bev_pool(points: &PointCloud, grid: &BEVGridSpec, backend: PoolBackend, reduction: Reduction) -> BEVFeature {
    match backend {
        PoolBackend::Naive => pool_naive(points, grid, reduction),
        PoolBackend::Accelerated => pool_bucketed(points, grid, reduction),
    }
}

fn cell_index(p: &Point3, grid: &BEVGridSpec) -> Option<usize> {
    bev_cell_of(p, grid).map(|(k, l)| k * grid.cols() + l)
}

fn pool_naive(points: &PointCloud, grid: &BEVGridSpec, reduction: Reduction) -> BEVFeature {
    let c = points.channels();
    let mut out = BEVFeature::zeros(*grid, c);
    let mut counts = vec![0usize; grid.num_cells()];
    for i in 0..points.len() {
        let Some(cell) = cell_index(&points.position(i), grid) else {
            continue;
        };
        let dst = &mut out.data[cell * c..(cell + 1) * c];
        let first = counts[cell] == 0;
        for (d, &f) in dst.iter_mut().zip(points.feature(i)) {
            match reduction {
                Reduction::Sum | Reduction::Mean => *d += f,
                Reduction::Max => *d = if first { f } else { d.max(f) },
            }
        }
        counts[cell] += 1;
    }
    if reduction == Reduction::Mean {
        for (cell, &n) in counts.iter().enumerate() {
            if n > 0 {
                for d in &mut out.data[cell * c..(cell + 1) * c] {
                    *d /= n as f32;
                }
            }
        }
    }
    out
}

fn pool_bucketed(points: &PointCloud, grid: &BEVGridSpec, reduction: Reduction) -> BEVFeature {
    let c = points.channels();
    let cells = grid.num_cells();
    let ids: Vec<Option<usize>> = points.positions().par_iter().map(|p| cell_index(p, grid)).collect();

    // counting sort: offsets[cell]..offsets[cell + 1] indexes `order`
    let mut offsets = vec![0usize; cells + 1];
    for id in ids.iter().flatten() {
        offsets[id + 1] += 1;
    }
    for i in 0..cells {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut order = vec![0usize; offsets[cells]];
    for (i, id) in ids.iter().enumerate() {
        if let Some(id) = *id {
            order[cursor[id]] = i;
            cursor[id] += 1;
        }
    }

    let mut out = BEVFeature::zeros(*grid, c);
    if c == 0 {
        return out;
    }
    // segments are reduced in ascending point order, independent of the worker count
    out.data.par_chunks_mut(c).enumerate().for_each(|(cell, dst)| {
        let segment = &order[offsets[cell]..offsets[cell + 1]];
        let Some((&head, rest)) = segment.split_first() else {
            return;
        };
        dst.copy_from_slice(points.feature(head));
        for &i in rest {
            for (d, &f) in dst.iter_mut().zip(points.feature(i)) {
                match reduction {
                    Reduction::Sum | Reduction::Mean => *d += f,
                    Reduction::Max => *d = d.max(f),
                }
            }
        }
        if reduction == Reduction::Mean {
            let n = segment.len() as f32;
            for d in dst.iter_mut() {
                *d /= n;
            }
        }
    });
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    #[default]
    Identity,
}

/// One stride-1, zero "same"-padded convolution. Weights are `out x in x kh x kw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    #[serde(default)]
    pub activation: Activation,
}

impl ConvLayer {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
        activation: Activation,
    ) -> Result<Self> {
        let layer = Self {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights,
            bias,
            activation,
        };
        layer.validate()?;
        Ok(layer)
    }

    /// Layer whose weight at `(o, i, ky, kx)` is `f(o, i, ky, kx)`, zero bias.
    pub fn from_fn(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut weights = Vec::with_capacity(out_channels * in_channels * kernel_h * kernel_w);
        for o in 0..out_channels {
            for i in 0..in_channels {
                for ky in 0..kernel_h {
                    for kx in 0..kernel_w {
                        weights.push(f(o, i, ky, kx));
                    }
                }
            }
        }
        Self::new(
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            weights,
            vec![0.0; out_channels],
            Activation::Identity,
        )
    }

    /// 1x1 layer copying input channel `o` to output channel `o` for `o < out`.
    pub fn identity(in_channels: usize, out_channels: usize) -> Self {
        Self::from_fn(out_channels, in_channels, 1, 1, |o, i, _, _| if o == i { 1.0 } else { 0.0 })
            .expect("identity layer is well-formed")
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.out_channels * self.in_channels * self.kernel_h * self.kernel_w;
        if self.weights.len() != n {
            return Err(Error::shape(format!("{n} kernel weights"), self.weights.len()));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::shape(format!("{} biases", self.out_channels), self.bias.len()));
        }
        if self.kernel_h.is_multiple_of(2) || self.kernel_w.is_multiple_of(2) {
            return Err(Error::invalid("conv", "same padding needs odd kernel sizes"));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("conv", "non-finite weight"));
        }
        Ok(())
    }

    fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f32 {
        self.weights[((o * self.in_channels + i) * self.kernel_h + ky) * self.kernel_w + kx]
    }

    pub fn apply(&self, input: &FeatureMap) -> Result<FeatureMap> {
        if input.channels() != self.in_channels {
            return Err(Error::shape(
                format!("{} input channels", self.in_channels),
                input.channels(),
            ));
        }
        let (h, w) = (input.height(), input.width());
        let (ph, pw) = (self.kernel_h / 2, self.kernel_w / 2);
        let mut data = vec![0f32; self.out_channels * h * w];
        data.par_chunks_mut(h * w).enumerate().for_each(|(o, plane)| {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = self.bias[o] as f64;
                    for i in 0..self.in_channels {
                        for ky in 0..self.kernel_h {
                            let Some(sy) = (y + ky).checked_sub(ph).filter(|&s| s < h) else {
                                continue;
                            };
                            for kx in 0..self.kernel_w {
                                let Some(sx) = (x + kx).checked_sub(pw).filter(|&s| s < w) else {
                                    continue;
                                };
                                acc += self.weight(o, i, ky, kx) as f64 * input.get(i, sy, sx) as f64;
                            }
                        }
                    }
                    let v = match self.activation {
                        Activation::Relu => acc.max(0.0),
                        Activation::Identity => acc,
                    };
                    plane[y * w + x] = v as f32;
                }
            }
        });
        Ok(FeatureMap {
            channels: self.out_channels,
            height: h,
            width: w,
            data,
        })
    }
}

/// A chain of convolution layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub layers: Vec<ConvLayer>,
}

impl ConvSpec {
    pub fn new(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("conv", "a conv chain needs at least one layer"));
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels != pair[1].in_channels {
                return Err(Error::shape(
                    format!("{} channels into next layer", pair[0].out_channels),
                    pair[1].in_channels,
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            layers: vec![ConvLayer::identity(channels, channels)],
        }
    }

    /// Seeded chain over `channels[0] -> channels[1] -> ...` with square `kernel`.
    ///
    /// Hidden layers use ReLU, the last layer is linear. Weights are uniform in
    /// `+-1/sqrt(fan_in)`.
    pub fn random(channels: &[usize], kernel: usize, seed: u64) -> Result<Self> {
        if channels.len() < 2 {
            return Err(Error::invalid("conv", "need input and output channel counts"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_layers = channels.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for (idx, pair) in channels.windows(2).enumerate() {
            let (cin, cout) = (pair[0], pair[1]);
            let bound = 1.0 / ((cin * kernel * kernel).max(1) as f32).sqrt();
            let weights = (0..cout * cin * kernel * kernel).map(|_| rng.gen_range(-bound..bound)).collect();
            let bias = (0..cout).map(|_| rng.gen_range(-bound..bound)).collect();
            let activation = if idx + 1 < n_layers {
                Activation::Relu
            } else {
                Activation::Identity
            };
            layers.push(ConvLayer::new(cout, cin, kernel, kernel, weights, bias, activation)?);
        }
        Self::new(layers)
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels
    }

    pub fn apply(&self, input: &FeatureMap) -> Result<FeatureMap> {
        let mut x = self.layers[0].apply(input)?;
        for layer in &self.layers[1..] {
            x = layer.apply(&x)?;
        }
        Ok(x)
    }
}

/// Runs `conv` over the BEV grid.
pub fn modulate(bev: &BEVFeature, conv: &ConvSpec) -> Result<BEVFeature> {
    if conv.in_channels() != bev.channels() {
        return Err(Error::shape(format!("{} BEV channels", conv.in_channels()), bev.channels()));
    }
    let out = conv.apply(&bev.to_feature_map())?;
    BEVFeature::from_feature_map(*bev.grid(), &out)
}

/// Samples the nearest pillar for each pixel of `depth`, giving `C_B x H x W`.
///
/// Pixels with invalid depth or outside the grid get a zero vector.
pub fn back_project(bev: &BEVFeature, depth: &DepthMap, k: &CameraIntrinsics) -> Result<FeatureMap> {
    let (h, w, c) = (depth.height(), depth.width(), bev.channels());
    let k = k.scaled_to(w, h)?;
    let mut out = FeatureMap::zeros(c, h, w);
    for v in 0..h {
        for u in 0..w {
            let Some(d) = depth.valid_at(u, v) else {
                continue;
            };
            let p = unproject((u as f64, v as f64), d, &k)?;
            let Some((kk, ll)) = bev_cell_of(&p, bev.grid()) else {
                continue;
            };
            for (ch, &val) in bev.pillar(kk, ll).iter().enumerate() {
                out.set(ch, v, u, val);
            }
        }
    }
    Ok(out)
}

/// Concatenates `[image_feat; i_bev]` along channels and applies `conv`.
pub fn fuse(image_feat: &FeatureMap, i_bev: &FeatureMap, conv: &ConvSpec) -> Result<FeatureMap> {
    let stacked = image_feat.concat_channels(i_bev)?;
    conv.apply(&stacked)
}

/// Full pipeline configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossViewFusion {
    pub depth_spec: DepthDistributionSpec,
    pub grid: BEVGridSpec,
    pub backend: PoolBackend,
    pub reduction: Reduction,
    pub modulation: ConvSpec,
    pub fusion: ConvSpec,
    /// Drop low-confidence (level 0) pixels before lifting.
    pub gate_low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutput {
    pub bev: BEVFeature,
    pub modulated: BEVFeature,
    pub i_bev: FeatureMap,
    pub fused: FeatureMap,
}

impl CrossViewFusion {
    /// Default grid and depth bins with seeded 3x3 convolutions that keep `channels`.
    pub fn with_random_weights(channels: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            depth_spec: DepthDistributionSpec::default(),
            grid: BEVGridSpec::default(),
            backend: PoolBackend::Accelerated,
            reduction: Reduction::Sum,
            modulation: ConvSpec::random(&[channels, channels, channels], 3, seed)?,
            fusion: ConvSpec::random(&[2 * channels, channels], 3, seed.wrapping_add(1))?,
            gate_low_confidence: false,
        })
    }

    pub fn run(
        &self,
        image_feat: &FeatureMap,
        depth: &DepthMap,
        confidence: Option<&ConfidenceMap>,
        k: &CameraIntrinsics,
    ) -> Result<FusionOutput> {
        let gate = if self.gate_low_confidence { confidence } else { None };
        let points = lift_gated(image_feat, depth, gate, k, &self.depth_spec)?;
        let bev = bev_pool(&points, &self.grid, self.backend, self.reduction);
        let modulated = modulate(&bev, &self.modulation)?;
        let depth_i = depth.resample_nearest(image_feat.width(), image_feat.height());
        let i_bev = back_project(&modulated, &depth_i, k)?;
        let fused = fuse(image_feat, &i_bev, &self.fusion)?;
        Ok(FusionOutput {
            bev,
            modulated,
            i_bev,
            fused,
        })
    }
}
