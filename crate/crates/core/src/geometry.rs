//! Pinhole projection and the mapping from camera space onto the BEV pillar grid.
//!
//! Camera axes are x right, y down, z forward. The BEV plane is `(x, z)`;
//! height is collapsed, so every point on a vertical line lands in the same
//! pillar. Pixel coordinates are `(u, v)` = (column, row).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CameraIntrinsics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Lifts pixel `(u, v)` observed at `depth` meters into camera space.
pub fn unproject(pixel: (f64, f64), depth: f64, k: &CameraIntrinsics) -> Result<Point3> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::invalid("depth", format!("{depth} is not a positive depth")));
    }
    let (u, v) = pixel;
    Ok(Point3 {
        x: (u - k.cx()) * depth / k.fx(),
        y: (v - k.cy()) * depth / k.fy(),
        z: depth,
    })
}

/// Projects a camera-space point in front of the camera onto the image plane.
pub fn project(p: &Point3, k: &CameraIntrinsics) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::invalid("point", format!("z = {} is not in front of the camera", p.z)));
    }
    Ok((k.fx() * p.x / p.z + k.cx(), k.fy() * p.y / p.z + k.cy()))
}

/// Extent and resolution of the BEV grid. Rows index depth (z), columns index x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRecord", into = "GridRecord")]
pub struct BEVGridSpec {
    x_min: f64,
    x_max: f64,
    z_min: f64,
    z_max: f64,
    cell: f64,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct GridRecord {
    x_range: [f64; 2],
    z_range: [f64; 2],
    cell: f64,
}

impl TryFrom<GridRecord> for BEVGridSpec {
    type Error = Error;

    fn try_from(r: GridRecord) -> Result<Self> {
        Self::new(r.x_range, r.z_range, r.cell)
    }
}

impl From<BEVGridSpec> for GridRecord {
    fn from(g: BEVGridSpec) -> Self {
        GridRecord {
            x_range: [g.x_min, g.x_max],
            z_range: [g.z_min, g.z_max],
            cell: g.cell,
        }
    }
}

impl Default for BEVGridSpec {
    /// 8 m x 8 m in front of the camera at 0.125 m, i.e. 64 x 64 pillars.
    fn default() -> Self {
        Self::new([-4.0, 4.0], [0.0, 8.0], 0.125).expect("default grid is valid")
    }
}

impl BEVGridSpec {
    pub fn new(x_range: [f64; 2], z_range: [f64; 2], cell: f64) -> Result<Self> {
        let [x_min, x_max] = x_range;
        let [z_min, z_max] = z_range;
        let all_finite = [x_min, x_max, z_min, z_max, cell].iter().all(|v| v.is_finite());
        if !all_finite || !(x_min < x_max) || !(z_min < z_max) {
            return Err(Error::invalid("grid", "ranges must be finite and nonempty"));
        }
        if !(cell > 0.0) {
            return Err(Error::invalid("grid", format!("cell size {cell} must be positive")));
        }
        let rows = ((z_max - z_min) / cell).ceil() as usize;
        let cols = ((x_max - x_min) / cell).ceil() as usize;
        Ok(Self {
            x_min,
            x_max,
            z_min,
            z_max,
            cell,
            rows,
            cols,
        })
    }

    pub fn x_range(&self) -> [f64; 2] {
        [self.x_min, self.x_max]
    }

    pub fn z_range(&self) -> [f64; 2] {
        [self.z_min, self.z_max]
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Number of cells along z (H_B).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of cells along x (W_B).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Camera-space center of cell `(k, l)` at height zero.
    pub fn cell_center(&self, k: usize, l: usize) -> Point3 {
        Point3 {
            x: self.x_min + (l as f64 + 0.5) * self.cell,
            y: 0.0,
            z: self.z_min + (k as f64 + 0.5) * self.cell,
        }
    }
}

/// Pillar `(k, l)` containing `p`, or `None` outside the grid. Cells are half-open.
pub fn bev_cell_of(p: &Point3, grid: &BEVGridSpec) -> Option<(usize, usize)> {
    if !(p.x >= grid.x_min && p.x < grid.x_max && p.z >= grid.z_min && p.z < grid.z_max) {
        return None;
    }
    let k = ((p.z - grid.z_min) / grid.cell).floor() as usize;
    let l = ((p.x - grid.x_min) / grid.cell).floor() as usize;
    (k < grid.rows && l < grid.cols).then_some((k, l))
}
