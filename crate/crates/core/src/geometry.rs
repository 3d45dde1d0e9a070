//! Planar geometry shared by every stage of the pipeline: ground-plane points,
//! poses, image-to-ground homographies and the grid used by the costmaps.
//!
//! Image coordinates are pixels with the origin at the top-left corner and
//! `v` growing downwards.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Homogeneous scale below which a projection is considered to hit infinity.
const PROJECTION_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate projection: homogeneous scale {0:e} is too close to zero")]
    DegenerateProjection(f64),
    #[error("homography is singular (|det| = {0:e})")]
    SingularHomography(f64),
    #[error("point ({x}, {y}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// A point on the ground plane, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for WorldPoint {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<WorldPoint> for [f64; 2] {
    fn from(p: WorldPoint) -> Self {
        [p.x, p.y]
    }
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: WorldPoint) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: WorldPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the planar cross product.
    pub fn cross(self, other: WorldPoint) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn scale(self, k: f64) -> WorldPoint {
        WorldPoint::new(self.x * k, self.y * k)
    }

    pub fn midpoint(self, other: WorldPoint) -> WorldPoint {
        WorldPoint::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    /// Direction of the vector from the origin to this point.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn from_polar(radius: f64, angle: f64) -> WorldPoint {
        WorldPoint::new(radius * angle.cos(), radius * angle.sin())
    }
}

impl Add for WorldPoint {
    type Output = WorldPoint;
    fn add(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for WorldPoint {
    type Output = WorldPoint;
    fn sub(self, rhs: WorldPoint) -> WorldPoint {
        WorldPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

/// A pixel location `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Position plus heading in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub position: WorldPoint,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(position: WorldPoint, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }

    /// Unit vector along the heading.
    pub fn direction(&self) -> WorldPoint {
        WorldPoint::from_polar(1.0, self.heading)
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let two_pi = 2.0 * PI;
    let mut a = theta.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    // rem_euclid maps odd multiples of π to π already; -π can only appear
    // through rounding.
    if a <= -PI {
        a += two_pi;
    }
    a
}

/// Projective map from the image plane to the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Builds a homography from nine row-major coefficients.
    pub fn from_row_major(values: [f64; 9]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(&values))
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let det = m.determinant();
        if !det.is_finite() || det.abs() <= PROJECTION_EPS {
            return Err(GeometryError::SingularHomography(det.abs()));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn inverse(&self) -> Homography {
        // Invertibility is checked on construction.
        Homography(self.0.try_inverse().expect("homography checked invertible"))
    }

    /// Maps `(a, b)` through the matrix and divides by the homogeneous scale.
    pub fn project(&self, a: f64, b: f64) -> Result<(f64, f64), GeometryError> {
        let h = self.0 * Vector3::new(a, b, 1.0);
        let w = h.z;
        if !w.is_finite() || w.abs() < PROJECTION_EPS {
            return Err(GeometryError::DegenerateProjection(w));
        }
        Ok((h.x / w, h.y / w))
    }
}

/// Image pixel to ground plane.
pub fn apply_homography(h: &Homography, p: PixelPoint) -> Result<WorldPoint, GeometryError> {
    h.project(p.u, p.v).map(|(x, y)| WorldPoint::new(x, y))
}

/// Axis-aligned bounding box in pixels, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl PixelBBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Option<Self> {
        (w > 0.0 && h > 0.0 && x.is_finite() && y.is_finite()).then_some(Self { x, y, w, h })
    }
}

/// Midpoint of the bottom edge, the best single-pixel guess of the feet.
pub fn bbox_ground_point(b: &PixelBBox) -> PixelPoint {
    PixelPoint::new(b.x + b.w / 2.0, b.y + b.h)
}

/// Column/row address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub col: usize,
    pub row: usize,
}

impl CellIndex {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Regular grid over the ground plane. Cell `(col, row)` covers
/// `[origin + col*res, origin + (col+1)*res)` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: WorldPoint,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(origin: WorldPoint, resolution: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GeometryError::InvalidGrid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidGrid(format!(
                "grid must have at least one cell, got {width}x{height}"
            )));
        }
        if !origin.is_finite() {
            return Err(GeometryError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self {
            origin,
            resolution,
            width,
            height,
        })
    }

    /// Grid covering a `size_x` by `size_y` meter rectangle.
    pub fn covering(origin: WorldPoint, size_x: f64, size_y: f64, resolution: f64) -> Result<Self, GeometryError> {
        let w = (size_x / resolution).round().max(1.0) as usize;
        let h = (size_y / resolution).round().max(1.0) as usize;
        Self::new(origin, resolution, w, h)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index.
    pub fn linear(&self, c: CellIndex) -> usize {
        c.row * self.width + c.col
    }

    pub fn cell_of(&self, linear: usize) -> CellIndex {
        CellIndex::new(linear % self.width, linear / self.width)
    }

    pub fn contains_cell(&self, col: i64, row: i64) -> bool {
        col >= 0 && row >= 0 && (col as usize) < self.width && (row as usize) < self.height
    }

    pub fn world_to_grid(&self, p: WorldPoint) -> Result<CellIndex, GeometryError> {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if !(fx.is_finite() && fy.is_finite())
            || fx < 0.0
            || fy < 0.0
            || fx >= self.width as f64
            || fy >= self.height as f64
        {
            return Err(GeometryError::OutOfBounds { x: p.x, y: p.y });
        }
        Ok(CellIndex::new(fx as usize, fy as usize))
    }

    pub fn cell_center(&self, c: CellIndex) -> WorldPoint {
        WorldPoint::new(
            self.origin.x + (c.col as f64 + 0.5) * self.resolution,
            self.origin.y + (c.row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn extent(&self) -> (f64, f64) {
        (
            self.width as f64 * self.resolution,
            self.height as f64 * self.resolution,
        )
    }

    /// Same extent, different resolution.
    pub fn with_resolution(&self, resolution: f64) -> Result<GridSpec, GeometryError> {
        let (sx, sy) = self.extent();
        GridSpec::covering(self.origin, sx, sy, resolution)
    }
}

/// Free-function form of [`GridSpec::world_to_grid`].
pub fn world_to_grid(g: &GridSpec, p: WorldPoint) -> Result<CellIndex, GeometryError> {
    g.world_to_grid(p)
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: WorldPoint, polygon: &[WorldPoint]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
