//! Pinhole camera, rigid frame transforms and the image-plane pixel grid.
//!
//! Camera frame: the camera sits at the origin and looks along `+z`; the
//! image plane is `z = f_z` and spans `[-f_x, f_x] x [-f_y, f_y]`.
//!
//! Orientation is a triple of Euler angles composed as `R = Rz * Ry * Rx`
//! (extrinsic x, then y, then z). `R` maps camera-frame directions to world
//! directions, so `world = R * cam + t` and `cam = R^T * (world - t)`.
//!
//! Grid index `(i, j)` is (column, row); row 0 is the top row of exported
//! images and image-plane `y` grows downward in exported files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Scalar, Vec2, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("focal lengths must be positive, got {0:?}")]
    Focal([f64; 3]),
    #[error("clip planes must satisfy 0 < near < far, got near={near} far={far}")]
    Clip { near: f64, far: f64 },
    #[error("image must be at least 2x2 pixels, got {width}x{height}")]
    ImageSize { width: usize, height: usize },
    #[error("camera field `{0}` is not finite")]
    NonFinite(&'static str),
}

pub type Mat3 = [[f64; 3]; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PinholeCamera {
    pub position: [f64; 3],
    pub orientation: [f64; 3],
    pub focal: [f64; 3],
    pub near: f64,
    pub far: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for PinholeCamera {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            orientation: [0.0; 3],
            focal: [1.0, 1.0, 2.0],
            near: 1e-3,
            far: 1e3,
            width: 256,
            height: 256,
        }
    }
}

pub fn rotation_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rotation_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rotation_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn mat_vec<T: Scalar>(m: &Mat3, v: Vec3<T>) -> Vec3<T> {
    Vec3::new(
        v.x * m[0][0] + v.y * m[0][1] + v.z * m[0][2],
        v.x * m[1][0] + v.y * m[1][1] + v.z * m[1][2],
        v.x * m[2][0] + v.y * m[2][1] + v.z * m[2][2],
    )
}

impl PinholeCamera {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.position) {
            return Err(GeometryError::NonFinite("position"));
        }
        if !finite(&self.orientation) {
            return Err(GeometryError::NonFinite("orientation"));
        }
        if !finite(&self.focal) || self.focal.iter().any(|&f| f <= 0.0) {
            return Err(GeometryError::Focal(self.focal));
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(GeometryError::Clip {
                near: self.near,
                far: self.far,
            });
        }
        if self.width < 2 || self.height < 2 {
            return Err(GeometryError::ImageSize {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    /// Default camera with a different image size.
    pub fn with_size(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }

    /// Camera-to-world rotation `Rz * Ry * Rx`.
    pub fn rotation(&self) -> Mat3 {
        let [ax, ay, az] = self.orientation;
        mat_mul(&rotation_z(az), &mat_mul(&rotation_y(ay), &rotation_x(ax)))
    }

    pub fn world_to_camera<T: Scalar>(&self, p: Vec3<T>) -> Vec3<T> {
        let rt = transpose(&self.rotation());
        let t = self.position;
        mat_vec(&rt, p.offset([-t[0], -t[1], -t[2]]))
    }

    pub fn camera_to_world<T: Scalar>(&self, p: Vec3<T>) -> Vec3<T> {
        mat_vec(&self.rotation(), p).offset(self.position)
    }

    /// Batch transform with the rotation computed once.
    pub fn points_to_camera<T: Scalar>(&self, points: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let rt = transpose(&self.rotation());
        let t = self.position;
        let identity = rt == [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if identity && t == [0.0; 3] {
            return points.to_vec();
        }
        points
            .iter()
            .map(|p| mat_vec(&rt, p.offset([-t[0], -t[1], -t[2]])))
            .collect()
    }

    pub fn in_frustum(&self, p: [f64; 3]) -> bool {
        let [x, y, z] = p;
        if z <= 0.0 || z < self.near || z > self.far {
            return false;
        }
        let s = self.focal[2] / z;
        (x * s).abs() <= self.focal[0] && (y * s).abs() <= self.focal[1]
    }

    pub fn pixel_grid(&self) -> Result<PixelGrid, GeometryError> {
        PixelGrid::new(self.width, self.height, self.focal[0], self.focal[1])
    }

    /// Image-plane coordinate of grid index `(i, j)`.
    #[inline]
    pub fn pixel_coord(&self, i: usize, j: usize) -> [f64; 2] {
        grid_coord(i, j, self.width, self.height, self.focal[0], self.focal[1])
    }

    /// Projects a camera-frame point onto the image plane.
    pub fn project<T: Scalar>(&self, p: Vec3<T>) -> Vec2<T> {
        let s = p.z.lift(self.focal[2]) / p.z;
        Vec2::new(p.x * s, p.y * s)
    }

    /// Pixel size on the image plane along x and y.
    pub fn pixel_pitch(&self) -> [f64; 2] {
        [
            2.0 * self.focal[0] / (self.width - 1) as f64,
            2.0 * self.focal[1] / (self.height - 1) as f64,
        ]
    }
}

#[inline]
fn grid_coord(i: usize, j: usize, w: usize, h: usize, fx: f64, fy: f64) -> [f64; 2] {
    [
        fx * (2.0 * i as f64 / (w - 1) as f64 - 1.0),
        fy * (2.0 * j as f64 / (h - 1) as f64 - 1.0),
    ]
}

/// Image-plane positions of every pixel, stored row-major (`j * W + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    pub coordinates: Vec<[f64; 2]>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, fx: f64, fy: f64) -> Result<Self, GeometryError> {
        if width < 2 || height < 2 {
            return Err(GeometryError::ImageSize { width, height });
        }
        let mut coordinates = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                coordinates.push(grid_coord(i, j, width, height, fx, fy));
            }
        }
        Ok(Self {
            width,
            height,
            coordinates,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        self.coordinates[j * self.width + i]
    }
}
