//! Procedural target silhouettes drawn in image-plane coordinates.

use crate::autodiff::Vec3;
use crate::geometry::PinholeCamera;
use crate::knot::SampledKnot;
use crate::render::{render, RenderError, RenderSettings, SilhouetteImage};

/// Binary image of the set `inside(x, y)`, sampled at pixel centres.
pub fn shape(cam: &PinholeCamera, inside: impl Fn(f64, f64) -> bool) -> SilhouetteImage<f64> {
    let grid = cam.pixel_grid().expect("valid camera");
    SilhouetteImage {
        width: cam.width,
        height: cam.height,
        values: grid
            .coordinates
            .iter()
            .map(|&[x, y]| if inside(x, y) { 1.0 } else { 0.0 })
            .collect(),
    }
}

/// Ring of radius `radius` and stroke half-width `half_width`.
pub fn annulus(cam: &PinholeCamera, center: [f64; 2], radius: f64, half_width: f64) -> SilhouetteImage<f64> {
    shape(cam, |x, y| ((x - center[0]).hypot(y - center[1]) - radius).abs() <= half_width)
}

pub fn disc(cam: &PinholeCamera, center: [f64; 2], radius: f64) -> SilhouetteImage<f64> {
    shape(cam, |x, y| (x - center[0]).hypot(y - center[1]) <= radius)
}

/// Outline of an axis-aligned rectangle with half-sizes `half` and stroke
/// half-width `half_width`.
pub fn rectangle_outline(cam: &PinholeCamera, center: [f64; 2], half: [f64; 2], half_width: f64) -> SilhouetteImage<f64> {
    shape(cam, |x, y| {
        let dx = (x - center[0]).abs() - half[0];
        let dy = (y - center[1]).abs() - half[1];
        let outside = dx.max(0.0).hypot(dy.max(0.0));
        let d = if dx <= 0.0 && dy <= 0.0 { dx.max(dy) } else { outside };
        d.abs() <= half_width
    })
}

/// Stroke along the segments of `path` with half-width `half_width`.
pub fn strokes(cam: &PinholeCamera, path: &[[[f64; 2]; 2]], half_width: f64) -> SilhouetteImage<f64> {
    shape(cam, |x, y| {
        path.iter().any(|[a, b]| {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t = (((x - a[0]) * dx + (y - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            (x - a[0] - t * dx).hypot(y - a[1] - t * dy) <= half_width
        })
    })
}

/// Soft render of a plain-valued knot.
pub fn render_knot(knot: &SampledKnot<f64>, cam: &PinholeCamera, settings: &RenderSettings) -> Result<SilhouetteImage<f64>, RenderError> {
    let pts: &[Vec3<f64>] = &knot.points;
    render(&[pts], cam, settings)
}
