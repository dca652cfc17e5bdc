//! Differentiable silhouettes of tubes around knot polylines.
//!
//! Every sample point or segment becomes a primitive (a projected sphere or
//! capsule) with a signed distance function on the image plane. A pixel's
//! intensity is the largest `sigmoid(tau * sdf)` over primitives.

mod capsule;
mod conic;
mod oracle;
mod raster;

pub use capsule::{
    contact_quadratic, convex_polygon_sdf, parallel_contacts, project_capsule, tangent_lines, tangent_quadratic,
    vanishing_point, Member, ProjectedCapsule, TangentLine, VanishingPoint, PARALLEL_EPS,
};
pub use conic::{conic_canonical, project_sphere, CanonicalEllipse, EllipseFrame, ProjectedConic};
pub use oracle::{render_oracle, render_oracle_points, segment_distance_sq};
pub use raster::{
    occupancy, render, render_capsule, render_ellipse, Compositor, RenderSettings, RendererKind, SilhouetteImage,
    FLOOR_LOGIT,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("point {point:?} is behind the camera")]
    BehindCamera { point: [f64; 3] },
    #[error("degenerate silhouette: camera inside the sphere at {point:?}")]
    DegenerateSilhouette { point: [f64; 3] },
    #[error("conic is not an ellipse")]
    NotEllipse,
    #[error("no external tangents: point is inside or on the conic")]
    NoExternalTangents,
    #[error("segment endpoints coincide")]
    CoincidentPoints,
    #[error("nothing to render")]
    EmptyScene,
    #[error("hardness must be positive and finite, got {0}")]
    Hardness(f64),
    #[error("radius must be positive and finite, got {0}")]
    Radius(f64),
    #[error("compositor temperature must be positive and finite, got {0}")]
    Temperature(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Binary image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[j * self.width + i]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Intersection over union; two empty masks count as identical.
    pub fn iou(&self, other: &Mask) -> f64 {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}
