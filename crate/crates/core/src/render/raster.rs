use serde::{Deserialize, Serialize};

use super::capsule::{project_capsule, Member, ProjectedCapsule};
use super::conic::{project_sphere, EllipseFrame};
use super::{Mask, RenderError};
use crate::autodiff::{Scalar, Vec3};
use crate::geometry::PinholeCamera;
use crate::knot::SampledKnot;

/// Logit of the background intensity; pixels outside every inflated
/// bounding box read `sigmoid(FLOOR_LOGIT)`.
pub const FLOOR_LOGIT: f64 = -6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RendererKind {
    Ellipse,
    Capsule,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Compositor {
    /// Hard maximum over primitives; ties go to the earlier primitive.
    #[default]
    Max,
    /// `ln(sum exp(t * o)) / t` over covering primitives, capped at 1.
    LogSumExp { temperature: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderSettings {
    pub kind: RendererKind,
    pub radius: f64,
    pub tau: f64,
    pub compositor: Compositor,
}

impl RenderSettings {
    pub fn new(kind: RendererKind, radius: f64, tau: f64) -> Self {
        Self {
            kind,
            radius,
            tau,
            compositor: Compositor::Max,
        }
    }

    fn validate(&self) -> Result<(), RenderError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(RenderError::Hardness(self.tau));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(RenderError::Radius(self.radius));
        }
        if let Compositor::LogSumExp { temperature } = self.compositor {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return Err(RenderError::Temperature(temperature));
            }
        }
        Ok(())
    }
}

/// `sigmoid(tau * s)`.
#[inline]
pub fn occupancy<T: Scalar>(s: T, tau: f64) -> T {
    (s * tau).sigmoid()
}

/// Grayscale render, row-major (`j * width + i`).
#[derive(Clone, Debug)]
pub struct SilhouetteImage<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> SilhouetteImage<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.width + i]
    }

    pub fn to_values(&self) -> SilhouetteImage<f64> {
        SilhouetteImage {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| v.value()).collect(),
        }
    }

    /// Pixels with value at or above `threshold`.
    pub fn mask(&self, threshold: f64) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.values.iter().map(|v| v.value() >= threshold).collect(),
        }
    }
}

enum Primitive<T> {
    Ellipse(EllipseFrame<T>),
    Capsule(ProjectedCapsule<T>),
}

impl<T: Scalar> Primitive<T> {
    /// Winning member and its signed distance by value.
    #[inline]
    fn best(&self, q: [f64; 2]) -> (Member, f64) {
        match self {
            Primitive::Ellipse(f) => (Member::Conic1, f.sdf(q).value()),
            Primitive::Capsule(c) => c.best_member(q),
        }
    }

    #[inline]
    fn member_sdf(&self, member: Member, q: [f64; 2]) -> T {
        match self {
            Primitive::Ellipse(f) => f.sdf(q),
            Primitive::Capsule(c) => c.member_sdf(member, q),
        }
    }

    /// `[xmin, ymin, xmax, ymax]` outside which every member's occupancy is
    /// below `sigmoid(FLOOR_LOGIT)`.
    fn bounds(&self, tau: f64) -> [f64; 4] {
        let margin = -FLOOR_LOGIT / tau;
        let conic = |f: &EllipseFrame<T>| {
            let f = f.values();
            f.bounds(1.0 + margin / f.min_axis)
        };
        match self {
            Primitive::Ellipse(f) => conic(f),
            Primitive::Capsule(c) => {
                let mut b = conic(&c.frame1);
                let b2 = conic(&c.frame2);
                b = [b[0].min(b2[0]), b[1].min(b2[1]), b[2].max(b2[2]), b[3].max(b2[3])];
                if let Some(poly) = &c.polygon {
                    for p in poly {
                        let [x, y] = p.values();
                        b = [
                            b[0].min(x - margin),
                            b[1].min(y - margin),
                            b[2].max(x + margin),
                            b[3].max(y + margin),
                        ];
                    }
                }
                b
            }
        }
    }
}

/// Which camera-frame points make up primitive `k`.
#[derive(Clone, Copy, Debug)]
enum Source {
    Point(usize, usize),
    Segment(usize, usize, usize),
}

fn build<T: Scalar>(points: &[Vec<Vec3<T>>], source: Source, settings: &RenderSettings, fz: f64) -> Result<Primitive<T>, RenderError> {
    match source {
        Source::Point(k, i) => Ok(Primitive::Ellipse(project_sphere(points[k][i], settings.radius, fz)?.frame()?)),
        Source::Segment(k, i, j) => Ok(Primitive::Capsule(project_capsule(
            points[k][i],
            points[k][j],
            settings.radius,
            fz,
        )?)),
    }
}

fn pixel_range(lo: f64, hi: f64, f: f64, n: usize) -> Option<(usize, usize)> {
    let scale = (n - 1) as f64 / 2.0;
    let a = ((lo / f + 1.0) * scale).ceil();
    let b = ((hi / f + 1.0) * scale).floor();
    if !(a <= b) || b < 0.0 || a > (n - 1) as f64 {
        return None;
    }
    Some((a.max(0.0) as usize, b.min((n - 1) as f64) as usize))
}

/// Renders closed knot polylines given in world coordinates.
///
/// Visibility decisions are made on plain values first; only the winning
/// primitive of each pixel is then evaluated with `T`. With the hard-max
/// compositor this is the same function and the same subgradient as taking
/// the maximum over every primitive on the tape.
pub fn render<T: Scalar>(knots: &[&[Vec3<T>]], cam: &PinholeCamera, settings: &RenderSettings) -> Result<SilhouetteImage<T>, RenderError> {
    cam.validate()?;
    settings.validate()?;
    let like = knots
        .iter()
        .find_map(|k| k.first().map(|p| p.x))
        .ok_or(RenderError::EmptyScene)?;
    let fz = cam.focal[2];
    let points: Vec<Vec<Vec3<T>>> = knots.iter().map(|k| cam.points_to_camera(k)).collect();
    let plain: Vec<Vec<Vec3<f64>>> = points
        .iter()
        .map(|k| k.iter().map(|p| Vec3::from(p.values())).collect())
        .collect();

    let mut sources = Vec::new();
    for (k, pts) in plain.iter().enumerate() {
        let n = pts.len();
        match settings.kind {
            RendererKind::Ellipse => {
                for i in 0..n {
                    if cam.in_frustum(pts[i].values()) {
                        sources.push(Source::Point(k, i));
                    }
                }
            }
            RendererKind::Capsule => {
                if n == 1 {
                    if cam.in_frustum(pts[0].values()) {
                        sources.push(Source::Point(k, 0));
                    }
                    continue;
                }
                for i in 0..n {
                    let j = (i + 1) % n;
                    if cam.in_frustum(pts[i].values()) || cam.in_frustum(pts[j].values()) {
                        sources.push(Source::Segment(k, i, j));
                    }
                }
            }
        }
    }

    let (w, h) = (cam.width, cam.height);
    let grid = cam.pixel_grid()?;
    let floor_s = FLOOR_LOGIT / settings.tau;
    let floor = like.lift(occupancy(floor_s, settings.tau));

    match settings.compositor {
        Compositor::Max => {
            let mut best_s = vec![floor_s; w * h];
            let mut best: Vec<Option<(u32, Member)>> = vec![None; w * h];
            for (idx, &src) in sources.iter().enumerate() {
                let prim = build(&plain, src, settings, fz)?;
                let [x0, y0, x1, y1] = prim.bounds(settings.tau);
                let (Some((i0, i1)), Some((j0, j1))) =
                    (pixel_range(x0, x1, cam.focal[0], w), pixel_range(y0, y1, cam.focal[1], h))
                else {
                    continue;
                };
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        let p = j * w + i;
                        let (m, s) = prim.best(grid.coordinates[p]);
                        if s > best_s[p] {
                            best_s[p] = s;
                            best[p] = Some((idx as u32, m));
                        }
                    }
                }
            }
            let mut order: Vec<(u32, usize)> = best
                .iter()
                .enumerate()
                .filter_map(|(p, b)| b.map(|(idx, _)| (idx, p)))
                .collect();
            order.sort_unstable();
            let mut values = vec![floor; w * h];
            let mut k = 0;
            while k < order.len() {
                let idx = order[k].0;
                let prim = build(&points, sources[idx as usize], settings, fz)?;
                while k < order.len() && order[k].0 == idx {
                    let p = order[k].1;
                    let (_, m) = best[p].expect("winner");
                    values[p] = occupancy(prim.member_sdf(m, grid.coordinates[p]), settings.tau);
                    k += 1;
                }
            }
            Ok(SilhouetteImage {
                width: w,
                height: h,
                values,
            })
        }
        Compositor::LogSumExp { temperature } => {
            let mut terms: Vec<Vec<T>> = vec![Vec::new(); w * h];
            for &src in &sources {
                let prim = build(&points, src, settings, fz)?;
                let [x0, y0, x1, y1] = prim.bounds(settings.tau);
                let (Some((i0, i1)), Some((j0, j1))) =
                    (pixel_range(x0, x1, cam.focal[0], w), pixel_range(y0, y1, cam.focal[1], h))
                else {
                    continue;
                };
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        let p = j * w + i;
                        let q = grid.coordinates[p];
                        let (m, _) = prim.best(q);
                        terms[p].push(occupancy(prim.member_sdf(m, q), settings.tau));
                    }
                }
            }
            let values = terms
                .into_iter()
                .map(|t| {
                    if t.is_empty() {
                        return floor;
                    }
                    let mut acc = (floor * temperature).exp();
                    for o in t {
                        acc = acc + (o * temperature).exp();
                    }
                    let v = acc.ln() / temperature;
                    v.min(v.lift(1.0))
                })
                .collect();
            Ok(SilhouetteImage {
                width: w,
                height: h,
                values,
            })
        }
    }
}

/// Ellipse renderer: one projected sphere per knot sample.
pub fn render_ellipse<T: Scalar>(knot: &SampledKnot<T>, r: f64, cam: &PinholeCamera, tau: f64) -> Result<SilhouetteImage<T>, RenderError> {
    render(&[&knot.points], cam, &RenderSettings::new(RendererKind::Ellipse, r, tau))
}

/// Capsule renderer: one projected capsule per cyclic pair of samples.
pub fn render_capsule<T: Scalar>(knot: &SampledKnot<T>, r: f64, cam: &PinholeCamera, tau: f64) -> Result<SilhouetteImage<T>, RenderError> {
    render(&[&knot.points], cam, &RenderSettings::new(RendererKind::Capsule, r, tau))
}
