use super::conic::{project_sphere, EllipseFrame, ProjectedConic};
use super::RenderError;
use crate::autodiff::{Scalar, Vec2, Vec3};

/// Relative depth difference below which a segment counts as parallel to
/// the image plane.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Image of the point at infinity along a segment.
#[derive(Clone, Copy, Debug)]
pub enum VanishingPoint<T> {
    Finite(Vec2<T>),
    /// The segment is parallel to the image plane; carries the unit image
    /// direction of the segment.
    Parallel(Vec2<T>),
}

pub fn vanishing_point<T: Scalar>(p1: Vec3<T>, p2: Vec3<T>, fz: f64) -> Result<VanishingPoint<T>, RenderError> {
    let (a, b) = (p1.values(), p2.values());
    if a == b {
        return Err(RenderError::CoincidentPoints);
    }
    let dn = p1.z - p2.z;
    let scale = 1f64.max(a[2].abs()).max(b[2].abs());
    if dn.value().abs() < PARALLEL_EPS * scale {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        if dx == 0.0 && dy == 0.0 {
            return Err(RenderError::CoincidentPoints);
        }
        let u = Vec2::new(p2.x - p1.x, p2.y - p1.y);
        let len = u.norm();
        return Ok(VanishingPoint::Parallel(Vec2::new(u.x / len, u.y / len)));
    }
    Ok(VanishingPoint::Finite(Vec2::new(
        (p1.x - p2.x) * fz / dn,
        (p1.y - p2.y) * fz / dn,
    )))
}

/// Coefficients `(alpha, beta, gamma)` of the quadratic in the slope `m` of
/// the lines `y = m (x - x0) + y0` tangent to the conic `[A, B, C, D, E, F]`.
pub fn tangent_quadratic<T: Scalar>(k: [T; 6], v: [T; 2]) -> [T; 3] {
    let [a, b, c, d, e, f] = k;
    let [x0, y0] = v;
    let g = b * x0 - c * y0 * 2.0 - e;
    let h = b * y0 + d;
    let w = c * y0 * y0 + e * y0 + f;
    let z = c * x0 * y0 * 2.0 + e * x0;
    let alpha = g * g - c * x0 * h * 4.0 - c * w * 4.0 - a * c * x0 * x0 * 4.0 + b * z * 4.0;
    let beta = -(g * h * 2.0) - b * w * 4.0 + a * z * 4.0;
    let gamma = h * h - a * w * 4.0;
    [alpha, beta, gamma]
}

/// Quadratic in `x` obtained by substituting `y = m (x - x0) + y0` into the
/// conic.
pub fn contact_quadratic<T: Scalar>(k: [T; 6], m: T, v: [T; 2]) -> [T; 3] {
    let [a, b, c, d, e, f] = k;
    let [x0, y0] = v;
    let qa = a + b * m + c * m * m;
    let qb = -(b * m * x0) + b * y0 - c * m * m * x0 * 2.0 + c * m * y0 * 2.0 + e * m + d;
    let qc = c * m * m * x0 * x0 + c * y0 * y0 - c * m * x0 * y0 * 2.0 - e * m * x0 + e * y0 + f;
    [qa, qb, qc]
}

/// A line through `through` with unit `direction`, touching a conic at
/// `contact`. Vertical lines need no special case in this form.
#[derive(Clone, Copy, Debug)]
pub struct TangentLine<T> {
    pub through: Vec2<T>,
    pub direction: Vec2<T>,
    pub contact: Vec2<T>,
}

impl<T: Scalar> TangentLine<T> {
    /// `dy/dx`, infinite for a vertical line.
    pub fn slope(&self) -> f64 {
        let [dx, dy] = self.direction.values();
        dy / dx
    }
}

/// The two tangent lines from an exterior point `v` to the conic.
///
/// The slope quadratic is solved in a frame centred on the ellipse with its
/// x-axis pointing at `v`. There both tangents make an angle below 90 degrees
/// with the axis, so the slopes are finite and well conditioned; results
/// are rotated back afterwards.
pub fn tangent_lines<T: Scalar>(conic: &ProjectedConic<T>, v: Vec2<T>) -> Result<[TangentLine<T>; 2], RenderError> {
    let frame = conic.frame()?;
    tangent_lines_in_frame(&frame, v)
}

pub(crate) fn tangent_lines_in_frame<T: Scalar>(frame: &EllipseFrame<T>, v: Vec2<T>) -> Result<[TangentLine<T>; 2], RenderError> {
    if frame.rho_sq(v.values()).value() <= 1.0 {
        return Err(RenderError::NoExternalTangents);
    }
    let w = v - frame.center;
    let x0 = w.norm();
    let d = Vec2::new(w.x / x0, w.y / x0);
    let dp = d.perp();
    let form = |u: Vec2<T>, s: Vec2<T>| {
        frame.n11 * u.x * s.x + frame.n12 * (u.x * s.y + u.y * s.x) + frame.n22 * u.y * s.y
    };
    let zero = x0.lift(0.0);
    // normalized conic in the rotated frame: D' = E' = 0, F' = -1
    let k = [form(d, d), form(d, dp) * 2.0, form(dp, dp), zero, zero, x0.lift(-1.0)];
    let at = [x0, zero];
    let [alpha, beta, gamma] = tangent_quadratic(k, at);
    let disc = beta * beta - alpha * gamma * 4.0;
    let (bv, agv) = (beta.value(), (alpha * gamma).value());
    if disc.value() < -1e-12 * (bv * bv + 4.0 * agv.abs()) {
        return Err(RenderError::NoExternalTangents);
    }
    let root = disc.max(zero).sqrt();
    // stable quadratic roots
    let q = if bv >= 0.0 { -(beta + root) * 0.5 } else { -(beta - root) * 0.5 };
    if q.value() == 0.0 || alpha.value() == 0.0 {
        return Err(RenderError::NoExternalTangents);
    }
    let slopes = [q / alpha, gamma / q];
    let mut out = Vec::with_capacity(2);
    for m in slopes {
        let [qa, qb, _] = contact_quadratic(k, m, at);
        // double root
        let x = -qb / (qa * 2.0);
        let y = m * (x - x0);
        let contact = frame.center + d.scale(x) + dp.scale(y);
        let norm = (m * m + 1.0).sqrt();
        let dir = d + dp.scale(m);
        out.push(TangentLine {
            through: v,
            direction: Vec2::new(dir.x / norm, dir.y / norm),
            contact,
        });
    }
    Ok([out[0], out[1]])
}

/// Points of the ellipse whose tangent is parallel to the unit direction `u`.
pub fn parallel_contacts<T: Scalar>(frame: &EllipseFrame<T>, u: Vec2<T>) -> [Vec2<T>; 2] {
    let up = u.perp();
    let det = frame.n11 * frame.n22 - frame.n12 * frame.n12;
    // N^-1 u_perp
    let w = Vec2::new(
        (frame.n22 * up.x - frame.n12 * up.y) / det,
        (frame.n11 * up.y - frame.n12 * up.x) / det,
    );
    let s = up.dot(w).sqrt();
    let w = Vec2::new(w.x / s, w.y / s);
    [frame.center + w, frame.center - w]
}

/// Which part of a capsule silhouette a signed distance came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Member {
    Conic1,
    Conic2,
    Quad,
}

/// Silhouette of a capsule: two end ellipses and, unless the segment is
/// seen nearly end-on, the quadrilateral hull of the side wall.
#[derive(Clone, Debug)]
pub struct ProjectedCapsule<T> {
    pub conic1: ProjectedConic<T>,
    pub conic2: ProjectedConic<T>,
    pub frame1: EllipseFrame<T>,
    pub frame2: EllipseFrame<T>,
    pub vanishing: Option<VanishingPoint<T>>,
    /// `[P1, P2, P3, P4]`: `P1, P2` on the first ellipse, `P3, P4` on the
    /// second, with `P1 P3` and `P2 P4` the tangent sides.
    pub quad: Option<[Vec2<T>; 4]>,
    /// The quad as a counter-clockwise convex polygon.
    pub polygon: Option<[Vec2<T>; 4]>,
}

pub fn project_capsule<T: Scalar>(p1: Vec3<T>, p2: Vec3<T>, r: f64, fz: f64) -> Result<ProjectedCapsule<T>, RenderError> {
    let conic1 = project_sphere(p1, r, fz)?;
    let conic2 = project_sphere(p2, r, fz)?;
    let frame1 = conic1.frame()?;
    let frame2 = conic2.frame()?;
    let vanishing = match vanishing_point(p1, p2, fz) {
        Ok(v) => Some(v),
        Err(RenderError::CoincidentPoints) => None,
        Err(e) => return Err(e),
    };
    let contacts = match vanishing {
        Some(VanishingPoint::Finite(v)) => {
            match (tangent_lines_in_frame(&frame1, v), tangent_lines_in_frame(&frame2, v)) {
                (Ok(a), Ok(b)) => Some(([a[0].contact, a[1].contact], [b[0].contact, b[1].contact])),
                _ => None,
            }
        }
        Some(VanishingPoint::Parallel(u)) => Some((parallel_contacts(&frame1, u), parallel_contacts(&frame2, u))),
        None => None,
    };
    let quad = contacts.and_then(|(c1, c2)| order_quad(&frame1, &frame2, c1, c2));
    let polygon = quad.and_then(|q| convex_polygon(q));
    Ok(ProjectedCapsule {
        conic1,
        conic2,
        frame1,
        frame2,
        vanishing,
        quad: polygon.and(quad),
        polygon,
    })
}

fn order_quad<T: Scalar>(
    frame1: &EllipseFrame<T>,
    frame2: &EllipseFrame<T>,
    c1: [Vec2<T>; 2],
    c2: [Vec2<T>; 2],
) -> Option<[Vec2<T>; 4]> {
    let o1 = frame1.center.values();
    let o2 = frame2.center.values();
    let axis = [o2[0] - o1[0], o2[1] - o1[1]];
    if axis == [0.0, 0.0] {
        return None;
    }
    let side = |p: Vec2<T>, o: [f64; 2]| {
        let [x, y] = p.values();
        axis[0] * (y - o[1]) - axis[1] * (x - o[0])
    };
    let split = |pair: [Vec2<T>; 2], o: [f64; 2]| {
        let (s0, s1) = (side(pair[0], o), side(pair[1], o));
        if s0 > 0.0 && s1 < 0.0 {
            Some((pair[0], pair[1]))
        } else if s0 < 0.0 && s1 > 0.0 {
            Some((pair[1], pair[0]))
        } else {
            None
        }
    };
    let (p1, p2) = split(c1, o1)?;
    let (p3, p4) = split(c2, o2)?;
    Some([p1, p2, p3, p4])
}

/// Walks `P1 -> P3 -> P4 -> P2` and returns it counter-clockwise if the
/// result is strictly convex.
fn convex_polygon<T: Scalar>(quad: [Vec2<T>; 4]) -> Option<[Vec2<T>; 4]> {
    let [p1, p2, p3, p4] = quad;
    let mut poly = [p1, p3, p4, p2];
    let v: Vec<[f64; 2]> = poly.iter().map(|p| p.values()).collect();
    let turn = |k: usize| {
        let (a, b, c) = (v[k], v[(k + 1) % 4], v[(k + 2) % 4]);
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
    };
    let turns: Vec<f64> = (0..4).map(turn).collect();
    if turns.iter().all(|&t| t > 0.0) {
        Some(poly)
    } else if turns.iter().all(|&t| t < 0.0) {
        poly.reverse();
        Some(poly)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PolygonPart {
    /// Inside; nearest edge line.
    Edge(usize),
    /// Outside, nearest point interior to this edge.
    Segment(usize),
    /// Outside, nearest point is this vertex.
    Vertex(usize),
}

fn polygon_part(poly: &[[f64; 2]; 4], q: [f64; 2]) -> PolygonPart {
    let line = |k: usize| {
        let (a, b) = (poly[k], poly[(k + 1) % 4]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        (e[0] * (q[1] - a[1]) - e[1] * (q[0] - a[0])) / len
    };
    let lines: [f64; 4] = std::array::from_fn(line);
    if lines.iter().all(|&d| d >= 0.0) {
        let mut best = 0;
        for k in 1..4 {
            if lines[k] < lines[best] {
                best = k;
            }
        }
        return PolygonPart::Edge(best);
    }
    let mut best = PolygonPart::Vertex(0);
    let mut best_d = f64::INFINITY;
    for k in 0..4 {
        let (a, b) = (poly[k], poly[(k + 1) % 4]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let w = [q[0] - a[0], q[1] - a[1]];
        let t = (e[0] * w[0] + e[1] * w[1]) / (e[0] * e[0] + e[1] * e[1]);
        let (part, d) = if t <= 0.0 {
            (PolygonPart::Vertex(k), (w[0] * w[0] + w[1] * w[1]).sqrt())
        } else if t >= 1.0 {
            let w = [q[0] - b[0], q[1] - b[1]];
            (PolygonPart::Vertex((k + 1) % 4), (w[0] * w[0] + w[1] * w[1]).sqrt())
        } else {
            (PolygonPart::Segment(k), lines[k].abs())
        };
        if d < best_d {
            best_d = d;
            best = part;
        }
    }
    best
}

/// Exact signed distance to a counter-clockwise convex polygon, positive
/// inside.
pub fn convex_polygon_sdf<T: Scalar>(poly: &[Vec2<T>; 4], q: [f64; 2]) -> T {
    let values: [[f64; 2]; 4] = std::array::from_fn(|k| poly[k].values());
    match polygon_part(&values, q) {
        PolygonPart::Edge(k) | PolygonPart::Segment(k) => {
            let (a, b) = (poly[k], poly[(k + 1) % 4]);
            let e = b - a;
            let wx = -(a.x - q[0]);
            let wy = -(a.y - q[1]);
            (e.x * wy - e.y * wx) / e.norm()
        }
        PolygonPart::Vertex(k) => {
            let a = poly[k];
            let wx = a.x - q[0];
            let wy = a.y - q[1];
            -(wx * wx + wy * wy).sqrt()
        }
    }
}

impl<T: Scalar> ProjectedCapsule<T> {
    pub fn member_sdf(&self, member: Member, q: [f64; 2]) -> T {
        match member {
            Member::Conic1 => self.frame1.sdf(q),
            Member::Conic2 => self.frame2.sdf(q),
            Member::Quad => convex_polygon_sdf(self.polygon.as_ref().expect("capsule has no quad"), q),
        }
    }

    pub fn members(&self) -> &'static [Member] {
        if self.polygon.is_some() {
            &[Member::Conic1, Member::Conic2, Member::Quad]
        } else {
            &[Member::Conic1, Member::Conic2]
        }
    }

    /// Largest member distance by value, first member on ties.
    pub fn best_member(&self, q: [f64; 2]) -> (Member, f64) {
        let mut best = (Member::Conic1, f64::NEG_INFINITY);
        for &m in self.members() {
            let s = self.member_sdf(m, q).value();
            if s > best.1 {
                best = (m, s);
            }
        }
        best
    }

    /// Union signed distance `max(conic1, conic2, quad)`.
    pub fn sdf(&self, q: [f64; 2]) -> T {
        let (m, _) = self.best_member(q);
        self.member_sdf(m, q)
    }
}
