use super::RenderError;
use crate::autodiff::{Scalar, Vec2, Vec3};

/// Image-plane outline `Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0` of a sphere seen
/// from the camera origin, on the plane `z = f_z`.
#[derive(Clone, Copy, Debug)]
pub struct ProjectedConic<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
    pub source: Vec3<T>,
    pub radius: f64,
}

/// Projects the sphere of radius `r` at camera-frame point `p`.
pub fn project_sphere<T: Scalar>(p: Vec3<T>, r: f64, fz: f64) -> Result<ProjectedConic<T>, RenderError> {
    let [lv, mv, nv] = p.values();
    if nv <= 0.0 {
        return Err(RenderError::BehindCamera { point: [lv, mv, nv] });
    }
    if lv * lv + mv * mv + nv * nv <= r * r {
        return Err(RenderError::DegenerateSilhouette { point: [lv, mv, nv] });
    }
    let (l, m, n) = (p.x, p.y, p.z);
    let s = l * l + m * m + n * n;
    let k2 = s * s / (s + r * r);
    Ok(ProjectedConic {
        a: l * l - k2,
        b: l * m * 2.0,
        c: m * m - k2,
        d: l * n * (2.0 * fz),
        e: m * n * (2.0 * fz),
        f: (n * n - k2) * (fz * fz),
        source: p,
        radius: r,
    })
}

impl<T: Scalar> ProjectedConic<T> {
    pub fn coefficients(&self) -> [f64; 6] {
        [
            self.a.value(),
            self.b.value(),
            self.c.value(),
            self.d.value(),
            self.e.value(),
            self.f.value(),
        ]
    }

    /// `B^2 - 4AC`; negative for an ellipse.
    pub fn discriminant(&self) -> f64 {
        let [a, b, c, ..] = self.coefficients();
        b * b - 4.0 * a * c
    }

    /// Center-normalized form of the ellipse.
    pub fn frame(&self) -> Result<EllipseFrame<T>, RenderError> {
        let (a, b, c, d, e) = (self.a, self.b, self.c, self.d, self.e);
        let det = a * c - b * b * 0.25;
        if !(det.value() > 0.0) {
            return Err(RenderError::NotEllipse);
        }
        let cx = (b * e * 0.25 - c * d * 0.5) / det;
        let cy = (b * d * 0.25 - a * e * 0.5) / det;
        // kappa = -Q(center)
        let kappa = -(self.f + (d * cx + e * cy) * 0.5);
        let kv = kappa.value();
        if !(kv != 0.0 && a.value() / kv > 0.0) || !cx.value().is_finite() || !cy.value().is_finite() {
            return Err(RenderError::NotEllipse);
        }
        let n11 = a / kappa;
        let n12 = b / kappa * 0.5;
        let n22 = c / kappa;
        let lmax = (n11 + n22) * 0.5 + ((n11 - n22) * (n11 - n22) * 0.25 + n12 * n12).sqrt();
        let min_axis = lmax.lift(1.0) / lmax.sqrt();
        Ok(EllipseFrame {
            center: Vec2::new(cx, cy),
            n11,
            n12,
            n22,
            min_axis,
        })
    }

    /// `Q(x, y)` in plain values.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e, f] = self.coefficients();
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let [a, b, c, d, e, _] = self.coefficients();
        [2.0 * a * x + b * y + d, b * x + 2.0 * c * y + e]
    }

    pub fn canonical(&self) -> Result<CanonicalEllipse, RenderError> {
        conic_canonical(self.coefficients())
    }
}

/// Ellipse as `{q : (q - c)^T N (q - c) <= 1}`.
#[derive(Clone, Copy, Debug)]
pub struct EllipseFrame<T> {
    pub center: Vec2<T>,
    pub n11: T,
    pub n12: T,
    pub n22: T,
    /// Shorter semi-axis.
    pub min_axis: T,
}

impl<T: Scalar> EllipseFrame<T> {
    /// Squared scaled elliptical radius of `q`; 1 on the boundary.
    #[inline]
    pub fn rho_sq(&self, q: [f64; 2]) -> T {
        let dx = -(self.center.x - q[0]);
        let dy = -(self.center.y - q[1]);
        self.n11 * dx * dx + self.n12 * dx * dy * 2.0 + self.n22 * dy * dy
    }

    /// Approximate signed distance `(1 - rho) * min_axis`, positive inside.
    /// Recorded as a single node.
    #[inline]
    pub fn sdf(&self, q: [f64; 2]) -> T {
        let v = self.values();
        let dx = q[0] - v.center.x;
        let dy = q[1] - v.center.y;
        let r2 = v.n11 * dx * dx + v.n12 * dx * dy * 2.0 + v.n22 * dy * dy;
        let rho = r2.sqrt();
        let value = (1.0 - rho) * v.min_axis;
        // d value / d r2
        let dr2 = if rho > 0.0 { -v.min_axis * 0.5 / rho } else { 0.0 };
        let partials = [
            -dr2 * 2.0 * (v.n11 * dx + v.n12 * dy),
            -dr2 * 2.0 * (v.n12 * dx + v.n22 * dy),
            dr2 * dx * dx,
            dr2 * 2.0 * dx * dy,
            dr2 * dy * dy,
            1.0 - rho,
        ];
        T::fused(
            value,
            &[self.center.x, self.center.y, self.n11, self.n12, self.n22, self.min_axis],
            &partials,
        )
    }

    pub fn contains(&self, q: [f64; 2]) -> bool {
        self.rho_sq(q).value() < 1.0
    }

    pub fn values(&self) -> EllipseFrame<f64> {
        EllipseFrame {
            center: Vec2::from(self.center.values()),
            n11: self.n11.value(),
            n12: self.n12.value(),
            n22: self.n22.value(),
            min_axis: self.min_axis.value(),
        }
    }
}

impl EllipseFrame<f64> {
    /// Image-plane bounding box `[xmin, ymin, xmax, ymax]` of the level set
    /// `rho = scale`.
    pub fn bounds(&self, scale: f64) -> [f64; 4] {
        let det = self.n11 * self.n22 - self.n12 * self.n12;
        let ex = (self.n22 / det).sqrt() * scale;
        let ey = (self.n11 / det).sqrt() * scale;
        [self.center.x - ex, self.center.y - ey, self.center.x + ex, self.center.y + ey]
    }
}

/// Center, semi-axes and orientation of an ellipse.
///
/// `semi_axes[0]` lies along direction `angle`, `semi_axes[1]` along
/// `angle + pi/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalEllipse {
    pub center: [f64; 2],
    pub semi_axes: [f64; 2],
    pub angle: f64,
}

impl CanonicalEllipse {
    pub fn point(&self, t: f64) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let (u, v) = (self.semi_axes[0] * t.cos(), self.semi_axes[1] * t.sin());
        [self.center[0] + c * u - s * v, self.center[1] + s * u + c * v]
    }

    /// `q` in the ellipse's own axis frame.
    pub fn to_local(&self, q: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        let (dx, dy) = (q[0] - self.center[0], q[1] - self.center[1]);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Exact signed distance (positive inside), by Newton iteration on the
    /// boundary parameter. Slow; meant for tests and diagnostics.
    pub fn exact_sdf(&self, q: [f64; 2]) -> f64 {
        let [x, y] = self.to_local(q);
        let [a, b] = self.semi_axes;
        let inside = (x / a).powi(2) + (y / b).powi(2) < 1.0;
        let dist2 = |t: f64| (a * t.cos() - x).powi(2) + (b * t.sin() - y).powi(2);
        let samples = 64;
        let mut best = 0.0;
        let mut best_d = f64::INFINITY;
        for k in 0..samples {
            let t = std::f64::consts::TAU * k as f64 / samples as f64;
            let d = dist2(t);
            if d < best_d {
                best_d = d;
                best = t;
            }
        }
        let mut t = best;
        for _ in 0..50 {
            let (s, c) = t.sin_cos();
            // half derivative of dist2 and its derivative
            let g = (b * b - a * a) * s * c - b * y * c + a * x * s;
            let h = (b * b - a * a) * (c * c - s * s) + b * y * s + a * x * c;
            if h.abs() < 1e-300 {
                break;
            }
            let step = g / h;
            let next = t - step;
            if dist2(next) <= dist2(t) {
                t = next;
            } else {
                t -= 0.5 * step;
            }
            if step.abs() < 1e-15 {
                break;
            }
        }
        let d = dist2(t).min(best_d).sqrt();
        if inside {
            d
        } else {
            -d
        }
    }
}

/// Canonical parameters of `Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0`.
pub fn conic_canonical(coefficients: [f64; 6]) -> Result<CanonicalEllipse, RenderError> {
    let [a, b, c, d, e, f] = coefficients;
    if !(b * b - 4.0 * a * c < 0.0) {
        return Err(RenderError::NotEllipse);
    }
    let det = a * c - 0.25 * b * b;
    let cx = (0.25 * b * e - 0.5 * c * d) / det;
    let cy = (0.25 * b * d - 0.5 * a * e) / det;
    let kappa = -(f + 0.5 * (d * cx + e * cy));
    if !(kappa != 0.0 && a / kappa > 0.0) {
        return Err(RenderError::NotEllipse);
    }
    let (p, q, s) = (a / kappa, 0.5 * b / kappa, c / kappa);
    let angle = 0.5 * (2.0 * q).atan2(p - s);
    let root = (0.25 * (p - s) * (p - s) + q * q).sqrt();
    let lmax = 0.5 * (p + s) + root;
    let lmin = 0.5 * (p + s) - root;
    Ok(CanonicalEllipse {
        center: [cx, cy],
        semi_axes: [1.0 / lmax.sqrt(), 1.0 / lmin.sqrt()],
        angle,
    })
}
