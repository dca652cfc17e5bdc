use super::Mask;
use crate::autodiff::Scalar;
use crate::geometry::PinholeCamera;
use crate::knot::SampledKnot;

/// Squared distance between segments `p0 + s d0` and `p1 + t d1`,
/// `s, t in [0, 1]`.
pub fn segment_distance_sq(p0: [f64; 3], q0: [f64; 3], p1: [f64; 3], q1: [f64; 3]) -> f64 {
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let d0 = sub(q0, p0);
    let d1 = sub(q1, p1);
    let r = sub(p0, p1);
    let a = dot(d0, d0);
    let e = dot(d1, d1);
    let f = dot(d1, r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return dot(r, r);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d0, r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d0, d1);
            let denom = a * e - b * b;
            let mut s0 = if denom > 0.0 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c0 = [p0[0] + d0[0] * s, p0[1] + d0[1] * s, p0[2] + d0[2] * s];
    let c1 = [p1[0] + d1[0] * t, p1[1] + d1[1] * t, p1[2] + d1[2] * t];
    let w = sub(c0, c1);
    dot(w, w)
}

/// Exact silhouette of the tube of radius `r` around the closed polyline,
/// by casting one ray per pixel. Not differentiable.
pub fn render_oracle_points(points: &[[f64; 3]], r: f64, cam: &PinholeCamera) -> Mask {
    let (w, h) = (cam.width, cam.height);
    let mut data = vec![false; w * h];
    if points.is_empty() {
        return Mask { width: w, height: h, data };
    }
    let rot = crate::geometry::transpose(&cam.rotation());
    let t = cam.position;
    let cam_pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| {
            let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
            std::array::from_fn(|k| rot[k][0] * d[0] + rot[k][1] * d[1] + rot[k][2] * d[2])
        })
        .collect();
    let n = cam_pts.len();
    let segments: Vec<([f64; 3], [f64; 3])> = if n == 1 {
        vec![(cam_pts[0], cam_pts[0])]
    } else {
        (0..n).map(|i| (cam_pts[i], cam_pts[(i + 1) % n])).collect()
    };
    let r2 = r * r;
    let fz = cam.focal[2];
    let reach = cam.far / fz;
    for j in 0..h {
        for i in 0..w {
            let [x, y] = cam.pixel_coord(i, j);
            let end = [x * reach, y * reach, fz * reach];
            data[j * w + i] = segments
                .iter()
                .any(|&(a, b)| segment_distance_sq([0.0; 3], end, a, b) <= r2);
        }
    }
    Mask { width: w, height: h, data }
}

pub fn render_oracle<T: Scalar>(knot: &SampledKnot<T>, r: f64, cam: &PinholeCamera) -> Mask {
    render_oracle_points(&knot.point_values(), r, cam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_cases() {
        let d = segment_distance_sq([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.5, 2.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = segment_distance_sq([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, -1.0, 1.0], [0.5, 1.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-15);
        let d = segment_distance_sq([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0], [4.0, 0.0, 0.0]);
        assert!((d - 4.0).abs() < 1e-15);
        // parallel
        let d = segment_distance_sq([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 2.0, 0.0]);
        assert!((d - 4.0).abs() < 1e-15);
        // point against segment
        let d = segment_distance_sq([0.5, 3.0, 0.0], [0.5, 3.0, 0.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((d - 9.0).abs() < 1e-15);
    }

    #[test]
    fn on_axis_sphere_disc() {
        let cam = PinholeCamera::with_size(256, 256);
        let m = render_oracle_points(&[[0.0, 0.0, 4.0]], 0.05, &cam);
        // exact half-angle asin(r / n) on a plane at f_z = 2
        let radius = 2.0 * (0.05f64 / 4.0).asin().tan();
        let pitch = cam.pixel_pitch()[0];
        for j in 0..256 {
            for i in 0..256 {
                let [x, y] = cam.pixel_coord(i, j);
                let d = (x * x + y * y).sqrt();
                if (d - radius).abs() > 1e-9 {
                    assert_eq!(m.get(i, j), d < radius, "({i}, {j})");
                }
            }
        }
        assert!(m.count() > 0);
        assert!(pitch > 0.0);
    }

    #[test]
    fn empty_knot_is_blank() {
        let cam = PinholeCamera::with_size(16, 16);
        let m = render_oracle_points(&[], 0.05, &cam);
        assert_eq!(m.count(), 0);
    }
}
