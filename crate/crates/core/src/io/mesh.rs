use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use super::IoError;

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(a: V3) -> Option<V3> {
    let n = dot(a, a).sqrt();
    (n > 1e-12 && n.is_finite()).then(|| scale(a, 1.0 / n))
}

/// Reflects `v` in the plane with normal `n` (not necessarily unit).
fn reflect(v: V3, n: V3) -> V3 {
    sub(v, scale(n, 2.0 * dot(v, n) / dot(n, n)))
}

/// Triangle mesh of a closed tube.
///
/// Vertex `i * sides + k` is corner `k` of the cross-section around sample
/// `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TubeMesh {
    pub vertices: Vec<V3>,
    pub faces: Vec<[usize; 3]>,
    pub sides: usize,
    /// Unit tangent, normal and binormal at each sample.
    pub frames: Vec<[V3; 3]>,
}

/// Sweeps a regular `sides`-gon of circumradius `r` along the closed
/// polyline with rotation-minimizing frames. The frame mismatch after one
/// loop is removed by a twist spread evenly over arc length. Faces wind
/// outward unless `flip` is set.
pub fn tube_mesh(points: &[V3], r: f64, sides: usize, flip: bool) -> Result<TubeMesh, IoError> {
    let n = points.len();
    if n < 3 {
        return Err(IoError::Degenerate(format!("need at least 3 points, got {n}")));
    }
    if sides < 3 {
        return Err(IoError::Degenerate(format!("need at least 3 sides, got {sides}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(IoError::Degenerate(format!("radius must be positive, got {r}")));
    }
    let mut edges = Vec::with_capacity(n);
    for i in 0..n {
        let e = sub(points[(i + 1) % n], points[i]);
        normalize(e).ok_or_else(|| IoError::Degenerate(format!("zero-length edge after point {i}")))?;
        edges.push(e);
    }
    let tangents: Vec<V3> = (0..n)
        .map(|i| {
            let a = normalize(edges[(i + n - 1) % n]).expect("checked");
            let b = normalize(edges[i]).expect("checked");
            normalize(add(a, b)).ok_or_else(|| IoError::Degenerate(format!("polyline reverses at point {i}")))
        })
        .collect::<Result<_, _>>()?;

    // any direction not parallel to the first tangent seeds the frame
    let t0 = tangents[0];
    let axis = if t0[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let u0 = normalize(sub(axis, scale(t0, dot(axis, t0)))).expect("axis is not parallel");

    // double-reflection propagation around the loop and back to the start
    let mut normals = Vec::with_capacity(n + 1);
    normals.push(u0);
    for i in 0..n {
        let j = (i + 1) % n;
        let v1 = edges[i];
        let r_l = reflect(normals[i], v1);
        let t_l = reflect(tangents[i], v1);
        let v2 = sub(tangents[j], t_l);
        let u = if dot(v2, v2) < 1e-30 { r_l } else { reflect(r_l, v2) };
        let u = normalize(sub(u, scale(tangents[j], dot(u, tangents[j])))).expect("frame stays unit");
        normals.push(u);
    }
    let back = normals[n];
    let mismatch = dot(cross(u0, back), t0).atan2(dot(u0, back));

    let mut arc = vec![0.0; n];
    for i in 1..n {
        arc[i] = arc[i - 1] + dot(edges[i - 1], edges[i - 1]).sqrt();
    }
    let total = arc[n - 1] + dot(edges[n - 1], edges[n - 1]).sqrt();

    let mut frames = Vec::with_capacity(n);
    let mut vertices = Vec::with_capacity(n * sides);
    for i in 0..n {
        let t = tangents[i];
        let u = normals[i];
        let b = cross(t, u);
        let a = -mismatch * arc[i] / total;
        let (s, c) = a.sin_cos();
        let un = add(scale(u, c), scale(b, s));
        let bn = cross(t, un);
        frames.push([t, un, bn]);
        for k in 0..sides {
            let (sk, ck) = (TAU * k as f64 / sides as f64).sin_cos();
            vertices.push(add(points[i], add(scale(un, r * ck), scale(bn, r * sk))));
        }
    }

    let mut faces = Vec::with_capacity(2 * n * sides);
    for i in 0..n {
        let j = (i + 1) % n;
        for k in 0..sides {
            let l = (k + 1) % sides;
            let (a, b, c, d) = (i * sides + k, j * sides + k, j * sides + l, i * sides + l);
            if flip {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, c, b]);
                faces.push([a, d, c]);
            }
        }
    }
    Ok(TubeMesh {
        vertices,
        faces,
        sides,
        frames,
    })
}

impl TubeMesh {
    fn edge_counts(&self) -> HashMap<(usize, usize), (usize, i64)> {
        let mut m: HashMap<(usize, usize), (usize, i64)> = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let entry = m.entry((a.min(b), a.max(b))).or_default();
                entry.0 += 1;
                entry.1 += if a < b { 1 } else { -1 };
            }
        }
        m
    }

    pub fn edge_count(&self) -> usize {
        self.edge_counts().len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    /// Every edge borders exactly two faces that traverse it in opposite
    /// directions.
    pub fn is_watertight(&self) -> bool {
        self.edge_counts().values().all(|&(count, dir)| count == 2 && dir == 0)
    }

    /// Enclosed volume by the divergence theorem; positive for outward
    /// winding.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| dot(self.vertices[f[0]], cross(self.vertices[f[1]], self.vertices[f[2]])) / 6.0)
            .sum()
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_obj()).map_err(|e| IoError::file(path, e))
    }
}
