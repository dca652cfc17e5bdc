//! Invertible network: alternating rigid and affine-coupling layers.
//!
//! Layer order is `[Rigid, Coupling] x depth` followed by one trailing rigid
//! layer. Parameters live in one flat vector so the same layout serves plain
//! evaluation, taped evaluation and the optimizer.
//!
//! Per-layer parameter layout:
//! - rigid: `[wx, wy, wz, tx, ty, tz]` (axis-angle rotation, translation)
//! - coupling: S-net then T-net, each `[w1 (width x 2), b1 (width), w2 (width), b2]`
//!
//! The coupling scale is `exp(S(u, v))`, positive for every parameter value.
//! Hidden activation is `tanh`.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::KnotError;
use crate::autodiff::{Scalar, Vec3};

pub const RIGID_PARAMS: usize = 6;
/// Standard deviation of first-layer MLP weights and biases at initialization.
pub const HIDDEN_INIT_STD: f64 = 1.0;
const SMALL_ANGLE_SQ: f64 = 1e-6;

pub const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

pub fn mlp_params(width: usize) -> usize {
    4 * width + 1
}

pub fn coupling_params(width: usize) -> usize {
    2 * mlp_params(width)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Rigid,
    /// Transforms coordinate `perm[2]` using coordinates `perm[0]`, `perm[1]`.
    Coupling { perm: [usize; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub kind: LayerKind,
    /// Offset of this layer's parameters in the flat vector.
    pub offset: usize,
}

/// Depth counts coupling layers; width is the hidden size of S and T.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub depth: usize,
    pub width: usize,
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        (self.depth + 1) * RIGID_PARAMS + self.depth * coupling_params(self.width)
    }

    pub fn layers(&self, permutations: &[[usize; 3]]) -> Vec<Layer> {
        let mut layers = Vec::with_capacity(2 * self.depth + 1);
        let mut offset = 0;
        for perm in permutations.iter().take(self.depth) {
            layers.push(Layer {
                kind: LayerKind::Rigid,
                offset,
            });
            offset += RIGID_PARAMS;
            layers.push(Layer {
                kind: LayerKind::Coupling { perm: *perm },
                offset,
            });
            offset += coupling_params(self.width);
        }
        layers.push(Layer {
            kind: LayerKind::Rigid,
            offset,
        });
        layers
    }
}

/// Rotation matrix of an axis-angle vector via the exponential map.
pub fn rodrigues<T: Scalar>(w: [T; 3]) -> [[T; 3]; 3] {
    let [wx, wy, wz] = w;
    let theta_sq = wx * wx + wy * wy + wz * wz;
    let t2 = theta_sq.value();
    // R = I + a K + b K^2 with K = skew(w); K^2 = w w^T - theta^2 I
    let (a, b) = if t2 < SMALL_ANGLE_SQ {
        let t4 = theta_sq * theta_sq;
        (
            -(theta_sq / 6.0) + t4 / 120.0 + 1.0,
            -(theta_sq / 24.0) + t4 / 720.0 + 0.5,
        )
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (-theta.cos() + 1.0) / theta_sq)
    };
    let diag = -(b * theta_sq) + 1.0;
    [
        [diag + b * wx * wx, b * wx * wy - a * wz, b * wx * wz + a * wy],
        [b * wx * wy + a * wz, diag + b * wy * wy, b * wy * wz - a * wx],
        [b * wx * wz - a * wy, b * wy * wz + a * wx, diag + b * wz * wz],
    ]
}

fn rigid_forward<T: Scalar>(params: &[T], p: Vec3<T>) -> Vec3<T> {
    let r = rodrigues([params[0], params[1], params[2]]);
    let x = p.to_array();
    Vec3::new(
        T::affine(&r[0], &x, params[3]),
        T::affine(&r[1], &x, params[4]),
        T::affine(&r[2], &x, params[5]),
    )
}

fn rigid_inverse(params: &[f64], q: [f64; 3]) -> [f64; 3] {
    let r = rodrigues([params[0], params[1], params[2]]);
    let d = [q[0] - params[3], q[1] - params[4], q[2] - params[5]];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2];
    }
    out
}

/// One-hidden-layer perceptron `R^2 -> R` with `tanh` hidden units.
fn mlp<T: Scalar>(params: &[T], width: usize, u: T, v: T) -> T {
    let (w1, rest) = params.split_at(2 * width);
    let (b1, rest) = rest.split_at(width);
    let (w2, rest) = rest.split_at(width);
    let b2 = rest[0];
    let input = [u, v];
    let hidden: Vec<T> = (0..width)
        .map(|k| T::affine(&w1[2 * k..2 * k + 2], &input, b1[k]).tanh())
        .collect();
    T::affine(w2, &hidden, b2)
}

fn coupling_scale_shift<T: Scalar>(params: &[T], width: usize, u: T, v: T) -> (T, T) {
    let n = mlp_params(width);
    let s = mlp(&params[..n], width, u, v);
    let t = mlp(&params[n..2 * n], width, u, v);
    (s, t)
}

fn coupling_forward<T: Scalar>(params: &[T], width: usize, perm: [usize; 3], p: Vec3<T>) -> Vec3<T> {
    let mut c = p.to_array();
    let (s, t) = coupling_scale_shift(params, width, c[perm[0]], c[perm[1]]);
    c[perm[2]] = c[perm[2]] * s.exp() + t;
    Vec3::from_array(c)
}

fn coupling_inverse(params: &[f64], width: usize, perm: [usize; 3], q: [f64; 3]) -> [f64; 3] {
    let mut c = q;
    let (s, t) = coupling_scale_shift(params, width, c[perm[0]], c[perm[1]]);
    c[perm[2]] = (c[perm[2]] - t) * (-s).exp();
    c
}

/// The homeomorphism `H_phi` without any placement offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Inn {
    pub architecture: Architecture,
    pub permutations: Vec<[usize; 3]>,
    layers: Vec<Layer>,
}

impl Inn {
    pub fn new(architecture: Architecture, permutations: Vec<[usize; 3]>) -> Result<Self, KnotError> {
        if permutations.len() != architecture.depth {
            return Err(KnotError::Shape(format!(
                "{} permutations for depth {}",
                permutations.len(),
                architecture.depth
            )));
        }
        for p in &permutations {
            if !PERMUTATIONS.contains(p) {
                return Err(KnotError::Shape(format!("{p:?} is not a permutation of 0..3")));
            }
        }
        if architecture.depth > 0 && architecture.width == 0 {
            return Err(KnotError::Shape("coupling width must be positive".into()));
        }
        let layers = architecture.layers(&permutations);
        Ok(Self {
            architecture,
            permutations,
            layers,
        })
    }

    /// Random permutations and identity-initialized parameters.
    pub fn initialize(architecture: Architecture, seed: u64) -> (Self, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let permutations: Vec<[usize; 3]> = (0..architecture.depth)
            .map(|_| *PERMUTATIONS.choose(&mut rng).expect("non-empty"))
            .collect();
        let inn = Self::new(architecture, permutations).expect("valid by construction");
        let normal = Normal::new(0.0, HIDDEN_INIT_STD).expect("positive std");
        let mut params = vec![0.0; architecture.param_count()];
        let w = architecture.width;
        for layer in &inn.layers {
            if let LayerKind::Coupling { .. } = layer.kind {
                for net in 0..2 {
                    let base = layer.offset + net * mlp_params(w);
                    // first layer weights and biases random, output layer zero
                    for v in &mut params[base..base + 3 * w] {
                        *v = normal.sample(&mut rng);
                    }
                }
            }
        }
        (inn, params)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.architecture.param_count()
    }

    fn check_params(&self, n: usize) -> Result<(), KnotError> {
        if n != self.param_count() {
            return Err(KnotError::Shape(format!(
                "expected {} parameters, got {n}",
                self.param_count()
            )));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(&self, params: &[T], p: Vec3<T>) -> Result<Vec3<T>, KnotError> {
        self.check_params(params.len())?;
        let width = self.architecture.width;
        let mut x = p;
        for (index, layer) in self.layers.iter().enumerate() {
            x = match layer.kind {
                LayerKind::Rigid => rigid_forward(&params[layer.offset..layer.offset + RIGID_PARAMS], x),
                LayerKind::Coupling { perm } => coupling_forward(
                    &params[layer.offset..layer.offset + coupling_params(width)],
                    width,
                    perm,
                    x,
                ),
            };
            if !x.values().iter().all(|v| v.is_finite()) {
                return Err(KnotError::NonFinite { layer: index });
            }
        }
        Ok(x)
    }

    pub fn inverse(&self, params: &[f64], q: [f64; 3]) -> Result<[f64; 3], KnotError> {
        self.check_params(params.len())?;
        let width = self.architecture.width;
        let mut x = q;
        for (index, layer) in self.layers.iter().enumerate().rev() {
            x = match layer.kind {
                LayerKind::Rigid => rigid_inverse(&params[layer.offset..layer.offset + RIGID_PARAMS], x),
                LayerKind::Coupling { perm } => coupling_inverse(
                    &params[layer.offset..layer.offset + coupling_params(width)],
                    width,
                    perm,
                    x,
                ),
            };
            if !x.iter().all(|v| v.is_finite()) {
                return Err(KnotError::NonFinite { layer: index });
            }
        }
        Ok(x)
    }
}
