//! Template knots, the invertible deformation family and polygonal curve
//! quantities (length, geodesic distance, discrete curvature).

mod curve;
mod inn;

pub use curve::SampledKnot;
pub use inn::{
    coupling_params, mlp_params, rodrigues, Architecture, Inn, Layer, LayerKind, HIDDEN_INIT_STD,
    PERMUTATIONS, RIGID_PARAMS,
};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Scalar, Tape, Var, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KnotError {
    #[error("need at least 3 template samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite value after layer {layer}")]
    NonFinite { layer: usize },
    #[error("samples {0} and {1} coincide")]
    SameSample(usize, usize),
    #[error("zero-length edge next to vertex {0}")]
    ZeroEdge(usize),
    #[error("sample index {index} out of range for {len} samples")]
    Index { index: usize, len: usize },
    #[error("template parameters must be sorted and lie in [0, 1)")]
    Params,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Unknot,
}

/// Closed template curve `K(s)` on `s in [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateKnot {
    pub kind: TemplateKind,
    pub radius: f64,
}

impl Default for TemplateKnot {
    fn default() -> Self {
        Self {
            kind: TemplateKind::Unknot,
            radius: 1.0,
        }
    }
}

impl TemplateKnot {
    /// `K(s) = radius * (cos 2 pi s, sin 2 pi s, 0)`.
    pub fn point(&self, s: f64) -> [f64; 3] {
        match self.kind {
            TemplateKind::Unknot => {
                let (sin, cos) = (TAU * s).sin_cos();
                [self.radius * cos, self.radius * sin, 0.0]
            }
        }
    }
}

/// Sorted template parameters `s_i in [0, 1)`.
///
/// Without jitter `s_i = i / n`; with jitter `s_i = (i + u_i) / n` with
/// `u_i ~ U[0, 1)` drawn from `seed`.
pub fn sample_template(n: usize, jitter: bool, seed: u64) -> Result<Vec<f64>, KnotError> {
    if jitter {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_template_with(n, Some(&mut rng))
    } else {
        sample_template_with::<ChaCha8Rng>(n, None)
    }
}

pub fn sample_template_with<R: Rng>(n: usize, rng: Option<&mut R>) -> Result<Vec<f64>, KnotError> {
    if n < 3 {
        return Err(KnotError::TooFewSamples(n));
    }
    let nf = n as f64;
    Ok(match rng {
        None => (0..n).map(|i| i as f64 / nf).collect(),
        Some(rng) => (0..n)
            .map(|i| {
                let u: f64 = rng.random();
                // (i + u) / n can round up to 1.0 for the last sample
                ((i as f64 + u) / nf).min(1.0 - f64::EPSILON)
            })
            .collect(),
    })
}

/// A template knot deformed by an invertible network and placed at `center`.
///
/// Knot points are `center + H_phi(K(s))`; at initialization `H_phi` is the
/// identity, so the knot starts as the template circle around `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotModel {
    pub template: TemplateKnot,
    pub center: [f64; 3],
    pub seed: u64,
    pub inn: Inn,
    pub params: Vec<f64>,
}

impl KnotModel {
    pub fn new(architecture: Architecture, seed: u64) -> Self {
        let (inn, params) = Inn::initialize(architecture, seed);
        Self {
            template: TemplateKnot::default(),
            center: [0.0; 3],
            seed,
            inn,
            params,
        }
    }

    pub fn with_center(mut self, center: [f64; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn with_template(mut self, template: TemplateKnot) -> Self {
        self.template = template;
        self
    }

    pub fn architecture(&self) -> Architecture {
        self.inn.architecture
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Parameters as leaves on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.params.iter().map(|&p| tape.leaf(p)).collect()
    }

    /// `H_phi(p)` with the model's own parameters.
    pub fn forward(&self, p: [f64; 3]) -> Result<[f64; 3], KnotError> {
        Ok(self.inn.forward(&self.params, Vec3::from(p))?.values())
    }

    pub fn inverse(&self, q: [f64; 3]) -> Result<[f64; 3], KnotError> {
        self.inn.inverse(&self.params, q)
    }

    /// Knot point for template parameter `s` under parameters `params`.
    pub fn embed<T: Scalar>(&self, params: &[T], s: f64) -> Result<Vec3<T>, KnotError> {
        let like = *params.first().ok_or_else(|| KnotError::Shape("empty parameter vector".into()))?;
        let p = Vec3::lift(like, self.template.point(s));
        Ok(self.inn.forward(params, p)?.offset(self.center))
    }

    /// Samples the deformed knot at sorted template parameters.
    pub fn sample<T: Scalar>(&self, params: &[T], s: &[f64]) -> Result<SampledKnot<T>, KnotError> {
        if s.windows(2).any(|w| w[0] > w[1]) || s.iter().any(|&v| !(0.0..1.0).contains(&v)) {
            return Err(KnotError::Params);
        }
        let points = s
            .iter()
            .map(|&si| self.embed(params, si))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SampledKnot::new(s.to_vec(), points))
    }

    /// Plain-valued sampling with the model's own parameters.
    pub fn sample_values(&self, s: &[f64]) -> Result<SampledKnot<f64>, KnotError> {
        self.sample(&self.params, s)
    }
}
