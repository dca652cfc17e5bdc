//! Image, length, self-repulsion, region and bending losses.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Scalar, Vec3};
use crate::knot::{KnotError, SampledKnot};
use crate::render::SilhouetteImage;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("image is {got:?}, target is {expected:?}")]
    Dimension { expected: (usize, usize), got: (usize, usize) },
    #[error("samples {0} and {1} coincide")]
    CoincidentPair(usize, usize),
    #[error("at least one view is required")]
    NoViews,
    #[error("invalid region: {0}")]
    Region(String),
    #[error("invalid pair batch: {0}")]
    Batch(String),
    #[error(transparent)]
    Knot(#[from] KnotError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub image: f64,
    pub length: f64,
    pub mobius: f64,
    pub occupancy: f64,
    pub bending: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            image: 1.0,
            length: 1e-2,
            mobius: 1e-3,
            occupancy: 1e-2,
            bending: 1e-2,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), String> {
        for (name, w) in [
            ("image", self.image),
            ("length", self.length),
            ("mobius", self.mobius),
            ("occupancy", self.occupancy),
            ("bending", self.bending),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(format!("weights.{name} must be a finite value >= 0, got {w}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSpace {
    /// Outward normal; the inside is `normal . p <= offset`.
    pub normal: [f64; 3],
    pub offset: f64,
}

/// Solid the tube must stay inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Region {
    Box { center: [f64; 3], half_extents: [f64; 3] },
    Sphere { center: [f64; 3], radius: f64 },
    /// Intersection of half-spaces; `interior` is any point strictly inside.
    HalfSpaces { planes: Vec<HalfSpace>, interior: [f64; 3] },
}

impl Region {
    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |m: &str| Err(LossError::Region(m.to_string()));
        match self {
            Region::Box { half_extents, .. } => {
                if half_extents.iter().any(|&h| !(h > 0.0)) {
                    return bad("box half_extents must be positive");
                }
            }
            Region::Sphere { radius, .. } => {
                if !(*radius > 0.0) {
                    return bad("sphere radius must be positive");
                }
            }
            Region::HalfSpaces { planes, interior } => {
                if planes.is_empty() {
                    return bad("need at least one half-space");
                }
                if planes.iter().any(|h| h.normal.iter().all(|&c| c == 0.0)) {
                    return bad("half-space normal must be nonzero");
                }
                if !(self.sdf(Vec3::from(*interior)) > 0.0) {
                    return bad("interior point is not inside every half-space");
                }
            }
        }
        Ok(())
    }

    /// Signed distance, positive inside. Exact for boxes and spheres; for
    /// half-space intersections exact inside and a lower bound outside.
    pub fn sdf<T: Scalar>(&self, p: Vec3<T>) -> T {
        match self {
            Region::Box { center, half_extents } => {
                let d: [T; 3] = std::array::from_fn(|k| (p.get(k) - center[k]).abs() - half_extents[k]);
                let v = d.map(|x| x.value());
                if v.iter().all(|&x| x <= 0.0) {
                    let mut k = 0;
                    for a in 1..3 {
                        if v[a] > v[k] {
                            k = a;
                        }
                    }
                    -d[k]
                } else {
                    let outside: Vec<T> = (0..3).filter(|&k| v[k] > 0.0).map(|k| d[k] * d[k]).collect();
                    -T::sum(&outside).sqrt()
                }
            }
            Region::Sphere { center, radius } => -(p.offset([-center[0], -center[1], -center[2]]).norm() - *radius),
            Region::HalfSpaces { planes, .. } => {
                let mut best: Option<T> = None;
                for h in planes {
                    let n = h.normal;
                    let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                    let w = [n[0] / len, n[1] / len, n[2] / len];
                    let s = -(p.x * w[0] + p.y * w[1] + p.z * w[2] - h.offset / len);
                    best = Some(match best {
                        Some(b) if b.value() <= s.value() => b,
                        _ => s,
                    });
                }
                best.expect("validated region has planes")
            }
        }
    }

    pub fn translated(&self, t: [f64; 3]) -> Region {
        let add = |c: &[f64; 3]| [c[0] + t[0], c[1] + t[1], c[2] + t[2]];
        match self {
            Region::Box { center, half_extents } => Region::Box {
                center: add(center),
                half_extents: *half_extents,
            },
            Region::Sphere { center, radius } => Region::Sphere {
                center: add(center),
                radius: *radius,
            },
            Region::HalfSpaces { planes, interior } => Region::HalfSpaces {
                planes: planes
                    .iter()
                    .map(|h| HalfSpace {
                        normal: h.normal,
                        offset: h.offset + h.normal[0] * t[0] + h.normal[1] * t[1] + h.normal[2] * t[2],
                    })
                    .collect(),
                interior: add(interior),
            },
        }
    }
}

/// Constraint budgets; an absent budget switches its loss off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub length: Option<f64>,
    pub curvature: Option<f64>,
    pub region: Option<Region>,
}

impl Budgets {
    pub fn validate(&self) -> Result<(), LossError> {
        if let Some(l) = self.length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(LossError::Region(format!("budgets.length must be positive, got {l}")));
            }
        }
        if let Some(b) = self.curvature {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(LossError::Region(format!("budgets.curvature must be >= 0, got {b}")));
            }
        }
        if let Some(r) = &self.region {
            r.validate()?;
        }
        Ok(())
    }
}

/// Ordered sample pairs `(i, j)`, `i != j`, for the repulsion loss.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MobiusBatch {
    pub pairs: Vec<(usize, usize)>,
}

impl MobiusBatch {
    /// Draws `size` distinct ordered pairs out of the `n (n - 1)` available,
    /// uniformly without replacement. Asking for more pairs than exist
    /// returns all of them.
    pub fn sample<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Result<Self, LossError> {
        if n < 2 {
            return Err(LossError::Batch(format!("need at least 2 samples, got {n}")));
        }
        let total = n * (n - 1);
        let size = size.min(total);
        let pairs = rand::seq::index::sample(rng, total, size)
            .into_iter()
            .map(|k| {
                let i = k / (n - 1);
                let j = k % (n - 1);
                (i, if j < i { j } else { j + 1 })
            })
            .collect();
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn sum_or_zero<T: Scalar>(terms: &[T], like: T) -> T {
    if terms.is_empty() {
        like.lift(0.0)
    } else {
        T::sum(terms)
    }
}

/// Mean squared pixel difference.
pub fn image_loss<T: Scalar>(rendered: &SilhouetteImage<T>, target: &SilhouetteImage<f64>) -> Result<T, LossError> {
    let got = (rendered.width, rendered.height);
    let expected = (target.width, target.height);
    if got != expected || rendered.values.len() != target.values.len() {
        return Err(LossError::Dimension { expected, got });
    }
    let n = rendered.values.len() as f64;
    let mut acc = 0.0;
    let mut partials = Vec::with_capacity(rendered.values.len());
    for (r, t) in rendered.values.iter().zip(&target.values) {
        let d = r.value() - t;
        acc += d * d;
        partials.push(2.0 * d / n);
    }
    Ok(T::fused(acc / n, &rendered.values, &partials))
}

/// `max(length - budget, 0)`.
pub fn length_loss<T: Scalar>(knot: &SampledKnot<T>, budget: f64) -> T {
    (knot.length - budget).relu()
}

/// Mean over the batch of `(1/d^2 - 1/g^2) * max(2r - d, 0)`, with `d` the
/// Euclidean and `g` the along-curve distance between the pair.
pub fn mobius_loss<T: Scalar>(knot: &SampledKnot<T>, batch: &MobiusBatch, r: f64) -> Result<T, LossError> {
    if batch.is_empty() {
        return Err(LossError::Batch("empty batch".into()));
    }
    let mut terms = Vec::new();
    for &(i, j) in &batch.pairs {
        if i == j {
            return Err(LossError::Batch(format!("pair ({i}, {j}) repeats a sample")));
        }
        let pi = *knot.points.get(i).ok_or(KnotError::Index { index: i, len: knot.len() })?;
        let pj = *knot.points.get(j).ok_or(KnotError::Index { index: j, len: knot.len() })?;
        let diff = pi - pj;
        let d2 = diff.norm_sq();
        if d2.value() == 0.0 {
            return Err(LossError::CoincidentPair(i, j));
        }
        let d = d2.sqrt();
        if 2.0 * r - d.value() <= 0.0 {
            continue;
        }
        // one edge apart the chord is the arc and the term vanishes
        let n = knot.len();
        if (i + 1) % n == j || (j + 1) % n == i {
            continue;
        }
        let g = knot.geodesic_distance(i, j)?;
        if g.value() <= d.value() {
            continue;
        }
        let m = d2.lift(1.0) / d2 - d2.lift(1.0) / (g * g);
        terms.push(m * (-(d - 2.0 * r)));
    }
    Ok(sum_or_zero(&terms, knot.length) / batch.len() as f64)
}

/// `sum_p max(r - S(p), 0)`.
pub fn region_loss<T: Scalar>(knot: &SampledKnot<T>, region: &Region, r: f64) -> T {
    let terms: Vec<T> = knot
        .points
        .iter()
        .filter_map(|p| {
            let s = region.sdf(*p);
            (r - s.value() > 0.0).then(|| -(s - r))
        })
        .collect();
    sum_or_zero(&terms, knot.length)
}

/// `sum_p max(kappa_p^2 - budget, 0)`.
pub fn bending_loss<T: Scalar>(knot: &SampledKnot<T>, budget: f64) -> Result<T, LossError> {
    let mut terms = Vec::new();
    for i in 0..knot.len() {
        let k2 = knot.curvature_sq(i)?;
        if k2.value() > budget {
            terms.push(k2 - budget);
        }
    }
    Ok(sum_or_zero(&terms, knot.length))
}

/// Individual loss terms, before weighting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossTerms<T> {
    pub image: T,
    pub length: T,
    pub mobius: T,
    pub region: T,
    pub bending: T,
}

impl<T: Scalar> LossTerms<T> {
    pub fn total(&self, w: &LossWeights) -> T {
        self.image * w.image + self.length * w.length + self.mobius * w.mobius + self.region * w.occupancy + self.bending * w.bending
    }

    pub fn values(&self) -> LossTerms<f64> {
        LossTerms {
            image: self.image.value(),
            length: self.length.value(),
            mobius: self.mobius.value(),
            region: self.region.value(),
            bending: self.bending.value(),
        }
    }
}

/// Geometric terms of one knot; terms without a budget (or a batch) are 0.
pub fn knot_losses<T: Scalar>(
    knot: &SampledKnot<T>,
    budgets: &Budgets,
    batch: Option<&MobiusBatch>,
    r: f64,
) -> Result<[T; 4], LossError> {
    let zero = knot.length.lift(0.0);
    let length = budgets.length.map_or(zero, |l| length_loss(knot, l));
    let mobius = match batch {
        Some(b) => mobius_loss(knot, b, r)?,
        None => zero,
    };
    let region = budgets.region.as_ref().map_or(zero, |g| region_loss(knot, g, r));
    let bending = match budgets.curvature {
        Some(b) => bending_loss(knot, b)?,
        None => zero,
    };
    Ok([length, mobius, region, bending])
}

/// All terms for a scene: image loss averaged over views, geometric terms
/// summed over knots.
pub fn loss_terms<T: Scalar>(
    views: &[(&SilhouetteImage<T>, &SilhouetteImage<f64>)],
    knots: &[(&SampledKnot<T>, Option<&MobiusBatch>)],
    budgets: &Budgets,
    r: f64,
) -> Result<LossTerms<T>, LossError> {
    if views.is_empty() {
        return Err(LossError::NoViews);
    }
    let per_view = views
        .iter()
        .map(|(img, target)| image_loss(img, target))
        .collect::<Result<Vec<_>, _>>()?;
    let image = T::sum(&per_view) / views.len() as f64;
    let zero = image.lift(0.0);
    let mut geo = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (knot, batch) in knots {
        for (slot, term) in geo.iter_mut().zip(knot_losses(knot, budgets, *batch, r)?) {
            slot.push(term);
        }
    }
    let [length, mobius, region, bending] = geo.map(|t| sum_or_zero(&t, zero));
    Ok(LossTerms {
        image,
        length,
        mobius,
        region,
        bending,
    })
}

/// Weighted total of [`loss_terms`].
pub fn total_loss<T: Scalar>(
    views: &[(&SilhouetteImage<T>, &SilhouetteImage<f64>)],
    knots: &[(&SampledKnot<T>, Option<&MobiusBatch>)],
    weights: &LossWeights,
    budgets: &Budgets,
    r: f64,
) -> Result<T, LossError> {
    Ok(loss_terms(views, knots, budgets, r)?.total(weights))
}
