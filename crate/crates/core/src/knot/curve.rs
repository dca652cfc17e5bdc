use super::KnotError;
use crate::autodiff::{Scalar, Vec3};

/// Closed polygon through the sampled knot points.
///
/// `cumulative[i]` is the arc length from point 0 to point `i` along the
/// polygon, so `cumulative[0] = 0`; `length` closes the loop.
#[derive(Clone, Debug)]
pub struct SampledKnot<T> {
    pub params: Vec<f64>,
    pub points: Vec<Vec3<T>>,
    /// `edge_lengths[i] = |p[(i + 1) mod n] - p[i]|`
    pub edge_lengths: Vec<T>,
    pub cumulative: Vec<T>,
    pub length: T,
}

impl<T: Scalar> SampledKnot<T> {
    pub fn new(params: Vec<f64>, points: Vec<Vec3<T>>) -> Self {
        let n = points.len();
        let edge_lengths: Vec<T> = (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).collect();
        let mut cumulative = Vec::with_capacity(n);
        if let Some(first) = edge_lengths.first() {
            let mut acc = first.lift(0.0);
            for e in &edge_lengths {
                cumulative.push(acc);
                acc = acc + *e;
            }
        }
        let length = match edge_lengths.first() {
            Some(_) => T::sum(&edge_lengths),
            None => panic!("sampled knot needs at least one point"),
        };
        Self {
            params,
            points,
            edge_lengths,
            cumulative,
            length,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_index(&self, index: usize) -> Result<(), KnotError> {
        if index >= self.len() {
            return Err(KnotError::Index {
                index,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Shorter of the two polygon arcs between samples `i` and `j`.
    pub fn geodesic_distance(&self, i: usize, j: usize) -> Result<T, KnotError> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(KnotError::SameSample(i, j));
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let arc = self.cumulative[b] - self.cumulative[a];
        Ok(arc.min(self.length - arc))
    }

    /// Squared discrete curvature at vertex `i`: turning angle over the mean
    /// of the two adjacent edge lengths.
    pub fn curvature_sq(&self, i: usize) -> Result<T, KnotError> {
        self.check_index(i)?;
        let n = self.len();
        let prev = (i + n - 1) % n;
        let e0 = self.points[i] - self.points[prev];
        let e1 = self.points[(i + 1) % n] - self.points[i];
        let (l0, l1) = (self.edge_lengths[prev], self.edge_lengths[i]);
        if l0.value() == 0.0 || l1.value() == 0.0 {
            return Err(KnotError::ZeroEdge(i));
        }
        let turning = e0.cross(e1).norm().atan2(e0.dot(e1));
        let kappa = turning / ((l0 + l1) * 0.5);
        Ok(kappa * kappa)
    }

    pub fn point_values(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| p.values()).collect()
    }

    /// Plain-valued copy.
    pub fn detach(&self) -> SampledKnot<f64> {
        SampledKnot::new(
            self.params.clone(),
            self.points.iter().map(|p| Vec3::from(p.values())).collect(),
        )
    }
}
