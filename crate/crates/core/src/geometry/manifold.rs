use serde::{Deserialize, Serialize};

use super::GeometryError;

/// A circle in the plane, the data manifold of the toy experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub radius: f64,
    pub center: [f64; 2],
}

impl Default for Circle {
    fn default() -> Self {
        Circle { radius: 1.0, center: [0.0, 0.0] }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl Circle {
    pub fn new(radius: f64, center: [f64; 2]) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::Config(format!("radius must be positive, got {radius}")));
        }
        Ok(Circle { radius, center })
    }

    fn offset(&self, x: [f64; 2]) -> Result<([f64; 2], f64), GeometryError> {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            return Err(GeometryError::Degenerate);
        }
        Ok((d, r))
    }

    /// Outward unit normal at `project(x)`.
    pub fn normal(&self, x: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let (d, r) = self.offset(x)?;
        Ok([d[0] / r, d[1] / r])
    }

    /// Counter-clockwise unit tangent at `project(x)`.
    pub fn tangent(&self, x: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let n = self.normal(x)?;
        Ok([-n[1], n[0]])
    }

    /// Nearest point on the circle.
    pub fn project(&self, x: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let (d, r) = self.offset(x)?;
        if (r - self.radius).abs() == 0.0 {
            return Ok(x);
        }
        let k = self.radius / r;
        Ok([self.center[0] + k * d[0], self.center[1] + k * d[1]])
    }

    /// `(π(x) − x) / σ²`, the score of a narrow Gaussian around the circle.
    pub fn normal_score(&self, x: [f64; 2], sigma: f64) -> Result<[f64; 2], GeometryError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(GeometryError::InvalidSigma(sigma));
        }
        let (_, r) = self.offset(x)?;
        let distance = (r - self.radius).abs();
        if distance >= self.radius {
            return Err(GeometryError::OutsideNeighborhood { distance, radius: self.radius });
        }
        let p = self.project(x)?;
        let s2 = sigma * sigma;
        Ok([(p[0] - x[0]) / s2, (p[1] - x[1]) / s2])
    }

    /// Split `v` into normal and tangent parts at `project(x)`. The parts are
    /// built from orthogonal unit vectors, so their inner product is exactly 0.
    pub fn decompose(&self, x: [f64; 2], v: [f64; 2]) -> Result<([f64; 2], [f64; 2]), GeometryError> {
        let n = self.normal(x)?;
        let t = [-n[1], n[0]];
        let a = dot(v, n);
        let b = dot(v, t);
        Ok(([a * n[0], a * n[1]], [b * t[0], b * t[1]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection() {
        let c = Circle::default();
        assert_eq!(c.project([2.0, 0.0]).unwrap(), [1.0, 0.0]);
        assert_eq!(c.project([0.0, 1.0]).unwrap(), [0.0, 1.0]);
        assert_eq!(c.project([0.0, 0.0]), Err(GeometryError::Degenerate));
        let shifted = Circle::new(2.0, [1.0, 1.0]).unwrap();
        assert_eq!(shifted.project([1.0, 5.0]).unwrap(), [1.0, 3.0]);
        assert!(Circle::new(0.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn score() {
        let c = Circle::default();
        let s = c.normal_score([1.1, 0.0], 0.1).unwrap();
        assert!((s[0] + 10.0).abs() < 1e-9 && s[1] == 0.0, "{s:?}");
        let half = c.normal_score([1.1, 0.0], 0.05).unwrap();
        assert!((half[0] / s[0] - 4.0).abs() < 1e-12);
        assert_eq!(c.normal_score([0.0, 1.0], 0.1).unwrap(), [0.0, 0.0]);
        assert!(c.normal_score([1.1, 0.0], 0.0).is_err());
        assert!(c.normal_score([2.5, 0.0], 0.1).is_err());
    }

    #[test]
    fn split() {
        let c = Circle::default();
        let (n, t) = c.decompose([0.0, 1.0], [0.0, 3.0]).unwrap();
        assert_eq!((n, t), ([0.0, 3.0], [0.0, 0.0]));
        let (n, t) = c.decompose([1.0, 0.0], [0.0, 2.0]).unwrap();
        assert_eq!(n, [0.0, 0.0]);
        assert_eq!(t, [0.0, 2.0]);
    }
}
