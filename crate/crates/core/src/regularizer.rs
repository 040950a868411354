//! The control regularizer `ψ(u) = I_{U_ad}(u) + (α/2)‖u‖²`.
//!
//! Every admissible set offered here has an exact Euclidean projection, so
//! the proximal map is exact: `prox_{tψ}(v) = Π_{U_ad}(v / (1 + tα))`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{check_len, Error, Result};
use crate::linalg::norm;

/// Slack accepted when testing `u ∈ U_ad`.
pub const DOMAIN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Domain {
    /// Coordinate box `lower ≤ u ≤ upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball `‖u‖₂ ≤ radius`.
    EuclideanBall { radius: f64 },
    /// Ball of a discrete Sobolev norm. Programs using it work in coordinates
    /// that are orthonormal for that norm, so the ball is round there.
    SobolevBall { radius: f64 },
    /// `‖u‖_∞ ≤ radius`.
    SupNormBox { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub domain: Domain,
    /// α in `(α/2)‖u‖²`.
    pub quad_weight: f64,
}

impl Regularizer {
    pub fn new(domain: Domain, quad_weight: f64) -> Result<Self> {
        if !(quad_weight >= 0.0 && quad_weight.is_finite()) {
            return Err(Error::invalid("quadratic weight must be finite and ≥ 0"));
        }
        match &domain {
            Domain::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::invalid("box bounds must be nonempty and of equal length"));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
                {
                    return Err(Error::invalid("box bounds must be finite with lower ≤ upper"));
                }
            }
            Domain::EuclideanBall { radius }
            | Domain::SobolevBall { radius }
            | Domain::SupNormBox { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("radius must be finite and positive"));
                }
            }
        }
        Ok(Regularizer { domain, quad_weight })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>, quad_weight: f64) -> Result<Self> {
        Self::new(Domain::Box { lower, upper }, quad_weight)
    }

    pub fn ball(radius: f64) -> Result<Self> {
        Self::new(Domain::EuclideanBall { radius }, 0.0)
    }

    /// Same admissible set with the quadratic term dropped.
    pub fn indicator_only(&self) -> Self {
        Regularizer {
            domain: self.domain.clone(),
            quad_weight: 0.0,
        }
    }

    /// Dimension fixed by the domain, if any (boxes carry their own length).
    pub fn fixed_dim(&self) -> Option<usize> {
        match &self.domain {
            Domain::Box { lower, .. } => Some(lower.len()),
            _ => None,
        }
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        match self.fixed_dim() {
            Some(d) => check_len("regularizer", d, u.len()),
            None => Ok(()),
        }
    }

    /// Euclidean projection onto `U_ad`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(v)?;
        Ok(match &self.domain {
            Domain::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| x.clamp(*l, *u))
                .collect(),
            Domain::EuclideanBall { radius } | Domain::SobolevBall { radius } => {
                let nv = norm(v);
                if nv <= *radius {
                    v.to_vec()
                } else {
                    v.iter().map(|x| x * (radius / nv)).collect()
                }
            }
            Domain::SupNormBox { radius } => v.iter().map(|x| x.clamp(-radius, *radius)).collect(),
        })
    }

    /// `argmin_u ½‖u − v‖² + t ψ(u)`.
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        let shrink = 1.0 / (1.0 + t * self.quad_weight);
        let scaled: Vec<f64> = v.iter().map(|x| x * shrink).collect();
        self.project(&scaled)
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        if self.check_dim(u).is_err() {
            return false;
        }
        match &self.domain {
            Domain::Box { lower, upper } => u
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, h))| *x >= l - DOMAIN_TOL && *x <= h + DOMAIN_TOL),
            Domain::EuclideanBall { radius } | Domain::SobolevBall { radius } => {
                norm(u) <= radius + DOMAIN_TOL
            }
            Domain::SupNormBox { radius } => u.iter().all(|x| x.abs() <= radius + DOMAIN_TOL),
        }
    }

    /// `ψ(u)`: the quadratic term on `U_ad`, `+∞` outside.
    pub fn value(&self, u: &[f64]) -> f64 {
        if self.contains(u) {
            self.quad_value(u)
        } else {
            f64::INFINITY
        }
    }

    /// `(α/2)‖u‖²`, ignoring the indicator.
    pub fn quad_value(&self, u: &[f64]) -> f64 {
        0.5 * self.quad_weight * u.iter().map(|x| x * x).sum::<f64>()
    }

    /// Maps a point of the unit cube `[0,1]^{n+1}` into `U_ad`.
    ///
    /// Boxes use the first `n` coordinates affinely. Balls take a Gaussian
    /// direction from the first `n` coordinates (inverse normal CDF) and the
    /// radius `r · c^{1/n}` from the last one, which is uniform in volume for
    /// uniform cube input.
    pub fn from_unit_cube(&self, n: usize, cube: &[f64]) -> Result<Vec<f64>> {
        check_len("unit-cube sample", n + 1, cube.len())?;
        self.check_dim(&cube[..n])?;
        let clamp = |c: f64| c.clamp(1e-12, 1.0 - 1e-12);
        Ok(match &self.domain {
            Domain::Box { lower, upper } => (0..n)
                .map(|i| lower[i] + (upper[i] - lower[i]) * cube[i])
                .collect(),
            Domain::SupNormBox { radius } => {
                (0..n).map(|i| radius * (2.0 * cube[i] - 1.0)).collect()
            }
            Domain::EuclideanBall { radius } | Domain::SobolevBall { radius } => {
                let normal = Normal::standard();
                let dir: Vec<f64> = (0..n).map(|i| normal.inverse_cdf(clamp(cube[i]))).collect();
                let nd = norm(&dir);
                let r = radius * clamp(cube[n]).powf(1.0 / n as f64);
                if nd == 0.0 {
                    vec![0.0; n]
                } else {
                    dir.iter().map(|d| d * r / nd).collect()
                }
            }
        })
    }
}
