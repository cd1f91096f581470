//! Inter-agent link capacity and its spatial gradient.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planar vector in kilometres. Used both for agent positions and for
/// displacements / gradients.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

/// An agent configuration.
pub type Position = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self * rhs.x, self * rhs.y)
    }
}

/// A rate function over pairs of positions. Implementations must be
/// positive, symmetric in their arguments and differentiable.
pub trait LinkModel: Send + Sync {
    fn capacity(&self, p: Position, q: Position) -> f64;

    /// Gradient of `capacity(p, q)` with respect to `p`.
    fn capacity_gradient(&self, p: Position, q: Position) -> Vec2;
}

/// Isotropic exponential fading `c(p, q) = exp(-(|p - q| / d0)^D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CapacityModelRepr", into = "CapacityModelRepr")]
pub struct CapacityModel {
    d0: f64,
    exponent: f64,
}

#[derive(Serialize, Deserialize)]
struct CapacityModelRepr {
    d0_km: f64,
    exponent: f64,
}

impl TryFrom<CapacityModelRepr> for CapacityModel {
    type Error = Error;
    fn try_from(r: CapacityModelRepr) -> Result<Self> {
        CapacityModel::new(r.d0_km, r.exponent)
    }
}

impl From<CapacityModel> for CapacityModelRepr {
    fn from(m: CapacityModel) -> Self {
        CapacityModelRepr {
            d0_km: m.d0,
            exponent: m.exponent,
        }
    }
}

impl Default for CapacityModel {
    /// `d0 = 1 km`, `D = 2`.
    fn default() -> Self {
        Self {
            d0: 1.0,
            exponent: 2.0,
        }
    }
}

impl CapacityModel {
    /// Exponents below 2 make the gradient discontinuous at zero distance
    /// and are rejected.
    pub fn new(d0: f64, exponent: f64) -> Result<Self> {
        if !(d0.is_finite() && d0 > 0.0) {
            return Err(Error::InvalidModel(format!(
                "decay length must be positive and finite, got {d0}"
            )));
        }
        if !(exponent.is_finite() && exponent >= 2.0) {
            return Err(Error::InvalidModel(format!(
                "exponent must be finite and >= 2, got {exponent}"
            )));
        }
        Ok(Self { d0, exponent })
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn capacity_at_distance(&self, dist: f64) -> f64 {
        (-(dist / self.d0).powf(self.exponent)).exp()
    }
}

impl LinkModel for CapacityModel {
    fn capacity(&self, p: Position, q: Position) -> f64 {
        self.capacity_at_distance(p.distance(q))
    }

    fn capacity_gradient(&self, p: Position, q: Position) -> Vec2 {
        let diff = p - q;
        let dist = diff.norm();
        if dist == 0.0 {
            return Vec2::ZERO;
        }
        let c = self.capacity_at_distance(dist);
        // -(D/d0) (r/d0)^(D-1) c * diff/r, written to avoid dividing by r
        // when D = 2.
        let scale = if self.exponent == 2.0 {
            -2.0 / (self.d0 * self.d0) * c
        } else {
            -(self.exponent / self.d0) * (dist / self.d0).powf(self.exponent - 1.0) * c / dist
        };
        scale * diff
    }
}

/// `c(p, q)` for the given model.
pub fn capacity(model: &CapacityModel, p: Position, q: Position) -> f64 {
    model.capacity(p, q)
}

/// `∇_p c(p, q)` for the given model.
pub fn capacity_gradient(model: &CapacityModel, p: Position, q: Position) -> Vec2 {
    model.capacity_gradient(p, q)
}
