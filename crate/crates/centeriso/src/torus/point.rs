//! Points of the torus `T^d` with coordinates reduced to `[0, 1)`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported ambient dimension (`T² × T²`).
pub const MAX_DIM: usize = 4;

/// Reduces a real number to the fundamental domain `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    // `x - floor(x)` can round up to exactly 1 for tiny negative inputs.
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Signed representative of `a − b` in `[−½, ½)`.
#[inline]
pub fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (d + 0.5).floor()
}

/// Flat distance between two points of the circle `R/Z`.
#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    wrapped_diff(a, b).abs()
}

/// A point of `T^d`, `d ∈ {2, 3, 4}`; the first two coordinates are the base
/// torus, the remaining ones the center fiber.
#[derive(Clone, Copy, PartialEq)]
pub struct TorusPoint {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl TorusPoint {
    /// Builds a point, reducing every coordinate mod 1.
    pub fn new(coords: &[f64]) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&coords.len()) {
            return Err(Error::InvalidInput(format!(
                "torus points need 2 to {MAX_DIM} coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite torus coordinate".into()));
        }
        Ok(Self::from_parts_unchecked(coords))
    }

    /// Builds a point from a base point and fiber coordinates.
    pub fn from_base_fiber(base: [f64; 2], fiber: &[f64]) -> Self {
        let mut coords = [0.0; MAX_DIM];
        coords[0] = wrap(base[0]);
        coords[1] = wrap(base[1]);
        for (slot, v) in coords[2..].iter_mut().zip(fiber) {
            *slot = wrap(*v);
        }
        Self {
            coords,
            dim: 2 + fiber.len().min(MAX_DIM - 2),
        }
    }

    pub(crate) fn from_parts_unchecked(coords: &[f64]) -> Self {
        let mut c = [0.0; MAX_DIM];
        for (slot, v) in c.iter_mut().zip(coords) {
            *slot = wrap(*v);
        }
        Self {
            coords: c,
            dim: coords.len(),
        }
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All coordinates.
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    /// Base (first two) coordinates.
    pub fn base(&self) -> [f64; 2] {
        [self.coords[0], self.coords[1]]
    }

    /// Fiber coordinates (possibly empty).
    pub fn fiber(&self) -> &[f64] {
        &self.coords[2..self.dim]
    }

    /// Flat-torus distance: per-coordinate circle distance combined in ℓ².
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| {
                let d = circle_dist(*a, *b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Distance between base projections.
    pub fn base_distance(&self, other: &TorusPoint) -> f64 {
        base_distance(self.base(), other.base())
    }
}

/// Flat distance on `T²`.
#[inline]
pub fn base_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d0 = circle_dist(a[0], b[0]);
    let d1 = circle_dist(a[1], b[1]);
    (d0 * d0 + d1 * d1).sqrt()
}

impl std::fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("TorusPoint").field(&self.coords()).finish()
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        TorusPoint::new(&v).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_unit_interval() {
        assert_eq!(wrap(1.5), 0.5);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(-1e-20), 0.0);
        assert_eq!(wrap(3.0), 0.0);
    }

    #[test]
    fn distance_uses_shortest_representative() {
        let a = TorusPoint::new(&[0.05, 0.0]).unwrap();
        let b = TorusPoint::new(&[0.95, 0.0]).unwrap();
        assert!((a.distance(&b) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimension() {
        assert!(TorusPoint::new(&[0.1]).is_err());
        assert!(TorusPoint::new(&[0.1; 5]).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = TorusPoint::new(&[0.25, 0.5, 0.75]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.25,0.5,0.75]");
        let q: TorusPoint = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
