//! Periodic points of the base automorphism, computed exactly.
//!
//! Points of period dividing `p` are the solutions of `(A^p − I)x ≡ 0 mod Z²`.
//! They form the finite group `M⁻¹Z²/Z²` (`M = A^p − I`) of order
//! `|det M|`; coset representatives of `Z²/MZ²` are read off a triangular
//! basis of the lattice `MZ²`.

use serde::{Deserialize, Serialize};

use super::point::TorusPoint;
use super::system::SystemSpec;
use crate::error::{Error, Result};

/// A rational base point `(n₁/D, n₂/D)` with `0 ≤ nᵢ < D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RationalPoint {
    pub num: [i64; 2],
    pub den: i64,
}

impl RationalPoint {
    pub fn to_f64(&self) -> [f64; 2] {
        [
            self.num[0] as f64 / self.den as f64,
            self.num[1] as f64 / self.den as f64,
        ]
    }

    /// Exact image under the integer matrix `a`.
    pub fn map(&self, a: [[i64; 2]; 2]) -> RationalPoint {
        let d = self.den as i128;
        let n0 = (a[0][0] as i128 * self.num[0] as i128 + a[0][1] as i128 * self.num[1] as i128)
            .rem_euclid(d);
        let n1 = (a[1][0] as i128 * self.num[0] as i128 + a[1][1] as i128 * self.num[1] as i128)
            .rem_euclid(d);
        RationalPoint {
            num: [n0 as i64, n1 as i64],
            den: self.den,
        }
    }
}

fn mat_mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> Option<[[i64; 2]; 2]> {
    let mut c = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0]
                .checked_mul(b[0][j])?
                .checked_add(a[i][1].checked_mul(b[1][j])?)?;
        }
    }
    Some(c)
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a.abs(), a.signum(), 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - (a.div_euclid(b)) * y)
    }
}

/// `A^p` with overflow detection.
pub fn matrix_power(a: [[i64; 2]; 2], p: u32) -> Result<[[i64; 2]; 2]> {
    let mut r = [[1, 0], [0, 1]];
    for _ in 0..p {
        r = mat_mul(r, a)
            .ok_or_else(|| Error::Precision("matrix power overflows 64-bit integers".into()))?;
    }
    Ok(r)
}

/// `|det(A^p − I)|`, the number of points of period dividing `p`.
pub fn periodic_count(system: &SystemSpec, p: u32) -> Result<i64> {
    let m = matrix_power(system.base_matrix(), p)?;
    let det = (m[0][0] - 1) * (m[1][1] - 1) - m[0][1] * m[1][0];
    Ok(det.abs())
}

/// All base points of period dividing `p`, as exact rationals.
pub fn periodic_points_exact(system: &SystemSpec, p: u32) -> Result<Vec<RationalPoint>> {
    if p == 0 {
        return Err(Error::InvalidInput("period must be at least 1".into()));
    }
    if p > system.guards().max_period {
        return Err(Error::Guard {
            what: "period",
            value: p as f64,
            limit: system.guards().max_period as f64,
        });
    }
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "exact periodic points require the linear base".into(),
        ));
    }
    let mut m = matrix_power(system.base_matrix(), p)?;
    m[0][0] -= 1;
    m[1][1] -= 1;
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    assert!(det != 0, "A^p − I is singular for a hyperbolic A");
    let dabs = det.abs();
    // Triangular basis of M Z²: columns (a, 0) and (b, g).
    let (g, _, _) = ext_gcd(m[1][0], m[1][1]);
    let a = (det / g).abs();
    let mut pts = Vec::with_capacity(dabs as usize);
    // x = M⁻¹ v = adj(M) v / det for coset representatives v = (i, j).
    let adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]];
    for i in 0..a {
        for j in 0..g {
            let n0 = (adj[0][0] as i128 * i as i128 + adj[0][1] as i128 * j as i128)
                * det.signum() as i128;
            let n1 = (adj[1][0] as i128 * i as i128 + adj[1][1] as i128 * j as i128)
                * det.signum() as i128;
            pts.push(RationalPoint {
                num: [
                    n0.rem_euclid(dabs as i128) as i64,
                    n1.rem_euclid(dabs as i128) as i64,
                ],
                den: dabs,
            });
        }
    }
    pts.sort();
    pts.dedup();
    if pts.len() as i64 != dabs {
        return Err(Error::Precision(format!(
            "enumerated {} periodic points, expected {dabs}",
            pts.len()
        )));
    }
    Ok(pts)
}

/// Base periodic points of period dividing `p` as torus points.
pub fn periodic_points(system: &SystemSpec, p: u32) -> Result<Vec<TorusPoint>> {
    Ok(periodic_points_exact(system, p)?
        .iter()
        .map(|q| TorusPoint::from_base_fiber(q.to_f64(), &[]))
        .collect())
}

/// All periodic orbits of minimal period `≤ max_period`, each listed from a
/// canonical (smallest) starting point, with exact coordinates.
pub fn periodic_orbits(system: &SystemSpec, max_period: u32) -> Result<Vec<Vec<RationalPoint>>> {
    let a = system.base_matrix();
    let mut seen = std::collections::BTreeSet::new();
    let mut orbits = Vec::new();
    for p in 1..=max_period {
        for q in periodic_points_exact(system, p)? {
            let canon = reduce(q);
            if seen.contains(&canon) {
                continue;
            }
            let mut orbit = vec![q];
            let mut r = q.map(a);
            while reduce(r) != canon {
                orbit.push(r);
                r = r.map(a);
            }
            if orbit.len() as u32 != p {
                continue; // minimal period smaller: already collected
            }
            for o in &orbit {
                seen.insert(reduce(*o));
            }
            let start = (0..orbit.len()).min_by_key(|&i| reduce(orbit[i])).unwrap();
            orbit.rotate_left(start);
            orbits.push(orbit);
        }
    }
    Ok(orbits)
}

fn reduce(q: RationalPoint) -> (i64, i64, i64) {
    use num_integer::Integer;
    let g = q.num[0].gcd(&q.num[1]).gcd(&q.den);
    (q.num[0] / g, q.num[1] / g, q.den / g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::trig::TrigPolynomial;

    fn cat() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap()
    }

    #[test]
    fn small_periods() {
        let s = cat();
        assert_eq!(periodic_points(&s, 1).unwrap().len(), 1);
        assert_eq!(periodic_points(&s, 2).unwrap().len(), 5);
        for p in 1..=10 {
            let pts = periodic_points(&s, p).unwrap();
            assert_eq!(pts.len() as i64, periodic_count(&s, p).unwrap());
            for x in pts {
                let y = s.apply(&x, p as i64).unwrap();
                assert!(x.base_distance(&y) < 1e-10);
            }
        }
    }

    #[test]
    fn orbits_partition_points() {
        let s = cat();
        let orbits = periodic_orbits(&s, 6).unwrap();
        for p in [1u32, 2, 3, 6] {
            let count: usize = orbits
                .iter()
                .filter(|o| p % o.len() as u32 == 0)
                .map(|o| o.len())
                .sum();
            assert_eq!(count as i64, periodic_count(&s, p).unwrap());
        }
    }

    #[test]
    fn period_guard() {
        assert!(matches!(
            periodic_points(&cat(), 13),
            Err(Error::Guard { .. })
        ));
    }
}
