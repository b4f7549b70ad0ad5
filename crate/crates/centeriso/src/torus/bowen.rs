//! Bowen balls `B(x, ε, n) = {y : d(f^j y, f^j x) < ε, 0 ≤ j < n}`.

use serde::{Deserialize, Serialize};

use super::point::TorusPoint;
use super::system::SystemSpec;

/// Center, radius and depth of a Bowen ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowenBallSpec {
    pub center: TorusPoint,
    pub radius: f64,
    pub depth: usize,
}

impl BowenBallSpec {
    pub fn new(center: TorusPoint, radius: f64, depth: usize) -> Self {
        Self {
            center,
            radius,
            depth,
        }
    }
}

/// Exact membership by forward iteration, stopping at the first violation.
pub fn bowen_ball_contains(system: &SystemSpec, spec: &BowenBallSpec, y: &TorusPoint) -> bool {
    let mut a = spec.center;
    let mut b = *y;
    for j in 0..spec.depth {
        if a.distance(&b) >= spec.radius {
            return false;
        }
        if j + 1 < spec.depth {
            a = system.step_forward(&a);
            b = system.step_forward(&b);
        }
    }
    true
}

/// Membership against a precomputed orbit of the center
/// (`center_orbit[j] = f^j(center)`, at least `depth` entries).
pub fn bowen_ball_contains_orbit(
    system: &SystemSpec,
    center_orbit: &[TorusPoint],
    radius: f64,
    depth: usize,
    y: &TorusPoint,
) -> bool {
    let mut b = *y;
    for (j, c) in center_orbit.iter().take(depth).enumerate() {
        if c.distance(&b) >= radius {
            return false;
        }
        if j + 1 < depth {
            b = system.step_forward(&b);
        }
    }
    true
}

/// Largest depth `m ≤ max_depth` such that `y ∈ B(center, ε, m)`.
pub fn bowen_depth(
    system: &SystemSpec,
    center_orbit: &[TorusPoint],
    radius: f64,
    max_depth: usize,
    y: &TorusPoint,
) -> usize {
    let mut b = *y;
    for (j, c) in center_orbit.iter().take(max_depth).enumerate() {
        if c.distance(&b) >= radius {
            return j;
        }
        if j + 1 < max_depth {
            b = system.step_forward(&b);
        }
    }
    max_depth.min(center_orbit.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::trig::TrigPolynomial;

    #[test]
    fn vacuous_and_center_membership() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let c = TorusPoint::new(&[0.3, 0.4]).unwrap();
        let far = TorusPoint::new(&[0.8, 0.9]).unwrap();
        assert!(bowen_ball_contains(
            &s,
            &BowenBallSpec::new(c, 0.01, 0),
            &far
        ));
        for n in 0..20 {
            assert!(bowen_ball_contains(&s, &BowenBallSpec::new(c, 1e-3, n), &c));
        }
    }

    #[test]
    fn depth_agrees_with_membership() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let c = TorusPoint::new(&[0.0, 0.0]).unwrap();
        let orbit: Vec<_> = (0..12).map(|j| s.apply(&c, j).unwrap()).collect();
        let y = TorusPoint::new(&[0.01, 0.003]).unwrap();
        let d = bowen_depth(&s, &orbit, 0.1, 12, &y);
        for n in 0..=12 {
            assert_eq!(
                bowen_ball_contains(&s, &BowenBallSpec::new(c, 0.1, n), &y),
                n <= d
            );
        }
    }
}
