//! Exact partition of the base torus into flow boxes of the unstable
//! direction over a stable transversal, and the product-structure scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::SystemSpec;

/// `{σ e_s + τ e_u : σ ∈ [s0, s1), 0 ≤ τ < height}` modulo `Z²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Rectangle {
    pub s0: f64,
    pub s1: f64,
    pub height: f64,
}

/// First-return decomposition of `T²` for the unstable flow over the
/// stable transversal `Σ = {σ e_s : σ ∈ [0, 1)}`.
///
/// A point `σ e_s + t e_u` returns to `Σ` when `t e_u + (σ − σ′) e_s` is an
/// integer vector `v`, i.e. at `t = u(v) > 0` with `σ′ = σ − s(v) ∈ [0, 1)`,
/// where `(u(v), s(v))` are the eigen-coordinates of `v`.  The return time is
/// piecewise constant in `σ`, so `T²` is a finite disjoint union of
/// parallelograms in eigen-coordinates.  Linear bases only.
pub fn first_return_partition(system: &SystemSpec) -> Result<Vec<Rectangle>> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "the flow-box partition is built for linear bases".into(),
        ));
    }
    const R: i64 = 8;
    let mut cands: Vec<(f64, f64)> = Vec::new();
    for a in -R..=R {
        for b in -R..=R {
            let [u, s] = system.eigen_coords([a as f64, b as f64]);
            if u > 1e-12 {
                cands.push((u, s));
            }
        }
    }
    let tau = |sigma: f64| -> Option<f64> {
        cands
            .iter()
            .filter(|(_, s)| sigma - s >= 0.0 && sigma - s < 1.0)
            .map(|(u, _)| *u)
            .fold(None, |m: Option<f64>, u| Some(m.map_or(u, |m| m.min(u))))
    };
    let mut cuts = vec![0.0, 1.0];
    for (_, s) in &cands {
        for c in [*s, s + 1.0] {
            if c > 0.0 && c < 1.0 {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut rects: Vec<Rectangle> = Vec::new();
    for w in cuts.windows(2) {
        let height = tau(0.5 * (w[0] + w[1])).ok_or_else(|| Error::Convergence {
            what: "first return",
            detail: format!("no return found near σ = {}", w[0]),
        })?;
        match rects.last_mut() {
            Some(last)
                if (last.height - height).abs() < 1e-12 && (last.s1 - w[0]).abs() < 1e-15 =>
            {
                last.s1 = w[1]
            }
            _ => rects.push(Rectangle {
                s0: w[0],
                s1: w[1],
                height,
            }),
        }
    }
    let area: f64 =
        rects.iter().map(|r| (r.s1 - r.s0) * r.height).sum::<f64>() * eigen_area(system);
    if (area - 1.0).abs() > 1e-9 {
        return Err(Error::Convergence {
            what: "first return",
            detail: format!("rectangles cover area {area}, not 1"),
        });
    }
    Ok(rects)
}

/// `|e_u ∧ e_s|`, the area of the unit parameter square.
pub fn eigen_area(system: &SystemSpec) -> f64 {
    let (u, s) = (system.e_u(), system.e_s());
    (u[0] * s[1] - u[1] * s[0]).abs()
}

/// Result of the numerical product-structure check.
#[derive(Clone, Debug, Serialize)]
pub struct ProductScaleReport {
    pub epsilon: f64,
    pub pairs: usize,
    /// Pairs whose local leaves meet more than once (or not at all).
    pub failures: usize,
    /// Smallest eigen-box half-size over nonzero integer vectors.
    pub lattice_gap: f64,
}

/// Checks `#W^u(x, 2ε) ∩ W^{cs}(y, 2ε) = 1` on `pairs` random pairs with
/// `d(x, y) < ε`: over a linear base the intersections are the integer
/// translates `v` with `|u(y − x + v)| < 2ε` and `|s(y − x + v)| < 2ε`.
pub fn validate_product_scale(
    system: &SystemSpec,
    epsilon: f64,
    pairs: usize,
    seed: u64,
) -> Result<ProductScaleReport> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "the product-structure check is implemented for linear bases".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut gap = f64::INFINITY;
    for a in -6i64..=6 {
        for b in -6i64..=6 {
            if a != 0 || b != 0 {
                let [u, s] = system.eigen_coords([a as f64, b as f64]);
                gap = gap.min(u.abs().max(s.abs()));
            }
        }
    }
    for _ in 0..pairs {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let ang = rng.gen::<f64>() * std::f64::consts::TAU;
        let rad = epsilon * rng.gen::<f64>();
        let d = [rad * ang.cos(), rad * ang.sin()];
        let y = [x[0] + d[0], x[1] + d[1]];
        let disp = system.displacement_eigen(x, y);
        let mut hits = 0;
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                let [u, s] = system.eigen_coords([a as f64, b as f64]);
                if (disp[0] + u).abs() < 2.0 * epsilon && (disp[1] + s).abs() < 2.0 * epsilon {
                    hits += 1;
                }
            }
        }
        if hits != 1 {
            failures += 1;
        }
    }
    Ok(ProductScaleReport {
        epsilon,
        pairs,
        failures,
        lattice_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TrigPolynomial;

    #[test]
    fn partition_tiles_the_torus() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let rects = first_return_partition(&s).unwrap();
        assert!(!rects.is_empty() && rects.len() <= 4, "{rects:?}");
        assert!((rects[0].s0).abs() < 1e-15 && (rects.last().unwrap().s1 - 1.0).abs() < 1e-15);
        // Every point has exactly one preimage in the rectangles.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            let mut count = 0;
            for a in -4i64..=4 {
                for b in -4i64..=4 {
                    let [u, sg] = s.eigen_coords([p[0] + a as f64, p[1] + b as f64]);
                    if rects
                        .iter()
                        .any(|r| sg >= r.s0 && sg < r.s1 && u >= 0.0 && u < r.height)
                    {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, 1, "{p:?}");
        }
    }

    #[test]
    fn product_scale() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let ok = validate_product_scale(&s, 0.1, 2000, 1).unwrap();
        assert_eq!(ok.failures, 0);
        assert!(ok.lattice_gap > 0.4);
        let bad = validate_product_scale(&s, 0.45, 2000, 1).unwrap();
        assert!(bad.failures > 0);
    }
}
