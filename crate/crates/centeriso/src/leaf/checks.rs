//! `ν^u = Δ^u μ^u`, the quasi-invariance residual, stable holonomy transport
//! with its Jacobian check, and the center-projection cross-check.

use serde::Serialize;

use super::measure::{leaf_measure, leaf_measure_with, LeafOptions, Quadrature};
use super::{Atom, WeightedLeafMeasure};
use crate::error::{Error, Result};
use crate::potentials::{
    delta_u, jac_s, product_depth, BaseFunction, PotentialSpec, PRODUCT_TOLERANCE,
};
use crate::torus::{leaf_point, wrapped_diff, LeafKind, LeafSegment, SystemSpec, TorusPoint};

/// Cell edges of a measure, in increasing parameter order.
fn edges(m: &WeightedLeafMeasure) -> Vec<f64> {
    let mut e: Vec<f64> = m.atoms.iter().map(|a| a.t - 0.5 * m.cell_width).collect();
    e.push(
        m.atoms
            .last()
            .map(|a| a.t + 0.5 * m.cell_width)
            .unwrap_or(0.0),
    );
    e
}

/// Resamples normalized cell masses onto target edges by linear
/// interpolation of the cumulative distribution.
fn resample(src_edges: &[f64], src_p: &[f64], dst_edges: &[f64]) -> Result<Vec<f64>> {
    let tol = 1e-9 * (src_edges[src_edges.len() - 1] - src_edges[0]).abs();
    if dst_edges[0] < src_edges[0] - tol
        || dst_edges[dst_edges.len() - 1] > src_edges[src_edges.len() - 1] + tol
    {
        return Err(Error::InvalidInput(
            "grid mismatch: target window is not inside the source window".into(),
        ));
    }
    let mut cdf = Vec::with_capacity(src_p.len() + 1);
    cdf.push(0.0);
    for p in src_p {
        cdf.push(cdf.last().unwrap() + p);
    }
    let eval = |t: f64| -> f64 {
        let i = src_edges.partition_point(|&e| e <= t);
        if i == 0 {
            return 0.0;
        }
        if i >= src_edges.len() {
            return cdf[cdf.len() - 1];
        }
        let (a, b) = (src_edges[i - 1], src_edges[i]);
        cdf[i - 1] + (cdf[i] - cdf[i - 1]) * ((t - a) / (b - a)).clamp(0.0, 1.0)
    };
    let vals: Vec<f64> = dst_edges.iter().map(|&t| eval(t)).collect();
    Ok(vals.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Total-variation distance between the normalized versions of two leaf
/// measures, after resampling the finer onto the coarser grid.
pub fn total_variation(a: &WeightedLeafMeasure, b: &WeightedLeafMeasure) -> Result<f64> {
    let (fine, coarse) = if a.cell_width <= b.cell_width {
        (a, b)
    } else {
        (b, a)
    };
    let p = resample(&edges(fine), &fine.probabilities(), &edges(coarse))?;
    let q = coarse.probabilities();
    let tot: f64 = p.iter().sum();
    Ok(0.5
        * p.iter()
            .zip(&q)
            .map(|(u, v)| (u / tot - v).abs())
            .sum::<f64>())
}

/// `log Δ^u_x(x + t e_u)` over a linear base for a fiber-independent
/// potential: `Σ_{k=1}^{N} [φ(A^{-k}x + μ_u^{-k} t e_u) − φ(A^{-k}x)]`.
pub(crate) fn log_delta_linear(
    system: &SystemSpec,
    f: &BaseFunction,
    x: [f64; 2],
    ts: &[f64],
    depth: usize,
) -> Vec<f64> {
    let orbit = system.exact_base_orbit(x, depth, true);
    let e = system.e_u();
    let base: Vec<f64> = orbit.iter().map(|&p| f.eval(p)).collect();
    let inv = 1.0 / system.mu_u();
    ts.iter()
        .map(|&t| {
            let mut s = t;
            let mut acc = 0.0;
            for k in 1..=depth {
                s *= inv;
                let p = orbit[k];
                acc += f.eval([p[0] + s * e[0], p[1] + s * e[1]]) - base[k];
            }
            acc
        })
        .collect()
}

/// Reweights every atom of `μ` (anchored at `x`) by `Δ^u_x(y_t)`; the result
/// is not renormalized.
pub fn nu_u(
    system: &SystemSpec,
    potential: &PotentialSpec,
    mu: &WeightedLeafMeasure,
    x: &TorusPoint,
) -> Result<WeightedLeafMeasure> {
    if mu.segment.kind != LeafKind::Unstable {
        return Err(Error::InvalidInput(
            "ν^u is defined on unstable segments".into(),
        ));
    }
    if mu.segment.anchor.distance(x) > 1e-12 {
        return Err(Error::InvalidInput(
            "the measure must be anchored at x".into(),
        ));
    }
    let r = mu.segment.half_width;
    let depth = product_depth(potential, system, r, PRODUCT_TOLERANCE);
    let ts: Vec<f64> = mu.atoms.iter().map(|a| a.t).collect();
    let logs: Vec<f64> = match (potential.base_function(), system.is_linear_base()) {
        (Some(f), true) => log_delta_linear(system, f, x.base(), &ts, depth),
        _ => ts
            .iter()
            .map(|&t| {
                let y = leaf_point(system, &mu.segment, t)?.point;
                Ok(delta_u(potential, system, x, &y, depth)?.log_value)
            })
            .collect::<Result<_>>()?,
    };
    let mut out = mu.clone();
    for (a, l) in out.atoms.iter_mut().zip(logs) {
        a.w *= l.exp();
    }
    out.mass = out.atoms.iter().map(|a| a.w).sum();
    Ok(out)
}

/// Result of the quasi-invariance check.
#[derive(Clone, Debug, Serialize)]
pub struct QuasiInvarianceReport {
    /// Total variation between `f⁻¹μ_{fx}` and `e^{P−φ}μ_x`, both normalized.
    pub tv: f64,
    /// `|log(f⁻¹μ_{fx}(W) / ∫_W e^{P−φ} dμ_x)|` from absolute point-quadrature
    /// masses; sensitive to the value of `P`, which the normalized distance
    /// cannot see.
    pub mass_defect: f64,
    pub pressure: f64,
    pub depth: usize,
    pub n_atoms: usize,
}

impl QuasiInvarianceReport {
    pub fn worst(&self) -> f64 {
        self.tv.max(self.mass_defect)
    }
}

/// Builds `μ_x` on `W^u(x, r/λ)` and `μ_{fx}` on `W^u(fx, r)` independently,
/// pulls the latter back by `f⁻¹` and compares it with `e^{P−φ}μ_x`.
pub fn quasi_invariance_residual(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    pressure: f64,
    r: f64,
    n: usize,
    n_atoms: usize,
) -> Result<QuasiInvarianceReport> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "the quasi-invariance residual is implemented for linear bases".into(),
        ));
    }
    let lam = system.lambda();
    let fx = system.step_forward(x);
    let (mx, _) = leaf_measure(system, potential, x, r / lam, n, n_atoms)?;
    let (mf, _) = leaf_measure(system, potential, &fx, r, n, n_atoms)?;
    let mu_u = system.mu_u();
    let phis: Vec<f64> = mx
        .atoms
        .iter()
        .map(|a| Ok(potential.evaluate(system, &leaf_point(system, &mx.segment, a.t)?.point)))
        .collect::<Result<_>>()?;
    // f⁻¹μ_{fx}: atoms t ↦ t/μ_u on the x-side window.
    let mut pulled: Vec<Atom> = mf
        .atoms
        .iter()
        .map(|a| Atom {
            t: a.t / mu_u,
            w: a.w,
        })
        .collect();
    if mu_u < 0.0 {
        pulled.reverse();
    }
    let pulled = WeightedLeafMeasure {
        segment: mx.segment.clone(),
        mass: pulled.iter().map(|a| a.w).sum(),
        atoms: pulled,
        cell_width: mf.cell_width / lam,
        log_scale: mf.log_scale,
        generation: mf.generation,
        pressure_trace: Vec::new(),
    };
    let mut reweighted = mx.clone();
    for (a, phi) in reweighted.atoms.iter_mut().zip(&phis) {
        a.w *= (pressure - phi).exp();
    }
    reweighted.mass = reweighted.atoms.iter().map(|a| a.w).sum();
    let tv = total_variation(&pulled, &reweighted)?;
    // Absolute masses from point quadrature at depth n.
    let opts = LeafOptions {
        quadrature: Quadrature::Point,
        cesaro: false,
        ..LeafOptions::default()
    };
    let (px, _) = leaf_measure_with(system, potential, x, r / lam, n, n_atoms, &opts)?;
    let (pf, _) = leaf_measure_with(system, potential, &fx, r, n, n_atoms, &opts)?;
    let lhs = pf.log_total();
    let rhs = {
        let m = px
            .atoms
            .iter()
            .zip(&phis)
            .map(|(a, phi)| a.w * (pressure - phi).exp())
            .sum::<f64>();
        m.ln() + px.log_scale
    };
    Ok(QuasiInvarianceReport {
        tv,
        mass_defect: (lhs - rhs).abs(),
        pressure,
        depth: n,
        n_atoms,
    })
}

/// Transports a measure on the unstable segment at `x` to the unstable
/// segment at `y ∈ W^s(x)` along stable holonomy.  Over a linear base the
/// base holonomy is the translation by `s·e_s` (same unstable parameter),
/// and the fiber follows the stable series; weights are preserved.
pub fn holonomy_transport_s(
    system: &SystemSpec,
    mu: &WeightedLeafMeasure,
    y: &TorusPoint,
) -> Result<WeightedLeafMeasure> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "explicit stable holonomy is implemented for linear bases".into(),
        ));
    }
    if mu.segment.kind != LeafKind::Unstable {
        return Err(Error::InvalidInput(
            "holonomy transport acts on unstable segments".into(),
        ));
    }
    let x = &mu.segment.anchor;
    let eig = system.displacement_eigen(x.base(), y.base());
    if eig[0].abs() > 1e-9 {
        return Err(Error::Locality(format!(
            "y is not on the stable leaf of x (unstable offset {:e})",
            eig[0]
        )));
    }
    let s = eig[1];
    if s.abs() > 0.25 {
        return Err(Error::Locality(format!(
            "stable distance {s} exceeds the locality radius 0.25"
        )));
    }
    if system.center_dim() > 0 {
        let seg = LeafSegment::new(system, *x, LeafKind::Stable, s.abs().max(1e-12))?;
        let expected = leaf_point(system, &seg, s)?.point;
        let off = (0..system.center_dim())
            .map(|i| wrapped_diff(y.fiber()[i], expected.fiber()[i]).abs())
            .fold(0.0, f64::max);
        if off > 1e-6 {
            return Err(Error::Locality(format!(
                "y is off the stable leaf of x in the center by {off:e}"
            )));
        }
    }
    let mut out = mu.clone();
    out.segment = LeafSegment::new(system, *y, LeafKind::Unstable, mu.segment.half_width)?;
    Ok(out)
}

/// Result of the holonomy Jacobian check.
#[derive(Clone, Debug, Serialize)]
pub struct HolonomyReport {
    pub stable_distance: f64,
    /// Sup over the middle 80% of `|measured / jac_s − 1|`.
    pub sup_rel_error: f64,
    /// Total variation between the transported and fresh normalized measures.
    pub tv_transported_vs_fresh: f64,
    pub compared: usize,
}

/// Compares the fresh section at `y = W^s(x) ∋ x + s e_s` with the section
/// at `x` transported by `h^s`: the Radon–Nikodym ratio per cell against
/// `Jac^s = Π_j e^{φ(f^j h^s z) − φ(f^j z)}`.
#[allow(clippy::too_many_arguments)]
pub fn holonomy_jacobian_check(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    s: f64,
    r: f64,
    n: usize,
    n_atoms: usize,
) -> Result<HolonomyReport> {
    let sseg = LeafSegment::new(system, *x, LeafKind::Stable, s.abs().max(1e-12))?;
    let y = leaf_point(system, &sseg, s)?.point;
    let opts = LeafOptions::section(LeafKind::Unstable);
    let (mx, _) = leaf_measure_with(system, potential, x, r, n, n_atoms, &opts)?;
    let (my, _) = leaf_measure_with(system, potential, &y, r, n, n_atoms, &opts)?;
    let moved = holonomy_transport_s(system, &mx, &y)?;
    let tv = total_variation(&moved, &my)?;
    let depth = product_depth(potential, system, s.abs(), PRODUCT_TOLERANCE).max(n);
    let useg = LeafSegment::new(system, *x, LeafKind::Unstable, r)?;
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (j, a) in mx.atoms.iter().enumerate() {
        if a.t.abs() > 0.8 * r {
            continue;
        }
        let measured = (my.log_weight(j) - moved.log_weight(j)).exp();
        let z = leaf_point(system, &useg, a.t)?.point;
        let hz = {
            let zs = LeafSegment::new(system, z, LeafKind::Stable, s.abs().max(1e-12))?;
            leaf_point(system, &zs, s)?.point
        };
        let jac = jac_s(potential, system, &z, &hz, depth)?.value;
        worst = worst.max((measured / jac - 1.0).abs());
        compared += 1;
    }
    Ok(HolonomyReport {
        stable_distance: s,
        sup_rel_error: worst,
        tv_transported_vs_fresh: tv,
        compared,
    })
}

/// Result of the center-projection cross-check.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionReport {
    /// Sup relative difference between the projected 2-D measure and the 1-D one.
    pub max_rel_diff: f64,
    /// Total variation of the center marginal from the uniform distribution.
    pub center_marginal_tv: f64,
}

/// Builds a (u × c) discretization of the center-unstable plaque at `x`
/// (point quadrature with full points, so any fiber dependence would show),
/// projects it onto the unstable parameter and compares with the 1-D leaf
/// measure; also reports how far the center marginal is from uniform.
pub fn center_projection_check(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    r: f64,
    n: usize,
    n_u: usize,
    n_c: usize,
) -> Result<ProjectionReport> {
    if system.center_dim() == 0 {
        return Err(Error::InvalidInput(
            "the projection check needs a nontrivial center".into(),
        ));
    }
    let opts = LeafOptions {
        quadrature: Quadrature::Point,
        cesaro: false,
        ..LeafOptions::default()
    };
    let (one_d, _) = leaf_measure_with(system, potential, x, r, n, n_u, &opts)?;
    let h = 2.0 * r / n_u as f64;
    let mut grid = vec![vec![0.0; n_u]; n_c];
    for (l, row) in grid.iter_mut().enumerate() {
        let mut fib = x.fiber().to_vec();
        fib[0] += (l as f64 + 0.5) / n_c as f64;
        let anchor = TorusPoint::from_base_fiber(x.base(), &fib);
        let seg = LeafSegment::new(system, anchor, LeafKind::Unstable, r)?;
        for (j, cell) in row.iter_mut().enumerate() {
            let t = -r + (j as f64 + 0.5) * h;
            let mut z = leaf_point(system, &seg, t)?.point;
            let mut acc = 0.0;
            for _ in 0..n {
                acc += potential.evaluate(system, &z) + system.log_lambda();
                z = system.step_forward(&z);
            }
            *cell = acc;
        }
    }
    let m = grid
        .iter()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<Vec<f64>> = grid
        .iter()
        .map(|row| row.iter().map(|v| (v - m).exp()).collect())
        .collect();
    let total: f64 = w.iter().flatten().sum();
    let proj: Vec<f64> = (0..n_u)
        .map(|j| w.iter().map(|row| row[j]).sum::<f64>() / total)
        .collect();
    let p1 = one_d.probabilities();
    let max_rel_diff = proj
        .iter()
        .zip(&p1)
        .map(|(a, b)| (a - b).abs() / b.max(1e-300))
        .fold(0.0, f64::max);
    let center_marginal_tv = 0.5
        * w.iter()
            .map(|row| (row.iter().sum::<f64>() / total - 1.0 / n_c as f64).abs())
            .sum::<f64>();
    Ok(ProjectionReport {
        max_rel_diff,
        center_marginal_tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;
    use crate::torus::TrigPolynomial;

    fn sys() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.5f64.sqrt()]).unwrap()
    }

    #[test]
    fn nu_u_identities() {
        let s = sys();
        let x = TorusPoint::new(&[0.3, 0.6, 0.1]).unwrap();
        let c = PotentialSpec::new(PotentialKind::Constant { value: 0.3 }, &s).unwrap();
        let (m, _) = leaf_measure(&s, &c, &x, 0.1, 10, 101).unwrap();
        let nu = nu_u(&s, &c, &m, &x).unwrap();
        for (a, b) in m.atoms.iter().zip(&nu.atoms) {
            assert_eq!(a.w, b.w);
        }
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
            &s,
        )
        .unwrap();
        let (m, _) = leaf_measure(&s, &p, &x, 0.1, 10, 101).unwrap();
        let nu = nu_u(&s, &p, &m, &x).unwrap();
        assert!((nu.atoms[50].w - m.atoms[50].w).abs() < 1e-15); // anchor atom at t = 0
                                                                 // ν^u_y = c(y,x)·ν^u_x: recompute anchored at another atom.
        let y = leaf_point(&s, &m.segment, m.atoms[70].t).unwrap().point;
        let ny: Vec<f64> = {
            let depth = product_depth(&p, &s, 0.9, PRODUCT_TOLERANCE);
            m.atoms
                .iter()
                .map(|a| {
                    let z = leaf_point(&s, &m.segment, a.t).unwrap().point;
                    a.w * delta_u(&p, &s, &y, &z, depth).unwrap().value
                })
                .collect()
        };
        let ratios: Vec<f64> = ny.iter().zip(&nu.atoms).map(|(a, b)| a / b.w).collect();
        let worst = ratios
            .iter()
            .map(|r| (r / ratios[0] - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-7, "{worst}");
    }

    #[test]
    fn quasi_invariance_degenerate_cases() {
        let s = sys();
        let x = TorusPoint::new(&[0.3, 0.6, 0.1]).unwrap();
        let srb = PotentialSpec::new(PotentialKind::Srb, &s).unwrap();
        let q = quasi_invariance_residual(&s, &srb, &x, 0.0, 0.1, 10, 2000).unwrap();
        assert!(q.tv < 1e-6 && q.mass_defect < 1e-6, "{q:?}");
        let c = PotentialSpec::new(PotentialKind::Constant { value: -0.2 }, &s).unwrap();
        let q = quasi_invariance_residual(&s, &c, &x, s.log_lambda() - 0.2, 0.1, 10, 2000).unwrap();
        assert!(q.tv < 1e-6 && q.mass_defect < 1e-6, "{q:?}");
    }

    #[test]
    fn holonomy_margulis_and_trig() {
        let s = sys();
        let x = TorusPoint::new(&[0.3, 0.6, 0.1]).unwrap();
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let h = holonomy_jacobian_check(&s, &zero, &x, 0.05, 0.1, 12, 400).unwrap();
        assert!(h.tv_transported_vs_fresh < 2e-2 && h.sup_rel_error < 1e-12);
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
            &s,
        )
        .unwrap();
        let h = holonomy_jacobian_check(&s, &p, &x, 0.05, 0.1, 20, 400).unwrap();
        assert!(h.sup_rel_error < 1e-2, "{h:?}");
    }

    #[test]
    fn projection_identity() {
        let s = sys();
        let x = TorusPoint::new(&[0.3, 0.6, 0.1]).unwrap();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
            &s,
        )
        .unwrap();
        let r = center_projection_check(&s, &p, &x, 0.1, 8, 100, 8).unwrap();
        assert!(
            r.max_rel_diff < 1e-8 && r.center_marginal_tv < 1e-8,
            "{r:?}"
        );
    }

    #[test]
    fn resampling_is_exact_on_aligned_grids() {
        let e = [0.0, 0.5, 1.0];
        let p = resample(&e, &[0.25, 0.75], &e).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(resample(&e, &[0.25, 0.75], &[-0.5, 1.0]).is_err());
    }
}
