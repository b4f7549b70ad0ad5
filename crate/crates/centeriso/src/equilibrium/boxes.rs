//! Dynamical boxes: an unstable family over a center-stable plaque, with
//! the leaf sections that give the local product form of the equilibrium
//! state,
//!
//! ```text
//! m^{W,B}(U) = ∫_W ν^u_w(U ∩ W^u(w)) dμ^{cs}(w),     ν^u_w = Δ^u_w · μ^u_w.
//! ```
//!
//! Over a linear base a box centered at `x` is the parameter rectangle
//! `x + σ e_s + τ e_u`, `|σ| ≤ a_s`, `|τ| ≤ a_u`, times the center torus.
//! Potentials are fiber independent, so the center conditionals are
//! Lebesgue and `μ^{cs}` is the stable section times Lebesgue on `T^c`.
//! All sections are plain depth-`n` absolute sections, so masses of
//! different boxes are directly comparable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf::checks::log_delta_linear;
use crate::leaf::{leaf_measure_with, LeafOptions};
use crate::potentials::{product_depth, BaseFunction, PotentialSpec, PRODUCT_TOLERANCE};
use crate::torus::leaf::{series_terms, stable_shift, unstable_shift};
use crate::torus::{wrap, LeafKind, LeafSegment, SystemSpec, TorusPoint};

/// Discretization of a box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxGrid {
    /// Cells of the center-stable plaque along `e_s`.
    pub n_s: usize,
    /// Cells of each unstable segment.
    pub n_u: usize,
    /// Depth of the leaf sections.
    pub depth: usize,
}

impl Default for BoxGrid {
    fn default() -> Self {
        Self {
            n_s: 32,
            n_u: 512,
            depth: 16,
        }
    }
}

/// A parameter rectangle in box coordinates: unstable interval, stable
/// interval and one interval per center coordinate (empty = whole circle).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRect {
    pub u: [f64; 2],
    pub s: [f64; 2],
    #[serde(default)]
    pub c: Vec<[f64; 2]>,
}

impl ParamRect {
    pub fn new(u: [f64; 2], s: [f64; 2]) -> Self {
        Self {
            u,
            s,
            c: Vec::new(),
        }
    }

    fn center_fraction(&self) -> Result<f64> {
        let mut f = 1.0;
        for iv in &self.c {
            let len = iv[1] - iv[0];
            if !(0.0..=1.0).contains(&len) {
                return Err(Error::InvalidInput(format!(
                    "center interval {iv:?} must have length in [0, 1]"
                )));
            }
            f *= len;
        }
        Ok(f)
    }
}

/// One dynamical box with its discretized sections.
#[derive(Clone, Debug, Serialize)]
pub struct DynamicalBox {
    pub center: TorusPoint,
    pub half_s: f64,
    pub half_u: f64,
    /// The unstable transversal `W^u(x, a_u)`.
    pub u_segment: LeafSegment,
    /// Stable parameters of the plaque cells (cell centers).
    pub sigma: Vec<f64>,
    /// Absolute log-masses of the stable section on the plaque cells.
    pub cs_log_weights: Vec<f64>,
    /// Absolute log-masses `log ν^u_{w_i}(W^u(w_i, a_u))` per plaque cell.
    pub row_log_mass: Vec<f64>,
    /// Per plaque cell, the cumulative normalized `ν^u` over the `n_u` cells
    /// (length `n_u + 1`, from 0 to 1).
    #[serde(skip)]
    pub row_cdf: Vec<Vec<f64>>,
    /// Cumulative normalized row masses `μ^s_i ν^u_i(W)` (length `n_s + 1`).
    #[serde(skip)]
    pub plaque_cdf: Vec<f64>,
    /// `log m^{W,B}(B)`.
    pub log_mass: f64,
    #[serde(skip)]
    terms_s: usize,
    #[serde(skip)]
    terms_u: usize,
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn cumulative(log_w: &[f64]) -> (Vec<f64>, f64) {
    let tot = log_sum_exp(log_w.iter().cloned());
    let mut cdf = Vec::with_capacity(log_w.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for l in log_w {
        acc += (l - tot).exp();
        cdf.push(acc);
    }
    let last = *cdf.last().unwrap();
    cdf.iter_mut().for_each(|c| *c /= last);
    (cdf, tot)
}

/// Fiber-independent base function of a potential, or an error explaining
/// the restriction.
pub(crate) fn base_only<'a>(
    system: &SystemSpec,
    potential: &'a PotentialSpec,
) -> Result<&'a BaseFunction> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "dynamical boxes are built over linear bases".into(),
        ));
    }
    potential.base_function().ok_or_else(|| {
        Error::Unsupported(
            "dynamical boxes need a potential that is constant along the center (base-only)".into(),
        )
    })
}

/// Absolute log-masses of the stable section on `W^s(x, a)` (`n` cells).
fn stable_section(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    a: f64,
    grid: &BoxGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = 2.0 * a / grid.n_s as f64;
    let ts: Vec<f64> = (0..grid.n_s).map(|j| -a + (j as f64 + 0.5) * h).collect();
    if let BaseFunction::Constant(v) = base_only(system, potential)? {
        let l = h.ln() + grid.depth as f64 * (v + system.log_lambda());
        return Ok((ts, vec![l; grid.n_s]));
    }
    let (m, _) = leaf_measure_with(
        system,
        potential,
        x,
        a,
        grid.depth,
        grid.n_s,
        &LeafOptions::section(LeafKind::Stable),
    )?;
    Ok((ts, (0..grid.n_s).map(|j| m.log_weight(j)).collect()))
}

/// Absolute log-masses of `ν^u_w = Δ^u_w μ^u_w` on `W^u(w, a)` (`n` cells).
pub(crate) fn unstable_row(
    system: &SystemSpec,
    potential: &PotentialSpec,
    w: &TorusPoint,
    a: f64,
    grid: &BoxGrid,
) -> Result<Vec<f64>> {
    let f = base_only(system, potential)?;
    let h = 2.0 * a / grid.n_u as f64;
    if let BaseFunction::Constant(v) = f {
        return Ok(vec![
            h.ln() + grid.depth as f64 * (v + system.log_lambda());
            grid.n_u
        ]);
    }
    let (m, _) = leaf_measure_with(
        system,
        potential,
        w,
        a,
        grid.depth,
        grid.n_u,
        &LeafOptions::section(LeafKind::Unstable),
    )?;
    let ts: Vec<f64> = m.atoms.iter().map(|at| at.t).collect();
    let depth = product_depth(potential, system, a, PRODUCT_TOLERANCE);
    let logd = log_delta_linear(system, f, w.base(), &ts, depth);
    Ok((0..grid.n_u).map(|j| m.log_weight(j) + logd[j]).collect())
}

impl DynamicalBox {
    /// Builds the box centered at `center` with half sides `a_s` (stable)
    /// and `a_u` (unstable).
    pub fn build(
        system: &SystemSpec,
        potential: &PotentialSpec,
        center: TorusPoint,
        a_s: f64,
        a_u: f64,
        grid: &BoxGrid,
    ) -> Result<Self> {
        base_only(system, potential)?;
        if grid.n_s < 1 || grid.n_u < 2 || grid.depth < 1 {
            return Err(Error::InvalidInput(
                "box grid needs n_s ≥ 1, n_u ≥ 2 and depth ≥ 1".into(),
            ));
        }
        let u_segment = LeafSegment::new(system, center, LeafKind::Unstable, a_u)?;
        LeafSegment::new(system, center, LeafKind::Stable, a_s)?;
        let (sigma, cs_log_weights) = stable_section(system, potential, &center, a_s, grid)?;
        let tol = system.guards().leaf_tolerance;
        let terms_s = series_terms(system, a_s, tol).max(8);
        let terms_u = series_terms(system, a_u, tol).max(8);
        let mut row_cdf = Vec::with_capacity(grid.n_s);
        let mut row_log_mass = Vec::with_capacity(grid.n_s);
        let mut first: Option<(Vec<f64>, f64)> = None;
        let constant = matches!(potential.base_function(), Some(BaseFunction::Constant(_)));
        for &s in &sigma {
            let (cdf, tot) = if constant && first.is_some() {
                first.clone().unwrap()
            } else {
                let w = Self::plaque_point(system, &center, s, terms_s);
                cumulative(&unstable_row(system, potential, &w, a_u, grid)?)
            };
            if constant && first.is_none() {
                first = Some((cdf.clone(), tot));
            }
            row_cdf.push(cdf);
            row_log_mass.push(tot);
        }
        let (plaque_cdf, log_mass) = cumulative(
            &cs_log_weights
                .iter()
                .zip(&row_log_mass)
                .map(|(a, b)| a + b)
                .collect::<Vec<_>>(),
        );
        Ok(Self {
            center,
            half_s: a_s,
            half_u: a_u,
            u_segment,
            sigma,
            cs_log_weights,
            row_log_mass,
            row_cdf,
            plaque_cdf,
            log_mass,
            terms_s,
            terms_u,
        })
    }

    fn plaque_point(system: &SystemSpec, center: &TorusPoint, s: f64, terms: usize) -> TorusPoint {
        let x = center.base();
        let e = system.e_s();
        let shift = stable_shift(system, x, s, terms);
        let fib: Vec<f64> = center
            .fiber()
            .iter()
            .zip(system.frequencies())
            .map(|(t, a)| t + a * shift)
            .collect();
        TorusPoint::from_base_fiber([x[0] + s * e[0], x[1] + s * e[1]], &fib)
    }

    /// The point with box coordinates `(σ, τ, c)`: slide by `σ` along the
    /// stable leaf of the center, by `c` along the center, then by `τ` along
    /// the unstable leaf.
    pub fn point(&self, system: &SystemSpec, sigma: f64, tau: f64, c: &[f64]) -> TorusPoint {
        let w = Self::plaque_point(system, &self.center, sigma, self.terms_s);
        let wb = w.base();
        let e = system.e_u();
        let shift = unstable_shift(system, wb, tau, self.terms_u);
        let fib: Vec<f64> = w
            .fiber()
            .iter()
            .zip(system.frequencies())
            .zip(c)
            .map(|((t, a), ci)| wrap(t + ci + a * shift))
            .collect();
        TorusPoint::from_base_fiber([wb[0] + tau * e[0], wb[1] + tau * e[1]], &fib)
    }

    pub fn n_s(&self) -> usize {
        self.sigma.len()
    }

    pub fn n_u(&self) -> usize {
        self.row_cdf.first().map_or(0, |r| r.len() - 1)
    }

    pub fn cell_s(&self) -> f64 {
        2.0 * self.half_s / self.n_s() as f64
    }

    pub fn cell_u(&self) -> f64 {
        2.0 * self.half_u / self.n_u() as f64
    }

    /// Normalized `ν^u` probabilities of row `i`.
    pub fn row_probabilities(&self, i: usize) -> Vec<f64> {
        self.row_cdf[i].windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Cumulative normalized `ν^u` of row `i` at unstable parameter `u`.
    pub fn row_cdf_at(&self, i: usize, u: f64) -> f64 {
        let cdf = &self.row_cdf[i];
        let n = cdf.len() - 1;
        let x = ((u + self.half_u) / self.cell_u()).clamp(0.0, n as f64);
        let j = (x.floor() as usize).min(n - 1);
        cdf[j] + (cdf[j + 1] - cdf[j]) * (x - j as f64)
    }

    /// `log m^{W,B}(U)` by quadrature over the plaque cells (fractional at
    /// the edges of `U`); `−∞` for empty rectangles.
    pub fn log_measure(&self, rect: &ParamRect) -> Result<f64> {
        let tol = 1e-12;
        if rect.u[0] < -self.half_u - tol
            || rect.u[1] > self.half_u + tol
            || rect.s[0] < -self.half_s - tol
            || rect.s[1] > self.half_s + tol
        {
            return Err(Error::InvalidInput(format!(
                "rectangle {rect:?} escapes the box"
            )));
        }
        let cf = rect.center_fraction()?;
        if rect.u[1] <= rect.u[0] || rect.s[1] <= rect.s[0] || cf == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let hs = self.cell_s();
        let terms = self.sigma.iter().enumerate().filter_map(|(i, &s)| {
            let lo = (s - 0.5 * hs).max(rect.s[0]);
            let hi = (s + 0.5 * hs).min(rect.s[1]);
            if hi <= lo {
                return None;
            }
            let frac_s = (hi - lo) / hs;
            let frac_u = self.row_cdf_at(i, rect.u[1]) - self.row_cdf_at(i, rect.u[0]);
            (frac_u > 0.0)
                .then(|| self.cs_log_weights[i] + self.row_log_mass[i] + (frac_s * frac_u).ln())
        });
        Ok(log_sum_exp(terms) + cf.ln())
    }

    /// The whole box as a parameter rectangle.
    pub fn full_rect(&self) -> ParamRect {
        ParamRect::new([-self.half_u, self.half_u], [-self.half_s, self.half_s])
    }
}

/// Result of the plaque-independence comparison.
#[derive(Clone, Debug, Serialize)]
pub struct PlaqueReport {
    pub log_mass_w: f64,
    /// Evaluation on the shifted plaque with `μ^{cs}` transported by `h^u`
    /// and weighted by `Jac^u`.
    pub rel_diff_transported: f64,
    /// Evaluation on the shifted plaque with a freshly computed stable section.
    pub rel_diff_fresh: f64,
}

/// Evaluates `m(U)` through the plaque `W′ = W + τ′ e_u` (with `τ′` rounded
/// to a whole number of unstable cells) and compares with the value through
/// the box's own plaque.
pub fn plaque_independence(
    system: &SystemSpec,
    potential: &PotentialSpec,
    bx: &DynamicalBox,
    rect: &ParamRect,
    shift: f64,
    grid: &BoxGrid,
) -> Result<PlaqueReport> {
    let f = base_only(system, potential)?;
    let reference = bx.log_measure(rect)?;
    let hu = bx.cell_u();
    let k = (shift / hu).round();
    let tau_shift = k * hu;
    let a_u = bx.half_u + tau_shift.abs();
    let n_u = (2.0 * a_u / hu).round() as usize;
    let wide = BoxGrid { n_u, ..*grid };
    let e_u = system.e_u();
    let hs = bx.cell_s();
    let mut transported = Vec::new();
    let mut rows = Vec::new();
    for (i, &s) in bx.sigma.iter().enumerate() {
        let lo = (s - 0.5 * hs).max(rect.s[0]);
        let hi = (s + 0.5 * hs).min(rect.s[1]);
        if hi <= lo {
            continue;
        }
        let w = DynamicalBox::plaque_point(system, &bx.center, s, bx.terms_s);
        let wb = w.base();
        let w2 = TorusPoint::from_base_fiber(
            [wb[0] + tau_shift * e_u[0], wb[1] + tau_shift * e_u[1]],
            w.fiber(),
        );
        // Jac^u of the unstable holonomy w → w′ equals Δ^u_w(w′).
        let depth = product_depth(
            potential,
            system,
            tau_shift.abs().max(1e-12),
            PRODUCT_TOLERANCE,
        );
        let jac = log_delta_linear(system, f, wb, &[tau_shift], depth)[0];
        let row = unstable_row(system, potential, &w2, a_u, &wide)?;
        let (cdf, tot) = cumulative(&row);
        let at = |u: f64| {
            let x = ((u - tau_shift + a_u) / hu).clamp(0.0, n_u as f64);
            let j = (x.floor() as usize).min(n_u - 1);
            cdf[j] + (cdf[j + 1] - cdf[j]) * (x - j as f64)
        };
        let frac_u = at(rect.u[1]) - at(rect.u[0]);
        if frac_u <= 0.0 {
            continue;
        }
        let base = tot + ((hi - lo) / hs * frac_u).ln();
        transported.push(bx.cs_log_weights[i] + jac + base);
        rows.push((i, base));
    }
    let cf = rect.center_fraction()?.ln();
    let via_transport = log_sum_exp(transported.into_iter()) + cf;
    let c2 = TorusPoint::from_base_fiber(
        [
            bx.center.base()[0] + tau_shift * e_u[0],
            bx.center.base()[1] + tau_shift * e_u[1],
        ],
        bx.center.fiber(),
    );
    let (_, fresh_cs) = stable_section(system, potential, &c2, bx.half_s, grid)?;
    let via_fresh = log_sum_exp(rows.iter().map(|&(i, b)| fresh_cs[i] + b)) + cf;
    Ok(PlaqueReport {
        log_mass_w: reference,
        rel_diff_transported: (via_transport - reference).exp_m1().abs(),
        rel_diff_fresh: (via_fresh - reference).exp_m1().abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;
    use crate::torus::TrigPolynomial;

    fn sys() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034]).unwrap()
    }

    #[test]
    fn fubini_and_empty() {
        let s = sys();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
            &s,
        )
        .unwrap();
        let grid = BoxGrid {
            n_s: 8,
            n_u: 256,
            depth: 14,
        };
        let b = DynamicalBox::build(
            &s,
            &p,
            TorusPoint::new(&[0.3, 0.2, 0.0]).unwrap(),
            0.05,
            0.05,
            &grid,
        )
        .unwrap();
        assert!((b.log_measure(&b.full_rect()).unwrap() - b.log_mass).abs() < 1e-12);
        assert_eq!(
            b.log_measure(&ParamRect::new([0.01, 0.01], [-0.05, 0.05]))
                .unwrap(),
            f64::NEG_INFINITY
        );
        assert!(b
            .log_measure(&ParamRect::new([0.0, 0.2], [-0.05, 0.05]))
            .is_err());
        // Halving the center interval halves the mass.
        let mut r = b.full_rect();
        r.c = vec![[0.25, 0.75]];
        assert!((b.log_measure(&r).unwrap() - b.log_mass - 0.5f64.ln()).abs() < 1e-12);
        // Additivity over a split of the unstable interval.
        let l = b
            .log_measure(&ParamRect::new([-0.05, 0.013], [-0.05, 0.05]))
            .unwrap()
            .exp();
        let rr = b
            .log_measure(&ParamRect::new([0.013, 0.05], [-0.05, 0.05]))
            .unwrap()
            .exp();
        assert!(((l + rr).ln() - b.log_mass).abs() < 1e-12);
    }

    #[test]
    fn box_points_follow_the_leaves() {
        let s = sys();
        let p = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let b = DynamicalBox::build(
            &s,
            &p,
            TorusPoint::new(&[0.3, 0.2, 0.4]).unwrap(),
            0.05,
            0.05,
            &BoxGrid::default(),
        )
        .unwrap();
        let y = b.point(&s, 0.03, 0.0, &[0.0]);
        let seg = LeafSegment::new(&s, b.center, LeafKind::Stable, 0.05).unwrap();
        assert!(
            crate::torus::leaf_point(&s, &seg, 0.03)
                .unwrap()
                .point
                .distance(&y)
                < 1e-9
        );
        let z = b.point(&s, 0.03, -0.02, &[0.0]);
        let useg = LeafSegment::new(&s, y, LeafKind::Unstable, 0.05).unwrap();
        assert!(
            crate::torus::leaf_point(&s, &useg, -0.02)
                .unwrap()
                .point
                .distance(&z)
                < 1e-9
        );
    }

    #[test]
    fn plaque_independence_trig() {
        let s = sys();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
            &s,
        )
        .unwrap();
        let grid = BoxGrid {
            n_s: 16,
            n_u: 512,
            depth: 16,
        };
        let b = DynamicalBox::build(
            &s,
            &p,
            TorusPoint::new(&[0.3, 0.2, 0.0]).unwrap(),
            0.05,
            0.05,
            &grid,
        )
        .unwrap();
        let rect = ParamRect::new([-0.02, 0.03], [-0.04, 0.01]);
        let r = plaque_independence(&s, &p, &b, &rect, 0.03, &grid).unwrap();
        assert!(
            r.rel_diff_transported < 1e-2 && r.rel_diff_fresh < 1e-2,
            "{r:?}"
        );
    }
}
