//! Strong stable and unstable leaves of the skew product.
//!
//! Over the linear base the leaves are explicit: the base moves along the
//! eigenline and the fiber is sheared by a convergent series of coupling
//! differences,
//!
//! ```text
//! W^u:  t ↦ (x + t e_u,  θ + α Σ_{n≥1} [k(A^{-n}(x + t e_u)) − k(A^{-n}x)])
//! W^s:  t ↦ (x + t e_s,  θ + α Σ_{n≥0} [k(A^n x) − k(A^n(x + t e_s))])
//! ```
//!
//! The signs are forced by the requirement that backward (resp. forward)
//! iterates of two points of the leaf approach each other in the fiber as
//! well.  Over a perturbed base the base leaf is obtained by a graph
//! transform and stored as an arclength-parametrised polyline.

use serde::{Deserialize, Serialize};

use super::point::{base_distance, wrap, wrapped_diff, TorusPoint};
use super::system::SystemSpec;
use crate::error::{Error, Result};

/// Which strong foliation a segment belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Unstable,
    Stable,
}

/// An arclength-parametrised piece of a strong leaf, `t ∈ [−r, r]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafSegment {
    pub anchor: TorusPoint,
    pub kind: LeafKind,
    pub half_width: f64,
    /// Number of terms kept in the fiber-shift series.
    pub truncation: usize,
    /// Tolerance the series tail must respect.
    pub tolerance: f64,
}

/// A leaf point together with the bound on the truncated series tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafPoint {
    pub point: TorusPoint,
    pub error: f64,
}

impl LeafSegment {
    /// Segment with the default truncation `⌈log(tol)/log(λ⁻¹)⌉` enlarged so
    /// that the tail bound holds over the whole segment.
    pub fn new(
        system: &SystemSpec,
        anchor: TorusPoint,
        kind: LeafKind,
        half_width: f64,
    ) -> Result<Self> {
        system.check_point(&anchor)?;
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        if half_width >= 0.5 {
            return Err(Error::InvalidInput(format!(
                "half width {half_width} must stay below 0.5 for injectivity"
            )));
        }
        let tol = system.guards().leaf_tolerance;
        let truncation = series_terms(system, half_width, tol).max(default_truncation(system, tol));
        Ok(Self {
            anchor,
            kind,
            half_width,
            truncation,
            tolerance: tol,
        })
    }

    /// Same segment with an explicit truncation depth.
    pub fn with_truncation(mut self, truncation: usize) -> Self {
        self.truncation = truncation;
        self
    }

    /// Evaluates the parametrisation at `t`.
    pub fn point(&self, system: &SystemSpec, t: f64) -> Result<LeafPoint> {
        leaf_point(system, self, t)
    }
}

/// `⌈log(tol)/log(λ⁻¹)⌉`.
pub fn default_truncation(system: &SystemSpec, tol: f64) -> usize {
    (tol.ln() / (1.0 / system.lambda()).ln()).ceil().max(1.0) as usize
}

/// Geometric tail bound `Lip(k)·|α|·λ^{-N}|t|/(λ−1)` of the fiber series.
pub fn series_tail(system: &SystemSpec, t: f64, terms: usize) -> f64 {
    if !system.has_fiber_shear() {
        return 0.0;
    }
    let lam = system.lambda();
    let amax = system
        .frequencies()
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()));
    system.coupling_lipschitz() * amax * lam.powi(-(terms as i32)) * t.abs() / (lam - 1.0)
}

/// Number of series terms needed for the tail bound at displacement `t`.
pub fn series_terms(system: &SystemSpec, t: f64, tol: f64) -> usize {
    if !system.has_fiber_shear() || t == 0.0 {
        return 1;
    }
    let lam = system.lambda();
    let amax = system
        .frequencies()
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()));
    let c = system.coupling_lipschitz() * amax * t.abs() / ((lam - 1.0) * tol);
    (c.ln() / lam.ln()).ceil().max(1.0) as usize
}

/// Fiber shear `Σ_{n=1}^{N} [k(A^{-n}x + μ_u^{-n} t e_u) − k(A^{-n}x)]` over the linear base.
pub fn unstable_shift(system: &SystemSpec, x: [f64; 2], t: f64, terms: usize) -> f64 {
    if !system.has_fiber_shear() || t == 0.0 {
        return 0.0;
    }
    let e = system.e_u();
    let mut b = x;
    let mut scale = t;
    let mut acc = 0.0;
    for _ in 0..terms {
        b = system.base_backward(b);
        scale /= system.mu_u();
        acc += system.k([b[0] + scale * e[0], b[1] + scale * e[1]]) - system.k(b);
    }
    acc
}

/// Fiber shear `Σ_{n=0}^{N-1} [k(A^n x) − k(A^n x + μ_s^n t e_s)]` over the linear base.
pub fn stable_shift(system: &SystemSpec, x: [f64; 2], t: f64, terms: usize) -> f64 {
    if !system.has_fiber_shear() || t == 0.0 {
        return 0.0;
    }
    let e = system.e_s();
    let mut b = x;
    let mut scale = t;
    let mut acc = 0.0;
    for _ in 0..terms {
        acc += system.k(b) - system.k([b[0] + scale * e[0], b[1] + scale * e[1]]);
        b = system.base_forward(b);
        scale *= system.mu_s();
    }
    acc
}

fn fiber_shifted(
    system: &SystemSpec,
    anchor: &TorusPoint,
    base: [f64; 2],
    shift: f64,
) -> TorusPoint {
    let c = system.center_dim();
    let mut fib = [0.0; 2];
    for ((f, th), a) in fib.iter_mut().zip(anchor.fiber()).zip(system.frequencies()) {
        *f = th + a * shift;
    }
    TorusPoint::from_base_fiber(base, &fib[..c])
}

/// Point at parameter `t` of a leaf segment.
pub fn leaf_point(system: &SystemSpec, seg: &LeafSegment, t: f64) -> Result<LeafPoint> {
    system.check_point(&seg.anchor)?;
    if t.abs() > seg.half_width * (1.0 + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "parameter {t} outside [−{r}, {r}]",
            r = seg.half_width
        )));
    }
    if t == 0.0 {
        return Ok(LeafPoint {
            point: seg.anchor,
            error: 0.0,
        });
    }
    let x = seg.anchor.base();
    if system.is_linear_base() {
        let tail = series_tail(system, t, seg.truncation);
        if tail > seg.tolerance {
            return Err(Error::Truncation {
                what: "leaf fiber series",
                bound: tail,
                tol: seg.tolerance,
            });
        }
        let (base, shift) = match seg.kind {
            LeafKind::Unstable => {
                let e = system.e_u();
                (
                    [x[0] + t * e[0], x[1] + t * e[1]],
                    unstable_shift(system, x, t, seg.truncation),
                )
            }
            LeafKind::Stable => {
                let e = system.e_s();
                (
                    [x[0] + t * e[0], x[1] + t * e[1]],
                    stable_shift(system, x, t, seg.truncation),
                )
            }
        };
        return Ok(LeafPoint {
            point: fiber_shifted(system, &seg.anchor, base, shift),
            error: tail,
        });
    }
    let poly = LeafPolyline::build(
        system,
        x,
        seg.kind,
        seg.half_width,
        system.guards().direction_steps,
        1.0e4,
    )?;
    let base = poly.point_at(t);
    let (shift, tail) = perturbed_shift(system, x, base, seg.kind, seg.truncation, t);
    if tail > seg.tolerance {
        return Err(Error::Truncation {
            what: "leaf fiber series",
            bound: tail,
            tol: seg.tolerance,
        });
    }
    Ok(LeafPoint {
        point: fiber_shifted(system, &seg.anchor, base, shift),
        error: tail,
    })
}

/// Points and unit base tangents at many parameters of one segment; for a
/// perturbed base the leaf polyline is built once and shared.
pub fn leaf_points_batch(
    system: &SystemSpec,
    seg: &LeafSegment,
    ts: &[f64],
) -> Result<(Vec<TorusPoint>, Vec<[f64; 2]>)> {
    system.check_point(&seg.anchor)?;
    if system.is_linear_base() {
        let dir = match seg.kind {
            LeafKind::Unstable => system.e_u(),
            LeafKind::Stable => system.e_s(),
        };
        let pts = ts
            .iter()
            .map(|&t| leaf_point(system, seg, t).map(|p| p.point))
            .collect::<Result<Vec<_>>>()?;
        return Ok((pts, vec![dir; ts.len()]));
    }
    let x = seg.anchor.base();
    let poly = LeafPolyline::build(
        system,
        x,
        seg.kind,
        seg.half_width,
        system.guards().direction_steps,
        1.0e4,
    )?;
    let mut pts = Vec::with_capacity(ts.len());
    let mut tang = Vec::with_capacity(ts.len());
    for &t in ts {
        if t.abs() > seg.half_width * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "parameter {t} outside [−{r}, {r}]",
                r = seg.half_width
            )));
        }
        let base = poly.point_at(t);
        let (shift, tail) = perturbed_shift(system, x, base, seg.kind, seg.truncation, t);
        if tail > seg.tolerance {
            return Err(Error::Truncation {
                what: "leaf fiber series",
                bound: tail,
                tol: seg.tolerance,
            });
        }
        pts.push(fiber_shifted(system, &seg.anchor, base, shift));
        tang.push(poly.tangent_at(t));
    }
    Ok((pts, tang))
}

fn perturbed_shift(
    system: &SystemSpec,
    x: [f64; 2],
    y: [f64; 2],
    kind: LeafKind,
    terms: usize,
    t: f64,
) -> (f64, f64) {
    if !system.has_fiber_shear() {
        return (0.0, 0.0);
    }
    let (mut a, mut b) = (x, y);
    let mut acc = 0.0;
    match kind {
        LeafKind::Unstable => {
            for _ in 0..terms {
                a = system.base_backward(a);
                b = system.base_backward(b);
                acc += system.k(b) - system.k(a);
            }
        }
        LeafKind::Stable => {
            for _ in 0..terms {
                acc += system.k(a) - system.k(b);
                a = system.base_forward(a);
                b = system.base_forward(b);
            }
        }
    }
    (acc, series_tail(system, t, terms))
}

/// An unstable or stable base leaf stored as a polyline in a lift of `T²`,
/// parametrised by arclength with the anchor at `t = 0`.
#[derive(Clone, Debug)]
pub struct LeafPolyline {
    pts: Vec<[f64; 2]>,
    arc: Vec<f64>,
}

impl LeafPolyline {
    /// Graph transform: a straight segment in the cone direction at
    /// `f^{∓N}x` is pushed `N` times by `f^{±1}`; after every step the
    /// polyline is re-anchored at the corresponding orbit point, trimmed to
    /// arclength `r` and resampled with `density` points per unit length.
    pub fn build(
        system: &SystemSpec,
        x: [f64; 2],
        kind: LeafKind,
        r: f64,
        steps: usize,
        density: f64,
    ) -> Result<Self> {
        let mut orbit = Vec::with_capacity(steps + 1);
        orbit.push(x);
        for _ in 0..steps {
            let last = *orbit.last().unwrap();
            orbit.push(match kind {
                LeafKind::Unstable => system.base_backward(last),
                LeafKind::Stable => system.base_forward(last),
            });
        }
        let dir = match kind {
            LeafKind::Unstable => system.e_u(),
            LeafKind::Stable => system.e_s(),
        };
        let n = ((2.0 * r * density).ceil() as usize).max(8) | 1;
        let start = orbit[steps];
        let mut pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let s = -r + 2.0 * r * i as f64 / (n - 1) as f64;
                [start[0] + s * dir[0], start[1] + s * dir[1]]
            })
            .collect();
        for step in (0..steps).rev() {
            let target = orbit[step];
            let mapped: Vec<[f64; 2]> = pts
                .iter()
                .map(|&p| match kind {
                    LeafKind::Unstable => system.base_forward_lift(p),
                    LeafKind::Stable => lift_backward(system, p),
                })
                .collect();
            pts = resample_around(&mapped, target, r, n)?;
        }
        let mid = n / 2;
        let shift = [
            wrapped_diff(x[0], pts[mid][0]),
            wrapped_diff(x[1], pts[mid][1]),
        ];
        if shift[0].hypot(shift[1]) > 1e-8 {
            return Err(Error::Convergence {
                what: "leaf graph transform",
                detail: format!("anchor miss {shift:?}"),
            });
        }
        let mut arc = vec![0.0; n];
        for i in 1..n {
            arc[i] = arc[i - 1] + (pts[i][0] - pts[i - 1][0]).hypot(pts[i][1] - pts[i - 1][1]);
        }
        let a0 = arc[mid];
        arc.iter_mut().for_each(|a| *a -= a0);
        // Put the anchor exactly on x.
        for p in pts.iter_mut() {
            p[0] += shift[0];
            p[1] += shift[1];
        }
        Ok(Self { pts, arc })
    }

    /// Base point at arclength `t` (reduced mod 1).
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let p = self.lift_at(t);
        [wrap(p[0]), wrap(p[1])]
    }

    /// Base point at arclength `t` in the lift.
    pub fn lift_at(&self, t: f64) -> [f64; 2] {
        let i = match self.arc.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.pts[i],
            Err(i) => i.clamp(1, self.arc.len() - 1),
        };
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        let w = ((t - a0) / (a1 - a0)).clamp(0.0, 1.0);
        let (p, q) = (self.pts[i - 1], self.pts[i]);
        [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])]
    }

    /// Unit tangent at arclength `t`.
    pub fn tangent_at(&self, t: f64) -> [f64; 2] {
        let i = match self.arc.binary_search_by(|a| a.partial_cmp(&t).unwrap()) {
            Ok(i) | Err(i) => i.clamp(1, self.arc.len() - 1),
        };
        let (p, q) = (self.pts[i - 1], self.pts[i]);
        let n = (q[0] - p[0]).hypot(q[1] - p[1]);
        [(q[0] - p[0]) / n, (q[1] - p[1]) / n]
    }

    /// Parameter range covered by the polyline.
    pub fn range(&self) -> (f64, f64) {
        (self.arc[0], *self.arc.last().unwrap())
    }
}

fn lift_backward(system: &SystemSpec, p: [f64; 2]) -> [f64; 2] {
    let w = system.base_backward(p);
    // Choose the lift of f⁻¹(p) continuous with the linear inverse image.
    let lin = system.a_inv_mul(p);
    [
        lin[0] + wrapped_diff(w[0], lin[0]),
        lin[1] + wrapped_diff(w[1], lin[1]),
    ]
}

/// Re-anchors a mapped polyline at the point nearest to `target`, trims it to
/// arclength `r` on both sides and resamples it uniformly with `n` points.
fn resample_around(
    mapped: &[[f64; 2]],
    target: [f64; 2],
    r: f64,
    n: usize,
) -> Result<Vec<[f64; 2]>> {
    let (mut best, mut best_d) = (0usize, f64::INFINITY);
    for (i, p) in mapped.iter().enumerate() {
        let d = base_distance([wrap(p[0]), wrap(p[1])], target);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    // Refine the anchor position on the adjacent edges.
    let mut arc = vec![0.0; mapped.len()];
    for i in 1..mapped.len() {
        arc[i] =
            arc[i - 1] + (mapped[i][0] - mapped[i - 1][0]).hypot(mapped[i][1] - mapped[i - 1][1]);
    }
    let lift_target = {
        let p = mapped[best];
        [
            p[0] + wrapped_diff(target[0], wrap(p[0])),
            p[1] + wrapped_diff(target[1], wrap(p[1])),
        ]
    };
    let mut anchor_arc = arc[best];
    let mut best_edge = f64::INFINITY;
    for i in [best.saturating_sub(1), best] {
        if i + 1 >= mapped.len() {
            continue;
        }
        let (p, q) = (mapped[i], mapped[i + 1]);
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let w = (((lift_target[0] - p[0]) * d[0] + (lift_target[1] - p[1]) * d[1]) / len2)
            .clamp(0.0, 1.0);
        let proj = [p[0] + w * d[0], p[1] + w * d[1]];
        let dist = (proj[0] - lift_target[0]).hypot(proj[1] - lift_target[1]);
        if dist < best_edge {
            best_edge = dist;
            anchor_arc = arc[i] + w * len2.sqrt();
        }
    }
    if best_edge > 1e-6 {
        return Err(Error::Convergence {
            what: "leaf graph transform",
            detail: format!("orbit point left the polyline (distance {best_edge:e})"),
        });
    }
    if anchor_arc - r < arc[0] - 1e-9 || anchor_arc + r > arc[arc.len() - 1] + 1e-9 {
        return Err(Error::Convergence {
            what: "leaf graph transform",
            detail: "polyline too short".into(),
        });
    }
    let mut out = Vec::with_capacity(n);
    let mut j = 1;
    for i in 0..n {
        let s = anchor_arc - r + 2.0 * r * i as f64 / (n - 1) as f64;
        while j + 1 < arc.len() && arc[j] < s {
            j += 1;
        }
        let (a0, a1) = (arc[j - 1], arc[j]);
        let w = if a1 > a0 {
            ((s - a0) / (a1 - a0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (p, q) = (mapped[j - 1], mapped[j]);
        let mut pt = [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])];
        if i == n / 2 {
            pt = lift_target;
        }
        out.push(pt);
    }
    // Keep the lift near the fundamental domain.
    let c = out[n / 2];
    let shift = [c[0].floor(), c[1].floor()];
    for p in out.iter_mut() {
        p[0] -= shift[0];
        p[1] -= shift[1];
    }
    Ok(out)
}

/// Unit base direction of `E^u` at a base point.
pub fn unstable_base_direction(system: &SystemSpec, x: [f64; 2]) -> Result<[f64; 2]> {
    if system.is_linear_base() {
        return Ok(system.e_u());
    }
    Ok(power_iteration(
        system,
        x,
        LeafKind::Unstable,
        system.guards().direction_steps,
    )?
    .0)
}

/// Unit base direction of `E^s` at a base point.
pub fn stable_base_direction(system: &SystemSpec, x: [f64; 2]) -> Result<[f64; 2]> {
    if system.is_linear_base() {
        return Ok(system.e_s());
    }
    Ok(power_iteration(system, x, LeafKind::Stable, system.guards().direction_steps)?.0)
}

/// `log |Df(x)|_{E^u}|` measured in base arclength.
pub fn log_unstable_jacobian(system: &SystemSpec, x: [f64; 2]) -> Result<f64> {
    if system.is_linear_base() {
        return Ok(system.log_lambda());
    }
    let v = unstable_base_direction(system, x)?;
    let j = system.base_jacobian(x);
    let w = [
        j[0][0] * v[0] + j[0][1] * v[1],
        j[1][0] * v[0] + j[1][1] * v[1],
    ];
    Ok(w[0].hypot(w[1]).ln())
}

/// Per-step data `(orbit point, unit direction, growth)` of a power iteration.
type DirectionSteps = Vec<([f64; 2], [f64; 2], f64)>;

/// Pushes a generic vector along the orbit ending at `x` (backward orbit for
/// unstable, forward orbit for stable).  Returns the final unit direction and
/// the per-step data `(orbit point, unit direction, growth)` from far to near.
fn power_iteration(
    system: &SystemSpec,
    x: [f64; 2],
    kind: LeafKind,
    steps: usize,
) -> Result<([f64; 2], DirectionSteps)> {
    let run = |n: usize| -> ([f64; 2], DirectionSteps) {
        let mut orbit = vec![x];
        for _ in 0..n {
            let l = *orbit.last().unwrap();
            orbit.push(match kind {
                LeafKind::Unstable => system.base_backward(l),
                LeafKind::Stable => system.base_forward(l),
            });
        }
        let e = match kind {
            LeafKind::Unstable => system.e_u(),
            LeafKind::Stable => system.e_s(),
        };
        let o = match kind {
            LeafKind::Unstable => system.e_s(),
            LeafKind::Stable => system.e_u(),
        };
        let mut v = [e[0] + 0.3 * o[0], e[1] + 0.3 * o[1]];
        let nv = v[0].hypot(v[1]);
        v = [v[0] / nv, v[1] / nv];
        let mut data = Vec::with_capacity(n);
        for i in (1..=n).rev() {
            let p = orbit[i];
            let w = match kind {
                LeafKind::Unstable => {
                    let j = system.base_jacobian(p);
                    [
                        j[0][0] * v[0] + j[0][1] * v[1],
                        j[1][0] * v[0] + j[1][1] * v[1],
                    ]
                }
                LeafKind::Stable => {
                    let q = orbit[i - 1];
                    let j = system.base_jacobian(q);
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    [
                        (j[1][1] * v[0] - j[0][1] * v[1]) / det,
                        (-j[1][0] * v[0] + j[0][0] * v[1]) / det,
                    ]
                }
            };
            let g = w[0].hypot(w[1]);
            data.push((p, v, g));
            v = [w[0] / g, w[1] / g];
        }
        (v, data)
    };
    let (v1, data) = run(steps);
    let (v2, _) = run(steps + 5);
    let angle = (v1[0] * v2[1] - v1[1] * v2[0]).abs();
    if angle > 1e-9 {
        return Err(Error::Convergence {
            what: "invariant direction power iteration",
            detail: format!(
                "angle change {angle:e} between {steps} and {} steps",
                steps + 5
            ),
        });
    }
    Ok((v1, data))
}

/// Unit vector spanning `E^u` at `x` in `R^d`: the base unstable direction
/// together with the derivative of the fiber shear along the leaf.
pub fn unstable_direction(system: &SystemSpec, x: &TorusPoint) -> Result<Vec<f64>> {
    system.check_point(x)?;
    let b = x.base();
    let c = system.center_dim();
    let (base, dshift) = if system.is_linear_base() {
        let e = system.e_u();
        let mut d = 0.0;
        if system.has_fiber_shear() {
            let terms = series_terms(system, 1.0, 1e-14);
            let mut p = b;
            let mut scale = 1.0;
            for _ in 0..terms {
                p = system.base_backward(p);
                scale /= system.mu_u();
                let g = system.k_gradient(p);
                d += scale * (g[0] * e[0] + g[1] * e[1]);
            }
        }
        (e, d)
    } else {
        let (v, data) = power_iteration(
            system,
            b,
            LeafKind::Unstable,
            system.guards().direction_steps,
        )?;
        let mut d = 0.0;
        if system.has_fiber_shear() {
            // Walk back from x: the tangent vector at x_{-n} that maps to v.
            let mut scale = 1.0;
            for (p, dir, g) in data.iter().rev() {
                scale /= g;
                let gr = system.k_gradient(*p);
                d += scale * (gr[0] * dir[0] + gr[1] * dir[1]);
            }
        }
        (v, d)
    };
    let mut out = vec![base[0], base[1]];
    for i in 0..c {
        out.push(system.frequencies()[i] * dshift);
    }
    let n = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::system::{BasePerturbation, SystemConfig};
    use crate::torus::trig::TrigPolynomial;

    fn sheared() -> SystemSpec {
        SystemSpec::cat(
            TrigPolynomial::cosine(vec![1, 0], 1.0),
            vec![0.618_033_988_7, 0.381_966_011_3],
        )
        .unwrap()
    }

    #[test]
    fn zero_coupling_leaf_is_straight() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![0.3]).unwrap();
        let x = TorusPoint::new(&[0.2, 0.3, 0.4]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.3).unwrap();
        let p = leaf_point(&s, &seg, 0.2).unwrap().point;
        let e = s.e_u();
        assert!((p.coords()[0] - wrap(0.2 + 0.2 * e[0])).abs() < 1e-15);
        assert_eq!(p.fiber(), x.fiber());
        assert_eq!(leaf_point(&s, &seg, 0.0).unwrap().point, x);
    }

    /// Distances `d(f^{∓n}y, f^{∓n}x)` for `n = 0..=depth`.
    fn orbit_distances(
        s: &SystemSpec,
        x: &TorusPoint,
        y: &TorusPoint,
        depth: i64,
        sign: i64,
    ) -> Vec<f64> {
        (0..=depth)
            .map(|n| {
                s.apply(y, sign * n)
                    .unwrap()
                    .distance(&s.apply(x, sign * n).unwrap())
            })
            .collect()
    }

    #[test]
    fn unstable_leaf_contracts_backward_in_fiber_too() {
        let s = sheared();
        let x = TorusPoint::new(&[0.13, 0.71, 0.2, 0.9]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.25).unwrap();
        let y = leaf_point(&s, &seg, 0.2).unwrap().point;
        let d = orbit_distances(&s, &x, &y, 12, -1);
        // d_n ≤ C λ^{-n}|t| with C bounded by the shear estimate √(1 + |α|²(Lip k/(λ−1))²).
        let amax: f64 = s.frequencies().iter().map(|a| a * a).sum::<f64>().sqrt();
        let bound = (1.0 + (amax * s.coupling_lipschitz() / (s.lambda() - 1.0)).powi(2)).sqrt();
        for (n, dn) in d.iter().enumerate() {
            assert!(
                *dn <= s.lambda().powi(-(n as i32)) * 0.2 * bound,
                "n = {n}: {dn}"
            );
        }
        assert!(d[12] < 1e-5);
    }

    #[test]
    fn weak_shear_contraction_constant_near_one() {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 0.02), vec![0.6, 0.4]).unwrap();
        let x = TorusPoint::new(&[0.13, 0.71, 0.2, 0.9]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.25).unwrap();
        let y = leaf_point(&s, &seg, 0.2).unwrap().point;
        let d = orbit_distances(&s, &x, &y, 8, -1);
        assert!(d[8] < s.lambda().powi(-8) * 0.2 * 1.01, "distance {}", d[8]);
    }

    #[test]
    fn stable_leaf_contracts_forward() {
        let s = sheared();
        let x = TorusPoint::new(&[0.13, 0.71, 0.2, 0.9]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Stable, 0.25).unwrap();
        let y = leaf_point(&s, &seg, -0.2).unwrap().point;
        let d = orbit_distances(&s, &x, &y, 12, 1);
        let amax: f64 = s.frequencies().iter().map(|a| a * a).sum::<f64>().sqrt();
        let bound = (1.0 + (amax * s.coupling_lipschitz() / (s.lambda() - 1.0)).powi(2)).sqrt();
        for (n, dn) in d.iter().enumerate() {
            assert!(
                *dn <= s.lambda().powi(-(n as i32)) * 0.2 * bound * s.lambda(),
                "n = {n}: {dn}"
            );
        }
        assert!(d[12] < 1e-5);
    }

    #[test]
    fn short_truncation_is_reported() {
        let s = sheared();
        let x = TorusPoint::new(&[0.13, 0.71, 0.2, 0.9]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.25)
            .unwrap()
            .with_truncation(3);
        assert!(matches!(
            leaf_point(&s, &seg, 0.2),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn unstable_direction_examples() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![0.3, 0.5]).unwrap();
        let v = unstable_direction(&s, &TorusPoint::new(&[0.1, 0.2, 0.3, 0.4]).unwrap()).unwrap();
        assert!((v[0] - s.e_u()[0]).abs() < 1e-15 && v[2] == 0.0 && v[3] == 0.0);
    }

    #[test]
    fn unstable_direction_is_tangent_to_leaf() {
        let s = sheared();
        let x = TorusPoint::new(&[0.13, 0.71, 0.2, 0.9]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.25).unwrap();
        let h = 1e-6;
        let p = leaf_point(&s, &seg, h).unwrap().point;
        let m = leaf_point(&s, &seg, -h).unwrap().point;
        let mut fd: Vec<f64> = p
            .coords()
            .iter()
            .zip(m.coords())
            .map(|(a, b)| wrapped_diff(*a, *b) / (2.0 * h))
            .collect();
        let n = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        fd.iter_mut().for_each(|v| *v /= n);
        let v = unstable_direction(&s, &x).unwrap();
        for (a, b) in fd.iter().zip(&v) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    fn perturbed() -> SystemSpec {
        let pert = BasePerturbation {
            p1: TrigPolynomial::cosine(vec![0, 1], 1.0),
            p2: TrigPolynomial::cosine(vec![1, 1], 0.5),
            amplitude: 0.01,
        };
        SystemSpec::new(SystemConfig {
            perturbation: Some(pert),
            ..SystemConfig::cat(TrigPolynomial::zero(), vec![])
        })
        .unwrap()
    }

    #[test]
    fn perturbed_direction_is_invariant() {
        let s = perturbed();
        let x = [0.37, 0.61];
        let v = unstable_base_direction(&s, x).unwrap();
        let j = s.base_jacobian(x);
        let w = [
            j[0][0] * v[0] + j[0][1] * v[1],
            j[1][0] * v[0] + j[1][1] * v[1],
        ];
        let lam = w[0].hypot(w[1]);
        let vf = unstable_base_direction(&s, s.base_forward(x)).unwrap();
        let res = ((w[0] - lam * vf[0]).powi(2) + (w[1] - lam * vf[1]).powi(2)).sqrt();
        assert!(res < 1e-6, "residual {res}");
    }

    #[test]
    fn perturbed_leaf_contracts_backward() {
        let s = perturbed();
        let x = TorusPoint::new(&[0.37, 0.61]).unwrap();
        let seg = LeafSegment::new(&s, x, LeafKind::Unstable, 0.2).unwrap();
        let y = leaf_point(&s, &seg, 0.15).unwrap().point;
        let mut a = x;
        let mut b = y;
        let mut prev = a.distance(&b);
        for _ in 0..8 {
            a = s.step_backward(&a);
            b = s.step_backward(&b);
            let d = a.distance(&b);
            assert!(d < prev / 1.5, "no contraction: {prev} -> {d}");
            prev = d;
        }
    }
}
