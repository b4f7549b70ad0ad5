//! Holonomy products `Δ^u`, `Jac^s` and `Jac^u`.
//!
//! All three are products of potential ratios along two orbits that converge
//! exponentially (backward for unstable pairs, forward for stable pairs).
//! Over a linear base the second orbit is carried as an explicit
//! displacement from the first (`μ^{∓j}` times the eigen-displacement in the
//! base, plus a fiber displacement updated by the coupling), so rounding in
//! the chaotic direction never pollutes the tiny differences.  The truncation
//! depth is controlled by the geometric Hölder tail
//! `C_φ (λ^{-θ})^{N+1} / (1 − λ^{-θ}) · d^θ`.

use serde::Serialize;

use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::torus::{wrapped_diff, SystemSpec, TorusPoint};

/// Default bound on the log-scale truncation error (relative error of the product).
pub const PRODUCT_TOLERANCE: f64 = 1e-8;

/// A truncated product with its tail bound.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProductValue {
    pub value: f64,
    pub log_value: f64,
    /// Bound on `|log(true value) − log_value|`.
    pub tail_bound: f64,
    pub depth: usize,
}

/// Leaf-to-flat distance distortion `√(1 + (|α| Lip(k)/(λ − 1))²)`.
fn leaf_constant(system: &SystemSpec) -> f64 {
    let amax = system
        .frequencies()
        .iter()
        .fold(0.0f64, |m, a| m.max(a.abs()));
    let s = amax * system.coupling_lipschitz() / (system.lambda() - 1.0);
    (1.0 + s * s).sqrt()
}

fn tail(potential: &PotentialSpec, system: &SystemSpec, dist: f64, depth: usize) -> f64 {
    if potential.holder_constant == 0.0 || dist == 0.0 {
        return 0.0;
    }
    let th = potential.holder_exponent;
    let q = system.lambda().powf(-th);
    potential.holder_constant * q.powi(depth as i32 + 1) / (1.0 - q)
        * (leaf_constant(system) * dist).powf(th)
}

/// Smallest depth whose tail bound is below `tol` for pairs at distance `dist`.
pub fn product_depth(potential: &PotentialSpec, system: &SystemSpec, dist: f64, tol: f64) -> usize {
    let mut n = 0;
    while tail(potential, system, dist, n) > tol && n < 10_000 {
        n += 1;
    }
    n
}

fn displacement(a: &TorusPoint, b: &TorusPoint) -> ([f64; 2], [f64; 2]) {
    let db = [
        wrapped_diff(b.base()[0], a.base()[0]),
        wrapped_diff(b.base()[1], a.base()[1]),
    ];
    let mut df = [0.0; 2];
    for (d, (y, x)) in df.iter_mut().zip(b.fiber().iter().zip(a.fiber())) {
        *d = wrapped_diff(*y, *x);
    }
    (db, df)
}

fn finish(
    potential: &PotentialSpec,
    system: &SystemSpec,
    log: f64,
    dist: f64,
    depth: usize,
    tol: f64,
    what: &'static str,
) -> Result<ProductValue> {
    let bound = tail(potential, system, dist, depth);
    if bound > tol {
        return Err(Error::Truncation { what, bound, tol });
    }
    Ok(ProductValue {
        value: log.exp(),
        log_value: log,
        tail_bound: bound,
        depth,
    })
}

/// Direction of the orbit pair and the index range of the product.
#[derive(Clone, Copy, PartialEq)]
enum Dir {
    Backward,
    Forward,
}

/// `Σ_j [φ(z′_j) − φ(z_j)]` with `z_j = f^{∓j} z`, over `j ∈ 1..=N` (backward)
/// or `j ∈ 0..=N` (forward).
fn log_product(
    potential: &PotentialSpec,
    system: &SystemSpec,
    z: &TorusPoint,
    z2: &TorusPoint,
    depth: usize,
    dir: Dir,
) -> Result<(f64, f64)> {
    system.check_point(z)?;
    system.check_point(z2)?;
    let (db, df) = displacement(z, z2);
    let dist = z.distance(z2);
    if dist == 0.0 {
        return Ok((0.0, 0.0));
    }
    let c = system.center_dim();
    let alpha = system.frequencies();
    let leaf = leaf_constant(system);
    if system.is_linear_base() {
        let eig = system.eigen_coords(db);
        let (along, across, e, mu) = match dir {
            Dir::Backward => (eig[0], eig[1], system.e_u(), 1.0 / system.mu_u()),
            Dir::Forward => (eig[1], eig[0], system.e_s(), system.mu_s()),
        };
        if across.abs() > 1e-9 + 1e-6 * along.abs() {
            return Err(Error::Locality(format!(
                "points are not on a common {} leaf (transverse offset {across:e})",
                if dir == Dir::Backward {
                    "unstable"
                } else {
                    "stable"
                }
            )));
        }
        let mut x = *z;
        let mut fd = df;
        let mut scale = along;
        let mut acc = 0.0;
        let add = |x: &TorusPoint, scale: f64, fd: &[f64; 2]| {
            let b = x.base();
            let b2 = [b[0] + scale * e[0], b[1] + scale * e[1]];
            let mut fib = [0.0; 2];
            for i in 0..c {
                fib[i] = x.fiber()[i] + fd[i];
            }
            let y = TorusPoint::from_base_fiber(b2, &fib[..c]);
            potential.evaluate(system, &y) - potential.evaluate(system, x)
        };
        match dir {
            Dir::Backward => {
                for _ in 0..depth {
                    x = system.step_backward(&x);
                    scale *= mu;
                    let b = x.base();
                    let dk = system.k([b[0] + scale * e[0], b[1] + scale * e[1]]) - system.k(b);
                    for i in 0..c {
                        fd[i] -= alpha[i] * dk;
                    }
                    acc += add(&x, scale, &fd);
                }
            }
            Dir::Forward => {
                for _ in 0..=depth {
                    acc += add(&x, scale, &fd);
                    let b = x.base();
                    let dk = system.k([b[0] + scale * e[0], b[1] + scale * e[1]]) - system.k(b);
                    for i in 0..c {
                        fd[i] += alpha[i] * dk;
                    }
                    x = system.step_forward(&x);
                    scale *= mu;
                }
            }
        }
        let residual = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let allowed = 1e-7 + 4.0 * leaf * dist * system.lambda().powi(-(depth as i32)).max(0.0);
        if residual > allowed.max(2.0 * leaf * dist * system.lambda().powi(-(depth as i32))) {
            return Err(Error::Locality(format!(
                "fiber displacement {residual:e} does not contract: points are not on a common leaf"
            )));
        }
        return Ok((acc, dist));
    }
    // Perturbed base: iterate both points.
    let (mut a, mut b) = (*z, *z2);
    let mut acc = 0.0;
    match dir {
        Dir::Backward => {
            for _ in 0..depth {
                a = system.step_backward(&a);
                b = system.step_backward(&b);
                acc += potential.evaluate(system, &b) - potential.evaluate(system, &a);
            }
        }
        Dir::Forward => {
            for j in 0..=depth {
                acc += potential.evaluate(system, &b) - potential.evaluate(system, &a);
                if j < depth {
                    a = system.step_forward(&a);
                    b = system.step_forward(&b);
                }
            }
        }
    }
    if depth > 0 && a.distance(&b) > dist * leaf + 1e-9 {
        return Err(Error::Locality(
            "orbit distances fail to contract: points are not on a common leaf".into(),
        ));
    }
    Ok((acc, dist))
}

/// `Δ^u_x(y) = Π_{k=1}^{N} e^{φ(f^{-k}y) − φ(f^{-k}x)}` for `y` on the unstable leaf of `x`.
pub fn delta_u(
    potential: &PotentialSpec,
    system: &SystemSpec,
    x: &TorusPoint,
    y: &TorusPoint,
    depth: usize,
) -> Result<ProductValue> {
    delta_u_with_tol(potential, system, x, y, depth, PRODUCT_TOLERANCE)
}

pub fn delta_u_with_tol(
    potential: &PotentialSpec,
    system: &SystemSpec,
    x: &TorusPoint,
    y: &TorusPoint,
    depth: usize,
    tol: f64,
) -> Result<ProductValue> {
    let (log, dist) = log_product(potential, system, x, y, depth, Dir::Backward)?;
    finish(potential, system, log, dist, depth, tol, "unstable product")
}

/// `Jac^u(z) = Π_{j=1}^{N} e^{φ(f^{-j}z′) − φ(f^{-j}z)}` for `z′ = h^u(z)`.
pub fn jac_u(
    potential: &PotentialSpec,
    system: &SystemSpec,
    z: &TorusPoint,
    z2: &TorusPoint,
    depth: usize,
) -> Result<ProductValue> {
    let (log, dist) = log_product(potential, system, z, z2, depth, Dir::Backward)?;
    finish(
        potential,
        system,
        log,
        dist,
        depth,
        PRODUCT_TOLERANCE,
        "unstable holonomy Jacobian",
    )
}

/// `Jac^s(z) = Π_{j=0}^{N} e^{φ(f^j z′) − φ(f^j z)}` for `z′ = h^s(z)`.
pub fn jac_s(
    potential: &PotentialSpec,
    system: &SystemSpec,
    z: &TorusPoint,
    z2: &TorusPoint,
    depth: usize,
) -> Result<ProductValue> {
    jac_s_with_tol(potential, system, z, z2, depth, PRODUCT_TOLERANCE)
}

pub fn jac_s_with_tol(
    potential: &PotentialSpec,
    system: &SystemSpec,
    z: &TorusPoint,
    z2: &TorusPoint,
    depth: usize,
    tol: f64,
) -> Result<ProductValue> {
    let (log, dist) = log_product(potential, system, z, z2, depth, Dir::Forward)?;
    finish(
        potential,
        system,
        log,
        dist,
        depth,
        tol,
        "stable holonomy Jacobian",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;
    use crate::torus::{leaf_point, LeafKind, LeafSegment, TrigPolynomial};

    fn setup() -> (SystemSpec, PotentialSpec) {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.37]).unwrap();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 1], 0.3)),
            &s,
        )
        .unwrap();
        (s, p)
    }

    fn on_leaf(s: &SystemSpec, x: &TorusPoint, kind: LeafKind, t: f64) -> TorusPoint {
        let seg = LeafSegment::new(s, *x, kind, 0.2).unwrap();
        leaf_point(s, &seg, t).unwrap().point
    }

    #[test]
    fn identities() {
        let (s, p) = setup();
        let x = TorusPoint::new(&[0.21, 0.63, 0.4]).unwrap();
        let n = product_depth(&p, &s, 0.2, PRODUCT_TOLERANCE);
        assert!((delta_u(&p, &s, &x, &x, n).unwrap().value - 1.0).abs() < 1e-15);
        let y = on_leaf(&s, &x, LeafKind::Unstable, 0.08);
        let z = on_leaf(&s, &x, LeafKind::Unstable, 0.15);
        let dxy = delta_u(&p, &s, &x, &y, n).unwrap().value;
        let dyx = delta_u(&p, &s, &y, &x, n).unwrap().value;
        assert!((dxy * dyx - 1.0).abs() < 1e-10);
        let dyz = delta_u(&p, &s, &y, &z, n).unwrap().value;
        let dxz = delta_u(&p, &s, &x, &z, n).unwrap().value;
        assert!((dxy * dyz - dxz).abs() < 1e-9);
        // constant potential
        let c = PotentialSpec::new(PotentialKind::Constant { value: 2.0 }, &s).unwrap();
        assert_eq!(delta_u(&c, &s, &x, &y, 3).unwrap().value, 1.0);
    }

    #[test]
    fn stable_reciprocity_and_margulis() {
        let (s, p) = setup();
        let z = TorusPoint::new(&[0.7, 0.1, 0.9]).unwrap();
        let z2 = on_leaf(&s, &z, LeafKind::Stable, 0.05);
        let n = product_depth(&p, &s, 0.05, PRODUCT_TOLERANCE);
        let a = jac_s(&p, &s, &z, &z2, n).unwrap().value;
        let b = jac_s(&p, &s, &z2, &z, n).unwrap().value;
        assert!((a * b - 1.0).abs() < 1e-9);
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        assert_eq!(jac_s(&zero, &s, &z, &z2, n).unwrap().value, 1.0);
    }

    #[test]
    fn off_leaf_rejected() {
        let (s, p) = setup();
        let z = TorusPoint::new(&[0.7, 0.1, 0.9]).unwrap();
        let w = TorusPoint::new(&[0.71, 0.12, 0.9]).unwrap();
        assert!(matches!(jac_s(&p, &s, &z, &w, 20), Err(Error::Locality(_))));
    }

    #[test]
    fn truncation_error_reported() {
        let (s, p) = setup();
        let x = TorusPoint::new(&[0.21, 0.63, 0.4]).unwrap();
        let y = on_leaf(&s, &x, LeafKind::Unstable, 0.1);
        assert!(matches!(
            delta_u(&p, &s, &x, &y, 2),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn jac_u_matches_delta_ratio() {
        let (s, p) = setup();
        let x0 = TorusPoint::new(&[0.3, 0.3, 0.1]).unwrap();
        let z = on_leaf(&s, &x0, LeafKind::Unstable, 0.04);
        let z2 = on_leaf(&s, &x0, LeafKind::Unstable, 0.11);
        let n = product_depth(&p, &s, 0.2, PRODUCT_TOLERANCE);
        let ratio = delta_u(&p, &s, &x0, &z2, n).unwrap().value
            / delta_u(&p, &s, &x0, &z, n).unwrap().value;
        assert!((jac_u(&p, &s, &z, &z2, n).unwrap().value - ratio).abs() < 1e-9);
    }
}
