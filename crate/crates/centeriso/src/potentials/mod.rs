//! Potentials: evaluation, Birkhoff sums, holonomy products, Liouville
//! frequencies and the periodic-orbit (Livšic) obstruction test.
//!
//! A potential is described by a serializable [`PotentialKind`] and compiled
//! against a [`SystemSpec`] into a [`PotentialSpec`], which carries the derived
//! Hölder data and the fast evaluation tables used by the leaf and sampler
//! code.

pub mod appendix;
pub mod liouville;
pub mod livsic;
pub mod products;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{log_unstable_jacobian, SystemSpec, TorusPoint, Trig2, TrigPolynomial};

pub use appendix::{AppendixPotential, Part};
pub use liouville::{liouville_frequencies, LiouvilleData, Witness};
pub use livsic::{livsic_obstruction, OrbitSum};
pub use products::{delta_u, jac_s, jac_u, product_depth, ProductValue, PRODUCT_TOLERANCE};

/// JSON description of a potential (the `"potential"` object of a config).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// A trigonometric polynomial in the base coordinates only.
    TrigPoly { modes: TrigPolynomial },
    /// A constant function.
    Constant { value: f64 },
    /// `−log |det Df|_{E^u}|`.
    Srb,
    /// The truncated coboundary series `Σ_{n≤N} (1 − e^{2πi k(x)⟨α,m_n⟩}) d_n(θ)`.
    AppendixD {
        n_trunc: u32,
        /// Inline frequency data; generated from `n_trunc` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        liouville: Option<LiouvilleData>,
        /// Path of a frequency file; resolved by the command layer.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        liouville_file: Option<String>,
        #[serde(default)]
        part: Part,
    },
    /// A trigonometric polynomial on the full torus `T^{2+c}`.
    FiberTrig { modes: TrigPolynomial },
}

impl PotentialKind {
    pub fn zero() -> Self {
        PotentialKind::Constant { value: 0.0 }
    }

    pub fn trig(modes: TrigPolynomial) -> Self {
        PotentialKind::TrigPoly { modes }
    }
}

/// Fast form of a fiber-independent potential.
#[derive(Clone, Debug)]
pub enum BaseFunction {
    Constant(f64),
    Trig(Trig2, f64),
}

impl BaseFunction {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            BaseFunction::Constant(c) => *c,
            BaseFunction::Trig(t, c) => t.eval(x) + c,
        }
    }

    /// Exact mean over the segment `{c + s·u : |s| ≤ len/2}`.
    #[inline]
    pub fn segment_mean(&self, c: [f64; 2], u: [f64; 2], len: f64) -> f64 {
        match self {
            BaseFunction::Constant(v) => *v,
            BaseFunction::Trig(t, v) => t.segment_mean(c, u, len) + v,
        }
    }
}

#[derive(Clone, Debug)]
enum Compiled {
    Base(BaseFunction),
    SrbPerturbed,
    Fiber(TrigPolynomial),
    Appendix(Arc<AppendixPotential>),
}

/// A potential compiled against a system.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    kind: PotentialKind,
    compiled: Compiled,
    /// Hölder constant `C_φ` (exact for trigonometric and constant kinds).
    pub holder_constant: f64,
    /// Hölder exponent `θ ∈ (0, 1]`.
    pub holder_exponent: f64,
    /// Whether `φ` does not depend on the fiber coordinates.
    pub c_constant: bool,
    /// Whether `holder_constant` is a sampled estimate rather than exact.
    pub holder_estimated: bool,
}

impl Serialize for PotentialSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl PotentialSpec {
    /// Compiles and validates a potential for `system`.
    pub fn new(kind: PotentialKind, system: &SystemSpec) -> Result<Self> {
        let (compiled, c_constant) = match &kind {
            PotentialKind::TrigPoly { modes } => {
                modes.validate(2, "potential")?;
                (
                    Compiled::Base(BaseFunction::Trig(modes.compile2(), 0.0)),
                    true,
                )
            }
            PotentialKind::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidInput(
                        "constant potential must be finite".into(),
                    ));
                }
                (Compiled::Base(BaseFunction::Constant(*value)), true)
            }
            PotentialKind::Srb => {
                if system.is_linear_base() {
                    (
                        Compiled::Base(BaseFunction::Constant(-system.log_lambda())),
                        true,
                    )
                } else {
                    (Compiled::SrbPerturbed, true)
                }
            }
            PotentialKind::FiberTrig { modes } => {
                modes.validate(system.dim(), "fiber potential")?;
                let fiber_free = modes
                    .modes()
                    .iter()
                    .all(|m| m.mode[2..].iter().all(|&k| k == 0));
                (Compiled::Fiber(modes.clone()), fiber_free)
            }
            PotentialKind::AppendixD {
                n_trunc,
                liouville,
                liouville_file,
                part,
            } => {
                let data = match (liouville, liouville_file) {
                    (Some(d), _) => d.clone(),
                    (None, Some(path)) => {
                        return Err(Error::InvalidInput(format!(
                            "frequency file '{path}' must be loaded before compiling the potential"
                        )))
                    }
                    (None, None) => liouville_frequencies(*n_trunc)?,
                };
                let ap = AppendixPotential::new(&data, *n_trunc, *part, system)?;
                (Compiled::Appendix(Arc::new(ap)), false)
            }
        };
        let mut spec = Self {
            kind,
            compiled,
            holder_constant: 0.0,
            holder_exponent: 1.0,
            c_constant,
            holder_estimated: false,
        };
        match &spec.kind {
            PotentialKind::TrigPoly { modes } | PotentialKind::FiberTrig { modes } => {
                spec.holder_constant = modes.lipschitz();
            }
            PotentialKind::Constant { .. } => {}
            PotentialKind::Srb if system.is_linear_base() => {}
            _ => {
                spec.holder_constant = spec.estimate_lipschitz(system, 4000, 0x5eed);
                spec.holder_estimated = true;
            }
        }
        Ok(spec)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// The fast base-only form, when `φ` factors through the base with a
    /// closed form (trigonometric, constant, SRB over a linear base).
    pub fn base_function(&self) -> Option<&BaseFunction> {
        match &self.compiled {
            Compiled::Base(b) => Some(b),
            _ => None,
        }
    }

    /// The compiled truncated coboundary series, for the appendix kind.
    pub fn appendix(&self) -> Option<&AppendixPotential> {
        match &self.compiled {
            Compiled::Appendix(a) => Some(a),
            _ => None,
        }
    }

    /// `φ(x)`.
    pub fn evaluate(&self, system: &SystemSpec, x: &TorusPoint) -> f64 {
        match &self.compiled {
            Compiled::Base(b) => b.eval(x.base()),
            Compiled::SrbPerturbed => log_unstable_jacobian(system, x.base())
                .map(|v| -v)
                .unwrap_or(f64::NAN),
            Compiled::Fiber(p) => p.eval(x.coords()),
            Compiled::Appendix(a) => a.eval(system.k(x.base()), x.fiber()),
        }
    }

    /// `φ` at a base point, for fiber-independent potentials.
    pub fn evaluate_base(&self, system: &SystemSpec, x: [f64; 2]) -> Result<f64> {
        match &self.compiled {
            Compiled::Base(b) => Ok(b.eval(x)),
            Compiled::SrbPerturbed => Ok(-log_unstable_jacobian(system, x)?),
            Compiled::Fiber(p) if self.c_constant => {
                let mut c = [0.0; 4];
                c[..2].copy_from_slice(&x);
                Ok(p.eval(&c[..system.dim()]))
            }
            _ => Err(Error::Unsupported(
                "potential depends on the fiber coordinates".into(),
            )),
        }
    }

    /// A value `c` such that `φ − c` has zero Lebesgue mean when this is
    /// available in closed form.
    pub fn lebesgue_mean(&self) -> Option<f64> {
        match (&self.kind, &self.compiled) {
            (_, Compiled::Base(BaseFunction::Constant(c))) => Some(*c),
            (PotentialKind::TrigPoly { modes }, _) | (PotentialKind::FiberTrig { modes }, _) => {
                Some(modes.mean())
            }
            (PotentialKind::AppendixD { .. }, _) => Some(0.0),
            _ => None,
        }
    }

    /// Lower and upper bounds of `φ`.
    pub fn bounds(&self, system: &SystemSpec) -> (f64, f64) {
        match (&self.kind, &self.compiled) {
            (_, Compiled::Base(BaseFunction::Constant(c))) => (*c, *c),
            (PotentialKind::TrigPoly { modes }, _) | (PotentialKind::FiberTrig { modes }, _) => {
                let b = modes.sup_bound();
                (-b, b)
            }
            (_, Compiled::Appendix(a)) => {
                let b = a.sup_bound(system);
                (-b, b)
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for _ in 0..2000 {
                    let p = random_point(&mut rng, system.dim());
                    let v = self.evaluate(system, &p);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                let pad = 0.05 * (hi - lo).max(1e-3);
                (lo - pad, hi + pad)
            }
        }
    }

    /// Sampled Lipschitz estimate (safety factor 2) over random close pairs.
    fn estimate_lipschitz(&self, system: &SystemSpec, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = system.dim();
        let mut best: f64 = 0.0;
        for _ in 0..pairs {
            let p = random_point(&mut rng, dim);
            let h = 10f64.powf(rng.gen_range(-5.0..-1.5));
            let mut q = [0.0f64; 4];
            let mut norm = 0.0f64;
            for qi in q.iter_mut().take(dim) {
                *qi = rng.gen_range(-1.0..1.0);
                norm += *qi * *qi;
            }
            let norm = norm.sqrt().max(1e-12);
            let coords: Vec<f64> = (0..dim).map(|i| p.coords()[i] + h * q[i] / norm).collect();
            let Ok(qp) = TorusPoint::new(&coords) else {
                continue;
            };
            let d = p.distance(&qp);
            if d > 0.0 {
                let r = (self.evaluate(system, &p) - self.evaluate(system, &qp)).abs() / d;
                if r.is_finite() {
                    best = best.max(r);
                }
            }
        }
        2.0 * best
    }

    /// Spot-checks `|φ(x) − φ(y)| ≤ C_φ d(x,y)^θ` on random pairs; returns
    /// the largest observed ratio `|φ(x) − φ(y)| / (C_φ d^θ)`.
    pub fn holder_spot_check(&self, system: &SystemSpec, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = system.dim();
        let mut worst: f64 = 0.0;
        for i in 0..pairs {
            let p = random_point(&mut rng, dim);
            let q = if i % 2 == 0 {
                random_point(&mut rng, dim)
            } else {
                let h = 10f64.powf(rng.gen_range(-6.0..-1.0));
                let coords: Vec<f64> = (0..dim)
                    .map(|j| p.coords()[j] + h * rng.gen_range(-1.0..1.0))
                    .collect();
                TorusPoint::new(&coords).expect("finite")
            };
            let d = p.distance(&q);
            let diff = (self.evaluate(system, &p) - self.evaluate(system, &q)).abs();
            if d == 0.0 {
                continue;
            }
            let bound = self.holder_constant * d.powf(self.holder_exponent);
            let r = if bound > 0.0 {
                diff / bound
            } else if diff > 1e-14 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(r);
        }
        worst
    }
}

/// Uniform random point of `T^dim`.
pub fn random_point<R: Rng>(rng: &mut R, dim: usize) -> TorusPoint {
    let mut c = [0.0; 4];
    for ci in c.iter_mut().take(dim) {
        *ci = rng.gen::<f64>();
    }
    TorusPoint::from_parts_unchecked(&c[..dim])
}

/// Birkhoff sum `S_nφ(x) = Σ_{i<n} φ(fⁱx)` for `n ≥ 0`; for `n < 0` the
/// backward convention `Σ_{i=1}^{|n|} φ(f^{-i}x) = S_{|n|}φ(f^{n}x)`.
pub fn birkhoff_sum(
    potential: &PotentialSpec,
    system: &SystemSpec,
    x: &TorusPoint,
    n: i64,
) -> Result<f64> {
    system.check_point(x)?;
    if n.unsigned_abs() > system.guards().max_iterates {
        return Err(Error::Guard {
            what: "iteration count |n|",
            value: n.unsigned_abs() as f64,
            limit: system.guards().max_iterates as f64,
        });
    }
    let mut s = 0.0;
    let mut y = *x;
    if n >= 0 {
        for _ in 0..n {
            s += potential.evaluate(system, &y);
            y = system.step_forward(&y);
        }
    } else {
        for _ in 0..(-n) {
            y = system.step_backward(&y);
            s += potential.evaluate(system, &y);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::TrigMode;

    fn cat1() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.3]).unwrap()
    }

    #[test]
    fn constant_and_srb_values() {
        let s = cat1();
        let x = TorusPoint::new(&[0.1, 0.2, 0.3]).unwrap();
        let c = PotentialSpec::new(PotentialKind::Constant { value: 0.7 }, &s).unwrap();
        assert_eq!(c.evaluate(&s, &x), 0.7);
        assert!((birkhoff_sum(&c, &s, &x, 10).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(birkhoff_sum(&c, &s, &x, 0).unwrap(), 0.0);
        let srb = PotentialSpec::new(PotentialKind::Srb, &s).unwrap();
        let v = srb.evaluate(&s, &x);
        assert!((v + ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-14);
        assert_eq!(v + s.log_lambda(), 0.0);
        assert!(srb.c_constant && c.c_constant);
    }

    #[test]
    fn cocycle_additivity() {
        let s = cat1();
        let p = PotentialSpec::new(
            PotentialKind::FiberTrig {
                modes: TrigPolynomial::new(vec![
                    TrigMode::new(vec![1, 0, 1], 0.4, 0.2),
                    TrigMode::new(vec![0, 1, 0], 0.1, 0.0),
                ]),
            },
            &s,
        )
        .unwrap();
        assert!(!p.c_constant);
        let x = TorusPoint::new(&[0.31, 0.77, 0.05]).unwrap();
        let (n, m) = (7, 5);
        let lhs = birkhoff_sum(&p, &s, &x, n + m).unwrap();
        let fnx = s.apply(&x, n).unwrap();
        let rhs = birkhoff_sum(&p, &s, &x, n).unwrap() + birkhoff_sum(&p, &s, &fnx, m).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
        // backward convention: S_{-n}(x) = S_n(f^{-n}x)
        let back = birkhoff_sum(&p, &s, &x, -6).unwrap();
        let start = s.apply(&x, -6).unwrap();
        assert!((back - birkhoff_sum(&p, &s, &start, 6).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn holder_constants_hold() {
        let s = cat1();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 2], 0.5)),
            &s,
        )
        .unwrap();
        assert!(p.holder_spot_check(&s, 10_000, 1) <= 1.0);
        assert!(!p.holder_estimated);
    }

    #[test]
    fn json_tags() {
        let k: PotentialKind = serde_json::from_str(r#"{"kind":"constant","value":1.5}"#).unwrap();
        assert!(matches!(k, PotentialKind::Constant { value } if value == 1.5));
        let k: PotentialKind = serde_json::from_str(r#"{"kind":"srb"}"#).unwrap();
        assert!(matches!(k, PotentialKind::Srb));
        let k: PotentialKind =
            serde_json::from_str(r#"{"kind":"trig_poly","modes":[{"mode":[1,0],"cos":0.3}]}"#)
                .unwrap();
        assert!(matches!(k, PotentialKind::TrigPoly { .. }));
    }
}
