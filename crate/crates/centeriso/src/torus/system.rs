//! Concrete center isometries: skew products over hyperbolic toral
//! automorphisms (optionally with a small smooth perturbation of the base).

use serde::{Deserialize, Serialize};

use super::point::{wrap, wrapped_diff, TorusPoint};
use super::trig::{Trig2, TrigPolynomial};
use crate::error::{Error, Result};

/// Optional smooth perturbation `x ↦ A·x + ε·(p₁(x), p₂(x))` of the base map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePerturbation {
    pub p1: TrigPolynomial,
    pub p2: TrigPolynomial,
    pub amplitude: f64,
}

/// JSON form of a system.  Field names are part of the external interface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub base: [[i64; 2]; 2],
    #[serde(default)]
    pub coupling: TrigPolynomial,
    #[serde(default)]
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub center_dim: usize,
    #[serde(default)]
    pub perturbation: Option<BasePerturbation>,
}

impl SystemConfig {
    /// The cat map `[[2,1],[1,1]]` with the given fiber data.
    pub fn cat(coupling: TrigPolynomial, frequencies: Vec<f64>) -> Self {
        Self {
            base: [[2, 1], [1, 1]],
            coupling,
            center_dim: frequencies.len(),
            frequencies,
            perturbation: None,
        }
    }
}

/// Numerical guards; configuration knobs rather than hard limits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    /// Largest `|n|` accepted by [`SystemSpec::apply`].
    pub max_iterates: u64,
    /// Largest period accepted by the periodic-point enumeration.
    pub max_period: u32,
    /// Grid size (per axis) of the cone-condition check for perturbed bases.
    pub cone_grid: usize,
    /// Backward steps of the power iteration for perturbed unstable directions.
    pub direction_steps: usize,
    /// Tolerance of the fiber-shift series along leaves.
    pub leaf_tolerance: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            max_iterates: 1_000_000,
            max_period: 12,
            cone_grid: 48,
            direction_steps: 40,
            leaf_tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
struct CompiledPerturbation {
    p1: Trig2,
    p2: Trig2,
    amp: f64,
}

/// A validated center isometry together with derived hyperbolic data.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    config: SystemConfig,
    guards: Guards,
    a: [[f64; 2]; 2],
    a_inv: [[f64; 2]; 2],
    mu_u: f64,
    mu_s: f64,
    e_u: [f64; 2],
    e_s: [f64; 2],
    dual_u: [f64; 2],
    dual_s: [f64; 2],
    coupling: Trig2,
    coupling_lip: f64,
    pert: Option<CompiledPerturbation>,
}

impl Serialize for SystemSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.config.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SystemSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = SystemConfig::deserialize(d)?;
        SystemSpec::new(c).map_err(serde::de::Error::custom)
    }
}

fn eigenvector(a: [[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let (a00, a01, a10, a11) = (
        a[0][0] as f64,
        a[0][1] as f64,
        a[1][0] as f64,
        a[1][1] as f64,
    );
    let v = if a01 != 0.0 {
        [a01, mu - a00]
    } else {
        [mu - a11, a10]
    };
    let n = v[0].hypot(v[1]);
    let mut v = [v[0] / n, v[1] / n];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

impl SystemSpec {
    /// Validates a configuration with default guards.
    pub fn new(config: SystemConfig) -> Result<Self> {
        Self::with_guards(config, Guards::default())
    }

    /// The unperturbed cat-map skew product with coupling `k` and frequencies `α`.
    pub fn cat(coupling: TrigPolynomial, frequencies: Vec<f64>) -> Result<Self> {
        Self::new(SystemConfig::cat(coupling, frequencies))
    }

    /// Validates a configuration with explicit guards.
    pub fn with_guards(config: SystemConfig, guards: Guards) -> Result<Self> {
        let a = config.base;
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let tr = a[0][0] + a[1][1];
        if det.abs() != 1 {
            return Err(Error::InvalidInput(format!(
                "base matrix must have determinant ±1, got {det}"
            )));
        }
        if tr.abs() <= 2 {
            return Err(Error::InvalidInput(format!(
                "base matrix must be hyperbolic (|trace| > 2), got trace {tr}"
            )));
        }
        if config.center_dim > 2 {
            return Err(Error::InvalidInput(format!(
                "center dimension must be 0, 1 or 2, got {}",
                config.center_dim
            )));
        }
        if config.frequencies.len() != config.center_dim {
            return Err(Error::InvalidInput(format!(
                "frequencies has {} entries but center_dim is {}",
                config.frequencies.len(),
                config.center_dim
            )));
        }
        if config.frequencies.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidInput("non-finite frequency".into()));
        }
        config.coupling.validate(2, "coupling")?;
        let (trf, detf) = (tr as f64, det as f64);
        let disc = (trf * trf - 4.0 * detf).sqrt();
        let mu_u = (trf + trf.signum() * disc) / 2.0;
        let mu_s = detf / mu_u;
        let e_u = eigenvector(a, mu_u);
        let e_s = eigenvector(a, mu_s);
        let m = e_u[0] * e_s[1] - e_s[0] * e_u[1];
        let dual_u = [e_s[1] / m, -e_s[0] / m];
        let dual_s = [-e_u[1] / m, e_u[0] / m];
        let af = [
            [a[0][0] as f64, a[0][1] as f64],
            [a[1][0] as f64, a[1][1] as f64],
        ];
        let a_inv = [
            [af[1][1] / detf, -af[0][1] / detf],
            [-af[1][0] / detf, af[0][0] / detf],
        ];
        let pert = match &config.perturbation {
            None => None,
            Some(p) => {
                p.p1.validate(2, "perturbation p1")?;
                p.p2.validate(2, "perturbation p2")?;
                if !p.amplitude.is_finite() || p.amplitude < 0.0 {
                    return Err(Error::InvalidInput(
                        "perturbation amplitude must be a finite number ≥ 0".into(),
                    ));
                }
                Some(CompiledPerturbation {
                    p1: p.p1.compile2(),
                    p2: p.p2.compile2(),
                    amp: p.amplitude,
                })
            }
        };
        let spec = Self {
            coupling: config.coupling.compile2(),
            coupling_lip: config.coupling.lipschitz(),
            config,
            guards,
            a: af,
            a_inv,
            mu_u,
            mu_s,
            e_u,
            e_s,
            dual_u,
            dual_s,
            pert,
        };
        if spec.pert.is_some() {
            spec.check_cone_condition()?;
        }
        Ok(spec)
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn guards(&self) -> &Guards {
        &self.guards
    }

    /// Replaces the guards (validation of the system itself is unchanged).
    pub fn set_guards(&mut self, guards: Guards) {
        self.guards = guards;
    }

    /// Center dimension `c`.
    pub fn center_dim(&self) -> usize {
        self.config.center_dim
    }

    /// Ambient dimension `d = 2 + c`.
    pub fn dim(&self) -> usize {
        2 + self.config.center_dim
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.config.frequencies
    }

    /// The coupling `k : T² → R`.
    pub fn coupling(&self) -> &TrigPolynomial {
        &self.config.coupling
    }

    /// Lipschitz constant of the coupling.
    pub fn coupling_lipschitz(&self) -> f64 {
        self.coupling_lip
    }

    /// `k(x)` at a base point.
    #[inline]
    pub fn k(&self, x: [f64; 2]) -> f64 {
        self.coupling.eval(x)
    }

    #[inline]
    pub fn k_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.coupling.gradient(x)
    }

    /// True when the fibers are rotated (non-trivial center with non-zero coupling).
    pub fn has_fiber_shear(&self) -> bool {
        self.config.center_dim > 0 && !self.coupling.is_empty() && !self.config.coupling.is_zero()
    }

    /// True when the base map is the linear automorphism.
    pub fn is_linear_base(&self) -> bool {
        self.pert.as_ref().is_none_or(|p| p.amp == 0.0)
    }

    /// The expansion rate `λ_A = |μ_u| > 1`.
    pub fn lambda(&self) -> f64 {
        self.mu_u.abs()
    }

    pub fn log_lambda(&self) -> f64 {
        self.mu_u.abs().ln()
    }

    /// Signed unstable eigenvalue.
    pub fn mu_u(&self) -> f64 {
        self.mu_u
    }

    /// Signed stable eigenvalue.
    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    /// Unit unstable eigenvector of `A`.
    pub fn e_u(&self) -> [f64; 2] {
        self.e_u
    }

    /// Unit stable eigenvector of `A`.
    pub fn e_s(&self) -> [f64; 2] {
        self.e_s
    }

    /// Coordinates of a base vector in the eigenbasis `(e_u, e_s)`.
    #[inline]
    pub fn eigen_coords(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.dual_u[0] * v[0] + self.dual_u[1] * v[1],
            self.dual_s[0] * v[0] + self.dual_s[1] * v[1],
        ]
    }

    /// Integer base matrix.
    pub fn base_matrix(&self) -> [[i64; 2]; 2] {
        self.config.base
    }

    /// Linear part `A·v` (no reduction).
    #[inline]
    pub fn a_mul(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * v[0] + self.a[0][1] * v[1],
            self.a[1][0] * v[0] + self.a[1][1] * v[1],
        ]
    }

    /// Linear part `A⁻¹·v` (no reduction).
    #[inline]
    pub fn a_inv_mul(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.a_inv[0][0] * v[0] + self.a_inv[0][1] * v[1],
            self.a_inv[1][0] * v[0] + self.a_inv[1][1] * v[1],
        ]
    }

    /// Lifted base map on `R²` (no reduction mod 1).
    #[inline]
    pub fn base_forward_lift(&self, x: [f64; 2]) -> [f64; 2] {
        let mut y = self.a_mul(x);
        if let Some(p) = &self.pert {
            y[0] += p.amp * p.p1.eval(x);
            y[1] += p.amp * p.p2.eval(x);
        }
        y
    }

    /// Base map reduced mod 1.
    #[inline]
    pub fn base_forward(&self, x: [f64; 2]) -> [f64; 2] {
        let y = self.base_forward_lift(x);
        [wrap(y[0]), wrap(y[1])]
    }

    /// Inverse base map reduced mod 1.  For a perturbed base the inverse is
    /// obtained by the contracting fixed-point iteration `x = A⁻¹(y − ε p(x))`.
    #[inline]
    pub fn base_backward(&self, y: [f64; 2]) -> [f64; 2] {
        let lin = self.a_inv_mul(y);
        match &self.pert {
            None => [wrap(lin[0]), wrap(lin[1])],
            Some(p) => {
                let mut x = lin;
                for _ in 0..200 {
                    let q = self.a_inv_mul([p.amp * p.p1.eval(x), p.amp * p.p2.eval(x)]);
                    let nx = [lin[0] - q[0], lin[1] - q[1]];
                    let change = (nx[0] - x[0]).abs().max((nx[1] - x[1]).abs());
                    x = nx;
                    if change < 1e-16 {
                        break;
                    }
                }
                [wrap(x[0]), wrap(x[1])]
            }
        }
    }

    /// Derivative of the base map at `x`.
    #[inline]
    pub fn base_jacobian(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let mut j = self.a;
        if let Some(p) = &self.pert {
            let g1 = p.p1.gradient(x);
            let g2 = p.p2.gradient(x);
            j[0][0] += p.amp * g1[0];
            j[0][1] += p.amp * g1[1];
            j[1][0] += p.amp * g2[0];
            j[1][1] += p.amp * g2[1];
        }
        j
    }

    /// One forward step of the skew product.
    #[inline]
    pub fn step_forward(&self, x: &TorusPoint) -> TorusPoint {
        let b = x.base();
        let nb = self.base_forward(b);
        let c = self.center_dim();
        if c == 0 {
            return TorusPoint::from_base_fiber(nb, &[]);
        }
        let kx = self.k(b);
        let mut fib = [0.0; 2];
        for ((f, th), a) in fib.iter_mut().zip(x.fiber()).zip(&self.config.frequencies) {
            *f = th + a * kx;
        }
        TorusPoint::from_base_fiber(nb, &fib[..c])
    }

    /// One backward step: `f⁻¹(x, θ) = (A⁻¹x, θ − α k(A⁻¹x))`.
    #[inline]
    pub fn step_backward(&self, x: &TorusPoint) -> TorusPoint {
        let pb = self.base_backward(x.base());
        let c = self.center_dim();
        if c == 0 {
            return TorusPoint::from_base_fiber(pb, &[]);
        }
        let kx = self.k(pb);
        let mut fib = [0.0; 2];
        for ((f, th), a) in fib.iter_mut().zip(x.fiber()).zip(&self.config.frequencies) {
            *f = th - a * kx;
        }
        TorusPoint::from_base_fiber(pb, &fib[..c])
    }

    /// Checks that a point lives in the ambient torus of this system.
    pub fn check_point(&self, x: &TorusPoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// `f^n(x)` for signed `n`, composing the explicit map or its explicit inverse.
    pub fn apply(&self, x: &TorusPoint, n: i64) -> Result<TorusPoint> {
        self.check_point(x)?;
        if n.unsigned_abs() > self.guards.max_iterates {
            return Err(Error::Guard {
                what: "iteration count |n|",
                value: n.unsigned_abs() as f64,
                limit: self.guards.max_iterates as f64,
            });
        }
        let mut y = *x;
        if n >= 0 {
            for _ in 0..n {
                y = self.step_forward(&y);
            }
        } else {
            for _ in 0..(-n) {
                y = self.step_backward(&y);
            }
        }
        Ok(y)
    }

    /// Iterates the base map `n ≥ 0` times forward, or `|n|` times backward.
    pub fn base_iterate(&self, mut x: [f64; 2], n: i64) -> [f64; 2] {
        if n >= 0 {
            for _ in 0..n {
                x = self.base_forward(x);
            }
        } else {
            for _ in 0..(-n) {
                x = self.base_backward(x);
            }
        }
        x
    }

    /// Orbit `x, A^{±1}x, …, A^{±n}x` of a linear base computed exactly on the
    /// dyadic grid `2^{-64}Z²/Z²` (the torus as `Z/2^64`), so that long
    /// orbits carry no accumulated rounding.  `backward` selects `A⁻¹`.
    pub fn exact_base_orbit(&self, x: [f64; 2], n: usize, backward: bool) -> Vec<[f64; 2]> {
        let m = if backward {
            let a = self.config.base;
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            [
                [a[1][1] * det, -a[0][1] * det],
                [-a[1][0] * det, a[0][0] * det],
            ]
        } else {
            self.config.base
        };
        let scale = 18446744073709551616.0_f64; // 2^64
        let to_fixed = |v: f64| -> u64 {
            let w = wrap(v) * scale;
            if w >= scale {
                0
            } else {
                w as u64
            }
        };
        let mut p = [to_fixed(x[0]), to_fixed(x[1])];
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..=n {
            out.push([p[0] as f64 / scale, p[1] as f64 / scale]);
            if i < n {
                p = [
                    (m[0][0] as u64)
                        .wrapping_mul(p[0])
                        .wrapping_add((m[0][1] as u64).wrapping_mul(p[1])),
                    (m[1][0] as u64)
                        .wrapping_mul(p[0])
                        .wrapping_add((m[1][1] as u64).wrapping_mul(p[1])),
                ];
            }
        }
        for v in out.iter_mut() {
            v[0] = wrap(v[0]);
            v[1] = wrap(v[1]);
        }
        out
    }

    /// Eigen-coordinates of the wrapped displacement from `a` to `b`.
    pub fn displacement_eigen(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        self.eigen_coords([wrapped_diff(b[0], a[0]), wrapped_diff(b[1], a[1])])
    }

    /// Verifies on a grid that `Df` maps the cone `{|v_s| ≤ γ|v_u|}` (γ = ½)
    /// strictly into itself and expands its vectors; the dual check is done
    /// for the stable cone under `Df⁻¹`.
    fn check_cone_condition(&self) -> Result<()> {
        let g = self.guards.cone_grid.max(4);
        let gamma = 0.5;
        let rays = [[1.0, gamma], [1.0, -gamma]];
        for i in 0..g {
            for j in 0..g {
                let x = [(i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64];
                let df = self.base_jacobian(x);
                let det = df[0][0] * df[1][1] - df[0][1] * df[1][0];
                let inv = [
                    [df[1][1] / det, -df[0][1] / det],
                    [-df[1][0] / det, df[0][0] / det],
                ];
                for r in rays {
                    // unstable cone ray in standard coordinates
                    let v = [
                        r[0] * self.e_u[0] + r[1] * self.e_s[0],
                        r[0] * self.e_u[1] + r[1] * self.e_s[1],
                    ];
                    let w = [
                        df[0][0] * v[0] + df[0][1] * v[1],
                        df[1][0] * v[0] + df[1][1] * v[1],
                    ];
                    let ew = self.eigen_coords(w);
                    let nv = v[0].hypot(v[1]);
                    let nw = w[0].hypot(w[1]);
                    if ew[1].abs() >= gamma * ew[0].abs() * 0.999 || ew[1].is_nan() || nw <= nv {
                        return Err(Error::InvalidInput(format!(
                            "perturbation amplitude {} breaks the unstable cone condition at {:?}",
                            self.pert.as_ref().map_or(0.0, |p| p.amp),
                            x
                        )));
                    }
                    let vs = [
                        r[1] * self.e_u[0] + r[0] * self.e_s[0],
                        r[1] * self.e_u[1] + r[0] * self.e_s[1],
                    ];
                    let ws = [
                        inv[0][0] * vs[0] + inv[0][1] * vs[1],
                        inv[1][0] * vs[0] + inv[1][1] * vs[1],
                    ];
                    let es = self.eigen_coords(ws);
                    if es[0].abs() >= gamma * es[1].abs() * 0.999
                        || es[0].is_nan()
                        || ws[0].hypot(ws[1]) <= vs[0].hypot(vs[1])
                    {
                        return Err(Error::InvalidInput(format!(
                            "perturbation amplitude {} breaks the stable cone condition at {:?}",
                            self.pert.as_ref().map_or(0.0, |p| p.amp),
                            x
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn exact_orbit_matches_float_orbit_early() {
        let s = super::SystemSpec::cat(crate::torus::TrigPolynomial::zero(), vec![]).unwrap();
        let x = [0.3141592653589793, 0.2718281828459045];
        let ex = s.exact_base_orbit(x, 10, false);
        let mut y = x;
        for e in &ex[..=10] {
            assert!(crate::torus::base_distance(*e, y) < 1e-9);
            y = s.base_forward(y);
        }
        let back = s.exact_base_orbit(ex[10], 10, true);
        assert!(crate::torus::base_distance(back[10], x) < 1e-15);
    }

    use super::*;

    fn cat0() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap()
    }

    #[test]
    fn cat_map_eigendata() {
        let s = cat0();
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((s.lambda() - lam).abs() < 1e-14);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let n = phi.hypot(1.0);
        assert!((s.e_u()[0] - phi / n).abs() < 1e-14 && (s.e_u()[1] - 1.0 / n).abs() < 1e-14);
        let v = s.a_mul(s.e_u());
        assert!((v[0] - lam * s.e_u()[0]).abs() < 1e-13);
        let ec = s.eigen_coords(s.e_s());
        assert!(ec[0].abs() < 1e-14 && (ec[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn apply_examples() {
        let s = cat0();
        let o = TorusPoint::new(&[0.0, 0.0]).unwrap();
        assert_eq!(s.apply(&o, 5).unwrap(), o);
        let h = TorusPoint::new(&[0.5, 0.5]).unwrap();
        assert_eq!(s.apply(&h, 1).unwrap().coords(), &[0.5, 0.0]);
    }

    #[test]
    fn rejects_non_hyperbolic_and_mismatch() {
        let bad = SystemConfig {
            base: [[1, 1], [0, 1]],
            ..SystemConfig::cat(TrigPolynomial::zero(), vec![])
        };
        assert!(SystemSpec::new(bad).is_err());
        let s = cat0();
        let p = TorusPoint::new(&[0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            s.apply(&p, 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            s.apply(&TorusPoint::new(&[0.1, 0.2]).unwrap(), 2_000_000),
            Err(Error::Guard { .. })
        ));
    }

    #[test]
    fn zero_coupling_keeps_fibers() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![0.3, 0.7]).unwrap();
        let p = TorusPoint::new(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let q = s.apply(&p, 17).unwrap();
        assert_eq!(q.fiber(), p.fiber());
    }

    #[test]
    fn perturbed_inverse_and_cone() {
        let pert = BasePerturbation {
            p1: TrigPolynomial::cosine(vec![0, 1], 1.0),
            p2: TrigPolynomial::cosine(vec![1, 0], 0.5),
            amplitude: 0.02,
        };
        let cfg = SystemConfig {
            perturbation: Some(pert.clone()),
            ..SystemConfig::cat(TrigPolynomial::zero(), vec![])
        };
        let s = SystemSpec::new(cfg.clone()).unwrap();
        let x = [0.3, 0.8];
        let y = s.base_backward(s.base_forward(x));
        assert!(super::super::point::base_distance(x, y) < 1e-13);
        let big = SystemConfig {
            perturbation: Some(BasePerturbation {
                amplitude: 1.0,
                ..pert
            }),
            ..cfg
        };
        assert!(SystemSpec::new(big).is_err());
    }
}
