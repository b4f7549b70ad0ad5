//! The truncated coboundary series over a Liouville frequency vector.
//!
//! With `d_n(θ) = exp(2πi⟨θ, m_n⟩)` and `δ_n = ⟨α, m_n⟩`, the identity
//! `d_n∘f = e^{2πi k(x) δ_n} d_n` makes
//!
//! ```text
//! φ_N = Σ_{n≤N} (1 − e^{2πi k(x) δ_n}) d_n = D_N − D_N∘f,   D_N = Σ_{n≤N} d_n,
//! ```
//!
//! a coboundary for every finite `N`.  The mode integers grow
//! super-exponentially, so every phase `⟨θ, m_n⟩ mod 1` is computed exactly:
//! a double `θ` is a dyadic rational, and fiber orbits are tracked with
//! exact rationals.  The real part is the default; the imaginary part is
//! available as an option.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::liouville::{ratio_to_f64, LiouvilleData};
use crate::error::{Error, Result};
use crate::torus::{wrap, RationalPoint, SystemSpec};
use std::f64::consts::TAU;

/// Which real part of the complex series is used as the potential.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    #[default]
    Re,
    Im,
}

/// One mode `m_n = (m_{n,1}, m_{n,2})` with `δ_n = ⟨α, m_n⟩`.
#[derive(Clone, Debug)]
pub struct AppendixMode {
    pub n: u32,
    pub m: [BigUint; 2],
    small: [Option<u64>; 2],
    pub delta: f64,
}

/// The compiled series `φ_N` for `N = n_trunc`, with exact frequency data.
#[derive(Clone, Debug)]
pub struct AppendixPotential {
    pub modes: Vec<AppendixMode>,
    pub part: Part,
    alpha_exact: [BigRational; 2],
}

/// Exact `frac(m·θ)` for a double `θ ∈ [0, 1)`.
pub fn frac_mul_f64(m: &BigUint, small: Option<u64>, theta: f64) -> f64 {
    let theta = wrap(theta);
    if theta == 0.0 {
        return 0.0;
    }
    // θ = mant · 2^{-e} exactly.
    let bits = theta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let (mant, e) = if exp == 0 {
        (bits & ((1 << 52) - 1), 1074i64)
    } else {
        ((bits & ((1 << 52) - 1)) | (1 << 52), 1075 - exp)
    };
    if e <= 0 {
        return 0.0; // θ is an integer
    }
    if let Some(ms) = small {
        if e < 128 {
            let mask: u128 = (1u128 << e) - 1;
            let r = (ms as u128).wrapping_mul(mant as u128) & mask;
            return scaled_to_f64_u128(r, e as u32);
        }
    }
    let mask = (BigUint::from(1u32) << e as usize) - BigUint::from(1u32);
    let r = ((m & &mask) * BigUint::from(mant)) & mask;
    scaled_to_f64_big(&r, e as u32)
}

fn scaled_to_f64_u128(r: u128, e: u32) -> f64 {
    (r as f64) * 2f64.powi(-(e as i32))
}

fn scaled_to_f64_big(r: &BigUint, e: u32) -> f64 {
    let b = r.bits() as i64;
    if b == 0 {
        return 0.0;
    }
    let shift = (b - 64).max(0);
    let top = (r >> shift as usize).to_u64().unwrap_or(u64::MAX);
    (top as f64) * 2f64.powi((shift - e as i64) as i32)
}

/// Exact `frac(m·θ)` for a rational `θ`.
pub fn frac_mul_ratio(m: &BigUint, theta: &BigRational) -> f64 {
    let num = theta.numer() * BigInt::from_biguint(Sign::Plus, m.clone());
    let den = theta.denom();
    let r = num.mod_floor(den);
    ratio_to_f64(&BigRational::new(r, den.clone()))
}

/// `θ mod 1` for a rational.
pub fn frac_ratio(theta: &BigRational) -> BigRational {
    theta - theta.floor()
}

/// Exact rational value of a finite double.
pub fn exact_f64(v: f64) -> Result<BigRational> {
    BigRational::from_float(v).ok_or_else(|| Error::Precision(format!("non-finite value {v}")))
}

#[inline]
fn pick(part: Part, re: f64, im: f64) -> f64 {
    match part {
        Part::Re => re,
        Part::Im => im,
    }
}

impl AppendixPotential {
    /// Compiles the first `n_trunc` witnesses of `data` for `system`.
    pub fn new(
        data: &LiouvilleData,
        n_trunc: u32,
        part: Part,
        system: &SystemSpec,
    ) -> Result<Self> {
        if system.center_dim() != 2 {
            return Err(Error::InvalidInput(format!(
                "the coboundary series needs a 2-dimensional center, got {}",
                system.center_dim()
            )));
        }
        if n_trunc == 0 || n_trunc as usize > data.witnesses.len() {
            return Err(Error::InvalidInput(format!(
                "n_trunc = {n_trunc} outside the witness range 1..={}",
                data.witnesses.len()
            )));
        }
        let alpha = data.alpha_f64();
        let freqs = system.frequencies();
        for i in 0..2 {
            if (freqs[i] - alpha[i]).abs() > 1e-12 * alpha[i].abs().max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "system frequency α{} = {} does not match the frequency data value {}",
                    i + 1,
                    freqs[i],
                    alpha[i]
                )));
            }
        }
        let modes = data.witnesses[..n_trunc as usize]
            .iter()
            .map(|w| AppendixMode {
                n: w.n,
                small: [w.m1.to_u64(), w.m2.to_u64()],
                m: [w.m1.clone(), w.m2.clone()],
                delta: ratio_to_f64(&data.pairing_exact(w)),
            })
            .collect();
        Ok(Self {
            modes,
            part,
            alpha_exact: [data.alpha1_exact(), data.alpha2_exact()],
        })
    }

    pub fn n_trunc(&self) -> usize {
        self.modes.len()
    }

    /// `⟨θ, m_n⟩ mod 1` for every mode, exactly from the double coordinates.
    pub fn phases(&self, theta: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|md| {
                let a = frac_mul_f64(&md.m[0], md.small[0], theta[0]);
                let b = frac_mul_f64(&md.m[1], md.small[1], theta[1]);
                let s = a + b;
                if s >= 1.0 {
                    s - 1.0
                } else {
                    s
                }
            })
            .collect()
    }

    /// `⟨θ, m_n⟩ mod 1` for every mode at a rational fiber point.
    pub fn phases_exact(&self, theta: &[BigRational; 2]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|md| {
                let s = frac_mul_ratio(&md.m[0], &theta[0]) + frac_mul_ratio(&md.m[1], &theta[1]);
                if s >= 1.0 {
                    s - 1.0
                } else {
                    s
                }
            })
            .collect()
    }

    /// `φ_N` from precomputed phases, truncated at `n ≤ n_max`.
    pub fn eval_phases(&self, k: f64, phases: &[f64], n_max: usize) -> f64 {
        let mut s = 0.0;
        for (md, &ph) in self.modes.iter().zip(phases).take(n_max) {
            let chi = TAU * ph;
            let psi = TAU * k * md.delta;
            s += pick(
                self.part,
                chi.cos() - (chi + psi).cos(),
                chi.sin() - (chi + psi).sin(),
            );
        }
        s
    }

    /// `φ_N(x, θ)` given `k(x)`.
    pub fn eval(&self, k: f64, theta: &[f64]) -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        self.eval_phases(k, &self.phases(theta), self.modes.len())
    }

    /// `D_N(θ) = Σ_{n≤n_max} d_n(θ)` as `(re, im)` from phases.
    pub fn transfer_phases(phases: &[f64], n_max: usize) -> (f64, f64) {
        phases.iter().take(n_max).fold((0.0, 0.0), |(re, im), &p| {
            (re + (TAU * p).cos(), im + (TAU * p).sin())
        })
    }

    /// `sup |φ_N| ≤ Σ_n |1 − e^{2πi k δ_n}|` bounded with `sup |k|`.
    pub fn sup_bound(&self, system: &SystemSpec) -> f64 {
        let kmax = system.coupling().sup_bound();
        self.modes
            .iter()
            .map(|m| (TAU * kmax * m.delta.abs()).min(2.0))
            .sum()
    }

    /// Exact image of a rational fiber point under one step with coupling value `k`.
    pub fn advance_exact(&self, theta: &[BigRational; 2], k: f64) -> Result<[BigRational; 2]> {
        let kq = exact_f64(k)?;
        Ok([
            frac_ratio(&(&theta[0] + &self.alpha_exact[0] * &kq)),
            frac_ratio(&(&theta[1] + &self.alpha_exact[1] * &kq)),
        ])
    }

    /// Orbit sums of `φ_N` (`N = 1..=n_trunc`) along a base periodic orbit
    /// starting at fiber point `θ₀`, with the fiber tracked exactly.  Returns
    /// `(raw sum, boundary term Re/Im[D_N(θ₀) − D_N(θ_p)])` per truncation.
    pub fn orbit_sums(
        &self,
        system: &SystemSpec,
        orbit: &[RationalPoint],
        theta0: [f64; 2],
    ) -> Result<Vec<(f64, f64)>> {
        let nt = self.modes.len();
        let mut theta = [exact_f64(wrap(theta0[0]))?, exact_f64(wrap(theta0[1]))?];
        let ph0 = self.phases_exact(&theta);
        let mut raw = vec![0.0; nt];
        for x in orbit {
            let k = system.k(x.to_f64());
            let ph = self.phases_exact(&theta);
            for (n, r) in raw.iter_mut().enumerate() {
                *r += self.eval_phases(k, &ph, n + 1);
            }
            theta = self.advance_exact(&theta, k)?;
        }
        let php = self.phases_exact(&theta);
        Ok((0..nt)
            .map(|n| {
                let (r0, i0) = Self::transfer_phases(&ph0, n + 1);
                let (rp, ip) = Self::transfer_phases(&php, n + 1);
                (raw[n], pick(self.part, r0 - rp, i0 - ip))
            })
            .collect())
    }

    /// Largest residual of `d_n(f(x,θ)) = e^{2πi k(x)δ_n} d_n(x,θ)` over
    /// random points: the left side evaluates `d_n` at the exactly computed
    /// image point, the right side multiplies in double precision.
    pub fn cocycle_residual(&self, system: &SystemSpec, points: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let theta = [rng.gen::<f64>(), rng.gen::<f64>()];
            let k = system.k(x);
            let exact = [exact_f64(theta[0])?, exact_f64(theta[1])?];
            let image = self.advance_exact(&exact, k)?;
            let lhs = self.phases_exact(&image);
            let ph = self.phases(&theta);
            for (md, (&l, &p)) in self.modes.iter().zip(lhs.iter().zip(&ph)) {
                let (lr, li) = ((TAU * l).cos(), (TAU * l).sin());
                let arg = TAU * (p + k * md.delta);
                let (rr, ri) = (arg.cos(), arg.sin());
                worst = worst.max((lr - rr).hypot(li - ri));
            }
        }
        Ok(worst)
    }

    /// Oscillation growth of `D_N` along `θ = (0, h)`: for each `N` an
    /// explicit point `h_N` (exact rational, within `1/m_{1,2}` of the
    /// origin) is built greedily so that `d_n(0, h_N) ≈ −1` for all `n ≤ N`;
    /// the oscillation `|D_N(0, h_N) − D_N(0, 0)|` then grows like `2N`.
    pub fn oscillation(&self) -> Vec<OscillationRow> {
        let one = BigInt::from(1);
        let two = BigInt::from(2);
        let mut h: Option<BigRational> = None;
        let mut rows = Vec::new();
        for (idx, md) in self.modes.iter().enumerate() {
            let n_now = idx + 1;
            let m2 = BigInt::from_biguint(Sign::Plus, md.m[1].clone());
            let eval = |hq: &BigRational| -> f64 {
                let zero = BigRational::zero();
                let ph = self.phases_exact(&[zero, hq.clone()]);
                let (re, im) = Self::transfer_phases(&ph, n_now);
                (re - n_now as f64).hypot(im)
            };
            // Points with ⟨(0,h), m_N⟩ ≡ ½ are h = (j + ½)/m_{N,2}.
            let candidate = |j: BigInt| BigRational::new(&j * &two + &one, &m2 * &two);
            let best = match &h {
                None => candidate(BigInt::zero()),
                Some(prev) => {
                    let c = (prev * BigRational::from_integer(m2.clone()))
                        .floor()
                        .to_integer();
                    let cands = [
                        candidate(&c - &one),
                        candidate(c.clone()),
                        candidate(&c + &one),
                    ];
                    cands
                        .into_iter()
                        .max_by(|a, b| {
                            eval(a)
                                .partial_cmp(&eval(b))
                                .unwrap_or(std::cmp::Ordering::Equal)
                        })
                        .expect("three candidates")
                }
            };
            let osc = eval(&best);
            rows.push(OscillationRow {
                n: md.n,
                h: ratio_to_f64(&best),
                oscillation: osc,
                sup_norm: n_now as f64,
                scale: ratio_to_f64(&BigRational::new(one.clone(), m2.clone())),
            });
            h = Some(best);
        }
        rows
    }
}

/// One row of the oscillation diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct OscillationRow {
    pub n: u32,
    /// The witness point `h_N` (second fiber coordinate).
    pub h: f64,
    /// `|D_N(0, h_N) − D_N(0, 0)|`.
    pub oscillation: f64,
    /// `sup |D_N| = N`, attained at the origin.
    pub sup_norm: f64,
    /// `1/m_{N,2}`.
    pub scale: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::liouville_frequencies;
    use crate::torus::TrigPolynomial;

    fn setup(n: u32) -> (SystemSpec, AppendixPotential) {
        let data = liouville_frequencies(n).unwrap();
        let k = TrigPolynomial::cosine(vec![1, 0], 1.0).plus_constant(-1.0, 2);
        let sys = SystemSpec::cat(k, data.alpha_f64().to_vec()).unwrap();
        let ap = AppendixPotential::new(&data, n, Part::Re, &sys).unwrap();
        (sys, ap)
    }

    #[test]
    fn frac_matches_rational() {
        let m = BigUint::parse_bytes(b"123456789012345678901234567890123", 10).unwrap();
        for &t in &[0.1, 0.73, 1e-7, 0.999999, 0.5] {
            let a = frac_mul_f64(&m, None, t);
            let b = frac_mul_ratio(&m, &exact_f64(t).unwrap());
            assert!((a - b).abs() < 1e-15, "{a} {b}");
            let ms = 987654321u64;
            let a = frac_mul_f64(&BigUint::from(ms), Some(ms), t);
            let b = frac_mul_ratio(&BigUint::from(ms), &exact_f64(t).unwrap());
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let (_, ap) = setup(4);
        assert_eq!(ap.eval(0.0, &[0.3, 0.4]), 0.0);
    }

    #[test]
    fn telescoping_and_cocycle() {
        let (sys, ap) = setup(5);
        let orbits = crate::torus::periodic_orbits(&sys, 4).unwrap();
        for o in &orbits {
            for (raw, bnd) in ap.orbit_sums(&sys, o, [0.123, 0.456]).unwrap() {
                assert!((raw - bnd).abs() < 1e-10);
            }
        }
        assert!(ap.cocycle_residual(&sys, 500, 3).unwrap() < 1e-10);
    }

    #[test]
    fn oscillation_grows() {
        let (_, ap) = setup(6);
        let rows = ap.oscillation();
        for w in rows.windows(2) {
            assert!(w[1].oscillation > w[0].oscillation);
        }
        assert!(rows.last().unwrap().oscillation > 10.0);
    }
}
