//! Real trigonometric polynomials on tori.
//!
//! A polynomial is a finite list of Fourier modes
//!
//! ```text
//! p(x) = Σ_m  a_m cos(2π m·x) + b_m sin(2π m·x).
//! ```
//!
//! Besides point evaluation the type offers exact means over straight
//! segments, which the leaf quadrature uses to integrate a potential over a
//! whole cell instead of sampling it at the cell center.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Fourier mode `a cos(2π m·x) + b sin(2π m·x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode {
    pub mode: Vec<i64>,
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl TrigMode {
    pub fn new(mode: Vec<i64>, cos: f64, sin: f64) -> Self {
        Self { mode, cos, sin }
    }
}

/// A finite real trigonometric polynomial.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPolynomial {
    modes: Vec<TrigMode>,
}

/// `sin(u)/u`, continuous at 0.
#[inline]
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    }
}

impl TrigPolynomial {
    pub fn new(modes: Vec<TrigMode>) -> Self {
        Self { modes }
    }

    /// The zero polynomial.
    pub fn zero() -> Self {
        Self::default()
    }

    /// `a cos(2π m·x)`.
    pub fn cosine(mode: Vec<i64>, a: f64) -> Self {
        Self::new(vec![TrigMode::new(mode, a, 0.0)])
    }

    pub fn modes(&self) -> &[TrigMode] {
        &self.modes
    }

    /// Adds a constant term.
    pub fn plus_constant(mut self, c: f64, dim: usize) -> Self {
        self.modes.push(TrigMode::new(vec![0; dim], c, 0.0));
        self
    }

    /// True when every coefficient vanishes.
    pub fn is_zero(&self) -> bool {
        self.modes
            .iter()
            .all(|m| m.cos == 0.0 && (m.sin == 0.0 || m.mode.iter().all(|&k| k == 0)))
    }

    /// Largest number of coordinates any mode refers to.
    pub fn dim(&self) -> usize {
        self.modes.iter().map(|m| m.mode.len()).max().unwrap_or(0)
    }

    /// Checks that all modes have exactly `dim` entries.
    pub fn validate(&self, dim: usize, what: &str) -> Result<()> {
        for m in &self.modes {
            if m.mode.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "{what}: mode {:?} has {} entries, expected {dim}",
                    m.mode,
                    m.mode.len()
                )));
            }
            if !m.cos.is_finite() || !m.sin.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{what}: non-finite coefficient"
                )));
            }
        }
        Ok(())
    }

    /// Point evaluation; `x` may carry more coordinates than the modes use.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let arg = TAU
                    * m.mode
                        .iter()
                        .zip(x)
                        .map(|(&k, &xi)| k as f64 * xi)
                        .sum::<f64>();
                m.cos * arg.cos() + m.sin * arg.sin()
            })
            .sum()
    }

    /// Gradient with respect to the first `out.len()` coordinates.
    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for m in &self.modes {
            let arg = TAU
                * m.mode
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| k as f64 * xi)
                    .sum::<f64>();
            let d = TAU * (-m.cos * arg.sin() + m.sin * arg.cos());
            for (o, &k) in out.iter_mut().zip(&m.mode) {
                *o += d * k as f64;
            }
        }
    }

    /// Lipschitz constant for the flat metric: `Σ 2π |m| √(a² + b²)`.
    pub fn lipschitz(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let norm = m.mode.iter().map(|&k| (k * k) as f64).sum::<f64>().sqrt();
                TAU * norm * m.cos.hypot(m.sin)
            })
            .sum()
    }

    /// Upper bound on `sup |p|`.
    pub fn sup_bound(&self) -> f64 {
        self.modes.iter().map(|m| m.cos.hypot(m.sin)).sum()
    }

    /// Lebesgue mean (the coefficient of the zero mode).
    pub fn mean(&self) -> f64 {
        self.modes
            .iter()
            .filter(|m| m.mode.iter().all(|&k| k == 0))
            .map(|m| m.cos)
            .sum()
    }

    /// Exact mean of `p` over the segment `{c + s·u : |s| ≤ len/2}`.
    pub fn segment_mean(&self, center: &[f64], dir: &[f64], len: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let arg = TAU
                    * m.mode
                        .iter()
                        .zip(center)
                        .map(|(&k, &xi)| k as f64 * xi)
                        .sum::<f64>();
                let freq = m
                    .mode
                    .iter()
                    .zip(dir)
                    .map(|(&k, &d)| k as f64 * d)
                    .sum::<f64>();
                (m.cos * arg.cos() + m.sin * arg.sin()) * sinc(std::f64::consts::PI * freq * len)
            })
            .sum()
    }

    /// Compiles a polynomial in two variables into a flat table for hot loops.
    pub fn compile2(&self) -> Trig2 {
        Trig2 {
            terms: self
                .modes
                .iter()
                .map(|m| {
                    let k0 = m.mode.first().copied().unwrap_or(0) as f64;
                    let k1 = m.mode.get(1).copied().unwrap_or(0) as f64;
                    [k0, k1, m.cos, m.sin]
                })
                .collect(),
        }
    }
}

/// Flat representation of a trigonometric polynomial on `T²`.
#[derive(Clone, Debug, Default)]
pub struct Trig2 {
    terms: Vec<[f64; 4]>,
}

impl Trig2 {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let arg = TAU * (t[0] * x[0] + t[1] * x[1]);
            s += t[2] * arg.cos() + t[3] * arg.sin();
        }
        s
    }

    #[inline]
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let arg = TAU * (t[0] * x[0] + t[1] * x[1]);
            let d = TAU * (-t[2] * arg.sin() + t[3] * arg.cos());
            g[0] += d * t[0];
            g[1] += d * t[1];
        }
        g
    }

    /// Exact mean over `{c + s·u : |s| ≤ len/2}`.
    #[inline]
    pub fn segment_mean(&self, c: [f64; 2], u: [f64; 2], len: f64) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            let arg = TAU * (t[0] * c[0] + t[1] * c[1]);
            let freq = t[0] * u[0] + t[1] * u[1];
            s += (t[2] * arg.cos() + t[3] * arg.sin()) * sinc(std::f64::consts::PI * freq * len);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrigPolynomial {
        TrigPolynomial::new(vec![
            TrigMode::new(vec![1, 0], 0.3, 0.1),
            TrigMode::new(vec![2, -1], -0.2, 0.5),
            TrigMode::new(vec![0, 0], 0.7, 0.0),
        ])
    }

    #[test]
    fn segment_mean_matches_fine_quadrature() {
        let p = sample();
        let c = [0.31, 0.77];
        let u = [0.8, 0.6];
        let len = 0.37;
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let s = -len / 2.0 + (i as f64 + 0.5) * len / n as f64;
            acc += p.eval(&[c[0] + s * u[0], c[1] + s * u[1]]);
        }
        acc /= n as f64;
        assert!((acc - p.segment_mean(&c, &u, len)).abs() < 1e-9);
        assert!((acc - p.compile2().segment_mean(c, u, len)).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = sample();
        let x = [0.2, 0.9];
        let mut g = [0.0; 2];
        p.gradient(&x, &mut g);
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6);
        }
        let g2 = p.compile2().gradient(x);
        assert!((g2[0] - g[0]).abs() < 1e-12 && (g2[1] - g[1]).abs() < 1e-12);
    }

    #[test]
    fn mean_is_zero_mode() {
        assert_eq!(sample().mean(), 0.7);
    }

    #[test]
    fn json_field_names() {
        let p = TrigPolynomial::cosine(vec![1, 0], 1.0);
        assert_eq!(
            serde_json::to_string(&p).unwrap(),
            r#"[{"mode":[1,0],"cos":1.0,"sin":0.0}]"#
        );
    }
}
