//! The iterated transfer operator on a fixed leaf window.
//!
//! Over a linear base the `k`-th image of the cell at parameter `t` is the
//! segment centered at `A^k x + μ_u^k t e_u` of length `λ^k h`, with the
//! anchor orbit computed exactly; for fiber-independent potentials the
//! generation-`n` cell mass is
//!
//! ```text
//! h · exp(Σ_{k<n} [φ̄_k(cell) + log λ]) · ḡ_n(cell)
//! ```
//!
//! where `φ̄_k` is the exact mean of `φ` over the `k`-th image segment and
//! `ḡ_n` the mean of the seed density over the `n`-th image.  The cell means
//! are the quadrature of choice for the shape of the measure.  Because
//! `log` of a mean is not the mean of `log`, their total mass grows at a
//! biased rate; the pressure is therefore read off the point-quadrature
//! masses `h Σ_j exp(S_k(φ + log λ)(y_j))`, tracked in parallel.
//!
//! The stable version runs the same construction for `f⁻¹` with the
//! potential `φ∘f⁻¹` (indices `k = 1..n` along the backward orbit).
//! Other potentials and perturbed bases use point quadrature throughout,
//! with the unstable Jacobian tracked along each orbit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PressureMethod, PressureReport, WeightedLeafMeasure};
use crate::error::{Error, Result};
use crate::potentials::{BaseFunction, PotentialKind, PotentialSpec};
use crate::torus::{
    leaf_points_batch, LeafKind, LeafSegment, SystemSpec, TorusPoint, TrigPolynomial,
};

/// Largest accepted depth.
pub const MAX_DEPTH: usize = 200;

/// How cell masses are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Exact segment means of the potential over each cell image.
    CellMean,
    /// Potential evaluated at the cell centers only.
    Point,
}

/// The density the iteration starts from, on the `n`-th image of the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedDensity {
    Lebesgue,
    /// A positive trigonometric polynomial on the base.
    Trig(TrigPolynomial),
}

/// Options of [`leaf_measure_with`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafOptions {
    pub kind: LeafKind,
    pub quadrature: Quadrature,
    /// Average the normalized densities over the final quarter of generations.
    pub cesaro: bool,
    pub seed: SeedDensity,
    /// Generations `n−1` and `n` farther apart than this (total variation)
    /// are flagged as not converged.
    pub tv_tolerance: f64,
}

impl Default for LeafOptions {
    fn default() -> Self {
        Self {
            kind: LeafKind::Unstable,
            quadrature: Quadrature::CellMean,
            cesaro: true,
            seed: SeedDensity::Lebesgue,
            tv_tolerance: 1e-2,
        }
    }
}

impl LeafOptions {
    /// Plain depth-`n` section: no averaging, cell means, Lebesgue seed.
    /// Absolute masses of such sections are consistent across anchors.
    pub fn section(kind: LeafKind) -> Self {
        Self {
            kind,
            cesaro: false,
            ..Self::default()
        }
    }
}

/// Running `log Σ exp` accumulator.
#[derive(Clone, Copy, Debug)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    const EMPTY: Lse = Lse {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    #[inline]
    fn add(&mut self, v: f64) {
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn merge(self, o: Lse) -> Lse {
        if o.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return o;
        }
        let m = self.max.max(o.max);
        Lse {
            max: m,
            sum: self.sum * (self.max - m).exp() + o.sum * (o.max - m).exp(),
        }
    }

    fn value(self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Raw result of one run: log cell masses for the requested generations and
/// point-quadrature log masses for every generation `1..=n`.
struct Run {
    gens: Vec<usize>,
    log_w: Vec<Vec<f64>>,
    log_mass_point: Vec<f64>,
}

fn seed_function(seed: &SeedDensity) -> Result<Option<BaseFunction>> {
    match seed {
        SeedDensity::Lebesgue => Ok(None),
        SeedDensity::Trig(p) => {
            p.validate(2, "seed density")?;
            let lower = 2.0 * p.mean() - p.sup_bound();
            if lower.is_nan() || lower <= 0.0 {
                return Err(Error::InvalidInput(
                    "seed density must be bounded away from zero".into(),
                ));
            }
            Ok(Some(BaseFunction::Trig(p.compile2(), 0.0)))
        }
    }
}

const CHUNK: usize = 256;

#[allow(clippy::too_many_arguments)]
fn run_linear(
    system: &SystemSpec,
    f: &BaseFunction,
    x: [f64; 2],
    kind: LeafKind,
    ts: &[f64],
    h: f64,
    n: usize,
    gens: &[usize],
    quad: Quadrature,
    seed: Option<&BaseFunction>,
) -> Run {
    let backward = kind == LeafKind::Stable;
    let orbit = system.exact_base_orbit(x, n, backward);
    let (dir, mu) = match kind {
        LeafKind::Unstable => (system.e_u(), system.mu_u()),
        LeafKind::Stable => (system.e_s(), 1.0 / system.mu_s()),
    };
    let offset = usize::from(backward);
    let scales: Vec<f64> = (0..=n).map(|k| mu.powi(k as i32)).collect();
    let lens: Vec<f64> = (0..=n)
        .map(|k| h * system.lambda().powi(k as i32))
        .collect();
    let ll = system.log_lambda();
    let lh = h.ln();
    let chunks: Vec<(Vec<Vec<f64>>, Vec<Lse>)> = ts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = vec![Vec::with_capacity(chunk.len()); gens.len()];
            let mut lse = vec![Lse::EMPTY; n];
            for &t in chunk {
                let (mut cm, mut pt) = (0.0, 0.0);
                let mut gi = 0;
                for g in 1..=n {
                    let k = g - 1 + offset;
                    let c = [
                        orbit[k][0] + scales[k] * t * dir[0],
                        orbit[k][1] + scales[k] * t * dir[1],
                    ];
                    let v = f.eval(c);
                    pt += v + ll;
                    cm += match quad {
                        Quadrature::CellMean => f.segment_mean(c, dir, lens[k]) + ll,
                        Quadrature::Point => v + ll,
                    };
                    lse[g - 1].add(pt + lh);
                    if gi < gens.len() && gens[gi] == g {
                        let s = match seed {
                            None => 0.0,
                            Some(sf) => {
                                let cg = [
                                    orbit[g][0] + scales[g] * t * dir[0],
                                    orbit[g][1] + scales[g] * t * dir[1],
                                ];
                                match quad {
                                    Quadrature::CellMean => sf.segment_mean(cg, dir, lens[g]).ln(),
                                    Quadrature::Point => sf.eval(cg).ln(),
                                }
                            }
                        };
                        out[gi].push(cm + s + lh);
                        gi += 1;
                    }
                }
            }
            (out, lse)
        })
        .collect();
    merge_chunks(chunks, gens, n)
}

fn merge_chunks(chunks: Vec<(Vec<Vec<f64>>, Vec<Lse>)>, gens: &[usize], n: usize) -> Run {
    let mut log_w = vec![Vec::new(); gens.len()];
    let mut lse = vec![Lse::EMPTY; n];
    for (w, l) in chunks {
        for (dst, src) in log_w.iter_mut().zip(w) {
            dst.extend(src);
        }
        for (a, b) in lse.iter_mut().zip(l) {
            *a = a.merge(b);
        }
    }
    Run {
        gens: gens.to_vec(),
        log_w,
        log_mass_point: lse.into_iter().map(Lse::value).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_generic(
    system: &SystemSpec,
    potential: &PotentialSpec,
    segment: &LeafSegment,
    ts: &[f64],
    h: f64,
    n: usize,
    gens: &[usize],
    seed: Option<&BaseFunction>,
) -> Result<Run> {
    let (points, tangents) = leaf_points_batch(system, segment, ts)?;
    let linear = system.is_linear_base();
    let srb = matches!(potential.kind(), PotentialKind::Srb);
    let ll = system.log_lambda();
    let lh = h.ln();
    let kind = segment.kind;
    let idx: Vec<usize> = (0..ts.len()).collect();
    let chunks: Vec<(Vec<Vec<f64>>, Vec<Lse>)> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = vec![Vec::with_capacity(chunk.len()); gens.len()];
            let mut lse = vec![Lse::EMPTY; n];
            for &j in chunk {
                let mut z: TorusPoint = points[j];
                let mut v = tangents[j];
                let mut pt = 0.0;
                let mut gi = 0;
                for g in 1..=n {
                    let term = match kind {
                        LeafKind::Unstable => {
                            let lj = if linear {
                                ll
                            } else {
                                let jm = system.base_jacobian(z.base());
                                let w = [
                                    jm[0][0] * v[0] + jm[0][1] * v[1],
                                    jm[1][0] * v[0] + jm[1][1] * v[1],
                                ];
                                let nw = w[0].hypot(w[1]);
                                v = [w[0] / nw, w[1] / nw];
                                nw.ln()
                            };
                            let val = if srb {
                                -lj
                            } else {
                                potential.evaluate(system, &z)
                            };
                            z = system.step_forward(&z);
                            val + lj
                        }
                        LeafKind::Stable => {
                            z = system.step_backward(&z);
                            let lj = if linear {
                                ll
                            } else {
                                let jm = system.base_jacobian(z.base());
                                let det = jm[0][0] * jm[1][1] - jm[0][1] * jm[1][0];
                                let w = [
                                    (jm[1][1] * v[0] - jm[0][1] * v[1]) / det,
                                    (-jm[1][0] * v[0] + jm[0][0] * v[1]) / det,
                                ];
                                let nw = w[0].hypot(w[1]);
                                v = [w[0] / nw, w[1] / nw];
                                nw.ln()
                            };
                            let val = if srb {
                                -lj
                            } else {
                                potential.evaluate(system, &z)
                            };
                            val + lj
                        }
                    };
                    pt += term;
                    lse[g - 1].add(pt + lh);
                    if gi < gens.len() && gens[gi] == g {
                        let s = seed.map(|sf| sf.eval(z.base()).ln()).unwrap_or(0.0);
                        out[gi].push(pt + s + lh);
                        gi += 1;
                    }
                }
            }
            (out, lse)
        })
        .collect();
    Ok(merge_chunks(chunks, gens, n))
}

fn normalize(log_w: &[f64]) -> (Vec<f64>, f64) {
    let mut l = Lse::EMPTY;
    log_w.iter().for_each(|&v| l.add(v));
    let tot = l.value();
    (log_w.iter().map(|&v| (v - tot).exp()).collect(), tot)
}

/// `leaf_measure_with` using the default options (unstable leaf, cell
/// means, Cesàro averaging, Lebesgue seed).
pub fn leaf_measure(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    r: f64,
    n: usize,
    n_atoms: usize,
) -> Result<(WeightedLeafMeasure, PressureReport)> {
    leaf_measure_with(system, potential, x, r, n, n_atoms, &LeafOptions::default())
}

/// Depth-`n` leaf measure on the window `W(x, r)` with `n_atoms` cells,
/// normalized to probability (absolute generation-`n` mass in `log_scale`),
/// together with the leaf-growth pressure estimate.
pub fn leaf_measure_with(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    r: f64,
    n: usize,
    n_atoms: usize,
    opts: &LeafOptions,
) -> Result<(WeightedLeafMeasure, PressureReport)> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "leaf measure depth must be at least 1".into(),
        ));
    }
    if n > MAX_DEPTH {
        return Err(Error::Guard {
            what: "leaf measure depth",
            value: n as f64,
            limit: MAX_DEPTH as f64,
        });
    }
    if n_atoms < 2 {
        return Err(Error::InvalidInput(
            "a leaf measure needs at least 2 atoms".into(),
        ));
    }
    let segment = LeafSegment::new(system, *x, opts.kind, r)?;
    let seed = seed_function(&opts.seed)?;
    let h = 2.0 * r / n_atoms as f64;
    let ts: Vec<f64> = (0..n_atoms).map(|j| -r + (j as f64 + 0.5) * h).collect();
    let q = if opts.cesaro { n.div_ceil(4).max(1) } else { 1 };
    let mut gens: Vec<usize> = ((n + 1 - q)..=n).collect();
    if n >= 2 && !gens.contains(&(n - 1)) {
        gens.insert(0, n - 1);
    }
    let run = match (potential.base_function(), system.is_linear_base()) {
        (Some(f), true) => run_linear(
            system,
            f,
            x.base(),
            opts.kind,
            &ts,
            h,
            n,
            &gens,
            opts.quadrature,
            seed.as_ref(),
        ),
        _ => run_generic(system, potential, &segment, &ts, h, n, &gens, seed.as_ref())?,
    };
    // Pressure from point-quadrature masses.
    let mut trace = Vec::with_capacity(n);
    let mut prev = (2.0 * r).ln();
    for &lm in &run.log_mass_point {
        trace.push(lm - prev);
        prev = lm;
    }
    let m = 5.max(n / 4).min(n);
    let tail = &trace[n - m..];
    let value = tail.iter().sum::<f64>() / m as f64;
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    // Shape from the requested quadrature.
    let pos = |g: usize| {
        run.gens
            .iter()
            .position(|&x| x == g)
            .expect("generation kept")
    };
    let (p_n, log_total) = normalize(&run.log_w[pos(n)]);
    let tv_last = if n >= 2 {
        let (p_prev, _) = normalize(&run.log_w[pos(n - 1)]);
        0.5 * p_n
            .iter()
            .zip(&p_prev)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    } else {
        f64::NAN
    };
    let probs = if q > 1 {
        let mut acc = vec![0.0; n_atoms];
        for g in (n + 1 - q)..=n {
            let (p, _) = normalize(&run.log_w[pos(g)]);
            acc.iter_mut().zip(p).for_each(|(a, b)| *a += b / q as f64);
        }
        acc
    } else {
        p_n
    };
    let mass: f64 = probs.iter().sum();
    let measure = WeightedLeafMeasure {
        segment,
        atoms: ts
            .iter()
            .zip(&probs)
            .map(|(&t, &w)| super::Atom { t, w })
            .collect(),
        cell_width: h,
        mass,
        log_scale: log_total,
        generation: n,
        pressure_trace: trace.clone(),
    };
    let mut params = BTreeMap::new();
    params.insert("half_width".into(), r);
    params.insert("n_atoms".into(), n_atoms as f64);
    params.insert("depth".into(), n as f64);
    params.insert("cesaro_window".into(), q as f64);
    params.insert("tv_last_step".into(), tv_last);
    params.insert(
        "converged".into(),
        if tv_last.is_nan() || tv_last <= opts.tv_tolerance {
            1.0
        } else {
            0.0
        },
    );
    let report = PressureReport {
        method: PressureMethod::LeafGrowth,
        value,
        n_used: m,
        params,
        error_estimate: (0.5 * spread).max((trace[n - 1] - value).abs()),
        spread,
        trace,
    };
    Ok((measure, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;

    fn sys(c: usize) -> SystemSpec {
        let freqs = [0.5f64.sqrt(), 0.3][..c].to_vec();
        SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), freqs).unwrap()
    }

    fn pot(s: &SystemSpec, k: PotentialKind) -> PotentialSpec {
        PotentialSpec::new(k, s).unwrap()
    }

    #[test]
    fn margulis_and_srb() {
        let s = sys(1);
        let x = TorusPoint::new(&[0.2, 0.3, 0.4]).unwrap();
        let (m, p) = leaf_measure(&s, &pot(&s, PotentialKind::zero()), &x, 0.1, 20, 1000).unwrap();
        assert!((p.value - s.log_lambda()).abs() < 1e-12);
        m.check_invariants().unwrap();
        let (m, p) = leaf_measure(&s, &pot(&s, PotentialKind::Srb), &x, 0.1, 20, 1000).unwrap();
        assert_eq!(p.value, 0.0);
        let d = m.densities();
        assert!(d.iter().all(|v| (v - d[0]).abs() < 1e-10));
    }

    #[test]
    fn constant_shift_is_exact() {
        let s = sys(0);
        let x = TorusPoint::new(&[0.2, 0.3]).unwrap();
        let trig = TrigPolynomial::cosine(vec![1, 0], 0.3);
        let (_, p0) = leaf_measure(
            &s,
            &pot(&s, PotentialKind::trig(trig.clone())),
            &x,
            0.1,
            15,
            2000,
        )
        .unwrap();
        let (_, p1) = leaf_measure(
            &s,
            &pot(&s, PotentialKind::trig(trig.plus_constant(0.25, 2))),
            &x,
            0.1,
            15,
            2000,
        )
        .unwrap();
        assert!((p1.value - p0.value - 0.25).abs() < 1e-10);
    }

    #[test]
    fn trig_pressure_is_plausible_and_stable_matches() {
        let s = sys(0);
        let x = TorusPoint::new(&[0.31, 0.17]).unwrap();
        let p = pot(
            &s,
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
        );
        let (m, rep) = leaf_measure(&s, &p, &x, 0.1, 25, 20_000).unwrap();
        m.check_invariants().unwrap();
        // log λ + ∫φ ≤ P ≤ log λ + sup φ
        assert!(
            rep.value > s.log_lambda() && rep.value < s.log_lambda() + 0.3,
            "{}",
            rep.value
        );
        assert!(rep.spread < 1e-2, "spread {}", rep.spread);
        let opts = LeafOptions {
            kind: LeafKind::Stable,
            ..LeafOptions::default()
        };
        let (_, rep_s) = leaf_measure_with(&s, &p, &x, 0.1, 25, 20_000, &opts).unwrap();
        assert!(
            (rep_s.value - rep.value).abs() < 1e-2,
            "{} {}",
            rep.value,
            rep_s.value
        );
    }

    #[test]
    fn seed_independence() {
        let s = sys(0);
        let x = TorusPoint::new(&[0.31, 0.17]).unwrap();
        let p = pot(
            &s,
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
        );
        let (a, _) = leaf_measure(&s, &p, &x, 0.1, 30, 4000).unwrap();
        let opts = LeafOptions {
            seed: super::super::smooth_seed(0.5),
            ..LeafOptions::default()
        };
        let (b, _) = leaf_measure_with(&s, &p, &x, 0.1, 30, 4000, &opts).unwrap();
        let tv: f64 = 0.5
            * a.probabilities()
                .iter()
                .zip(b.probabilities())
                .map(|(u, v)| (u - v).abs())
                .sum::<f64>();
        assert!(tv < 1e-3, "{tv}");
    }

    #[test]
    fn generic_path_agrees_with_point_quadrature() {
        let s = sys(1);
        let x = TorusPoint::new(&[0.31, 0.17, 0.5]).unwrap();
        let trig = TrigPolynomial::cosine(vec![1, 0], 0.3);
        let base = pot(&s, PotentialKind::trig(trig.clone()));
        let mut full = trig.clone();
        full = TrigPolynomial::new(
            full.modes()
                .iter()
                .map(|m| crate::torus::TrigMode::new(vec![m.mode[0], m.mode[1], 0], m.cos, m.sin))
                .collect(),
        );
        let fib = pot(&s, PotentialKind::FiberTrig { modes: full });
        let opts = LeafOptions {
            quadrature: Quadrature::Point,
            cesaro: false,
            ..LeafOptions::default()
        };
        let (a, pa) = leaf_measure_with(&s, &base, &x, 0.1, 8, 500, &opts).unwrap();
        let (b, pb) = leaf_measure_with(&s, &fib, &x, 0.1, 8, 500, &opts).unwrap();
        assert!((pa.value - pb.value).abs() < 1e-6);
        for (u, v) in a.probabilities().iter().zip(b.probabilities()) {
            assert!((u - v).abs() < 1e-6 * u.max(1e-3));
        }
    }
}
