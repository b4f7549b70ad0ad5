//! Covering-number pressure: greedy `(ε, n)`-Bowen-ball covers of a uniform
//! grid and the growth rate of `Σ_{x∈E} e^{S_nφ(x)}`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PressureMethod, PressureReport};
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::torus::{SystemSpec, TorusPoint};

/// Parameters of the spanning-set estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpanningOptions {
    pub epsilon: f64,
    /// Depths of the ladder; the pressure is the least-squares slope of
    /// `log S(ε, n)` over them (or `log S(ε, n)/n` for a single depth).
    pub depths: Vec<usize>,
    /// Grid points per base axis.
    pub base_resolution: usize,
    /// Grid points per fiber axis.
    pub fiber_resolution: usize,
    /// Cap on grid points × depth.
    pub budget: f64,
    /// Exponent `m` of the base lattice `A^{-m}(Z_N²/N)`; `None` picks
    /// `⌊(n_max − 1)/2⌋` so the same grid serves the whole ladder.  `Some(0)`
    /// is the square grid.
    pub tilt: Option<usize>,
}

impl Default for SpanningOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            depths: vec![3, 4, 5, 6, 7],
            base_resolution: 1024,
            fiber_resolution: 2,
            budget: 1e8,
            tilt: None,
        }
    }
}

impl SpanningOptions {
    /// Defaults per center dimension.  With a center, the fiber shear makes
    /// Bowen balls several times thinner, so a larger `ε` keeps them resolved
    /// by a grid that fits the budget.  A fiber spacing of `1/2 ≥ ε` keeps
    /// the layers independent, which leaves the growth rate unchanged.
    pub fn for_center_dim(c: usize) -> Self {
        match c {
            0 => Self::default(),
            _ => Self {
                epsilon: 0.2,
                base_resolution: 768,
                ..Self::default()
            },
        }
    }

    fn grid_size(&self, c: usize) -> f64 {
        (self.base_resolution as f64).powi(2) * (self.fiber_resolution as f64).powi(c as i32)
    }
}

/// The uniform base lattice `A^{-m}(Z_N²/N)`: the image of the square
/// `N × N` grid under the torus automorphism `A^{-m}`.  It has the same
/// number of points and the same covolume as the square grid, but its
/// spacing is `λ^{-m}/N` along the unstable and `λ^m/N` along the stable
/// direction, which matches the shape of deep Bowen balls.
#[derive(Clone, Copy)]
struct Lattice {
    n: usize,
    /// `A^{-m}` reduced mod `N`.
    m: [[u64; 2]; 2],
}

impl Lattice {
    fn new(system: &SystemSpec, n: usize, tilt: usize) -> Self {
        let a = system.base_matrix();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let inv = [
            [a[1][1] * det, -a[0][1] * det],
            [-a[1][0] * det, a[0][0] * det],
        ];
        let md = n as i128;
        let mut acc = [[1i128, 0], [0, 1]];
        for _ in 0..tilt {
            let mut next = [[0i128; 2]; 2];
            for (i, row) in next.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (acc[i][0] * inv[0][j] as i128 + acc[i][1] * inv[1][j] as i128)
                        .rem_euclid(md);
                }
            }
            acc = next;
        }
        let m = [
            [acc[0][0] as u64, acc[0][1] as u64],
            [acc[1][0] as u64, acc[1][1] as u64],
        ];
        Self { n, m }
    }

    fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let n = self.n as u64;
        let (i, j) = (i as u64, j as u64);
        let u = (self.m[0][0] * i + self.m[0][1] * j) % n;
        let v = (self.m[1][0] * i + self.m[1][1] * j) % n;
        [u as f64 / n as f64, v as f64 / n as f64]
    }
}

fn grid_point(opts: &SpanningOptions, lattice: &Lattice, c: usize, idx: usize) -> TorusPoint {
    let b = opts.base_resolution;
    let f = opts.fiber_resolution;
    let mut fiber = [0.0; 2];
    let mut rest = idx;
    for slot in fiber.iter_mut().take(c) {
        *slot = (rest % f) as f64 / f as f64;
        rest /= f;
    }
    TorusPoint::from_base_fiber(lattice.point(rest / b, rest % b), &fiber[..c])
}

/// Orbit coordinates (`n × dim`, flat) and Birkhoff sum of one grid point.
fn orbit_into(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: TorusPoint,
    n: usize,
    out: &mut [f64],
) -> f64 {
    let d = x.dim();
    let mut z = x;
    let mut birkhoff = 0.0;
    for j in 0..n {
        birkhoff += potential.evaluate(system, &z);
        out[j * d..(j + 1) * d].copy_from_slice(z.coords());
        if j + 1 < n {
            z = system.step_forward(&z);
        }
    }
    birkhoff
}

#[inline]
fn cell(v: f64, m: usize) -> usize {
    ((v * m as f64) as usize).min(m - 1)
}

/// `true` iff every pair of orbit points is closer than `eps` (squared ℓ² with wrapping).
#[inline]
fn within(a: &[f64], b: &[f64], d: usize, eps2: f64) -> bool {
    a.chunks_exact(d).zip(b.chunks_exact(d)).all(|(p, q)| {
        let mut s = 0.0;
        for i in 0..d {
            let mut t = (p[i] - q[i]).abs();
            if t > 0.5 {
                t = 1.0 - t;
            }
            s += t * t;
        }
        s < eps2
    })
}

/// One greedy cover: returns (number of balls, `log Σ e^{S_nφ(center)}`).
fn greedy_cover(
    system: &SystemSpec,
    potential: &PotentialSpec,
    opts: &SpanningOptions,
    n: usize,
) -> (usize, f64) {
    let c = system.center_dim();
    let d = 2 + c;
    let total = opts.grid_size(c) as usize;
    let eps2 = opts.epsilon * opts.epsilon;
    // Centers are bucketed by the base cells (side ≥ ε) of their first and
    // last orbit points; any ball containing a point lies in the neighbouring
    // buckets.
    let m = ((1.0 / opts.epsilon).floor() as usize).clamp(1, 24);
    // Distinct fiber layers of the grid at distance ≥ ε can never cover each
    // other, so the layer becomes part of the key.
    let layers = opts.fiber_resolution.pow(c as u32);
    let separable = c > 0 && 1.0 / opts.fiber_resolution as f64 >= opts.epsilon;
    let key_layers = if separable { layers } else { 1 };
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); m.pow(4) * key_layers];
    let mut centers: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let tilt = opts
        .tilt
        .unwrap_or((opts.depths.iter().max().copied().unwrap_or(1) - 1) / 2);
    let lattice = Lattice::new(system, opts.base_resolution, tilt);
    let stride = n * d;
    let chunk = 1 << 15;
    let mut buf = vec![0.0; chunk * stride];
    let mut birk = vec![0.0; chunk];
    let mut keys = Vec::with_capacity(81);
    let mut hint: Vec<Option<u32>> = vec![None; layers];
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let len = end - start;
        buf[..len * stride]
            .par_chunks_mut(stride)
            .zip(birk[..len].par_iter_mut())
            .enumerate()
            .for_each(|(i, (o, b))| {
                *b = orbit_into(
                    system,
                    potential,
                    grid_point(opts, &lattice, c, start + i),
                    n,
                    o,
                )
            });
        for i in 0..len {
            let o = &buf[i * stride..(i + 1) * stride];
            let last = &o[(n - 1) * d..];
            let base = [
                cell(o[0], m),
                cell(o[1], m),
                cell(last[0], m),
                cell(last[1], m),
            ];
            let layer = (start + i) % layers;
            let layer_key = if separable { layer * m.pow(4) } else { 0 };
            keys.clear();
            for k in 0..81usize {
                let mut idx = 0;
                let mut q = k;
                for b in base {
                    idx = idx * m + (b + m + q % 3 - 1) % m;
                    q /= 3;
                }
                keys.push(idx + layer_key);
            }
            if m < 3 {
                keys.sort_unstable();
                keys.dedup();
            }
            // Consecutive grid points of one fiber layer are usually covered
            // by the same center: try that one first.
            let covers = |ci: u32| {
                within(
                    &centers[ci as usize * stride..(ci as usize + 1) * stride],
                    o,
                    d,
                    eps2,
                )
            };
            let covered = match hint[layer] {
                Some(ci) if covers(ci) => true,
                _ => match keys
                    .iter()
                    .find_map(|&k| buckets[k].iter().rev().copied().find(|&ci| covers(ci)))
                {
                    Some(ci) => {
                        hint[layer] = Some(ci);
                        true
                    }
                    None => false,
                },
            };
            if !covered {
                hint[layer] = Some(weights.len() as u32);
                let own = base.iter().fold(0, |a, &b| a * m + b) + layer_key;
                buckets[own].push(weights.len() as u32);
                centers.extend_from_slice(o);
                weights.push(birk[i]);
            }
        }
        start = end;
    }
    let mx = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = weights.iter().map(|w| (w - mx).exp()).sum();
    (weights.len(), mx + sum.ln())
}

/// Greedy spanning-set pressure estimate over the depth ladder in `opts`.
pub fn spanning_set_pressure(
    system: &SystemSpec,
    potential: &PotentialSpec,
    opts: &SpanningOptions,
) -> Result<PressureReport> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 0.5) {
        return Err(Error::InvalidInput(format!(
            "ε must lie in (0, 0.5), got {}",
            opts.epsilon
        )));
    }
    if opts.depths.is_empty() || opts.depths.contains(&0) {
        return Err(Error::InvalidInput(
            "the depth ladder must be non-empty and positive".into(),
        ));
    }
    if opts.base_resolution < 2 || (system.center_dim() > 0 && opts.fiber_resolution < 1) {
        return Err(Error::InvalidInput("grid resolution too small".into()));
    }
    let grid = opts.grid_size(system.center_dim());
    let depth_sum: usize = opts.depths.iter().sum();
    let needed = grid * depth_sum as f64;
    if needed > opts.budget {
        return Err(Error::Budget {
            what: "spanning-set point iterations",
            needed,
            budget: opts.budget,
        });
    }
    let mut logs = Vec::with_capacity(opts.depths.len());
    let mut counts = Vec::with_capacity(opts.depths.len());
    for &n in &opts.depths {
        let (count, log_sum) = greedy_cover(system, potential, opts, n);
        logs.push(log_sum);
        counts.push(count);
    }
    let trace: Vec<f64> = opts
        .depths
        .iter()
        .zip(&logs)
        .map(|(&n, l)| l / n as f64)
        .collect();
    let (value, error_estimate) = if opts.depths.len() == 1 {
        (trace[0], f64::NAN)
    } else {
        let ns: Vec<f64> = opts.depths.iter().map(|&n| n as f64).collect();
        let (slope, resid) = lsq_slope(&ns, &logs);
        (slope, resid)
    };
    let incr: Vec<f64> = logs
        .windows(2)
        .zip(opts.depths.windows(2))
        .map(|(l, n)| (l[1] - l[0]) / (n[1] - n[0]) as f64)
        .collect();
    let spread = if incr.is_empty() {
        0.0
    } else {
        incr.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - incr.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let mut params = BTreeMap::new();
    params.insert("epsilon".into(), opts.epsilon);
    params.insert("base_resolution".into(), opts.base_resolution as f64);
    params.insert("fiber_resolution".into(), opts.fiber_resolution as f64);
    params.insert("point_iterations".into(), needed);
    for (n, cnt) in opts.depths.iter().zip(&counts) {
        params.insert(format!("balls_n{n}"), *cnt as f64);
    }
    Ok(PressureReport {
        method: PressureMethod::SpanningSet,
        value,
        n_used: *opts.depths.iter().max().unwrap(),
        params,
        error_estimate,
        spread,
        trace,
    })
}

/// Least-squares slope and the standard error of that slope.
pub(crate) fn lsq_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, 0.0);
    }
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;
    use crate::torus::TrigPolynomial;

    /// Independent O(N²) greedy cover by plain ε-balls.
    fn brute_cover(res: usize, eps: f64) -> usize {
        let pts: Vec<TorusPoint> = (0..res * res)
            .map(|i| {
                TorusPoint::new(&[(i / res) as f64 / res as f64, (i % res) as f64 / res as f64])
                    .unwrap()
            })
            .collect();
        let mut centers: Vec<TorusPoint> = Vec::new();
        for p in pts {
            if !centers.iter().any(|c| c.distance(&p) < eps) {
                centers.push(p);
            }
        }
        centers.len()
    }

    #[test]
    fn depth_one_matches_brute_force_cover() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        for (res, eps) in [(20, 0.15), (30, 0.1), (25, 0.3)] {
            let opts = SpanningOptions {
                epsilon: eps,
                depths: vec![1],
                base_resolution: res,
                ..SpanningOptions::default()
            };
            let rep = spanning_set_pressure(&s, &zero, &opts).unwrap();
            assert!(
                (rep.value - (brute_cover(res, eps) as f64).ln()).abs() < 1e-12,
                "{res} {eps}"
            );
        }
    }

    #[test]
    fn constant_shift_is_exact_and_budget_guard() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let c = PotentialSpec::new(PotentialKind::Constant { value: 0.37 }, &s).unwrap();
        let opts = SpanningOptions {
            depths: vec![1, 2, 3],
            base_resolution: 200,
            ..SpanningOptions::default()
        };
        let a = spanning_set_pressure(&s, &zero, &opts).unwrap();
        let b = spanning_set_pressure(&s, &c, &opts).unwrap();
        assert!((b.value - a.value - 0.37).abs() < 1e-9);
        let big = SpanningOptions {
            base_resolution: 100_000,
            ..SpanningOptions::default()
        };
        assert!(matches!(
            spanning_set_pressure(&s, &zero, &big),
            Err(Error::Budget { .. })
        ));
    }
}
