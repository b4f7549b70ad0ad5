//! Exact sampling from the assembled equilibrium state.
//!
//! The base torus is tiled by the first-return rectangles of the unstable
//! flow, each rectangle is cut into dynamical boxes of side at most
//! `2·box_scale`, and every box carries its product-form measure.  A sample
//! picks a box by mass, a plaque cell by `μ^{cs}` mass, an unstable parameter
//! by the inverse CDF of `ν^u`, and a uniform center coordinate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boxes::{base_only, BoxGrid, DynamicalBox, ParamRect};
use super::partition::first_return_partition;
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::torus::{SystemSpec, TorusPoint};

/// Samples drawn from one RNG stream; the stream index is the chunk index,
/// so the output does not depend on the number of worker threads.
pub const CHUNK: usize = 1 << 16;

/// Construction parameters of the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions {
    /// Largest half side of a box (at most the product-structure scale).
    pub box_scale: f64,
    pub grid: BoxGrid,
    pub seed: u64,
    /// Largest number of samples a single request may draw.
    pub max_samples: usize,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            box_scale: 0.05,
            grid: BoxGrid::default(),
            seed: 0,
            max_samples: 50_000_000,
        }
    }
}

/// A sample together with its box coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxSample {
    pub row: usize,
    pub sigma: f64,
    pub tau: f64,
}

/// The assembled equilibrium state over a box partition.
#[derive(Clone, Debug)]
pub struct EquilibriumSampler {
    pub system: SystemSpec,
    pub potential: PotentialSpec,
    pub options: SamplerOptions,
    pub boxes: Vec<DynamicalBox>,
    /// Cumulative normalized box masses (length `boxes.len() + 1`).
    box_cdf: Vec<f64>,
    /// `log Σ_B m(B)`, the normalizing constant.
    pub log_total: f64,
}

fn search(cdf: &[f64], r: f64) -> usize {
    let n = cdf.len() - 1;
    cdf.partition_point(|&c| c <= r).clamp(1, n) - 1
}

/// Draws box coordinates from one box.
fn draw_in_box<R: Rng>(bx: &DynamicalBox, rng: &mut R) -> BoxSample {
    let row = search(&bx.plaque_cdf, rng.gen::<f64>());
    let hs = bx.cell_s();
    let sigma = bx.sigma[row] + (rng.gen::<f64>() - 0.5) * hs;
    let cdf = &bx.row_cdf[row];
    let r = rng.gen::<f64>();
    let j = search(cdf, r);
    let width = cdf[j + 1] - cdf[j];
    let frac = if width > 0.0 {
        ((r - cdf[j]) / width).clamp(0.0, 1.0)
    } else {
        rng.gen::<f64>()
    };
    let tau = -bx.half_u + (j as f64 + frac) * bx.cell_u();
    BoxSample { row, sigma, tau }
}

fn center_coords<R: Rng>(rng: &mut R, c: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    out.iter_mut().take(c).for_each(|v| *v = rng.gen::<f64>());
    out
}

/// Conditional sampler of one box restricted to a parameter rectangle
/// (the center coordinates range over the whole fiber).
pub struct RectDraw<'a> {
    bx: &'a DynamicalBox,
    u: [f64; 2],
    rows: Vec<(usize, f64, f64, f64, f64)>,
    cdf: Vec<f64>,
    /// `log m^{W,B}` of the rectangle.
    pub log_mass: f64,
}

impl<'a> RectDraw<'a> {
    pub fn new(bx: &'a DynamicalBox, rect: &ParamRect) -> Result<Self> {
        if !rect.c.is_empty() {
            return Err(Error::InvalidInput(
                "restricted sampling ranges over the whole center fiber".into(),
            ));
        }
        let log_mass = bx.log_measure(rect)?;
        if log_mass == f64::NEG_INFINITY {
            return Err(Error::InvalidInput(format!(
                "rectangle {rect:?} has no mass"
            )));
        }
        let hs = bx.cell_s();
        let mut rows = Vec::new();
        let mut logw = Vec::new();
        for (i, &s) in bx.sigma.iter().enumerate() {
            let lo = (s - 0.5 * hs).max(rect.s[0]);
            let hi = (s + 0.5 * hs).min(rect.s[1]);
            let (c0, c1) = (bx.row_cdf_at(i, rect.u[0]), bx.row_cdf_at(i, rect.u[1]));
            if hi > lo && c1 > c0 {
                rows.push((i, lo, hi, c0, c1));
                logw.push(
                    bx.cs_log_weights[i] + bx.row_log_mass[i] + ((hi - lo) / hs * (c1 - c0)).ln(),
                );
            }
        }
        let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for l in &logw {
            acc += (l - m).exp();
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            bx,
            u: rect.u,
            rows,
            cdf,
            log_mass,
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> BoxSample {
        let (row, lo, hi, c0, c1) = self.rows[search(&self.cdf, rng.gen::<f64>())];
        let sigma = lo + rng.gen::<f64>() * (hi - lo);
        let cdf = &self.bx.row_cdf[row];
        let r = c0 + rng.gen::<f64>() * (c1 - c0);
        let j = search(cdf, r);
        let width = cdf[j + 1] - cdf[j];
        let frac = if width > 0.0 {
            ((r - cdf[j]) / width).clamp(0.0, 1.0)
        } else {
            rng.gen::<f64>()
        };
        let tau =
            (-self.bx.half_u + (j as f64 + frac) * self.bx.cell_u()).clamp(self.u[0], self.u[1]);
        BoxSample { row, sigma, tau }
    }
}

impl EquilibriumSampler {
    /// Builds the box partition and every box measure.  Requires a linear
    /// base and a potential that does not depend on the center coordinates.
    pub fn build(
        system: &SystemSpec,
        potential: &PotentialSpec,
        options: &SamplerOptions,
    ) -> Result<Self> {
        base_only(system, potential)?;
        if !(options.box_scale > 0.0 && options.box_scale <= 0.1) {
            return Err(Error::InvalidInput(format!(
                "box_scale {} must lie in (0, 0.1], the validated product-structure scale",
                options.box_scale
            )));
        }
        let rects = first_return_partition(system)?;
        let (e_s, e_u) = (system.e_s(), system.e_u());
        let mut specs = Vec::new();
        for r in &rects {
            let ns = ((r.s1 - r.s0) / (2.0 * options.box_scale)).ceil().max(1.0) as usize;
            let nu = (r.height / (2.0 * options.box_scale)).ceil().max(1.0) as usize;
            let (a_s, a_u) = (0.5 * (r.s1 - r.s0) / ns as f64, 0.5 * r.height / nu as f64);
            for i in 0..ns {
                for j in 0..nu {
                    let sc = r.s0 + (2 * i + 1) as f64 * a_s;
                    let tc = (2 * j + 1) as f64 * a_u;
                    let base = [sc * e_s[0] + tc * e_u[0], sc * e_s[1] + tc * e_u[1]];
                    specs.push((
                        TorusPoint::from_base_fiber(base, &vec![0.0; system.center_dim()]),
                        a_s,
                        a_u,
                    ));
                }
            }
        }
        let boxes = specs
            .par_iter()
            .map(|&(c, a_s, a_u)| {
                DynamicalBox::build(system, potential, c, a_s, a_u, &options.grid)
            })
            .collect::<Result<Vec<_>>>()?;
        let logs: Vec<f64> = boxes.iter().map(|b| b.log_mass).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut box_cdf = vec![0.0];
        let mut acc = 0.0;
        for l in &logs {
            acc += (l - m).exp();
            box_cdf.push(acc);
        }
        box_cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self {
            system: system.clone(),
            potential: potential.clone(),
            options: options.clone(),
            boxes,
            box_cdf,
            log_total: m + acc.ln(),
        })
    }

    /// Probability of box `i`.
    pub fn box_probability(&self, i: usize) -> f64 {
        self.box_cdf[i + 1] - self.box_cdf[i]
    }

    fn check_budget(&self, count: usize) -> Result<()> {
        if count > self.options.max_samples {
            return Err(Error::Budget {
                what: "sampling",
                needed: count as f64,
                budget: self.options.max_samples as f64,
            });
        }
        Ok(())
    }

    /// `count` samples with the sampler's own seed.
    pub fn sample(&self, count: usize) -> Result<Vec<TorusPoint>> {
        self.sample_seeded(count, self.options.seed)
    }

    /// `count` samples; bit-identical for identical `(seed, count)`.
    pub fn sample_seeded(&self, count: usize, seed: u64) -> Result<Vec<TorusPoint>> {
        self.check_budget(count)?;
        let c = self.system.center_dim();
        let chunks = count.div_ceil(CHUNK);
        let out: Vec<Vec<TorusPoint>> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let len = CHUNK.min(count - k * CHUNK);
                (0..len)
                    .map(|_| {
                        let b = &self.boxes[search(&self.box_cdf, rng.gen::<f64>())];
                        let s = draw_in_box(b, &mut rng);
                        let cc = center_coords(&mut rng, c);
                        b.point(&self.system, s.sigma, s.tau, &cc[..c])
                    })
                    .collect()
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }

    /// Streams `count` samples through `fold` (per chunk) and combines the
    /// chunk results with `reduce`; memory stays bounded by one chunk.
    pub fn fold_samples<T, F, G>(
        &self,
        count: usize,
        seed: u64,
        init: T,
        fold: F,
        reduce: G,
    ) -> Result<T>
    where
        T: Clone + Send + Sync,
        F: Fn(&mut T, &TorusPoint) + Sync,
        G: Fn(T, T) -> T + Sync,
    {
        self.check_budget(count)?;
        let c = self.system.center_dim();
        let chunks = count.div_ceil(CHUNK);
        Ok((0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let len = CHUNK.min(count - k * CHUNK);
                let mut acc = init.clone();
                for _ in 0..len {
                    let b = &self.boxes[search(&self.box_cdf, rng.gen::<f64>())];
                    let s = draw_in_box(b, &mut rng);
                    let cc = center_coords(&mut rng, c);
                    fold(&mut acc, &b.point(&self.system, s.sigma, s.tau, &cc[..c]));
                }
                acc
            })
            .reduce(|| init.clone(), &reduce))
    }

    /// Streams `count` samples of the measure conditioned on a rectangle of
    /// a box (uniform center coordinates) through `fold`, as
    /// [`fold_samples`](Self::fold_samples) does.
    pub fn fold_rect<T, F, G>(
        &self,
        draw: &RectDraw,
        count: usize,
        seed: u64,
        init: T,
        fold: F,
        reduce: G,
    ) -> Result<T>
    where
        T: Clone + Send + Sync,
        F: Fn(&mut T, &TorusPoint) + Sync,
        G: Fn(T, T) -> T + Sync,
    {
        self.check_budget(count)?;
        let c = self.system.center_dim();
        let chunks = count.div_ceil(CHUNK);
        Ok((0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let mut acc = init.clone();
                for _ in 0..CHUNK.min(count - k * CHUNK) {
                    let s = draw.draw(&mut rng);
                    let cc = center_coords(&mut rng, c);
                    fold(
                        &mut acc,
                        &draw.bx.point(&self.system, s.sigma, s.tau, &cc[..c]),
                    );
                }
                acc
            })
            .reduce(|| init.clone(), &reduce))
    }

    /// `count` samples of the conditional measure on one box, in box
    /// coordinates.
    pub fn sample_in_box(
        &self,
        bx: &DynamicalBox,
        count: usize,
        seed: u64,
    ) -> Result<Vec<BoxSample>> {
        self.check_budget(count)?;
        let chunks = count.div_ceil(CHUNK);
        let out: Vec<Vec<BoxSample>> = (0..chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                (0..CHUNK.min(count - k * CHUNK))
                    .map(|_| draw_in_box(bx, &mut rng))
                    .collect()
            })
            .collect();
        Ok(out.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialKind;
    use crate::torus::TrigPolynomial;

    #[test]
    fn deterministic_and_thread_independent() {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034]).unwrap();
        let p = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &p, &SamplerOptions::default()).unwrap();
        let a = sm.sample_seeded(70_000, 5).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sm.sample_seeded(70_000, 5).unwrap());
        assert_eq!(a.len(), 70_000);
        assert!(a.iter().zip(&b).all(|(x, y)| x.coords() == y.coords()));
        let sum = sm
            .fold_samples(70_000, 5, 0.0, |acc, x| *acc += x.coords()[0], |a, b| a + b)
            .unwrap();
        assert!((sum - a.iter().map(|x| x.coords()[0]).sum::<f64>()).abs() < 1e-6);
        assert!(matches!(
            sm.sample(sm.options.max_samples + 1),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn boxes_tile_with_lebesgue_masses_for_constant_potentials() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let p = PotentialSpec::new(PotentialKind::Constant { value: 0.3 }, &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &p, &SamplerOptions::default()).unwrap();
        let area = super::super::partition::eigen_area(&s);
        for (i, b) in sm.boxes.iter().enumerate() {
            let lebesgue = 4.0 * b.half_s * b.half_u * area;
            assert!((sm.box_probability(i) - lebesgue).abs() < 1e-12);
        }
    }
}
