//! Verification suite for the assembled equilibrium state: invariance and
//! `P = P′`, Gibbs ratio ladders, Brin–Katok entropy, conditional densities
//! along unstable leaves, correlation decay, coordinate histograms, box
//! overlap consistency and product-structure bounds.
//!
//! Bowen balls are not parameter rectangles, so their masses are estimated
//! by counting hits.  Over a linear base `B(x, ε, n)` lies inside the box
//! rectangle `|σ| < ε`, `|τ| < ε λ^{-(n-1)}` centered at `x`; the samples are
//! drawn from the equilibrium state conditioned on that rectangle, whose
//! mass is known exactly, and membership is decided by iterating the map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boxes::{BoxGrid, DynamicalBox, ParamRect};
use super::sampler::{EquilibriumSampler, RectDraw};
use crate::error::{Error, Result};
use crate::leaf::spanning::lsq_slope;
use crate::leaf::{leaf_measure, leaf_measure_with, nu_u, LeafOptions, PressureReport};
use crate::potentials::PotentialSpec;
use crate::torus::bowen::bowen_depth;
use crate::torus::{LeafKind, SystemSpec, TorusPoint, TrigPolynomial};

fn orbit(system: &SystemSpec, x: &TorusPoint, n: usize) -> Vec<TorusPoint> {
    let mut out = Vec::with_capacity(n);
    let mut y = *x;
    for _ in 0..n {
        out.push(y);
        y = system.step_forward(&y);
    }
    out
}

fn birkhoff(system: &SystemSpec, potential: &PotentialSpec, x: &TorusPoint, n: usize) -> f64 {
    let mut y = *x;
    let mut s = 0.0;
    for _ in 0..n {
        s += potential.evaluate(system, &y);
        y = system.step_forward(&y);
    }
    s
}

/// Pressure from unstable leaves of `f` and from stable leaves (the same
/// pipeline run on `f⁻¹`).
pub fn forward_backward_pressure(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    r: f64,
    n: usize,
    n_atoms: usize,
) -> Result<(PressureReport, PressureReport)> {
    let (_, forward) = leaf_measure(system, potential, x, r, n, n_atoms)?;
    let opts = LeafOptions {
        kind: LeafKind::Stable,
        ..LeafOptions::default()
    };
    let (_, backward) = leaf_measure_with(system, potential, x, r, n, n_atoms, &opts)?;
    Ok((forward, backward))
}

/// Result of the invariance check.
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub tests: usize,
    /// Largest `|m(f⁻¹U)/m(U) − 1|` over the test rectangles.
    pub max_rel: f64,
    pub mean_rel: f64,
    pub pressure: f64,
    pub pressure_backward: f64,
    pub pressure_gap: f64,
}

/// Compares `m(U)` with `m(f⁻¹U)` for `n_test_sets` random boxes `U` (half
/// sides in `[0.01, 0.03]`, whole center fiber).  Over a linear base
/// `f⁻¹U` is again a box, centered at `f⁻¹x` with the stable side
/// stretched and the unstable side shrunk by `λ`, so both masses are
/// computed by the same quadrature from independent leaf sections.
pub fn invariance_check(
    sampler: &EquilibriumSampler,
    n_test_sets: usize,
    seed: u64,
    pressures: (f64, f64),
) -> Result<InvarianceReport> {
    let system = &sampler.system;
    let lam = system.lambda();
    let grid = sampler.options.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rels = Vec::with_capacity(n_test_sets);
    for _ in 0..n_test_sets {
        let x =
            TorusPoint::from_base_fiber([rng.gen(), rng.gen()], &vec![0.0; system.center_dim()]);
        let (a_s, a_u) = (
            0.01 + 0.02 * rng.gen::<f64>(),
            0.01 + 0.02 * rng.gen::<f64>(),
        );
        let b1 = DynamicalBox::build(system, &sampler.potential, x, a_s, a_u, &grid)?;
        let b2 = DynamicalBox::build(
            system,
            &sampler.potential,
            system.step_backward(&x),
            lam * a_s,
            a_u / lam,
            &grid,
        )?;
        rels.push((b2.log_mass - b1.log_mass).exp_m1().abs());
    }
    Ok(InvarianceReport {
        tests: n_test_sets,
        max_rel: rels.iter().cloned().fold(0.0, f64::max),
        mean_rel: rels.iter().sum::<f64>() / rels.len().max(1) as f64,
        pressure: pressures.0,
        pressure_backward: pressures.1,
        pressure_gap: (pressures.0 - pressures.1).abs(),
    })
}

/// How Bowen-ball masses are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallEstimator {
    /// Samples conditioned on the enclosing box rectangle of each depth.
    Conditioned,
    /// Unconditioned samples with a doubling budget.
    Global,
}

/// Hit count and mass estimate for one Bowen ball.
#[derive(Clone, Debug, Serialize)]
pub struct BallMass {
    pub steps: usize,
    pub samples: usize,
    pub hits: usize,
    pub mass: f64,
    /// Largest `|S_mφ(x) − S_mφ(y)|` over the hits `y`, `m = steps − 1`.
    pub oscillation: f64,
}

/// Masses of `{y : d(f^j y, f^j x) < ε, 0 ≤ j < steps}` for each entry of
/// `steps`, each from `samples` conditioned samples.
pub fn ball_masses(
    sampler: &EquilibriumSampler,
    x: &TorusPoint,
    epsilon: f64,
    steps: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Vec<BallMass>> {
    let system = &sampler.system;
    if !(epsilon > 0.0 && epsilon <= sampler.options.box_scale.max(0.1)) {
        return Err(Error::InvalidInput(format!(
            "Bowen radius {epsilon} must lie in (0, 0.1]"
        )));
    }
    let max_steps = steps.iter().cloned().max().unwrap_or(1);
    let center_orbit = orbit(system, x, max_steps);
    let bx = DynamicalBox::build(
        system,
        &sampler.potential,
        *x,
        epsilon,
        epsilon,
        &sampler.options.grid,
    )?;
    let lam = system.lambda();
    steps
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            if m == 0 {
                return Err(Error::InvalidInput(
                    "a Bowen ball needs at least one step".into(),
                ));
            }
            let r = epsilon * lam.powi(1 - m as i32);
            let draw = RectDraw::new(&bx, &ParamRect::new([-r, r], [-epsilon, epsilon]))?;
            let sx = birkhoff(system, &sampler.potential, x, m - 1);
            let (hits, osc) = sampler.fold_rect(
                &draw,
                samples,
                seed.wrapping_add(k as u64),
                (0usize, 0.0f64),
                |acc, y| {
                    if bowen_depth(system, &center_orbit, epsilon, m, y) >= m {
                        acc.0 += 1;
                        acc.1 = acc
                            .1
                            .max((birkhoff(system, &sampler.potential, y, m - 1) - sx).abs());
                    }
                },
                |a, b| (a.0 + b.0, a.1.max(b.1)),
            )?;
            let mass = (draw.log_mass - sampler.log_total).exp() * hits as f64 / samples as f64;
            Ok(BallMass {
                steps: m,
                samples,
                hits,
                mass,
                oscillation: osc,
            })
        })
        .collect()
}

/// Options of [`gibbs_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsOptions {
    pub epsilon: f64,
    pub n_max: usize,
    /// Total samples (split evenly over the depths for the conditioned
    /// estimator; the initial budget for the global one).
    pub samples: usize,
    pub min_hits: usize,
    pub estimator: BallEstimator,
    pub seed: u64,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n_max: 10,
            samples: 1_000_000,
            min_hits: 100,
            estimator: BallEstimator::Conditioned,
            seed: 0,
        }
    }
}

/// One rung of the ratio ladder.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsRow {
    pub n: usize,
    pub samples: usize,
    pub hits: usize,
    pub mass: f64,
    pub birkhoff: f64,
    pub ratio: f64,
    pub log_ratio: f64,
    /// Standard error of `log R_n` (`1/√hits`).
    pub stderr_log: f64,
    pub oscillation: f64,
}

/// Ratio ladder and its fitted exponential rate.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsReport {
    pub center: TorusPoint,
    pub epsilon: f64,
    pub pressure: f64,
    pub rows: Vec<GibbsRow>,
    /// Least-squares slope of `log R_n` over `n = 1..n_max`.
    pub kappa: f64,
    pub kappa_stderr: f64,
    /// `max_n max(R_n, 1/R_n)` over `n = 1..n_max`.
    pub bound: f64,
    pub max_oscillation: f64,
    pub total_samples: usize,
}

/// `R_n = m̂(D(x, ε, n))·e^{nP − S_nφ(x)}` for `n = 0..n_max`, where
/// `D(x, ε, n)` constrains the times `0..=n` (so `R_0` is the mass of the
/// plain ball).
pub fn gibbs_check(
    sampler: &EquilibriumSampler,
    x: &TorusPoint,
    pressure: f64,
    opts: &GibbsOptions,
) -> Result<GibbsReport> {
    let system = &sampler.system;
    if opts.n_max < 2 {
        return Err(Error::InvalidInput(
            "the Gibbs ladder needs n_max ≥ 2".into(),
        ));
    }
    let steps: Vec<usize> = (0..=opts.n_max).map(|n| n + 1).collect();
    let masses = match opts.estimator {
        BallEstimator::Conditioned => ball_masses(
            sampler,
            x,
            opts.epsilon,
            &steps,
            opts.samples / steps.len(),
            opts.seed,
        )?,
        BallEstimator::Global => global_ball_masses(sampler, x, opts, &steps)?,
    };
    if let Some(b) = masses.iter().find(|b| b.hits < opts.min_hits) {
        return Err(Error::Starvation {
            what: "Gibbs ratio ladder",
            hits: b.hits,
            depth: b.steps - 1,
        });
    }
    let mut rows = Vec::with_capacity(masses.len());
    for (n, b) in masses.iter().enumerate() {
        let s = birkhoff(system, &sampler.potential, x, n);
        let log_ratio = b.mass.ln() + n as f64 * pressure - s;
        rows.push(GibbsRow {
            n,
            samples: b.samples,
            hits: b.hits,
            mass: b.mass,
            birkhoff: s,
            ratio: log_ratio.exp(),
            log_ratio,
            stderr_log: 1.0 / (b.hits as f64).sqrt(),
            oscillation: b.oscillation,
        });
    }
    let xs: Vec<f64> = rows[1..].iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows[1..].iter().map(|r| r.log_ratio).collect();
    let (kappa, kappa_stderr) = lsq_slope(&xs, &ys);
    Ok(GibbsReport {
        center: *x,
        epsilon: opts.epsilon,
        pressure,
        bound: rows[1..]
            .iter()
            .map(|r| r.log_ratio.abs())
            .fold(0.0, f64::max)
            .exp(),
        max_oscillation: rows.iter().map(|r| r.oscillation).fold(0.0, f64::max),
        total_samples: rows.iter().map(|r| r.samples).sum::<usize>(),
        rows,
        kappa,
        kappa_stderr,
    })
}

fn global_ball_masses(
    sampler: &EquilibriumSampler,
    x: &TorusPoint,
    opts: &GibbsOptions,
    steps: &[usize],
) -> Result<Vec<BallMass>> {
    let system = &sampler.system;
    let max_steps = *steps.last().unwrap();
    let center_orbit = orbit(system, x, max_steps);
    let mut counts = vec![0usize; max_steps + 1];
    let mut total = 0usize;
    let mut batch = opts.samples;
    let mut round = 0u64;
    loop {
        let c = sampler.fold_samples(
            batch,
            opts.seed.wrapping_add(round),
            vec![0usize; max_steps + 1],
            |acc, y| acc[bowen_depth(system, &center_orbit, opts.epsilon, max_steps, y)] += 1,
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
                a
            },
        )?;
        counts.iter_mut().zip(c).for_each(|(u, v)| *u += v);
        total += batch;
        if counts[max_steps] >= opts.min_hits || total + 2 * batch > sampler.options.max_samples {
            break;
        }
        batch *= 2;
        round += 1;
    }
    Ok(steps
        .iter()
        .map(|&m| {
            let hits: usize = counts[m..].iter().sum();
            BallMass {
                steps: m,
                samples: total,
                hits,
                mass: hits as f64 / total as f64,
                oscillation: f64::NAN,
            }
        })
        .collect())
}

/// Options of [`brin_katok_entropy`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyOptions {
    pub epsilon: f64,
    /// Main depth `n`.
    pub n: usize,
    /// Reference depth of the two-depth estimator.
    pub n0: usize,
    pub n_centers: usize,
    pub samples_per_ball: usize,
    /// Samples for `∫φ dm̂`.
    pub integral_samples: usize,
    pub seed: u64,
}

impl Default for EntropyOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n: 12,
            n0: 4,
            n_centers: 40,
            samples_per_ball: 20_000,
            integral_samples: 1_000_000,
            seed: 0,
        }
    }
}

/// Brin–Katok entropy and the variational sum.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    /// Two-depth estimator: mean of `(log m̂(B_{n0}) − log m̂(B_n))/(n − n0)`.
    pub entropy: f64,
    pub entropy_stderr: f64,
    /// Plain estimator: mean of `−(1/n) log m̂(B(x, ε, n))`.
    pub entropy_plain: f64,
    pub integral_phi: f64,
    pub integral_stderr: f64,
    /// `entropy + ∫φ dm̂`.
    pub variational_sum: f64,
    pub n: usize,
    pub n0: usize,
    pub centers: usize,
}

impl EntropyReport {
    /// `|h + ∫φ − P|`, relative to `max(|P|, h)`.
    pub fn relative_gap(&self, pressure: f64) -> f64 {
        (self.variational_sum - pressure).abs() / pressure.abs().max(self.entropy.abs())
    }
}

/// Brin–Katok local entropy averaged over centers drawn from `m̂`, plus
/// `∫φ dm̂`.  The plain estimator `−(1/n) log m̂(B_n)` carries an `O(1/n)`
/// bias from the size of the ball itself; the two-depth estimator cancels
/// it and is the reported entropy.
pub fn brin_katok_entropy(
    sampler: &EquilibriumSampler,
    opts: &EntropyOptions,
) -> Result<EntropyReport> {
    if opts.n <= opts.n0 || opts.n0 == 0 {
        return Err(Error::InvalidInput(
            "Brin–Katok depths need 0 < n0 < n".into(),
        ));
    }
    let centers = sampler.sample_seeded(opts.n_centers, opts.seed ^ 0x5eed)?;
    let mut slopes = Vec::with_capacity(centers.len());
    let mut plain = Vec::with_capacity(centers.len());
    for (k, x) in centers.iter().enumerate() {
        let m = ball_masses(
            sampler,
            x,
            opts.epsilon,
            &[opts.n0, opts.n],
            opts.samples_per_ball,
            opts.seed.wrapping_add(1000 * k as u64),
        )?;
        if let Some(b) = m.iter().find(|b| b.hits == 0) {
            return Err(Error::Starvation {
                what: "Brin–Katok entropy",
                hits: 0,
                depth: b.steps,
            });
        }
        slopes.push((m[0].mass.ln() - m[1].mass.ln()) / (opts.n - opts.n0) as f64);
        plain.push(-m[1].mass.ln() / opts.n as f64);
    }
    let (h, h_se) = mean_se(&slopes);
    let system = &sampler.system;
    let (s1, s2) = sampler.fold_samples(
        opts.integral_samples,
        opts.seed ^ 0xf1,
        (0.0, 0.0),
        |acc, y| {
            let v = sampler.potential.evaluate(system, y);
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )?;
    let nn = opts.integral_samples as f64;
    let integral = s1 / nn;
    let integral_se = ((s2 / nn - integral * integral).max(0.0) / nn).sqrt();
    Ok(EntropyReport {
        entropy: h,
        entropy_stderr: h_se,
        entropy_plain: mean_se(&plain).0,
        integral_phi: integral,
        integral_stderr: integral_se,
        variational_sum: h + integral,
        n: opts.n,
        n0: opts.n0,
        centers: centers.len(),
    })
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Options of [`conditional_density_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditionalOptions {
    pub n_bins: usize,
    pub samples: usize,
    /// Consecutive plaque cells pooled into one fiber group.
    pub rows_per_fiber: usize,
    pub min_hits: usize,
    pub seed: u64,
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        Self {
            n_bins: 10,
            samples: 1_000_000,
            rows_per_fiber: 4,
            min_hits: 50,
            seed: 0,
        }
    }
}

/// Comparison on one group of plaque cells.
#[derive(Clone, Debug, Serialize)]
pub struct FiberComparison {
    pub rows: [usize; 2],
    pub hits: usize,
    /// Sup over the middle 80% of bins of `|observed/expected − 1|`.
    pub sup_rel: f64,
    /// Largest `|observed − expected|/√expected` over the same bins.
    pub max_z: f64,
}

/// Result of the conditional density check.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionalReport {
    pub fibers: Vec<FiberComparison>,
    /// Fraction of fiber groups with enough hits.
    pub coverage: f64,
    /// Mean of `sup_rel` over the retained fibers.
    pub sup_rel: f64,
    pub worst_sup_rel: f64,
    pub max_z: f64,
    pub samples: usize,
}

/// Samples the conditional measure on `bx`, bins the unstable parameter per
/// fiber group, and compares with `Δ^u_w μ^u_w / L(w)` recomputed from
/// fresh leaf sections (mixed over the group with the `μ^{cs}` weights of
/// an independently computed stable section).
pub fn conditional_density_check(
    sampler: &EquilibriumSampler,
    bx: &DynamicalBox,
    opts: &ConditionalOptions,
) -> Result<ConditionalReport> {
    let system = &sampler.system;
    let potential = &sampler.potential;
    let grid = sampler.options.grid;
    if opts.n_bins < 5 || opts.rows_per_fiber == 0 {
        return Err(Error::InvalidInput(
            "conditional check needs n_bins ≥ 5 and rows_per_fiber ≥ 1".into(),
        ));
    }
    let n_s = bx.n_s();
    let n_u = bx.n_u();
    let a_u = bx.half_u;
    let bw = 2.0 * a_u / opts.n_bins as f64;
    // Independent expectation: per plaque cell, absolute ν^u bin masses.
    let (ms, _) = leaf_measure_with(
        system,
        potential,
        &bx.center,
        bx.half_s,
        grid.depth,
        n_s,
        &LeafOptions::section(LeafKind::Stable),
    )?;
    let zeros = vec![0.0; system.center_dim()];
    let mut expected_rows: Vec<Vec<f64>> = Vec::with_capacity(n_s);
    for i in 0..n_s {
        let w = bx.point(system, bx.sigma[i], 0.0, &zeros);
        let (mu, _) = leaf_measure_with(
            system,
            potential,
            &w,
            a_u,
            grid.depth,
            n_u,
            &LeafOptions::section(LeafKind::Unstable),
        )?;
        let nu = nu_u(system, potential, &mu, &w)?;
        let h = nu.cell_width;
        let mut bins = vec![0.0; opts.n_bins];
        let mu_s = ms.log_weight(i);
        for a in &nu.atoms {
            let mass = (a.w.ln() + nu.log_scale + mu_s).exp();
            let (lo, hi) = (a.t - 0.5 * h, a.t + 0.5 * h);
            let b0 = (((lo + a_u) / bw).floor().max(0.0) as usize).min(opts.n_bins - 1);
            let b1 = (((hi + a_u) / bw).floor().max(0.0) as usize).min(opts.n_bins - 1);
            for (b, slot) in bins.iter_mut().enumerate().take(b1 + 1).skip(b0) {
                let e0 = -a_u + b as f64 * bw;
                let overlap = (hi.min(e0 + bw) - lo.max(e0)).max(0.0);
                *slot += mass * overlap / h;
            }
        }
        expected_rows.push(bins);
    }
    let samples = sampler.sample_in_box(bx, opts.samples, opts.seed)?;
    let n_groups = n_s.div_ceil(opts.rows_per_fiber);
    let mut counts = vec![vec![0usize; opts.n_bins]; n_groups];
    for s in &samples {
        let b = (((s.tau + a_u) / bw).floor().max(0.0) as usize).min(opts.n_bins - 1);
        counts[s.row / opts.rows_per_fiber][b] += 1;
    }
    let skip = (opts.n_bins as f64 * 0.1).round() as usize;
    let mut fibers = Vec::new();
    for (g, cnt) in counts.iter().enumerate() {
        let hits: usize = cnt.iter().sum();
        if hits < opts.min_hits {
            continue;
        }
        let rows = [
            g * opts.rows_per_fiber,
            ((g + 1) * opts.rows_per_fiber).min(n_s),
        ];
        let mut exp = vec![0.0; opts.n_bins];
        for r in &expected_rows[rows[0]..rows[1]] {
            exp.iter_mut().zip(r).for_each(|(e, v)| *e += v);
        }
        let tot: f64 = exp.iter().sum();
        let (mut sup, mut z) = (0.0f64, 0.0f64);
        for b in skip..opts.n_bins - skip {
            let e = exp[b] / tot * hits as f64;
            let o = cnt[b] as f64;
            sup = sup.max((o / e - 1.0).abs());
            z = z.max((o - e).abs() / e.sqrt());
        }
        fibers.push(FiberComparison {
            rows,
            hits,
            sup_rel: sup,
            max_z: z,
        });
    }
    if fibers.is_empty() {
        return Err(Error::Starvation {
            what: "conditional density check",
            hits: 0,
            depth: 0,
        });
    }
    Ok(ConditionalReport {
        coverage: fibers.len() as f64 / n_groups as f64,
        sup_rel: fibers.iter().map(|f| f.sup_rel).sum::<f64>() / fibers.len() as f64,
        worst_sup_rel: fibers.iter().map(|f| f.sup_rel).fold(0.0, f64::max),
        max_z: fibers.iter().map(|f| f.max_z).fold(0.0, f64::max),
        fibers,
        samples: opts.samples,
    })
}

/// One entry of a correlation sequence.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CorrelationRow {
    pub n: usize,
    pub correlation: f64,
    pub stderr: f64,
}

/// `C_n = ⟨g·(h∘fⁿ)⟩ − ⟨g⟩⟨h⟩` for `n = 0..=n_max` with standard errors.
pub fn correlation_decay(
    sampler: &EquilibriumSampler,
    g: &TrigPolynomial,
    h: &TrigPolynomial,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<CorrelationRow>> {
    let system = &sampler.system;
    let d = system.dim();
    g.validate(d, "observable g")?;
    h.validate(d, "observable h")?;
    if samples < 2 {
        return Err(Error::InvalidInput(
            "correlations need at least two samples".into(),
        ));
    }
    // Layout: Σg, then per n: Σh_n, Σ g·h_n, Σ (g·h_n)².
    let width = 1 + 3 * (n_max + 1);
    let sums = sampler.fold_samples(
        samples,
        seed,
        vec![0.0; width],
        |acc, x| {
            let gv = g.eval(x.coords());
            acc[0] += gv;
            let mut y = *x;
            for n in 0..=n_max {
                let hv = h.eval(y.coords());
                let p = gv * hv;
                acc[1 + 3 * n] += hv;
                acc[2 + 3 * n] += p;
                acc[3 + 3 * n] += p * p;
                if n < n_max {
                    y = system.step_forward(&y);
                }
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
            a
        },
    )?;
    let nn = samples as f64;
    let gm = sums[0] / nn;
    Ok((0..=n_max)
        .map(|n| {
            let hm = sums[1 + 3 * n] / nn;
            let pm = sums[2 + 3 * n] / nn;
            let p2 = sums[3 + 3 * n] / nn;
            CorrelationRow {
                n,
                correlation: pm - gm * hm,
                stderr: ((p2 - pm * pm).max(0.0) / nn).sqrt(),
            }
        })
        .collect())
}

/// Coordinate histograms compared with Lebesgue.
#[derive(Clone, Debug, Serialize)]
pub struct HistogramReport {
    pub bins: usize,
    pub samples: usize,
    /// Largest `|count/expected − 1|` over all coordinates and bins.
    pub sup_rel: f64,
    /// Largest deviation of an empirical coordinate CDF from the identity.
    pub ks: f64,
    pub per_coordinate: Vec<f64>,
}

pub fn coordinate_histograms(
    sampler: &EquilibriumSampler,
    bins: usize,
    samples: usize,
    seed: u64,
) -> Result<HistogramReport> {
    let d = sampler.system.dim();
    if bins < 2 || samples == 0 {
        return Err(Error::InvalidInput(
            "histograms need at least two bins and one sample".into(),
        ));
    }
    // Fine counts for the Kolmogorov distance, coarse bins derived from them.
    let fine = bins * 50;
    let counts = sampler.fold_samples(
        samples,
        seed,
        vec![0usize; d * fine],
        |acc, x| {
            for (k, &c) in x.coords().iter().enumerate() {
                acc[k * fine + ((c * fine as f64) as usize).min(fine - 1)] += 1;
            }
        },
        |mut a, b| {
            a.iter_mut().zip(b).for_each(|(u, v)| *u += v);
            a
        },
    )?;
    let expected = samples as f64 / bins as f64;
    let mut per = Vec::with_capacity(d);
    let mut ks = 0.0f64;
    for k in 0..d {
        let c = &counts[k * fine..(k + 1) * fine];
        let sup = c
            .chunks(50)
            .map(|ch| (ch.iter().sum::<usize>() as f64 / expected - 1.0).abs())
            .fold(0.0, f64::max);
        per.push(sup);
        let mut acc = 0usize;
        for (j, v) in c.iter().enumerate() {
            acc += v;
            ks = ks.max((acc as f64 / samples as f64 - (j + 1) as f64 / fine as f64).abs());
        }
    }
    Ok(HistogramReport {
        bins,
        samples,
        sup_rel: per.iter().cloned().fold(0.0, f64::max),
        ks,
        per_coordinate: per,
    })
}

/// `|m_{B'}(U)/m_B(U) − 1|` for the shared rectangle `U` of the box at `x`
/// and the box at `x + offset_s e_s + offset_u e_u` (equal half sides `a`).
pub fn overlap_consistency(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    a: f64,
    offset: [f64; 2],
    grid: &BoxGrid,
) -> Result<f64> {
    let [ds, du] = offset;
    if ds.abs() >= 2.0 * a || du.abs() >= 2.0 * a {
        return Err(Error::InvalidInput("the boxes do not overlap".into()));
    }
    let (e_s, e_u) = (system.e_s(), system.e_u());
    let xb = x.base();
    let x2 = TorusPoint::from_base_fiber(
        [
            xb[0] + ds * e_s[0] + du * e_u[0],
            xb[1] + ds * e_s[1] + du * e_u[1],
        ],
        x.fiber(),
    );
    let b1 = DynamicalBox::build(system, potential, *x, a, a, grid)?;
    let b2 = DynamicalBox::build(system, potential, x2, a, a, grid)?;
    let s = [ds.max(0.0) - a, a + ds.min(0.0)];
    let u = [du.max(0.0) - a, a + du.min(0.0)];
    let m1 = b1.log_measure(&ParamRect::new(u, s))?;
    let m2 = b2.log_measure(&ParamRect::new(
        [u[0] - du, u[1] - du],
        [s[0] - ds, s[1] - ds],
    ))?;
    Ok((m2 - m1).exp_m1().abs())
}

/// Spread of `m̂(B(x, ε)) / [μ^u(W^u(x, ε))·μ^{cs}(P^{cs}(x, ε))]`.
#[derive(Clone, Debug, Serialize)]
pub struct ProductBoundReport {
    pub points: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl ProductBoundReport {
    /// The smallest `c` with all ratios in `[r̄/c, r̄·c]`, `r̄` their geometric midpoint.
    pub fn spread(&self) -> f64 {
        (self.max_ratio / self.min_ratio).sqrt()
    }
}

pub fn product_structure_bounds(
    sampler: &EquilibriumSampler,
    epsilon: f64,
    points: usize,
    seed: u64,
) -> Result<ProductBoundReport> {
    let system = &sampler.system;
    let potential = &sampler.potential;
    let grid = sampler.options.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..points {
        let x =
            TorusPoint::from_base_fiber([rng.gen(), rng.gen()], &vec![0.0; system.center_dim()]);
        let bx = DynamicalBox::build(system, potential, x, epsilon, epsilon, &grid)?;
        let (mu, _) = leaf_measure_with(
            system,
            potential,
            &x,
            epsilon,
            grid.depth,
            grid.n_u,
            &LeafOptions::section(LeafKind::Unstable),
        )?;
        let log_cs = {
            let m = bx
                .cs_log_weights
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            m + bx
                .cs_log_weights
                .iter()
                .map(|l| (l - m).exp())
                .sum::<f64>()
                .ln()
        };
        let r = (bx.log_mass - sampler.log_total - mu.log_total() - log_cs).exp();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok(ProductBoundReport {
        points,
        min_ratio: lo,
        max_ratio: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::SamplerOptions;
    use crate::potentials::PotentialKind;

    fn cat0() -> SystemSpec {
        SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap()
    }

    #[test]
    fn srb_invariance_is_exact() {
        let s = cat0();
        let p = PotentialSpec::new(PotentialKind::Srb, &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &p, &SamplerOptions::default()).unwrap();
        let r = invariance_check(&sm, 10, 1, (0.0, 0.0)).unwrap();
        assert!(r.max_rel < 1e-6, "{r:?}");
    }

    #[test]
    fn srb_ball_masses_are_areas() {
        // Lebesgue: the depth-m ball of the cat map (c = 0) is the
        // intersection of the disc with the strips |τ| < ε λ^{-j}.
        let s = cat0();
        let p = PotentialSpec::new(PotentialKind::Srb, &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &p, &SamplerOptions::default()).unwrap();
        let x = TorusPoint::new(&[0.3, 0.6]).unwrap();
        let eps: f64 = 0.1;
        let m = ball_masses(&sm, &x, eps, &[1, 4], 200_000, 3).unwrap();
        let disc = std::f64::consts::PI * eps * eps;
        assert!((m[0].mass / disc - 1.0).abs() < 0.01, "{:?}", m[0]);
        let r = eps / s.lambda().powi(3);
        // Area of {|τ| < r, σ² + τ² < ε²}.
        let area = 2.0 * (r * (eps * eps - r * r).sqrt() + eps * eps * (r / eps).asin());
        assert!(
            (m[1].mass / area - 1.0).abs() < 0.01,
            "{} vs {area}",
            m[1].mass
        );
    }

    #[test]
    fn constant_observable_does_not_correlate() {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034]).unwrap();
        let p = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &p, &SamplerOptions::default()).unwrap();
        let g = TrigPolynomial::zero().plus_constant(2.0, 3);
        let h = TrigPolynomial::cosine(vec![1, 0, 0], 1.0);
        let c = correlation_decay(&sm, &g, &h, 3, 20_000, 1).unwrap();
        assert!(c.iter().all(|r| r.correlation.abs() < 1e-12));
        let c0 = correlation_decay(&sm, &h, &h, 0, 200_000, 1).unwrap();
        assert!((c0[0].correlation - 0.5).abs() < 0.01, "{c0:?}");
    }

    #[test]
    fn overlap_and_histograms() {
        let s = cat0();
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
        let r = overlap_consistency(
            &s,
            &p,
            &TorusPoint::new(&[0.2, 0.7]).unwrap(),
            0.05,
            [0.03, -0.04],
            &grid,
        )
        .unwrap();
        assert!(r < 0.02, "{r}");
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let sm = EquilibriumSampler::build(&s, &zero, &SamplerOptions::default()).unwrap();
        let hr = coordinate_histograms(&sm, 20, 200_000, 2).unwrap();
        assert!(hr.sup_rel < 0.04 && hr.ks < 0.005, "{hr:?}");
    }
}
