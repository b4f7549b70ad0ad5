//! Leaf measures: the transfer operator `S(μ) = e^φ f⁻¹μ`, its iterates on a
//! fixed leaf window, pressure extraction, the Δ-reweighted sections `ν^u`,
//! the quasi-invariance and holonomy checks, and covering-number pressure.
//!
//! Leaf measures are stored on a fixed arclength window `[−r, r]` of a leaf
//! divided into equal cells; each atom sits at a cell center and carries the
//! mass of its cell.  Iterating the transfer operator `n` times from
//! Lebesgue on the `n`-th image is, by the change of variables along the
//! leaf, the same as weighting the cell at `t` by
//! `exp(Σ_k [φ + log J^u](f^k y_t))` on the fixed window.

pub mod checks;
pub mod export;
pub mod measure;
pub mod spanning;
pub mod transfer;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{LeafSegment, TrigPolynomial};

pub use checks::{
    center_projection_check, holonomy_jacobian_check, holonomy_transport_s, nu_u,
    quasi_invariance_residual, total_variation, HolonomyReport, ProjectionReport,
    QuasiInvarianceReport,
};
pub use measure::{leaf_measure, leaf_measure_with, LeafOptions, Quadrature, SeedDensity};
pub use spanning::{spanning_set_pressure, SpanningOptions};
pub use transfer::{literal_pushforward, seed_lebesgue, transfer_step};

/// One atom: parameter on the leaf window and its (relative) mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

/// A discretized leaf measure.  Absolute masses are `w · e^{log_scale}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightedLeafMeasure {
    pub segment: LeafSegment,
    pub atoms: Vec<Atom>,
    /// Width of the cell carried by each atom.
    pub cell_width: f64,
    /// Cached `Σ w_j`.
    pub mass: f64,
    pub log_scale: f64,
    pub generation: usize,
    /// Per-generation `log(mass_{k+1}/mass_k)` of the unnormalized masses.
    pub pressure_trace: Vec<f64>,
}

impl WeightedLeafMeasure {
    /// Builds a measure from log-masses, shifting by their maximum.
    pub fn from_log_weights(
        segment: LeafSegment,
        ts: &[f64],
        log_w: &[f64],
        cell_width: f64,
        generation: usize,
        pressure_trace: Vec<f64>,
    ) -> Self {
        let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let atoms: Vec<Atom> = ts
            .iter()
            .zip(log_w)
            .map(|(&t, &l)| Atom {
                t,
                w: (l - m).exp(),
            })
            .collect();
        let mass = atoms.iter().map(|a| a.w).sum();
        Self {
            segment,
            atoms,
            cell_width,
            mass,
            log_scale: m,
            generation,
            pressure_trace,
        }
    }

    /// `log` of the absolute total mass.
    pub fn log_total(&self) -> f64 {
        self.mass.ln() + self.log_scale
    }

    /// Same measure rescaled to total mass one.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        let m = self.mass;
        out.atoms.iter_mut().for_each(|a| a.w /= m);
        out.mass = out.atoms.iter().map(|a| a.w).sum();
        out.log_scale = self.log_scale + m.ln();
        out
    }

    /// Probability weights `w_j / Σ w`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.w / self.mass).collect()
    }

    /// Density of the normalized measure with respect to arclength, per atom.
    pub fn densities(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|a| a.w / (self.mass * self.cell_width))
            .collect()
    }

    /// Absolute log-mass of atom `j`.
    pub fn log_weight(&self, j: usize) -> f64 {
        self.atoms[j].w.ln() + self.log_scale
    }

    /// Checks the structural invariants: atoms inside the window, cached
    /// mass, non-negative weights, and positive mass on every dyadic
    /// subinterval at least ten atom spacings long.
    pub fn check_invariants(&self) -> Result<()> {
        let r = self.segment.half_width;
        if self.atoms.is_empty() {
            return Err(Error::InvalidInput("leaf measure without atoms".into()));
        }
        if let Some(a) = self.atoms.iter().find(|a| a.t.abs() > r * (1.0 + 1e-12)) {
            return Err(Error::Locality(format!(
                "atom at {} outside the window of half width {r}",
                a.t
            )));
        }
        if self.atoms.iter().any(|a| !a.w.is_finite() || a.w < 0.0) {
            return Err(Error::InvalidInput(
                "negative or non-finite atom weight".into(),
            ));
        }
        let sum: f64 = self.atoms.iter().map(|a| a.w).sum();
        if (sum - self.mass).abs() > 1e-12 * sum.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "cached mass {} differs from Σw = {sum}",
                self.mass
            )));
        }
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::InvalidInput("leaf measure has zero mass".into()));
        }
        let spacing = 2.0 * r / self.atoms.len() as f64;
        let mut pieces = 2usize;
        while 2.0 * r / pieces as f64 >= 10.0 * spacing {
            let len = 2.0 * r / pieces as f64;
            let mut got = vec![false; pieces];
            for a in &self.atoms {
                if a.w > 0.0 {
                    let i = (((a.t + r) / len) as usize).min(pieces - 1);
                    got[i] = true;
                }
            }
            if let Some(i) = got.iter().position(|g| !g) {
                return Err(Error::InvalidInput(format!(
                    "no mass on dyadic piece {i} of {pieces}"
                )));
            }
            pieces *= 2;
        }
        Ok(())
    }
}

/// Which pressure estimator produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureMethod {
    LeafGrowth,
    SpanningSet,
    BrinKatokPlusIntegral,
}

/// A pressure estimate with its provenance and error indicators.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureReport {
    pub method: PressureMethod,
    pub value: f64,
    pub n_used: usize,
    pub params: BTreeMap<String, f64>,
    pub error_estimate: f64,
    /// Spread (max − min) of the increments the value was averaged from.
    pub spread: f64,
    /// The per-depth values the estimate was extracted from.
    pub trace: Vec<f64>,
}

/// Positive seed density helper: `1 + a cos 2π(x₁ + x₂)`.
pub fn smooth_seed(a: f64) -> SeedDensity {
    SeedDensity::Trig(TrigPolynomial::cosine(vec![1, 1], a).plus_constant(1.0, 2))
}
