//! Periodic-orbit obstruction test: a Hölder function cohomologous to a
//! constant `c` has Birkhoff sum `p·c` over every periodic orbit of period `p`.

use serde::Serialize;

use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::torus::{periodic_orbits, SystemSpec};

/// Starting fiber points used for the coboundary series.
pub const APPENDIX_FIBER_STARTS: [[f64; 2]; 2] = [[0.1234567, 0.7654321], [0.5, 0.25]];

/// Result for one periodic orbit.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitSum {
    pub period: usize,
    /// Base points of the orbit.
    pub orbit: Vec<[f64; 2]>,
    /// Truncation level (coboundary series only; `0` otherwise).
    pub truncation: usize,
    /// Starting fiber point (coboundary series only).
    pub fiber_start: Option<[f64; 2]>,
    /// Raw Birkhoff sum `S_pφ`.
    pub sum: f64,
    /// What the sum should equal for a coboundary plus constant: `p·c`, or
    /// the boundary term of the transfer function for the coboundary series.
    pub expected: f64,
    /// `sum − expected`.
    pub value: f64,
}

/// Orbit sums minus their expected value over all base periodic orbits of
/// minimal period `≤ max_period`.
///
/// For fiber-independent potentials the expected value is `p·candidate`
/// (default: the Lebesgue mean).  For the coboundary series the fiber is
/// tracked exactly along the orbit and the expected value is the
/// telescoped boundary term `D_N(θ₀) − D_N(θ_p)` for every truncation.
pub fn livsic_obstruction(
    potential: &PotentialSpec,
    system: &SystemSpec,
    max_period: u32,
    candidate: Option<f64>,
) -> Result<Vec<OrbitSum>> {
    let orbits = periodic_orbits(system, max_period)?;
    let mut out = Vec::new();
    if let Some(ap) = potential.appendix() {
        for orbit in &orbits {
            let pts: Vec<[f64; 2]> = orbit.iter().map(|q| q.to_f64()).collect();
            for start in APPENDIX_FIBER_STARTS {
                for (n, (raw, bnd)) in ap.orbit_sums(system, orbit, start)?.into_iter().enumerate()
                {
                    out.push(OrbitSum {
                        period: orbit.len(),
                        orbit: pts.clone(),
                        truncation: n + 1,
                        fiber_start: Some(start),
                        sum: raw,
                        expected: bnd,
                        value: raw - bnd,
                    });
                }
            }
        }
        return Ok(out);
    }
    if !potential.c_constant {
        return Err(Error::Unsupported(
            "periodic-orbit sums need a fiber-independent potential or the coboundary series"
                .into(),
        ));
    }
    let c = candidate
        .or_else(|| potential.lebesgue_mean())
        .unwrap_or(0.0);
    for orbit in &orbits {
        let pts: Vec<[f64; 2]> = orbit.iter().map(|q| q.to_f64()).collect();
        let mut s = 0.0;
        for &x in &pts {
            s += potential.evaluate_base(system, x)?;
        }
        let expected = c * pts.len() as f64;
        out.push(OrbitSum {
            period: pts.len(),
            orbit: pts,
            truncation: 0,
            fiber_start: None,
            sum: s,
            expected,
            value: s - expected,
        });
    }
    Ok(out)
}
