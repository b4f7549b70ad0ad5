//! Literal transfer operator `S(μ) = e^φ · f⁻¹μ` acting on atomic measures.
//!
//! This is the direct (support-contracting) form of the construction.  It is
//! kept as an independent cross-check of the fixed-window formulation used
//! by [`leaf_measure`](super::leaf_measure).

use super::{Atom, WeightedLeafMeasure};
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::torus::{leaf_point, LeafKind, LeafSegment, SystemSpec, TorusPoint};

/// Lebesgue measure on the segment: `n_atoms` equal atoms at the cell
/// centers, total mass `2·half_width`.
pub fn seed_lebesgue(segment: &LeafSegment, n_atoms: usize) -> Result<WeightedLeafMeasure> {
    if n_atoms < 2 {
        return Err(Error::InvalidInput(
            "a leaf measure needs at least 2 atoms".into(),
        ));
    }
    let r = segment.half_width;
    let h = 2.0 * r / n_atoms as f64;
    let atoms: Vec<Atom> = (0..n_atoms)
        .map(|j| Atom {
            t: -r + (j as f64 + 0.5) * h,
            w: h,
        })
        .collect();
    Ok(WeightedLeafMeasure {
        segment: segment.clone(),
        mass: atoms.iter().map(|a| a.w).sum(),
        atoms,
        cell_width: h,
        log_scale: 0.0,
        generation: 0,
        pressure_trace: Vec::new(),
    })
}

/// One application of `S`: a measure on the unstable segment anchored at
/// `f(x)` becomes a measure on the segment anchored at `x` with half width
/// `r/λ`.  Atom `t` moves to `t/μ_u` and its weight is multiplied by
/// `e^{φ(f⁻¹y_t)}`.
pub fn transfer_step(
    system: &SystemSpec,
    potential: &PotentialSpec,
    mu: &WeightedLeafMeasure,
) -> Result<WeightedLeafMeasure> {
    if !system.is_linear_base() {
        return Err(Error::Unsupported(
            "the literal transfer step is implemented for linear bases".into(),
        ));
    }
    if mu.segment.kind != LeafKind::Unstable {
        return Err(Error::InvalidInput(
            "the transfer step acts on unstable segments".into(),
        ));
    }
    let anchor: TorusPoint = system.step_backward(&mu.segment.anchor);
    let target = LeafSegment::new(
        system,
        anchor,
        LeafKind::Unstable,
        mu.segment.half_width / system.lambda(),
    )?
    .with_truncation(mu.segment.truncation + 1);
    let mu_u = system.mu_u();
    let mut atoms: Vec<Atom> = Vec::with_capacity(mu.atoms.len());
    for a in &mu.atoms {
        let t = a.t / mu_u;
        if t.abs() > target.half_width * (1.0 + 1e-12) {
            return Err(Error::Locality(format!(
                "atom at {t} escapes the target segment"
            )));
        }
        let y = leaf_point(
            system,
            &target,
            t.clamp(-target.half_width, target.half_width),
        )?
        .point;
        atoms.push(Atom {
            t,
            w: a.w * potential.evaluate(system, &y).exp(),
        });
    }
    let mass: f64 = atoms.iter().map(|a| a.w).sum();
    let mut trace = mu.pressure_trace.clone();
    trace.push((mass / mu.mass).ln());
    if mu_u < 0.0 {
        atoms.reverse();
    }
    Ok(WeightedLeafMeasure {
        segment: target,
        atoms,
        cell_width: mu.cell_width / system.lambda(),
        mass,
        log_scale: mu.log_scale,
        generation: mu.generation + 1,
        pressure_trace: trace,
    })
}

/// `Sⁿ` applied to Lebesgue on `W^u(fⁿx, r)`: a measure on `W^u(x, r/λⁿ)`.
pub fn literal_pushforward(
    system: &SystemSpec,
    potential: &PotentialSpec,
    x: &TorusPoint,
    r: f64,
    n: usize,
    n_atoms: usize,
) -> Result<WeightedLeafMeasure> {
    let top = system.apply(x, n as i64)?;
    let mut mu = seed_lebesgue(
        &LeafSegment::new(system, top, LeafKind::Unstable, r)?,
        n_atoms,
    )?;
    for _ in 0..n {
        mu = transfer_step(system, potential, &mu)?;
    }
    Ok(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaf::{leaf_measure_with, LeafOptions, Quadrature};
    use crate::potentials::PotentialKind;
    use crate::torus::TrigPolynomial;

    #[test]
    fn seed_masses() {
        let s = SystemSpec::cat(TrigPolynomial::zero(), vec![]).unwrap();
        let seg = LeafSegment::new(
            &s,
            TorusPoint::new(&[0.1, 0.1]).unwrap(),
            LeafKind::Unstable,
            0.3,
        )
        .unwrap();
        let m = seed_lebesgue(&seg, 2).unwrap();
        assert_eq!(m.atoms.len(), 2);
        assert!((m.atoms[0].w - 0.3).abs() < 1e-15);
        assert!((seed_lebesgue(&seg, 977).unwrap().mass - 0.6).abs() < 1e-12);
    }

    #[test]
    fn step_rules() {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.4]).unwrap();
        let seg = LeafSegment::new(
            &s,
            TorusPoint::new(&[0.1, 0.7, 0.2]).unwrap(),
            LeafKind::Unstable,
            0.3,
        )
        .unwrap();
        let mu = seed_lebesgue(&seg, 100).unwrap();
        let zero = PotentialSpec::new(PotentialKind::zero(), &s).unwrap();
        let out = transfer_step(&s, &zero, &mu).unwrap();
        assert!((out.mass - mu.mass).abs() < 1e-14);
        assert!((out.segment.half_width - 0.3 / s.lambda()).abs() < 1e-15);
        let c = PotentialSpec::new(PotentialKind::Constant { value: 0.7 }, &s).unwrap();
        let out = transfer_step(&s, &c, &mu).unwrap();
        assert!((out.mass / mu.mass - 0.7f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn literal_matches_fixed_window() {
        let s = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.4]).unwrap();
        let p = PotentialSpec::new(
            PotentialKind::trig(TrigPolynomial::cosine(vec![1, 1], 0.4)),
            &s,
        )
        .unwrap();
        let x = TorusPoint::new(&[0.1, 0.7, 0.2]).unwrap();
        let n = 6;
        let lit = literal_pushforward(&s, &p, &x, 0.3, n, 400).unwrap();
        let opts = LeafOptions {
            quadrature: Quadrature::Point,
            cesaro: false,
            ..LeafOptions::default()
        };
        let (fixed, _) =
            leaf_measure_with(&s, &p, &x, 0.3 / s.lambda().powi(n as i32), n, 400, &opts).unwrap();
        let a = lit.probabilities();
        let b = fixed.probabilities();
        for j in 0..400 {
            assert!((lit.atoms[j].t - fixed.atoms[j].t).abs() < 1e-12);
            assert!(
                (a[j] - b[j]).abs() < 1e-9 * a[j].max(1e-6),
                "{j}: {} {}",
                a[j],
                b[j]
            );
        }
    }
}
