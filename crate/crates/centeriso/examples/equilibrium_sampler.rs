//! Sampling the equilibrium state from its dynamical-box decomposition.
//! For c = 0 and φ = 0 it is Lebesgue measure, which the coordinate
//! histograms confirm.
//!
//! Run with `cargo run --release --example equilibrium_sampler`.

use centeriso::equilibrium::{
    coordinate_histograms, invariance_check, EquilibriumSampler, SamplerOptions,
};
use centeriso::potentials::{PotentialKind, PotentialSpec};
use centeriso::torus::{SystemSpec, TrigMode, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let cat = SystemSpec::cat(TrigPolynomial::zero(), vec![])?;
    let zero = PotentialSpec::new(PotentialKind::zero(), &cat)?;
    let sampler = EquilibriumSampler::build(&cat, &zero, &SamplerOptions::default())?;
    println!("{} boxes", sampler.boxes.len());
    for p in sampler.sample(5)? {
        println!("  sample {:?}", p.coords());
    }
    let h = coordinate_histograms(&sampler, 20, 1_000_000, 1)?;
    println!(
        "φ = 0, c = 0: histogram sup error {:.2}% (KS {:.1e})",
        100.0 * h.sup_rel,
        h.ks
    );

    let skew = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let phi = TrigPolynomial::new(vec![
        TrigMode::new(vec![1, 0], 0.3, 0.0),
        TrigMode::new(vec![1, 1], 0.0, 0.2),
    ]);
    let trig = PotentialSpec::new(PotentialKind::trig(phi), &skew)?;
    let sampler = EquilibriumSampler::build(&skew, &trig, &SamplerOptions::default())?;
    let inv = invariance_check(&sampler, 20, 2, (0.0, 0.0))?;
    println!(
        "trig potential, c = 1: max |m(f⁻¹U)/m(U) − 1| = {:.1e} over {} boxes",
        inv.max_rel, inv.tests
    );
    Ok(())
}
