//! Three pressure estimators for the measure of maximal entropy (φ = 0):
//! leaf growth, spanning sets and Brin–Katok entropy plus `∫φ`.  All three
//! should approach log λ = 0.962424.
//!
//! Run with `cargo run --release --example pressure_estimators`.

use centeriso::equilibrium::{
    brin_katok_entropy, EntropyOptions, EquilibriumSampler, SamplerOptions,
};
use centeriso::leaf::{leaf_measure, spanning_set_pressure, SpanningOptions};
use centeriso::potentials::{PotentialKind, PotentialSpec};
use centeriso::torus::{SystemSpec, TorusPoint, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::zero(), vec![])?;
    let zero = PotentialSpec::new(PotentialKind::zero(), &system)?;
    let x = TorusPoint::new(&[0.31, 0.47])?;
    println!("log λ            {:.6}", system.log_lambda());

    let (_, leaf) = leaf_measure(&system, &zero, &x, 0.1, 30, 4000)?;
    println!("leaf growth      {:.6}", leaf.value);

    let spanning = spanning_set_pressure(&system, &zero, &SpanningOptions::for_center_dim(0))?;
    println!("spanning sets    {:.6}", spanning.value);

    let sampler = EquilibriumSampler::build(&system, &zero, &SamplerOptions::default())?;
    let e = brin_katok_entropy(&sampler, &EntropyOptions::default())?;
    println!(
        "h + ∫φ           {:.6} (h = {:.4} ± {:.4})",
        e.variational_sum, e.entropy, e.entropy_stderr
    );
    Ok(())
}
