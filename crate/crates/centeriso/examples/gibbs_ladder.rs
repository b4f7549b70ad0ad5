//! The Gibbs ratio ladder R_n = m(D(x, ε, n)) e^{nP − S_nφ(x)}: bounded
//! with no exponential trend for c-constant potentials.
//!
//! Run with `cargo run --release --example gibbs_ladder`.

use centeriso::equilibrium::{gibbs_check, EquilibriumSampler, GibbsOptions, SamplerOptions};
use centeriso::leaf::leaf_measure;
use centeriso::potentials::{PotentialKind, PotentialSpec};
use centeriso::torus::{SystemSpec, TorusPoint, TrigMode, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let phi = TrigPolynomial::new(vec![
        TrigMode::new(vec![1, 0], 0.3, 0.0),
        TrigMode::new(vec![1, 1], 0.0, 0.2),
    ]);
    let potential = PotentialSpec::new(PotentialKind::trig(phi), &system)?;
    let x = TorusPoint::new(&[0.31, 0.47, 0.2])?;
    let (_, p) = leaf_measure(&system, &potential, &x, 0.1, 30, 4000)?;

    let sampler = EquilibriumSampler::build(&system, &potential, &SamplerOptions::default())?;
    let g = gibbs_check(&sampler, &x, p.value, &GibbsOptions::default())?;
    println!("{:>3} {:>8} {:>12} {:>10}", "n", "hits", "mass", "R_n");
    for row in &g.rows {
        println!(
            "{:>3} {:>8} {:>12.4e} {:>10.4}",
            row.n, row.hits, row.mass, row.ratio
        );
    }
    println!(
        "fitted rate κ̂ = {:.4} ± {:.4}; max(R, 1/R) = {:.3}",
        g.kappa, g.kappa_stderr, g.bound
    );
    Ok(())
}
