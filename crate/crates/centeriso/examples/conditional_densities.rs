//! Conditional densities on unstable plaques inside one dynamical box,
//! compared with Δ^u_w μ^u_w / L(w).
//!
//! Run with `cargo run --release --example conditional_densities`.

use centeriso::equilibrium::{
    conditional_density_check, ConditionalOptions, EquilibriumSampler, SamplerOptions,
};
use centeriso::potentials::{PotentialKind, PotentialSpec};
use centeriso::torus::{SystemSpec, TrigMode, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let phi = TrigPolynomial::new(vec![
        TrigMode::new(vec![1, 0], 0.3, 0.0),
        TrigMode::new(vec![1, 1], 0.0, 0.2),
    ]);
    let potential = PotentialSpec::new(PotentialKind::trig(phi), &system)?;
    let sampler = EquilibriumSampler::build(&system, &potential, &SamplerOptions::default())?;
    let report =
        conditional_density_check(&sampler, &sampler.boxes[0], &ConditionalOptions::default())?;
    for f in &report.fibers {
        println!(
            "rows {:?}: {} hits, sup relative error {:.2}%",
            f.rows,
            f.hits,
            100.0 * f.sup_rel
        );
    }
    println!(
        "worst {:.2}%, coverage {:.2}",
        100.0 * report.worst_sup_rel,
        report.coverage
    );
    Ok(())
}
