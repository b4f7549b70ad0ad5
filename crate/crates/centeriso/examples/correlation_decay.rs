//! Decay of correlations C_n = ⟨g · h∘fⁿ⟩ − ⟨g⟩⟨h⟩ under the measure of
//! maximal entropy of the skew product.
//!
//! Run with `cargo run --release --example correlation_decay`.

use centeriso::equilibrium::{correlation_decay, EquilibriumSampler, SamplerOptions};
use centeriso::potentials::{PotentialKind, PotentialSpec};
use centeriso::torus::{SystemSpec, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let zero = PotentialSpec::new(PotentialKind::zero(), &system)?;
    let sampler = EquilibriumSampler::build(&system, &zero, &SamplerOptions::default())?;
    let g = TrigPolynomial::cosine(vec![1, 0, 0], 1.0);
    for row in correlation_decay(&sampler, &g, &g, 20, 1_000_000, 3)? {
        println!(
            "n = {:2}: C_n = {:+.4} ± {:.4}",
            row.n, row.correlation, row.stderr
        );
    }
    Ok(())
}
