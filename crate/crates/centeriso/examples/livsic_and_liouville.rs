//! Periodic-orbit (Livšic) sums, the Liouville frequency construction and
//! the truncated coboundary series whose limit is not a continuous
//! coboundary.
//!
//! Run with `cargo run --release --example livsic_and_liouville`.

use centeriso::potentials::{
    liouville_frequencies, livsic_obstruction, Part, PotentialKind, PotentialSpec,
};
use centeriso::torus::{SystemSpec, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let cat = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let constant = PotentialSpec::new(PotentialKind::Constant { value: 0.25 }, &cat)?;
    let sums = livsic_obstruction(&constant, &cat, 6, None)?;
    let worst = sums.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    println!(
        "constant potential: {} orbit sums, max |S_pφ − 0.25p| = {worst:.1e}",
        sums.len()
    );

    let data = liouville_frequencies(5)?;
    data.verify()?;
    println!("α = {:?}", data.alpha_f64());
    for w in &data.witnesses {
        println!(
            "  witness n = {}: margin {:.3e}",
            w.n,
            data.witness_margin(w)
        );
    }

    let alpha = data.alpha_f64();
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), alpha.to_vec())?;
    let kind = PotentialKind::AppendixD {
        n_trunc: 5,
        liouville: Some(data),
        liouville_file: None,
        part: Part::default(),
    };
    let phi = PotentialSpec::new(kind, &system)?;
    let ap = phi.appendix().expect("appendix potential");
    let sums = livsic_obstruction(&phi, &system, 6, None)?;
    let worst = sums.iter().map(|s| s.value.abs()).fold(0.0, f64::max);
    println!(
        "truncated series: max orbit-sum residual {worst:.1e} over {} sums",
        sums.len()
    );
    println!(
        "cocycle identity residual {:.1e}",
        ap.cocycle_residual(&system, 10_000, 7)?
    );
    for row in ap.oscillation() {
        println!("  N = {}: oscillation {:.4}", row.n, row.oscillation);
    }
    Ok(())
}
