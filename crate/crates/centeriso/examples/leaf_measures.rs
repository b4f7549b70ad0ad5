//! Weighted unstable-leaf measures: leaf-growth pressure, quasi-invariance
//! under the dynamics and independence of the seed density.
//!
//! Run with `cargo run --release --example leaf_measures`.

use centeriso::leaf::{
    leaf_measure_with, quasi_invariance_residual, smooth_seed, total_variation, LeafOptions,
};
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

    let (mu, report) = leaf_measure_with(
        &system,
        &potential,
        &x,
        0.1,
        30,
        4000,
        &LeafOptions::default(),
    )?;
    println!(
        "leaf-growth pressure P = {:.6} (last increments spread {:.1e})",
        report.value, report.spread
    );
    let d = mu.densities();
    println!(
        "density on W^u(x, 0.1): min {:.4}, max {:.4}",
        d.iter().cloned().fold(f64::INFINITY, f64::min),
        d.iter().cloned().fold(0.0, f64::max)
    );

    println!("quasi-invariance f⁻¹μ_fx = e^(P−φ) μ_x:");
    for n in [10, 15, 20, 25] {
        let q = quasi_invariance_residual(&system, &potential, &x, report.value, 0.1, n, 20_000)?;
        println!(
            "  depth {n:2}: TV {:.2e}, mass defect {:.2e}",
            q.tv, q.mass_defect
        );
    }

    let other = LeafOptions {
        seed: smooth_seed(0.5),
        ..LeafOptions::default()
    };
    let (nu, _) = leaf_measure_with(&system, &potential, &x, 0.1, 30, 4000, &other)?;
    println!(
        "TV between Lebesgue and smooth seeds at depth 30: {:.2e}",
        total_variation(&mu, &nu)?
    );
    Ok(())
}
