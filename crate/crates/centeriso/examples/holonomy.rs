//! Stable holonomy between two unstable leaves: the transported leaf
//! measure against the infinite-product Jacobian.
//!
//! Run with `cargo run --release --example holonomy`.

use centeriso::leaf::holonomy_jacobian_check;
use centeriso::potentials::{jac_s, PotentialKind, PotentialSpec};
use centeriso::torus::{leaf_point, LeafKind, LeafSegment, SystemSpec, TorusPoint, TrigPolynomial};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    let potential = PotentialSpec::new(
        PotentialKind::trig(TrigPolynomial::cosine(vec![1, 0], 0.3)),
        &system,
    )?;
    let x = TorusPoint::new(&[0.31, 0.47, 0.2])?;

    let seg = LeafSegment::new(&system, x, LeafKind::Stable, 0.05)?;
    let y = leaf_point(&system, &seg, 0.05)?.point;
    let j = jac_s(&potential, &system, &x, &y, 30)?;
    println!(
        "Jac^s(x, y) = {:.8} (tail bound {:.1e})",
        j.value, j.tail_bound
    );

    for d in [0.01, 0.05] {
        let h = holonomy_jacobian_check(&system, &potential, &x, d, 0.1, 25, 4000)?;
        println!(
            "stable distance {d}: sup relative error {:.2e} over {} cells",
            h.sup_rel_error, h.compared
        );
    }
    Ok(())
}
