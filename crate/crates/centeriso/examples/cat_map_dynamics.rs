//! The skew product over the cat map: iterates, exact periodic orbits and
//! points on the unstable leaf of a point.
//!
//! Run with `cargo run --release --example cat_map_dynamics`.

use centeriso::torus::{
    leaf_point, periodic_orbits, periodic_points, LeafKind, LeafSegment, SystemSpec, TorusPoint,
    TrigPolynomial,
};

fn main() -> centeriso::Result<()> {
    let system = SystemSpec::cat(TrigPolynomial::cosine(vec![1, 0], 1.0), vec![0.618034])?;
    println!(
        "λ = {:.6}, log λ = {:.6}",
        system.lambda(),
        system.log_lambda()
    );

    let x = TorusPoint::new(&[0.31, 0.47, 0.2])?;
    let y = system.apply(&x, 5)?;
    let back = system.apply(&y, -5)?;
    println!(
        "f⁵(x) = {:?}; f⁻⁵f⁵(x) returns to x within {:.1e}",
        y.coords(),
        back.distance(&x)
    );

    for p in 1..=6 {
        println!(
            "period {p}: {} fixed points of Aᵖ",
            periodic_points(&system, p)?.len()
        );
    }
    let orbits = periodic_orbits(&system, 4)?;
    println!(
        "{} prime orbits of period ≤ 4; first: {:?}",
        orbits.len(),
        orbits[0]
    );

    let seg = LeafSegment::new(&system, x, LeafKind::Unstable, 0.2)?;
    for t in [-0.2, -0.1, 0.0, 0.1, 0.2] {
        let p = leaf_point(&system, &seg, t)?;
        println!(
            "W^u(x) at t = {t:+.1}: {:?} (series error ≤ {:.1e})",
            p.point.coords(),
            p.error
        );
    }
    Ok(())
}
