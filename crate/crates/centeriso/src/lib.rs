//! Numerical workbench for equilibrium states of center isometries.
//!
//! The systems studied here are skew products over a hyperbolic toral
//! automorphism,
//!
//! ```text
//! f(x, θ) = (A·x, θ + α·k(x))   on  T² × T^c,  c ∈ {0, 1, 2},
//! ```
//!
//! where `A` is a hyperbolic integer matrix, `k` a real trigonometric
//! polynomial and `α` a frequency vector.  The fibers are rotated rigidly, so
//! the derivative is an isometry along the center direction.
//!
//! The crate is organised in five layers:
//!
//! * [`torus`] — points, systems, invariant directions, explicit stable and
//!   unstable leaves, Bowen balls and periodic points.
//! * [`potentials`] — Hölder potentials, Birkhoff sums, the Δ and holonomy
//!   Jacobian products, Liouville frequencies and the Livšic test.
//! * [`leaf`] — leafwise transfer operators: atomic leaf measures, their
//!   iterates, pressure from mass growth, holonomy transport and covering
//!   (spanning-set) pressure.
//! * [`equilibrium`] — the product of unstable and center-stable sections on
//!   dynamical boxes, an exact sampler for the resulting equilibrium state,
//!   and the statistical checks (invariance, Gibbs bounds, Brin–Katok
//!   entropy, conditional densities, correlation decay).
//! * [`cli`] — JSON configuration, report writing and the subcommands used by
//!   the `centeriso` binary.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod leaf;
pub mod potentials;
pub mod torus;

pub use error::{Error, Result};
