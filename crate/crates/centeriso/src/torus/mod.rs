//! Torus dynamics: points, systems, leaves, Bowen balls and periodic points.

pub mod bowen;
pub mod leaf;
pub mod periodic;
pub mod point;
pub mod system;
pub mod trig;

pub use bowen::{bowen_ball_contains, BowenBallSpec};
pub use leaf::{
    leaf_point, leaf_points_batch, log_unstable_jacobian, stable_base_direction,
    unstable_base_direction, unstable_direction, LeafKind, LeafPoint, LeafPolyline, LeafSegment,
};
pub use periodic::{periodic_orbits, periodic_points, periodic_points_exact, RationalPoint};
pub use point::{base_distance, circle_dist, wrap, wrapped_diff, TorusPoint};
pub use system::{BasePerturbation, Guards, SystemConfig, SystemSpec};
pub use trig::{sinc, Trig2, TrigMode, TrigPolynomial};
