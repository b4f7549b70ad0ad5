//! The equilibrium state assembled from the leaf sections by the local
//! product structure on dynamical boxes, an exact sampler for it, and the
//! statistical verification suite.

pub mod boxes;
pub mod checks;
pub mod partition;
pub mod sampler;

pub use boxes::{plaque_independence, BoxGrid, DynamicalBox, ParamRect, PlaqueReport};
pub use checks::{
    ball_masses, brin_katok_entropy, conditional_density_check, coordinate_histograms,
    correlation_decay, forward_backward_pressure, gibbs_check, invariance_check,
    overlap_consistency, product_structure_bounds, BallEstimator, BallMass, ConditionalOptions,
    ConditionalReport, CorrelationRow, EntropyOptions, EntropyReport, FiberComparison,
    GibbsOptions, GibbsReport, GibbsRow, HistogramReport, InvarianceReport, ProductBoundReport,
};
pub use partition::{
    first_return_partition, validate_product_scale, ProductScaleReport, Rectangle,
};
pub use sampler::{BoxSample, EquilibriumSampler, RectDraw, SamplerOptions};
