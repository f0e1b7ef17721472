//! Coverage diffusion on street networks.

mod decay_fit;
mod diffusion;
mod graph;

pub use decay_fit::{
    fit_kappa_eff, functional_form_test, sqrt_law_test, synthetic_distance_response, FormComparison, KappaFit, ModelScore, SqrtLawResult,
    TimeVaryingDiffusion, KAPPA_GRID_MAX, KAPPA_GRID_MIN, KAPPA_GRID_POINTS, REFERENCE_PERIODS,
};
pub use diffusion::{
    analytic_coverage, critical_distance, half_distance, stability_bound, steady_state_residual, steady_state_solve, transient_coverage,
    CoverageField, DiffusionParams, StationSpec,
};
pub use graph::{network_distances, Edge, StreetNetwork};
