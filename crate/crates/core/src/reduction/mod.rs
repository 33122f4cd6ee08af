//! Coordinate selection and MAP-based reductions of the posterior mixing density, plus the
//! parameter-space baselines.

pub mod ccs;
pub mod diagnostic;
pub mod hellinger;
pub mod map;
mod split;
pub mod xspace;

pub use ccs::{ccs_w_sampler, default_solver, sample_components, sample_components_chains, CcsWOutput};
pub use diagnostic::{
    epsilon_curve, estimate_diagnostic_w, estimate_diagnostic_x, split_by_diagnostic, split_top, Diagnostic,
    DiagnosticSource,
};
pub use hellinger::{hellinger_bound_estimate, hellinger_bound_estimate_fn};
pub use map::{map_w_approx, map_w_sampler, support_threshold, MapApprox, PrecisionRepair};
pub use split::CoordinateSplit;
pub use xspace::{ccs_x_sampler, map_x_approx, map_x_sampler, CcsXOutput, MapXApprox, ReducedXTarget};
