//! Instruments for the mean-field behaviour of the particle systems.

mod bump;
mod moments;
mod residual;
mod stability;
mod wasserstein;

pub use bump::{make_bump, BumpTestFunction};
pub use moments::{expected_moment_sup, moment_bound_monitor, raw_moment, MomentMonitorReport};
pub use residual::{
    fit_log_log_slope, fp_residual, fp_residual_scaling, fp_residual_sweep, FPResidualReport,
    replicate_seeds, JSummary, ReplicateRun, ResidualSample, BOOTSTRAP_RESAMPLES,
};
pub use stability::{stability_ratios, StabilityEntry, StabilityReport};
pub use wasserstein::{optimal_assignment, wasserstein2, MAX_ASSIGNMENT_SIZE};
