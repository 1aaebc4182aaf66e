//! Numerical checks of stochastic maximization: estimation error and
//! similarity ratio, inclusion and hitting-time statistics, and the
//! randomized Bellman operator `Φ` with its fixed point.

mod metrics;
mod phi;
mod sampling;

pub use metrics::{beta, omega};
pub use phi::{
    contraction_check, for_each_combination, phi_apply, phi_standard_error, qstar_fixed_point,
    ContractionReport, PhiOperatorSpec, SubsetDistribution, MAX_ENUMERATION_ACTIONS,
};
pub use sampling::{
    expected_subset_max, fixed_values_memoryless, hitting_time, l_statistic_sd_uniform,
    lemma1_probability, subset_max_weights, uniform_expected_max, FixedValuesReport, HittingReport,
    InclusionReport, UniformMaxReport,
};
