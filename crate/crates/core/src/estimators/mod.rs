//! Monte Carlo aggregation and analytic condition checks.

mod conditions;
mod curve;
mod moments;
mod scenarios;
mod stats;

pub use conditions::{
    check_half_space_separation, check_thm12_condition, clump_floor, holder_bound_check, occupancy_stats,
    thm13_params, ConditionReport,
};
pub use curve::{
    estimate_extinction_curve, feller_extinction_oracle, simulate, ExtinctionCurve, ReplicaSummary, Scenario,
    MIN_CURVE_REPLICAS,
};
pub use moments::{
    check_catalytic_moments, check_mass_martingale, CatalyticMoments, MeanTest, MomentReport,
    MAX_TRUNCATED_MASS,
};
pub use scenarios::{catalytic_extinction_frequency, thm13_scenario, EtaRow, FrequencyEstimate, Thm13Table};
pub use stats::{Moments, Proportion, SE_BAND, Z95};
