//! Problem instance, radio physics and feasibility evaluation.
//!
//! Every solver consumes a [`Scenario`] and reports a [`PlacementSolution`]
//! whose [`FeasibilityReport`] comes from [`evaluate`].

mod physics;
mod report;
mod scenario;

pub use physics::{
    allowable_power, channel_gain, distance_order, geometric_centroid, lifetime_of, rates,
    sample_primary_gains, sample_primary_gains_with, sinr_vector, zeta_of,
};
pub use report::{evaluate, DecodingOrder, FeasibilityReport, PlacementSolution, EVAL_TOL};
pub use scenario::{db_to_linear, dbm_to_watts, linear_to_db, watts_to_dbm, Point, Scenario, ScenarioFile};
