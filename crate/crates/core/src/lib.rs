//! Delay analysis for cyclic polling systems whose server may idle at an
//! empty station on a fixed per-visit credit ("wait-and-see" service).
//!
//! The crate computes the intensity weighted mean queueing delay in closed
//! form, re-derives it through an independent workload-decomposition route,
//! optimizes the per-station credits (closed forms for two stations,
//! projected gradient descent for general N), evaluates a delay lower bound
//! valid for every current-station-history idling strategy, and
//! cross-validates all of it against a discrete-event simulator that also
//! covers two timer strategies with no analytic formula.
//!
//! - [`model`]: parameters, validation, derived loads, the JSON config.
//! - [`analytic`]: closed-form delay evaluators and their term breakdowns.
//! - [`decomposition`]: the independent workload route to the same delay.
//! - [`optimize`]: worth-waiting verdicts and optimal credits.
//! - [`lower_bound`]: the delay floor over mean waiting allocations.
//! - [`sim`]: the discrete-event simulator and two-moment law fitting.

pub mod analytic;
pub mod decomposition;
pub mod lower_bound;
pub mod minimize;
pub mod model;
pub mod optimize;
pub mod scenario;
pub mod sim;

pub use analytic::{
    coefficients_two_station, delay_via_cs, exhaustive_delay, mean_cycle_time, mg1_workload,
    single_station_delay, two_station_delay, wait_and_see_delay, AnalyticError, Degeneracy,
    DelayReport, Term, TwoStationCoefficients,
};
pub use decomposition::{
    delay_via_workload_decomposition, workload_breakdown, workload_while_switching,
    workload_while_waiting, FlaggedValue, WorkloadBreakdown,
};
pub use lower_bound::{delay_lower_bound, lb_objective, LowerBoundError, LowerBoundPoint, LowerBoundResult};
pub use minimize::Options as OptimizeOptions;
pub use model::{
    derive_loads, validate, CheckedConfig, ConfigError, DerivedLoads, PollingConfig,
    StationParams, SwitchoverMoments,
};
pub use optimize::{
    asymmetric_optimal_credit, asymmetric_worth_waiting, optimal_credits_general,
    optimal_credits_two_station, stationarity_residual, symmetric_optimal_credit,
    symmetric_worth_waiting, ConditionCheck, DecisionRoute, GeneralOptimum, OptimizeError,
    RationalQuadratic, TwoStationDecision,
};
pub use scenario::Scenario;
pub use sim::{
    fit_two_moment, simulate, strategy_ii_heuristic_credit, DistributionSpec, Estimate,
    SimConfig, SimEstimate, SimError, Strategy,
};
