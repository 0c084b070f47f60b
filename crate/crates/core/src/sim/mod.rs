//! Discrete-event simulation of the polling system under four service
//! strategies.
//!
//! The simulator is the independent oracle for the closed-form results and
//! the only evaluator for the total-timer strategy and the arrival-armed
//! timer variant, neither of which has an analytic delay here. Runs are
//! fully deterministic given the seed; replications derive separate
//! counter-based streams from the same seed.

mod engine;
pub mod dist;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::CheckedConfig;
use crate::optimize::{optimal_credits_two_station, OptimizeError};
use engine::{Engine, EngineSettings};

pub use dist::{fit_two_moment, DistError, DistributionSpec, Sampler};
pub use stats::Estimate;

/// Service strategies the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Per-visit idle credit spendable across interleaved busy periods.
    WaitAndSee,
    /// Credit caps the total time at the station before a final exhaustive
    /// clearance.
    TotalTimer,
    /// Timer armed only on arrival at an empty station (station 1); the
    /// server leaves after the first busy period or on expiry.
    BoxmaTimer,
    /// Switch immediately whenever the queue is empty.
    Exhaustive,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Strategy::WaitAndSee => "wait_and_see",
            Strategy::TotalTimer => "total_timer",
            Strategy::BoxmaTimer => "boxma_timer",
            Strategy::Exhaustive => "exhaustive",
        };
        f.write_str(name)
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wait_and_see" => Ok(Strategy::WaitAndSee),
            "total_timer" => Ok(Strategy::TotalTimer),
            "boxma_timer" => Ok(Strategy::BoxmaTimer),
            "exhaustive" => Ok(Strategy::Exhaustive),
            other => Err(format!(
                "unknown strategy {other:?}; expected wait_and_see, total_timer, boxma_timer, or exhaustive"
            )),
        }
    }
}

fn default_seed() -> u64 {
    1
}
fn default_warmup() -> u64 {
    10_000
}
fn default_warmup_cycles() -> u64 {
    1_000
}
fn default_arrivals() -> u64 {
    1_000_000
}
fn default_batches() -> usize {
    30
}
fn default_queue_guard() -> usize {
    2_000_000
}

/// Run parameters for one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub strategy: Strategy,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Arrivals discarded before measuring starts (measurement also waits
    /// for `warmup_cycles` completed cycles).
    #[serde(rename = "warmup", default = "default_warmup")]
    pub warmup_arrivals: u64,
    #[serde(default = "default_warmup_cycles")]
    pub warmup_cycles: u64,
    /// Number of measured arrivals.
    #[serde(rename = "arrivals", default = "default_arrivals")]
    pub measured_arrivals: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Per-station service laws; fitted from the configured moments when
    /// omitted.
    #[serde(default)]
    pub service_dists: Option<Vec<DistributionSpec>>,
    /// Per-edge switchover laws; fitted from the configured moments when
    /// omitted.
    #[serde(default)]
    pub switchover_dists: Option<Vec<DistributionSpec>>,
    /// Arm the arrival-triggered timer at every station, not just station 1.
    #[serde(default)]
    pub boxma_all_stations: bool,
    /// Replication index; distinct streams of the same seed are independent.
    #[serde(default)]
    pub stream: u64,
    /// Queued messages across all stations before the run aborts flagged as
    /// unstable.
    #[serde(default = "default_queue_guard")]
    pub queue_guard: usize,
}

impl SimConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            seed: default_seed(),
            warmup_arrivals: default_warmup(),
            warmup_cycles: default_warmup_cycles(),
            measured_arrivals: default_arrivals(),
            batches: default_batches(),
            service_dists: None,
            switchover_dists: None,
            boxma_all_stations: false,
            stream: 0,
            queue_guard: default_queue_guard(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_arrivals(mut self, measured: u64) -> Self {
        self.measured_arrivals = measured;
        self
    }

    pub fn with_warmup(mut self, arrivals: u64, cycles: u64) -> Self {
        self.warmup_arrivals = arrivals;
        self.warmup_cycles = cycles;
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("bad simulation parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Distribution(#[from] DistError),
    #[error("{which} law {index}: mean/second moment ({got_mean}, {got_m2}) do not match configured ({want_mean}, {want_m2})")]
    MomentMismatch {
        which: &'static str,
        index: usize,
        want_mean: f64,
        want_m2: f64,
        got_mean: f64,
        got_m2: f64,
    },
}

/// Observed fractions of time the server spends in each state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateFractions {
    pub working: f64,
    pub switching: f64,
    pub waiting: f64,
}

impl StateFractions {
    pub fn total(&self) -> f64 {
        self.working + self.switching + self.waiting
    }
}

/// Time-average observations beyond the delay estimates, used to
/// cross-validate the workload identities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimDiagnostics {
    /// Time-average workload conditioned on switching from station i.
    pub workload_while_switching: Vec<Option<f64>>,
    /// Time-average workload conditioned on waiting at station i.
    pub workload_while_waiting: Vec<Option<f64>>,
    /// Time-average number of queued (not in service) messages per station.
    pub mean_queue_length: Vec<f64>,
    /// Fraction of measured time switching from station i.
    pub switching_fraction: Vec<f64>,
    /// Fraction of measured time waiting at station i.
    pub waiting_fraction: Vec<f64>,
    /// Completed cycles inside the measurement window.
    pub cycles_measured: u64,
}

/// Delay and cycle estimates with 99% confidence intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub per_station_delay: Vec<Estimate>,
    pub weighted_delay: Estimate,
    pub mean_cycle: f64,
    pub state_fractions: StateFractions,
    pub diagnostics: SimDiagnostics,
    /// Set when the queue guard tripped; estimates cover partial data only.
    pub unstable: bool,
}

const MOMENT_MATCH_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MOMENT_MATCH_TOL * a.abs().max(b.abs()).max(1e-12)
}

fn build_samplers(
    which: &'static str,
    moments: &[(f64, f64)],
    provided: Option<&[DistributionSpec]>,
    allow_zero: bool,
) -> Result<Vec<Sampler>, SimError> {
    match provided {
        Some(specs) => {
            if specs.len() != moments.len() {
                return Err(SimError::BadParameters(format!(
                    "{which} laws: expected {} entries, got {}",
                    moments.len(),
                    specs.len()
                )));
            }
            specs
                .iter()
                .zip(moments)
                .enumerate()
                .map(|(index, (spec, &(mean, m2)))| {
                    if !close(spec.mean(), mean) || !close(spec.second_moment(), m2) {
                        return Err(SimError::MomentMismatch {
                            which,
                            index,
                            want_mean: mean,
                            want_m2: m2,
                            got_mean: spec.mean(),
                            got_m2: spec.second_moment(),
                        });
                    }
                    Ok(Sampler::from_spec(spec)?)
                })
                .collect()
        }
        None => moments
            .iter()
            .map(|&(mean, m2)| {
                let spec = if allow_zero && mean == 0.0 {
                    DistributionSpec::Deterministic { value: 0.0 }
                } else {
                    fit_two_moment(mean, m2)?
                };
                Ok(Sampler::from_spec(&spec)?)
            })
            .collect(),
    }
}

/// Runs one simulation; deterministic given `(config, sim)`.
pub fn simulate(config: &CheckedConfig, sim: &SimConfig) -> Result<SimEstimate, SimError> {
    if sim.batches < 10 {
        return Err(SimError::BadParameters(format!("need at least 10 batches, got {}", sim.batches)));
    }
    if sim.measured_arrivals < 10 * sim.batches as u64 {
        return Err(SimError::BadParameters(format!(
            "need at least 10 arrivals per batch: {} arrivals for {} batches",
            sim.measured_arrivals, sim.batches
        )));
    }

    let service_moments: Vec<(f64, f64)> =
        config.stations().iter().map(|s| (s.b, s.b2)).collect();
    let switch_moments: Vec<(f64, f64)> =
        config.switchovers().iter().map(|s| (s.r, s.r2)).collect();
    let service =
        build_samplers("service", &service_moments, sim.service_dists.as_deref(), false)?;
    let switchover =
        build_samplers("switchover", &switch_moments, sim.switchover_dists.as_deref(), true)?;

    let settings = EngineSettings {
        strategy: sim.strategy,
        service,
        switchover,
        seed: sim.seed,
        stream: sim.stream,
        warmup_arrivals: sim.warmup_arrivals,
        warmup_cycles: sim.warmup_cycles,
        measured_arrivals: sim.measured_arrivals,
        batches: sim.batches,
        boxma_all_stations: sim.boxma_all_stations,
        queue_guard: sim.queue_guard,
    };
    let out = Engine::new(config, settings).run();

    let loads = config.loads();
    let weights: Vec<f64> = loads.rho.iter().map(|r| r / loads.rho0).collect();
    let window = out.window;

    let state_fractions = StateFractions {
        working: out.time_working / window,
        switching: out.time_switching.iter().sum::<f64>() / window,
        waiting: out.time_waiting.iter().sum::<f64>() / window,
    };
    let diagnostics = SimDiagnostics {
        workload_while_switching: out
            .workload_switching
            .iter()
            .zip(&out.time_switching)
            .map(|(&wl, &t)| if t > 0.0 { Some(wl / t) } else { None })
            .collect(),
        workload_while_waiting: out
            .workload_waiting
            .iter()
            .zip(&out.time_waiting)
            .map(|(&wl, &t)| if t > 0.0 { Some(wl / t) } else { None })
            .collect(),
        mean_queue_length: out.queue_integral.iter().map(|q| q / window).collect(),
        switching_fraction: out.time_switching.iter().map(|t| t / window).collect(),
        waiting_fraction: out.time_waiting.iter().map(|t| t / window).collect(),
        cycles_measured: out.cycle_count,
    };

    Ok(SimEstimate {
        per_station_delay: out.tally.per_station(),
        weighted_delay: out.tally.weighted(&weights),
        mean_cycle: if out.cycle_count > 0 { out.cycle_sum / out.cycle_count as f64 } else { f64::NAN },
        state_fractions,
        diagnostics,
        unstable: out.unstable,
    })
}

/// Credit at which the total-timer strategy is expected to do best:
/// the wait-and-see optimum T₁* plus ρ₁ times the optimal cycle time.
pub fn strategy_ii_heuristic_credit(config: &CheckedConfig) -> Result<f64, OptimizeError> {
    let decision = optimal_credits_two_station(config)?;
    let loads = config.loads();
    let t0_opt = decision.t_opt[0] + decision.t_opt[1];
    let cycle = (loads.r0 + t0_opt) / (1.0 - loads.rho0);
    Ok(decision.t_opt[0] + loads.rho[0] * cycle)
}
