//! Closed-form evaluation of cycle time, workloads, and the intensity
//! weighted mean delay for the wait-and-see, exhaustive, and single-station
//! models.
//!
//! Every evaluator reports its additive terms separately so callers (and the
//! test suite) can see exactly which component moved. Degenerate
//! denominators (no switchover, no idle time at all) are resolved by taking
//! the analytically forced limit and flagging the result instead of erroring,
//! since optimizers and sweeps legitimately probe those boundaries.

use serde::Serialize;
use thiserror::Error;

use crate::model::CheckedConfig;

/// A named additive component of an evaluated delay formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub name: &'static str,
    pub value: f64,
}

/// Boundary cases where a formula denominator vanishes and the value is the
/// analytic limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    /// r₀ = 0: the switchover residual term is taken as 0.
    NoSwitchover,
    /// r₀ + T₀ = 0: the server is never idle; only the M/G/1 term remains.
    NoIdle,
}

/// Mean average queueing delay D̄ together with its formula breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    /// Per-station mean delays; only populated where the model provides them
    /// (single-station systems).
    pub per_station: Option<Vec<f64>>,
    /// Intensity weighted mean delay D̄ = Σ (ρ_i/ρ₀) E D_i.
    pub weighted_mean: f64,
    /// Named additive components; they sum to `weighted_mean` exactly.
    pub terms: Vec<Term>,
    pub degeneracy: Option<Degeneracy>,
}

impl DelayReport {
    fn from_terms(terms: Vec<Term>, degeneracy: Option<Degeneracy>) -> Self {
        let weighted_mean = terms.iter().map(|t| t.value).sum();
        debug_assert!(weighted_mean >= 0.0, "delay must be nonnegative");
        Self { per_station: None, weighted_mean, terms, degeneracy }
    }

    fn with_single_station(mut self) -> Self {
        self.per_station = Some(vec![self.weighted_mean]);
        self
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("operation requires exactly {expected} stations, config has {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("station index {index} out of range for {len} stations")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("station {station} has zero credit, so no waiting state exists")]
    NoWaitingState { station: usize },
}

/// Expected cycle time (r₀ + T₀)/(1 − ρ₀): the idle time per cycle is fixed,
/// and the server is idle a fraction 1 − ρ₀ of the time.
pub fn mean_cycle_time(config: &CheckedConfig) -> f64 {
    let loads = config.loads();
    (loads.r0 + loads.t0) / (1.0 - loads.rho0)
}

/// Mean workload of the reference M/G/1 system: Σλ_i b_i⁽²⁾ / (2(1 − ρ₀)).
pub fn mg1_workload(config: &CheckedConfig) -> f64 {
    let loads = config.loads();
    let sum: f64 = config.stations().iter().map(|s| s.lambda * s.b2).sum();
    sum / (2.0 * (1.0 - loads.rho0))
}

fn mg1_delay_term(config: &CheckedConfig) -> f64 {
    mg1_workload(config)
}

/// Mean delay under the plain exhaustive strategy (all credits ignored).
pub fn exhaustive_delay(config: &CheckedConfig) -> DelayReport {
    let loads = config.loads();
    let rho_sq: f64 = loads.rho.iter().map(|r| r * r).sum();
    let cross = loads.r0 * (loads.rho0 * loads.rho0 - rho_sq)
        / (2.0 * loads.rho0 * (1.0 - loads.rho0));
    let (residual, degeneracy) = if loads.r0 > 0.0 {
        (loads.r0_2 / (2.0 * loads.r0), None)
    } else {
        (0.0, Some(Degeneracy::NoSwitchover))
    };
    let report = DelayReport::from_terms(
        vec![
            Term { name: "mg1", value: mg1_delay_term(config) },
            Term { name: "cross_load", value: cross },
            Term { name: "switch_residual", value: residual },
        ],
        degeneracy,
    );
    if config.len() == 1 {
        report.with_single_station()
    } else {
        report
    }
}

/// Mean delay of the wait-and-see polling model, with the four summands of
/// the delay formula exposed as named terms.
pub fn wait_and_see_delay(config: &CheckedConfig) -> DelayReport {
    let loads = config.loads();
    let idle = loads.r0 + loads.t0;
    if idle <= 0.0 {
        // Never idle: the model collapses to the M/G/1 queue.
        let report = DelayReport::from_terms(
            vec![
                Term { name: "mg1", value: mg1_delay_term(config) },
                Term { name: "cross_load", value: 0.0 },
                Term { name: "residual_linear", value: 0.0 },
                Term { name: "credit_quadratic", value: 0.0 },
            ],
            Some(Degeneracy::NoIdle),
        );
        return if config.len() == 1 { report.with_single_station() } else { report };
    }

    let rho0 = loads.rho0;
    let rho_sq: f64 = loads.rho.iter().map(|r| r * r).sum();
    let cross = idle * (rho0 * rho0 - rho_sq) / (2.0 * rho0 * (1.0 - rho0));

    let credit_linear: f64 = config
        .stations()
        .iter()
        .zip(&loads.rho)
        .map(|(s, &rho_i)| s.credit * (rho0 - rho_i))
        .sum();
    let residual_linear = (0.5 * rho0 * loads.r0_2 + loads.r0 * credit_linear) / (rho0 * idle);

    let mut quad = 0.0;
    for (i, (si, &rho_i)) in config.stations().iter().zip(&loads.rho).enumerate() {
        quad += si.credit * si.credit * (1.0 - 2.0 * rho_i) * (rho0 - rho_i)
            / (2.0 * (1.0 - rho_i));
        for (sj, &rho_j) in config.stations().iter().zip(&loads.rho).skip(i + 1) {
            quad += si.credit * sj.credit * (rho0 - rho_i - rho_j);
        }
    }
    let credit_quadratic = quad / (idle * rho0);

    let report = DelayReport::from_terms(
        vec![
            Term { name: "mg1", value: mg1_delay_term(config) },
            Term { name: "cross_load", value: cross },
            Term { name: "residual_linear", value: residual_linear },
            Term { name: "credit_quadratic", value: credit_quadratic },
        ],
        None,
    );
    if config.len() == 1 {
        report.with_single_station()
    } else {
        report
    }
}

fn expect_two_stations(config: &CheckedConfig) -> Result<(), AnalyticError> {
    if config.len() != 2 {
        return Err(AnalyticError::WrongArity { expected: 2, got: config.len() });
    }
    Ok(())
}

/// Two-station specialization of the delay formula.
pub fn two_station_delay(config: &CheckedConfig) -> Result<DelayReport, AnalyticError> {
    expect_two_stations(config)?;
    let loads = config.loads();
    let (rho1, rho2) = (loads.rho[0], loads.rho[1]);
    let rho0 = loads.rho0;
    let (t1, t2) = (config.stations()[0].credit, config.stations()[1].credit);
    let idle = loads.r0 + loads.t0;

    let mg1 = Term { name: "mg1", value: mg1_delay_term(config) };
    if idle <= 0.0 {
        return Ok(DelayReport::from_terms(
            vec![
                mg1,
                Term { name: "switch_residual", value: 0.0 },
                Term { name: "cross_load", value: 0.0 },
                Term { name: "credit_1", value: 0.0 },
                Term { name: "credit_2", value: 0.0 },
            ],
            Some(Degeneracy::NoIdle),
        ));
    }

    let denom = rho0 * idle;
    let residual = loads.r0_2 * rho0 / 2.0 / denom;
    let cross = rho1 * rho2 / (1.0 - rho0) * idle * idle / denom;
    let credit_1 =
        rho2 * t1 * (loads.r0 + t1 * (1.0 - 2.0 * rho1) / (2.0 * (1.0 - rho1))) / denom;
    let credit_2 =
        rho1 * t2 * (loads.r0 + t2 * (1.0 - 2.0 * rho2) / (2.0 * (1.0 - rho2))) / denom;

    Ok(DelayReport::from_terms(
        vec![
            mg1,
            Term { name: "switch_residual", value: residual },
            Term { name: "cross_load", value: cross },
            Term { name: "credit_1", value: credit_1 },
            Term { name: "credit_2", value: credit_2 },
        ],
        None,
    ))
}

/// The seven constants of the two-station delay formula in rational form.
///
/// All of them are nonnegative for a stable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoStationCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
}

/// Evaluates the seven two-station abbreviation constants.
pub fn coefficients_two_station(
    config: &CheckedConfig,
) -> Result<TwoStationCoefficients, AnalyticError> {
    expect_two_stations(config)?;
    let loads = config.loads();
    let (rho1, rho2) = (loads.rho[0], loads.rho[1]);
    let rho0 = loads.rho0;
    let r0 = loads.r0;

    let c1 = mg1_delay_term(config);
    let c2 = rho1 * rho2 * r0 * r0 / (1.0 - rho0) + rho0 * loads.r0_2 / 2.0;
    let c3 = r0 * rho2 + 2.0 * rho2 * rho1 * r0 / (1.0 - rho0);
    let c4 = r0 * rho1 + 2.0 * rho1 * rho2 * r0 / (1.0 - rho0);
    let c5 = 2.0 * rho2 * rho1 / (1.0 - rho0);
    let c6 = c5 / 2.0 + rho2 / 2.0 * (1.0 - rho1 / (1.0 - rho1));
    let c7 = c5 / 2.0 + rho1 / 2.0 * (1.0 - rho2 / (1.0 - rho2));
    Ok(TwoStationCoefficients { c1, c2, c3, c4, c5, c6, c7 })
}

/// Two-station delay assembled through the abbreviation constants:
/// c₁ + (c₂ + c₃T₁ + c₄T₂ + c₅T₁T₂ + c₆T₁² + c₇T₂²) / (ρ₀(r₀ + T₁ + T₂)).
pub fn delay_via_cs(config: &CheckedConfig) -> Result<DelayReport, AnalyticError> {
    let cs = coefficients_two_station(config)?;
    let loads = config.loads();
    let (t1, t2) = (config.stations()[0].credit, config.stations()[1].credit);
    let idle = loads.r0 + loads.t0;

    if idle <= 0.0 {
        return Ok(DelayReport::from_terms(
            vec![
                Term { name: "base", value: cs.c1 },
                Term { name: "credit_rational", value: 0.0 },
            ],
            Some(Degeneracy::NoIdle),
        ));
    }
    let numer = cs.c2 + cs.c3 * t1 + cs.c4 * t2 + cs.c5 * t1 * t2 + cs.c6 * t1 * t1
        + cs.c7 * t2 * t2;
    Ok(DelayReport::from_terms(
        vec![
            Term { name: "base", value: cs.c1 },
            Term { name: "credit_rational", value: numer / (loads.rho0 * idle) },
        ],
        None,
    ))
}

/// Delay of the single-station model (a queue whose server takes one
/// vacation after spending its idle credit).
///
/// Strictly decreasing in the credit; the T → ∞ limit is the M/G/1 delay.
pub fn single_station_delay(config: &CheckedConfig) -> Result<DelayReport, AnalyticError> {
    if config.len() != 1 {
        return Err(AnalyticError::WrongArity { expected: 1, got: config.len() });
    }
    let s = config.stations()[0];
    let sw = config.switchovers()[0];
    let rho = config.loads().rho[0];
    let mg1 = s.lambda * s.b2 / (2.0 * (1.0 - rho));
    let idle = sw.r + s.credit;
    let (residual, degeneracy) = if idle > 0.0 {
        (sw.r2 / (2.0 * idle), None)
    } else {
        (0.0, Some(Degeneracy::NoIdle))
    };
    Ok(DelayReport::from_terms(
        vec![
            Term { name: "mg1", value: mg1 },
            Term { name: "vacation_residual", value: residual },
        ],
        degeneracy,
    )
    .with_single_station())
}
