//! Workload-decomposition route to the mean delay.
//!
//! Steady-state workload splits into an M/G/1 part plus the workload seen at
//! a random idle instant; conditioning the idle part on the server switching
//! or waiting at each station and applying Little's law yields the delay.
//! This module codes that chain of identities directly, sharing nothing with
//! the closed-form evaluator in [`crate::analytic`] beyond the model types,
//! so numeric agreement between the two routes is a genuine cross-check of
//! both transcriptions.

use serde::Serialize;

use crate::analytic::{AnalyticError, Degeneracy, DelayReport, Term};
use crate::model::CheckedConfig;

/// A workload value that may sit on a degenerate boundary (value taken as
/// the analytic limit there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlaggedValue {
    pub value: f64,
    pub degeneracy: Option<Degeneracy>,
}

/// Intermediates of the decomposition path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadBreakdown {
    /// Mean M/G/1 workload.
    pub ev_mg1: f64,
    /// Mean workload seen while switching from station i.
    pub ev_switching: Vec<FlaggedValue>,
    /// Mean workload seen while waiting at station i; absent when the
    /// station has no credit (the state does not exist).
    pub ev_waiting: Vec<Option<f64>>,
    /// Probability the server is switching from station i.
    pub p: Vec<f64>,
    /// Probability the server is waiting at station i.
    pub q_i: Vec<f64>,
    /// P(switching | idle).
    pub q: f64,
    /// Mean cycle time.
    pub ec: f64,
    /// Mean length of the first busy period of a visit to station i.
    pub ez: Vec<f64>,
}

/// Sum of ρ_l over the cyclic index range (from, to), both exclusive of the
/// center station that `from` is measured after. `include_to` adds ρ_to.
fn cyclic_rho_sum(rho: &[f64], after: usize, to: usize, include_to: bool) -> f64 {
    let n = rho.len();
    let mut sum = 0.0;
    let mut k = (after + 1) % n;
    while k != to {
        sum += rho[k];
        k = (k + 1) % n;
    }
    if include_to {
        sum += rho[to];
    }
    sum
}

fn cross_station_accumulation(config: &CheckedConfig, center: usize, ec: f64) -> f64 {
    let loads = config.loads();
    let n = config.len();
    let mut total = 0.0;
    for j in 0..n {
        if j == center {
            continue;
        }
        // Stations that were filled after the server left them and are still
        // holding that work: up to and including j for switchover periods,
        // strictly before j for the working and waiting periods at j.
        let through_j = cyclic_rho_sum(&loads.rho, center, j, true);
        let before_j = cyclic_rho_sum(&loads.rho, center, j, false);
        total += config.switchovers()[j].r * through_j;
        total += loads.rho[j] * ec * before_j;
        total += config.stations()[j].credit * before_j;
    }
    total
}

fn cycle_time(config: &CheckedConfig) -> f64 {
    let loads = config.loads();
    (loads.r0 + loads.t0) / (1.0 - loads.rho0)
}

/// Mean workload present while the server switches from station `i`
/// (0-based) to its cyclic successor.
pub fn workload_while_switching(
    config: &CheckedConfig,
    i: usize,
) -> Result<FlaggedValue, AnalyticError> {
    let n = config.len();
    if i >= n {
        return Err(AnalyticError::IndexOutOfRange { index: i, len: n });
    }
    let loads = config.loads();
    let ec = cycle_time(config);
    let rho_i = loads.rho[i];
    let others = loads.rho0 - rho_i;

    let mut value = cross_station_accumulation(config, i, ec);
    value += rho_i * ec * others;
    value += others * config.stations()[i].credit;

    let sw = config.switchovers()[i];
    let degeneracy = if sw.r > 0.0 {
        value += loads.rho0 * sw.r2 / (2.0 * sw.r);
        None
    } else {
        Some(Degeneracy::NoSwitchover)
    };
    Ok(FlaggedValue { value, degeneracy })
}

/// Mean workload present while the server waits at station `i` (0-based);
/// the state only exists when the station has positive credit.
pub fn workload_while_waiting(config: &CheckedConfig, i: usize) -> Result<f64, AnalyticError> {
    let n = config.len();
    if i >= n {
        return Err(AnalyticError::IndexOutOfRange { index: i, len: n });
    }
    let credit = config.stations()[i].credit;
    if credit <= 0.0 {
        return Err(AnalyticError::NoWaitingState { station: i });
    }
    let loads = config.loads();
    let ec = cycle_time(config);
    let rho_i = loads.rho[i];
    let others = loads.rho0 - rho_i;

    let mut value = cross_station_accumulation(config, i, ec);
    value += others * (rho_i * ec + credit / 2.0 * (1.0 - rho_i / (1.0 - rho_i)));
    Ok(value)
}

/// Computes every intermediate of the decomposition route.
pub fn workload_breakdown(config: &CheckedConfig) -> WorkloadBreakdown {
    let loads = config.loads();
    let n = config.len();
    let ec = cycle_time(config);
    let idle = loads.r0 + loads.t0;

    let ev_mg1 = {
        let sum: f64 = config.stations().iter().map(|s| s.lambda * s.b2).sum();
        sum / (2.0 * (1.0 - loads.rho0))
    };

    let ev_switching: Vec<FlaggedValue> =
        (0..n).map(|i| workload_while_switching(config, i).expect("index in range")).collect();
    let ev_waiting: Vec<Option<f64>> =
        (0..n).map(|i| workload_while_waiting(config, i).ok()).collect();

    let (p, q_i): (Vec<f64>, Vec<f64>) = if idle > 0.0 {
        (
            config.switchovers().iter().map(|s| s.r / ec).collect(),
            config.stations().iter().map(|s| s.credit / ec).collect(),
        )
    } else {
        (vec![0.0; n], vec![0.0; n])
    };
    let p_switching: f64 = p.iter().sum();
    let p_waiting: f64 = q_i.iter().sum();
    let q = if p_switching + p_waiting > 0.0 { p_switching / (p_switching + p_waiting) } else { 0.0 };

    let ez = config
        .stations()
        .iter()
        .zip(&loads.rho)
        .map(|(s, &rho_i)| rho_i * ec - s.lambda * s.credit * s.b / (1.0 - rho_i))
        .collect();

    WorkloadBreakdown { ev_mg1, ev_switching, ev_waiting, p, q_i, q, ec, ez }
}

/// Assembles the mean delay from the decomposition identities; must agree
/// with [`crate::analytic::wait_and_see_delay`] to high precision.
pub fn delay_via_workload_decomposition(config: &CheckedConfig) -> DelayReport {
    let loads = config.loads();
    let bd = workload_breakdown(config);

    let p_switching: f64 = bd.p.iter().sum();
    let p_waiting: f64 = bd.q_i.iter().sum();

    let switching_mix = if p_switching > 0.0 {
        bd.p.iter().zip(&bd.ev_switching).map(|(p, v)| p * v.value).sum::<f64>() / p_switching
    } else {
        0.0
    };
    let waiting_mix = if p_waiting > 0.0 {
        bd.q_i
            .iter()
            .zip(&bd.ev_waiting)
            .map(|(q, v)| q * v.unwrap_or(0.0))
            .sum::<f64>()
            / p_waiting
    } else {
        0.0
    };

    let residual: f64 =
        config.stations().iter().zip(&loads.rho).map(|(s, rho)| rho * s.b2 / (2.0 * s.b)).sum();

    let rho0 = loads.rho0;
    let degeneracy = if loads.r0 + loads.t0 <= 0.0 {
        Some(Degeneracy::NoIdle)
    } else if bd.ev_switching.iter().any(|v| v.degeneracy.is_some()) {
        Some(Degeneracy::NoSwitchover)
    } else {
        None
    };

    let mut report = DelayReport {
        per_station: None,
        weighted_mean: 0.0,
        terms: vec![
            Term { name: "mg1_workload", value: bd.ev_mg1 / rho0 },
            Term { name: "switching_workload", value: bd.q * switching_mix / rho0 },
            Term { name: "waiting_workload", value: (1.0 - bd.q) * waiting_mix / rho0 },
            Term { name: "residual_service", value: -residual / rho0 },
        ],
        degeneracy,
    };
    report.weighted_mean = report.terms.iter().map(|t| t.value).sum();
    if config.len() == 1 {
        report.per_station = Some(vec![report.weighted_mean]);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{exhaustive_delay, single_station_delay, wait_and_see_delay};
    use crate::model::{validate, PollingConfig, StationParams, SwitchoverMoments};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn checked(stations: Vec<StationParams>, switchovers: Vec<SwitchoverMoments>) -> CheckedConfig {
        validate(PollingConfig::new(stations, switchovers)).unwrap()
    }

    #[test]
    fn single_station_switching_workload() {
        let cfg = checked(
            vec![StationParams::new(1.0, 0.5, 0.5, 0.0)],
            vec![SwitchoverMoments::exponential(1.0)],
        );
        let w = workload_while_switching(&cfg, 0).unwrap();
        // Cross-station sums are empty; only the residual of the current
        // switchover remains: ρ₁ r₁⁽²⁾/(2r₁).
        assert_relative_eq!(w.value, 0.5 * 2.0 / 2.0, max_relative = 1e-12);
        assert!(w.degeneracy.is_none());
    }

    #[test]
    fn zero_switchover_is_flagged() {
        let cfg = checked(
            vec![
                StationParams::new(1.0, 0.2, 0.08, 0.5),
                StationParams::new(1.0, 0.2, 0.08, 0.5),
            ],
            vec![SwitchoverMoments::deterministic(0.0), SwitchoverMoments::deterministic(1.0)],
        );
        let w = workload_while_switching(&cfg, 0).unwrap();
        assert_eq!(w.degeneracy, Some(Degeneracy::NoSwitchover));
        assert!(workload_while_switching(&cfg, 1).unwrap().degeneracy.is_none());
        assert!(workload_while_switching(&cfg, 2).is_err());
    }

    #[test]
    fn symmetric_stations_see_equal_workloads() {
        let cfg = checked(
            vec![
                StationParams::new(1.0, 0.25, 0.125, 0.4),
                StationParams::new(1.0, 0.25, 0.125, 0.4),
            ],
            vec![SwitchoverMoments::deterministic(1.0), SwitchoverMoments::deterministic(1.0)],
        );
        let w0 = workload_while_switching(&cfg, 0).unwrap().value;
        let w1 = workload_while_switching(&cfg, 1).unwrap().value;
        assert_relative_eq!(w0, w1, max_relative = 1e-12);
        let v0 = workload_while_waiting(&cfg, 0).unwrap();
        let v1 = workload_while_waiting(&cfg, 1).unwrap();
        assert_relative_eq!(v0, v1, max_relative = 1e-12);
    }

    #[test]
    fn single_station_waiting_workload_vanishes() {
        let cfg = checked(
            vec![StationParams::new(1.0, 0.5, 0.5, 2.0)],
            vec![SwitchoverMoments::deterministic(1.0)],
        );
        let w = workload_while_waiting(&cfg, 0).unwrap();
        assert!(w.abs() <= 1e-15, "no other stations accumulate work, got {w}");
    }

    #[test]
    fn no_waiting_state_without_credit() {
        let cfg = checked(
            vec![StationParams::new(1.0, 0.5, 0.5, 0.0)],
            vec![SwitchoverMoments::deterministic(1.0)],
        );
        assert!(matches!(
            workload_while_waiting(&cfg, 0),
            Err(AnalyticError::NoWaitingState { station: 0 })
        ));
    }

    #[test]
    fn breakdown_state_probabilities_exhaust_the_cycle() {
        let cfg = checked(
            vec![
                StationParams::new(1.1, 0.3, 0.2, 0.7),
                StationParams::new(0.4, 0.5, 0.6, 0.0),
                StationParams::new(0.2, 0.8, 1.5, 1.3),
            ],
            vec![
                SwitchoverMoments::deterministic(0.5),
                SwitchoverMoments::exponential(1.2),
                SwitchoverMoments::new(0.8, 1.0),
            ],
        );
        let bd = workload_breakdown(&cfg);
        let loads = cfg.loads();
        let total: f64 = bd.p.iter().sum::<f64>() + bd.q_i.iter().sum::<f64>() + loads.rho0;
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        let p_sw: f64 = bd.p.iter().sum();
        let p_wait: f64 = bd.q_i.iter().sum();
        assert_relative_eq!(bd.q, p_sw / (p_sw + p_wait), max_relative = 1e-12);
        for (i, ez) in bd.ez.iter().enumerate() {
            assert!(*ez >= 0.0, "first busy period mean must be nonnegative at {i}");
        }
        for (i, (p, sw)) in bd.p.iter().zip(cfg.switchovers()).enumerate() {
            assert_relative_eq!(*p, sw.r / bd.ec, max_relative = 1e-12, epsilon = 1e-15);
            let _ = i;
        }
    }

    #[test]
    fn zero_credit_assembly_matches_exhaustive() {
        let cfg = checked(
            vec![
                StationParams::new(1.0, 0.25, 0.125, 0.0),
                StationParams::new(1.0, 0.25, 0.125, 0.0),
            ],
            vec![SwitchoverMoments::deterministic(1.0), SwitchoverMoments::deterministic(1.0)],
        );
        let decomposed = delay_via_workload_decomposition(&cfg);
        let direct = exhaustive_delay(&cfg);
        assert_relative_eq!(
            decomposed.weighted_mean,
            direct.weighted_mean,
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_station_with_credit_matches_vacation_formula() {
        let cfg = checked(
            vec![StationParams::new(1.0, 0.5, 0.5, 0.8)],
            vec![SwitchoverMoments::exponential(1.0)],
        );
        let decomposed = delay_via_workload_decomposition(&cfg);
        let vacation = single_station_delay(&cfg).unwrap();
        assert_relative_eq!(
            decomposed.weighted_mean,
            vacation.weighted_mean,
            max_relative = 1e-10
        );
    }

    fn station_strategy() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (0.05f64..1.0, 0.05f64..2.0, 0.0f64..4.0, prop_oneof![Just(0.0), 0.0f64..5.0])
    }

    prop_compose! {
        fn config_strategy(max_n: usize)
            (n in 1..=max_n)
            (stations in proptest::collection::vec(station_strategy(), n..=n),
             switch in proptest::collection::vec((0.01f64..3.0, 0.0f64..4.0), n..=n),
             rho0 in 0.05f64..0.9)
            -> PollingConfig
        {
            let share_sum: f64 = stations.iter().map(|s| s.0).sum();
            let st = stations
                .iter()
                .map(|&(share, b, scv, credit)| {
                    let rho_i = rho0 * share / share_sum;
                    StationParams::new(rho_i / b, b, b * b * (1.0 + scv), credit)
                })
                .collect();
            let sw = switch
                .iter()
                .map(|&(r, scv)| SwitchoverMoments::new(r, r * r * (1.0 + scv)))
                .collect();
            PollingConfig::new(st, sw)
        }
    }

    proptest! {
        // The decomposition identities re-derive the closed form; numeric
        // agreement validates both transcriptions.
        #[test]
        fn decomposition_agrees_with_closed_form(cfg in config_strategy(6)) {
            let checked = validate(cfg).unwrap();
            let a = delay_via_workload_decomposition(&checked).weighted_mean;
            let b = wait_and_see_delay(&checked).weighted_mean;
            prop_assert!(
                (a - b).abs() <= 1e-10 * b.max(1.0),
                "decomposition {a} vs closed form {b}"
            );
        }
    }
}
