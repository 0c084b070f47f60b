//! Shared fixtures for the benchmark targets.

use waitsee::{validate, CheckedConfig, PollingConfig, StationParams, SwitchoverMoments};

/// Symmetric two-station system with exponential switchovers; credits set
/// so every term of the delay formula is active.
pub fn two_station() -> CheckedConfig {
    validate(PollingConfig::new(
        vec![
            StationParams::new(0.2, 1.0, 2.0, 0.1489),
            StationParams::new(0.2, 1.0, 2.0, 0.1489),
        ],
        vec![SwitchoverMoments::exponential(1.0), SwitchoverMoments::exponential(1.0)],
    ))
    .unwrap()
}

/// A mildly asymmetric six-station system mixing switchover laws.
pub fn six_station() -> CheckedConfig {
    let stations = (0..6)
        .map(|i| {
            let rho = 0.05 + 0.02 * i as f64;
            let b = 0.2 + 0.05 * i as f64;
            StationParams::new(rho / b, b, b * b * 1.8, 0.1 * i as f64)
        })
        .collect();
    let switchovers = (0..6)
        .map(|i| {
            let r = 0.3 + 0.1 * i as f64;
            if i % 2 == 0 {
                SwitchoverMoments::deterministic(r)
            } else {
                SwitchoverMoments::exponential(r)
            }
        })
        .collect();
    validate(PollingConfig::new(stations, switchovers)).unwrap()
}
