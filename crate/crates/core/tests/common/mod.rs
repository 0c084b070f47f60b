//! Shared generators for the integration suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use waitsee::{validate, CheckedConfig, PollingConfig, StationParams, SwitchoverMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchKind {
    Deterministic,
    Exponential,
    Hyper,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreditMode {
    Zero,
    Positive,
    Mixed,
}

/// A random stable configuration with the requested shape.
pub fn random_config(
    rng: &mut ChaCha8Rng,
    n: usize,
    rho0: f64,
    switch: SwitchKind,
    credits: CreditMode,
) -> CheckedConfig {
    let shares: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let share_sum: f64 = shares.iter().sum();
    let stations: Vec<StationParams> = shares
        .iter()
        .map(|share| {
            let rho = rho0 * share / share_sum;
            let b = rng.random_range(0.2..0.6);
            let scv = rng.random_range(0.0..2.0);
            let credit = match credits {
                CreditMode::Zero => 0.0,
                CreditMode::Positive => rng.random_range(0.2..0.8),
                CreditMode::Mixed => {
                    if rng.random::<bool>() {
                        0.0
                    } else {
                        rng.random_range(0.2..0.8)
                    }
                }
            };
            StationParams::new(rho / b, b, b * b * (1.0 + scv), credit)
        })
        .collect();
    let switchovers: Vec<SwitchoverMoments> = (0..n)
        .map(|_| {
            let r = rng.random_range(0.3..0.8);
            let kind = match switch {
                SwitchKind::Mixed => match rng.random_range(0..3u8) {
                    0 => SwitchKind::Deterministic,
                    1 => SwitchKind::Exponential,
                    _ => SwitchKind::Hyper,
                },
                other => other,
            };
            match kind {
                SwitchKind::Deterministic => SwitchoverMoments::deterministic(r),
                SwitchKind::Exponential => SwitchoverMoments::exponential(r),
                SwitchKind::Hyper => {
                    SwitchoverMoments::new(r, r * r * (1.0 + rng.random_range(1.5..4.0)))
                }
                SwitchKind::Mixed => unreachable!(),
            }
        })
        .collect();
    validate(PollingConfig::new(stations, switchovers)).expect("generated config is valid")
}

/// Same configuration with every credit replaced.
pub fn with_credits(config: &CheckedConfig, credits: &[f64]) -> CheckedConfig {
    let mut raw = config.config().clone();
    for (station, &credit) in raw.stations.iter_mut().zip(credits) {
        station.credit = credit;
    }
    validate(raw).expect("credits keep the config valid")
}

pub fn rel_err(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected.abs().max(1e-12)
}
