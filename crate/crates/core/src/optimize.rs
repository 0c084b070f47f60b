//! Choosing the credits: worth-waiting conditions and optimal credits in
//! closed form for two stations, numerical constrained minimization for
//! general N.
//!
//! For two stations the delay is `c₁ + q(T₁,T₂)/(ρ₀(r₀+T₁+T₂))` with a
//! quadratic numerator, which makes the minimizers explicit in the symmetric
//! case and in the asymmetric case with deterministic switchovers. Every
//! other case goes through the projected-gradient minimizer on the same
//! rational-quadratic form generalized to N stations.

use serde::Serialize;
use thiserror::Error;

use crate::analytic::{coefficients_two_station, exhaustive_delay, wait_and_see_delay};
use crate::minimize::{minimize, Minimum, Objective, Options};
use crate::model::{CheckedConfig, PollingConfig};

/// Tolerance under which two station loads count as equal.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("operation requires exactly {expected} stations, config has {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("station loads differ by {delta}; not a symmetric system")]
    NotSymmetric { delta: f64 },
    #[error("station loads are equal; not an asymmetric system")]
    NotAsymmetric,
    #[error("switchover {index} is not deterministic")]
    NotDeterministic { index: usize },
    #[error("waiting does not pay here; the optimal credit is zero")]
    NotWorthWaiting,
}

/// Left- and right-hand side of a worth-waiting inequality, plus the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub satisfied: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// Which branch produced a two-station decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecisionRoute {
    SymmetricClosedForm,
    AsymmetricClosedForm,
    Numerical,
}

/// Verdicts, optimal credits, and optimal delay for a two-station system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStationDecision {
    pub symmetric: bool,
    pub worth_waiting: [bool; 2],
    pub t_opt: [f64; 2],
    pub delay_opt: f64,
    /// The decision inequality actually used; absent on the numerical route.
    pub condition: Option<ConditionCheck>,
    pub route: DecisionRoute,
    /// False only when the numerical route failed to converge.
    pub converged: bool,
}

fn expect_two(config: &CheckedConfig) -> Result<(), OptimizeError> {
    if config.len() != 2 {
        return Err(OptimizeError::WrongArity { expected: 2, got: config.len() });
    }
    Ok(())
}

fn symmetry_gap(config: &CheckedConfig) -> f64 {
    let rho = &config.loads().rho;
    (rho[0] - rho[1]).abs()
}

/// Worth-waiting condition for the symmetric two-station model:
/// `2ρ < 1 − r₀² / (r₀⁽²⁾ + r₀²·ρ/(1−2ρ))`.
///
/// The condition is scale-free in the switchover lengths and depends on the
/// two laws only through their sum. Loads at or above 1/2 cannot satisfy it
/// (the system would be unstable anyway); the verdict is false there.
pub fn symmetric_worth_waiting(config: &CheckedConfig) -> Result<ConditionCheck, OptimizeError> {
    expect_two(config)?;
    let delta = symmetry_gap(config);
    if delta > SYMMETRY_TOL {
        return Err(OptimizeError::NotSymmetric { delta });
    }
    let loads = config.loads();
    let rho = loads.rho[0];
    if rho >= 0.5 {
        return Ok(ConditionCheck { satisfied: false, lhs: 2.0 * rho, rhs: f64::NEG_INFINITY });
    }
    let r0 = loads.r0;
    let fraction = r0 * r0 / (loads.r0_2 + r0 * r0 * rho / (1.0 - 2.0 * rho));

    // Same fraction written through the variance of the switchover sum.
    let variance = loads.r0_2 - r0 * r0;
    let alt = r0 * r0 / (variance + r0 * r0 * (1.0 - rho) / (1.0 - 2.0 * rho));
    debug_assert!(
        (fraction - alt).abs() <= 1e-12 * fraction.abs().max(1.0),
        "the two condition forms must agree: {fraction} vs {alt}"
    );

    let rhs = 1.0 - fraction;
    Ok(ConditionCheck { satisfied: 2.0 * rho < rhs, lhs: 2.0 * rho, rhs })
}

/// Optimal common credit for the symmetric two-station model when waiting
/// pays; both stations get the same credit.
pub fn symmetric_optimal_credit(config: &CheckedConfig) -> Result<f64, OptimizeError> {
    let condition = symmetric_worth_waiting(config)?;
    if !condition.satisfied {
        return Err(OptimizeError::NotWorthWaiting);
    }
    let loads = config.loads();
    let rho = loads.rho[0];
    let r0 = loads.r0;
    let a = loads.r0_2 + r0 * r0 * rho / (1.0 - 2.0 * rho);
    let inner = 4.0 * r0 * r0 * rho - 3.0 * r0 * r0
        + a * (4.0 - 12.0 * rho + 8.0 * rho * rho);
    Ok(-0.5 * r0 + 0.5 * inner.sqrt())
}

fn deterministic_check(config: &CheckedConfig) -> Result<(), OptimizeError> {
    for (index, sw) in config.switchovers().iter().enumerate() {
        if !sw.deterministic {
            return Err(OptimizeError::NotDeterministic { index });
        }
    }
    Ok(())
}

/// Worth-waiting condition at the busier station of an asymmetric
/// two-station model with deterministic switchovers (stations ordered so
/// that station 0 carries the larger load):
/// `ρ₁ − ρ₁² + ρ₂² − ρ₂ − 2ρ₁ρ₂ > 0`.
///
/// The verdict does not depend on the switchover times at all; waiting at
/// the quieter station never pays.
pub fn asymmetric_worth_waiting(config: &CheckedConfig) -> Result<ConditionCheck, OptimizeError> {
    expect_two(config)?;
    deterministic_check(config)?;
    let rho = &config.loads().rho;
    if rho[0] - rho[1] <= SYMMETRY_TOL {
        return Err(OptimizeError::NotAsymmetric);
    }
    let (rho1, rho2) = (rho[0], rho[1]);
    let lhs = rho1 - rho1 * rho1 + rho2 * rho2 - rho2 - 2.0 * rho1 * rho2;
    Ok(ConditionCheck { satisfied: lhs > 0.0, lhs, rhs: 0.0 })
}

/// Optimal credits `(T₁*, 0)` for the asymmetric deterministic case:
/// `T₁* = −r₀ + √(r₀² + (c₂ − c₃r₀)/c₆)`.
pub fn asymmetric_optimal_credit(config: &CheckedConfig) -> Result<(f64, f64), OptimizeError> {
    let condition = asymmetric_worth_waiting(config)?;
    if !condition.satisfied {
        return Err(OptimizeError::NotWorthWaiting);
    }
    let cs = coefficients_two_station(config).expect("arity already checked");
    let r0 = config.loads().r0;
    let t1 = -r0 + (r0 * r0 + (cs.c2 - cs.c3 * r0) / cs.c6).sqrt();
    Ok((t1, 0.0))
}

/// Signed residual of the linear relation every interior two-station
/// minimizer satisfies: `(c₅−2c₆)T₁ − (c₃−c₄) − (c₅−2c₇)T₂`.
pub fn stationarity_residual(
    config: &CheckedConfig,
    t1: f64,
    t2: f64,
) -> Result<f64, OptimizeError> {
    expect_two(config)?;
    let cs = coefficients_two_station(config).expect("arity already checked");
    Ok((cs.c5 - 2.0 * cs.c6) * t1 - (cs.c3 - cs.c4) - (cs.c5 - 2.0 * cs.c7) * t2)
}

fn delay_at(config: &CheckedConfig, credits: &[f64]) -> f64 {
    let mut raw: PollingConfig = config.config().clone();
    for (station, &t) in raw.stations.iter_mut().zip(credits) {
        station.credit = t;
    }
    let checked = crate::model::validate(raw).expect("credits do not affect validity");
    wait_and_see_delay(&checked).weighted_mean
}

/// Full two-station decision: closed forms where they exist, the numerical
/// minimizer otherwise.
pub fn optimal_credits_two_station(
    config: &CheckedConfig,
) -> Result<TwoStationDecision, OptimizeError> {
    expect_two(config)?;
    let loads = config.loads();
    let symmetric = symmetry_gap(config) <= SYMMETRY_TOL;
    let exhaustive = exhaustive_delay(config).weighted_mean;

    let decision = if symmetric {
        let condition = symmetric_worth_waiting(config)?;
        if condition.satisfied {
            let t = symmetric_optimal_credit(config)?;
            TwoStationDecision {
                symmetric,
                worth_waiting: [true, true],
                t_opt: [t, t],
                delay_opt: delay_at(config, &[t, t]),
                condition: Some(condition),
                route: DecisionRoute::SymmetricClosedForm,
                converged: true,
            }
        } else {
            TwoStationDecision {
                symmetric,
                worth_waiting: [false, false],
                t_opt: [0.0, 0.0],
                delay_opt: exhaustive,
                condition: Some(condition),
                route: DecisionRoute::SymmetricClosedForm,
                converged: true,
            }
        }
    } else if config.switchovers().iter().all(|sw| sw.deterministic) {
        // Relabel so the busier station sits first, then map back.
        let busy = if loads.rho[0] >= loads.rho[1] { 0 } else { 1 };
        let relabeled = if busy == 0 {
            config.clone()
        } else {
            let mut raw = config.config().clone();
            raw.stations.swap(0, 1);
            raw.switchovers.swap(0, 1);
            crate::model::validate(raw).expect("relabeling preserves validity")
        };
        let condition = asymmetric_worth_waiting(&relabeled)?;
        let mut t_opt = [0.0, 0.0];
        if condition.satisfied {
            let (t_busy, _) = asymmetric_optimal_credit(&relabeled)?;
            t_opt[busy] = t_busy;
        }
        TwoStationDecision {
            symmetric,
            worth_waiting: [t_opt[0] > 0.0, t_opt[1] > 0.0],
            t_opt,
            delay_opt: if condition.satisfied { delay_at(config, &t_opt) } else { exhaustive },
            condition: Some(condition),
            route: DecisionRoute::AsymmetricClosedForm,
            converged: true,
        }
    } else {
        let general = optimal_credits_general(config, &Options::default());
        let active = 1e-8 * (loads.r0 + 1.0);
        TwoStationDecision {
            symmetric,
            worth_waiting: [general.credits[0] > active, general.credits[1] > active],
            t_opt: [general.credits[0], general.credits[1]],
            delay_opt: general.delay,
            condition: None,
            route: DecisionRoute::Numerical,
            converged: general.converged,
        }
    };

    debug_assert!(
        decision.delay_opt <= exhaustive * (1.0 + 1e-9),
        "zero credits are always feasible"
    );
    debug_assert!(decision.worth_waiting[0] == (decision.t_opt[0] > 0.0));
    debug_assert!(decision.worth_waiting[1] == (decision.t_opt[1] > 0.0));
    Ok(decision)
}

/// The delay as `c + (TᵀAT + bᵀT + a) / (ρ₀(r₀+ΣT))`, the form the general-N
/// minimization works on. Credits enter the numerator quadratically and the
/// denominator linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalQuadratic {
    n: usize,
    constant: f64,
    a: f64,
    b: Vec<f64>,
    /// Symmetric N×N matrix, row-major.
    matrix: Vec<f64>,
    rho0: f64,
    r0: f64,
}

impl RationalQuadratic {
    /// Builds the form for a validated configuration (credits in the config
    /// are ignored; they are the variables).
    pub fn from_config(config: &CheckedConfig) -> Self {
        let loads = config.loads();
        let n = config.len();
        let rho0 = loads.rho0;
        let rho_sq: f64 = loads.rho.iter().map(|r| r * r).sum();
        // The affine-in-T₀ cross-load term folds into the quadratic via
        // (r₀+T₀)² / (r₀+T₀).
        let k = (rho0 * rho0 - rho_sq) / (2.0 * (1.0 - rho0));
        let r0 = loads.r0;

        let constant = {
            let sum: f64 = config.stations().iter().map(|s| s.lambda * s.b2).sum();
            sum / (2.0 * (1.0 - rho0))
        };
        let a = 0.5 * rho0 * loads.r0_2 + k * r0 * r0;
        let b: Vec<f64> =
            loads.rho.iter().map(|&rho_i| r0 * (rho0 - rho_i) + 2.0 * k * r0).collect();
        let mut matrix = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = if i == j {
                    (1.0 - 2.0 * loads.rho[i]) * (rho0 - loads.rho[i])
                        / (2.0 * (1.0 - loads.rho[i]))
                        + k
                } else {
                    (rho0 - loads.rho[i] - loads.rho[j]) / 2.0 + k
                };
            }
        }
        Self { n, constant, a, b, matrix, rho0, r0 }
    }

    fn numerator(&self, t: &[f64]) -> f64 {
        let mut value = self.a;
        for i in 0..self.n {
            value += self.b[i] * t[i];
            for j in 0..self.n {
                value += t[i] * self.matrix[i * self.n + j] * t[j];
            }
        }
        value
    }
}

impl Objective for RationalQuadratic {
    fn value(&self, t: &[f64]) -> f64 {
        let idle = self.r0 + t.iter().sum::<f64>();
        if idle <= 0.0 {
            return self.constant;
        }
        self.constant + self.numerator(t) / (self.rho0 * idle)
    }

    fn gradient(&self, t: &[f64], grad: &mut [f64]) {
        let idle = self.r0 + t.iter().sum::<f64>();
        let numerator = self.numerator(t);
        for (k, g) in grad.iter_mut().enumerate() {
            let row_elems = &self.matrix[k * self.n..(k + 1) * self.n];
            let mut row = self.b[k];
            for (entry, tj) in row_elems.iter().zip(t) {
                row += 2.0 * entry * tj;
            }
            *g = row / (self.rho0 * idle) - numerator / (self.rho0 * idle * idle);
        }
    }
}

/// Outcome of the general-N credit minimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralOptimum {
    pub credits: Vec<f64>,
    pub delay: f64,
    pub kkt_residual: f64,
    /// False means the best iterate is returned without meeting tolerance.
    pub converged: bool,
}

/// Minimizes the delay over nonnegative credits for any number of stations.
///
/// Deterministic given the options and the configuration.
pub fn optimal_credits_general(config: &CheckedConfig, opts: &Options) -> GeneralOptimum {
    let n = config.len();
    let loads = config.loads();
    if loads.r0 <= 0.0 {
        // Without switchovers every nonzero credit only adds delay; the
        // infimum sits at zero credits.
        let delay = wait_and_see_delay(config).weighted_mean;
        return GeneralOptimum {
            credits: vec![0.0; n],
            delay,
            kkt_residual: 0.0,
            converged: true,
        };
    }
    let objective = RationalQuadratic::from_config(config);
    let Minimum { x, value, kkt_residual, converged } =
        minimize(&objective, n, loads.r0, opts);
    GeneralOptimum { credits: x, delay: value, kkt_residual, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, StationParams, SwitchoverMoments};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_station(
        rho1: f64,
        rho2: f64,
        sw: [SwitchoverMoments; 2],
        credits: [f64; 2],
    ) -> CheckedConfig {
        // Unit-mean exponential service keeps λ_i = ρ_i.
        validate(PollingConfig::new(
            vec![
                StationParams::new(rho1, 1.0, 2.0, credits[0]),
                StationParams::new(rho2, 1.0, 2.0, credits[1]),
            ],
            sw.to_vec(),
        ))
        .unwrap()
    }

    #[test]
    fn deterministic_symmetric_never_waits() {
        for rho in [0.05, 0.2, 0.4, 0.45] {
            let cfg = two_station(
                rho,
                rho,
                [SwitchoverMoments::deterministic(1.0), SwitchoverMoments::deterministic(2.0)],
                [0.0, 0.0],
            );
            let check = symmetric_worth_waiting(&cfg).unwrap();
            assert!(!check.satisfied, "deterministic switchovers at rho={rho}");
        }
    }

    #[test]
    fn exponential_switchover_example_is_worth_waiting() {
        let cfg = two_station(
            0.2,
            0.2,
            [SwitchoverMoments::exponential(1.0), SwitchoverMoments::exponential(1.0)],
            [0.0, 0.0],
        );
        let check = symmetric_worth_waiting(&cfg).unwrap();
        assert!(check.satisfied);
        assert_relative_eq!(check.lhs, 0.4, max_relative = 1e-12);
        assert_relative_eq!(check.rhs, 1.0 - 4.0 / (6.0 + 4.0 * 0.2 / 0.6), max_relative = 1e-12);

        let t = symmetric_optimal_credit(&cfg).unwrap();
        assert!((t - 0.1489).abs() < 1e-4, "optimal credit {t}");

        // Waiting strictly beats the exhaustive baseline here.
        let with_credit = delay_at(&cfg, &[t, t]);
        let without = exhaustive_delay(&cfg).weighted_mean;
        assert!(with_credit < without);
    }

    #[test]
    fn verdict_is_scale_free_but_credit_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rho = rng.random_range(0.02..0.45);
            let r1 = rng.random_range(0.1..3.0);
            let r2 = rng.random_range(0.1..3.0);
            let base = two_station(
                rho,
                rho,
                [SwitchoverMoments::exponential(r1), SwitchoverMoments::exponential(r2)],
                [0.0, 0.0],
            );
            let verdict = symmetric_worth_waiting(&base).unwrap().satisfied;
            for kappa in [0.1, 10.0] {
                let scaled = two_station(
                    rho,
                    rho,
                    [
                        SwitchoverMoments::exponential(kappa * r1),
                        SwitchoverMoments::exponential(kappa * r2),
                    ],
                    [0.0, 0.0],
                );
                assert_eq!(symmetric_worth_waiting(&scaled).unwrap().satisfied, verdict);
                if verdict {
                    let t_base = symmetric_optimal_credit(&base).unwrap();
                    let t_scaled = symmetric_optimal_credit(&scaled).unwrap();
                    assert_relative_eq!(t_scaled, kappa * t_base, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn crediting_the_exponential_example_beats_exhaustive() {
        // Unit arrival rates, mean service 0.2 with exponential spread,
        // exponential switchovers of mean one: a fixed near-optimal credit
        // at both stations strictly undercuts the exhaustive baseline.
        let with_credit = validate(PollingConfig::new(
            vec![
                StationParams::new(1.0, 0.2, 0.08, 0.1489),
                StationParams::new(1.0, 0.2, 0.08, 0.1489),
            ],
            vec![SwitchoverMoments::new(1.0, 2.0), SwitchoverMoments::new(1.0, 2.0)],
        ))
        .unwrap();
        let credited = wait_and_see_delay(&with_credit).weighted_mean;
        let baseline = exhaustive_delay(&with_credit).weighted_mean;
        assert!(credited < baseline, "{credited} vs {baseline}");
    }

    #[test]
    fn symmetric_credit_collapses_at_the_condition_boundary() {
        // Second moments chosen so the worth-waiting condition holds with
        // equality: r0_2 = r0²(1−ρ)/(1−2ρ). The square root in the credit
        // formula then equals r0 exactly and the credit is zero.
        let rho: f64 = 0.2;
        let r0: f64 = 2.0;
        let r0_2 = r0 * r0 * (1.0 - rho) / (1.0 - 2.0 * rho);
        let r_i2 = (r0_2 - 2.0) / 2.0; // per-edge second moment, means (1,1)
        let cfg = two_station(
            rho,
            rho,
            [SwitchoverMoments::new(1.0, r_i2), SwitchoverMoments::new(1.0, r_i2)],
            [0.0, 0.0],
        );
        let check = symmetric_worth_waiting(&cfg).unwrap();
        assert!((check.lhs - check.rhs).abs() <= 1e-12, "constructed boundary");
        // The formula itself collapses: the square root equals r0, so any
        // verdict at the boundary yields a vanishing credit.
        let a = r0_2 + r0 * r0 * rho / (1.0 - 2.0 * rho);
        let inner = 4.0 * r0 * r0 * rho - 3.0 * r0 * r0
            + a * (4.0 - 12.0 * rho + 8.0 * rho * rho);
        assert!((inner.sqrt() - r0).abs() <= 1e-12);
        if check.satisfied {
            assert!(symmetric_optimal_credit(&cfg).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn asymmetric_credit_collapses_at_the_condition_boundary() {
        // With ρ₂ = 0.1, ρ₁ solving ρ₁−ρ₁²+ρ₂²−ρ₂−2ρ₁ρ₂ = 0 puts c₂ = c₃r₀,
        // so the closed-form credit degenerates to zero.
        let rho2: f64 = 0.1;
        let rho1 = (0.8 + (0.64f64 - 4.0 * 0.09).sqrt()) / 2.0;
        let cfg = two_station(
            rho1,
            rho2,
            [SwitchoverMoments::deterministic(0.5), SwitchoverMoments::deterministic(0.5)],
            [0.0, 0.0],
        );
        let check = asymmetric_worth_waiting(&cfg).unwrap();
        assert!(check.lhs.abs() <= 1e-12, "constructed boundary, got {}", check.lhs);
        let cs = coefficients_two_station(&cfg).unwrap();
        let r0 = cfg.loads().r0;
        assert!((cs.c2 - cs.c3 * r0).abs() <= 1e-12);
        let t1 = -r0 + (r0 * r0 + (cs.c2 - cs.c3 * r0) / cs.c6).sqrt();
        assert!(t1.abs() <= 1e-9, "boundary credit {t1}");
    }

    #[test]
    fn asymmetric_condition_hand_values() {
        let det = [SwitchoverMoments::deterministic(0.5), SwitchoverMoments::deterministic(0.5)];
        let worth = two_station(0.4, 0.1, det, [0.0, 0.0]);
        let check = asymmetric_worth_waiting(&worth).unwrap();
        assert!(check.satisfied);
        assert_relative_eq!(check.lhs, 0.07, max_relative = 1e-10);

        let not_worth = two_station(0.3, 0.25, det, [0.0, 0.0]);
        let check = asymmetric_worth_waiting(&not_worth).unwrap();
        assert!(!check.satisfied);
        assert_relative_eq!(check.lhs, -0.1275, max_relative = 1e-10);
    }

    #[test]
    fn asymmetric_verdict_ignores_switchover_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let rho1: f64 = rng.random_range(0.1..0.6);
            let rho2 = rng.random_range(0.01..rho1.min(0.3) - 0.005);
            let mut verdicts = Vec::new();
            for (r1, r2) in [(0.5, 0.5), (3.0, 0.1), (0.01, 7.0)] {
                let cfg = two_station(
                    rho1,
                    rho2,
                    [SwitchoverMoments::deterministic(r1), SwitchoverMoments::deterministic(r2)],
                    [0.0, 0.0],
                );
                verdicts.push(asymmetric_worth_waiting(&cfg).unwrap().satisfied);
            }
            assert!(verdicts.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn asymmetric_credit_hand_value() {
        let cfg = two_station(
            0.4,
            0.1,
            [SwitchoverMoments::deterministic(0.5), SwitchoverMoments::deterministic(0.5)],
            [0.0, 0.0],
        );
        let (t1, t2) = asymmetric_optimal_credit(&cfg).unwrap();
        assert!((t1 - 0.3131).abs() < 1e-4, "got {t1}");
        assert_eq!(t2, 0.0);

        let improved = delay_at(&cfg, &[t1, 0.0]);
        let baseline = exhaustive_delay(&cfg).weighted_mean;
        assert!(improved < baseline);
    }

    #[test]
    fn stationarity_residual_behaviour() {
        let cfg = two_station(
            0.2,
            0.2,
            [SwitchoverMoments::exponential(1.0), SwitchoverMoments::exponential(1.0)],
            [0.0, 0.0],
        );
        // Equal credits in the symmetric model always satisfy the relation.
        assert!(stationarity_residual(&cfg, 0.7, 0.7).unwrap().abs() <= 1e-12);
        // The interior optimum satisfies it too.
        let t = symmetric_optimal_credit(&cfg).unwrap();
        assert!(stationarity_residual(&cfg, t, t).unwrap().abs() <= 1e-10);
        // A generic point does not.
        assert!(stationarity_residual(&cfg, 0.9, 0.1).unwrap().abs() > 1e-6);
    }

    #[test]
    fn dispatch_symmetric_deterministic() {
        let cfg = two_station(
            0.25,
            0.25,
            [SwitchoverMoments::deterministic(1.0), SwitchoverMoments::deterministic(1.0)],
            [0.0, 0.0],
        );
        let decision = optimal_credits_two_station(&cfg).unwrap();
        assert!(decision.symmetric);
        assert_eq!(decision.t_opt, [0.0, 0.0]);
        assert_eq!(decision.worth_waiting, [false, false]);
        assert_relative_eq!(
            decision.delay_opt,
            exhaustive_delay(&cfg).weighted_mean,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dispatch_relabels_asymmetric_configs() {
        // The quieter station listed first: result must map back.
        let cfg = two_station(
            0.1,
            0.4,
            [SwitchoverMoments::deterministic(0.5), SwitchoverMoments::deterministic(0.5)],
            [0.0, 0.0],
        );
        let decision = optimal_credits_two_station(&cfg).unwrap();
        assert_eq!(decision.t_opt[0], 0.0);
        assert!((decision.t_opt[1] - 0.3131).abs() < 1e-4);
        assert_eq!(decision.worth_waiting, [false, true]);
    }

    #[test]
    fn rational_form_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rho1: f64 = rng.random_range(0.05..0.5);
            let rho2 = rng.random_range(0.05..(0.95 - rho1).min(0.5));
            let cfg = two_station(
                rho1,
                rho2,
                [
                    SwitchoverMoments::exponential(rng.random_range(0.1..2.0)),
                    SwitchoverMoments::new(0.5, 0.3 + rng.random_range(0.0..1.0)),
                ],
                [0.0, 0.0],
            );
            let form = RationalQuadratic::from_config(&cfg);
            let t = [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
            let direct = delay_at(&cfg, &t);
            let via_form = form.value(&t);
            assert_relative_eq!(via_form, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let cfg = two_station(
            0.3,
            0.15,
            [SwitchoverMoments::exponential(0.8), SwitchoverMoments::deterministic(1.2)],
            [0.0, 0.0],
        );
        let form = RationalQuadratic::from_config(&cfg);
        let fd = crate::minimize::CentralDifference { f: |x: &[f64]| form.value(x), step: 1e-6 };
        let points = [[0.0, 0.0], [0.5, 0.1], [2.0, 3.0]];
        for point in points {
            let mut ga = [0.0; 2];
            let mut gf = [0.0; 2];
            form.gradient(&point, &mut ga);
            fd.gradient(&point, &mut gf);
            for (a, f) in ga.iter().zip(&gf) {
                assert!((a - f).abs() <= 1e-6, "at {point:?}: {ga:?} vs {gf:?}");
            }
        }
    }

    #[test]
    fn general_minimizer_reproduces_closed_forms() {
        let opts = Options::default();
        let sym = two_station(
            0.2,
            0.2,
            [SwitchoverMoments::exponential(1.0), SwitchoverMoments::exponential(1.0)],
            [0.0, 0.0],
        );
        let numerical = optimal_credits_general(&sym, &opts);
        let closed = symmetric_optimal_credit(&sym).unwrap();
        assert!(numerical.converged);
        assert!((numerical.credits[0] - closed).abs() < 1e-4);
        assert!((numerical.credits[1] - closed).abs() < 1e-4);

        let det = two_station(
            0.3,
            0.3,
            [SwitchoverMoments::deterministic(1.0), SwitchoverMoments::deterministic(1.0)],
            [0.0, 0.0],
        );
        let numerical = optimal_credits_general(&det, &opts);
        assert!(numerical.credits.iter().all(|&t| t.abs() <= 1e-6 * det.loads().r0));

        let asym = two_station(
            0.4,
            0.1,
            [SwitchoverMoments::deterministic(0.5), SwitchoverMoments::deterministic(0.5)],
            [0.0, 0.0],
        );
        let numerical = optimal_credits_general(&asym, &opts);
        let (t1, _) = asymmetric_optimal_credit(&asym).unwrap();
        assert!((numerical.credits[0] - t1).abs() < 1e-4, "{:?}", numerical.credits);
        assert!(numerical.credits[1].abs() < 1e-6);
        let closed_delay = delay_at(&asym, &[t1, 0.0]);
        assert_relative_eq!(numerical.delay, closed_delay, max_relative = 1e-8);
    }

    #[test]
    fn swapping_symmetric_stations_leaves_decision_unchanged() {
        let cfg = two_station(
            0.2,
            0.2,
            [SwitchoverMoments::exponential(0.5), SwitchoverMoments::exponential(1.5)],
            [0.0, 0.0],
        );
        let mut swapped_raw = cfg.config().clone();
        swapped_raw.stations.swap(0, 1);
        swapped_raw.switchovers.swap(0, 1);
        let swapped = validate(swapped_raw).unwrap();
        let a = optimal_credits_two_station(&cfg).unwrap();
        let b = optimal_credits_two_station(&swapped).unwrap();
        let mut ta = a.t_opt;
        let mut tb = b.t_opt;
        ta.sort_by(f64::total_cmp);
        tb.sort_by(f64::total_cmp);
        assert_eq!(ta, tb);
        assert_relative_eq!(a.delay_opt, b.delay_opt, max_relative = 1e-12);
    }

    #[test]
    fn mixed_case_goes_numerical_and_improves() {
        let cfg = two_station(
            0.45,
            0.05,
            [SwitchoverMoments::exponential(1.0), SwitchoverMoments::deterministic(0.5)],
            [0.0, 0.0],
        );
        let decision = optimal_credits_two_station(&cfg).unwrap();
        assert_eq!(decision.route, DecisionRoute::Numerical);
        assert!(decision.converged);
        assert!(decision.delay_opt <= exhaustive_delay(&cfg).weighted_mean + 1e-12);
        if decision.worth_waiting[0] && decision.worth_waiting[1] {
            let residual =
                stationarity_residual(&cfg, decision.t_opt[0], decision.t_opt[1]).unwrap();
            assert!(residual.abs() <= 1e-6, "interior optimum residual {residual}");
        }
    }
}
