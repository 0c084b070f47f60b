//! System parameters for the cyclic polling model and the load quantities
//! derived from them.
//!
//! The analytic formulas consume only the first two moments of the service
//! and switchover laws plus the per-station credits, so moments (not full
//! distributions) are the canonical inputs here. The simulator binds full
//! distributions separately and checks them against these moments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for invariant checks on exact algebraic identities.
pub const REL_TOL: f64 = 1e-12;
/// Absolute floor for comparisons near zero.
pub const ABS_TOL: f64 = 1e-15;

/// `a` and `b` agree within [`REL_TOL`] relative (or [`ABS_TOL`] near zero).
pub fn nearly_equal(a: f64, b: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= ABS_TOL.max(REL_TOL * scale)
}

/// Per-station traffic parameters and wait-and-see credit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationParams {
    /// Poisson arrival rate (messages per unit time).
    pub lambda: f64,
    /// Mean service time.
    pub b: f64,
    /// Second moment of the service time.
    pub b2: f64,
    /// Wait-and-see credit: total idle budget per visit.
    #[serde(rename = "T", default)]
    pub credit: f64,
}

impl StationParams {
    pub fn new(lambda: f64, b: f64, b2: f64, credit: f64) -> Self {
        Self { lambda, b, b2, credit }
    }

    /// Offered load ρ = λ·b.
    pub fn rho(&self) -> f64 {
        self.lambda * self.b
    }
}

/// First two moments of one switchover time (station i to i+1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchoverMoments {
    /// Mean switchover time.
    pub r: f64,
    /// Second moment of the switchover time.
    pub r2: f64,
    /// Whether the law is deterministic (r2 = r²).
    pub deterministic: bool,
}

impl SwitchoverMoments {
    /// Builds from mean and second moment; the deterministic flag is derived.
    pub fn new(r: f64, r2: f64) -> Self {
        Self { r, r2, deterministic: nearly_equal(r2, r * r) }
    }

    /// A deterministic switchover of length `r`.
    pub fn deterministic(r: f64) -> Self {
        Self { r, r2: r * r, deterministic: true }
    }

    /// A switchover with an exponential law of mean `r`.
    pub fn exponential(r: f64) -> Self {
        Self::new(r, 2.0 * r * r)
    }

    pub fn variance(&self) -> f64 {
        self.r2 - self.r * self.r
    }
}

#[derive(Deserialize)]
struct SwitchoverDoc {
    r: f64,
    #[serde(default)]
    r2: Option<f64>,
    #[serde(default)]
    deterministic: Option<bool>,
}

impl<'de> Deserialize<'de> for SwitchoverMoments {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let doc = SwitchoverDoc::deserialize(deserializer)?;
        match (doc.r2, doc.deterministic) {
            (Some(r2), None) => Ok(SwitchoverMoments::new(doc.r, r2)),
            (None, Some(true)) => Ok(SwitchoverMoments::deterministic(doc.r)),
            (Some(r2), Some(flag)) => {
                let derived = nearly_equal(r2, doc.r * doc.r);
                if flag != derived {
                    return Err(serde::de::Error::custom(format!(
                        "switchover with r={} declares deterministic={flag} but r2={r2}",
                        doc.r
                    )));
                }
                Ok(SwitchoverMoments { r: doc.r, r2, deterministic: flag })
            }
            (None, _) => Err(serde::de::Error::custom(
                "switchover needs either \"r2\" or \"deterministic\": true",
            )),
        }
    }
}

/// Full parameterization of an N-station cyclic polling system.
///
/// Switchover entry `i` is the switch from station `i` to station `i+1`;
/// indexing is cyclic, so the entry after the last station leads back to
/// station 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PollingConfig {
    pub stations: Vec<StationParams>,
    pub switchovers: Vec<SwitchoverMoments>,
}

impl PollingConfig {
    pub fn new(stations: Vec<StationParams>, switchovers: Vec<SwitchoverMoments>) -> Self {
        Self { stations, switchovers }
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Parses the on-disk JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Load quantities derived from a [`PollingConfig`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedLoads {
    /// Per-station load ρ_i = λ_i·b_i.
    pub rho: Vec<f64>,
    /// Total load ρ₀ = Σρ_i.
    pub rho0: f64,
    /// Sum of mean switchover times.
    pub r0: f64,
    /// Second moment of the sum of all switchover times.
    pub r0_2: f64,
    /// Total wait-and-see credit per cycle.
    pub t0: f64,
    /// Stability verdict ρ₀ < 1.
    pub stable: bool,
}

/// Populates every derived quantity from its defining sum.
pub fn derive_loads(config: &PollingConfig) -> DerivedLoads {
    let rho: Vec<f64> = config.stations.iter().map(StationParams::rho).collect();
    let rho0: f64 = rho.iter().sum();
    let r0: f64 = config.switchovers.iter().map(|s| s.r).sum();
    // Second moment of a sum of independent terms: Σ r_i⁽²⁾ + Σ_{i≠j} r_i r_j.
    let mut r0_2: f64 = config.switchovers.iter().map(|s| s.r2).sum();
    for (i, si) in config.switchovers.iter().enumerate() {
        for (j, sj) in config.switchovers.iter().enumerate() {
            if i != j {
                r0_2 += si.r * sj.r;
            }
        }
    }
    let t0: f64 = config.stations.iter().map(|s| s.credit).sum();
    DerivedLoads { rho, rho0, r0, r0_2, t0, stable: rho0 < 1.0 }
}

/// Problems that make a [`PollingConfig`] unusable.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("system has no stations")]
    EmptySystem,
    #[error("stations ({stations}) and switchovers ({switchovers}) differ in length")]
    MismatchedLengths { stations: usize, switchovers: usize },
    #[error("{what} at index {index} must be {requirement}, got {value}")]
    NegativeParameter { what: &'static str, index: usize, requirement: &'static str, value: f64 },
    #[error("{what} at index {index}: second moment {m2} undercuts squared mean {mean_sq}")]
    InvalidMoment { what: &'static str, index: usize, m2: f64, mean_sq: f64 },
    #[error("system is unstable: total load {rho0} >= 1")]
    Unstable { rho0: f64 },
}

/// A configuration that passed [`validate`]; the only input the analytic,
/// optimization, and bound operations accept.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedConfig {
    config: PollingConfig,
    loads: DerivedLoads,
}

impl CheckedConfig {
    pub fn config(&self) -> &PollingConfig {
        &self.config
    }

    pub fn loads(&self) -> &DerivedLoads {
        &self.loads
    }

    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        self.config.is_empty()
    }

    pub fn stations(&self) -> &[StationParams] {
        &self.config.stations
    }

    pub fn switchovers(&self) -> &[SwitchoverMoments] {
        &self.config.switchovers
    }

    /// Unwraps back into the raw configuration.
    pub fn into_inner(self) -> PollingConfig {
        self.config
    }
}

fn require(cond: bool, err: ConfigError) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(err)
    }
}

/// Checks every type invariant plus stability and returns the config wrapped
/// as [`CheckedConfig`].
pub fn validate(config: PollingConfig) -> Result<CheckedConfig, ConfigError> {
    if config.stations.is_empty() {
        return Err(ConfigError::EmptySystem);
    }
    if config.stations.len() != config.switchovers.len() {
        return Err(ConfigError::MismatchedLengths {
            stations: config.stations.len(),
            switchovers: config.switchovers.len(),
        });
    }
    for (i, s) in config.stations.iter().enumerate() {
        require(
            s.lambda.is_finite() && s.lambda > 0.0,
            ConfigError::NegativeParameter {
                what: "arrival rate",
                index: i,
                requirement: "> 0",
                value: s.lambda,
            },
        )?;
        require(
            s.b.is_finite() && s.b > 0.0,
            ConfigError::NegativeParameter {
                what: "mean service time",
                index: i,
                requirement: "> 0",
                value: s.b,
            },
        )?;
        require(
            s.credit.is_finite() && s.credit >= 0.0,
            ConfigError::NegativeParameter {
                what: "credit",
                index: i,
                requirement: ">= 0",
                value: s.credit,
            },
        )?;
        // Jensen: a second moment never undercuts the squared mean. Allow
        // rounding slack since b2 = b² is the legitimate deterministic case.
        let mean_sq = s.b * s.b;
        require(
            s.b2.is_finite() && s.b2 >= mean_sq * (1.0 - REL_TOL),
            ConfigError::InvalidMoment { what: "service", index: i, m2: s.b2, mean_sq },
        )?;
    }
    for (i, s) in config.switchovers.iter().enumerate() {
        require(
            s.r.is_finite() && s.r >= 0.0,
            ConfigError::NegativeParameter {
                what: "switchover mean",
                index: i,
                requirement: ">= 0",
                value: s.r,
            },
        )?;
        let mean_sq = s.r * s.r;
        require(
            s.r2.is_finite() && s.r2 >= mean_sq * (1.0 - REL_TOL),
            ConfigError::InvalidMoment { what: "switchover", index: i, m2: s.r2, mean_sq },
        )?;
        // The flag and the moments must agree in both directions.
        require(
            s.deterministic == nearly_equal(s.r2, mean_sq),
            ConfigError::InvalidMoment { what: "switchover", index: i, m2: s.r2, mean_sq },
        )?;
    }
    let loads = derive_loads(&config);
    if !loads.stable {
        return Err(ConfigError::Unstable { rho0: loads.rho0 });
    }
    Ok(CheckedConfig { config, loads })
}
