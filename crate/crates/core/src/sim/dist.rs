//! Service and switchover laws for the simulator.
//!
//! The analytic side only ever sees two moments, so the simulator accepts
//! any law here whose moments match the configured ones. `fit_two_moment`
//! picks a standard law for a given (mean, second moment) pair:
//! deterministic at zero variance, gamma below exponential variability,
//! exponential at scv = 1, and a balanced-means two-phase hyperexponential
//! above it.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Erlang { k: u32, rate: f64 },
    Hyperexponential2 { p: f64, mu1: f64, mu2: f64 },
    Gamma { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("invalid moments: mean={mean}, second moment={m2}")]
    InvalidMoment { mean: f64, m2: f64 },
    #[error("invalid distribution parameters: {0}")]
    BadParameters(String),
}

impl DistributionSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Erlang { k, rate } => f64::from(k) / rate,
            Self::Hyperexponential2 { p, mu1, mu2 } => p / mu1 + (1.0 - p) / mu2,
            Self::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value * value,
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Erlang { k, rate } => f64::from(k) * f64::from(k + 1) / (rate * rate),
            Self::Hyperexponential2 { p, mu1, mu2 } => {
                2.0 * p / (mu1 * mu1) + 2.0 * (1.0 - p) / (mu2 * mu2)
            }
            Self::Gamma { shape, scale } => shape * (shape + 1.0) * scale * scale,
        }
    }

    fn check(&self) -> Result<(), DistError> {
        let ok = match *self {
            Self::Deterministic { value } => value >= 0.0 && value.is_finite(),
            Self::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Self::Erlang { k, rate } => k >= 1 && rate > 0.0 && rate.is_finite(),
            Self::Hyperexponential2 { p, mu1, mu2 } => {
                (0.0..=1.0).contains(&p) && mu1 > 0.0 && mu2 > 0.0
            }
            Self::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(DistError::BadParameters(format!("{self:?}")))
        }
    }
}

/// Picks a standard law with exactly the given first two moments.
pub fn fit_two_moment(mean: f64, m2: f64) -> Result<DistributionSpec, DistError> {
    if mean.is_nan() || mean <= 0.0 || !m2.is_finite() || m2 < mean * mean * (1.0 - 1e-12) {
        return Err(DistError::InvalidMoment { mean, m2 });
    }
    let scv = (m2 / (mean * mean) - 1.0).max(0.0);
    let spec = if scv <= 1e-12 {
        DistributionSpec::Deterministic { value: mean }
    } else if (scv - 1.0).abs() <= 1e-12 {
        DistributionSpec::Exponential { rate: 1.0 / mean }
    } else if scv < 1.0 {
        DistributionSpec::Gamma { shape: 1.0 / scv, scale: mean * scv }
    } else {
        // Balanced means: p/μ₁ = (1−p)/μ₂ = mean/2.
        let p = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
        DistributionSpec::Hyperexponential2 { p, mu1: 2.0 * p / mean, mu2: 2.0 * (1.0 - p) / mean }
    };
    debug_assert!((spec.mean() - mean).abs() <= 1e-9 * mean);
    debug_assert!((spec.second_moment() - m2).abs() <= 1e-9 * m2);
    Ok(spec)
}

/// A prepared sampler for one law.
#[derive(Debug, Clone)]
pub enum Sampler {
    Deterministic(f64),
    Exponential(Exp<f64>),
    Gamma(Gamma<f64>),
    Hyper { p: f64, first: Exp<f64>, second: Exp<f64> },
}

impl Sampler {
    pub fn from_spec(spec: &DistributionSpec) -> Result<Self, DistError> {
        spec.check()?;
        let sampler = match *spec {
            DistributionSpec::Deterministic { value } => Self::Deterministic(value),
            DistributionSpec::Exponential { rate } => {
                Self::Exponential(Exp::new(rate).map_err(|e| {
                    DistError::BadParameters(e.to_string())
                })?)
            }
            DistributionSpec::Erlang { k, rate } => Self::Gamma(
                Gamma::new(f64::from(k), 1.0 / rate)
                    .map_err(|e| DistError::BadParameters(e.to_string()))?,
            ),
            DistributionSpec::Hyperexponential2 { p, mu1, mu2 } => Self::Hyper {
                p,
                first: Exp::new(mu1).map_err(|e| DistError::BadParameters(e.to_string()))?,
                second: Exp::new(mu2).map_err(|e| DistError::BadParameters(e.to_string()))?,
            },
            DistributionSpec::Gamma { shape, scale } => Self::Gamma(
                Gamma::new(shape, scale)
                    .map_err(|e| DistError::BadParameters(e.to_string()))?,
            ),
        };
        Ok(sampler)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Deterministic(value) => *value,
            Self::Exponential(exp) => exp.sample(rng),
            Self::Gamma(gamma) => gamma.sample(rng),
            Self::Hyper { p, first, second } => {
                if rng.random::<f64>() < *p {
                    first.sample(rng)
                } else {
                    second.sample(rng)
                }
            }
        }
    }
}
