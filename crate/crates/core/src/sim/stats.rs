//! Batch-means point estimates and 99% confidence intervals.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// A point estimate with its 99% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width
    }
}

/// Two-sided 99% Student-t multiplier for `batches` batch means.
fn t_multiplier(batches: usize) -> f64 {
    if batches < 2 {
        return f64::INFINITY;
    }
    let df = (batches - 1) as f64;
    StudentsT::new(0.0, 1.0, df)
        .expect("valid degrees of freedom")
        .inverse_cdf(0.995)
}

/// Batch-means estimate: the batch means are treated as approximately
/// independent observations of the steady-state mean.
pub fn from_batch_means(means: &[f64]) -> Estimate {
    let n = means.len();
    if n == 0 {
        return Estimate { mean: f64::NAN, half_width: f64::INFINITY };
    }
    let mean = means.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { mean, half_width: f64::INFINITY };
    }
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (n as f64 - 1.0);
    Estimate { mean, half_width: t_multiplier(n) * (var / n as f64).sqrt() }
}

/// Per-station, per-batch tallies of recorded delays.
#[derive(Debug, Clone)]
pub struct DelayTally {
    stations: usize,
    batches: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
}

impl DelayTally {
    pub fn new(stations: usize, batches: usize) -> Self {
        Self { stations, batches, sums: vec![0.0; stations * batches], counts: vec![0; stations * batches] }
    }

    pub fn record(&mut self, station: usize, batch: usize, delay: f64) {
        let idx = station * self.batches + batch;
        self.sums[idx] += delay;
        self.counts[idx] += 1;
    }

    fn batch_mean(&self, station: usize, batch: usize) -> Option<f64> {
        let idx = station * self.batches + batch;
        if self.counts[idx] == 0 {
            None
        } else {
            Some(self.sums[idx] / self.counts[idx] as f64)
        }
    }

    /// Per-station estimates over the batches that saw traffic.
    pub fn per_station(&self) -> Vec<Estimate> {
        (0..self.stations)
            .map(|s| {
                let means: Vec<f64> =
                    (0..self.batches).filter_map(|b| self.batch_mean(s, b)).collect();
                from_batch_means(&means)
            })
            .collect()
    }

    /// Intensity-weighted estimate using the analytic weights ρ_i/ρ₀; only
    /// batches where every station recorded at least one delay contribute.
    pub fn weighted(&self, weights: &[f64]) -> Estimate {
        let mut means = Vec::with_capacity(self.batches);
        'batches: for b in 0..self.batches {
            let mut weighted = 0.0;
            for (s, w) in weights.iter().enumerate().take(self.stations) {
                match self.batch_mean(s, b) {
                    Some(m) => weighted += w * m,
                    None => continue 'batches,
                }
            }
            means.push(weighted);
        }
        from_batch_means(&means)
    }
}
