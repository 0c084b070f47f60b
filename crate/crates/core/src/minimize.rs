//! Projected gradient descent with Armijo backtracking on the nonnegative
//! orthant, plus deterministic multistart.
//!
//! One minimizer serves both the credit optimization and the delay lower
//! bound. The objectives are smooth on the feasible set but not proven
//! convex, so multistart guards against local minima; the start set and the
//! random points are fixed by the options, making every run reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Tuning knobs for [`minimize`]. `seed` fixes the random multistart points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Options {
    /// Convergence threshold on the projected-gradient infinity norm.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Number of random starting points in addition to the fixed set.
    pub multistart: usize,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iters: 20_000, multistart: 8, seed: 0x7e11_caf3 }
    }
}

/// A function with first-order information on the nonnegative orthant.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// Central finite differences around a value-only function.
pub struct CentralDifference<F> {
    pub f: F,
    pub step: f64,
}

impl<F: Fn(&[f64]) -> f64> Objective for CentralDifference<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + self.step;
            let hi = (self.f)(&probe);
            probe[i] = x[i] - self.step;
            let lo = (self.f)(&probe);
            probe[i] = x[i];
            grad[i] = (hi - lo) / (2.0 * self.step);
        }
    }
}

/// Result of one multistart minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Projected-gradient infinity norm at `x`.
    pub kkt_residual: f64,
    pub converged: bool,
}

fn project(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

fn kkt_residual(x: &[f64], grad: &[f64]) -> f64 {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| (xi - (xi - gi).max(0.0)).abs())
        .fold(0.0, f64::max)
}

fn descend(obj: &impl Objective, start: &[f64], opts: &Options) -> Minimum {
    const ARMIJO_C: f64 = 1e-4;

    let n = start.len();
    let mut x = start.to_vec();
    project(&mut x);
    let mut value = obj.value(&x);
    let mut grad = vec![0.0; n];
    obj.gradient(&x, &mut grad);
    let mut residual = kkt_residual(&x, &grad);
    let mut converged = residual <= opts.tolerance;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;

    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;

        // Barzilai-Borwein step from the last accepted move.
        let mut step = match &previous {
            Some((prev_x, prev_grad)) => {
                let mut ss = 0.0;
                let mut sy = 0.0;
                for i in 0..n {
                    let s = x[i] - prev_x[i];
                    let y = grad[i] - prev_grad[i];
                    ss += s * s;
                    sy += s * y;
                }
                if sy > 0.0 && ss > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { 1.0 }
            }
            None => 1.0,
        };

        // The objective value cannot certify decreases below its own
        // rounding noise, but the gradient stays accurate there; near the
        // floor a strict drop of the projected-gradient norm accepts the
        // step instead.
        let noise = 1e-14 * (1.0 + value.abs());
        let mut accepted: Option<(Vec<f64>, f64, Option<Vec<f64>>)> = None;
        for _ in 0..80 {
            let mut candidate: Vec<f64> =
                x.iter().zip(&grad).map(|(&xi, &gi)| xi - step * gi).collect();
            project(&mut candidate);
            if candidate == x {
                break;
            }
            let displacement_dot_grad: f64 = x
                .iter()
                .zip(&candidate)
                .zip(&grad)
                .map(|((&xi, &ci), &gi)| (xi - ci) * gi)
                .sum();
            let candidate_value = obj.value(&candidate);
            if displacement_dot_grad > 0.0
                && value - candidate_value >= ARMIJO_C * displacement_dot_grad
            {
                accepted = Some((candidate, candidate_value, None));
                break;
            }
            if candidate_value <= value + noise {
                let mut candidate_grad = vec![0.0; n];
                obj.gradient(&candidate, &mut candidate_grad);
                if kkt_residual(&candidate, &candidate_grad) <= 0.9 * residual {
                    accepted = Some((candidate, candidate_value, Some(candidate_grad)));
                    break;
                }
            }
            step *= 0.5;
        }

        match accepted {
            Some((new_x, new_value, new_grad)) => {
                let old_x = std::mem::replace(&mut x, new_x);
                let old_grad = grad.clone();
                value = new_value;
                match new_grad {
                    Some(g) => grad = g,
                    None => obj.gradient(&x, &mut grad),
                }
                previous = Some((old_x, old_grad));
                residual = kkt_residual(&x, &grad);
                converged = residual <= opts.tolerance;
            }
            None => break,
        }
    }
    Minimum { x, value, kkt_residual: residual, converged }
}

fn lexicographically_smaller(a: &[f64], b: &[f64]) -> bool {
    for (ai, bi) in a.iter().zip(b) {
        if ai < bi {
            return true;
        }
        if ai > bi {
            return false;
        }
    }
    false
}

/// Minimizes `obj` over the nonnegative orthant in `n` variables.
///
/// Starts from 0, `scale·e_i`, `scale·1`, and `opts.multistart` seeded random
/// points in `[0, 5·scale]^n`; results merge by best objective value with a
/// lexicographic tie-break on `x` for determinism.
pub fn minimize(obj: &impl Objective, n: usize, scale: f64, opts: &Options) -> Minimum {
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n + 2 + opts.multistart);
    starts.push(vec![0.0; n]);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = scale;
        starts.push(e);
    }
    starts.push(vec![scale; n]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.multistart {
        starts.push((0..n).map(|_| rng.random_range(0.0..5.0 * scale)).collect());
    }

    let mut best: Option<Minimum> = None;
    for start in &starts {
        let candidate = descend(obj, start, opts);
        best = Some(match best {
            None => candidate,
            Some(current) => {
                let tie = 1e-12 * (1.0 + current.value.abs());
                if candidate.value < current.value - tie
                    || ((candidate.value - current.value).abs() <= tie
                        && lexicographically_smaller(&candidate.x, &current.x))
                {
                    candidate
                } else {
                    current
                }
            }
        });
    }
    best.expect("at least one start")
}
