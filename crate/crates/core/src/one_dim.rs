//! One-dimensional fire: trees at `0, 1, 2, ...`, the tree at `-1` burnt, and
//! tree `j` catching fire with probability `p` only if tree `j - 1` burns.
//!
//! `Y` counts burnt trees including the one at `-1`, so `Y >= 1` and
//! `P{Y >= n} = p^(n - 1)`: `Y` is geometric with success probability `1 - p`.

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{replica_rng, unit_f64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OneDError {
    #[error("p must lie in [0, 1], got {0}")]
    OutOfRange(f64),
    #[error("moments diverge for p = 1 (the whole line burns)")]
    DivergentMoments,
    #[error("simulation does not terminate for p = 1")]
    NonTerminating,
    #[error("replica count must be at least 1")]
    NoReplicas,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OneDParams {
    p: f64,
}

impl OneDParams {
    pub fn new(p: f64) -> Result<Self, OneDError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(OneDError::OutOfRange(p));
        }
        Ok(OneDParams { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `P{S(j) = 1} = p^(j + 1)`.
    pub fn marginal_burn(&self, j: u64) -> f64 {
        pow(self.p, j + 1)
    }

    /// `P{Y >= n} = p^(n - 1)` for `n >= 1`; `P{Y >= 0} = 1`.
    pub fn y_tail(&self, n: u64) -> f64 {
        if n == 0 {
            1.0
        } else {
            pow(self.p, n - 1)
        }
    }

    /// `(E[Y], V[Y]) = (1 / (1 - p), p / (1 - p)^2)`.
    pub fn y_moments(&self) -> Result<(f64, f64), OneDError> {
        if self.p >= 1.0 {
            return Err(OneDError::DivergentMoments);
        }
        let q = 1.0 - self.p;
        Ok((1.0 / q, self.p / (q * q)))
    }

    /// Fourth central moment of `Y`, `sigma^4 (9 + q^2 / p)` with `q = 1 - p`
    /// (zero when `p = 0`). Sets the standard error of the sample variance.
    pub fn y_fourth_central_moment(&self) -> Result<f64, OneDError> {
        let (_, var) = self.y_moments()?;
        if self.p == 0.0 {
            return Ok(0.0);
        }
        let q = 1.0 - self.p;
        Ok(var * var * (9.0 + q * q / self.p))
    }
}

fn pow(x: f64, e: u64) -> f64 {
    match i32::try_from(e) {
        Ok(e) => x.powi(e),
        Err(_) => x.powf(e as f64),
    }
}

/// Statuses `S(0), ..., S(len - 1)` of one path, drawing one uniform per tree.
pub fn simulate_path(params: &OneDParams, seed: u64, replica_id: u64, len: usize) -> Vec<bool> {
    let mut rng = replica_rng(seed, replica_id);
    let mut prev = true;
    (0..len)
        .map(|_| {
            let u = unit_f64(rng.next_u64());
            prev = prev && u < params.p;
            prev
        })
        .collect()
}

/// `Y` for one replica: walk forward while the uniforms stay below `p`.
/// Reads the same uniforms as [`simulate_path`] up to the first unburnt tree.
pub fn sample_y(params: &OneDParams, seed: u64, replica_id: u64) -> Result<u64, OneDError> {
    if params.p >= 1.0 {
        return Err(OneDError::NonTerminating);
    }
    let mut rng = replica_rng(seed, replica_id);
    let mut y = 1;
    while unit_f64(rng.next_u64()) < params.p {
        y += 1;
    }
    Ok(y)
}

/// Sampled values of `Y`, one per replica, in replica order.
#[derive(Debug, Clone, PartialEq)]
pub struct OneDSample {
    pub samples: Vec<u64>,
}

impl OneDSample {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&y| y as f64).sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|&y| (y as f64 - m).powi(2)).sum::<f64>() / (self.len() - 1) as f64
    }

    /// Empirical `P{Y >= n}`.
    pub fn tail_frequency(&self, n: u64) -> f64 {
        self.samples.iter().filter(|&&y| y >= n).count() as f64 / self.len() as f64
    }
}

pub fn simulate_1d(params: &OneDParams, replicas: u64, seed: u64) -> Result<OneDSample, OneDError> {
    if replicas == 0 {
        return Err(OneDError::NoReplicas);
    }
    if params.p >= 1.0 {
        return Err(OneDError::NonTerminating);
    }
    let samples = (0..replicas)
        .into_par_iter()
        .map(|r| sample_y(params, seed, r))
        .collect::<Result<_, _>>()?;
    Ok(OneDSample { samples })
}

/// Analytic and empirical summary with z-scores, as emitted by `oned`.
#[derive(Debug, Clone, Serialize)]
pub struct OneDReport {
    pub p: f64,
    pub replicas: u64,
    pub seed: u64,
    pub analytic: MomentsAndTails,
    pub empirical: MomentsAndTails,
    pub z_scores: MomentsAndTails,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentsAndTails {
    pub mean: f64,
    pub var: f64,
    /// Entry `i` refers to `P{Y >= i + 1}`.
    pub tails: Vec<f64>,
}

/// Compares a sample against the closed forms for `P{Y >= n}`, `n = 1..=max_tail`.
///
/// Standard errors: `sqrt(V / N)` for the mean, `sqrt((mu4 - V^2) / N)` for the
/// variance, binomial `sqrt(t (1 - t) / N)` for each tail. A z-score is 0 when
/// its standard error vanishes and the estimate is exact.
pub fn compare(params: &OneDParams, sample: &OneDSample, seed: u64, max_tail: u64) -> Result<OneDReport, OneDError> {
    let (mean, var) = params.y_moments()?;
    let mu4 = params.y_fourth_central_moment()?;
    let n = sample.len() as f64;
    let z = |est: f64, exact: f64, se: f64| {
        if se > 0.0 {
            (est - exact) / se
        } else if est == exact {
            0.0
        } else {
            f64::INFINITY.copysign(est - exact)
        }
    };
    let tails: Vec<f64> = (1..=max_tail).map(|k| params.y_tail(k)).collect();
    let emp_tails: Vec<f64> = (1..=max_tail).map(|k| sample.tail_frequency(k)).collect();
    let tail_z = tails
        .iter()
        .zip(&emp_tails)
        .map(|(&t, &e)| z(e, t, (t * (1.0 - t) / n).sqrt()))
        .collect();
    let (emp_mean, emp_var) = (sample.mean(), sample.variance());
    Ok(OneDReport {
        p: params.p,
        replicas: sample.len() as u64,
        seed,
        z_scores: MomentsAndTails {
            mean: z(emp_mean, mean, (var / n).sqrt()),
            var: z(emp_var, var, ((mu4 - var * var).max(0.0) / n).sqrt()),
            tails: tail_z,
        },
        analytic: MomentsAndTails { mean, var, tails },
        empirical: MomentsAndTails {
            mean: emp_mean,
            var: emp_var,
            tails: emp_tails,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let half = OneDParams::new(0.5).unwrap();
        assert_eq!(half.marginal_burn(0), 0.5);
        assert_eq!(half.marginal_burn(1), 0.25);
        assert_eq!(OneDParams::new(1.0).unwrap().marginal_burn(1000), 1.0);
        assert_eq!(OneDParams::new(0.3).unwrap().y_tail(1), 1.0);
        assert!((OneDParams::new(0.9).unwrap().y_tail(2) - 0.9).abs() < 1e-15);
        assert_eq!(OneDParams::new(0.0).unwrap().y_tail(2), 0.0);
        assert_eq!(half.y_moments().unwrap(), (2.0, 2.0));
        assert_eq!(OneDParams::new(0.0).unwrap().y_moments().unwrap(), (1.0, 0.0));
        let (m, v) = OneDParams::new(0.9).unwrap().y_moments().unwrap();
        assert!((m - 10.0).abs() < 1e-12 && (v - 90.0).abs() < 1e-10);
    }

    #[test]
    fn edge_parameters() {
        assert_eq!(OneDParams::new(1.5), Err(OneDError::OutOfRange(1.5)));
        assert!(OneDParams::new(f64::NAN).is_err());
        let one = OneDParams::new(1.0).unwrap();
        assert_eq!(one.y_moments(), Err(OneDError::DivergentMoments));
        assert_eq!(simulate_1d(&one, 10, 0), Err(OneDError::NonTerminating));
        assert_eq!(
            simulate_1d(&OneDParams::new(0.5).unwrap(), 0, 0),
            Err(OneDError::NoReplicas)
        );
    }

    #[test]
    fn p_zero_only_boundary_burns() {
        let s = simulate_1d(&OneDParams::new(0.0).unwrap(), 1000, 17).unwrap();
        assert!(s.samples.iter().all(|&y| y == 1));
    }

    #[test]
    fn mean_recovered_from_tails() {
        for p in [0.0, 0.3, 0.5, 0.9, 0.99] {
            let params = OneDParams::new(p).unwrap();
            let mut sum = 0.0;
            let mut n = 1u64;
            loop {
                let mass = params.y_tail(n) - params.y_tail(n + 1);
                sum += n as f64 * mass;
                if params.y_tail(n + 1) < 1e-18 {
                    break;
                }
                n += 1;
            }
            assert!((sum - params.y_moments().unwrap().0).abs() < 1e-10, "p = {p}");
        }
    }

    #[test]
    fn fourth_moment_matches_series() {
        for p in [0.1, 0.3, 0.5, 0.9] {
            let params = OneDParams::new(p).unwrap();
            let (mean, _) = params.y_moments().unwrap();
            let mut mu4 = 0.0;
            for n in 1..20_000u64 {
                let mass = params.y_tail(n) - params.y_tail(n + 1);
                mu4 += (n as f64 - mean).powi(4) * mass;
            }
            let closed = params.y_fourth_central_moment().unwrap();
            assert!((mu4 - closed).abs() < 1e-9 * closed, "p = {p}: {mu4} vs {closed}");
        }
    }

    #[test]
    fn walk_agrees_with_full_path() {
        let params = OneDParams::new(0.7).unwrap();
        for r in 0..200 {
            let path = simulate_path(&params, 5, r, 200);
            let burnt = path.iter().take_while(|&&b| b).count();
            // burnt trees form a prefix
            assert!(path[burnt..].iter().all(|&b| !b));
            assert_eq!(sample_y(&params, 5, r).unwrap(), 1 + burnt as u64);
        }
    }

    #[test]
    fn report_zero_variance_case() {
        let params = OneDParams::new(0.0).unwrap();
        let s = simulate_1d(&params, 100, 1).unwrap();
        let rep = compare(&params, &s, 1, 3).unwrap();
        assert_eq!(rep.z_scores.mean, 0.0);
        assert_eq!(rep.z_scores.var, 0.0);
        assert_eq!(rep.analytic.tails, vec![1.0, 0.0, 0.0]);
        assert_eq!(rep.z_scores.tails, vec![0.0, 0.0, 0.0]);
    }
}
