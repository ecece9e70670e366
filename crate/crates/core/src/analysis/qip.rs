//! Finite-dimensional statistics of the rescaled jump chain.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{correlation, ks_normal};
use crate::corrector::SigmaMatrix;
use crate::env::Environment;
use crate::error::{param, Error, Result};
use crate::rng::{self, domain};
use crate::walk::{ScaledPath, Walker};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QipStats {
    pub n: usize,
    pub times: Vec<f64>,
    /// `samples[i][k]` is `B^(n)(times[i])` of trajectory `k`.
    pub samples: Vec<Vec<Vec<f64>>>,
    /// Empirical covariance of `B(t_i) / sqrt(t_i)`, row-major `d x d`.
    pub covariance: Vec<Vec<f64>>,
    /// `(D, p)` per time and component against `N(0, t Sigma_ii)`.
    pub ks: Vec<Vec<(f64, f64)>>,
    pub sigma: Vec<f64>,
}

impl QipStats {
    pub fn d(&self) -> usize {
        (self.sigma.len() as f64).sqrt() as usize
    }

    /// `max |cov_ij - Sigma_ij| / Sigma_ii` over the diagonal at time `i`.
    pub fn diagonal_relative_error(&self, i: usize) -> f64 {
        let d = self.d();
        (0..d)
            .map(|a| (self.covariance[i][a * d + a] / self.sigma[a * d + a] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest off-diagonal entry of the normalized covariance at time `i`.
    pub fn max_off_diagonal(&self, i: usize) -> f64 {
        let d = self.d();
        let mut m = 0.0f64;
        for a in 0..d {
            for b in 0..d {
                if a != b {
                    m = m.max(self.covariance[i][a * d + b].abs());
                }
            }
        }
        m
    }

    /// Per-component correlation of `B(t_j) - B(t_i)` with `B(t_i)`.
    pub fn increment_correlation(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.d())
            .map(|a| {
                let early: Vec<f64> = self.samples[i].iter().map(|s| s[a]).collect();
                let inc: Vec<f64> = self.samples[j]
                    .iter()
                    .zip(&self.samples[i])
                    .map(|(l, e)| l[a] - e[a])
                    .collect();
                correlation(&early, &inc)
            })
            .collect()
    }

    pub fn min_ks_pvalue(&self) -> f64 {
        self.ks
            .iter()
            .flatten()
            .map(|k| k.1)
            .fold(1.0, f64::min)
    }
}

fn covariance(rows: &[Vec<f64>], d: usize) -> Vec<f64> {
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / n).collect();
    let mut c = vec![0.0; d * d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                c[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= n - 1.0);
    c
}

/// Samples `B^(n)(t)` for `trajectories` walks from the origin and compares
/// them with the centred normal law of covariance `t Sigma`.
pub fn qip_stats(
    env: &Environment,
    n: usize,
    trajectories: usize,
    times: &[f64],
    sigma: &SigmaMatrix,
    seed: u64,
) -> Result<QipStats> {
    let d = env.geometry().dim();
    if trajectories < 100 {
        return Err(Error::InsufficientSample(format!(
            "{trajectories} trajectories, need at least 100"
        )));
    }
    if n == 0 || times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(param("scale and times must be positive"));
    }
    if sigma.d != d {
        return Err(Error::DimensionMismatch { expected: d, got: sigma.d });
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let steps = (t_max * n as f64).ceil() as usize + 1;
    let walker = Walker::new(env);
    let origin = env.geometry().origin();
    let per_traj: Vec<Vec<Vec<f64>>> = (0..trajectories as u64)
        .into_par_iter()
        .map(|id| {
            let mut r = rng::stream(seed, domain::WALK, id);
            let path = ScaledPath::from_points(walker.lifted_path(origin, steps, &mut r), d, n)?;
            times.iter().map(|&t| path.eval(t)).collect()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<Vec<Vec<f64>>> = (0..times.len())
        .map(|i| per_traj.iter().map(|p| p[i].clone()).collect())
        .collect();
    let mut cov = Vec::new();
    let mut ks = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let mut c = covariance(&samples[i], d);
        c.iter_mut().for_each(|v| *v /= t);
        cov.push(c);
        let per: Result<Vec<_>> = (0..d)
            .map(|a| {
                let xs: Vec<f64> = samples[i].iter().map(|s| s[a]).collect();
                ks_normal(&xs, 0.0, t * sigma.get(a, a))
            })
            .collect();
        ks.push(per?);
    }
    Ok(QipStats {
        n,
        times: times.to_vec(),
        samples,
        covariance: cov,
        ks,
        sigma: sigma.entries.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::{covariance_sigma, solve_corrector, SolverOptions};
    use crate::env::constant;
    use crate::lattice::Geometry;

    fn all_ones_stats(trajectories: usize) -> QipStats {
        let g = Geometry::new(2, 16).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let chi = solve_corrector(&env, &SolverOptions::default()).unwrap();
        let sigma = covariance_sigma(&env, &chi).unwrap();
        qip_stats(&env, 400, trajectories, &[0.5, 1.0], &sigma, 3).unwrap()
    }

    #[test]
    fn all_ones_targets_half() {
        let s = all_ones_stats(2000);
        for (a, b) in s.sigma.iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-9);
        }
        // sampling error of a variance with 2000 draws is about 3%
        assert!(s.diagonal_relative_error(1) < 0.1);
        assert!(s.max_off_diagonal(1) < 0.05);
        assert!(s.min_ks_pvalue() > 0.01);
    }

    #[test]
    fn increments_uncorrelated() {
        let s = all_ones_stats(2000);
        let sd = 1.0 / (2000f64).sqrt();
        for c in s.increment_correlation(0, 1) {
            assert!(c.abs() <= 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn needs_enough_trajectories() {
        let g = Geometry::new(2, 8).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let chi = solve_corrector(&env, &SolverOptions::default()).unwrap();
        let sigma = covariance_sigma(&env, &chi).unwrap();
        assert!(qip_stats(&env, 10, 99, &[1.0], &sigma, 0).is_err());
        assert!(qip_stats(&env, 10, 100, &[0.0], &sigma, 0).is_err());
    }
}
