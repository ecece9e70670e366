//! Exit-time tail `P(tau_{B(x,R)} <= t) <= c t / R^2`.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{param, Result};
use crate::walk::exit_times;

/// Empirical distribution function of exit times on a grid `t = f R^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTailFit {
    pub radius: usize,
    pub fractions: Vec<f64>,
    pub cdf: Vec<f64>,
    /// `cdf * R^2 / t` at each grid point.
    pub ratios: Vec<f64>,
    /// Largest ratio: the fitted `c`.
    pub fitted: f64,
    pub mean: f64,
    pub std_error: f64,
}

/// Default grid of `t / R^2`.
pub const DEFAULT_FRACTIONS: [f64; 7] = [1.0 / 32.0, 1.0 / 16.0, 0.125, 0.25, 0.5, 1.0, 2.0];

pub fn exit_tail_fit(
    env: &Environment,
    x: usize,
    r: usize,
    trajectories: usize,
    fractions: &[f64],
    seed: u64,
) -> Result<ExitTailFit> {
    if trajectories < 2 || fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(param("need at least two trajectories and positive fractions"));
    }
    let mut taus = exit_times(env, x, r, trajectories, seed)?;
    let (mean, var) = super::stats::mean_var(&taus);
    taus.sort_by(f64::total_cmp);
    let r2 = (r * r) as f64;
    let n = taus.len() as f64;
    let cdf: Vec<f64> = fractions
        .iter()
        .map(|f| taus.partition_point(|&tau| tau <= f * r2) as f64 / n)
        .collect();
    let ratios: Vec<f64> = cdf.iter().zip(fractions).map(|(p, f)| p / f).collect();
    let fitted = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ExitTailFit {
        radius: r,
        fractions: fractions.to_vec(),
        cdf,
        ratios,
        fitted,
        mean,
        std_error: (var / n).sqrt(),
    })
}

/// `max c / min c` over several radii.
pub fn spread(fits: &[ExitTailFit]) -> f64 {
    let hi = fits.iter().map(|f| f.fitted).fold(0.0, f64::max);
    let lo = fits.iter().map(|f| f.fitted).fold(f64::INFINITY, f64::min);
    hi / lo
}
