//! Transition probabilities of `Y`, `Y^R` and `Y^{R,kappa}` by uniformization.
//!
//! With jump rates `q(x,y) = C(x,y) / w(x)` and `Lambda >= max_x q(x)`, the
//! kernel is `exp(tQ) = sum_k Poisson(Lambda t; k) P^k` for the stochastic
//! matrix `P = I + Q / Lambda`. Every term is nonnegative and the series is cut
//! once the Poisson tail falls below `1e-12`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::env::{Environment, LocalizedEnvironment};
use crate::error::{param, Result};
use crate::lattice::SiteSet;

/// Largest domain accepted by [`heat_kernel_exact`].
pub const MAX_DOMAIN: usize = 4000;

/// Poisson tail left out of the series.
pub const TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelVariant {
    Y,
    YR,
    YRKappa,
}

/// Conductances and reversible weights defining one of the walks.
#[derive(Debug, Clone)]
pub struct KernelEnv {
    variant: KernelVariant,
    conductances: Environment,
    weights: Vec<f64>,
}

impl KernelEnv {
    /// `Y`: conductances `C`, weights `nu`.
    pub fn y(env: &Environment) -> Self {
        Self {
            variant: KernelVariant::Y,
            conductances: env.clone(),
            weights: env.nu().to_vec(),
        }
    }

    /// `Y^R`: conductances `C^R`, weights `nu^R`.
    pub fn y_r(loc: &LocalizedEnvironment) -> Self {
        Self {
            variant: KernelVariant::YR,
            conductances: loc.conductances().clone(),
            weights: loc.nu().to_vec(),
        }
    }

    /// `Y^{R,kappa}`: `C^R` without bonds longer than `kappa R`, weights `nu^R`.
    pub fn y_r_kappa(loc: &LocalizedEnvironment, kappa: f64) -> Result<Self> {
        Ok(Self {
            variant: KernelVariant::YRKappa,
            conductances: loc.truncated(kappa)?,
            weights: loc.nu().to_vec(),
        })
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn conductances(&self) -> &Environment {
        &self.conductances
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Sparse generator restricted to a set of sites.
struct Restricted {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    /// Total jump rate out of each site, including jumps that leave the set.
    out: Vec<f64>,
    lambda: f64,
}

impl Restricted {
    /// `sites` in ascending order; `None` means the whole torus. Jumps leaving
    /// the set are suppressed unless `killed`, in which case they kill.
    fn new(kenv: &KernelEnv, sites: Option<&SiteSet>, killed: bool) -> Self {
        let env = &kenv.conductances;
        let n = sites.map_or(env.site_count(), |s| s.len());
        let site = |i: usize| sites.map_or(i, |s| s.as_slice()[i]);
        let local = |y: usize| match sites {
            Some(s) => s.position(y),
            None => Some(y),
        };
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let x = site(i);
            let w = kenv.weights[x];
            let (nbrs, cs) = env.row(x);
            for (&y, &c) in nbrs.iter().zip(cs) {
                let q = c / w;
                match local(y as usize) {
                    Some(j) => {
                        cols.push(j);
                        rates.push(q);
                        out[i] += q;
                    }
                    None if killed => out[i] += q,
                    None => {}
                }
            }
            offsets.push(cols.len());
        }
        let lambda = out.iter().cloned().fold(0.0, f64::max);
        Self {
            offsets,
            cols,
            rates,
            out,
            lambda,
        }
    }

    fn len(&self) -> usize {
        self.out.len()
    }

    /// `v <- P u` with `P = I + Q / Lambda`.
    fn apply_p(&self, u: &[f64], v: &mut [f64]) {
        let inv = 1.0 / self.lambda;
        for i in 0..self.len() {
            let mut s = u[i] * (1.0 - self.out[i] * inv);
            for k in self.offsets[i]..self.offsets[i + 1] {
                s += self.rates[k] * inv * u[self.cols[k]];
            }
            v[i] = s;
        }
    }

    /// `exp(tQ) e_j`, the column `p(t, ., j)`.
    fn column(&self, j: usize, weights: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut u = vec![0.0; n];
        u[j] = 1.0;
        if weights.len() == 1 {
            return u;
        }
        let mut acc = vec![0.0; n];
        let mut next = vec![0.0; n];
        for (k, &w) in weights.iter().enumerate() {
            if k > 0 {
                self.apply_p(&u, &mut next);
                std::mem::swap(&mut u, &mut next);
            }
            if w > 0.0 {
                acc.iter_mut().zip(&u).for_each(|(a, b)| *a += w * b);
            }
        }
        acc
    }
}

/// Poisson(`mean`) probabilities up to the first `k` whose right tail is below
/// [`TAIL`].
pub fn poisson_weights(mean: f64) -> Vec<f64> {
    if mean == 0.0 {
        return vec![1.0];
    }
    let mut w = Vec::new();
    let mut cum = 0.0;
    let mut k = 0usize;
    loop {
        let lp = -mean + k as f64 * mean.ln() - ln_gamma(k as f64 + 1.0);
        let p = lp.exp();
        w.push(p);
        cum += p;
        if k as f64 > mean && 1.0 - cum < TAIL {
            return w;
        }
        k += 1;
    }
}

/// Kernel restricted to a domain; `p[i * m + j] = p(t, sites[i], sites[j])`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatKernelTable {
    pub variant: KernelVariant,
    pub killed: bool,
    pub sites: Vec<usize>,
    pub t: f64,
    /// Reversible weights (`nu` or `nu^R`) on the domain.
    pub weights: Vec<f64>,
    pub p: Vec<f64>,
}

impl HeatKernelTable {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.len() + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.p.chunks(self.len()).map(|r| r.iter().sum()).collect()
    }

    /// `max |w(x) p(x,y) - w(y) p(y,x)|` relative to `max w`.
    pub fn detailed_balance_error(&self) -> f64 {
        let m = self.len();
        let scale = self.weights.iter().cloned().fold(0.0, f64::max);
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in i + 1..m {
                let a = self.weights[i] * self.get(i, j);
                let b = self.weights[j] * self.get(j, i);
                worst = worst.max((a - b).abs() / scale);
            }
        }
        worst
    }

    /// Dense product `self * other` on the same domain.
    pub fn compose(&self, other: &HeatKernelTable) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            for k in 0..m {
                let a = self.get(i, k);
                if a != 0.0 {
                    for j in 0..m {
                        row[j] += a * other.get(k, j);
                    }
                }
            }
        });
        out
    }
}

/// The kernel of `kenv` on `domain` at time `t`. Jumps leaving the domain are
/// suppressed (a walk reflected on the domain) unless `killed`.
pub fn heat_kernel_exact(kenv: &KernelEnv, domain: &SiteSet, t: f64, killed: bool) -> Result<HeatKernelTable> {
    if domain.is_empty() || domain.len() > MAX_DOMAIN {
        return Err(param(format!(
            "domain of {} sites outside 1..={MAX_DOMAIN}",
            domain.len()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(param(format!("time {t} must be nonnegative")));
    }
    let gen = Restricted::new(kenv, Some(domain), killed);
    let weights = poisson_weights(gen.lambda * t);
    let m = domain.len();
    let cols: Vec<Vec<f64>> = (0..m).into_par_iter().map(|j| gen.column(j, &weights)).collect();
    let mut p = vec![0.0; m * m];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..m {
            p[i * m + j] = col[i];
        }
    }
    Ok(HeatKernelTable {
        variant: kenv.variant,
        killed,
        sites: domain.as_slice().to_vec(),
        t,
        weights: domain.iter().map(|x| kenv.weights[x]).collect(),
        p,
    })
}

/// `p(t, x, y)` for every `x` on the whole torus.
pub fn heat_kernel_column(kenv: &KernelEnv, y: usize, t: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(param(format!("time {t} must be nonnegative")));
    }
    if y >= kenv.conductances.site_count() {
        return Err(param("target site out of range"));
    }
    let gen = Restricted::new(kenv, None, false);
    Ok(gen.column(y, &poisson_weights(gen.lambda * t)))
}
