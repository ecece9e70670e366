use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{param, Error, Result};

/// Spatial-average moment diagnostics of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub q: f64,
    /// `(avg nu^p)^(1/p)`.
    pub nu_norm_p: f64,
    /// `(avg C(x, x+e)^-q)^(1/q)` over sites and unit vectors `e`.
    pub inverse_conductance_norm_q: f64,
    pub mean_pi: f64,
    /// `1/p + 1/q < 2/d`.
    pub below_critical: bool,
}

pub fn moment_report(env: &Environment, p: f64, q: f64) -> Result<MomentReport> {
    if !(p >= 1.0 && q >= 1.0) || !p.is_finite() || !q.is_finite() {
        return Err(param(format!("moment exponents p = {p}, q = {q} must be >= 1")));
    }
    let g = env.geometry();
    let n = env.site_count() as f64;
    let nu_norm_p = (env.nu().iter().map(|v| v.powf(p)).sum::<f64>() / n).powf(1.0 / p);
    let mut inv = 0.0;
    for x in 0..env.site_count() {
        for y in g.nearest_neighbors(x) {
            let c = env.conductance(x, y);
            if c == 0.0 {
                return Err(Error::ZeroConductance(x, y));
            }
            inv += c.powf(-q);
        }
    }
    let inverse_conductance_norm_q = (inv / (n * 2.0 * g.dim() as f64)).powf(1.0 / q);
    Ok(MomentReport {
        p,
        q,
        nu_norm_p,
        inverse_conductance_norm_q,
        mean_pi: env.mean_pi(),
        below_critical: 1.0 / p + 1.0 / q < 2.0 / g.dim() as f64,
    })
}
