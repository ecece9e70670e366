use serde::{Deserialize, Serialize};

use super::solver::CorrectorField;
use crate::env::Environment;
use crate::error::{param, Error, Result};

/// Growth diagnostics of `|chi|` on sup-norm balls `B(0,n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublinearityProfile {
    pub radii: Vec<usize>,
    pub deltas: Vec<f64>,
    /// `density[r][k] = n^-d #{x in B(0,n) : |chi(x)| > delta_k n}` for `n = radii[r]`.
    pub density: Vec<Vec<f64>>,
    /// `max[r] = n^-1 max_{x in B(0,n)} |chi(x)|`.
    pub max: Vec<f64>,
}

pub fn sublinearity_profile(
    env: &Environment,
    chi: &CorrectorField,
    radii: &[usize],
    deltas: &[f64],
) -> Result<SublinearityProfile> {
    chi.check_matches(env)?;
    let g = env.geometry();
    if deltas.iter().any(|&d| !(d >= 0.0)) {
        return Err(param("thresholds must be nonnegative"));
    }
    let norms: Vec<f64> = (0..env.site_count()).map(|x| chi.norm_at(x)).collect();
    let dist: Vec<i64> = (0..env.site_count()).map(|x| g.sup_dist(0, x)).collect();
    let mut density = Vec::with_capacity(radii.len());
    let mut max = Vec::with_capacity(radii.len());
    for &n in radii {
        if n == 0 {
            return Err(param("radii must be positive"));
        }
        if 2 * n > g.side() {
            return Err(Error::RadiusTooLarge {
                radius: n,
                side: g.side(),
                reason: "profile radius exceeds side/2",
            });
        }
        let nf = n as f64;
        let vol = nf.powi(g.dim() as i32);
        let inside: Vec<f64> = norms
            .iter()
            .zip(&dist)
            .filter(|(_, &r)| r <= n as i64)
            .map(|(&v, _)| v)
            .collect();
        density.push(
            deltas
                .iter()
                .map(|&delta| inside.iter().filter(|&&v| v > delta * nf).count() as f64 / vol)
                .collect(),
        );
        max.push(inside.iter().fold(0.0f64, |m, &v| m.max(v)) / nf);
    }
    Ok(SublinearityProfile {
        radii: radii.to_vec(),
        deltas: deltas.to_vec(),
        density,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::{solve_corrector, SolverOptions};
    use crate::env::{constant, sample_iid_nn, Marginal};
    use crate::lattice::Geometry;

    #[test]
    fn zero_corrector_profile() {
        let g = Geometry::new(2, 16).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let chi = CorrectorField {
            d: 2,
            sites: g.site_count(),
            chi: vec![0.0; 2 * g.site_count()],
            residual: 0.0,
            scale: 0.0,
            iterations: vec![0, 0],
            means: vec![0.0, 0.0],
        };
        let p = sublinearity_profile(&env, &chi, &[1, 4, 8], &[0.0, 0.1]).unwrap();
        assert!(p.density.iter().flatten().all(|&a| a == 0.0));
        assert!(p.max.iter().all(|&s| s == 0.0));
        assert!(sublinearity_profile(&env, &chi, &[9], &[0.1]).is_err());
    }

    #[test]
    fn density_bounds() {
        let g = Geometry::new(2, 16).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 1).unwrap();
        let chi = solve_corrector(&env, &SolverOptions::default()).unwrap();
        let p = sublinearity_profile(&env, &chi, &[1, 2, 4, 8], &[0.0, 0.05]).unwrap();
        for (r, &n) in p.radii.iter().enumerate() {
            let cap = ((2 * n + 1) as f64 / n as f64).powi(2);
            for &a in &p.density[r] {
                assert!((0.0..=cap).contains(&a));
            }
            assert!(p.max[r] >= 0.0);
        }
    }
}
