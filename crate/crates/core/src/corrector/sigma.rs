use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::solver::CorrectorField;
use crate::env::Environment;
use crate::error::Result;

/// Effective covariance with expectations replaced by torus averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaMatrix {
    pub d: usize,
    /// Row-major `d x d` entries.
    pub entries: Vec<f64>,
}

impl SigmaMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.d {
            for j in 0..self.d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.d, self.d, &self.entries);
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

/// `Sigma_ij = avg_x sum_y C(x,y) (d_i + dchi_i)(d_j + dchi_j) / avg pi`
/// with `d = y - x` (minimal image) and `dchi = chi(y) - chi(x)`.
pub fn covariance_sigma(env: &Environment, chi: &CorrectorField) -> Result<SigmaMatrix> {
    chi.check_matches(env)?;
    let g = env.geometry();
    let d = g.dim();
    let mut acc = vec![0.0; d * d];
    let mut v = vec![0i64; d];
    let mut inc = vec![0.0; d];
    for x in 0..env.site_count() {
        let cx = chi.at(x);
        let (nbrs, ws) = env.row(x);
        for (&y, &c) in nbrs.iter().zip(ws) {
            let y = y as usize;
            g.displacement_into(x, y, &mut v);
            let cy = chi.at(y);
            for i in 0..d {
                inc[i] = v[i] as f64 + cy[i] - cx[i];
            }
            for i in 0..d {
                for j in 0..d {
                    acc[i * d + j] += c * inc[i] * inc[j];
                }
            }
        }
    }
    let n = env.site_count() as f64;
    let mean_pi = env.mean_pi();
    Ok(SigmaMatrix {
        d,
        entries: acc.into_iter().map(|s| s / n / mean_pi).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrector::solver::{solve_corrector, SolverOptions};
    use crate::env::{constant, sample_iid_nn, Marginal};
    use crate::lattice::Geometry;

    #[test]
    fn constant_env_gives_scaled_identity() {
        for (d, side) in [(2usize, 8usize), (3, 6)] {
            let g = Geometry::new(d, side).unwrap();
            let env = constant(&g, 1.0).unwrap();
            let chi = solve_corrector(&env, &SolverOptions::default()).unwrap();
            let s = covariance_sigma(&env, &chi).unwrap();
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 / d as f64 } else { 0.0 };
                    assert!((s.get(i, j) - want).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn gauge_invariance_and_psd() {
        let g = Geometry::new(2, 10).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 3).unwrap();
        let chi = solve_corrector(&env, &SolverOptions::default()).unwrap();
        let s = covariance_sigma(&env, &chi).unwrap();
        let shifted = chi.shifted(&[3.5, -1.25]);
        let s2 = covariance_sigma(&env, &shifted).unwrap();
        for (a, b) in s.entries.iter().zip(&s2.entries) {
            assert!((a - b).abs() <= 1e-12);
        }
        let r1 = crate::corrector::harmonic_residual(&env, &chi.chi);
        let r2 = crate::corrector::harmonic_residual(&env, &shifted.chi);
        assert!((r1 - r2).abs() <= 1e-12);
        assert!(s.max_asymmetry() <= 1e-12);
        assert!(s.min_eigenvalue() >= -1e-9);
        // homogenized diffusivity lies between harmonic and arithmetic means
        assert!(s.get(0, 0) > 0.25 && s.get(0, 0) < 0.5);
    }

    #[test]
    fn min_eigenvalue_reference() {
        let m = SigmaMatrix { d: 2, entries: vec![2.0, 1.0, 1.0, 2.0] };
        assert!((m.min_eigenvalue() - 1.0).abs() < 1e-12);
        let m = SigmaMatrix { d: 3, entries: vec![1.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 3.0] };
        assert!((m.min_eigenvalue() + 0.5).abs() < 1e-12);
    }
}
