use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::generator::assemble;
use crate::env::Environment;
use crate::error::{param, Error, Result};

/// Convergence report of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `||b - A x||_inf / ||b||_inf` at exit.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// semidefinite `A`, stopping once `||b - A x||_inf <= tol ||b||_inf`.
///
/// With `project` set, `A` is assumed to have the constants as its kernel and
/// `b` to be orthogonal to them; residuals and search directions are kept
/// mean-free. The true residual is recomputed before accepting convergence.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    project: bool,
) -> Result<CgOutcome> {
    let n = b.len();
    let b_norm = inf_norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = tol * b_norm;
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        apply(x, ap);
        for i in 0..n {
            r[i] = b[i] - ap[i];
        }
        if project {
            remove_mean(r);
        }
    };
    true_residual(x, &mut r, &mut ap);
    loop {
        if inf_norm(&r) <= target {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        if project {
            remove_mean(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut converged = false;
        while iterations < max_iter {
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if project {
                remove_mean(&mut r);
            }
            iterations += 1;
            if inf_norm(&r) <= target {
                converged = true;
                break;
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            if project {
                remove_mean(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        true_residual(x, &mut r, &mut ap);
        let rel = inf_norm(&r) / b_norm;
        if rel <= tol {
            return Ok(CgOutcome {
                iterations,
                relative_residual: rel,
            });
        }
        if iterations >= max_iter || !converged {
            return Err(Error::NotConverged {
                iterations,
                residual: rel,
            });
        }
        // recurrence drifted from the true residual; restart from it
    }
    Ok(CgOutcome {
        iterations,
        relative_residual: inf_norm(&r) / b_norm,
    })
}

/// Rejects environments whose bond graph is not connected.
pub fn check_connected(env: &Environment) -> Result<()> {
    let n = env.site_count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(x) = queue.pop_front() {
        for &y in env.row(x).0 {
            let y = y as usize;
            if !seen[y] {
                seen[y] = true;
                reached += 1;
                queue.push_back(y);
            }
        }
    }
    if reached != n {
        return Err(Error::Disconnected { reached, total: n });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    /// `None` means `50 sqrt(N)`.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

impl SolverOptions {
    pub fn max_iter_for(&self, sites: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((50.0 * (sites as f64).sqrt()).ceil() as usize).max(100))
    }
}

/// Periodic corrector `chi`, stored site-major: `chi[x * d + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorField {
    pub d: usize,
    pub sites: usize,
    pub chi: Vec<f64>,
    /// `max_{x,i} |(L Psi_i)(x)|`.
    pub residual: f64,
    /// `max_{x,i} |(L x_i)(x)|`, the size of the right-hand side.
    pub scale: f64,
    pub iterations: Vec<usize>,
    /// Torus average of each component (before gauge fixing it is zero).
    pub means: Vec<f64>,
}

impl CorrectorField {
    pub fn at(&self, x: usize) -> &[f64] {
        &self.chi[x * self.d..(x + 1) * self.d]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.sites).map(|x| self.chi[x * self.d + i]).collect()
    }

    pub fn norm_at(&self, x: usize) -> f64 {
        self.at(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Adds the same vector to every site (a change of gauge).
    pub fn shifted(&self, c: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, v) in out.chi.iter_mut().enumerate() {
            *v += c[k % self.d];
        }
        for (m, ci) in out.means.iter_mut().zip(c) {
            *m += ci;
        }
        out
    }

    pub fn check_matches(&self, env: &Environment) -> Result<()> {
        if self.d != env.geometry().dim() || self.sites != env.site_count() {
            return Err(Error::DimensionMismatch {
                expected: env.site_count() * env.geometry().dim(),
                got: self.chi.len(),
            });
        }
        Ok(())
    }
}

/// Right-hand side `b_i(x) = sum_y C(x,y) (y - x)_i`, site-major.
pub fn drift(env: &Environment) -> Vec<f64> {
    let g = env.geometry();
    let d = g.dim();
    let mut b = vec![0.0; env.site_count() * d];
    let mut v = vec![0i64; d];
    for x in 0..env.site_count() {
        let (nbrs, ws) = env.row(x);
        for (&y, &c) in nbrs.iter().zip(ws) {
            g.displacement_into(x, y as usize, &mut v);
            for i in 0..d {
                b[x * d + i] += c * v[i] as f64;
            }
        }
    }
    b
}

/// `max_{x,i} |(L Psi_i)(x)|` for `Psi = x + chi`.
pub fn harmonic_residual(env: &Environment, chi: &[f64]) -> f64 {
    let d = env.geometry().dim();
    let n = env.site_count();
    let b = drift(env);
    let l = assemble(env);
    let mut worst = 0.0f64;
    let mut out = vec![0.0; n];
    for i in 0..d {
        let comp: Vec<f64> = (0..n).map(|x| chi[x * d + i]).collect();
        l.apply(&comp, &mut out);
        for x in 0..n {
            worst = worst.max((b[x * d + i] + out[x]).abs());
        }
    }
    worst
}

/// Solves `L chi_i = -L x_i` on the torus, gauge-fixed by `chi(0) = 0`.
pub fn solve_corrector(env: &Environment, opts: &SolverOptions) -> Result<CorrectorField> {
    if !(opts.tol > 0.0) {
        return Err(param(format!("tolerance {} must be positive", opts.tol)));
    }
    check_connected(env)?;
    let d = env.geometry().dim();
    let n = env.site_count();
    let l = assemble(env);
    let max_iter = opts.max_iter_for(n);
    let b = drift(env);
    let mut chi = vec![0.0; n * d];
    let mut iterations = Vec::with_capacity(d);
    let mut means = Vec::with_capacity(d);
    let mut scale = 0.0f64;
    for i in 0..d {
        let bi: Vec<f64> = (0..n).map(|x| b[x * d + i]).collect();
        scale = scale.max(inf_norm(&bi));
        let mut xi = vec![0.0; n];
        let out = pcg(
            |f, o| l.apply_neg(f, o),
            l.diagonal(),
            &bi,
            &mut xi,
            opts.tol,
            max_iter,
            true,
        )?;
        iterations.push(out.iterations);
        let origin = xi[0];
        means.push(xi.iter().sum::<f64>() / n as f64 - origin);
        for x in 0..n {
            chi[x * d + i] = xi[x] - origin;
        }
    }
    let residual = harmonic_residual(env, &chi);
    Ok(CorrectorField {
        d,
        sites: n,
        chi,
        residual,
        scale,
        iterations,
        means,
    })
}
