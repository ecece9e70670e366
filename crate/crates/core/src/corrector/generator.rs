use rayon::prelude::*;

use crate::env::Environment;

/// `(L f)(x) = sum_y C(x,y) [f(y) - f(x)]`, acting through the environment's
/// adjacency lists.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorMatrix<'a> {
    env: &'a Environment,
}

/// Rows below this count are processed serially.
const PAR_THRESHOLD: usize = 1 << 14;

pub fn assemble(env: &Environment) -> GeneratorMatrix<'_> {
    GeneratorMatrix { env }
}

impl<'a> GeneratorMatrix<'a> {
    pub fn env(&self) -> &'a Environment {
        self.env
    }

    pub fn dim(&self) -> usize {
        self.env.site_count()
    }

    #[inline]
    fn row_value(&self, f: &[f64], x: usize) -> f64 {
        let (nbrs, ws) = self.env.row(x);
        let fx = f[x];
        nbrs.iter()
            .zip(ws)
            .map(|(&y, &c)| c * (f[y as usize] - fx))
            .sum()
    }

    /// `out = L f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        if out.len() >= PAR_THRESHOLD {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(x, o)| *o = self.row_value(f, x));
        } else {
            for (x, o) in out.iter_mut().enumerate() {
                *o = self.row_value(f, x);
            }
        }
    }

    /// `out = -L f`, the positive semidefinite form.
    pub fn apply_neg(&self, f: &[f64], out: &mut [f64]) {
        self.apply(f, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    /// `<f, -L f>`, which equals half the ordered-pair Dirichlet form.
    pub fn quadratic_form(&self, f: &[f64]) -> f64 {
        let mut lf = vec![0.0; f.len()];
        self.apply_neg(f, &mut lf);
        f.iter().zip(&lf).map(|(a, b)| a * b).sum()
    }

    /// Diagonal of `-L`, which is `pi`.
    pub fn diagonal(&self) -> &[f64] {
        self.env.pi()
    }
}
