use super::{EnvMeta, Environment};
use crate::error::{param, Error, Result};

/// The environment made homogeneous away from the origin.
///
/// `C^R(x,y) = C(x,y)` if `x` or `y` lies in `B(0,2R)`, `1` on nearest-neighbour
/// pairs outside it and `0` otherwise. The weight `nu^R` equals `nu` on
/// `B(0,2R)`, `1 + nu` on `B(0,4R) \ B(0,2R)` and `1` beyond.
#[derive(Debug, Clone)]
pub struct LocalizedEnvironment {
    radius: usize,
    conductances: Environment,
    nu: Vec<f64>,
}

pub fn localize(env: &Environment, r: usize) -> Result<LocalizedEnvironment> {
    let g = env.geometry();
    if r == 0 {
        return Err(param("localization radius must be positive"));
    }
    if 8 * r >= g.side() {
        return Err(Error::RadiusTooLarge {
            radius: r,
            side: g.side(),
            reason: "localization needs 4R < side/2",
        });
    }
    let near = |x: usize| g.sup_dist(0, x) <= 2 * r as i64;
    let mut edges = Vec::with_capacity(env.edge_count());
    for (x, y, c) in env.edges() {
        if near(x) || near(y) {
            edges.push((x, y, c));
        }
    }
    for x in (0..g.site_count()).filter(|&x| !near(x)) {
        for a in 0..g.dim() {
            let y = g.step(x, a, 1);
            if !near(y) {
                edges.push((x, y, 1.0));
            }
        }
    }
    let mut meta: EnvMeta = env.meta().clone();
    meta.sampler = format!("{}+localized", meta.sampler);
    meta.params.insert("localization_radius".into(), r as f64);
    let conductances = Environment::from_edges(g.clone(), edges, meta)?;
    let nu = (0..g.site_count())
        .map(|x| {
            let dist = g.sup_dist(0, x);
            if dist <= 2 * r as i64 {
                env.nu()[x]
            } else if dist <= 4 * r as i64 {
                1.0 + env.nu()[x]
            } else {
                1.0
            }
        })
        .collect();
    Ok(LocalizedEnvironment {
        radius: r,
        conductances,
        nu,
    })
}

impl LocalizedEnvironment {
    pub fn radius(&self) -> usize {
        self.radius
    }

    /// The localized conductances `C^R`.
    pub fn conductances(&self) -> &Environment {
        &self.conductances
    }

    /// The localized weight `nu^R`.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// `C^R` with every bond longer than `kappa R` removed.
    pub fn truncated(&self, kappa: f64) -> Result<Environment> {
        let reach = self.truncation_reach(kappa)?;
        let env = &self.conductances;
        let g = env.geometry();
        let mut meta = env.meta().clone();
        meta.params.insert("kappa".into(), kappa);
        Environment::from_edges(
            g.clone(),
            env.edges()
                .filter(|&(x, y, _)| (g.dist_sq(x, y) as f64).sqrt() <= reach),
            meta,
        )
    }

    /// `kappa R`, checked to be at least 1 with `kappa` in `(0, 1]`.
    pub fn truncation_reach(&self, kappa: f64) -> Result<f64> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(param(format!("kappa = {kappa} not in (0, 1]")));
        }
        let reach = kappa * self.radius as f64;
        if reach < 1.0 {
            return Err(param(format!("kappa R = {reach} < 1")));
        }
        Ok(reach)
    }

    /// `sup_x nu^R(x)^-1 sum_{|x-y| <= kappa R} C^R(x,y) |x-y|^2`.
    pub fn near_moment_ratio(&self, kappa: f64) -> Result<f64> {
        let reach2 = self.truncation_reach(kappa)?.powi(2);
        let env = &self.conductances;
        let g = env.geometry();
        let mut worst = 0.0f64;
        for x in 0..g.site_count() {
            let (nbrs, ws) = env.row(x);
            let mut s = 0.0;
            for (&y, &c) in nbrs.iter().zip(ws) {
                let r2 = g.dist_sq(x, y as usize) as f64;
                if r2 <= reach2 {
                    s += c * r2;
                }
            }
            worst = worst.max(s / self.nu[x]);
        }
        Ok(worst)
    }

    /// `sup_{x in B(0,4R)} nu^R(x)^-1 sum_{|x-y| > kappa R} C^R(x,y)`.
    pub fn far_mass_ratio(&self, kappa: f64) -> Result<f64> {
        let reach2 = self.truncation_reach(kappa)?.powi(2);
        let env = &self.conductances;
        let g = env.geometry();
        let mut worst = 0.0f64;
        for x in g.ball(0, 4 * self.radius)?.iter() {
            let (nbrs, ws) = env.row(x);
            let mut s = 0.0;
            for (&y, &c) in nbrs.iter().zip(ws) {
                if g.dist_sq(x, y as usize) as f64 > reach2 {
                    s += c;
                }
            }
            worst = worst.max(s / self.nu[x]);
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sample_lrp, LrpParams};
    use crate::lattice::Geometry;

    #[test]
    fn three_case_conductances() {
        let g = Geometry::new(2, 40).unwrap();
        let env = sample_lrp(&LrpParams { s: 2.5, beta: 1.0 }, &g, 3).unwrap();
        let loc = localize(&env, 2).unwrap();
        let cr = loc.conductances();
        cr.validate().unwrap();
        for x in 0..g.site_count() {
            let (nbrs, _) = env.row(x);
            let inner_x = g.sup_dist(0, x) <= 4;
            for &y in nbrs {
                let y = y as usize;
                let inner = inner_x || g.sup_dist(0, y) <= 4;
                let expected = if inner {
                    env.conductance(x, y)
                } else if g.dist_sq(x, y) == 1 {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(cr.conductance(x, y), expected);
            }
        }
        let far = g.index_from_coords(&[15, 15]);
        let two = g.translate(far, &[2, 0]);
        assert_eq!(cr.conductance(far, g.step(far, 0, 1)), 1.0);
        assert_eq!(cr.conductance(far, two), 0.0);
    }

    #[test]
    fn three_case_weights() {
        let g = Geometry::new(2, 40).unwrap();
        let env = sample_lrp(&LrpParams { s: 2.5, beta: 1.0 }, &g, 3).unwrap();
        let loc = localize(&env, 2).unwrap();
        for x in 0..g.site_count() {
            let r = g.sup_dist(0, x);
            let expect = if r <= 4 {
                env.nu()[x]
            } else if r <= 8 {
                1.0 + env.nu()[x]
            } else {
                1.0
            };
            assert_eq!(loc.nu()[x], expect);
        }
    }

    #[test]
    fn radius_window() {
        let g = Geometry::new(2, 32).unwrap();
        let env = crate::env::constant(&g, 1.0).unwrap();
        assert!(localize(&env, 4).is_err());
        assert!(localize(&env, 3).is_ok());
        assert!(localize(&env, 0).is_err());
        let loc = localize(&env, 3).unwrap();
        assert!(loc.truncated(0.2).is_err());
        assert!(loc.truncated(1.5).is_err());
        assert!(loc.truncated(0.34).unwrap().is_nearest_neighbor());
    }

    #[test]
    fn exact_bounds_hold() {
        let g = Geometry::new(2, 36).unwrap();
        let env = sample_lrp(&LrpParams { s: 2.2, beta: 2.0 }, &g, 8).unwrap();
        let loc = localize(&env, 4).unwrap();
        for kappa in [0.25, 0.5, 1.0] {
            assert!(loc.near_moment_ratio(kappa).unwrap() <= 5.0);
            let far = loc.far_mass_ratio(kappa).unwrap();
            assert!(far <= 5.0 / (kappa * 4.0f64).powi(2));
        }
    }
}
