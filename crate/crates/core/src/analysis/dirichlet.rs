//! Dirichlet forms and the functional inequalities built on them.

use rand::RngCore;

use super::report::{fit_then_validate, BoundCheck, BoundInstance};
use crate::env::{Environment, LocalizedEnvironment};
use crate::error::{param, Error, Result};
use crate::lattice::Geometry;
use crate::rng;

/// Which form to evaluate. Sums run over ordered pairs, so each unordered
/// edge contributes twice.
#[derive(Debug, Clone, Copy)]
pub enum DirichletForm<'a> {
    /// `D`: all pairs weighted by `C`.
    Full(&'a Environment),
    /// `D_0`: nearest-neighbour pairs with unit weights.
    Unit(&'a Geometry),
    /// `D_1`: nearest-neighbour pairs weighted by `C`.
    NearestNeighbor(&'a Environment),
    /// `D~^R`: all pairs weighted by `C^R`.
    Localized(&'a LocalizedEnvironment),
    /// `D~^{R,kappa}`: pairs with `|x-y| <= kappa R` weighted by `C^R`.
    Truncated(&'a LocalizedEnvironment, f64),
}

impl DirichletForm<'_> {
    fn geometry(&self) -> &Geometry {
        match self {
            Self::Full(e) | Self::NearestNeighbor(e) => e.geometry(),
            Self::Unit(g) => g,
            Self::Localized(l) | Self::Truncated(l, _) => l.conductances().geometry(),
        }
    }

    /// `sum_{x,y} w(x,y) [f(y) - f(x)]^2`.
    pub fn eval(&self, f: &[f64]) -> Result<f64> {
        let g = self.geometry();
        if f.len() != g.site_count() {
            return Err(Error::DimensionMismatch {
                expected: g.site_count(),
                got: f.len(),
            });
        }
        let weighted = |env: &Environment, max_r2: f64| {
            let mut s = 0.0;
            for (x, y, c) in env.edges() {
                if (g.dist_sq(x, y) as f64) <= max_r2 {
                    s += c * (f[y] - f[x]).powi(2);
                }
            }
            2.0 * s
        };
        Ok(match *self {
            Self::Full(env) => weighted(env, f64::INFINITY),
            Self::NearestNeighbor(env) => weighted(env, 1.0),
            Self::Localized(loc) => weighted(loc.conductances(), f64::INFINITY),
            Self::Truncated(loc, kappa) => {
                let reach = loc.truncation_reach(kappa)?;
                weighted(loc.conductances(), reach * reach)
            }
            Self::Unit(g) => {
                let mut s = 0.0;
                for x in 0..g.site_count() {
                    for a in 0..g.dim() {
                        s += (f[g.step(x, a, 1)] - f[x]).powi(2);
                    }
                }
                2.0 * s
            }
        })
    }
}

/// Names accepted by [`dirichlet_form`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormVariant {
    D,
    D0,
    D1,
    LocalizedR,
    TruncatedRKappa,
}

/// Evaluates `variant` on `f`, taking the localized environment and `kappa`
/// from the optional arguments where the variant needs them.
pub fn dirichlet_form(
    variant: FormVariant,
    env: &Environment,
    localized: Option<&LocalizedEnvironment>,
    kappa: Option<f64>,
    f: &[f64],
) -> Result<f64> {
    let need_loc = || localized.ok_or_else(|| param("variant needs a localized environment"));
    let form = match variant {
        FormVariant::D => DirichletForm::Full(env),
        FormVariant::D0 => DirichletForm::Unit(env.geometry()),
        FormVariant::D1 => DirichletForm::NearestNeighbor(env),
        FormVariant::LocalizedR => DirichletForm::Localized(need_loc()?),
        FormVariant::TruncatedRKappa => DirichletForm::Truncated(
            need_loc()?,
            kappa.ok_or_else(|| param("truncated variant needs kappa"))?,
        ),
    };
    form.eval(f)
}

/// `phi_R(x) = clamp((8R - |x|_inf) / 4R, 0, 1)`: one on `B(0,4R)`, zero off
/// `B(0,8R)`, and `|phi(x) - phi(y)| <= |x-y|_inf / 4R <= |x-y| / 2R`.
#[derive(Debug, Clone)]
pub struct Mollifier {
    radius: usize,
    values: Vec<f64>,
}

pub fn mollifier(r: usize, g: &Geometry) -> Result<Mollifier> {
    if r == 0 || 16 * r >= g.side() {
        return Err(Error::RadiusTooLarge {
            radius: r,
            side: g.side(),
            reason: "mollifier needs 8R < side/2",
        });
    }
    let o = g.origin();
    let values = (0..g.site_count())
        .map(|x| {
            let s = g.sup_dist(o, x) as f64;
            ((8.0 * r as f64 - s) / (4.0 * r as f64)).clamp(0.0, 1.0)
        })
        .collect();
    Ok(Mollifier { radius: r, values })
}

impl Mollifier {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Random nonnegative test functions: bumps `(r - |x - c|_inf)_+` and noisy
/// indicators of sup-norm balls, with centres within `center_radius` of the
/// origin and radii up to `max_radius`.
pub fn random_test_functions(
    g: &Geometry,
    center_radius: usize,
    max_radius: usize,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let d = g.dim();
    (0..count as u64)
        .map(|id| {
            let mut r = rng::stream(seed, rng::domain::SAMPLES, id);
            let mut uniform = || rng::unit_f64(r.next_u64());
            let span = 2 * center_radius + 1;
            let c: Vec<i64> = (0..d)
                .map(|_| (uniform() * span as f64) as i64 - center_radius as i64)
                .collect();
            let c = g.index_from_coords(&c);
            let rad = 1 + (uniform() * max_radius as f64) as i64;
            let bump = uniform() < 0.5;
            (0..g.site_count())
                .map(|x| {
                    let s = g.sup_dist(c, x);
                    if s > rad {
                        0.0
                    } else if bump {
                        (rad - s) as f64 + uniform()
                    } else {
                        uniform()
                    }
                })
                .collect()
        })
        .collect()
}

fn weighted_power_sum(f: &[f64], w: Option<&[f64]>, p: f64) -> f64 {
    f.iter()
        .enumerate()
        .map(|(x, v)| v.powf(p) * w.map_or(1.0, |w| w[x]))
        .sum()
}

fn check_eps(eps: f64, d: usize) -> Result<()> {
    let upper = if d > 2 { 4.0 / (d as f64 - 2.0) } else { f64::INFINITY };
    if !(eps > 0.0 && eps < upper) {
        return Err(param(format!("epsilon = {eps} not in (0, {upper})")));
    }
    Ok(())
}

fn check_nonnegative(f: &[f64]) -> Result<()> {
    if f.iter().any(|v| !(*v >= 0.0)) {
        return Err(param("test functions must be nonnegative"));
    }
    Ok(())
}

/// `(label, lhs, shape)` for the Sobolev inequality: `lhs = ||f||^2` in
/// `l^{2+eps}(nu^R)` and `shape = R^{2-a} D~^{R,kappa}(f,f) + R^{-a}
/// ||f||^2_{l^2(nu^R)}` with `a = d eps / (2 + eps)`.
pub fn sobolev_terms(
    loc: &LocalizedEnvironment,
    kappa: f64,
    eps: f64,
    f: &[f64],
) -> Result<(f64, f64)> {
    let g = loc.conductances().geometry();
    check_eps(eps, g.dim())?;
    check_nonnegative(f)?;
    let nu = loc.nu();
    let form = DirichletForm::Truncated(loc, kappa).eval(f)?;
    let lhs = weighted_power_sum(f, Some(nu), 2.0 + eps).powf(2.0 / (2.0 + eps));
    let l2 = weighted_power_sum(f, Some(nu), 2.0);
    let r = loc.radius() as f64;
    let a = g.dim() as f64 * eps / (2.0 + eps);
    Ok((lhs, r.powf(2.0 - a) * form + r.powf(-a) * l2))
}

/// Fits the Sobolev constant on `set_a` and validates it on `set_b`.
pub fn check_sobolev(
    loc: &LocalizedEnvironment,
    kappa: f64,
    eps: f64,
    set_a: &[Vec<f64>],
    set_b: &[Vec<f64>],
) -> Result<BoundCheck> {
    let terms = |set: &[Vec<f64>], tag: &str| -> Result<Vec<(String, f64, f64)>> {
        set.iter()
            .enumerate()
            .map(|(i, f)| {
                let (l, s) = sobolev_terms(loc, kappa, eps, f)?;
                Ok((format!("{tag}{i}"), l, s))
            })
            .collect()
    };
    let a = terms(set_a, "a")?;
    let b = terms(set_b, "b")?;
    Ok(fit_then_validate(
        format!("sobolev R={} kappa={kappa} eps={eps}", loc.radius()),
        &a,
        &b,
    )
    .with_extra("eps", eps)
    .with_extra("kappa", kappa))
}

/// `(lhs, shape)` for the Nash-type inequality on the lattice:
/// `lhs = (sum f^{2+eps})^{2/(2+eps)}` and
/// `shape = (2+eps)^{eps d/(2+eps)} D_0^{theta} (sum f^2)^{1-theta}` with
/// `theta = eps d / (2(2+eps))`. The unknown `c(d)^{eps d/(2+eps)}` is the
/// fitted constant.
pub fn nash_terms(g: &Geometry, eps: f64, f: &[f64]) -> Result<(f64, f64)> {
    check_eps(eps, g.dim())?;
    check_nonnegative(f)?;
    let d = g.dim() as f64;
    let lhs = weighted_power_sum(f, None, 2.0 + eps).powf(2.0 / (2.0 + eps));
    let d0 = DirichletForm::Unit(g).eval(f)?;
    let l2 = weighted_power_sum(f, None, 2.0);
    let theta = eps * d / (2.0 * (2.0 + eps));
    let shape = (2.0 + eps).powf(eps * d / (2.0 + eps)) * d0.powf(theta) * l2.powf(1.0 - theta);
    Ok((lhs, shape))
}

pub fn check_nash(g: &Geometry, eps: f64, set_a: &[Vec<f64>], set_b: &[Vec<f64>]) -> Result<BoundCheck> {
    let terms = |set: &[Vec<f64>], tag: &str| -> Result<Vec<(String, f64, f64)>> {
        set.iter()
            .enumerate()
            .map(|(i, f)| {
                let (l, s) = nash_terms(g, eps, f)?;
                Ok((format!("{tag}{i}"), l, s))
            })
            .collect()
    };
    let a = terms(set_a, "a")?;
    let b = terms(set_b, "b")?;
    Ok(fit_then_validate(format!("nash d={} eps={eps}", g.dim()), &a, &b).with_extra("eps", eps))
}

/// Both localization bounds with their explicit constants, for every
/// `(R, kappa)` with `kappa R >= 1` and `8R < side`.
pub fn check_localization_bounds(
    env: &Environment,
    radii: &[usize],
    kappas: &[f64],
) -> Result<Vec<BoundCheck>> {
    let d = env.geometry().dim() as f64;
    let mut near = Vec::new();
    let mut far = Vec::new();
    for &r in radii {
        let loc = crate::env::localize(env, r)?;
        for &k in kappas {
            if k * (r as f64) < 1.0 {
                continue;
            }
            let label = format!("R={r} kappa={k}");
            near.push(BoundInstance::new(label.clone(), loc.near_moment_ratio(k)?, 1.0 + 2.0 * d));
            far.push(BoundInstance::new(
                label,
                loc.far_mass_ratio(k)?,
                (1.0 + 2.0 * d) / (k * r as f64).powi(2),
            ));
        }
    }
    Ok(vec![
        BoundCheck::exact("localized second moment", near),
        BoundCheck::exact("localized long-jump mass", far),
    ])
}
