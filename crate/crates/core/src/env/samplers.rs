use rand::RngCore;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{EnvMeta, Environment};
use crate::error::{param, Error, Result};
use crate::lattice::Geometry;
use crate::rng::{self, domain};

/// Law of a single nearest-neighbour conductance. Supported on `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Marginal {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { low: f64, high: f64, p_high: f64 },
    LogNormal { mu: f64, sigma: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Constant { value } => value > 0.0 && value.is_finite(),
            Marginal::Uniform { lo, hi } => lo > 0.0 && hi >= lo && hi.is_finite(),
            Marginal::TwoPoint { low, high, p_high } => {
                low > 0.0 && high > 0.0 && high.is_finite() && (0.0..=1.0).contains(&p_high)
            }
            Marginal::LogNormal { mu, sigma } => mu.is_finite() && sigma >= 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(param(format!(
                "conductance law {self:?} must be supported on (0, inf)"
            )))
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Constant { value } => value,
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng::unit_f64(rng.next_u64()),
            Marginal::TwoPoint { low, high, p_high } => {
                if rng::unit_f64(rng.next_u64()) < p_high {
                    high
                } else {
                    low
                }
            }
            Marginal::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated parameters")
                .sample(rng),
        }
    }

    fn record(&self, meta: EnvMeta) -> EnvMeta {
        match *self {
            Marginal::Constant { value } => meta.with("value", value),
            Marginal::Uniform { lo, hi } => meta.with("lo", lo).with("hi", hi),
            Marginal::TwoPoint { low, high, p_high } => {
                meta.with("low", low).with("high", high).with("p_high", p_high)
            }
            Marginal::LogNormal { mu, sigma } => meta.with("mu", mu).with("sigma", sigma),
        }
    }
}

/// Nearest-neighbour edges `(x, x + e_a)` in canonical order.
fn nearest_neighbor_pairs(g: &Geometry) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..g.site_count()).flat_map(move |x| (0..g.dim()).map(move |a| (x, g.step(x, a, 1))))
}

/// The environment with every nearest-neighbour conductance equal to `value`.
pub fn constant(g: &Geometry, value: f64) -> Result<Environment> {
    Marginal::Constant { value }.validate()?;
    Environment::from_edges(
        g.clone(),
        nearest_neighbor_pairs(g).map(|(x, y)| (x, y, value)),
        EnvMeta::new("constant", 0).with("value", value),
    )
}

/// I.i.d. conductances on nearest-neighbour edges, zero elsewhere.
pub fn sample_iid_nn(law: &Marginal, g: &Geometry, seed: u64) -> Result<Environment> {
    law.validate()?;
    let mut rng = rng::stream(seed, domain::IID_NN, 0);
    let edges: Vec<_> = nearest_neighbor_pairs(g)
        .map(|(x, y)| (x, y, law.sample(&mut rng)))
        .collect();
    Environment::from_edges(g.clone(), edges, law.record(EnvMeta::new("iid-nn", seed)))
}

/// Calls `f(i)` for each `i < n` selected by independent Bernoulli(`p`) trials,
/// skipping geometrically between successes.
fn bernoulli_hits<R: RngCore>(n: usize, p: f64, rng: &mut R, mut f: impl FnMut(usize)) {
    if p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        (0..n).for_each(f);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let skip = (rng::open_unit(rng).ln() / log_q).floor();
        if skip >= (n - i) as f64 {
            return;
        }
        i += skip as usize;
        f(i);
        i += 1;
        if i >= n {
            return;
        }
    }
}

/// Visits each displacement class once per unordered pair: `f(j, v, |v|^2)`
/// for class index `j` (the site `v` seen from the origin) with `j < -j`.
/// Classes with a component equal to `side/2` are skipped: their minimal
/// image is not antisymmetric.
fn for_each_class(g: &Geometry, mut f: impl FnMut(usize, &[i64], i64)) {
    let half = (g.side() / 2) as i64;
    let mut v = vec![0i64; g.dim()];
    for j in 1..g.site_count() {
        if g.negate_index(j) < j {
            continue;
        }
        g.displacement_into(0, j, &mut v);
        if v.iter().any(|&c| c == half) {
            continue;
        }
        let r2 = v.iter().map(|c| c * c).sum();
        f(j, &v, r2);
    }
}

/// Adds the Bernoulli(`p`) edges `{x, x+v}` of class `j`.
fn draw_class(
    g: &Geometry,
    j: usize,
    v: &[i64],
    p: f64,
    weight: f64,
    seed: u64,
    dom: u64,
    edges: &mut Vec<(usize, usize, f64)>,
) {
    let mut rng = rng::stream(seed, dom, j as u64);
    bernoulli_hits(g.site_count(), p, &mut rng, |x| {
        edges.push((x, g.translate(x, v), weight));
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrpParams {
    pub s: f64,
    pub beta: f64,
}

impl Default for LrpParams {
    fn default() -> Self {
        Self { s: 5.5, beta: 1.0 }
    }
}

/// Connection probability for displacement `v` on a torus of side `side`:
/// 1 at unit distance, `min(1, beta |v|^-s)` up to Euclidean length `side/2`,
/// 0 beyond or when a component equals `side/2`.
pub fn lrp_probability(v: &[i64], params: &LrpParams, side: usize) -> f64 {
    let r2: i64 = v.iter().map(|c| c * c).sum();
    match r2 {
        0 => 0.0,
        1 => 1.0,
        _ => {
            let r = (r2 as f64).sqrt();
            let half = side as i64 / 2;
            if r > side as f64 / 2.0 || v.iter().any(|c| c.abs() == half) {
                0.0
            } else {
                (params.beta * r.powf(-params.s)).min(1.0)
            }
        }
    }
}

/// Long-range percolation with zero-one conductances.
pub fn sample_lrp(params: &LrpParams, g: &Geometry, seed: u64) -> Result<Environment> {
    if !(params.s > g.dim() as f64) || !params.s.is_finite() {
        return Err(param(format!(
            "decay exponent s = {} must exceed d = {}",
            params.s,
            g.dim()
        )));
    }
    if !(params.beta >= 0.0) || !params.beta.is_finite() {
        return Err(param(format!("amplitude beta = {} must be >= 0", params.beta)));
    }
    let mut edges = Vec::with_capacity(g.site_count() * (g.dim() + 2));
    for_each_class(g, |j, v, _| {
        let p = lrp_probability(v, params, g.side());
        draw_class(g, j, v, p, 1.0, seed, domain::LRP, &mut edges);
    });
    let meta = EnvMeta::new("lrp", seed)
        .with("s", params.s)
        .with("beta", params.beta);
    Environment::from_edges(g.clone(), edges, meta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLikeParams {
    pub s: f64,
    /// Probability that a non-nearest-neighbour bond is open.
    pub theta: f64,
    /// Longest Euclidean bond length drawn.
    pub max_range: f64,
}

impl Default for StableLikeParams {
    fn default() -> Self {
        Self {
            s: 3.0,
            theta: 0.5,
            max_range: 8.0,
        }
    }
}

/// Conductance of an open stable-like bond of squared length `r2`.
pub fn stable_like_weight(r2: i64, d: usize, s: f64) -> f64 {
    if r2 == 1 {
        1.0
    } else {
        (r2 as f64).powf(-(d as f64 + s) / 2.0)
    }
}

/// `C(x,y) = xi(x,y) |x-y|^-(d+s)` with `xi = 1` on nearest neighbours.
pub fn sample_stable_like(params: &StableLikeParams, g: &Geometry, seed: u64) -> Result<Environment> {
    if !(params.s > 2.0) || !params.s.is_finite() {
        return Err(param(format!("exponent s = {} must exceed 2", params.s)));
    }
    if !(0.0..=1.0).contains(&params.theta) {
        return Err(param(format!("open-bond probability {} not in [0,1]", params.theta)));
    }
    if !(params.max_range >= 1.0) {
        return Err(param("max_range must be at least 1"));
    }
    let reach = params.max_range.min(g.side() as f64 / 2.0);
    let mut edges = Vec::with_capacity(g.site_count() * g.dim());
    for_each_class(g, |j, v, r2| {
        if (r2 as f64).sqrt() > reach {
            return;
        }
        let p = if r2 == 1 { 1.0 } else { params.theta };
        let w = stable_like_weight(r2, g.dim(), params.s);
        draw_class(g, j, v, p, w, seed, domain::STABLE_LIKE, &mut edges);
    });
    let meta = EnvMeta::new("stable-like", seed)
        .with("s", params.s)
        .with("theta", params.theta)
        .with("max_range", params.max_range);
    Environment::from_edges(g.clone(), edges, meta)
}

/// Adds `C(x,y) = 1` and deletes every other non-nearest-neighbour edge at `y`.
pub fn plant_long_edge(env: &Environment, x: usize, y: usize) -> Result<Environment> {
    let g = env.geometry();
    if x >= g.site_count() || y >= g.site_count() {
        return Err(param("site index out of range"));
    }
    if g.dist_sq(x, y) <= 1 {
        return Err(param(format!("sites {x} and {y} are equal or adjacent")));
    }
    let keep = |a: usize, b: usize| {
        let touches_y = a == y || b == y;
        !touches_y || g.dist_sq(a, b) == 1
    };
    let edges: Vec<_> = env
        .edges()
        .filter(|&(a, b, _)| keep(a, b))
        .chain(std::iter::once((x.min(y), x.max(y), 1.0)))
        .collect();
    let mut meta = env.meta().clone();
    meta.sampler = format!("{}+planted-long-edge", meta.sampler);
    meta.params.insert("planted_x".into(), x as f64);
    meta.params.insert("planted_y".into(), y as f64);
    Environment::from_edges(g.clone(), edges, meta).map_err(|e| match e {
        Error::InvalidEnvironment(m) => Error::InvalidEnvironment(format!("planting failed: {m}")),
        other => other,
    })
}
