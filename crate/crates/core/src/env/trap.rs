//! Trap environments: rare segments of strong conductance fenced by weak
//! bonds, placed so that no two traps touch.
//!
//! Scales `L_1 = 1 < L_2 < ...` carry independent marks `xi_k(x)` with
//! `P(xi_k(x) = 1) = L_k^-d`, and `xi_1 = 1`. With `ell(x)` the deepest marked
//! scale at `x` and `m(x)` the deepest `k` such that some `z` in `Lambda_{L_k}`
//! has `ell(x+z) >= k`, a trap of scale `ell(x)` sits at every `x` with
//! `m(x) < ell(x)`.

use serde::{Deserialize, Serialize};

use super::{EnvMeta, Environment};
use crate::error::{param, Error, Result};
use crate::lattice::Geometry;
use crate::rng::{domain, CounterUniform};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapSpec {
    pub d: usize,
    pub p: f64,
    pub q: f64,
    pub p_prime: f64,
    pub q_prime: f64,
    /// `L_1, ..., L_kMax`.
    pub scales: Vec<usize>,
}

impl TrapSpec {
    /// Spec with the default schedule `L_k = 3^(k-1)`, `k = 1..=k_max`.
    pub fn new(d: usize, p: f64, q: f64, p_prime: f64, q_prime: f64, k_max: usize) -> Result<Self> {
        let scales = (0..k_max).map(|k| 3usize.pow(k as u32)).collect();
        Self::with_scales(d, p, q, p_prime, q_prime, scales)
    }

    pub fn with_scales(
        d: usize,
        p: f64,
        q: f64,
        p_prime: f64,
        q_prime: f64,
        scales: Vec<usize>,
    ) -> Result<Self> {
        let spec = Self {
            d,
            p,
            q,
            p_prime,
            q_prime,
            scales,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Exponents `p = q = 1.1`, `p' = q' = 1.2` in `d = 3`.
    pub fn standard(k_max: usize) -> Self {
        Self::new(3, 1.1, 1.1, 1.2, 1.2, k_max).expect("standard exponents are admissible")
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return Err(param(format!("trap environments need d >= 3, got {}", self.d)));
        }
        let bound = 2.0 / (self.d as f64 - 1.0);
        if !(self.p >= 1.0 && self.q >= 1.0) || 1.0 / self.p + 1.0 / self.q <= bound {
            return Err(param(format!(
                "exponents p = {}, q = {} need 1/p + 1/q > {bound}",
                self.p, self.q
            )));
        }
        if !(self.p_prime > self.p && self.q_prime > self.q)
            || 1.0 / self.p_prime + 1.0 / self.q_prime <= bound
        {
            return Err(param(format!(
                "p' = {}, q' = {} must exceed p, q with 1/p' + 1/q' > {bound}",
                self.p_prime, self.q_prime
            )));
        }
        if self.scales.is_empty() || self.scales[0] != 1 {
            return Err(param("scale schedule must start at L_1 = 1"));
        }
        if self.scales.len() > 15 {
            return Err(param("at most 15 scales are supported"));
        }
        if self.scales.windows(2).any(|w| w[1] <= 2 * w[0]) {
            return Err(param("scale schedule must satisfy L_(k+1) > 2 L_k"));
        }
        Ok(())
    }

    pub fn k_max(&self) -> usize {
        self.scales.len()
    }

    /// `L_k` for `k >= 1`.
    pub fn scale(&self, k: usize) -> usize {
        self.scales[k - 1]
    }

    pub fn mark_probability(&self, k: usize) -> f64 {
        (self.scale(k) as f64).powi(-(self.d as i32))
    }

    /// Fringe conductance `a_L = L^(-(d-1)/q')`.
    pub fn a(&self, l: usize) -> f64 {
        fringe_weight(l, self.d, self.q_prime)
    }

    /// Segment conductance `b_L = L^((d-1)/p')`.
    pub fn b(&self, l: usize) -> f64 {
        segment_weight(l, self.d, self.p_prime)
    }

    /// Smallest torus side on which scale `k` traps and their exclusion
    /// zones do not wrap.
    pub fn min_side(&self, k: usize) -> usize {
        6 * self.scale(k) + 3
    }

    /// Offsets `j e_1 + z`, `|j| <= 3L`, `z` zero or a unit vector transverse
    /// to `e_1`, excluding the origin.
    pub fn exclusion_zone(&self, l: usize) -> Vec<Vec<i64>> {
        let reach = 3 * l as i64;
        let mut out = Vec::with_capacity((6 * l + 1) * (2 * self.d - 1));
        for j in -reach..=reach {
            for t in 0..(2 * self.d - 1) {
                let mut v = vec![0i64; self.d];
                v[0] = j;
                if t > 0 {
                    let axis = 1 + (t - 1) / 2;
                    v[axis] = if t % 2 == 1 { 1 } else { -1 };
                }
                if v.iter().any(|&c| c != 0) {
                    out.push(v);
                }
            }
        }
        out
    }

    fn check_geometry(&self, g: &Geometry, k: usize) -> Result<()> {
        if g.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: g.dim(),
            });
        }
        if g.side() < self.min_side(k) {
            return Err(Error::RadiusTooLarge {
                radius: self.scale(k),
                side: g.side(),
                reason: "trap scale needs 6 L + 2 < side",
            });
        }
        Ok(())
    }
}

pub fn fringe_weight(l: usize, d: usize, q_prime: f64) -> f64 {
    (l as f64).powf(-(d as f64 - 1.0) / q_prime)
}

pub fn segment_weight(l: usize, d: usize, p_prime: f64) -> f64 {
    (l as f64).powf((d as f64 - 1.0) / p_prime)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeRole {
    /// Both endpoints on the segment.
    Segment,
    /// Exactly one endpoint on the segment.
    Fringe,
}

/// Nearest-neighbour edges touching `{x + j e_1 : j = 0..=l}`, each given as
/// `(u, axis, role)` for the edge `{u, u + e_axis}`. There are `l` segment
/// edges and `2 + (2d-2)(l+1)` fringe edges.
pub fn segment_edges(g: &Geometry, x: usize, l: usize) -> Vec<(usize, usize, EdgeRole)> {
    let mut out = Vec::with_capacity(l + 2 + (2 * g.dim() - 2) * (l + 1));
    let mut s = x;
    out.push((g.step(x, 0, -1), 0, EdgeRole::Fringe));
    for j in 0..=l {
        if j < l {
            out.push((s, 0, EdgeRole::Segment));
        } else {
            out.push((s, 0, EdgeRole::Fringe));
        }
        for a in 1..g.dim() {
            out.push((s, a, EdgeRole::Fringe));
            out.push((g.step(s, a, -1), a, EdgeRole::Fringe));
        }
        s = g.step(s, 0, 1);
    }
    out
}

/// A trap placed at `site` with scale index `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrapAssignment {
    pub site: usize,
    pub k: usize,
}

/// Per-site record of a sampled trap field.
#[derive(Debug, Clone)]
pub struct TrapFieldTrace {
    /// Bit `k-1` set iff `xi_{L_k}(x) = 1`.
    pub marks: Vec<u16>,
    pub ell: Vec<u8>,
    pub m: Vec<u8>,
    /// Sites with `m(x) < ell(x)`, ascending.
    pub traps: Vec<TrapAssignment>,
    /// Edges that more than one trap tried to set.
    pub conflicts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapStats {
    pub traps_per_scale: [usize; 16],
    pub conflicts: usize,
}

impl TrapFieldTrace {
    pub fn is_trap(&self, x: usize) -> bool {
        self.m[x] < self.ell[x]
    }

    pub fn stats(&self) -> TrapStats {
        let mut traps_per_scale = [0; 16];
        for t in &self.traps {
            traps_per_scale[t.k] += 1;
        }
        TrapStats {
            traps_per_scale,
            conflicts: self.conflicts,
        }
    }

    /// Brute-force check that distinct traps own disjoint edge sets.
    pub fn check_disjointness(&self, spec: &TrapSpec, g: &Geometry) -> Result<()> {
        let mut owner = vec![u32::MAX; g.site_count() * g.dim()];
        for (i, t) in self.traps.iter().enumerate() {
            for (u, a, _) in segment_edges(g, t.site, spec.scale(t.k)) {
                let slot = &mut owner[u * g.dim() + a];
                if *slot != u32::MAX {
                    return Err(Error::InvalidEnvironment(format!(
                        "traps at {} and {} share edge ({u}, axis {a})",
                        self.traps[*slot as usize].site, t.site
                    )));
                }
                *slot = i as u32;
            }
        }
        Ok(())
    }
}

/// Marks `xi_{L_k}(x)` for every site, drawn from per-scale counter streams.
fn draw_marks(spec: &TrapSpec, g: &Geometry, seed: u64) -> Vec<u16> {
    let n = g.site_count();
    let mut marks = vec![1u16; n];
    let mut u = vec![0.0; n];
    for k in 2..=spec.k_max() {
        let p = spec.mark_probability(k);
        CounterUniform::new(seed, domain::TRAP_XI, k as u64).fill_sequential(&mut u);
        for (mk, &ux) in marks.iter_mut().zip(&u) {
            if ux < p {
                *mk |= 1 << (k - 1);
            }
        }
    }
    marks
}

fn deepest_mark(bits: u16) -> u8 {
    (16 - bits.leading_zeros()) as u8
}

/// Environment with all nearest-neighbour conductances 1 except on the
/// edges of the given traps; overlapping traps are counted, not rejected.
fn assemble(
    spec: &TrapSpec,
    g: &Geometry,
    traps: &[TrapAssignment],
    meta: EnvMeta,
) -> Result<(Environment, usize)> {
    let d = g.dim();
    let mut w = vec![1.0; g.site_count() * d];
    let mut set = vec![false; g.site_count() * d];
    let mut conflicts = 0;
    for t in traps {
        let l = spec.scale(t.k);
        let (a, b) = (spec.a(l), spec.b(l));
        for (u, axis, role) in segment_edges(g, t.site, l) {
            let slot = u * d + axis;
            if set[slot] {
                conflicts += 1;
                continue;
            }
            set[slot] = true;
            w[slot] = match role {
                EdgeRole::Segment => b,
                EdgeRole::Fringe => a,
            };
        }
    }
    let edges = (0..g.site_count())
        .flat_map(|x| (0..d).map(move |a| (x, a)))
        .map(|(x, a)| (x, g.step(x, a, 1), w[x * d + a]));
    let env = Environment::from_edges(g.clone(), edges, meta)?;
    Ok((env, conflicts))
}

fn spec_meta(sampler: &str, spec: &TrapSpec, seed: u64) -> EnvMeta {
    EnvMeta::new(sampler, seed)
        .with("p", spec.p)
        .with("q", spec.q)
        .with("p_prime", spec.p_prime)
        .with("q_prime", spec.q_prime)
        .with("k_max", spec.k_max() as f64)
}

/// Samples the trap field on the torus and builds the environment.
pub fn sample_trap(spec: &TrapSpec, g: &Geometry, seed: u64) -> Result<(Environment, TrapFieldTrace)> {
    spec.validate()?;
    spec.check_geometry(g, spec.k_max())?;
    let n = g.site_count();
    let marks = draw_marks(spec, g, seed);
    let ell: Vec<u8> = marks.iter().map(|&b| deepest_mark(b)).collect();
    let mut m = vec![1u8; n];
    let zones: Vec<Vec<Vec<i64>>> = (1..=spec.k_max())
        .map(|k| spec.exclusion_zone(spec.scale(k)))
        .collect();
    let neg: Vec<Vec<Vec<i64>>> = zones
        .iter()
        .map(|zs| zs.iter().map(|z| z.iter().map(|c| -c).collect()).collect())
        .collect();
    // y with ell(y) >= k raises m(y - z) to k for every z in Lambda_{L_k}
    for y in 0..n {
        let top = ell[y] as usize;
        for k in 2..=top {
            for z in &neg[k - 1] {
                let x = g.translate(y, z);
                m[x] = m[x].max(k as u8);
            }
        }
    }
    let traps: Vec<TrapAssignment> = (0..n)
        .filter(|&x| m[x] < ell[x])
        .map(|x| TrapAssignment {
            site: x,
            k: ell[x] as usize,
        })
        .collect();
    let (env, conflicts) = assemble(spec, g, &traps, spec_meta("trap", spec, seed))?;
    let trace = TrapFieldTrace {
        marks,
        ell,
        m,
        traps,
        conflicts,
    };
    Ok((env, trace))
}

/// The all-ones environment with a single scale-`k` trap at `x`.
pub fn plant_trap(spec: &TrapSpec, k: usize, x: usize, g: &Geometry) -> Result<Environment> {
    plant_traps(spec, &[TrapAssignment { site: x, k }], g)
}

/// The all-ones environment with the given traps; overlapping traps are an error.
pub fn plant_traps(spec: &TrapSpec, traps: &[TrapAssignment], g: &Geometry) -> Result<Environment> {
    spec.validate()?;
    for t in traps {
        if t.k == 0 || t.k > spec.k_max() {
            return Err(param(format!("scale index {} outside 1..={}", t.k, spec.k_max())));
        }
        if t.site >= g.site_count() {
            return Err(param("trap site out of range"));
        }
        spec.check_geometry(g, t.k)?;
    }
    let mut meta = spec_meta("planted-trap", spec, 0);
    if let [t] = traps {
        meta = meta.with("k", t.k as f64).with("site", t.site as f64);
    }
    let (env, conflicts) = assemble(spec, g, traps, meta)?;
    if conflicts > 0 {
        return Err(Error::InvalidEnvironment(format!(
            "planted traps overlap on {conflicts} edges"
        )));
    }
    Ok(env)
}
