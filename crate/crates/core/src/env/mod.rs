//! Conductance environments on the torus.
//!
//! An [`Environment`] is immutable once built. Conductances are stored as a
//! symmetric adjacency structure (each unordered edge appears in both rows,
//! rows sorted by neighbour index) together with the cached site weights
//! `pi(x) = sum_y C(x,y)` and `nu(x) = sum_y C(x,y) |x-y|^2`.

mod io;
mod localize;
mod moments;
mod samplers;
mod trap;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Geometry;

pub use io::{load, save, EnvHeader, FORMAT_VERSION};
pub use localize::{localize, LocalizedEnvironment};
pub use moments::{moment_report, MomentReport};
pub use samplers::{
    constant, lrp_probability, plant_long_edge, sample_iid_nn, sample_lrp, sample_stable_like,
    stable_like_weight, LrpParams, Marginal, StableLikeParams,
};
pub use trap::{
    fringe_weight, plant_trap, plant_traps, sample_trap, segment_edges, segment_weight,
    EdgeRole, TrapAssignment, TrapFieldTrace, TrapSpec, TrapStats,
};

/// Provenance of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvMeta {
    pub sampler: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl EnvMeta {
    pub fn new(sampler: &str, seed: u64) -> Self {
        Self {
            sampler: sampler.to_string(),
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    geometry: Geometry,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    pi: Vec<f64>,
    nu: Vec<f64>,
    meta: EnvMeta,
}

impl Environment {
    /// Builds an environment from unordered edges `(x, y, C)`.
    ///
    /// Zero conductances are dropped. Self-loops, negative or non-finite
    /// weights, repeated pairs and sites with `pi = 0` are rejected.
    pub fn from_edges<I>(geometry: Geometry, edges: I, meta: EnvMeta) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let n = geometry.site_count();
        let mut list: Vec<(u32, u32, f64)> = Vec::new();
        let mut degree = vec![0usize; n];
        for (x, y, c) in edges {
            if x >= n || y >= n {
                return Err(Error::InvalidEnvironment(format!(
                    "edge ({x},{y}) outside torus of {n} sites"
                )));
            }
            if x == y {
                return Err(Error::InvalidEnvironment(format!("self-loop at site {x}")));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidEnvironment(format!(
                    "conductance {c} on edge ({x},{y})"
                )));
            }
            if c == 0.0 {
                continue;
            }
            degree[x] += 1;
            degree[y] += 1;
            list.push((x as u32, y as u32, c));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for x in 0..n {
            offsets.push(offsets[x] + degree[x]);
        }
        let total = offsets[n];
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0u32; total];
        let mut weights = vec![0.0; total];
        for &(x, y, c) in &list {
            let (xu, yu) = (x as usize, y as usize);
            neighbors[cursor[xu]] = y;
            weights[cursor[xu]] = c;
            cursor[xu] += 1;
            neighbors[cursor[yu]] = x;
            weights[cursor[yu]] = c;
            cursor[yu] += 1;
        }
        drop(list);
        let mut scratch: Vec<(u32, f64)> = Vec::new();
        for x in 0..n {
            let (lo, hi) = (offsets[x], offsets[x + 1]);
            scratch.clear();
            scratch.extend(neighbors[lo..hi].iter().copied().zip(weights[lo..hi].iter().copied()));
            scratch.sort_unstable_by_key(|e| e.0);
            for (i, &(y, c)) in scratch.iter().enumerate() {
                if i > 0 && scratch[i - 1].0 == y {
                    return Err(Error::InvalidEnvironment(format!(
                        "edge ({x},{y}) listed twice"
                    )));
                }
                neighbors[lo + i] = y;
                weights[lo + i] = c;
            }
        }
        let mut env = Self {
            geometry,
            offsets,
            neighbors,
            weights,
            pi: Vec::new(),
            nu: Vec::new(),
            meta,
        };
        env.compute_site_weights()?;
        Ok(env)
    }

    fn compute_site_weights(&mut self) -> Result<()> {
        let n = self.site_count();
        let mut pi = vec![0.0; n];
        let mut nu = vec![0.0; n];
        for x in 0..n {
            let (nbrs, ws) = self.row(x);
            let mut p = 0.0;
            let mut v = 0.0;
            for (&y, &c) in nbrs.iter().zip(ws) {
                p += c;
                v += c * self.geometry.dist_sq(x, y as usize) as f64;
            }
            if p <= 0.0 || !p.is_finite() {
                return Err(Error::IsolatedSite(x));
            }
            pi[x] = p;
            nu[x] = v;
        }
        self.pi = pi;
        self.nu = nu;
        Ok(())
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn site_count(&self) -> usize {
        self.geometry.site_count()
    }

    pub fn meta(&self) -> &EnvMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: EnvMeta) {
        self.meta = meta;
    }

    /// Neighbours of `x` (ascending) and the matching conductances.
    #[inline]
    pub fn row(&self, x: usize) -> (&[u32], &[f64]) {
        let (lo, hi) = (self.offsets[x], self.offsets[x + 1]);
        (&self.neighbors[lo..hi], &self.weights[lo..hi])
    }

    /// Start of each row in the flat adjacency arrays; length `sites + 1`.
    pub fn row_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn degree(&self, x: usize) -> usize {
        self.offsets[x + 1] - self.offsets[x]
    }

    pub fn conductance(&self, x: usize, y: usize) -> f64 {
        let (nbrs, ws) = self.row(x);
        match nbrs.binary_search(&(y as u32)) {
            Ok(i) => ws[i],
            Err(_) => 0.0,
        }
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    /// Number of unordered edges with positive conductance.
    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Unordered edges `(x, y, C)` with `x < y`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.site_count()).flat_map(move |x| {
            let (nbrs, ws) = self.row(x);
            nbrs.iter()
                .zip(ws)
                .filter(move |(&y, _)| (y as usize) > x)
                .map(move |(&y, &c)| (x, y as usize, c))
        })
    }

    /// True when every positive conductance joins nearest neighbours.
    pub fn is_nearest_neighbor(&self) -> bool {
        (0..self.site_count()).all(|x| {
            self.row(x)
                .0
                .iter()
                .all(|&y| self.geometry.dist_sq(x, y as usize) == 1)
        })
    }

    /// Spatial average of `pi`.
    pub fn mean_pi(&self) -> f64 {
        self.pi.iter().sum::<f64>() / self.site_count() as f64
    }

    /// Spatial average of `nu`.
    pub fn mean_nu(&self) -> f64 {
        self.nu.iter().sum::<f64>() / self.site_count() as f64
    }

    /// Re-checks symmetry, zero diagonal, positivity and cache coherence.
    pub fn validate(&self) -> Result<()> {
        for x in 0..self.site_count() {
            let (nbrs, ws) = self.row(x);
            let mut p = 0.0;
            let mut v = 0.0;
            for (&y, &c) in nbrs.iter().zip(ws) {
                let y = y as usize;
                if y == x {
                    return Err(Error::InvalidEnvironment(format!("self-loop at {x}")));
                }
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidEnvironment(format!(
                        "conductance {c} on ({x},{y})"
                    )));
                }
                if self.conductance(y, x) != c {
                    return Err(Error::InvalidEnvironment(format!(
                        "asymmetric conductance on ({x},{y})"
                    )));
                }
                p += c;
                v += c * self.geometry.dist_sq(x, y) as f64;
            }
            if p <= 0.0 {
                return Err(Error::IsolatedSite(x));
            }
            if (p - self.pi[x]).abs() > 1e-12 * p || (v - self.nu[x]).abs() > 1e-12 * v.max(1.0) {
                return Err(Error::InvalidEnvironment(format!(
                    "cached site weights stale at {x}"
                )));
            }
        }
        Ok(())
    }
}
