//! Discrete torus `(Z / side Z)^d` standing in for `Z^d`.
//!
//! Sites are stored as row-major indices (first coordinate most significant).
//! Differences between sites always use the minimal-image convention: each
//! component lies in `(-side/2, side/2]`, the tie `side/2` going to the
//! positive half-axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension and side length of the torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct Geometry {
    d: usize,
    side: usize,
    strides: Vec<usize>,
    site_count: usize,
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    d: usize,
    side: usize,
}

impl TryFrom<GeometryRepr> for Geometry {
    type Error = Error;
    fn try_from(r: GeometryRepr) -> Result<Self> {
        Geometry::new(r.d, r.side)
    }
}

impl From<Geometry> for GeometryRepr {
    fn from(g: Geometry) -> Self {
        GeometryRepr {
            d: g.d,
            side: g.side,
        }
    }
}

/// A lattice point given by its coordinates, each reduced into `[0, side)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    pub coords: Vec<i64>,
}

/// Minimal-image difference `y - x`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Displacement {
    pub vec: Vec<i64>,
}

impl Displacement {
    pub fn norm_sq(&self) -> i64 {
        self.vec.iter().map(|c| c * c).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn sup_norm(&self) -> i64 {
        self.vec.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

/// Sorted set of site indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiteSet {
    sites: Vec<usize>,
}

impl SiteSet {
    pub fn from_indices(mut sites: Vec<usize>) -> Self {
        sites.sort_unstable();
        sites.dedup();
        Self { sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.sites.binary_search(&x).is_ok()
    }

    /// Position of `x` in the sorted list.
    pub fn position(&self, x: usize) -> Option<usize> {
        self.sites.binary_search(&x).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.sites.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sites
    }
}

impl Geometry {
    pub fn new(d: usize, side: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidGeometry(format!("dimension {d} < 2")));
        }
        if side < 4 || side % 2 != 0 {
            return Err(Error::InvalidGeometry(format!(
                "side {side} must be even and at least 4"
            )));
        }
        let site_count = (0..d)
            .try_fold(1usize, |acc, _| acc.checked_mul(side))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidGeometry(format!("{side}^{d} sites is too many")))?;
        let strides = (0..d).map(|i| side.pow((d - 1 - i) as u32)).collect();
        Ok(Self {
            d,
            side,
            strides,
            site_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    /// Index of the origin.
    pub fn origin(&self) -> usize {
        0
    }

    /// Builds a site, reducing the coordinates modulo `side`.
    pub fn site(&self, coords: &[i64]) -> Result<Site> {
        self.check_dim(coords.len())?;
        let s = self.side as i64;
        Ok(Site {
            coords: coords.iter().map(|c| c.rem_euclid(s)).collect(),
        })
    }

    pub fn index_of(&self, site: &Site) -> Result<usize> {
        self.check_dim(site.coords.len())?;
        Ok(self.index_from_coords(&site.coords))
    }

    /// Index of the site with the given (unreduced) coordinates.
    pub fn index_from_coords(&self, coords: &[i64]) -> usize {
        let s = self.side as i64;
        coords
            .iter()
            .zip(&self.strides)
            .map(|(c, st)| c.rem_euclid(s) as usize * st)
            .sum()
    }

    pub fn site_of(&self, index: usize) -> Site {
        let mut coords = vec![0; self.d];
        self.coords_into(index, &mut coords);
        Site { coords }
    }

    pub fn coords_into(&self, index: usize, out: &mut [i64]) {
        let mut rem = index;
        for (c, st) in out.iter_mut().zip(&self.strides) {
            *c = (rem / st) as i64;
            rem %= st;
        }
    }

    #[inline]
    fn minimal_image(&self, c: i64) -> i64 {
        let s = self.side as i64;
        let m = c.rem_euclid(s);
        if m > s / 2 {
            m - s
        } else {
            m
        }
    }

    pub fn displacement(&self, x: &Site, y: &Site) -> Result<Displacement> {
        self.check_dim(x.coords.len())?;
        self.check_dim(y.coords.len())?;
        Ok(Displacement {
            vec: x
                .coords
                .iter()
                .zip(&y.coords)
                .map(|(a, b)| self.minimal_image(b - a))
                .collect(),
        })
    }

    /// Minimal-image `y - x` for site indices.
    pub fn displacement_between(&self, x: usize, y: usize) -> Displacement {
        let mut vec = vec![0; self.d];
        self.displacement_into(x, y, &mut vec);
        Displacement { vec }
    }

    /// Allocation-free variant of [`Geometry::displacement_between`].
    #[inline]
    pub fn displacement_into(&self, x: usize, y: usize, out: &mut [i64]) {
        let (mut rx, mut ry) = (x, y);
        for (o, st) in out.iter_mut().zip(&self.strides) {
            let cx = (rx / st) as i64;
            let cy = (ry / st) as i64;
            rx %= st;
            ry %= st;
            *o = self.minimal_image(cy - cx);
        }
    }

    /// Squared Euclidean minimal-image distance.
    #[inline]
    pub fn dist_sq(&self, x: usize, y: usize) -> i64 {
        let (mut rx, mut ry) = (x, y);
        let mut acc = 0;
        for st in &self.strides {
            let c = self.minimal_image((ry / st) as i64 - (rx / st) as i64);
            rx %= st;
            ry %= st;
            acc += c * c;
        }
        acc
    }

    /// Minimal-image sup-norm distance.
    #[inline]
    pub fn sup_dist(&self, x: usize, y: usize) -> i64 {
        let (mut rx, mut ry) = (x, y);
        let mut acc = 0;
        for st in &self.strides {
            let c = self.minimal_image((ry / st) as i64 - (rx / st) as i64);
            rx %= st;
            ry %= st;
            acc = acc.max(c.abs());
        }
        acc
    }

    /// Site reached from `x` by the vector `v`.
    #[inline]
    pub fn translate(&self, x: usize, v: &[i64]) -> usize {
        let s = self.side as i64;
        let mut rem = x;
        let mut out = 0;
        for (st, dv) in self.strides.iter().zip(v) {
            let c = (rem / st) as i64;
            rem %= st;
            out += (c + dv).rem_euclid(s) as usize * st;
        }
        out
    }

    /// Neighbour of `x` one step along `axis` in direction `sign` (±1).
    #[inline]
    pub fn step(&self, x: usize, axis: usize, sign: i64) -> usize {
        let st = self.strides[axis];
        let c = (x / st) % self.side;
        let nc = (c as i64 + sign).rem_euclid(self.side as i64) as usize;
        x - c * st + nc * st
    }

    /// The `2d` nearest neighbours of `x`.
    pub fn nearest_neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).flat_map(move |a| [self.step(x, a, 1), self.step(x, a, -1)])
    }

    /// Index of the site `-v` where `v` is the site with index `j` viewed as a vector.
    pub fn negate_index(&self, j: usize) -> usize {
        let mut rem = j;
        let mut out = 0;
        for st in &self.strides {
            let c = rem / st;
            rem %= st;
            out += ((self.side - c) % self.side) * st;
        }
        out
    }

    /// Sup-norm ball `center + [-r, r]^d`; requires `2r + 1 <= side`.
    pub fn ball(&self, center: usize, r: usize) -> Result<SiteSet> {
        if 2 * r + 1 > self.side {
            return Err(Error::RadiusTooLarge {
                radius: r,
                side: self.side,
                reason: "ball would wrap around the torus",
            });
        }
        let width = 2 * r + 1;
        let total = width.pow(self.d as u32);
        let mut v = vec![0i64; self.d];
        let mut sites = Vec::with_capacity(total);
        for k in 0..total {
            let mut rem = k;
            for c in v.iter_mut().rev() {
                *c = (rem % width) as i64 - r as i64;
                rem /= width;
            }
            sites.push(self.translate(center, &v));
        }
        Ok(SiteSet::from_indices(sites))
    }

    /// Sites within sup-norm distance `r` of `center`, for any `r`
    /// (the whole torus once `r >= side/2`).
    pub fn sup_ball_clamped(&self, center: usize, r: usize) -> SiteSet {
        if 2 * r + 1 <= self.side {
            return self.ball(center, r).expect("radius checked");
        }
        SiteSet::from_indices((0..self.site_count).collect())
    }

    /// Sites outside `a` with a nearest neighbour in `a`.
    pub fn outer_boundary(&self, a: &SiteSet) -> Result<SiteSet> {
        if a.is_empty() {
            return Err(Error::InvalidSiteSet("empty set has no boundary"));
        }
        if a.len() >= self.site_count {
            return Err(Error::InvalidSiteSet("set covers the whole torus"));
        }
        let mut out = Vec::new();
        for x in a.iter() {
            if x >= self.site_count {
                return Err(Error::InvalidSiteSet("site index out of range"));
            }
            out.extend(self.nearest_neighbors(x).filter(|&y| !a.contains(y)));
        }
        Ok(SiteSet::from_indices(out))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got,
            });
        }
        Ok(())
    }
}
