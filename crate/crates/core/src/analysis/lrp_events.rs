//! Long-edge events in long-range percolation.
//!
//! `A(x,y)`: `C(x,y) = 1` and `y` has no bond longer than 1 except to `x`.
//! `A_n`: some `A(x,y)` with `|x| <= n^gamma` and `n < |y| <= 2n`.
//! `B_n`: two distinct bonds `(x,y)`, `(x',y')` with `|x|, |x'| <= n^gamma`,
//! `n <= |y|, |y'| <= 2n` and either `y = y'` or `C(y,y') = 1`.
//! Norms are Euclidean and measured from the origin.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{param, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrpEventScan {
    pub n: usize,
    pub gamma: f64,
    /// Every `(x, y)` for which `A(x, y)` holds.
    pub witnesses: Vec<(usize, usize)>,
    pub a_n: bool,
    pub b_n: bool,
    /// `(x, y, x', y')` realising `B_n`, when it occurs.
    pub b_witness: Option<(usize, usize, usize, usize)>,
}

/// Open interval `((s-d)/d, min((2s-d)/2d, 1))` of admissible `gamma`.
pub fn gamma_window(s: f64, d: usize) -> (f64, f64) {
    let d = d as f64;
    ((s - d) / d, ((2.0 * s - d) / (2.0 * d)).min(1.0))
}

/// Whether `A(x, y)` holds.
pub fn a_event(env: &Environment, x: usize, y: usize) -> bool {
    let g = env.geometry();
    if env.conductance(x, y) != 1.0 {
        return false;
    }
    env.row(y)
        .0
        .iter()
        .all(|&z| z as usize == x || g.dist_sq(y, z as usize) <= 1)
}

/// Scans for `A_n` and `B_n`. The decay exponent `s` is read from the
/// environment metadata.
pub fn scan_lrp_events(env: &Environment, n: usize, gamma: f64) -> Result<LrpEventScan> {
    let g = env.geometry();
    let s = *env
        .meta()
        .params
        .get("s")
        .ok_or_else(|| param("environment carries no decay exponent s"))?;
    let (lo, hi) = gamma_window(s, g.dim());
    if !(gamma > lo && gamma < hi) {
        return Err(param(format!("gamma = {gamma} outside ({lo}, {hi})")));
    }
    if n == 0 || 4 * n >= g.side() {
        return Err(Error::RadiusTooLarge {
            radius: n,
            side: g.side(),
            reason: "event scan needs 2n < side/2",
        });
    }
    let o = g.origin();
    let inner = (n as f64).powf(gamma);
    let inner2 = inner * inner;
    let (n2, n2_outer) = ((n * n) as i64, (4 * n * n) as i64);
    // bonds (x, y) from the inner ball into the closed shell n <= |y| <= 2n
    let mut bonds = Vec::new();
    for x in g.ball(o, inner.floor() as usize)?.iter() {
        if g.dist_sq(o, x) as f64 > inner2 {
            continue;
        }
        for &y in env.row(x).0 {
            let r2 = g.dist_sq(o, y as usize);
            if (n2..=n2_outer).contains(&r2) {
                bonds.push((y as usize, x));
            }
        }
    }
    bonds.sort_unstable();
    let witnesses: Vec<(usize, usize)> = bonds
        .iter()
        .filter(|&&(y, _)| g.dist_sq(o, y) > n2)
        .filter(|&&(y, x)| a_event(env, x, y))
        .map(|&(y, x)| (x, y))
        .collect();
    let mut b_witness = None;
    'scan: for (i, &(y, x)) in bonds.iter().enumerate() {
        if let Some(&(y2, x2)) = bonds.get(i + 1) {
            if y2 == y {
                b_witness = Some((x, y, x2, y2));
                break;
            }
        }
        for &z in env.row(y).0 {
            let z = z as usize;
            let start = bonds.partition_point(|b| b.0 < z);
            if let Some(&(y2, x2)) = bonds.get(start) {
                if y2 == z {
                    b_witness = Some((x, y, x2, y2));
                    break 'scan;
                }
            }
        }
    }
    Ok(LrpEventScan {
        n,
        gamma,
        a_n: !witnesses.is_empty(),
        witnesses,
        b_n: b_witness.is_some(),
        b_witness,
    })
}
