//! Monte Carlo for the trap event `m(x) < l(x) = k` at a single site.

use rand::RngCore;

use super::report::{BoundCheck, BoundInstance};
use super::stats::{correlation, wilson_interval, Z99};
use crate::env::TrapSpec;
use crate::error::{param, Result};
use crate::rng::{self, domain};

/// `P(l(x) < j) = prod_{r >= j} (1 - p_r)` under the finite schedule.
fn below(spec: &TrapSpec, j: usize) -> f64 {
    if j <= 1 {
        return 0.0;
    }
    (j..=spec.k_max())
        .map(|r| 1.0 - spec.mark_probability(r))
        .product()
}

fn zone_size(spec: &TrapSpec, k: usize) -> usize {
    spec.exclusion_zone(spec.scale(k)).len()
}

/// Exact `P(m(x) < l(x) = k)`: `l(x)` and `m(x)` are independent, and a site
/// first met in `Lambda_{L_i}` blocks `m < k` iff its own `l` reaches
/// `max(i, k)`.
pub fn trap_probability_exact(spec: &TrapSpec, k: usize) -> Result<f64> {
    spec.validate()?;
    if k < 2 || k > spec.k_max() {
        return Err(param(format!("k = {k} outside 2..={}", spec.k_max())));
    }
    let p_ell = spec.mark_probability(k)
        * (k + 1..=spec.k_max())
            .map(|r| 1.0 - spec.mark_probability(r))
            .product::<f64>();
    let mut p_m = below(spec, k).powi(zone_size(spec, k) as i32);
    for j in k + 1..=spec.k_max() {
        let ring = zone_size(spec, j) - zone_size(spec, j - 1);
        p_m *= below(spec, j).powi(ring as i32);
    }
    Ok(p_ell * p_m)
}

/// Draws `l` at one site from the marks `xi_{L_2}, ..., xi_{L_kMax}`.
fn draw_ell<R: RngCore>(spec: &TrapSpec, r: &mut R) -> usize {
    let mut ell = 1;
    for k in 2..=spec.k_max() {
        if rng::unit_f64(r.next_u64()) < spec.mark_probability(k) {
            ell = k;
        }
    }
    ell
}

/// Outcome of [`trap_probability_mc`].
#[derive(Debug, Clone)]
pub struct TrapProbability {
    pub k: usize,
    pub trials: u64,
    pub hits: u64,
    pub estimate: f64,
    pub wilson: (f64, f64),
    pub exact: f64,
    /// Correlation of `1{l(x) = k}` with `1{m(x) < k}` across trials.
    pub correlation: f64,
    pub check: BoundCheck,
}

/// Samples `l` at `x` and on `x + Lambda_{L_kMax}` independently per trial.
/// The check passes when the 99% Wilson interval sits inside `(0, L_k^-d]`.
pub fn trap_probability_mc(spec: &TrapSpec, k: usize, trials: u64, seed: u64) -> Result<TrapProbability> {
    let exact = trap_probability_exact(spec, k)?;
    if trials < 10_000 {
        return Err(param(format!("{trials} trials, need at least 10^4")));
    }
    // first scale whose zone contains each offset of the deepest zone
    let first_scale: Vec<usize> = spec
        .exclusion_zone(spec.scale(spec.k_max()))
        .iter()
        .map(|v| {
            let j = v[0].unsigned_abs() as usize;
            (1..=spec.k_max()).find(|&i| 3 * spec.scale(i) >= j).unwrap()
        })
        .collect();
    let mut hits = 0u64;
    let mut is_k = Vec::with_capacity(trials as usize);
    let mut m_below = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let mut r = rng::stream(seed, domain::TRAP_MC, trial);
        let ell = draw_ell(spec, &mut r);
        let mut m = 1;
        for &i in &first_scale {
            let l = draw_ell(spec, &mut r);
            if l >= i {
                m = m.max(l);
            }
        }
        if m < ell && ell == k {
            hits += 1;
        }
        is_k.push(f64::from(u8::from(ell == k)));
        m_below.push(f64::from(u8::from(m < k)));
    }
    let wilson = wilson_interval(hits, trials, Z99);
    let bound = (spec.scale(k) as f64).powi(-(spec.d as i32));
    let mut check = BoundCheck::exact(
        format!("trap probability k={k}"),
        vec![
            BoundInstance::new("wilson upper vs L_k^-d", wilson.1, bound),
            BoundInstance::new("positive lower end", 0.0, wilson.0),
        ],
    );
    check.pass = wilson.1 <= bound && wilson.0 > 0.0;
    let check = check
        .with_extra("estimate", hits as f64 / trials as f64)
        .with_extra("exact", exact);
    Ok(TrapProbability {
        k,
        trials,
        hits,
        estimate: hits as f64 / trials as f64,
        wilson,
        exact,
        correlation: correlation(&is_k, &m_below),
        check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_values() {
        let spec = TrapSpec::standard(3);
        let p2 = trap_probability_exact(&spec, 2).unwrap();
        // hand evaluation: |Lambda_3| = 94, |Lambda_9| = 274
        let q2: f64 = 26.0 / 27.0;
        let q3: f64 = 728.0 / 729.0;
        let hand = (1.0 / 27.0) * q3 * (q2 * q3).powi(94) * q3.powi(180);
        assert!((p2 - hand).abs() < 1e-15);
        let p3 = trap_probability_exact(&spec, 3).unwrap();
        assert!((p3 - q3.powi(274) / 729.0).abs() < 1e-15);
        assert!(p2 <= 1.0 / 27.0 && p3 <= 1.0 / 729.0);
        assert!(trap_probability_exact(&spec, 1).is_err());
        assert!(trap_probability_exact(&spec, 4).is_err());
    }

    #[test]
    fn estimate_matches_exact() {
        let spec = TrapSpec::standard(3);
        for k in [2, 3] {
            let r = trap_probability_mc(&spec, k, 100_000, 17).unwrap();
            assert!(r.wilson.0 <= r.exact && r.exact <= r.wilson.1, "k={k}: {:?} vs {}", r.wilson, r.exact);
            assert!(r.check.pass);
            let sd = 1.0 / (r.trials as f64).sqrt();
            assert!(r.correlation.abs() <= 3.0 * sd, "{}", r.correlation);
        }
    }

    /// With `L_k = 3^(k-1)` in three dimensions the exclusion zone of scale 3
    /// blocks far more often than that of scale 9, so the event is likelier
    /// at `k = 3` than at `k = 2`; the sampler reproduces that ordering.
    #[test]
    fn ordering_follows_exact_law() {
        let spec = TrapSpec::standard(3);
        let e2 = trap_probability_exact(&spec, 2).unwrap();
        let e3 = trap_probability_exact(&spec, 3).unwrap();
        assert!(e3 > e2);
        let m2 = trap_probability_mc(&spec, 2, 200_000, 5).unwrap();
        let m3 = trap_probability_mc(&spec, 3, 200_000, 6).unwrap();
        assert!(m3.estimate > m2.estimate);
        // normalised by L_k^-d the probability does increase with k
        assert!(m3.estimate * 729.0 > m2.estimate * 27.0);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = TrapSpec::standard(3);
        assert!(trap_probability_mc(&spec, 1, 100_000, 0).is_err());
        assert!(trap_probability_mc(&spec, 2, 9_999, 0).is_err());
    }
}
