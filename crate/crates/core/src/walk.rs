//! The jump chain `Z`, the variable-speed walk `X` (holding rate `pi`) and the
//! time-changed walk `Y` (holding rate `pi / nu`), all sharing the jump law
//! `P(x,y) = C(x,y) / pi(x)`.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrector::{pcg, SolverOptions};
use crate::env::Environment;
use crate::error::{param, Error, Result};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Unit time per step.
    Discrete,
    /// Exponential holding with rate `pi(x)`.
    X,
    /// Exponential holding with rate `pi(x) / nu(x)`.
    Y,
}

/// Inverse-CDF sampler of the jump law, built once per environment.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    env: &'a Environment,
    cumulative: Vec<f64>,
}

impl<'a> Walker<'a> {
    pub fn new(env: &'a Environment) -> Self {
        let offsets = env.row_offsets();
        let mut cumulative = vec![0.0; offsets[env.site_count()]];
        for x in 0..env.site_count() {
            let (_, ws) = env.row(x);
            let mut acc = 0.0;
            for (k, &w) in ws.iter().enumerate() {
                acc += w;
                cumulative[offsets[x] + k] = acc;
            }
        }
        Self { env, cumulative }
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    /// One step of the jump chain from `x`.
    #[inline]
    pub fn step<R: RngCore>(&self, x: usize, rng: &mut R) -> usize {
        let offsets = self.env.row_offsets();
        let (lo, hi) = (offsets[x], offsets[x + 1]);
        let row = &self.cumulative[lo..hi];
        let total = row[row.len() - 1];
        let u = rng::unit_f64(rng.next_u64()) * total;
        let k = row.partition_point(|&c| c <= u).min(row.len() - 1);
        self.env.row(x).0[k] as usize
    }

    /// Holding rate at `x` under `clock` (1 for the discrete chain).
    #[inline]
    pub fn rate(&self, clock: Clock, x: usize) -> f64 {
        match clock {
            Clock::Discrete => 1.0,
            Clock::X => self.env.pi()[x],
            Clock::Y => self.env.pi()[x] / self.env.nu()[x],
        }
    }

    #[inline]
    fn holding<R: RngCore>(&self, clock: Clock, x: usize, rng: &mut R) -> f64 {
        match clock {
            Clock::Discrete => 1.0,
            _ => -rng::open_unit(rng).ln() / self.rate(clock, x),
        }
    }

    /// Runs until the next jump would occur after `horizon` (a step count for
    /// the discrete chain, a time otherwise).
    pub fn run<R: RngCore>(&self, clock: Clock, x0: usize, horizon: f64, rng: &mut R) -> Trajectory {
        let mut times = Vec::new();
        let mut sites = Vec::new();
        let mut t = 0.0;
        let mut x = x0;
        loop {
            let next = t + self.holding(clock, x, rng);
            if next > horizon {
                break;
            }
            t = next;
            x = self.step(x, rng);
            times.push(t);
            sites.push(x);
        }
        Trajectory {
            start: x0,
            times,
            sites,
            clock,
            horizon,
        }
    }

    /// Lifted positions `Z_0 = 0, Z_1, ..., Z_steps` relative to `x0`,
    /// flattened with `d` coordinates per step.
    pub fn lifted_path<R: RngCore>(&self, x0: usize, steps: usize, rng: &mut R) -> Vec<i64> {
        let g = self.env.geometry();
        let d = g.dim();
        let mut out = vec![0i64; d * (steps + 1)];
        let mut v = vec![0i64; d];
        let mut x = x0;
        for k in 1..=steps {
            let y = self.step(x, rng);
            g.displacement_into(x, y, &mut v);
            for i in 0..d {
                out[k * d + i] = out[(k - 1) * d + i] + v[i];
            }
            x = y;
        }
        out
    }

    /// First time `Y` started at `x` leaves the sup-norm ball `B(x, r)`.
    pub fn exit_time<R: RngCore>(&self, x: usize, r: usize, rng: &mut R) -> f64 {
        let g = self.env.geometry();
        let mut t = 0.0;
        let mut z = x;
        loop {
            t += self.holding(Clock::Y, z, rng);
            z = self.step(z, rng);
            if g.sup_dist(x, z) > r as i64 {
                return t;
            }
        }
    }
}

/// One step of the jump chain.
pub fn step_discrete<R: RngCore>(env: &Environment, x: usize, rng: &mut R) -> Result<usize> {
    if x >= env.site_count() {
        return Err(param("site index out of range"));
    }
    if env.degree(x) == 0 {
        return Err(Error::IsolatedSite(x));
    }
    Ok(Walker::new(env).step(x, rng))
}

/// A path with jump times `times[k]` and destinations `sites[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: usize,
    pub times: Vec<f64>,
    pub sites: Vec<usize>,
    pub clock: Clock,
    pub horizon: f64,
}

impl Trajectory {
    /// Number of jumps in `[0, t]`.
    pub fn jumps_by(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    pub fn position_at(&self, t: f64) -> usize {
        match self.jumps_by(t) {
            0 => self.start,
            k => self.sites[k - 1],
        }
    }

    /// Site sequence `Z_0, Z_1, ...` ignoring times.
    pub fn path(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.start).chain(self.sites.iter().copied())
    }

    /// CSV rows `time,site_index`, the start recorded at time 0.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("time,site_index\n");
        s.push_str(&format!("0,{}\n", self.start));
        for (t, x) in self.times.iter().zip(&self.sites) {
            s.push_str(&format!("{t:?},{x}\n"));
        }
        s
    }
}

/// Runs a single trajectory on stream `(seed, id)`.
pub fn run_walk(
    env: &Environment,
    clock: Clock,
    x0: usize,
    horizon: f64,
    seed: u64,
    id: u64,
) -> Result<Trajectory> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(param(format!("horizon {horizon} must be positive")));
    }
    if x0 >= env.site_count() {
        return Err(param("start site out of range"));
    }
    let mut rng = rng::stream(seed, domain::WALK, id);
    Ok(Walker::new(env).run(clock, x0, horizon, &mut rng))
}

/// `B^(n)(t) = n^-1/2 (Z_k + (tn - k)(Z_(k+1) - Z_k))`, `k = floor(tn)`,
/// on lifted coordinates.
#[derive(Debug, Clone)]
pub struct ScaledPath {
    n: f64,
    d: usize,
    points: Vec<i64>,
}

impl ScaledPath {
    /// Scaled path of a discrete-clock trajectory.
    pub fn from_trajectory(env: &Environment, traj: &Trajectory, n: usize) -> Result<Self> {
        if traj.clock != Clock::Discrete {
            return Err(param("scaled paths need a discrete-clock trajectory"));
        }
        let g = env.geometry();
        let d = g.dim();
        let mut points = Vec::with_capacity(d * (traj.sites.len() + 1));
        points.extend(g.site_of(traj.start).coords);
        let mut v = vec![0i64; d];
        let mut prev = traj.start;
        for &x in &traj.sites {
            g.displacement_into(prev, x, &mut v);
            let k = points.len() - d;
            for i in 0..d {
                points.push(points[k + i] + v[i]);
            }
            prev = x;
        }
        Self::from_points(points, d, n)
    }

    /// From lifted positions flattened `d` per step.
    pub fn from_points(points: Vec<i64>, d: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(param("scale n must be positive"));
        }
        Ok(Self {
            n: n as f64,
            d,
            points,
        })
    }

    pub fn span(&self) -> usize {
        self.points.len() / self.d - 1
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(param(format!("time {t} must be nonnegative")));
        }
        let tn = t * self.n;
        let k = tn.floor() as usize;
        let frac = tn - k as f64;
        let need = if frac > 0.0 { k + 1 } else { k };
        if need > self.span() {
            return Err(Error::InsufficientSample(format!(
                "path has {} steps, B(t) at t = {t} needs {need}",
                self.span()
            )));
        }
        let scale = self.n.sqrt();
        Ok((0..self.d)
            .map(|i| {
                let a = self.points[k * self.d + i] as f64;
                let b = if frac > 0.0 {
                    self.points[(k + 1) * self.d + i] as f64
                } else {
                    a
                };
                (a + frac * (b - a)) / scale
            })
            .collect())
    }
}

pub fn scaled_path(env: &Environment, traj: &Trajectory, n: usize) -> Result<ScaledPath> {
    ScaledPath::from_trajectory(env, traj, n)
}

/// Exit time of `Y` from `B(x, r)` on stream `(seed, id)`.
pub fn exit_time(env: &Environment, x: usize, r: usize, seed: u64, id: u64) -> Result<f64> {
    env.geometry().ball(x, r)?;
    let mut rng = rng::stream(seed, domain::EXIT, id);
    Ok(Walker::new(env).exit_time(x, r, &mut rng))
}

/// Exit times of `count` independent trajectories, in id order.
pub fn exit_times(env: &Environment, x: usize, r: usize, count: usize, seed: u64) -> Result<Vec<f64>> {
    env.geometry().ball(x, r)?;
    let walker = Walker::new(env);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = rng::stream(seed, domain::EXIT, id);
            walker.exit_time(x, r, &mut rng)
        })
        .collect())
}

/// `E^x tau` for `Y` leaving `B(center, r)`: solves
/// `sum_y C(x,y) (u(x) - u(y)) = nu(x)` inside with `u = 0` outside.
pub fn mean_exit_time_exact(env: &Environment, center: usize, r: usize) -> Result<Vec<(usize, f64)>> {
    let g = env.geometry();
    let ball = g.ball(center, r)?;
    let m = ball.len();
    let rows: Vec<Vec<(usize, f64)>> = ball
        .iter()
        .map(|x| {
            let (nbrs, ws) = env.row(x);
            nbrs.iter()
                .zip(ws)
                .filter_map(|(&y, &c)| ball.position(y as usize).map(|j| (j, c)))
                .collect()
        })
        .collect();
    let diag: Vec<f64> = ball.iter().map(|x| env.pi()[x]).collect();
    let rhs: Vec<f64> = ball.iter().map(|x| env.nu()[x]).collect();
    let apply = |f: &[f64], out: &mut [f64]| {
        for i in 0..m {
            let mut s = diag[i] * f[i];
            for &(j, c) in &rows[i] {
                s -= c * f[j];
            }
            out[i] = s;
        }
    };
    let mut u = vec![0.0; m];
    let opts = SolverOptions::default();
    pcg(apply, &diag, &rhs, &mut u, 1e-12, opts.max_iter_for(m) * 4, false)?;
    Ok(ball.iter().zip(u).collect())
}

/// `N_t / t` for a trajectory covering `[0, t]`.
pub fn time_change_ratio(traj: &Trajectory, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(param("time must be positive"));
    }
    if t > traj.horizon {
        return Err(param(format!("time {t} beyond horizon {}", traj.horizon)));
    }
    Ok(traj.jumps_by(t) as f64 / t)
}

/// Visit counts of `Z_1..Z_steps` per site.
pub fn occupation_counts(env: &Environment, x0: usize, steps: usize, seed: u64, id: u64) -> Vec<u64> {
    let walker = Walker::new(env);
    let mut rng = rng::stream(seed, domain::WALK, id);
    let mut counts = vec![0u64; env.site_count()];
    let mut x = x0;
    for _ in 0..steps {
        x = walker.step(x, &mut rng);
        counts[x] += 1;
    }
    counts
}

/// Time spent at each site by the walk with `clock` over `[0, horizon]`.
pub fn occupation_times(
    env: &Environment,
    clock: Clock,
    x0: usize,
    horizon: f64,
    seed: u64,
    id: u64,
) -> Vec<f64> {
    let walker = Walker::new(env);
    let mut rng = rng::stream(seed, domain::WALK, id);
    let mut occ = vec![0.0; env.site_count()];
    let mut t = 0.0;
    let mut x = x0;
    while t < horizon {
        let h = walker.holding(clock, x, &mut rng);
        occ[x] += h.min(horizon - t);
        t += h;
        x = walker.step(x, &mut rng);
    }
    occ
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::stats::{chi_square_gof, mean_var};
    use crate::env::{constant, sample_iid_nn, EnvMeta, Marginal};
    use crate::lattice::Geometry;

    #[test]
    fn jump_law_all_ones() {
        let g = Geometry::new(2, 8).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let w = Walker::new(&env);
        let mut rng = rng::stream(1, domain::WALK, 0);
        let nbrs = env.row(0).0.to_vec();
        let mut counts = vec![0u64; 4];
        for _ in 0..40_000 {
            let y = w.step(0, &mut rng);
            counts[nbrs.iter().position(|&n| n as usize == y).unwrap()] += 1;
        }
        let (_, p) = chi_square_gof(&counts, &[0.25; 4]).unwrap();
        assert!(p > 0.01, "{counts:?}");
    }

    #[test]
    fn jump_law_weighted() {
        let g = Geometry::new(2, 4).unwrap();
        let base = constant(&g, 1.0).unwrap();
        // at site 0: weight 3 towards site 1, the remaining three bonds weight 1
        let edges = base
            .edges()
            .map(|(x, y, c)| if (x, y) == (0, 1) { (x, y, 3.0) } else { (x, y, c) });
        let env = Environment::from_edges(g, edges, EnvMeta::new("test", 0)).unwrap();
        let w = Walker::new(&env);
        let mut rng = rng::stream(2, domain::WALK, 0);
        let nbrs = env.row(0).0.to_vec();
        let probs: Vec<f64> = env.row(0).1.iter().map(|c| c / env.pi()[0]).collect();
        assert!(probs.contains(&0.5));
        let mut counts = vec![0u64; nbrs.len()];
        for _ in 0..100_000 {
            let y = w.step(0, &mut rng);
            counts[nbrs.iter().position(|&n| n as usize == y).unwrap()] += 1;
        }
        let (_, p) = chi_square_gof(&counts, &probs).unwrap();
        assert!(p > 0.01, "{counts:?} vs {probs:?}");
    }

    #[test]
    fn step_discrete_checks_input() {
        let g = Geometry::new(2, 4).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let mut rng = rng::stream(0, domain::WALK, 0);
        assert!(step_discrete(&env, 99, &mut rng).is_err());
        let y = step_discrete(&env, 0, &mut rng).unwrap();
        assert_eq!(g.dist_sq(0, y), 1);
    }

    #[test]
    fn trajectory_invariants() {
        let g = Geometry::new(2, 8).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 1).unwrap();
        for clock in [Clock::Discrete, Clock::X, Clock::Y] {
            let t = run_walk(&env, clock, 3, 200.0, 7, 0).unwrap();
            assert!(t.times.windows(2).all(|w| w[0] < w[1]));
            let path: Vec<_> = t.path().collect();
            assert!(path.windows(2).all(|w| w[0] != w[1] && env.conductance(w[0], w[1]) > 0.0));
            if clock == Clock::Discrete {
                assert_eq!(t.times.len(), 200);
                assert!(t.times.iter().enumerate().all(|(k, &s)| s == (k + 1) as f64));
            }
        }
        assert!(run_walk(&env, Clock::X, 0, 0.0, 1, 0).is_err());
    }

    #[test]
    fn holding_rates() {
        let g = Geometry::new(2, 8).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let w = Walker::new(&env);
        assert_eq!(w.rate(Clock::Y, 0), 1.0);
        assert_eq!(w.rate(Clock::X, 0), 4.0);
        let mut rng = rng::stream(3, domain::WALK, 0);
        let h: Vec<f64> = (0..10_000).map(|_| w.holding(Clock::X, 0, &mut rng)).collect();
        let (m, v) = mean_var(&h);
        assert!((m - 0.25).abs() <= 3.0 * (v / 1e4).sqrt());
    }

    /// Mean holding time of `Y` at one site is `nu / pi` within 3 sigma.
    #[test]
    fn y_holding_mean_matches_weights() {
        let g = Geometry::new(2, 8).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 5).unwrap();
        let w = Walker::new(&env);
        let x = 9;
        let mut rng = rng::stream(4, domain::WALK, 0);
        let h: Vec<f64> = (0..10_000).map(|_| w.holding(Clock::Y, x, &mut rng)).collect();
        let (m, _) = mean_var(&h);
        let target = env.nu()[x] / env.pi()[x];
        // exponential: sigma of the mean is target / sqrt(n)
        assert!((m - target).abs() <= 3.0 * target / 100.0);
    }

    #[test]
    fn scaled_path_interpolation() {
        let points = vec![0, 0, 1, 0, 1, 1, 2, 1];
        let p = ScaledPath::from_points(points, 2, 4).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), vec![0.0, 0.0]);
        assert_eq!(p.eval(0.5).unwrap(), vec![0.5, 0.5]);
        assert_eq!(p.eval(0.75).unwrap(), vec![1.0, 0.5]);
        // midpoint between steps 1 and 2
        assert_eq!(p.eval(0.375).unwrap(), vec![0.5, 0.25]);
        assert!(p.eval(1.0).is_err());
    }

    #[test]
    fn scaled_path_from_walk() {
        let g = Geometry::new(2, 8).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let start = g.index_from_coords(&[2, 5]);
        let traj = run_walk(&env, Clock::Discrete, start, 50.0, 1, 0).unwrap();
        let p = scaled_path(&env, &traj, 25).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), vec![2.0 / 5.0, 1.0]);
        assert_eq!(p.span(), 50);
        let xt = run_walk(&env, Clock::X, 0, 5.0, 1, 0).unwrap();
        assert!(scaled_path(&env, &xt, 4).is_err());
    }

    #[test]
    fn zero_radius_exit_is_first_holding() {
        let g = Geometry::new(2, 8).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 2).unwrap();
        let w = Walker::new(&env);
        let mut a = rng::stream(5, domain::EXIT, 0);
        let mut b = a.clone();
        let tau = w.exit_time(4, 0, &mut a);
        let h = w.holding(Clock::Y, 4, &mut b);
        assert_eq!(tau, h);
        assert!(exit_time(&env, 0, 4, 1, 0).is_err());
    }

    #[test]
    fn exit_time_matches_linear_system() {
        let g = Geometry::new(2, 32).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let exact = mean_exit_time_exact(&env, 0, 8).unwrap();
        let u0 = exact.iter().find(|e| e.0 == 0).unwrap().1;
        let taus = exit_times(&env, 0, 8, 10_000, 11).unwrap();
        let (m, v) = mean_var(&taus);
        assert!((m - u0).abs() <= 3.0 * (v / 1e4).sqrt(), "{m} vs {u0}");
        let u16 = mean_exit_time_exact(&env, 0, 15).unwrap();
        let u16 = u16.iter().find(|e| e.0 == 0).unwrap().1;
        let ratio = u16 / u0;
        assert!((3.0..=5.0).contains(&ratio));
    }

    #[test]
    fn time_change_ratio_basics() {
        let g = Geometry::new(2, 8).unwrap();
        let env = constant(&g, 1.0).unwrap();
        let t = run_walk(&env, Clock::Y, 0, 1e4, 3, 0).unwrap();
        let r = time_change_ratio(&t, 1e4).unwrap();
        assert!((r - 1.0).abs() < 0.05);
        let first = t.times[0];
        assert_eq!(time_change_ratio(&t, first / 2.0).unwrap(), 0.0);
        assert!(time_change_ratio(&t, 2e4).is_err());
    }

    /// Per-site batch-means standard errors of occupation fractions, with
    /// `batches` consecutive blocks of the same chain.
    fn batch_fractions(
        w: &Walker,
        clock: Clock,
        batches: usize,
        per_batch: f64,
        seed: u64,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = w.env().site_count();
        let mut rng = rng::stream(seed, domain::WALK, 0);
        let mut x = 0;
        let mut frac = vec![vec![0.0; batches]; n];
        for b in 0..batches {
            let mut occ = vec![0.0; n];
            let mut t = 0.0;
            while t < per_batch {
                let h = match clock {
                    Clock::Discrete => 1.0,
                    _ => w.holding(clock, x, &mut rng),
                };
                occ[x] += h.min(per_batch - t);
                t += h;
                x = w.step(x, &mut rng);
            }
            for (s, o) in occ.iter().enumerate() {
                frac[s][b] = o / per_batch;
            }
        }
        frac.iter()
            .map(|f| {
                let (m, v) = mean_var(f);
                (m, (v / batches as f64).sqrt())
            })
            .unzip()
    }

    #[test]
    fn jump_chain_occupation_proportional_to_pi() {
        let g = Geometry::new(2, 8).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 8).unwrap();
        let w = Walker::new(&env);
        let total: f64 = env.pi().iter().sum();
        let (m, se) = batch_fractions(&w, Clock::Discrete, 100, 1e4, 21);
        for x in 0..g.site_count() {
            let target = env.pi()[x] / total;
            assert!((m[x] - target).abs() <= 3.0 * se[x], "site {x}: {} vs {target}", m[x]);
        }
    }

    #[test]
    fn y_occupation_proportional_to_nu() {
        let g = Geometry::new(2, 8).unwrap();
        let env = crate::env::sample_lrp(&crate::env::LrpParams { s: 3.0, beta: 1.0 }, &g, 4).unwrap();
        assert!(!env.is_nearest_neighbor());
        let w = Walker::new(&env);
        let total: f64 = env.nu().iter().sum();
        let (m, se) = batch_fractions(&w, Clock::Y, 100, 1e4, 22);
        for x in 0..g.site_count() {
            let target = env.nu()[x] / total;
            assert!((m[x] - target).abs() <= 3.0 * se[x], "site {x}: {} vs {target}", m[x]);
        }
    }

    /// The jump chain is stationary for `pi`, so the ergodic average of
    /// `1/pi(Z_k)` tends to `1 / mean(pi)`.
    #[test]
    fn ergodic_average_of_inverse_pi() {
        let g = Geometry::new(2, 16).unwrap();
        let env = sample_iid_nn(&Marginal::Uniform { lo: 1.0, hi: 2.0 }, &g, 9).unwrap();
        let w = Walker::new(&env);
        let mut rng = rng::stream(23, domain::WALK, 0);
        let steps = 1_000_000;
        let mut x = 0;
        let mut acc = 0.0;
        for _ in 0..steps {
            x = w.step(x, &mut rng);
            acc += 1.0 / env.pi()[x];
        }
        let avg = acc / steps as f64;
        let target = 1.0 / env.mean_pi();
        assert!((avg / target - 1.0).abs() < 0.05, "{avg} vs {target}");
    }
}
