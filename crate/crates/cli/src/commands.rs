use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use clab_core::corrector::{covariance_sigma, solve_corrector, sublinearity_profile, SolverOptions};
use clab_core::env::{
    self, constant, moment_report, plant_long_edge, plant_trap, sample_iid_nn, sample_lrp,
    sample_stable_like, sample_trap, LrpParams, Marginal, StableLikeParams, TrapSpec,
};
use clab_core::walk::{run_walk, time_change_ratio, Clock, Trajectory};
use clab_core::{Environment, Geometry};

use crate::config::{require, RunConfig};
use crate::manifest::RunManifest;
use crate::CliError;

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<PathBuf, CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

/// Site index of `coords`, which must have one entry per axis.
pub fn site_at(g: &Geometry, coords: &[i64]) -> Result<usize, CliError> {
    if coords.len() != g.dim() {
        return Err(CliError::Usage(format!(
            "site {coords:?} needs {} coordinates",
            g.dim()
        )));
    }
    Ok(g.index_from_coords(coords))
}

pub fn load_env(c: &RunConfig) -> Result<(Environment, PathBuf), CliError> {
    let path = c.env_path()?;
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "environment {} does not exist",
            path.display()
        )));
    }
    Ok((env::load(path)?, path.to_path_buf()))
}

/// The header and its edge file, the inputs recorded in a manifest.
fn env_inputs(header: &Path) -> Vec<PathBuf> {
    let edges = header.with_extension("edges.csv");
    if edges.exists() {
        vec![header.to_path_buf(), edges]
    } else {
        vec![header.to_path_buf()]
    }
}

fn trap_spec(c: &RunConfig, d: usize) -> Result<TrapSpec, CliError> {
    Ok(TrapSpec::new(
        d,
        c.trap_p.unwrap_or(1.1),
        c.trap_q.unwrap_or(1.1),
        c.trap_p_prime.unwrap_or(1.2),
        c.trap_q_prime.unwrap_or(1.2),
        c.k_max.unwrap_or(3),
    )?)
}

fn marginal(c: &RunConfig) -> Result<Marginal, CliError> {
    let law = c.law.as_deref().unwrap_or("uniform");
    Ok(match law {
        "constant" => Marginal::Constant {
            value: c.value.unwrap_or(1.0),
        },
        "uniform" => Marginal::Uniform {
            lo: c.lo.unwrap_or(1.0),
            hi: c.hi.unwrap_or(2.0),
        },
        "two-point" => Marginal::TwoPoint {
            low: c.lo.unwrap_or(1.0),
            high: c.hi.unwrap_or(2.0),
            p_high: c.p_high.unwrap_or(0.5),
        },
        "lognormal" => Marginal::LogNormal {
            mu: c.mu.unwrap_or(0.0),
            sigma: c.log_sigma.unwrap_or(1.0),
        },
        other => return Err(CliError::Usage(format!("unknown conductance law {other:?}"))),
    })
}

#[derive(Serialize)]
struct TrapSummary {
    traps_per_scale: Vec<usize>,
    conflicts: usize,
}

pub fn env(c: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let seed = c.seed()?;
    let g = Geometry::new(require(&c.d, "d")?, require(&c.side, "side")?)?;
    let sampler = require(&c.sampler, "sampler")?;
    let out = c.out_dir();
    let mut trap_summary = None;
    let environment = match sampler.as_str() {
        "constant" => constant(&g, c.value.unwrap_or(1.0))?,
        "iid-nn" => sample_iid_nn(&marginal(c)?, &g, seed)?,
        "lrp" => sample_lrp(
            &LrpParams {
                s: c.s.unwrap_or(5.5),
                beta: c.beta.unwrap_or(1.0),
            },
            &g,
            seed,
        )?,
        "stable-like" => {
            let dflt = StableLikeParams::default();
            sample_stable_like(
                &StableLikeParams {
                    s: c.s.unwrap_or(dflt.s),
                    theta: c.theta.unwrap_or(dflt.theta),
                    max_range: c.max_range.unwrap_or(dflt.max_range),
                },
                &g,
                seed,
            )?
        }
        "trap" => {
            let spec = trap_spec(c, g.dim())?;
            let (e, trace) = sample_trap(&spec, &g, seed)?;
            let stats = trace.stats();
            trap_summary = Some(TrapSummary {
                traps_per_scale: stats.traps_per_scale[1..=spec.k_max()].to_vec(),
                conflicts: stats.conflicts,
            });
            e
        }
        "planted-trap" => {
            let spec = trap_spec(c, g.dim())?;
            let site = match &c.target {
                Some(t) => site_at(&g, t)?,
                None => g.origin(),
            };
            plant_trap(&spec, c.k.unwrap_or(spec.k_max()), site, &g)?
        }
        "planted-long-edge" => {
            // simple-random-walk base, edge from the origin to the target
            let base = sample_lrp(&LrpParams { s: c.s.unwrap_or(5.5), beta: 0.0 }, &g, seed)?;
            let y = site_at(&g, &require(&c.target, "target")?)?;
            plant_long_edge(&base, g.origin(), y)?
        }
        other => return Err(CliError::Usage(format!("unknown sampler {other:?}"))),
    };
    let moments = moment_report(
        &environment,
        c.moment_p.unwrap_or(2.0),
        c.moment_q.unwrap_or(2.0),
    )?;
    create_dir(&out)?;
    let (header, edges) = env::save(&environment, &out, "env")?;
    let report = write_json(&out.join("moments.json"), &moments)?;
    let mut outputs = vec![header, edges, report];
    if let Some(summary) = trap_summary {
        outputs.push(write_json(&out.join("trap_stats.json"), &summary)?);
    }
    RunManifest::new(c.clone(), &[], &outputs, start.elapsed().as_secs_f64(), None)?.write(&out)?;
    println!(
        "{} edges on {} sites written to {}",
        environment.edge_count(),
        environment.site_count(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct WalkRecord {
    id: u64,
    jumps: usize,
    final_site: usize,
    /// Minimal-image displacement of the final site from the start.
    displacement: Vec<i64>,
    /// Jumps per unit time over `[0, horizon]`.
    jump_rate: f64,
}

#[derive(Serialize)]
struct WalkSummary {
    clock: Clock,
    horizon: f64,
    trajectories: usize,
    mean_jump_rate: f64,
    /// `avg pi / avg nu`, the long-run jump rate of `Y`.
    time_change_target: f64,
    records: Vec<WalkRecord>,
}

fn parse_clock(c: &RunConfig) -> Result<Clock, CliError> {
    match c.clock.as_deref().unwrap_or("discrete") {
        "discrete" => Ok(Clock::Discrete),
        "x" => Ok(Clock::X),
        "y" => Ok(Clock::Y),
        other => Err(CliError::Usage(format!("unknown clock {other:?}"))),
    }
}

/// Mean of `values`, summed in index order unless `fast` allows any order.
pub fn reduce_mean(values: &[f64], fast: bool) -> f64 {
    let total: f64 = if fast {
        values.par_iter().sum()
    } else {
        values.iter().sum()
    };
    total / values.len() as f64
}

pub fn walk(c: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let seed = c.seed()?;
    let (environment, env_path) = load_env(c)?;
    let g = environment.geometry();
    let clock = parse_clock(c)?;
    let horizon = c.horizon.unwrap_or(1000.0);
    let count = c.trajectories.unwrap_or(1);
    if count == 0 {
        return Err(CliError::Usage("--trajectories must be positive".into()));
    }
    let x0 = match &c.start {
        Some(s) => site_at(g, s)?,
        None => g.origin(),
    };
    let trajs: Vec<Trajectory> = (0..count as u64)
        .into_par_iter()
        .map(|id| run_walk(&environment, clock, x0, horizon, seed, id))
        .collect::<Result<_, _>>()?;
    let out = c.out_dir();
    create_dir(&out)?;
    let width = (count - 1).to_string().len();
    let mut outputs = Vec::with_capacity(count + 1);
    let mut records = Vec::with_capacity(count);
    for (id, t) in trajs.iter().enumerate() {
        outputs.push(write_file(
            &out.join(format!("trajectory_{id:0width$}.csv")),
            &t.to_csv(),
        )?);
        let last = t.position_at(horizon);
        records.push(WalkRecord {
            id: id as u64,
            jumps: t.jumps_by(horizon),
            final_site: last,
            displacement: g.displacement_between(x0, last).vec,
            jump_rate: time_change_ratio(t, horizon)?,
        });
    }
    let rates: Vec<f64> = records.iter().map(|r| r.jump_rate).collect();
    let summary = WalkSummary {
        clock,
        horizon,
        trajectories: count,
        mean_jump_rate: reduce_mean(&rates, c.fast_reduce()),
        time_change_target: environment.mean_pi() / environment.mean_nu(),
        records,
    };
    outputs.push(write_json(&out.join("walk_stats.json"), &summary)?);
    RunManifest::new(
        c.clone(),
        &env_inputs(&env_path),
        &outputs,
        start.elapsed().as_secs_f64(),
        None,
    )?
    .write(&out)?;
    println!(
        "{count} trajectories, mean jump rate {:.6}",
        summary.mean_jump_rate
    );
    Ok(())
}

#[derive(Serialize)]
struct CorrectorSummary {
    sigma: Vec<Vec<f64>>,
    residual: f64,
    scale: f64,
    iterations: Vec<usize>,
}

pub fn corrector(c: &RunConfig) -> Result<(), CliError> {
    let start = Instant::now();
    c.seed()?;
    let (environment, env_path) = load_env(c)?;
    let opts = SolverOptions {
        tol: c.tol.unwrap_or(SolverOptions::default().tol),
        max_iter: c.max_iter,
    };
    let chi = solve_corrector(&environment, &opts)?;
    let sigma = covariance_sigma(&environment, &chi)?;
    let out = c.out_dir();
    create_dir(&out)?;
    let d = chi.d;
    let mut csv = String::from("site_index");
    for i in 1..=d {
        csv.push_str(&format!(",chi_{i}"));
    }
    csv.push('\n');
    for x in 0..chi.sites {
        csv.push_str(&x.to_string());
        for v in chi.at(x) {
            csv.push_str(&format!(",{v:?}"));
        }
        csv.push('\n');
    }
    let mut outputs = vec![
        write_file(&out.join("chi.csv"), &csv)?,
        write_json(
            &out.join("sigma.json"),
            &CorrectorSummary {
                sigma: sigma.rows(),
                residual: chi.residual,
                scale: chi.scale,
                iterations: chi.iterations.clone(),
            },
        )?,
    ];
    if let Some(radii) = &c.radii {
        let profile = sublinearity_profile(&environment, &chi, radii, &[0.1, 0.05, 0.01])?;
        outputs.push(write_json(&out.join("sublinearity.json"), &profile)?);
    }
    RunManifest::new(
        c.clone(),
        &env_inputs(&env_path),
        &outputs,
        start.elapsed().as_secs_f64(),
        None,
    )?
    .write(&out)?;
    for row in sigma.rows() {
        println!("{}", row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
