//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every knob of every subcommand. Fields left `None` take the documented
/// default of the operation that reads them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[arg(skip)]
    pub command: Option<String>,

    /// Master seed (required; nothing is seeded from the clock).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Environment header written by `clab env`.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Allow nondeterministic summation order in parallel reductions.
    #[arg(long, default_missing_value = "true", num_args = 0..=1)]
    pub fast_reduce: Option<bool>,

    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub side: Option<usize>,

    /// constant | iid-nn | lrp | stable-like | trap | planted-trap | planted-long-edge
    #[arg(long)]
    pub sampler: Option<String>,
    /// Nearest-neighbour law for iid-nn: constant | uniform | two-point | lognormal.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub value: Option<f64>,
    #[arg(long)]
    pub lo: Option<f64>,
    #[arg(long)]
    pub hi: Option<f64>,
    #[arg(long)]
    pub p_high: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub log_sigma: Option<f64>,
    /// Decay exponent of lrp / stable-like.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub max_range: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Scale index of a planted trap.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub trap_p: Option<f64>,
    #[arg(long)]
    pub trap_q: Option<f64>,
    #[arg(long)]
    pub trap_p_prime: Option<f64>,
    #[arg(long)]
    pub trap_q_prime: Option<f64>,
    /// Site coordinates, comma separated (planted trap base, long-edge endpoint).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target: Option<Vec<i64>>,
    /// Moment exponents of the environment report.
    #[arg(long)]
    pub moment_p: Option<f64>,
    #[arg(long)]
    pub moment_q: Option<f64>,

    /// discrete | x | y
    #[arg(long)]
    pub clock: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Diffusive scale of the rescaled path.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Option<Vec<i64>>,

    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,

    /// bounds | sobolev | nash | heat-kernel | exit | qip | time-change | trap | lrp-events
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Test functions per sample set (sobolev, nash).
    #[arg(long)]
    pub samples: Option<usize>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overlaid(mut self, flags: &RunConfig) -> Self {
        let base = &mut self;
        overlay!(base, flags;
            command, seed, out, env, fast_reduce, d, side, sampler, law, value, lo, hi, p_high,
            mu, log_sigma, s, beta, theta, max_range, k_max, k, trap_p, trap_q, trap_p_prime,
            trap_q_prime, target, moment_p, moment_q, clock, horizon, trajectories, n, start,
            tol, max_iter, suite, radii, kappas, eps, times, trials, gamma, samples,
        );
        self
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("--seed is required (no clock-based seeding)".into()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn env_path(&self) -> Result<&Path, CliError> {
        self.env
            .as_deref()
            .ok_or_else(|| CliError::Usage("--env is required".into()))
    }

    pub fn fast_reduce(&self) -> bool {
        self.fast_reduce.unwrap_or(false)
    }
}

pub fn require<T: Clone>(v: &Option<T>, flag: &str) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: RunConfig =
            serde_json::from_str(r#"{"seed": 3, "side": 16, "sampler": "lrp"}"#).unwrap();
        let flags = RunConfig {
            side: Some(32),
            ..Default::default()
        };
        let c = file.overlaid(&flags);
        assert_eq!(c.seed, Some(3));
        assert_eq!(c.side, Some(32));
        assert_eq!(c.sampler.as_deref(), Some("lrp"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
    }
}
