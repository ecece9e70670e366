use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One evaluated instance of an inequality `lhs <= rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInstance {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl BoundInstance {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            label: label.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }
}

/// Outcome of checking one inequality over many instances.
///
/// For bounds with explicit constants `pass` means every margin is
/// nonnegative. For bounds whose constant is only known to exist,
/// `fitted_constant` holds the largest observed `lhs / shape` and `rhs` is
/// the shape scaled by whichever constant the check was asked to validate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub instances: Vec<BoundInstance>,
    pub fitted_constant: Option<f64>,
    /// Auxiliary numbers (regression slopes, window parameters, ...).
    pub extras: BTreeMap<String, f64>,
    pub pass: bool,
}

impl BoundCheck {
    /// All margins must be nonnegative.
    pub fn exact(name: impl Into<String>, instances: Vec<BoundInstance>) -> Self {
        let pass = !instances.is_empty() && instances.iter().all(|i| i.margin >= 0.0);
        Self {
            name: name.into(),
            instances,
            fitted_constant: None,
            extras: BTreeMap::new(),
            pass,
        }
    }

    /// Ratios `lhs / shape` from `(label, lhs, shape)` triples, reported with
    /// `rhs = constant * shape`. Without a constant the fitted maximum is used,
    /// so the check passes trivially and only records the fit.
    pub fn fitted(
        name: impl Into<String>,
        triples: &[(String, f64, f64)],
        constant: Option<f64>,
    ) -> Self {
        let fit = max_ratio(triples);
        let c = constant.unwrap_or(fit);
        let instances: Vec<_> = triples
            .iter()
            .map(|(l, lhs, shape)| BoundInstance::new(l.clone(), *lhs, c * shape))
            .collect();
        // the fitted constant reproduces its own maximum only up to rounding
        let pass = fit.is_finite() && instances.iter().all(|i| i.margin >= -1e-12 * i.rhs.abs());
        Self {
            name: name.into(),
            instances,
            fitted_constant: Some(fit),
            extras: BTreeMap::new(),
            pass,
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    pub fn worst_margin(&self) -> f64 {
        self.instances
            .iter()
            .map(|i| i.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Largest `lhs / shape`, skipping instances where both vanish.
pub fn max_ratio(triples: &[(String, f64, f64)]) -> f64 {
    triples
        .iter()
        .filter(|t| !(t.1 == 0.0 && t.2 == 0.0))
        .map(|t| if t.2 == 0.0 { f64::INFINITY } else { t.1 / t.2 })
        .fold(0.0, f64::max)
}

/// Fit-then-validate: the constant fitted on set A must bound set B after
/// doubling, and the two fits must agree within a factor of 2.
pub fn fit_then_validate(
    name: impl Into<String>,
    set_a: &[(String, f64, f64)],
    set_b: &[(String, f64, f64)],
) -> BoundCheck {
    let fit_a = max_ratio(set_a);
    let fit_b = max_ratio(set_b);
    let mut check = BoundCheck::fitted(name, set_b, Some(2.0 * fit_a));
    check.fitted_constant = Some(fit_a);
    check.pass = check.pass && fit_a > 0.0 && fit_a <= 2.0 * fit_b;
    check.with_extra("fit_a", fit_a).with_extra("fit_b", fit_b)
}

/// Every check of a verification run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<BoundCheck>,
}

impl VerificationReport {
    pub fn push(&mut self, check: BoundCheck) {
        self.checks.push(check);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.as_str())
            .collect()
    }

    /// JSON array of the checks.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.checks)?)
    }

    /// `name,instances,worst_margin,fitted_constant,pass` rows.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("name,instances,worst_margin,fitted_constant,pass\n");
        for c in &self.checks {
            let fitted = c.fitted_constant.map(|v| format!("{v:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:?},{},{}\n",
                c.name,
                c.instances.len(),
                c.worst_margin(),
                fitted,
                c.pass
            ));
        }
        out
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        std::fs::File::create(json_path)?.write_all(self.to_json()?.as_bytes())?;
        std::fs::File::create(csv_path)?.write_all(self.summary_csv().as_bytes())?;
        Ok(())
    }
}
