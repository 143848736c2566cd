//! Preflight: structural hypotheses of the system plus small-data guards.

use std::fmt;

use super::config::ExperimentConfig;
use super::initial::initial_field;
use crate::error::{Error, Result};
use crate::functionals::tv;
use crate::system::{check_hypotheses, HypothesisReport};

#[derive(Clone, Debug)]
pub struct GateReport {
    pub hypotheses: Option<HypothesisReport>,
    pub tv0: f64,
    pub tv_guard: f64,
    pub data_in_box: bool,
    pub failures: Vec<String>,
}

impl GateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for GateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.hypotheses {
            writeln!(f, "{h}")?;
        }
        writeln!(f, "TV(u0)             {:.6e} (guard {:.3e})", self.tv0, self.tv_guard)?;
        writeln!(f, "data in box        {}", self.data_in_box)?;
        for fail in &self.failures {
            writeln!(f, "failure: {fail}")?;
        }
        write!(f, "gate               {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

/// Samples per axis giving about 10⁴ box samples in dimension `n`.
pub fn samples_per_axis(n: usize) -> usize {
    ((1e4f64).powf(1.0 / n as f64).round() as usize).max(2)
}

/// Runs every check and collects failures without erroring.
pub fn gate_report(cfg: &ExperimentConfig) -> Result<GateReport> {
    let model = cfg.model()?;
    let mut failures = Vec::new();
    let hypotheses = match check_hypotheses(&model, samples_per_axis(model.dim())) {
        Ok(r) => {
            failures.extend(r.failures());
            Some(r)
        }
        Err(e) => {
            failures.push(e.to_string());
            None
        }
    };
    let u0 = initial_field(cfg, model.dim(), cfg.run.epsilon[0])?;
    let tv0 = tv(&u0).1;
    if tv0 > cfg.run.tv_guard {
        failures.push(format!("TV(u0) = {tv0:.6e} exceeds tv_guard {:.3e}", cfg.run.tv_guard));
    }
    let data_in_box = (0..u0.cells()).all(|j| model.state_box().contains(u0.state(j)));
    if !data_in_box {
        failures.push("initial data leave the state box".into());
    }
    Ok(GateReport { hypotheses, tv0, tv_guard: cfg.run.tv_guard, data_in_box, failures })
}

/// Like [`gate_report`] but fails with `HypothesisFailed` listing every failure.
pub fn hypothesis_gate(cfg: &ExperimentConfig) -> Result<GateReport> {
    let r = gate_report(cfg)?;
    if r.passed() {
        Ok(r)
    } else {
        Err(Error::HypothesisFailed(r.failures.join("; ")))
    }
}
