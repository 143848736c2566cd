//! Experiment configuration: a TOML document with `[system]`, `[initial]`,
//! `[grid]`, `[run]`, `[decomposition]` and `[output]` tables.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::cutoff::CutoffParams;
use crate::decomposition::DecompositionMode;
use crate::error::{Error, Result};
use crate::grid::Boundary;
use crate::solver::SolverConfig;
use crate::spectral::real_eigenvalues;
use crate::system::{builtin_system, SharedFrameSpec, StateBox, SystemModel};

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Builtin,
    /// Constant `A`, `B` given row-major.
    Constant,
    /// Shared eigenframe with polynomial eigenvalues.
    SharedFrame,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    #[serde(default)]
    pub kind: SystemKind,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub frame: Option<Vec<f64>>,
    pub lambda_polys: Option<Vec<Vec<f64>>>,
    pub mu_polys: Option<Vec<Vec<f64>>>,
    /// Half-width of the state box `[-w, w]^n` for custom systems.
    pub half_width: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `u_left` to `u_right` through a tanh ramp.
    Riemann,
    /// `state + amplitude·exp(-(x-center)²/width²)`.
    Gaussian,
    /// `state + amplitude·sin(wavenumber·x)`.
    Sine,
    Constant,
    /// Sampled profile file (`xi,u1..un,...`) evaluated at `(x-center)/ε`.
    Profile,
    /// `state` plus a random smooth perturbation drawn from `seed`.
    Noise,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub state: Option<Vec<f64>>,
    pub u_left: Option<Vec<f64>>,
    pub u_right: Option<Vec<f64>>,
    /// Ramp width (Riemann, default `4h`) or bump width (Gaussian, default 1).
    pub width: Option<f64>,
    pub amplitude: Option<Vec<f64>>,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub wavenumber: f64,
    pub file: Option<PathBuf>,
    /// Number of random modes (noise).
    #[serde(default = "default_modes")]
    pub modes: usize,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub xmin: f64,
    pub xmax: f64,
    pub cells: usize,
    #[serde(default = "default_boundary")]
    pub boundary: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "one")]
    pub t_end: f64,
    /// Strictly decreasing viscosity scales; one run per entry.
    #[serde(default = "default_eps")]
    pub epsilon: Vec<f64>,
    /// Equally spaced snapshots over `(0, t_end]` when `snapshot_times` is absent.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    pub snapshot_times: Option<Vec<f64>>,
    #[serde(default = "default_cfl")]
    pub cfl_advective: f64,
    #[serde(default = "default_cfl")]
    pub cfl_parabolic: f64,
    #[serde(default)]
    pub conservative: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tv_guard")]
    pub tv_guard: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            epsilon: default_eps(),
            snapshots: default_snapshots(),
            snapshot_times: None,
            cfl_advective: default_cfl(),
            cfl_parabolic: default_cfl(),
            conservative: false,
            seed: 0,
            tv_guard: default_tv_guard(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSection {
    #[serde(default = "default_mode")]
    pub mode: String,
    pub delta1: Option<f64>,
    pub n_exp: Option<u32>,
    pub epsilon_cut: Option<f64>,
    pub v_floor: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub data_threshold: Option<f64>,
    /// Relative tolerance of the per-step dissipation checks.
    #[serde(default = "default_diss_tol")]
    pub dissipation_tol: f64,
}

impl Default for DecompositionSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            delta1: None,
            n_exp: None,
            epsilon_cut: None,
            v_floor: None,
            newton_tol: None,
            newton_max_iter: None,
            data_threshold: None,
            dissipation_tol: default_diss_tol(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

fn one() -> f64 {
    1.0
}
fn default_modes() -> usize {
    4
}
fn default_boundary() -> String {
    "extrapolate".into()
}
fn default_eps() -> Vec<f64> {
    vec![1.0]
}
fn default_snapshots() -> usize {
    10
}
fn default_cfl() -> f64 {
    0.4
}
fn default_tv_guard() -> f64 {
    0.5
}
fn default_mode() -> String {
    "eigenbasis".into()
}
fn default_diss_tol() -> f64 {
    0.05
}
fn default_dir() -> PathBuf {
    PathBuf::from("runs/out")
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub initial: InitialSection,
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub decomposition: DecompositionSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        // profile files are resolved relative to the config file
        if let (Some(f), Some(dir)) = (cfg.initial.file.as_mut(), path.parent()) {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let g = &self.grid;
        if !(g.xmax > g.xmin) {
            return bad("grid: xmax must exceed xmin".into());
        }
        self.boundary()?;
        self.mode()?;
        let r = &self.run;
        if !(r.t_end > 0.0) {
            return bad("run: t_end must be positive".into());
        }
        if r.epsilon.is_empty() || r.epsilon.iter().any(|e| !(*e > 0.0)) {
            return bad("run: epsilon entries must be positive".into());
        }
        if r.epsilon.windows(2).any(|w| w[1] >= w[0]) {
            return bad("run: epsilon list must be strictly decreasing".into());
        }
        if let Some(ts) = &r.snapshot_times {
            if ts.iter().any(|t| !(*t >= 0.0 && *t <= r.t_end)) {
                return bad("run: snapshot times must lie in [0, t_end]".into());
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return bad("run: snapshot times must be increasing".into());
            }
        } else if r.snapshots == 0 {
            return bad("run: snapshots must be positive".into());
        }
        if !(r.tv_guard > 0.0) {
            return bad("run: tv_guard must be positive".into());
        }
        self.solver_config(r.epsilon[0]).validate()
    }

    pub fn boundary(&self) -> Result<Boundary> {
        self.grid.boundary.parse()
    }

    pub fn mode(&self) -> Result<DecompositionMode> {
        self.decomposition.mode.parse()
    }

    pub fn h(&self) -> f64 {
        (self.grid.xmax - self.grid.xmin) / self.grid.cells as f64
    }

    pub fn cutoff_params(&self) -> CutoffParams {
        let d = &self.decomposition;
        let base = CutoffParams::default();
        CutoffParams {
            delta1: d.delta1.unwrap_or(base.delta1),
            n_exp: d.n_exp.unwrap_or(base.n_exp),
            epsilon_cut: d.epsilon_cut.unwrap_or(base.epsilon_cut),
            v_floor: d.v_floor.unwrap_or(base.v_floor),
            newton_tol: d.newton_tol.unwrap_or(base.newton_tol),
            newton_max_iter: d.newton_max_iter.unwrap_or(base.newton_max_iter),
            data_threshold: d.data_threshold.or(base.data_threshold),
        }
    }

    pub fn solver_config(&self, epsilon: f64) -> SolverConfig {
        SolverConfig {
            cfl_advective: self.run.cfl_advective,
            cfl_parabolic: self.run.cfl_parabolic,
            epsilon,
            t_end: self.run.t_end,
            snapshot_stride: self.run.snapshots,
            conservative: self.run.conservative,
        }
    }

    /// Output times including `t = 0`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut ts = vec![0.0];
        match &self.run.snapshot_times {
            Some(list) => ts.extend(list.iter().copied().filter(|t| *t > 0.0)),
            None => {
                let k = self.run.snapshots;
                ts.extend((1..=k).map(|s| self.run.t_end * s as f64 / k as f64));
            }
        }
        ts
    }

    pub fn model(&self) -> Result<SystemModel> {
        build_model(&self.system)
    }
}

fn square(name: &str, data: &Option<Vec<f64>>) -> Result<DMatrix<f64>> {
    let v = data.as_ref().ok_or_else(|| Error::InvalidInput(format!("system: `{name}` is required")))?;
    let n = (v.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != v.len() {
        return Err(Error::InvalidInput(format!("system: `{name}` must hold n² entries")));
    }
    Ok(DMatrix::from_row_slice(n, n, v))
}

pub fn build_model(s: &SystemSection) -> Result<SystemModel> {
    match s.kind {
        SystemKind::Builtin => builtin_system(&s.name),
        SystemKind::Constant => {
            let a = square("a", &s.a)?;
            let b = square("b", &s.b)?;
            if a.nrows() != b.nrows() {
                return Err(Error::InvalidInput("system: `a` and `b` differ in size".into()));
            }
            let n = a.nrows();
            // fall back to 0.99 of the actual constants; degenerate or
            // complex spectra are left for the hypothesis check to report
            let c0 = s.c0.unwrap_or_else(|| match real_eigenvalues(&a) {
                Ok(l) if n > 1 => 0.99 * l.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min),
                _ => f64::INFINITY,
            });
            let c1 = s.c1.unwrap_or_else(|| real_eigenvalues(&b).map_or(1.0, |m| 0.99 * m[0]));
            let c0 = if c0 > 0.0 { c0 } else { f64::MIN_POSITIVE };
            let c1 = if c1 > 0.0 { c1 } else { f64::MIN_POSITIVE };
            SystemModel::constant(&s.name, a, b, StateBox::cube(n, s.half_width.unwrap_or(1.0)), c0, c1)
        }
        SystemKind::SharedFrame => {
            let frame = square("frame", &s.frame)?;
            let n = frame.nrows();
            SharedFrameSpec {
                name: s.name.clone(),
                frame,
                lambda_polys: s.lambda_polys.clone().ok_or_else(|| Error::InvalidInput("system: `lambda_polys` is required".into()))?,
                mu_polys: s.mu_polys.clone().ok_or_else(|| Error::InvalidInput("system: `mu_polys` is required".into()))?,
                state_box: StateBox::cube(n, s.half_width.unwrap_or(0.2)),
                reference_state: None,
                c0_claimed: s.c0,
                c1_claimed: s.c1,
            }
            .into_model()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
name = "burgers"

[initial]
kind = "riemann"
u_left = [1.0]
u_right = [-1.0]

[grid]
xmin = -5.0
xmax = 5.0
cells = 200
"#;

    #[test]
    fn minimal_config_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.run.epsilon, vec![1.0]);
        assert_eq!(c.snapshot_times().len(), 11);
        assert_eq!(c.boundary().unwrap(), Boundary::ConstantExtrapolation);
        assert_eq!(c.mode().unwrap(), DecompositionMode::Eigenbasis);
        assert!((c.h() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = format!("{MINIMAL}\n[run]\nbogus = 3\n");
        match ExperimentConfig::parse(&text) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, text.lines().position(|l| l.starts_with("bogus")).unwrap() + 1);
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn epsilon_must_decrease() {
        let text = format!("{MINIMAL}\n[run]\nepsilon = [0.1, 0.2]\n");
        assert!(matches!(ExperimentConfig::parse(&text), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn snapshot_times_within_range() {
        let text = format!("{MINIMAL}\n[run]\nt_end = 1.0\nsnapshot_times = [0.5, 2.0]\n");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.grid.cells = 201;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn custom_constant_system() {
        let s = SystemSection {
            name: "diag".into(),
            kind: SystemKind::Constant,
            a: Some(vec![1.0, 0.0, 0.0, 2.0]),
            b: Some(vec![1.0, 0.0, 0.0, 3.0]),
            frame: None,
            lambda_polys: None,
            mu_polys: None,
            half_width: None,
            c0: None,
            c1: None,
        };
        let m = build_model(&s).unwrap();
        assert_eq!(m.dim(), 2);
        assert!((m.c0_claimed() - 0.99).abs() < 1e-15);
    }
}
