//! Simulation runs and their on-disk layout.
//!
//! A run directory holds `config.toml` (canonical echo), `manifest.txt`,
//! `snapshots.csv` (index, time, file), `snapshots/snap_NNNN.csv` and `report.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::initial::initial_field;
use crate::error::{Error, Result};
use crate::functionals::{functional_report, FunctionalReport};
use crate::grid::{fmt17, GridField};
use crate::solver::advance_to;
use crate::system::SystemModel;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub epsilon: f64,
    pub snapshots: Vec<GridField>,
    pub report: FunctionalReport,
}

/// Integrates one `ε` member and returns the snapshots at the configured times.
pub fn simulate(model: &SystemModel, cfg: &ExperimentConfig, epsilon: f64) -> Result<Vec<GridField>> {
    let solver = cfg.solver_config(epsilon);
    solver.validate()?;
    let mut field = initial_field(cfg, model.dim(), epsilon)?;
    let mut out = vec![field.clone()];
    for t in cfg.snapshot_times().into_iter().skip(1) {
        advance_to(model, &mut field, &solver, t)?;
        out.push(field.clone());
    }
    Ok(out)
}

fn manifest(cfg: &ExperimentConfig, epsilon: f64, snapshots: usize) -> String {
    format!(
        "program = vvlab {}\nconfig_sha256 = {}\nsystem = {}\nepsilon = {}\ncells = {}\nboundary = {}\nmode = {}\nsnapshots = {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.hash(),
        cfg.system.name,
        fmt17(epsilon),
        cfg.grid.cells,
        cfg.grid.boundary,
        cfg.decomposition.mode,
        snapshots
    )
}

/// Writes snapshots, manifest and config echo into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, epsilon: f64, snapshots: &[GridField]) -> Result<()> {
    fs::create_dir_all(dir.join("snapshots"))?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    fs::write(dir.join("manifest.txt"), manifest(cfg, epsilon, snapshots.len()))?;
    let mut index = String::from("index,t,file\n");
    for (k, f) in snapshots.iter().enumerate() {
        let name = format!("snapshots/snap_{k:04}.csv");
        f.write_snapshot(&dir.join(&name))?;
        index.push_str(&format!("{k},{},{name}\n", fmt17(f.time)));
    }
    fs::write(dir.join("snapshots.csv"), index)?;
    Ok(())
}

/// A run directory read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedRun {
    pub config: ExperimentConfig,
    pub epsilon: f64,
    pub snapshots: Vec<GridField>,
}

pub fn load_run(dir: &Path) -> Result<LoadedRun> {
    let config = ExperimentConfig::parse(&fs::read_to_string(dir.join("config.toml"))?)?;
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let epsilon = manifest
        .lines()
        .find_map(|l| l.strip_prefix("epsilon = "))
        .and_then(|v| v.trim().parse::<f64>().ok())
        .ok_or_else(|| Error::InvalidInput("manifest lacks epsilon".into()))?;
    let boundary = config.boundary()?;
    let index = fs::read_to_string(dir.join("snapshots.csv"))?;
    let mut snapshots = Vec::new();
    for (k, line) in index.lines().enumerate().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Config { line: k + 1, msg: "expected index,t,file".into() });
        }
        let t: f64 = parts[1].parse().map_err(|_| Error::Config { line: k + 1, msg: "bad time".into() })?;
        let mut f = GridField::read_snapshot(&dir.join(parts[2]), boundary)?;
        f.time = t;
        snapshots.push(f);
    }
    Ok(LoadedRun { config, epsilon, snapshots })
}

/// Directory of the `k`-th member of the `ε` list.
pub fn member_dir(cfg: &ExperimentConfig, k: usize) -> PathBuf {
    cfg.output.dir.join(format!("eps_{k}"))
}

/// Runs every `ε` in the configuration (one thread each), writing
/// `output.dir/eps_k/` with snapshots and `report.csv`.
pub fn run_simulation(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let params = cfg.cutoff_params();
    let mode = cfg.mode()?;
    let results: Vec<Result<RunOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .run
            .epsilon
            .iter()
            .enumerate()
            .map(|(k, &eps)| {
                let params = params.clone();
                scope.spawn(move || -> Result<RunOutcome> {
                    let model = cfg.model()?;
                    let snapshots = simulate(&model, cfg, eps)?;
                    let dir = member_dir(cfg, k);
                    write_run(&dir, cfg, eps, &snapshots)?;
                    let report = functional_report(&model, &snapshots, eps, &params, mode, cfg.decomposition.dissipation_tol)?;
                    fs::write(dir.join("report.csv"), report.to_csv())?;
                    Ok(RunOutcome { dir, epsilon: eps, snapshots, report })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    results.into_iter().collect()
}

/// Recomputes `report.csv` for an existing run directory.
pub fn diagnose(dir: &Path) -> Result<FunctionalReport> {
    let run = load_run(dir)?;
    let model = run.config.model()?;
    functional_report(
        &model,
        &run.snapshots,
        run.epsilon,
        &run.config.cutoff_params(),
        run.config.mode()?,
        run.config.decomposition.dissipation_tol,
    )
}
