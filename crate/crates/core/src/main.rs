use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use vvlab::decomposition::{decompose_field, effective_fluxes, CutoffParams, DecompositionMode};
use vvlab::experiments::{
    bv_check, default_bv_guard, diagnose, eps_sweep, gate_report, l1_continuity_fit, load_run, run_simulation,
    smoothing_check, ExperimentConfig,
};
use vvlab::functionals::FunctionalReport;
use vvlab::grid::{fmt17, Boundary, GridField};
use vvlab::solver::compute_ut;
use vvlab::system::{builtin_system, check_hypotheses, BUILTIN_SYSTEMS};
use vvlab::travelling::{profile_conservative, rh_speed, verify_profile};
use vvlab::{Error, Result};

#[derive(Parser)]
#[command(name = "vvlab", version, about = "Viscous hyperbolic systems with commuting viscosity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check structural hypotheses of a system, or the full preflight of a config.
    Check {
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Box samples per axis (default: about 10^4 samples in total).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run every epsilon of a config and write snapshots and report.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Launch even if the preflight fails.
        #[arg(long)]
        force: bool,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose one snapshot into wave amplitudes.
    Decompose {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        system: String,
        #[arg(long, default_value = "eigenbasis")]
        mode: DecompositionMode,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value = "extrapolate")]
        boundary: Boundary,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute the functional report of a run directory.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a viscous travelling-wave profile.
    Tw {
        #[arg(long)]
        system: String,
        /// Comma-separated left state.
        #[arg(long, allow_hyphen_values = true)]
        uminus: String,
        /// Comma-separated right state.
        #[arg(long, allow_hyphen_values = true)]
        uplus: String,
        /// Speed (default: Rankine-Hugoniot).
        #[arg(long, allow_hyphen_values = true)]
        sigma: Option<f64>,
        /// Half-width of the profile window.
        #[arg(long)]
        span: Option<f64>,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the parabolic smoothing exponent of a run.
    Smoothing {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        ta: Option<f64>,
        #[arg(long)]
        tb: Option<f64>,
    },
    /// Vanishing-viscosity sweep over the epsilon list of a config.
    SweepEps {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Summarise a run: BV ratios, L1 continuity fit, smoothing slopes, dissipation checks.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_state(s: &str) -> Result<DVector<f64>> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|p| p.trim().parse::<f64>()).collect();
    v.map(DVector::from_vec).map_err(|e| Error::InvalidInput(format!("bad state `{s}`: {e}")))
}

fn load_config(path: &Path, out: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(o) = out {
        cfg.output.dir = o;
    }
    Ok(cfg)
}

/// Returns `false` when the gate fails and `force` is off.
fn preflight(cfg: &ExperimentConfig, force: bool) -> Result<bool> {
    let g = gate_report(cfg)?;
    if g.passed() {
        return Ok(true);
    }
    eprintln!("{g}");
    if force {
        eprintln!("preflight failed; continuing because of --force");
        Ok(true)
    } else {
        eprintln!("preflight failed; rerun with --force to launch anyway");
        Ok(false)
    }
}

fn cmd_check(system: Option<String>, config: Option<PathBuf>, samples: Option<usize>) -> Result<bool> {
    if let Some(path) = config {
        let g = gate_report(&ExperimentConfig::load(&path)?)?;
        println!("{g}");
        return Ok(g.passed());
    }
    let names: Vec<String> = match system {
        Some(s) => vec![s],
        None => BUILTIN_SYSTEMS.iter().map(|s| s.to_string()).collect(),
    };
    let mut all = true;
    for name in names {
        let model = builtin_system(&name)?;
        let per_axis = samples.unwrap_or_else(|| vvlab::experiments::gate::samples_per_axis(model.dim()));
        let r = check_hypotheses(&model, per_axis)?;
        println!("[{name}]\n{r}\n");
        all &= r.passed();
    }
    Ok(all)
}

fn cmd_decompose(
    snapshot: &Path,
    system: &str,
    mode: DecompositionMode,
    epsilon: f64,
    boundary: Boundary,
    out: &Path,
) -> Result<()> {
    let model = builtin_system(system)?.with_viscosity_scale(epsilon);
    let field = GridField::read_snapshot(snapshot, boundary)?;
    let ut = compute_ut(&model, &field, 1.0);
    let params = CutoffParams::default();
    let c = decompose_field(&model, &field, &ut, &params, mode)?;
    let fl = effective_fluxes(&c, &params);
    let n = c.dim();
    let mut s = String::from("x");
    for p in ["v", "w", "sigma", "z", "zhat"] {
        for i in 1..=n {
            s.push_str(&format!(",{p}{i}"));
        }
    }
    s.push_str(",recon_residual\n");
    for j in 0..c.cells() {
        let mut row = vec![c.x(j)];
        for arr in [&c.v, &c.w, &c.sigma, &fl.z, &fl.zhat] {
            row.extend(arr.iter().map(|q| q[j]));
        }
        row.push(c.recon_residual[j]);
        let cells: Vec<String> = row.iter().map(|v| fmt17(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(out, s)?;
    println!("decomposed {} cells, max reconstruction residual {:.3e}", c.cells(), c.max_recon_residual());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_tw(
    system: &str,
    uminus: &str,
    uplus: &str,
    sigma: Option<f64>,
    span: Option<f64>,
    points: usize,
    out: &Path,
) -> Result<()> {
    let model = builtin_system(system)?;
    let um = parse_state(uminus)?;
    let up = parse_state(uplus)?;
    let sigma = match sigma {
        Some(s) => s,
        None if um == up => model.a(&um).trace() / model.dim() as f64,
        None => {
            let (s, res) = rh_speed(&model, &um, &up)?;
            println!("rankine-hugoniot speed {s:.16e} (residual {res:.3e})");
            s
        }
    };
    let p = profile_conservative(&model, &um, &up, sigma, span, points)?;
    fs::write(out, p.to_csv())?;
    let eig = verify_profile(&model, &p, false)?;
    println!("ode residual        {:.3e}", eig.ode_residual);
    println!("endpoint residuals  {:.3e} {:.3e}", eig.endpoint_minus, eig.endpoint_plus);
    println!("speed identity      {:.3e} (eigenbasis)", eig.identity_residual);
    if let Ok(tw) = verify_profile(&model, &p, true) {
        println!("speed identity      {:.3e} (travelling1)", tw.identity_residual);
    }
    Ok(())
}

fn cmd_report(run: &Path) -> Result<()> {
    let r = load_run(run)?;
    let n = r.snapshots.first().map_or(1, |f| f.dim());
    let bv = bv_check(&r.snapshots, default_bv_guard(n));
    println!("bv: max TV ratio {:.6e} (guard {:.2}){}", bv.max_ratio, bv.guard, if bv.exceeded { "  EXCEEDED" } else { "" });
    match l1_continuity_fit(&r.snapshots, r.epsilon) {
        Ok(f) => println!("l1 continuity: L2a {:.6e}  L2b {:.6e}  ({} pairs)", f.l2a, f.l2b, f.pairs),
        Err(e) => println!("l1 continuity: {e}"),
    }
    for k in [1, 2] {
        match smoothing_check(&r.snapshots, k, None) {
            Ok(f) => println!("smoothing k={k}: slope {:.4} (target {:.1}, deviation {:+.4})", f.slope, -0.5 * k as f64, f.deviation),
            Err(e) => println!("smoothing k={k}: {e}"),
        }
    }
    if let Ok(text) = fs::read_to_string(run.join("report.csv")) {
        let rep = FunctionalReport::from_csv(&text)?;
        for col in ["diss_Q_pass", "diss_A_pass"] {
            if let Some(v) = rep.column(col) {
                let steps = v.len().saturating_sub(1).max(1);
                let passed = v.iter().skip(1).filter(|x| **x == 1.0).count();
                println!("{col}: {passed}/{steps} steps");
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Check { system, config, samples } => cmd_check(system, config, samples),
        Command::Simulate { config, force, out } => {
            let cfg = load_config(&config, out)?;
            if !preflight(&cfg, force)? {
                return Ok(false);
            }
            for o in run_simulation(&cfg)? {
                println!("eps {:.6e}: {} snapshots -> {}", o.epsilon, o.snapshots.len(), o.dir.display());
            }
            Ok(true)
        }
        Command::Decompose { snapshot, system, mode, epsilon, boundary, out } => {
            cmd_decompose(&snapshot, &system, mode, epsilon, boundary, &out).map(|_| true)
        }
        Command::Diagnose { run, out } => {
            let rep = diagnose(&run)?;
            let path = out.unwrap_or_else(|| run.join("report.csv"));
            fs::write(&path, rep.to_csv())?;
            println!("{} rows -> {}", rep.rows.len(), path.display());
            Ok(true)
        }
        Command::Tw { system, uminus, uplus, sigma, span, points, out } => {
            cmd_tw(&system, &uminus, &uplus, sigma, span, points, &out).map(|_| true)
        }
        Command::Smoothing { run, k, ta, tb } => {
            let r = load_run(&run)?;
            let window = match (ta, tb) {
                (Some(a), Some(b)) => Some((a, b)),
                (None, None) => None,
                _ => return Err(Error::InvalidInput("give both --ta and --tb or neither".into())),
            };
            let f = smoothing_check(&r.snapshots, k, window)?;
            println!("k = {k}: slope {:.6} over [{}, {}], deviation from -k/2 {:+.6}", f.slope, f.window.0, f.window.1, f.deviation);
            Ok(true)
        }
        Command::SweepEps { config, force } => {
            let cfg = load_config(&config, None)?;
            if !preflight(&cfg, force)? {
                return Ok(false);
            }
            let s = eps_sweep(&cfg)?;
            print!("{}", s.to_csv());
            if let Some(d) = s.profile_l1 {
                println!("L1 distance to translated profile: {d:.6e}");
            }
            if let Some(d) = s.rarefaction_sup {
                println!("sup distance to rarefaction fan:   {d:.6e}");
            }
            Ok(true)
        }
        Command::Report { run } => cmd_report(&run).map(|_| true),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
