//! Configured experiments: runs, fits over runs, viscosity sweeps and the
//! preflight gate.

pub mod analysis;
pub mod config;
pub mod gate;
pub mod initial;
pub mod run;
pub mod sweep;

pub use analysis::{bv_check, default_bv_guard, l1_continuity_fit, smoothing_check, BvReport, L1Fit, SmoothingFit};
pub use config::ExperimentConfig;
pub use gate::{gate_report, hypothesis_gate, GateReport};
pub use run::{diagnose, load_run, run_simulation, simulate, LoadedRun, RunOutcome};
pub use sweep::{eps_sweep, SweepReport};
