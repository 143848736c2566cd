//! Explicit finite-difference solver for `u_t + A(u)u_x = ε(B(u)u_x)_x`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{self, GridField};
use crate::spectral::real_eigenvalues;
use crate::system::{StateBox, SystemModel};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub cfl_advective: f64,
    pub cfl_parabolic: f64,
    pub epsilon: f64,
    pub t_end: f64,
    /// Number of snapshots taken over `[0, t_end]` (excluding `t = 0`).
    pub snapshot_stride: usize,
    /// Use `D0 f(u)` instead of `A(u) D0 u` for the advection term.
    pub conservative: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { cfl_advective: 0.4, cfl_parabolic: 0.4, epsilon: 1.0, t_end: 1.0, snapshot_stride: 10, conservative: false }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_advective > 0.0 && self.cfl_advective <= 1.0) {
            return Err(Error::InvalidInput("cfl_advective must lie in (0, 1]".into()));
        }
        if !(self.cfl_parabolic > 0.0 && self.cfl_parabolic <= 0.5) {
            return Err(Error::InvalidInput("cfl_parabolic must lie in (0, 0.5]".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidInput("t_end must be non-negative".into()));
        }
        Ok(())
    }
}

/// Largest `|λ|` and largest `μ` over the field.
fn spectral_extent(model: &SystemModel, field: &GridField) -> (f64, f64) {
    let mut lam: f64 = 0.0;
    let mut mu: f64 = 0.0;
    for j in 0..field.cells() {
        let u = field.state_vec(j);
        if let Ok(ev) = real_eigenvalues(&model.a(&u)) {
            lam = ev.iter().fold(lam, |a, v| a.max(v.abs()));
        } else {
            lam = lam.max(model.a(&u).norm());
        }
        let bm = model.b(&u);
        match real_eigenvalues(&bm) {
            Ok(ev) => mu = ev.iter().fold(mu, |a, v| a.max(*v)),
            Err(_) => mu = mu.max(bm.norm()),
        }
    }
    (lam, mu)
}

pub fn dt_stable(model: &SystemModel, field: &GridField, config: &SolverConfig) -> f64 {
    let (lam, mu) = spectral_extent(model, field);
    let h = field.h;
    let parabolic = if mu > 0.0 { config.cfl_parabolic * h * h / (config.epsilon * mu) } else { f64::INFINITY };
    if lam > 0.0 {
        parabolic.min(config.cfl_advective * h / lam)
    } else {
        parabolic
    }
}

/// Semidiscrete right-hand side `ε Dflux_j − A(u_j) D0 u_j` (or `− D0 f(u_j)`).
fn rhs(model: &SystemModel, field: &GridField, epsilon: f64, conservative: bool) -> Result<Vec<f64>> {
    let m = field.cells();
    let n = field.dim();
    let h = field.h;
    let mut out = vec![0.0; m * n];

    // B at faces j+1/2, j = -1..m-1 (index shifted by one).
    let mut face_flux: Vec<DVector<f64>> = Vec::with_capacity(m + 1);
    for j in -1..m as isize {
        let a = DVector::from_column_slice(field.ghost(j));
        let b = DVector::from_column_slice(field.ghost(j + 1));
        let mid = (&a + &b) * 0.5;
        face_flux.push(model.b(&mid) * (b - a));
    }

    let flux_at: Option<Vec<DVector<f64>>> = if conservative {
        if !model.is_conservative() {
            return Err(Error::NoFlux);
        }
        Some(
            (-1..=m as isize)
                .map(|j| model.flux(&DVector::from_column_slice(field.ghost(j))).expect("flux present"))
                .collect(),
        )
    } else {
        None
    };

    for j in 0..m {
        let ji = j as isize;
        let adv: DVector<f64> = match &flux_at {
            Some(fv) => (&fv[j + 2] - &fv[j]) / (2.0 * h),
            None => {
                let um = DVector::from_column_slice(field.ghost(ji - 1));
                let up = DVector::from_column_slice(field.ghost(ji + 1));
                let a: DMatrix<f64> = model.a(&field.state_vec(j));
                a * ((up - um) / (2.0 * h))
            }
        };
        let diff = (&face_flux[j + 1] - &face_flux[j]) / (h * h);
        for c in 0..n {
            out[j * n + c] = epsilon * diff[c] - adv[c];
        }
    }
    Ok(out)
}

fn check_states(values: &[f64], n: usize, time: f64, inflated: &StateBox) -> Result<()> {
    for (cell, s) in values.chunks(n).enumerate() {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { cell, time });
        }
        if !inflated.contains(s) {
            return Err(Error::StateLeftBox { cell, time });
        }
    }
    Ok(())
}

/// One Heun (SSP-RK2) step of size `dt`.
pub fn step(model: &SystemModel, field: &GridField, config: &SolverConfig, dt: f64) -> Result<GridField> {
    let n = field.dim();
    let inflated = model.state_box().inflated(0.1);
    let k1 = rhs(model, field, config.epsilon, config.conservative)?;
    let mut stage = field.clone();
    for (s, k) in stage.values_mut().iter_mut().zip(&k1) {
        *s += dt * k;
    }
    check_states(stage.values(), n, field.time + dt, &inflated)?;
    let k2 = rhs(model, &stage, config.epsilon, config.conservative)?;
    let mut next = field.clone();
    for ((u, a), b) in next.values_mut().iter_mut().zip(&k1).zip(&k2) {
        *u += 0.5 * dt * (a + b);
    }
    next.time = field.time + dt;
    check_states(next.values(), n, next.time, &inflated)?;
    Ok(next)
}

/// Pointwise `u_t` from the same stencils the stepper integrates.
pub fn compute_ut(model: &SystemModel, field: &GridField, epsilon: f64) -> GridField {
    let vals = rhs(model, field, epsilon, false).expect("nonconservative rhs cannot fail");
    field.with_values(field.dim(), vals)
}

/// `k`-th spatial derivative of every component.
pub fn derivative(field: &GridField, k: usize) -> GridField {
    let comps: Vec<Vec<f64>> =
        field.components().iter().map(|c| grid::diff(c, field.h, k, field.boundary)).collect();
    field.from_components(&comps)
}

/// Per-component L¹ norms and their sum.
pub fn l1_norm(field: &GridField) -> (Vec<f64>, f64) {
    let per: Vec<f64> = field.components().iter().map(|c| grid::l1(c, field.h)).collect();
    let total = per.iter().sum();
    (per, total)
}

/// Advances `field` to exactly `t_target` with stable steps.
pub fn advance_to(model: &SystemModel, field: &mut GridField, config: &SolverConfig, t_target: f64) -> Result<usize> {
    let mut steps = 0;
    while field.time < t_target - 1e-14 * t_target.abs().max(1.0) {
        let mut dt = dt_stable(model, field, config);
        let rem = t_target - field.time;
        if dt >= rem {
            dt = rem;
        } else if dt > 0.5 * rem {
            // avoid a sliver step at the end
            dt = 0.5 * rem;
        }
        *field = step(model, field, config, dt)?;
        steps += 1;
    }
    field.time = t_target;
    Ok(steps)
}

/// Runs to `config.t_end`, calling `on_snapshot` at `t = 0` and at
/// `snapshot_stride` equally spaced times.
pub fn run(
    model: &SystemModel,
    mut field: GridField,
    config: &SolverConfig,
    mut on_snapshot: impl FnMut(usize, &GridField) -> Result<()>,
) -> Result<GridField> {
    config.validate()?;
    let k = config.snapshot_stride.max(1);
    on_snapshot(0, &field)?;
    for s in 1..=k {
        let t = config.t_end * s as f64 / k as f64;
        advance_to(model, &mut field, config, t)?;
        on_snapshot(s, &field)?;
    }
    Ok(field)
}
