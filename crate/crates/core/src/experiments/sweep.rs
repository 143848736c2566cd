//! Vanishing-viscosity sweeps: the same data integrated for a decreasing
//! list of `ε` on one grid.

use std::fs;

use nalgebra::DVector;

use super::config::{ExperimentConfig, InitialKind};
use super::run::{member_dir, simulate, write_run};
use crate::error::{Error, Result};
use crate::grid::{fmt17, l1, GridField};
use crate::system::SystemModel;
use crate::travelling::{profile_conservative, rh_speed};

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub epsilon: Vec<f64>,
    /// `d_m = ‖u^{ε_m}(T) − u^{ε_{m+1}}(T)‖₁`.
    pub d: Vec<f64>,
    /// `d_{m+1} / d_m`.
    pub ratios: Vec<f64>,
    /// L¹ distance of the last member to the translated viscous profile.
    pub profile_l1: Option<f64>,
    /// Sup distance of the last member to the rarefaction fan on its inner 90%.
    pub rarefaction_sup: Option<f64>,
    pub finals: Vec<GridField>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps_a,eps_b,d,ratio\n");
        for m in 0..self.d.len() {
            let ratio = if m == 0 { String::new() } else { fmt17(self.ratios[m - 1]) };
            s.push_str(&format!("{},{},{},{}\n", fmt17(self.epsilon[m]), fmt17(self.epsilon[m + 1]), fmt17(self.d[m]), ratio));
        }
        s
    }
}

fn l1_distance(a: &GridField, b: &[f64]) -> f64 {
    let d: Vec<f64> = a.values().iter().zip(b).map(|(x, y)| x - y).collect();
    l1(&d, a.h)
}

/// Runs all members conservatively and tabulates successive differences.
/// Riemann data are also compared with the exact viscous profile or, for
/// scalar expansive pairs, the rarefaction fan.
pub fn eps_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let model = cfg.model()?;
    if !model.is_conservative() {
        return Err(Error::NoFlux);
    }
    let eps = cfg.run.epsilon.clone();
    if eps.len() < 3 {
        return Err(Error::InvalidInput("a sweep needs at least three epsilon values".into()));
    }
    let h = cfg.h();
    let limit = eps[eps.len() - 1] / 8.0;
    if h > limit {
        return Err(Error::GridTooCoarse { h, limit });
    }
    let mut cfg = cfg.clone();
    cfg.run.conservative = true;
    let cfg = &cfg;

    let results: Vec<Result<Vec<GridField>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = eps
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let model = &model;
                scope.spawn(move || {
                    let snaps = simulate(model, cfg, e)?;
                    write_run(&member_dir(cfg, k), cfg, e, &snaps)?;
                    Ok(snaps)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let finals: Vec<GridField> =
        results.into_iter().map(|r| r.map(|mut s| s.pop().expect("at least one snapshot"))).collect::<Result<_>>()?;

    let d: Vec<f64> = finals.windows(2).map(|w| l1_distance(&w[0], w[1].values())).collect();
    let ratios: Vec<f64> = d.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();

    let mut report = SweepReport { epsilon: eps.clone(), d, ratios, profile_l1: None, rarefaction_sup: None, finals };
    if cfg.initial.kind == InitialKind::Riemann {
        let n = model.dim();
        let ul = DVector::from_column_slice(cfg.initial.u_left.as_deref().unwrap_or(&[]));
        let ur = DVector::from_column_slice(cfg.initial.u_right.as_deref().unwrap_or(&[]));
        if ul.len() == n && ur.len() == n && ul != ur {
            let last = report.finals.last().expect("members");
            let e = eps[eps.len() - 1];
            let (sigma, residual) = rh_speed(&model, &ul, &ur)?;
            if residual <= 1e-10 * (1.0 + sigma.abs()) {
                match profile_conservative(&model, &ul, &ur, sigma, None, 4001) {
                    Ok(p) => report.profile_l1 = Some(profile_distance(last, &p, e, cfg.initial.center + sigma * cfg.run.t_end)),
                    Err(Error::NoConnection(_)) if n == 1 => {
                        report.rarefaction_sup = rarefaction_distance(&model, last, ul[0], ur[0], cfg.initial.center, cfg.run.t_end)
                    }
                    Err(Error::NoConnection(_)) => {}
                    Err(err) => return Err(err),
                }
            }
        }
    }
    fs::create_dir_all(&cfg.output.dir)?;
    fs::write(cfg.output.dir.join("sweep.csv"), report.to_csv())?;
    Ok(report)
}

/// L¹ distance to `U((x − x_c − a)/ε)`, with the shift `a` fixed by
/// conservation of the component with the largest jump.
pub fn profile_distance(field: &GridField, p: &crate::travelling::TravellingWaveProfile, epsilon: f64, x_c: f64) -> f64 {
    let n = field.dim();
    let jump = &p.u_minus - &p.u_plus;
    let c = jump.iamax();
    let sample = |a: f64| -> Vec<f64> {
        (0..field.cells()).flat_map(|j| p.eval((field.x(j) - x_c - a) / epsilon).as_slice().to_vec()).collect()
    };
    let mass = |vals: &[f64]| field.h * (0..field.cells()).map(|j| vals[j * n + c]).sum::<f64>();
    let target = mass(field.values());
    let mut a = 0.0;
    for _ in 0..4 {
        // d/da ∫U(x − a) = u₋ − u₊ for the chosen component
        a += (target - mass(&sample(a))) / jump[c];
    }
    l1_distance(field, &sample(a))
}

/// Sup distance to the centred rarefaction `λ(u) = (x − x_c)/t` on the cells
/// whose `(x − x_c)/t` lies in the inner 90% of `[λ(u₋), λ(u₊)]`.
pub fn rarefaction_distance(model: &SystemModel, field: &GridField, ul: f64, ur: f64, x_c: f64, t: f64) -> Option<f64> {
    let lam = |u: f64| model.a(&DVector::from_element(1, u))[(0, 0)];
    let (ll, lr) = (lam(ul), lam(ur));
    if !(lr > ll) {
        return None;
    }
    let (mid, half) = (0.5 * (ll + lr), 0.5 * (lr - ll));
    let invert = |s: f64| {
        let (mut a, mut b) = (ul, ur);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if (lam(m) < s) == (lam(a) < s) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut sup: f64 = 0.0;
    for j in 0..field.cells() {
        let s = (field.x(j) - x_c) / t;
        if (s - mid).abs() <= 0.9 * half {
            sup = sup.max((field.state(j)[0] - invert(s)).abs());
        }
    }
    Some(sup)
}
