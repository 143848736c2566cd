//! Analysis functionals: total variation, transversal interaction, area
//! and length of the `(v, w)` curve, cutoff energies.

mod coords;
mod report;

pub use coords::{rescale_coordinates, CoordinateMap};
pub use report::{decompose_run, functional_report, FunctionalReport};

use crate::decomposition::cutoff::{eta_bar, eta_tilde};
use crate::decomposition::{CutoffParams, WaveComponents};
use crate::error::{Error, Result};
use crate::grid::{diff, l1, Boundary, GridField};

/// Cap on the grid size of the `O(M²)` functionals.
pub const MAX_PAIR_CELLS: usize = 4096;

fn check_size(m: usize) -> Result<()> {
    if m > MAX_PAIR_CELLS {
        Err(Error::GridTooLarge(m))
    } else {
        Ok(())
    }
}

/// Per-component and total variation `Σ_j |u_{j+1} − u_j|`.
pub fn tv(field: &GridField) -> (Vec<f64>, f64) {
    let per: Vec<f64> = field.components().iter().map(|c| tv_scalar(c)).collect();
    let total = per.iter().sum();
    (per, total)
}

pub fn tv_scalar(q: &[f64]) -> f64 {
    q.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// Interaction kernel: `1/c` for `s ≥ 0`, `e^{cs/(2c₁)}/c` for `s < 0`,
/// with `s` the position of `z` minus that of `z#`.
#[inline]
pub fn kernel(s: f64, c: f64, c1: f64) -> f64 {
    if s >= 0.0 {
        1.0 / c
    } else {
        (c * s / (2.0 * c1)).exp() / c
    }
}

/// `Q = h² Σ_{j,k} K(x_j − x_k) |z_j| |z#_k|`.
pub fn transversal_q(z: &[f64], z_sharp: &[f64], h: f64, c: f64, c1: f64) -> Result<f64> {
    let m = z.len();
    if z_sharp.len() != m {
        return Err(Error::InvalidInput("fields must share a grid".into()));
    }
    if !(c > 0.0 && c1 > 0.0) {
        return Err(Error::InvalidInput("kernel constants must be positive".into()));
    }
    check_size(m)?;
    // K depends on j − k only
    let table: Vec<f64> = (0..2 * m - 1).map(|d| kernel((d as f64 - (m - 1) as f64) * h, c, c1)).collect();
    let zs: Vec<f64> = z_sharp.iter().map(|v| v.abs()).collect();
    let mut q = 0.0;
    for (j, zj) in z.iter().enumerate() {
        if *zj == 0.0 {
            continue;
        }
        let row = &table[j..j + m];
        let inner: f64 = row.iter().rev().zip(&zs).map(|(k, b)| k * b).sum();
        q += zj.abs() * inner;
    }
    Ok(h * h * q)
}

/// One time level of two scalar fields obeying
/// `z_t + (λ z)_x − (μ z_x)_x = φ` and the `#` analogue.
#[derive(Clone, Debug)]
pub struct TransversalSample {
    pub t: f64,
    pub z: Vec<f64>,
    pub z_sharp: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_sharp: Vec<f64>,
    pub mu: Vec<f64>,
    pub mu_sharp: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_sharp: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TransversalReport {
    pub c: f64,
    pub c1: f64,
    /// Coefficient of `∫|z z#|` in the dissipation inequality.
    pub kappa: f64,
    pub q: Vec<f64>,
    pub residuals: Vec<f64>,
    pub pass_fraction: f64,
    /// `∫∫ |z z#|` over the trajectory (trapezoid in time).
    pub interaction: f64,
    /// `E₁E₂/c`.
    pub bound: f64,
}

fn sup_abs(q: &[f64]) -> f64 {
    q.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn pair_l1(a: &[f64], b: &[f64], h: f64) -> f64 {
    h * a.iter().zip(b).map(|(x, y)| (x * y).abs()).sum::<f64>()
}

/// Kernel constants `(c, c₁)` from the data: gap between the speed ranges
/// less twice the largest `|μ_x|`, and the largest `μ`.
pub fn kernel_constants(traj: &[TransversalSample], h: f64, boundary: Boundary) -> Result<(f64, f64)> {
    let mut sup_l = f64::NEG_INFINITY;
    let mut inf_ls = f64::INFINITY;
    let mut mu_x: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for s in traj {
        sup_l = s.lambda.iter().fold(sup_l, |a, b| a.max(*b));
        inf_ls = s.lambda_sharp.iter().fold(inf_ls, |a, b| a.min(*b));
        for mu in [&s.mu, &s.mu_sharp] {
            mu_x = mu_x.max(sup_abs(&diff(mu, h, 1, boundary)));
            c1 = mu.iter().fold(c1, |a, b| a.max(*b));
        }
    }
    let gap = inf_ls - sup_l;
    let c = gap - 2.0 * mu_x;
    if !(gap > 0.0) || !(c > 0.0) {
        return Err(Error::GapViolated(gap));
    }
    Ok((c, c1))
}

/// Checks `dQ/dt ≤ −κ∫|z z#| + (‖z‖₁‖φ#‖₁ + ‖z#‖₁‖φ‖₁)/c` along a trajectory,
/// with `κ = (min μ + min μ#)/(2c₁)` and the right side averaged over each step.
pub fn transversal_dissipation_check(
    traj: &[TransversalSample],
    h: f64,
    boundary: Boundary,
    tol_rel: f64,
) -> Result<TransversalReport> {
    if traj.len() < 2 {
        return Err(Error::InvalidInput("need at least two time levels".into()));
    }
    let (c, c1) = kernel_constants(traj, h, boundary)?;
    let min_mu = traj.iter().flat_map(|s| s.mu.iter()).fold(f64::INFINITY, |a, b| a.min(*b));
    let min_mus = traj.iter().flat_map(|s| s.mu_sharp.iter()).fold(f64::INFINITY, |a, b| a.min(*b));
    let kappa = ((min_mu + min_mus) / (2.0 * c1)).min(1.0);

    let q: Vec<f64> = traj.iter().map(|s| transversal_q(&s.z, &s.z_sharp, h, c, c1)).collect::<Result<_>>()?;
    let rhs: Vec<f64> = traj
        .iter()
        .map(|s| {
            -kappa * pair_l1(&s.z, &s.z_sharp, h)
                + (l1(&s.z, h) * l1(&s.phi_sharp, h) + l1(&s.z_sharp, h) * l1(&s.phi, h)) / c
        })
        .collect();
    let mut residuals = Vec::with_capacity(traj.len() - 1);
    let mut running: f64 = 0.0;
    let mut passed = 0;
    for k in 0..traj.len() - 1 {
        let dt = traj[k + 1].t - traj[k].t;
        let r = (q[k + 1] - q[k]) / dt - 0.5 * (rhs[k] + rhs[k + 1]);
        running = running.max(q[k]).max(q[k + 1]);
        if r <= tol_rel * running {
            passed += 1;
        }
        residuals.push(r);
    }
    let mut interaction = 0.0;
    let mut src = 0.0;
    let mut src_s = 0.0;
    for k in 0..traj.len() - 1 {
        let dt = traj[k + 1].t - traj[k].t;
        let (a, b) = (&traj[k], &traj[k + 1]);
        interaction += 0.5 * dt * (pair_l1(&a.z, &a.z_sharp, h) + pair_l1(&b.z, &b.z_sharp, h));
        src += 0.5 * dt * (l1(&a.phi, h) + l1(&b.phi, h));
        src_s += 0.5 * dt * (l1(&a.phi_sharp, h) + l1(&b.phi_sharp, h));
    }
    let e1 = l1(&traj[0].z, h) + src;
    let e2 = l1(&traj[0].z_sharp, h) + src_s;
    Ok(TransversalReport {
        c,
        c1,
        kappa,
        pass_fraction: passed as f64 / residuals.len() as f64,
        q,
        residuals,
        interaction,
        bound: e1 * e2 / c,
    })
}

/// `𝒜 = ½ h² Σ_{j<k} |ζ1_j ζ2_k − ζ1_k ζ2_j|`.
pub fn area_functional(zeta1: &[f64], zeta2: &[f64], h: f64) -> Result<f64> {
    let m = zeta1.len();
    if zeta2.len() != m {
        return Err(Error::InvalidInput("fields must share a grid".into()));
    }
    check_size(m)?;
    let mut s = 0.0;
    for j in 0..m {
        let (a1, a2) = (zeta1[j], zeta2[j]);
        if a1 == 0.0 && a2 == 0.0 {
            continue;
        }
        for k in j + 1..m {
            s += (a1 * zeta2[k] - zeta1[k] * a2).abs();
        }
    }
    Ok(0.5 * h * h * s)
}

/// One time level for the area inequality.
#[derive(Clone, Debug)]
pub struct AreaSample {
    pub t: f64,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    /// Common diffusion coefficient `α`.
    pub alpha: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AreaReport {
    pub area: Vec<f64>,
    pub residuals: Vec<f64>,
    pub pass_fraction: f64,
}

/// Checks `d𝒜/dt ≤ −∫α|ζ1_x ζ2 − ζ1 ζ2_x| + ‖ζ1‖₁‖φ2‖₁ + ‖ζ2‖₁‖φ1‖₁`.
pub fn area_dissipation_check(traj: &[AreaSample], h: f64, boundary: Boundary, tol_rel: f64) -> Result<AreaReport> {
    if traj.len() < 2 {
        return Err(Error::InvalidInput("need at least two time levels".into()));
    }
    let area: Vec<f64> = traj.iter().map(|s| area_functional(&s.zeta1, &s.zeta2, h)).collect::<Result<_>>()?;
    let rhs: Vec<f64> = traj
        .iter()
        .map(|s| {
            let z1x = diff(&s.zeta1, h, 1, boundary);
            let z2x = diff(&s.zeta2, h, 1, boundary);
            let diss: f64 = h * (0..s.zeta1.len())
                .map(|j| s.alpha[j] * (z1x[j] * s.zeta2[j] - s.zeta1[j] * z2x[j]).abs())
                .sum::<f64>();
            -diss + l1(&s.zeta1, h) * l1(&s.phi2, h) + l1(&s.zeta2, h) * l1(&s.phi1, h)
        })
        .collect();
    let mut residuals = Vec::new();
    let mut running: f64 = 0.0;
    let mut passed = 0;
    for k in 0..traj.len() - 1 {
        let dt = traj[k + 1].t - traj[k].t;
        let r = (area[k + 1] - area[k]) / dt - 0.5 * (rhs[k] + rhs[k + 1]);
        running = running.max(area[k]).max(area[k + 1]);
        if r <= tol_rel * running {
            passed += 1;
        }
        residuals.push(r);
    }
    Ok(AreaReport { pass_fraction: passed as f64 / residuals.len() as f64, area, residuals })
}

/// `ℒ = h Σ √(v² + w²)`.
pub fn length_functional(v: &[f64], w: &[f64], h: f64) -> f64 {
    h * v.iter().zip(w).map(|(a, b)| a.hypot(*b)).sum::<f64>()
}

/// Per-family cutoff energies.
#[derive(Clone, Debug, Default)]
pub struct Energies {
    /// `∫ 𝟙{|w/v| ≥ δ₁/2} v_x²`.
    pub e_v: Vec<f64>,
    /// `∫ 𝟙{|w/v| ≥ δ₁/2} w_x²`.
    pub e_w: Vec<f64>,
    /// `∫ 𝟙{|w/v| ≤ 3δ₁, v^{2N} ≥ ε} |v| |(w/v)_x|²`.
    pub curvature: Vec<f64>,
    /// `∫ η̃(w/v) v_x²` and `∫ η̃(w/v) w_x²`.
    pub e_v_smooth: Vec<f64>,
    pub e_w_smooth: Vec<f64>,
    /// `∫ (1 − η̄(w/v)) 𝟙{v^{2N} ≥ ε} |v| |(w/v)_x|²`.
    pub curvature_smooth: Vec<f64>,
}

pub fn energy_functionals(c: &WaveComponents, p: &CutoffParams) -> Energies {
    let n = c.dim();
    let h = c.h;
    let mut e = Energies::default();
    let two_n = 2 * p.n_exp as i32;
    for i in 0..n {
        let v = &c.v[i];
        let w = &c.w[i];
        let vx = diff(v, h, 1, c.boundary);
        let wx = diff(w, h, 1, c.boundary);
        let (mut ev, mut ew, mut cu, mut evs, mut ews, mut cus) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..v.len() {
            let r = p.ratio(w[j], v[j]);
            if r.abs() >= 0.5 * p.delta1 {
                ev += vx[j] * vx[j];
                ew += wx[j] * wx[j];
            }
            let et = eta_tilde(r, p.delta1);
            evs += et * vx[j] * vx[j];
            ews += et * wx[j] * wx[j];
            if v[j].abs() >= p.v_floor && v[j].powi(two_n) >= p.epsilon_cut {
                let dr = (wx[j] * v[j] - w[j] * vx[j]) / (v[j] * v[j]);
                let k = v[j].abs() * dr * dr;
                if r.abs() <= 3.0 * p.delta1 {
                    cu += k;
                }
                cus += (1.0 - eta_bar(r, p.delta1)) * k;
            }
        }
        e.e_v.push(h * ev);
        e.e_w.push(h * ew);
        e.curvature.push(h * cu);
        e.e_v_smooth.push(h * evs);
        e.e_w_smooth.push(h * ews);
        e.curvature_smooth.push(h * cus);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn tv_examples() {
        let step = GridField::from_fn(0.0, 1.0, 10, 1, Boundary::ConstantExtrapolation, |x| {
            vec![if x < 0.5 { 0.0 } else { 1.0 }]
        })
        .unwrap();
        assert_eq!(tv(&step).1, 1.0);
        let c = GridField::from_fn(0.0, 1.0, 10, 2, Boundary::ConstantExtrapolation, |_| vec![1.0, 2.0]).unwrap();
        assert_eq!(tv(&c).1, 0.0);
        // 512 samples including both endpoints of [0, 2π]
        let h = 2.0 * PI / 511.0;
        let s = GridField::from_fn(-h / 2.0, 2.0 * PI + h / 2.0, 512, 1, Boundary::Periodic, |x| vec![x.sin()])
            .unwrap();
        assert!((tv(&s).1 - 4.0).abs() < 1e-3, "{}", tv(&s).1);
    }

    #[test]
    fn q_examples() {
        let h = 0.1;
        let mut z = vec![0.0; 16];
        let zero = vec![0.0; 16];
        z[5] = 1.0;
        assert_eq!(transversal_q(&z, &zero, h, 1.0, 1.0).unwrap(), 0.0);
        assert!((transversal_q(&z, &z, h, 1.0, 1.0).unwrap() - h * h).abs() < 1e-18);
        // z# to the right of z: decayed kernel
        let mut zs = vec![0.0; 16];
        zs[7] = 1.0;
        let q = transversal_q(&z, &zs, h, 2.0, 1.0).unwrap();
        assert!((q - h * h * (2.0 * -0.2 / 2.0f64).exp() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn area_examples() {
        let h = 0.25;
        let z: Vec<f64> = (0..12).map(|j| (j as f64).sin()).collect();
        let z2: Vec<f64> = z.iter().map(|v| -3.0 * v).collect();
        assert!(area_functional(&z, &z2, h).unwrap().abs() < 1e-14);
        let mut a = vec![0.0; 12];
        let mut b = vec![0.0; 12];
        a[2] = 1.0;
        b[7] = 1.0;
        assert_eq!(area_functional(&a, &b, h).unwrap(), 0.5 * h * h);
    }

    #[test]
    fn too_large_grid() {
        let z = vec![0.0; MAX_PAIR_CELLS + 1];
        assert!(matches!(transversal_q(&z, &z, 1.0, 1.0, 1.0), Err(Error::GridTooLarge(_))));
        assert!(matches!(area_functional(&z, &z, 1.0), Err(Error::GridTooLarge(_))));
    }

    #[test]
    fn length_examples() {
        let v = vec![3.0; 4];
        let w = vec![4.0; 4];
        assert_eq!(length_functional(&v, &w, 0.25), 5.0);
        assert_eq!(length_functional(&[0.0; 4], &[0.0; 4], 0.25), 0.0);
    }
}
