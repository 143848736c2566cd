//! Effective fluxes, Λ source terms and discrete residuals of the diagonal equations.

use super::cutoff::{self, CutoffParams};
use super::WaveComponents;
use crate::grid::{diff, diffuse, l1};

/// `z_i`, `ẑ_i` laid out `[family][cell]`.
#[derive(Clone, Debug)]
pub struct EffectiveFluxes {
    pub z: Vec<Vec<f64>>,
    pub zhat: Vec<Vec<f64>>,
}

fn d(c: &WaveComponents, q: &[f64], k: usize) -> Vec<f64> {
    diff(q, c.h, k, c.boundary)
}

/// `z_i = μ_i v_{i,x} − (λ̃_i − λ_i^*) v_i + Σ_{j≠i} a_ij (w_{j,x} − (w_j/v_j) v_{j,x})`
/// and the analogous `ẑ_i`, with `a_ij = μ_i b_ij`, `â_ij = μ_i b̂_ij`.
pub fn effective_fluxes(c: &WaveComponents, p: &CutoffParams) -> EffectiveFluxes {
    let n = c.dim();
    let m = c.cells();
    let vx: Vec<Vec<f64>> = c.v.iter().map(|q| d(c, q, 1)).collect();
    let wx: Vec<Vec<f64>> = c.w.iter().map(|q| d(c, q, 1)).collect();
    let mut z = vec![vec![0.0; m]; n];
    let mut zhat = vec![vec![0.0; m]; n];
    for j in 0..m {
        // transversal couplings, travelling mode only
        let mut a = vec![vec![0.0; n]; n];
        let mut ahat = vec![vec![0.0; n]; n];
        if c.numerators.is_some() {
            for k in 0..n {
                let s = c.s(k, j);
                if s == 0.0 {
                    continue;
                }
                let ratio = p.ratio(c.w[k][j], c.v[k][j]);
                let xi_d = cutoff::xi_deriv(ratio, p.delta1);
                let (ck, dck) = c.correction(k, j, c.sigma[k][j]).expect("travelling data");
                for i in (0..n).filter(|&i| i != k) {
                    let psi = s * ck[i];
                    let psi_v = ck[i];
                    let psi_sigma = s * dck[i];
                    let b = xi_d * c.vbar[k][j] * psi_v - psi_sigma;
                    let bhat = psi + ((c.lambda_star[i] - c.lambda_star[k]) + ratio) * b;
                    a[i][k] = c.mu[i][j] * b;
                    ahat[i][k] = c.mu[i][j] * bhat;
                }
            }
        }
        for i in 0..n {
            let shift = c.lambda_tilde[i][j] - c.lambda_star[i];
            let mut zi = c.mu[i][j] * vx[i][j] - shift * c.v[i][j];
            let mut zh = c.mu[i][j] * wx[i][j] - shift * c.w[i][j];
            for k in (0..n).filter(|&k| k != i) {
                let g = wx[k][j] - p.ratio(c.w[k][j], c.v[k][j]) * vx[k][j];
                zi += a[i][k] * g;
                zh += ahat[i][k] * g;
            }
            z[i][j] = zi;
            zhat[i][j] = zh;
        }
    }
    EffectiveFluxes { z, zhat }
}

pub const LAMBDA_NAMES: [&str; 9] = ["1", "2", "3", "4", "5", "6", "6,1", "7", "8"];

/// Pointwise Λ terms `[term][family][cell]` and their L¹ norms `[term][family]`.
#[derive(Clone, Debug)]
pub struct LambdaTerms {
    pub values: Vec<Vec<Vec<f64>>>,
    pub norms: Vec<Vec<f64>>,
}

impl LambdaTerms {
    pub fn index(name: &str) -> Option<usize> {
        LAMBDA_NAMES.iter().position(|n| *n == name)
    }
    pub fn norm(&self, name: &str, family: usize) -> f64 {
        self.norms[Self::index(name).expect("known Λ term")][family]
    }
}

pub fn lambda_terms(c: &WaveComponents, f: &EffectiveFluxes, p: &CutoffParams) -> LambdaTerms {
    let n = c.dim();
    let m = c.cells();
    let der = |fam: &Vec<Vec<f64>>, k: usize| -> Vec<Vec<f64>> { fam.iter().map(|q| d(c, q, k)).collect() };
    let (vx, vxx, vxxx) = (der(&c.v, 1), der(&c.v, 2), der(&c.v, 3));
    let (wx, wxx, wxxx) = (der(&c.w, 1), der(&c.w, 2), der(&c.w, 3));
    let zx = der(&f.z, 1);
    let zhx = der(&f.zhat, 1);
    let (v, w, z, zh) = (&c.v, &c.w, &f.z, &f.zhat);
    let two_n = 2 * p.n_exp as i32;

    let mut values = vec![vec![vec![0.0; m]; n]; LAMBDA_NAMES.len()];
    for j in 0..m {
        for i in 0..n {
            let own = v[i][j].abs() + vx[i][j].abs() + vxx[i][j].abs() + w[i][j].abs() + wx[i][j].abs() + wxx[i][j].abs();
            let mut l1v = 0.0;
            let mut l2v = 0.0;
            let mut l7v = 0.0;
            for k in (0..n).filter(|&k| k != i) {
                let other = v[k][j].abs()
                    + vx[k][j].abs()
                    + w[k][j].abs()
                    + wx[k][j].abs()
                    + vxx[k][j].abs()
                    + wxx[k][j].abs();
                l1v += other * own;
                l2v += (vxxx[k][j].abs() + wxxx[k][j].abs()) * (w[k][j].abs() + v[k][j].abs()) * v[i][j].abs();
                let zk = z[k][j].abs() + zh[k][j].abs();
                l7v += (z[i][j].abs() + zh[i][j].abs())
                    * (v[k][j].abs() + w[k][j].abs() + vx[k][j].abs() + wx[k][j].abs() + zk)
                    + (zx[i][j].abs() + zhx[i][j].abs()) * (v[k][j].abs() + w[k][j].abs() + zk);
            }
            let ratio = p.ratio(w[i][j], v[i][j]);
            let l3 = if ratio.abs() <= 3.0 * p.delta1
                && v[i][j].powi(two_n) >= p.epsilon_cut
                && v[i][j].abs() >= p.v_floor
            {
                let dr = (wx[i][j] * v[i][j] - w[i][j] * vx[i][j]) / (v[i][j] * v[i][j]);
                v[i][j].abs() * dr * dr
            } else {
                0.0
            };
            let big = ratio.abs() >= 0.5 * p.delta1;
            values[0][i][j] = l1v;
            values[1][i][j] = l2v;
            values[2][i][j] = l3;
            values[3][i][j] = (wx[i][j] * v[i][j] - w[i][j] * vx[i][j]).abs();
            values[4][i][j] = (wxx[i][j] * v[i][j] - w[i][j] * vxx[i][j]).abs();
            values[5][i][j] = if big { vx[i][j] * vx[i][j] } else { 0.0 };
            values[6][i][j] = if big { wx[i][j] * wx[i][j] } else { 0.0 };
            values[7][i][j] = l7v;
            values[8][i][j] = (z[i][j] * wx[i][j] - w[i][j] * zx[i][j]).abs()
                + (z[i][j] * vx[i][j] - v[i][j] * zx[i][j]).abs()
                + (zh[i][j] * wx[i][j] - w[i][j] * zhx[i][j]).abs()
                + (zh[i][j] * vx[i][j] - v[i][j] * zhx[i][j]).abs();
        }
    }
    let norms = values.iter().map(|t| t.iter().map(|q| l1(q, c.h)).collect()).collect();
    LambdaTerms { values, norms }
}

/// Discrete sources of the diagonal equations between two snapshots.
#[derive(Clone, Debug)]
pub struct DiagonalResiduals {
    pub dt: f64,
    /// `v_{i,t} + (λ̃_i v_i)_x − (μ_i v_{i,x})_x`.
    pub phi: Vec<Vec<f64>>,
    /// Same operator on `w_i`.
    pub psi: Vec<Vec<f64>>,
    /// Same operator on `z_i` and `ẑ_i`.
    pub big_phi: Vec<Vec<f64>>,
    pub big_psi: Vec<Vec<f64>>,
    pub phi_l1: Vec<f64>,
    pub psi_l1: Vec<f64>,
    pub big_phi_l1: Vec<f64>,
    pub big_psi_l1: Vec<f64>,
    /// `∫|φ_i| / Σ_j ∫(Λ¹ + δ₀²Λ³ + Λ⁴ + Λ⁵ + Λ⁶ + Λ^{6,1})_j`, with `δ₀ = Σ_i ‖v_i‖₁`.
    pub ratio: Vec<f64>,
}

/// Residual of `q_t + (λ̃ q)_x − (μ q_x)_x` with spatial terms averaged over both snapshots.
fn transport_residual(a: &WaveComponents, b: &WaveComponents, qa: &[f64], qb: &[f64], i: usize, dt: f64) -> Vec<f64> {
    let spatial = |c: &WaveComponents, q: &[f64]| -> Vec<f64> {
        let lq: Vec<f64> = q.iter().zip(&c.lambda_tilde[i]).map(|(x, l)| x * l).collect();
        let adv = diff(&lq, c.h, 1, c.boundary);
        let dif = diffuse(&c.mu[i], q, c.h, c.boundary);
        adv.iter().zip(&dif).map(|(x, y)| x - y).collect()
    };
    let sa = spatial(a, qa);
    let sb = spatial(b, qb);
    (0..qa.len()).map(|j| (qb[j] - qa[j]) / dt + 0.5 * (sa[j] + sb[j])).collect()
}

pub fn diagonal_residuals(a: &WaveComponents, b: &WaveComponents, p: &CutoffParams) -> DiagonalResiduals {
    let n = a.dim();
    let dt = b.time - a.time;
    assert!(dt > 0.0 && b.cells() == a.cells(), "snapshots must be ordered and share a grid");
    let fa = effective_fluxes(a, p);
    let fb = effective_fluxes(b, p);
    let mut out = DiagonalResiduals {
        dt,
        phi: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
        big_phi: Vec::with_capacity(n),
        big_psi: Vec::with_capacity(n),
        phi_l1: Vec::new(),
        psi_l1: Vec::new(),
        big_phi_l1: Vec::new(),
        big_psi_l1: Vec::new(),
        ratio: Vec::new(),
    };
    for i in 0..n {
        out.phi.push(transport_residual(a, b, &a.v[i], &b.v[i], i, dt));
        out.psi.push(transport_residual(a, b, &a.w[i], &b.w[i], i, dt));
        out.big_phi.push(transport_residual(a, b, &fa.z[i], &fb.z[i], i, dt));
        out.big_psi.push(transport_residual(a, b, &fa.zhat[i], &fb.zhat[i], i, dt));
    }
    let h = a.h;
    out.phi_l1 = out.phi.iter().map(|q| l1(q, h)).collect();
    out.psi_l1 = out.psi.iter().map(|q| l1(q, h)).collect();
    out.big_phi_l1 = out.big_phi.iter().map(|q| l1(q, h)).collect();
    out.big_psi_l1 = out.big_psi.iter().map(|q| l1(q, h)).collect();

    let la = lambda_terms(a, &fa, p);
    let lb = lambda_terms(b, &fb, p);
    let delta0: f64 = a.v.iter().map(|q| l1(q, h)).sum();
    let mut denom = 0.0;
    for k in 0..n {
        for lt in [&la, &lb] {
            denom += 0.5
                * (lt.norm("1", k)
                    + delta0 * delta0 * lt.norm("3", k)
                    + lt.norm("4", k)
                    + lt.norm("5", k)
                    + lt.norm("6", k)
                    + lt.norm("6,1", k));
        }
    }
    out.ratio = out.phi_l1.iter().map(|x| if denom > 0.0 { x / denom } else { f64::INFINITY }).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose_field, DecompositionMode};
    use crate::grid::{Boundary, GridField};
    use crate::solver::{advance_to, compute_ut, SolverConfig};
    use crate::system::builtin_system;

    fn decomp(name: &str, f: &GridField, mode: DecompositionMode) -> WaveComponents {
        let model = builtin_system(name).unwrap();
        let ut = compute_ut(&model, f, 1.0);
        decompose_field(&model, f, &ut, &CutoffParams::default(), mode).unwrap()
    }

    #[test]
    fn constant_state_has_no_flux_or_sources() {
        let f = GridField::from_fn(-1.0, 1.0, 32, 2, Boundary::ConstantExtrapolation, |_| vec![0.02, 0.01]).unwrap();
        for mode in [DecompositionMode::Eigenbasis, DecompositionMode::Travelling1] {
            let c = decomp("rotating2", &f, mode);
            let p = CutoffParams::default();
            let fl = effective_fluxes(&c, &p);
            assert!(fl.z.iter().chain(&fl.zhat).flatten().all(|v| *v == 0.0));
            let lt = lambda_terms(&c, &fl, &p);
            assert!(lt.values.iter().flatten().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn scalar_has_no_cross_terms_and_proportional_wronskian() {
        let f = GridField::from_fn(-20.0, 20.0, 400, 1, Boundary::ConstantExtrapolation, |x| vec![-(x / 2.0).tanh()])
            .unwrap();
        let c = decomp("burgers", &f, DecompositionMode::Eigenbasis);
        let p = CutoffParams::default();
        let fl = effective_fluxes(&c, &p);
        let lt = lambda_terms(&c, &fl, &p);
        for name in ["1", "2", "7"] {
            assert_eq!(lt.norm(name, 0), 0.0);
        }
        // w = κ v makes the Wronskian vanish
        let mut c2 = c.clone();
        c2.w[0] = c.v[0].iter().map(|v| 0.7 * v).collect();
        let lt2 = lambda_terms(&c2, &effective_fluxes(&c2, &p), &p);
        assert!(lt2.norm("4", 0) < 1e-14);
    }

    #[test]
    fn burgers_profile_flux_matches_w() {
        let f = GridField::from_fn(-20.0, 20.0, 1024, 1, Boundary::ConstantExtrapolation, |x| vec![-(x / 2.0).tanh()])
            .unwrap();
        let c = decomp("burgers", &f, DecompositionMode::Travelling1);
        let fl = effective_fluxes(&c, &CutoffParams::default());
        let vmax = c.v[0].iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for j in 0..1024 {
            if c.v[0][j].abs() > 1e-6 {
                assert!((fl.z[0][j] - c.w[0][j]).abs() <= 1e-3 * vmax);
            }
        }
    }

    #[test]
    fn heat_residual_is_small() {
        let model = builtin_system("heat").unwrap();
        let mut f = GridField::from_fn(-10.0, 10.0, 256, 1, Boundary::ConstantExtrapolation, |x| {
            vec![0.5 * (-x * x).exp()]
        })
        .unwrap();
        let cfg = SolverConfig::default();
        advance_to(&model, &mut f, &cfg, 0.1).unwrap();
        let a = decompose_field(&model, &f, &compute_ut(&model, &f, 1.0), &CutoffParams::default(), DecompositionMode::Eigenbasis)
            .unwrap();
        let mut g = f.clone();
        advance_to(&model, &mut g, &cfg, 0.102).unwrap();
        let b = decompose_field(&model, &g, &compute_ut(&model, &g, 1.0), &CutoffParams::default(), DecompositionMode::Eigenbasis)
            .unwrap();
        let r = diagonal_residuals(&a, &b, &CutoffParams::default());
        let scale: f64 = l1(&a.v[0], a.h);
        assert!(r.phi_l1[0] < 1e-4 * scale / r.dt, "{:?}", r.phi_l1);
    }
}
