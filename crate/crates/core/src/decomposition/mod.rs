//! Decomposition of `u_x`, `u_t` along (corrected) eigenvectors into wave
//! amplitudes `v_i`, `w_i`, with effective fluxes and source-term diagnostics.

pub mod cutoff;
mod terms;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridField};
use crate::solver::derivative;
use crate::spectral::{decompose, tw_correction_from, FrameJet, SpectralData};
use crate::system::SystemModel;

pub use cutoff::CutoffParams;
pub use terms::{
    diagonal_residuals, effective_fluxes, lambda_terms, DiagonalResiduals, EffectiveFluxes, LambdaTerms, LAMBDA_NAMES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecompositionMode {
    /// `r̃_i = r_i(u)`; an exact linear solve.
    Eigenbasis,
    /// First-order travelling-wave basis; a small Newton solve per cell.
    Travelling1,
}

impl std::str::FromStr for DecompositionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eigenbasis" => Ok(Self::Eigenbasis),
            "travelling1" => Ok(Self::Travelling1),
            other => Err(Error::InvalidInput(format!("unknown decomposition mode `{other}`"))),
        }
    }
}

/// Per-cell, per-family decomposition of one snapshot. Family-indexed
/// arrays are laid out as `[family][cell]`.
#[derive(Clone, Debug)]
pub struct WaveComponents {
    pub mode: DecompositionMode,
    pub time: f64,
    pub x0: f64,
    pub h: f64,
    pub boundary: Boundary,
    pub u_star: DVector<f64>,
    pub lambda_star: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub vbar: Vec<Vec<f64>>,
    /// `ξ(w_i/v_i)`.
    pub xi: Vec<Vec<f64>>,
    /// `λ_i(u)` and `μ_i(u)`.
    pub lambda: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub lambda_tilde: Vec<Vec<f64>>,
    /// Columns are `r̃_i` at each cell.
    pub rtilde: Vec<DMatrix<f64>>,
    /// Travelling mode only: column `i` holds `<l_j, B r_{i,u} r_i + r_i·DB r_i>` over `j`.
    pub numerators: Option<Vec<DMatrix<f64>>>,
    pub recon_residual: Vec<f64>,
}

impl WaveComponents {
    pub fn dim(&self) -> usize {
        self.v.len()
    }
    pub fn cells(&self) -> usize {
        self.recon_residual.len()
    }
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.h
    }
    /// `ω_i = w_i − λ_i^* v_i`.
    pub fn omega(&self, i: usize, j: usize) -> f64 {
        self.w[i][j] - self.lambda_star[i] * self.v[i][j]
    }
    /// `Σ v_i r̃_i` and `Σ ω_i r̃_i` at cell `j`.
    pub fn reconstruct(&self, j: usize) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim();
        let v = DVector::from_fn(n, |i, _| self.v[i][j]);
        let om = DVector::from_fn(n, |i, _| self.omega(i, j));
        (&self.rtilde[j] * v, &self.rtilde[j] * om)
    }
    pub fn max_recon_residual(&self) -> f64 {
        self.recon_residual.iter().fold(0.0, |a, b| a.max(*b))
    }
    /// `ξ_i v̄_i`.
    pub fn s(&self, i: usize, j: usize) -> f64 {
        self.xi[i][j] * self.vbar[i][j]
    }
    /// `c_k` of family `i` at speed `sigma`, cell `j`.
    pub(crate) fn correction(&self, i: usize, j: usize, sigma: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        let nums = self.numerators.as_ref()?;
        let n = self.dim();
        let mut c = DVector::zeros(n);
        let mut dc = DVector::zeros(n);
        for k in (0..n).filter(|&k| k != i) {
            let lam_k = self.lambda[k][j];
            let lam_i = self.lambda[i][j];
            let ratio = self.mu[k][j] / self.mu[i][j];
            let den = (lam_k - sigma) - 2.0 * ratio * (lam_i - sigma);
            let dden = -1.0 + 2.0 * ratio;
            c[k] = nums[j][(k, i)] / den;
            dc[k] = -nums[j][(k, i)] * dden / (den * den);
        }
        Some((c, dc))
    }
}

/// `v̄_i = v_i χ(v_i^{2N}/ε) Π_{j≠i} η(v_j²/v_i)`.
pub fn vbar(v: &[f64], i: usize, p: &CutoffParams) -> f64 {
    let vi = v[i];
    if vi == 0.0 {
        return 0.0;
    }
    let mut out = vi * cutoff::chi(vi.powi(2 * p.n_exp as i32) / p.epsilon_cut);
    for (j, vj) in v.iter().enumerate() {
        if j != i && out != 0.0 {
            out *= cutoff::eta(vj * vj / vi);
        }
    }
    out
}

/// `σ_i = λ_i^* − θ(w_i/v_i)`.
pub fn sigma_of(lambda_star: f64, w: f64, v: f64, p: &CutoffParams) -> f64 {
    lambda_star - cutoff::theta(p.ratio(w, v), p.delta1)
}

/// Eigenbasis amplitudes `v_i = <l_i, u_x>`, `w_i = <l_i, u_t> + λ_i^* v_i`.
pub fn eigen_amplitudes(
    spec: &SpectralData,
    lambda_star: &[f64],
    ux: &DVector<f64>,
    ut: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let v = spec.p() * ux;
    let w = spec.p() * ut + DVector::from_fn(spec.dim(), |i, _| lambda_star[i] * v[i]);
    (v, w)
}

/// Cutoff bookkeeping for one cell's amplitudes.
struct CellCutoffs {
    sigma: Vec<f64>,
    vbar: Vec<f64>,
    xi: Vec<f64>,
}

fn cell_cutoffs(v: &[f64], w: &[f64], lambda_star: &[f64], p: &CutoffParams) -> CellCutoffs {
    let n = v.len();
    CellCutoffs {
        sigma: (0..n).map(|i| sigma_of(lambda_star[i], w[i], v[i], p)).collect(),
        vbar: (0..n).map(|i| vbar(v, i, p)).collect(),
        xi: (0..n).map(|i| cutoff::xi(p.ratio(w[i], v[i]), p.delta1)).collect(),
    }
}

/// Corrected basis at one cell for amplitudes `(v, w)`.
fn corrected_basis(
    spec: &SpectralData,
    nums: &DMatrix<f64>,
    cc: &CellCutoffs,
    min_den: f64,
) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    let mut rt = spec.right.clone();
    for i in 0..n {
        let s = cc.xi[i] * cc.vbar[i];
        if s == 0.0 {
            continue;
        }
        let c = tw_correction_from(spec, &nums.column(i).into_owned(), i, cc.sigma[i], min_den)?;
        let mut col = spec.r(i);
        for k in (0..n).filter(|&k| k != i) {
            col += spec.r(k) * (s * c[k]);
        }
        rt.set_column(i, &col);
    }
    Ok(rt)
}

/// Residual of `u_x = Σ v_i r̃_i`, `u_t = Σ ω_i r̃_i`, stacked.
#[allow(clippy::too_many_arguments)]
fn travelling_residual(
    x: &DVector<f64>,
    spec: &SpectralData,
    nums: &DMatrix<f64>,
    lambda_star: &[f64],
    ux: &DVector<f64>,
    ut: &DVector<f64>,
    p: &CutoffParams,
    min_den: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = spec.dim();
    let v: Vec<f64> = (0..n).map(|i| x[i]).collect();
    let w: Vec<f64> = (0..n).map(|i| x[n + i]).collect();
    let cc = cell_cutoffs(&v, &w, lambda_star, p);
    let rt = corrected_basis(spec, nums, &cc, min_den)?;
    let vv = DVector::from_vec(v.clone());
    let om = DVector::from_fn(n, |i, _| w[i] - lambda_star[i] * v[i]);
    let mut f = DVector::zeros(2 * n);
    f.rows_mut(0, n).copy_from(&(&rt * vv - ux));
    f.rows_mut(n, n).copy_from(&(&rt * om - ut));
    Ok((f, rt))
}

#[allow(clippy::too_many_arguments)]
fn newton_cell(
    cell: usize,
    x0: DVector<f64>,
    spec: &SpectralData,
    nums: &DMatrix<f64>,
    lambda_star: &[f64],
    ux: &DVector<f64>,
    ut: &DVector<f64>,
    p: &CutoffParams,
    min_den: f64,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    let n = spec.dim();
    let tol_x = p.newton_tol * (1.0 + ux.amax());
    let tol_t = p.newton_tol * (1.0 + ut.amax());
    let converged = |f: &DVector<f64>| f.rows(0, n).amax() <= tol_x && f.rows(n, n).amax() <= tol_t;
    let resid = |x: &DVector<f64>| travelling_residual(x, spec, nums, lambda_star, ux, ut, p, min_den);

    let mut x = x0;
    let (mut f, mut rt) = resid(&x)?;
    for _ in 0..p.newton_max_iter {
        if converged(&f) {
            return Ok((x, rt, f.norm()));
        }
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for k in 0..2 * n {
            let hk = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += hk;
            xm[k] -= hk;
            let fp = resid(&xp)?.0;
            let fm = resid(&xm)?.0;
            jac.set_column(k, &((fp - fm) / (2.0 * hk)));
        }
        let dx = match jac.lu().solve(&(-&f)) {
            Some(d) => d,
            None => break,
        };
        let f0 = f.norm();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let xt = &x + &dx * alpha;
            let (ft, rtt) = resid(&xt)?;
            if ft.norm() < f0 || converged(&ft) {
                x = xt;
                f = ft;
                rt = rtt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if converged(&f) {
        Ok((x, rt, f.norm()))
    } else {
        Err(Error::NewtonDivergence { cell, residual: f.amax() })
    }
}

/// Decomposes one snapshot. `ut` is the pointwise `u_t` (see
/// [`crate::solver::compute_ut`]); `u^*` is the left far-field state.
pub fn decompose_field(
    model: &SystemModel,
    field: &GridField,
    ut: &GridField,
    params: &CutoffParams,
    mode: DecompositionMode,
) -> Result<WaveComponents> {
    let n = field.dim();
    let m = field.cells();
    if n != model.dim() || ut.dim() != n || ut.cells() != m {
        return Err(Error::InvalidInput("field, u_t and model dimensions disagree".into()));
    }
    let ux = derivative(field, 1);

    if mode == DecompositionMode::Travelling1 {
        let threshold = params.data_threshold.unwrap_or(0.5 * model.c0_claimed());
        let uxx = derivative(field, 2);
        let (a, b) = (ux.max_abs(), uxx.max_abs());
        if a > threshold || b > threshold {
            return Err(Error::DataTooLarge { ux: a, uxx: b, threshold });
        }
    }

    let u_star = field.state_vec(0);
    let spec_star = decompose(model, &u_star, None)?;
    let lambda_star: Vec<f64> = spec_star.lambdas.as_slice().to_vec();
    let min_den = model.c0_claimed() / 4.0;

    let mut out = WaveComponents {
        mode,
        time: field.time,
        x0: field.x0,
        h: field.h,
        boundary: field.boundary,
        u_star,
        lambda_star: lambda_star.clone(),
        v: vec![vec![0.0; m]; n],
        w: vec![vec![0.0; m]; n],
        sigma: vec![vec![0.0; m]; n],
        vbar: vec![vec![0.0; m]; n],
        xi: vec![vec![0.0; m]; n],
        lambda: vec![vec![0.0; m]; n],
        mu: vec![vec![0.0; m]; n],
        lambda_tilde: vec![vec![0.0; m]; n],
        rtilde: Vec::with_capacity(m),
        numerators: (mode == DecompositionMode::Travelling1).then(|| Vec::with_capacity(m)),
        recon_residual: vec![0.0; m],
    };

    for j in 0..m {
        let u = field.state_vec(j);
        let uxj = ux.state_vec(j);
        let utj = ut.state_vec(j);
        let (x, rt, lt, res) = match mode {
            DecompositionMode::Eigenbasis => {
                let spec = decompose(model, &u, None)?;
                let (v, w) = eigen_amplitudes(&spec, &lambda_star, &uxj, &utj);
                let mut x = DVector::zeros(2 * n);
                x.rows_mut(0, n).copy_from(&v);
                x.rows_mut(n, n).copy_from(&w);
                let om = DVector::from_fn(n, |i, _| w[i] - lambda_star[i] * v[i]);
                let res = (spec.p_inv() * &v - &uxj).norm() + (spec.p_inv() * om - &utj).norm();
                let lt = spec.lambdas.as_slice().to_vec();
                for i in 0..n {
                    out.lambda[i][j] = spec.lambdas[i];
                    out.mu[i][j] = spec.mus[i];
                }
                (x, spec.right.clone(), lt, res)
            }
            DecompositionMode::Travelling1 => {
                let jet = FrameJet::new(model, &u)?;
                let spec = &jet.spec;
                let mut nums = DMatrix::zeros(n, n);
                for i in 0..n {
                    nums.set_column(i, &jet.tw_numerators(i));
                }
                let (v0, w0) = eigen_amplitudes(spec, &lambda_star, &uxj, &utj);
                let mut x0 = DVector::zeros(2 * n);
                x0.rows_mut(0, n).copy_from(&v0);
                x0.rows_mut(n, n).copy_from(&w0);
                let (x, rt, res) = newton_cell(j, x0, spec, &nums, &lambda_star, &uxj, &utj, params, min_den)?;
                for i in 0..n {
                    out.lambda[i][j] = spec.lambdas[i];
                    out.mu[i][j] = spec.mus[i];
                }
                let lt = travelling_lambda_tilde(&jet, &nums, &x, &lambda_star, params, min_den)?;
                out.numerators.as_mut().expect("travelling mode").push(nums);
                (x, rt, lt, res)
            }
        };
        let v: Vec<f64> = (0..n).map(|i| x[i]).collect();
        let w: Vec<f64> = (0..n).map(|i| x[n + i]).collect();
        let cc = cell_cutoffs(&v, &w, &lambda_star, params);
        for i in 0..n {
            out.v[i][j] = v[i];
            out.w[i][j] = w[i];
            out.sigma[i][j] = cc.sigma[i];
            out.vbar[i][j] = cc.vbar[i];
            out.xi[i][j] = cc.xi[i];
            out.lambda_tilde[i][j] = lt[i];
        }
        out.rtilde.push(rt);
        out.recon_residual[j] = res;
    }
    Ok(out)
}

/// `λ̃_i = λ_i − v_i <l_i, B r̃_{i,u} r̃_i + r̃_i·DB r̃_i>`, with `r̃_{i,u}`
/// taken at frozen correction coefficients.
fn travelling_lambda_tilde(
    jet: &FrameJet,
    nums: &DMatrix<f64>,
    x: &DVector<f64>,
    lambda_star: &[f64],
    p: &CutoffParams,
    min_den: f64,
) -> Result<Vec<f64>> {
    let spec = &jet.spec;
    let n = spec.dim();
    let v: Vec<f64> = (0..n).map(|i| x[i]).collect();
    let w: Vec<f64> = (0..n).map(|i| x[n + i]).collect();
    let cc = cell_cutoffs(&v, &w, lambda_star, p);
    let rt = corrected_basis(spec, nums, &cc, min_den)?;
    let mut out = Vec::with_capacity(n);
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        let d = rt.column(i).into_owned();
        let s = cc.xi[i] * cc.vbar[i];
        let mut dr = jet.dr_along(i, &d);
        if s != 0.0 {
            let c = tw_correction_from(spec, &nums.column(i).into_owned(), i, cc.sigma[i], min_den)?;
            for k in (0..n).filter(|&k| k != i) {
                dr += jet.dr_along(k, &d) * (s * c[k]);
            }
        }
        let g = &jet.b * dr + jet.db_along(&d) * &d;
        out.push(spec.lambdas[i] - v[i] * spec.l(i).dot(&g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::compute_ut;
    use crate::system::builtin_system;

    fn tanh_field(m: usize) -> GridField {
        GridField::from_fn(-20.0, 20.0, m, 1, Boundary::ConstantExtrapolation, |x| vec![-(x / 2.0).tanh()]).unwrap()
    }

    #[test]
    fn eigenbasis_forced_example() {
        let model = builtin_system("shared_frame2").unwrap();
        let p = CutoffParams::default();
        let ustar = DVector::from_vec(vec![0.0, 0.0]);
        let spec = decompose(&model, &ustar, None).unwrap();
        let r1 = spec.r(0);
        let ut = &r1 * (-spec.lambdas[0]);
        let (v, w) = eigen_amplitudes(&spec, spec.lambdas.as_slice(), &r1, &ut);
        assert!((v[0] - 1.0).abs() < 1e-14 && v[1].abs() < 1e-14);
        assert!(w[0].abs() < 1e-14);
        assert_eq!(sigma_of(spec.lambdas[0], w[0], v[0], &p), spec.lambdas[0] - cutoff::theta(w[0], p.delta1));
        assert!((sigma_of(spec.lambdas[0], w[0], v[0], &p) - spec.lambdas[0]).abs() < 1e-14);
    }

    #[test]
    fn constant_field_is_zero() {
        for mode in [DecompositionMode::Eigenbasis, DecompositionMode::Travelling1] {
            let model = builtin_system("rotating2").unwrap();
            let f = GridField::from_fn(-1.0, 1.0, 16, 2, Boundary::ConstantExtrapolation, |_| vec![0.05, -0.02])
                .unwrap();
            let ut = compute_ut(&model, &f, 1.0);
            let c = decompose_field(&model, &f, &ut, &CutoffParams::default(), mode).unwrap();
            for i in 0..2 {
                assert!(c.v[i].iter().all(|v| *v == 0.0));
                assert!(c.w[i].iter().all(|v| *v == 0.0));
            }
            let spec = decompose(&model, &f.state_vec(3), None).unwrap();
            assert!((&c.rtilde[3] - &spec.right).amax() < 1e-15);
        }
    }

    #[test]
    fn burgers_travelling_ratio() {
        let model = builtin_system("burgers").unwrap();
        let f = tanh_field(1024);
        let ut = compute_ut(&model, &f, 1.0);
        let c = decompose_field(&model, &f, &ut, &CutoffParams::default(), DecompositionMode::Travelling1).unwrap();
        // λ* = u_- = 1 (up to the tail), σ = 0
        let ls = c.lambda_star[0];
        for j in 0..1024 {
            if c.v[0][j].abs() > 1e-6 {
                assert!((c.w[0][j] / c.v[0][j] - ls).abs() < 1e-3);
            }
        }
        assert!(c.max_recon_residual() < 1e-9);
    }

    #[test]
    fn travelling_mode_reconstructs() {
        let model = builtin_system("rotating2").unwrap();
        let f = GridField::from_fn(-10.0, 10.0, 200, 2, Boundary::ConstantExtrapolation, |x| {
            let b = (-x * x / 4.0).exp();
            vec![0.05 * b, 0.03 * b * x.sin()]
        })
        .unwrap();
        let ut = compute_ut(&model, &f, 1.0);
        let p = CutoffParams::default();
        let c = decompose_field(&model, &f, &ut, &p, DecompositionMode::Travelling1).unwrap();
        let ux = derivative(&f, 1);
        for j in 0..200 {
            let (rx, rt) = c.reconstruct(j);
            assert!((rx - ux.state_vec(j)).amax() <= p.newton_tol * (1.0 + ux.state_vec(j).amax()));
            assert!((rt - ut.state_vec(j)).amax() <= p.newton_tol * (1.0 + ut.state_vec(j).amax()));
        }
    }

    #[test]
    fn travelling_rejects_large_data() {
        let model = builtin_system("rotating2").unwrap();
        let f =
            GridField::from_fn(-0.5, 0.5, 64, 2, Boundary::ConstantExtrapolation, |x| vec![0.15 * (20.0 * x).tanh(), 0.0])
                .unwrap();
        let ut = compute_ut(&model, &f, 1.0);
        let r = decompose_field(&model, &f, &ut, &CutoffParams::default(), DecompositionMode::Travelling1);
        assert!(matches!(r, Err(Error::DataTooLarge { .. })));
    }

    #[test]
    fn vbar_cutoffs() {
        let p = CutoffParams::default();
        assert_eq!(vbar(&[1e-4, 0.0], 0, &p), 0.0);
        assert_eq!(vbar(&[0.01, 0.0], 0, &p), 0.01);
        // v_j² ≥ 4/5 |v_i| switches family i off
        assert_eq!(vbar(&[0.01, 0.1], 0, &p), 0.0);
    }
}
