//! Joint eigenstructure of `A(u)` and `B(u)`.
//!
//! `A` and `B` commute, so the right eigenvectors of `A` diagonalise `B` as
//! well. Right vectors are unit length, left vectors are the rows of the
//! inverse frame, and signs are continued from the frame at the model's
//! reference state.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{fd_step, SystemModel};

/// Below this gap the spectrum is treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralData {
    /// Eigenvalues of `A`, ascending.
    pub lambdas: DVector<f64>,
    /// Eigenvalues of `B` paired with the same eigenvectors.
    pub mus: DVector<f64>,
    /// Columns are the unit right eigenvectors `r_i` (this is `P^{-1}`).
    pub right: DMatrix<f64>,
    /// Rows are the left eigenvectors `l_i` with `<l_i, r_j> = δ_ij` (this is `P`).
    pub left: DMatrix<f64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }
    pub fn r(&self, i: usize) -> DVector<f64> {
        self.right.column(i).into_owned()
    }
    pub fn l(&self, i: usize) -> DVector<f64> {
        self.left.row(i).transpose()
    }
    /// `<l_i, x>`.
    pub fn project(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.left.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }
    pub fn p(&self) -> &DMatrix<f64> {
        &self.left
    }
    pub fn p_inv(&self) -> &DMatrix<f64> {
        &self.right
    }
}

/// Real eigenvalues of a square matrix, ascending.
pub fn real_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    let mut out = match n {
        0 => Vec::new(),
        1 => vec![a[(0, 0)]],
        2 => {
            let (l1, l2) = eig2(a)?;
            vec![l1, l2]
        }
        _ => {
            let ev = a
                .clone()
                .schur()
                .eigenvalues()
                .ok_or_else(|| Error::ComplexEigenvalues(Vec::new()))?;
            ev.iter().copied().collect()
        }
    };
    out.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok(out)
}

fn eig2(a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let half_tr = 0.5 * (p + s);
    let half_diff = 0.5 * (p - s);
    let disc = half_diff * half_diff + q * r;
    let scale = half_diff * half_diff + (q * r).abs();
    if disc < 0.0 {
        if disc >= -1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Ok((half_tr, half_tr));
        }
        return Err(Error::ComplexEigenvalues(Vec::new()));
    }
    let root = disc.sqrt();
    Ok((half_tr - root, half_tr + root))
}

/// Null vector of `A - λI` for a simple eigenvalue.
fn eigenvector(a: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = a.nrows();
    if n == 1 {
        return DVector::from_element(1, 1.0);
    }
    if n == 2 {
        let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
        let c1 = DVector::from_vec(vec![q, lambda - p]);
        let c2 = DVector::from_vec(vec![lambda - s, r]);
        let v = if c1.norm() >= c2.norm() { c1 } else { c2 };
        let nv = v.norm();
        if nv > 0.0 {
            return v / nv;
        }
        return DVector::from_vec(vec![1.0, 0.0]);
    }
    let shifted = a - DMatrix::identity(n, n) * lambda;
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &s)| if s < acc.1 { (k, s) } else { acc });
    let v = vt.row(idx).transpose();
    let nv = v.norm();
    v / nv
}

/// Eigen-decomposition without sign continuation.
pub(crate) fn raw_decomposition(model: &SystemModel, u: &DVector<f64>) -> Result<SpectralData> {
    decompose_matrices(&model.a(u), &model.b(u), u)
}

fn decompose_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, u: &DVector<f64>) -> Result<SpectralData> {
    let n = a.nrows();
    let lambdas = real_eigenvalues(a).map_err(|_| Error::ComplexEigenvalues(u.as_slice().to_vec()))?;
    for w in lambdas.windows(2) {
        let gap = w[1] - w[0];
        if gap < DEGENERACY_GAP {
            return Err(Error::DegenerateSpectrum { gap, state: u.as_slice().to_vec() });
        }
    }
    let mut right = DMatrix::zeros(n, n);
    for (i, &lam) in lambdas.iter().enumerate() {
        right.set_column(i, &eigenvector(a, lam));
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateSpectrum { gap: 0.0, state: u.as_slice().to_vec() })?;
    let mut mus = DVector::zeros(n);
    for i in 0..n {
        let bri = b * right.column(i);
        mus[i] = left.row(i).iter().zip(bri.iter()).map(|(x, y)| x * y).sum();
    }
    Ok(SpectralData { lambdas: DVector::from_vec(lambdas), mus, right, left })
}

/// Fixes each `r_i` so its largest-magnitude entry is positive.
pub(crate) fn canonical_signs(sd: &mut SpectralData) {
    for i in 0..sd.dim() {
        let col = sd.right.column(i);
        let (k, _) = col
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (k, &x)| if x.abs() > acc.1 + 1e-12 { (k, x.abs()) } else { acc });
        if col[k] < 0.0 {
            flip(sd, i);
        }
    }
}

fn flip(sd: &mut SpectralData, i: usize) {
    for k in 0..sd.dim() {
        sd.right[(k, i)] = -sd.right[(k, i)];
        sd.left[(i, k)] = -sd.left[(i, k)];
    }
}

fn orient(sd: &mut SpectralData, reference: &DMatrix<f64>) {
    for i in 0..sd.dim() {
        if sd.right.column(i).dot(&reference.column(i)) < 0.0 {
            flip(sd, i);
        }
    }
}

/// Eigenstructure at `u`, sign-continued from `orientation_ref` or, when
/// absent, from the frame at the model's reference state.
pub fn decompose(
    model: &SystemModel,
    u: &DVector<f64>,
    orientation_ref: Option<&SpectralData>,
) -> Result<SpectralData> {
    let mut sd = raw_decomposition(model, u)?;
    match orientation_ref {
        Some(r) => orient(&mut sd, &r.right),
        None => match model.reference_frame() {
            Some(frame) => orient(&mut sd, frame),
            None => canonical_signs(&mut sd),
        },
    }
    Ok(sd)
}

/// `direction · D r_i` by central differences of the sign-continued field.
pub fn eigenvector_derivative(
    model: &SystemModel,
    u: &DVector<f64>,
    i: usize,
    direction: &DVector<f64>,
) -> Result<DVector<f64>> {
    let base = decompose(model, u, None)?;
    let h = fd_step(u);
    let plus = decompose(model, &(u + direction * h), Some(&base))?;
    let minus = decompose(model, &(u - direction * h), Some(&base))?;
    Ok((plus.r(i) - minus.r(i)) / (2.0 * h))
}

/// First derivatives of the eigenframe and of `B` at one state.
#[derive(Clone, Debug)]
pub struct FrameJet {
    pub spec: SpectralData,
    pub b: DMatrix<f64>,
    /// `dr[k]` holds `∂_{u_k}` of the right-eigenvector matrix.
    pub dr: Vec<DMatrix<f64>>,
    /// `db[k] = ∂_{u_k} B`.
    pub db: Vec<DMatrix<f64>>,
}

impl FrameJet {
    pub fn new(model: &SystemModel, u: &DVector<f64>) -> Result<Self> {
        let spec = decompose(model, u, None)?;
        let n = model.dim();
        let h = fd_step(u);
        let mut dr = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        for k in 0..n {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let sp = decompose(model, &up, Some(&spec))?;
            let sm = decompose(model, &um, Some(&spec))?;
            dr.push((sp.right - sm.right) / (2.0 * h));
            db.push((model.b(&up) - model.b(&um)) / (2.0 * h));
        }
        Ok(Self { b: model.b(u), spec, dr, db })
    }

    /// `r_{i,u} d`.
    pub fn dr_along(&self, i: usize, d: &DVector<f64>) -> DVector<f64> {
        let n = self.spec.dim();
        let mut out = DVector::zeros(n);
        for k in 0..n {
            out += self.dr[k].column(i) * d[k];
        }
        out
    }

    /// `d · DB`.
    pub fn db_along(&self, d: &DVector<f64>) -> DMatrix<f64> {
        let n = self.spec.dim();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..n {
            out += &self.db[k] * d[k];
        }
        out
    }

    /// `B r_{i,u} d + (d·DB) d` for a direction `d` in family `i`.
    pub fn curvature_vector(&self, i: usize, d: &DVector<f64>) -> DVector<f64> {
        &self.b * self.dr_along(i, d) + self.db_along(d) * d
    }

    /// Numerators `<l_j, B r_{i,u} r_i + r_i·DB r_i>` for all `j`.
    pub fn tw_numerators(&self, i: usize) -> DVector<f64> {
        let g = self.curvature_vector(i, &self.spec.r(i));
        &self.spec.left * g
    }
}

/// Denominator `(λ_j - σ) - 2 μ_j μ_i^{-1} (λ_i - σ)` of the first-order correction.
pub fn tw_denominator(spec: &SpectralData, i: usize, j: usize, sigma: f64) -> f64 {
    (spec.lambdas[j] - sigma) - 2.0 * spec.mus[j] / spec.mus[i] * (spec.lambdas[i] - sigma)
}

/// Coefficients `c_j` (with `c_i = 0`) from precomputed numerators.
pub fn tw_correction_from(
    spec: &SpectralData,
    numerators: &DVector<f64>,
    i: usize,
    sigma: f64,
    min_denominator: f64,
) -> Result<DVector<f64>> {
    let n = spec.dim();
    let mut c = DVector::zeros(n);
    for j in (0..n).filter(|&j| j != i) {
        let den = tw_denominator(spec, i, j, sigma);
        if den.abs() < min_denominator {
            return Err(Error::ResonantDenominator { i, j, denominator: den });
        }
        c[j] = numerators[j] / den;
    }
    Ok(c)
}

/// First-order travelling-wave basis correction
/// `r̃_i ≈ r_i + v_i Σ_{j≠i} c_j r_j` at speed `sigma`.
pub fn first_order_tw_correction(
    model: &SystemModel,
    u: &DVector<f64>,
    i: usize,
    sigma: f64,
) -> Result<DVector<f64>> {
    if model.dim() == 1 {
        return Ok(DVector::zeros(1));
    }
    let jet = FrameJet::new(model, u)?;
    tw_correction_from(&jet.spec, &jet.tw_numerators(i), i, sigma, model.c0_claimed() / 4.0)
}
