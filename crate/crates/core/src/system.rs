//! Hyperbolic systems with commuting viscosity.
//!
//! A [`SystemModel`] bundles the drift `A(u)`, the viscosity `B(u)`, an
//! optional conservative flux with `Df = A`, the admissible state box and the
//! claimed spectral constants. Matrices are supplied as callbacks.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral;

pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type FluxFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Relative tolerance for `AB = BA`.
pub const COMMUTATION_TOL: f64 = 1e-10;
/// Relative tolerance for the finite-difference Jacobian of the flux.
pub const JACOBIAN_TOL: f64 = 1e-5;
/// Step used for the Jacobian check.
pub const JACOBIAN_STEP: f64 = 1e-5;

/// Finite-difference step for derivatives of `A`, `B` and the eigenframe.
pub fn fd_step(u: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + u.amax())
}

/// Closed per-component box.
#[derive(Clone, Debug, PartialEq)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidInput("state box dimension mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::InvalidInput("empty state box".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(n: usize, half_width: f64) -> Self {
        Self { lo: vec![-half_width; n], hi: vec![half_width; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Box grown by `frac` of its width on each side.
    pub fn inflated(&self, frac: f64) -> Self {
        let (lo, hi) = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| {
                let w = (b - a).max(f64::EPSILON);
                (a - frac * w, b + frac * w)
            })
            .unzip();
        Self { lo, hi }
    }

    /// Tensor grid with `per_axis` nodes per axis (endpoints included),
    /// enumerated in lexicographic order.
    pub fn grid_samples(&self, per_axis: usize) -> Vec<DVector<f64>> {
        let n = self.dim();
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let u = DVector::from_iterator(
                n,
                (0..n).map(|c| {
                    let s = idx[c] as f64 / (per_axis - 1) as f64;
                    self.lo[c] + s * (self.hi[c] - self.lo[c])
                }),
            );
            out.push(u);
            for c in (0..n).rev() {
                idx[c] += 1;
                if idx[c] < per_axis {
                    break;
                }
                idx[c] = 0;
            }
        }
        out
    }
}

/// The pair `(A, B)` with its admissible box and claimed constants.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    n: usize,
    eval_a: MatrixFn,
    eval_b: MatrixFn,
    eval_flux: Option<FluxFn>,
    state_box: StateBox,
    c0_claimed: f64,
    c1_claimed: f64,
    reference_state: DVector<f64>,
    reference_frame: Arc<OnceLock<Option<DMatrix<f64>>>>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("conservative", &self.eval_flux.is_some())
            .field("state_box", &self.state_box)
            .field("c0_claimed", &self.c0_claimed)
            .field("c1_claimed", &self.c1_claimed)
            .field("reference_state", &self.reference_state.as_slice())
            .finish()
    }
}

impl SystemModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n: usize,
        eval_a: MatrixFn,
        eval_b: MatrixFn,
        state_box: StateBox,
        c0_claimed: f64,
        c1_claimed: f64,
        reference_state: DVector<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if state_box.dim() != n || reference_state.len() != n {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        if !state_box.contains(reference_state.as_slice()) {
            return Err(Error::InvalidInput("reference state outside the box".into()));
        }
        if !(c0_claimed > 0.0) || !(c1_claimed > 0.0) {
            return Err(Error::InvalidInput("claimed constants must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            n,
            eval_a,
            eval_b,
            eval_flux: None,
            state_box,
            c0_claimed,
            c1_claimed,
            reference_state,
            reference_frame: Arc::new(OnceLock::new()),
        })
    }

    /// The same system with `B` replaced by `εB`.
    pub fn with_viscosity_scale(&self, epsilon: f64) -> Self {
        let b = self.eval_b.clone();
        let mut out = self.clone();
        out.eval_b = Arc::new(move |u| b(u) * epsilon);
        out.c1_claimed *= epsilon;
        out.reference_frame = Arc::new(OnceLock::new());
        out
    }

    pub fn with_flux(mut self, flux: FluxFn) -> Self {
        self.eval_flux = Some(flux);
        self
    }

    /// Constant matrices; claimed constants are supplied by the caller.
    pub fn constant(
        name: &str,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        state_box: StateBox,
        c0_claimed: f64,
        c1_claimed: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() != n {
            return Err(Error::InvalidInput("matrices must be square and of equal size".into()));
        }
        let reference = DVector::from_iterator(
            n,
            state_box.lo.iter().zip(&state_box.hi).map(|(l, h)| 0.5 * (l + h)),
        );
        let flux_a = a.clone();
        Self::new(
            name,
            n,
            Arc::new(move |_| a.clone()),
            Arc::new(move |_| b.clone()),
            state_box,
            c0_claimed,
            c1_claimed,
            reference,
        )
        .map(|m| m.with_flux(Arc::new(move |u| &flux_a * u)))
    }

    /// Scalar conservation law `u_t + f(u)_x = (b(u) u_x)_x`.
    pub fn scalar(
        name: &str,
        flux: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dflux: impl Fn(f64) -> f64 + Send + Sync + 'static,
        viscosity: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
        c1_claimed: f64,
    ) -> Result<Self> {
        let reference = if lo <= 0.0 && 0.0 <= hi { 0.0 } else { 0.5 * (lo + hi) };
        Self::new(
            name,
            1,
            Arc::new(move |u| DMatrix::from_element(1, 1, dflux(u[0]))),
            Arc::new(move |u| DMatrix::from_element(1, 1, viscosity(u[0]))),
            StateBox::new(vec![lo], vec![hi])?,
            f64::INFINITY,
            c1_claimed,
            DVector::from_element(1, reference),
        )
        .map(|m| m.with_flux(Arc::new(move |u| DVector::from_element(1, flux(u[0])))))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn state_box(&self) -> &StateBox {
        &self.state_box
    }
    pub fn c0_claimed(&self) -> f64 {
        self.c0_claimed
    }
    pub fn c1_claimed(&self) -> f64 {
        self.c1_claimed
    }
    pub fn reference_state(&self) -> &DVector<f64> {
        &self.reference_state
    }
    pub fn is_conservative(&self) -> bool {
        self.eval_flux.is_some()
    }

    pub fn a(&self, u: &DVector<f64>) -> DMatrix<f64> {
        (self.eval_a)(u)
    }
    pub fn b(&self, u: &DVector<f64>) -> DMatrix<f64> {
        (self.eval_b)(u)
    }
    pub fn flux(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        self.eval_flux.as_ref().map(|f| f(u))
    }

    /// Central difference of `B` along `dir`.
    pub fn db_along(&self, u: &DVector<f64>, dir: &DVector<f64>) -> DMatrix<f64> {
        let h = fd_step(u);
        let bp = self.b(&(u + dir * h));
        let bm = self.b(&(u - dir * h));
        (bp - bm) / (2.0 * h)
    }

    /// Oriented eigenframe at the reference state (columns are `r_i(u*)`).
    pub(crate) fn reference_frame(&self) -> Option<&DMatrix<f64>> {
        self.reference_frame
            .get_or_init(|| {
                spectral::raw_decomposition(self, &self.reference_state).ok().map(|mut sd| {
                    spectral::canonical_signs(&mut sd);
                    sd.right
                })
            })
            .as_ref()
    }
}

/// Worst values observed while sampling the box.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub samples: usize,
    /// Smallest pointwise gap `min_{i!=j} |λ_i - λ_j|` (infinite when n = 1).
    pub min_gap: f64,
    /// Smallest viscosity eigenvalue.
    pub mu_floor: f64,
    /// Largest `||AB - BA||_F`.
    pub max_commutator: f64,
    /// Largest `||AB - BA||_F / (1 + ||A|| ||B||)`.
    pub max_commutator_rel: f64,
    /// Largest relative mismatch between `Df` and `A` (flux models only).
    pub max_jacobian_mismatch: Option<f64>,
    pub gap_ok: bool,
    pub mu_ok: bool,
    pub commute_ok: bool,
    pub jacobian_ok: bool,
    pub degenerate: bool,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.gap_ok && self.mu_ok && self.commute_ok && self.jacobian_ok && !self.degenerate
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.degenerate {
            out.push(format!("DegenerateSpectrum (min gap {:.3e})", self.min_gap));
        } else if !self.gap_ok {
            out.push(format!("gap {:.6e} below claimed c0", self.min_gap));
        }
        if !self.mu_ok {
            out.push(format!("viscosity floor {:.6e} below claimed c1", self.mu_floor));
        }
        if !self.commute_ok {
            out.push(format!("commutation failed (||AB-BA|| = {:.3e})", self.max_commutator));
        }
        if !self.jacobian_ok {
            out.push(format!(
                "flux Jacobian mismatch {:.3e}",
                self.max_jacobian_mismatch.unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples            {}", self.samples)?;
        writeln!(f, "min gap            {:.6e}  {}", self.min_gap, ok(self.gap_ok && !self.degenerate))?;
        writeln!(f, "viscosity floor    {:.6e}  {}", self.mu_floor, ok(self.mu_ok))?;
        writeln!(f, "max ||AB-BA||_F    {:.3e}  {}", self.max_commutator, ok(self.commute_ok))?;
        match self.max_jacobian_mismatch {
            Some(j) => writeln!(f, "max |Df - A| rel   {:.3e}  {}", j, ok(self.jacobian_ok))?,
            None => writeln!(f, "max |Df - A| rel   (no flux)")?,
        }
        write!(f, "overall            {}", ok(self.passed()))
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "FAIL"
    }
}

/// Samples the box on a tensor grid and checks gap, viscosity floor,
/// commutation and (when a flux exists) the Jacobian relation.
pub fn check_hypotheses(model: &SystemModel, samples_per_axis: usize) -> Result<HypothesisReport> {
    if samples_per_axis < 2 {
        return Err(Error::InvalidInput("samples_per_axis must be >= 2".into()));
    }
    let samples = model.state_box().grid_samples(samples_per_axis);
    let mut min_gap = f64::INFINITY;
    let mut mu_floor = f64::INFINITY;
    let mut max_comm = 0.0f64;
    let mut max_comm_rel = 0.0f64;
    let mut max_jac: Option<f64> = None;
    for u in &samples {
        let a = model.a(u);
        let b = model.b(u);
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::EvaluationOutsideBox(u.as_slice().to_vec()));
        }
        let lam = spectral::real_eigenvalues(&a)
            .map_err(|_| Error::NonRealSpectrum(u.as_slice().to_vec()))?;
        for w in lam.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        let mus = spectral::real_eigenvalues(&b)
            .map_err(|_| Error::NonRealSpectrum(u.as_slice().to_vec()))?;
        mu_floor = mu_floor.min(mus[0]);
        let comm = (&a * &b - &b * &a).norm();
        max_comm = max_comm.max(comm);
        max_comm_rel = max_comm_rel.max(comm / (1.0 + a.norm() * b.norm()));
        if model.is_conservative() {
            let mismatch = jacobian_mismatch(model, u, &a);
            max_jac = Some(max_jac.map_or(mismatch, |m: f64| m.max(mismatch)));
        }
    }
    let slack = 1e-9;
    Ok(HypothesisReport {
        samples: samples.len(),
        min_gap,
        mu_floor,
        max_commutator: max_comm,
        max_commutator_rel: max_comm_rel,
        max_jacobian_mismatch: max_jac,
        gap_ok: min_gap >= model.c0_claimed() * (1.0 - slack) || model.dim() == 1,
        mu_ok: mu_floor >= model.c1_claimed() * (1.0 - slack),
        commute_ok: max_comm_rel <= COMMUTATION_TOL,
        jacobian_ok: max_jac.is_none_or(|j| j <= JACOBIAN_TOL),
        degenerate: min_gap < spectral::DEGENERACY_GAP,
    })
}

fn jacobian_mismatch(model: &SystemModel, u: &DVector<f64>, a: &DMatrix<f64>) -> f64 {
    let n = model.dim();
    let h = JACOBIAN_STEP;
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut up = u.clone();
        let mut um = u.clone();
        up[k] += h;
        um[k] -= h;
        let col = (model.flux(&up).unwrap() - model.flux(&um).unwrap()) / (2.0 * h);
        jac.set_column(k, &col);
    }
    (jac - a).norm() / (1.0 + a.norm())
}

/// Shared-eigenframe system: `A(u) = R diag(λ_i) R^{-1}`, `B(u) = R diag(μ_i) R^{-1}`
/// with `λ_i`, `μ_i` polynomials in the component `u_i` (coefficients low to high).
#[derive(Clone, Debug, PartialEq)]
pub struct SharedFrameSpec {
    pub name: String,
    pub frame: DMatrix<f64>,
    pub lambda_polys: Vec<Vec<f64>>,
    pub mu_polys: Vec<Vec<f64>>,
    pub state_box: StateBox,
    pub reference_state: Option<Vec<f64>>,
    pub c0_claimed: Option<f64>,
    pub c1_claimed: Option<f64>,
}

pub(crate) fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl SharedFrameSpec {
    pub fn into_model(self) -> Result<SystemModel> {
        let n = self.frame.nrows();
        if self.frame.ncols() != n || self.lambda_polys.len() != n || self.mu_polys.len() != n {
            return Err(Error::InvalidInput("shared frame: dimension mismatch".into()));
        }
        if self.state_box.dim() != n {
            return Err(Error::InvalidInput("shared frame: box dimension mismatch".into()));
        }
        let frame_inv = self
            .frame
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("shared frame: singular frame matrix".into()))?;
        let build = |polys: Vec<Vec<f64>>| -> MatrixFn {
            let r = self.frame.clone();
            let rinv = frame_inv.clone();
            Arc::new(move |u: &DVector<f64>| {
                let d = DVector::from_iterator(n, (0..n).map(|i| poly(&polys[i], u[i])));
                &r * DMatrix::from_diagonal(&d) * &rinv
            })
        };
        // Claimed constants default to 0.99 of the values seen on a fine per-axis scan.
        let (c0, c1) = {
            let pts = 401;
            let ranges: Vec<(f64, f64, f64, f64)> = (0..n)
                .map(|i| {
                    let (mut lmin, mut lmax, mut mmin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
                    for k in 0..pts {
                        let s = self.state_box.lo[i]
                            + (self.state_box.hi[i] - self.state_box.lo[i]) * k as f64 / (pts - 1) as f64;
                        let l = poly(&self.lambda_polys[i], s);
                        lmin = lmin.min(l);
                        lmax = lmax.max(l);
                        mmin = mmin.min(poly(&self.mu_polys[i], s));
                    }
                    (lmin, lmax, mmin, 0.0)
                })
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|a, b| ranges[*a].0.partial_cmp(&ranges[*b].0).unwrap());
            let mut gap = f64::INFINITY;
            for w in order.windows(2) {
                gap = gap.min(ranges[w[1]].0 - ranges[w[0]].1);
            }
            let mu = ranges.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
            (0.99 * gap, 0.99 * mu)
        };
        let c0 = self.c0_claimed.unwrap_or(if n == 1 { f64::INFINITY } else { c0 });
        let c1 = self.c1_claimed.unwrap_or(c1);
        if !(c0 > 0.0) || !(c1 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "shared frame `{}`: families overlap or viscosity not positive (c0 = {c0:.3e}, c1 = {c1:.3e})",
                self.name
            )));
        }
        let reference = self.reference_state.clone().unwrap_or_else(|| {
            self.state_box.lo.iter().zip(&self.state_box.hi).map(|(l, h)| 0.5 * (l + h)).collect()
        });
        SystemModel::new(
            self.name.clone(),
            n,
            build(self.lambda_polys.clone()),
            build(self.mu_polys.clone()),
            self.state_box.clone(),
            c0,
            c1,
            DVector::from_vec(reference),
        )
    }
}

/// Names accepted by [`builtin_system`].
pub const BUILTIN_SYSTEMS: [&str; 6] =
    ["burgers", "heat", "decoupled2", "shared_frame2", "shared_frame3", "rotating2"];

/// Built-in test systems.
pub fn builtin_system(name: &str) -> Result<SystemModel> {
    match name {
        "burgers" => SystemModel::scalar("burgers", |u| 0.5 * u * u, |u| u, |_| 1.0, -2.0, 2.0, 1.0),
        "heat" => SystemModel::scalar("heat", |_| 0.0, |_| 0.0, |_| 1.0, -2.0, 2.0, 1.0),
        "decoupled2" => {
            let m = SystemModel::new(
                "decoupled2",
                2,
                Arc::new(|u| DMatrix::from_row_slice(2, 2, &[u[0], 0.0, 0.0, 1.0 + u[1]])),
                Arc::new(|_| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])),
                StateBox::cube(2, 0.25),
                0.5,
                1.0,
                DVector::zeros(2),
            )?;
            Ok(m.with_flux(Arc::new(|u| {
                DVector::from_vec(vec![0.5 * u[0] * u[0], u[1] + 0.5 * u[1] * u[1]])
            })))
        }
        "shared_frame2" => SharedFrameSpec {
            name: "shared_frame2".into(),
            frame: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            lambda_polys: vec![vec![0.0, 1.0], vec![2.0, 1.0]],
            mu_polys: vec![vec![1.0, 0.0, 1.0], vec![2.0]],
            state_box: StateBox::cube(2, 0.2),
            reference_state: Some(vec![0.0, 0.0]),
            c0_claimed: Some(1.6),
            c1_claimed: Some(1.0),
        }
        .into_model(),
        "shared_frame3" => SharedFrameSpec {
            name: "shared_frame3".into(),
            frame: DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]),
            lambda_polys: vec![vec![-1.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            mu_polys: vec![vec![1.0, 0.0, 1.0], vec![1.5, 0.5], vec![2.0, 0.0, 1.0]],
            state_box: StateBox::cube(3, 0.2),
            reference_state: Some(vec![0.0; 3]),
            c0_claimed: Some(0.6),
            c1_claimed: Some(1.0),
        }
        .into_model(),
        "rotating2" => {
            // Eigenframe rotates with the state, so eigenvector derivatives are nonzero.
            let frame = |u: &DVector<f64>| {
                let phi = 0.5 * u[0] + 0.3 * u[1];
                let (s, c) = phi.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            };
            SystemModel::new(
                "rotating2",
                2,
                Arc::new(move |u| {
                    let q = frame(u);
                    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![u[0], 2.0 + u[1]]));
                    &q * d * q.transpose()
                }),
                Arc::new(move |u| {
                    let q = frame(u);
                    let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
                        1.0 + 0.5 * u[0],
                        2.0 + u[1] * u[1],
                    ]));
                    &q * d * q.transpose()
                }),
                StateBox::cube(2, 0.2),
                1.5,
                0.85,
                DVector::zeros(2),
            )
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}
