//! C ABI over `vvlab`.
//!
//! Models and simulations are opaque heap handles released with their
//! `*_free` function. Every fallible call returns a [`VvStatus`]; the text of
//! the last failure on the calling thread is available from
//! [`vv_last_error_message`]. Panics are caught and reported as `VV_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use nalgebra::DVector;
use vvlab::functionals::{area_functional, transversal_q, tv_scalar};
use vvlab::grid::{Boundary, GridField};
use vvlab::solver::{advance_to, SolverConfig};
use vvlab::spectral::decompose;
use vvlab::system::{builtin_system, check_hypotheses, SystemModel};
use vvlab::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum VvStatus {
    VV_OK = 0,
    VV_NULL_POINTER = 1,
    VV_INVALID_INPUT = 2,
    VV_UNKNOWN_SYSTEM = 3,
    /// Non-real, complex or degenerate spectrum.
    VV_SPECTRUM = 4,
    /// State left the box or became non-finite.
    VV_STATE = 5,
    VV_GRID_TOO_LARGE = 6,
    VV_BUFFER_TOO_SMALL = 7,
    VV_PANIC = 8,
    VV_OTHER = 9,
}

/// Opaque system model.
pub struct VvModel {
    inner: SystemModel,
}

/// Opaque running simulation.
pub struct VvSimulation {
    model: SystemModel,
    field: GridField,
    config: SolverConfig,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct VvHypothesisSummary {
    pub samples: usize,
    pub min_gap: f64,
    pub mu_floor: f64,
    pub max_commutator: f64,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> VvStatus {
    match e {
        Error::UnknownSystem(_) => VvStatus::VV_UNKNOWN_SYSTEM,
        Error::NonRealSpectrum(_) | Error::ComplexEigenvalues(_) | Error::DegenerateSpectrum { .. } => {
            VvStatus::VV_SPECTRUM
        }
        Error::StateLeftBox { .. } | Error::NonFiniteState { .. } | Error::EvaluationOutsideBox(_) => VvStatus::VV_STATE,
        Error::GridTooLarge(_) => VvStatus::VV_GRID_TOO_LARGE,
        Error::InvalidInput(_) => VvStatus::VV_INVALID_INPUT,
        _ => VvStatus::VV_OTHER,
    }
}

/// Runs `f`, recording errors and panics.
fn guard(f: impl FnOnce() -> Result<(), (VvStatus, String)>) -> VvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VvStatus::VV_OK,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("panic inside vvlab".into());
            VvStatus::VV_PANIC
        }
    }
}

fn lift(e: Error) -> (VvStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VvStatus, String) {
    (VvStatus::VV_NULL_POINTER, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (VvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (VvStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vv_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a builtin model by name.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vv_model_builtin(name: *const c_char, out: *mut *mut VvModel) -> VvStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (VvStatus::VV_INVALID_INPUT, "name is not UTF-8".to_string()))?;
        let m = builtin_system(name).map_err(lift)?;
        *out = Box::into_raw(Box::new(VvModel { inner: m }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`vv_model_builtin`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vv_model_free(model: *mut VvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// System dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vv_model_dim(model: *const VvModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Samples the state box on `samples_per_axis` points per axis.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vv_check_hypotheses(
    model: *const VvModel,
    samples_per_axis: usize,
    out: *mut VvHypothesisSummary,
) -> VvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = check_hypotheses(&m.inner, samples_per_axis).map_err(lift)?;
        *out = VvHypothesisSummary {
            samples: r.samples,
            min_gap: r.min_gap,
            mu_floor: r.mu_floor,
            max_commutator: r.max_commutator,
            passed: r.passed(),
        };
        Ok(())
    })
}

/// Spectral frame at state `u` (length n): ascending `lambdas`, paired `mus`
/// and unit right eigenvectors stored column-major in `right` (n·n).
///
/// # Safety
/// Pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn vv_decompose(
    model: *const VvModel,
    u: *const f64,
    lambdas: *mut f64,
    mus: *mut f64,
    right: *mut f64,
) -> VvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let n = m.inner.dim();
        let u = DVector::from_column_slice(input(u, n, "u")?);
        let s = decompose(&m.inner, &u, None).map_err(lift)?;
        output(lambdas, n, "lambdas")?.copy_from_slice(s.lambdas.as_slice());
        output(mus, n, "mus")?.copy_from_slice(s.mus.as_slice());
        output(right, n * n, "right")?.copy_from_slice(s.right.as_slice());
        Ok(())
    })
}

/// Starts a simulation of `u_t + A u_x = ε(B u_x)_x` on `cells` uniform
/// cells of `[xmin, xmax]` from cell-major `values` (cells·n).
///
/// # Safety
/// `model` must be live, `values` must hold `cells·n` doubles, `out` writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn vv_sim_new(
    model: *const VvModel,
    xmin: f64,
    xmax: f64,
    cells: usize,
    values: *const f64,
    periodic: bool,
    epsilon: f64,
    out: *mut *mut VvSimulation,
) -> VvStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = m.inner.dim();
        let vals = input(values, cells * n, "values")?;
        let boundary = if periodic { Boundary::Periodic } else { Boundary::ConstantExtrapolation };
        let field = GridField::zeros(xmin, xmax, cells, n, boundary).map_err(lift)?.with_values(n, vals.to_vec());
        let config = SolverConfig { epsilon, ..Default::default() };
        config.validate().map_err(lift)?;
        *out = Box::into_raw(Box::new(VvSimulation { model: m.inner.clone(), field, config }));
        Ok(())
    })
}

/// Advances to time `t` (no-op if already there).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vv_sim_advance(sim: *mut VvSimulation, t: f64) -> VvStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        advance_to(&s.model, &mut s.field, &s.config, t).map_err(lift)?;
        Ok(())
    })
}

/// Current time, NaN for a null handle.
///
/// # Safety
/// `sim` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn vv_sim_time(sim: *const VvSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.field.time)
}

/// Copies cell-major values into `out`, which must hold at least cells·n doubles.
///
/// # Safety
/// `sim` must be live and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vv_sim_values(sim: *const VvSimulation, out: *mut f64, len: usize) -> VvStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        let v = s.field.values();
        if len < v.len() {
            return Err((VvStatus::VV_BUFFER_TOO_SMALL, format!("need {} doubles, got {len}", v.len())));
        }
        output(out, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must come from [`vv_sim_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vv_sim_free(sim: *mut VvSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Total variation `Σ|q_{j+1} − q_j|` of a scalar array.
///
/// # Safety
/// `q` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vv_tv(q: *const f64, len: usize, out: *mut f64) -> VvStatus {
    guard(|| {
        let q = input(q, len, "q")?;
        *out.as_mut().ok_or_else(|| null("out"))? = tv_scalar(q);
        Ok(())
    })
}

/// Transversal interaction `h² Σ K(x_j − x_k)|z_j||z#_k|`.
///
/// # Safety
/// `z` and `z_sharp` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vv_transversal_q(
    z: *const f64,
    z_sharp: *const f64,
    len: usize,
    h: f64,
    c: f64,
    c1: f64,
    out: *mut f64,
) -> VvStatus {
    guard(|| {
        let z = input(z, len, "z")?;
        let zs = input(z_sharp, len, "z_sharp")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = transversal_q(z, zs, h, c, c1).map_err(lift)?;
        Ok(())
    })
}

/// Area functional `½ h² Σ_{j<k} |ζ1_j ζ2_k − ζ1_k ζ2_j|`.
///
/// # Safety
/// `zeta1` and `zeta2` must hold `len` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vv_area(zeta1: *const f64, zeta2: *const f64, len: usize, h: f64, out: *mut f64) -> VvStatus {
    guard(|| {
        let a = input(zeta1, len, "zeta1")?;
        let b = input(zeta2, len, "zeta2")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = area_functional(a, b, h).map_err(lift)?;
        Ok(())
    })
}
