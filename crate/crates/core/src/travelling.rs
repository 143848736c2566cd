//! Viscous travelling waves `u(t,x) = U(x − σt)` solving `(A(U) − σ)U' = (B(U)U')'`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::{decompose, FrameJet};
use crate::system::SystemModel;

#[derive(Clone, Debug)]
pub struct TravellingWaveProfile {
    pub sigma: f64,
    pub u_minus: DVector<f64>,
    pub u_plus: DVector<f64>,
    pub xi: Vec<f64>,
    pub u: Vec<DVector<f64>>,
    pub du: Vec<DVector<f64>>,
}

impl TravellingWaveProfile {
    pub fn len(&self) -> usize {
        self.xi.len()
    }
    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
    /// Profile value at arbitrary `ξ` by cubic Hermite interpolation,
    /// constant beyond the sampled range.
    pub fn eval(&self, xi: f64) -> DVector<f64> {
        let n = self.xi.len();
        if xi <= self.xi[0] {
            return self.u[0].clone();
        }
        if xi >= self.xi[n - 1] {
            return self.u[n - 1].clone();
        }
        let k = self.xi.partition_point(|p| *p <= xi).clamp(1, n - 1) - 1;
        hermite_vec(self.xi[k], self.xi[k + 1], &self.u[k], &self.u[k + 1], &self.du[k], &self.du[k + 1], xi)
    }

    /// CSV rows `xi,u1..un,du1..dun`.
    pub fn to_csv(&self) -> String {
        let n = self.u_minus.len();
        let mut s = String::from("xi");
        for c in 1..=n {
            s.push_str(&format!(",u{c}"));
        }
        for c in 1..=n {
            s.push_str(&format!(",du{c}"));
        }
        s.push('\n');
        for k in 0..self.len() {
            s.push_str(&crate::grid::fmt17(self.xi[k]));
            for v in self.u[k].iter().chain(self.du[k].iter()) {
                s.push(',');
                s.push_str(&crate::grid::fmt17(*v));
            }
            s.push('\n');
        }
        s
    }
}

fn hermite_vec(
    x0: f64,
    x1: f64,
    y0: &DVector<f64>,
    y1: &DVector<f64>,
    d0: &DVector<f64>,
    d1: &DVector<f64>,
    x: f64,
) -> DVector<f64> {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    y0 * (2.0 * t3 - 3.0 * t2 + 1.0) + d0 * (h * (t3 - 2.0 * t2 + t)) + y1 * (-2.0 * t3 + 3.0 * t2) + d1 * (h * (t3 - t2))
}

/// Shock speed from the Rankine–Hugoniot relation; for `n > 1` the
/// least-squares speed and its residual `‖Δf − σΔu‖`.
pub fn rh_speed(model: &SystemModel, u_minus: &DVector<f64>, u_plus: &DVector<f64>) -> Result<(f64, f64)> {
    let fm = model.flux(u_minus).ok_or(Error::NoFlux)?;
    let fp = model.flux(u_plus).ok_or(Error::NoFlux)?;
    let du = u_plus - u_minus;
    let nrm2 = du.norm_squared();
    if nrm2 == 0.0 {
        return Err(Error::InvalidInput("end states coincide".into()));
    }
    let df = fp - fm;
    let sigma = df.dot(&du) / nrm2;
    let residual = (&df - &du * sigma).norm();
    Ok((sigma, residual))
}

/// `G(U) = f(U) − f(u−) − σ(U − u−)` so that `B(U)U' = G(U)`.
fn first_order_field(model: &SystemModel, u: &DVector<f64>, fm: &DVector<f64>, um: &DVector<f64>, sigma: f64) -> DVector<f64> {
    let g = model.flux(u).expect("conservative model") - fm - (u - um) * sigma;
    model.b(u).lu().solve(&g).unwrap_or_else(|| DVector::from_element(u.len(), f64::NAN))
}

fn rk4_step(f: &dyn Fn(&DVector<f64>) -> DVector<f64>, y: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = f(y);
    let k2 = f(&(y + &k1 * (h / 2.0)));
    let k3 = f(&(y + &k2 * (h / 2.0)));
    let k4 = f(&(y + &k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Adaptive RK4 (step doubling) from `y0` over `[0, length]` in direction `dir`;
/// returns accepted `(s, y)` pairs, stopping early if the state leaves `ok`.
fn integrate(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    y0: &DVector<f64>,
    length: f64,
    dir: f64,
    tol: f64,
    ok: &dyn Fn(&DVector<f64>) -> bool,
) -> Vec<(f64, DVector<f64>)> {
    let g = |y: &DVector<f64>| f(y) * dir;
    let mut out = vec![(0.0, y0.clone())];
    let mut s = 0.0;
    let mut y = y0.clone();
    let mut h: f64 = 1e-2;
    let h_max = 0.05;
    let mut guard = 0usize;
    while s < length && guard < 2_000_000 {
        guard += 1;
        h = h.min(length - s);
        let full = rk4_step(&g, &y, h);
        let half = rk4_step(&g, &rk4_step(&g, &y, h / 2.0), h / 2.0);
        let err = (&half - &full).amax() / 15.0;
        if !err.is_finite() {
            h /= 4.0;
            if h < 1e-12 {
                break;
            }
            continue;
        }
        if err <= tol {
            s += h;
            y = &half + (&half - &full) / 15.0;
            if !ok(&y) {
                out.push((s, y));
                break;
            }
            out.push((s, y.clone()));
        }
        let fac = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 2.0) };
        h = (h * fac).min(h_max);
        if h < 1e-12 {
            break;
        }
    }
    out
}

/// Default half-width of the profile window: long enough for the slowest
/// endpoint decay rate `min_i |λ_i − σ|/μ_i`.
pub fn default_span(model: &SystemModel, u_minus: &DVector<f64>, u_plus: &DVector<f64>, sigma: f64) -> f64 {
    let mut min_mu = f64::INFINITY;
    let mut rate = f64::INFINITY;
    for u in [u_minus, u_plus] {
        if let Ok(sd) = decompose(model, u, None) {
            for i in 0..sd.dim() {
                min_mu = min_mu.min(sd.mus[i]);
                rate = rate.min((sd.lambdas[i] - sigma).abs() / sd.mus[i]);
            }
        }
    }
    let base = if min_mu.is_finite() { 40.0 / min_mu } else { 40.0 };
    if rate > 0.0 && rate.is_finite() {
        base.max(16.0 / rate)
    } else {
        base
    }
}

/// Heteroclinic orbit of `B(U)U' = f(U) − f(u−) − σ(U − u−)` through the
/// mid-chord point, sampled at `m` points on `[−span, span]`.
pub fn profile_conservative(
    model: &SystemModel,
    u_minus: &DVector<f64>,
    u_plus: &DVector<f64>,
    sigma: f64,
    xi_span: Option<f64>,
    m: usize,
) -> Result<TravellingWaveProfile> {
    if !model.is_conservative() {
        return Err(Error::NoFlux);
    }
    if m < 3 {
        return Err(Error::InvalidInput("profile needs at least 3 samples".into()));
    }
    let n = model.dim();
    let fm = model.flux(u_minus).ok_or(Error::NoFlux)?;
    let jump = (u_plus - u_minus).norm();
    let span = xi_span.unwrap_or_else(|| default_span(model, u_minus, u_plus, sigma));
    let xi: Vec<f64> = (0..m).map(|k| -span + 2.0 * span * k as f64 / (m - 1) as f64).collect();

    if jump == 0.0 {
        return Ok(TravellingWaveProfile {
            sigma,
            u_minus: u_minus.clone(),
            u_plus: u_plus.clone(),
            u: vec![u_minus.clone(); m],
            du: vec![DVector::zeros(n); m],
            xi,
        });
    }
    let fp = model.flux(u_plus).ok_or(Error::NoFlux)?;
    let rh = (&fp - &fm - (u_plus - u_minus) * sigma).norm();
    if rh > 1e-10 * (1.0 + fm.norm() + fp.norm()) {
        return Err(Error::InvalidInput(format!("Rankine-Hugoniot residual {rh:.3e} too large")));
    }

    let rhs = |y: &DVector<f64>| first_order_field(model, y, &fm, u_minus, sigma);
    let wide = model.state_box().inflated(0.5);
    let ok = |y: &DVector<f64>| y.iter().all(|v| v.is_finite()) && wide.contains(y.as_slice());
    let mid = (u_minus + u_plus) * 0.5;
    let tol = 1e-13 * (1.0 + jump);
    let fwd = integrate(&rhs, &mid, span, 1.0, tol, &ok);
    let bwd = integrate(&rhs, &mid, span, -1.0, tol, &ok);

    let endpoint_tol = 1e-6 * jump;
    let reached = |branch: &[(f64, DVector<f64>)], target: &DVector<f64>| {
        let (s, y) = branch.last().expect("non-empty");
        *s >= span * (1.0 - 1e-12) && (y - target).amax() <= endpoint_tol
    };
    if !reached(&fwd, u_plus) || !reached(&bwd, u_minus) {
        let (_, yf) = fwd.last().unwrap();
        let (_, yb) = bwd.last().unwrap();
        return Err(Error::NoConnection(format!(
            "orbit ends at {:?} (forward) and {:?} (backward)",
            yf.as_slice(),
            yb.as_slice()
        )));
    }

    // merge into one increasing sequence of (ξ, U, U')
    let mut nodes: Vec<(f64, DVector<f64>)> = bwd.iter().rev().map(|(s, y)| (-s, y.clone())).collect();
    nodes.extend(fwd.iter().skip(1).map(|(s, y)| (*s, y.clone())));
    let slopes: Vec<DVector<f64>> = nodes.iter().map(|(_, y)| rhs(y)).collect();
    let mut u = Vec::with_capacity(m);
    let mut k = 0;
    for x in &xi {
        while k + 2 < nodes.len() && nodes[k + 1].0 < *x {
            k += 1;
        }
        let (x0, y0) = &nodes[k];
        let (x1, y1) = &nodes[k + 1];
        u.push(hermite_vec(*x0, *x1, y0, y1, &slopes[k], &slopes[k + 1], x.clamp(*x0, *x1)));
    }
    let du = u.iter().map(&rhs).collect();
    Ok(TravellingWaveProfile { sigma, u_minus: u_minus.clone(), u_plus: u_plus.clone(), xi, u, du })
}

/// Right-hand side of the first-order system `u' = v`,
/// `v' = B⁻¹(A − σ)v − B⁻¹(v·DB)v`, `σ' = 0`.
pub fn profile_ode_rhs(
    model: &SystemModel,
    u: &DVector<f64>,
    v: &DVector<f64>,
    sigma: f64,
) -> (DVector<f64>, DVector<f64>, f64) {
    let n = model.dim();
    let shifted = model.a(u) - DMatrix::identity(n, n) * sigma;
    let rhs = shifted * v - model.db_along(u, v) * v;
    let vdot = model.b(u).lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(n, f64::NAN));
    (v.clone(), vdot, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileReport {
    /// Max over interior samples of `|(A − σ)U' − (BU')'|`.
    pub ode_residual: f64,
    pub endpoint_minus: f64,
    pub endpoint_plus: f64,
    /// Max of `|v_{i,ξ} − μ_i⁻¹(λ̃_i − σ)v_i|` on `{|v_i| > 1e−6}`.
    pub identity_residual: f64,
}

/// Fourth-order central derivative of sampled vectors on a uniform grid
/// (second order next to the ends, which are skipped by callers).
fn d_dxi(q: &[DVector<f64>], h: f64, k: usize) -> Option<DVector<f64>> {
    let n = q.len();
    if k >= 2 && k + 2 < n {
        Some((&q[k - 2] - &q[k - 1] * 8.0 + &q[k + 1] * 8.0 - &q[k + 2]) / (12.0 * h))
    } else {
        None
    }
}

/// Residuals of the profile ODE, the endpoint limits and the speed identity.
/// With `travelling = true`, `λ̃_i = λ_i − v_i<l_i, B r_{i,u}r_i + r_i·DB r_i>`; otherwise `λ̃_i = λ_i`.
pub fn verify_profile(model: &SystemModel, p: &TravellingWaveProfile, travelling: bool) -> Result<ProfileReport> {
    let m = p.len();
    if m < 5 {
        return Err(Error::InvalidInput("profile too short to verify".into()));
    }
    let h = p.xi[1] - p.xi[0];
    let n = model.dim();
    let bu: Vec<DVector<f64>> = p.u.iter().zip(&p.du).map(|(u, d)| model.b(u) * d).collect();
    let mut ode: f64 = 0.0;
    let mut ident: f64 = 0.0;
    let mut vs: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut coef: Vec<DVector<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let sd = decompose(model, &p.u[k], None)?;
        let v = sd.p() * &p.du[k];
        let mut c = DVector::zeros(n);
        let jet = if travelling && n > 0 { Some(FrameJet::new(model, &p.u[k])?) } else { None };
        for i in 0..n {
            let lt = match &jet {
                Some(j) => {
                    let r = j.spec.r(i);
                    sd.lambdas[i] - v[i] * j.spec.l(i).dot(&j.curvature_vector(i, &r))
                }
                None => sd.lambdas[i],
            };
            c[i] = (lt - p.sigma) / sd.mus[i];
        }
        vs.push(v);
        coef.push(c);
    }
    for k in 0..m {
        if let Some(dbu) = d_dxi(&bu, h, k) {
            let lhs = (model.a(&p.u[k]) - DMatrix::identity(n, n) * p.sigma) * &p.du[k];
            ode = ode.max((lhs - dbu).amax());
        }
        if let Some(dv) = d_dxi(&vs, h, k) {
            for i in 0..n {
                if vs[k][i].abs() > 1e-6 {
                    ident = ident.max((dv[i] - coef[k][i] * vs[k][i]).abs());
                }
            }
        }
    }
    Ok(ProfileReport {
        ode_residual: ode,
        endpoint_minus: (&p.u[0] - &p.u_minus).amax(),
        endpoint_plus: (&p.u[m - 1] - &p.u_plus).amax(),
        identity_residual: ident,
    })
}

/// Oleinik chord condition for a scalar flux, sampled at 200 interior points.
pub fn oleinik_admissible(f: &dyn Fn(f64) -> f64, u_minus: f64, u_plus: f64) -> bool {
    if u_minus == u_plus {
        return true;
    }
    let sigma = (f(u_minus) - f(u_plus)) / (u_minus - u_plus);
    let tol = 1e-12 * (1.0 + sigma.abs());
    (1..=200).all(|k| {
        let u = u_minus + (u_plus - u_minus) * k as f64 / 201.0;
        let left = (f(u) - f(u_minus)) / (u - u_minus);
        let right = (f(u) - f(u_plus)) / (u - u_plus);
        left >= sigma - tol && sigma >= right - tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::builtin_system;

    fn s(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn rh_examples() {
        let b = builtin_system("burgers").unwrap();
        assert_eq!(rh_speed(&b, &s(1.0), &s(-1.0)).unwrap().0, 0.0);
        let lin = SystemModel::scalar("lin", |u| 3.0 * u, |_| 3.0, |_| 1.0, -5.0, 5.0, 1.0).unwrap();
        assert!((rh_speed(&lin, &s(1.0), &s(-2.0)).unwrap().0 - 3.0).abs() < 1e-15);
        let cubic = SystemModel::scalar("cubic", |u| u * u * u, |u| 3.0 * u * u, |_| 1.0, -3.0, 3.0, 1.0).unwrap();
        assert_eq!(rh_speed(&cubic, &s(2.0), &s(1.0)).unwrap().0, 7.0);
        let heat = builtin_system("shared_frame2").unwrap();
        assert!(matches!(rh_speed(&heat, &DVector::zeros(2), &DVector::zeros(2)), Err(Error::NoFlux)));
    }

    #[test]
    fn burgers_profile_matches_tanh() {
        let b = builtin_system("burgers").unwrap();
        let p = profile_conservative(&b, &s(1.0), &s(-1.0), 0.0, Some(20.0), 4001).unwrap();
        let err = p.xi.iter().zip(&p.u).map(|(x, u)| (u[0] + (x / 2.0).tanh()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let r = verify_profile(&b, &p, false).unwrap();
        assert!(r.ode_residual < 1e-6 && r.identity_residual < 1e-6, "{r:?}");
    }

    #[test]
    fn expansive_pair_has_no_connection() {
        let b = builtin_system("burgers").unwrap();
        let r = profile_conservative(&b, &s(-1.0), &s(1.0), 0.0, None, 101);
        assert!(matches!(r, Err(Error::NoConnection(_))));
    }

    #[test]
    fn constant_profile() {
        let b = builtin_system("burgers").unwrap();
        let p = profile_conservative(&b, &s(0.3), &s(0.3), 0.3, Some(5.0), 50).unwrap();
        let r = verify_profile(&b, &p, false).unwrap();
        assert_eq!(r.ode_residual, 0.0);
        assert_eq!(r.identity_residual, 0.0);
    }

    #[test]
    fn oleinik_examples() {
        let f = |u: f64| 0.5 * u * u;
        assert!(oleinik_admissible(&f, 1.0, -1.0));
        assert!(!oleinik_admissible(&f, -1.0, 1.0));
    }

    #[test]
    fn cubic_admissibility_agrees_with_profile() {
        let f = |u: f64| u * u * u;
        let m = SystemModel::scalar("cubic", f, |u| 3.0 * u * u, |_| 1.0, -2.0, 2.0, 1.0).unwrap();
        for (a, b) in [(1.0, -1.0), (-1.0, 1.0), (1.0, -0.3), (-0.3, 1.0)] {
            let sigma = rh_speed(&m, &s(a), &s(b)).unwrap().0;
            let ok = profile_conservative(&m, &s(a), &s(b), sigma, None, 401).is_ok();
            assert_eq!(oleinik_admissible(&f, a, b), ok, "{a} -> {b}");
        }
    }

    #[test]
    fn admissibility_battery() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (p, q) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let f = move |u: f64| p * u * u + q * u * u * u;
            let m = SystemModel::scalar("poly", f, move |u| 2.0 * p * u + 3.0 * q * u * u, |_| 1.0, -2.0, 2.0, 1.0)
                .unwrap();
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let sigma = rh_speed(&m, &s(a), &s(b)).unwrap().0;
            let ok = profile_conservative(&m, &s(a), &s(b), sigma, None, 201).is_ok();
            assert_eq!(oleinik_admissible(&f, a, b), ok, "p={p} q={q} {a} -> {b}");
        }
    }

    #[test]
    fn ode_rhs_matches_independent_evaluation() {
        let m = builtin_system("rotating2").unwrap();
        let u = DVector::from_vec(vec![0.07, -0.12]);
        let v = DVector::from_vec(vec![0.3, -0.8]);
        let sigma = 0.4;
        let (_, dv, _) = profile_ode_rhs(&m, &u, &v, sigma);
        // explicit 2x2 inverse and one-sided-free directional derivative of B
        let h = 1e-5;
        let dbv = (m.b(&(&u + &v * h)) - m.b(&(&u - &v * h))) / (2.0 * h);
        let b = m.b(&u);
        let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
        let binv = DMatrix::from_row_slice(2, 2, &[b[(1, 1)], -b[(0, 1)], -b[(1, 0)], b[(0, 0)]]) / det;
        let a = m.a(&u);
        let w = (&a * &v - &v * sigma) - dbv * &v;
        let expect = binv * w;
        assert!((dv - expect).amax() < 1e-8);
    }

    #[test]
    fn residual_converges_under_refinement() {
        let b = builtin_system("burgers").unwrap();
        // closed-form profile sampled coarsely with exact derivative
        let sample = |m: usize| {
            let xi: Vec<f64> = (0..m).map(|k| -10.0 + 20.0 * k as f64 / (m - 1) as f64).collect();
            let u = xi.iter().map(|x| s(-(x / 2.0).tanh())).collect();
            let du = xi.iter().map(|x| s(-0.5 / (x / 2.0).cosh().powi(2))).collect();
            TravellingWaveProfile { sigma: 0.0, u_minus: s(1.0), u_plus: s(-1.0), xi, u, du }
        };
        let r1 = verify_profile(&b, &sample(41), false).unwrap().ode_residual;
        let r2 = verify_profile(&b, &sample(81), false).unwrap().ode_residual;
        assert!(r1 / r2 > 3.5, "{r1} {r2}");
    }

    /// Along the strong unstable orbit of `(u*, 0)` tangent to `r_i`,
    /// `U'/<l_i,U'> − r_i ≈ v_i Σ_k c_k r_k`.
    #[test]
    fn first_order_correction_matches_orbit_slope() {
        let m = builtin_system("rotating2").unwrap();
        let (i, j, sigma) = (0usize, 1usize, -10.0);
        let u0 = DVector::zeros(2);
        let sd = decompose(&m, &u0, None).unwrap();
        let mut u = u0.clone();
        let mut v = sd.r(i) * 1e-9;
        let dt = 1e-3;
        let f = |u: &DVector<f64>, v: &DVector<f64>| profile_ode_rhs(&m, u, v, sigma);
        let mut errs = Vec::new();
        for target in [4e-3, 2e-3, 1e-3].iter().rev() {
            loop {
                let frame = decompose(&m, &u, None).unwrap();
                let a = frame.l(i).dot(&v);
                if a >= *target {
                    let q = frame.l(j).dot(&(&v / a - frame.r(i))) / a;
                    let c = crate::spectral::first_order_tw_correction(&m, &u, i, sigma).unwrap();
                    assert!(c[j].abs() > 1e-3, "oracle needs a nontrivial correction");
                    errs.push((q - c[j]).abs() / c[j].abs());
                    break;
                }
                let (k1u, k1v, _) = f(&u, &v);
                let (k2u, k2v, _) = f(&(&u + &k1u * (dt / 2.0)), &(&v + &k1v * (dt / 2.0)));
                let (k3u, k3v, _) = f(&(&u + &k2u * (dt / 2.0)), &(&v + &k2v * (dt / 2.0)));
                let (k4u, k4v, _) = f(&(&u + &k3u * dt), &(&v + &k3v * dt));
                u += (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (dt / 6.0);
                v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0);
            }
        }
        // error is O(v_i): small and shrinking as v_i → 0
        assert!(errs[0] < 0.02 && errs[0] < errs[2], "{errs:?}");
    }

    #[test]
    fn ode_rhs_equilibrium_and_constant_b() {
        let m = builtin_system("decoupled2").unwrap();
        let u = DVector::from_vec(vec![0.1, -0.1]);
        let (du, dv, ds) = profile_ode_rhs(&m, &u, &DVector::zeros(2), 0.3);
        assert!(du.iter().chain(dv.iter()).all(|x| *x == 0.0) && ds == 0.0);
        let v = DVector::from_vec(vec![0.2, 0.5]);
        let (_, dv, _) = profile_ode_rhs(&m, &u, &v, 0.3);
        // B = diag(1, 2), A = diag(0.1, 0.9)
        assert!((dv[0] - (0.1 - 0.3) * 0.2).abs() < 1e-14);
        assert!((dv[1] - (0.9 - 0.3) * 0.5 / 2.0).abs() < 1e-14);
    }
}
