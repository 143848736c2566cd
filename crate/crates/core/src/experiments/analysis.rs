//! Fits over a run: smoothing exponents, BV ratios, L¹ time continuity.

use crate::error::{Error, Result};
use crate::functionals::tv;
use crate::grid::{diff, l1, GridField};

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingFit {
    pub k: usize,
    pub slope: f64,
    pub intercept: f64,
    /// `slope + k/2`.
    pub deviation: f64,
    pub window: (f64, f64),
    /// `(t, ‖∂_x^k u_x‖₁)` used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// `Σ_c ‖∂_x^k u_{c,x}‖₁` for `k ∈ {0, 1, 2, 3}`.
pub fn derivative_norm(field: &GridField, k: usize) -> Result<f64> {
    let h = field.h;
    let b = field.boundary;
    let mut total = 0.0;
    for c in field.components() {
        let d = match k {
            0 => diff(&c, h, 1, b),
            1 => diff(&c, h, 2, b),
            2 => diff(&c, h, 3, b),
            3 => diff(&diff(&c, h, 2, b), h, 2, b),
            _ => return Err(Error::InvalidInput("derivative order must be 0..=3".into())),
        };
        total += l1(&d, h);
    }
    Ok(total)
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Log-log slope of `‖∂_x^k u_x‖₁` against `t`. Without an explicit window
/// the first and last 10% of the logarithmic time range are discarded.
/// The window must span a decade and hold at least four snapshots.
pub fn smoothing_check(snapshots: &[GridField], k: usize, window: Option<(f64, f64)>) -> Result<SmoothingFit> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidInput("k must be 1, 2 or 3".into()));
    }
    let positive: Vec<&GridField> = snapshots.iter().filter(|f| f.time > 0.0).collect();
    if positive.len() < 2 {
        return Err(Error::InsufficientWindow("fewer than two snapshots after t = 0".into()));
    }
    let (ta, tb) = window.unwrap_or_else(|| {
        let (l0, l1) = (positive[0].time.ln(), positive[positive.len() - 1].time.ln());
        ((l0 + 0.1 * (l1 - l0)).exp(), (l1 - 0.1 * (l1 - l0)).exp())
    });
    let slack = 1e-9 * tb.abs().max(1.0);
    let chosen: Vec<&GridField> = positive.into_iter().filter(|f| f.time >= ta - slack && f.time <= tb + slack).collect();
    if chosen.len() < 4 {
        return Err(Error::InsufficientWindow(format!("{} snapshots in [{ta}, {tb}], need 4", chosen.len())));
    }
    let (t0, t1) = (chosen[0].time, chosen[chosen.len() - 1].time);
    if t1 / t0 < 10.0 * (1.0 - 1e-9) {
        return Err(Error::InsufficientWindow(format!("window [{t0}, {t1}] spans less than a decade")));
    }
    let mut points = Vec::with_capacity(chosen.len());
    for f in &chosen {
        let v = derivative_norm(f, k)?;
        if !(v > 0.0) {
            return Err(Error::InsufficientWindow("derivative norm vanishes".into()));
        }
        points.push((f.time, v));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (intercept, slope) = ols(&xs, &ys);
    Ok(SmoothingFit { k, slope, intercept, deviation: slope + 0.5 * k as f64, window: (t0, t1), points })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BvReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub guard: f64,
    pub exceeded: bool,
}

/// Default ratio guard: 1.05 for scalar runs, 2.0 for systems.
pub fn default_bv_guard(n: usize) -> f64 {
    if n == 1 {
        1.05
    } else {
        2.0
    }
}

/// `TV(u(t)) / TV(ū)` per snapshot (1 when `TV(ū) = 0`).
pub fn bv_check(snapshots: &[GridField], guard: f64) -> BvReport {
    let tvs: Vec<f64> = snapshots.iter().map(|f| tv(f).1).collect();
    let tv0 = tvs.first().copied().unwrap_or(0.0);
    let ratios: Vec<f64> = tvs.iter().map(|t| if tv0 > 0.0 { t / tv0 } else { 1.0 }).collect();
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BvReport { exceeded: max_ratio > guard, ratios, max_ratio, guard }
}

#[derive(Clone, Debug, PartialEq)]
pub struct L1Fit {
    /// Envelope constants: every pair satisfies the fitted bound.
    pub l2a: f64,
    pub l2b: f64,
    /// Nonnegative least-squares constants before the envelope scaling.
    pub raw_a: f64,
    pub raw_b: f64,
    pub pairs: usize,
}

/// Least squares over the columns with `b ≥ 0`, `a ≥ 0`.
fn nnls2(x1: &[f64], x2: &[f64], y: &[f64]) -> (f64, f64) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (s11, s12, s22) = (dot(x1, x1), dot(x1, x2), dot(x2, x2));
    let (r1, r2) = (dot(x1, y), dot(x2, y));
    let sse = |a: f64, b: f64| -> f64 { y.iter().zip(x1.iter().zip(x2)).map(|(v, (p, q))| (v - a * p - b * q).powi(2)).sum() };
    let det = s11 * s22 - s12 * s12;
    if det > 1e-14 * s11 * s22 {
        let a = (r1 * s22 - r2 * s12) / det;
        let b = (r2 * s11 - r1 * s12) / det;
        if a >= 0.0 && b >= 0.0 {
            return (a, b);
        }
    }
    let only_a = if s11 > 0.0 { (r1 / s11).max(0.0) } else { 0.0 };
    let only_b = if s22 > 0.0 { (r2 / s22).max(0.0) } else { 0.0 };
    if sse(only_a, 0.0) <= sse(0.0, only_b) {
        (only_a, 0.0)
    } else {
        (0.0, only_b)
    }
}

/// Fits `‖u(t) − u(s)‖₁ ≤ a|t − s| + b√ε|√t − √s|` over all snapshot pairs.
pub fn l1_continuity_fit(snapshots: &[GridField], epsilon: f64) -> Result<L1Fit> {
    let m = snapshots.len();
    let pairs = m * m.saturating_sub(1) / 2;
    if pairs < 6 {
        return Err(Error::InsufficientWindow(format!("{pairs} snapshot pairs, need 6")));
    }
    let (mut x1, mut x2, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        for j in i + 1..m {
            let (s, t) = (snapshots[i].time, snapshots[j].time);
            let diff: Vec<f64> = snapshots[j].values().iter().zip(snapshots[i].values()).map(|(a, b)| a - b).collect();
            x1.push((t - s).abs());
            x2.push(epsilon.sqrt() * (t.sqrt() - s.sqrt()).abs());
            y.push(l1(&diff, snapshots[i].h));
        }
    }
    let (a, b) = nnls2(&x1, &x2, &y);
    let mut scale: f64 = 1.0;
    for k in 0..y.len() {
        let fit = a * x1[k] + b * x2[k];
        if y[k] > 0.0 {
            scale = if fit > 0.0 { scale.max(y[k] / fit) } else { f64::INFINITY };
        }
    }
    let (l2a, l2b) = if scale.is_finite() {
        (a * scale, b * scale)
    } else {
        // degenerate fit: fall back to the pure √t envelope
        let b = (0..y.len()).filter(|&k| x2[k] > 0.0).map(|k| y[k] / x2[k]).fold(0.0, f64::max);
        (0.0, b)
    };
    Ok(L1Fit { l2a, l2b, raw_a: a, raw_b: b, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn field(t: f64, f: impl Fn(f64) -> f64) -> GridField {
        let mut g = GridField::from_fn(-20.0, 20.0, 2000, 1, Boundary::ConstantExtrapolation, |x| vec![f(x)]).unwrap();
        g.time = t;
        g
    }

    /// Error-function step under the heat kernel: `u_x` is a Gaussian of variance `2t`.
    fn erf_like(t: f64) -> GridField {
        // integrate the Gaussian by the trapezoid rule on a fine grid
        let s = (2.0 * t).sqrt();
        field(t, move |x| {
            let steps = 2000;
            let a = -20.0;
            let hh = (x - a) / steps as f64;
            let g = |y: f64| (-(y * y) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
            hh * ((1..steps).map(|k| g(a + k as f64 * hh)).sum::<f64>() + 0.5 * (g(a) + g(x)))
        })
    }

    #[test]
    fn heat_kernel_slopes() {
        let times: Vec<f64> = (0..9).map(|k| 0.05 * 10f64.powf(k as f64 / 8.0)).collect();
        let snaps: Vec<GridField> = times.iter().map(|t| erf_like(*t)).collect();
        let f1 = smoothing_check(&snaps, 1, Some((0.05, 0.5))).unwrap();
        assert!(f1.deviation.abs() < 0.02, "{f1:?}");
        let f2 = smoothing_check(&snaps, 2, Some((0.05, 0.5))).unwrap();
        assert!(f2.deviation.abs() < 0.05, "{:?}", f2.slope);
    }

    #[test]
    fn short_window_rejected() {
        let snaps: Vec<GridField> = [0.1, 0.2, 0.3, 0.4, 0.5].iter().map(|t| erf_like(*t)).collect();
        assert!(matches!(smoothing_check(&snaps, 1, None), Err(Error::InsufficientWindow(_))));
    }

    #[test]
    fn constant_run_fits() {
        let snaps: Vec<GridField> = (0..5).map(|k| field(k as f64 * 0.1, |_| 0.3)).collect();
        let bv = bv_check(&snaps, 1.05);
        assert!(bv.ratios.iter().all(|r| *r == 1.0) && !bv.exceeded);
        let fit = l1_continuity_fit(&snaps, 1.0).unwrap();
        assert_eq!((fit.l2a, fit.l2b), (0.0, 0.0));
    }

    #[test]
    fn envelope_holds_for_every_pair() {
        let snaps: Vec<GridField> = [0.0, 0.05, 0.1, 0.2, 0.4, 0.8].iter().map(|t| erf_like(t + 0.01)).collect();
        let fit = l1_continuity_fit(&snaps, 1.0).unwrap();
        for i in 0..snaps.len() {
            for j in i + 1..snaps.len() {
                let (s, t) = (snaps[i].time, snaps[j].time);
                let d: Vec<f64> = snaps[j].values().iter().zip(snaps[i].values()).map(|(a, b)| a - b).collect();
                let bound = fit.l2a * (t - s) + fit.l2b * (t.sqrt() - s.sqrt());
                assert!(l1(&d, snaps[i].h) <= bound * (1.0 + 1e-12));
            }
        }
        assert!(fit.l2b > 0.0);
    }

    #[test]
    fn too_few_pairs() {
        let snaps: Vec<GridField> = (0..3).map(|k| field(k as f64, |_| 0.0)).collect();
        assert!(l1_continuity_fit(&snaps, 1.0).is_err());
    }

    #[test]
    fn nnls_recovers_nonnegative_coefficients() {
        let x1 = [1.0, 2.0, 3.0, 4.0];
        let x2 = [1.0, 1.5, 1.7, 2.0];
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * a + 2.0 * b).collect();
        let (a, b) = nnls2(&x1, &x2, &y);
        assert!((a - 0.5).abs() < 1e-10 && (b - 2.0).abs() < 1e-10);
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| -0.5 * a + 2.0 * b).collect();
        let (a, b) = nnls2(&x1, &x2, &y);
        assert!(a >= 0.0 && b >= 0.0);
    }
}
