//! Smooth cutoff functions used by the gradient decomposition.

use std::sync::OnceLock;

/// Parameters of the cutoffs and of the nonlinear solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffParams {
    pub delta1: f64,
    /// Exponent in `χ(v^{2N}/ε)`.
    pub n_exp: u32,
    pub epsilon_cut: f64,
    /// Below this `|v|` the ratio `w/v` is taken as 0.
    pub v_floor: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Upper bound on `‖u_x‖∞` and `‖u_xx‖∞` in travelling mode; `None` means `0.5 c0`.
    pub data_threshold: Option<f64>,
}

impl Default for CutoffParams {
    fn default() -> Self {
        Self {
            delta1: 0.05,
            n_exp: 2,
            epsilon_cut: 1e-12,
            v_floor: 1e-12,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            data_threshold: None,
        }
    }
}

impl CutoffParams {
    /// `w/v` with the `0/0 ↦ 0` convention below `v_floor`.
    #[inline]
    pub fn ratio(&self, w: f64, v: f64) -> f64 {
        if v.abs() < self.v_floor {
            0.0
        } else {
            w / v
        }
    }
}

/// Degree-7 smoothstep clamped to `[0,1]`; C³ at both ends.
#[inline]
pub fn smoothstep7(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let t4 = t * t * t * t;
        t4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
    }
}

#[inline]
pub fn smoothstep7_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        let q = t * (1.0 - t);
        140.0 * q * q * q
    }
}

/// 1 on `|s| ≤ 3/4`, 0 on `|s| ≥ 4/5`.
pub fn eta(s: f64) -> f64 {
    1.0 - smoothstep7((s.abs() - 0.75) / 0.05)
}

/// 1 on `|s| ≤ δ₁/2`, 0 on `|s| ≥ δ₁`.
pub fn xi(s: f64, delta1: f64) -> f64 {
    1.0 - smoothstep7((s.abs() - 0.5 * delta1) / (0.5 * delta1))
}

pub fn xi_deriv(s: f64, delta1: f64) -> f64 {
    -s.signum() * smoothstep7_deriv((s.abs() - 0.5 * delta1) / (0.5 * delta1)) / (0.5 * delta1)
}

/// 0 on `[-1,1]`, 1 on `|s| ≥ 2`.
pub fn chi(s: f64) -> f64 {
    smoothstep7(s.abs() - 1.0)
}

/// 0 on `|s| ≤ δ₁/3`, 1 on `|s| ≥ 3δ₁/8`.
pub fn eta_tilde(s: f64, delta1: f64) -> f64 {
    let lo = delta1 / 3.0;
    let hi = 3.0 * delta1 / 8.0;
    smoothstep7((s.abs() - lo) / (hi - lo))
}

/// `η̃(|s| − δ₁/24)`.
pub fn eta_bar(s: f64, delta1: f64) -> f64 {
    eta_tilde(s.abs() - delta1 / 24.0, delta1)
}

// θ on the bridge, in units of δ₁ with τ = |s|/δ₁ - 1 ∈ [0, 2]: θ'' is
// piecewise linear with knots below, so θ is C² with |θ'| ≤ 1 and
// max |θ''| = K/δ₁ where K = 50/17.
const K: f64 = 50.0 / 17.0;
const RAMP: f64 = 0.1;

struct Bridge {
    knots: [f64; 8],
    second: [f64; 8],
    first: [f64; 8],
    value: [f64; 8],
}

fn bridge() -> &'static Bridge {
    static B: OnceLock<Bridge> = OnceLock::new();
    B.get_or_init(|| {
        let t1 = 2.0 / K + RAMP;
        let t2 = 1.0 / K + RAMP;
        let plateau = 1.0 - t2 / 2.0;
        let knots = [0.0, RAMP, t1 - RAMP, t1, t1 + plateau, t1 + plateau + RAMP, t1 + plateau + t2 - RAMP, 2.0];
        let second = [0.0, -K, -K, 0.0, 0.0, K, K, 0.0];
        let mut first = [0.0; 8];
        let mut value = [0.0; 8];
        first[0] = 1.0;
        value[0] = 1.0;
        for k in 0..7 {
            let d = knots[k + 1] - knots[k];
            let (a, b) = (second[k], second[k + 1]);
            first[k + 1] = first[k] + 0.5 * (a + b) * d;
            value[k + 1] = value[k] + first[k] * d + a * d * d / 2.0 + (b - a) * d * d / 6.0;
        }
        Bridge { knots, second, first, value }
    })
}

/// `(θ, θ', θ'')` of the normalised bridge at `τ ∈ [0,2]`.
fn bridge_eval(tau: f64) -> (f64, f64, f64) {
    let b = bridge();
    let k = (0..7).rev().find(|&k| tau >= b.knots[k]).unwrap_or(0);
    let d = b.knots[k + 1] - b.knots[k];
    let t = tau - b.knots[k];
    let (a, bb) = (b.second[k], b.second[k + 1]);
    let slope = (bb - a) / d;
    let second = a + slope * t;
    let first = b.first[k] + a * t + slope * t * t / 2.0;
    let value = b.value[k] + b.first[k] * t + a * t * t / 2.0 + slope * t * t * t / 6.0;
    (value, first, second)
}

/// Odd C² cutoff: `θ(s) = s` on `|s| ≤ δ₁`, 0 on `|s| ≥ 3δ₁`.
pub fn theta(s: f64, delta1: f64) -> f64 {
    let a = s.abs();
    let v = if a <= delta1 {
        a
    } else if a >= 3.0 * delta1 {
        0.0
    } else {
        delta1 * bridge_eval(a / delta1 - 1.0).0
    };
    v.copysign(s)
}

pub fn theta_deriv(s: f64, delta1: f64) -> f64 {
    let a = s.abs();
    if a <= delta1 {
        1.0
    } else if a >= 3.0 * delta1 {
        0.0
    } else {
        bridge_eval(a / delta1 - 1.0).1
    }
}

pub fn theta_second(s: f64, delta1: f64) -> f64 {
    let a = s.abs();
    if a <= delta1 || a >= 3.0 * delta1 {
        0.0
    } else {
        s.signum() * bridge_eval(a / delta1 - 1.0).2 / delta1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_closes() {
        let b = bridge();
        assert!(b.value[7].abs() < 1e-14);
        assert!(b.first[7].abs() < 1e-14);
    }

    #[test]
    fn theta_examples() {
        let d = 0.05;
        assert_eq!(theta(d / 2.0, d), d / 2.0);
        assert_eq!(theta(4.0 * d, d), 0.0);
        for k in 0..200 {
            let s = -0.2 + 0.4 * k as f64 / 199.0;
            assert_eq!(theta(-s, d), -theta(s, d));
            assert!(theta(s, d).abs() <= 2.0 * d);
            assert!(theta_deriv(s, d).abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn theta_is_c2_and_curvature_bounded() {
        let d = 0.05;
        let n = 10_000;
        let lo = -4.0 * d;
        let h = 8.0 * d / n as f64;
        let mut max2: f64 = 0.0;
        for k in 1..n {
            let s = lo + k as f64 * h;
            let fd = (theta(s + h, d) - 2.0 * theta(s, d) + theta(s - h, d)) / (h * h);
            max2 = max2.max(fd.abs());
            let fd1 = (theta(s + h, d) - theta(s - h, d)) / (2.0 * h);
            assert!((fd1 - theta_deriv(s, d)).abs() < 1e-3);
        }
        assert!(max2 <= 4.0 / d + 1e-6, "{max2}");
        for s in [d, 3.0 * d] {
            assert!(theta_second(s - 1e-9, d).abs() < 1e-6 * 4.0 / d);
            assert!(theta_second(s + 1e-9, d).abs() < 1e-6 * 4.0 / d);
        }
    }

    #[test]
    fn cutoff_examples() {
        let d = 0.05;
        assert_eq!(eta(0.5), 1.0);
        assert_eq!(eta(0.9), 0.0);
        assert_eq!(xi(d / 4.0, d), 1.0);
        assert_eq!(xi(2.0 * d, d), 0.0);
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(chi(3.0), 1.0);
        assert_eq!(eta_tilde(d / 4.0, d), 0.0);
        assert_eq!(eta_tilde(0.4 * d, d), 1.0);
        assert_eq!(eta_bar(0.36 * d, d), 0.0);
    }

    #[test]
    fn xi_derivative_matches() {
        let d = 0.05;
        for k in 0..100 {
            let s = -1.2 * d + 2.4 * d * k as f64 / 99.0;
            let h = 1e-7;
            let fd = (xi(s + h, d) - xi(s - h, d)) / (2.0 * h);
            assert!((fd - xi_deriv(s, d)).abs() < 1e-4);
        }
    }
}
