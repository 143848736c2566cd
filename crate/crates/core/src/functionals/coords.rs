//! Change of variables `X(x) = ∫_0^x d^{-1/2}` normalising a diffusion
//! coefficient to one, and the induced map `𝒯f = f ∘ X`.

use crate::error::{Error, Result};

/// Cubic Hermite interpolant through `(xs, ys)` with the given slopes;
/// constant extension outside the data.
fn hermite(xs: &[f64], ys: &[f64], slopes: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|p| *p <= x).clamp(1, n - 1) - 1;
    let d = xs[k + 1] - xs[k];
    let t = (x - xs[k]) / d;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * ys[k] + h10 * d * slopes[k] + h01 * ys[k + 1] + h11 * d * slopes[k + 1]
}

/// Fourth-order central slopes on a uniform grid, lower order at the ends.
fn slopes4(ys: &[f64], h: f64) -> Vec<f64> {
    let n = ys.len();
    (0..n)
        .map(|j| {
            if j >= 2 && j + 2 < n {
                (ys[j - 2] - 8.0 * ys[j - 1] + 8.0 * ys[j + 1] - ys[j + 2]) / (12.0 * h)
            } else if j >= 1 && j + 1 < n {
                (ys[j + 1] - ys[j - 1]) / (2.0 * h)
            } else if j == 0 {
                (ys[1] - ys[0]) / h
            } else {
                (ys[n - 1] - ys[n - 2]) / h
            }
        })
        .collect()
}

/// Tabulated `X` at the cell centres.
#[derive(Clone, Debug)]
pub struct CoordinateMap {
    pub xs: Vec<f64>,
    pub h: f64,
    /// `X(x_j)`.
    pub big_x: Vec<f64>,
    /// `X'(x_j) = d_j^{-1/2}`.
    rate: Vec<f64>,
    /// `sup d`.
    pub m: f64,
}

/// Builds `X` for the coefficient samples `d` on cell centres `xs`
/// (uniform spacing `h`), requiring `d ≥ floor`.
pub fn rescale_coordinates(xs: &[f64], h: f64, d: &[f64], floor: f64) -> Result<CoordinateMap> {
    if xs.len() != d.len() || xs.len() < 4 {
        return Err(Error::InvalidInput("coordinate map needs matching samples on at least 4 cells".into()));
    }
    let dmin = d.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if !(dmin >= floor) || !(dmin > 0.0) {
        return Err(Error::ViscosityFloorViolated(dmin));
    }
    let rate: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    // trapezoid cumulative integral from the first centre
    let mut g = vec![0.0; xs.len()];
    for j in 1..xs.len() {
        g[j] = g[j - 1] + 0.5 * h * (rate[j - 1] + rate[j]);
    }
    // anchor X(0) = 0
    let g0 = if 0.0 < xs[0] {
        g[0] - rate[0] * xs[0]
    } else if 0.0 > xs[xs.len() - 1] {
        g[xs.len() - 1] + rate[xs.len() - 1] * (0.0 - xs[xs.len() - 1])
    } else {
        hermite(xs, &g, &rate, 0.0)
    };
    let big_x = g.iter().map(|v| v - g0).collect();
    let m = d.iter().fold(0.0f64, |a, b| a.max(*b));
    Ok(CoordinateMap { xs: xs.to_vec(), h, big_x, rate, m })
}

impl CoordinateMap {
    /// `X^{-1}(y)`.
    pub fn inverse_point(&self, y: f64) -> f64 {
        let inv_slopes: Vec<f64> = self.rate.iter().map(|r| 1.0 / r).collect();
        hermite(&self.big_x, &self.xs, &inv_slopes, y)
    }

    /// `(𝒯f)(x_j) = f(X(x_j))` for `f` sampled on the cell centres.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        let s = slopes4(f, self.h);
        self.big_x.iter().map(|y| hermite(&self.xs, f, &s, *y)).collect()
    }

    /// `(𝒯^{-1}g)(x_j) = g(X^{-1}(x_j))` for `g` sampled on the cell centres.
    pub fn inverse(&self, g: &[f64]) -> Vec<f64> {
        let s = slopes4(g, self.h);
        let inv_slopes: Vec<f64> = self.rate.iter().map(|r| 1.0 / r).collect();
        self.xs
            .iter()
            .map(|y| {
                let x = hermite(&self.big_x, &self.xs, &inv_slopes, *y);
                hermite(&self.xs, g, &s, x)
            })
            .collect()
    }

    /// Largest round-trip error `|𝒯^{-1}𝒯f − f|` over centres whose image
    /// under `X^{-1}` stays inside the grid after mapping forward again.
    pub fn round_trip_error(&self, f: &[f64]) -> f64 {
        let back = self.inverse(&self.forward(f));
        let (lo, hi) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let (ylo, yhi) = (self.big_x[0], self.big_x[self.big_x.len() - 1]);
        self.xs
            .iter()
            .enumerate()
            .filter(|(_, x)| **x >= ylo.max(lo) && **x <= yhi.min(hi))
            .map(|(j, _)| (back[j] - f[j]).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize, lo: f64, hi: f64) -> (Vec<f64>, f64) {
        let h = (hi - lo) / m as f64;
        ((0..m).map(|j| lo + (j as f64 + 0.5) * h).collect(), h)
    }

    #[test]
    fn identity_and_half() {
        let (xs, h) = grid(64, -4.0, 4.0);
        let map = rescale_coordinates(&xs, h, &vec![1.0; 64], 0.5).unwrap();
        for (x, y) in xs.iter().zip(&map.big_x) {
            assert!((x - y).abs() < 1e-13);
        }
        let map = rescale_coordinates(&xs, h, &vec![4.0; 64], 0.5).unwrap();
        for (x, y) in xs.iter().zip(&map.big_x) {
            assert!((x / 2.0 - y).abs() < 1e-13);
        }
    }

    #[test]
    fn floor_violation() {
        let (xs, h) = grid(16, 0.0, 1.0);
        let r = rescale_coordinates(&xs, h, &[0.5; 16], 1.0);
        assert!(matches!(r, Err(Error::ViscosityFloorViolated(_))));
    }

    #[test]
    fn round_trip_smooth() {
        let (xs, h) = grid(512, -10.0, 10.0);
        let d: Vec<f64> = xs.iter().map(|x| 1.5 + 0.4 * (0.7 * x).sin()).collect();
        let map = rescale_coordinates(&xs, h, &d, 1.0).unwrap();
        let f: Vec<f64> = xs.iter().map(|x| (-x * x / 4.0).exp() * (1.0 + 0.3 * x)).collect();
        assert!(map.round_trip_error(&f) < 1e-6, "{}", map.round_trip_error(&f));
    }
}
