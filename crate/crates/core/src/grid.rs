//! Uniform cell-centred 1-D grid carrying `n`-vector states.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Ghost cells copy the nearest interior value.
    ConstantExtrapolation,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extrapolate" | "constant" | "constant-extrapolation" => Ok(Self::ConstantExtrapolation),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::InvalidInput(format!("unknown boundary `{other}`"))),
        }
    }
}

impl Boundary {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ConstantExtrapolation => "extrapolate",
            Self::Periodic => "periodic",
        }
    }

    /// Index of the cell backing (possibly ghost) index `j`.
    #[inline]
    pub fn resolve(&self, j: isize, m: usize) -> usize {
        let m = m as isize;
        match self {
            Self::ConstantExtrapolation => j.clamp(0, m - 1) as usize,
            Self::Periodic => j.rem_euclid(m) as usize,
        }
    }
}

/// Cell centres `x_j = x0 + (j + 1/2) h`; values stored cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub x0: f64,
    pub h: f64,
    m: usize,
    n: usize,
    values: Vec<f64>,
    pub boundary: Boundary,
    pub time: f64,
}

impl GridField {
    pub fn zeros(xmin: f64, xmax: f64, m: usize, n: usize, boundary: Boundary) -> Result<Self> {
        if m < MIN_CELLS {
            return Err(Error::InvalidInput(format!("need at least {MIN_CELLS} cells, got {m}")));
        }
        if !(xmax > xmin) || n == 0 {
            return Err(Error::InvalidInput("empty domain or zero dimension".into()));
        }
        Ok(Self {
            x0: xmin,
            h: (xmax - xmin) / m as f64,
            m,
            n,
            values: vec![0.0; m * n],
            boundary,
            time: 0.0,
        })
    }

    pub fn from_fn(
        xmin: f64,
        xmax: f64,
        m: usize,
        n: usize,
        boundary: Boundary,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut g = Self::zeros(xmin, xmax, m, n, boundary)?;
        for j in 0..m {
            let s = f(g.x(j));
            if s.len() != n {
                return Err(Error::InvalidInput("initial state has wrong dimension".into()));
            }
            g.values[j * n..(j + 1) * n].copy_from_slice(&s);
        }
        Ok(g)
    }

    /// Same geometry and boundary, new values (cell-major, `m*n` entries).
    pub fn with_values(&self, n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.m * n);
        Self { x0: self.x0, h: self.h, m: self.m, n, values, boundary: self.boundary, time: self.time }
    }

    /// Field built from per-component scalar arrays.
    pub fn from_components(&self, comps: &[Vec<f64>]) -> Self {
        let n = comps.len();
        let mut values = vec![0.0; self.m * n];
        for (c, comp) in comps.iter().enumerate() {
            for j in 0..self.m {
                values[j * n + c] = comp[j];
            }
        }
        self.with_values(n, values)
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.m
    }
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x0 + (j as f64 + 0.5) * self.h
    }
    pub fn xmax(&self) -> f64 {
        self.x0 + self.m as f64 * self.h
    }
    pub fn xs(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.x(j)).collect()
    }
    #[inline]
    pub fn state(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }
    #[inline]
    pub fn state_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.n..(j + 1) * self.n]
    }
    pub fn state_vec(&self, j: usize) -> DVector<f64> {
        DVector::from_column_slice(self.state(j))
    }
    /// State at a possibly-ghost index.
    #[inline]
    pub fn ghost(&self, j: isize) -> &[f64] {
        self.state(self.boundary.resolve(j, self.m))
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn component(&self, c: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.values[j * self.n + c]).collect()
    }
    pub fn components(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|c| self.component(c)).collect()
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Text table `x,u1,..,un` with 17 significant digits.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.m * (self.n + 1) * 26);
        out.push('x');
        for c in 1..=self.n {
            out.push_str(&format!(",u{c}"));
        }
        out.push('\n');
        for j in 0..self.m {
            out.push_str(&fmt17(self.x(j)));
            for v in self.state(j) {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path, boundary: Boundary) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines.next().ok_or_else(|| Error::InvalidInput("empty snapshot".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"x") || cols.len() < 2 {
            return Err(Error::InvalidInput("snapshot header must start with `x`".into()));
        }
        let n = cols.len() - 1;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let nums = nums.map_err(|e| Error::InvalidInput(format!("bad snapshot row: {e}")))?;
            if nums.len() != n + 1 {
                return Err(Error::InvalidInput("ragged snapshot row".into()));
            }
            xs.push(nums[0]);
            values.extend_from_slice(&nums[1..]);
        }
        let m = xs.len();
        if m < MIN_CELLS {
            return Err(Error::InvalidInput("snapshot has too few cells".into()));
        }
        let h = (xs[m - 1] - xs[0]) / (m - 1) as f64;
        Ok(Self { x0: xs[0] - 0.5 * h, h, m, n, values, boundary, time: 0.0 })
    }
}

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Spatial derivative of a scalar array: 2nd-order central stencils for
/// `k = 1, 2`; `(-u_{j-2} + 2u_{j-1} - 2u_{j+1} + u_{j+2}) / (2h^3)` for `k = 3`.
pub fn diff(values: &[f64], h: f64, k: usize, boundary: Boundary) -> Vec<f64> {
    let m = values.len();
    let at = |j: isize| values[boundary.resolve(j, m)];
    (0..m as isize)
        .map(|j| match k {
            1 => (at(j + 1) - at(j - 1)) / (2.0 * h),
            2 => (at(j + 1) - 2.0 * at(j) + at(j - 1)) / (h * h),
            3 => (-at(j - 2) + 2.0 * at(j - 1) - 2.0 * at(j + 1) + at(j + 2)) / (2.0 * h * h * h),
            _ => panic!("derivative order must be 1, 2 or 3"),
        })
        .collect()
}

/// Conservative diffusion stencil `[a_{j+1/2}(q_{j+1}-q_j) - a_{j-1/2}(q_j-q_{j-1})]/h^2`
/// with face coefficients averaged from the cells.
pub fn diffuse(coef: &[f64], q: &[f64], h: f64, boundary: Boundary) -> Vec<f64> {
    let m = q.len();
    let r = |j: isize| boundary.resolve(j, m);
    (0..m as isize)
        .map(|j| {
            let (jm, j0, jp) = (r(j - 1), r(j), r(j + 1));
            let ap = 0.5 * (coef[j0] + coef[jp]);
            let am = 0.5 * (coef[j0] + coef[jm]);
            (ap * (q[jp] - q[j0]) - am * (q[j0] - q[jm])) / (h * h)
        })
        .collect()
}

/// `h Σ |q_j|`.
pub fn l1(values: &[f64], h: f64) -> f64 {
    h * values.iter().map(|v| v.abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghost_policies() {
        let b = Boundary::ConstantExtrapolation;
        assert_eq!(b.resolve(-2, 10), 0);
        assert_eq!(b.resolve(11, 10), 9);
        let p = Boundary::Periodic;
        assert_eq!(p.resolve(-1, 10), 9);
        assert_eq!(p.resolve(10, 10), 0);
    }

    #[test]
    fn too_few_cells() {
        assert!(GridField::zeros(0.0, 1.0, 7, 1, Boundary::Periodic).is_err());
    }

    #[test]
    fn second_derivative_of_square() {
        let g = GridField::from_fn(-1.0, 1.0, 40, 1, Boundary::ConstantExtrapolation, |x| vec![x * x]).unwrap();
        let d = diff(&g.component(0), g.h, 2, g.boundary);
        for v in &d[2..38] {
            assert!((v - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn third_derivative_of_cube() {
        let g = GridField::from_fn(-1.0, 1.0, 40, 1, Boundary::ConstantExtrapolation, |x| vec![x * x * x]).unwrap();
        let d = diff(&g.component(0), g.h, 3, g.boundary);
        for v in &d[3..37] {
            assert!((v - 6.0).abs() < 1e-8);
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridField::from_fn(-1.0, 2.0, 16, 2, Boundary::ConstantExtrapolation, |x| vec![x.sin(), x.cos()])
            .unwrap();
        let p = dir.path().join("s.csv");
        g.write_snapshot(&p).unwrap();
        let back = GridField::read_snapshot(&p, Boundary::ConstantExtrapolation).unwrap();
        assert_eq!(back.values(), g.values());
        assert!((back.h - g.h).abs() < 1e-15);
        assert!((back.x0 - g.x0).abs() < 1e-14);
    }
}
