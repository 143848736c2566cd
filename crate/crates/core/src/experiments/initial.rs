//! Initial data named in the configuration.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, InitialKind};
use crate::error::{Error, Result};
use crate::grid::GridField;
use crate::travelling::TravellingWaveProfile;

fn need<'a>(v: &'a Option<Vec<f64>>, key: &str, n: usize) -> Result<&'a [f64]> {
    let v = v.as_ref().ok_or_else(|| Error::InvalidInput(format!("initial: `{key}` is required")))?;
    if v.len() != n {
        return Err(Error::InvalidInput(format!("initial: `{key}` must have {n} entries")));
    }
    Ok(v)
}

fn or_fill(v: &Option<Vec<f64>>, key: &str, n: usize, fill: f64) -> Result<Vec<f64>> {
    match v {
        Some(_) => need(v, key, n).map(|s| s.to_vec()),
        None => Ok(vec![fill; n]),
    }
}

/// Reads a profile CSV with columns `xi,u1..un,du1..dun`.
pub fn read_profile_csv(path: &Path, sigma: f64) -> Result<TravellingWaveProfile> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Config { line: 1, msg: "empty profile file".into() })?;
    let cols = header.split(',').count();
    if cols < 3 || (cols - 1) % 2 != 0 {
        return Err(Error::Config { line: 1, msg: "expected columns xi,u1..un,du1..dun".into() });
    }
    let n = (cols - 1) / 2;
    let (mut xi, mut u, mut du) = (Vec::new(), Vec::new(), Vec::new());
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config { line: k + 1, msg: e.to_string() })?;
        if vals.len() != cols {
            return Err(Error::Config { line: k + 1, msg: format!("expected {cols} columns") });
        }
        xi.push(vals[0]);
        u.push(DVector::from_column_slice(&vals[1..=n]));
        du.push(DVector::from_column_slice(&vals[n + 1..]));
    }
    if xi.len() < 2 || xi.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("profile xi must be increasing with at least 2 rows".into()));
    }
    Ok(TravellingWaveProfile {
        sigma,
        u_minus: u[0].clone(),
        u_plus: u[u.len() - 1].clone(),
        xi,
        u,
        du,
    })
}

/// Samples the configured initial data on the configured grid. `epsilon`
/// rescales profile data to `U(x/ε)`.
pub fn initial_field(cfg: &ExperimentConfig, n: usize, epsilon: f64) -> Result<GridField> {
    let ic = &cfg.initial;
    let g = &cfg.grid;
    let boundary = cfg.boundary()?;
    let h = cfg.h();
    let state = or_fill(&ic.state, "state", n, 0.0)?;
    let c = ic.center;
    let make = |f: &dyn Fn(f64) -> Vec<f64>| GridField::from_fn(g.xmin, g.xmax, g.cells, n, boundary, f);
    match ic.kind {
        InitialKind::Constant => make(&|_| state.clone()),
        InitialKind::Riemann => {
            let ul = need(&ic.u_left, "u_left", n)?.to_vec();
            let ur = need(&ic.u_right, "u_right", n)?.to_vec();
            let w = ic.width.unwrap_or(4.0 * h);
            if !(w > 0.0) {
                return Err(Error::InvalidInput("initial: width must be positive".into()));
            }
            make(&|x| {
                let s = 0.5 * (1.0 + ((x - c) / w).tanh());
                (0..n).map(|k| ul[k] + (ur[k] - ul[k]) * s).collect()
            })
        }
        InitialKind::Gaussian => {
            let amp = or_fill(&ic.amplitude, "amplitude", n, 0.1)?;
            let w = ic.width.unwrap_or(1.0);
            make(&|x| {
                let e = (-((x - c) / w).powi(2)).exp();
                (0..n).map(|k| state[k] + amp[k] * e).collect()
            })
        }
        InitialKind::Sine => {
            let amp = or_fill(&ic.amplitude, "amplitude", n, 0.1)?;
            let kw = ic.wavenumber;
            make(&|x| (0..n).map(|k| state[k] + amp[k] * (kw * (x - c)).sin()).collect())
        }
        InitialKind::Noise => {
            let amp = or_fill(&ic.amplitude, "amplitude", n, 0.05)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
            let modes = ic.modes.max(1);
            let coef: Vec<Vec<(f64, f64)>> = (0..n)
                .map(|_| (0..modes).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI))).collect())
                .collect();
            let len = g.xmax - g.xmin;
            make(&|x| {
                (0..n)
                    .map(|k| {
                        let s: f64 = coef[k]
                            .iter()
                            .enumerate()
                            .map(|(m, (a, ph))| a * (2.0 * PI * (m + 1) as f64 * (x - g.xmin) / len + ph).sin())
                            .sum();
                        state[k] + amp[k] * s / modes as f64
                    })
                    .collect()
            })
        }
        InitialKind::Profile => {
            let file = ic.file.as_ref().ok_or_else(|| Error::InvalidInput("initial: `file` is required".into()))?;
            let p = read_profile_csv(file, f64::NAN)?;
            if p.u_minus.len() != n {
                return Err(Error::InvalidInput("profile dimension does not match the system".into()));
            }
            make(&|x| p.eval((x - c) / epsilon).as_slice().to_vec())
        }
    }
}
