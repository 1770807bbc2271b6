//! Seeded simulators for Dyson, SLE(rho), Bessel-type and coupled SDE systems.

mod coupling;
pub mod engine;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamId;
pub use coupling::{
    bessel_time_change, coupling_chordal_system, coupling_radial_system, simulate_monotone_coupling_chordal,
    simulate_monotone_coupling_radial, TimeChangedPath,
};
pub use engine::System;

pub(crate) const TWO_PI: f64 = 2.0 * PI;

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Parameters shared by all simulators. Unused fields are ignored by a given simulator.
///
/// Chordal force points are listed nearest to the origin first: `x_left[0]` is
/// the left point closest to 0 and `x_right[0]` the right point closest to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub kappa: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    /// Dyson particles, radial marked angles `theta_1..theta_n`, or the Bessel start `X_0`.
    #[serde(default)]
    pub init: Vec<f64>,
    /// Radial weights `rho_2..rho_n`.
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub rho_left: Vec<f64>,
    #[serde(default)]
    pub rho_right: Vec<f64>,
    #[serde(default)]
    pub x_left: Vec<f64>,
    #[serde(default)]
    pub x_right: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub n_samples: usize,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SdeConfig {
    pub fn new(kappa: f64, dt: f64, horizon: f64) -> Self {
        Self {
            kappa,
            mu: 0.0,
            alpha: 1.0,
            init: vec![],
            rho: vec![],
            rho_left: vec![],
            rho_right: vec![],
            x_left: vec![],
            x_right: vec![],
            dt,
            horizon,
            n_samples: 1,
            record_stride: 1,
            seed: 0,
            stream: 0,
        }
    }

    pub fn stream_id(&self) -> StreamId {
        StreamId::new(self.seed, self.stream)
    }

    pub fn n_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    fn check_grid(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("bad time grid dt={} horizon={}", self.dt, self.horizon)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput("record_stride must be >= 1".into()));
        }
        Ok(())
    }

    fn check_sle_kappa(&self) -> Result<()> {
        if self.kappa > 4.0 {
            return Err(Error::InvalidInput(format!("kappa must lie in [0, 4], got {}", self.kappa)));
        }
        Ok(())
    }
}

/// Sample paths on the recorded grid: `paths[sample][time][coordinate]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub paths: Vec<Vec<Vec<f64>>>,
    pub config: SdeConfig,
    pub rng: String,
}

impl PathEnsemble {
    pub fn n_samples(&self) -> usize {
        self.paths.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Time series of coordinate `c` in sample `i`.
    pub fn series(&self, i: usize, c: usize) -> Vec<f64> {
        self.paths[i].iter().map(|row| row[c]).collect()
    }

    pub fn final_states(&self) -> Vec<&[f64]> {
        self.paths.iter().map(|p| p.last().expect("non-empty path").as_slice()).collect()
    }
}

/// Runs `cfg.n_samples` independent paths of `system` and records every `record_stride` steps.
pub fn simulate_system(system: &System, cfg: &SdeConfig) -> Result<PathEnsemble> {
    cfg.check_grid()?;
    let n_steps = cfg.n_steps();
    let stride = cfg.record_stride;
    let sid = cfg.stream_id();
    let paths: Result<Vec<Vec<Vec<f64>>>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sid.rng(i);
            let mut rows = Vec::with_capacity(n_steps / stride + 2);
            system.run(cfg.dt, n_steps, &mut rng, |k, _, x| {
                if k % stride == 0 || k == n_steps {
                    rows.push(x.to_vec());
                }
                true
            })?;
            Ok(rows)
        })
        .collect();
    let times = (0..=n_steps).filter(|k| k % stride == 0 || *k == n_steps).map(|k| k as f64 * cfg.dt).collect();
    Ok(PathEnsemble { labels: system.labels.clone(), times, paths: paths?, config: cfg.clone(), rng: sid.label() })
}

pub(crate) fn check_increasing(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::ChamberViolation(format!("{what} must be strictly increasing and finite")));
    }
    Ok(())
}

fn check_weights(v: &[f64]) -> Result<()> {
    if v.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidInput("weights must be non-negative".into()));
    }
    Ok(())
}

pub(crate) fn check_radial_chamber(theta: &[f64]) -> Result<()> {
    check_increasing(theta, "angles")?;
    if theta.len() > 1 && theta[theta.len() - 1] >= theta[0] + TWO_PI {
        return Err(Error::ChamberViolation("angles must satisfy theta_n < theta_1 + 2 pi".into()));
    }
    Ok(())
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|j| format!("{prefix}{j}")).collect()
}

fn scaled_noise(sigma: f64, coords: Vec<(usize, usize, f64)>) -> impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync {
    move |_x, db, out| {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, b, sign) in &coords {
            out[i] += sign * sigma * db[b];
        }
    }
}

/// Dyson Brownian motion `dX^j = sqrt(kappa) dB^j + sum_{i != j} 4/(X^j - X^i) dt`.
pub fn dyson_chordal_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    check_increasing(&cfg.init, "particles")?;
    let n = cfg.init.len();
    let drift = move |x: &[f64], out: &mut [f64]| {
        for j in 0..n {
            out[j] = (0..n).filter(|&i| i != j).map(|i| 4.0 / (x[j] - x[i])).sum();
        }
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.extend(x.windows(2).map(|w| w[1] - w[0]));
    };
    let noise = scaled_noise(cfg.kappa.sqrt(), (0..n).map(|j| (j, j, 1.0)).collect());
    Ok(System::new(labels("X", n), cfg.init.clone(), n, drift, noise, gaps))
}

pub fn simulate_dyson_chordal(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&dyson_chordal_system(cfg)?, cfg)
}

/// Dyson circular ensemble with spiral rate `mu`.
pub fn dyson_radial_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    check_radial_chamber(&cfg.init)?;
    let n = cfg.init.len();
    let mu = cfg.mu;
    let drift = move |x: &[f64], out: &mut [f64]| {
        for j in 0..n {
            out[j] = mu + (0..n).filter(|&i| i != j).map(|i| 2.0 / ((x[j] - x[i]) * 0.5).tan()).sum::<f64>();
        }
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.extend(x.windows(2).map(|w| w[1] - w[0]));
        if n > 1 {
            g.push(TWO_PI - (x[n - 1] - x[0]));
        }
    };
    let noise = scaled_noise(cfg.kappa.sqrt(), (0..n).map(|j| (j, j, 1.0)).collect());
    Ok(System::new(labels("omega", n), cfg.init.clone(), n, drift, noise, gaps))
}

pub fn simulate_dyson_radial(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&dyson_radial_system(cfg)?, cfg)
}

/// Chordal SLE(rho) driving function with force points and their log-derivatives.
///
/// Coordinates: `W, VL1.., VR1.., logdVL1.., logdVR1..` where `logdV = log g_t'(x)`.
pub fn chordal_sle_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    let (l, r) = (cfg.x_left.len(), cfg.x_right.len());
    if cfg.rho_left.len() != l || cfg.rho_right.len() != r {
        return Err(Error::InvalidInput("one weight per force point is required".into()));
    }
    check_weights(&cfg.rho_left)?;
    check_weights(&cfg.rho_right)?;
    let left_rev: Vec<f64> = cfg.x_left.iter().rev().copied().collect();
    check_increasing(&left_rev, "left force points (listed nearest first)")?;
    check_increasing(&cfg.x_right, "right force points")?;
    if cfg.x_left.first().is_some_and(|&x| x >= 0.0) || cfg.x_right.first().is_some_and(|&x| x <= 0.0) {
        return Err(Error::ChamberViolation("force points must lie strictly on either side of 0".into()));
    }
    let m = l + r;
    let rho: Vec<f64> = cfg.rho_left.iter().chain(&cfg.rho_right).copied().collect();
    let drift = move |x: &[f64], out: &mut [f64]| {
        let w = x[0];
        let mut dw = 0.0;
        for k in 0..m {
            let d = x[1 + k] - w;
            dw -= rho[k] / d;
            out[1 + k] = 2.0 / d;
            out[1 + m + k] = -2.0 / (d * d);
        }
        out[0] = dw;
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        if l > 0 {
            g.push(x[0] - x[1]);
        }
        if r > 0 {
            g.push(x[1 + l] - x[0]);
        }
    };
    let mut names = vec!["W".to_string()];
    names.extend(labels("VL", l));
    names.extend(labels("VR", r));
    names.extend(labels("logdVL", l));
    names.extend(labels("logdVR", r));
    let mut x0 = vec![0.0];
    x0.extend(&cfg.x_left);
    x0.extend(&cfg.x_right);
    x0.extend(std::iter::repeat_n(0.0, m));
    let noise = scaled_noise(cfg.kappa.sqrt(), vec![(0, 0, 1.0)]);
    Ok(System::new(names, x0, 1, drift, noise, gaps))
}

pub fn simulate_chordal_sle_kappa_rho(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&chordal_sle_system(cfg)?, cfg)
}

/// Radial SLE^mu(rho) driving function with force points and `log h_t'(theta_j)`.
///
/// Coordinates: `xi, V2..Vn, logdV2..logdVn`.
pub fn radial_sle_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    let theta = &cfg.init;
    if theta.is_empty() {
        return Err(Error::InvalidInput("radial SLE needs at least theta_1".into()));
    }
    check_radial_chamber(theta)?;
    let m = theta.len() - 1;
    if cfg.rho.len() != m {
        return Err(Error::InvalidInput("one weight per marked point theta_2..theta_n is required".into()));
    }
    check_weights(&cfg.rho)?;
    let rho = cfg.rho.clone();
    let mu = cfg.mu;
    let drift = move |x: &[f64], out: &mut [f64]| {
        let xi = x[0];
        let mut d = mu;
        for k in 0..m {
            let half = 0.5 * (x[1 + k] - xi);
            let (s, c) = half.sin_cos();
            d -= 0.5 * rho[k] * c / s;
            out[1 + k] = c / s;
            out[1 + m + k] = -0.5 / (s * s);
        }
        out[0] = d;
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        if m > 0 {
            g.push(x[1] - x[0]);
            g.push(TWO_PI - (x[m] - x[0]));
        }
    };
    let mut names = vec!["xi".to_string()];
    names.extend((2..=m + 1).map(|j| format!("V{j}")));
    names.extend((2..=m + 1).map(|j| format!("logdV{j}")));
    let mut x0 = theta.clone();
    x0.extend(std::iter::repeat_n(0.0, m));
    let noise = scaled_noise(cfg.kappa.sqrt(), vec![(0, 0, 1.0)]);
    Ok(System::new(names, x0, 1, drift, noise, gaps))
}

pub fn simulate_radial_sle_kappa_mu_rho(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&radial_sle_system(cfg)?, cfg)
}

fn bessel_start(cfg: &SdeConfig) -> Result<f64> {
    match cfg.init.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::InvalidInput("Bessel processes take exactly one initial value".into())),
    }
}

/// `dX = -sqrt(kappa X (1-X)) dB + 2(1 - (1+alpha) X) dt` on `[0, 1]`.
pub fn bessel_chordal_system(cfg: &SdeConfig) -> Result<System> {
    let x0 = bessel_start(cfg)?;
    if !(cfg.kappa < 4.0) || !(cfg.alpha >= 1.0) {
        return Err(Error::ParameterOutOfLemmaRange(format!(
            "chordal Bessel needs 0 < kappa < 4 and alpha >= 1 (kappa={}, alpha={})",
            cfg.kappa, cfg.alpha
        )));
    }
    if !(x0 > 0.0 && x0 <= 1.0) {
        return Err(Error::InvalidInput(format!("X0 must lie in (0, 1], got {x0}")));
    }
    let (sigma, a1) = (cfg.kappa.sqrt(), 1.0 + cfg.alpha);
    let drift = move |x: &[f64], out: &mut [f64]| out[0] = 2.0 * (1.0 - a1 * x[0]);
    let noise = move |x: &[f64], db: &[f64], out: &mut [f64]| {
        out[0] = -sigma * (x[0] * (1.0 - x[0])).max(0.0).sqrt() * db[0];
    };
    let gaps = |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.push(x[0]);
        g.push(1.0 - x[0]);
    };
    Ok(System::new(vec!["X".into()], vec![x0], 1, drift, noise, gaps).with_box(0, 0.0, 1.0))
}

pub fn simulate_bessel_chordal(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&bessel_chordal_system(cfg)?, cfg)
}

/// `dX = -sqrt(kappa) dB + (alpha cot(X/2) - mu) dt` on `(0, 2 pi)`.
pub fn bessel_radial_system(cfg: &SdeConfig) -> Result<System> {
    let x0 = bessel_start(cfg)?;
    if !(cfg.kappa < 4.0 * cfg.alpha) {
        return Err(Error::ParameterOutOfLemmaRange(format!(
            "radial Bessel needs 0 < kappa < 4 alpha (kappa={}, alpha={})",
            cfg.kappa, cfg.alpha
        )));
    }
    if !(x0 > 0.0 && x0 < TWO_PI) {
        return Err(Error::InvalidInput(format!("X0 must lie in (0, 2 pi), got {x0}")));
    }
    let (alpha, mu) = (cfg.alpha, cfg.mu);
    let drift = move |x: &[f64], out: &mut [f64]| out[0] = alpha / (0.5 * x[0]).tan() - mu;
    let noise = scaled_noise(cfg.kappa.sqrt(), vec![(0, 0, -1.0)]);
    let gaps = |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.push(x[0]);
        g.push(TWO_PI - x[0]);
    };
    Ok(System::new(vec!["X".into()], vec![x0], 1, drift, noise, gaps).with_box(0, 0.0, TWO_PI))
}

pub fn simulate_bessel_radial(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&bessel_radial_system(cfg)?, cfg)
}
