//! Monotone couplings of SLE(rho) gaps with Bessel-type processes.

use serde::{Deserialize, Serialize};

use super::{check_increasing, check_radial_chamber, check_weights, simulate_system, PathEnsemble, SdeConfig, TWO_PI};
use crate::error::{Error, Result};
use crate::sde::engine::System;

/// Chordal coupling. Coordinates: `YL, YR, ZL1.., ZR1..`, with the gaps
/// `Delta = Y - Z` of the force points seen from the driving function.
///
/// `(YL, YR)` and the `Z` ODE share one Brownian motion; the ordering margin is
/// `Delta^{R,1} - Y^R = -Z^{R,1}`.
pub fn coupling_chordal_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    let (l, r) = (cfg.x_left.len(), cfg.x_right.len());
    if r == 0 {
        return Err(Error::InvalidInput("the coupling needs at least one right force point".into()));
    }
    if cfg.rho_left.len() != l || cfg.rho_right.len() != r {
        return Err(Error::InvalidInput("one weight per force point is required".into()));
    }
    check_weights(&cfg.rho_left)?;
    check_weights(&cfg.rho_right)?;
    let left_rev: Vec<f64> = cfg.x_left.iter().rev().copied().collect();
    check_increasing(&left_rev, "left force points (listed nearest first)")?;
    check_increasing(&cfg.x_right, "right force points")?;
    if cfg.x_left.first().is_some_and(|&x| x >= 0.0) || cfg.x_right[0] <= 0.0 {
        return Err(Error::ChamberViolation("force points must lie strictly on either side of 0".into()));
    }
    let alpha = 1.0 + cfg.rho_left.iter().sum::<f64>() / 2.0;
    let yl0 = cfg.x_left.first().copied().unwrap_or(-cfg.x_right[0]);
    let yr0 = cfg.x_right[0];
    let (rl, rr) = (cfg.rho_left.clone(), cfg.rho_right.clone());
    let drift = move |x: &[f64], out: &mut [f64]| {
        let (yl, yr) = (x[0], x[1]);
        let zl = &x[2..2 + l];
        let zr = &x[2 + l..2 + l + r];
        out[0] = 2.0 * alpha / yl;
        out[1] = 2.0 / yr + (2.0 * alpha - 2.0) / yl;
        let left_sum: f64 = (0..l).map(|k| rl[k] / yl - rl[k] / (yl - zl[k])).sum();
        let right_sum: f64 = (0..r).map(|k| rr[k] / (yr - zr[k])).sum();
        for i in 0..l {
            out[2 + i] = 2.0 / yl - 2.0 / (yl - zl[i]) + left_sum - right_sum;
        }
        for j in 0..r {
            out[2 + l + j] = 2.0 / yr - 2.0 / (yr - zr[j]) - right_sum + left_sum;
        }
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.push(-x[0]);
        g.push(x[1]);
        for i in 0..l {
            g.push(x[2 + i] - x[0]);
        }
        for j in 0..r {
            g.push(x[1] - x[2 + l + j]);
        }
        // the margin relaxes stiffly when YR is small; guarding it only refines steps
        g.push(-x[2 + l]);
    };
    let sigma = cfg.kappa.sqrt();
    let noise = move |_x: &[f64], db: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = -sigma * db[0];
        out[1] = -sigma * db[0];
    };
    let mut names = vec!["YL".to_string(), "YR".to_string()];
    names.extend((1..=l).map(|i| format!("ZL{i}")));
    names.extend((1..=r).map(|j| format!("ZR{j}")));
    let mut x0 = vec![yl0, yr0];
    x0.extend(cfg.x_left.iter().map(|x| yl0 - x));
    x0.extend(cfg.x_right.iter().map(|x| yr0 - x));
    Ok(System::new(names, x0, 1, drift, noise, gaps))
}

pub fn simulate_monotone_coupling_chordal(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&coupling_chordal_system(cfg)?, cfg)
}

/// Radial coupling. Coordinates: `X, D2..Dn`, where `X` is the radial Bessel
/// process with `alpha = 1 + sum(rho)/2` started at `Delta^n_0`, and
/// `D_j = V^j - xi` are the gaps of radial SLE^mu(rho), all driven by one Brownian motion.
pub fn coupling_radial_system(cfg: &SdeConfig) -> Result<System> {
    cfg.check_sle_kappa()?;
    let theta = &cfg.init;
    if theta.len() < 2 {
        return Err(Error::InvalidInput("the radial coupling needs theta_1 and at least one force point".into()));
    }
    check_radial_chamber(theta)?;
    let m = theta.len() - 1;
    if cfg.rho.len() != m {
        return Err(Error::InvalidInput("one weight per marked point theta_2..theta_n is required".into()));
    }
    check_weights(&cfg.rho)?;
    let rho = cfg.rho.clone();
    let alpha = 1.0 + rho.iter().sum::<f64>() / 2.0;
    let mu = cfg.mu;
    let drift = move |x: &[f64], out: &mut [f64]| {
        out[0] = alpha / (0.5 * x[0]).tan() - mu;
        let common: f64 = (0..m).map(|k| 0.5 * rho[k] / (0.5 * x[1 + k]).tan()).sum::<f64>() - mu;
        for j in 0..m {
            out[1 + j] = 1.0 / (0.5 * x[1 + j]).tan() + common;
        }
    };
    let gaps = move |x: &[f64], g: &mut Vec<f64>| {
        g.clear();
        g.push(x[0]);
        g.push(TWO_PI - x[0]);
        g.push(x[1]);
        g.push(TWO_PI - x[m]);
    };
    let sigma = cfg.kappa.sqrt();
    let noise = move |_x: &[f64], db: &[f64], out: &mut [f64]| out.iter_mut().for_each(|o| *o = -sigma * db[0]);
    let mut names = vec!["X".to_string()];
    names.extend((2..=m + 1).map(|j| format!("D{j}")));
    let mut x0 = vec![theta[m] - theta[0]];
    x0.extend(theta[1..].iter().map(|t| t - theta[0]));
    Ok(System::new(names, x0, 1, drift, noise, gaps))
}

pub fn simulate_monotone_coupling_radial(cfg: &SdeConfig) -> Result<PathEnsemble> {
    simulate_system(&coupling_radial_system(cfg)?, cfg)
}

/// A path on the clock `s(t) = log((Y^R_t - Y^L_t)/(Y^R_0 - Y^L_0)) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeChangedPath {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
}

/// Maps a coupled `(Y^L, Y^R)` path to `X = Y^R/(Y^R - Y^L)` on a uniform `s`-grid of step `ds`.
pub fn bessel_time_change(yl: &[f64], yr: &[f64], ds: f64) -> Result<TimeChangedPath> {
    if yl.len() != yr.len() || yl.is_empty() {
        return Err(Error::InvalidInput("Y^L and Y^R must be non-empty and of equal length".into()));
    }
    if !(ds > 0.0) {
        return Err(Error::InvalidInput("ds must be positive".into()));
    }
    let w0 = yr[0] - yl[0];
    let mut s = Vec::with_capacity(yl.len());
    let mut x = Vec::with_capacity(yl.len());
    for k in 0..yl.len() {
        let w = yr[k] - yl[k];
        if !(w > 0.0) {
            return Err(Error::InvalidInput(format!("Y^R <= Y^L at index {k}")));
        }
        let sk = 0.5 * (w / w0).ln();
        if k > 0 && sk < s[k - 1] - 1e-12 * (1.0 + sk.abs()) {
            return Err(Error::NonMonotoneClock(k));
        }
        s.push(if k > 0 { sk.max(s[k - 1]) } else { 0.0 });
        x.push(yr[k] / w);
    }
    let s_max = *s.last().expect("non-empty");
    let n = (s_max / ds).floor() as usize;
    let mut out_s = Vec::with_capacity(n + 1);
    let mut out_x = Vec::with_capacity(n + 1);
    let mut j = 0;
    for i in 0..=n {
        let si = i as f64 * ds;
        while j + 2 < s.len() && s[j + 1] < si {
            j += 1;
        }
        let xi = if s.len() == 1 || s[j + 1] <= s[j] {
            x[j.min(s.len() - 1)]
        } else {
            let w = ((si - s[j]) / (s[j + 1] - s[j])).clamp(0.0, 1.0);
            x[j] + w * (x[j + 1] - x[j])
        };
        out_s.push(si);
        out_x.push(xi);
    }
    Ok(TimeChangedPath { s: out_s, x: out_x })
}
