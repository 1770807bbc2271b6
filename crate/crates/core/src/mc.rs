//! Monte Carlo campaigns: martingale means, return probabilities, Bessel hitting
//! bounds, invariant densities, coupling audits and a large-deviation probe.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use libm::erfc;
use statrs::function::gamma::ln_gamma;

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::loewner::{trace_chordal, trace_radial, DrivingPath, Geometry};
use crate::partition::{log_martingale_chordal, log_martingale_radial};
use crate::rng::{normal, StreamId};
use crate::sde::{
    bessel_chordal_system, bessel_radial_system, simulate_chordal_sle_kappa_rho, simulate_monotone_coupling_chordal,
    simulate_monotone_coupling_radial, simulate_radial_sle_kappa_mu_rho, SdeConfig,
};

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub rng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl McEstimate {
    pub fn from_values(values: &[f64], rng: impl Into<String>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        Ok(Self { mean, stderr: (var / n as f64).sqrt(), n_samples: n, rng: rng.into(), confidence: None })
    }

    /// Proportion of `hits` among `n` Bernoulli trials.
    pub fn proportion(hits: usize, n: usize, rng: impl Into<String>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let p = hits as f64 / n as f64;
        let var = if n > 1 { p * (1.0 - p) * n as f64 / (n - 1) as f64 } else { 0.0 };
        Ok(Self { mean: p, stderr: (var / n as f64).sqrt(), n_samples: n, rng: rng.into(), confidence: None })
    }

    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - target) / self.stderr
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - target)
        }
    }

    /// Two-sided check `|mean - target| <= k stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// One-sided check `mean <= bound + k stderr`.
    pub fn at_most(&self, bound: f64, k: f64) -> bool {
        self.mean <= bound + k * self.stderr
    }
}

/// Ensemble mean of `M_T/M_0` under the reference measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheck {
    pub estimate: McEstimate,
    /// Smallest ratio of a force-point gap to its initial value over the recorded grid.
    pub min_gap_ratio: f64,
    pub pass: bool,
}

fn finish_martingale(ratios: Vec<(f64, f64)>, rng: String) -> Result<MartingaleCheck> {
    let vals: Vec<f64> = ratios.iter().map(|r| r.0).collect();
    let min_gap_ratio = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let estimate = McEstimate::from_values(&vals, rng)?;
    let pass = estimate.within(1.0, 3.0);
    Ok(MartingaleCheck { estimate, min_gap_ratio, pass })
}

/// Simulates chordal SLE_kappa (weights set to zero) and averages the SLE(kappa; rho)
/// martingale ratio with the weights of `cfg`.
pub fn martingale_mean_chordal(cfg: &SdeConfig) -> Result<MartingaleCheck> {
    let mut reference = cfg.clone();
    reference.rho_left = vec![0.0; cfg.x_left.len()];
    reference.rho_right = vec![0.0; cfg.x_right.len()];
    let ens = simulate_chordal_sle_kappa_rho(&reference)?;
    let (l, r) = (cfg.x_left.len(), cfg.x_right.len());
    let ratios = ens
        .paths
        .iter()
        .map(|rows| {
            let lm = log_martingale_chordal(cfg.kappa, &cfg.rho_left, &cfg.rho_right, &ens.times, rows)?;
            let gap0: Vec<f64> = (1..=l + r).map(|k| (rows[0][k] - rows[0][0]).abs()).collect();
            let worst = rows
                .iter()
                .flat_map(|row| (1..=l + r).map(|k| (row[k] - row[0]).abs() / gap0[k - 1]))
                .fold(f64::INFINITY, f64::min);
            Ok(((lm[lm.len() - 1] - lm[0]).exp(), worst))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_martingale(ratios, ens.rng)
}

/// Radial twin: simulates radial SLE_kappa without spiral or weights and averages
/// the SLE^mu(rho) martingale ratio with `cfg.mu` and `cfg.rho`.
pub fn martingale_mean_radial(cfg: &SdeConfig) -> Result<MartingaleCheck> {
    let mut reference = cfg.clone();
    reference.mu = 0.0;
    reference.rho = vec![0.0; cfg.rho.len()];
    let ens = simulate_radial_sle_kappa_mu_rho(&reference)?;
    let m = cfg.rho.len();
    let ratios = ens
        .paths
        .iter()
        .map(|rows| {
            let lm = log_martingale_radial(cfg.kappa, cfg.mu, &cfg.rho, &ens.times, rows)?;
            let gap = |row: &Vec<f64>| -> f64 {
                if m == 0 {
                    return f64::INFINITY;
                }
                (row[1] - row[0]).min(2.0 * std::f64::consts::PI - (row[m] - row[0]))
            };
            let g0 = gap(&rows[0]);
            let worst = rows.iter().map(|r| gap(r) / g0).fold(f64::INFINITY, f64::min);
            Ok(((lm[lm.len() - 1] - lm[0]).exp(), worst))
        })
        .collect::<Result<Vec<_>>>()?;
    finish_martingale(ratios, ens.rng)
}

/// Return probabilities for several exit radii, estimated on shared traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnCampaign {
    pub geometry: Geometry,
    pub kappa: f64,
    pub s: f64,
    pub exit_radii: Vec<f64>,
    /// Capacity horizon `S + 10` used for each exit radius.
    pub horizons: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// Number of traces that reached the exit radius within the horizon.
    pub reached: Vec<usize>,
    pub dt: f64,
    /// Largest per-vertex error estimate of the slit discretization over all traces.
    pub max_error_estimate: f64,
    /// Estimates are non-increasing in the exit radius.
    pub monotone: bool,
}

pub const RETURN_HORIZON_PAD: f64 = 10.0;

fn driving_sample(geometry: Geometry, cfg: &SdeConfig, n_steps: usize, rng: &mut impl Rng) -> Result<DrivingPath> {
    let sig = (cfg.kappa * cfg.dt).sqrt();
    let (start, drift) = match geometry {
        Geometry::Chordal => (0.0, 0.0),
        Geometry::Radial => (cfg.init.first().copied().unwrap_or(0.0), cfg.mu * cfg.dt),
    };
    let mut v = Vec::with_capacity(n_steps + 1);
    v.push(start);
    for k in 0..n_steps {
        let x = if sig > 0.0 { v[k] + drift + sig * normal(rng) } else { v[k] + drift };
        v.push(x);
    }
    DrivingPath::new(geometry, cfg.dt, v)
}

/// Distance from 0 to the segment `[a, b]`.
fn segment_distance(a: C, b: C) -> f64 {
    let d = b - a;
    let l2 = d.norm_sqr();
    if l2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.re * d.re + a.im * d.im) / l2).clamp(0.0, 1.0);
    (a + d * t).norm()
}

/// For one trace: did it reach the exit circle, and did it come back to the small one afterwards?
fn return_event(geometry: Geometry, pts: &[C], last: usize, s: f64, big_s: f64) -> (bool, bool) {
    let last = last.min(pts.len() - 1);
    let exited = |z: C| match geometry {
        Geometry::Chordal => z.norm() >= big_s,
        Geometry::Radial => z.norm() <= (-big_s).exp(),
    };
    let Some(k) = pts[..=last].iter().position(|&z| exited(z)) else {
        return (false, false);
    };
    let back = (k..last).any(|j| match geometry {
        Geometry::Chordal => segment_distance(pts[j], pts[j + 1]) <= s,
        Geometry::Radial => pts[j].norm().max(pts[j + 1].norm()) >= (-s).exp(),
    });
    (true, back)
}

/// Common-random-number estimates of the probability that the trace comes back to
/// the circle of radius `s` (chordal) or `e^{-s}` (radial) after first reaching
/// radius `S` (resp. `e^{-S}`), for every `S` in `exit_radii`.
///
/// Sample `i` uses the same Brownian driver for every `S`; each event is checked
/// on the capacity window `[0, S + 10]` and traces that never exit count as non-returns.
pub fn return_campaign(
    geometry: Geometry,
    cfg: &SdeConfig,
    s: f64,
    exit_radii: &[f64],
    n: usize,
) -> Result<ReturnCampaign> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(s > 0.0) || exit_radii.is_empty() || exit_radii.iter().any(|&b| !(b > s) || !b.is_finite()) {
        return Err(Error::InvalidInput(format!("need S > s > 0, got s={s}, S={exit_radii:?}")));
    }
    if !(cfg.dt > 0.0) || !(cfg.kappa >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and kappa >= 0".into()));
    }
    let mut radii = exit_radii.to_vec();
    radii.sort_by(f64::total_cmp);
    let horizons: Vec<f64> = radii.iter().map(|b| b + RETURN_HORIZON_PAD).collect();
    let t_max = horizons[horizons.len() - 1];
    let n_steps = (t_max / cfg.dt).ceil() as usize;
    let sid = cfg.stream_id();
    let per_sample = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sid.rng(i);
            let drv = driving_sample(geometry, cfg, n_steps, &mut rng)?;
            let tr = match geometry {
                Geometry::Chordal => trace_chordal(&drv, f64::INFINITY)?,
                Geometry::Radial => trace_radial(&drv, f64::INFINITY, &[])?,
            };
            let ev: Vec<(bool, bool)> = radii
                .iter()
                .zip(&horizons)
                .map(|(&b, &h)| return_event(geometry, &tr.points, (h / cfg.dt).round() as usize, s, b))
                .collect();
            Ok((ev, tr.error_estimate))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut estimates = Vec::with_capacity(radii.len());
    let mut reached = Vec::with_capacity(radii.len());
    for j in 0..radii.len() {
        let r = per_sample.iter().filter(|p| p.0[j].0).count();
        if r == 0 {
            return Err(Error::HorizonTooShort);
        }
        let hits = per_sample.iter().filter(|p| p.0[j].1).count();
        reached.push(r);
        estimates.push(McEstimate::proportion(hits, n, sid.label())?);
    }
    let monotone = estimates.windows(2).all(|w| w[1].mean <= w[0].mean);
    let max_error_estimate = per_sample.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(ReturnCampaign {
        geometry,
        kappa: cfg.kappa,
        s,
        exit_radii: radii,
        horizons,
        estimates,
        reached,
        dt: cfg.dt,
        max_error_estimate,
        monotone,
    })
}

pub fn estimate_return_probability(
    geometry: Geometry,
    cfg: &SdeConfig,
    s: f64,
    big_s: f64,
    n: usize,
) -> Result<McEstimate> {
    let c = return_campaign(geometry, cfg, s, &[big_s], n)?;
    Ok(c.estimates.into_iter().next().expect("one exit radius"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HittingKind {
    /// `P[X_t <= eps]` from `X_0 = 1` against the stationary-density bound.
    ChordalStationary,
    /// Scaling of `P[inf_{t <= t0} X_t <= eps]` in `eps` for the chordal Bessel process.
    ChordalFiniteTime,
    /// Scaling of the two-sided boundary approach probability of the radial Bessel process.
    Radial,
}

impl std::str::FromStr for HittingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chordal_stationary" => Ok(Self::ChordalStationary),
            "chordal_finite_time" => Ok(Self::ChordalFiniteTime),
            "radial" => Ok(Self::Radial),
            _ => Err(Error::InvalidInput(format!("unknown hitting check {s:?}"))),
        }
    }
}

/// Empirical value against its bound. For the scaling kinds the value is the
/// ratio `P(eps/2)/P(eps)` on shared paths and the bound is `2^{-gamma}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub kind: HittingKind,
    pub eps: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub n_samples: usize,
    pub rng: String,
    pub pass: bool,
}

/// `Gamma(4(alpha+1)/kappa) / (Gamma(4/kappa) Gamma(4 alpha/kappa)) (kappa/4) eps^{4/kappa}`.
pub fn stationary_hitting_bound(kappa: f64, alpha: f64, eps: f64) -> f64 {
    let (a, b) = (4.0 / kappa, 4.0 * alpha / kappa);
    (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (kappa / 4.0).ln() + a * eps.ln()).exp()
}

fn bessel_start(cfg: &SdeConfig) -> Result<f64> {
    match cfg.init.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::InvalidInput("Bessel checks take exactly one initial value".into())),
    }
}

/// Runs the Bessel system of `cfg` per sample and reduces each path with `f(running min, running max, final)`.
fn bessel_paths<T: Send>(
    radial: bool,
    cfg: &SdeConfig,
    f: impl Fn(f64, f64, f64) -> T + Sync + Send,
) -> Result<Vec<T>> {
    let sys = if radial { bessel_radial_system(cfg)? } else { bessel_chordal_system(cfg)? };
    let n_steps = cfg.n_steps();
    let sid = cfg.stream_id();
    (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sid.rng(i);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let x = sys.run(cfg.dt, n_steps, &mut rng, |_, _, x| {
                lo = lo.min(x[0]);
                hi = hi.max(x[0]);
                true
            })?;
            Ok(f(lo, hi, x[0]))
        })
        .collect()
}

fn ratio_report(kind: HittingKind, eps: f64, hits: &[(bool, bool)], gamma: f64, rng: String) -> Result<HittingReport> {
    let n_eps = hits.iter().filter(|h| h.0).count();
    if n_eps == 0 {
        return Err(Error::ProbabilityUnderflow { p: 0.0, floor: 1.0 / hits.len().max(1) as f64 });
    }
    let n_half = hits.iter().filter(|h| h.1).count();
    let est = McEstimate::proportion(n_half, n_eps, rng.clone())?;
    let bound = 2f64.powf(-gamma);
    Ok(HittingReport {
        kind,
        eps,
        empirical: est.mean,
        stderr: est.stderr,
        bound,
        n_samples: hits.len(),
        rng,
        pass: est.at_most(bound, 3.0),
    })
}

/// Empirical hitting frequency against the closed-form bound (stationary kind) or
/// the bound's scaling exponent (finite-time and radial kinds). One-sided 3 sigma rule.
pub fn hitting_bound_check(kind: HittingKind, cfg: &SdeConfig, eps: f64) -> Result<HittingReport> {
    let (kappa, alpha) = (cfg.kappa, cfg.alpha);
    let x0 = bessel_start(cfg)?;
    if cfg.n_samples == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let rng = cfg.stream_id().label();
    match kind {
        HittingKind::ChordalStationary => {
            if !(kappa > 0.0 && kappa < 4.0) || !(alpha >= 1.0) {
                return Err(Error::ParameterOutOfLemmaRange(format!("need 0 < kappa < 4, alpha >= 1 (got {kappa}, {alpha})")));
            }
            if !(eps > 0.0 && eps < 0.25) {
                return Err(Error::ParameterOutOfLemmaRange(format!("need 0 < eps < 1/4, got {eps}")));
            }
            if x0 != 1.0 {
                return Err(Error::ParameterOutOfLemmaRange(format!("the stationary bound starts at X_0 = 1, got {x0}")));
            }
            let hits = bessel_paths(false, cfg, |_, _, x| x <= eps)?;
            let est = McEstimate::proportion(hits.iter().filter(|&&h| h).count(), hits.len(), rng.clone())?;
            let bound = stationary_hitting_bound(kappa, alpha, eps);
            Ok(HittingReport {
                kind,
                eps,
                empirical: est.mean,
                stderr: est.stderr,
                bound,
                n_samples: est.n_samples,
                rng,
                pass: est.at_most(bound, 3.0),
            })
        }
        HittingKind::ChordalFiniteTime => {
            if !(kappa > 0.0 && kappa < 4.0) || !(alpha >= 1.0) {
                return Err(Error::ParameterOutOfLemmaRange(format!("need 0 < kappa < 4, alpha >= 1 (got {kappa}, {alpha})")));
            }
            let limit = 2f64.powf(-(4.0 + 2.0 * kappa) / (4.0 - kappa)) * x0;
            if !(x0 > 0.0 && x0 < 1.0) || !(eps > 0.0 && eps < limit) {
                return Err(Error::ParameterOutOfLemmaRange(format!(
                    "need X_0 in (0,1) and 0 < eps < {limit:.4e} (X_0={x0}, eps={eps})"
                )));
            }
            let hits = bessel_paths(false, cfg, |lo, _, _| (lo <= eps, lo <= 0.5 * eps))?;
            ratio_report(kind, eps, &hits, 4.0 / kappa - 1.0, rng)
        }
        HittingKind::Radial => {
            if !(kappa > 0.0 && kappa < 4.0 * alpha) {
                return Err(Error::ParameterOutOfLemmaRange(format!("need 0 < kappa < 4 alpha (got {kappa}, {alpha})")));
            }
            if !(eps > 0.0 && eps < x0.min(2.0 * std::f64::consts::PI - x0)) {
                return Err(Error::ParameterOutOfLemmaRange(format!("eps {eps} must be below the initial distance to 0 and 2 pi")));
            }
            let tp = 2.0 * std::f64::consts::PI;
            let hits = bessel_paths(true, cfg, |lo, hi, _| {
                (lo <= eps || hi >= tp - eps, lo <= 0.5 * eps || hi >= tp - 0.5 * eps)
            })?;
            ratio_report(kind, eps, &hits, 4.0 * alpha / kappa - 1.0, rng)
        }
    }
}

/// Sampling plan for the long-run distribution of the chordal Bessel process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPlan {
    pub burn_in: f64,
    pub samples_per_path: usize,
    pub spacing: f64,
}

impl DensityPlan {
    /// Burn-in `10/kappa`, ten samples per path one time unit apart.
    pub fn for_kappa(kappa: f64) -> Self {
        Self { burn_in: 10.0 / kappa, samples_per_path: 10, spacing: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub kappa: f64,
    pub alpha: f64,
    pub ks_distance: f64,
    pub empirical_mean: f64,
    /// Batch-means standard error (one batch per path).
    pub stderr: f64,
    pub target_mean: f64,
    pub n_samples: usize,
    pub burn_in: f64,
    pub rng: String,
    pub pass: bool,
}

pub const KS_TOLERANCE: f64 = 0.02;

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Compares long-run samples of the chordal Bessel process with Beta(4/kappa, 4 alpha/kappa).
pub fn invariant_density_check(cfg: &SdeConfig, plan: DensityPlan) -> Result<DensityReport> {
    let required = 10.0 / cfg.kappa;
    if !(plan.burn_in >= required) {
        return Err(Error::InsufficientBurnIn { given: plan.burn_in, required });
    }
    if cfg.n_samples == 0 || plan.samples_per_path == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let sys = bessel_chordal_system(cfg)?;
    let burn = (plan.burn_in / cfg.dt).round() as usize;
    let gap = ((plan.spacing / cfg.dt).round() as usize).max(1);
    let m = plan.samples_per_path;
    let n_steps = burn + gap * (m - 1);
    let sid = cfg.stream_id();
    let per_path: Vec<Vec<f64>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sid.rng(i);
            let mut out = Vec::with_capacity(m);
            sys.run(cfg.dt, n_steps, &mut rng, |k, _, x| {
                if k >= burn && (k - burn).is_multiple_of(gap) {
                    out.push(x[0]);
                }
                true
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let batch: Vec<f64> = per_path.iter().map(|p| p.iter().sum::<f64>() / p.len() as f64).collect();
    let bm = McEstimate::from_values(&batch, sid.label())?;
    let mut all: Vec<f64> = per_path.into_iter().flatten().collect();
    let (a, b) = (4.0 / cfg.kappa, 4.0 * cfg.alpha / cfg.kappa);
    let beta = Beta::new(a, b).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let ks = ks_distance(&mut all, |x| beta.cdf(x));
    let target_mean = a / (a + b);
    Ok(DensityReport {
        kappa: cfg.kappa,
        alpha: cfg.alpha,
        ks_distance: ks,
        empirical_mean: bm.mean,
        stderr: bm.stderr,
        target_mean,
        n_samples: all.len(),
        burn_in: plan.burn_in,
        rng: bm.rng.clone(),
        pass: ks <= KS_TOLERANCE && bm.within(target_mean, 3.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub geometry: Geometry,
    pub n_paths: usize,
    /// Paths on which the ordering fails by more than the tolerance.
    pub violations: usize,
    pub max_margin_breach: f64,
    /// Radial only: every path stays under `gap_0 e^{-Ct}`.
    pub decay_pass: Option<bool>,
    pub decay_constant: Option<f64>,
}

const ORDER_TOL: f64 = 1e-9;

/// `inf { sin(u/2)/u : 0 < u <= gap }`, attained at `u = gap` for `gap <= 2 pi`.
pub fn decay_constant(gap: f64) -> f64 {
    if gap > 0.0 {
        (0.5 * gap).sin() / gap
    } else {
        0.5
    }
}

/// Pathwise audit of the monotone couplings: chordal `Y^R <= Delta^{R,1}`,
/// radial `X <= Delta^n` and `0 <= Delta^n - Delta^2 <= (Delta^n_0 - Delta^2_0) e^{-Ct}`.
pub fn coupling_order_check(geometry: Geometry, cfg: &SdeConfig, n: usize) -> Result<CouplingReport> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let mut c = cfg.clone();
    c.n_samples = n;
    match geometry {
        Geometry::Chordal => {
            let e = simulate_monotone_coupling_chordal(&c)?;
            let zr = e.column("ZR1").expect("coupling has ZR1");
            let breaches: Vec<f64> = e
                .paths
                .iter()
                .map(|p| p.iter().map(|r| r[zr] / (1.0 + r[1].abs())).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            Ok(CouplingReport {
                geometry,
                n_paths: n,
                violations: breaches.iter().filter(|&&b| b > ORDER_TOL).count(),
                max_margin_breach: breaches.iter().fold(0.0f64, |m, &b| m.max(b)),
                decay_pass: None,
                decay_constant: None,
            })
        }
        Geometry::Radial => {
            let e = simulate_monotone_coupling_radial(&c)?;
            let last = e.labels.len() - 1;
            let gap0 = e.paths[0][0][last] - e.paths[0][0][1];
            let cst = decay_constant(gap0);
            let mut violations = 0;
            let mut breach = 0.0f64;
            let mut decay_ok = true;
            for p in &e.paths {
                let mut bad = false;
                for (t, r) in e.times.iter().zip(p) {
                    let b = (r[0] - r[last]) / (1.0 + r[last].abs());
                    breach = breach.max(b);
                    bad |= b > ORDER_TOL;
                    let gap = r[last] - r[1];
                    decay_ok &= gap >= -ORDER_TOL && gap <= gap0 * (-cst * t).exp() + ORDER_TOL;
                }
                violations += bad as usize;
            }
            Ok(CouplingReport {
                geometry,
                n_paths: n,
                violations,
                max_margin_breach: breach,
                decay_pass: Some(decay_ok),
                decay_constant: Some(cst),
            })
        }
    }
}

/// Events for the large-deviation probe on the driver `sqrt(kappa) B` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdpEvent {
    /// `sup_{t <= T} sqrt(kappa) B_t >= a`.
    SupExceeds { a: f64 },
}

impl LdpEvent {
    /// Exact probability, by the reflection principle.
    pub fn exact_probability(&self, kappa: f64, horizon: f64) -> f64 {
        match *self {
            LdpEvent::SupExceeds { a } => erfc(a / (kappa * horizon).sqrt() / std::f64::consts::SQRT_2),
        }
    }

    /// `inf` of the Dirichlet energy over the event.
    pub fn rate(&self, horizon: f64) -> f64 {
        match *self {
            LdpEvent::SupExceeds { a } => a * a / (2.0 * horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub event: LdpEvent,
    pub horizon: f64,
    pub dt: f64,
    pub kappa_grid: Vec<f64>,
    pub estimates: Vec<McEstimate>,
    /// `-kappa log P` per kappa and its delta-method standard error.
    pub values: Vec<f64>,
    pub value_stderr: Vec<f64>,
    pub exact: Vec<f64>,
    pub rate: f64,
    pub within_3sigma: Vec<bool>,
    /// Values decrease along the grid and stay above the rate within 3 sigma.
    pub monotone: bool,
}

/// Monte Carlo `-kappa log P` along a decreasing kappa grid. The supremum is
/// monitored between grid points with the Brownian-bridge crossing probability,
/// so the estimator targets the continuous-time event.
pub fn ldp_scaling_probe(
    event: LdpEvent,
    kappa_grid: &[f64],
    n: usize,
    horizon: f64,
    dt: f64,
    stream: StreamId,
) -> Result<ProbeReport> {
    if n == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if kappa_grid.is_empty()
        || kappa_grid.iter().any(|&k| !(k > 0.0))
        || kappa_grid.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidInput("kappa grid must be positive and strictly decreasing".into()));
    }
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(Error::InvalidInput("need horizon > 0 and dt > 0".into()));
    }
    let LdpEvent::SupExceeds { a } = event;
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let h = horizon / n_steps as f64;
    let mut estimates = Vec::with_capacity(kappa_grid.len());
    for (j, &kappa) in kappa_grid.iter().enumerate() {
        let sid = stream.substream(j as u64);
        let sig = (kappa * h).sqrt();
        let hits = (0..n as u64)
            .into_par_iter()
            .filter(|&i| {
                let mut rng = sid.rng(i);
                let mut x = 0.0f64;
                for _ in 0..n_steps {
                    let y = x + sig * normal(&mut rng);
                    if y >= a || rng.random::<f64>() < (-2.0 * (a - x) * (a - y) / (kappa * h)).exp() {
                        return true;
                    }
                    x = y;
                }
                false
            })
            .count();
        let est = McEstimate::proportion(hits, n, sid.label())?;
        let floor = 10.0 / n as f64;
        if est.mean < floor {
            return Err(Error::ProbabilityUnderflow { p: est.mean, floor });
        }
        estimates.push(est);
    }
    let values: Vec<f64> = kappa_grid.iter().zip(&estimates).map(|(k, e)| -k * e.mean.ln()).collect();
    let value_stderr: Vec<f64> = kappa_grid.iter().zip(&estimates).map(|(k, e)| k * e.stderr / e.mean).collect();
    let exact: Vec<f64> = kappa_grid.iter().map(|&k| -k * event.exact_probability(k, horizon).ln()).collect();
    let within_3sigma = (0..values.len()).map(|i| (values[i] - exact[i]).abs() <= 3.0 * value_stderr[i]).collect();
    let rate = event.rate(horizon);
    let monotone = values.windows(2).all(|w| w[1] < w[0])
        && values.iter().zip(&value_stderr).all(|(v, s)| *v >= rate - 3.0 * s);
    Ok(ProbeReport {
        event,
        horizon,
        dt: h,
        kappa_grid: kappa_grid.to_vec(),
        estimates,
        values,
        value_stderr,
        exact,
        rate,
        within_3sigma,
        monotone,
    })
}
