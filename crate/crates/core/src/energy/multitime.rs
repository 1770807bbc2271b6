//! Multi-curve Loewner energies.
//!
//! A state holds `n` disjoint curves, each stored as a slit chain together with
//! its polyline. The maps `g_{t,j}` (resp. `h_{t,j}`) removing the images of
//! the other curves are realized with the zipper: the other polylines are
//! pushed through the chain of curve `j` and unzipped.

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    dirichlet_energy, dyson_rate_chordal, dyson_rate_radial, EnergyBreakdown, CAPACITY, DIRICHLET, LOG_DERIV,
    LOOP_MEASURE, POTENTIAL,
};
use crate::error::{Error, Result};
use crate::loewner::slit::{unzip_chordal, unzip_radial};
use crate::loewner::{polylines_meet, ChordalSlit, DrivingPath, Geometry, Jet, RadialSlit};

const STIFF: f64 = 0.02;
const TIP_EPS: f64 = 1e-7;
const MAX_SUBSTEPS: usize = 1_000_000;
/// Largest accepted gap between the realized and the given joint driving at the horizon.
pub const REALIZATION_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiMethod {
    DysonReduction,
    Component,
}

impl std::str::FromStr for MultiMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dyson_reduction" => Ok(Self::DysonReduction),
            "component" => Ok(Self::Component),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?} (dyson_reduction | component)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AnySlit {
    Chordal(ChordalSlit),
    Radial(RadialSlit),
}

impl AnySlit {
    fn forward(&self, z: C) -> C {
        match self {
            AnySlit::Chordal(s) => s.forward_lossy(z),
            AnySlit::Radial(s) => s.forward(z),
        }
    }

    fn jet(&self, z: C) -> Result<Jet> {
        match self {
            AnySlit::Chordal(s) => s.forward_jet(z).map_err(|_| Error::CurvesTouch),
            AnySlit::Radial(s) => Ok(s.forward_jet(z)),
        }
    }

    fn capacity(&self) -> f64 {
        match self {
            AnySlit::Chordal(s) => s.t,
            AnySlit::Radial(s) => s.t,
        }
    }
}

/// One curve: slit chain, polyline and its own driving function at the vertices.
#[derive(Debug, Clone, PartialEq)]
struct Curve {
    slits: Vec<AnySlit>,
    vertices: Vec<C>,
    times: Vec<f64>,
    values: Vec<f64>,
}

fn unzip(geometry: Geometry, points: &[C]) -> Result<Curve> {
    let (slits, times, values) = match geometry {
        Geometry::Chordal => {
            let u = unzip_chordal(points)?;
            (u.slits.into_iter().map(AnySlit::Chordal).collect(), u.times, u.values)
        }
        Geometry::Radial => {
            let u = unzip_radial(points)?;
            (u.slits.into_iter().map(AnySlit::Radial).collect(), u.times, u.values)
        }
    };
    Ok(Curve { slits, vertices: points.to_vec(), times, values })
}

fn subsample(points: &[C], max: usize) -> Vec<C> {
    let n = points.len();
    if n <= max || max < 2 {
        return points.to_vec();
    }
    (0..max).map(|i| points[(i * (n - 1) + (max - 1) / 2) / (max - 1)]).collect()
}

/// Numerical settings of the map realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealizeOptions {
    /// Vertices kept per foreign curve when its image is unzipped.
    pub max_vertices: usize,
    /// Quadrature nodes per growth phase of the loop-measure staircase.
    pub m_nodes: usize,
    /// Combine the realization with one on every other sample (`2 fine - coarse`),
    /// cancelling the first-order zipper error.
    pub richardson: bool,
}

impl Default for RealizeOptions {
    fn default() -> Self {
        Self { max_vertices: 400, m_nodes: 64, richardson: true }
    }
}

/// A joint driving function in common time and the induced own times `t_j(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonTime {
    pub paths: Vec<DrivingPath>,
    /// `schedule[j][k]` is `t_j` at common time `k * dt`.
    pub schedule: Vec<Vec<f64>>,
}

/// Value and first three derivatives of `g_{t,j}` (resp. `h_{t,j}`) at the tip image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl TipJet {
    fn from_jet(j: &Jet) -> Self {
        Self { value: j.value.re, d1: j.d1.re, d2: j.d2.re, d3: j.d3.re }
    }

    pub fn schwarzian(&self) -> f64 {
        let r = self.d2 / self.d1;
        self.d3 / self.d1 - 1.5 * r * r
    }
}

/// `n` curves grown to the multi-time `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiDrivingState {
    pub geometry: Geometry,
    /// Starting points `x_j` (chordal) or angles `theta_j` (radial).
    pub start: Vec<f64>,
    /// Final own times `t_j`.
    pub times: Vec<f64>,
    /// Dirichlet energy of each curve's own driving function.
    pub dirichlet: Vec<f64>,
    pub common: Option<CommonTime>,
    /// Tip data of `g_{t,j}` at `W^j_{t_j}`, or of `h_{t,j}` at `xi^j_{t_j}`.
    pub tips: Vec<TipJet>,
    /// Chordal: half-plane capacity `aleph` of the union. Radial: `log g_t'(0)`.
    pub aleph: f64,
    /// Loop-measure term `m_t`, once accumulated.
    pub m: Option<f64>,
    pub options: RealizeOptions,
    #[serde(skip)]
    curves: Vec<Curve>,
    /// The same curves realized from every other sample.
    #[serde(skip)]
    coarse: Option<Box<MultiDrivingState>>,
}

fn every_other(p: &DrivingPath) -> DrivingPath {
    let mut q = p.clone();
    q.grid_step *= 2.0;
    q.values = p.values.iter().step_by(2).copied().collect();
    q.deriv = p.deriv.as_ref().map(|d| d.iter().step_by(2).copied().collect());
    q
}

fn coarse_of(
    paths: &[DrivingPath],
    options: RealizeOptions,
    build: impl Fn(&[DrivingPath], RealizeOptions) -> Result<MultiDrivingState>,
) -> Result<Option<Box<MultiDrivingState>>> {
    let len = paths[0].len();
    if !options.richardson || paths.len() < 2 || len < 9 || paths.iter().any(|p| (p.len() - 1) % 2 != 0) {
        return Ok(None);
    }
    let half: Vec<DrivingPath> = paths.iter().map(every_other).collect();
    Ok(Some(Box::new(build(&half, RealizeOptions { richardson: false, ..options })?)))
}

fn tip_chordal(paths: &[DrivingPath], j: usize, t_end: f64) -> Result<C> {
    let at = |t: f64| -> Vec<f64> { paths.iter().map(|p| p.value_at(t)).collect() };
    let field = |z: C, x: &[f64]| -> (C, f64) {
        let mut f = C::new(0.0, 0.0);
        let mut d = f64::INFINITY;
        for &xi in x {
            let u = z - xi;
            f += 2.0 / u;
            d = d.min(u.norm());
        }
        (f, d)
    };
    let x0 = at(t_end);
    let scale = 1.0 + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    backward(C::new(x0[j], TIP_EPS * scale), t_end, |z, t| field(z, &at(t)))
}

fn tip_radial(paths: &[DrivingPath], j: usize, t_end: f64) -> Result<C> {
    let at = |t: f64| -> Vec<C> { paths.iter().map(|p| C::from_polar(1.0, p.value_at(t))).collect() };
    let field = |z: C, e: &[C]| -> (C, f64) {
        let mut f = C::new(0.0, 0.0);
        let mut d = f64::INFINITY;
        for &ei in e {
            f += z * (ei + z) / (ei - z);
            d = d.min((ei - z).norm());
        }
        (f, d)
    };
    let e0 = at(t_end);
    backward(e0[j] * (1.0 - TIP_EPS), t_end, |z, t| field(z, &at(t)))
}

/// Integrates `dz/dt = F(z, t)` from `t_end` back to 0 with adaptive RK4.
fn backward(mut z: C, t_end: f64, f: impl Fn(C, f64) -> (C, f64)) -> Result<C> {
    let mut t = t_end;
    let mut steps = 0;
    while t > 0.0 {
        let (k1, d) = f(z, t);
        let h = t.min(STIFF * d * d);
        if !(h > 0.0) {
            return Err(Error::StepTooLarge { t });
        }
        let (k2, _) = f(z - k1 * (0.5 * h), t - 0.5 * h);
        let (k3, _) = f(z - k2 * (0.5 * h), t - 0.5 * h);
        let (k4, _) = f(z - k3 * h, t - h);
        z -= (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        t = if h >= t { 0.0 } else { t - h };
        steps += 1;
        if steps > MAX_SUBSTEPS || !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::StepTooLarge { t });
        }
    }
    Ok(z)
}

fn chain_curve(geometry: Geometry, d: &DrivingPath) -> Curve {
    let dt = d.grid_step;
    let slits: Vec<AnySlit> = match geometry {
        Geometry::Chordal => d.values[1..].iter().map(|&x| AnySlit::Chordal(ChordalSlit { x, t: dt })).collect(),
        Geometry::Radial => d.values[1..].iter().map(|&xi| AnySlit::Radial(RadialSlit { xi, t: dt })).collect(),
    };
    let start = match geometry {
        Geometry::Chordal => C::new(d.values[0], 0.0),
        Geometry::Radial => C::from_polar(1.0, d.values[0]),
    };
    let inverse = |s: &AnySlit, w: C| match s {
        AnySlit::Chordal(s) => s.inverse(w),
        AnySlit::Radial(s) => s.inverse(w),
    };
    let tip = |s: &AnySlit| match s {
        AnySlit::Chordal(s) => s.tip(),
        AnySlit::Radial(s) => s.tip(),
    };
    let mut vertices = vec![start];
    vertices.par_extend(
        (1..=slits.len()).into_par_iter().map(|k| slits[..k - 1].iter().rev().fold(tip(&slits[k - 1]), |w, s| inverse(s, w))),
    );
    Curve { slits, vertices, times: (0..d.len()).map(|k| d.time(k)).collect(), values: d.values.clone() }
}

/// Discrete Dirichlet energy of samples on a non-uniform grid.
fn dirichlet_of_samples(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .filter(|(t, _)| t[1] > t[0])
        .map(|(t, v)| 0.5 * (v[1] - v[0]).powi(2) / (t[1] - t[0]))
        .sum()
}

impl MultiDrivingState {
    /// Curves given by their own driving functions, each grown to its own horizon.
    pub fn from_components(geometry: Geometry, drivers: &[DrivingPath], options: RealizeOptions) -> Result<Self> {
        let mut s = Self::build_components(geometry, drivers, options)?;
        s.coarse = coarse_of(drivers, options, |p, o| Self::build_components(geometry, p, o))?;
        Ok(s)
    }

    fn build_components(geometry: Geometry, drivers: &[DrivingPath], options: RealizeOptions) -> Result<Self> {
        if drivers.is_empty() {
            return Err(Error::InvalidInput("at least one driving path is required".into()));
        }
        if drivers.iter().any(|d| d.geometry != geometry) {
            return Err(Error::InvalidInput(format!("all driving paths must be {geometry}")));
        }
        let start: Vec<f64> = drivers.iter().map(|d| d.values[0]).collect();
        check_start(geometry, &start)?;
        let curves: Vec<Curve> = drivers.iter().map(|d| chain_curve(geometry, d)).collect();
        let dirichlet = drivers.iter().map(|d| dirichlet_energy(d, d.horizon())).collect::<Result<Vec<_>>>()?;
        let times = drivers.iter().map(|d| d.horizon()).collect();
        let mut state = Self {
            geometry,
            start,
            times,
            dirichlet,
            common: None,
            tips: vec![],
            aleph: 0.0,
            m: None,
            options,
            curves,
            coarse: None,
        };
        state.check_disjoint()?;
        state.realize_tips()?;
        Ok(state)
    }

    /// Curves generated by a joint driving function in common time.
    ///
    /// Tips are found by running the joint Loewner flow backwards from each
    /// driving point; each polyline is then unzipped on its own.
    pub fn from_common_time(geometry: Geometry, paths: &[DrivingPath], options: RealizeOptions) -> Result<Self> {
        let mut s = Self::build_common(geometry, paths, options)?;
        s.coarse = coarse_of(paths, options, |p, o| Self::build_common(geometry, p, o))?;
        Ok(s)
    }

    fn build_common(geometry: Geometry, paths: &[DrivingPath], options: RealizeOptions) -> Result<Self> {
        let n = paths.len();
        if n == 0 {
            return Err(Error::InvalidInput("at least one driving path is required".into()));
        }
        if paths.iter().any(|p| p.geometry != geometry) {
            return Err(Error::InvalidInput(format!("all driving paths must be {geometry}")));
        }
        let dt = paths[0].grid_step;
        let len = paths[0].len();
        if paths.iter().any(|p| p.len() != len || (p.grid_step - dt).abs() > 1e-12 * dt) {
            return Err(Error::InvalidInput("paths must share one time grid".into()));
        }
        for k in 0..len {
            let x: Vec<f64> = paths.iter().map(|p| p.values[k]).collect();
            check_start(geometry, &x).map_err(|e| Error::ChamberViolation(format!("at grid index {k}: {e}")))?;
        }
        let start: Vec<f64> = paths.iter().map(|p| p.values[0]).collect();
        let (curves, dirichlet) = if n == 1 {
            // a single curve: common time is its own capacity time
            (vec![chain_curve(geometry, &paths[0])], vec![dirichlet_energy(&paths[0], paths[0].horizon())?])
        } else {
            let mut curves = Vec::with_capacity(n);
            for j in 0..n {
                let tips = (1..len)
                    .into_par_iter()
                    .map(|k| match geometry {
                        Geometry::Chordal => tip_chordal(paths, j, k as f64 * dt),
                        Geometry::Radial => tip_radial(paths, j, k as f64 * dt),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut pts = vec![match geometry {
                    Geometry::Chordal => C::new(start[j], 0.0),
                    Geometry::Radial => C::from_polar(1.0, start[j]),
                }];
                pts.extend(tips);
                curves.push(unzip(geometry, &pts)?);
            }
            let dir = curves.iter().map(|c| dirichlet_of_samples(&c.times, &c.values)).collect();
            (curves, dir)
        };
        let schedule: Vec<Vec<f64>> = curves.iter().map(|c| c.times.clone()).collect();
        for (j, s) in schedule.iter().enumerate() {
            for (k, &tj) in s.iter().enumerate() {
                let t = k as f64 * dt;
                let slack = 1e-6 * (1.0 + t);
                if tj < t - slack || tj > n as f64 * t + slack {
                    return Err(Error::MapRealizationFailed(format!(
                        "own time of curve {j} is {tj} at common time {t}, outside [t, n t]"
                    )));
                }
            }
        }
        let times = schedule.iter().map(|s| *s.last().expect("non-empty")).collect();
        let mut state = Self {
            geometry,
            start,
            times,
            dirichlet,
            common: Some(CommonTime { paths: paths.to_vec(), schedule }),
            tips: vec![],
            aleph: 0.0,
            m: None,
            options,
            curves,
            coarse: None,
        };
        state.check_disjoint()?;
        state.realize_tips()?;
        let realized = state.realized_driving();
        for (j, p) in paths.iter().enumerate() {
            let given = *p.values.last().expect("non-empty");
            if (realized[j] - given).abs() > REALIZATION_TOL {
                return Err(Error::MapRealizationFailed(format!(
                    "curve {j}: realized driving {} differs from the given {given}",
                    realized[j]
                )));
            }
        }
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.start.len()
    }

    fn check_disjoint(&self) -> Result<()> {
        for j in 0..self.n() {
            for i in 0..j {
                if polylines_meet(&self.curves[i].vertices, &self.curves[j].vertices) {
                    return Err(Error::CurvesTouch);
                }
            }
        }
        Ok(())
    }

    /// The polyline of curve `j`.
    pub fn polyline(&self, j: usize) -> &[C] {
        &self.curves[j].vertices
    }

    /// Own driving samples `(t, W^j_t)` of curve `j` at its vertices.
    pub fn own_driving(&self, j: usize) -> (&[f64], &[f64]) {
        (&self.curves[j].times, &self.curves[j].values)
    }

    /// Joint driving at the horizon, `g_{t,j}(W^j)` (resp. `h_{t,j}(xi^j)`).
    pub fn realized_driving(&self) -> Vec<f64> {
        self.tips.iter().map(|t| t.value).collect()
    }

    /// Jet at the tip image of curve `j` (its vertex `k`) of the map removing
    /// the images of the curves in `others`, all taken at full length.
    /// Also returns the capacity of those images.
    fn map_out(&self, j: usize, k: usize, others: &[usize]) -> Result<(TipJet, f64)> {
        let cj = &self.curves[j];
        let prefix = &cj.slits[..k];
        let mut chain: Vec<AnySlit> = Vec::new();
        for &i in others {
            let pts: Vec<C> = subsample(&self.curves[i].vertices, self.options.max_vertices)
                .into_iter()
                .map(|z| chain.iter().fold(prefix.iter().fold(z, |z, s| s.forward(z)), |z, s| s.forward(z)))
                .collect();
            let u = unzip(self.geometry, &pts).map_err(|e| match e {
                Error::MapRealizationFailed(m) => Error::MapRealizationFailed(m),
                _ => Error::CurvesTouch,
            })?;
            chain.extend(u.slits);
        }
        let cap: f64 = chain.iter().map(|s| s.capacity()).sum();
        let x = cj.values[k];
        let tip = match self.geometry {
            Geometry::Chordal => {
                let mut jet = Jet::identity(C::new(x, 0.0));
                for s in &chain {
                    jet = Jet::compose(&s.jet(jet.value)?, &jet);
                }
                TipJet::from_jet(&jet)
            }
            Geometry::Radial => {
                let e = C::from_polar(1.0, x);
                let i = C::new(0.0, 1.0);
                let mut jet = Jet { value: e, d1: i * e, d2: -e, d3: -i * e };
                for s in &chain {
                    jet = Jet::compose(&s.jet(jet.value)?, &jet);
                }
                let w = jet.value;
                let log = Jet { value: -i * w.ln(), d1: -i / w, d2: i / (w * w), d3: -2.0 * i / (w * w * w) };
                let h = Jet::compose(&log, &jet);
                // lift the angle next to x
                let two_pi = 2.0 * std::f64::consts::PI;
                let v = h.value.re;
                let lifted = v + two_pi * ((x - v) / two_pi).round();
                TipJet { value: lifted, d1: h.d1.re, d2: h.d2.re, d3: h.d3.re }
            }
        };
        if !(tip.d1 > 0.0) || tip.d1 > 1.0 + 1e-6 || !tip.d3.is_finite() {
            return Err(Error::MapRealizationFailed(format!("tip derivative {} of curve {j} outside (0, 1]", tip.d1)));
        }
        Ok((tip, cap))
    }

    fn realize_tips(&mut self) -> Result<()> {
        let n = self.n();
        let res = (0..n)
            .into_par_iter()
            .map(|j| {
                let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
                self.map_out(j, self.curves[j].slits.len(), &others)
            })
            .collect::<Result<Vec<_>>>()?;
        let (t0, cap0) = (self.times[0], res[0].1);
        self.aleph = match self.geometry {
            Geometry::Chordal => 2.0 * (t0 + cap0),
            Geometry::Radial => t0 + cap0,
        };
        self.tips = res.into_iter().map(|r| r.0).collect();
        Ok(())
    }

    /// Joint driving at the horizon: the given common-time path when present.
    fn final_driving(&self) -> Vec<f64> {
        match &self.common {
            Some(c) => c.paths.iter().map(|p| *p.values.last().expect("non-empty")).collect(),
            None => self.realized_driving(),
        }
    }
}

fn check_start(geometry: Geometry, x: &[f64]) -> Result<()> {
    match geometry {
        Geometry::Chordal => crate::sde::check_increasing(x, "starting points"),
        Geometry::Radial => crate::sde::check_radial_chamber(x),
    }
}

/// Loop-measure term `m_t` at the state's multi-time, integrated along the
/// staircase that grows the curves one after another in `order` (default `0, 1, ..`).
pub fn loop_measure_mt(state: &MultiDrivingState, order: Option<&[usize]>) -> Result<f64> {
    let n = state.n();
    let default: Vec<usize> = (0..n).collect();
    let order = order.unwrap_or(&default);
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
        return Err(Error::InvalidInput("order must be a permutation of the curve indices".into()));
    }
    let mut m = 0.0;
    // the first curve grows alone: g_{t,j} is the identity and contributes nothing
    for p in 1..n {
        let b = order[p];
        let full = &order[..p];
        let cb = &state.curves[b];
        let nk = cb.slits.len();
        let nodes = state.options.m_nodes.max(2).min(nk);
        let ks: Vec<usize> = (0..=nodes).map(|i| i * nk / nodes).collect();
        let f = ks
            .par_iter()
            .map(|&k| {
                let (tip, _) = state.map_out(b, k, full)?;
                let s = -tip.schwarzian() / 3.0;
                Ok(match state.geometry {
                    Geometry::Chordal => s,
                    Geometry::Radial => s + (1.0 - tip.d1 * tip.d1) / 6.0,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        for w in 0..ks.len() - 1 {
            m += 0.5 * (f[w] + f[w + 1]) * (cb.times[ks[w + 1]] - cb.times[ks[w]]);
        }
    }
    Ok(m)
}

fn u_chordal(x: &[f64]) -> f64 {
    let mut u = 0.0;
    for j in 0..x.len() {
        for i in 0..j {
            u -= 2.0 * (x[j] - x[i]).ln();
        }
    }
    u
}

fn v_radial(theta: &[f64], mu: f64) -> f64 {
    let mut v = -mu * theta.iter().sum::<f64>();
    for j in 0..theta.len() {
        for i in 0..j {
            v -= 2.0 * (0.5 * (theta[j] - theta[i])).sin().abs().ln();
        }
    }
    v
}

fn extrapolate(fine: f64, coarse: Option<f64>) -> f64 {
    match coarse {
        Some(c) => 2.0 * fine - c,
        None => fine,
    }
}

/// Loop-measure term with the coarse realization folded in.
fn loop_term(state: &MultiDrivingState) -> Result<f64> {
    if let Some(m) = state.m {
        return Ok(m);
    }
    let fine = loop_measure_mt(state, None)?;
    let coarse = state.coarse.as_deref().map(|c| loop_measure_mt(c, None)).transpose()?;
    Ok(extrapolate(fine, coarse))
}

impl MultiDrivingState {
    /// Computes and stores the loop-measure term `m_t`.
    pub fn accumulate_loop_measure(&mut self) -> Result<f64> {
        self.m = None;
        let m = loop_term(self)?;
        self.m = Some(m);
        Ok(m)
    }
}

fn reduction_paths(state: &MultiDrivingState) -> Result<&CommonTime> {
    state
        .common
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("the reduction route needs a common-time joint driving".into()))
}

/// `(sum of Dirichlet energies, sum of log tip derivatives)` of one realization.
fn local_parts(state: &MultiDrivingState) -> (f64, f64) {
    (state.dirichlet.iter().sum(), state.tips.iter().map(|t| t.d1.ln()).sum())
}

fn component_parts(state: &MultiDrivingState) -> Result<(f64, f64, f64)> {
    let (dir, logd) = local_parts(state);
    let m = loop_term(state)?;
    match state.coarse.as_deref() {
        Some(c) => {
            let (cd, cl) = local_parts(c);
            Ok((extrapolate(dir, Some(cd)), extrapolate(logd, Some(cl)), m))
        }
        None => Ok((dir, logd, m)),
    }
}

fn horizon_of(state: &MultiDrivingState) -> f64 {
    match &state.common {
        Some(c) => c.paths[0].horizon(),
        None => state.times.iter().cloned().fold(0.0, f64::max),
    }
}

/// Chordal multi-time energy by either route.
pub fn multitime_energy_chordal(state: &MultiDrivingState, method: MultiMethod) -> Result<EnergyBreakdown> {
    if state.geometry != Geometry::Chordal {
        return Err(Error::InvalidInput("chordal energy needs a chordal state".into()));
    }
    let h = horizon_of(state);
    match method {
        MultiMethod::DysonReduction => {
            let c = reduction_paths(state)?;
            let v = dyson_rate_chordal(&c.paths, h)?;
            Ok(EnergyBreakdown::from_parts(h, &[(DIRICHLET, v)]))
        }
        MultiMethod::Component => {
            if state.dirichlet.iter().any(|d| !d.is_finite()) {
                return Ok(EnergyBreakdown::infinite(h));
            }
            if state.n() == 1 {
                return Ok(EnergyBreakdown::from_parts(h, &[(DIRICHLET, state.dirichlet[0])]));
            }
            let (dir, logd, m) = component_parts(state)?;
            let pot = u_chordal(&state.final_driving()) - u_chordal(&state.start);
            Ok(EnergyBreakdown::from_parts(
                h,
                &[(DIRICHLET, dir), (LOOP_MEASURE, 12.0 * m), (LOG_DERIV, -3.0 * logd), (POTENTIAL, pot)],
            ))
        }
    }
}

/// Radial multi-time energy with spiral rate `mu` by either route.
pub fn multitime_energy_radial(state: &MultiDrivingState, mu: f64, method: MultiMethod) -> Result<EnergyBreakdown> {
    if state.geometry != Geometry::Radial {
        return Err(Error::InvalidInput("radial energy needs a radial state".into()));
    }
    let h = horizon_of(state);
    match method {
        MultiMethod::DysonReduction => {
            let c = reduction_paths(state)?;
            let v = dyson_rate_radial(&c.paths, mu, h)?;
            Ok(EnergyBreakdown::from_parts(h, &[(DIRICHLET, v)]))
        }
        MultiMethod::Component => {
            if state.dirichlet.iter().any(|d| !d.is_finite()) {
                return Ok(EnergyBreakdown::infinite(h));
            }
            let n = state.n() as f64;
            let (dir, logd, m) = if state.n() == 1 { (state.dirichlet[0], 0.0, 0.0) } else { component_parts(state)? };
            let aleph = extrapolate(state.aleph, state.coarse.as_deref().map(|c| c.aleph));
            let tsum = extrapolate(
                state.times.iter().sum(),
                state.coarse.as_deref().map(|c| c.times.iter().sum()),
            );
            let cap = -1.5 * tsum - 0.5 * (n * n - 4.0 - mu * mu) * aleph;
            let omega = if state.n() == 1 {
                vec![*state.curves[0].values.last().expect("non-empty")]
            } else {
                state.final_driving()
            };
            let pot = v_radial(&omega, mu) - v_radial(&state.start, mu);
            Ok(EnergyBreakdown::from_parts(
                h,
                &[(DIRICHLET, dir), (LOOP_MEASURE, 12.0 * m), (LOG_DERIV, -3.0 * logd), (POTENTIAL, pot), (CAPACITY, cap)],
            ))
        }
    }
}
