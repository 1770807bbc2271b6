//! Loewner energies: Dirichlet energies, force-point energies, Dyson rate
//! functions and multi-curve energies.

mod multitime;

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::loewner::{chordal_point_flow, covering_point_flow, DrivingPath, Geometry, PointFlow};
use num_complex::Complex64 as C;

pub use multitime::{
    loop_measure_mt, multitime_energy_chordal, multitime_energy_radial, CommonTime, MultiDrivingState, MultiMethod,
    RealizeOptions, TipJet,
};

pub const DIRICHLET: &str = "dirichlet";
pub const LOOP_MEASURE: &str = "loop_measure_12m";
pub const LOG_DERIV: &str = "log_deriv_3term";
pub const POTENTIAL: &str = "potential_diff";
pub const CAPACITY: &str = "capacity_terms";
pub const COMPONENT_NAMES: [&str; 5] = [DIRICHLET, LOOP_MEASURE, LOG_DERIV, POTENTIAL, CAPACITY];

/// How a force-point energy is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMethod {
    /// The squared drift defect integrated along the grid.
    Integral,
    /// Dirichlet energy minus closed-form boundary terms at the horizon.
    Boundary,
}

impl std::str::FromStr for RhoMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integral" => Ok(Self::Integral),
            "boundary" => Ok(Self::Boundary),
            _ => Err(Error::InvalidInput(format!("unknown method {s:?} (integral | boundary)"))),
        }
    }
}

/// An energy value split into named contributions.
///
/// `total` is `f64::INFINITY` for paths that are not absolutely continuous.
/// In JSON an infinite value is written as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(serialize_with = "ser_real", deserialize_with = "de_real")]
    pub total: f64,
    #[serde(serialize_with = "ser_map", deserialize_with = "de_map")]
    pub components: BTreeMap<String, f64>,
    pub horizon: f64,
}

impl EnergyBreakdown {
    /// Builds a breakdown with every standard component present and `total` their sum.
    pub fn from_parts(horizon: f64, parts: &[(&str, f64)]) -> Self {
        let mut components: BTreeMap<String, f64> = COMPONENT_NAMES.iter().map(|n| (n.to_string(), 0.0)).collect();
        for (name, v) in parts {
            *components.entry(name.to_string()).or_insert(0.0) += v;
        }
        let total = components.values().sum();
        Self { total, components, horizon }
    }

    pub fn infinite(horizon: f64) -> Self {
        let mut b = Self::from_parts(horizon, &[]);
        b.components.insert(DIRICHLET.into(), f64::INFINITY);
        b.total = f64::INFINITY;
        b
    }

    pub fn component(&self, name: &str) -> f64 {
        self.components.get(name).copied().unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

fn ser_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("nan")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Real {
    Num(f64),
    Str(String),
}

impl Real {
    fn value<E: serde::de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            Real::Num(x) => Ok(x),
            Real::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Real::Str(s) => Err(E::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }
}

fn de_real<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Real::deserialize(d)?.value()
}

fn ser_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    #[derive(Serialize)]
    struct W(#[serde(serialize_with = "ser_real")] f64);
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &W(*v))?;
    }
    map.end()
}

fn de_map<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, f64>, D::Error> {
    let raw = BTreeMap::<String, Real>::deserialize(d)?;
    raw.into_iter().map(|(k, v)| Ok((k, v.value()?))).collect()
}

/// Composite trapezoid rule on a uniform grid.
pub(crate) fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (f[0] + f[n - 1]) + f[1..n - 1].iter().sum::<f64>()),
    }
}

fn truncate_to(driving: &DrivingPath, horizon: f64) -> Result<DrivingPath> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    if horizon > driving.horizon() + 1e-9 * (1.0 + horizon) {
        return Err(Error::InvalidInput(format!(
            "horizon {horizon} exceeds the driving path's horizon {}",
            driving.horizon()
        )));
    }
    Ok(driving.truncated(horizon))
}

/// `1/2 int_0^T W'^2 dt`; `f64::INFINITY` for rough paths.
pub fn dirichlet_energy(driving: &DrivingPath, horizon: f64) -> Result<f64> {
    let p = truncate_to(driving, horizon)?;
    if p.looks_rough() {
        return Ok(f64::INFINITY);
    }
    let d: Vec<f64> = p.derivative_samples().iter().map(|v| 0.5 * v * v).collect();
    Ok(trapezoid(&d, p.grid_step))
}

fn check_rho(points: usize, rho: &[f64]) -> Result<()> {
    if points != rho.len() {
        return Err(Error::InvalidInput("one weight per force point is required".into()));
    }
    if let Some(r) = rho.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::InvalidInput(format!("weights must be finite and >= 0, got {r}")));
    }
    Ok(())
}

fn force_flow(flow: PointFlow, index: usize) -> Result<PointFlow> {
    match flow.swallowed_at {
        Some(t) => Err(Error::ForcePointSwallowed { index, t }),
        None => Ok(flow),
    }
}

/// Chordal energy with force points `x` (any side of `W_0`) and weights `rho`.
pub fn rho_energy_chordal(
    driving: &DrivingPath,
    x: &[f64],
    rho: &[f64],
    horizon: f64,
    method: RhoMethod,
) -> Result<EnergyBreakdown> {
    if driving.geometry != Geometry::Chordal {
        return Err(Error::InvalidInput("chordal energy needs a chordal driving path".into()));
    }
    check_rho(x.len(), rho)?;
    let p = truncate_to(driving, horizon)?;
    let t_end = p.horizon();
    if p.looks_rough() {
        return Ok(EnergyBreakdown::infinite(t_end));
    }
    let w = &p.values;
    if let Some(j) = x.iter().position(|&xj| xj == w[0] || !xj.is_finite()) {
        return Err(Error::InvalidInput(format!("force point {j} coincides with the start of the curve")));
    }
    let flows = x
        .iter()
        .enumerate()
        .map(|(j, &xj)| force_flow(chordal_point_flow(&p, C::new(xj, 0.0), 1)?, j))
        .collect::<Result<Vec<_>>>()?;
    let wd = p.derivative_samples();
    let h = p.grid_step;
    let dir = trapezoid(&wd.iter().map(|v| 0.5 * v * v).collect::<Vec<_>>(), h);
    match method {
        RhoMethod::Integral => {
            let f: Vec<f64> = (0..w.len())
                .map(|k| {
                    let drift: f64 = flows.iter().zip(rho).map(|(fl, r)| r / (w[k] - fl.states[k][0].re)).sum();
                    0.5 * (wd[k] - drift).powi(2)
                })
                .collect();
            let total = trapezoid(&f, h);
            Ok(EnergyBreakdown::from_parts(t_end, &[(DIRICHLET, dir), (POTENTIAL, total - dir)]))
        }
        RhoMethod::Boundary => {
            let n = w.len() - 1;
            let g: Vec<f64> = flows.iter().map(|f| f.last()[0].re).collect();
            let gd: Vec<f64> = flows.iter().map(|f| f.last()[1].re).collect();
            let log_d: f64 = rho.iter().zip(&gd).map(|(r, d)| r * (r + 4.0) / 4.0 * d.ln()).sum();
            let mut pot = 0.0;
            for j in 0..x.len() {
                pot += rho[j] * ((g[j] - w[n]) / (x[j] - w[0])).abs().ln();
                for i in 0..j {
                    pot += rho[i] * rho[j] / 2.0 * ((g[j] - g[i]) / (x[j] - x[i])).abs().ln();
                }
            }
            Ok(EnergyBreakdown::from_parts(t_end, &[(DIRICHLET, dir), (LOG_DERIV, -log_d), (POTENTIAL, -pot)]))
        }
    }
}

/// Radial energy with spiral rate `mu`; `theta[0]` is the start of the curve
/// and `theta[1..]` carry the weights `rho`.
pub fn rho_energy_radial(
    driving: &DrivingPath,
    theta: &[f64],
    rho: &[f64],
    mu: f64,
    horizon: f64,
    method: RhoMethod,
) -> Result<EnergyBreakdown> {
    if driving.geometry != Geometry::Radial {
        return Err(Error::InvalidInput("radial energy needs a radial driving path".into()));
    }
    if theta.is_empty() {
        return Err(Error::InvalidInput("theta must contain the starting angle".into()));
    }
    crate::sde::check_radial_chamber(theta)?;
    let pts = &theta[1..];
    check_rho(pts.len(), rho)?;
    let p = truncate_to(driving, horizon)?;
    let t_end = p.horizon();
    if p.looks_rough() {
        return Ok(EnergyBreakdown::infinite(t_end));
    }
    let xi = &p.values;
    // force points are measured relative to the actual start of the driving function
    let shift = xi[0] - theta[0];
    let flows = pts
        .iter()
        .enumerate()
        .map(|(j, &th)| force_flow(covering_point_flow(&p, th + shift, 1)?, j + 1))
        .collect::<Result<Vec<_>>>()?;
    let wd = p.derivative_samples();
    let h = p.grid_step;
    let dir = trapezoid(&wd.iter().map(|v| 0.5 * v * v).collect::<Vec<_>>(), h);
    match method {
        RhoMethod::Integral => {
            let f: Vec<f64> = (0..xi.len())
                .map(|k| {
                    let drift: f64 = mu
                        + flows
                            .iter()
                            .zip(rho)
                            .map(|(fl, r)| 0.5 * r / (0.5 * (xi[k] - fl.states[k][0].re)).tan())
                            .sum::<f64>();
                    0.5 * (wd[k] - drift).powi(2)
                })
                .collect();
            let total = trapezoid(&f, h);
            Ok(EnergyBreakdown::from_parts(t_end, &[(DIRICHLET, dir), (POTENTIAL, total - dir)]))
        }
        RhoMethod::Boundary => {
            let n = xi.len() - 1;
            let th0: Vec<f64> = pts.iter().map(|t| t + shift).collect();
            let hh: Vec<f64> = flows.iter().map(|f| f.last()[0].re).collect();
            let hd: Vec<f64> = flows.iter().map(|f| f.last()[1].re).collect();
            let rbar: f64 = rho.iter().sum();
            let mut cap = (rbar * (rbar + 4.0) - 4.0 * mu * mu) / 8.0 * t_end + mu * (xi[n] - xi[0]);
            cap += rho.iter().zip(hh.iter().zip(&th0)).map(|(r, (h, t))| mu * r / 2.0 * (h - t)).sum::<f64>();
            let log_d: f64 = rho.iter().zip(&hd).map(|(r, d)| r * (r + 4.0) / 4.0 * d.ln()).sum();
            let mut pot = 0.0;
            for j in 0..pts.len() {
                pot += rho[j] * ((0.5 * (hh[j] - xi[n])).sin() / (0.5 * (th0[j] - xi[0])).sin()).abs().ln();
                for i in 0..j {
                    pot += rho[i] * rho[j] / 2.0
                        * ((0.5 * (hh[j] - hh[i])).sin() / (0.5 * (th0[j] - th0[i])).sin()).abs().ln();
                }
            }
            Ok(EnergyBreakdown::from_parts(
                t_end,
                &[(DIRICHLET, dir), (LOG_DERIV, -log_d), (POTENTIAL, -pot), (CAPACITY, -cap)],
            ))
        }
    }
}

/// Checks that the paths share one grid and returns (step, samples up to the horizon).
fn common_grid(paths: &[DrivingPath], horizon: f64) -> Result<(f64, usize)> {
    let first = paths.first().ok_or_else(|| Error::InvalidInput("at least one path is required".into()))?;
    let h = first.grid_step;
    if paths.iter().any(|p| (p.grid_step - h).abs() > 1e-12 * h || p.len() != first.len()) {
        return Err(Error::InvalidInput("paths must share one time grid".into()));
    }
    let p = truncate_to(first, horizon)?;
    Ok((h, p.len()))
}

fn multipath_rate(
    paths: &[DrivingPath],
    horizon: f64,
    drift: impl Fn(&[f64], usize) -> f64,
    check: impl Fn(&[f64], usize) -> Result<()>,
) -> Result<f64> {
    let (h, len) = common_grid(paths, horizon)?;
    let cut: Vec<DrivingPath> = paths.iter().map(|p| p.truncated((len - 1) as f64 * h)).collect();
    let d: Vec<Vec<f64>> = cut.iter().map(|p| p.derivative_samples()).collect();
    let mut x = vec![0.0; paths.len()];
    let mut f = Vec::with_capacity(len);
    for k in 0..len {
        for (xj, p) in x.iter_mut().zip(&cut) {
            *xj = p.values[k];
        }
        check(&x, k)?;
        f.push((0..x.len()).map(|j| 0.5 * (d[j][k] - drift(&x, j)).powi(2)).sum::<f64>());
    }
    if cut.iter().any(|p| p.looks_rough()) {
        return Ok(f64::INFINITY);
    }
    Ok(trapezoid(&f, h))
}

/// `1/2 int sum_j (X'_j - sum_{i != j} 4/(X_j - X_i))^2 dt` for an ordered n-path.
pub fn dyson_rate_chordal(paths: &[DrivingPath], horizon: f64) -> Result<f64> {
    multipath_rate(
        paths,
        horizon,
        |x, j| (0..x.len()).filter(|&i| i != j).map(|i| 4.0 / (x[j] - x[i])).sum(),
        |x, k| {
            if x.windows(2).all(|w| w[0] < w[1]) {
                Ok(())
            } else {
                Err(Error::ChamberViolation(format!("points not strictly increasing at grid index {k}")))
            }
        },
    )
}

/// `1/2 int sum_j (w'_j - mu - 2 sum_{i != j} cot((w_j - w_i)/2))^2 dt` on the circle.
pub fn dyson_rate_radial(paths: &[DrivingPath], mu: f64, horizon: f64) -> Result<f64> {
    multipath_rate(
        paths,
        horizon,
        |x, j| mu + (0..x.len()).filter(|&i| i != j).map(|i| 2.0 / (0.5 * (x[j] - x[i])).tan()).sum::<f64>(),
        |x, k| {
            crate::sde::check_radial_chamber(x)
                .map_err(|e| Error::ChamberViolation(format!("at grid index {k}: {e}")))
        },
    )
}
