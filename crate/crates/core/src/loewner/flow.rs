//! Point flows of the Loewner equations, integrated with adaptive RK4.
//!
//! Every flow has the form `dg/dt = F(g, drive)`; the derivative flows follow
//! from the chain rule, so one integrator serves chordal, covering and disk maps.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use super::{DrivingPath, Geometry, SWALLOW_TOL};
use crate::error::{Error, Result};

const MAX_SUBSTEPS: usize = 2_000_000;
/// Step bound `h <= STIFF * dist^2`, where `dist` is the distance to the singularity.
const STIFF: f64 = 0.02;

type State = [C; 4];

#[derive(Debug, Clone, Copy)]
enum Field {
    Chordal,
    Covering,
    Disk,
}

impl Field {
    /// F, F', F'', F''' at `g` and the distance to the singularity.
    #[inline]
    fn eval(self, g: C, drive: f64) -> ([C; 4], f64) {
        match self {
            Field::Chordal => {
                let u = g - drive;
                let r = 1.0 / u;
                let r2 = r * r;
                ([2.0 * r, -2.0 * r2, 4.0 * r2 * r, -12.0 * r2 * r2], u.norm())
            }
            Field::Covering => {
                let v = (g - drive) * 0.5;
                let (s, co) = (v.sin(), v.cos());
                let ct = co / s;
                let csc2 = 1.0 / (s * s);
                (
                    [ct, -0.5 * csc2, 0.5 * csc2 * ct, -0.5 * csc2 * ct * ct - 0.25 * csc2 * csc2],
                    2.0 * s.norm(),
                )
            }
            Field::Disk => {
                let e = C::new(drive.cos(), drive.sin());
                let q = 1.0 / (e - g);
                let e2 = e * e;
                let q2 = q * q;
                (
                    [-g - 2.0 * e + 2.0 * e2 * q, -1.0 + 2.0 * e2 * q2, 4.0 * e2 * q2 * q, 12.0 * e2 * q2 * q2],
                    (e - g).norm(),
                )
            }
        }
    }

    #[inline]
    /// For boundary points: which side of the singularity `g` sits on.
    /// Crossing over the driving value means the point was swallowed.
    fn side(self, g: C, drive: f64) -> Option<f64> {
        if g.im != 0.0 {
            return None;
        }
        match self {
            Field::Chordal => Some((g.re - drive).signum()),
            Field::Covering => Some(((g.re - drive) / std::f64::consts::TAU).floor()),
            Field::Disk => None,
        }
    }

    #[inline]
    fn rhs(self, s: &State, drive: f64, order: usize) -> (State, f64) {
        let (f, d) = self.eval(s[0], drive);
        let mut out = [C::new(0.0, 0.0); 4];
        out[0] = f[0];
        if order >= 1 {
            out[1] = f[1] * s[1];
        }
        if order >= 2 {
            out[2] = f[2] * s[1] * s[1] + f[1] * s[2];
        }
        if order >= 3 {
            out[3] = f[3] * s[1] * s[1] * s[1] + 3.0 * f[2] * s[1] * s[2] + f[1] * s[3];
        }
        (out, d)
    }
}

/// Samples of a point flow on the driving grid, up to the swallowing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFlow {
    /// `states[k] = [g, g', g'', g''']` at grid time `k * dt`.
    pub states: Vec<[C; 4]>,
    pub swallowed_at: Option<f64>,
}

impl PointFlow {
    pub fn last(&self) -> &[C; 4] {
        self.states.last().expect("flow has at least the initial state")
    }
}

fn add(a: &State, b: &State, h: f64) -> State {
    [a[0] + b[0] * h, a[1] + b[1] * h, a[2] + b[2] * h, a[3] + b[3] * h]
}

fn integrate(field: Field, driving: &DrivingPath, z: C, order: usize, scale: f64) -> Result<PointFlow> {
    let n = driving.len();
    let dt = driving.grid_step;
    let tol = SWALLOW_TOL * scale;
    let mut s: State = [z, C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
    let mut states = Vec::with_capacity(n);
    states.push(s);
    let mut substeps = 0usize;
    let side = field.side(z, driving.value_at(0.0));
    for k in 0..n - 1 {
        let t_end = (k + 1) as f64 * dt;
        let mut t = k as f64 * dt;
        while t < t_end {
            let w0 = driving.value_at(t);
            let (k1, dist) = field.rhs(&s, w0, order);
            if dist < tol {
                return Ok(PointFlow { states, swallowed_at: Some(t) });
            }
            let h = (t_end - t).min(STIFF * dist * dist);
            if h <= 0.0 || t + h == t {
                // the step no longer advances the clock: the point is at the tip
                return Ok(PointFlow { states, swallowed_at: Some(t) });
            }
            let wm = driving.value_at(t + 0.5 * h);
            let w1 = driving.value_at(t + h);
            let (k2, _) = field.rhs(&add(&s, &k1, 0.5 * h), wm, order);
            let (k3, _) = field.rhs(&add(&s, &k2, 0.5 * h), wm, order);
            let (k4, _) = field.rhs(&add(&s, &k3, h), w1, order);
            for i in 0..=order {
                s[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
            }
            if !(s[0].re.is_finite() && s[0].im.is_finite()) {
                return Err(Error::StepTooLarge { t });
            }
            if side.is_some() && field.side(C::new(s[0].re, 0.0), w1) != side {
                return Ok(PointFlow { states, swallowed_at: Some(t) });
            }
            t = if t_end - t <= h { t_end } else { t + h };
            substeps += 1;
            if substeps > MAX_SUBSTEPS {
                return Err(Error::StepTooLarge { t });
            }
        }
        states.push(s);
    }
    Ok(PointFlow { states, swallowed_at: None })
}

fn check_order(order: usize) -> Result<()> {
    if order > 3 {
        return Err(Error::InvalidInput(format!("derivative order must be <= 3, got {order}")));
    }
    Ok(())
}

/// Flow `g_t(z)` of the chordal Loewner equation with derivatives up to `order`.
pub fn chordal_point_flow(driving: &DrivingPath, z: C, order: usize) -> Result<PointFlow> {
    check_order(order)?;
    integrate(Field::Chordal, driving, z, order, 1.0 + z.norm())
}

/// Flow `h_t(theta)` of the covering map of the radial chain.
pub fn covering_point_flow(driving: &DrivingPath, theta: f64, order: usize) -> Result<PointFlow> {
    check_order(order)?;
    integrate(Field::Covering, driving, C::new(theta, 0.0), order, 1.0)
}

/// Flow of the radial Loewner map on an interior point of the disk.
pub fn disk_point_flow(driving: &DrivingPath, z: C, order: usize) -> Result<PointFlow> {
    check_order(order)?;
    if !(z.norm() < 1.0) {
        return Err(Error::PointOutsideDisk(format!("{z}")));
    }
    integrate(Field::Disk, driving, z, order, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialPoint {
    Interior(C),
    Angle(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedPointReport {
    pub point: C,
    pub value: C,
    /// Derivatives of orders `1..=order`.
    pub derivs: Vec<C>,
    /// `log |g'|`; exact (equal to `t`) for the radial map at the origin.
    pub log_abs_derivative: Option<f64>,
    pub swallowed_at: Option<f64>,
}

fn report(point: C, flow: &PointFlow, order: usize) -> MappedPointReport {
    let s = flow.last();
    MappedPointReport {
        point,
        value: s[0],
        derivs: s[1..=order].to_vec(),
        log_abs_derivative: if order >= 1 { Some(s[1].norm().ln()) } else { None },
        swallowed_at: flow.swallowed_at,
    }
}

/// Evolves points of the closed upper half-plane under the chordal chain.
pub fn evolve_chordal(driving: &DrivingPath, points: &[C], order: usize) -> Result<Vec<MappedPointReport>> {
    if driving.geometry != Geometry::Chordal {
        return Err(Error::InvalidInput("evolve_chordal needs a chordal driving path".into()));
    }
    points.iter().map(|&z| chordal_point_flow(driving, z, order).map(|f| report(z, &f, order))).collect()
}

/// Evolves interior points (radial map) and boundary angles (covering map).
pub fn evolve_radial(
    driving: &DrivingPath,
    points: &[RadialPoint],
    order: usize,
) -> Result<Vec<MappedPointReport>> {
    if driving.geometry != Geometry::Radial {
        return Err(Error::InvalidInput("evolve_radial needs a radial driving path".into()));
    }
    let horizon = driving.horizon();
    points
        .iter()
        .map(|p| match *p {
            RadialPoint::Angle(theta) => {
                covering_point_flow(driving, theta, order).map(|f| report(C::new(theta, 0.0), &f, order))
            }
            RadialPoint::Interior(z) if z == C::new(0.0, 0.0) => {
                check_order(order)?;
                // the origin is fixed and g'_t(0) = e^t by normalization
                let d = [C::new(horizon.exp(), 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0)];
                Ok(MappedPointReport {
                    point: z,
                    value: z,
                    derivs: d[..order].to_vec(),
                    log_abs_derivative: if order >= 1 { Some(horizon) } else { None },
                    swallowed_at: None,
                })
            }
            RadialPoint::Interior(z) => disk_point_flow(driving, z, order).map(|f| report(z, &f, order)),
        })
        .collect()
}
