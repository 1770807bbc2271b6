//! Chordal and radial Loewner chains: point flows, traces and the zipper.

mod flow;
pub mod slit;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use flow::{
    chordal_point_flow, covering_point_flow, disk_point_flow, evolve_chordal, evolve_radial, MappedPointReport,
    PointFlow, RadialPoint,
};
pub use slit::{slit_map_vertical, ChordalChain, ChordalSlit, Jet, RadialChain, RadialSlit};
pub use trace::{
    driving_of_polyline_chordal, polyline_self_intersects, polylines_meet, trace_chordal, trace_radial, HittingTime, TracePolyline,
};

/// Relative swallow tolerance: `|g - W| < SWALLOW_TOL * (1 + |z|)`.
pub const SWALLOW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Chordal,
    Radial,
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Geometry::Chordal => "chordal",
            Geometry::Radial => "radial",
        })
    }
}

/// A driving function sampled on a uniform capacity-time grid.
///
/// Between grid points the path is the cubic Hermite interpolant built from the
/// derivative samples (or from central differences when none are given).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivingPath {
    pub geometry: Geometry,
    pub grid_step: f64,
    pub values: Vec<f64>,
    #[serde(default)]
    pub deriv: Option<Vec<f64>>,
    /// Flagged as not absolutely continuous (energies are then infinite).
    #[serde(default)]
    pub rough: bool,
}

impl DrivingPath {
    pub fn new(geometry: Geometry, grid_step: f64, values: Vec<f64>) -> Result<Self> {
        if !(grid_step > 0.0) || !grid_step.is_finite() {
            return Err(Error::InvalidInput(format!("grid_step must be positive, got {grid_step}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidInput("a driving path needs at least two samples".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteDriving(k));
        }
        Ok(Self { geometry, grid_step, values, deriv: None, rough: false })
    }

    /// Samples `f` (and optionally its derivative) on `[0, horizon]`.
    pub fn from_fn(
        geometry: Geometry,
        grid_step: f64,
        horizon: f64,
        f: impl Fn(f64) -> f64,
        df: Option<&dyn Fn(f64) -> f64>,
    ) -> Result<Self> {
        let n = (horizon / grid_step).round() as usize;
        let mut p = Self::new(geometry, grid_step, (0..=n).map(|k| f(k as f64 * grid_step)).collect())?;
        if let Some(df) = df {
            p.deriv = Some((0..=n).map(|k| df(k as f64 * grid_step)).collect());
        }
        Ok(p)
    }

    /// Attaches derivative samples, checking them against the difference
    /// quotients with the declared Lipschitz bound `lip` of the derivative.
    pub fn with_derivative(mut self, deriv: Vec<f64>, lip: f64) -> Result<Self> {
        if deriv.len() != self.values.len() {
            return Err(Error::InvalidInput("derivative samples must match the value samples".into()));
        }
        let h = self.grid_step;
        for k in 0..deriv.len() - 1 {
            let q = (self.values[k + 1] - self.values[k]) / h;
            if (q - deriv[k]).abs() > h * lip + 1e-12 {
                return Err(Error::InvalidInput(format!("derivative sample {k} inconsistent with values")));
            }
        }
        self.deriv = Some(deriv);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.grid_step
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.grid_step
    }

    /// Truncates to the samples with time `<= t` (keeps at least two).
    pub fn truncated(&self, t: f64) -> Self {
        let n = ((t / self.grid_step).round() as usize).clamp(1, self.values.len() - 1);
        let mut p = self.clone();
        p.values.truncate(n + 1);
        if let Some(d) = p.deriv.as_mut() {
            d.truncate(n + 1);
        }
        p
    }

    /// Derivative at every grid point: the attached samples, or second-order differences.
    pub fn derivative_samples(&self) -> Vec<f64> {
        if let Some(d) = &self.deriv {
            return d.clone();
        }
        let v = &self.values;
        let h = self.grid_step;
        let n = v.len();
        if n == 2 {
            let q = (v[1] - v[0]) / h;
            return vec![q, q];
        }
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        for k in 1..n - 1 {
            d[k] = (v[k + 1] - v[k - 1]) / (2.0 * h);
        }
        d
    }

    /// Quadratic-variation roughness test: for an absolutely continuous path the
    /// sum of squared increments halves when the mesh halves; for a Brownian-like
    /// path it does not.
    pub fn looks_rough(&self) -> bool {
        if self.rough {
            return true;
        }
        if self.deriv.is_some() || self.values.len() < 5 {
            return false;
        }
        let v = &self.values;
        let qv1: f64 = v.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let qv2: f64 = v.iter().step_by(2).collect::<Vec<_>>().windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        qv1 > 1e-12 * scale * scale && qv2 < 1.5 * qv1
    }

    /// Hermite interpolant at time `t` (clamped to the grid).
    pub fn value_at(&self, t: f64) -> f64 {
        let h = self.grid_step;
        let n = self.values.len();
        let s = (t / h).clamp(0.0, (n - 1) as f64);
        let k = (s.floor() as usize).min(n - 2);
        let u = s - k as f64;
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = self.node_derivs(k);
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * v0
            + (u3 - 2.0 * u2 + u) * h * d0
            + (-2.0 * u3 + 3.0 * u2) * v1
            + (u3 - u2) * h * d1
    }

    fn node_derivs(&self, k: usize) -> (f64, f64) {
        if let Some(d) = &self.deriv {
            return (d[k], d[k + 1]);
        }
        let v = &self.values;
        let h = self.grid_step;
        let n = v.len();
        let at = |j: usize| -> f64 {
            if n == 2 {
                (v[1] - v[0]) / h
            } else if j == 0 {
                (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
            } else {
                (v[j + 1] - v[j - 1]) / (2.0 * h)
            }
        };
        (at(k), at(k + 1))
    }
}
