//! Fundamental solutions of the chordal and radial BPZ systems, their
//! semi-classical potentials, Girsanov martingales and Poisson-kernel functionals.
//!
//! Everything with a kappa-dependent exponent is computed as a logarithm first.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loewner::Geometry;
use crate::sde::{check_increasing, check_radial_chamber};

/// `kappa` and `mu`; the derived constants are always recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(from = "ParamsIn")]
pub struct PartitionParams {
    kappa: f64,
    mu: f64,
}

#[derive(Deserialize)]
struct ParamsIn {
    kappa: f64,
    #[serde(default)]
    mu: f64,
}

impl From<ParamsIn> for PartitionParams {
    fn from(p: ParamsIn) -> Self {
        Self { kappa: p.kappa, mu: p.mu }
    }
}

impl Serialize for PartitionParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("PartitionParams", 5)?;
        st.serialize_field("kappa", &self.kappa)?;
        st.serialize_field("mu", &self.mu)?;
        st.serialize_field("b", &self.b())?;
        st.serialize_field("c", &self.c())?;
        st.serialize_field("b_tilde", &self.b_tilde())?;
        st.end()
    }
}

impl PartitionParams {
    pub fn new(kappa: f64, mu: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) || !mu.is_finite() {
            return Err(Error::InvalidInput(format!("need kappa > 0 and finite mu, got ({kappa}, {mu})")));
        }
        Ok(Self { kappa, mu })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn b(&self) -> f64 {
        (6.0 - self.kappa) / (2.0 * self.kappa)
    }

    /// Central charge.
    pub fn c(&self) -> f64 {
        (6.0 - self.kappa) * (3.0 * self.kappa - 8.0) / (2.0 * self.kappa)
    }

    pub fn b_tilde(&self) -> f64 {
        (6.0 - self.kappa) * (self.kappa - 2.0) / (8.0 * self.kappa)
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")))
    }
}

fn check_point(geometry: Geometry, p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidInput("at least one marked point is required".into()));
    }
    match geometry {
        Geometry::Chordal => check_increasing(p, "marked points"),
        Geometry::Radial => check_radial_chamber(p),
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

fn half_sin(d: f64) -> f64 {
    (0.5 * d).sin()
}

/// `log prod_{i<j} (x_j - x_i)^{2/kappa}`.
pub fn log_z_halfwatermelon(kappa: f64, x: &[f64]) -> Result<f64> {
    check_kappa(kappa)?;
    check_point(Geometry::Chordal, x)?;
    Ok(pairs(x.len()).map(|(i, j)| (x[j] - x[i]).ln()).sum::<f64>() * 2.0 / kappa)
}

pub fn z_halfwatermelon(kappa: f64, x: &[f64]) -> Result<f64> {
    log_z_halfwatermelon(kappa, x).map(f64::exp)
}

/// `log [prod_{i<j} |e^{i theta_i} - e^{i theta_j}|^{2/kappa} exp((mu/kappa) sum theta_j)]`.
pub fn log_z_nradial(kappa: f64, mu: f64, theta: &[f64]) -> Result<f64> {
    check_kappa(kappa)?;
    check_point(Geometry::Radial, theta)?;
    let pair: f64 = pairs(theta.len()).map(|(i, j)| (2.0 * half_sin(theta[j] - theta[i])).ln()).sum();
    Ok((2.0 * pair + mu * theta.iter().sum::<f64>()) / kappa)
}

pub fn z_nradial(kappa: f64, mu: f64, theta: &[f64]) -> Result<f64> {
    log_z_nradial(kappa, mu, theta).map(f64::exp)
}

fn log_z(geometry: Geometry, kappa: f64, mu: f64, p: &[f64]) -> Result<f64> {
    match geometry {
        Geometry::Chordal => log_z_halfwatermelon(kappa, p),
        Geometry::Radial => log_z_nradial(kappa, mu, p),
    }
}

/// `U(x) = -2 sum_{i<j} log(x_j - x_i)` or `V(theta) = -2 sum_{i<j} log sin((theta_j - theta_i)/2) - mu sum theta_j`.
pub fn semiclassical_potential(geometry: Geometry, mu: f64, point: &[f64]) -> Result<f64> {
    check_point(geometry, point)?;
    let p = point;
    Ok(match geometry {
        Geometry::Chordal => -2.0 * pairs(p.len()).map(|(i, j)| (p[j] - p[i]).ln()).sum::<f64>(),
        Geometry::Radial => {
            -2.0 * pairs(p.len()).map(|(i, j)| half_sin(p[j] - p[i]).ln()).sum::<f64>() - mu * p.iter().sum::<f64>()
        }
    })
}

/// Analytic gradient of the semi-classical potential.
pub fn semiclassical_gradient(geometry: Geometry, mu: f64, point: &[f64]) -> Result<Vec<f64>> {
    check_point(geometry, point)?;
    let p = point;
    let n = p.len();
    Ok((0..n)
        .map(|j| {
            let others = (0..n).filter(|&i| i != j);
            match geometry {
                Geometry::Chordal => -2.0 * others.map(|i| 1.0 / (p[j] - p[i])).sum::<f64>(),
                Geometry::Radial => {
                    -others.map(|i| 1.0 / (0.5 * (p[j] - p[i])).tan()).sum::<f64>() - mu
                }
            }
        })
        .collect())
}

/// Constant separating `-kappa log Z` from the potential: the radial chord
/// lengths are `2 sin(d/2)`, so each pair contributes `2 log 2`.
pub fn semiclassical_offset(geometry: Geometry, n: usize) -> f64 {
    match geometry {
        Geometry::Chordal => 0.0,
        Geometry::Radial => (n * n.saturating_sub(1)) as f64 * LN_2,
    }
}

/// `|kappa log Z + potential - offset|` along a decreasing kappa grid.
pub fn semiclassical_limit_check(kappa_grid: &[f64], point: &[f64], geometry: Geometry, mu: f64) -> Result<Vec<f64>> {
    if kappa_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("kappa grid must be strictly decreasing".into()));
    }
    let u = semiclassical_potential(geometry, mu, point)?;
    let off = semiclassical_offset(geometry, point.len());
    kappa_grid.iter().map(|&k| Ok((k * log_z(geometry, k, mu, point)? + u - off).abs())).collect()
}

/// Smallest gap between neighbouring marked points (cyclic in the radial case).
pub fn min_gap(geometry: Geometry, point: &[f64]) -> f64 {
    let mut g = point.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if geometry == Geometry::Radial && point.len() > 1 {
        g = g.min(2.0 * PI - (point[point.len() - 1] - point[0]));
    }
    g
}

/// Default finite-difference step: `1e-4` of the smallest gap (`1e-4` for one point).
pub fn default_fd_step(geometry: Geometry, point: &[f64]) -> f64 {
    let g = min_gap(geometry, point);
    if g.is_finite() {
        1e-4 * g
    } else {
        1e-4
    }
}

/// Per-equation residuals of the BPZ system evaluated on the fundamental
/// solution with central differences.
pub fn bpz_residual(geometry: Geometry, kappa: f64, mu: f64, point: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    check_point(geometry, point)?;
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput(format!("fd_step must be positive, got {fd_step}")));
    }
    if min_gap(geometry, point) <= 3.0 * fd_step {
        return Err(Error::ChamberViolation(format!("marked points closer than 3 fd steps ({fd_step})")));
    }
    let n = point.len();
    let h = fd_step;
    let base = log_z(geometry, kappa, mu, point)?;
    // Z(p + s e_i)/Z(p) - 1, computed from log differences
    let shifted = |i: usize, s: f64| -> Result<f64> {
        let mut q = point.to_vec();
        q[i] += s;
        Ok((log_z(geometry, kappa, mu, &q)? - base).exp_m1())
    };
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    for i in 0..n {
        let (up, down) = (shifted(i, h)?, shifted(i, -h)?);
        d1[i] = (up - down) / (2.0 * h);
        d2[i] = (up + down) / (h * h);
    }
    let a = (6.0 - kappa) / kappa;
    let rhs = match geometry {
        Geometry::Chordal => 0.0,
        Geometry::Radial => (mu * mu - (n * n) as f64 + 1.0) / (2.0 * kappa),
    };
    Ok((0..n)
        .map(|j| {
            let mut r = 0.5 * kappa * d2[j];
            for i in (0..n).filter(|&i| i != j) {
                let d = point[i] - point[j];
                r += match geometry {
                    Geometry::Chordal => 2.0 / d * d1[i] - a / (d * d),
                    Geometry::Radial => {
                        let s = half_sin(d);
                        (0.5 * d).cos() / s * d1[i] - a / (4.0 * s * s)
                    }
                };
            }
            r - rhs
        })
        .collect())
}

/// Residuals of the semi-classical BPZ identities with analytic gradients.
pub fn semiclassical_bpz_residual(geometry: Geometry, mu: f64, point: &[f64]) -> Result<Vec<f64>> {
    let g = semiclassical_gradient(geometry, mu, point)?;
    let p = point;
    let n = p.len();
    Ok((0..n)
        .map(|j| {
            let mut r = g[j] * g[j];
            for l in (0..n).filter(|&l| l != j) {
                let d = p[l] - p[j];
                r -= match geometry {
                    Geometry::Chordal => 4.0 / d * g[l] + 12.0 / (d * d),
                    Geometry::Radial => {
                        let s = half_sin(d);
                        2.0 * (0.5 * d).cos() / s * g[l] + 3.0 / (s * s)
                    }
                };
            }
            match geometry {
                Geometry::Chordal => r,
                Geometry::Radial => r - (mu * mu + 1.0 - (n * n) as f64),
            }
        })
        .collect())
}

fn check_weights(rho: &[f64]) -> Result<()> {
    if rho.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite".into()));
    }
    Ok(())
}

/// `log M_t` of the chordal SLE(kappa; rho) martingale along rows laid out as
/// `W, VL1.., VR1.., logdVL1.., logdVR1..` (the chordal SLE simulator's layout).
/// Left points are listed nearest first.
pub fn log_martingale_chordal(
    kappa: f64,
    rho_left: &[f64],
    rho_right: &[f64],
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    check_weights(rho_left)?;
    check_weights(rho_right)?;
    let (l, r) = (rho_left.len(), rho_right.len());
    let m = l + r;
    if times.len() != rows.len() {
        return Err(Error::InvalidInput("one time per row is required".into()));
    }
    rows.iter()
        .zip(times)
        .map(|(row, &t)| {
            if row.len() < 1 + 2 * m {
                return Err(Error::InvalidInput(format!("row has {} entries, need {}", row.len(), 1 + 2 * m)));
            }
            let w = row[0];
            let vl = &row[1..1 + l];
            let vr = &row[1 + l..1 + m];
            let (ll, lr) = (&row[1 + m..1 + m + l], &row[1 + m + l..1 + 2 * m]);
            let mut s = 0.0;
            for (k, (&v, &rho)) in vl.iter().zip(rho_left).enumerate() {
                if !(w - v > 0.0) {
                    return Err(Error::ForcePointSwallowed { index: k, t });
                }
                s += rho * (rho + 4.0 - kappa) / (4.0 * kappa) * ll[k] + rho / kappa * (w - v).ln();
            }
            for (k, (&v, &rho)) in vr.iter().zip(rho_right).enumerate() {
                if !(v - w > 0.0) {
                    return Err(Error::ForcePointSwallowed { index: l + k, t });
                }
                s += rho * (rho + 4.0 - kappa) / (4.0 * kappa) * lr[k] + rho / kappa * (v - w).ln();
            }
            for (i, &a) in rho_left.iter().enumerate() {
                for (j, &b) in rho_right.iter().enumerate() {
                    s += a * b / (2.0 * kappa) * (vr[j] - vl[i]).ln();
                }
            }
            for (i, j) in pairs(l) {
                s += rho_left[i] * rho_left[j] / (2.0 * kappa) * (vl[i] - vl[j]).ln();
            }
            for (i, j) in pairs(r) {
                s += rho_right[i] * rho_right[j] / (2.0 * kappa) * (vr[j] - vr[i]).ln();
            }
            Ok(s)
        })
        .collect()
}

pub fn martingale_chordal(
    kappa: f64,
    rho_left: &[f64],
    rho_right: &[f64],
    times: &[f64],
    rows: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(log_martingale_chordal(kappa, rho_left, rho_right, times, rows)?.into_iter().map(f64::exp).collect())
}

/// `log M_t` of the radial SLE^mu(rho) martingale along rows `xi, V2..Vn, logdV2..logdVn`
/// (the radial SLE simulator's layout); `log g_t'(0) = t` in the capacity parametrization.
pub fn log_martingale_radial(kappa: f64, mu: f64, rho: &[f64], times: &[f64], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    check_weights(rho)?;
    let m = rho.len();
    if times.len() != rows.len() {
        return Err(Error::InvalidInput("one time per row is required".into()));
    }
    let rbar: f64 = rho.iter().sum();
    let cap = (rbar * (rbar + 4.0) - 4.0 * mu * mu) / (8.0 * kappa);
    rows.iter()
        .zip(times)
        .map(|(row, &t)| {
            if row.len() < 1 + 2 * m {
                return Err(Error::InvalidInput(format!("row has {} entries, need {}", row.len(), 1 + 2 * m)));
            }
            let xi = row[0];
            let v = &row[1..1 + m];
            let ld = &row[1 + m..1 + 2 * m];
            let mut s = cap * t + mu / kappa * xi;
            for k in 0..m {
                let sn = half_sin(v[k] - xi);
                if !(sn > 0.0) || v[k] - xi >= 2.0 * PI {
                    return Err(Error::ForcePointSwallowed { index: k, t });
                }
                s += rho[k] * (rho[k] + 4.0 - kappa) / (4.0 * kappa) * ld[k]
                    + rho[k] / kappa * sn.ln()
                    + mu / kappa * 0.5 * rho[k] * v[k];
            }
            for (j, l) in pairs(m) {
                s += rho[j] * rho[l] / (2.0 * kappa) * half_sin(v[l] - v[j]).ln();
            }
            Ok(s)
        })
        .collect()
}

pub fn martingale_radial(kappa: f64, mu: f64, rho: &[f64], times: &[f64], rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(log_martingale_radial(kappa, mu, rho, times, rows)?.into_iter().map(f64::exp).collect())
}

/// `z -> (a z + b)/(c z + d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    pub fn new(a: C, b: C, c: C, d: C) -> Result<Self> {
        if (a * d - b * c).norm() == 0.0 {
            return Err(Error::InvalidInput("degenerate Mobius map (ad - bc = 0)".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn identity() -> Self {
        let (o, z) = (C::new(1.0, 0.0), C::new(0.0, 0.0));
        Self { a: o, b: z, c: z, d: o }
    }

    /// Cayley map `w -> i (1 - w)/(1 + w)` from the unit disk onto the upper half-plane.
    pub fn cayley() -> Self {
        let i = C::new(0.0, 1.0);
        Self { a: -i, b: i, c: C::new(1.0, 0.0), d: C::new(1.0, 0.0) }
    }

    /// Disk automorphism sending `p` to 0.
    pub fn disk_to_origin(p: C) -> Self {
        Self { a: C::new(1.0, 0.0), b: -p, c: -p.conj(), d: C::new(1.0, 0.0) }
    }

    /// `w -> (w - p)/(w - conj p)`: upper half-plane onto the disk with `p -> 0`.
    pub fn half_plane_to_disk(p: C) -> Self {
        let o = C::new(1.0, 0.0);
        Self { a: o, b: -p, c: o, d: -p.conj() }
    }

    pub fn apply(&self, z: C) -> C {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn deriv(&self, z: C) -> C {
        let q = self.c * z + self.d;
        (self.a * self.d - self.b * self.c) / (q * q)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Mobius) -> Mobius {
        Mobius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefDomain {
    /// Upper half-plane.
    H,
    /// Unit disk.
    U,
    /// Any other domain, described by an explicit map onto the upper half-plane.
    Image,
}

/// A reference domain with boundary points and an interior point.
///
/// `map`, when present, sends the domain conformally onto the upper half-plane;
/// it is required for [`RefDomain::Image`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainData {
    pub domain: RefDomain,
    pub boundary: Vec<C>,
    #[serde(default)]
    pub interior: Option<C>,
    #[serde(default)]
    pub map: Option<Mobius>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// Boundary Poisson kernel of the first two boundary points.
    PBoundary,
    /// Poisson kernel of the first boundary point seen from the interior point.
    PInterior,
    /// Conformal radius at the interior point.
    Cr,
    /// `sum_{i<j} log P(x_i, x_j) - (n+2) sum_l log P(x_l, y)`, `y` the last boundary point.
    Lu,
    /// The radial counterpart with conformal radius and spiral terms.
    Lv,
}

impl std::str::FromStr for Functional {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p_boundary" => Ok(Self::PBoundary),
            "p_interior" => Ok(Self::PInterior),
            "cr" => Ok(Self::Cr),
            "lu" => Ok(Self::Lu),
            "lv" => Ok(Self::Lv),
            _ => Err(Error::InvalidInput(format!("unknown functional {s:?}"))),
        }
    }
}

impl DomainData {
    pub fn half_plane(boundary: &[f64], interior: Option<C>) -> Self {
        Self {
            domain: RefDomain::H,
            boundary: boundary.iter().map(|&x| C::new(x, 0.0)).collect(),
            interior,
            map: None,
        }
    }

    /// Unit disk with boundary points `e^{i theta_j}`.
    pub fn disk(theta: &[f64], interior: Option<C>) -> Self {
        Self {
            domain: RefDomain::U,
            boundary: theta.iter().map(|&t| C::new(t.cos(), t.sin())).collect(),
            interior,
            map: None,
        }
    }

    /// Conformal map onto the upper half-plane.
    pub fn to_half_plane(&self) -> Result<Mobius> {
        match (self.domain, self.map) {
            (_, Some(m)) => Ok(m),
            (RefDomain::H, None) => Ok(Mobius::identity()),
            (RefDomain::U, None) => Ok(Mobius::cayley()),
            (RefDomain::Image, None) => Err(Error::UnsupportedDomain("no explicit map onto the half-plane given".into())),
        }
    }

    fn interior(&self) -> Result<C> {
        self.interior.ok_or_else(|| Error::InvalidInput("an interior point is required".into()))
    }
}

pub fn poisson_boundary_h(x: f64, y: f64) -> f64 {
    1.0 / ((y - x) * (y - x))
}

pub fn poisson_interior_h(x: f64, z: C) -> f64 {
    2.0 * z.im / (z - x).norm_sqr()
}

fn real_image(phi: &Mobius, p: C) -> Result<(f64, f64)> {
    let w = phi.apply(p);
    if !w.re.is_finite() || w.im.abs() > 1e-9 * (1.0 + w.re.abs()) {
        return Err(Error::InvalidInput(format!("boundary point {p} does not map to a finite real point")));
    }
    Ok((w.re, phi.deriv(p).norm()))
}

fn log_p_boundary(phi: &Mobius, x: C, y: C) -> Result<f64> {
    let (u, du) = real_image(phi, x)?;
    let (v, dv) = real_image(phi, y)?;
    if u == v {
        return Err(Error::ChamberViolation("boundary points coincide".into()));
    }
    Ok(du.ln() + dv.ln() + poisson_boundary_h(u, v).ln())
}

fn log_p_interior(phi: &Mobius, x: C, z: C) -> Result<f64> {
    let (u, du) = real_image(phi, x)?;
    let w = phi.apply(z);
    if !(w.im > 0.0) {
        return Err(Error::InvalidInput(format!("interior point {z} is not inside the domain")));
    }
    Ok(du.ln() + poisson_interior_h(u, w).ln())
}

fn log_cr(phi: &Mobius, z: C) -> Result<f64> {
    let w = phi.apply(z);
    if !(w.im > 0.0) {
        return Err(Error::InvalidInput(format!("interior point {z} is not inside the domain")));
    }
    Ok((2.0 * w.im).ln() - phi.deriv(z).norm().ln())
}

/// Closed-form Poisson kernels, conformal radius and the boundary-perturbation
/// potentials, through conformal covariance.
pub fn boundary_functionals(domain: &DomainData, mu: f64, selector: Functional) -> Result<f64> {
    let phi = domain.to_half_plane()?;
    let x = &domain.boundary;
    let need = |k: usize| {
        if x.len() < k {
            Err(Error::InvalidInput(format!("{selector:?} needs at least {k} boundary points")))
        } else {
            Ok(())
        }
    };
    match selector {
        Functional::PBoundary => {
            need(2)?;
            log_p_boundary(&phi, x[0], x[1]).map(f64::exp)
        }
        Functional::PInterior => {
            need(1)?;
            log_p_interior(&phi, x[0], domain.interior()?).map(f64::exp)
        }
        Functional::Cr => log_cr(&phi, domain.interior()?).map(f64::exp),
        Functional::Lu => {
            need(2)?;
            let (pts, y) = x.split_at(x.len() - 1);
            let n = pts.len() as f64;
            let mut s = 0.0;
            for (i, j) in pairs(pts.len()) {
                s += log_p_boundary(&phi, pts[i], pts[j])?;
            }
            for &p in pts {
                s -= (n + 2.0) * log_p_boundary(&phi, p, y[0])?;
            }
            Ok(s)
        }
        Functional::Lv => {
            need(1)?;
            let z = domain.interior()?;
            let n = x.len() as f64;
            let mut s = 0.5 * (n * n - 4.0 - mu * mu) * log_cr(&phi, z)?;
            for &p in x {
                s -= (n + 2.0) * log_p_interior(&phi, p, z)?;
            }
            for (i, j) in pairs(x.len()) {
                s += log_p_boundary(&phi, x[i], x[j])?;
            }
            if mu != 0.0 {
                // psi: domain -> disk with psi(z) = 0; its boundary arguments are lifted in
                // counterclockwise order so that they form a chamber point
                let psi = Mobius::half_plane_to_disk(phi.apply(z)).compose(&phi);
                let mut args: Vec<f64> = Vec::with_capacity(x.len());
                for &p in x {
                    let a = psi.apply(p).arg();
                    let lifted = match args.last() {
                        None => a,
                        Some(&prev) => prev + (a - prev).rem_euclid(2.0 * PI),
                    };
                    args.push(lifted);
                }
                s += mu * n * psi.deriv(z).arg() - mu * args.iter().sum::<f64>();
            }
            Ok(s)
        }
    }
}
