//! Elementary slit maps and their compositions (the zipper).
//!
//! Chordal: the map removing the vertical slit `[x, x + 2i sqrt(t)]` from H,
//! `g(z) = x + sqrt((z - x)^2 + 4t)`.
//!
//! Radial: the map removing the radial slit `[r e^{i xi}, e^{i xi}]` from the
//! unit disk with `g(0) = 0`, `g'(0) = e^t`. With the Koebe function
//! `K(z) = 4z/(1-z)^2` and `a = 1/(e^t - 1)` it is `K^{-1} o M o K` where
//! `M(w) = (a+1) w / (a - w)`, conjugated by the rotation `e^{i xi}`.

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C = C { re: 0.0, im: 1.0 };

/// Value and first three complex derivatives of a holomorphic map at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet {
    pub value: C,
    pub d1: C,
    pub d2: C,
    pub d3: C,
}

impl Jet {
    pub fn identity(z: C) -> Self {
        Self { value: z, d1: C::new(1.0, 0.0), d2: C::new(0.0, 0.0), d3: C::new(0.0, 0.0) }
    }

    /// Jet of `outer o inner`, where `outer` is evaluated at `inner.value`.
    pub fn compose(outer: &Jet, inner: &Jet) -> Jet {
        let (a1, a2, a3) = (inner.d1, inner.d2, inner.d3);
        Jet {
            value: outer.value,
            d1: outer.d1 * a1,
            d2: outer.d2 * a1 * a1 + outer.d1 * a2,
            d3: outer.d3 * a1 * a1 * a1 + 3.0 * outer.d2 * a1 * a2 + outer.d1 * a3,
        }
    }

    /// Schwarzian derivative `f'''/f' - 3/2 (f''/f')^2`.
    pub fn schwarzian(&self) -> C {
        let r = self.d2 / self.d1;
        self.d3 / self.d1 - 1.5 * r * r
    }
}

/// Closed-form vertical slit map with its derivatives.
///
/// Branch: after recentering `w = z - x`, the square root of `w^2 + 4t` is the
/// one lying in the closed upper half-plane; on the real line it carries the
/// sign of `w`. Points of the lower half-plane are handled by reflection.
pub fn slit_map_vertical(x: f64, t: f64, z: C) -> Result<Jet> {
    if !(t >= 0.0) || !t.is_finite() || !x.is_finite() || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("slit map needs t >= 0 and finite data, got t = {t}")));
    }
    if t == 0.0 {
        return Ok(Jet::identity(z));
    }
    if z.im < 0.0 {
        let j = slit_map_vertical(x, t, z.conj())?;
        return Ok(Jet { value: j.value.conj(), d1: j.d1.conj(), d2: j.d2.conj(), d3: j.d3.conj() });
    }
    let w = z - x;
    let s = upper_sqrt(w * w + 4.0 * t, w)?;
    let s2 = s * s;
    let s3 = s2 * s;
    Ok(Jet { value: x + s, d1: w / s, d2: 4.0 * t / s3, d3: -12.0 * t * w / (s3 * s2) })
}

fn upper_sqrt(a: C, w: C) -> Result<C> {
    if w.im > 0.0 {
        let s = a.sqrt();
        if s.im > 0.0 {
            return Ok(s);
        }
        if s.im < 0.0 {
            return Ok(-s);
        }
        // a is real and non-negative: z sits on the slit itself unless it is far off the axis
        if w.re == 0.0 {
            return Err(Error::BranchAmbiguity);
        }
        return Ok(if w.re > 0.0 { s } else { -s });
    }
    // real axis
    if w.re == 0.0 {
        return Err(Error::BranchAmbiguity);
    }
    let r = a.re.max(0.0).sqrt();
    Ok(C::new(if w.re > 0.0 { r } else { -r }, 0.0))
}

/// Inverse of the vertical slit map; real points inside `[x - 2 sqrt t, x + 2 sqrt t]`
/// land on the slit.
pub fn slit_inverse_vertical(x: f64, t: f64, w: C) -> C {
    if t == 0.0 {
        return w;
    }
    let u = w - x;
    let a = u * u - 4.0 * t;
    let s = a.sqrt();
    let s = if s.im < 0.0 || (s.im == 0.0 && (s.re * u.re) < 0.0) { -s } else { s };
    x + s
}

/// Radius of the tip of a radial slit of capacity `t`.
pub fn radial_slit_radius(t: f64) -> f64 {
    let a = 1.0 / t.exp_m1();
    let s = (a + 1.0).sqrt();
    (s - 1.0) / (s + 1.0)
}

/// Capacity of the radial slit whose tip has modulus `r`.
pub fn radial_slit_capacity(r: f64) -> f64 {
    let one_r = 1.0 - r;
    let a = 4.0 * r / (one_r * one_r);
    (1.0 / a).ln_1p()
}

fn rot(xi: f64) -> C {
    C::new(xi.cos(), xi.sin())
}

/// Cayley coordinate `q = (1+z)/(1-z)`, so that `K(z) + 1 = q^2`.
fn cayley(z: C) -> C {
    (1.0 + z) / (1.0 - z)
}

fn koebe_inv(s: C) -> C {
    (s - 1.0) / (s + 1.0)
}

/// Jet of `K^{-1}` at `v = s^2 - 1`, given the root `s = sqrt(v + 1)` on the right branch.
fn koebe_inv_jet(s: C) -> Jet {
    // K^{-1}(v) = (s-1)/(s+1), s = sqrt(v+1)
    let p = s + 1.0;
    let value = (s - 1.0) / p;
    // d/dv = 1/(s (s+1)^2)
    let d1 = 1.0 / (s * p * p);
    // derivatives with respect to s, then chain with ds/dv = 1/(2s)
    // f(s) = 1/(s (s+1)^2); f_s = -(3s+1)/(s^2 (s+1)^3)
    let f_s = -(3.0 * s + 1.0) / (s * s * p * p * p);
    // f_ss = 2(6 s^2 + 4 s + 1)/(s^3 (s+1)^4)
    let f_ss = 2.0 * (6.0 * s * s + 4.0 * s + 1.0) / (s * s * s * p * p * p * p);
    let ds = 1.0 / (2.0 * s);
    let d2 = f_s * ds;
    // d/dv (f_s ds) = f_ss ds^2 + f_s * d(ds)/dv, d(ds)/dv = -1/(4 s^3)
    let d3 = f_ss * ds * ds - f_s / (4.0 * s * s * s);
    Jet { value, d1, d2, d3 }
}

/// One step of a radial Loewner chain with constant driving `xi` over capacity `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialSlit {
    pub xi: f64,
    pub t: f64,
}

impl RadialSlit {
    fn a(&self) -> f64 {
        1.0 / self.t.exp_m1()
    }

    /// `M(K(z))` written without the pole at `z = 1`.
    fn mk(&self, zr: C) -> C {
        let a = self.a();
        let one = C::new(1.0, 0.0);
        (a + 1.0) * 4.0 * zr / (a * (one - zr) * (one - zr) - 4.0 * zr)
    }

    /// `sqrt(M(K(z)) + 1) = q sqrt(a/(a + 1 - q^2))`; on the circle `q` is
    /// imaginary and the radicand positive, so the branch is exact there.
    fn root(&self, zr: C) -> C {
        let a = self.a();
        let q = cayley(zr);
        q * (a / (a + 1.0 - q * q)).sqrt()
    }

    pub fn forward(&self, z: C) -> C {
        if self.t == 0.0 {
            return z;
        }
        let e = rot(self.xi);
        e * koebe_inv(self.root(z / e))
    }

    pub fn inverse(&self, w: C) -> C {
        if self.t == 0.0 {
            return w;
        }
        let e = rot(self.xi);
        let zr = w / e;
        let a = self.a();
        let q = cayley(zr);
        // sqrt(M^{-1}(K(w)) + 1); points of the arc over the slit land on it from either side
        let s = q * ((a + 1.0) / (a + q * q)).sqrt();
        e * koebe_inv(if s.re < 0.0 { -s } else { s })
    }

    pub fn forward_jet(&self, z: C) -> Jet {
        if self.t == 0.0 {
            return Jet::identity(z);
        }
        let e = rot(self.xi);
        let zr = z / e;
        let a = self.a();
        let one = C::new(1.0, 0.0);
        // K jet
        let u = one - zr;
        let k = Jet {
            value: 4.0 * zr / (u * u),
            d1: 4.0 * (one + zr) / (u * u * u),
            d2: 8.0 * (zr + 2.0) / (u * u * u * u),
            d3: 24.0 * (zr + 3.0) / (u * u * u * u * u),
        };
        // M(w) = (a+1) w/(a-w) = -(a+1) + a(a+1)/(a-w)
        let mv = self.mk(zr);
        let q = 1.0 / (a - k.value);
        let c = a * (a + 1.0);
        let m = Jet { value: mv, d1: c * q * q, d2: 2.0 * c * q * q * q, d3: 6.0 * c * q * q * q * q };
        let kinv = koebe_inv_jet(self.root(zr));
        // rotation in and out: z -> z/e has derivative 1/e
        let rin = Jet { value: zr, d1: one / e, d2: C::new(0.0, 0.0), d3: C::new(0.0, 0.0) };
        let inner = Jet::compose(&k, &rin);
        let inner = Jet::compose(&m, &inner);
        let inner = Jet::compose(&kinv, &inner);
        Jet { value: e * inner.value, d1: e * inner.d1, d2: e * inner.d2, d3: e * inner.d3 }
    }

    /// First derivative of the forward map.
    pub fn forward_d1(&self, z: C) -> C {
        if self.t == 0.0 {
            return C::new(1.0, 0.0);
        }
        let zr = z / rot(self.xi);
        let a = self.a();
        let one = C::new(1.0, 0.0);
        let d = a * (one - zr) * (one - zr) - 4.0 * zr;
        let dmk = 4.0 * a * (a + 1.0) * (one - zr * zr) / (d * d);
        let s = self.root(zr);
        dmk / (s * (s + 1.0) * (s + 1.0))
    }

    /// Tip of the slit.
    pub fn tip(&self) -> C {
        rot(self.xi) * radial_slit_radius(self.t)
    }
}

/// One step of a chordal Loewner chain with constant driving `x` over capacity `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordalSlit {
    pub x: f64,
    pub t: f64,
}

impl ChordalSlit {
    pub fn forward(&self, z: C) -> Result<C> {
        Ok(slit_map_vertical(self.x, self.t, z)?.value)
    }

    /// Forward map that never fails: points on the slit are sent to its right side.
    pub fn forward_lossy(&self, z: C) -> C {
        match slit_map_vertical(self.x, self.t, z) {
            Ok(j) => j.value,
            Err(_) => {
                let nudge = C::new(1e-15 * (1.0 + z.re.abs()), 0.0);
                slit_map_vertical(self.x, self.t, z + nudge).map(|j| j.value).unwrap_or(z)
            }
        }
    }

    pub fn inverse(&self, w: C) -> C {
        slit_inverse_vertical(self.x, self.t, w)
    }

    pub fn forward_jet(&self, z: C) -> Result<Jet> {
        slit_map_vertical(self.x, self.t, z)
    }

    pub fn tip(&self) -> C {
        C::new(self.x, 0.0) + 2.0 * I * self.t.sqrt()
    }
}

/// A composition `g = s_n o ... o s_1` of chordal slit maps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChordalChain {
    pub slits: Vec<ChordalSlit>,
}

impl ChordalChain {
    pub fn from_driving(values: &[f64], dt: f64) -> Self {
        Self { slits: values[1..].iter().map(|&x| ChordalSlit { x, t: dt }).collect() }
    }

    pub fn capacity(&self) -> f64 {
        self.slits.iter().map(|s| s.t).sum()
    }

    pub fn apply(&self, z: C) -> Result<C> {
        self.slits.iter().try_fold(z, |z, s| s.forward(z))
    }

    pub fn apply_prefix(&self, k: usize, z: C) -> Result<C> {
        self.slits[..k].iter().try_fold(z, |z, s| s.forward(z))
    }

    pub fn apply_jet(&self, z: C) -> Result<Jet> {
        let mut j = Jet::identity(z);
        for s in &self.slits {
            let o = s.forward_jet(j.value)?;
            j = Jet::compose(&o, &j);
        }
        Ok(j)
    }

    /// Preimage of `w` under the first `k` maps.
    pub fn invert_prefix(&self, k: usize, w: C) -> C {
        self.slits[..k].iter().rev().fold(w, |w, s| s.inverse(w))
    }

    /// Tip of the hull after `k` steps.
    pub fn tip(&self, k: usize) -> C {
        if k == 0 {
            return C::new(self.slits.first().map(|s| s.x).unwrap_or(0.0), 0.0);
        }
        self.invert_prefix(k - 1, self.slits[k - 1].tip())
    }
}

/// A composition of radial slit maps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RadialChain {
    pub slits: Vec<RadialSlit>,
}

impl RadialChain {
    pub fn from_driving(values: &[f64], dt: f64) -> Self {
        Self { slits: values[1..].iter().map(|&xi| RadialSlit { xi, t: dt }).collect() }
    }

    pub fn capacity(&self) -> f64 {
        self.slits.iter().map(|s| s.t).sum()
    }

    pub fn apply(&self, z: C) -> C {
        self.slits.iter().fold(z, |z, s| s.forward(z))
    }

    pub fn apply_jet(&self, z: C) -> Jet {
        let mut j = Jet::identity(z);
        for s in &self.slits {
            let o = s.forward_jet(j.value);
            j = Jet::compose(&o, &j);
        }
        j
    }

    pub fn invert_prefix(&self, k: usize, w: C) -> C {
        self.slits[..k].iter().rev().fold(w, |w, s| s.inverse(w))
    }

    pub fn tip(&self, k: usize) -> C {
        if k == 0 {
            return rot(self.slits.first().map(|s| s.xi).unwrap_or(0.0));
        }
        self.invert_prefix(k - 1, self.slits[k - 1].tip())
    }
}

/// Result of unzipping a polyline: one slit per vertex after the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Unzipped<S> {
    pub slits: Vec<S>,
    /// Accumulated capacity at each vertex (length = number of vertices).
    pub times: Vec<f64>,
    /// Driving value at each vertex.
    pub values: Vec<f64>,
}

/// Chordal zipper with vertical slits: vertex `k` is mapped forward by the
/// slits found so far and the next slit is the vertical segment reaching it.
pub fn unzip_chordal(points: &[C]) -> Result<Unzipped<ChordalSlit>> {
    let mut pts: Vec<C> = points.to_vec();
    let n = pts.len();
    let mut slits = Vec::with_capacity(n.saturating_sub(1));
    let mut times = vec![0.0];
    let mut values = vec![points[0].re];
    let mut acc = 0.0;
    for k in 1..n {
        let q = pts[k];
        if !(q.im > 0.0) || !q.re.is_finite() {
            return Err(Error::MapRealizationFailed(format!(
                "vertex {k} maps to {q}, outside the upper half-plane"
            )));
        }
        let s = ChordalSlit { x: q.re, t: q.im * q.im / 4.0 };
        for p in pts[k + 1..].iter_mut() {
            *p = s.forward_lossy(*p);
        }
        acc += s.t;
        slits.push(s);
        times.push(acc);
        values.push(s.x);
    }
    Ok(Unzipped { slits, times, values })
}

/// Radial zipper with radial slits.
pub fn unzip_radial(points: &[C]) -> Result<Unzipped<RadialSlit>> {
    let mut pts: Vec<C> = points.to_vec();
    let n = pts.len();
    let mut slits = Vec::with_capacity(n.saturating_sub(1));
    let mut times = vec![0.0];
    let mut values = vec![points[0].arg()];
    let mut acc = 0.0;
    let mut last = values[0];
    for k in 1..n {
        let q = pts[k];
        let r = q.norm();
        if !(r < 1.0) || !(r > 0.0) {
            return Err(Error::MapRealizationFailed(format!("vertex {k} maps to {q}, outside the disk")));
        }
        // continuous lift of the angle
        let mut xi = q.arg();
        xi += (2.0 * std::f64::consts::PI) * ((last - xi) / (2.0 * std::f64::consts::PI)).round();
        last = xi;
        let s = RadialSlit { xi, t: radial_slit_capacity(r) };
        for p in pts[k + 1..].iter_mut() {
            *p = s.forward(*p);
        }
        acc += s.t;
        slits.push(s);
        times.push(acc);
        values.push(xi);
    }
    Ok(Unzipped { slits, times, values })
}
