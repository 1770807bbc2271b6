//! Curve traces from driving functions, and driving functions from polylines.

use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::slit::{unzip_chordal, ChordalChain, RadialChain};
use super::{DrivingPath, Geometry};
use crate::error::{Error, Result};

/// Hitting time of the circle of radius `e^{-s}` by a radial trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingTime {
    pub s: f64,
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePolyline {
    pub geometry: Geometry,
    pub points: Vec<C>,
    /// Capacity time of each vertex.
    pub times: Vec<f64>,
    pub resolution: f64,
    /// Largest pulled-back driving jump, the per-vertex error estimate of the slit discretization.
    pub error_estimate: f64,
    pub self_intersection: bool,
    #[serde(default)]
    pub hitting_times: Vec<HittingTime>,
}

impl TracePolyline {
    /// A polyline given by its vertices, with times filled by arc length.
    pub fn from_points(geometry: Geometry, points: Vec<C>) -> Self {
        let mut times = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (k, p) in points.iter().enumerate() {
            if k > 0 {
                acc += (p - points[k - 1]).norm();
            }
            times.push(acc);
        }
        let self_intersection = polyline_self_intersects(&points);
        Self { geometry, points, times, resolution: 0.0, error_estimate: 0.0, self_intersection, hitting_times: vec![] }
    }

    pub fn tip(&self) -> C {
        *self.points.last().expect("polyline is non-empty")
    }

    /// First time the trace reaches modulus `r` from above, linearly interpolated.
    pub fn first_time_below(&self, r: f64) -> Option<f64> {
        first_crossing(&self.points, &self.times, |z| z.norm() <= r, r)
    }

    /// First time the trace reaches modulus `r` from below, linearly interpolated.
    pub fn first_time_above(&self, r: f64) -> Option<f64> {
        first_crossing(&self.points, &self.times, |z| z.norm() >= r, r)
    }
}

fn first_crossing(points: &[C], times: &[f64], hit: impl Fn(C) -> bool, r: f64) -> Option<f64> {
    let k = points.iter().position(|&z| hit(z))?;
    if k == 0 {
        return Some(times[0]);
    }
    let (a, b) = (points[k - 1].norm(), points[k].norm());
    let w = if (b - a).abs() > 0.0 { ((r - a) / (b - a)).clamp(0.0, 1.0) } else { 1.0 };
    Some(times[k - 1] + w * (times[k] - times[k - 1]))
}

fn chordal_inverse_d1(x: f64, t: f64, w: C) -> (C, C) {
    if t == 0.0 {
        return (w, C::new(1.0, 0.0));
    }
    let u = w - x;
    let s = (u * u - 4.0 * t).sqrt();
    // same branch as slit_inverse_vertical: upper half-plane, or the side of u on the real line
    let s = if s.im < 0.0 || (s.im == 0.0 && (s.re * u.re) < 0.0) { -s } else { s };
    (x + s, u / s)
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidInput(format!("resolution must be positive, got {resolution}")));
    }
    Ok(())
}

/// Chordal trace: vertex `k` is the tip `W_k + 2i sqrt(dt)` of step `k`, pulled
/// back through the inverse slit maps of the earlier steps.
pub fn trace_chordal(driving: &DrivingPath, resolution: f64) -> Result<TracePolyline> {
    if driving.geometry != Geometry::Chordal {
        return Err(Error::InvalidInput("trace_chordal needs a chordal driving path".into()));
    }
    check_resolution(resolution)?;
    let w = &driving.values;
    let chain = ChordalChain::from_driving(w, driving.grid_step);
    let verts: Vec<(C, f64)> = (1..w.len())
        .into_par_iter()
        .map(|k| {
            let mut z = chain.slits[k - 1].tip();
            let mut d = C::new(1.0, 0.0);
            for s in chain.slits[..k - 1].iter().rev() {
                let (z1, d1) = chordal_inverse_d1(s.x, s.t, z);
                z = z1;
                d *= d1;
            }
            (z, (w[k] - w[k - 1]).abs() * d.norm())
        })
        .collect();
    finish(Geometry::Chordal, driving, C::new(w[0], 0.0), verts, resolution, &[])
}

/// Radial trace from `e^{i xi_0}` toward the origin, with hitting times of the
/// circles `|z| = e^{-s}` for each requested `s`.
pub fn trace_radial(driving: &DrivingPath, resolution: f64, s_values: &[f64]) -> Result<TracePolyline> {
    if driving.geometry != Geometry::Radial {
        return Err(Error::InvalidInput("trace_radial needs a radial driving path".into()));
    }
    check_resolution(resolution)?;
    let w = &driving.values;
    let chain = RadialChain::from_driving(w, driving.grid_step);
    let verts: Vec<(C, f64)> = (1..w.len())
        .into_par_iter()
        .map(|k| {
            let mut z = chain.slits[k - 1].tip();
            let mut d = C::new(1.0, 0.0);
            for s in chain.slits[..k - 1].iter().rev() {
                let z1 = s.inverse(z);
                d /= s.forward_d1(z1);
                z = z1;
            }
            (z, (w[k] - w[k - 1]).abs() * d.norm())
        })
        .collect();
    let start = C::new(w[0].cos(), w[0].sin());
    finish(Geometry::Radial, driving, start, verts, resolution, s_values)
}

fn finish(
    geometry: Geometry,
    driving: &DrivingPath,
    start: C,
    verts: Vec<(C, f64)>,
    resolution: f64,
    s_values: &[f64],
) -> Result<TracePolyline> {
    let estimate = verts.iter().map(|v| v.1).fold(0.0, f64::max);
    if estimate > resolution {
        return Err(Error::ResolutionTooCoarse { estimate, bound: resolution });
    }
    let mut points = Vec::with_capacity(verts.len() + 1);
    points.push(start);
    points.extend(verts.iter().map(|v| v.0));
    let times = (0..points.len()).map(|k| driving.time(k)).collect();
    let self_intersection = polyline_self_intersects(&points);
    let mut trace = TracePolyline {
        geometry,
        points,
        times,
        resolution,
        error_estimate: estimate,
        self_intersection,
        hitting_times: vec![],
    };
    trace.hitting_times =
        s_values.iter().map(|&s| HittingTime { s, tau: trace.first_time_below((-s).exp()) }).collect();
    Ok(trace)
}

fn orient(a: C, b: C, c: C) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn on_segment(a: C, b: C, p: C) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Closed segments `[a,b]` and `[c,d]` share a point.
pub(crate) fn segments_meet(a: C, b: C, c: C, d: C) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Sweep-line test for a crossing or touch between non-adjacent segments.
pub fn polyline_self_intersects(points: &[C]) -> bool {
    let n = points.len();
    if n < 4 {
        return false;
    }
    // sweep along the axis with the larger spread
    let (mut lo, mut hi) = (C::new(f64::INFINITY, f64::INFINITY), C::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in points {
        lo = C::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = C::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let swap = hi.im - lo.im > hi.re - lo.re;
    let key = |z: C| if swap { (z.im, z.re) } else { (z.re, z.im) };
    let mut segs: Vec<(f64, f64, f64, f64, usize)> = (0..n - 1)
        .map(|i| {
            let (a, b) = (key(points[i]), key(points[i + 1]));
            (a.0.min(b.0), a.0.max(b.0), a.1.min(b.1), a.1.max(b.1), i)
        })
        .collect();
    segs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut active: Vec<(f64, f64, f64, f64, usize)> = Vec::new();
    for s in segs {
        active.retain(|a| a.1 >= s.0);
        for a in &active {
            let (i, j) = (a.4.min(s.4), a.4.max(s.4));
            if j == i + 1 || a.3 < s.2 || s.3 < a.2 {
                continue;
            }
            if segments_meet(points[i], points[i + 1], points[j], points[j + 1]) {
                return true;
            }
        }
        active.push(s);
    }
    false
}

/// Two polylines share a point (bounding boxes prune segment pairs).
pub fn polylines_meet(a: &[C], b: &[C]) -> bool {
    let bbox = |p: C, q: C| (p.re.min(q.re), p.re.max(q.re), p.im.min(q.im), p.im.max(q.im));
    let bs: Vec<_> = b.windows(2).map(|w| bbox(w[0], w[1])).collect();
    for wa in a.windows(2) {
        let (x0, x1, y0, y1) = bbox(wa[0], wa[1]);
        for (wb, &(u0, u1, v0, v1)) in b.windows(2).zip(&bs) {
            if u1 < x0 || u0 > x1 || v1 < y0 || v0 > y1 {
                continue;
            }
            if segments_meet(wa[0], wa[1], wb[0], wb[1]) {
                return true;
            }
        }
    }
    false
}

/// Recovers a chordal driving function from a simple polyline starting on the real line.
///
/// Segments longer than twice the median are split, the polyline is unzipped
/// with vertical slits, and the result is resampled on a uniform capacity grid
/// with as many steps as there are slits.
pub fn driving_of_polyline_chordal(trace: &TracePolyline) -> Result<DrivingPath> {
    let pts = &trace.points;
    if pts.len() < 2 {
        return Err(Error::InvalidInput("polyline needs at least two vertices".into()));
    }
    for k in 0..pts.len() - 1 {
        if (pts[k + 1] - pts[k]).norm() == 0.0 {
            return Err(Error::DegenerateSegment(k));
        }
    }
    let scale = pts.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    if pts[0].im.abs() > 1e-12 * scale {
        return Err(Error::InvalidInput(format!("polyline starts at {} off the real line", pts[0])));
    }
    if polyline_self_intersects(pts) {
        return Err(Error::SelfIntersectingInput);
    }
    let mut lens: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    lens.sort_by(f64::total_cmp);
    let median = lens[lens.len() / 2];
    let mut fine = vec![C::new(pts[0].re, 0.0)];
    for w in pts.windows(2) {
        let pieces = ((w[1] - w[0]).norm() / (2.0 * median)).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            fine.push(w[0] + (w[1] - w[0]) * (j as f64 / pieces as f64));
        }
    }
    let unz = unzip_chordal(&fine)?;
    let m = unz.slits.len();
    let total = *unz.times.last().expect("non-empty");
    let dt = total / m as f64;
    let mut values = Vec::with_capacity(m + 1);
    let mut j = 0;
    for k in 0..=m {
        let t = (k as f64 * dt).min(total);
        while j + 1 < unz.times.len() - 1 && unz.times[j + 1] < t {
            j += 1;
        }
        let (t0, t1) = (unz.times[j], unz.times[j + 1]);
        let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 1.0 };
        values.push(unz.values[j] + w * (unz.values[j + 1] - unz.values[j]));
    }
    DrivingPath::new(Geometry::Chordal, dt, values)
}
