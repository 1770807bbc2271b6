//! Generic integrator for SDE systems with additive-in-dB noise.
//!
//! A step advances the drift with classical RK4 over `h` and then adds the
//! noise increment evaluated at the start of the step. When a proposed step
//! shrinks any guarded gap below a tenth of its current value, the step is
//! split in two, with the Brownian increment split by a Brownian bridge.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::normal;

pub const MAX_SPLIT_DEPTH: u32 = 40;
const GAP_FRACTION: f64 = 0.1;
/// States of a boxed coordinate may overshoot by this much before being treated as escaped.
pub const ESCAPE_TOL: f64 = 1e-6;
/// Boxed coordinates are projected this far inside their interval.
pub const PROJECT_EPS: f64 = 1e-12;

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type NoiseFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type GapFn = dyn Fn(&[f64], &mut Vec<f64>) + Send + Sync;

/// An SDE system `dx = b(x) dt + s(x) dB` with a collision guard.
pub struct System {
    pub labels: Vec<String>,
    pub x0: Vec<f64>,
    pub n_bm: usize,
    drift: Box<DriftFn>,
    noise: Box<NoiseFn>,
    gaps: Box<GapFn>,
    boxed: Vec<(usize, f64, f64)>,
}

impl System {
    /// `noise(x, dB, out)` writes the diffusion increment for the Brownian increments `dB`.
    pub fn new(
        labels: Vec<String>,
        x0: Vec<f64>,
        n_bm: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        noise: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        gaps: impl Fn(&[f64], &mut Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        Self {
            labels,
            x0,
            n_bm,
            drift: Box::new(drift),
            noise: Box::new(noise),
            gaps: Box::new(gaps),
            boxed: vec![],
        }
    }

    /// Keeps coordinate `i` in `[lo, hi]` by projection (escape beyond `ESCAPE_TOL` is an error).
    pub fn with_box(mut self, i: usize, lo: f64, hi: f64) -> Self {
        self.boxed.push((i, lo, hi));
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn rk4_drift(&self, x: &[f64], h: f64, out: &mut [f64], scratch: &mut Scratch) {
        let n = x.len();
        let Scratch { k1, k2, k3, k4, y, .. } = scratch;
        (self.drift)(x, k1);
        for i in 0..n {
            y[i] = x[i] + 0.5 * h * k1[i];
        }
        (self.drift)(y, k2);
        for i in 0..n {
            y[i] = x[i] + 0.5 * h * k2[i];
        }
        (self.drift)(y, k3);
        for i in 0..n {
            y[i] = x[i] + h * k3[i];
        }
        (self.drift)(y, k4);
        for i in 0..n {
            out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    fn try_step(&self, x: &[f64], h: f64, db: &[f64], out: &mut [f64], s: &mut Scratch) -> bool {
        self.rk4_drift(x, h, out, s);
        (self.noise)(x, db, &mut s.dn);
        for i in 0..out.len() {
            out[i] += s.dn[i];
        }
        if out.iter().any(|v| !v.is_finite()) {
            return false;
        }
        (self.gaps)(x, &mut s.g_old);
        (self.gaps)(out, &mut s.g_new);
        s.g_old.iter().zip(&s.g_new).all(|(&o, &n)| n >= GAP_FRACTION * o && (n > 0.0 || o <= 0.0))
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        x: &mut Vec<f64>,
        t: f64,
        h: f64,
        db: &[f64],
        depth: u32,
        rng: &mut ChaCha8Rng,
        s: &mut Scratch,
    ) -> Result<()> {
        let mut out = vec![0.0; x.len()];
        if self.try_step(x, h, db, &mut out, s) {
            self.project(&mut out, t + h)?;
            *x = out;
            return Ok(());
        }
        if depth >= MAX_SPLIT_DEPTH {
            return Err(Error::CollisionDetected { t });
        }
        let sd = (0.25 * h).sqrt();
        let db1: Vec<f64> = db.iter().map(|&b| 0.5 * b + sd * normal(rng)).collect();
        let db2: Vec<f64> = db.iter().zip(&db1).map(|(b, b1)| b - b1).collect();
        self.step(x, t, 0.5 * h, &db1, depth + 1, rng, s)?;
        self.step(x, t + 0.5 * h, 0.5 * h, &db2, depth + 1, rng, s)
    }

    fn project(&self, x: &mut [f64], t: f64) -> Result<()> {
        for &(i, lo, hi) in &self.boxed {
            let v = x[i];
            if v < lo - ESCAPE_TOL || v > hi + ESCAPE_TOL {
                return Err(Error::StateEscaped { t, value: v });
            }
            x[i] = v.clamp(lo + PROJECT_EPS, hi - PROJECT_EPS);
        }
        Ok(())
    }

    /// Integrates one path for `n_steps` steps of size `dt`.
    ///
    /// `observe(step, t, x)` is called at every grid point (including `t = 0`);
    /// returning `false` stops the path early.
    pub fn run(
        &self,
        dt: f64,
        n_steps: usize,
        rng: &mut ChaCha8Rng,
        mut observe: impl FnMut(usize, f64, &[f64]) -> bool,
    ) -> Result<Vec<f64>> {
        let mut x = self.x0.clone();
        let mut s = Scratch::new(x.len());
        let mut db = vec![0.0; self.n_bm];
        let sq = dt.sqrt();
        if !observe(0, 0.0, &x) {
            return Ok(x);
        }
        for k in 0..n_steps {
            for b in db.iter_mut() {
                *b = sq * normal(rng);
            }
            let t = k as f64 * dt;
            self.step(&mut x, t, dt, &db, 0, rng, &mut s)?;
            if !observe(k + 1, (k + 1) as f64 * dt, &x) {
                break;
            }
        }
        Ok(x)
    }
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    y: Vec<f64>,
    dn: Vec<f64>,
    g_old: Vec<f64>,
    g_new: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            y: vec![0.0; n],
            dn: vec![0.0; n],
            g_old: Vec::new(),
            g_new: Vec::new(),
        }
    }
}
