//! Scenario configs and their execution.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slelab_core::energy::{dirichlet_energy, rho_energy_chordal, rho_energy_radial, EnergyBreakdown, RhoMethod};
use slelab_core::loewner::{trace_chordal, trace_radial};
use slelab_core::mc::{ldp_scaling_probe, LdpEvent};
use slelab_core::partition::{
    bpz_residual, default_fd_step, log_z_halfwatermelon, log_z_nradial, semiclassical_bpz_residual,
    semiclassical_potential, PartitionParams,
};
use slelab_core::rng::normal;
use slelab_core::sde::{self, PathEnsemble, SdeConfig};
use slelab_core::verify::{check_id, run_check, CheckOutcome, Scale};
use slelab_core::{DrivingPath, Geometry, StreamId};

use crate::io::{ensure_dir, write_csv, write_json, write_svg, Header, Mark, Plot, SCHEMA_VERSION};
use crate::CliError;

/// A full CLI invocation in JSON form. Unknown fields are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub output: OutputSpec,
    /// Write an SVG next to the CSV (simulate and trace).
    #[serde(default = "yes")]
    pub plot: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; defaults to the command name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from("."), stem: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    Dyson,
    SleRho,
    Bessel,
    Coupling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Dirichlet,
    RhoChordal,
    RhoRadial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodSel {
    Integral,
    Boundary,
    Both,
}

/// Deterministic driving functions for the energy command. Formula drivers start at
/// 0 (chordal) or at the first angle (radial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverSpec {
    /// `amplitude * sin(frequency * t)`.
    Sine { amplitude: f64, frequency: f64 },
    /// `sum_k coefficients[k] * t^(k+1)`.
    Poly { coefficients: Vec<f64> },
    /// Uniformly sampled values, one per row (a `t` column is checked if present).
    Csv { path: PathBuf },
}

impl std::str::FromStr for DriverSpec {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>, CliError> {
            rest.split(',')
                .filter(|p| !p.is_empty())
                .map(|p| p.trim().parse::<f64>().map_err(|e| CliError::SchemaViolation(format!("driver {s:?}: {e}"))))
                .collect()
        };
        match kind {
            "sine" => match nums()?.as_slice() {
                [a, w] => Ok(DriverSpec::Sine { amplitude: *a, frequency: *w }),
                _ => Err(CliError::SchemaViolation("sine driver takes amplitude,frequency".into())),
            },
            "poly" => Ok(DriverSpec::Poly { coefficients: nums()? }),
            "csv" if !rest.is_empty() => Ok(DriverSpec::Csv { path: PathBuf::from(rest) }),
            _ => Err(CliError::SchemaViolation(format!("unknown driver {s:?}; use sine:a,w | poly:c1,c2,.. | csv:path"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    Simulate {
        geometry: Geometry,
        kind: SimKind,
        sde: SdeConfig,
    },
    Trace {
        geometry: Geometry,
        kappa: f64,
        #[serde(default)]
        mu: f64,
        /// Starting point `W_0` or angle `xi_0`.
        #[serde(default)]
        start: f64,
        dt: f64,
        horizon: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        stream: u64,
        /// Upper bound on the discretization estimate; absent means unchecked.
        #[serde(default)]
        resolution: Option<f64>,
        /// Radial only: report the first time the trace reaches `|z| = e^{-s}`.
        #[serde(default)]
        s_values: Vec<f64>,
    },
    Energy {
        kind: EnergyKind,
        method: MethodSel,
        driver: DriverSpec,
        dt: f64,
        horizon: f64,
        /// Chordal force points, or radial angles starting with the curve's own.
        #[serde(default)]
        points: Vec<f64>,
        #[serde(default)]
        rho: Vec<f64>,
        #[serde(default)]
        mu: f64,
    },
    Partition {
        geometry: Geometry,
        kappa: f64,
        #[serde(default)]
        mu: f64,
        point: Vec<f64>,
        #[serde(default)]
        fd_step: Option<f64>,
    },
    Verify {
        /// `all` or a list of check numbers / names.
        checks: Vec<String>,
        #[serde(default)]
        quick: bool,
        #[serde(default)]
        seed: u64,
    },
    ProbeLdp {
        a: f64,
        kappa_grid: Vec<f64>,
        n: usize,
        horizon: f64,
        dt: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        stream: u64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Trace { .. } => "trace",
            Command::Energy { .. } => "energy",
            Command::Partition { .. } => "partition",
            Command::Verify { .. } => "verify",
            Command::ProbeLdp { .. } => "probe-ldp",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Command::Simulate { sde, .. } => sde.seed,
            Command::Trace { seed, .. } | Command::Verify { seed, .. } | Command::ProbeLdp { seed, .. } => *seed,
            Command::Energy { .. } | Command::Partition { .. } => 0,
        }
    }
}

/// Seed from `SLELAB_SEED`, else 0.
pub fn default_seed() -> u64 {
    std::env::var("SLELAB_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

/// Evenly spaced starting points: integers centred on 0 (chordal) or `2 pi j / n` (radial).
pub fn default_init(geometry: Geometry, n: usize) -> Vec<f64> {
    match geometry {
        Geometry::Chordal => (0..n).map(|j| j as f64 - (n as f64 - 1.0) / 2.0).collect(),
        Geometry::Radial => (0..n).map(|j| 2.0 * PI * j as f64 / n as f64).collect(),
    }
}

/// Dyson presets `(kappa, n, mu)`: chordal (2,3), (0,3) and radial (2,3,1), (0,3,1).
pub const PRESETS: [&str; 4] = ["dyson-chordal-k2", "dyson-chordal-k0", "dyson-radial-k2-mu1", "dyson-radial-k0-mu1"];

pub fn preset(name: &str, seed: u64) -> Result<Command, CliError> {
    let (geometry, kappa, mu) = match name {
        "dyson-chordal-k2" => (Geometry::Chordal, 2.0, 0.0),
        "dyson-chordal-k0" => (Geometry::Chordal, 0.0, 0.0),
        "dyson-radial-k2-mu1" => (Geometry::Radial, 2.0, 1.0),
        "dyson-radial-k0-mu1" => (Geometry::Radial, 0.0, 1.0),
        _ => return Err(CliError::SchemaViolation(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))),
    };
    let mut sde = SdeConfig::new(kappa, 1e-3, 1.0);
    sde.mu = mu;
    sde.init = default_init(geometry, 3);
    sde.record_stride = 10;
    sde.seed = seed;
    Ok(Command::Simulate { geometry, kind: SimKind::Dyson, sde })
}

impl ScenarioConfig {
    pub fn new(command: Command) -> Self {
        Self { schema_version: SCHEMA_VERSION, command, output: OutputSpec::default(), plot: true }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: Self = serde_json::from_str(text).map_err(|e| CliError::SchemaViolation(e.to_string()))?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(CliError::SchemaViolation(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    fn header(&self) -> Header {
        let cfg = serde_json::to_value(self).expect("configs serialize");
        let hashed = serde_json::to_value(&self.command).expect("configs serialize");
        Header::new(cfg, &hashed, self.command.seed())
    }

    fn path(&self, ext: &str) -> PathBuf {
        let stem = self.output.stem.clone().unwrap_or_else(|| self.command.name().to_string());
        self.output.dir.join(format!("{stem}.{ext}"))
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    /// Lines for the terminal.
    pub summary: Vec<String>,
    /// 0 on success, 2 when a verification fails.
    pub exit_code: i32,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<Outcome, CliError> {
    ensure_dir(&config.output.dir)?;
    let header = config.header();
    match &config.command {
        Command::Simulate { geometry, kind, sde } => simulate(config, &header, *geometry, *kind, sde),
        Command::Trace { geometry, kappa, mu, start, dt, horizon, seed, stream, resolution, s_values } => {
            let n = (horizon / dt).round() as usize;
            let mut rng = StreamId::new(*seed, *stream).rng(0);
            let sig = (kappa * dt).sqrt();
            let drift = if *geometry == Geometry::Radial { mu * dt } else { 0.0 };
            let mut v = vec![*start];
            for k in 0..n {
                v.push(v[k] + drift + sig * normal(&mut rng));
            }
            let drv = DrivingPath::new(*geometry, *dt, v)?;
            let res = resolution.unwrap_or(f64::INFINITY);
            let tr = match geometry {
                Geometry::Chordal => trace_chordal(&drv, res)?,
                Geometry::Radial => trace_radial(&drv, res, s_values)?,
            };
            let rows: Vec<Vec<f64>> = tr.points.iter().zip(&tr.times).map(|(z, t)| vec![*t, z.re, z.im]).collect();
            let mut artifacts = vec![write_csv(&config.path("csv"), &header, &["t".into(), "x".into(), "y".into()], &rows)?];
            #[derive(Serialize)]
            struct TraceSummary<'a> {
                n_vertices: usize,
                error_estimate: f64,
                self_intersection: bool,
                tip: [f64; 2],
                hitting_times: &'a [slelab_core::loewner::HittingTime],
            }
            let tip = tr.tip();
            let summary = TraceSummary {
                n_vertices: tr.points.len(),
                error_estimate: tr.error_estimate,
                self_intersection: tr.self_intersection,
                tip: [tip.re, tip.im],
                hitting_times: &tr.hitting_times,
            };
            artifacts.push(write_json(&config.path("json"), &header, &summary)?);
            if config.plot {
                let line: Vec<(f64, f64)> = tr.points.iter().map(|z| (z.re, z.im)).collect();
                let marks = capacity_marks(&tr.times, &line, 5);
                let mut lines = vec![line];
                if *geometry == Geometry::Radial {
                    lines.push((0..=256).map(|k| (2.0 * PI * k as f64 / 256.0).sin_cos()).map(|(s, c)| (c, s)).collect());
                }
                let plot = Plot {
                    title: format!("{geometry} trace, kappa = {kappa}"),
                    x_label: "Re z (marks: capacity time t)".into(),
                    y_label: "Im z".into(),
                    lines,
                    marks,
                    equal_aspect: true,
                };
                artifacts.push(write_svg(&config.path("svg"), &plot, &header)?);
            }
            Ok(Outcome {
                summary: vec![format!(
                    "{} vertices to capacity time {}, error estimate {:.3e}",
                    tr.points.len(),
                    tr.times.last().copied().unwrap_or(0.0),
                    tr.error_estimate
                )],
                artifacts,
                exit_code: 0,
            })
        }
        Command::Energy { kind, method, driver, dt, horizon, points, rho, mu } => {
            energy(config, &header, *kind, *method, driver, *dt, *horizon, points, rho, *mu)
        }
        Command::Partition { geometry, kappa, mu, point, fd_step } => {
            let params = PartitionParams::new(*kappa, *mu)?;
            let log_z = match geometry {
                Geometry::Chordal => log_z_halfwatermelon(*kappa, point)?,
                Geometry::Radial => log_z_nradial(*kappa, *mu, point)?,
            };
            let step = fd_step.unwrap_or_else(|| default_fd_step(*geometry, point));
            #[derive(Serialize)]
            struct PartitionReport {
                params: PartitionParams,
                log_z: f64,
                z: f64,
                semiclassical_potential: f64,
                fd_step: f64,
                bpz_residual: Vec<f64>,
                semiclassical_bpz_residual: Vec<f64>,
            }
            let rep = PartitionReport {
                params,
                log_z,
                z: log_z.exp(),
                semiclassical_potential: semiclassical_potential(*geometry, *mu, point)?,
                fd_step: step,
                bpz_residual: bpz_residual(*geometry, *kappa, *mu, point, step)?,
                semiclassical_bpz_residual: semiclassical_bpz_residual(*geometry, *mu, point)?,
            };
            let worst = rep.bpz_residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            Ok(Outcome {
                summary: vec![format!("Z = {:.12e}, max BPZ residual {worst:.3e} at step {step:.3e}", rep.z)],
                artifacts: vec![write_json(&config.path("json"), &header, &rep)?],
                exit_code: 0,
            })
        }
        Command::Verify { checks, quick, seed } => {
            let ids: Vec<u8> = if checks.is_empty() || checks.iter().any(|c| c == "all") {
                (1..=12).collect()
            } else {
                checks.iter().map(|c| check_id(c)).collect::<Result<_, _>>()?
            };
            let scale = if *quick { Scale::Quick } else { Scale::Full };
            let outcomes: Vec<CheckOutcome> = ids.iter().map(|&id| run_check(id, scale, *seed)).collect();
            let all_pass = outcomes.iter().all(|o| o.pass);
            #[derive(Serialize)]
            struct Suite<'a> {
                scale: Scale,
                all_pass: bool,
                checks: &'a [CheckOutcome],
            }
            let path = write_json(&config.path("json"), &header, &Suite { scale, all_pass, checks: &outcomes })?;
            let summary = outcomes
                .iter()
                .map(|o| format!("{:>2} {:<24} {} {}", o.id, o.name, if o.pass { "PASS" } else { "FAIL" }, o.detail))
                .collect();
            Ok(Outcome { artifacts: vec![path], summary, exit_code: if all_pass { 0 } else { 2 } })
        }
        Command::ProbeLdp { a, kappa_grid, n, horizon, dt, seed, stream } => {
            let r = ldp_scaling_probe(LdpEvent::SupExceeds { a: *a }, kappa_grid, *n, *horizon, *dt, StreamId::new(*seed, *stream))?;
            let summary = kappa_grid
                .iter()
                .enumerate()
                .map(|(i, k)| {
                    format!("kappa {k}: -kappa log P = {:.4} +- {:.4} (exact {:.4})", r.values[i], r.value_stderr[i], r.exact[i])
                })
                .collect();
            Ok(Outcome { artifacts: vec![write_json(&config.path("json"), &header, &r)?], summary, exit_code: 0 })
        }
    }
}

/// Marks at `count` evenly spaced capacity times along a polyline with vertex times `times`.
fn capacity_marks(times: &[f64], line: &[(f64, f64)], count: usize) -> Vec<Mark> {
    let t_end = times.last().copied().unwrap_or(0.0);
    if t_end <= 0.0 || line.is_empty() {
        return vec![];
    }
    (1..=count)
        .map(|k| {
            let t = t_end * k as f64 / count as f64;
            let i = times.partition_point(|&s| s < t).min(line.len() - 1);
            Mark { x: line[i].0, y: line[i].1, label: format!("t={:.3}", times[i]) }
        })
        .collect()
}

fn simulate(
    config: &ScenarioConfig,
    header: &Header,
    geometry: Geometry,
    kind: SimKind,
    cfg: &SdeConfig,
) -> Result<Outcome, CliError> {
    let ens: PathEnsemble = match (kind, geometry) {
        (SimKind::Dyson, Geometry::Chordal) => sde::simulate_dyson_chordal(cfg)?,
        (SimKind::Dyson, Geometry::Radial) => sde::simulate_dyson_radial(cfg)?,
        (SimKind::SleRho, Geometry::Chordal) => sde::simulate_chordal_sle_kappa_rho(cfg)?,
        (SimKind::SleRho, Geometry::Radial) => sde::simulate_radial_sle_kappa_mu_rho(cfg)?,
        (SimKind::Bessel, Geometry::Chordal) => sde::simulate_bessel_chordal(cfg)?,
        (SimKind::Bessel, Geometry::Radial) => sde::simulate_bessel_radial(cfg)?,
        (SimKind::Coupling, Geometry::Chordal) => sde::simulate_monotone_coupling_chordal(cfg)?,
        (SimKind::Coupling, Geometry::Radial) => sde::simulate_monotone_coupling_radial(cfg)?,
    };
    let multi = ens.n_samples() > 1;
    let mut cols: Vec<String> = Vec::new();
    if multi {
        cols.push("sample".into());
    }
    cols.push("t".into());
    cols.extend(ens.labels.iter().cloned());
    let mut rows = Vec::with_capacity(ens.n_samples() * ens.times.len());
    for (i, p) in ens.paths.iter().enumerate() {
        for (t, r) in ens.times.iter().zip(p) {
            let mut row = Vec::with_capacity(cols.len());
            if multi {
                row.push(i as f64);
            }
            row.push(*t);
            row.extend_from_slice(r);
            rows.push(row);
        }
    }
    let mut artifacts = vec![write_csv(&config.path("csv"), header, &cols, &rows)?];
    if config.plot {
        // first few samples only, every coordinate against capacity time
        let times = &ens.times;
        let lines = ens
            .paths
            .iter()
            .take(8)
            .flat_map(|p| (0..ens.labels.len()).map(move |c| times.iter().zip(p).map(|(t, r)| (*t, r[c])).collect()))
            .collect();
        let plot = Plot {
            title: format!("{geometry} {kind:?}, kappa = {}", cfg.kappa),
            x_label: "capacity time t".into(),
            y_label: ens.labels.join(", "),
            lines,
            marks: vec![],
            equal_aspect: false,
        };
        artifacts.push(write_svg(&config.path("svg"), &plot, header)?);
    }
    Ok(Outcome {
        summary: vec![format!(
            "{} sample(s) x {} times x {} coordinates ({})",
            ens.n_samples(),
            ens.times.len(),
            ens.labels.len(),
            ens.rng
        )],
        artifacts,
        exit_code: 0,
    })
}

fn build_driver(spec: &DriverSpec, geometry: Geometry, start: f64, dt: f64, horizon: f64) -> Result<DrivingPath, CliError> {
    Ok(match spec {
        DriverSpec::Sine { amplitude: a, frequency: w } => {
            let (a, w) = (*a, *w);
            DrivingPath::from_fn(geometry, dt, horizon, move |t| start + a * (w * t).sin(), Some(&move |t| a * w * (w * t).cos()))?
        }
        DriverSpec::Poly { coefficients } => {
            let c = coefficients.clone();
            let d = coefficients.clone();
            let f = move |t: f64| start + c.iter().rev().fold(0.0, |acc, ck| (acc + ck) * t);
            let df = move |t: f64| d.iter().enumerate().rev().fold(0.0, |acc, (k, ck)| acc * t + (k + 1) as f64 * ck);
            DrivingPath::from_fn(geometry, dt, horizon, f, Some(&df))?
        }
        DriverSpec::Csv { path } => {
            let (cols, rows) = crate::io::read_csv(path)?;
            let vi = if cols.len() > 1 { cols.len() - 1 } else { 0 };
            if let Some(ti) = cols.iter().position(|c| c == "t") {
                let off = rows.iter().enumerate().find(|(k, r)| (r[ti] - *k as f64 * dt).abs() > 1e-9 * (1.0 + r[ti].abs()));
                if let Some((k, _)) = off {
                    return Err(CliError::SchemaViolation(format!("{}: row {k} is off the dt = {dt} grid", path.display())));
                }
            }
            DrivingPath::new(geometry, dt, rows.iter().map(|r| r[vi]).collect())?
        }
    })
}

#[allow(clippy::too_many_arguments)]
fn energy(
    config: &ScenarioConfig,
    header: &Header,
    kind: EnergyKind,
    method: MethodSel,
    driver: &DriverSpec,
    dt: f64,
    horizon: f64,
    points: &[f64],
    rho: &[f64],
    mu: f64,
) -> Result<Outcome, CliError> {
    let (geometry, start) = match kind {
        EnergyKind::RhoRadial => (Geometry::Radial, points.first().copied().unwrap_or(0.0)),
        _ => (Geometry::Chordal, 0.0),
    };
    let w = build_driver(driver, geometry, start, dt, horizon)?;
    let eval = |m: RhoMethod| -> Result<EnergyBreakdown, CliError> {
        Ok(match kind {
            EnergyKind::Dirichlet => {
                let d = dirichlet_energy(&w, horizon)?;
                EnergyBreakdown::from_parts(horizon, &[("dirichlet", d)])
            }
            EnergyKind::RhoChordal => rho_energy_chordal(&w, points, rho, horizon, m)?,
            EnergyKind::RhoRadial => rho_energy_radial(&w, points, rho, mu, horizon, m)?,
        })
    };
    #[derive(Serialize)]
    struct EnergyReport {
        #[serde(skip_serializing_if = "Option::is_none")]
        integral: Option<EnergyBreakdown>,
        #[serde(skip_serializing_if = "Option::is_none")]
        boundary: Option<EnergyBreakdown>,
        #[serde(skip_serializing_if = "Option::is_none")]
        abs_difference: Option<f64>,
    }
    let integral = matches!(method, MethodSel::Integral | MethodSel::Both).then(|| eval(RhoMethod::Integral)).transpose()?;
    let boundary = matches!(method, MethodSel::Boundary | MethodSel::Both).then(|| eval(RhoMethod::Boundary)).transpose()?;
    let abs_difference = match (&integral, &boundary) {
        (Some(a), Some(b)) if a.total.is_finite() && b.total.is_finite() => Some((a.total - b.total).abs()),
        _ => None,
    };
    let mut summary = Vec::new();
    for (name, e) in [("integral", &integral), ("boundary", &boundary)] {
        if let Some(e) = e {
            summary.push(format!("{name}: {}", e.total));
        }
    }
    if let Some(d) = abs_difference {
        summary.push(format!("|integral - boundary| = {d:.3e}"));
    }
    let rep = EnergyReport { integral, boundary, abs_difference };
    Ok(Outcome { artifacts: vec![write_json(&config.path("json"), header, &rep)?], summary, exit_code: 0 })
}

/// Reads a scenario file.
pub fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::IoFailure { path: path.to_path_buf(), message: e.to_string() })?;
    ScenarioConfig::from_json(&text)
}
