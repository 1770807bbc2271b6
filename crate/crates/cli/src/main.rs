use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use slelab_cli::scenario::{
    default_init, default_seed, load, preset, Command, DriverSpec, EnergyKind, MethodSel, OutputSpec, SimKind,
};
use slelab_cli::{run_scenario, CliError, ScenarioConfig};
use slelab_core::sde::SdeConfig;
use slelab_core::Geometry;

/// Loewner chains, SLE-type diffusions, Loewner energies and their checks.
///
/// Exit codes: 0 success, 2 verification failure, 1 error.
#[derive(Parser)]
#[command(name = "slelab", version, args_conflicts_with_subcommands = true)]
struct Cli {
    /// Run a scenario JSON file instead of a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output file stem (default: the command name).
    #[arg(long, global = true)]
    stem: Option<String>,
    /// Skip SVG output.
    #[arg(long, global = true)]
    no_plot: bool,
    /// Print the scenario JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    cmd: Option<Cmd>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Geo {
    Chordal,
    Radial,
}

impl From<Geo> for Geometry {
    fn from(g: Geo) -> Self {
        match g {
            Geo::Chordal => Geometry::Chordal,
            Geo::Radial => Geometry::Radial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Dyson,
    SleRho,
    Bessel,
    Coupling,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Integral,
    Boundary,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample paths of an SDE system to CSV (and SVG).
    Simulate(SimulateArgs),
    /// Loewner trace of a Brownian driving function.
    Trace(TraceArgs),
    /// Dirichlet or rho-energies of a deterministic driving function.
    Energy(EnergyArgs),
    /// Partition function, potential and BPZ residuals at one point.
    Partition(PartitionArgs),
    /// Run the verification suite (`all`, or check numbers / names).
    Verify(VerifyArgs),
    /// Large-deviation scaling probe for the Gaussian supremum event.
    ProbeLdp(ProbeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// One of dyson-chordal-k2, dyson-chordal-k0, dyson-radial-k2-mu1, dyson-radial-k0-mu1.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum, default_value = "chordal")]
    geometry: Geo,
    #[arg(long, value_enum, default_value = "dyson")]
    kind: Kind,
    /// Number of Dyson particles when --init is not given.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    init: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x_left: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x_right: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho_left: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho_right: Vec<f64>,
    /// Horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Record every this many steps.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, value_enum, default_value = "chordal")]
    geometry: Geo,
    #[arg(long, default_value_t = 2.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    start: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    resolution: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    s_values: Vec<f64>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("functional").required(true).args(["dirichlet", "rho_chordal", "rho_radial"])))]
struct EnergyArgs {
    #[arg(long)]
    dirichlet: bool,
    #[arg(long)]
    rho_chordal: bool,
    #[arg(long)]
    rho_radial: bool,
    #[arg(long, value_enum, default_value = "both")]
    method: Method,
    /// sine:amplitude,frequency | poly:c1,c2,.. | csv:path
    #[arg(long, default_value = "sine:1,2", allow_hyphen_values = true)]
    driver: String,
    #[arg(long = "T", default_value_t = 0.5)]
    horizon: f64,
    #[arg(long, default_value_t = 5e-4)]
    dt: f64,
    /// Chordal force points, or radial angles starting with the curve's own.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    points: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long, value_enum, default_value = "chordal")]
    geometry: Geo,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    point: Vec<f64>,
    #[arg(long)]
    fd_step: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(default_value = "all")]
    checks: Vec<String>,
    /// Smaller sample sizes; time budgets are not enforced.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25")]
    kappa_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-2)]
    dt: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    stream: u64,
}

fn command(cmd: Cmd) -> Result<Command, CliError> {
    Ok(match cmd {
        Cmd::Simulate(a) => {
            if let Some(p) = &a.preset {
                return preset(p, a.seed.unwrap_or_else(default_seed));
            }
            let geometry: Geometry = a.geometry.into();
            let mut sde = SdeConfig::new(a.kappa, a.dt, a.horizon);
            sde.mu = a.mu;
            sde.alpha = a.alpha;
            sde.init = a.init;
            if sde.init.is_empty() {
                if let Some(n) = a.n {
                    sde.init = default_init(geometry, n);
                }
            } else if a.n.is_some_and(|n| n != sde.init.len()) {
                return Err(CliError::SchemaViolation("--n disagrees with the length of --init".into()));
            }
            sde.rho = a.rho;
            sde.x_left = a.x_left;
            sde.x_right = a.x_right;
            sde.rho_left = a.rho_left;
            sde.rho_right = a.rho_right;
            sde.n_samples = a.samples;
            sde.record_stride = a.stride;
            sde.seed = a.seed.unwrap_or_else(default_seed);
            sde.stream = a.stream;
            let kind = match a.kind {
                Kind::Dyson => SimKind::Dyson,
                Kind::SleRho => SimKind::SleRho,
                Kind::Bessel => SimKind::Bessel,
                Kind::Coupling => SimKind::Coupling,
            };
            Command::Simulate { geometry, kind, sde }
        }
        Cmd::Trace(a) => Command::Trace {
            geometry: a.geometry.into(),
            kappa: a.kappa,
            mu: a.mu,
            start: a.start,
            dt: a.dt,
            horizon: a.horizon,
            seed: a.seed.unwrap_or_else(default_seed),
            stream: a.stream,
            resolution: a.resolution,
            s_values: a.s_values,
        },
        Cmd::Energy(a) => Command::Energy {
            kind: if a.rho_chordal {
                EnergyKind::RhoChordal
            } else if a.rho_radial {
                EnergyKind::RhoRadial
            } else {
                EnergyKind::Dirichlet
            },
            method: match a.method {
                Method::Integral => MethodSel::Integral,
                Method::Boundary => MethodSel::Boundary,
                Method::Both => MethodSel::Both,
            },
            driver: a.driver.parse::<DriverSpec>()?,
            dt: a.dt,
            horizon: a.horizon,
            points: a.points,
            rho: a.rho,
            mu: a.mu,
        },
        Cmd::Partition(a) => Command::Partition {
            geometry: a.geometry.into(),
            kappa: a.kappa,
            mu: a.mu,
            point: a.point,
            fd_step: a.fd_step,
        },
        Cmd::Verify(a) => Command::Verify { checks: a.checks, quick: a.quick, seed: a.seed.unwrap_or_else(default_seed) },
        Cmd::ProbeLdp(a) => Command::ProbeLdp {
            a: a.a,
            kappa_grid: a.kappa_grid,
            n: a.n,
            horizon: a.horizon,
            dt: a.dt,
            seed: a.seed.unwrap_or_else(default_seed),
            stream: a.stream,
        },
    })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let mut config = match (cli.config, cli.cmd) {
        (Some(path), _) => load(&path)?,
        (None, Some(cmd)) => ScenarioConfig::new(command(cmd)?),
        (None, None) => return Err(CliError::SchemaViolation("give a subcommand or --config FILE".into())),
    };
    if let Some(dir) = cli.out {
        config.output = OutputSpec { dir, stem: config.output.stem.take() };
    }
    if cli.stem.is_some() {
        config.output.stem = cli.stem;
    }
    if cli.no_plot {
        config.plot = false;
    }
    if cli.print_config {
        println!("{}", config.to_json());
        return Ok(0);
    }
    let outcome = run_scenario(&config)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for a in &outcome.artifacts {
        println!("wrote {}", a.display());
    }
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
