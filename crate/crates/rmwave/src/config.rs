//! Command-line parsing into a resolved [`RunConfig`].

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmwave_core::model::ModelParams;
use rmwave_core::pde::{Component, InitialData, PdeConfig};
use rmwave_core::wave::WaveParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Equilibria,
    HopfScan,
    Cycle,
    Heteroclinic,
    WaveShoot,
    ReducedCycle,
    Pde,
    FrontSpeed,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equilibria => "equilibria",
            Command::HopfScan => "hopf-scan",
            Command::Cycle => "cycle",
            Command::Heteroclinic => "heteroclinic",
            Command::WaveShoot => "wave-shoot",
            Command::ReducedCycle => "reduced-cycle",
            Command::Pde => "pde",
            Command::FrontSpeed => "front-speed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfRange {
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontTarget {
    pub component: Component,
    pub level: f64,
}

/// Everything a run needs, with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    pub wave: Option<WaveParams>,
    pub pde: Option<PdeConfig>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    /// Integration horizon of orbit commands.
    pub horizon: Option<f64>,
    pub hopf: Option<HopfRange>,
    pub front: Option<FrontTarget>,
}

/// Why parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Usage {
    /// Help or version text; not an error.
    Info(String),
    /// One-line diagnostic.
    Error(String),
}

#[derive(Parser, Debug)]
#[command(name = "rmwave", version, about = "Predator-prey kinetics, wave profiles and invasion fronts")]
#[command(subcommand_required = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Equilibria with their eigenvalues and linear type.
    Equilibria(Kinetic),
    /// Interior eigenvalues across a range of gamma.
    HopfScan(HopfArgs),
    /// The limit cycle around the interior equilibrium.
    Cycle(Kinetic),
    /// The orbit leaving (gamma, 0) and its end state.
    Heteroclinic(Orbit),
    /// Traveling-wave profile leaving (gamma, 0, 0, 0).
    WaveShoot(WaveArgs),
    /// Limit cycle of the slow-manifold reduced system.
    ReducedCycle(WaveArgs),
    /// Reaction-diffusion invasion run with snapshots.
    Pde(PdeArgs),
    /// Invasion run followed by a front-speed fit.
    FrontSpeed(FrontArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Prey-to-predator diffusion ratio.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    d: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "RMWAVE_OUT", default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct Kinetic {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct HopfArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, allow_negative_numbers = true)]
    gamma_min: f64,
    #[arg(long, allow_negative_numbers = true)]
    gamma_max: f64,
    #[arg(long, default_value_t = 101)]
    steps: usize,
}

#[derive(Args, Debug)]
struct Orbit {
    #[command(flatten)]
    common: Common,
    /// Integration horizon.
    #[arg(long, default_value_t = 400.0, allow_negative_numbers = true)]
    t_end: f64,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Speed {
    /// Wave speed.
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,
    /// 1 / c^2.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: Option<f64>,
}

#[derive(Args, Debug)]
struct WaveArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    speed: Speed,
    /// Cap on each internal-time shot.
    #[arg(long, default_value_t = 2e4, allow_negative_numbers = true)]
    t_end: f64,
}

#[derive(Args, Debug)]
struct Grid {
    /// Decay rate of the initial predator profile.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    v0_amp: f64,
    #[arg(long, default_value_t = 4000)]
    grid_n: usize,
    #[arg(long, default_value_t = 1000.0, allow_negative_numbers = true)]
    length: f64,
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    dt: f64,
    #[arg(long, default_value_t = 150.0, allow_negative_numbers = true)]
    t_end: f64,
    /// Snapshot spacing; snapshots are taken at 0, every, 2 every, ... and t_end.
    #[arg(long, allow_negative_numbers = true)]
    snapshot_every: Option<f64>,
    /// Positions whose values are written every step.
    #[arg(long, allow_negative_numbers = true)]
    probe: Vec<f64>,
}

#[derive(Args, Debug)]
struct PdeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Species {
    U,
    V,
}

#[derive(Args, Debug)]
struct FrontArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    grid: Grid,
    #[arg(long, value_enum, default_value_t = Species::V)]
    component: Species,
    /// Level set tracked; defaults to half the interior predator density
    /// (or half of gamma for the prey).
    #[arg(long, allow_negative_numbers = true)]
    level: Option<f64>,
}

fn usage(msg: impl Into<String>) -> Usage {
    Usage::Error(msg.into())
}

fn positive(name: &str, x: f64) -> Result<f64, Usage> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(usage(format!("--{name} must be positive, got {x}")))
    }
}

impl Common {
    fn base(&self, command: Command) -> Result<RunConfig, Usage> {
        let params = ModelParams::new(self.alpha, self.beta, self.gamma, self.d)
            .map_err(|e| usage(e.to_string()))?;
        Ok(RunConfig {
            command,
            params,
            wave: None,
            pde: None,
            seed: self.seed,
            out_dir: self.out.clone(),
            format: self.format,
            horizon: None,
            hopf: None,
            front: None,
        })
    }
}

impl Speed {
    fn resolve(&self) -> Result<WaveParams, Usage> {
        let w = match (self.c, self.epsilon) {
            (Some(c), None) => WaveParams::from_speed(c),
            (None, Some(e)) => WaveParams::from_epsilon(e),
            _ => return Err(usage("exactly one of --c and --epsilon is required")),
        };
        w.map_err(|e| usage(e.to_string()))
    }
}

impl WaveArgs {
    fn resolve(&self, command: Command) -> Result<RunConfig, Usage> {
        let mut cfg = self.common.base(command)?;
        cfg.wave = Some(self.speed.resolve()?);
        cfg.horizon = Some(positive("t-end", self.t_end)?);
        Ok(cfg)
    }
}

impl Grid {
    fn resolve(&self, params: ModelParams, default_every: f64) -> Result<PdeConfig, Usage> {
        let t_end = if self.t_end.is_finite() && self.t_end >= 0.0 {
            self.t_end
        } else {
            return Err(usage(format!("--t-end must be nonnegative, got {}", self.t_end)));
        };
        let every = positive("snapshot-every", self.snapshot_every.unwrap_or(default_every))?;
        let n = (t_end / every + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * every).min(t_end)).collect();
        if times.last().is_some_and(|&t| t < t_end) {
            times.push(t_end);
        }
        times.dedup();
        let cfg = PdeConfig {
            params,
            length: positive("length", self.length)?,
            cells: self.grid_n,
            dt: positive("dt", self.dt)?,
            t_end,
            snapshot_times: times,
            initial: InitialData::Invasion {
                delta: positive("delta", self.delta)?,
                v0_amp: positive("v0-amp", self.v0_amp)?,
            },
            probes: self.probe.clone(),
            probe_every: 1,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn first_line(s: &str) -> String {
    s.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("invalid arguments")
        .to_string()
}

/// Parses `argv` (program name first) into a resolved configuration.
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, Usage>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Usage::Info(e.render().to_string()),
            ErrorKind::MissingSubcommand | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                Usage::Error(
                    "error: missing command (equilibria, hopf-scan, cycle, heteroclinic, wave-shoot, \
                     reduced-cycle, pde, front-speed)"
                        .into(),
                )
            }
            _ => Usage::Error(first_line(&e.render().to_string())),
        }
    })?;

    match cli.command {
        Cmd::Equilibria(a) => a.common.base(Command::Equilibria),
        Cmd::Cycle(a) => a.common.base(Command::Cycle),
        Cmd::HopfScan(a) => {
            let mut cfg = a.common.base(Command::HopfScan)?;
            let (lo, hi) = (positive("gamma-min", a.gamma_min)?, positive("gamma-max", a.gamma_max)?);
            if lo >= hi {
                return Err(usage("--gamma-min must be below --gamma-max"));
            }
            if a.steps < 2 {
                return Err(usage("--steps must be at least 2"));
            }
            cfg.hopf = Some(HopfRange {
                gamma_min: lo,
                gamma_max: hi,
                steps: a.steps,
            });
            Ok(cfg)
        }
        Cmd::Heteroclinic(a) => {
            let mut cfg = a.common.base(Command::Heteroclinic)?;
            cfg.horizon = Some(positive("t-end", a.t_end)?);
            Ok(cfg)
        }
        Cmd::WaveShoot(a) => a.resolve(Command::WaveShoot),
        Cmd::ReducedCycle(a) => a.resolve(Command::ReducedCycle),
        Cmd::Pde(a) => {
            let mut cfg = a.common.base(Command::Pde)?;
            let every = a.grid.t_end / 2.0;
            cfg.pde = Some(a.grid.resolve(cfg.params, if every > 0.0 { every } else { 1.0 })?);
            Ok(cfg)
        }
        Cmd::FrontSpeed(a) => {
            let mut cfg = a.common.base(Command::FrontSpeed)?;
            cfg.pde = Some(a.grid.resolve(cfg.params, 10.0)?);
            let p = cfg.params;
            let (component, default_level) = match a.component {
                Species::U => (Component::U, Some(0.5 * p.gamma)),
                Species::V => (Component::V, p.interior().map(|e| 0.5 * e.v)),
            };
            let level = match a.level.or(default_level) {
                Some(l) => positive("level", l)?,
                None => return Err(usage("--level is required when there is no interior equilibrium")),
            };
            cfg.front = Some(FrontTarget { component, level });
            Ok(cfg)
        }
    }
}
