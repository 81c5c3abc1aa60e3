//! Command-line interface of the `rcdc` binary.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 solver or
//! dispatch failure, 64 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::domain::Market;
use crate::error::{EmsError, Result};
use crate::scenario::{default_curve, Scenario};
use crate::sensitivity::{default_points, run_sweep, series_csv, Reference, SweepKind};
use crate::settlement::Configuration;
use crate::synth::{synth_traces, Profile, SynthOptions};
use crate::trace_io::{
    render_results, write_trace, ConfigFile, OutputFormat, PlantSection, TracePaths, TraceSeries,
    Unit,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_SOLVER: u8 = 2;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "rcdc",
    version,
    about = "Energy management for a renewable-colocated data center"
)]
pub struct Cli {
    /// Log verbosity: -v info, -vv debug (per-interval MPC lines).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one month and settle it.
    Simulate(SimulateArgs),
    /// Savings curves over the deferrable fraction or the capacity ratio.
    Sweep(SweepArgs),
    /// Write synthetic trace CSVs and a matching config file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarketArg {
    Wholesale,
    Retail,
    Both,
}

impl MarketArg {
    pub fn markets(self) -> Vec<Market> {
        match self {
            MarketArg::Wholesale => vec![Market::Wholesale],
            MarketArg::Retail => vec![Market::Retail],
            MarketArg::Both => Market::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    NoColocation,
    Colocation,
    Optimal,
    All,
}

impl ModeArg {
    pub fn configurations(self) -> Vec<Configuration> {
        match self {
            ModeArg::NoColocation => vec![Configuration::NoColocation],
            ModeArg::Colocation => vec![Configuration::Colocation],
            ModeArg::Optimal => vec![Configuration::Optimal],
            ModeArg::All => Configuration::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario config file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Override the synthetic trace seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let mut cfg = ConfigFile::load(&self.config)?;
        if let Some(seed) = self.seed {
            match cfg.synthetic.as_mut() {
                Some(s) => s.seed = seed,
                None => return Err(EmsError::Config("--seed needs a [synthetic] config".into())),
            }
        }
        Scenario::from_config(&cfg, self.config.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub market: MarketArg,
    #[arg(long, value_enum, default_value = "all")]
    pub mode: ModeArg,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json; defaults to the output file extension, else csv.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub sweep: SweepKindArg,
    /// Comma-separated sweep points.
    #[arg(long, value_delimiter = ',')]
    pub points: Option<Vec<f64>>,
    /// Savings vs no-colocation go here; vs colocation go to a sibling
    /// `<stem>_vs_colocation.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKindArg {
    Deferrable,
    Ratio,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// windy, diurnal-solar or flat.
    #[arg(long, default_value = "windy")]
    pub profile: String,
    #[arg(long, default_value_t = 31)]
    pub days: usize,
    #[arg(long, default_value_t = 100_000.0)]
    pub dc_capacity_kw: f64,
    #[arg(long, default_value_t = 150_000.0)]
    pub renewable_capacity_kw: f64,
    #[arg(long)]
    pub no_negative_spikes: bool,
}

/// Exit code for a library error.
pub fn exit_code(e: &EmsError) -> u8 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_INVALID
    }
}

/// Runs a parsed command; human-readable output goes to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Sweep(a) => sweep(a, stdout),
        Command::Synth(a) => synth(a, stdout),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EmsError + '_ {
    move |source| EmsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn simulate(a: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let format = match (&a.format, &a.out) {
        (Some(f), _) => f.parse()?,
        (None, Some(p))
            if p.extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("json")) =>
        {
            OutputFormat::Json
        }
        _ => OutputFormat::Csv,
    };
    let scenario = a.scenario.load()?;
    log::info!(
        "simulating {} intervals ({} horizons)",
        scenario.sys.grid.total_intervals,
        scenario.sys.grid.num_horizons()
    );
    let table = scenario.simulate(&a.market.markets(), &a.mode.configurations())?;
    let text = render_results(&table, format);
    match &a.out {
        Some(p) => fs::write(p, text).map_err(io_err(p)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(io_err(Path::new("<stdout>"))),
    }
}

/// `dir/name.csv` → `dir/name_vs_colocation.csv`.
pub fn sibling_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_vs_colocation.{ext}"))
}

fn sweep(a: &SweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let kind = match a.sweep {
        SweepKindArg::Deferrable => SweepKind::Deferrable,
        SweepKindArg::Ratio => SweepKind::Ratio,
    };
    let points = a.points.clone().unwrap_or_else(|| default_points(kind));
    let scenario = a.scenario.load()?;
    let series = run_sweep(&scenario, kind, &points)?;
    let second = sibling_path(&a.out);
    fs::write(&a.out, series_csv(&series, Reference::NoColocation)).map_err(io_err(&a.out))?;
    fs::write(&second, series_csv(&series, Reference::Colocation)).map_err(io_err(&second))?;
    let gaps = series
        .iter()
        .filter(|p| p.wholesale.is_none() || p.retail.is_none())
        .count();
    writeln!(
        stdout,
        "wrote {} and {} ({} points, {gaps} with gaps)",
        a.out.display(),
        second.display(),
        series.len()
    )
    .map_err(io_err(Path::new("<stdout>")))
}

fn synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let profile: Profile = a.profile.parse()?;
    let cfg = ConfigFile {
        amortized_renewable_cost_usd: None,
        grid: crate::trace_io::GridSection {
            days: a.days,
            ..Default::default()
        },
        plant: PlantSection {
            dc_capacity_kw: a.dc_capacity_kw,
            renewable_capacity_kw: a.renewable_capacity_kw,
            dc_power_min_kw: 0.0,
            dc_power_max_kw: None,
            import_max_kw: None,
            export_max_kw: None,
            net_lower_kw: None,
            net_upper_kw: None,
        },
        curve: Default::default(),
        tariff: Default::default(),
        workload: Default::default(),
        traces: Some(TracePaths {
            capacity_factor: "capacity_factor.csv".into(),
            lmp: "lmp.csv".into(),
            import_rate: "import_rate.csv".into(),
            export_rate: "export_rate.csv".into(),
            workload: "workload.csv".into(),
        }),
        synthetic: None,
        mpc: Default::default(),
        baseline: Default::default(),
    };
    let grid = cfg.grid.grid();
    let plant =
        crate::domain::PlantConfig::with_capacities(a.dc_capacity_kw, a.renewable_capacity_kw);
    let v = plant.violations();
    if !v.is_empty() {
        return Err(EmsError::Validation(v));
    }
    let curve = default_curve(a.dc_capacity_kw)?;
    let raw = synth_traces(
        a.seed,
        &grid,
        SynthOptions {
            profile,
            negative_spikes: !a.no_negative_spikes,
        },
        &plant,
        &curve,
    )?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let step = chrono::Duration::seconds((grid.interval_hours * 3600.0).round() as i64);
    let hourly = |v: &[f64]| -> Vec<f64> {
        let k = (1.0 / grid.interval_hours).round().max(1.0) as usize;
        v.iter().step_by(k).copied().collect()
    };
    let files: [(&str, Unit, chrono::Duration, Vec<f64>); 5] = [
        (
            "capacity_factor.csv",
            Unit::Pu,
            step,
            raw.capacity_factor.clone(),
        ),
        ("lmp.csv", Unit::UsdPerKwh, step, raw.lmp.clone()),
        (
            "import_rate.csv",
            Unit::UsdPerKwh,
            chrono::Duration::hours(1),
            hourly(&raw.import_rate),
        ),
        (
            "export_rate.csv",
            Unit::UsdPerKwh,
            chrono::Duration::hours(1),
            hourly(&raw.export_rate),
        ),
        ("workload.csv", Unit::Gflop, step, raw.total_work.clone()),
    ];
    for (name, unit, step, values) in files {
        write_trace(
            &a.out.join(name),
            &TraceSeries {
                start: raw.start,
                step,
                unit,
                values,
            },
        )?;
    }
    let cfg_path = a.out.join("scenario.toml");
    fs::write(&cfg_path, cfg.to_toml()).map_err(io_err(&cfg_path))?;
    writeln!(
        stdout,
        "wrote {} ({} profile, seed {})",
        cfg_path.display(),
        profile,
        a.seed
    )
    .map_err(io_err(Path::new("<stdout>")))
}
