//! Trace CSVs, the scenario config file, and result tables.
//!
//! Trace files have a two-column header `timestamp,value_<unit>`; rows are
//! UTC RFC 3339 timestamps at a constant spacing. Coarser series (hourly
//! retail rates) are step-held onto the interval grid.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::baselines::Arrival;
use crate::domain::{Market, SettlementReport, TimeGrid};
use crate::error::{EmsError, Result};
use crate::mpc::CommitMode;
use crate::settlement::{Configuration, ResultRow, ResultTable};

/// Physical unit carried in a trace file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    /// Per-unit capacity factor.
    Pu,
    UsdPerKwh,
    Gflop,
    Kw,
}

impl Unit {
    pub fn column(self) -> &'static str {
        match self {
            Unit::Pu => "value_pu",
            Unit::UsdPerKwh => "value_usd_per_kwh",
            Unit::Gflop => "value_gflop",
            Unit::Kw => "value_kw",
        }
    }
}

/// A parsed trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub start: DateTime<Utc>,
    pub step: Duration,
    pub unit: Unit,
    pub values: Vec<f64>,
}

impl TraceSeries {
    /// Writes the series back in the canonical file format.
    pub fn to_csv(&self) -> String {
        let mut out = format!("timestamp,{}\n", self.unit.column());
        for (i, v) in self.values.iter().enumerate() {
            let ts = self.start + self.step * i as i32;
            out.push_str(&format!(
                "{},{}\n",
                ts.to_rfc3339_opts(SecondsFormat::Secs, true),
                v
            ));
        }
        out
    }

    /// Step-holds the series onto `grid`. The series step must be a whole
    /// multiple of the grid interval and cover the grid exactly.
    pub fn resample(&self, grid: &TimeGrid, path: &Path) -> Result<Vec<f64>> {
        let grid_secs = (grid.interval_hours * 3600.0).round() as i64;
        let step_secs = self.step.num_seconds();
        let parse = |msg: String| EmsError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg,
        };
        if grid_secs <= 0 || step_secs % grid_secs != 0 {
            return Err(parse(format!(
                "row spacing {step_secs} s is not a multiple of the {grid_secs} s interval"
            )));
        }
        let k = (step_secs / grid_secs) as usize;
        let out: Vec<f64> = self
            .values
            .iter()
            .flat_map(|v| std::iter::repeat_n(*v, k))
            .collect();
        if out.len() != grid.total_intervals {
            return Err(parse(format!(
                "{} rows at {step_secs} s spacing cover {} intervals, grid has {}",
                self.values.len(),
                out.len(),
                grid.total_intervals
            )));
        }
        Ok(out)
    }
}

fn parse_time(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))
}

/// Parses trace CSV text. `path` is only used in error messages.
pub fn parse_trace(text: &str, unit: Unit, path: &Path) -> Result<TraceSeries> {
    let err = |line: usize, msg: String| EmsError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.len() != 2 || &header[0] != "timestamp" {
        return Err(err(1, "header must be `timestamp,value_<unit>`".into()));
    }
    if &header[1] != unit.column() {
        return Err(err(
            1,
            format!(
                "unit mismatch: expected column `{}`, found `{}`",
                unit.column(),
                &header[1]
            ),
        ));
    }
    let mut stamps = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        if rec.len() != 2 {
            return Err(err(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let ts = parse_time(&rec[0]).map_err(|m| err(line, m))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| err(line, format!("bad value `{}`", &rec[1])))?;
        if !v.is_finite() {
            return Err(err(line, format!("value `{}` is not finite", &rec[1])));
        }
        if let Some(&prev) = stamps.last() {
            if ts <= prev {
                let kind = if ts == prev {
                    "duplicate"
                } else {
                    "out-of-order"
                };
                return Err(err(line, format!("{kind} timestamp {}", &rec[0])));
            }
        }
        if stamps.len() >= 2 {
            let step = stamps[1] - stamps[0];
            let gap = ts - *stamps.last().expect("nonempty");
            if gap != step {
                return Err(err(
                    line,
                    format!(
                        "gap: spacing {} s differs from {} s",
                        gap.num_seconds(),
                        step.num_seconds()
                    ),
                ));
            }
        }
        stamps.push(ts);
        values.push(v);
    }
    let Some(&start) = stamps.first() else {
        return Err(err(2, "no data rows".into()));
    };
    let step = if stamps.len() >= 2 {
        stamps[1] - stamps[0]
    } else {
        Duration::zero()
    };
    if step <= Duration::zero() && stamps.len() >= 2 {
        return Err(err(3, "non-positive spacing".into()));
    }
    Ok(TraceSeries {
        start,
        step,
        unit,
        values,
    })
}

pub fn read_trace(path: &Path, unit: Unit) -> Result<TraceSeries> {
    let text = fs::read_to_string(path).map_err(|source| EmsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text, unit, path)
}

pub fn write_trace(path: &Path, series: &TraceSeries) -> Result<()> {
    fs::write(path, series.to_csv()).map_err(|source| EmsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a trace and step-holds it onto the grid; a single-row file is
/// taken to have the grid's own spacing.
pub fn load_series(path: &Path, unit: Unit, grid: &TimeGrid) -> Result<(DateTime<Utc>, Vec<f64>)> {
    let mut s = read_trace(path, unit)?;
    if s.values.len() == 1 {
        s.step = Duration::seconds((grid.interval_hours * 3600.0).round() as i64);
    }
    Ok((s.start, s.resample(grid, path)?))
}

/// Files making up a trace set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracePaths {
    pub capacity_factor: PathBuf,
    pub lmp: PathBuf,
    pub import_rate: PathBuf,
    pub export_rate: PathBuf,
    /// Total work per interval; split using the deferrable fraction.
    pub workload: PathBuf,
}

/// Raw series loaded from [`TracePaths`], all on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTraces {
    pub start: DateTime<Utc>,
    pub capacity_factor: Vec<f64>,
    pub lmp: Vec<f64>,
    pub import_rate: Vec<f64>,
    pub export_rate: Vec<f64>,
    pub total_work: Vec<f64>,
}

/// Loads every trace, resolving relative paths against `base`. All files
/// must start at the same timestamp.
pub fn load_traces(paths: &TracePaths, base: &Path, grid: &TimeGrid) -> Result<RawTraces> {
    let resolve = |p: &Path| {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let files = [
        (&paths.capacity_factor, Unit::Pu),
        (&paths.lmp, Unit::UsdPerKwh),
        (&paths.import_rate, Unit::UsdPerKwh),
        (&paths.export_rate, Unit::UsdPerKwh),
        (&paths.workload, Unit::Gflop),
    ];
    let mut start = None;
    let mut series = Vec::new();
    for (p, unit) in files {
        let path = resolve(p);
        let (s, v) = load_series(&path, unit, grid)?;
        match start {
            None => start = Some(s),
            Some(s0) if s0 != s => {
                return Err(EmsError::Parse {
                    path,
                    line: 2,
                    msg: format!("starts at {s}, other traces start at {s0}"),
                })
            }
            _ => {}
        }
        series.push(v);
    }
    let mut it = series.into_iter();
    let mut next = || it.next().expect("five series");
    Ok(RawTraces {
        start: start.expect("five series"),
        capacity_factor: next(),
        lmp: next(),
        import_rate: next(),
        export_rate: next(),
        total_work: next(),
    })
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_interval_minutes")]
    pub interval_minutes: f64,
    #[serde(default = "default_horizon_intervals")]
    pub horizon_intervals: usize,
    #[serde(default = "default_days")]
    pub days: usize,
}

fn default_interval_minutes() -> f64 {
    15.0
}
fn default_horizon_intervals() -> usize {
    96
}
fn default_days() -> usize {
    31
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            interval_minutes: 15.0,
            horizon_intervals: 96,
            days: 31,
        }
    }
}

impl GridSection {
    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            interval_hours: self.interval_minutes / 60.0,
            horizon_len: self.horizon_intervals,
            total_intervals: self.horizon_intervals * self.days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub dc_capacity_kw: f64,
    pub renewable_capacity_kw: f64,
    #[serde(default)]
    pub dc_power_min_kw: f64,
    /// Defaults to the capacity.
    pub dc_power_max_kw: Option<f64>,
    /// Defaults to the data-center capacity.
    pub import_max_kw: Option<f64>,
    /// Defaults to the renewable capacity.
    pub export_max_kw: Option<f64>,
    pub net_lower_kw: Option<f64>,
    pub net_upper_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    /// `[[power_kw, rate], ...]` starting at `[0, 0]`. Defaults to a
    /// two-segment curve: unit slope up to 60 % of capacity, then slope 0.6.
    pub breakpoints: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSection {
    #[serde(default = "default_demand_charge")]
    pub demand_charge_usd_per_kw: f64,
}

fn default_demand_charge() -> f64 {
    12.39
}

impl Default for TariffSection {
    fn default() -> Self {
        Self {
            demand_charge_usd_per_kw: default_demand_charge(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    #[serde(default = "default_fraction")]
    pub deferrable_fraction: f64,
}

fn default_fraction() -> f64 {
    0.4
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            deferrable_fraction: default_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_profile")]
    pub profile: String,
    #[serde(default = "default_true")]
    pub negative_spikes: bool,
}

fn default_profile() -> String {
    "windy".into()
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    #[default]
    PerfectForesight,
    Persistence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSection {
    #[serde(default)]
    pub commit_mode: CommitMode,
    /// Defaults to the horizon length.
    pub lookahead: Option<usize>,
    #[serde(default)]
    pub forecaster: ForecasterKind,
}

impl Default for MpcSection {
    fn default() -> Self {
        Self {
            commit_mode: CommitMode::CommitFullHorizon,
            lookahead: None,
            forecaster: ForecasterKind::PerfectForesight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default)]
    pub arrival: Arrival,
}

/// Scenario config file (TOML). Exactly one of `traces` and `synthetic`
/// must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Monthly amortized renewable cost; defaults to $2.46M per 150 MW.
    pub amortized_renewable_cost_usd: Option<f64>,
    #[serde(default)]
    pub grid: GridSection,
    pub plant: PlantSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default)]
    pub tariff: TariffSection,
    #[serde(default)]
    pub workload: WorkloadSection,
    pub traces: Option<TracePaths>,
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub mpc: MpcSection,
    #[serde(default)]
    pub baseline: BaselineSection,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            EmsError::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        match (&cfg.traces, &cfg.synthetic) {
            (Some(_), Some(_)) => Err(EmsError::Config(
                "give either [traces] or [synthetic], not both".into(),
            )),
            (None, None) => Err(EmsError::Config(
                "missing [traces] or [synthetic] section".into(),
            )),
            _ => Ok(cfg),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| EmsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

// ---------------------------------------------------------------- results

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = EmsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(EmsError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "market",
    "configuration",
    "imported_mwh",
    "exported_mwh",
    "self_consumption_mwh",
    "peak_demand_kw",
    "energy_cost_usd",
    "demand_charge_usd",
    "net_cost_usd",
    "pct_savings_vs_baseline",
    "investment_adjusted_savings_usd",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn results_to_csv(table: &ResultTable) -> String {
    let mut out = RESULT_COLUMNS.join(",");
    out.push('\n');
    for row in &table.rows {
        let r = &row.report;
        let fields = [
            row.market.as_str().to_string(),
            row.configuration.as_str().to_string(),
            r.imported_mwh.to_string(),
            r.exported_mwh.to_string(),
            r.self_consumption_mwh.to_string(),
            r.peak_demand_kw.to_string(),
            r.energy_cost_usd.to_string(),
            r.demand_charge_usd.to_string(),
            r.net_cost_usd.to_string(),
            opt(r.pct_savings_vs_baseline),
            opt(r.investment_adjusted_savings_usd),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn results_to_json(table: &ResultTable) -> String {
    let mut nested: BTreeMap<&str, BTreeMap<&str, &SettlementReport>> = BTreeMap::new();
    for row in &table.rows {
        nested
            .entry(row.market.as_str())
            .or_default()
            .insert(row.configuration.as_str(), &row.report);
    }
    let mut s = serde_json::to_string_pretty(&nested).expect("reports serialize");
    s.push('\n');
    s
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by_key(|r| (r.market, r.configuration));
}

pub fn results_from_csv(text: &str, path: &Path) -> Result<ResultTable> {
    let err = |line: usize, msg: String| EmsError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(err(
            1,
            format!("expected columns {}", RESULT_COLUMNS.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| err(line, e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse().map_err(|_| {
                err(
                    line,
                    format!("bad number `{}` in {}", &rec[k], RESULT_COLUMNS[k]),
                )
            })
        };
        let opt_num = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        let market = match &rec[0] {
            "wholesale" => Market::Wholesale,
            "retail" => Market::Retail,
            m => return Err(err(line, format!("unknown market `{m}`"))),
        };
        let configuration = Configuration::parse(&rec[1])
            .ok_or_else(|| err(line, format!("unknown configuration `{}`", &rec[1])))?;
        rows.push(ResultRow {
            market,
            configuration,
            report: SettlementReport {
                imported_mwh: num(2)?,
                exported_mwh: num(3)?,
                self_consumption_mwh: num(4)?,
                peak_demand_kw: num(5)?,
                energy_cost_usd: num(6)?,
                demand_charge_usd: num(7)?,
                net_cost_usd: num(8)?,
                pct_savings_vs_baseline: opt_num(9)?,
                investment_adjusted_savings_usd: opt_num(10)?,
            },
        });
    }
    Ok(ResultTable { rows })
}

pub fn results_from_json(text: &str, path: &Path) -> Result<ResultTable> {
    let nested: BTreeMap<Market, BTreeMap<Configuration, SettlementReport>> =
        serde_json::from_str(text).map_err(|e| EmsError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
    let mut rows: Vec<ResultRow> = nested
        .into_iter()
        .flat_map(|(market, m)| {
            m.into_iter().map(move |(configuration, report)| ResultRow {
                market,
                configuration,
                report,
            })
        })
        .collect();
    sort_rows(&mut rows);
    Ok(ResultTable { rows })
}

pub fn render_results(table: &ResultTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => results_to_csv(table),
        OutputFormat::Json => results_to_json(table),
    }
}

pub fn write_results(table: &ResultTable, path: &Path, format: OutputFormat) -> Result<()> {
    fs::write(path, render_results(table, format)).map_err(|source| EmsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_results(path: &Path, format: OutputFormat) -> Result<ResultTable> {
    let text = fs::read_to_string(path).map_err(|source| EmsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        OutputFormat::Csv => results_from_csv(&text, path),
        OutputFormat::Json => results_from_json(&text, path),
    }
}
