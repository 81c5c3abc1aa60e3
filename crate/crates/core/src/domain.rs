//! Shared domain types and their validity rules.
//!
//! Units: power kW, energy kWh (MWh only in reports), work in GFLOP
//! equivalents (`F(p)·ΔT`), money USD, prices $/kWh, demand charge $/kW.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::curve::ProcessingCurve;

/// Feasibility tolerance in natural units (kW, work units).
pub const FEAS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl Violation {
    pub fn new(subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// ΔT in hours.
    pub interval_hours: f64,
    /// Intervals per scheduling horizon (one billing day).
    pub horizon_len: usize,
    pub total_intervals: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self {
            interval_hours: 0.25,
            horizon_len: 96,
            total_intervals: 96,
        }
    }
}

impl TimeGrid {
    pub fn days(days: usize) -> Self {
        Self {
            total_intervals: 96 * days,
            ..Self::default()
        }
    }

    pub fn num_horizons(&self) -> usize {
        self.total_intervals / self.horizon_len.max(1)
    }

    pub fn horizon_range(&self, h: usize) -> Range<usize> {
        h * self.horizon_len..(h + 1) * self.horizon_len
    }

    pub fn horizon_of(&self, t: usize) -> usize {
        t / self.horizon_len
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.interval_hours > 0.0 && self.interval_hours.is_finite()) {
            v.push(Violation::new(
                "TimeGrid",
                format!("interval_hours must be > 0, got {}", self.interval_hours),
            ));
        }
        if self.horizon_len == 0 {
            v.push(Violation::new("TimeGrid", "horizon_len must be >= 1"));
        } else if self.total_intervals == 0 || !self.total_intervals.is_multiple_of(self.horizon_len) {
            v.push(Violation::new(
                "TimeGrid",
                format!(
                    "total_intervals {} must be a positive multiple of horizon_len {}",
                    self.total_intervals, self.horizon_len
                ),
            ));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantConfig {
    pub dc_capacity_kw: f64,
    pub renewable_capacity_kw: f64,
    pub dc_power_min_kw: f64,
    pub dc_power_max_kw: f64,
    pub export_max_kw: f64,
    pub import_max_kw: f64,
    /// Floor on renewable self-use + export (`P^D + P^EX − P^IM`); default 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_lower_kw: Option<f64>,
    /// Cap on `P^D + P^EX − P^IM` on top of the available renewable output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_upper_kw: Option<f64>,
}

impl PlantConfig {
    /// Plant with bounds derived from nameplate capacities: the data center
    /// may draw up to its capacity from the grid and export up to the
    /// renewable capacity.
    pub fn with_capacities(dc_capacity_kw: f64, renewable_capacity_kw: f64) -> Self {
        Self {
            dc_capacity_kw,
            renewable_capacity_kw,
            dc_power_min_kw: 0.0,
            dc_power_max_kw: dc_capacity_kw,
            export_max_kw: renewable_capacity_kw,
            import_max_kw: dc_capacity_kw,
            net_lower_kw: None,
            net_upper_kw: None,
        }
    }

    pub fn renewable_kw(&self, capacity_factor: f64) -> f64 {
        capacity_factor * self.renewable_capacity_kw
    }

    /// Bounds on `P^D + P^EX − P^IM` for an interval with the given capacity
    /// factor: `[0, η·Q_R]` unless overridden.
    pub fn net_bounds(&self, capacity_factor: f64) -> (f64, f64) {
        let mut upper = self.renewable_kw(capacity_factor);
        if let Some(cap) = self.net_upper_kw {
            upper = upper.min(cap);
        }
        let lower = self.net_lower_kw.unwrap_or(0.0).min(upper);
        (lower, upper)
    }

    /// Multiplies every capacity and bound by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dc_capacity_kw: self.dc_capacity_kw * factor,
            renewable_capacity_kw: self.renewable_capacity_kw * factor,
            dc_power_min_kw: self.dc_power_min_kw * factor,
            dc_power_max_kw: self.dc_power_max_kw * factor,
            export_max_kw: self.export_max_kw * factor,
            import_max_kw: self.import_max_kw * factor,
            net_lower_kw: self.net_lower_kw.map(|v| v * factor),
            net_upper_kw: self.net_upper_kw.map(|v| v * factor),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let s = "PlantConfig";
        if !(self.dc_capacity_kw > 0.0) {
            v.push(Violation::new(s, "dc_capacity_kw must be > 0"));
        }
        if !(self.renewable_capacity_kw > 0.0) {
            v.push(Violation::new(s, "renewable_capacity_kw must be > 0"));
        }
        if !(0.0 <= self.dc_power_min_kw
            && self.dc_power_min_kw <= self.dc_power_max_kw
            && self.dc_power_max_kw <= self.dc_capacity_kw)
        {
            v.push(Violation::new(
                s,
                format!(
                    "need 0 <= dc_power_min_kw ({}) <= dc_power_max_kw ({}) <= dc_capacity_kw ({})",
                    self.dc_power_min_kw, self.dc_power_max_kw, self.dc_capacity_kw
                ),
            ));
        }
        if !(self.export_max_kw >= 0.0) {
            v.push(Violation::new(s, "export_max_kw must be >= 0"));
        }
        if !(self.import_max_kw >= 0.0) {
            v.push(Violation::new(s, "import_max_kw must be >= 0"));
        }
        if let Some(lo) = self.net_lower_kw {
            if !(lo >= 0.0) {
                v.push(Violation::new(s, "net_lower_kw must be >= 0"));
            }
        }
        if let Some(hi) = self.net_upper_kw {
            if !(hi >= 0.0) {
                v.push(Violation::new(s, "net_upper_kw must be >= 0"));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableTrace {
    pub capacity_factor: Vec<f64>,
}

impl RenewableTrace {
    pub fn violations(&self, grid: &TimeGrid) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.capacity_factor.len() != grid.total_intervals {
            v.push(Violation::new(
                "RenewableTrace",
                format!(
                    "length mismatch: {} values for {} intervals",
                    self.capacity_factor.len(),
                    grid.total_intervals
                ),
            ));
        }
        if let Some((t, x)) = self
            .capacity_factor
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            v.push(Violation::new(
                "RenewableTrace",
                format!("capacity factor {x} at interval {t} outside [0, 1]"),
            ));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    /// Work that must run in its own interval.
    pub nondeferrable: Vec<f64>,
    /// Work due by the end of each horizon.
    pub deferrable_per_horizon: Vec<f64>,
}

impl WorkloadTrace {
    /// Splits a per-interval total workload: each interval keeps
    /// `(1 − fraction)` of its work and each horizon owes `fraction` of its
    /// total as deferrable work.
    pub fn from_total(total: &[f64], deferrable_fraction: f64, grid: &TimeGrid) -> Self {
        let nondeferrable = total
            .iter()
            .map(|w| w * (1.0 - deferrable_fraction))
            .collect();
        let deferrable_per_horizon = total
            .chunks(grid.horizon_len.max(1))
            .map(|c| c.iter().sum::<f64>() * deferrable_fraction)
            .collect();
        Self {
            nondeferrable,
            deferrable_per_horizon,
        }
    }

    /// Per-interval work if deferrable work arrived uniformly over its horizon.
    pub fn uniform_total(&self, grid: &TimeGrid) -> Vec<f64> {
        let len = grid.horizon_len as f64;
        self.nondeferrable
            .iter()
            .enumerate()
            .map(|(t, nd)| {
                nd + self
                    .deferrable_per_horizon
                    .get(grid.horizon_of(t))
                    .copied()
                    .unwrap_or(0.0)
                    / len
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nondeferrable: self.nondeferrable.iter().map(|w| w * factor).collect(),
            deferrable_per_horizon: self
                .deferrable_per_horizon
                .iter()
                .map(|w| w * factor)
                .collect(),
        }
    }

    pub fn violations(&self, grid: &TimeGrid) -> Vec<Violation> {
        let mut v = Vec::new();
        let s = "WorkloadTrace";
        if self.nondeferrable.len() != grid.total_intervals {
            v.push(Violation::new(
                s,
                format!(
                    "length mismatch: {} nondeferrable values for {} intervals",
                    self.nondeferrable.len(),
                    grid.total_intervals
                ),
            ));
        }
        if self.deferrable_per_horizon.len() != grid.num_horizons() {
            v.push(Violation::new(
                s,
                format!(
                    "length mismatch: {} deferrable totals for {} horizons",
                    self.deferrable_per_horizon.len(),
                    grid.num_horizons()
                ),
            ));
        }
        if let Some(t) = self
            .nondeferrable
            .iter()
            .position(|w| !(*w >= 0.0 && w.is_finite()))
        {
            v.push(Violation::new(
                s,
                format!("nondeferrable work at interval {t} must be finite and >= 0"),
            ));
        }
        if let Some(h) = self
            .deferrable_per_horizon
            .iter()
            .position(|w| !(*w >= 0.0 && w.is_finite()))
        {
            v.push(Violation::new(
                s,
                format!("deferrable work of horizon {h} must be finite and >= 0"),
            ));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Wholesale,
    Retail,
}

impl Market {
    pub const ALL: [Market; 2] = [Market::Wholesale, Market::Retail];

    pub fn as_str(self) -> &'static str {
        match self {
            Market::Wholesale => "wholesale",
            Market::Retail => "retail",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Tariff {
    /// One locational marginal price per interval for both directions.
    Wholesale { lmp: Vec<f64> },
    /// Net-metering rates plus a demand charge on the peak import.
    Retail {
        import_rate: Vec<f64>,
        export_rate: Vec<f64>,
        demand_charge: f64,
    },
}

impl Tariff {
    pub fn market(&self) -> Market {
        match self {
            Tariff::Wholesale { .. } => Market::Wholesale,
            Tariff::Retail { .. } => Market::Retail,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tariff::Wholesale { lmp } => lmp.len(),
            Tariff::Retail { import_rate, .. } => import_rate.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn import_price(&self, t: usize) -> f64 {
        match self {
            Tariff::Wholesale { lmp } => lmp[t],
            Tariff::Retail { import_rate, .. } => import_rate[t],
        }
    }

    pub fn export_price(&self, t: usize) -> f64 {
        match self {
            Tariff::Wholesale { lmp } => lmp[t],
            Tariff::Retail { export_rate, .. } => export_rate[t],
        }
    }

    pub fn demand_charge(&self) -> f64 {
        match self {
            Tariff::Wholesale { .. } => 0.0,
            Tariff::Retail { demand_charge, .. } => *demand_charge,
        }
    }

    pub fn slice(&self, range: Range<usize>) -> Tariff {
        match self {
            Tariff::Wholesale { lmp } => Tariff::Wholesale {
                lmp: lmp[range].to_vec(),
            },
            Tariff::Retail {
                import_rate,
                export_rate,
                demand_charge,
            } => Tariff::Retail {
                import_rate: import_rate[range.clone()].to_vec(),
                export_rate: export_rate[range].to_vec(),
                demand_charge: *demand_charge,
            },
        }
    }

    /// Intervals where exporting pays more than importing costs.
    pub fn inverted_intervals(&self) -> Vec<usize> {
        match self {
            Tariff::Wholesale { .. } => Vec::new(),
            Tariff::Retail {
                import_rate,
                export_rate,
                ..
            } => (0..import_rate.len())
                .filter(|&t| export_rate[t] > import_rate[t])
                .collect(),
        }
    }

    pub fn violations(&self, grid: &TimeGrid) -> Vec<Violation> {
        let mut v = Vec::new();
        let s = "Tariff";
        let series: Vec<(&str, &Vec<f64>)> = match self {
            Tariff::Wholesale { lmp } => vec![("lmp", lmp)],
            Tariff::Retail {
                import_rate,
                export_rate,
                demand_charge,
            } => {
                if !(*demand_charge >= 0.0 && demand_charge.is_finite()) {
                    v.push(Violation::new(
                        s,
                        format!("demand_charge must be >= 0, got {demand_charge}"),
                    ));
                }
                vec![("import_rate", import_rate), ("export_rate", export_rate)]
            }
        };
        for (name, xs) in series {
            if xs.len() != grid.total_intervals {
                v.push(Violation::new(
                    s,
                    format!(
                        "length mismatch: {name} has {} values for {} intervals",
                        xs.len(),
                        grid.total_intervals
                    ),
                ));
            }
            if let Some(t) = xs.iter().position(|x| !x.is_finite()) {
                v.push(Violation::new(
                    s,
                    format!("{name} at interval {t} is not finite"),
                ));
            }
        }
        v
    }

    /// Non-fatal observations about the tariff.
    pub fn warnings(&self) -> Vec<Violation> {
        let inverted = self.inverted_intervals();
        if inverted.is_empty() {
            Vec::new()
        } else {
            vec![Violation::new(
                "Tariff",
                format!(
                    "export rate exceeds import rate in {} intervals (first at {})",
                    inverted.len(),
                    inverted[0]
                ),
            )]
        }
    }
}

/// Time-aligned exogenous series for one study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub renewable: RenewableTrace,
    pub workload: WorkloadTrace,
    /// Wholesale real-time price, $/kWh.
    pub lmp: Vec<f64>,
    /// Retail import rate π⁺, $/kWh.
    pub import_rate: Vec<f64>,
    /// Retail export rate π⁻, $/kWh.
    pub export_rate: Vec<f64>,
}

impl TraceSet {
    pub fn tariff(&self, market: Market, demand_charge: f64) -> Tariff {
        match market {
            Market::Wholesale => Tariff::Wholesale {
                lmp: self.lmp.clone(),
            },
            Market::Retail => Tariff::Retail {
                import_rate: self.import_rate.clone(),
                export_rate: self.export_rate.clone(),
                demand_charge,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.renewable.capacity_factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn violations(&self, grid: &TimeGrid) -> Vec<Violation> {
        let mut v = self.renewable.violations(grid);
        v.extend(self.workload.violations(grid));
        for (name, xs) in [
            ("lmp", &self.lmp),
            ("import_rate", &self.import_rate),
            ("export_rate", &self.export_rate),
        ] {
            if xs.len() != grid.total_intervals {
                v.push(Violation::new(
                    "TraceSet",
                    format!(
                        "length mismatch: {name} has {} values for {} intervals",
                        xs.len(),
                        grid.total_intervals
                    ),
                ));
            }
        }
        v
    }
}

/// Static description of the site: time grid, plant limits and processing curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub grid: TimeGrid,
    pub plant: PlantConfig,
    pub curve: ProcessingCurve,
}

impl SystemConfig {
    /// Every violation of the grid, plant, curve, traces and tariff.
    pub fn violations(&self, traces: &TraceSet, tariff: &Tariff) -> Vec<Violation> {
        let mut v = validate_config(&self.plant, &self.grid, traces, tariff);
        v.extend(validate_curve(&self.curve, &self.plant));
        if let Ok(cap) = self.curve.compute_work(
            self.plant.dc_power_max_kw.min(self.curve.max_power()),
            self.grid.interval_hours,
        ) {
            if let Some((t, w)) = traces
                .workload
                .nondeferrable
                .iter()
                .enumerate()
                .find(|(_, w)| **w > cap + FEAS_TOL)
            {
                v.push(Violation::new(
                    "WorkloadTrace",
                    format!(
                        "nondeferrable work {w} at interval {t} exceeds processing capacity {cap}"
                    ),
                ));
            }
        }
        v
    }

    /// Proportional rescaling of plant, curve and nothing else.
    pub fn scaled(&self, factor: f64) -> Result<Self, crate::curve::CurveError> {
        Ok(Self {
            grid: self.grid,
            plant: self.plant.scaled(factor),
            curve: self.curve.scaled(factor)?,
        })
    }
}

/// Checks every type invariant plus cross-type consistency. An empty list
/// means the inputs are usable.
pub fn validate_config(
    plant: &PlantConfig,
    grid: &TimeGrid,
    traces: &TraceSet,
    tariff: &Tariff,
) -> Vec<Violation> {
    let mut v = grid.violations();
    v.extend(plant.violations());
    v.extend(traces.violations(grid));
    v.extend(tariff.violations(grid));
    v
}

/// The curve must cover the plant's power range.
pub fn validate_curve(curve: &ProcessingCurve, plant: &PlantConfig) -> Vec<Violation> {
    if curve.max_power() + FEAS_TOL < plant.dc_power_max_kw {
        vec![Violation::new(
            "ProcessingCurve",
            format!(
                "curve domain ends at {} kW but dc_power_max_kw is {} kW",
                curve.max_power(),
                plant.dc_power_max_kw
            ),
        )]
    } else {
        Vec::new()
    }
}

/// Per-interval decisions for one horizon.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub dc_power_kw: Vec<f64>,
    pub import_kw: Vec<f64>,
    pub export_kw: Vec<f64>,
    pub deferrable_work: Vec<f64>,
}

impl Schedule {
    pub fn zeros(len: usize) -> Self {
        Self {
            dc_power_kw: vec![0.0; len],
            import_kw: vec![0.0; len],
            export_kw: vec![0.0; len],
            deferrable_work: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.dc_power_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dc_power_kw.is_empty()
    }

    /// `Σ_t (π⁻_t·P^EX_t − π⁺_t·P^IM_t)·ΔT` against a tariff slice of the
    /// same length; excludes any demand charge.
    pub fn energy_profit(&self, tariff: &Tariff, dt: f64) -> f64 {
        (0..self.len())
            .map(|t| {
                (tariff.export_price(t) * self.export_kw[t]
                    - tariff.import_price(t) * self.import_kw[t])
                    * dt
            })
            .sum()
    }

    pub fn peak_import(&self) -> f64 {
        self.import_kw.iter().copied().fold(0.0, f64::max)
    }
}

/// Committed decisions over the whole evaluation window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchTimeline {
    pub interval_hours: f64,
    pub horizon_len: usize,
    pub dc_power_kw: Vec<f64>,
    pub import_kw: Vec<f64>,
    pub export_kw: Vec<f64>,
    pub deferrable_work: Vec<f64>,
    /// Work actually processed, `W^ND + W^DF`.
    pub realized_work: Vec<f64>,
    /// Renewable output available on site (`η·Q_R`, zero without colocation).
    pub renewable_kw: Vec<f64>,
    /// Highest import seen so far, inclusive of the interval.
    pub running_peak_kw: Vec<f64>,
}

impl DispatchTimeline {
    pub fn with_capacity(grid: &TimeGrid) -> Self {
        let n = grid.total_intervals;
        Self {
            interval_hours: grid.interval_hours,
            horizon_len: grid.horizon_len,
            dc_power_kw: Vec::with_capacity(n),
            import_kw: Vec::with_capacity(n),
            export_kw: Vec::with_capacity(n),
            deferrable_work: Vec::with_capacity(n),
            realized_work: Vec::with_capacity(n),
            renewable_kw: Vec::with_capacity(n),
            running_peak_kw: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.dc_power_kw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dc_power_kw.is_empty()
    }

    pub fn peak_kw(&self) -> f64 {
        self.running_peak_kw.last().copied().unwrap_or(0.0)
    }

    pub fn push(
        &mut self,
        dc: f64,
        import: f64,
        export: f64,
        deferrable: f64,
        nondeferrable: f64,
        renewable: f64,
    ) {
        let peak = self.peak_kw().max(import);
        self.dc_power_kw.push(dc);
        self.import_kw.push(import);
        self.export_kw.push(export);
        self.deferrable_work.push(deferrable);
        self.realized_work.push(nondeferrable + deferrable);
        self.renewable_kw.push(renewable);
        self.running_peak_kw.push(peak);
    }

    pub fn append_schedule(&mut self, s: &Schedule, nondeferrable: &[f64], renewable_kw: &[f64]) {
        for t in 0..s.len() {
            self.push(
                s.dc_power_kw[t],
                s.import_kw[t],
                s.export_kw[t],
                s.deferrable_work[t],
                nondeferrable[t],
                renewable_kw[t],
            );
        }
    }

    /// Peak import reached by the end of each horizon.
    pub fn horizon_peaks_kw(&self) -> Vec<f64> {
        let len = self.horizon_len.max(1);
        self.running_peak_kw
            .chunks(len)
            .map(|c| c.last().copied().unwrap_or(0.0))
            .collect()
    }

    /// `λ·(M_h − M_{h−1})` per horizon, where `M_h` is the running peak at the
    /// end of horizon `h` and `M_{−1} = 0`.
    pub fn incremental_demand_charges(&self, demand_charge: f64) -> Vec<f64> {
        let mut prev = 0.0;
        self.horizon_peaks_kw()
            .into_iter()
            .map(|m| {
                let inc = demand_charge * (m - prev);
                prev = m;
                inc
            })
            .collect()
    }

    /// Same dispatch with all powers and work multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect();
        Self {
            interval_hours: self.interval_hours,
            horizon_len: self.horizon_len,
            dc_power_kw: s(&self.dc_power_kw),
            import_kw: s(&self.import_kw),
            export_kw: s(&self.export_kw),
            deferrable_work: s(&self.deferrable_work),
            realized_work: s(&self.realized_work),
            renewable_kw: s(&self.renewable_kw),
            running_peak_kw: s(&self.running_peak_kw),
        }
    }
}

/// What a dispatch must satisfy over a contiguous block of intervals.
pub struct FeasibilityFrame<'a> {
    pub plant: &'a PlantConfig,
    pub curve: &'a ProcessingCurve,
    pub interval_hours: f64,
    pub capacity_factor: &'a [f64],
    pub nondeferrable: &'a [f64],
    /// `(interval range, required deferrable work)` per deadline.
    pub deadlines: Vec<(Range<usize>, f64)>,
}

/// Decision vectors to check against a [`FeasibilityFrame`].
pub struct Dispatch<'a> {
    pub dc_power_kw: &'a [f64],
    pub import_kw: &'a [f64],
    pub export_kw: &'a [f64],
    pub deferrable_work: &'a [f64],
}

impl<'a> From<&'a Schedule> for Dispatch<'a> {
    fn from(s: &'a Schedule) -> Self {
        Self {
            dc_power_kw: &s.dc_power_kw,
            import_kw: &s.import_kw,
            export_kw: &s.export_kw,
            deferrable_work: &s.deferrable_work,
        }
    }
}

impl<'a> From<&'a DispatchTimeline> for Dispatch<'a> {
    fn from(s: &'a DispatchTimeline) -> Self {
        Self {
            dc_power_kw: &s.dc_power_kw,
            import_kw: &s.import_kw,
            export_kw: &s.export_kw,
            deferrable_work: &s.deferrable_work,
        }
    }
}

/// Full Schedule invariant suite: bounds, complementarity, net exchange,
/// work capacity and deferrable completion, all at [`FEAS_TOL`].
pub fn check_dispatch(frame: &FeasibilityFrame<'_>, d: &Dispatch<'_>) -> Vec<Violation> {
    let n = frame.nondeferrable.len();
    let mut v = Vec::new();
    let lens = [
        d.dc_power_kw.len(),
        d.import_kw.len(),
        d.export_kw.len(),
        d.deferrable_work.len(),
        frame.capacity_factor.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        v.push(Violation::new(
            "Schedule",
            format!("length mismatch: {lens:?} vs {n} intervals"),
        ));
        return v;
    }
    let p = frame.plant;
    let tol = FEAS_TOL;
    for t in 0..n {
        let (dc, im, ex, wdf) = (
            d.dc_power_kw[t],
            d.import_kw[t],
            d.export_kw[t],
            d.deferrable_work[t],
        );
        let mut fail =
            |what: String| v.push(Violation::new("Schedule", format!("interval {t}: {what}")));
        if dc < p.dc_power_min_kw - tol || dc > p.dc_power_max_kw + tol {
            fail(format!(
                "dc power {dc} outside [{}, {}]",
                p.dc_power_min_kw, p.dc_power_max_kw
            ));
        }
        if im < -tol || im > p.import_max_kw + tol {
            fail(format!("import {im} outside [0, {}]", p.import_max_kw));
        }
        if ex < -tol || ex > p.export_max_kw + tol {
            fail(format!("export {ex} outside [0, {}]", p.export_max_kw));
        }
        if wdf < -tol {
            fail(format!("deferrable work {wdf} negative"));
        }
        if im * ex > tol {
            fail(format!("simultaneous import {im} and export {ex}"));
        }
        let (lo, hi) = p.net_bounds(frame.capacity_factor[t]);
        let net = dc + ex - im;
        if net < lo - tol || net > hi + tol {
            fail(format!("net exchange {net} outside [{lo}, {hi}]"));
        }
        match frame
            .curve
            .compute_work(dc.clamp(0.0, frame.curve.max_power()), frame.interval_hours)
        {
            Ok(cap) => {
                if frame.nondeferrable[t] + wdf > cap + tol {
                    fail(format!(
                        "work {} exceeds capacity {cap}",
                        frame.nondeferrable[t] + wdf
                    ));
                }
            }
            Err(e) => fail(e.to_string()),
        }
    }
    for (range, required) in &frame.deadlines {
        let done: f64 = d.deferrable_work[range.clone()].iter().sum();
        if done < required - tol {
            v.push(Violation::new(
                "Schedule",
                format!("deferrable work {done} in intervals {range:?} short of {required}"),
            ));
        }
    }
    v
}

/// Runs [`check_dispatch`] on a month-long timeline against realized traces.
pub fn check_timeline(
    timeline: &DispatchTimeline,
    plant: &PlantConfig,
    curve: &ProcessingCurve,
    grid: &TimeGrid,
    traces: &TraceSet,
    colocated: bool,
) -> Vec<Violation> {
    let zeros;
    let eta: &[f64] = if colocated {
        &traces.renewable.capacity_factor
    } else {
        zeros = vec![0.0; grid.total_intervals];
        &zeros
    };
    let frame = FeasibilityFrame {
        plant,
        curve,
        interval_hours: grid.interval_hours,
        capacity_factor: eta,
        nondeferrable: &traces.workload.nondeferrable,
        deadlines: (0..grid.num_horizons())
            .map(|h| {
                (
                    grid.horizon_range(h),
                    traces.workload.deferrable_per_horizon[h],
                )
            })
            .collect(),
    };
    check_dispatch(&frame, &timeline.into())
}

/// Monthly figures for one configuration under one market.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SettlementReport {
    pub imported_mwh: f64,
    pub exported_mwh: f64,
    pub self_consumption_mwh: f64,
    pub peak_demand_kw: f64,
    /// Import cost minus export revenue.
    pub energy_cost_usd: f64,
    pub demand_charge_usd: f64,
    pub net_cost_usd: f64,
    /// Relative to the no-colocation configuration; `None` for the baseline
    /// itself or before comparison.
    pub pct_savings_vs_baseline: Option<f64>,
    pub investment_adjusted_savings_usd: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consistent(grid: &TimeGrid) -> (PlantConfig, TraceSet) {
        let n = grid.total_intervals;
        let traces = TraceSet {
            renewable: RenewableTrace {
                capacity_factor: vec![0.5; n],
            },
            workload: WorkloadTrace::from_total(&vec![10.0; n], 0.4, grid),
            lmp: vec![0.05; n],
            import_rate: vec![0.06; n],
            export_rate: vec![0.04; n],
        };
        (PlantConfig::with_capacities(100.0, 150.0), traces)
    }

    #[test]
    fn defaults_validate_clean() {
        let grid = TimeGrid::default();
        let (plant, traces) = consistent(&grid);
        for m in Market::ALL {
            assert!(validate_config(&plant, &grid, &traces, &traces.tariff(m, 12.39)).is_empty());
        }
    }

    #[test]
    fn capacity_factor_out_of_range_is_reported() {
        let grid = TimeGrid::default();
        let (plant, mut traces) = consistent(&grid);
        traces.renewable.capacity_factor[3] = 1.2;
        let v = validate_config(
            &plant,
            &grid,
            &traces,
            &traces.tariff(Market::Wholesale, 0.0),
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].subject, "RenewableTrace");
        assert!(v[0].message.contains("1.2"));
    }

    #[test]
    fn short_price_series_is_a_length_mismatch() {
        let grid = TimeGrid::default();
        let (plant, traces) = consistent(&grid);
        let tariff = Tariff::Wholesale {
            lmp: vec![0.05; 95],
        };
        let v = validate_config(&plant, &grid, &traces, &tariff);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("length mismatch"), "{}", v[0]);
    }

    #[test]
    fn grid_must_tile_into_horizons() {
        let grid = TimeGrid {
            interval_hours: 0.25,
            horizon_len: 96,
            total_intervals: 100,
        };
        assert_eq!(grid.violations().len(), 1);
        let grid = TimeGrid {
            interval_hours: 0.0,
            horizon_len: 0,
            total_intervals: 96,
        };
        assert_eq!(grid.violations().len(), 2);
    }

    #[test]
    fn retail_inversion_is_a_warning_only() {
        let grid = TimeGrid {
            interval_hours: 1.0,
            horizon_len: 2,
            total_intervals: 2,
        };
        let tariff = Tariff::Retail {
            import_rate: vec![0.1, 0.1],
            export_rate: vec![0.05, 0.2],
            demand_charge: 1.0,
        };
        assert!(tariff.violations(&grid).is_empty());
        assert_eq!(tariff.inverted_intervals(), vec![1]);
        assert_eq!(tariff.warnings().len(), 1);
    }

    #[test]
    fn workload_split_preserves_totals() {
        let grid = TimeGrid {
            interval_hours: 0.25,
            horizon_len: 4,
            total_intervals: 8,
        };
        let total = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let w = WorkloadTrace::from_total(&total, 0.25, &grid);
        assert_eq!(w.deferrable_per_horizon, vec![2.5, 6.5]);
        let kept: f64 =
            w.nondeferrable.iter().sum::<f64>() + w.deferrable_per_horizon.iter().sum::<f64>();
        assert!((kept - 36.0).abs() < 1e-12);
        assert!(w.violations(&grid).is_empty());
    }

    #[test]
    fn incremental_charges_telescope() {
        let mut tl = DispatchTimeline {
            horizon_len: 2,
            interval_hours: 1.0,
            ..Default::default()
        };
        for im in [3.0, 5.0, 4.0, 2.0, 7.0, 1.0] {
            tl.push(im, im, 0.0, 0.0, im, 0.0);
        }
        assert_eq!(tl.horizon_peaks_kw(), vec![5.0, 5.0, 7.0]);
        let inc = tl.incremental_demand_charges(2.0);
        assert_eq!(inc, vec![10.0, 0.0, 4.0]);
        assert_eq!(inc.iter().sum::<f64>(), 2.0 * tl.peak_kw());
    }

    #[test]
    fn dispatch_checker_flags_each_violation_kind() {
        let plant = PlantConfig::with_capacities(10.0, 10.0);
        let curve = ProcessingCurve::identity(10.0);
        let eta = [0.5, 0.5];
        let nd = [2.0, 2.0];
        let frame = FeasibilityFrame {
            plant: &plant,
            curve: &curve,
            interval_hours: 1.0,
            capacity_factor: &eta,
            nondeferrable: &nd,
            deadlines: vec![(0..2, 3.0)],
        };
        let ok = Schedule {
            dc_power_kw: vec![5.0, 2.0],
            import_kw: vec![0.0, 0.0],
            export_kw: vec![0.0, 3.0],
            deferrable_work: vec![3.0, 0.0],
        };
        assert!(check_dispatch(&frame, &(&ok).into()).is_empty());

        let mut both = ok.clone();
        both.import_kw[1] = 1.0;
        both.export_kw[1] = 4.0;
        let v = check_dispatch(&frame, &(&both).into());
        assert!(v.iter().any(|x| x.message.contains("simultaneous")));

        let mut over = ok.clone();
        over.export_kw[1] = 4.0;
        assert!(check_dispatch(&frame, &(&over).into())
            .iter()
            .any(|x| x.message.contains("net exchange")));

        let mut short = ok.clone();
        short.deferrable_work[0] = 2.0;
        assert!(check_dispatch(&frame, &(&short).into())
            .iter()
            .any(|x| x.message.contains("short of")));

        let mut overwork = ok;
        overwork.deferrable_work[1] = 1.0;
        assert!(check_dispatch(&frame, &(&overwork).into())
            .iter()
            .any(|x| x.message.contains("exceeds capacity")));
    }
}
