//! A fully specified study: site, traces, tariffs and run policies. Every
//! timeline produced here is checked against the realized traces before it
//! is settled.

use std::path::Path;

use crate::baselines::{simulate_colocation_greedy, simulate_no_colocation, Arrival};
use crate::curve::ProcessingCurve;
use crate::domain::{
    check_timeline, DispatchTimeline, Market, PlantConfig, RenewableTrace, SystemConfig, Tariff,
    TraceSet, WorkloadTrace,
};
use crate::error::{EmsError, Result};
use crate::mpc::{perfect_foresight, persistence_forecast, run_mpc, MpcPolicy};
use crate::settlement::{
    compare_configurations, default_amortized_cost, settle, Configuration, ResultRow, ResultTable,
};
use crate::synth::{synth_traces, SynthOptions};
use crate::trace_io::{load_traces, ConfigFile, ForecasterKind, RawTraces};

/// Default processing curve for a data center of the given capacity:
/// unit efficiency up to 60 % load, 0.6 above.
pub fn default_curve(dc_capacity_kw: f64) -> Result<ProcessingCurve> {
    let q = dc_capacity_kw;
    Ok(ProcessingCurve::from_breakpoints(&[
        (0.0, 0.0),
        (0.6 * q, 0.6 * q),
        (q, 0.84 * q),
    ])?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sys: SystemConfig,
    pub raw: RawTraces,
    pub deferrable_fraction: f64,
    pub demand_charge: f64,
    pub amortized_cost: f64,
    pub policy: MpcPolicy,
    pub forecaster: ForecasterKind,
    pub arrival: Arrival,
}

impl RawTraces {
    /// Splits total work with `fraction` deferrable per horizon.
    pub fn trace_set(&self, fraction: f64, sys: &SystemConfig) -> TraceSet {
        TraceSet {
            renewable: RenewableTrace {
                capacity_factor: self.capacity_factor.clone(),
            },
            workload: WorkloadTrace::from_total(&self.total_work, fraction, &sys.grid),
            lmp: self.lmp.clone(),
            import_rate: self.import_rate.clone(),
            export_rate: self.export_rate.clone(),
        }
    }
}

impl Scenario {
    /// Builds a scenario from a parsed config; trace paths resolve against
    /// `base_dir`.
    pub fn from_config(cfg: &ConfigFile, base_dir: &Path) -> Result<Self> {
        let grid = cfg.grid.grid();
        let p = &cfg.plant;
        let plant = PlantConfig {
            dc_capacity_kw: p.dc_capacity_kw,
            renewable_capacity_kw: p.renewable_capacity_kw,
            dc_power_min_kw: p.dc_power_min_kw,
            dc_power_max_kw: p.dc_power_max_kw.unwrap_or(p.dc_capacity_kw),
            export_max_kw: p.export_max_kw.unwrap_or(p.renewable_capacity_kw),
            import_max_kw: p.import_max_kw.unwrap_or(p.dc_capacity_kw),
            net_lower_kw: p.net_lower_kw,
            net_upper_kw: p.net_upper_kw,
        };
        let v = plant.violations();
        if !v.is_empty() {
            return Err(EmsError::Validation(v));
        }
        let curve = match &cfg.curve.breakpoints {
            Some(b) => ProcessingCurve::from_breakpoints(
                &b.iter().map(|[p, w]| (*p, *w)).collect::<Vec<_>>(),
            )?,
            None => default_curve(plant.dc_capacity_kw)?,
        };
        let sys = SystemConfig { grid, plant, curve };
        let raw = match (&cfg.traces, &cfg.synthetic) {
            (Some(paths), _) => load_traces(paths, base_dir, &grid)?,
            (None, Some(s)) => synth_traces(
                s.seed,
                &grid,
                SynthOptions {
                    profile: s.profile.parse()?,
                    negative_spikes: s.negative_spikes,
                },
                &sys.plant,
                &sys.curve,
            )?,
            (None, None) => {
                return Err(EmsError::Config(
                    "missing [traces] or [synthetic] section".into(),
                ))
            }
        };
        let f = cfg.workload.deferrable_fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(EmsError::Config(format!(
                "deferrable_fraction {f} outside [0, 1]"
            )));
        }
        Ok(Self {
            amortized_cost: cfg
                .amortized_renewable_cost_usd
                .unwrap_or_else(|| default_amortized_cost(sys.plant.renewable_capacity_kw)),
            sys,
            raw,
            deferrable_fraction: f,
            demand_charge: cfg.tariff.demand_charge_usd_per_kw,
            policy: MpcPolicy {
                commit_mode: cfg.mpc.commit_mode,
                lookahead: cfg.mpc.lookahead.unwrap_or(grid.horizon_len),
            },
            forecaster: cfg.mpc.forecaster,
            arrival: cfg.baseline.arrival,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = ConfigFile::load(path)?;
        Self::from_config(&cfg, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn traces(&self) -> TraceSet {
        self.raw.trace_set(self.deferrable_fraction, &self.sys)
    }

    pub fn tariff(&self, market: Market) -> Tariff {
        let d = self.demand_charge;
        match market {
            Market::Wholesale => Tariff::Wholesale {
                lmp: self.raw.lmp.clone(),
            },
            Market::Retail => Tariff::Retail {
                import_rate: self.raw.import_rate.clone(),
                export_rate: self.raw.export_rate.clone(),
                demand_charge: d,
            },
        }
    }

    pub fn with_deferrable_fraction(&self, fraction: f64) -> Self {
        Self {
            deferrable_fraction: fraction,
            ..self.clone()
        }
    }

    /// Sets renewable capacity to `ratio × dc capacity`; the export limit and
    /// amortized cost follow proportionally.
    pub fn with_capacity_ratio(&self, ratio: f64) -> Self {
        let mut s = self.clone();
        let old = s.sys.plant.renewable_capacity_kw;
        let new = ratio * s.sys.plant.dc_capacity_kw;
        let k = new / old;
        s.sys.plant.renewable_capacity_kw = new;
        s.sys.plant.export_max_kw *= k;
        s.sys.plant.net_upper_kw = s.sys.plant.net_upper_kw.map(|v| v * k);
        s.amortized_cost *= k;
        s
    }

    /// Proportional rescaling of capacities, limits, curve and workload.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut s = self.clone();
        s.sys = self.sys.scaled(c)?;
        s.raw.total_work = self.raw.total_work.iter().map(|w| w * c).collect();
        s.amortized_cost *= c;
        Ok(s)
    }

    /// Runs one configuration and checks the result against every Schedule
    /// invariant on the realized traces.
    pub fn run(&self, market: Market, configuration: Configuration) -> Result<DispatchTimeline> {
        let traces = self.traces();
        let tariff = self.tariff(market);
        let timeline = match configuration {
            Configuration::NoColocation => {
                simulate_no_colocation(&self.sys, &traces, self.arrival)?
            }
            Configuration::Colocation => {
                simulate_colocation_greedy(&self.sys, &traces, self.arrival)?
            }
            Configuration::Optimal => match self.forecaster {
                ForecasterKind::PerfectForesight => run_mpc(
                    &self.sys,
                    &traces,
                    &tariff,
                    &perfect_foresight(),
                    &self.policy,
                )?,
                ForecasterKind::Persistence => {
                    // Seeded with the first realized interval.
                    let seed = persistence_forecast(
                        &traces.renewable.capacity_factor[..1],
                        &traces.workload.nondeferrable[..1],
                        &tariff.slice(0..1),
                    )?;
                    run_mpc(&self.sys, &traces, &tariff, &seed, &self.policy)?
                }
            },
        };
        let colocated = configuration != Configuration::NoColocation;
        let v = check_timeline(
            &timeline,
            &self.sys.plant,
            &self.sys.curve,
            &self.sys.grid,
            &traces,
            colocated,
        );
        if !v.is_empty() {
            return Err(EmsError::InfeasibleDispatch(v));
        }
        Ok(timeline)
    }

    /// Settles the requested configurations in each market. The
    /// no-colocation baseline is always run so savings can be filled in,
    /// but only requested rows are returned.
    pub fn simulate(
        &self,
        markets: &[Market],
        configurations: &[Configuration],
    ) -> Result<ResultTable> {
        let mut rows = Vec::new();
        for &market in markets {
            let tariff = self.tariff(market);
            let mut reports = Vec::new();
            for c in Configuration::ALL {
                if c == Configuration::NoColocation || configurations.contains(&c) {
                    let tl = self.run(market, c)?;
                    reports.push((c, settle(&tl, &tariff)?));
                }
            }
            for (configuration, report) in compare_configurations(&reports, self.amortized_cost)? {
                if configurations.contains(&configuration) {
                    rows.push(ResultRow {
                        market,
                        configuration,
                        report,
                    });
                }
            }
        }
        Ok(ResultTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(days: usize) -> ConfigFile {
        let text = format!(
            "[grid]\ndays = {days}\n[plant]\ndc_capacity_kw = 1000.0\nrenewable_capacity_kw = 1500.0\n[synthetic]\nseed = 4\n"
        );
        ConfigFile::parse(&text, Path::new("c.toml")).unwrap()
    }

    #[test]
    fn defaults_follow_capacities() {
        let s = Scenario::from_config(&cfg(1), Path::new(".")).unwrap();
        assert_eq!(s.sys.plant.import_max_kw, 1000.0);
        assert_eq!(s.sys.plant.export_max_kw, 1500.0);
        assert_eq!(
            s.sys.curve.breakpoints(),
            vec![(0.0, 0.0), (600.0, 600.0), (1000.0, 840.0)]
        );
        assert!((s.amortized_cost - 24_600.0).abs() < 1e-6);
        assert_eq!(s.policy.lookahead, 96);
    }

    #[test]
    fn simulate_all_configurations() {
        let s = Scenario::from_config(&cfg(2), Path::new(".")).unwrap();
        let t = s.simulate(&Market::ALL, &Configuration::ALL).unwrap();
        assert_eq!(t.rows.len(), 6);
        for m in Market::ALL {
            let base = t.get(m, Configuration::NoColocation).unwrap();
            let colo = t.get(m, Configuration::Colocation).unwrap();
            let opt = t.get(m, Configuration::Optimal).unwrap();
            assert!(opt.net_cost_usd <= colo.net_cost_usd + 1e-6);
            assert!(base.pct_savings_vs_baseline.is_none());
            assert!(opt.pct_savings_vs_baseline.is_some());
        }
        let only = s
            .simulate(&[Market::Retail], &[Configuration::Optimal])
            .unwrap();
        assert_eq!(only.rows.len(), 1);
        assert_eq!(
            only.rows[0].report,
            *t.get(Market::Retail, Configuration::Optimal).unwrap()
        );
    }

    #[test]
    fn capacity_ratio_scales_renewables_only() {
        let s = Scenario::from_config(&cfg(1), Path::new(".")).unwrap();
        let r = s.with_capacity_ratio(0.75);
        assert_eq!(r.sys.plant.renewable_capacity_kw, 750.0);
        assert_eq!(r.sys.plant.export_max_kw, 750.0);
        assert_eq!(r.sys.plant.dc_capacity_kw, 1000.0);
        assert!((r.amortized_cost - 12_300.0).abs() < 1e-6);
    }
}
