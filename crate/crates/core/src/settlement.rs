//! Monthly billing of a dispatch timeline and configuration comparison.
//!
//! Sign convention: positive cost means the site pays; export revenue
//! enters the energy cost with a negative sign.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{DispatchTimeline, Market, SettlementReport, Tariff, Violation};
use crate::error::{EmsError, Result};

/// Amortized monthly cost of 150 MW of wind, USD.
pub const REFERENCE_AMORTIZED_COST_USD: f64 = 2.46e6;
pub const REFERENCE_RENEWABLE_KW: f64 = 150_000.0;

/// Default amortized renewable cost, scaled linearly with capacity.
pub fn default_amortized_cost(renewable_capacity_kw: f64) -> f64 {
    REFERENCE_AMORTIZED_COST_USD * renewable_capacity_kw / REFERENCE_RENEWABLE_KW
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    NoColocation,
    Colocation,
    Optimal,
}

impl Configuration {
    pub const ALL: [Configuration; 3] = [
        Configuration::NoColocation,
        Configuration::Colocation,
        Configuration::Optimal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Configuration::NoColocation => "no-colocation",
            Configuration::Colocation => "colocation",
            Configuration::Optimal => "optimal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_len(timeline: &DispatchTimeline, n: usize, what: &str) -> Result<()> {
    if timeline.len() != n || timeline.renewable_kw.len() != n {
        return Err(EmsError::Validation(vec![Violation::new(
            "settlement",
            format!(
                "timeline has {} intervals but {what} has {n}",
                timeline.len()
            ),
        )]));
    }
    Ok(())
}

/// Volumes shared by both markets; costs left at zero.
fn volumes(timeline: &DispatchTimeline) -> SettlementReport {
    let dt = timeline.interval_hours;
    let mwh = |v: &[f64]| v.iter().sum::<f64>() * dt / 1000.0;
    let self_kwh: f64 = timeline
        .dc_power_kw
        .iter()
        .zip(&timeline.renewable_kw)
        .map(|(p, r)| p.min(*r).max(0.0))
        .sum();
    SettlementReport {
        imported_mwh: mwh(&timeline.import_kw),
        exported_mwh: mwh(&timeline.export_kw),
        self_consumption_mwh: self_kwh * dt / 1000.0,
        peak_demand_kw: timeline.import_kw.iter().copied().fold(0.0, f64::max),
        ..Default::default()
    }
}

/// Real-time LMP settlement; no demand charge.
pub fn settle_wholesale(timeline: &DispatchTimeline, lmp: &[f64]) -> Result<SettlementReport> {
    check_len(timeline, lmp.len(), "the LMP series")?;
    let dt = timeline.interval_hours;
    let mut r = volumes(timeline);
    r.energy_cost_usd = (0..lmp.len())
        .map(|t| lmp[t] * (timeline.import_kw[t] - timeline.export_kw[t]) * dt)
        .sum();
    r.net_cost_usd = r.energy_cost_usd;
    Ok(r)
}

/// Retail settlement: hourly import/export rates plus a demand charge on
/// the highest single-interval import.
pub fn settle_retail(
    timeline: &DispatchTimeline,
    import_rate: &[f64],
    export_rate: &[f64],
    demand_charge: f64,
) -> Result<SettlementReport> {
    check_len(timeline, import_rate.len(), "the import rate series")?;
    check_len(timeline, export_rate.len(), "the export rate series")?;
    let dt = timeline.interval_hours;
    let mut r = volumes(timeline);
    r.energy_cost_usd = (0..import_rate.len())
        .map(|t| {
            (import_rate[t] * timeline.import_kw[t] - export_rate[t] * timeline.export_kw[t]) * dt
        })
        .sum();
    r.demand_charge_usd = demand_charge * r.peak_demand_kw;
    r.net_cost_usd = r.energy_cost_usd + r.demand_charge_usd;
    Ok(r)
}

pub fn settle(timeline: &DispatchTimeline, tariff: &Tariff) -> Result<SettlementReport> {
    match tariff {
        Tariff::Wholesale { lmp } => settle_wholesale(timeline, lmp),
        Tariff::Retail {
            import_rate,
            export_rate,
            demand_charge,
        } => settle_retail(timeline, import_rate, export_rate, *demand_charge),
    }
}

/// Fills savings fields of every configuration relative to no-colocation.
/// The baseline row keeps `None` in both fields.
pub fn compare_configurations(
    reports: &[(Configuration, SettlementReport)],
    amortized_renewable_cost: f64,
) -> Result<Vec<(Configuration, SettlementReport)>> {
    let base = reports
        .iter()
        .find(|(c, _)| *c == Configuration::NoColocation)
        .map(|(_, r)| r.net_cost_usd)
        .ok_or(EmsError::MissingBaseline)?;
    Ok(reports
        .iter()
        .map(|(c, r)| {
            let mut r = r.clone();
            if *c != Configuration::NoColocation {
                let saved = base - r.net_cost_usd;
                r.pct_savings_vs_baseline = (base != 0.0).then(|| 100.0 * saved / base);
                r.investment_adjusted_savings_usd = Some(saved - amortized_renewable_cost);
            } else {
                r.pct_savings_vs_baseline = None;
                r.investment_adjusted_savings_usd = None;
            }
            (*c, r)
        })
        .collect())
}

/// Percentage by which `cost` undercuts `reference`.
pub fn pct_savings(reference: f64, cost: f64) -> f64 {
    100.0 * (reference - cost) / reference
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub market: Market,
    pub configuration: Configuration,
    #[serde(flatten)]
    pub report: SettlementReport,
}

/// Reports for every simulated market/configuration pair, in run order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn get(&self, market: Market, configuration: Configuration) -> Option<&SettlementReport> {
        self.rows
            .iter()
            .find(|r| r.market == market && r.configuration == configuration)
            .map(|r| &r.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn timeline(import: Vec<f64>, export: Vec<f64>, dt: f64) -> DispatchTimeline {
        let n = import.len();
        let mut tl = DispatchTimeline {
            interval_hours: dt,
            horizon_len: n,
            ..Default::default()
        };
        for t in 0..n {
            tl.push(import[t], import[t], export[t], 0.0, 0.0, export[t]);
        }
        tl
    }

    #[test]
    fn wholesale_import_and_export_mirror() {
        let tl = timeline(vec![1000.0; 4], vec![0.0; 4], 0.25);
        let r = settle_wholesale(&tl, &[0.05; 4]).unwrap();
        assert_abs_diff_eq!(
            r.energy_cost_usd,
            1000.0 * 0.25 * 4.0 * 0.05,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(r.energy_cost_usd, 50.0, epsilon = 1e-12);
        assert_eq!(r.net_cost_usd, r.energy_cost_usd);
        assert_eq!(r.demand_charge_usd, 0.0);
        assert_abs_diff_eq!(r.imported_mwh, 1.0, epsilon = 1e-12);

        let mut tl = timeline(vec![0.0; 4], vec![1000.0; 4], 0.25);
        tl.dc_power_kw = vec![0.0; 4];
        let r = settle_wholesale(&tl, &[0.05; 4]).unwrap();
        assert_abs_diff_eq!(r.energy_cost_usd, -50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.exported_mwh, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_timeline_gives_zero_report() {
        let tl = timeline(vec![0.0; 3], vec![0.0; 3], 0.25);
        assert_eq!(
            settle_wholesale(&tl, &[0.1; 3]).unwrap(),
            SettlementReport::default()
        );
        assert_eq!(
            settle_retail(&tl, &[0.1; 3], &[0.05; 3], 12.39).unwrap(),
            SettlementReport::default()
        );
    }

    #[test]
    fn retail_hand_values() {
        let mut tl = timeline(vec![77_000.0], vec![0.0], 0.25);
        let r = settle_retail(&tl, &[0.0], &[0.0], 12.39).unwrap();
        assert_abs_diff_eq!(r.demand_charge_usd, 954_030.0, epsilon = 1e-6);
        assert_eq!(r.peak_demand_kw, 77_000.0);

        tl = timeline(vec![10.0], vec![0.0], 0.25);
        let r = settle_retail(&tl, &[0.10], &[0.0], 0.0).unwrap();
        assert_abs_diff_eq!(r.net_cost_usd, 0.25, epsilon = 1e-12);

        tl = timeline(vec![0.0, 0.0], vec![50.0, 20.0], 1.0);
        let r = settle_retail(&tl, &[0.1; 2], &[0.04; 2], 12.39).unwrap();
        assert!(r.net_cost_usd < 0.0);
        assert_eq!(r.demand_charge_usd, 0.0);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let tl = timeline(vec![1.0; 3], vec![0.0; 3], 0.25);
        assert!(matches!(
            settle_wholesale(&tl, &[0.1; 2]),
            Err(EmsError::Validation(_))
        ));
        assert!(matches!(
            settle_retail(&tl, &[0.1; 3], &[0.1; 4], 1.0),
            Err(EmsError::Validation(_))
        ));
    }

    #[test]
    fn self_consumption_is_min_of_load_and_renewable() {
        let mut tl = DispatchTimeline {
            interval_hours: 0.5,
            horizon_len: 2,
            ..Default::default()
        };
        tl.push(100.0, 40.0, 0.0, 0.0, 0.0, 60.0);
        tl.push(30.0, 0.0, 50.0, 0.0, 0.0, 80.0);
        let r = settle_wholesale(&tl, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            r.self_consumption_mwh,
            (60.0 + 30.0) * 0.5 / 1000.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn comparison_hand_values() {
        let report = |cost: f64| SettlementReport {
            net_cost_usd: cost,
            ..Default::default()
        };
        let out = compare_configurations(
            &[
                (Configuration::NoColocation, report(100.0)),
                (Configuration::Optimal, report(40.0)),
            ],
            10.0,
        )
        .unwrap();
        assert_eq!(out[0].1.pct_savings_vs_baseline, None);
        assert_abs_diff_eq!(
            out[1].1.pct_savings_vs_baseline.unwrap(),
            60.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            out[1].1.investment_adjusted_savings_usd.unwrap(),
            50.0,
            epsilon = 1e-12
        );

        let same = compare_configurations(
            &[
                (Configuration::NoColocation, report(7.0)),
                (Configuration::Colocation, report(7.0)),
            ],
            10.0,
        )
        .unwrap();
        assert_eq!(same[1].1.pct_savings_vs_baseline, Some(0.0));
        assert_eq!(same[1].1.investment_adjusted_savings_usd, Some(-10.0));

        assert!(matches!(
            compare_configurations(&[(Configuration::Optimal, report(1.0))], 0.0),
            Err(EmsError::MissingBaseline)
        ));
    }

    #[test]
    fn reference_investment_arithmetic() {
        assert_eq!(default_amortized_cost(150_000.0), 2.46e6);
        assert_abs_diff_eq!(default_amortized_cost(75_000.0), 1.23e6, epsilon = 1e-6);
        // Wholesale colocation: 3.82M baseline, 1.19M with renewables.
        let report = |cost: f64| SettlementReport {
            net_cost_usd: cost,
            ..Default::default()
        };
        let out = compare_configurations(
            &[
                (Configuration::NoColocation, report(3.82e6)),
                (Configuration::Colocation, report(1.19e6)),
            ],
            default_amortized_cost(150_000.0),
        )
        .unwrap();
        assert_abs_diff_eq!(
            out[1].1.investment_adjusted_savings_usd.unwrap(),
            0.17e6,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            out[1].1.pct_savings_vs_baseline.unwrap(),
            68.848,
            epsilon = 1e-3
        );
    }

    #[test]
    fn configuration_names_round_trip() {
        for c in Configuration::ALL {
            assert_eq!(Configuration::parse(c.as_str()), Some(c));
        }
        assert_eq!(Configuration::parse("optimal-colocation"), None);
    }
}
