//! Savings sweeps over the deferrable fraction and the renewable-to-data
//! center capacity ratio. Every point reruns the full study for all three
//! configurations; points run in parallel and come back in input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Market, Violation};
use crate::error::{EmsError, Result};
use crate::scenario::Scenario;
use crate::settlement::{pct_savings, settle, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    Deferrable,
    Ratio,
}

/// Monthly net cost of each configuration in one market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    pub no_colocation: f64,
    pub colocation: f64,
    pub optimal: f64,
}

impl Costs {
    pub fn optimal_vs_no_colocation(&self) -> f64 {
        pct_savings(self.no_colocation, self.optimal)
    }
    pub fn optimal_vs_colocation(&self) -> f64 {
        pct_savings(self.colocation, self.optimal)
    }
}

/// One sweep point; a market whose runs failed is `None` (a gap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub wholesale: Option<Costs>,
    pub retail: Option<Costs>,
}

impl SweepPoint {
    pub fn costs(&self, market: Market) -> Option<&Costs> {
        match market {
            Market::Wholesale => self.wholesale.as_ref(),
            Market::Retail => self.retail.as_ref(),
        }
    }
}

/// Which reference configuration a savings series is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    NoColocation,
    Colocation,
}

fn market_costs(s: &Scenario, market: Market, x: f64) -> Option<Costs> {
    let tariff = s.tariff(market);
    let cost =
        |c: Configuration| -> Result<f64> { Ok(settle(&s.run(market, c)?, &tariff)?.net_cost_usd) };
    let run = || -> Result<Costs> {
        Ok(Costs {
            no_colocation: cost(Configuration::NoColocation)?,
            colocation: cost(Configuration::Colocation)?,
            optimal: cost(Configuration::Optimal)?,
        })
    };
    match run() {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("sweep point x={x} {market}: {e}; recorded as a gap");
            None
        }
    }
}

fn run_points(points: Vec<(f64, Scenario)>) -> Vec<SweepPoint> {
    points
        .into_par_iter()
        .map(|(x, s)| SweepPoint {
            x,
            wholesale: market_costs(&s, Market::Wholesale, x),
            retail: market_costs(&s, Market::Retail, x),
        })
        .collect()
}

pub fn sweep_deferrable_fraction(base: &Scenario, fractions: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(EmsError::Validation(vec![Violation::new(
            "sweep",
            format!("fraction {f} outside [0, 1]"),
        )]));
    }
    Ok(run_points(
        fractions
            .iter()
            .map(|&f| (f, base.with_deferrable_fraction(f)))
            .collect(),
    ))
}

pub fn sweep_capacity_ratio(base: &Scenario, ratios: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(EmsError::Validation(vec![Violation::new(
            "sweep",
            format!("ratio {r} must be > 0"),
        )]));
    }
    Ok(run_points(
        ratios
            .iter()
            .map(|&r| (r, base.with_capacity_ratio(r)))
            .collect(),
    ))
}

pub fn run_sweep(base: &Scenario, kind: SweepKind, points: &[f64]) -> Result<Vec<SweepPoint>> {
    match kind {
        SweepKind::Deferrable => sweep_deferrable_fraction(base, points),
        SweepKind::Ratio => sweep_capacity_ratio(base, points),
    }
}

/// Default sweep points.
pub fn default_points(kind: SweepKind) -> Vec<f64> {
    match kind {
        SweepKind::Deferrable => vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        SweepKind::Ratio => vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
    }
}

/// Figure-ready CSV `x,wholesale_savings_pct,retail_savings_pct`; gaps are
/// empty cells.
pub fn series_csv(points: &[SweepPoint], reference: Reference) -> String {
    let mut out = String::from("x,wholesale_savings_pct,retail_savings_pct\n");
    for p in points {
        let cell = |c: Option<&Costs>| {
            c.map(|c| match reference {
                Reference::NoColocation => c.optimal_vs_no_colocation(),
                Reference::Colocation => c.optimal_vs_colocation(),
            })
            .map(|v| v.to_string())
            .unwrap_or_default()
        };
        out.push_str(&format!(
            "{},{},{}\n",
            p.x,
            cell(p.wholesale.as_ref()),
            cell(p.retail.as_ref())
        ));
    }
    out
}
