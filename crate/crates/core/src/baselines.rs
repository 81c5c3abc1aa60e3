//! Configurations without workload scheduling: grid-only, and colocated
//! renewables with a self-consumption-first dispatch.

use serde::{Deserialize, Serialize};

use crate::domain::{DispatchTimeline, SystemConfig, TraceSet, FEAS_TOL};
use crate::error::{EmsError, Result};

/// When deferrable work shows up within its horizon. Baselines run work as
/// soon as it arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arrival {
    /// Equal share in every interval of the horizon.
    #[default]
    Uniform,
    /// As early as processing capacity allows.
    FrontLoaded,
}

/// Deferrable work executed in each interval under the arrival profile.
pub fn deferrable_arrivals(
    sys: &SystemConfig,
    traces: &TraceSet,
    arrival: Arrival,
) -> Result<Vec<f64>> {
    let grid = &sys.grid;
    let cap = sys
        .curve
        .compute_work(sys.plant.dc_power_max_kw, grid.interval_hours)?;
    let nd = &traces.workload.nondeferrable;
    let mut out = vec![0.0; grid.total_intervals];
    for h in 0..grid.num_horizons() {
        let range = grid.horizon_range(h);
        let total = traces.workload.deferrable_per_horizon[h];
        match arrival {
            Arrival::Uniform => {
                let share = total / range.len() as f64;
                out[range].iter_mut().for_each(|w| *w = share);
            }
            Arrival::FrontLoaded => {
                let mut left = total;
                for t in range {
                    let take = left.min((cap - nd[t]).max(0.0));
                    out[t] = take;
                    left -= take;
                }
                if left > FEAS_TOL {
                    return Err(EmsError::DeadlineMissed {
                        horizon: h,
                        shortfall: left,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Per-interval power that runs the arriving work, checked against limits.
fn required_power(
    sys: &SystemConfig,
    traces: &TraceSet,
    arrival: Arrival,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = sys.violations(
        traces,
        &traces.tariff(crate::domain::Market::Wholesale, 0.0),
    );
    if !v.is_empty() {
        return Err(EmsError::Validation(v));
    }
    let dt = sys.grid.interval_hours;
    let cap = sys.curve.compute_work(sys.plant.dc_power_max_kw, dt)?;
    let df = deferrable_arrivals(sys, traces, arrival)?;
    let power = traces
        .workload
        .nondeferrable
        .iter()
        .zip(&df)
        .enumerate()
        .map(|(t, (nd, d))| {
            let work = nd + d;
            if work > cap + FEAS_TOL {
                return Err(EmsError::InfeasibleWorkload {
                    interval: t,
                    work,
                    capacity: cap,
                });
            }
            Ok(sys
                .curve
                .min_power_for_work(work.min(cap), dt)?
                .max(sys.plant.dc_power_min_kw))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((power, df))
}

/// Grid-only operation: every kW comes from the grid, nothing is exported.
pub fn simulate_no_colocation(
    sys: &SystemConfig,
    traces: &TraceSet,
    arrival: Arrival,
) -> Result<DispatchTimeline> {
    let (power, df) = required_power(sys, traces, arrival)?;
    let mut tl = DispatchTimeline::with_capacity(&sys.grid);
    for (t, &p) in power.iter().enumerate() {
        if p > sys.plant.import_max_kw + FEAS_TOL {
            return Err(EmsError::Unrepairable {
                interval: t,
                detail: format!(
                    "needs {p} kW but import is limited to {} kW",
                    sys.plant.import_max_kw
                ),
            });
        }
        tl.push(p, p, 0.0, df[t], traces.workload.nondeferrable[t], 0.0);
    }
    Ok(tl)
}

/// Colocated renewables without scheduling: renewable output serves the
/// load first, the shortfall is imported, any surplus is exported up to the
/// export limit regardless of price.
pub fn simulate_colocation_greedy(
    sys: &SystemConfig,
    traces: &TraceSet,
    arrival: Arrival,
) -> Result<DispatchTimeline> {
    let (power, df) = required_power(sys, traces, arrival)?;
    let plant = &sys.plant;
    let mut tl = DispatchTimeline::with_capacity(&sys.grid);
    for (t, &p) in power.iter().enumerate() {
        let eta = traces.renewable.capacity_factor[t];
        let (_, hi) = plant.net_bounds(eta);
        let own = p.min(hi);
        let import = p - own;
        let export = (hi - own).min(plant.export_max_kw);
        if import > plant.import_max_kw + FEAS_TOL {
            return Err(EmsError::Unrepairable {
                interval: t,
                detail: format!(
                    "needs {import} kW of import but the limit is {} kW",
                    plant.import_max_kw
                ),
            });
        }
        tl.push(
            p,
            import,
            export,
            df[t],
            traces.workload.nondeferrable[t],
            plant.renewable_kw(eta),
        );
    }
    Ok(tl)
}
