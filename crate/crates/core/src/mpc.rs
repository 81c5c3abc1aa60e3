//! Rolling-horizon dispatch: forecast, solve, commit against the realized
//! traces, carry the running peak and remaining deferrable work forward.
//!
//! Progress is logged at debug level under the `rcdc::mpc` target, one line
//! per committed interval:
//!
//! ```text
//! mpc t=<interval> h=<horizon> pd_kw=<P^D> im_kw=<P^IM> ex_kw=<P^EX> wdf=<W^DF> peak_kw=<running peak> cost_usd=<running cost>
//! ```
//!
//! `cost_usd` is the energy cost so far plus, in retail, the demand charge
//! on the running peak.

use serde::{Deserialize, Serialize};

use crate::domain::{DispatchTimeline, SystemConfig, Tariff, TraceSet, FEAS_TOL};
use crate::error::{EmsError, Result};
use crate::horizon::{solve_horizon, HorizonProblem};

/// Repair threshold: smaller discrepancies between plan and reality are
/// solver round-off and are left alone.
const REPAIR_TOL: f64 = 1e-9;

/// Realized data visible to a forecaster.
#[derive(Debug, Clone, Copy)]
pub struct Observed<'a> {
    pub capacity_factor: &'a [f64],
    pub nondeferrable: &'a [f64],
    pub tariff: &'a Tariff,
}

impl<'a> Observed<'a> {
    pub fn new(traces: &'a TraceSet, tariff: &'a Tariff) -> Self {
        Self {
            capacity_factor: &traces.renewable.capacity_factor,
            nondeferrable: &traces.workload.nondeferrable,
            tariff,
        }
    }

    pub fn len(&self) -> usize {
        self.capacity_factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity_factor.is_empty()
    }
}

/// Forecast sequences for the intervals `t..t+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub capacity_factor: Vec<f64>,
    pub nondeferrable: Vec<f64>,
    /// Pessimistic non-deferrable work, used only to protect deadlines.
    /// Equal to `nondeferrable` for an exact forecast.
    pub nondeferrable_high: Vec<f64>,
    pub tariff: Tariff,
    /// Set when the lookahead ran past the end of the data.
    pub truncated: bool,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.capacity_factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity_factor.is_empty()
    }
}

/// Predicts the next `lookahead` intervals from data realized before `t`.
pub trait Forecaster {
    fn forecast(&self, observed: &Observed<'_>, t: usize, lookahead: usize) -> Result<Forecast>;
}

/// Returns the realized values verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectForesight;

pub fn perfect_foresight() -> PerfectForesight {
    PerfectForesight
}

impl Forecaster for PerfectForesight {
    fn forecast(&self, observed: &Observed<'_>, t: usize, lookahead: usize) -> Result<Forecast> {
        let n = observed.len();
        let start = t.min(n);
        let end = t.saturating_add(lookahead).min(n);
        Ok(Forecast {
            capacity_factor: observed.capacity_factor[start..end].to_vec(),
            nondeferrable: observed.nondeferrable[start..end].to_vec(),
            nondeferrable_high: observed.nondeferrable[start..end].to_vec(),
            tariff: observed.tariff.slice(start..end),
            truncated: end - start < lookahead,
        })
    }
}

/// Last realized values of each series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub capacity_factor: f64,
    pub nondeferrable: f64,
    pub import_price: f64,
    pub export_price: f64,
}

/// Repeats the most recent realized value over the lookahead. The
/// pessimistic load is the largest non-deferrable work seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Persistence {
    seed: Snapshot,
}

/// Persistence forecaster seeded with history preceding the run. Only the
/// last entry of each series matters; all must be nonempty.
pub fn persistence_forecast(
    capacity_factor: &[f64],
    nondeferrable: &[f64],
    tariff: &Tariff,
) -> Result<Persistence> {
    let (Some(&eta), Some(&nd)) = (capacity_factor.last(), nondeferrable.last()) else {
        return Err(EmsError::Forecast(
            "persistence needs at least one realized interval".into(),
        ));
    };
    if tariff.is_empty() {
        return Err(EmsError::Forecast(
            "persistence needs at least one realized price".into(),
        ));
    }
    let last = tariff.len() - 1;
    Ok(Persistence {
        seed: Snapshot {
            capacity_factor: eta,
            nondeferrable: nd,
            import_price: tariff.import_price(last),
            export_price: tariff.export_price(last),
        },
    })
}

impl Persistence {
    pub fn from_snapshot(seed: Snapshot) -> Self {
        Self { seed }
    }

    fn last(&self, observed: &Observed<'_>, t: usize) -> Snapshot {
        if t == 0 || t > observed.len() {
            return self.seed;
        }
        let s = t - 1;
        Snapshot {
            capacity_factor: observed.capacity_factor[s],
            nondeferrable: observed.nondeferrable[s],
            import_price: observed.tariff.import_price(s),
            export_price: observed.tariff.export_price(s),
        }
    }
}

impl Forecaster for Persistence {
    fn forecast(&self, observed: &Observed<'_>, t: usize, lookahead: usize) -> Result<Forecast> {
        let last = self.last(observed, t);
        let k = lookahead;
        let tariff = match observed.tariff {
            Tariff::Wholesale { .. } => Tariff::Wholesale {
                lmp: vec![last.import_price; k],
            },
            Tariff::Retail { demand_charge, .. } => Tariff::Retail {
                import_rate: vec![last.import_price; k],
                export_rate: vec![last.export_price; k],
                demand_charge: *demand_charge,
            },
        };
        let seen = observed.nondeferrable[..t.min(observed.len())]
            .iter()
            .copied()
            .fold(self.seed.nondeferrable, f64::max);
        let nd = last.nondeferrable.max(0.0);
        Ok(Forecast {
            capacity_factor: vec![last.capacity_factor.clamp(0.0, 1.0); k],
            nondeferrable: vec![nd; k],
            nondeferrable_high: vec![seen.max(nd); k],
            tariff,
            truncated: false,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitMode {
    /// Solve once per horizon and commit every interval of it.
    #[default]
    CommitFullHorizon,
    /// Re-solve before every interval and commit only the first step.
    CommitFirstInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpcPolicy {
    pub commit_mode: CommitMode,
    /// Intervals per solve in commit-first-interval mode; windows never
    /// cross a horizon boundary.
    pub lookahead: usize,
}

impl Default for MpcPolicy {
    fn default() -> Self {
        Self {
            commit_mode: CommitMode::CommitFullHorizon,
            lookahead: 96,
        }
    }
}

/// Planned decisions for one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Plan {
    dc: f64,
    im: f64,
    ex: f64,
    wdf: f64,
}

struct Engine<'a> {
    sys: &'a SystemConfig,
    traces: &'a TraceSet,
    tariff: &'a Tariff,
    timeline: DispatchTimeline,
    energy_cost: f64,
    nd_capacity: f64,
}

/// Runs the rolling controller over the whole grid and returns the realized
/// dispatch.
pub fn run_mpc(
    sys: &SystemConfig,
    traces: &TraceSet,
    tariff: &Tariff,
    forecaster: &dyn Forecaster,
    policy: &MpcPolicy,
) -> Result<DispatchTimeline> {
    let mut v = sys.violations(traces, tariff);
    if policy.lookahead == 0 {
        v.push(crate::domain::Violation::new(
            "MpcPolicy",
            "lookahead must be >= 1",
        ));
    }
    if !v.is_empty() {
        return Err(EmsError::Validation(v));
    }
    let grid = &sys.grid;
    let mut eng = Engine {
        sys,
        traces,
        tariff,
        timeline: DispatchTimeline::with_capacity(grid),
        energy_cost: 0.0,
        nd_capacity: sys
            .curve
            .compute_work(sys.plant.dc_power_max_kw, grid.interval_hours)?,
    };
    let observed = Observed::new(traces, tariff);
    for h in 0..grid.num_horizons() {
        let range = grid.horizon_range(h);
        let mut remaining = traces.workload.deferrable_per_horizon[h];
        match policy.commit_mode {
            CommitMode::CommitFullHorizon => {
                let fc = forecaster.forecast(&observed, range.start, range.len())?;
                let hp = eng.problem(&fc, range.start, remaining);
                let out = solve_horizon(&hp)?;
                let s = &out.schedule;
                for (k, t) in range.clone().enumerate() {
                    let plan = Plan {
                        dc: s.dc_power_kw[k],
                        im: s.import_kw[k],
                        ex: s.export_kw[k],
                        wdf: s.deferrable_work[k],
                    };
                    // The deadline guard uses what has been observed up to now.
                    let later = forecaster.forecast(&observed, t + 1, range.end - t - 1)?;
                    let must = eng.must_do(remaining, &later.nondeferrable_high);
                    remaining -= eng.commit(t, h, plan, fc.capacity_factor[k], must)?;
                }
            }
            CommitMode::CommitFirstInterval => {
                for t in range.clone() {
                    let fc = forecaster.forecast(&observed, t, range.end - t)?;
                    let w = policy.lookahead.min(range.end - t);
                    let spare = |nd: &[f64]| -> f64 {
                        nd.iter().map(|x| (eng.nd_capacity - x).max(0.0)).sum()
                    };
                    let required = (remaining - spare(&fc.nondeferrable_high[w..]))
                        .max(0.0)
                        .min(spare(&fc.nondeferrable[..w]));
                    let window = Forecast {
                        capacity_factor: fc.capacity_factor[..w].to_vec(),
                        nondeferrable: fc.nondeferrable[..w].to_vec(),
                        nondeferrable_high: fc.nondeferrable_high[..w].to_vec(),
                        tariff: fc.tariff.slice(0..w),
                        truncated: fc.truncated,
                    };
                    let hp = eng.problem(&window, t, required);
                    let out = solve_horizon(&hp)?;
                    let s = &out.schedule;
                    let plan = Plan {
                        dc: s.dc_power_kw[0],
                        im: s.import_kw[0],
                        ex: s.export_kw[0],
                        wdf: s.deferrable_work[0],
                    };
                    let must = eng.must_do(remaining, &fc.nondeferrable_high[1..]);
                    remaining -= eng.commit(t, h, plan, fc.capacity_factor[0], must)?;
                }
            }
        }
        if remaining > FEAS_TOL {
            return Err(EmsError::DeadlineMissed {
                horizon: h,
                shortfall: remaining,
            });
        }
    }
    Ok(eng.timeline)
}

impl Engine<'_> {
    fn problem(&self, fc: &Forecast, start: usize, required: f64) -> HorizonProblem {
        HorizonProblem {
            interval_hours: self.sys.grid.interval_hours,
            plant: self.sys.plant.clone(),
            curve: self.sys.curve.clone(),
            tariff: fc.tariff.clone(),
            capacity_factor: fc.capacity_factor.clone(),
            nondeferrable: fc.nondeferrable.clone(),
            deferrable_required: required,
            peak_so_far_kw: self.timeline.peak_kw(),
            start_interval: start,
        }
    }

    /// Deferrable work that must run now because later intervals of the
    /// horizon (at forecast non-deferrable load) cannot absorb it.
    fn must_do(&self, remaining: f64, later_nd: &[f64]) -> f64 {
        let later: f64 = later_nd
            .iter()
            .map(|x| (self.nd_capacity - x).max(0.0))
            .sum();
        (remaining - later).max(0.0)
    }

    /// Checks a planned interval against realized data, repairs it if needed,
    /// appends it to the timeline and returns the deferrable work done.
    fn commit(
        &mut self,
        t: usize,
        h: usize,
        plan: Plan,
        eta_forecast: f64,
        must: f64,
    ) -> Result<f64> {
        let sys = self.sys;
        let p = &sys.plant;
        let curve = &sys.curve;
        let dt = sys.grid.interval_hours;
        let nd = self.traces.workload.nondeferrable[t];
        let eta = self.traces.renewable.capacity_factor[t];
        let (lo, hi) = p.net_bounds(eta);
        let unrepairable = |detail: String| EmsError::Unrepairable {
            interval: t,
            detail,
        };

        let Plan {
            mut dc,
            mut im,
            mut ex,
            mut wdf,
        } = plan;
        let room = (self.nd_capacity - nd).max(0.0);
        if must > room + FEAS_TOL {
            return Err(EmsError::DeadlineMissed {
                horizon: h,
                shortfall: must - room,
            });
        }
        wdf = wdf.max(must).min(room);
        let floor = curve
            .min_power_for_work(nd + must.min(room), dt)?
            .max(p.dc_power_min_kw);
        if nd + wdf > curve.compute_work(dc, dt)? + REPAIR_TOL {
            dc = curve
                .min_power_for_work(nd + wdf, dt)?
                .max(p.dc_power_min_kw)
                .min(p.dc_power_max_kw);
        }
        let free = curve.compute_work(dc, dt)? - nd;
        if free > wdf + REPAIR_TOL {
            wdf = free;
        }

        let net = dc + ex - im;
        if net > hi + REPAIR_TOL {
            // Less renewable than planned: cut exports, buy more, then slow down.
            let mut deficit = net - hi;
            let cut = deficit.min(ex);
            ex -= cut;
            deficit -= cut;
            let buy = deficit.min((p.import_max_kw - im).max(0.0));
            im += buy;
            deficit -= buy;
            if deficit > 0.0 {
                let slow = deficit.min((dc - floor).max(0.0));
                dc -= slow;
                deficit -= slow;
                wdf = (curve.compute_work(dc, dt)? - nd).max(0.0).min(wdf);
            }
            if deficit > REPAIR_TOL {
                return Err(unrepairable(format!(
                    "realized renewable {} kW leaves {deficit} kW uncovered at import limit {} kW",
                    p.renewable_kw(eta),
                    p.import_max_kw
                )));
            }
        } else if net < lo - REPAIR_TOL {
            let mut surplus = lo - net;
            let cut = surplus.min(im);
            im -= cut;
            surplus -= cut;
            let sell = surplus.min((p.export_max_kw - ex).max(0.0));
            ex += sell;
            surplus -= sell;
            if surplus > 0.0 {
                let up = surplus.min(p.dc_power_max_kw - dc);
                dc += up;
                surplus -= up;
                wdf = (curve.compute_work(dc, dt)? - nd).max(wdf);
            }
            if surplus > REPAIR_TOL {
                return Err(unrepairable(format!(
                    "net exchange cannot reach its lower bound {lo} kW"
                )));
            }
        } else if eta > eta_forecast {
            // More renewable than planned: buy less, then sell what is left.
            let mut headroom = hi - net;
            if self.tariff.import_price(t) > 0.0 {
                let cut = headroom.min(im);
                im -= cut;
                headroom -= cut;
            }
            if im <= 0.0 && self.tariff.export_price(t) > 0.0 {
                ex += headroom.min((p.export_max_kw - ex).max(0.0));
            }
        }
        if im > 0.0 && ex > 0.0 {
            let n = im - ex;
            im = n.max(0.0);
            ex = (-n).max(0.0);
        }

        self.energy_cost +=
            (self.tariff.import_price(t) * im - self.tariff.export_price(t) * ex) * dt;
        self.timeline.push(dc, im, ex, wdf, nd, p.renewable_kw(eta));
        let peak = self.timeline.peak_kw();
        let cost = self.energy_cost + self.tariff.demand_charge() * peak;
        log::debug!(
            target: "rcdc::mpc",
            "mpc t={t} h={h} pd_kw={dc:.3} im_kw={im:.3} ex_kw={ex:.3} wdf={wdf:.3} peak_kw={peak:.3} cost_usd={cost:.2}"
        );
        Ok(wdf)
    }
}
