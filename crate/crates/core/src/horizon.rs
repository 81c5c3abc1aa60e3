//! One scheduling horizon as a linear program.
//!
//! Per interval the decision variables are data-center power, grid import,
//! grid export and deferrable work; retail adds a single peak-import
//! variable `M`. The work equality `W^DF + W^ND = F(P^D)` is relaxed to the
//! hypograph of the concave curve and restored after the solve by assigning
//! any unused processing capacity to deferrable work, which never changes
//! the objective. Simultaneous import and export is removed by netting;
//! retail intervals whose export rate beats the import rate get their flow
//! direction pinned and the horizon is re-solved.
//!
//! Powers are normalised by the data-center capacity and work by the curve's
//! per-interval maximum before building the LP, so proportional rescaling of
//! a plant yields the same LP.

use crate::curve::ProcessingCurve;
use crate::domain::{check_dispatch, FeasibilityFrame, PlantConfig, Schedule, Tariff, Violation};
use crate::error::{EmsError, Result};
use crate::lp::{self, LinearProgram, LpStatus, RowKind};

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonProblem {
    pub interval_hours: f64,
    pub plant: PlantConfig,
    pub curve: ProcessingCurve,
    /// Tariff restricted to this horizon.
    pub tariff: Tariff,
    pub capacity_factor: Vec<f64>,
    pub nondeferrable: Vec<f64>,
    pub deferrable_required: f64,
    /// Peak import already billed this month (retail).
    pub peak_so_far_kw: f64,
    /// Global index of the first interval, for diagnostics.
    pub start_interval: usize,
}

impl HorizonProblem {
    pub fn len(&self) -> usize {
        self.nondeferrable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nondeferrable.is_empty()
    }

    pub fn renewable_kw(&self) -> Vec<f64> {
        self.capacity_factor
            .iter()
            .map(|&e| self.plant.renewable_kw(e))
            .collect()
    }

    fn violations(&self) -> Vec<Violation> {
        let n = self.len();
        let mut v = Vec::new();
        if self.capacity_factor.len() != n || self.tariff.len() != n {
            v.push(Violation::new(
                "HorizonProblem",
                format!(
                    "slice lengths differ: {} workload, {} capacity factors, {} prices",
                    n,
                    self.capacity_factor.len(),
                    self.tariff.len()
                ),
            ));
        }
        if !(self.peak_so_far_kw >= 0.0) {
            v.push(Violation::new(
                "HorizonProblem",
                "peak_so_far_kw must be >= 0",
            ));
        }
        if !(self.deferrable_required >= 0.0) {
            v.push(Violation::new(
                "HorizonProblem",
                "deferrable work must be >= 0",
            ));
        }
        v
    }

    /// Checks a schedule against every Schedule invariant for this horizon.
    pub fn check(&self, schedule: &Schedule) -> Vec<Violation> {
        let frame = FeasibilityFrame {
            plant: &self.plant,
            curve: &self.curve,
            interval_hours: self.interval_hours,
            capacity_factor: &self.capacity_factor,
            nondeferrable: &self.nondeferrable,
            deadlines: vec![(0..self.len(), self.deferrable_required)],
        };
        check_dispatch(&frame, &schedule.into())
    }

    /// Profit of a schedule over this horizon:
    /// energy profit minus the demand charge on the peak increment.
    pub fn objective_of(&self, schedule: &Schedule) -> f64 {
        let profit = schedule.energy_profit(&self.tariff, self.interval_hours);
        let lambda = self.tariff.demand_charge();
        let increment =
            (schedule.peak_import().max(self.peak_so_far_kw) - self.peak_so_far_kw).max(0.0);
        profit - lambda * increment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flow {
    ImportOnly,
    ExportOnly,
}

/// Column layout and scale factors of a built horizon LP.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonLp {
    pub lp: LinearProgram,
    pub power_scale: f64,
    pub work_scale: f64,
    /// Constant to add to the LP objective (in $) to get the horizon profit.
    pub objective_offset: f64,
    len: usize,
    peak_var: Option<usize>,
}

impl HorizonLp {
    pub fn dc_power(t: usize) -> usize {
        4 * t
    }
    pub fn import(t: usize) -> usize {
        4 * t + 1
    }
    pub fn export(t: usize) -> usize {
        4 * t + 2
    }
    pub fn deferrable(t: usize) -> usize {
        4 * t + 3
    }
    pub fn peak(&self) -> Option<usize> {
        self.peak_var
    }

    fn unscale(&self, x: &[f64]) -> (Schedule, Option<f64>) {
        let ps = self.power_scale;
        let ws = self.work_scale;
        let mut s = Schedule::zeros(self.len);
        for t in 0..self.len {
            s.dc_power_kw[t] = x[Self::dc_power(t)] * ps;
            s.import_kw[t] = x[Self::import(t)] * ps;
            s.export_kw[t] = x[Self::export(t)] * ps;
            s.deferrable_work[t] = x[Self::deferrable(t)] * ws;
        }
        (s, self.peak_var.map(|j| x[j] * ps))
    }
}

fn nd_capacity(hp: &HorizonProblem) -> Result<f64> {
    Ok(hp
        .curve
        .compute_work(hp.plant.dc_power_max_kw, hp.interval_hours)?)
}

/// Translates a horizon into a normalised LP.
pub fn build_lp(hp: &HorizonProblem) -> Result<HorizonLp> {
    build_lp_pinned(hp, &vec![None; hp.len()])
}

fn build_lp_pinned(hp: &HorizonProblem, pinned: &[Option<Flow>]) -> Result<HorizonLp> {
    let v = hp.violations();
    if !v.is_empty() {
        return Err(EmsError::Validation(v));
    }
    let n = hp.len();
    let dt = hp.interval_hours;
    let plant = &hp.plant;
    let cap = nd_capacity(hp)?;
    for (t, &w) in hp.nondeferrable.iter().enumerate() {
        if w > cap + crate::domain::FEAS_TOL {
            return Err(EmsError::InfeasibleWorkload {
                interval: hp.start_interval + t,
                work: w,
                capacity: cap,
            });
        }
    }

    let ps = plant.dc_capacity_kw;
    let ws = hp.curve.max_work(dt);
    let retail = matches!(hp.tariff, Tariff::Retail { .. });
    let nvars = 4 * n + usize::from(retail);

    let mut c = vec![0.0; nvars];
    for t in 0..n {
        c[HorizonLp::import(t)] = -hp.tariff.import_price(t) * dt;
        c[HorizonLp::export(t)] = hp.tariff.export_price(t) * dt;
    }
    let lambda = hp.tariff.demand_charge();
    let peak_var = retail.then_some(4 * n);
    if let Some(m) = peak_var {
        c[m] = -lambda;
    }
    let mut lp = LinearProgram::new(c)?;

    for t in 0..n {
        lp.set_bounds(
            HorizonLp::dc_power(t),
            plant.dc_power_min_kw / ps,
            plant.dc_power_max_kw / ps,
        )?;
        let im_hi = if pinned[t] == Some(Flow::ExportOnly) {
            0.0
        } else {
            plant.import_max_kw / ps
        };
        let ex_hi = if pinned[t] == Some(Flow::ImportOnly) {
            0.0
        } else {
            plant.export_max_kw / ps
        };
        lp.set_bounds(HorizonLp::import(t), 0.0, im_hi)?;
        lp.set_bounds(HorizonLp::export(t), 0.0, ex_hi)?;
        let spare = (cap - hp.nondeferrable[t]).max(0.0);
        lp.set_bounds(HorizonLp::deferrable(t), 0.0, spare / ws)?;
    }
    if let Some(m) = peak_var {
        let lo = hp.peak_so_far_kw / ps;
        lp.set_bounds(m, lo, lo.max(plant.import_max_kw / ps))?;
    }

    // Deadline: all deferrable work inside the horizon.
    let terms: Vec<(usize, f64)> = (0..n).map(|t| (HorizonLp::deferrable(t), 1.0)).collect();
    lp.add_row_sparse(&terms, RowKind::Ge, hp.deferrable_required / ws)?;

    let rows = hp.curve.hypograph_rows();
    for t in 0..n {
        for &(slope, intercept) in &rows {
            lp.add_row_sparse(
                &[
                    (HorizonLp::deferrable(t), 1.0),
                    (HorizonLp::dc_power(t), -slope * dt * ps / ws),
                ],
                RowKind::Le,
                (intercept * dt - hp.nondeferrable[t]) / ws,
            )?;
        }
    }
    for t in 0..n {
        let (lo, hi) = plant.net_bounds(hp.capacity_factor[t]);
        let terms = [
            (HorizonLp::dc_power(t), 1.0),
            (HorizonLp::export(t), 1.0),
            (HorizonLp::import(t), -1.0),
        ];
        lp.add_row_sparse(&terms, RowKind::Ge, lo / ps)?;
        lp.add_row_sparse(&terms, RowKind::Le, hi / ps)?;
    }
    if let Some(m) = peak_var {
        for t in 0..n {
            lp.add_row_sparse(&[(m, 1.0), (HorizonLp::import(t), -1.0)], RowKind::Ge, 0.0)?;
        }
    }

    Ok(HorizonLp {
        lp,
        power_scale: ps,
        work_scale: ws,
        objective_offset: lambda * hp.peak_so_far_kw,
        len: n,
        peak_var,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonOutcome {
    pub schedule: Schedule,
    /// Profit of the returned schedule (energy profit − incremental demand charge).
    pub objective: f64,
    /// Optimal LP objective including the constant offset, in $.
    pub lp_objective: f64,
    /// LP value of the peak variable (retail).
    pub lp_peak_kw: Option<f64>,
    /// Deferrable work processed beyond what the deadline requires.
    pub overshoot: f64,
    pub iterations: usize,
    /// Re-solves triggered by inverted retail rates.
    pub reruns: usize,
}

/// Solves one horizon and returns a schedule satisfying every Schedule
/// invariant.
pub fn solve_horizon(hp: &HorizonProblem) -> Result<HorizonOutcome> {
    let inverted = hp.tariff.inverted_intervals();
    let mut pinned: Vec<Option<Flow>> = vec![None; hp.len()];
    let mut reruns = 0;
    let mut iterations = 0;
    loop {
        let built = build_lp_pinned(hp, &pinned)?;
        let sol = lp::solve(&built.lp)?;
        iterations += sol.iterations;
        if sol.status != LpStatus::Optimal {
            return Err(EmsError::HorizonSolve {
                start: hp.start_interval,
                status: sol.status,
                detail: infeasibility_detail(hp),
            });
        }
        let (raw, lp_peak) = built.unscale(&sol.x);
        let lp_objective = sol.objective * built.power_scale + built.objective_offset;

        let both: Vec<usize> = inverted
            .iter()
            .copied()
            .filter(|&t| {
                raw.import_kw[t] > crate::domain::FEAS_TOL
                    && raw.export_kw[t] > crate::domain::FEAS_TOL
            })
            .collect();
        if !both.is_empty() && reruns < hp.len() {
            for t in both {
                pinned[t] = Some(if raw.import_kw[t] >= raw.export_kw[t] {
                    Flow::ImportOnly
                } else {
                    Flow::ExportOnly
                });
            }
            reruns += 1;
            continue;
        }

        let schedule = polish(hp, raw)?;
        let done: f64 = schedule.deferrable_work.iter().sum();
        return Ok(HorizonOutcome {
            objective: hp.objective_of(&schedule),
            overshoot: (done - hp.deferrable_required).max(0.0),
            schedule,
            lp_objective,
            lp_peak_kw: lp_peak,
            iterations,
            reruns,
        });
    }
}

fn infeasibility_detail(hp: &HorizonProblem) -> String {
    let cap = nd_capacity(hp).unwrap_or(0.0);
    let spare: f64 = hp.nondeferrable.iter().map(|w| (cap - w).max(0.0)).sum();
    if hp.deferrable_required > spare {
        format!(
            "deferrable work {} exceeds spare processing capacity {} in the horizon",
            hp.deferrable_required, spare
        )
    } else {
        let short = (0..hp.len()).find(|&t| {
            let need = hp
                .curve
                .min_power_for_work(hp.nondeferrable[t], hp.interval_hours)
                .unwrap_or(f64::INFINITY);
            let (_, hi) = hp.plant.net_bounds(hp.capacity_factor[t]);
            need.max(hp.plant.dc_power_min_kw) > hp.plant.import_max_kw + hi
        });
        match short {
            Some(t) => format!(
                "interval {}: required power exceeds import limit plus renewable output",
                hp.start_interval + t
            ),
            None => "grid exchange limits cannot supply the required work".to_string(),
        }
    }
}

/// Removes simultaneous import and export by netting the two flows.
/// Net exchange is unchanged, so every other constraint still holds.
pub fn net_complementarity(schedule: &Schedule) -> Schedule {
    let mut s = schedule.clone();
    for t in 0..s.len() {
        let (im, ex) = (s.import_kw[t], s.export_kw[t]);
        if im > 0.0 && ex > 0.0 {
            s.import_kw[t] = (im - ex).max(0.0);
            s.export_kw[t] = (ex - im).max(0.0);
        }
    }
    s
}

/// Turns an LP optimum (feasible up to solver tolerance) into a schedule that
/// meets the invariants at natural-unit tolerance.
fn polish(hp: &HorizonProblem, mut s: Schedule) -> Result<Schedule> {
    let n = hp.len();
    let dt = hp.interval_hours;
    let p = &hp.plant;
    let curve = &hp.curve;
    let max_work = nd_capacity(hp)?;

    for t in 0..n {
        s.dc_power_kw[t] = s.dc_power_kw[t].clamp(p.dc_power_min_kw, p.dc_power_max_kw);
        s.import_kw[t] = s.import_kw[t].clamp(0.0, p.import_max_kw);
        s.export_kw[t] = s.export_kw[t].clamp(0.0, p.export_max_kw);
        let floor = curve.min_power_for_work(hp.nondeferrable[t], dt)?;
        s.dc_power_kw[t] = s.dc_power_kw[t].max(floor).min(p.dc_power_max_kw);
        // Unused processing capacity becomes deferrable work (W = F(P) exactly).
        s.deferrable_work[t] =
            (curve.compute_work(s.dc_power_kw[t], dt)? - hp.nondeferrable[t]).max(0.0);
    }

    let mut shortfall = hp.deferrable_required - s.deferrable_work.iter().sum::<f64>();
    if shortfall > 0.0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            hp.tariff
                .import_price(a)
                .total_cmp(&hp.tariff.import_price(b))
        });
        for t in order {
            if shortfall <= 0.0 {
                break;
            }
            let room = (max_work - hp.nondeferrable[t] - s.deferrable_work[t]).max(0.0);
            let add = room.min(shortfall);
            if add > 0.0 {
                s.deferrable_work[t] += add;
                shortfall -= add;
                let need =
                    curve.min_power_for_work(hp.nondeferrable[t] + s.deferrable_work[t], dt)?;
                s.dc_power_kw[t] = s.dc_power_kw[t].max(need).min(p.dc_power_max_kw);
            }
        }
    }

    for t in 0..n {
        let (lo, hi) = p.net_bounds(hp.capacity_factor[t]);
        let net = s.dc_power_kw[t] + s.export_kw[t] - s.import_kw[t];
        if net > hi {
            let mut excess = net - hi;
            let cut = excess.min(s.export_kw[t]);
            s.export_kw[t] -= cut;
            excess -= cut;
            s.import_kw[t] = (s.import_kw[t] + excess).min(p.import_max_kw);
        } else if net < lo {
            let mut deficit = lo - net;
            let cut = deficit.min(s.import_kw[t]);
            s.import_kw[t] -= cut;
            deficit -= cut;
            s.export_kw[t] = (s.export_kw[t] + deficit).min(p.export_max_kw);
        }
    }
    Ok(net_complementarity(&s))
}
