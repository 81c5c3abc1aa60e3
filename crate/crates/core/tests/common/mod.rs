//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use rcdc_ems::curve::ProcessingCurve;
use rcdc_ems::domain::{PlantConfig, Tariff};
use rcdc_ems::horizon::HorizonProblem;
use rcdc_ems::lp::{LinearProgram, RowKind};

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Best objective over all basic feasible points of a bounded LP, found by
/// enumerating every n-subset of active constraints (rows at their
/// right-hand side, variables at either bound). `None` when no vertex is
/// feasible. Requires finite variable bounds.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    // Candidate hyperplanes: (coefficients, value).
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..m {
        planes.push((lp.row(i).to_vec(), lp.rhs()[i]));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        assert!(lp.upper()[j].is_finite(), "oracle needs bounded variables");
        planes.push((e.clone(), lp.lower()[j]));
        planes.push((e, lp.upper()[j]));
    }
    let mut best: Option<f64> = None;
    combinations(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        let Some(x) = solve_square(a, b) else { return };
        let tol = 1e-7;
        for j in 0..n {
            if x[j] < lp.lower()[j] - tol || x[j] > lp.upper()[j] + tol {
                return;
            }
        }
        for i in 0..m {
            let act: f64 = lp.row(i).iter().zip(&x).map(|(a, v)| a * v).sum();
            let ok = match lp.row_kind(i) {
                RowKind::Le => act <= lp.rhs()[i] + tol,
                RowKind::Ge => act >= lp.rhs()[i] - tol,
                RowKind::Eq => (act - lp.rhs()[i]).abs() <= tol,
            };
            if !ok {
                return;
            }
        }
        let obj: f64 = lp.objective().iter().zip(&x).map(|(c, v)| c * v).sum();
        if best.is_none_or(|b| obj > b) {
            best = Some(obj);
        }
    });
    best
}

/// Random bounded LP with ≤ 6 variables and ≤ 6 rows, coefficients in
/// [−5, 5]. Most instances are built around a known interior point so they
/// are feasible; a few equality rows and tight right-hand sides produce
/// infeasible ones.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let obj: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let mut lp = LinearProgram::new(obj).unwrap();
    let mut anchor = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.random_range(-3.0..1.0f64).round();
        let hi = lo + rng.random_range(1.0..8.0f64).round();
        lp.set_bounds(j, lo, hi).unwrap();
        anchor.push(rng.random_range(lo..hi));
    }
    let feasible = rng.random_bool(0.85);
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let act: f64 = row.iter().zip(&anchor).map(|(a, x)| a * x).sum();
        let kind = match rng.random_range(0..10) {
            0 => RowKind::Eq,
            1..=3 => RowKind::Ge,
            _ => RowKind::Le,
        };
        let slack = rng.random_range(0.0..4.0);
        let rhs = match (kind, feasible) {
            (RowKind::Eq, _) => act,
            (RowKind::Le, true) => act + slack,
            (RowKind::Ge, true) => act - slack,
            (RowKind::Le, false) => act - slack,
            (RowKind::Ge, false) => act + slack,
        };
        lp.add_row(&row, kind, rhs).unwrap();
    }
    lp
}

/// Synthetic scenario parsed from TOML; `extra` is appended verbatim.
pub fn synthetic_scenario(
    seed: u64,
    days: usize,
    dc_kw: f64,
    re_kw: f64,
    extra: &str,
) -> rcdc_ems::scenario::Scenario {
    let text = format!(
        "[grid]\ndays = {days}\n[plant]\ndc_capacity_kw = {dc_kw:?}\nrenewable_capacity_kw = {re_kw:?}\n{extra}\n"
    );
    let text = if extra.contains("[synthetic]") {
        text
    } else {
        format!("{text}[synthetic]\nseed = {seed}\n")
    };
    let cfg =
        rcdc_ems::trace_io::ConfigFile::parse(&text, std::path::Path::new("test.toml")).unwrap();
    rcdc_ems::scenario::Scenario::from_config(&cfg, std::path::Path::new(".")).unwrap()
}

/// Small identity-curve instance: every capacity is a whole number of kW and
/// the interval is one hour, so a 1 kW power grid is exact for work.
pub fn horizon_instance(rng: &mut impl Rng, retail: bool) -> HorizonProblem {
    let t = rng.random_range(1..=3);
    let cap = rng.random_range(8..=30) as f64;
    let qr = rng.random_range(0..=40) as f64;
    let plant = PlantConfig {
        dc_capacity_kw: cap,
        renewable_capacity_kw: qr,
        dc_power_min_kw: 0.0,
        dc_power_max_kw: cap,
        export_max_kw: rng.random_range(0..=40) as f64,
        import_max_kw: cap,
        net_lower_kw: None,
        net_upper_kw: None,
    };
    let eta: Vec<f64> = (0..t)
        .map(|_| rng.random_range(0..=10) as f64 / 10.0)
        .collect();
    let nd: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..0.6 * cap)).collect();
    let spare: f64 = nd.iter().map(|w| cap - w).sum();
    let df = rng.random_range(0.0..0.8) * spare;
    let tariff = if retail {
        let ex: Vec<f64> = (0..t).map(|_| rng.random_range(0.0..0.15)).collect();
        let im = ex.iter().map(|e| e + rng.random_range(0.0..0.05)).collect();
        Tariff::Retail {
            import_rate: im,
            export_rate: ex,
            demand_charge: rng.random_range(0.0..0.3),
        }
    } else {
        Tariff::Wholesale {
            lmp: (0..t).map(|_| rng.random_range(-0.05..0.2)).collect(),
        }
    };
    HorizonProblem {
        interval_hours: 1.0,
        plant,
        curve: ProcessingCurve::identity(cap),
        tariff,
        capacity_factor: eta,
        nondeferrable: nd,
        deferrable_required: df,
        peak_so_far_kw: if retail {
            rng.random_range(0..=10) as f64
        } else {
            0.0
        },
        start_interval: 0,
    }
}

/// Exhaustive search over integer data-center power. For fixed power the
/// profit is linear in import (wholesale) or import is forced to its minimum
/// by nonnegative prices (retail), so each interval only needs the extreme
/// import and export choices.
pub fn brute_force_horizon(hp: &HorizonProblem) -> f64 {
    let t = hp.len();
    let cap = hp.plant.dc_power_max_kw as i64;
    let renew = hp.renewable_kw();
    let mut best = f64::NEG_INFINITY;
    let mut p = vec![0i64; t];
    loop {
        let work: f64 = (0..t).map(|i| p[i] as f64 - hp.nondeferrable[i]).sum();
        let fits = (0..t).all(|i| p[i] as f64 >= hp.nondeferrable[i]);
        if fits && work >= hp.deferrable_required - 1e-9 {
            best = best.max(best_flows(hp, &p, &renew));
        }
        let mut i = 0;
        while i < t && p[i] == cap {
            p[i] = 0;
            i += 1;
        }
        if i == t {
            break;
        }
        p[i] += 1;
    }
    best
}

fn best_flows(hp: &HorizonProblem, p: &[i64], renew: &[f64]) -> f64 {
    let t = p.len();
    // Per interval, candidate (import, export) pairs.
    let options: Vec<Vec<(f64, f64)>> = (0..t)
        .map(|i| {
            let pd = p[i] as f64;
            let mut o = Vec::new();
            let im_min = (pd - renew[i]).max(0.0);
            let im_max = pd.min(hp.plant.import_max_kw);
            if im_min <= im_max {
                o.push((im_min, 0.0));
                o.push((im_max, 0.0));
            }
            if pd <= renew[i] {
                o.push((0.0, (renew[i] - pd).min(hp.plant.export_max_kw)));
            }
            o
        })
        .collect();
    let mut best = f64::NEG_INFINITY;
    let mut pick = vec![0usize; t];
    if options.iter().any(|o| o.is_empty()) {
        return best;
    }
    loop {
        let mut profit = 0.0;
        let mut peak: f64 = 0.0;
        for i in 0..t {
            let (im, ex) = options[i][pick[i]];
            profit += hp.tariff.export_price(i) * ex - hp.tariff.import_price(i) * im;
            peak = peak.max(im);
        }
        profit -= hp.tariff.demand_charge() * (peak - hp.peak_so_far_kw).max(0.0);
        best = best.max(profit);
        let mut i = 0;
        while i < t && pick[i] + 1 == options[i].len() {
            pick[i] = 0;
            i += 1;
        }
        if i == t {
            break;
        }
        pick[i] += 1;
    }
    best
}

/// Moving every power up to the next whole kW keeps a schedule feasible and
/// costs at most the largest price plus the demand charge per kW moved.
pub fn discretization_bound(hp: &HorizonProblem) -> f64 {
    let energy: f64 = (0..hp.len())
        .map(|i| {
            hp.tariff
                .import_price(i)
                .abs()
                .max(hp.tariff.export_price(i).abs())
        })
        .sum();
    (energy + hp.tariff.demand_charge()) * 1.0
}
