use proptest::prelude::*;
use rcdc_ems::domain::{
    validate_config, PlantConfig, RenewableTrace, Tariff, TimeGrid, TraceSet, WorkloadTrace,
};

#[derive(Debug, Clone)]
struct Case {
    grid: TimeGrid,
    plant: PlantConfig,
    traces: TraceSet,
    tariff: Tariff,
}

fn valid() -> impl Strategy<Value = Case> {
    (
        1usize..5,
        1usize..4,
        10.0..1000.0f64,
        10.0..1000.0f64,
        any::<bool>(),
        0.0..1.0f64,
    )
        .prop_flat_map(|(h, n_h, qd, qr, retail, fraction)| {
            let n = h * n_h;
            (
                prop::collection::vec(0.0..=1.0f64, n),
                prop::collection::vec(0.0..qd, n),
                prop::collection::vec(-0.1..0.5f64, n),
            )
                .prop_map(move |(eta, work, price)| {
                    let grid = TimeGrid {
                        interval_hours: 0.25,
                        horizon_len: h,
                        total_intervals: n,
                    };
                    let traces = TraceSet {
                        renewable: RenewableTrace {
                            capacity_factor: eta,
                        },
                        workload: WorkloadTrace::from_total(&work, fraction, &grid),
                        lmp: price.clone(),
                        import_rate: price.iter().map(|p| p + 0.01).collect(),
                        export_rate: price.clone(),
                    };
                    let tariff = traces.tariff(
                        if retail {
                            rcdc_ems::domain::Market::Retail
                        } else {
                            rcdc_ems::domain::Market::Wholesale
                        },
                        12.0,
                    );
                    Case {
                        grid,
                        plant: PlantConfig::with_capacities(qd, qr),
                        traces,
                        tariff,
                    }
                })
        })
}

/// Ways to break exactly one invariant, with the subject that must report it.
fn seed(c: &mut Case, which: usize, pick: usize) -> &'static str {
    let n = c.grid.total_intervals;
    let t = pick % n;
    match which {
        0 => {
            c.grid.interval_hours = -0.25;
            "TimeGrid"
        }
        1 => {
            c.grid.horizon_len = 0;
            "TimeGrid"
        }
        2 => {
            c.plant.dc_capacity_kw = 0.0;
            "PlantConfig"
        }
        3 => {
            c.plant.dc_power_min_kw = c.plant.dc_power_max_kw + 1.0;
            "PlantConfig"
        }
        4 => {
            c.plant.export_max_kw = -1.0;
            "PlantConfig"
        }
        5 => {
            c.plant.net_upper_kw = Some(-5.0);
            "PlantConfig"
        }
        6 => {
            c.traces.renewable.capacity_factor[t] = 1.5;
            "RenewableTrace"
        }
        7 => {
            c.traces.renewable.capacity_factor.pop();
            "RenewableTrace"
        }
        8 => {
            c.traces.workload.nondeferrable[t] = -1.0;
            "WorkloadTrace"
        }
        9 => {
            c.traces.workload.deferrable_per_horizon[0] = f64::NAN;
            "WorkloadTrace"
        }
        10 => {
            c.traces.lmp.push(0.1);
            "TraceSet"
        }
        11 => {
            c.tariff = match &c.tariff {
                Tariff::Wholesale { lmp } => {
                    let mut lmp = lmp.clone();
                    lmp[t] = f64::INFINITY;
                    Tariff::Wholesale { lmp }
                }
                Tariff::Retail {
                    import_rate,
                    export_rate,
                    ..
                } => Tariff::Retail {
                    import_rate: import_rate.clone(),
                    export_rate: export_rate.clone(),
                    demand_charge: -1.0,
                },
            };
            "Tariff"
        }
        _ => unreachable!(),
    }
}

proptest! {
    #[test]
    fn valid_inputs_pass(c in valid()) {
        let v = validate_config(&c.plant, &c.grid, &c.traces, &c.tariff);
        prop_assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn each_seeded_violation_is_reported(mut c in valid(), which in 0usize..12, pick in any::<usize>()) {
        let subject = seed(&mut c, which, pick);
        let v = validate_config(&c.plant, &c.grid, &c.traces, &c.tariff);
        prop_assert!(v.iter().any(|x| x.subject == subject), "case {which}: expected {subject} in {v:?}");
    }
}
