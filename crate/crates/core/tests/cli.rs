use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcdc_ems::domain::Market;
use rcdc_ems::settlement::Configuration;
use rcdc_ems::trace_io::{read_results, OutputFormat, RESULT_COLUMNS};

fn rcdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcdc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn small_config(dir: &Path, seed: u64) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        format!("[grid]\ndays = 2\n[plant]\ndc_capacity_kw = 1000.0\nrenewable_capacity_kw = 1500.0\n[synthetic]\nseed = {seed}\n"),
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["simulate", "--help"]] {
        let o = rcdc(args);
        assert_eq!(code(&o), 0, "{args:?}");
        assert!(!o.stdout.is_empty());
    }
    let v = String::from_utf8(rcdc(&["--version"]).stdout).unwrap();
    assert!(v.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_64() {
    for args in [
        &[][..],
        &["frobnicate"],
        &["simulate"],
        &["simulate", "--config", "x.toml", "--mode", "sideways"],
        &[
            "sweep", "--config", "x.toml", "--sweep", "ratio", "--points", "a,b", "--out", "s.csv",
        ],
    ] {
        assert_eq!(code(&rcdc(args)), 64, "{args:?}");
    }
}

#[test]
fn bad_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = rcdc(&[
        "simulate",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[plant]\ndc_capacity_kw = 1000.0\nrenewable_capacity_kw = 1500.0\nwidth = 3\n[synthetic]\n").unwrap();
    let o = rcdc(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("width"), "{err}");

    let cfg = small_config(dir.path(), 1);
    let o = rcdc(&["simulate", "--config", &cfg, "--format", "xml"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("csv, json"));

    let o = rcdc(&[
        "synth",
        "--out",
        dir.path().join("s").to_str().unwrap(),
        "--profile",
        "offshore",
    ]);
    assert_eq!(code(&o), 1);

    let o = rcdc(&[
        "sweep",
        "--config",
        &cfg,
        "--sweep",
        "deferrable",
        "--points",
        "1.5",
        "--out",
        "s.csv",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn undispatchable_load_exits_2() {
    // The grid connection cannot carry the load the data center must serve.
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let write = |name: &str, unit: &str, v: f64| {
        let mut s = format!("timestamp,value_{unit}\n");
        for h in 0..24 {
            s.push_str(&format!("2024-07-01T{h:02}:00:00Z,{v}\n"));
        }
        fs::write(d.join(name), s).unwrap();
    };
    write("cf.csv", "pu", 0.3);
    write("lmp.csv", "usd_per_kwh", 0.05);
    write("im.csv", "usd_per_kwh", 0.06);
    write("ex.csv", "usd_per_kwh", 0.05);
    write("work.csv", "gflop", 500.0);
    let cfg = d.join("tight.toml");
    fs::write(
        &cfg,
        "[grid]\ninterval_minutes = 60\nhorizon_intervals = 24\ndays = 1\n\
         [plant]\ndc_capacity_kw = 1000.0\nrenewable_capacity_kw = 1500.0\nimport_max_kw = 100.0\n\
         [traces]\ncapacity_factor = \"cf.csv\"\nlmp = \"lmp.csv\"\nimport_rate = \"im.csv\"\nexport_rate = \"ex.csv\"\nworkload = \"work.csv\"\n",
    )
    .unwrap();
    let o = rcdc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "optimal",
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("limited to 100"));
}

#[test]
fn simulate_all_reports_every_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    let o = rcdc(&["simulate", "--config", &cfg, "--mode", "all"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 7);

    let json = dir.path().join("r.json");
    assert_eq!(
        code(&rcdc(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            json.to_str().unwrap()
        ])),
        0
    );
    let table = read_results(&json, OutputFormat::Json).unwrap();
    for m in Market::ALL {
        for c in Configuration::ALL {
            let r = table.get(m, c).unwrap();
            assert_eq!(
                r.pct_savings_vs_baseline.is_some(),
                c != Configuration::NoColocation
            );
        }
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 9);
    let a = rcdc(&["simulate", "--config", &cfg, "--format", "json"]);
    let b = rcdc(&["simulate", "--config", &cfg, "--format", "json"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = rcdc(&[
        "simulate", "--config", &cfg, "--format", "json", "--seed", "10",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn synth_output_feeds_simulate_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traces");
    let o = rcdc(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "3",
        "--days",
        "2",
        "--dc-capacity-kw",
        "1000",
        "--renewable-capacity-kw",
        "1500",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "capacity_factor.csv",
        "lmp.csv",
        "import_rate.csv",
        "export_rate.csv",
        "workload.csv",
        "scenario.toml",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cfg = out.join("scenario.toml");
    let o = rcdc(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--market",
        "retail",
        "--mode",
        "optimal",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 2);

    let series = dir.path().join("fig.csv");
    let o = rcdc(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "deferrable",
        "--points",
        "0,0.5",
        "--out",
        series.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = fs::read_to_string(&series).unwrap();
    let b = fs::read_to_string(dir.path().join("fig_vs_colocation.csv")).unwrap();
    assert_eq!(a.lines().count(), 3);
    assert_eq!(
        b.lines().next(),
        Some("x,wholesale_savings_pct,retail_savings_pct")
    );
}

#[test]
fn debug_logging_emits_mpc_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let o = rcdc(&[
        "-vv",
        "simulate",
        "--config",
        &cfg,
        "--market",
        "wholesale",
        "--mode",
        "optimal",
    ]);
    assert_eq!(code(&o), 0);
    let err = String::from_utf8_lossy(&o.stderr);
    let lines = err.lines().filter(|l| l.contains("mpc t=")).count();
    assert_eq!(lines, 192);
}

/// Frozen output of a small fixed-seed study. Regenerate by running
/// `rcdc simulate --config tests/golden/small.toml` and reviewing the diff.
#[test]
fn golden_small_study() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/small.toml");
    let o = rcdc(&["simulate", "--config", cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let got = String::from_utf8(o.stdout).unwrap();
    let want = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/small.csv"
    ))
    .unwrap();
    let (mut g, mut w) = (got.lines(), want.lines());
    assert_eq!(g.next(), w.next());
    for (gl, wl) in g.zip(w) {
        for (a, b) in gl.split(',').zip(wl.split(',')) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "{gl}\nvs\n{wl}")
                }
                _ => assert_eq!(a, b),
            }
        }
    }
    assert_eq!(got.lines().count(), want.lines().count());
}
