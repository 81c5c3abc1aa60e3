//! C ABI over `rcdc-ems`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible function returns an
//! [`RcdcStatus`]; on failure a message is available from
//! [`rcdc_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use rcdc_ems::curve::ProcessingCurve;
use rcdc_ems::domain::Market;
use rcdc_ems::scenario::Scenario;
use rcdc_ems::settlement::Configuration;
use rcdc_ems::trace_io::ConfigFile;
use rcdc_ems::EmsError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidInput = 3,
    SolverFailure = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcdcMarket {
    Wholesale = 0,
    Retail = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcdcConfiguration {
    NoColocation = 0,
    Colocation = 1,
    Optimal = 2,
}

/// Monthly settlement of one configuration. Savings fields are NaN for the
/// no-colocation baseline.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcdcReport {
    pub imported_mwh: f64,
    pub exported_mwh: f64,
    pub self_consumption_mwh: f64,
    pub peak_demand_kw: f64,
    pub energy_cost_usd: f64,
    pub demand_charge_usd: f64,
    pub net_cost_usd: f64,
    pub pct_savings_vs_baseline: f64,
    pub investment_adjusted_savings_usd: f64,
}

/// Opaque study handle.
pub struct RcdcScenario {
    inner: Scenario,
}

/// Opaque processing-curve handle.
pub struct RcdcCurve {
    inner: ProcessingCurve,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &EmsError) -> RcdcStatus {
    match e {
        EmsError::Io { .. } => RcdcStatus::Io,
        e if e.is_solver_failure() => RcdcStatus::SolverFailure,
        _ => RcdcStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (RcdcStatus, String)>) -> RcdcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RcdcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RcdcStatus::Panic
        }
    }
}

fn ems(e: EmsError) -> (RcdcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RcdcStatus, String) {
    (RcdcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (RcdcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (RcdcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn rcdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn rcdc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a scenario from a TOML config file.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rcdc_scenario_from_config(
    path: *const c_char,
    out: *mut *mut RcdcScenario,
) -> RcdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let inner = Scenario::load(Path::new(path)).map_err(ems)?;
        *out = Box::into_raw(Box::new(RcdcScenario { inner }));
        Ok(())
    })
}

/// Builds a scenario on synthetic traces with default plant limits and curve.
/// `profile` is "windy", "diurnal-solar" or "flat".
///
/// # Safety
/// `profile` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rcdc_scenario_synthetic(
    seed: u64,
    profile: *const c_char,
    days: u32,
    dc_capacity_kw: f64,
    renewable_capacity_kw: f64,
    deferrable_fraction: f64,
    out: *mut *mut RcdcScenario,
) -> RcdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let profile = str_arg(profile, "profile")?;
        let text = format!(
            "[grid]\ndays = {days}\n[plant]\ndc_capacity_kw = {dc_capacity_kw:?}\nrenewable_capacity_kw = {renewable_capacity_kw:?}\n\
             [workload]\ndeferrable_fraction = {deferrable_fraction:?}\n[synthetic]\nseed = {seed}\nprofile = {profile:?}\n"
        );
        let cfg = ConfigFile::parse(&text, Path::new("<ffi>")).map_err(ems)?;
        let inner = Scenario::from_config(&cfg, Path::new(".")).map_err(ems)?;
        *out = Box::into_raw(Box::new(RcdcScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rcdc_scenario_free(scenario: *mut RcdcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of intervals in the scenario's time grid (0 for null).
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rcdc_scenario_intervals(scenario: *const RcdcScenario) -> usize {
    scenario
        .as_ref()
        .map_or(0, |s| s.inner.sys.grid.total_intervals)
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rcdc_scenario_set_deferrable_fraction(
    scenario: *mut RcdcScenario,
    fraction: f64,
) -> RcdcStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        if !(0.0..=1.0).contains(&fraction) {
            return Err((
                RcdcStatus::InvalidArgument,
                format!("fraction {fraction} outside [0, 1]"),
            ));
        }
        s.inner = s.inner.with_deferrable_fraction(fraction);
        Ok(())
    })
}

/// Simulates one configuration for the month and settles it, with savings
/// against the no-colocation baseline. `market` and `configuration` take
/// [`RcdcMarket`] and [`RcdcConfiguration`] values; others are rejected.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rcdc_simulate(
    scenario: *const RcdcScenario,
    market: u32,
    configuration: u32,
    out: *mut RcdcReport,
) -> RcdcStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let bad = |what: &str, v: u32| (RcdcStatus::InvalidArgument, format!("unknown {what} {v}"));
        let market = match market {
            m if m == RcdcMarket::Wholesale as u32 => Market::Wholesale,
            m if m == RcdcMarket::Retail as u32 => Market::Retail,
            m => return Err(bad("market", m)),
        };
        let configuration = match configuration {
            c if c == RcdcConfiguration::NoColocation as u32 => Configuration::NoColocation,
            c if c == RcdcConfiguration::Colocation as u32 => Configuration::Colocation,
            c if c == RcdcConfiguration::Optimal as u32 => Configuration::Optimal,
            c => return Err(bad("configuration", c)),
        };
        let table = s.inner.simulate(&[market], &[configuration]).map_err(ems)?;
        let r = &table.rows[0].report;
        *out = RcdcReport {
            imported_mwh: r.imported_mwh,
            exported_mwh: r.exported_mwh,
            self_consumption_mwh: r.self_consumption_mwh,
            peak_demand_kw: r.peak_demand_kw,
            energy_cost_usd: r.energy_cost_usd,
            demand_charge_usd: r.demand_charge_usd,
            net_cost_usd: r.net_cost_usd,
            pct_savings_vs_baseline: r.pct_savings_vs_baseline.unwrap_or(f64::NAN),
            investment_adjusted_savings_usd: r.investment_adjusted_savings_usd.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Builds a concave piecewise-linear curve from `len` breakpoints
/// `(powers[i], rates[i])`, the first being `(0, 0)`.
///
/// # Safety
/// `powers` and `rates` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rcdc_curve_new(
    powers: *const f64,
    rates: *const f64,
    len: usize,
    out: *mut *mut RcdcCurve,
) -> RcdcStatus {
    guard(|| {
        if powers.is_null() || rates.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let p = std::slice::from_raw_parts(powers, len);
        let r = std::slice::from_raw_parts(rates, len);
        let pts: Vec<(f64, f64)> = p.iter().copied().zip(r.iter().copied()).collect();
        let inner = ProcessingCurve::from_breakpoints(&pts).map_err(|e| ems(e.into()))?;
        *out = Box::into_raw(Box::new(RcdcCurve { inner }));
        Ok(())
    })
}

/// # Safety
/// `curve` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rcdc_curve_free(curve: *mut RcdcCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Work processed in `interval_hours` at `power_kw`.
///
/// # Safety
/// `curve` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rcdc_curve_compute_work(
    curve: *const RcdcCurve,
    power_kw: f64,
    interval_hours: f64,
    out: *mut f64,
) -> RcdcStatus {
    guard(|| {
        let c = curve.as_ref().ok_or_else(|| null("curve"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c
            .inner
            .compute_work(power_kw, interval_hours)
            .map_err(|e| ems(e.into()))?;
        Ok(())
    })
}

/// Least power that processes `work` in `interval_hours`.
///
/// # Safety
/// `curve` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rcdc_curve_min_power(
    curve: *const RcdcCurve,
    work: f64,
    interval_hours: f64,
    out: *mut f64,
) -> RcdcStatus {
    guard(|| {
        let c = curve.as_ref().ok_or_else(|| null("curve"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c
            .inner
            .min_power_for_work(work, interval_hours)
            .map_err(|e| ems(e.into()))?;
        Ok(())
    })
}
