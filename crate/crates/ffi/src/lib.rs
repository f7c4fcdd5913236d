//! C ABI over the wifi-slicing simulator.
//!
//! Every fallible call returns a [`WsStatus`] and writes its result through an
//! out-pointer. On failure, `ws_last_error` returns a message for the calling
//! thread until its next failing call. Runs are opaque [`WsRun`] handles owned
//! by the caller and released with `ws_run_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use wifi_slicing::phy::{data_rate, ChannelWidth, GuardInterval, Mcs};
use wifi_slicing::runner::{write_results, RunSpec};
use wifi_slicing::slicing::{cb_wmin, mcs_max, mcs_min, p_rx_min};
use wifi_slicing::{Error, ExperimentPlan, RunResult, ScenarioConfig, Setting, Slice, Strategy};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    /// Some runs of a sweep failed; the others were written.
    Partial = 5,
    Panic = 6,
}

/// Opaque result of one simulation run.
pub struct WsRun {
    result: RunResult,
}

/// One flow of a run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsFlow {
    pub flow_id: u64,
    /// 0 = A (eMBB), 1 = B (mMTC), 2 = C (URLLC).
    pub slice: u8,
    pub tx_packets: u64,
    pub rx_packets: u64,
    pub pe: f64,
    /// Mean delay in seconds, NaN when nothing was delivered.
    pub latency_s: f64,
}

/// Run-level KPIs.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsRunMetrics {
    pub th_sum_bps: f64,
    pub bw_mhz: f64,
    pub mu: f64,
    /// NaN when the run has no slice-B stations.
    pub mean_tx_power_b_dbm: f64,
    pub saturated: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: WsStatus, msg: impl Into<String>) -> WsStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> WsStatus {
    let status = match &e {
        Error::Io { .. } | Error::Csv(_) => WsStatus::Io,
        _ => WsStatus::Config,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into [`WsStatus::Panic`].
fn guarded(f: impl FnOnce() -> WsStatus) -> WsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".to_owned());
        fail(WsStatus::Panic, msg)
    })
}

/// # Safety
/// `p` must be null or a valid nul-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, WsStatus> {
    if p.is_null() {
        return Err(fail(WsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(WsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(WsStatus::NullPointer, concat!(stringify!($p), " is null"));
        }
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the calling thread's last failure, or null. Valid until its next failing call.
#[no_mangle]
pub extern "C" fn ws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

fn finish_run(spec: RunSpec, out: *mut *mut WsRun) -> WsStatus {
    match wifi_slicing::run_experiment(&spec) {
        Ok(result) => {
            // SAFETY: checked non-null by the caller.
            unsafe { *out = Box::into_raw(Box::new(WsRun { result })) };
            WsStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Simulates one built-in setting (`"2-100-6"`, `"4-100-4"`, `"6-100-2"`)
/// under `strategy` (`"single"`, `"static"`, `"dynamic"`).
///
/// `sim_time_s <= 0` keeps the default duration.
///
/// # Safety
/// String arguments must be valid nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_run(
    setting: *const c_char,
    strategy: *const c_char,
    seed: u64,
    sim_time_s: f64,
    out: *mut *mut WsRun,
) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let setting = try_status!(str_arg(setting, "setting"));
        let strategy = try_status!(str_arg(strategy, "strategy"));
        let setting: Setting = match setting.parse() {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let strategy: Strategy = match strategy.parse() {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let mut spec = RunSpec::new(setting, strategy, seed);
        if sim_time_s > 0.0 {
            spec.config.sim_time = sim_time_s;
        }
        finish_run(spec, out)
    })
}

/// Simulates a scenario given as a JSON object of fields overriding the
/// 4-100-4 defaults. `label` names the run in its id and CSV rows.
///
/// # Safety
/// String arguments must be valid nul-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_run_json(
    label: *const c_char,
    config_json: *const c_char,
    strategy: *const c_char,
    seed: u64,
    out: *mut *mut WsRun,
) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let label = try_status!(str_arg(label, "label"));
        let json = try_status!(str_arg(config_json, "config_json"));
        let strategy = try_status!(str_arg(strategy, "strategy"));
        let strategy: Strategy = match strategy.parse() {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let config = match ScenarioConfig::from_json_str(json, &ScenarioConfig::default()) {
            Ok(c) => c,
            Err(e) => return from_error(e),
        };
        let spec = RunSpec {
            setting: label.to_owned(),
            config,
            strategy,
            seed,
        };
        finish_run(spec, out)
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or a handle from `ws_run`/`ws_run_json` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ws_run_free(run: *mut WsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of flows in a run; 0 for null.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ws_run_flow_count(run: *const WsRun) -> usize {
    run.as_ref().map_or(0, |r| r.result.flows.len())
}

/// # Safety
/// `run` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_run_flow(run: *const WsRun, index: usize, out: *mut WsFlow) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let Some(run) = run.as_ref() else {
            return fail(WsStatus::NullPointer, "run is null");
        };
        let Some(f) = run.result.flows.get(index) else {
            return fail(
                WsStatus::InvalidArgument,
                format!("flow {index} out of range ({} flows)", run.result.flows.len()),
            );
        };
        *out = WsFlow {
            flow_id: f.flow_id as u64,
            slice: match f.slice {
                Slice::A => 0,
                Slice::B => 1,
                Slice::C => 2,
            },
            tx_packets: f.tx,
            rx_packets: f.rx,
            pe: f.pe(),
            latency_s: f.mean_latency().unwrap_or(f64::NAN),
        };
        WsStatus::Ok
    })
}

/// # Safety
/// `run` must be null or a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_run_metrics(run: *const WsRun, out: *mut WsRunMetrics) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let Some(run) = run.as_ref() else {
            return fail(WsStatus::NullPointer, "run is null");
        };
        let r = &run.result;
        *out = WsRunMetrics {
            th_sum_bps: r.th_sum_bps,
            bw_mhz: r.bw_mhz,
            mu: r.mu,
            mean_tx_power_b_dbm: r.mean_tx_power_b_dbm.unwrap_or(f64::NAN),
            saturated: r.saturated,
        };
        WsStatus::Ok
    })
}

/// Writes the run's flows, runs and config-log CSVs into an existing directory.
///
/// # Safety
/// `run` must be null or a live handle; `dir` a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ws_run_write_csv(run: *const WsRun, dir: *const c_char) -> WsStatus {
    guarded(|| {
        let Some(run) = run.as_ref() else {
            return fail(WsStatus::NullPointer, "run is null");
        };
        let dir = try_status!(str_arg(dir, "dir"));
        match write_results(std::slice::from_ref(&run.result), Path::new(dir)) {
            Ok(_) => WsStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Runs every setting and strategy over seeds 1..=20 and writes the CSVs into `out_dir`.
///
/// `jobs == 0` uses all cores. `failed_runs` (nullable) receives the number of failed runs.
///
/// # Safety
/// `out_dir` must be a valid nul-terminated string; `failed_runs` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ws_sweep(out_dir: *const c_char, jobs: u32, failed_runs: *mut usize) -> WsStatus {
    guarded(|| {
        let dir = try_status!(str_arg(out_dir, "out_dir"));
        let mut plan = ExperimentPlan::full();
        if jobs > 0 {
            plan = plan.with_jobs(jobs as usize);
        }
        match wifi_slicing::sweep(&plan, Path::new(dir)) {
            Ok(report) => {
                if !failed_runs.is_null() {
                    *failed_runs = report.failures.len();
                }
                if report.failures.is_empty() {
                    WsStatus::Ok
                } else {
                    let ids: Vec<_> = report.failures.iter().map(|(id, _)| id.as_str()).collect();
                    fail(WsStatus::Partial, format!("failed runs: {}", ids.join(", ")))
                }
            }
            Err(e) => from_error(e),
        }
    })
}

fn phy_args(width_mhz: u32, mcs: u8, gi_ns: u32) -> Result<(ChannelWidth, Mcs, GuardInterval), WsStatus> {
    let invalid = |e: Error| fail(WsStatus::InvalidArgument, e.to_string());
    Ok((
        ChannelWidth::from_mhz(width_mhz).map_err(invalid)?,
        Mcs::new(mcs).map_err(invalid)?,
        GuardInterval::from_ns(gi_ns).map_err(invalid)?,
    ))
}

/// PHY rate in bit/s of one spatial stream.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_data_rate(width_mhz: u32, mcs: u8, gi_ns: u32, out: *mut f64) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let (w, m, g) = try_status!(phy_args(width_mhz, mcs, gi_ns));
        *out = data_rate(w, m, g);
        WsStatus::Ok
    })
}

/// Narrowest width carrying `demand_bps`; `saturated` is set when even 160 MHz falls short.
///
/// # Safety
/// Out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_cb_wmin(
    demand_bps: f64,
    mcs: u8,
    gi_ns: u32,
    width_mhz: *mut u32,
    saturated: *mut bool,
) -> WsStatus {
    guarded(|| {
        out_ptr!(width_mhz);
        out_ptr!(saturated);
        let (_, m, g) = try_status!(phy_args(20, mcs, gi_ns));
        let c = cb_wmin(demand_bps, m, g);
        *width_mhz = c.width.mhz();
        *saturated = c.saturated;
        WsStatus::Ok
    })
}

/// Lowest MCS carrying `demand_bps` at this width.
///
/// # Safety
/// Out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_mcs_min(
    demand_bps: f64,
    width_mhz: u32,
    gi_ns: u32,
    mcs: *mut u8,
    saturated: *mut bool,
) -> WsStatus {
    guarded(|| {
        out_ptr!(mcs);
        out_ptr!(saturated);
        let (w, _, g) = try_status!(phy_args(width_mhz, 0, gi_ns));
        let c = mcs_min(demand_bps, w, g);
        *mcs = c.mcs.index();
        *saturated = c.saturated;
        WsStatus::Ok
    })
}

/// Highest MCS meeting the 0.001 error target at this received power.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_mcs_max(rx_power_dbm: f64, width_mhz: u32, out: *mut u8) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        if !rx_power_dbm.is_finite() {
            return fail(WsStatus::InvalidArgument, "rx power must be finite");
        }
        let (w, _, _) = try_status!(phy_args(width_mhz, 0, 800));
        *out = mcs_max(rx_power_dbm, w).index();
        WsStatus::Ok
    })
}

/// Received power at which `mcs` just meets the error target.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ws_p_rx_min(mcs: u8, width_mhz: u32, out: *mut f64) -> WsStatus {
    guarded(|| {
        out_ptr!(out);
        let (w, m, _) = try_status!(phy_args(width_mhz, mcs, 800));
        *out = p_rx_min(m, w);
        WsStatus::Ok
    })
}
