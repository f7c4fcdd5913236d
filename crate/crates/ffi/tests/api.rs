use std::ffi::{CStr, CString};
use std::ptr;

use wifi_slicing_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ws_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn run_lifecycle() {
    let mut run = ptr::null_mut();
    let status = unsafe { ws_run(c("4-100-4").as_ptr(), c("dynamic").as_ptr(), 2, 2.0, &mut run) };
    assert_eq!(status, WsStatus::Ok);
    assert!(!run.is_null());

    let n = unsafe { ws_run_flow_count(run) };
    assert_eq!(n, 108);
    let mut tx = 0;
    for i in 0..n {
        let mut f = WsFlow {
            flow_id: 0,
            slice: 9,
            tx_packets: 0,
            rx_packets: 0,
            pe: -1.0,
            latency_s: 0.0,
        };
        assert_eq!(unsafe { ws_run_flow(run, i, &mut f) }, WsStatus::Ok);
        assert_eq!(f.flow_id, i as u64);
        assert!(f.slice <= 2);
        assert!((0.0..=1.0).contains(&f.pe));
        assert!(f.rx_packets <= f.tx_packets);
        tx += f.tx_packets;
    }
    assert!(tx > 0);

    let mut m = WsRunMetrics {
        th_sum_bps: 0.0,
        bw_mhz: 0.0,
        mu: 0.0,
        mean_tx_power_b_dbm: 0.0,
        saturated: false,
    };
    assert_eq!(unsafe { ws_run_metrics(run, &mut m) }, WsStatus::Ok);
    assert_eq!(m.mu, m.th_sum_bps / (m.bw_mhz * 1e6));
    assert!(m.mean_tx_power_b_dbm <= 20.0);

    let mut f = std::mem::MaybeUninit::<WsFlow>::uninit();
    assert_eq!(unsafe { ws_run_flow(run, n, f.as_mut_ptr()) }, WsStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));

    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().to_str().unwrap());
    assert_eq!(unsafe { ws_run_write_csv(run, path.as_ptr()) }, WsStatus::Ok);
    assert!(dir.path().join("flows.csv").exists());

    unsafe { ws_run_free(run) };
    unsafe { ws_run_free(ptr::null_mut()) };
}

#[test]
fn json_scenario() {
    let mut run = ptr::null_mut();
    let json = c(r#"{"n_sta_a": 0, "n_sta_b": 4, "n_sta_c": 1, "sim_time": 1.0}"#);
    let status =
        unsafe { ws_run_json(c("mini").as_ptr(), json.as_ptr(), c("static").as_ptr(), 1, &mut run) };
    assert_eq!(status, WsStatus::Ok);
    assert_eq!(unsafe { ws_run_flow_count(run) }, 5);
    unsafe { ws_run_free(run) };

    let bad = c(r#"{"n_sta_a": "two"}"#);
    let status =
        unsafe { ws_run_json(c("mini").as_ptr(), bad.as_ptr(), c("static").as_ptr(), 1, &mut run) };
    assert_eq!(status, WsStatus::Config);
}

#[test]
fn error_codes() {
    let mut run = ptr::null_mut();
    let s = unsafe { ws_run(c("4-100-4").as_ptr(), c("greedy").as_ptr(), 1, 1.0, &mut run) };
    assert_eq!(s, WsStatus::Config);
    assert!(last_error().contains("greedy"));

    let s = unsafe { ws_run(c("9-9-9").as_ptr(), c("single").as_ptr(), 1, 1.0, &mut run) };
    assert_eq!(s, WsStatus::Config);

    let s = unsafe { ws_run(ptr::null(), c("single").as_ptr(), 1, 1.0, &mut run) };
    assert_eq!(s, WsStatus::NullPointer);

    let s = unsafe { ws_run(c("4-100-4").as_ptr(), c("single").as_ptr(), 1, 1.0, ptr::null_mut()) };
    assert_eq!(s, WsStatus::NullPointer);

    assert_eq!(unsafe { ws_run_flow_count(ptr::null()) }, 0);
    let mut out = 0.0;
    assert_eq!(unsafe { ws_data_rate(30, 5, 800, &mut out) }, WsStatus::InvalidArgument);
    assert!(last_error().contains("30"));
}

#[test]
fn helper_functions() {
    let mut rate = 0.0;
    assert_eq!(unsafe { ws_data_rate(20, 11, 800, &mut rate) }, WsStatus::Ok);
    assert!((rate - 234.0 * (25.0 / 3.0) / 13.6e-6).abs() < 1e-3);

    let (mut w, mut sat) = (0u32, true);
    assert_eq!(unsafe { ws_cb_wmin(200e6, 5, 800, &mut w, &mut sat) }, WsStatus::Ok);
    assert_eq!((w, sat), (80, false));

    let (mut m, mut sat) = (0u8, true);
    assert_eq!(unsafe { ws_mcs_min(100e6, 40, 800, &mut m, &mut sat) }, WsStatus::Ok);
    assert_eq!((m, sat), (4, false));

    let mut p = 0.0;
    assert_eq!(unsafe { ws_p_rx_min(5, 20, &mut p) }, WsStatus::Ok);
    assert!((p + 75.99).abs() < 0.005);
    let mut top = 0u8;
    assert_eq!(unsafe { ws_mcs_max(p, 20, &mut top) }, WsStatus::Ok);
    assert_eq!(top, 5);
    assert_eq!(unsafe { ws_mcs_max(f64::NAN, 20, &mut top) }, WsStatus::InvalidArgument);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/wifi_slicing.h")).unwrap();
    for name in [
        "typedef struct WsRun WsRun;",
        "ws_run(",
        "ws_run_json(",
        "ws_run_free(",
        "ws_run_flow(",
        "ws_run_metrics(",
        "ws_run_write_csv(",
        "ws_sweep(",
        "ws_last_error(",
        "ws_data_rate(",
        "ws_cb_wmin(",
        "ws_mcs_min(",
        "ws_mcs_max(",
        "ws_p_rx_min(",
        "WS_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
