//! Discrete-event simulator of uplink Wi-Fi with SSID-based network slicing.
//!
//! One AP serves three slices of stations (broadband, massive low-rate, and
//! low-latency traffic) under CSMA/CA with RTS/CTS. Three radio-resource
//! strategies are compared: everyone on one 160 MHz channel, a fixed channel
//! per slice, and per-slice channels reconfigured every control interval from
//! measured KPIs.
//!
//! ```
//! use wifi_slicing::{run_experiment, RunSpec, Setting, Strategy};
//!
//! let mut spec = RunSpec::new(Setting::S4_100_4, Strategy::Static, 1);
//! spec.config.sim_time = 1.0;
//! let result = run_experiment(&spec).unwrap();
//! assert_eq!(result.flows.len(), 108);
//! assert_eq!(result.mu, result.th_sum_bps / (result.bw_mhz * 1e6));
//! ```

pub mod error;
pub mod mac;
pub mod metrics;
pub mod phy;
pub mod runner;
pub mod scenario;
pub mod slicing;
pub mod summary;

pub use error::{Error, Result};
pub use metrics::{FlowRecord, RunResult, Strategy};
pub use runner::{run_experiment, sweep, ExperimentPlan, RunSpec};
pub use scenario::{Scenario, ScenarioConfig, Setting, Slice};
pub use slicing::SliceConfig;
