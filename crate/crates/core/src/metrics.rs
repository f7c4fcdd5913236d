//! Flow monitoring and run-level KPIs.

use serde::{Deserialize, Serialize};

use crate::scenario::{Slice, PACKET_SIZE_BYTES};
use crate::slicing::{FlowCounters, SliceConfig};

/// Counters accumulated over one controller interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IntervalCounters {
    pub tx: u64,
    pub rx: u64,
    pub delay_sum_ns: u64,
}

/// Per-flow bookkeeping, one flow per station.
///
/// `tx` counts packets generated by the application. Every generated packet
/// ends up in exactly one of `rx` or the drop counters by the end of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub flow_id: usize,
    pub slice: Slice,
    pub tx: u64,
    pub rx: u64,
    /// Sum of generation-to-delivery delays over delivered packets.
    pub delay_sum_ns: u64,
    /// Tail drops at a full queue.
    pub dropped_queue: u64,
    /// RTS attempts exhausted at the maximum contention window.
    pub dropped_rts: u64,
    /// DATA frames that failed the error draw.
    pub lost_air: u64,
    /// Still queued or in flight when the run ended.
    pub unfinished: u64,
    pub intervals: Vec<IntervalCounters>,
    #[serde(skip)]
    current: IntervalCounters,
}

impl FlowRecord {
    pub fn new(flow_id: usize, slice: Slice) -> Self {
        Self {
            flow_id,
            slice,
            tx: 0,
            rx: 0,
            delay_sum_ns: 0,
            dropped_queue: 0,
            dropped_rts: 0,
            lost_air: 0,
            unfinished: 0,
            intervals: Vec::new(),
            current: IntervalCounters::default(),
        }
    }

    pub fn record_generated(&mut self) {
        self.tx += 1;
        self.current.tx += 1;
    }

    pub fn record_delivered(&mut self, delay_ns: u64) {
        self.rx += 1;
        self.delay_sum_ns += delay_ns;
        self.current.rx += 1;
        self.current.delay_sum_ns += delay_ns;
    }

    /// Counters of the interval in progress.
    pub fn current_interval(&self) -> FlowCounters {
        FlowCounters {
            tx: self.current.tx,
            rx: self.current.rx,
        }
    }

    /// Freezes the interval in progress and starts a new one.
    pub fn close_interval(&mut self) -> IntervalCounters {
        let done = std::mem::take(&mut self.current);
        self.intervals.push(done);
        done
    }

    pub fn dropped(&self) -> u64 {
        self.dropped_queue + self.dropped_rts + self.lost_air + self.unfinished
    }

    pub fn pe(&self) -> f64 {
        packet_error_probability(self.tx, self.rx)
    }

    pub fn delay_sum_s(&self) -> f64 {
        self.delay_sum_ns as f64 * 1e-9
    }

    pub fn mean_latency(&self) -> Option<f64> {
        mean_latency(self.delay_sum_s(), self.rx)
    }
}

/// `(tx - rx) / tx`, zero for a flow that never generated anything.
pub fn packet_error_probability(tx: u64, rx: u64) -> f64 {
    if tx == 0 {
        0.0
    } else {
        (tx - rx.min(tx)) as f64 / tx as f64
    }
}

/// Mean end-to-end delay of delivered packets; `None` when nothing was delivered.
pub fn mean_latency(delay_sum_s: f64, rx: u64) -> Option<f64> {
    (rx > 0).then(|| delay_sum_s / rx as f64)
}

/// Aggregate delivered throughput in bit/s.
pub fn total_throughput(total_rx_packets: u64, sim_time_s: f64) -> f64 {
    total_rx_packets as f64 * (PACKET_SIZE_BYTES as f64 * 8.0) / sim_time_s
}

pub fn flows_throughput<'a>(flows: impl IntoIterator<Item = &'a FlowRecord>, sim_time_s: f64) -> f64 {
    total_throughput(flows.into_iter().map(|f| f.rx).sum(), sim_time_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Single,
    Static,
    Dynamic,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Single, Strategy::Static, Strategy::Dynamic];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Single => "single",
            Strategy::Static => "static",
            Strategy::Dynamic => "dynamic",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> crate::error::Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| crate::error::Error::UnknownStrategy(s.to_owned()))
    }
}

/// One row of the per-interval slice configuration log.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigLogEntry {
    pub interval: usize,
    pub time_s: f64,
    /// `None` for the shared channel of the single-channel strategy.
    pub slice: Option<Slice>,
    pub config: SliceConfig,
    /// Controller state: multiplier for slice A, margins for slice B.
    pub state: String,
    pub saturated: bool,
}

/// Bandwidth in MHz held by a run.
///
/// Static runs sum the three slices' widths; dynamic runs average that sum
/// over the logged intervals.
pub fn used_bandwidth(strategy: Strategy, log: &[ConfigLogEntry]) -> f64 {
    match strategy {
        Strategy::Single => 160.0,
        Strategy::Static => log
            .iter()
            .filter(|e| e.interval == 0)
            .map(|e| e.config.width().mhz() as u64)
            .sum::<u64>() as f64,
        Strategy::Dynamic => {
            let intervals = log.iter().map(|e| e.interval).max().map_or(0, |m| m + 1);
            if intervals == 0 {
                return 0.0;
            }
            let total: u64 = log.iter().map(|e| e.config.width().mhz() as u64).sum();
            total as f64 / intervals as f64
        }
    }
}

/// Delivered bit/s per Hz of held spectrum.
pub fn spectrum_efficiency(th_sum_bps: f64, bw_mhz: f64) -> f64 {
    th_sum_bps / (bw_mhz * 1e6)
}

/// Everything one simulation run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_id: String,
    pub setting: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub sim_time_s: f64,
    pub flows: Vec<FlowRecord>,
    pub config_log: Vec<ConfigLogEntry>,
    pub th_sum_bps: f64,
    pub bw_mhz: f64,
    pub mu: f64,
    /// Mean over intervals of the slice-B transmit power (the shared channel's
    /// without slicing); `None` when the run has no slice-B stations.
    pub mean_tx_power_b_dbm: Option<f64>,
    /// Some slice's demand exceeded what its channel can carry at some interval.
    pub saturated: bool,
}

impl RunResult {
    pub fn flows_in(&self, slice: Slice) -> impl Iterator<Item = &FlowRecord> {
        self.flows.iter().filter(move |f| f.slice == slice)
    }
}
