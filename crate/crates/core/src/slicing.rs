//! Radio-resource strategies: one shared channel, static per-slice channels,
//! and KPI-driven dynamic per-slice channels.
//!
//! Every controller is a pure function of its inputs and its own prior state,
//! so a recorded KPI sequence replays to the identical configuration sequence.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::phy::{
    data_rate, noise_power_dbm, ChannelSpec, ChannelWidth, GuardInterval, Mcs, MAX_TX_POWER_DBM,
    MIN_TX_POWER_DBM,
};
use crate::scenario::Slice;

/// Per-flow error threshold of the eMBB service level.
pub const SLA_A_MAX_PE: f64 = 0.02;
/// Per-flow error threshold of the mMTC service level.
pub const SLA_B_MAX_PE: f64 = 0.2;
/// Share of mMTC flows that must meet [`SLA_B_MAX_PE`].
pub const SLA_B_MIN_SHARE: f64 = 0.9;

/// Radio resources assigned to one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    pub channel: ChannelSpec,
    pub gi: GuardInterval,
    pub mcs: Mcs,
    pub tx_power_dbm: f64,
}

impl SliceConfig {
    pub fn width(&self) -> ChannelWidth {
        self.channel.width()
    }
}

impl fmt::Display for SliceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ch {} gi {} mcs {} {:.1} dBm",
            self.channel, self.gi, self.mcs, self.tx_power_dbm
        )
    }
}

/// Result of a minimum-width search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WidthChoice {
    pub width: ChannelWidth,
    /// No width carries the demand; `width` is then 160 MHz.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McsChoice {
    pub mcs: Mcs,
    pub saturated: bool,
}

/// Narrowest channel whose rate at `(mcs, gi)` carries `required_bps`.
pub fn cb_wmin(required_bps: f64, mcs: Mcs, gi: GuardInterval) -> WidthChoice {
    ChannelWidth::ALL
        .into_iter()
        .find(|&w| data_rate(w, mcs, gi) >= required_bps)
        .map(|width| WidthChoice {
            width,
            saturated: false,
        })
        .unwrap_or(WidthChoice {
            width: ChannelWidth::W160,
            saturated: true,
        })
}

/// Lowest MCS whose rate at `(width, gi)` carries `required_bps`.
pub fn mcs_min(required_bps: f64, width: ChannelWidth, gi: GuardInterval) -> McsChoice {
    Mcs::all()
        .find(|&m| data_rate(width, m, gi) >= required_bps)
        .map(|mcs| McsChoice {
            mcs,
            saturated: false,
        })
        .unwrap_or(McsChoice {
            mcs: Mcs::MAX,
            saturated: true,
        })
}

/// Highest MCS decodable at the 0.001 error target for this received power.
///
/// The error model is strictly decreasing in SNR and equals the target exactly
/// at each MCS threshold, so the target is met iff `snr >= threshold`. Floors
/// at MCS 0 when nothing qualifies.
pub fn mcs_max(rx_power_dbm: f64, width: ChannelWidth) -> Mcs {
    let snr = rx_power_dbm - noise_power_dbm(width);
    Mcs::all()
        .rev()
        .find(|m| snr >= m.min_snr_db())
        .unwrap_or(Mcs::MIN)
}

/// Minimum received power at which `mcs` meets the error target; inverse of [`mcs_max`].
pub fn p_rx_min(mcs: Mcs, width: ChannelWidth) -> f64 {
    noise_power_dbm(width) + mcs.min_snr_db()
}

/// Pooled error probability `(tx - rx) / tx`, clamped to `[0, 1]`.
///
/// Interval counters can see more deliveries than generations when queued
/// packets from a previous interval drain, hence the clamp.
pub fn error_probability(tx: u64, rx: u64) -> f64 {
    if tx == 0 {
        return 0.0;
    }
    (tx.saturating_sub(rx)) as f64 / tx as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlowCounters {
    pub tx: u64,
    pub rx: u64,
}

impl FlowCounters {
    pub fn pe(&self) -> f64 {
        error_probability(self.tx, self.rx)
    }
}

/// What a dynamic controller sees of one slice at an interval boundary.
#[derive(Debug, Clone, Default)]
pub struct IntervalKpis {
    /// Per-flow counters over the last interval.
    pub flows: Vec<FlowCounters>,
    /// Pooled error probability of the interval before the last, if any.
    pub prev_aggregate_pe: Option<f64>,
    /// Received power at the AP per station, at maximum transmit power.
    pub rx_power_dbm: Vec<f64>,
    /// Measured link loss per station (`tx power - rx power`).
    pub loss_db: Vec<f64>,
}

impl IntervalKpis {
    pub fn aggregate_pe(&self) -> f64 {
        let (tx, rx) = self
            .flows
            .iter()
            .fold((0, 0), |(tx, rx), f| (tx + f.tx, rx + f.rx));
        error_probability(tx, rx)
    }

    pub fn min_rx_power(&self) -> Option<f64> {
        self.rx_power_dbm.iter().copied().reduce(f64::min)
    }

    fn worsened(&self) -> bool {
        self.prev_aggregate_pe
            .is_some_and(|prev| self.aggregate_pe() > prev)
    }

    fn improved(&self) -> bool {
        self.prev_aggregate_pe
            .is_some_and(|prev| self.aggregate_pe() < prev)
    }
}

/// A slice configuration plus whether its demand exceeded what the channel can carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    pub config: SliceConfig,
    pub saturated: bool,
}

/// The 160 MHz shared channel every station uses without slicing.
pub fn single_channel_config() -> SliceConfig {
    SliceConfig {
        channel: ChannelSpec::lowest(ChannelWidth::W160),
        gi: GuardInterval::Ns1600,
        mcs: Mcs::new(5).expect("valid mcs"),
        tx_power_dbm: MAX_TX_POWER_DBM,
    }
}

/// Channel of the mMTC slice, in the middle of the band.
pub fn slice_b_channel() -> ChannelSpec {
    ChannelSpec::new(100, ChannelWidth::W20).expect("channel 100 is in the plan")
}

/// Aggregate offered load per slice in bit/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SliceDemands {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticAllocation {
    pub a: Allocation,
    pub b: Allocation,
    pub c: Allocation,
    /// Pairs of slices whose channels share spectrum.
    pub conflicts: Vec<(Slice, Slice)>,
}

impl StaticAllocation {
    pub fn get(&self, slice: Slice) -> &Allocation {
        match slice {
            Slice::A => &self.a,
            Slice::B => &self.b,
            Slice::C => &self.c,
        }
    }
}

/// One channel per slice, fixed for the whole run.
pub fn static_allocate(demands: SliceDemands) -> StaticAllocation {
    let gi = GuardInterval::Ns1600;
    let mcs = Mcs::new(5).expect("valid mcs");
    let fixed = |channel| SliceConfig {
        channel,
        gi,
        mcs,
        tx_power_dbm: MAX_TX_POWER_DBM,
    };

    let a_width = cb_wmin(demands.a, mcs, gi);
    let c_width = cb_wmin(demands.c, mcs, gi);
    let a = Allocation {
        config: fixed(ChannelSpec::lowest(a_width.width)),
        saturated: a_width.saturated,
    };
    let b = Allocation {
        config: fixed(slice_b_channel()),
        saturated: cb_wmin(demands.b, mcs, gi).width != ChannelWidth::W20,
    };
    let c = Allocation {
        config: fixed(ChannelSpec::highest(c_width.width)),
        saturated: c_width.saturated,
    };

    let mut conflicts = Vec::new();
    for (x, y, cx, cy) in [
        (Slice::A, Slice::B, &a, &b),
        (Slice::A, Slice::C, &a, &c),
        (Slice::B, Slice::C, &b, &c),
    ] {
        if cx.config.channel.overlap(&cy.config.channel) > 0.0 {
            log::warn!(
                "static allocation: slice {x} ({}) overlaps slice {y} ({})",
                cx.config.channel,
                cy.config.channel
            );
            conflicts.push((x, y));
        }
    }
    StaticAllocation { a, b, c, conflicts }
}

/// Bandwidth multiplier of the eMBB state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SliceAState {
    #[default]
    Single,
    Double,
}

impl SliceAState {
    pub fn multiplier(self) -> u32 {
        match self {
            Self::Single => 1,
            Self::Double => 2,
        }
    }

    /// One step of the two-state machine.
    ///
    /// Doubles when some flow misses the SLA and the pooled error got worse;
    /// returns to single width when every flow meets it and the pooled error got better.
    pub fn next(self, sla_ok: bool, worsened: bool, improved: bool) -> Self {
        if !sla_ok && worsened {
            Self::Double
        } else if sla_ok && improved {
            Self::Single
        } else {
            self
        }
    }
}

/// Width and MCS ceiling for a slice served at the weakest station's link budget.
///
/// The MCS ceiling is evaluated against the noise of each candidate width so
/// the chosen pair is decodable on the channel that is actually allocated.
fn fit_width(demand_bps: f64, rx_min_dbm: f64, gi: GuardInterval) -> WidthChoice {
    ChannelWidth::ALL
        .into_iter()
        .find(|&w| data_rate(w, mcs_max(rx_min_dbm, w), gi) >= demand_bps)
        .map(|width| WidthChoice {
            width,
            saturated: false,
        })
        .unwrap_or(WidthChoice {
            width: ChannelWidth::W160,
            saturated: true,
        })
}

fn weakest(kpis: &IntervalKpis) -> f64 {
    // With no measurement, plan for the worst decodable link.
    kpis.min_rx_power().unwrap_or(f64::NEG_INFINITY)
}

/// Dynamic eMBB controller: lowest channels, 20 dBm, 800 ns GI, doubling state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceAController {
    demand_bps: f64,
    state: SliceAState,
}

impl SliceAController {
    pub fn init(demand_bps: f64, kpis: &IntervalKpis) -> (Self, Allocation) {
        let ctl = Self {
            demand_bps,
            state: SliceAState::Single,
        };
        let alloc = ctl.configure(kpis);
        (ctl, alloc)
    }

    pub fn state(&self) -> SliceAState {
        self.state
    }

    pub fn update(&mut self, kpis: &IntervalKpis) -> Allocation {
        let sla_ok = kpis.flows.iter().all(|f| f.pe() <= SLA_A_MAX_PE);
        self.state = self.state.next(sla_ok, kpis.worsened(), kpis.improved());
        self.configure(kpis)
    }

    fn configure(&self, kpis: &IntervalKpis) -> Allocation {
        let gi = GuardInterval::Ns800;
        let rx_min = weakest(kpis);
        let fit = fit_width(self.demand_bps, rx_min, gi);
        let width = match self.state {
            SliceAState::Single => fit.width,
            SliceAState::Double => fit.width.doubled(),
        };
        let ceiling = mcs_max(rx_min, width);
        let floor = mcs_min(self.demand_bps, width, gi);
        let mcs = slice_a_mcs(ceiling, floor.mcs);
        Allocation {
            config: SliceConfig {
                channel: ChannelSpec::lowest(width),
                gi,
                mcs,
                tx_power_dbm: MAX_TX_POWER_DBM,
            },
            saturated: fit.saturated || floor.saturated,
        }
    }
}

/// Additive margins of the mMTC controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceBMargins {
    mcs_add: u8,
    tx_power_add: u8,
}

impl Default for SliceBMargins {
    fn default() -> Self {
        Self {
            mcs_add: 1,
            tx_power_add: 3,
        }
    }
}

impl SliceBMargins {
    pub const MCS_ADD_RANGE: (u8, u8) = (1, 4);
    pub const TX_POWER_ADD_RANGE: (u8, u8) = (1, 6);

    pub fn new(mcs_add: u8, tx_power_add: u8) -> Option<Self> {
        let ok = (Self::MCS_ADD_RANGE.0..=Self::MCS_ADD_RANGE.1).contains(&mcs_add)
            && (Self::TX_POWER_ADD_RANGE.0..=Self::TX_POWER_ADD_RANGE.1).contains(&tx_power_add);
        ok.then_some(Self {
            mcs_add,
            tx_power_add,
        })
    }

    pub fn mcs_add(&self) -> u8 {
        self.mcs_add
    }

    pub fn tx_power_add(&self) -> u8 {
        self.tx_power_add
    }

    /// Raises power first, then trades power for MCS when the SLA is failing
    /// and getting worse; relaxes in the opposite order when it holds and improves.
    pub fn next(self, sla_ok: bool, worsened: bool, improved: bool) -> Self {
        let Self {
            mut mcs_add,
            mut tx_power_add,
        } = self;
        if !sla_ok && worsened {
            if tx_power_add < Self::TX_POWER_ADD_RANGE.1 {
                tx_power_add += 1;
            } else if mcs_add < Self::MCS_ADD_RANGE.1 {
                mcs_add += 1;
                tx_power_add = 3;
            }
        }
        if sla_ok && improved {
            if tx_power_add > Self::TX_POWER_ADD_RANGE.0 {
                tx_power_add -= 1;
            } else if mcs_add > Self::MCS_ADD_RANGE.0 {
                mcs_add -= 1;
                tx_power_add = 3;
            }
        }
        Self {
            mcs_add,
            tx_power_add,
        }
    }
}

impl fmt::Display for SliceBMargins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mcs_add={};tx_add={}", self.mcs_add, self.tx_power_add)
    }
}

/// Index into the ascending loss list that covers 90 % of the stations.
pub fn loss_percentile_index(n_stations: usize) -> usize {
    (9 * n_stations / 10).min(n_stations.saturating_sub(1))
}

/// Dynamic mMTC controller: fixed 20 MHz on channel 100, minimal power for 90 % of stations.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceBController {
    demand_bps: f64,
    margins: SliceBMargins,
}

impl SliceBController {
    pub fn init(demand_bps: f64, kpis: &IntervalKpis) -> (Self, Allocation) {
        let ctl = Self {
            demand_bps,
            margins: SliceBMargins::default(),
        };
        let alloc = ctl.configure(kpis);
        (ctl, alloc)
    }

    pub fn margins(&self) -> SliceBMargins {
        self.margins
    }

    pub fn update(&mut self, kpis: &IntervalKpis) -> Allocation {
        self.margins = self
            .margins
            .next(sla_b_holds(&kpis.flows), kpis.worsened(), kpis.improved());
        self.configure(kpis)
    }

    fn configure(&self, kpis: &IntervalKpis) -> Allocation {
        let gi = GuardInterval::Ns1600;
        let width = ChannelWidth::W20;
        let floor = mcs_min(self.demand_bps, width, gi);
        let mcs = Mcs::saturating(floor.mcs.index() as i32 + self.margins.mcs_add as i32);

        let mut losses = kpis.loss_db.clone();
        losses.sort_by(f64::total_cmp);
        let loss = if losses.is_empty() {
            0.0
        } else {
            losses[loss_percentile_index(losses.len())]
        };
        let tx_power = loss + p_rx_min(mcs, width) + self.margins.tx_power_add as f64;
        Allocation {
            config: SliceConfig {
                channel: slice_b_channel(),
                gi,
                mcs,
                tx_power_dbm: tx_power.clamp(MIN_TX_POWER_DBM, MAX_TX_POWER_DBM),
            },
            saturated: floor.saturated,
        }
    }
}

/// At least 90 % of the flows meet the mMTC error threshold.
pub fn sla_b_holds(flows: &[FlowCounters]) -> bool {
    if flows.is_empty() {
        return true;
    }
    let ok = flows.iter().filter(|f| f.pe() <= SLA_B_MAX_PE).count();
    ok as f64 >= SLA_B_MIN_SHARE * flows.len() as f64
}

/// Dynamic URLLC controller: highest channels, highest usable MCS, recomputed every interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCController {
    demand_bps: f64,
}

impl SliceCController {
    pub fn new(demand_bps: f64) -> Self {
        Self { demand_bps }
    }

    pub fn configure(&self, kpis: &IntervalKpis) -> Allocation {
        let gi = GuardInterval::Ns800;
        let rx_min = weakest(kpis);
        let fit = fit_width(self.demand_bps, rx_min, gi);
        let ceiling = mcs_max(rx_min, fit.width);
        let floor = mcs_min(self.demand_bps, fit.width, gi);
        let mcs = slice_c_mcs(ceiling, floor.mcs);
        Allocation {
            config: SliceConfig {
                channel: ChannelSpec::highest(fit.width),
                gi,
                mcs,
                tx_power_dbm: MAX_TX_POWER_DBM,
            },
            saturated: fit.saturated || floor.saturated,
        }
    }
}

/// URLLC MCS rule: prefer the ceiling when it exceeds the floor, else one above the floor.
pub fn slice_c_mcs(ceiling: Mcs, floor: Mcs) -> Mcs {
    if ceiling > floor {
        ceiling
    } else {
        Mcs::saturating(floor.index() as i32 + 1)
    }
}

/// eMBB MCS rule: one above the floor when the ceiling allows it, else the ceiling.
pub fn slice_a_mcs(ceiling: Mcs, floor: Mcs) -> Mcs {
    if ceiling > floor {
        Mcs::saturating(floor.index() as i32 + 1)
    } else {
        ceiling
    }
}
