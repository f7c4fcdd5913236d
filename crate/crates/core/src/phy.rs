//! Radio abstractions for the 5 GHz band.
//!
//! Everything here is a pure function over small value types: the ETSI
//! channel plan, the HE single-stream rate ladder, a logistic packet-error
//! model calibrated at each MCS sensitivity threshold, log-distance indoor
//! path loss, thermal noise and SINR with rectangular spectral overlap.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OFDM symbol duration without guard interval, in nanoseconds.
const SYMBOL_NS: f64 = 12_800.0;

/// Receiver noise figure added on top of thermal noise.
pub const NOISE_FIGURE_DB: f64 = 7.0;

/// Regulatory cap on transmit power in the 5 GHz band (Europe).
pub const MAX_TX_POWER_DBM: f64 = 20.0;
pub const MIN_TX_POWER_DBM: f64 = -20.0;

/// Target packet error probability used by the MCS selection helpers.
pub const TARGET_PER: f64 = 0.001;

/// Distance between the calibration point and the 50 % point of the PER curve.
const PER_MIDPOINT_OFFSET_DB: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ChannelWidth {
    W20,
    W40,
    W80,
    W160,
}

impl ChannelWidth {
    pub const ALL: [ChannelWidth; 4] = [Self::W20, Self::W40, Self::W80, Self::W160];

    pub fn from_mhz(mhz: u32) -> Result<Self> {
        match mhz {
            20 => Ok(Self::W20),
            40 => Ok(Self::W40),
            80 => Ok(Self::W80),
            160 => Ok(Self::W160),
            other => Err(Error::InvalidWidth(other)),
        }
    }

    pub fn mhz(self) -> u32 {
        match self {
            Self::W20 => 20,
            Self::W40 => 40,
            Self::W80 => 80,
            Self::W160 => 160,
        }
    }

    /// Number of data subcarriers of an HE PPDU at this width.
    pub fn data_subcarriers(self) -> u32 {
        match self {
            Self::W20 => 234,
            Self::W40 => 468,
            Self::W80 => 980,
            Self::W160 => 1960,
        }
    }

    /// Next wider channel, saturating at 160 MHz.
    pub fn doubled(self) -> Self {
        match self {
            Self::W20 => Self::W40,
            Self::W40 => Self::W80,
            Self::W80 | Self::W160 => Self::W160,
        }
    }
}

impl TryFrom<u32> for ChannelWidth {
    type Error = Error;

    fn try_from(mhz: u32) -> Result<Self> {
        Self::from_mhz(mhz)
    }
}

impl From<ChannelWidth> for u32 {
    fn from(w: ChannelWidth) -> u32 {
        w.mhz()
    }
}

impl fmt::Display for ChannelWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mhz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum GuardInterval {
    Ns800,
    Ns1600,
    Ns3200,
}

impl GuardInterval {
    pub const ALL: [GuardInterval; 3] = [Self::Ns800, Self::Ns1600, Self::Ns3200];

    pub fn from_ns(ns: u32) -> Result<Self> {
        match ns {
            800 => Ok(Self::Ns800),
            1600 => Ok(Self::Ns1600),
            3200 => Ok(Self::Ns3200),
            other => Err(Error::InvalidGuardInterval(other)),
        }
    }

    pub fn ns(self) -> u32 {
        match self {
            Self::Ns800 => 800,
            Self::Ns1600 => 1600,
            Self::Ns3200 => 3200,
        }
    }
}

impl TryFrom<u32> for GuardInterval {
    type Error = Error;

    fn try_from(ns: u32) -> Result<Self> {
        Self::from_ns(ns)
    }
}

impl From<GuardInterval> for u32 {
    fn from(gi: GuardInterval) -> u32 {
        gi.ns()
    }
}

impl fmt::Display for GuardInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ns())
    }
}

/// One rung of the HE MCS ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: u8,
    /// Coded bits per subcarrier per symbol (modulation order times code rate).
    pub bits_per_subcarrier: f64,
    /// SNR at which a 1472-byte packet sees a 0.001 error probability.
    pub min_snr_db: f64,
}

const fn entry(index: u8, bits_per_subcarrier: f64, min_snr_db: f64) -> McsEntry {
    McsEntry {
        index,
        bits_per_subcarrier,
        min_snr_db,
    }
}

pub const MCS_TABLE: [McsEntry; 12] = [
    entry(0, 0.5, 2.0),
    entry(1, 1.0, 5.0),
    entry(2, 1.5, 9.0),
    entry(3, 2.0, 11.0),
    entry(4, 3.0, 15.0),
    entry(5, 4.0, 18.0),
    entry(6, 4.5, 20.0),
    entry(7, 5.0, 25.0),
    entry(8, 6.0, 29.0),
    entry(9, 20.0 / 3.0, 31.0),
    entry(10, 7.5, 34.0),
    entry(11, 25.0 / 3.0, 37.0),
];

/// HE MCS index, always within `0..=11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Mcs(u8);

impl Mcs {
    pub const MIN: Mcs = Mcs(0);
    pub const MAX: Mcs = Mcs(11);

    pub fn new(index: u8) -> Result<Self> {
        if index <= Self::MAX.0 {
            Ok(Mcs(index))
        } else {
            Err(Error::InvalidMcs(index))
        }
    }

    /// Clamps an arbitrary integer onto the ladder.
    pub fn saturating(index: i32) -> Self {
        Mcs(index.clamp(0, Self::MAX.0 as i32) as u8)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn entry(self) -> &'static McsEntry {
        &MCS_TABLE[self.0 as usize]
    }

    pub fn min_snr_db(self) -> f64 {
        self.entry().min_snr_db
    }

    pub fn all() -> impl DoubleEndedIterator<Item = Mcs> + Clone {
        (0..=Self::MAX.0).map(Mcs)
    }
}

impl TryFrom<u8> for Mcs {
    type Error = Error;

    fn try_from(index: u8) -> Result<Self> {
        Mcs::new(index)
    }
}

impl From<Mcs> for u8 {
    fn from(m: Mcs) -> u8 {
        m.0
    }
}

impl fmt::Display for Mcs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// PHY parameters a station transmits with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhyParams {
    pub mcs: Mcs,
    pub gi: GuardInterval,
    pub tx_power_dbm: f64,
}

impl PhyParams {
    pub fn new(mcs: Mcs, gi: GuardInterval, tx_power_dbm: f64) -> Result<Self> {
        if !(MIN_TX_POWER_DBM..=MAX_TX_POWER_DBM).contains(&tx_power_dbm) {
            return Err(Error::InvalidTxPower(tx_power_dbm));
        }
        Ok(Self {
            mcs,
            gi,
            tx_power_dbm,
        })
    }
}

/// Single-spatial-stream HE data rate in bit/s.
pub fn data_rate(width: ChannelWidth, mcs: Mcs, gi: GuardInterval) -> f64 {
    let bits_per_symbol = width.data_subcarriers() as f64 * mcs.entry().bits_per_subcarrier;
    bits_per_symbol / ((SYMBOL_NS + gi.ns() as f64) * 1e-9)
}

/// [`data_rate`] over raw integers, rejecting values outside the parameter domain.
pub fn data_rate_checked(width_mhz: u32, mcs: u8, gi_ns: u32) -> Result<f64> {
    Ok(data_rate(
        ChannelWidth::from_mhz(width_mhz)?,
        Mcs::new(mcs)?,
        GuardInterval::from_ns(gi_ns)?,
    ))
}

fn per_slope() -> f64 {
    999f64.ln() / PER_MIDPOINT_OFFSET_DB
}

/// Packet error probability of a 1472-byte packet at the given SNR.
///
/// Logistic in SNR, equal to 0.001 at the MCS threshold and 0.5 three dB below it.
pub fn packet_error_rate(snr_db: f64, mcs: Mcs) -> f64 {
    let midpoint = mcs.min_snr_db() - PER_MIDPOINT_OFFSET_DB;
    1.0 / (1.0 + (per_slope() * (snr_db - midpoint)).exp())
}

/// Thermal noise power over the channel including the receiver noise figure, in dBm.
pub fn noise_power_dbm(width: ChannelWidth) -> f64 {
    -174.0 + 10.0 * (width.mhz() as f64 * 1e6).log10() + NOISE_FIGURE_DB
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Log-distance indoor propagation, clamped to the reference distance in the near field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub reference_loss_db: f64,
    pub exponent: f64,
    pub reference_distance_m: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            reference_loss_db: 46.4,
            exponent: 3.0,
            reference_distance_m: 1.0,
        }
    }
}

impl PathLossModel {
    pub fn loss_at_distance(&self, d: f64) -> f64 {
        let d = d.max(self.reference_distance_m) / self.reference_distance_m;
        self.reference_loss_db + 10.0 * self.exponent * d.log10()
    }

    /// Path loss between two points plus a frozen shadowing offset.
    pub fn path_loss(&self, tx: &Point3, rx: &Point3, shadowing_db: f64) -> f64 {
        self.loss_at_distance(tx.distance(rx)) + shadowing_db
    }
}

const PLAN_20: &[u16] = &[
    36, 40, 44, 48, 52, 56, 60, 64, 100, 104, 108, 112, 116, 120, 124, 128, 132, 136, 140, 149,
    153, 157, 161, 165,
];
const PLAN_40: &[u16] = &[38, 46, 54, 62, 102, 110, 118, 126, 134, 151, 159];
const PLAN_80: &[u16] = &[42, 58, 106, 122, 138, 155];
const PLAN_160: &[u16] = &[50, 114];

/// Valid channel numbers for a width, ascending.
pub fn channel_plan(width: ChannelWidth) -> &'static [u16] {
    match width {
        ChannelWidth::W20 => PLAN_20,
        ChannelWidth::W40 => PLAN_40,
        ChannelWidth::W80 => PLAN_80,
        ChannelWidth::W160 => PLAN_160,
    }
}

/// A channel of the 5 GHz plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelSpec {
    number: u16,
    width: ChannelWidth,
}

impl ChannelSpec {
    pub fn new(number: u16, width: ChannelWidth) -> Result<Self> {
        if channel_plan(width).contains(&number) {
            Ok(Self { number, width })
        } else {
            Err(Error::InvalidChannel {
                number,
                width: width.mhz(),
            })
        }
    }

    pub fn lowest(width: ChannelWidth) -> Self {
        Self {
            number: channel_plan(width)[0],
            width,
        }
    }

    pub fn highest(width: ChannelWidth) -> Self {
        let plan = channel_plan(width);
        Self {
            number: plan[plan.len() - 1],
            width,
        }
    }

    pub fn number(&self) -> u16 {
        self.number
    }

    pub fn width(&self) -> ChannelWidth {
        self.width
    }

    pub fn center_mhz(&self) -> f64 {
        5000.0 + 5.0 * self.number as f64
    }

    /// Occupied frequency span `[low, high]` in MHz.
    pub fn span_mhz(&self) -> (f64, f64) {
        let half = self.width.mhz() as f64 / 2.0;
        (self.center_mhz() - half, self.center_mhz() + half)
    }

    /// Fraction of this channel's span covered by `other`.
    pub fn overlap(&self, other: &ChannelSpec) -> f64 {
        let (a_lo, a_hi) = self.span_mhz();
        let (b_lo, b_hi) = other.span_mhz();
        let shared = (a_hi.min(b_hi) - a_lo.max(b_lo)).max(0.0);
        shared / self.width.mhz() as f64
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}MHz", self.number, self.width.mhz())
    }
}

pub fn channel_overlap(a: &ChannelSpec, b: &ChannelSpec) -> f64 {
    a.overlap(b)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// SINR in dB; each interferer is `(received power dBm, spectral overlap fraction)`.
pub fn sinr_db(rx_power_dbm: f64, width: ChannelWidth, interferers: &[(f64, f64)]) -> f64 {
    let interference: f64 = interferers
        .iter()
        .map(|&(p, overlap)| overlap.clamp(0.0, 1.0) * dbm_to_mw(p))
        .sum();
    let denom = dbm_to_mw(noise_power_dbm(width)) + interference;
    mw_to_dbm(dbm_to_mw(rx_power_dbm) / denom)
}
