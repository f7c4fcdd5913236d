//! The simulated world: one room, one ceiling-mounted AP, and three groups of
//! stations with their positions, offered loads and random-walk mobility.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::{PathLossModel, Point3};

/// Packet payload handed down by the application, in bytes.
pub const PACKET_SIZE_BYTES: u32 = 1472;

/// RNG stream ids derived from the run seed.
pub(crate) const STREAM_SCENARIO: u64 = 0;
pub(crate) const STREAM_MOBILITY: u64 = 1;
pub(crate) const STREAM_MAC: u64 = 2;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slice {
    /// eMBB
    A,
    /// mMTC
    B,
    /// URLLC
    C,
}

impl Slice {
    pub const ALL: [Slice; 3] = [Slice::A, Slice::B, Slice::C];

    /// Slice B devices sit at fixed positions.
    pub fn is_mobile(self) -> bool {
        !matches!(self, Slice::B)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Slice::A => "A",
            Slice::B => "B",
            Slice::C => "C",
        })
    }
}

impl FromStr for Slice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Slice::A),
            "B" | "b" => Ok(Slice::B),
            "C" | "c" => Ok(Slice::C),
            other => Err(Error::Config(format!("unknown slice {other:?}"))),
        }
    }
}

/// The three station mixes `nStaA-nStaB-nStaC`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Setting {
    S2_100_6,
    S4_100_4,
    S6_100_2,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::S2_100_6, Setting::S4_100_4, Setting::S6_100_2];

    pub fn counts(self) -> (usize, usize, usize) {
        match self {
            Setting::S2_100_6 => (2, 100, 6),
            Setting::S4_100_4 => (4, 100, 4),
            Setting::S6_100_2 => (6, 100, 2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::S2_100_6 => "2-100-6",
            Setting::S4_100_4 => "4-100-4",
            Setting::S6_100_2 => "6-100-2",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|setting| setting.name() == s)
            .ok_or_else(|| Error::UnknownSetting(s.to_owned()))
    }
}

/// Closed interval `[min, max]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        (self.min..=self.max).contains(&v)
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::Config(format!(
                "{what}: invalid range [{}, {}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Everything that defines a world before the seed is applied.
///
/// Deserializes from JSON with every field optional; omitted fields keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_sta_a: usize,
    pub n_sta_b: usize,
    pub n_sta_c: usize,
    pub room_x: f64,
    pub room_y: f64,
    pub sta_height: f64,
    pub ap_pos: Point3,
    /// Simulated duration in seconds.
    pub sim_time: f64,
    /// Controller period in seconds.
    pub control_interval: f64,
    /// Offered load per station in bit/s.
    pub rate_a: Range,
    pub rate_b: Range,
    pub rate_c: Range,
    /// Station transmit queue, in packets.
    pub queue_capacity: usize,
    pub shadowing_sigma_db: f64,
    /// Walking speed in m/s, redrawn with the heading.
    pub speed: Range,
    /// Seconds between heading redraws.
    pub heading_interval: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::for_setting(Setting::S4_100_4)
    }
}

impl ScenarioConfig {
    pub fn for_setting(setting: Setting) -> Self {
        let (n_sta_a, n_sta_b, n_sta_c) = setting.counts();
        Self {
            n_sta_a,
            n_sta_b,
            n_sta_c,
            room_x: 20.0,
            room_y: 10.0,
            sta_height: 1.5,
            ap_pos: Point3::new(10.0, 5.0, 3.0),
            sim_time: 15.0,
            control_interval: 1.0,
            rate_a: Range::new(80e6, 100e6),
            rate_b: Range::new(30e3, 50e3),
            rate_c: Range::new(20e6, 40e6),
            queue_capacity: 500,
            shadowing_sigma_db: 4.0,
            speed: Range::new(2.0, 4.0),
            heading_interval: 1.0,
        }
    }

    /// Reads a JSON override on top of the given base configuration.
    pub fn from_json_file(path: &Path, base: &ScenarioConfig) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, base)
    }

    pub fn from_json_str(text: &str, base: &ScenarioConfig) -> Result<Self> {
        let mut merged = serde_json::to_value(base)?;
        let patch: serde_json::Value = serde_json::from_str(text)?;
        let serde_json::Value::Object(patch) = patch else {
            return Err(Error::Config("config file must hold a JSON object".into()));
        };
        let target = merged.as_object_mut().expect("config serializes to an object");
        for (k, v) in patch {
            target.insert(k, v);
        }
        let cfg: ScenarioConfig = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn count(&self, slice: Slice) -> usize {
        match slice {
            Slice::A => self.n_sta_a,
            Slice::B => self.n_sta_b,
            Slice::C => self.n_sta_c,
        }
    }

    pub fn rate_range(&self, slice: Slice) -> Range {
        match slice {
            Slice::A => self.rate_a,
            Slice::B => self.rate_b,
            Slice::C => self.rate_c,
        }
    }

    pub fn total_stations(&self) -> usize {
        self.n_sta_a + self.n_sta_b + self.n_sta_c
    }

    /// Number of controller intervals in a run.
    pub fn intervals(&self) -> usize {
        (self.sim_time / self.control_interval).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive, got {v}")))
            }
        };
        positive(self.room_x, "room_x")?;
        positive(self.room_y, "room_y")?;
        positive(self.sim_time, "sim_time")?;
        positive(self.control_interval, "control_interval")?;
        positive(self.heading_interval, "heading_interval")?;
        let ratio = self.sim_time / self.control_interval;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Config(format!(
                "sim_time {} is not a positive multiple of control_interval {}",
                self.sim_time, self.control_interval
            )));
        }
        if self.queue_capacity == 0 {
            return Err(Error::Config("queue_capacity must be at least 1".into()));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("shadowing_sigma_db must be >= 0".into()));
        }
        self.rate_a.validate("rate_a")?;
        self.rate_b.validate("rate_b")?;
        self.rate_c.validate("rate_c")?;
        self.speed.validate("speed")?;
        for slice in Slice::ALL {
            if self.rate_range(slice).min < 0.0 {
                return Err(Error::Config(format!("rate_{slice} must be >= 0")));
            }
        }
        if self.speed.min < 0.0 {
            return Err(Error::Config("speed must be >= 0".into()));
        }
        if self.total_stations() == 0 {
            return Err(Error::Config("scenario has no stations".into()));
        }
        Ok(())
    }
}

/// Reflects `x` back into `[0, len]` as if bouncing between two walls.
///
/// Returns the folded coordinate and whether the direction of travel is reversed.
pub fn reflect(x: f64, len: f64) -> (f64, bool) {
    let period = 2.0 * len;
    let m = x.rem_euclid(period);
    if m <= len {
        (m, false)
    } else {
        (period - m, true)
    }
}

/// Constant-velocity leg of a 2-D random walk bounded by the room walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    origin: (f64, f64),
    velocity: (f64, f64),
    leg_start: f64,
    room: (f64, f64),
}

impl Mobility {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64, room: (f64, f64)) -> Self {
        Self {
            origin: (x, y),
            velocity: (speed * heading.cos(), speed * heading.sin()),
            leg_start: 0.0,
            room,
        }
    }

    pub fn stationary(x: f64, y: f64, room: (f64, f64)) -> Self {
        Self::new(x, y, 0.0, 0.0, room)
    }

    pub fn velocity(&self) -> (f64, f64) {
        self.velocity
    }

    pub fn speed(&self) -> f64 {
        self.velocity.0.hypot(self.velocity.1)
    }

    pub fn heading(&self) -> f64 {
        self.velocity.1.atan2(self.velocity.0)
    }

    pub fn position_at(&self, t: f64) -> (f64, f64) {
        let dt = t - self.leg_start;
        let (x, _) = reflect(self.origin.0 + self.velocity.0 * dt, self.room.0);
        let (y, _) = reflect(self.origin.1 + self.velocity.1 * dt, self.room.1);
        (x, y)
    }

    /// Moves the leg start to `t`, bouncing off walls on the way.
    pub fn advance_to(&mut self, t: f64) {
        let dt = t - self.leg_start;
        let (x, flip_x) = reflect(self.origin.0 + self.velocity.0 * dt, self.room.0);
        let (y, flip_y) = reflect(self.origin.1 + self.velocity.1 * dt, self.room.1);
        self.origin = (x, y);
        if flip_x {
            self.velocity.0 = -self.velocity.0;
        }
        if flip_y {
            self.velocity.1 = -self.velocity.1;
        }
        self.leg_start = t;
    }

    pub fn set_heading(&mut self, heading: f64, speed: f64) {
        self.velocity = (speed * heading.cos(), speed * heading.sin());
    }

    /// Walks for `dt` seconds then draws a fresh heading in `[0, 2pi)` and speed.
    pub fn step(&mut self, dt: f64, speed: Range, rng: &mut impl Rng) {
        self.advance_to(self.leg_start + dt);
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let s = speed.sample(rng);
        self.set_heading(heading, s);
    }
}

/// Initial state of one station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSpec {
    pub id: usize,
    pub slice: Slice,
    pub mobility: Mobility,
    pub height: f64,
    /// Frozen shadowing on the link to the AP.
    pub shadowing_db: f64,
    pub offered_bps: f64,
    /// Generation time of the first packet, within one inter-packet gap of zero.
    pub start_offset: f64,
}

impl StationSpec {
    pub fn position_at(&self, t: f64) -> Point3 {
        let (x, y) = self.mobility.position_at(t);
        Point3::new(x, y, self.height)
    }

    /// Constant-bit-rate gap between packets, in seconds; `None` for a silent station.
    pub fn packet_gap(&self) -> Option<f64> {
        (self.offered_bps > 0.0).then(|| PACKET_SIZE_BYTES as f64 * 8.0 / self.offered_bps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub stations: Vec<StationSpec>,
    pub propagation: PathLossModel,
}

impl Scenario {
    pub fn stations_in(&self, slice: Slice) -> impl Iterator<Item = &StationSpec> {
        self.stations.iter().filter(move |s| s.slice == slice)
    }

    /// Total offered load of a slice, in bit/s.
    pub fn demand(&self, slice: Slice) -> f64 {
        self.stations_in(slice).map(|s| s.offered_bps).sum()
    }

    /// Link loss the AP would measure for a station at time `t`.
    pub fn measured_loss(&self, station: &StationSpec, t: f64) -> f64 {
        self.propagation.path_loss(
            &station.position_at(t),
            &self.config.ap_pos,
            station.shadowing_db,
        )
    }
}

pub fn build_scenario(setting: Setting, seed: u64) -> Scenario {
    build_from_config(setting.name(), ScenarioConfig::for_setting(setting), seed)
        .expect("built-in settings are valid")
}

/// Places stations and draws their loads; every draw comes from the seeded scenario stream.
pub fn build_from_config(label: &str, config: ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng_for(seed, STREAM_SCENARIO);
    let shadowing = Normal::new(0.0, config.shadowing_sigma_db)
        .map_err(|e| Error::Config(format!("shadowing: {e}")))?;
    let room = (config.room_x, config.room_y);

    let mut stations = Vec::with_capacity(config.total_stations());
    for slice in Slice::ALL {
        for _ in 0..config.count(slice) {
            let x = rng.random_range(0.0..=config.room_x);
            let y = rng.random_range(0.0..=config.room_y);
            let offered_bps = config.rate_range(slice).sample(&mut rng);
            let shadowing_db = shadowing.sample(&mut rng);
            let phase: f64 = rng.random();
            let mobility = if slice.is_mobile() {
                let heading = rng.random_range(0.0..std::f64::consts::TAU);
                let speed = config.speed.sample(&mut rng);
                Mobility::new(x, y, heading, speed, room)
            } else {
                Mobility::stationary(x, y, room)
            };
            let gap = if offered_bps > 0.0 {
                PACKET_SIZE_BYTES as f64 * 8.0 / offered_bps
            } else {
                0.0
            };
            stations.push(StationSpec {
                id: stations.len(),
                slice,
                mobility,
                height: config.sta_height,
                shadowing_db,
                offered_bps,
                start_offset: phase * gap,
            });
        }
    }

    Ok(Scenario {
        label: label.to_owned(),
        seed,
        config,
        stations,
        propagation: PathLossModel::default(),
    })
}
