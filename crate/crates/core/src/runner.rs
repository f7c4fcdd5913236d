//! Experiment orchestration: one run per (setting, strategy, seed), sweeps
//! across the full grid, and the CSV files they produce.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::{secs_to_ns, SimOptions, Simulation, TraceEvent};
use crate::metrics::{
    flows_throughput, spectrum_efficiency, used_bandwidth, ConfigLogEntry, FlowRecord, RunResult,
    Strategy,
};
use crate::phy::MAX_TX_POWER_DBM;
use crate::scenario::{build_from_config, Scenario, ScenarioConfig, Setting, Slice};
use crate::slicing::{
    single_channel_config, static_allocate, Allocation, FlowCounters,
    IntervalKpis, SliceAController, SliceBController, SliceCController, SliceConfig,
    SliceDemands,
};

pub const FLOWS_CSV: &str = "flows.csv";
pub const RUNS_CSV: &str = "runs.csv";
pub const CONFIG_LOG_CSV: &str = "config_log.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Seeds of the default sweep.
pub const DEFAULT_SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

/// One simulation to perform.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub setting: String,
    pub config: ScenarioConfig,
    pub strategy: Strategy,
    pub seed: u64,
}

impl RunSpec {
    pub fn new(setting: Setting, strategy: Strategy, seed: u64) -> Self {
        Self {
            setting: setting.name().to_owned(),
            config: ScenarioConfig::for_setting(setting),
            strategy,
            seed,
        }
    }

    pub fn run_id(&self) -> String {
        format!("{}_{}_{}", self.setting, self.strategy, self.seed)
    }
}

/// The list of runs a sweep performs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub runs: Vec<RunSpec>,
    pub jobs: Option<usize>,
}

impl ExperimentPlan {
    /// Every setting and strategy over the given seeds.
    pub fn grid(seeds: impl IntoIterator<Item = u64> + Clone) -> Self {
        let mut runs = Vec::new();
        for setting in Setting::ALL {
            for strategy in Strategy::ALL {
                for seed in seeds.clone() {
                    runs.push(RunSpec::new(setting, strategy, seed));
                }
            }
        }
        Self { runs, jobs: None }
    }

    pub fn full() -> Self {
        Self::grid(DEFAULT_SEEDS)
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = Some(jobs);
        self
    }

    /// Rejects plans that would produce two runs with the same id.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for run in &self.runs {
            if !seen.insert(run.run_id()) {
                return Err(Error::Config(format!("duplicate run {}", run.run_id())));
            }
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

pub struct RunOutput {
    pub result: RunResult,
    pub trace: Vec<TraceEvent>,
}

pub fn run_experiment(spec: &RunSpec) -> Result<RunResult> {
    run_with_options(spec, SimOptions::default()).map(|out| out.result)
}

/// Builds the scenario, drives the chosen strategy for the whole run and collects the KPIs.
pub fn run_with_options(spec: &RunSpec, options: SimOptions) -> Result<RunOutput> {
    let scenario = build_from_config(&spec.setting, spec.config.clone(), spec.seed)?;
    let mut driver = Driver::new(spec.strategy, &scenario);
    let initial: Vec<SliceConfig> = scenario
        .stations
        .iter()
        .map(|st| driver.config_for(st.slice))
        .collect();
    let mut sim = Simulation::new(&scenario, &initial, options);
    let mut log = Vec::new();
    driver.log_interval(0, 0.0, &mut log);

    let n = scenario.config.intervals();
    let interval = scenario.config.control_interval;
    for k in 1..=n {
        let t = k as f64 * interval;
        sim.run_until(secs_to_ns(t));
        if k == n {
            sim.finish();
        }
        sim.close_interval();
        if k < n {
            if driver.adapt(&scenario, &sim) {
                for id in 0..sim.station_count() {
                    sim.retune(id, driver.config_for(sim.station_slice(id)));
                }
            }
            driver.log_interval(k, t, &mut log);
        }
    }

    let trace = sim.trace().to_vec();
    let flows = sim.into_flows();
    let sim_time_s = scenario.config.sim_time;
    let th_sum_bps = flows_throughput(&flows, sim_time_s);
    let bw_mhz = used_bandwidth(spec.strategy, &log);
    let mu = spectrum_efficiency(th_sum_bps, bw_mhz);
    let mean_tx_power_b_dbm = mean_slice_b_power(spec.strategy, &log);
    let saturated = log.iter().any(|e| e.saturated);
    Ok(RunOutput {
        result: RunResult {
            run_id: spec.run_id(),
            setting: spec.setting.clone(),
            strategy: spec.strategy,
            seed: spec.seed,
            sim_time_s,
            flows,
            config_log: log,
            th_sum_bps,
            bw_mhz,
            mu,
            mean_tx_power_b_dbm,
            saturated,
        },
        trace,
    })
}

fn mean_slice_b_power(strategy: Strategy, log: &[ConfigLogEntry]) -> Option<f64> {
    let powers: Vec<f64> = log
        .iter()
        .filter(|e| match strategy {
            Strategy::Single => e.slice.is_none(),
            _ => e.slice == Some(Slice::B),
        })
        .map(|e| e.config.tx_power_dbm)
        .collect();
    (!powers.is_empty()).then(|| powers.iter().sum::<f64>() / powers.len() as f64)
}

/// Per-strategy controller state.
enum Driver {
    Single(SliceConfig),
    Static([Allocation; 3]),
    Dynamic(Box<DynamicSlices>),
}

struct DynamicSlices {
    a: Option<(SliceAController, Allocation)>,
    b: Option<(SliceBController, Allocation)>,
    c: Option<(SliceCController, Allocation)>,
    /// Pooled error probability of the last closed interval, per slice.
    last_pe: [Option<f64>; 3],
}

impl Driver {
    fn new(strategy: Strategy, scenario: &Scenario) -> Self {
        let demands = SliceDemands {
            a: scenario.demand(Slice::A),
            b: scenario.demand(Slice::B),
            c: scenario.demand(Slice::C),
        };
        match strategy {
            Strategy::Single => Driver::Single(single_channel_config()),
            Strategy::Static => {
                let alloc = static_allocate(demands);
                Driver::Static([alloc.a, alloc.b, alloc.c])
            }
            Strategy::Dynamic => {
                let present = |s: Slice| scenario.config.count(s) > 0;
                let kpis = |s: Slice| link_kpis(scenario, s, 0.0);
                Driver::Dynamic(Box::new(DynamicSlices {
                    a: present(Slice::A)
                        .then(|| SliceAController::init(demands.a, &kpis(Slice::A))),
                    b: present(Slice::B)
                        .then(|| SliceBController::init(demands.b, &kpis(Slice::B))),
                    c: present(Slice::C).then(|| {
                        let ctl = SliceCController::new(demands.c);
                        let alloc = ctl.configure(&kpis(Slice::C));
                        (ctl, alloc)
                    }),
                    last_pe: [None; 3],
                }))
            }
        }
    }

    fn allocation(&self, slice: Slice) -> Option<Allocation> {
        match self {
            Driver::Single(cfg) => Some(Allocation {
                config: *cfg,
                saturated: false,
            }),
            Driver::Static(allocs) => Some(allocs[slice.index()]),
            Driver::Dynamic(d) => match slice {
                Slice::A => d.a.as_ref().map(|x| x.1),
                Slice::B => d.b.as_ref().map(|x| x.1),
                Slice::C => d.c.as_ref().map(|x| x.1),
            },
        }
    }

    fn config_for(&self, slice: Slice) -> SliceConfig {
        self.allocation(slice)
            .expect("every slice with stations has an allocation")
            .config
    }

    /// Runs the dynamic controllers; returns whether configurations may have changed.
    fn adapt(&mut self, scenario: &Scenario, sim: &Simulation) -> bool {
        let Driver::Dynamic(d) = self else {
            return false;
        };
        let t = crate::mac::ns_to_secs(sim.now());
        for slice in Slice::ALL {
            let mut kpis = link_kpis(scenario, slice, t);
            kpis.flows = sim
                .flows()
                .iter()
                .filter(|f| f.slice == slice)
                .map(last_interval)
                .collect();
            kpis.prev_aggregate_pe = d.last_pe[slice.index()];
            let pe = kpis.aggregate_pe();
            match slice {
                Slice::A => {
                    if let Some((ctl, alloc)) = d.a.as_mut() {
                        *alloc = ctl.update(&kpis);
                    }
                }
                Slice::B => {
                    if let Some((ctl, alloc)) = d.b.as_mut() {
                        *alloc = ctl.update(&kpis);
                    }
                }
                Slice::C => {
                    if let Some((ctl, alloc)) = d.c.as_mut() {
                        *alloc = ctl.configure(&kpis);
                    }
                }
            }
            d.last_pe[slice.index()] = Some(pe);
        }
        true
    }

    fn log_interval(&self, interval: usize, time_s: f64, log: &mut Vec<ConfigLogEntry>) {
        match self {
            Driver::Single(cfg) => log.push(ConfigLogEntry {
                interval,
                time_s,
                slice: None,
                config: *cfg,
                state: String::new(),
                saturated: false,
            }),
            Driver::Static(allocs) => {
                for slice in Slice::ALL {
                    let alloc = allocs[slice.index()];
                    log.push(ConfigLogEntry {
                        interval,
                        time_s,
                        slice: Some(slice),
                        config: alloc.config,
                        state: String::new(),
                        saturated: alloc.saturated,
                    });
                }
            }
            Driver::Dynamic(d) => {
                let mut push = |slice, alloc: Allocation, state: String| {
                    log.push(ConfigLogEntry {
                        interval,
                        time_s,
                        slice: Some(slice),
                        config: alloc.config,
                        state,
                        saturated: alloc.saturated,
                    })
                };
                if let Some((ctl, alloc)) = &d.a {
                    push(Slice::A, *alloc, format!("x{}", ctl.state().multiplier()));
                }
                if let Some((ctl, alloc)) = &d.b {
                    push(Slice::B, *alloc, ctl.margins().to_string());
                }
                if let Some((_, alloc)) = &d.c {
                    push(Slice::C, *alloc, String::new());
                }
            }
        }
    }
}

fn last_interval(flow: &FlowRecord) -> FlowCounters {
    flow.intervals
        .last()
        .map(|c| FlowCounters { tx: c.tx, rx: c.rx })
        .unwrap_or_default()
}

/// Link measurements of a slice's stations at time `t`, referenced to full transmit power.
fn link_kpis(scenario: &Scenario, slice: Slice, t: f64) -> IntervalKpis {
    let loss_db: Vec<f64> = scenario
        .stations_in(slice)
        .map(|st| scenario.measured_loss(st, t))
        .collect();
    IntervalKpis {
        rx_power_dbm: loss_db.iter().map(|l| MAX_TX_POWER_DBM - l).collect(),
        loss_db,
        ..Default::default()
    }
}

/// Runs every entry of the plan, in parallel when `jobs` allows it.
///
/// Results come back in plan order whatever the parallelism. A failed entry
/// does not stop the others.
pub fn run_plan(plan: &ExperimentPlan) -> Result<Vec<(RunSpec, Result<RunResult>)>> {
    plan.validate()?;
    let work = || {
        plan.runs
            .par_iter()
            .map(|spec| {
                let res = run_experiment(spec);
                match &res {
                    Ok(_) => log::info!("finished {}", spec.run_id()),
                    Err(e) => log::error!("{} failed: {e}", spec.run_id()),
                }
                (spec.clone(), res)
            })
            .collect::<Vec<_>>()
    };
    match plan.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .map(|pool| pool.install(work)),
        None => Ok(work()),
    }
}

/// Outcome of a sweep written to disk.
#[derive(Debug)]
pub struct SweepReport {
    pub completed: usize,
    pub failures: Vec<(String, Error)>,
    pub summary: crate::summary::Summary,
}

/// Runs the plan and writes flows, runs, config log and summary CSVs into `out_dir`.
pub fn sweep(plan: &ExperimentPlan, out_dir: &Path) -> Result<SweepReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let outcomes = run_plan(plan)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (spec, res) in outcomes {
        match res {
            Ok(r) => results.push(r),
            Err(e) => failures.push((spec.run_id(), e)),
        }
    }
    write_results(&results, out_dir)?;
    let summary = crate::summary::Summary::from_rows(
        &results.iter().flat_map(flow_rows).collect::<Vec<_>>(),
        &results.iter().map(run_row).collect::<Vec<_>>(),
    );
    summary.write_csv(&out_dir.join(SUMMARY_CSV))?;
    Ok(SweepReport {
        completed: results.len(),
        failures,
        summary,
    })
}

/// One line of the per-flow CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub run_id: String,
    pub setting: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub slice: Slice,
    pub flow_id: usize,
    pub tx_packets: u64,
    pub rx_packets: u64,
    pub pe: f64,
    /// Empty when the flow delivered nothing.
    pub latency_ms: Option<f64>,
}

/// One line of the per-run CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run_id: String,
    pub setting: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub sim_time_s: f64,
    pub th_sum_bps: f64,
    pub bw_mhz: f64,
    pub mu: f64,
    /// Empty when the run has no slice-B stations.
    pub mean_tx_power_b_dbm: Option<f64>,
    pub saturated: bool,
}

/// One line of the per-interval configuration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub run_id: String,
    pub interval: usize,
    pub time_s: f64,
    /// `shared` for the single-channel strategy.
    pub slice: String,
    pub width_mhz: u32,
    pub channel: u16,
    pub gi_ns: u32,
    pub mcs: u8,
    pub tx_power_dbm: f64,
    pub state: String,
    pub saturated: bool,
}

pub fn flow_rows(result: &RunResult) -> Vec<FlowRow> {
    result
        .flows
        .iter()
        .map(|f| FlowRow {
            run_id: result.run_id.clone(),
            setting: result.setting.clone(),
            strategy: result.strategy,
            seed: result.seed,
            slice: f.slice,
            flow_id: f.flow_id,
            tx_packets: f.tx,
            rx_packets: f.rx,
            pe: f.pe(),
            latency_ms: f.mean_latency().map(|s| s * 1e3),
        })
        .collect()
}

pub fn run_row(result: &RunResult) -> RunRow {
    RunRow {
        run_id: result.run_id.clone(),
        setting: result.setting.clone(),
        strategy: result.strategy,
        seed: result.seed,
        sim_time_s: result.sim_time_s,
        th_sum_bps: result.th_sum_bps,
        bw_mhz: result.bw_mhz,
        mu: result.mu,
        mean_tx_power_b_dbm: result.mean_tx_power_b_dbm,
        saturated: result.saturated,
    }
}

pub fn config_rows(result: &RunResult) -> Vec<ConfigRow> {
    result
        .config_log
        .iter()
        .map(|e| ConfigRow {
            run_id: result.run_id.clone(),
            interval: e.interval,
            time_s: e.time_s,
            slice: e.slice.map_or_else(|| "shared".to_owned(), |s| s.to_string()),
            width_mhz: e.config.width().mhz(),
            channel: e.config.channel.number(),
            gi_ns: e.config.gi.ns(),
            mcs: e.config.mcs.index(),
            tx_power_dbm: e.config.tx_power_dbm,
            state: e.state.clone(),
            saturated: e.saturated,
        })
        .collect()
}

pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn write_csv_file<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(rows, BufWriter::new(file))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes the flows, runs and config-log CSVs for a batch of results.
pub fn write_results(results: &[RunResult], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let flows: Vec<FlowRow> = results.iter().flat_map(flow_rows).collect();
    let runs: Vec<RunRow> = results.iter().map(run_row).collect();
    let configs: Vec<ConfigRow> = results.iter().flat_map(config_rows).collect();
    let paths = [FLOWS_CSV, RUNS_CSV, CONFIG_LOG_CSV].map(|n| out_dir.join(n));
    write_csv_file(&flows, &paths[0])?;
    write_csv_file(&runs, &paths[1])?;
    write_csv_file(&configs, &paths[2])?;
    Ok(paths.to_vec())
}

/// Reads a sweep directory back and recomputes its summary.
pub fn summarize_dir(dir: &Path) -> Result<crate::summary::Summary> {
    let flows: Vec<FlowRow> = read_csv(&dir.join(FLOWS_CSV))?;
    let runs: Vec<RunRow> = read_csv(&dir.join(RUNS_CSV))?;
    Ok(crate::summary::Summary::from_rows(&flows, &runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{ChannelWidth, GuardInterval};

    fn short(setting: Setting, strategy: Strategy, seed: u64, sim_time: f64) -> RunSpec {
        let mut spec = RunSpec::new(setting, strategy, seed);
        spec.config.sim_time = sim_time;
        spec
    }

    #[test]
    fn plan_grid_is_unique() {
        let plan = ExperimentPlan::full();
        assert_eq!(plan.runs.len(), 180);
        plan.validate().unwrap();
        let mut dup = plan.clone();
        dup.runs.push(dup.runs[0].clone());
        assert!(dup.validate().is_err());
        assert!(plan.with_jobs(0).validate().is_err());
    }

    #[test]
    fn single_run_logs_shared_channel() {
        let r = run_experiment(&short(Setting::S4_100_4, Strategy::Single, 1, 2.0)).unwrap();
        assert_eq!(r.config_log.len(), 2);
        assert!(r.config_log.iter().all(|e| e.slice.is_none()));
        assert_eq!(r.bw_mhz, 160.0);
        assert_eq!(r.mean_tx_power_b_dbm, Some(20.0));
        assert_eq!(r.flows.len(), 108);
    }

    #[test]
    fn static_slice_b_row() {
        let r = run_experiment(&short(Setting::S2_100_6, Strategy::Static, 7, 1.0)).unwrap();
        let rows = config_rows(&r);
        let b = rows.iter().find(|c| c.slice == "B").unwrap();
        assert_eq!(
            (b.width_mhz, b.channel, b.gi_ns, b.mcs, b.tx_power_dbm),
            (20, 100, 1600, 5, 20.0)
        );
    }

    #[test]
    fn dynamic_logs_every_interval() {
        let r = run_experiment(&short(Setting::S6_100_2, Strategy::Dynamic, 3, 4.0)).unwrap();
        for k in 0..4 {
            let slices: Vec<_> = r
                .config_log
                .iter()
                .filter(|e| e.interval == k)
                .map(|e| e.slice)
                .collect();
            assert_eq!(slices, vec![Some(Slice::A), Some(Slice::B), Some(Slice::C)]);
        }
        for e in r.config_log.iter().filter(|e| e.slice == Some(Slice::B)) {
            assert_eq!(e.config.width(), ChannelWidth::W20);
            assert_eq!(e.config.channel.number(), 100);
            assert!(e.config.tx_power_dbm <= 20.0);
        }
        for e in r.config_log.iter().filter(|e| e.slice == Some(Slice::A)) {
            assert_eq!(e.config.gi, GuardInterval::Ns800);
        }
        assert_eq!(r.mu, r.th_sum_bps / (r.bw_mhz * 1e6));
    }

    #[test]
    fn dynamic_without_slice_a() {
        let mut spec = short(Setting::S4_100_4, Strategy::Dynamic, 2, 2.0);
        spec.config.n_sta_a = 0;
        let r = run_experiment(&spec).unwrap();
        assert!(r.config_log.iter().all(|e| e.slice != Some(Slice::A)));
        assert_eq!(r.flows.len(), 104);
    }

    #[test]
    fn csv_round_trip() {
        let r = run_experiment(&short(Setting::S4_100_4, Strategy::Static, 4, 1.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_results(std::slice::from_ref(&r), dir.path()).unwrap();
        let flows: Vec<FlowRow> = read_csv(&dir.path().join(FLOWS_CSV)).unwrap();
        let runs: Vec<RunRow> = read_csv(&dir.path().join(RUNS_CSV)).unwrap();
        let configs: Vec<ConfigRow> = read_csv(&dir.path().join(CONFIG_LOG_CSV)).unwrap();
        assert_eq!(flows, flow_rows(&r));
        assert_eq!(runs, vec![run_row(&r)]);
        assert_eq!(configs, config_rows(&r));
    }
}
