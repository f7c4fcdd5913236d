//! Median and quartile tables over a sweep's CSV rows.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Strategy;
use crate::runner::{FlowRow, RunRow};
use crate::scenario::Slice;

/// Pools rows from every setting.
pub const ALL_SETTINGS: &str = "all";

/// Quantile of ascending data with linear interpolation between order statistics.
///
/// Position `p * (n - 1)` in the 0-based sorted array, as numpy's default.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        let q = |p| quantile(&v, p);
        Some(Self {
            n: v.len(),
            min: *v.first()?,
            q1: q(0.25)?,
            median: q(0.5)?,
            q3: q(0.75)?,
            max: *v.last()?,
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub metric: String,
    pub strategy: Strategy,
    /// Empty for run-level metrics.
    pub slice: Option<Slice>,
    pub setting: String,
    pub stats: BoxStats,
}

/// CSV layout of a [`SummaryRow`].
#[derive(Serialize)]
struct FlatRow<'a> {
    metric: &'a str,
    strategy: Strategy,
    slice: Option<Slice>,
    setting: &'a str,
    n: usize,
    min: f64,
    q1: f64,
    median: f64,
    q3: f64,
    max: f64,
    mean: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Per-flow Pe and latency per (strategy, slice), and run-level efficiency,
    /// throughput, bandwidth and slice-B power per strategy; pooled and per setting.
    pub fn from_rows(flows: &[FlowRow], runs: &[RunRow]) -> Self {
        let mut settings: Vec<&str> = runs.iter().map(|r| r.setting.as_str()).collect();
        settings.extend(flows.iter().map(|f| f.setting.as_str()));
        settings.sort();
        settings.dedup();
        let scopes: Vec<&str> = std::iter::once(ALL_SETTINGS).chain(settings).collect();
        let in_scope = |scope: &str, setting: &str| scope == ALL_SETTINGS || scope == setting;

        let mut rows = Vec::new();
        for &scope in &scopes {
            for strategy in Strategy::ALL {
                for slice in Slice::ALL {
                    let group = || {
                        flows.iter().filter(move |f| {
                            f.strategy == strategy && f.slice == slice && in_scope(scope, &f.setting)
                        })
                    };
                    let flow_metrics: [(&str, Vec<f64>); 2] = [
                        ("pe", group().map(|f| f.pe).collect()),
                        ("latency_ms", group().filter_map(|f| f.latency_ms).collect()),
                    ];
                    for (metric, values) in flow_metrics {
                        if let Some(stats) = BoxStats::from_values(values) {
                            rows.push(SummaryRow {
                                metric: metric.to_owned(),
                                strategy,
                                slice: Some(slice),
                                setting: scope.to_owned(),
                                stats,
                            });
                        }
                    }
                }
                let group = || {
                    runs.iter()
                        .filter(move |r| r.strategy == strategy && in_scope(scope, &r.setting))
                };
                let run_metrics: [(&str, Vec<f64>); 4] = [
                    ("mu", group().map(|r| r.mu).collect()),
                    ("th_sum_mbps", group().map(|r| r.th_sum_bps / 1e6).collect()),
                    ("bw_mhz", group().map(|r| r.bw_mhz).collect()),
                    (
                        "tx_power_b_dbm",
                        group().filter_map(|r| r.mean_tx_power_b_dbm).collect(),
                    ),
                ];
                for (metric, values) in run_metrics {
                    if let Some(stats) = BoxStats::from_values(values) {
                        rows.push(SummaryRow {
                            metric: metric.to_owned(),
                            strategy,
                            slice: None,
                            setting: scope.to_owned(),
                            stats,
                        });
                    }
                }
            }
        }
        Self { rows }
    }

    pub fn get(
        &self,
        metric: &str,
        strategy: Strategy,
        slice: Option<Slice>,
        setting: &str,
    ) -> Option<&BoxStats> {
        self.rows
            .iter()
            .find(|r| {
                r.metric == metric
                    && r.strategy == strategy
                    && r.slice == slice
                    && r.setting == setting
            })
            .map(|r| &r.stats)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        for r in &self.rows {
            let BoxStats {
                n,
                min,
                q1,
                median,
                q3,
                max,
                mean,
            } = r.stats;
            w.serialize(FlatRow {
                metric: &r.metric,
                strategy: r.strategy,
                slice: r.slice,
                setting: &r.setting,
                n,
                min,
                q1,
                median,
                q3,
                max,
                mean,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

impl fmt::Display for Summary {
    /// The pooled rows as an aligned text table.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<15} {:<8} {:<5} {:>6} {:>12} {:>12} {:>12}",
            "metric", "strategy", "slice", "n", "q1", "median", "q3"
        )?;
        for r in self.rows.iter().filter(|r| r.setting == ALL_SETTINGS) {
            let slice = r.slice.map_or_else(|| "-".to_owned(), |s| s.to_string());
            writeln!(
                f,
                "{:<15} {:<8} {:<5} {:>6} {:>12.6} {:>12.6} {:>12.6}",
                r.metric, r.strategy, slice, r.stats.n, r.stats.q1, r.stats.median, r.stats.q3
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), Some(2.5));
        assert_eq!(quantile(&v, 0.25), Some(1.75));
        assert_eq!(quantile(&v, 0.75), Some(3.25));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(quantile(&[7.0], 0.3), Some(7.0));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn box_stats_sorts_input() {
        let s = BoxStats::from_values([5.0, 1.0, 3.0]).unwrap();
        assert_eq!((s.min, s.median, s.max, s.n), (1.0, 3.0, 5.0, 3));
        assert!(BoxStats::from_values(std::iter::empty()).is_none());
    }

    fn flow(setting: &str, strategy: Strategy, slice: Slice, pe: f64) -> FlowRow {
        FlowRow {
            run_id: format!("{setting}_{strategy}_1"),
            setting: setting.to_owned(),
            strategy,
            seed: 1,
            slice,
            flow_id: 0,
            tx_packets: 100,
            rx_packets: (100.0 * (1.0 - pe)) as u64,
            pe,
            latency_ms: (pe < 1.0).then_some(1.0),
        }
    }

    #[test]
    fn table_shape() {
        let mut flows = Vec::new();
        for setting in ["2-100-6", "4-100-4"] {
            for strategy in Strategy::ALL {
                for slice in Slice::ALL {
                    flows.push(flow(setting, strategy, slice, 0.1));
                }
            }
        }
        flows.push(flow("2-100-6", Strategy::Single, Slice::A, 1.0));
        let s = Summary::from_rows(&flows, &[]);
        let pe_pooled = s
            .rows
            .iter()
            .filter(|r| r.metric == "pe" && r.setting == ALL_SETTINGS)
            .count();
        assert_eq!(pe_pooled, 9);
        let a = s.get("pe", Strategy::Single, Some(Slice::A), ALL_SETTINGS).unwrap();
        assert_eq!(a.n, 3);
        assert_eq!(a.max, 1.0);
        let lat = s
            .get("latency_ms", Strategy::Single, Some(Slice::A), ALL_SETTINGS)
            .unwrap();
        assert_eq!(lat.n, 2);
        assert_eq!(
            s.get("pe", Strategy::Single, Some(Slice::A), "4-100-4").unwrap().n,
            1
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("summary.csv");
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("metric,strategy,slice,setting,n,min,q1,median,q3,max,mean\n"));
        assert_eq!(text.lines().count(), s.rows.len() + 1);
    }
}
