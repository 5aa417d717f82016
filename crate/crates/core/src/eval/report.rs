use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{accuracy, avg_f_measure, f_measure, ConfusionCounts};
use crate::error::Result;
use crate::pipelines::PipelineConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub f_measure: f64,
    pub avg_f_measure: f64,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self> {
        Ok(Metrics {
            accuracy: accuracy(&counts)?,
            f_measure: f_measure(&counts),
            avg_f_measure: avg_f_measure(&counts),
            counts,
        })
    }
}

/// `a - b`, plus the change relative to `b` in percent when `b` is non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub a: f64,
    pub b: f64,
    pub abs: f64,
    pub pct: Option<f64>,
}

impl Delta {
    pub fn new(a: f64, b: f64) -> Self {
        Delta {
            a,
            b,
            abs: a - b,
            pct: (b != 0.0).then(|| 100.0 * (a - b) / b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// "test" for single-stage scenarios, "60%" / "80%" for the retraining one.
    pub step: String,
    /// Cases scored: "test" or "post-drift".
    pub region: String,
    pub config: String,
    pub metrics: Metrics,
    pub fallbacks: u64,
    /// `learn_one` calls made by training and updates up to this row.
    pub learn_calls: u64,
    /// Prefixes absorbed by updates up to this row.
    pub update_prefixes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub step: String,
    pub region: String,
    pub a: String,
    pub b: String,
    pub avg_f_measure: Delta,
    pub accuracy: Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub step: String,
    pub config: String,
    /// Cumulative seconds spent training, retraining and updating.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeDeltaRow {
    pub step: String,
    pub a: String,
    pub b: String,
    pub seconds: Delta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub scenario: u8,
    pub formula: String,
    pub config: PipelineConfig,
    pub log_cases: usize,
    pub split_sizes: Vec<usize>,
    pub drift_index: Option<usize>,
}

/// Deterministic part of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsSection {
    pub metadata: Metadata,
    pub results: Vec<ResultRow>,
    pub deltas: Vec<DeltaRow>,
}

/// Wall-clock part of a report; varies between runs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSection {
    pub rows: Vec<TimingRow>,
    pub deltas: Vec<TimeDeltaRow>,
}

/// Running accuracy per configuration after each replayed test case.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub configs: Vec<String>,
    /// (position in the log, case id, running accuracy per config)
    pub rows: Vec<(usize, String, Vec<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub metrics: MetricsSection,
    pub timing: TimingSection,
    #[serde(skip)]
    pub series: Series,
}

impl ScenarioReport {
    pub fn result(&self, step: &str, region: &str, config: &str) -> Option<&ResultRow> {
        self.metrics
            .results
            .iter()
            .find(|r| r.step == step && r.region == region && r.config == config)
    }

    pub fn seconds(&self, step: &str, config: &str) -> Option<f64> {
        self.timing
            .rows
            .iter()
            .find(|r| r.step == step && r.config == config)
            .map(|r| r.seconds)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_text(&self) -> String {
        let m = &self.metrics.metadata;
        let mut out = String::new();
        let _ = writeln!(out, "scenario {}  formula {}", m.scenario, m.formula);
        let _ = writeln!(
            out,
            "approach {}  seed {}  cases {}  split {:?}",
            m.config.approach, m.config.seed, m.log_cases, m.split_sizes
        );
        if let Some(d) = m.drift_index {
            let _ = writeln!(out, "drift at case {d}");
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<6} {:<11} {:<18} {:>8} {:>8} {:>9} {:>10}",
            "step", "region", "config", "acc", "avg_fm", "scored", "fallbacks"
        );
        for r in &self.metrics.results {
            let _ = writeln!(
                out,
                "{:<6} {:<11} {:<18} {:>8.4} {:>8.4} {:>9} {:>10}",
                r.step,
                r.region,
                r.config,
                r.metrics.accuracy,
                r.metrics.avg_f_measure,
                r.metrics.counts.total(),
                r.fallbacks
            );
        }
        let _ = writeln!(out);
        let pct = |d: &Delta| d.pct.map_or("n/a".to_string(), |p| format!("{p:+.3}%"));
        for d in &self.metrics.deltas {
            let _ = writeln!(
                out,
                "{} {} {} vs {}: Fm {:+.4} ({}), acc {:+.4} ({})",
                d.step,
                d.region,
                d.a,
                d.b,
                d.avg_f_measure.abs,
                pct(&d.avg_f_measure),
                d.accuracy.abs,
                pct(&d.accuracy)
            );
        }
        for d in &self.timing.deltas {
            let _ = writeln!(
                out,
                "{} {} vs {}: time {:.3}s vs {:.3}s ({})",
                d.step,
                d.a,
                d.b,
                d.seconds.a,
                d.seconds.b,
                pct(&d.seconds)
            );
        }
        out
    }

    pub fn series_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["position".to_string(), "case_id".to_string()];
        header.extend(self.series.configs.iter().map(|c| format!("{c}_running_accuracy")));
        w.write_record(&header)?;
        for (pos, id, values) in &self.series.rows {
            let mut rec = vec![pos.to_string(), id.clone()];
            rec.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `report.json`, `report.txt` and, for replayed scenarios,
    /// `series.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        fs::write(dir.join("report.txt"), self.to_text())?;
        if !self.series.rows.is_empty() {
            fs::write(dir.join("series.csv"), self.series_csv()?)?;
        }
        Ok(())
    }
}
