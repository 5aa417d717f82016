//! Evaluation protocols comparing pipelines on a log.
//!
//! * scenario 1: train on the first 80% of cases, then replay the last 20%,
//!   predicting every prefix of a case before the completed case updates the
//!   incremental pipeline. The incremental classifier is compared with a
//!   random forest that is never updated.
//! * scenario 2: segments of 40/20/20/20%. The forest is retrained from
//!   scratch on 60% and 80%, the incremental pipeline is trained on 40% and
//!   updated with the next two segments. Both are scored on the last segment
//!   at the 60% and 80% checkpoints.
//! * scenario 3: train on the first 40% of a log whose drift starts later,
//!   then replay the remaining 60% with the adaptive and the plain Hoeffding
//!   tree.
//!
//! Gold labels always come from completed cases. Timing covers training and
//! updates only.

mod metrics;
mod report;

use std::time::{Duration, Instant};

use crate::classifiers::ClassifierKind;
use crate::encoding::extract_prefixes;
use crate::error::{Error, Result};
use crate::event_log::{split_log, Case, EventLog};
use crate::ltl::{label_case, Formula};
use crate::pipelines::{Pipeline, PipelineConfig};

pub use metrics::{accuracy, avg_f_measure, f_measure, ConfusionCounts};
pub use report::{
    Delta, DeltaRow, Metadata, Metrics, MetricsSection, ResultRow, ScenarioReport, Series, TimeDeltaRow,
    TimingRow, TimingSection,
};

pub const TEST: &str = "test";
pub const POST_DRIFT: &str = "post-drift";

/// Configuration label used in reports, e.g. `clustering/aht`.
pub fn config_name(cfg: &PipelineConfig) -> String {
    format!("{}/{}", cfg.approach, cfg.classifier.kind.name())
}

fn with_kind(cfg: &PipelineConfig, kind: ClassifierKind) -> PipelineConfig {
    let mut c = *cfg;
    c.classifier.kind = kind;
    c
}

fn split(log: &EventLog, fractions: &[f64]) -> Result<Vec<EventLog>> {
    let parts = split_log(log, fractions)?;
    if let Some(i) = parts.iter().position(EventLog::is_empty) {
        return Err(Error::Scenario(format!(
            "segment {} of the {fractions:?} split is empty ({} cases in the log)",
            i + 1,
            log.len()
        )));
    }
    Ok(parts)
}

fn merged(log: &EventLog, parts: &[EventLog]) -> EventLog {
    log.sub_log(parts.iter().flat_map(|p| p.cases().iter().cloned()).collect())
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed()))
}

/// Predictions and updates for one configuration over a run of test cases.
#[derive(Debug, Default)]
struct Replay {
    counts: ConfusionCounts,
    /// Counts over cases at or after `region_start`.
    region: ConfusionCounts,
    fallbacks: u64,
    region_fallbacks: u64,
    update_prefixes: u64,
    update_time: Duration,
    /// Running accuracy after each case.
    running: Vec<f64>,
}

/// Scores every prefix of each case against its gold label, then (when
/// `update` is set) feeds the completed case to the pipeline.
fn replay(
    pipeline: &mut Pipeline,
    cases: &[Case],
    gold: &[bool],
    first_position: usize,
    region_start: usize,
    update: bool,
) -> Result<Replay> {
    let cfg = *pipeline.config();
    let mut r = Replay::default();
    for (i, (case, &label)) in cases.iter().zip(gold).enumerate() {
        for prefix in extract_prefixes(case, None, cfg.prefix_min, cfg.prefix_max) {
            let p = pipeline.predict(&prefix)?;
            r.counts.record(label, p.label);
            if first_position + i >= region_start {
                r.region.record(label, p.label);
                r.region_fallbacks += u64::from(p.fallback);
            }
            r.fallbacks += u64::from(p.fallback);
        }
        if update {
            let n = extract_prefixes(case, None, cfg.prefix_min, cfg.prefix_max).len();
            let ((), t) = timed(|| pipeline.update(case))?;
            r.update_time += t;
            r.update_prefixes += n as u64;
        }
        let total = r.counts.total();
        r.running.push(if total == 0 { 0.0 } else { r.counts.correct() as f64 / total as f64 });
    }
    Ok(r)
}

fn gold_labels(cases: &[Case], formula: &Formula) -> Result<Vec<bool>> {
    cases.iter().map(|c| label_case(c, formula)).collect()
}

fn delta_row(step: &str, region: &str, a: &ResultRow, b: &ResultRow) -> DeltaRow {
    DeltaRow {
        step: step.to_string(),
        region: region.to_string(),
        a: a.config.clone(),
        b: b.config.clone(),
        avg_f_measure: Delta::new(a.metrics.avg_f_measure, b.metrics.avg_f_measure),
        accuracy: Delta::new(a.metrics.accuracy, b.metrics.accuracy),
    }
}

fn time_delta(step: &str, a: &TimingRow, b: &TimingRow) -> TimeDeltaRow {
    TimeDeltaRow {
        step: step.to_string(),
        a: a.config.clone(),
        b: b.config.clone(),
        seconds: Delta::new(a.seconds, b.seconds),
    }
}

fn row(step: &str, region: &str, config: &str, counts: ConfusionCounts, fallbacks: u64, learn_calls: u64, update_prefixes: u64) -> Result<ResultRow> {
    let metrics = Metrics::from_counts(counts).map_err(|_| {
        Error::Scenario(format!("{config} made no predictions in the {region} region at step {step}"))
    })?;
    Ok(ResultRow {
        step: step.to_string(),
        region: region.to_string(),
        config: config.to_string(),
        metrics,
        fallbacks,
        learn_calls,
        update_prefixes,
    })
}

fn timing_row(step: &str, config: &str, t: Duration) -> TimingRow {
    TimingRow {
        step: step.to_string(),
        config: config.to_string(),
        seconds: t.as_secs_f64(),
    }
}

fn require_incremental(cfg: &PipelineConfig) -> Result<()> {
    if cfg.classifier.kind.is_incremental() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(
            "this scenario compares an incremental classifier (ht or aht) against the random forest".into(),
        ))
    }
}

fn interleave_series(names: Vec<String>, cases: &[Case], first: usize, replays: &[&Replay]) -> Series {
    Series {
        configs: names,
        rows: cases
            .iter()
            .enumerate()
            .map(|(i, c)| (first + i, c.case_id.clone(), replays.iter().map(|r| r.running[i]).collect()))
            .collect(),
    }
}

/// 80/20 split; the incremental pipeline keeps learning while it is tested.
pub fn run_scenario1(log: &EventLog, formula: &Formula, cfg: &PipelineConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    require_incremental(cfg)?;
    let parts = split(log, &[80.0, 20.0])?;
    let (train, test) = (&parts[0], &parts[1]);
    let gold = gold_labels(test.cases(), formula)?;
    let first = train.len();

    let mut results = Vec::new();
    let mut timing = Vec::new();
    let mut replays = Vec::new();
    let mut names = Vec::new();
    for c in [*cfg, with_kind(cfg, ClassifierKind::Rf)] {
        let name = config_name(&c);
        let (mut p, train_time) = timed(|| Pipeline::train(train, formula, &c))?;
        let incremental = c.classifier.kind.is_incremental();
        let r = replay(&mut p, test.cases(), &gold, first, first, incremental)?;
        results.push(row(TEST, TEST, &name, r.counts, r.fallbacks, p.learn_calls(), r.update_prefixes)?);
        timing.push(timing_row(TEST, &name, train_time + r.update_time));
        names.push(name);
        replays.push(r);
    }
    let deltas = vec![delta_row(TEST, TEST, &results[0], &results[1])];
    let time_deltas = vec![time_delta(TEST, &timing[0], &timing[1])];
    Ok(ScenarioReport {
        metrics: MetricsSection {
            metadata: Metadata {
                scenario: 1,
                formula: formula.to_string(),
                config: *cfg,
                log_cases: log.len(),
                split_sizes: parts.iter().map(EventLog::len).collect(),
                drift_index: None,
            },
            results,
            deltas,
        },
        timing: TimingSection {
            rows: timing,
            deltas: time_deltas,
        },
        series: interleave_series(names, test.cases(), first, &[&replays[0], &replays[1]]),
    })
}

/// 40/20/20/20 split; retraining from scratch against incremental updates.
pub fn run_scenario2(log: &EventLog, formula: &Formula, cfg: &PipelineConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    require_incremental(cfg)?;
    let parts = split(log, &[40.0, 20.0, 20.0, 20.0])?;
    let test = &parts[3];
    let gold = gold_labels(test.cases(), formula)?;
    let first = log.len() - test.len();
    let steps = ["60%", "80%"];

    let mut results = Vec::new();
    let mut timing = Vec::new();

    // incremental: train once, then absorb segments 2 and 3
    let inc = *cfg;
    let inc_name = config_name(&inc);
    let (mut p, mut elapsed) = timed(|| Pipeline::train(&parts[0], formula, &inc))?;
    let mut absorbed = 0;
    for (step, segment) in steps.iter().zip(&parts[1..3]) {
        for case in segment.cases() {
            let ((), t) = timed(|| p.update(case))?;
            elapsed += t;
            absorbed += extract_prefixes(case, None, inc.prefix_min, inc.prefix_max).len() as u64;
        }
        let r = replay(&mut p, test.cases(), &gold, first, first, false)?;
        results.push(row(step, TEST, &inc_name, r.counts, r.fallbacks, p.learn_calls(), absorbed)?);
        timing.push(timing_row(step, &inc_name, elapsed));
    }

    // forest: initial training, then a full retrain at each checkpoint
    let rf = with_kind(cfg, ClassifierKind::Rf);
    let rf_name = config_name(&rf);
    let ((), mut elapsed) = timed(|| Pipeline::train(&parts[0], formula, &rf).map(drop))?;
    for (k, step) in steps.iter().enumerate() {
        let data = merged(log, &parts[..k + 2]);
        let (mut p, t) = timed(|| Pipeline::train(&data, formula, &rf))?;
        elapsed += t;
        let r = replay(&mut p, test.cases(), &gold, first, first, false)?;
        results.push(row(step, TEST, &rf_name, r.counts, r.fallbacks, p.learn_calls(), 0)?);
        timing.push(timing_row(step, &rf_name, elapsed));
    }

    let mut deltas = Vec::new();
    let mut time_deltas = Vec::new();
    for (k, step) in steps.iter().enumerate() {
        deltas.push(delta_row(step, TEST, &results[k], &results[k + 2]));
        time_deltas.push(time_delta(step, &timing[k], &timing[k + 2]));
    }
    Ok(ScenarioReport {
        metrics: MetricsSection {
            metadata: Metadata {
                scenario: 2,
                formula: formula.to_string(),
                config: *cfg,
                log_cases: log.len(),
                split_sizes: parts.iter().map(EventLog::len).collect(),
                drift_index: None,
            },
            results,
            deltas,
        },
        timing: TimingSection {
            rows: timing,
            deltas: time_deltas,
        },
        series: Series::default(),
    })
}

/// 40/60 split around a drift at `drift_index`; adaptive against plain
/// Hoeffding trees under the configured approach.
pub fn run_scenario3(log: &EventLog, formula: &Formula, cfg: &PipelineConfig, drift_index: usize) -> Result<ScenarioReport> {
    cfg.validate()?;
    if cfg.classifier.kind == ClassifierKind::Rf {
        return Err(Error::InvalidConfig(
            "the drift scenario compares aht against ht; rf is not applicable".into(),
        ));
    }
    let parts = split(log, &[40.0, 60.0])?;
    let (train, test) = (&parts[0], &parts[1]);
    if drift_index < train.len() || drift_index >= log.len() {
        return Err(Error::Scenario(format!(
            "drift index {drift_index} lies outside the test region [{}, {})",
            train.len(),
            log.len()
        )));
    }
    let gold = gold_labels(test.cases(), formula)?;
    let first = train.len();

    let mut results = Vec::new();
    let mut timing = Vec::new();
    let mut replays = Vec::new();
    let mut names = Vec::new();
    for kind in [ClassifierKind::Aht, ClassifierKind::Ht] {
        let c = with_kind(cfg, kind);
        let name = config_name(&c);
        let (mut p, train_time) = timed(|| Pipeline::train(train, formula, &c))?;
        let r = replay(&mut p, test.cases(), &gold, first, drift_index, true)?;
        results.push(row(TEST, TEST, &name, r.counts, r.fallbacks, p.learn_calls(), r.update_prefixes)?);
        results.push(row(TEST, POST_DRIFT, &name, r.region, r.region_fallbacks, p.learn_calls(), r.update_prefixes)?);
        timing.push(timing_row(TEST, &name, train_time + r.update_time));
        names.push(name);
        replays.push(r);
    }
    let deltas = vec![
        delta_row(TEST, TEST, &results[0], &results[2]),
        delta_row(TEST, POST_DRIFT, &results[1], &results[3]),
    ];
    let time_deltas = vec![time_delta(TEST, &timing[0], &timing[1])];
    Ok(ScenarioReport {
        metrics: MetricsSection {
            metadata: Metadata {
                scenario: 3,
                formula: formula.to_string(),
                config: *cfg,
                log_cases: log.len(),
                split_sizes: parts.iter().map(EventLog::len).collect(),
                drift_index: Some(drift_index),
            },
            results,
            deltas,
        },
        timing: TimingSection {
            rows: timing,
            deltas: time_deltas,
        },
        series: interleave_series(names, test.cases(), first, &[&replays[0], &replays[1]]),
    })
}
