//! Metrics and evaluation protocols.
//!
//! All metrics are computed per fingerprint over labeled fingerprints only,
//! with indoor as the positive class.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learner::{predict, Model, Prediction};
use crate::model::{FingerprintMatrix, Label};
use crate::pipeline::{build_structure, train_structure, PipelineConfig};

/// Area under the ROC curve: the probability that a random indoor instance
/// outscores a random outdoor one, ties counting one half.
pub fn auc(scored: &[(f64, Label)]) -> Result<f64> {
    let positives = scored.iter().filter(|(_, l)| l.is_positive()).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));
    // rank sum of positives with tied groups sharing their average rank
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[start]].0 {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        let pos_in_group = order[start..end]
            .iter()
            .filter(|&&i| scored[i].1.is_positive())
            .count();
        positive_rank_sum += avg * pos_in_group as f64;
        start = end;
    }
    let (p, n) = (positives as f64, negatives as f64);
    Ok((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub accuracy: f64,
    pub indoor_prior: f64,
    pub confusion: Confusion,
    pub n_evaluated: usize,
}

impl EvalReport {
    pub fn error_rate(&self) -> f64 {
        1.0 - self.accuracy
    }
}

/// Scores the prediction against per-fingerprint labels; unlabeled
/// fingerprints are skipped.
pub fn evaluate(pred: &Prediction, labels: &[Option<Label>]) -> Result<EvalReport> {
    assert_eq!(pred.fingerprint_scores.len(), labels.len());
    let mut confusion = Confusion::default();
    let mut scored = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        let Some(truth) = *label else { continue };
        scored.push((pred.fingerprint_scores[i], truth));
        match (truth, pred.fingerprint_label(i)) {
            (Label::Indoor, Label::Indoor) => confusion.tp += 1,
            (Label::Indoor, Label::Outdoor) => confusion.fn_ += 1,
            (Label::Outdoor, Label::Indoor) => confusion.fp += 1,
            (Label::Outdoor, Label::Outdoor) => confusion.tn += 1,
        }
    }
    let n = confusion.total();
    if n == 0 {
        return Err(Error::NoLabels);
    }
    Ok(EvalReport {
        auc: auc(&scored).ok(),
        accuracy: (confusion.tp + confusion.tn) as f64 / n as f64,
        indoor_prior: (confusion.tp + confusion.fn_) as f64 / n as f64,
        confusion,
        n_evaluated: n,
    })
}

/// Latency above which a detected switch still counts as missed.
pub const MISSED_AFTER_S: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchDirection {
    ToIndoor,
    ToOutdoor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Switch {
    /// Fingerprint index where the new ground-truth label starts.
    pub index: usize,
    pub timestamp_ms: i64,
    pub direction: SwitchDirection,
    /// Seconds until the first matching prediction, if one occurred before
    /// the next ground-truth switch.
    pub latency_s: Option<f64>,
    pub missed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchLatencyReport {
    pub switches: Vec<Switch>,
    pub mean_latency_to_indoor_s: Option<f64>,
    pub mean_latency_to_outdoor_s: Option<f64>,
    pub missed_fraction: f64,
}

/// Detection latency of every ground-truth indoor/outdoor switch.
///
/// A switch is detected by the first fingerprint, at or after the switch and
/// before the next one, whose hard prediction equals the new label. Missing
/// detection, or a latency above [`MISSED_AFTER_S`], marks it missed.
pub fn switch_latency(
    pred: &Prediction,
    labels: &[Option<Label>],
    timestamps: &[i64],
) -> Result<SwitchLatencyReport> {
    assert_eq!(labels.len(), timestamps.len());
    let mut starts: Vec<(usize, Label)> = Vec::new();
    let mut previous: Option<Label> = None;
    for (i, label) in labels.iter().enumerate() {
        let Some(l) = *label else { continue };
        if previous.is_some_and(|p| p != l) {
            starts.push((i, l));
        }
        previous = Some(l);
    }
    if starts.is_empty() {
        return Err(Error::NoTransitions);
    }
    let predicted = pred.fingerprint_labels();
    let mut switches = Vec::with_capacity(starts.len());
    for (k, &(start, label)) in starts.iter().enumerate() {
        let end = starts.get(k + 1).map_or(labels.len(), |s| s.0);
        let t0 = timestamps[start];
        let latency_s = (start..end)
            .find(|&j| predicted[j] == label)
            .map(|j| (timestamps[j] - t0) as f64 / 1000.0);
        switches.push(Switch {
            index: start,
            timestamp_ms: t0,
            direction: match label {
                Label::Indoor => SwitchDirection::ToIndoor,
                Label::Outdoor => SwitchDirection::ToOutdoor,
            },
            latency_s,
            missed: latency_s.is_none_or(|l| l > MISSED_AFTER_S),
        });
    }
    let mean = |dir: SwitchDirection| {
        let v: Vec<f64> = switches
            .iter()
            .filter(|s| s.direction == dir && !s.missed)
            .filter_map(|s| s.latency_s)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let missed = switches.iter().filter(|s| s.missed).count();
    Ok(SwitchLatencyReport {
        mean_latency_to_indoor_s: mean(SwitchDirection::ToIndoor),
        mean_latency_to_outdoor_s: mean(SwitchDirection::ToOutdoor),
        missed_fraction: missed as f64 / switches.len() as f64,
        switches,
    })
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub location: String,
    pub report: EvalReport,
    pub model: Model,
}

#[derive(Debug, Clone)]
pub struct CrossValidationReport {
    pub folds: Vec<Fold>,
    /// Mean over folds whose held-out fingerprints contain both classes.
    pub mean_auc: Option<f64>,
}

/// Leave-one-location-out validation.
///
/// Clustering and the graph span the whole matrix; for each location the
/// model only sees labels of fingerprints tagged with other locations (or
/// untagged), and is evaluated on the held-out location's fingerprints.
pub fn location_cross_validation(
    m: &FingerprintMatrix,
    cfg: &PipelineConfig,
) -> Result<CrossValidationReport> {
    let locations: BTreeSet<&str> = m.locations().iter().flatten().map(String::as_str).collect();
    if locations.len() < 2 {
        return Err(Error::SingleLocation(locations.len()));
    }
    let structure = build_structure(m, cfg)?;
    let mut folds = Vec::with_capacity(locations.len());
    for location in locations {
        let held_out: Vec<bool> = m
            .locations()
            .iter()
            .map(|l| l.as_deref() == Some(location))
            .collect();
        let train_labels: Vec<Option<Label>> = m
            .labels()
            .iter()
            .zip(&held_out)
            .map(|(l, &h)| if h { None } else { *l })
            .collect();
        let test_labels: Vec<Option<Label>> = m
            .labels()
            .iter()
            .zip(&held_out)
            .map(|(l, &h)| if h { *l } else { None })
            .collect();
        let (model, _) = train_structure(&structure, &train_labels, cfg)?;
        let prediction = predict(
            &model,
            &structure.features,
            &structure.assignment,
            cfg.threshold,
        )?;
        let report = evaluate(&prediction, &test_labels)?;
        folds.push(Fold {
            location: location.to_string(),
            report,
            model,
        });
    }
    let aucs: Vec<f64> = folds.iter().filter_map(|f| f.report.auc).collect();
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(CrossValidationReport { folds, mean_auc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmupPoint {
    pub minute: usize,
    pub fingerprints: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupReport {
    pub points: Vec<WarmupPoint>,
}

impl WarmupReport {
    /// Two-column `minute,accuracy` series.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "minute,accuracy")?;
        for p in &self.points {
            writeln!(w, "{},{}", p.minute, p.accuracy)?;
        }
        Ok(())
    }
}

const MINUTE_MS: i64 = 60_000;

/// Per-minute accuracy of a fixed model as the scenario's structure is
/// rebuilt from a growing prefix (minutes 1..=m counted from the first scan).
/// Stops early once the scenario has no scans left.
pub fn warmup_eval(
    model: &Model,
    m: &FingerprintMatrix,
    minutes: usize,
    cfg: &PipelineConfig,
) -> Result<WarmupReport> {
    let Some(first) = m.fingerprints().first() else {
        return Err(Error::EmptyPrefix);
    };
    let t0 = first.timestamp_ms;
    let timestamps = m.timestamps();
    let mut points = Vec::new();
    for minute in 1..=minutes {
        let end = t0 + minute as i64 * MINUTE_MS;
        let n = timestamps.partition_point(|&t| t < end);
        let previous_end = end - MINUTE_MS;
        if n == m.len() && timestamps.partition_point(|&t| t < previous_end) == m.len() {
            break;
        }
        let prefix = m.prefix(n);
        let structure = build_structure(&prefix, cfg)?;
        let prediction = predict(
            model,
            &structure.features,
            &structure.assignment,
            cfg.threshold,
        )?;
        let report = evaluate(&prediction, prefix.labels())?;
        points.push(WarmupPoint {
            minute,
            fingerprints: n,
            accuracy: report.accuracy,
        });
    }
    Ok(WarmupReport { points })
}
