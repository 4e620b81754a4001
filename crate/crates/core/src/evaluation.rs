//! Scoring detections against labelled anomalies with a tolerance window of
//! `K` points on either side, plus latency and retraining summaries.

use std::time::Duration;

use crate::detector::{retraining_ratio, StepReport, Verdict};
use crate::series_io::LabelSet;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("detections must be sorted ascending (index {0} follows {1})")]
    Unsorted(usize, usize),
    #[error("label ({start},{end}) lies beyond the {len} reported points")]
    LabelBeyondReports { start: usize, end: usize, len: usize },
    #[error("no reports to summarise")]
    NoReports,
}

/// How detections outside every label window are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FpCounting {
    /// Each maximal run of consecutive unmatched indices is one FP.
    #[default]
    Runs,
    /// Every unmatched detection is one FP.
    PerDetection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchConfig {
    pub k: usize,
    pub fp_counting: FpCounting,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { k: 7, fp_counting: FpCounting::Runs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl EvalCounts {
    pub fn scaled(self, by: usize) -> Self {
        EvalCounts { tp: self.tp * by, fp: self.fp * by, fn_: self.fn_ * by }
    }
}

/// Each label is one ground-truth unit with acceptance window
/// `[start-K, end+K]`. Labels are visited in order and each claims the
/// earliest unclaimed detection inside its window, so a detection in the
/// overlap of two windows credits the earlier label and no detection credits
/// two labels. This greedy pass is a maximum matching, which keeps TP
/// non-decreasing in K. Detections inside some window but not claimed are
/// ignored; detections in no window become false positives.
pub fn match_detections(detections: &[usize], labels: &LabelSet, cfg: &MatchConfig) -> Result<EvalCounts, EvalError> {
    if let Some(w) = detections.windows(2).find(|w| w[1] < w[0]) {
        return Err(EvalError::Unsorted(w[1], w[0]));
    }
    let windows: Vec<(usize, usize)> = labels
        .anomalies()
        .iter()
        .map(|a| (a.start.saturating_sub(cfg.k), a.end.saturating_add(cfg.k)))
        .collect();

    let mut tp = 0;
    let mut next = 0;
    for &(lo, hi) in &windows {
        while next < detections.len() && detections[next] < lo {
            next += 1;
        }
        if next < detections.len() && detections[next] <= hi {
            tp += 1;
            next += 1;
        }
    }

    let mut unmatched = Vec::new();
    // windows are sorted by both ends; `first` skips those that ended before `d`
    let mut first = 0;
    for &d in detections {
        while first < windows.len() && windows[first].1 < d {
            first += 1;
        }
        if !windows.get(first).is_some_and(|&(lo, _)| lo <= d) {
            unmatched.push(d);
        }
    }
    let fp = match cfg.fp_counting {
        FpCounting::PerDetection => unmatched.len(),
        FpCounting::Runs => {
            unmatched.len() - unmatched.windows(2).filter(|w| w[1] <= w[0] + 1).count()
        }
    };
    Ok(EvalCounts { tp, fp, fn_: windows.len() - tp })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// Precision, recall and F-score. With no claims precision is 1 only if
/// there was nothing to find; with nothing to find recall is 1; F is 0 when
/// precision and recall are both 0.
pub fn score(counts: &EvalCounts) -> Scores {
    let EvalCounts { tp, fp, fn_ } = *counts;
    let precision = if tp + fp == 0 {
        if fn_ == 0 { 1.0 } else { 0.0 }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f_score = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f_score }
}

/// Mean and population standard deviation, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_secs: f64,
    pub std_secs: f64,
}

pub fn latency_stats(samples: impl IntoIterator<Item = Duration>) -> Option<LatencyStats> {
    let secs: Vec<f64> = samples.into_iter().map(|d| d.as_secs_f64()).collect();
    if secs.is_empty() {
        return None;
    }
    let n = secs.len() as f64;
    let mean = secs.iter().sum::<f64>() / n;
    let var = secs.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Some(LatencyStats { count: secs.len(), mean_secs: mean, std_secs: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub scores: Scores,
    pub counts: EvalCounts,
    pub points: usize,
    pub detections: usize,
    pub retrains: usize,
    pub retraining_ratio: f64,
    /// `None` when no point needed a retrain.
    pub latency_retrain: Option<LatencyStats>,
    pub latency_noretrain: Option<LatencyStats>,
}

pub fn summarize(reports: &[StepReport], labels: &LabelSet, cfg: &MatchConfig) -> Result<EvalSummary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    if let Some(a) = labels.anomalies().iter().find(|a| a.end >= reports.len()) {
        return Err(EvalError::LabelBeyondReports { start: a.start, end: a.end, len: reports.len() });
    }
    let detections: Vec<usize> = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Anomaly)
        .map(|r| r.time_point)
        .collect();
    let counts = match_detections(&detections, labels, cfg)?;
    let retrains = reports.iter().filter(|r| r.retrained).count();
    Ok(EvalSummary {
        scores: score(&counts),
        counts,
        points: reports.len(),
        detections: detections.len(),
        retrains,
        retraining_ratio: retraining_ratio(reports).map_err(|_| EvalError::NoReports)?,
        latency_retrain: latency_stats(reports.iter().filter(|r| r.retrained).map(|r| r.decision_latency)),
        latency_noretrain: latency_stats(reports.iter().filter(|r| !r.retrained).map(|r| r.decision_latency)),
    })
}
