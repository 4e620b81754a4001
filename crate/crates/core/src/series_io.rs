//! Time-series ingestion: NAB-style CSV series, index-range label files,
//! duplicated ("extended") series and seeded synthetic streams.
//!
//! All detection logic runs on the integer index of a point. Timestamps are
//! carried along for reporting only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{NaiveDateTime, TimeDelta};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

const TIMESTAMP_FORMATS: [&str; 2] = ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"];
const TIMESTAMP_OUT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: non-finite value {value}")]
    NonFinite { line: usize, value: f64 },
    #[error("copies must be at least 1")]
    ZeroCopies,
    #[error("label ({start},{end}) outside series of length {len}")]
    LabelOutOfRange { start: usize, end: usize, len: usize },
    #[error("label ({start},{end}) has start after end")]
    InvertedLabel { start: usize, end: usize },
    #[error("labels ({0},{1}) and ({2},{3}) overlap")]
    OverlappingLabels(usize, usize, usize, usize),
    #[error("invalid synthetic configuration: {0}")]
    Synthetic(String),
}

fn io_err(path: &Path, source: std::io::Error) -> SeriesError {
    SeriesError::Io { path: path.display().to_string(), source }
}

/// One observation of the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSeriesPoint {
    pub index: usize,
    pub timestamp: Option<NaiveDateTime>,
    pub value: f64,
}

/// A gapless, zero-indexed univariate series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    points: Vec<TimeSeriesPoint>,
}

impl TimeSeries {
    /// Builds a series from raw values, without timestamps.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let points = values
            .into_iter()
            .enumerate()
            .map(|(index, value)| TimeSeriesPoint { index, timestamp: None, value })
            .collect();
        TimeSeries { points }
    }

    fn from_parts(values: Vec<f64>, timestamps: Vec<Option<NaiveDateTime>>) -> Self {
        let points = values
            .into_iter()
            .zip(timestamps)
            .enumerate()
            .map(|(index, (value, timestamp))| TimeSeriesPoint { index, timestamp, value })
            .collect();
        TimeSeries { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[TimeSeriesPoint] {
        &self.points
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Indices holding an exact zero. Zeros are legal input, but relative
    /// errors at these points go through the denominator guard.
    pub fn zero_indices(&self) -> Vec<usize> {
        self.points.iter().filter(|p| p.value == 0.0).map(|p| p.index).collect()
    }

    /// Spacing between the first two timestamps, if both are present.
    pub fn sampling_interval(&self) -> Option<TimeDelta> {
        match (self.points.first()?.timestamp, self.points.get(1)?.timestamp) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    }

    /// Renders the series as `timestamp,value` CSV. Values use the shortest
    /// representation that parses back to the same `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 28 + 16);
        out.push_str("timestamp,value\n");
        for p in &self.points {
            if let Some(ts) = p.timestamp {
                let _ = write!(out, "{}", ts.format(TIMESTAMP_OUT));
            }
            let _ = writeln!(out, ",{}", p.value);
        }
        out
    }
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

/// Parses NAB-format CSV text. `#` lines and blank lines are skipped; the
/// first remaining line must be the `timestamp,value` header.
pub fn parse_series(text: &str) -> Result<TimeSeries, SeriesError> {
    let mut values = Vec::new();
    let mut timestamps = Vec::new();
    let mut seen_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["timestamp", "value"] {
                return Err(SeriesError::Malformed {
                    line: line_no,
                    reason: format!("expected header `timestamp,value`, found `{line}`"),
                });
            }
            seen_header = true;
            continue;
        }
        let (ts_raw, value_raw) = line.split_once(',').ok_or_else(|| SeriesError::Malformed {
            line: line_no,
            reason: "expected two comma-separated fields".into(),
        })?;
        let value: f64 = value_raw.trim().parse().map_err(|_| SeriesError::Malformed {
            line: line_no,
            reason: format!("cannot parse value `{}`", value_raw.trim()),
        })?;
        if !value.is_finite() {
            return Err(SeriesError::NonFinite { line: line_no, value });
        }
        let ts_raw = ts_raw.trim();
        let timestamp = if ts_raw.is_empty() {
            None
        } else {
            Some(parse_timestamp(ts_raw).ok_or_else(|| SeriesError::Malformed {
                line: line_no,
                reason: format!("cannot parse timestamp `{ts_raw}`"),
            })?)
        };
        values.push(value);
        timestamps.push(timestamp);
    }
    if !seen_header {
        return Err(SeriesError::Malformed { line: 1, reason: "missing header".into() });
    }
    let series = TimeSeries::from_parts(values, timestamps);
    let zeros = series.zero_indices();
    if !zeros.is_empty() {
        log::warn!("series contains {} zero values (first at index {})", zeros.len(), zeros[0]);
    }
    Ok(series)
}

pub fn load_series(path: &Path) -> Result<TimeSeries, SeriesError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_series(&text)
}

/// Concatenates `copies` repetitions of `series`. Timestamps are regenerated
/// as one continuous clock at the source sampling interval.
pub fn extend_series(series: &TimeSeries, copies: usize) -> Result<TimeSeries, SeriesError> {
    if copies == 0 {
        return Err(SeriesError::ZeroCopies);
    }
    let n = series.len();
    let origin = series.points.first().and_then(|p| p.timestamp);
    let interval = series.sampling_interval();
    let values: Vec<f64> = (0..copies).flat_map(|_| series.points.iter().map(|p| p.value)).collect();
    let timestamps = (0..n * copies)
        .map(|k| match (origin, interval) {
            (Some(t0), Some(dt)) => Some(t0 + dt * k as i32),
            _ if k < n => series.points[k].timestamp,
            _ => None,
        })
        .collect();
    Ok(TimeSeries::from_parts(values, timestamps))
}

/// Inclusive index range of one expert-labelled anomaly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnomalyLabel {
    pub start: usize,
    pub end: usize,
}

impl AnomalyLabel {
    pub fn point(index: usize) -> Self {
        AnomalyLabel { start: index, end: index }
    }

    pub fn is_point(&self) -> bool {
        self.start == self.end
    }
}

/// Sorted, non-overlapping labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    anomalies: Vec<AnomalyLabel>,
}

impl LabelSet {
    pub fn new(mut anomalies: Vec<AnomalyLabel>) -> Result<Self, SeriesError> {
        for a in &anomalies {
            if a.start > a.end {
                return Err(SeriesError::InvertedLabel { start: a.start, end: a.end });
            }
        }
        anomalies.sort();
        for pair in anomalies.windows(2) {
            if pair[1].start <= pair[0].end {
                return Err(SeriesError::OverlappingLabels(
                    pair[0].start,
                    pair[0].end,
                    pair[1].start,
                    pair[1].end,
                ));
            }
        }
        Ok(LabelSet { anomalies })
    }

    pub fn anomalies(&self) -> &[AnomalyLabel] {
        &self.anomalies
    }

    pub fn len(&self) -> usize {
        self.anomalies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anomalies.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.anomalies.iter().filter(|a| a.is_point()).count()
    }

    pub fn sequential_count(&self) -> usize {
        self.len() - self.point_count()
    }

    /// Checks every label lies inside a series of `len` points.
    pub fn check_range(&self, len: usize) -> Result<(), SeriesError> {
        match self.anomalies.iter().find(|a| a.end >= len) {
            Some(a) => Err(SeriesError::LabelOutOfRange { start: a.start, end: a.end, len }),
            None => Ok(()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.anomalies {
            let _ = writeln!(out, "{},{}", a.start, a.end);
        }
        out
    }
}

/// Parses `start,end` lines (inclusive indices); `#` comments and blank lines
/// are ignored.
pub fn parse_labels(text: &str) -> Result<LabelSet, SeriesError> {
    let mut anomalies = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = || SeriesError::Malformed {
            line: lineno + 1,
            reason: format!("expected `start,end`, found `{line}`"),
        };
        let (s, e) = line.split_once(',').ok_or_else(malformed)?;
        let start = s.trim().parse().map_err(|_| malformed())?;
        let end = e.trim().parse().map_err(|_| malformed())?;
        anomalies.push(AnomalyLabel { start, end });
    }
    LabelSet::new(anomalies)
}

pub fn load_labels(path: &Path) -> Result<LabelSet, SeriesError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_labels(&text)
}

/// Replicates each label once per copy of a series of `series_len` points.
pub fn extend_labels(labels: &LabelSet, series_len: usize, copies: usize) -> Result<LabelSet, SeriesError> {
    if copies == 0 {
        return Err(SeriesError::ZeroCopies);
    }
    labels.check_range(series_len)?;
    let anomalies = (0..copies)
        .flat_map(|k| {
            labels.anomalies.iter().map(move |a| AnomalyLabel {
                start: a.start + k * series_len,
                end: a.end + k * series_len,
            })
        })
        .collect();
    LabelSet::new(anomalies)
}

/// Sinusoid plus Gaussian noise plus injected point spikes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub length: usize,
    pub period: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub noise_sigma: f64,
    /// `(index, magnitude)` added on top of the noisy signal.
    pub spikes: Vec<(usize, f64)>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// One NAB-sized series: 4032 points, daily period of 288 samples,
    /// noise at 2% of the amplitude and ten spikes of 10 noise sigmas.
    fn default() -> Self {
        let length = 4032;
        let amplitude = 10.0;
        let noise_sigma = 0.02 * amplitude;
        SyntheticSpec {
            length,
            period: 288.0,
            amplitude,
            offset: 50.0,
            noise_sigma,
            spikes: evenly_spaced_spikes(length, 10, 10.0 * noise_sigma),
            seed: 140,
        }
    }
}

/// `count` spikes spread evenly over the series, leaving the warm-up region
/// and the tail clear.
pub fn evenly_spaced_spikes(length: usize, count: usize, magnitude: f64) -> Vec<(usize, f64)> {
    if count == 0 {
        return Vec::new();
    }
    let lead = (length / 10).max(16).min(length);
    let span = length.saturating_sub(lead + 16);
    let step = span / count.max(1);
    (0..count).map(|i| (lead + i * step + step / 2, magnitude)).collect()
}

/// Clean signal (offset plus sinusoid) at index `i`.
pub fn clean_signal(spec: &SyntheticSpec, i: usize) -> f64 {
    spec.offset + spec.amplitude * (std::f64::consts::TAU * i as f64 / spec.period).sin()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TimeSeries, LabelSet), SeriesError> {
    if spec.length == 0 {
        return Err(SeriesError::Synthetic("length must be positive".into()));
    }
    if spec.period.is_nan() || spec.period <= 0.0 {
        return Err(SeriesError::Synthetic("period must be positive".into()));
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| SeriesError::Synthetic(format!("noise sigma: {e}")))?;
    let mut values: Vec<f64> = Vec::with_capacity(spec.length);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed);
    for i in 0..spec.length {
        values.push(clean_signal(spec, i) + noise.sample(&mut rng));
    }
    let mut labels = Vec::with_capacity(spec.spikes.len());
    for &(index, magnitude) in &spec.spikes {
        if index >= spec.length {
            return Err(SeriesError::Synthetic(format!(
                "spike index {index} outside series of length {}",
                spec.length
            )));
        }
        values[index] += magnitude;
        labels.push(AnomalyLabel::point(index));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v <= 0.0) {
        return Err(SeriesError::Synthetic(format!(
            "value {v} at index {i} is not positive; raise the offset"
        )));
    }
    let origin = NaiveDateTime::parse_from_str("2014-04-10 00:00:00", TIMESTAMP_OUT).ok();
    let timestamps = (0..spec.length)
        .map(|k| origin.map(|t0| t0 + TimeDelta::minutes(5) * k as i32))
        .collect();
    let labels = LabelSet::new(labels).map_err(|e| SeriesError::Synthetic(e.to_string()))?;
    Ok((TimeSeries::from_parts(values, timestamps), labels))
}
