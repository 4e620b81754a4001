//! Online detection state machine: one observation in, one [`StepReport`] out.
//!
//! With look-back `b` (always 3 for RePAD2) a stream moves through:
//!
//! * `T < b-1`: collect only.
//! * `b-1 <= T < 2b-1`: train on the last `b` values, forecast `T+1`.
//! * `2b-1 <= T < 2b+1`: compute AARE, then train and forecast as above.
//! * `T >= 2b+1`: compare AARE with the three-sigma threshold. A miss
//!   triggers one retrain on the `b` values before `T` and a re-forecast;
//!   if that still misses, `D_T` is an anomaly and the next step retrains
//!   unconditionally (`flag = false`) until a forecast is accepted again.
//!
//! RePAD2 installs the retrained model whenever the re-forecast is accepted.
//! RePAD keeps its current model in that case and only swaps models when
//! recovering from `flag = false`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::lstm::{LstmConfig, LstmError};
use crate::predictor::{LstmPredictor, Predictor};
use crate::series_io::{TimeSeries, TimeSeriesPoint};
use crate::stats::{compute_aare, StatsError, ThresholdTracker, TrackerMode};

/// Sliding-window sizes evaluated on 5-minute data: 5, 14, 28 and 56 days.
pub const SUGGESTED_WINDOWS: [usize; 4] = [1440, 4032, 8064, 16128];

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("invalid detector configuration: {0}")]
    Config(String),
    #[error("expected point {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("non-finite value at point {0}")]
    NonFinite(usize),
    #[error("training failed at point {at}: {source}")]
    Training {
        at: usize,
        #[source]
        source: LstmError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no reports")]
    NoReports,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Threshold over every AARE since the start of the stream.
    RePad,
    /// Threshold over the last `W` AAREs.
    RePad2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RePad => "repad",
            Algorithm::RePad2 => "repad2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub algorithm: Algorithm,
    pub lookback: usize,
    /// AARE window `W`; required for RePAD2, rejected for RePAD.
    pub window: Option<usize>,
    /// RePAD only: keep every AARE in memory instead of running moments.
    pub store_all_history: bool,
    pub lstm: LstmConfig,
}

impl DetectorConfig {
    pub fn repad2(window: usize) -> Self {
        DetectorConfig {
            algorithm: Algorithm::RePad2,
            lookback: 3,
            window: Some(window),
            store_all_history: false,
            lstm: LstmConfig::default(),
        }
    }

    pub fn repad(lookback: usize) -> Self {
        DetectorConfig {
            algorithm: Algorithm::RePad,
            lookback,
            window: None,
            store_all_history: false,
            lstm: LstmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        match self.algorithm {
            Algorithm::RePad2 => {
                if self.lookback != 3 {
                    return Err(DetectorError::Config(format!(
                        "repad2 uses a fixed look-back of 3, got {}",
                        self.lookback
                    )));
                }
                match self.window {
                    None => return Err(DetectorError::Config("repad2 requires a window W".into())),
                    Some(w) if w < 3 => {
                        return Err(DetectorError::Config(format!("window must be >= 3, got {w}")))
                    }
                    Some(_) => {}
                }
                if self.store_all_history {
                    return Err(DetectorError::Config("store-all history applies to repad only".into()));
                }
            }
            Algorithm::RePad => {
                if self.lookback < 2 {
                    return Err(DetectorError::Config(format!(
                        "look-back must be >= 2, got {}",
                        self.lookback
                    )));
                }
                if self.window.is_some() {
                    return Err(DetectorError::Config("repad does not take a window".into()));
                }
            }
        }
        self.lstm.validate().map_err(|e| DetectorError::Config(e.to_string()))
    }

    fn tracker_mode(&self) -> TrackerMode {
        match (self.algorithm, self.window) {
            (Algorithm::RePad2, Some(w)) => TrackerMode::Windowed(w),
            _ if self.store_all_history => TrackerMode::AllHistoryStored,
            _ => TrackerMode::AllHistory,
        }
    }

    /// First time point with a verdict (`2b + 1`).
    pub fn first_verdict(&self) -> usize {
        2 * self.lookback + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Warmup,
    Normal,
    Anomaly,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Warmup => "warmup",
            Verdict::Normal => "normal",
            Verdict::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time_point: usize,
    pub observed: f64,
    /// Final forecast of this point, once one exists.
    pub predicted: Option<f64>,
    pub aare: Option<f64>,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
    /// A conditional (post-warm-up) training happened at this point.
    pub retrained: bool,
    /// The forecast of this point was replaced after a retrain.
    pub re_predicted: bool,
    /// Detector flag after this step.
    pub flag: bool,
    pub decision_latency: Duration,
}

/// Last few `(time point, forecast)` pairs.
#[derive(Debug, Clone, Default)]
struct Forecasts(VecDeque<(usize, f64)>);

impl Forecasts {
    fn set(&mut self, t: usize, v: f64, keep: usize) {
        if let Some(slot) = self.0.iter_mut().find(|(at, _)| *at == t) {
            slot.1 = v;
            return;
        }
        self.0.push_back((t, v));
        while self.0.len() > keep {
            self.0.pop_front();
        }
    }

    fn get(&self, t: usize) -> Option<f64> {
        self.0.iter().find(|(at, _)| *at == t).map(|(_, v)| *v)
    }
}

/// Running detector over one stream.
pub struct Detector<P: Predictor> {
    config: DetectorConfig,
    predictor: P,
    next: usize,
    flag: bool,
    model: Option<P::Model>,
    // last b+1 observations, newest at the back
    recent: VecDeque<f64>,
    forecasts: Forecasts,
    tracker: ThresholdTracker,
    retrain_events: usize,
    anomalies: usize,
}

impl Detector<LstmPredictor> {
    /// Detector backed by an LSTM built from `config.lstm`.
    pub fn with_lstm(config: DetectorConfig) -> Result<Self, DetectorError> {
        let predictor = LstmPredictor::new(config.lstm.clone());
        Detector::new(config, predictor)
    }
}

impl<P: Predictor> Detector<P> {
    pub fn new(config: DetectorConfig, predictor: P) -> Result<Self, DetectorError> {
        config.validate()?;
        let tracker = ThresholdTracker::new(config.tracker_mode())?;
        let b = config.lookback;
        Ok(Detector {
            config,
            predictor,
            next: 0,
            flag: true,
            model: None,
            recent: VecDeque::with_capacity(b + 1),
            forecasts: Forecasts::default(),
            tracker,
            retrain_events: 0,
            anomalies: 0,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    /// Model currently used for forecasting (`M`).
    pub fn model(&self) -> Option<&P::Model> {
        self.model.as_ref()
    }

    pub fn tracker(&self) -> &ThresholdTracker {
        &self.tracker
    }

    pub fn points_seen(&self) -> usize {
        self.next
    }

    pub fn retrain_events(&self) -> usize {
        self.retrain_events
    }

    pub fn anomalies(&self) -> usize {
        self.anomalies
    }

    fn train(&self, window: &[f64], at: usize) -> Result<P::Model, DetectorError> {
        self.predictor.train(window, at).map_err(|source| DetectorError::Training { at, source })
    }

    fn aare_at(&self, t: usize) -> crate::stats::AareValue {
        let b = self.config.lookback;
        let observed: Vec<f64> = self.recent.iter().skip(self.recent.len() - b).copied().collect();
        let predicted: Vec<f64> = (t + 1 - b..=t)
            .map(|y| self.forecasts.get(y).expect("forecast bookkeeping"))
            .collect();
        compute_aare(t, &observed, &predicted)
    }

    pub fn step(&mut self, point: TimeSeriesPoint) -> Result<StepReport, DetectorError> {
        let started = Instant::now();
        let t = point.index;
        if t != self.next {
            return Err(DetectorError::OutOfOrder { expected: self.next, got: t });
        }
        if !point.value.is_finite() {
            return Err(DetectorError::NonFinite(t));
        }
        let b = self.config.lookback;
        self.recent.push_back(point.value);
        if self.recent.len() > b + 1 {
            self.recent.pop_front();
        }
        self.next += 1;

        let mut report = StepReport {
            time_point: t,
            observed: point.value,
            predicted: self.forecasts.get(t),
            aare: None,
            threshold: None,
            verdict: Verdict::Warmup,
            retrained: false,
            re_predicted: false,
            flag: self.flag,
            decision_latency: Duration::ZERO,
        };

        if t + 1 < b {
            // collecting
        } else if t < 2 * b + 1 {
            if t >= 2 * b - 1 {
                let aare = self.aare_at(t);
                self.tracker.push(aare);
                report.aare = Some(aare.value);
            }
            let window: Vec<f64> = self.recent.iter().skip(self.recent.len() - b).copied().collect();
            let model = self.train(&window, t)?;
            let next = self.predictor.predict(&model, &window, t + 1);
            self.forecasts.set(t + 1, next, b + 1);
            self.model = Some(model);
        } else {
            self.decide(t, &mut report)?;
        }
        report.flag = self.flag;
        report.decision_latency = started.elapsed();
        Ok(report)
    }

    fn decide(&mut self, t: usize, report: &mut StepReport) -> Result<(), DetectorError> {
        let b = self.config.lookback;
        let history: Vec<f64> = self.recent.iter().take(b).copied().collect();
        if self.flag {
            if t != self.config.first_verdict() {
                let model = self.model.as_ref().expect("model installed during warm-up");
                let forecast = self.predictor.predict(model, &history, t);
                self.forecasts.set(t, forecast, b + 1);
            }
            let aare = self.aare_at(t);
            self.tracker.push(aare);
            let threshold = self.tracker.threshold()?;
            report.predicted = self.forecasts.get(t);
            report.aare = Some(aare.value);
            report.threshold = Some(threshold);
            if aare.value <= threshold {
                report.verdict = Verdict::Normal;
                return Ok(());
            }
            let candidate = self.train(&history, t)?;
            self.retrain_events += 1;
            report.retrained = true;
            report.re_predicted = true;
            let forecast = self.predictor.predict(&candidate, &history, t);
            self.forecasts.set(t, forecast, b + 1);
            let aare = self.aare_at(t);
            self.tracker.replace_last(aare)?;
            let threshold = self.tracker.threshold()?;
            report.predicted = Some(forecast);
            report.aare = Some(aare.value);
            report.threshold = Some(threshold);
            if aare.value <= threshold {
                report.verdict = Verdict::Normal;
                if self.config.algorithm == Algorithm::RePad2 {
                    self.model = Some(candidate);
                }
            } else {
                report.verdict = Verdict::Anomaly;
                self.anomalies += 1;
                self.flag = false;
            }
        } else {
            let candidate = self.train(&history, t)?;
            self.retrain_events += 1;
            report.retrained = true;
            let forecast = self.predictor.predict(&candidate, &history, t);
            self.forecasts.set(t, forecast, b + 1);
            let aare = self.aare_at(t);
            self.tracker.push(aare);
            let threshold = self.tracker.threshold()?;
            report.predicted = Some(forecast);
            report.aare = Some(aare.value);
            report.threshold = Some(threshold);
            if aare.value <= threshold {
                report.verdict = Verdict::Normal;
                self.model = Some(candidate);
                self.flag = true;
            } else {
                report.verdict = Verdict::Anomaly;
                self.anomalies += 1;
            }
        }
        Ok(())
    }
}

/// Runs a fresh detector over `series`.
pub fn run_stream<P: Predictor>(
    config: &DetectorConfig,
    predictor: P,
    series: &TimeSeries,
) -> Result<Vec<StepReport>, DetectorError> {
    let mut detector = Detector::new(config.clone(), predictor)?;
    series.points().iter().map(|p| detector.step(*p)).collect()
}

/// [`run_stream`] with the LSTM predictor from `config.lstm`.
pub fn run_stream_lstm(config: &DetectorConfig, series: &TimeSeries) -> Result<Vec<StepReport>, DetectorError> {
    run_stream(config, LstmPredictor::new(config.lstm.clone()), series)
}

/// Share of points at which a conditional retrain happened. Warm-up
/// trainings are not counted.
pub fn retraining_ratio(reports: &[StepReport]) -> Result<f64, DetectorError> {
    if reports.is_empty() {
        return Err(DetectorError::NoReports);
    }
    Ok(reports.iter().filter(|r| r.retrained).count() as f64 / reports.len() as f64)
}
