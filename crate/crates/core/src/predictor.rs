//! The training/prediction seam used by the detector, the LSTM
//! implementation of it, and deterministic stubs for end-to-end checks.

use std::sync::Arc;

use crate::lstm::{self, LstmConfig, LstmError, LstmModel, TrainingWindow};

/// Builds a model from a window of observations and uses it to forecast one
/// step ahead.
pub trait Predictor {
    type Model: Clone + Send;

    /// Trains on `window`; `trained_at` is the time point of the training
    /// event, which stubs may use to tag models.
    fn train(&self, window: &[f64], trained_at: usize) -> Result<Self::Model, LstmError>;

    /// Forecasts the value at `target` from the `recent` observations that
    /// immediately precede it.
    fn predict(&self, model: &Self::Model, recent: &[f64], target: usize) -> f64;
}

/// The LSTM predictor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LstmPredictor {
    pub config: LstmConfig,
}

impl LstmPredictor {
    pub fn new(config: LstmConfig) -> Self {
        LstmPredictor { config }
    }
}

impl Predictor for LstmPredictor {
    type Model = LstmModel;

    fn train(&self, window: &[f64], _trained_at: usize) -> Result<LstmModel, LstmError> {
        lstm::train(&TrainingWindow::new(window)?, &self.config)
    }

    fn predict(&self, model: &LstmModel, recent: &[f64], _target: usize) -> f64 {
        model.predict_next(recent)
    }
}

/// Model produced by the stub predictors: the time point it was trained at
/// and the linear trend of its training window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StubModel {
    pub trained_at: usize,
    pub slope: f64,
}

fn stub_model(window: &[f64], trained_at: usize) -> StubModel {
    let n = window.len();
    let slope = if n > 1 { (window[n - 1] - window[0]) / (n - 1) as f64 } else { 0.0 };
    StubModel { trained_at, slope }
}

/// Forecasts the actual next value of a known series.
#[derive(Debug, Clone)]
pub struct PerfectStub {
    values: Arc<[f64]>,
}

impl PerfectStub {
    pub fn new(values: &[f64]) -> Self {
        PerfectStub { values: values.into() }
    }
}

impl Predictor for PerfectStub {
    type Model = StubModel;

    fn train(&self, window: &[f64], trained_at: usize) -> Result<StubModel, LstmError> {
        Ok(stub_model(window, trained_at))
    }

    fn predict(&self, _model: &StubModel, recent: &[f64], target: usize) -> f64 {
        self.values.get(target).copied().unwrap_or_else(|| recent.last().copied().unwrap_or(0.0))
    }
}

/// Forecasts the last observed value.
#[derive(Debug, Clone, Copy, Default)]
pub struct PreviousValueStub;

impl Predictor for PreviousValueStub {
    type Model = StubModel;

    fn train(&self, window: &[f64], trained_at: usize) -> Result<StubModel, LstmError> {
        Ok(stub_model(window, trained_at))
    }

    fn predict(&self, _model: &StubModel, recent: &[f64], _target: usize) -> f64 {
        recent.last().copied().unwrap_or(0.0)
    }
}

/// Extrapolates the last observation with the trend of the model's own
/// training window, so which model is installed affects every forecast.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrendStub;

impl Predictor for TrendStub {
    type Model = StubModel;

    fn train(&self, window: &[f64], trained_at: usize) -> Result<StubModel, LstmError> {
        Ok(stub_model(window, trained_at))
    }

    fn predict(&self, model: &StubModel, recent: &[f64], _target: usize) -> f64 {
        recent.last().copied().unwrap_or(0.0) + model.slope
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stubs_behave_as_named() {
        let series = [1.0, 2.0, 4.0, 8.0];
        let p = PerfectStub::new(&series);
        let m = p.train(&series[..3], 2).unwrap();
        assert_eq!(m, StubModel { trained_at: 2, slope: 1.5 });
        assert_eq!(p.predict(&m, &series[..3], 3), 8.0);
        assert_eq!(PreviousValueStub.predict(&m, &series[..3], 3), 4.0);
        assert_eq!(TrendStub.predict(&m, &series[..3], 3), 5.5);
    }

    #[test]
    fn lstm_predictor_is_pure() {
        let p = LstmPredictor::default();
        let m = p.train(&[3.0, 4.0, 6.0], 2).unwrap();
        let a = p.predict(&m, &[3.0, 4.0, 6.0], 3);
        assert_eq!(a, p.predict(&m, &[3.0, 4.0, 6.0], 3));
        assert!(a.is_finite());
    }
}
