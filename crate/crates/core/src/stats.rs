//! Average absolute relative error and the adaptive three-sigma threshold.
//!
//! Two history policies are supported. [`TrackerMode::AllHistory`] keeps
//! constant-space running moments over every AARE ever seen.
//! [`TrackerMode::Windowed`] keeps only the `W` most recent AAREs in a ring.
//! Both report `μ + 3σ` with the population standard deviation.

use std::collections::VecDeque;

/// Denominator floor for relative errors at zero-valued observations.
pub const AARE_EPSILON: f64 = 1e-9;

/// Operations between full recomputations of the windowed moments.
const RECOMPUTE_EVERY: u64 = 1 << 20;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("threshold needs at least 3 AARE values, have {0}")]
    UndefinedThreshold(u64),
    #[error("replace_last at T={given} but last pushed value is for T={last}")]
    TimePointMismatch { given: usize, last: usize },
    #[error("replace_last on an empty tracker")]
    Empty,
    #[error("window must be at least 1")]
    ZeroWindow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AareValue {
    pub value: f64,
    pub time_point: usize,
    /// Set when at least one observation needed the epsilon floor.
    pub guarded: bool,
}

/// Mean of `|obs - pred| / max(|obs|, ε)` over paired values.
///
/// # Panics
/// If the slices differ in length or are empty.
pub fn compute_aare(time_point: usize, observed: &[f64], predicted: &[f64]) -> AareValue {
    assert_eq!(observed.len(), predicted.len(), "observed/predicted length mismatch");
    assert!(!observed.is_empty(), "AARE over an empty window");
    let mut guarded = false;
    let sum: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(&obs, &pred)| {
            let denom = obs.abs();
            let denom = if denom < AARE_EPSILON {
                guarded = true;
                AARE_EPSILON
            } else {
                denom
            };
            (obs - pred).abs() / denom
        })
        .sum();
    AareValue { value: sum / observed.len() as f64, time_point, guarded }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackerMode {
    /// Every AARE contributes; moments kept in O(1) space.
    AllHistory,
    /// Like `AllHistory`, but also stores every value. Memory grows with the
    /// stream; used to demonstrate that growth.
    AllHistoryStored,
    /// Only the last `W` AAREs contribute.
    Windowed(usize),
}

/// Running count, mean and sum of squared deviations with removal support.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn add(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn remove(&mut self, x: f64) {
        match self.n {
            0 => {}
            1 => *self = Moments::default(),
            _ => {
                let old_mean = self.mean;
                self.n -= 1;
                self.mean = (old_mean * (self.n + 1) as f64 - x) / self.n as f64;
                self.m2 -= (x - old_mean) * (x - self.mean);
                if self.m2 < 0.0 {
                    self.m2 = 0.0;
                }
            }
        }
    }

    fn from_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut m = Moments::default();
        for &v in values {
            m.add(v);
        }
        m
    }

    fn std_dev(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }
}

/// AARE history plus the threshold query.
#[derive(Debug, Clone)]
pub struct ThresholdTracker {
    mode: TrackerMode,
    moments: Moments,
    stored: VecDeque<f64>,
    last: Option<AareValue>,
    count: u64,
    ops_since_recompute: u64,
    peak_retained: usize,
}

impl ThresholdTracker {
    pub fn new(mode: TrackerMode) -> Result<Self, StatsError> {
        let capacity = match mode {
            TrackerMode::Windowed(0) => return Err(StatsError::ZeroWindow),
            TrackerMode::Windowed(w) => w.min(1 << 16),
            _ => 0,
        };
        Ok(ThresholdTracker {
            mode,
            moments: Moments::default(),
            stored: VecDeque::with_capacity(capacity),
            last: None,
            count: 0,
            ops_since_recompute: 0,
            peak_retained: 0,
        })
    }

    pub fn mode(&self) -> TrackerMode {
        self.mode
    }

    /// Total number of `push` calls.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Number of values currently contributing to the threshold.
    pub fn contributing(&self) -> u64 {
        self.moments.n
    }

    /// AARE values held in memory right now.
    pub fn retained(&self) -> usize {
        self.stored.len()
    }

    /// Largest `retained()` observed over the tracker's lifetime.
    pub fn peak_retained(&self) -> usize {
        self.peak_retained
    }

    /// Values currently held, oldest first.
    pub fn retained_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.stored.iter().copied()
    }

    pub fn last(&self) -> Option<AareValue> {
        self.last
    }

    pub fn push(&mut self, aare: AareValue) {
        debug_assert!(aare.value.is_finite());
        self.count += 1;
        self.last = Some(aare);
        match self.mode {
            TrackerMode::AllHistory => self.moments.add(aare.value),
            TrackerMode::AllHistoryStored => {
                self.moments.add(aare.value);
                self.stored.push_back(aare.value);
            }
            TrackerMode::Windowed(w) => {
                if self.stored.len() == w {
                    if let Some(old) = self.stored.pop_front() {
                        self.moments.remove(old);
                    }
                }
                self.stored.push_back(aare.value);
                self.moments.add(aare.value);
                self.bump_ops();
            }
        }
        self.peak_retained = self.peak_retained.max(self.stored.len());
    }

    /// Overwrites the most recently pushed AARE, which must carry the same
    /// time point. `count` is unchanged.
    pub fn replace_last(&mut self, aare: AareValue) -> Result<(), StatsError> {
        let last = self.last.ok_or(StatsError::Empty)?;
        if last.time_point != aare.time_point {
            return Err(StatsError::TimePointMismatch { given: aare.time_point, last: last.time_point });
        }
        self.moments.remove(last.value);
        self.moments.add(aare.value);
        if let Some(slot) = self.stored.back_mut() {
            *slot = aare.value;
        }
        self.last = Some(aare);
        if matches!(self.mode, TrackerMode::Windowed(_)) {
            self.bump_ops();
        }
        Ok(())
    }

    fn bump_ops(&mut self) {
        self.ops_since_recompute += 1;
        if self.ops_since_recompute >= RECOMPUTE_EVERY {
            self.recompute();
        }
    }

    /// Rebuilds the windowed moments from the ring contents.
    fn recompute(&mut self) {
        self.moments = Moments::from_values(&self.stored);
        self.ops_since_recompute = 0;
    }

    pub fn mean(&self) -> f64 {
        self.moments.mean
    }

    pub fn std_dev(&self) -> f64 {
        self.moments.std_dev()
    }

    /// `μ + 3σ` over the contributing values; needs at least three pushes.
    pub fn threshold(&self) -> Result<f64, StatsError> {
        if self.count < 3 {
            return Err(StatsError::UndefinedThreshold(self.count));
        }
        Ok(self.moments.mean + 3.0 * self.moments.std_dev())
    }
}

/// From-scratch `μ + 3σ` (population σ) over `values`.
pub fn three_sigma(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    mean + 3.0 * var.sqrt()
}
