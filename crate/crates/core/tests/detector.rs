mod common;

use common::{brute_threshold, reference_repad2_trend, Outcome};
use proptest::prelude::*;
use repad::detector::*;
use repad::predictor::{PreviousValueStub, TrendStub};
use repad::series_io::{TimeSeries, TimeSeriesPoint};

fn series(values: &[f64]) -> TimeSeries {
    TimeSeries::from_values(values.iter().copied())
}

fn outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Warmup => Outcome::Warmup,
        Verdict::Normal => Outcome::Normal,
        Verdict::Anomaly => Outcome::Anomaly,
    }
}

fn point(index: usize, value: f64) -> TimeSeriesPoint {
    TimeSeriesPoint { index, timestamp: None, value }
}

#[test]
fn first_seven_points_are_warmup() {
    let values = common::random_stream(3, 40);
    let reports = run_stream(&DetectorConfig::repad2(20), TrendStub, &series(&values)).unwrap();
    for r in &reports[..7] {
        assert_eq!(r.verdict, Verdict::Warmup);
        assert!(r.threshold.is_none());
        assert!(!r.retrained);
    }
    assert!(reports[..5].iter().all(|r| r.aare.is_none()));
    assert!(reports[5..7].iter().all(|r| r.aare.is_some()));
    assert!(reports[7..].iter().all(|r| r.verdict != Verdict::Warmup && r.threshold.is_some()));
}

#[test]
fn spike_on_constant_series() {
    let mut values = vec![10.0; 30];
    values[20] = 1000.0;
    let reports = run_stream(&DetectorConfig::repad2(100), PreviousValueStub, &series(&values)).unwrap();

    for r in &reports[7..20] {
        assert_eq!(r.verdict, Verdict::Normal);
        assert_eq!(r.aare, Some(0.0));
    }
    let spike = &reports[20];
    assert!(common::close(spike.aare.unwrap(), 0.99 / 3.0, 1e-12, 0.0));
    let mut history = vec![0.0; 15];
    history.push(0.33);
    assert!(common::close(spike.threshold.unwrap(), brute_threshold(&history), 1e-12, 0.0));
    assert_eq!(spike.verdict, Verdict::Anomaly);
    assert!(spike.retrained);
    assert!(!spike.flag);

    // the next model forecasts the spike itself
    let after = &reports[21];
    assert!(after.retrained);
    assert_eq!(after.predicted, Some(1000.0));
    assert!(common::close(after.aare.unwrap(), (0.99 + 99.0) / 3.0, 1e-12, 0.0));
    assert_eq!(after.verdict, Verdict::Anomaly);
}

#[test]
fn matches_reference_interpreter_on_fixed_streams() {
    for seed in 0..50 {
        let values = common::random_stream(seed, 300);
        for w in [3, 10, 64] {
            let reports = run_stream(&DetectorConfig::repad2(w), TrendStub, &series(&values)).unwrap();
            let oracle = reference_repad2_trend(&values, w);
            for (r, o) in reports.iter().zip(&oracle) {
                assert_eq!(outcome(r.verdict), o.outcome, "seed {seed} w {w} t {}", r.time_point);
                assert_eq!(r.flag, o.flag, "seed {seed} w {w} t {}", r.time_point);
                assert_eq!(r.retrained, o.retrained, "seed {seed} w {w} t {}", r.time_point);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_reference_interpreter(seed in any::<u64>(), w in 3usize..80, len in 8usize..250) {
        let values = common::random_stream(seed, len);
        let reports = run_stream(&DetectorConfig::repad2(w), TrendStub, &series(&values)).unwrap();
        let oracle = reference_repad2_trend(&values, w);
        for (r, o) in reports.iter().zip(&oracle) {
            prop_assert_eq!(outcome(r.verdict), o.outcome);
            prop_assert_eq!(r.flag, o.flag);
            prop_assert_eq!(r.retrained, o.retrained);
        }
    }

    #[test]
    fn verdicts_agree_with_reported_threshold(seed in any::<u64>(), w in 3usize..50) {
        let values = common::random_stream(seed, 200);
        let reports = run_stream(&DetectorConfig::repad2(w), TrendStub, &series(&values)).unwrap();
        let mut prev_flag = true;
        for r in &reports {
            match r.verdict {
                Verdict::Normal => prop_assert!(r.aare.unwrap() <= r.threshold.unwrap()),
                Verdict::Anomaly => prop_assert!(r.aare.unwrap() > r.threshold.unwrap()),
                Verdict::Warmup => prop_assert!(r.time_point < 7),
            }
            // the flag only falls on an anomaly and only rises on a normal point
            if prev_flag && !r.flag {
                prop_assert_eq!(r.verdict, Verdict::Anomaly);
            }
            if !prev_flag && r.flag {
                prop_assert_eq!(r.verdict, Verdict::Normal);
            }
            if !prev_flag {
                prop_assert!(r.retrained);
            }
            prev_flag = r.flag;
        }
    }

    #[test]
    fn retained_aare_bounded_by_window(seed in any::<u64>(), w in 3usize..40) {
        let values = common::random_stream(seed, 300);
        let mut d = Detector::new(DetectorConfig::repad2(w), TrendStub).unwrap();
        for p in series(&values).points() {
            d.step(*p).unwrap();
            prop_assert!(d.tracker().retained() <= w);
            prop_assert!(d.tracker().contributing() as usize <= w);
        }
        prop_assert_eq!(d.tracker().peak_retained(), w.min(300 - 5));
    }
}

/// Replays a stream and checks which models get installed. The trend stub
/// tags every model with the time point it was trained at.
fn replacement_events(algorithm: Algorithm) -> (usize, usize) {
    let config = match algorithm {
        Algorithm::RePad2 => DetectorConfig::repad2(30),
        Algorithm::RePad => DetectorConfig::repad(3),
    };
    let mut replaced_while_flagged = 0;
    let mut kept_while_flagged = 0;
    for seed in 0..20 {
        let values = common::random_stream(seed, 400);
        let mut d = Detector::new(config.clone(), TrendStub).unwrap();
        for p in series(&values).points() {
            let flag_before = d.flag();
            let before = d.model().map(|m| m.trained_at);
            let r = d.step(*p).unwrap();
            if r.verdict == Verdict::Warmup {
                continue;
            }
            let after = d.model().unwrap().trained_at;
            if !r.retrained || r.verdict == Verdict::Anomaly {
                assert_eq!(Some(after), before, "model changed without a normal retrain at {}", r.time_point);
            } else if !flag_before {
                assert_eq!(after, r.time_point);
            } else if after == r.time_point {
                replaced_while_flagged += 1;
            } else {
                assert_eq!(Some(after), before);
                kept_while_flagged += 1;
            }
        }
    }
    (replaced_while_flagged, kept_while_flagged)
}

#[test]
fn windowed_variant_installs_model_after_successful_retrain() {
    let (replaced, kept) = replacement_events(Algorithm::RePad2);
    assert!(replaced > 0);
    assert_eq!(kept, 0);
}

#[test]
fn original_variant_keeps_model_after_successful_retrain() {
    let (replaced, kept) = replacement_events(Algorithm::RePad);
    assert_eq!(replaced, 0);
    assert!(kept > 0);
}

#[test]
fn general_lookback_phases() {
    for b in [2usize, 4, 6] {
        let values = common::random_stream(b as u64, 80);
        let reports = run_stream(&DetectorConfig::repad(b), TrendStub, &series(&values)).unwrap();
        for r in &reports {
            let t = r.time_point;
            assert_eq!(r.aare.is_some(), t + 1 >= 2 * b, "b {b} t {t}");
            assert_eq!(r.verdict == Verdict::Warmup, t < 2 * b + 1, "b {b} t {t}");
        }
    }
}

#[test]
fn store_all_history_keeps_every_aare() {
    let values = common::random_stream(9, 500);
    let config = DetectorConfig { store_all_history: true, ..DetectorConfig::repad(3) };
    let mut d = Detector::new(config, TrendStub).unwrap();
    for p in series(&values).points() {
        d.step(*p).unwrap();
        let t = p.index;
        assert_eq!(d.tracker().retained(), (t + 1).saturating_sub(5));
    }
}

#[test]
fn lstm_runs_are_deterministic() {
    let values = common::random_stream(17, 150);
    let config = DetectorConfig::repad2(50);
    let a = run_stream_lstm(&config, &series(&values)).unwrap();
    let b = run_stream_lstm(&config, &series(&values)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.verdict, y.verdict);
        assert_eq!(x.predicted.map(f64::to_bits), y.predicted.map(f64::to_bits));
        assert_eq!(x.aare.map(f64::to_bits), y.aare.map(f64::to_bits));
        assert_eq!(x.retrained, y.retrained);
    }
}

/// Forecast error grows fourfold per time point, so every AARE dominates
/// its predecessors and lands above the threshold.
struct DivergingStub;

impl repad::predictor::Predictor for DivergingStub {
    type Model = ();

    fn train(&self, _window: &[f64], _trained_at: usize) -> Result<(), repad::lstm::LstmError> {
        Ok(())
    }

    fn predict(&self, _model: &(), recent: &[f64], target: usize) -> f64 {
        recent.last().unwrap() * (1.0 + 4f64.powi(target as i32))
    }
}

#[test]
fn diverging_predictor_retrains_at_every_point() {
    let values = vec![10.0; 200];
    let reports = run_stream(&DetectorConfig::repad2(20), DivergingStub, &series(&values)).unwrap();
    let first = reports.iter().position(|r| r.verdict == Verdict::Anomaly).unwrap();
    assert!(first < 30, "first anomaly at {first}");
    let tail = &reports[first..];
    assert!(tail.iter().all(|r| r.retrained && r.verdict == Verdict::Anomaly && !r.flag));
    let ratio = retraining_ratio(&reports).unwrap();
    let expected = reports.iter().filter(|r| r.retrained).count() as f64 / 200.0;
    assert_eq!(ratio, expected);
    assert!(ratio >= tail.len() as f64 / 200.0);
}

#[test]
fn detector_rejects_bad_input() {
    let mut d = Detector::new(DetectorConfig::repad2(10), TrendStub).unwrap();
    assert!(matches!(d.step(point(1, 1.0)), Err(DetectorError::OutOfOrder { .. })));
    assert!(matches!(d.step(point(0, f64::INFINITY)), Err(DetectorError::NonFinite(0))));
    assert!(Detector::new(DetectorConfig::repad2(2), TrendStub).is_err());
}
