use std::fmt::Write as _;

use proptest::prelude::*;
use repad::series_io::*;

fn nab_like(n: usize) -> String {
    let mut text = String::from("timestamp,value\n");
    let start = chrono::NaiveDate::from_ymd_opt(2014, 4, 10).unwrap().and_hms_opt(0, 0, 0).unwrap();
    for i in 0..n {
        let ts = start + chrono::TimeDelta::minutes(5 * i as i64);
        let _ = writeln!(text, "{},{}", ts.format("%Y-%m-%d %H:%M:%S"), 30.0 + (i % 17) as f64 * 0.25);
    }
    text
}

#[test]
fn loads_nab_sized_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cc2.csv");
    std::fs::write(&path, nab_like(4032)).unwrap();
    let s = load_series(&path).unwrap();
    assert_eq!(s.len(), 4032);
    assert!(s.points().iter().enumerate().all(|(i, p)| p.index == i));

    let ten = extend_series(&s, 10).unwrap();
    assert_eq!(ten.len(), 40320);
    assert_eq!(ten.points()[4032 * 7 + 11].value, s.points()[11].value);
    // continuous five-minute clock across copy boundaries
    let gap = ten.points()[4032].timestamp.unwrap() - ten.points()[4031].timestamp.unwrap();
    assert_eq!(gap, chrono::TimeDelta::minutes(5));
}

#[test]
fn missing_file_is_io_error() {
    let err = load_series("/nonexistent/series.csv".as_ref()).unwrap_err();
    assert!(matches!(err, SeriesError::Io { .. }));
}

#[test]
fn cc2_shaped_labels_replicate() {
    // two point anomalies and one sequential anomaly per copy
    let labels = parse_labels("# cc2\n500,500\n1800,1800\n3000,3050\n").unwrap();
    let ten = extend_labels(&labels, 4032, 10).unwrap();
    assert_eq!(ten.point_count(), 20);
    assert_eq!(ten.sequential_count(), 10);
    assert!(ten.anomalies().windows(2).all(|w| w[0].end < w[1].start));
}

#[test]
fn synthetic_is_deterministic() {
    let spec = SyntheticSpec::default();
    assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    let other = SyntheticSpec { seed: 7, ..spec.clone() };
    assert_ne!(generate_synthetic(&other).unwrap().0, generate_synthetic(&spec).unwrap().0);
}

#[test]
fn spikes_sit_exactly_on_top_of_the_noisy_signal() {
    let spec = SyntheticSpec::default();
    let clean = SyntheticSpec { spikes: vec![], ..spec.clone() };
    let (with, labels) = generate_synthetic(&spec).unwrap();
    let (without, _) = generate_synthetic(&clean).unwrap();
    assert_eq!(labels.len(), spec.spikes.len());
    for (label, &(index, magnitude)) in labels.anomalies().iter().zip(&spec.spikes) {
        assert_eq!(label.start, index);
        let diff = with.points()[index].value - without.points()[index].value;
        assert!((diff - magnitude).abs() < 1e-12, "{diff} vs {magnitude}");
    }
}

proptest! {
    #[test]
    fn extend_composes(values in prop::collection::vec(0.1f64..1e6, 1..40), a in 1usize..5, b in 1usize..5) {
        let s = TimeSeries::from_values(values);
        let direct = extend_series(&s, a * b).unwrap();
        let nested = extend_series(&extend_series(&s, a).unwrap(), b).unwrap();
        prop_assert_eq!(direct.values(), nested.values());
    }

    #[test]
    fn csv_round_trips_exactly(values in prop::collection::vec(prop::num::f64::NORMAL, 0..50)) {
        let s = TimeSeries::from_values(values);
        let back = parse_series(&s.to_csv()).unwrap();
        prop_assert_eq!(back.values(), s.values());
    }
}
