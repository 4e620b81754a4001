//! Real-time anomaly detection for open-ended univariate time series.
//!
//! Each incoming point is forecast one step ahead by a tiny LSTM trained on
//! the last three observations. The average absolute relative error (AARE)
//! of the latest forecasts is compared against `μ + 3σ` of previous AAREs,
//! taken either over the whole history (RePAD) or over a sliding window of
//! `W` values (RePAD2), so memory stays bounded on endless streams.
//!
//! ```no_run
//! use repad::detector::{run_stream_lstm, DetectorConfig, Verdict};
//! use repad::series_io::load_series;
//!
//! let series = load_series("cpu.csv".as_ref())?;
//! let reports = run_stream_lstm(&DetectorConfig::repad2(4032), &series)?;
//! let anomalies = reports.iter().filter(|r| r.verdict == Verdict::Anomaly).count();
//! println!("{anomalies} anomalies");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod batch;
pub mod cli;
pub mod detector;
pub mod evaluation;
pub mod lstm;
pub mod predictor;
pub mod series_io;
pub mod stats;
