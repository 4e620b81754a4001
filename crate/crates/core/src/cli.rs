//! Command-line front end: `prepare`, `detect`, `eval`, `bench`, `synth`.
//!
//! Every file written here starts with `#`-prefixed `key=value` lines
//! describing the run, so the same command line reproduces the file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::batch;
use crate::detector::{
    retraining_ratio, Algorithm, Detector, DetectorConfig, DetectorError, StepReport, Verdict,
};
use crate::evaluation::{self, EvalError, EvalSummary, FpCounting, LatencyStats, MatchConfig};
use crate::lstm::{InputScaling, LstmConfig};
use crate::predictor::{PerfectStub, Predictor, PreviousValueStub, TrendStub};
use crate::series_io::{self, SeriesError, SyntheticSpec, TimeSeries};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub const TRACE_HEADER: &str = "index,value,predicted,aare,threshold,verdict,retrained,latency_us";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Trace { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Detector(DetectorError),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        match e {
            DetectorError::Config(msg) => CliError::Usage(msg),
            DetectorError::Stats(s) => CliError::Internal(s.to_string()),
            other => CliError::Detector(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "repad", version, about = "Real-time LSTM anomaly detection for open-ended time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Concatenate copies of a series (and its labels) into one long stream.
    Prepare(PrepareArgs),
    /// Run detection and write a per-point trace CSV.
    Detect(DetectArgs),
    /// Score a trace against labels.
    Eval(EvalArgs),
    /// Run detection and report latency and memory figures.
    Bench(BenchArgs),
    /// Generate a labelled synthetic series.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub copies: usize,
    /// Output directory (defaults to the input's directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Repad,
    Repad2,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Repad => Algorithm::RePad,
            AlgorithmArg::Repad2 => Algorithm::RePad2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScalingArg {
    Recent,
    Training,
}

impl From<ScalingArg> for InputScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Recent => InputScaling::RecentWindow,
            ScalingArg::Training => InputScaling::TrainingWindow,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DetectorArgs {
    #[arg(long, value_enum, default_value = "repad2")]
    pub algorithm: AlgorithmArg,
    /// AARE window W (repad2 only); repeat to sweep several sizes.
    #[arg(long = "window")]
    pub windows: Vec<usize>,
    /// Look-back b (repad only; repad2 is fixed at 3).
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long, default_value_t = 140)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.005)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub hidden: usize,
    /// Scaling of prediction inputs: min/max of the recent window, or the
    /// model's training window.
    #[arg(long, value_enum, default_value = "recent")]
    pub scaling: ScalingArg,
    /// Keep every AARE in memory (repad only).
    #[arg(long)]
    pub store_all: bool,
    /// Worker threads for multi-run fan-out (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Replace the LSTM with a test predictor: stub:perfect, stub:previous or stub:trend.
    #[arg(long, hide = true)]
    pub predictor: Option<String>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// One or more input series.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Trace path for a single run, or output directory for several runs.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub trace: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub k: usize,
    /// Count every unmatched detection as a false positive instead of one per run.
    #[arg(long)]
    pub per_detection_fp: bool,
    /// Summary file (defaults to `<trace>.summary.txt`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key=value file with any of the flag names below; flags win.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub period: Option<f64>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Number of evenly spaced spikes.
    #[arg(long)]
    pub spikes: Option<usize>,
    #[arg(long)]
    pub spike_magnitude: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path; labels go next to it as `<stem>.labels`.
    #[arg(long, default_value = "synthetic.csv")]
    pub out: PathBuf,
}

/// Reproducibility header written at the top of every output file.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = RunManifest::default();
        m.set("command", command);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("git", option_env!("REPAD_GIT_REV").unwrap_or("unknown"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k}={v}");
        }
        out
    }
}

/// Formats with 9 significant digits, trimming trailing zeros.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "series".into())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(a) => {
            let prepared = cmd_prepare(&a)?;
            println!("{}", prepared.series.display());
            if let Some(labels) = prepared.labels {
                println!("{}", labels.display());
            }
            Ok(())
        }
        Command::Detect(a) => {
            for trace in cmd_detect(&a)? {
                println!("{}", trace.display());
            }
            Ok(())
        }
        Command::Eval(a) => {
            let (summary, text) = cmd_eval(&a)?;
            print!("{text}");
            log::debug!("{summary:?}");
            Ok(())
        }
        Command::Bench(a) => {
            let report = cmd_bench(&a)?;
            print!("{}", report.to_text());
            Ok(())
        }
        Command::Synth(a) => {
            let (series, labels) = cmd_synth(&a)?;
            println!("{}\n{}", series.display(), labels.display());
            Ok(())
        }
    }
}

/// Files written by `prepare`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: PathBuf,
    pub labels: Option<PathBuf>,
    pub points: usize,
    pub label_count: usize,
}

pub fn cmd_prepare(args: &PrepareArgs) -> Result<Prepared, CliError> {
    if args.copies == 0 {
        return Err(CliError::Usage("--copies must be at least 1".into()));
    }
    let series = series_io::load_series(&args.input)?;
    let extended = series_io::extend_series(&series, args.copies)?;
    let dir = args
        .out
        .clone()
        .or_else(|| args.input.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    let series_out = dir.join(format!("{}-{}.csv", file_stem(&args.input), args.copies));

    let mut manifest = RunManifest::new("prepare");
    manifest.set("input", args.input.display()).set("copies", args.copies);
    if let Some(l) = &args.labels {
        manifest.set("labels", l.display());
    }

    let mut label_count = 0;
    let labels_out = match &args.labels {
        Some(path) => {
            let labels = series_io::load_labels(path)?;
            let extended_labels = series_io::extend_labels(&labels, series.len(), args.copies)?;
            label_count = extended_labels.len();
            let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "labels".into());
            let out = dir.join(format!("{}-{}.{ext}", file_stem(path), args.copies));
            manifest.set("labels_out", out.display());
            Some((out, extended_labels))
        }
        None => None,
    };
    manifest.set("series_out", series_out.display());
    let header = manifest.header();
    write_file(&series_out, &format!("{header}{}", extended.to_csv()))?;
    if let Some((path, labels)) = &labels_out {
        write_file(path, &format!("{header}{}", labels.to_text()))?;
    }
    log::info!("wrote {} points to {}", extended.len(), series_out.display());
    Ok(Prepared {
        series: series_out,
        labels: labels_out.map(|(p, _)| p),
        points: extended.len(),
        label_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PredictorChoice {
    Lstm,
    Perfect,
    Previous,
    Trend,
}

fn parse_predictor(raw: Option<&str>) -> Result<PredictorChoice, CliError> {
    match raw {
        None | Some("lstm") => Ok(PredictorChoice::Lstm),
        Some("stub:perfect") => Ok(PredictorChoice::Perfect),
        Some("stub:previous") => Ok(PredictorChoice::Previous),
        Some("stub:trend") => Ok(PredictorChoice::Trend),
        Some(other) => Err(CliError::Usage(format!("unknown predictor `{other}`"))),
    }
}

/// Detector configurations requested by the flags, one per window size.
fn detector_configs(args: &DetectorArgs) -> Result<Vec<DetectorConfig>, CliError> {
    let lstm = LstmConfig {
        hidden_units: args.hidden,
        max_epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
        scaling: args.scaling.into(),
        ..LstmConfig::default()
    };
    let configs = match args.algorithm {
        AlgorithmArg::Repad => {
            if !args.windows.is_empty() {
                return Err(CliError::Usage("--window applies to repad2 only".into()));
            }
            vec![DetectorConfig {
                lookback: args.lookback.unwrap_or(3),
                store_all_history: args.store_all,
                lstm,
                ..DetectorConfig::repad(3)
            }]
        }
        AlgorithmArg::Repad2 => {
            if args.lookback.is_some_and(|b| b != 3) {
                return Err(CliError::Usage("repad2 uses a fixed look-back of 3".into()));
            }
            if args.store_all {
                return Err(CliError::Usage("--store-all applies to repad only".into()));
            }
            if args.windows.is_empty() {
                return Err(CliError::Usage("repad2 requires --window W".into()));
            }
            args.windows
                .iter()
                .map(|&w| DetectorConfig { lstm: lstm.clone(), ..DetectorConfig::repad2(w) })
                .collect()
        }
    };
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}

fn detector_manifest(command: &str, args: &DetectorArgs, config: &DetectorConfig, input: &Path) -> RunManifest {
    let mut m = RunManifest::new(command);
    m.set("input", input.display())
        .set("algorithm", config.algorithm.name())
        .set("window", config.window.map_or_else(|| "-".to_string(), |w| w.to_string()))
        .set("lookback", config.lookback)
        .set("seed", config.lstm.seed)
        .set("epochs", config.lstm.max_epochs)
        .set("learning_rate", config.lstm.learning_rate)
        .set("hidden", config.lstm.hidden_units)
        .set("scaling", match config.lstm.scaling {
            InputScaling::RecentWindow => "recent",
            InputScaling::TrainingWindow => "training",
        })
        .set("store_all", config.store_all_history)
        .set("predictor", args.predictor.as_deref().unwrap_or("lstm"));
    m
}

/// Outcome of one detection run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<StepReport>,
    pub peak_retained: usize,
    pub final_retained: usize,
}

fn drive<P: Predictor>(config: &DetectorConfig, predictor: P, series: &TimeSeries) -> Result<RunOutcome, DetectorError> {
    let mut detector = Detector::new(config.clone(), predictor)?;
    let reports = series.points().iter().map(|p| detector.step(*p)).collect::<Result<Vec<_>, _>>()?;
    Ok(RunOutcome {
        reports,
        peak_retained: detector.tracker().peak_retained(),
        final_retained: detector.tracker().retained(),
    })
}

fn run_detection(config: &DetectorConfig, choice: PredictorChoice, series: &TimeSeries) -> Result<RunOutcome, DetectorError> {
    match choice {
        PredictorChoice::Lstm => drive(config, crate::predictor::LstmPredictor::new(config.lstm.clone()), series),
        PredictorChoice::Perfect => drive(config, PerfectStub::new(&series.values()), series),
        PredictorChoice::Previous => drive(config, PreviousValueStub, series),
        PredictorChoice::Trend => drive(config, TrendStub, series),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

pub fn render_trace(manifest: &RunManifest, reports: &[StepReport]) -> String {
    let mut out = manifest.header();
    out.reserve(reports.len() * 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.time_point,
            fmt_sig9(r.observed),
            opt(r.predicted),
            opt(r.aare),
            opt(r.threshold),
            r.verdict.as_str(),
            u8::from(r.retrained),
            r.decision_latency.as_micros()
        );
    }
    out
}

/// Parses a trace CSV back into reports. Fields not stored in the trace
/// (`re_predicted`, `flag`) come back as `false`.
pub fn parse_trace(path: &Path, text: &str) -> Result<Vec<StepReport>, CliError> {
    let bad = |line: usize, reason: String| CliError::Trace { path: path.to_path_buf(), line, reason };
    let mut reports = Vec::new();
    let mut seen_header = false;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line.trim() != TRACE_HEADER {
                return Err(bad(line_no, format!("expected header `{TRACE_HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad(line_no, format!("expected 8 fields, found {}", f.len())));
        }
        let num = |s: &str, what: &str| -> Result<Option<f64>, CliError> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(line_no, format!("bad {what} `{s}`")))
            }
        };
        let time_point: usize = f[0].parse().map_err(|_| bad(line_no, format!("bad index `{}`", f[0])))?;
        if time_point != reports.len() {
            return Err(bad(line_no, format!("expected index {}, found {time_point}", reports.len())));
        }
        let verdict = match f[5] {
            "warmup" => Verdict::Warmup,
            "normal" => Verdict::Normal,
            "anomaly" => Verdict::Anomaly,
            other => return Err(bad(line_no, format!("bad verdict `{other}`"))),
        };
        let retrained = match f[6] {
            "0" => false,
            "1" => true,
            other => return Err(bad(line_no, format!("bad retrained flag `{other}`"))),
        };
        let latency: u64 = f[7].parse().map_err(|_| bad(line_no, format!("bad latency `{}`", f[7])))?;
        reports.push(StepReport {
            time_point,
            observed: num(f[1], "value")?.ok_or_else(|| bad(line_no, "missing value".into()))?,
            predicted: num(f[2], "prediction")?,
            aare: num(f[3], "aare")?,
            threshold: num(f[4], "threshold")?,
            verdict,
            retrained,
            re_predicted: false,
            flag: false,
            decision_latency: Duration::from_micros(latency),
        });
    }
    if !seen_header {
        return Err(bad(1, "missing trace header".into()));
    }
    Ok(reports)
}

struct Job {
    input: PathBuf,
    config: DetectorConfig,
    out: PathBuf,
}

fn trace_name(input: &Path, config: &DetectorConfig) -> String {
    match config.window {
        Some(w) => format!("{}.{}-w{w}.trace.csv", file_stem(input), config.algorithm.name()),
        None => format!("{}.{}.trace.csv", file_stem(input), config.algorithm.name()),
    }
}

/// Runs every (input, window) pair and writes one trace per run. Returns the
/// trace paths in input-major order.
pub fn cmd_detect(args: &DetectArgs) -> Result<Vec<PathBuf>, CliError> {
    let configs = detector_configs(&args.detector)?;
    let choice = parse_predictor(args.detector.predictor.as_deref())?;
    let multi = args.inputs.len() * configs.len() > 1;
    let mut jobs = Vec::new();
    for input in &args.inputs {
        for config in &configs {
            let out = match (&args.out, multi) {
                (Some(path), false) => path.clone(),
                (Some(dir), true) => dir.join(trace_name(input, config)),
                (None, _) => input.with_file_name(trace_name(input, config)),
            };
            jobs.push(Job { input: input.clone(), config: config.clone(), out });
        }
    }
    let results = batch::with_jobs(args.detector.jobs, || {
        batch::map(&jobs, |job| -> Result<PathBuf, CliError> {
            let series = series_io::load_series(&job.input)?;
            let outcome = run_detection(&job.config, choice, &series)?;
            let mut manifest = detector_manifest("detect", &args.detector, &job.config, &job.input);
            manifest.set("out", job.out.display());
            write_file(&job.out, &render_trace(&manifest, &outcome.reports))?;
            log::info!("{}: {} points, trace {}", job.input.display(), series.len(), job.out.display());
            Ok(job.out.clone())
        })
    });
    results.into_iter().collect()
}

fn fmt_latency(out: &mut String, prefix: &str, stats: Option<LatencyStats>) {
    match stats {
        Some(s) => {
            let _ = writeln!(out, "{prefix}_count={}", s.count);
            let _ = writeln!(out, "{prefix}_mean_sec={}", fmt_sig9(s.mean_secs));
            let _ = writeln!(out, "{prefix}_std_sec={}", fmt_sig9(s.std_secs));
        }
        None => {
            let _ = writeln!(out, "{prefix}_count=0");
            let _ = writeln!(out, "{prefix}_mean_sec=NA");
            let _ = writeln!(out, "{prefix}_std_sec=NA");
        }
    }
}

pub fn summary_text(summary: &EvalSummary) -> String {
    let mut out = String::new();
    let s = &summary.scores;
    let _ = writeln!(out, "precision={}", fmt_sig9(s.precision));
    let _ = writeln!(out, "recall={}", fmt_sig9(s.recall));
    let _ = writeln!(out, "f_score={}", fmt_sig9(s.f_score));
    let _ = writeln!(out, "tp={}", summary.counts.tp);
    let _ = writeln!(out, "fp={}", summary.counts.fp);
    let _ = writeln!(out, "fn={}", summary.counts.fn_);
    let _ = writeln!(out, "points={}", summary.points);
    let _ = writeln!(out, "detections={}", summary.detections);
    let _ = writeln!(out, "retrains={}", summary.retrains);
    let _ = writeln!(out, "retraining_ratio={}", fmt_sig9(summary.retraining_ratio));
    fmt_latency(&mut out, "latency_retrain", summary.latency_retrain);
    fmt_latency(&mut out, "latency_noretrain", summary.latency_noretrain);
    out
}

/// Scores a trace; returns the summary and its key=value rendering, which
/// is also written (with a manifest header) next to the trace.
pub fn cmd_eval(args: &EvalArgs) -> Result<(EvalSummary, String), CliError> {
    let text = fs::read_to_string(&args.trace).map_err(|source| CliError::Io { path: args.trace.clone(), source })?;
    let reports = parse_trace(&args.trace, &text)?;
    let labels = series_io::load_labels(&args.labels)?;
    let cfg = MatchConfig {
        k: args.k,
        fp_counting: if args.per_detection_fp { FpCounting::PerDetection } else { FpCounting::Runs },
    };
    let summary = evaluation::summarize(&reports, &labels, &cfg)?;
    let body = summary_text(&summary);
    let out = args.out.clone().unwrap_or_else(|| {
        let mut p = args.trace.clone().into_os_string();
        p.push(".summary.txt");
        PathBuf::from(p)
    });
    let mut manifest = RunManifest::new("eval");
    manifest
        .set("trace", args.trace.display())
        .set("labels", args.labels.display())
        .set("k", args.k)
        .set("fp_counting", if args.per_detection_fp { "per-detection" } else { "runs" })
        .set("out", out.display());
    write_file(&out, &format!("{}{body}", manifest.header()))?;
    Ok((summary, body))
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub manifest: RunManifest,
    pub points: usize,
    pub retrains: usize,
    pub retraining_ratio: f64,
    pub anomalies: usize,
    pub peak_retained: usize,
    pub final_retained: usize,
    pub latency_retrain: Option<LatencyStats>,
    pub latency_noretrain: Option<LatencyStats>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "points={}", self.points);
        let _ = writeln!(out, "retrains={}", self.retrains);
        let _ = writeln!(out, "retraining_ratio={}", fmt_sig9(self.retraining_ratio));
        let _ = writeln!(out, "anomalies={}", self.anomalies);
        let _ = writeln!(out, "peak_retained_aare={}", self.peak_retained);
        let _ = writeln!(out, "final_retained_aare={}", self.final_retained);
        fmt_latency(&mut out, "latency_retrain", self.latency_retrain);
        fmt_latency(&mut out, "latency_noretrain", self.latency_noretrain);
        out
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let configs = detector_configs(&args.detector)?;
    if configs.len() != 1 {
        return Err(CliError::Usage("bench takes exactly one --window".into()));
    }
    let config = &configs[0];
    let choice = parse_predictor(args.detector.predictor.as_deref())?;
    let series = series_io::load_series(&args.input)?;
    let outcome = run_detection(config, choice, &series)?;
    if let Some(w) = config.window {
        if outcome.peak_retained > w {
            return Err(CliError::Internal(format!("retained {} AAREs with W={w}", outcome.peak_retained)));
        }
    }
    let reports = &outcome.reports;
    let report = BenchReport {
        manifest: detector_manifest("bench", &args.detector, config, &args.input),
        points: reports.len(),
        retrains: reports.iter().filter(|r| r.retrained).count(),
        retraining_ratio: if reports.is_empty() { 0.0 } else { retraining_ratio(reports)? },
        anomalies: reports.iter().filter(|r| r.verdict == Verdict::Anomaly).count(),
        peak_retained: outcome.peak_retained,
        final_retained: outcome.final_retained,
        latency_retrain: evaluation::latency_stats(reports.iter().filter(|r| r.retrained).map(|r| r.decision_latency)),
        latency_noretrain: evaluation::latency_stats(reports.iter().filter(|r| !r.retrained).map(|r| r.decision_latency)),
    };
    if let Some(out) = &args.out {
        let mut manifest = report.manifest.clone();
        manifest.set("out", out.display());
        write_file(out, &format!("{}{}", manifest.header(), report.to_text()))?;
    }
    Ok(report)
}

fn parse_kv_spec(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Trace {
            path: path.to_path_buf(),
            line: i + 1,
            reason: "expected key=value".into(),
        })?;
        pairs.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(pairs)
}

/// Resolves the synthetic spec from defaults, an optional spec file and
/// flags, in increasing priority.
pub fn synthetic_spec(args: &SynthArgs) -> Result<SyntheticSpec, CliError> {
    let defaults = SyntheticSpec::default();
    let mut length = defaults.length;
    let mut period = defaults.period;
    let mut amplitude = defaults.amplitude;
    let mut offset = defaults.offset;
    let mut noise = None;
    let mut spikes = defaults.spikes.len();
    let mut magnitude = None;
    let mut seed = defaults.seed;

    if let Some(path) = &args.spec {
        for (k, v) in parse_kv_spec(path)? {
            let bad = || CliError::Usage(format!("{}: bad value `{v}` for `{k}`", path.display()));
            match k.as_str() {
                "length" => length = v.parse().map_err(|_| bad())?,
                "period" => period = v.parse().map_err(|_| bad())?,
                "amplitude" => amplitude = v.parse().map_err(|_| bad())?,
                "offset" => offset = v.parse().map_err(|_| bad())?,
                "noise" => noise = Some(v.parse().map_err(|_| bad())?),
                "spikes" => spikes = v.parse().map_err(|_| bad())?,
                "spike-magnitude" => magnitude = Some(v.parse().map_err(|_| bad())?),
                "seed" => seed = v.parse().map_err(|_| bad())?,
                _ => return Err(CliError::Usage(format!("{}: unknown key `{k}`", path.display()))),
            }
        }
    }
    length = args.length.unwrap_or(length);
    period = args.period.unwrap_or(period);
    amplitude = args.amplitude.unwrap_or(amplitude);
    offset = args.offset.unwrap_or(offset);
    spikes = args.spikes.unwrap_or(spikes);
    seed = args.seed.unwrap_or(seed);
    let noise_sigma = args.noise.or(noise).unwrap_or(0.02 * amplitude);
    let magnitude = args.spike_magnitude.or(magnitude).unwrap_or(10.0 * noise_sigma);
    Ok(SyntheticSpec {
        length,
        period,
        amplitude,
        offset,
        noise_sigma,
        spikes: series_io::evenly_spaced_spikes(length, spikes, magnitude),
        seed,
    })
}

/// Writes the synthetic series and its labels; returns both paths.
pub fn cmd_synth(args: &SynthArgs) -> Result<(PathBuf, PathBuf), CliError> {
    let spec = synthetic_spec(args)?;
    let (series, labels) = series_io::generate_synthetic(&spec)?;
    let labels_out = args.out.with_extension("labels");
    let mut manifest = RunManifest::new("synth");
    manifest
        .set("length", spec.length)
        .set("period", spec.period)
        .set("amplitude", spec.amplitude)
        .set("offset", spec.offset)
        .set("noise", spec.noise_sigma)
        .set("spikes", spec.spikes.len())
        .set("spike_magnitude", spec.spikes.first().map_or(0.0, |s| s.1))
        .set("seed", spec.seed)
        .set("out", args.out.display())
        .set("labels_out", labels_out.display());
    let header = manifest.header();
    write_file(&args.out, &format!("{header}{}", series.to_csv()))?;
    write_file(&labels_out, &format!("{header}{}", labels.to_text()))?;
    Ok((args.out.clone(), labels_out))
}
