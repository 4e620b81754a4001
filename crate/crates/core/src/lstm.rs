//! A small single-layer LSTM regressor trained from scratch on a handful of
//! points.
//!
//! The network maps a scalar input sequence to a scalar output at every step:
//!
//! ```text
//! i = σ(Wxi·x + Whi·h + bi)      f = σ(Wxf·x + Whf·h + bf)
//! g = tanh(Wxc·x + Whc·h + bc)   o = σ(Wxo·x + Who·h + bo)
//! c' = f⊙c + i⊙g                 h' = o⊙tanh(c')
//! y = w·h' + b
//! ```
//!
//! Training uses teacher forcing over a normalised window `[v0, .., vn]`:
//! inputs `v0..v(n-1)`, targets `v1..vn`, mean squared error, full-batch
//! gradients via backpropagation through time and plain SGD. Early stopping
//! watches the training loss and the best parameters seen are kept.
//!
//! Parameters live in one flat vector so that SGD and gradient checks are
//! plain slice operations. Layout, per gate in the order input, forget,
//! cell, output: `Wx` (h), `Wh` (h×h, row = receiving unit), `b` (h); then
//! the output weights (h) and the output bias.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub const GATES: usize = 4;
const INPUT: usize = 0;
const FORGET: usize = 1;
const CELL: usize = 2;
const OUTPUT: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum LstmError {
    #[error("training window needs at least 2 values, got {0}")]
    WindowTooShort(usize),
    #[error("training window contains a non-finite value")]
    NonFiniteWindow,
    #[error("non-finite training loss at epoch {epoch} (exploding gradients?)")]
    Diverged { epoch: usize },
    #[error("invalid LSTM configuration: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub hidden_units: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    pub scaling: InputScaling,
}

/// Which window's min/max scaling is applied to prediction inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputScaling {
    /// Rescale every prediction input window by its own min/max.
    #[default]
    RecentWindow,
    /// Reuse the scaling fitted to the model's training window.
    TrainingWindow,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden_units: 10,
            max_epochs: 50,
            learning_rate: 0.005,
            seed: 140,
            early_stop_patience: 3,
            early_stop_min_delta: 0.0,
            scaling: InputScaling::RecentWindow,
        }
    }
}

impl LstmConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if self.hidden_units == 0 {
            return Err(LstmError::Config("hidden_units must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(LstmError::Config("max_epochs must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(LstmError::Config("learning_rate must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(LstmError::Config("early_stop_patience must be >= 1"));
        }
        if self.early_stop_min_delta.is_nan() || self.early_stop_min_delta < 0.0 {
            return Err(LstmError::Config("early_stop_min_delta must be >= 0"));
        }
        Ok(())
    }
}

/// Affine map of a window onto roughly `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub center: f64,
    pub half_range: f64,
}

impl Normalizer {
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.center) / self.half_range
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        self.center + self.half_range * z
    }
}

/// Min/max scaling of the window. A flat window gets `half_range =
/// max(|center|, 1)` so that it normalises to all zeros.
pub fn fit_normalizer(window: &TrainingWindow) -> Normalizer {
    let (lo, hi) = window
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let center = (lo + hi) / 2.0;
    let half_range = if hi > lo { (hi - lo) / 2.0 } else { center.abs().max(1.0) };
    Normalizer { center, half_range }
}

/// Consecutive observations a model is trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow(Vec<f64>);

impl TrainingWindow {
    pub fn new(values: &[f64]) -> Result<Self, LstmError> {
        if values.len() < 2 {
            return Err(LstmError::WindowTooShort(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteWindow);
        }
        Ok(TrainingWindow(values.to_vec()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Flat parameter vector for a given hidden size.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden: usize,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn len_for(hidden: usize) -> usize {
        GATES * (hidden + hidden * hidden + hidden) + hidden + 1
    }

    pub fn zeros(hidden: usize) -> Self {
        LstmParams { hidden, data: vec![0.0; Self::len_for(hidden)] }
    }

    /// Glorot-uniform weights from a seeded SplitMix64 stream; zero biases
    /// except the forget gate, which starts at 1.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden);
        let mut rng = SplitMix64::seed_from_u64(seed);
        let r_x = (6.0 / (1 + hidden) as f64).sqrt();
        let r_h = (6.0 / (2 * hidden) as f64).sqrt();
        for gate in 0..GATES {
            let wx = p.wx_offset(gate);
            for w in &mut p.data[wx..wx + hidden] {
                *w = rng.random_range(-r_x..=r_x);
            }
            let wh = p.wh_offset(gate);
            for w in &mut p.data[wh..wh + hidden * hidden] {
                *w = rng.random_range(-r_h..=r_h);
            }
        }
        let bf = p.b_offset(FORGET);
        p.data[bf..bf + hidden].fill(1.0);
        let wy = p.wy_offset();
        for w in &mut p.data[wy..wy + hidden] {
            *w = rng.random_range(-r_x..=r_x);
        }
        p
    }

    pub fn from_flat(hidden: usize, data: Vec<f64>) -> Option<Self> {
        (hidden > 0 && data.len() == Self::len_for(hidden)).then_some(LstmParams { hidden, data })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn gate_block(&self) -> usize {
        2 * self.hidden + self.hidden * self.hidden
    }

    fn wx_offset(&self, gate: usize) -> usize {
        gate * self.gate_block()
    }

    fn wh_offset(&self, gate: usize) -> usize {
        self.wx_offset(gate) + self.hidden
    }

    fn b_offset(&self, gate: usize) -> usize {
        self.wh_offset(gate) + self.hidden * self.hidden
    }

    fn wy_offset(&self) -> usize {
        GATES * self.gate_block()
    }

    fn by_offset(&self) -> usize {
        self.wy_offset() + self.hidden
    }

    /// Upper bound on |y| for any input: |h| < 1 elementwise.
    pub fn output_bound(&self) -> f64 {
        let wy = self.wy_offset();
        self.data[wy..wy + self.hidden].iter().map(|w| w.abs()).sum::<f64>() + self.data[self.by_offset()].abs()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations cached for one time step.
struct StepCache {
    x: f64,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    // activated gates, indexed [gate * hidden + unit]
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    y: f64,
}

fn forward(p: &LstmParams, inputs: &[f64]) -> Vec<StepCache> {
    let n = p.hidden;
    let d = &p.data;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut steps = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let mut gates = vec![0.0; GATES * n];
        for gate in 0..GATES {
            let (wx, wh, b) = (p.wx_offset(gate), p.wh_offset(gate), p.b_offset(gate));
            for j in 0..n {
                let row = &d[wh + j * n..wh + (j + 1) * n];
                let z = d[wx + j] * x + d[b + j] + row.iter().zip(&h).map(|(w, hk)| w * hk).sum::<f64>();
                gates[gate * n + j] = if gate == CELL { z.tanh() } else { sigmoid(z) };
            }
        }
        let mut c_new = vec![0.0; n];
        let mut tanh_c = vec![0.0; n];
        let mut h_new = vec![0.0; n];
        for j in 0..n {
            c_new[j] = gates[FORGET * n + j] * c[j] + gates[INPUT * n + j] * gates[CELL * n + j];
            tanh_c[j] = c_new[j].tanh();
            h_new[j] = gates[OUTPUT * n + j] * tanh_c[j];
        }
        let wy = p.wy_offset();
        let y = d[p.by_offset()] + d[wy..wy + n].iter().zip(&h_new).map(|(w, hj)| w * hj).sum::<f64>();
        steps.push(StepCache {
            x,
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            c_prev: std::mem::replace(&mut c, c_new),
            gates,
            tanh_c,
            h: h_new,
            y,
        });
    }
    steps
}

/// Mean squared error of the teacher-forced sequence in normalised space.
pub fn sequence_loss(p: &LstmParams, inputs: &[f64], targets: &[f64]) -> f64 {
    let steps = forward(p, inputs);
    steps.iter().zip(targets).map(|(s, t)| (s.y - t).powi(2)).sum::<f64>() / targets.len() as f64
}

/// Loss and its gradient with respect to every parameter (BPTT).
pub fn loss_and_gradient(p: &LstmParams, inputs: &[f64], targets: &[f64]) -> (f64, LstmParams) {
    let n = p.hidden;
    let d = &p.data;
    let steps = forward(p, inputs);
    let scale = 1.0 / targets.len() as f64;
    let loss = steps.iter().zip(targets).map(|(s, t)| (s.y - t).powi(2)).sum::<f64>() * scale;

    let mut grad = LstmParams::zeros(n);
    let (wy, by) = (p.wy_offset(), p.by_offset());
    let mut dh_next = vec![0.0; n];
    let mut dc_next = vec![0.0; n];
    let mut dz = vec![0.0; GATES * n];
    for (s, &t) in steps.iter().zip(targets).rev() {
        let dy = 2.0 * (s.y - t) * scale;
        grad.data[by] += dy;
        for j in 0..n {
            grad.data[wy + j] += dy * s.h[j];
        }
        for j in 0..n {
            let (i, f, g, o) = (s.gates[INPUT * n + j], s.gates[FORGET * n + j], s.gates[CELL * n + j], s.gates[OUTPUT * n + j]);
            let dh = d[wy + j] * dy + dh_next[j];
            let dc = dh * o * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
            dz[INPUT * n + j] = dc * g * i * (1.0 - i);
            dz[FORGET * n + j] = dc * s.c_prev[j] * f * (1.0 - f);
            dz[CELL * n + j] = dc * i * (1.0 - g * g);
            dz[OUTPUT * n + j] = dh * s.tanh_c[j] * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        dh_next.fill(0.0);
        for gate in 0..GATES {
            let (wx, wh, b) = (p.wx_offset(gate), p.wh_offset(gate), p.b_offset(gate));
            for j in 0..n {
                let dzj = dz[gate * n + j];
                grad.data[wx + j] += dzj * s.x;
                grad.data[b + j] += dzj;
                for k in 0..n {
                    grad.data[wh + j * n + k] += dzj * s.h_prev[k];
                    dh_next[k] += d[wh + j * n + k] * dzj;
                }
            }
        }
    }
    (loss, grad)
}

/// A trained predictor together with the scaling of its training window.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    params: LstmParams,
    scaler: Normalizer,
    scaling: InputScaling,
    epochs_run: usize,
}

impl LstmModel {
    pub fn from_parts(params: LstmParams, scaler: Normalizer, scaling: InputScaling) -> Self {
        LstmModel { params, scaler, scaling, epochs_run: 0 }
    }

    pub fn params(&self) -> &LstmParams {
        &self.params
    }

    pub fn scaler(&self) -> Normalizer {
        self.scaler
    }

    /// Number of SGD epochs executed before early stopping (or the cap).
    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    /// Feeds `recent` through the cell from a zero state and denormalises the
    /// output of the final step. Scaling follows the model's [`InputScaling`].
    pub fn predict_next(&self, recent: &[f64]) -> f64 {
        let scaler = match (self.scaling, TrainingWindow::new(recent)) {
            (InputScaling::RecentWindow, Ok(w)) => fit_normalizer(&w),
            _ => self.scaler,
        };
        let inputs: Vec<f64> = recent.iter().map(|&v| scaler.normalize(v)).collect();
        let y = forward(&self.params, &inputs).last().map_or(self.params.data[self.params.by_offset()], |s| s.y);
        scaler.denormalize(y)
    }

    /// Teacher-forced MSE on `window`, in this model's normalised space.
    pub fn training_loss(&self, window: &TrainingWindow) -> f64 {
        let (inputs, targets) = teacher_forced(window, &self.scaler);
        sequence_loss(&self.params, &inputs, &targets)
    }

    /// Plain-text parameter dump: header lines, then one value per line in
    /// flat layout order (gates input, forget, cell, output).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# lstm hidden={} params={}", self.params.hidden, self.params.data.len());
        let _ = writeln!(
            out,
            "# center={:?} half_range={:?} scaling={:?}",
            self.scaler.center, self.scaler.half_range, self.scaling
        );
        for v in &self.params.data {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }
}

/// Inputs and next-step targets of the normalised window.
pub fn teacher_forced(window: &TrainingWindow, scaler: &Normalizer) -> (Vec<f64>, Vec<f64>) {
    let z: Vec<f64> = window.values().iter().map(|&v| scaler.normalize(v)).collect();
    (z[..z.len() - 1].to_vec(), z[1..].to_vec())
}

/// Trains a fresh model on `window`. Deterministic in `(window, config)`.
pub fn train(window: &TrainingWindow, config: &LstmConfig) -> Result<LstmModel, LstmError> {
    config.validate()?;
    let scaler = fit_normalizer(window);
    let (inputs, targets) = teacher_forced(window, &scaler);
    let mut params = LstmParams::init(config.hidden_units, config.seed);
    let (mut loss, mut grad) = loss_and_gradient(&params, &inputs, &targets);
    if !loss.is_finite() {
        return Err(LstmError::Diverged { epoch: 0 });
    }
    let mut best = params.clone();
    let mut best_loss = loss;
    let mut stale = 0;
    let mut epochs_run = 0;
    for epoch in 1..=config.max_epochs {
        for (w, g) in params.data.iter_mut().zip(&grad.data) {
            *w -= config.learning_rate * g;
        }
        (loss, grad) = loss_and_gradient(&params, &inputs, &targets);
        epochs_run = epoch;
        if !loss.is_finite() {
            return Err(LstmError::Diverged { epoch });
        }
        if loss < best_loss - config.early_stop_min_delta {
            best_loss = loss;
            best.data.copy_from_slice(&params.data);
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                break;
            }
        }
    }
    Ok(LstmModel { params: best, scaler, scaling: config.scaling, epochs_run })
}
