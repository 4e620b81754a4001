//! Test-only oracles, written independently of the library code paths they
//! check.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Warmup,
    Normal,
    Anomaly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleStep {
    pub outcome: Outcome,
    pub flag: bool,
    pub retrained: bool,
}

/// `μ + 3σ` (population) recomputed from scratch.
pub fn brute_threshold(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    mean + 3.0 * var.sqrt()
}

fn rel_err(obs: f64, pred: f64) -> f64 {
    (obs - pred).abs() / obs.abs().max(1e-9)
}

/// Straight-line transcription of the windowed algorithm (look-back 3) with
/// the trend stub: a model is `(trained_at, slope of its 3-point window)` and
/// forecasts `last observation + slope`.
pub fn reference_repad2_trend(d: &[f64], w: usize) -> Vec<OracleStep> {
    let n = d.len();
    let mut forecast = vec![f64::NAN; n + 1];
    let mut aares: Vec<f64> = Vec::new();
    let mut flag = true;
    let mut model = (0usize, 0.0f64);
    let mut out = Vec::with_capacity(n);

    let train = |t: usize, a: f64, c: f64| (t, (c - a) / 2.0);
    let aare = |t: usize, f: &[f64]| {
        (rel_err(d[t - 2], f[t - 2]) + rel_err(d[t - 1], f[t - 1]) + rel_err(d[t], f[t])) / 3.0
    };
    let thd = |a: &[f64]| brute_threshold(&a[a.len().saturating_sub(w)..]);

    for t in 0..n {
        let mut step = OracleStep { outcome: Outcome::Warmup, flag, retrained: false };
        if (2..5).contains(&t) {
            model = train(t, d[t - 2], d[t]);
            forecast[t + 1] = d[t] + model.1;
        } else if (5..7).contains(&t) {
            aares.push(aare(t, &forecast));
            model = train(t, d[t - 2], d[t]);
            forecast[t + 1] = d[t] + model.1;
        } else if t >= 7 && flag {
            if t != 7 {
                forecast[t] = d[t - 1] + model.1;
            }
            aares.push(aare(t, &forecast));
            if *aares.last().unwrap() <= thd(&aares) {
                step.outcome = Outcome::Normal;
            } else {
                step.retrained = true;
                let fresh = train(t, d[t - 3], d[t - 1]);
                forecast[t] = d[t - 1] + fresh.1;
                *aares.last_mut().unwrap() = aare(t, &forecast);
                if *aares.last().unwrap() <= thd(&aares) {
                    step.outcome = Outcome::Normal;
                    model = fresh;
                } else {
                    step.outcome = Outcome::Anomaly;
                    flag = false;
                }
            }
        } else if t >= 7 {
            step.retrained = true;
            let fresh = train(t, d[t - 3], d[t - 1]);
            forecast[t] = d[t - 1] + fresh.1;
            aares.push(aare(t, &forecast));
            if *aares.last().unwrap() <= thd(&aares) {
                step.outcome = Outcome::Normal;
                model = fresh;
                flag = true;
            } else {
                step.outcome = Outcome::Anomaly;
            }
        }
        step.flag = flag;
        out.push(step);
    }
    out
}

/// Positive random walk with occasional level shifts and spikes.
pub fn random_stream(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut level: f64 = rng.random_range(20.0..200.0);
    let noise = rng.random_range(0.001..0.05) * level;
    (0..len)
        .map(|_| {
            level += rng.random_range(-1.0..1.0) * noise * 0.3;
            if rng.random_bool(0.01) {
                level *= rng.random_range(0.6..1.6);
            }
            level = level.max(1.0);
            let mut v = level + rng.random_range(-1.0..1.0) * noise;
            if rng.random_bool(0.03) {
                v += rng.random_range(3.0..15.0) * noise;
            }
            v.max(0.5)
        })
        .collect()
}

/// Relative closeness with an absolute floor.
pub fn close(a: f64, b: f64, rel: f64, abs_floor: f64) -> bool {
    let diff = (a - b).abs();
    diff <= abs_floor || diff <= rel * a.abs().max(b.abs())
}

/// Central finite-difference check of the BPTT gradient on one random
/// (window, parameters) probe. Returns the worst relative error over all
/// parameters whose gradient magnitude exceeds the absolute floor; smaller
/// gradients must agree to within the floor itself.
pub fn gradient_probe(seed: u64, step: f64, abs_floor: f64) -> f64 {
    use repad::lstm::{fit_normalizer, loss_and_gradient, sequence_loss, teacher_forced, LstmParams, TrainingWindow};

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let values: Vec<f64> = (0..3).map(|_| rng.random_range(1.0..100.0)).collect();
    let window = TrainingWindow::new(&values).unwrap();
    let (inputs, targets) = teacher_forced(&window, &fit_normalizer(&window));
    let hidden = 10;
    let mut params = LstmParams::init(hidden, rng.random());
    // move every parameter off its initial value, biases included
    for p in params.as_mut_slice() {
        *p += rng.random_range(-0.5..0.5);
    }
    let (_, grad) = loss_and_gradient(&params, &inputs, &targets);

    let mut worst: f64 = 0.0;
    for i in 0..params.as_slice().len() {
        let orig = params.as_slice()[i];
        params.as_mut_slice()[i] = orig + step;
        let up = sequence_loss(&params, &inputs, &targets);
        params.as_mut_slice()[i] = orig - step;
        let down = sequence_loss(&params, &inputs, &targets);
        params.as_mut_slice()[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let analytic = grad.as_slice()[i];
        let diff = (numeric - analytic).abs();
        let magnitude = numeric.abs().max(analytic.abs());
        if magnitude > abs_floor {
            worst = worst.max(diff / magnitude);
        } else if diff > abs_floor {
            worst = f64::INFINITY;
        }
    }
    worst
}

/// Maximum bipartite matching between labels and detections (Kuhn's
/// augmenting paths), plus the count of detections outside every window.
/// Returns `(tp, fn, outside)`.
pub fn brute_match(detections: &[usize], labels: &[(usize, usize)], k: usize) -> (usize, usize, Vec<usize>) {
    let windows: Vec<(usize, usize)> = labels.iter().map(|&(s, e)| (s.saturating_sub(k), e + k)).collect();
    let adj: Vec<Vec<usize>> = windows
        .iter()
        .map(|&(lo, hi)| (0..detections.len()).filter(|&j| lo <= detections[j] && detections[j] <= hi).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; detections.len()];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none() || augment(owner[j].unwrap(), adj, seen, owner) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut tp = 0;
    for i in 0..windows.len() {
        let mut seen = vec![false; detections.len()];
        if augment(i, &adj, &mut seen, &mut owner) {
            tp += 1;
        }
    }
    let outside = detections
        .iter()
        .copied()
        .filter(|&d| !windows.iter().any(|&(lo, hi)| lo <= d && d <= hi))
        .collect();
    (tp, windows.len() - tp, outside)
}

/// Random non-overlapping labels (with gaps of at least one point) and
/// sorted detections over `[0, span)`.
pub fn random_eval_case(rng: &mut impl Rng, span: usize) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut labels = Vec::new();
    let mut at = rng.random_range(0..20);
    while at < span {
        let len = if rng.random_bool(0.6) { 0 } else { rng.random_range(1..15) };
        if at + len >= span {
            break;
        }
        labels.push((at, at + len));
        at += len + rng.random_range(2..60);
    }
    let count = rng.random_range(0..40);
    let mut detections: Vec<usize> = (0..count).map(|_| rng.random_range(0..span)).collect();
    detections.sort_unstable();
    detections.dedup();
    (labels, detections)
}
