use serde::{Deserialize, Serialize};

use super::{ModelError, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrParams {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_iters: usize,
    /// Stop once the gradient sup-norm falls below this.
    pub tolerance: f64,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams {
            learning_rate: 0.1,
            l2_lambda: 1e-3,
            max_iters: 5000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean negative log-likelihood plus `lambda/2 * |w|^2`; the bias is not penalized.
pub fn logistic_loss(rows: &[&[f64]], y: &[bool], w: &[f64], b: f64, lambda: f64) -> f64 {
    let n = rows.len() as f64;
    let nll: f64 = rows
        .iter()
        .zip(y)
        .map(|(x, &t)| {
            let z = dot(w, x) + b;
            softplus(z) - if t { z } else { 0.0 }
        })
        .sum();
    nll / n + 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`logistic_loss`] with respect to `(w, b)`.
pub fn logistic_gradient(rows: &[&[f64]], y: &[bool], w: &[f64], b: f64, lambda: f64) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, &t) in rows.iter().zip(y) {
        let r = sigmoid(dot(w, x) + b) - if t { 1.0 } else { 0.0 };
        for (g, v) in gw.iter_mut().zip(x.iter()) {
            *g += r * v;
        }
        gb += r;
    }
    for (g, v) in gw.iter_mut().zip(w) {
        *g = *g / n + lambda * v;
    }
    (gw, gb / n)
}

const MAX_REJECTIONS: usize = 10;

/// Full-batch gradient descent from zero. A step that raises the loss is
/// rejected and the rate halved; ten rejections in a row is divergence.
pub(crate) fn fit(set: &TrainingSet<'_>, p: &LrParams) -> Result<LogisticModel, ModelError> {
    if !(p.learning_rate > 0.0 && p.l2_lambda >= 0.0 && p.tolerance > 0.0 && p.max_iters > 0) {
        return Err(ModelError::InvalidParams(format!("{p:?}")));
    }
    let dim = set.rows[0].len();
    let (rows, y) = (&set.rows[..], &set.y[..]);
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut rate = p.learning_rate;
    let mut loss = logistic_loss(rows, y, &w, b, p.l2_lambda);
    let (mut gw, mut gb) = logistic_gradient(rows, y, &w, b, p.l2_lambda);
    let mut rejections = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < p.max_iters {
        let sup = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if sup < p.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let nw: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - rate * g).collect();
        let nb = b - rate * gb;
        let nloss = logistic_loss(rows, y, &nw, nb, p.l2_lambda);
        // NaN loss counts as a rejection
        if nloss.is_nan() || nloss > loss {
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(ModelError::Diverged { learning_rate: p.learning_rate });
            }
            rate /= 2.0;
            continue;
        }
        rejections = 0;
        w = nw;
        b = nb;
        loss = nloss;
        (gw, gb) = logistic_gradient(rows, y, &w, b, p.l2_lambda);
    }
    if !converged {
        log::debug!("logistic regression stopped at max_iters={} before tolerance", p.max_iters);
    }
    Ok(LogisticModel {
        weights: w,
        bias: b,
        iterations,
        converged,
    })
}

impl LogisticModel {
    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, row) + self.bias)
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        self.probability(row) >= 0.5
    }

    /// `(name, weight)` sorted by descending |weight|, ties by name.
    pub fn ranked_weights(&self, names: &[String]) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = names.iter().cloned().zip(self.weights.iter().copied()).collect();
        v.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
        v
    }
}
