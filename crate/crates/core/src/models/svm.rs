use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, TrainingSet};

/// Soft-margin RBF SVM settings. The kernel is `exp(-sigma * |u - v|^2)`:
/// `sigma` multiplies the squared distance, it is not a bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub sigma: f64,
    /// Maximal KKT violation accepted at convergence.
    pub smo_tolerance: f64,
    /// SMO may run `max_passes * n_rows` pair updates.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            sigma: 0.1,
            smo_tolerance: 1e-3,
            max_passes: 100,
        }
    }
}

/// `n` points from `lo` to `hi`, evenly spaced in log scale, endpoints exact.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// 8 x 8 grid with C in [0.25, 64] and sigma in [0.001, 0.5].
pub fn default_svm_grid() -> Vec<SvmParams> {
    let mut out = Vec::with_capacity(64);
    for c in log_space(0.25, 64.0, 8) {
        for sigma in log_space(0.001, 0.5, 8) {
            out.push(SvmParams {
                c,
                sigma,
                ..SvmParams::default()
            });
        }
    }
    out
}

pub fn rbf_kernel(u: &[f64], v: &[f64], sigma: f64) -> f64 {
    (-sigma * sq_dist(u, v)).exp()
}

fn sq_dist(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Row-major squared distances between all rows.
pub(crate) fn sq_dist_matrix(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, line)| {
        for (j, cell) in line.iter_mut().enumerate() {
            *cell = sq_dist(rows[i], rows[j]);
        }
    });
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    /// `1/2 a'Qa - sum(a)` with `Q_ij = y_i y_j K_ij`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const TAU: f64 = 1e-12;

/// SMO with second-order working-set selection on a dense kernel matrix.
/// `y` holds +1 for Distress and -1 for Control.
pub fn solve_dual(kernel: &[f64], y: &[f64], c: f64, tolerance: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    assert_eq!(kernel.len(), n * n);
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let qd: Vec<f64> = (0..n).map(|i| kernel[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let Some((i, j)) = select_working_set(&alpha, &g, y, &qd, &q, c, tolerance) else {
            converged = true;
            break;
        };
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk += q(i, k) * di + q(j, k) * dj;
        }
    }
    let rho = compute_rho(&alpha, &g, y, c);
    let objective = 0.5 * alpha.iter().zip(&g).map(|(a, gi)| a * (gi - 1.0)).sum::<f64>();
    DualSolution {
        alpha,
        rho,
        objective,
        iterations,
        converged,
    }
}

fn select_working_set(
    alpha: &[f64],
    g: &[f64],
    y: &[f64],
    qd: &[f64],
    q: &impl Fn(usize, usize) -> f64,
    c: f64,
    tolerance: f64,
) -> Option<(usize, usize)> {
    let n = y.len();
    let mut gmax = f64::NEG_INFINITY;
    let mut i = None;
    for t in 0..n {
        if y[t] > 0.0 {
            if alpha[t] < c && -g[t] >= gmax {
                gmax = -g[t];
                i = Some(t);
            }
        } else if alpha[t] > 0.0 && g[t] >= gmax {
            gmax = g[t];
            i = Some(t);
        }
    }
    let i = i?;
    let mut gmax2 = f64::NEG_INFINITY;
    let mut best = None;
    let mut obj_min = f64::INFINITY;
    for t in 0..n {
        let (grad_diff, quad) = if y[t] > 0.0 {
            if alpha[t] <= 0.0 {
                continue;
            }
            gmax2 = gmax2.max(g[t]);
            (gmax + g[t], qd[i] + qd[t] - 2.0 * y[i] * q(i, t))
        } else {
            if alpha[t] >= c {
                continue;
            }
            gmax2 = gmax2.max(-g[t]);
            (gmax - g[t], qd[i] + qd[t] + 2.0 * y[i] * q(i, t))
        };
        if grad_diff > 0.0 {
            let obj = -(grad_diff * grad_diff) / quad.max(TAU);
            if obj <= obj_min {
                obj_min = obj;
                best = Some(t);
            }
        }
    }
    if gmax + gmax2 < tolerance {
        return None;
    }
    best.map(|j| (i, j))
}

fn compute_rho(alpha: &[f64], g: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for k in 0..y.len() {
        let yg = y[k] * g[k];
        if alpha[k] >= c {
            if y[k] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[k] <= 0.0 {
            if y[k] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, a)| a * rbf_kernel(sv, row, self.sigma))
            .sum::<f64>()
            - self.rho
    }

    pub fn predict_row(&self, row: &[f64]) -> bool {
        self.decision(row) >= 0.0
    }
}

/// `sq_dists` may carry precomputed squared distances between the set's rows.
pub(crate) fn fit(set: &TrainingSet<'_>, p: &SvmParams, sq_dists: Option<&[f64]>) -> Result<SvmModel, ModelError> {
    if !(p.c > 0.0 && p.sigma > 0.0 && p.smo_tolerance > 0.0 && p.max_passes > 0) {
        return Err(ModelError::InvalidParams(format!("{p:?}")));
    }
    let n = set.rows.len();
    let owned;
    let d = match sq_dists {
        Some(d) => d,
        None => {
            owned = sq_dist_matrix(&set.rows);
            &owned
        }
    };
    let kernel: Vec<f64> = d.par_iter().map(|&v| (-p.sigma * v).exp()).collect();
    let y: Vec<f64> = set.y.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
    let sol = solve_dual(&kernel, &y, p.c, p.smo_tolerance, p.max_passes.saturating_mul(n));
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} iterations without reaching tolerance {} (C={}, sigma={})",
            sol.iterations,
            p.smo_tolerance,
            p.c,
            p.sigma
        );
    }
    let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
    Ok(SvmModel {
        support_vectors: sv.iter().map(|&i| set.rows[i].to_vec()).collect(),
        coefficients: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
        rho: sol.rho,
        sigma: p.sigma,
        objective: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}
