use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub max_iter: usize,
    /// Convergence when the norm of the mean gradient drops below this.
    pub tol: f64,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { max_iter: 100, tol: 1e-8, l2: 0.0 }
    }
}

/// `h(x) = σ(w0 + w·x)`; `weights[0]` is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(linear(&self.weights, x))
    }
}

fn linear(w: &[f64], x: &[f64]) -> f64 {
    w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

/// Mean negative log-likelihood plus `l2/2·|w|²` (intercept unpenalized).
pub fn objective(w: &[f64], data: &Dataset, l2: f64) -> f64 {
    let n = data.len() as f64;
    let nll: f64 = data
        .x
        .iter()
        .zip(&data.labels)
        .map(|(x, &l)| {
            let z = linear(w, x);
            // log(1 + e^z) - l z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - f64::from(l) * z
        })
        .sum();
    nll / n + 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Gradient of [`objective`].
pub fn gradient(w: &[f64], data: &Dataset, l2: f64) -> Vec<f64> {
    let n = data.len() as f64;
    let mut g = vec![0.0; w.len()];
    for (x, &l) in data.x.iter().zip(&data.labels) {
        let r = sigmoid(linear(w, x)) - f64::from(l);
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(x) {
            *gj += r * xj;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    for j in 1..w.len() {
        g[j] += l2 * w[j];
    }
    g
}

/// Maximum-likelihood fit by Newton's method with step halving.
pub fn fit_logistic(data: &Dataset, params: &LogisticParams) -> Result<Logistic> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot fit a logistic model on an empty dataset".into()));
    }
    if params.tol <= 0.0 || params.max_iter == 0 || params.l2 < 0.0 {
        return Err(Error::InvalidParameter(format!("invalid logistic parameters {params:?}")));
    }
    let d = data.n_features() + 1;
    let n = data.len() as f64;
    let mut w = vec![0.0; d];
    let mut f = objective(&w, data, params.l2);
    let mut gnorm;
    for _ in 0..params.max_iter {
        let g = gradient(&w, data, params.l2);
        gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < params.tol {
            return Ok(Logistic { weights: w });
        }
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut row = vec![1.0; d];
        for x in &data.x {
            row[1..].copy_from_slice(x);
            let p = sigmoid(linear(&w, x));
            let s = p * (1.0 - p) / n;
            for a in 0..d {
                for b in 0..=a {
                    h[(a, b)] += s * row[a] * row[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
            if a > 0 {
                h[(a, a)] += params.l2;
            }
            // keeps the system solvable on degenerate columns
            h[(a, a)] += 1e-12;
        }
        let step = h
            .lu()
            .solve(&DVector::from_vec(g.clone()))
            .ok_or(Error::NotConverged { iterations: 0, gradient_norm: gnorm })?;
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let fc = objective(&cand, data, params.l2);
            if fc <= f || t < 1e-10 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    let g = gradient(&w, data, params.l2);
    let final_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if final_norm < params.tol {
        return Ok(Logistic { weights: w });
    }
    Err(Error::NotConverged { iterations: params.max_iter, gradient_norm: final_norm })
}
