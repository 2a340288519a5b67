use nalgebra::{DMatrix, DVector};

use super::{median, Equation, NoiseLaw, Scm};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Relative singular-value cutoff below which a design matrix is singular.
const RANK_TOL: f64 = 1e-10;

/// Linear-Gaussian SCM over `graph` fitted by least squares.
///
/// Every non-root node gets an intercept plus one weight per parent and a
/// Gaussian noise law matching its residuals; roots get a Gaussian fitted to
/// their marginal. The label threshold is the sample median of the target.
pub fn fit_linear_gaussian(graph: &CausalGraph, data: &Dataset) -> Result<Scm> {
    if data.len() < 2 {
        return Err(Error::InvalidDataset("at least two rows are needed to fit an SCM".into()));
    }
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(graph.len());
    let mut missing = Vec::new();
    for i in 0..graph.len() {
        if i == graph.target() {
            columns.push(data.y.clone());
        } else if let Some(c) = data.feature_names.iter().position(|n| n == graph.name(i)) {
            columns.push(data.x.iter().map(|r| r[c]).collect());
        } else {
            missing.push(graph.name(i).to_string());
            columns.push(Vec::new());
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing.join(", ")));
    }

    let n = data.len();
    let mut equations = Vec::with_capacity(graph.len());
    let mut noise = Vec::with_capacity(graph.len());
    for i in 0..graph.len() {
        let parents = graph.parents(i);
        if parents.is_empty() {
            let (mu, sigma) = mean_sd(&columns[i]);
            equations.push(Equation::Noise);
            noise.push(NoiseLaw::Gaussian { mu, sigma });
            continue;
        }
        let design = DMatrix::from_fn(n, parents.len() + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                columns[parents[c - 1]][r]
            }
        });
        let target = DVector::from_column_slice(&columns[i]);
        let svd = design.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 || svd.singular_values.min() <= RANK_TOL * smax {
            return Err(Error::SingularDesign(graph.name(i).to_string()));
        }
        let beta = svd
            .solve(&target, 0.0)
            .map_err(|_| Error::SingularDesign(graph.name(i).to_string()))?;
        let resid: Vec<f64> = (&target - &design * &beta).iter().copied().collect();
        let (mu, sigma) = mean_sd(&resid);
        equations.push(Equation::Linear { weights: beta.iter().skip(1).copied().collect(), intercept: beta[0] });
        noise.push(NoiseLaw::Gaussian { mu, sigma });
    }
    Scm::from_parts(graph.clone(), equations, noise, median(&data.y))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mu = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    (mu, var.sqrt())
}
