//! Recourse recommendations: counterfactual explanations (CE), causal
//! recourse (CR) and improvement-focused causal recourse (ICR), each CR/ICR
//! variant either individualized (noise abducted from the applicant) or
//! subpopulation-based (nondescendants of the intervention clamped).

mod search;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use search::{evolutionary_search, grid_scan, recommend, Domain, OptimizerConfig, Penalty};

use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::scm::{Intervention, Posterior, Scm, SupportKey};

/// Default number of samples behind each success-probability estimate.
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CE")]
    Ce,
    #[serde(rename = "indCR")]
    IndCr,
    #[serde(rename = "subCR")]
    SubCr,
    #[serde(rename = "indICR")]
    IndIcr,
    #[serde(rename = "subICR")]
    SubIcr,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ce, Method::IndCr, Method::SubCr, Method::IndIcr, Method::SubIcr];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ce => "CE",
            Method::IndCr => "indCR",
            Method::SubCr => "subCR",
            Method::IndIcr => "indICR",
            Method::SubIcr => "subICR",
        }
    }

    /// Targets the true label rather than the prediction.
    pub fn is_improvement(self) -> bool {
        matches!(self, Method::IndIcr | Method::SubIcr)
    }

    pub fn is_subpopulation(self) -> bool {
        matches!(self, Method::SubCr | Method::SubIcr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match norm.as_str() {
            "ce" => Method::Ce,
            "indcr" => Method::IndCr,
            "subcr" => Method::SubCr,
            "indicr" => Method::IndIcr,
            "subicr" => Method::SubIcr,
            _ => return Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionKind {
    /// A full replacement row (CE).
    Point(Vec<f64>),
    Intervention(Intervention),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub method: Method,
    pub kind: ActionKind,
    /// Estimated success probability at recommendation time.
    pub success: f64,
    pub cost: f64,
    /// False when the optimizer found no action reaching the target probability.
    pub feasible: bool,
}

/// Serializable view of an [`Action`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub method: Method,
    pub targets: Vec<String>,
    pub values: Vec<f64>,
    pub success: f64,
    pub cost: f64,
    pub feasible: bool,
}

impl Action {
    /// The intervention an applicant implements. A CE row is implemented by
    /// intervening on the coordinates it changes.
    pub fn intervention(&self, scm: &Scm, x: &[f64]) -> Intervention {
        match &self.kind {
            ActionKind::Intervention(iv) => iv.clone(),
            ActionKind::Point(p) => Intervention::new(
                p.iter()
                    .zip(x)
                    .enumerate()
                    .filter(|(_, (a, b))| a != b)
                    .map(|(j, (a, _))| (scm.features()[j], *a))
                    .collect(),
            ),
        }
    }

    pub fn is_noop(&self, x: &[f64]) -> bool {
        match &self.kind {
            ActionKind::Intervention(iv) => iv.is_empty(),
            ActionKind::Point(p) => p.as_slice() == x,
        }
    }

    pub fn record(&self, scm: &Scm, x: &[f64]) -> ActionRecord {
        let iv = self.intervention(scm, x);
        ActionRecord {
            method: self.method,
            targets: iv.targets().iter().map(|&t| scm.graph().name(t).to_string()).collect(),
            values: iv.values().to_vec(),
            success: self.success,
            cost: self.cost,
            feasible: self.feasible,
        }
    }
}

/// `cost(x, do(a)) = Σ_{j ∈ I_a} γ_j (x_j − θ_j)²` with
/// `γ_j = 1 / (π_j σ_j²)`, where `π_j` is the 1-based topological rank of
/// feature `j` among the features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub gamma: Vec<f64>,
    pub pi: Vec<usize>,
    pub sigma2: Vec<f64>,
}

impl CostModel {
    pub fn new(pi: Vec<usize>, sigma2: Vec<f64>) -> Result<Self> {
        if pi.len() != sigma2.len() {
            return Err(Error::SizeMismatch("cost ranks and variances differ in length".into()));
        }
        if pi.contains(&0) || sigma2.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "cost ranks must be positive and variances positive (pi {pi:?}, sigma2 {sigma2:?})"
            )));
        }
        let gamma = pi.iter().zip(&sigma2).map(|(&p, &s)| 1.0 / (p as f64 * s)).collect();
        Ok(Self { gamma, pi, sigma2 })
    }

    pub fn from_scm(scm: &Scm, sigma2: Vec<f64>) -> Result<Self> {
        let mut pi = vec![0; scm.n_features()];
        let mut rank = 0;
        for &node in scm.graph().topological_order() {
            if let Some(j) = scm.feature_position(node) {
                rank += 1;
                pi[j] = rank;
            }
        }
        Self::new(pi, sigma2)
    }

    pub fn point_cost(&self, x: &[f64], target: &[f64]) -> f64 {
        x.iter().zip(target).zip(&self.gamma).map(|((a, b), g)| g * (a - b).powi(2)).sum()
    }

    pub fn intervention_cost(&self, scm: &Scm, x: &[f64], iv: &Intervention) -> f64 {
        iv.targets()
            .iter()
            .zip(iv.values())
            .filter_map(|(&t, &v)| scm.feature_position(t).map(|j| self.gamma[j] * (x[j] - v).powi(2)))
            .sum()
    }

    pub fn cost(&self, scm: &Scm, x: &[f64], action: &ActionKind) -> f64 {
        match action {
            ActionKind::Point(p) => self.point_cost(x, p),
            ActionKind::Intervention(iv) => self.intervention_cost(scm, x, iv),
        }
    }
}

#[derive(Clone, Copy)]
pub struct RecourseProblem<'a> {
    pub scm: &'a Scm,
    pub classifier: &'a Classifier,
    pub cost: &'a CostModel,
    /// Target success probability.
    pub t_r: f64,
    pub method: Method,
    /// Samples per probability estimate.
    pub samples: usize,
}

impl RecourseProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_r > 0.0 && self.t_r <= 1.0) {
            return Err(Error::InvalidParameter(format!("target success probability {} outside (0, 1]", self.t_r)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("at least one sample per estimate is needed".into()));
        }
        if self.cost.gamma.len() != self.scm.n_features() {
            return Err(Error::SizeMismatch("cost model does not match the feature count".into()));
        }
        Ok(())
    }
}

enum Source {
    Point,
    Posterior(Posterior),
    Draws(Vec<(Vec<f64>, f64)>),
}

/// Success probabilities of candidate actions for one applicant.
///
/// The posterior (individualized) or the prior draws (subpopulation) are
/// fixed at construction, so candidates are compared on common random
/// numbers; repeated candidates are served from a cache.
pub struct SuccessEstimator<'a> {
    problem: RecourseProblem<'a>,
    x: Vec<f64>,
    source: Source,
    cache: HashMap<SupportKey, f64>,
    buf: Vec<f64>,
}

impl<'a> SuccessEstimator<'a> {
    pub fn new<R: Rng + ?Sized>(problem: RecourseProblem<'a>, x: &[f64], rng: &mut R) -> Result<Self> {
        problem.validate()?;
        let scm = problem.scm;
        if x.len() != scm.n_features() {
            return Err(Error::SizeMismatch(format!("expected {} features, got {}", scm.n_features(), x.len())));
        }
        let source = match problem.method {
            Method::Ce => Source::Point,
            Method::IndCr | Method::IndIcr => Source::Posterior(scm.posterior(x, problem.samples, rng)?),
            Method::SubCr | Method::SubIcr => {
                let mut index: HashMap<SupportKey, usize> = HashMap::new();
                let mut draws: Vec<(Vec<f64>, f64)> = Vec::new();
                for _ in 0..problem.samples {
                    let u = scm.sample_noise(rng);
                    let k = SupportKey::new(&u);
                    match index.get(&k) {
                        Some(&i) => draws[i].1 += 1.0,
                        None => {
                            index.insert(k, draws.len());
                            draws.push((u, 1.0));
                        }
                    }
                }
                Source::Draws(draws)
            }
        };
        Ok(Self { problem, x: x.to_vec(), source, cache: HashMap::new(), buf: vec![0.0; scm.graph().len()] })
    }

    pub fn problem(&self) -> &RecourseProblem<'a> {
        &self.problem
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    fn event(problem: &RecourseProblem<'_>, vals: &[f64]) -> f64 {
        let scm = problem.scm;
        let hit = if problem.method.is_improvement() {
            scm.label(vals[scm.target()]) == 1
        } else {
            problem.classifier.decide(&scm.feature_row(vals)) == 1
        };
        f64::from(u8::from(hit))
    }

    pub fn estimate(&mut self, action: &ActionKind) -> Result<f64> {
        let key = match action {
            ActionKind::Point(p) => SupportKey::new(p),
            ActionKind::Intervention(iv) => {
                let mut k = Vec::with_capacity(2 * iv.targets().len());
                for (&t, &v) in iv.targets().iter().zip(iv.values()) {
                    k.push(t as f64);
                    k.push(v);
                }
                SupportKey::new(&k)
            }
        };
        if let Some(&p) = self.cache.get(&key) {
            return Ok(p);
        }
        let problem = self.problem;
        let scm = problem.scm;
        let p = match (&self.source, action) {
            (_, ActionKind::Point(p)) => f64::from(problem.classifier.decide(p)),
            (Source::Point, ActionKind::Intervention(iv)) => {
                let mut row = self.x.clone();
                for (&t, &v) in iv.targets().iter().zip(iv.values()) {
                    if let Some(j) = scm.feature_position(t) {
                        row[j] = v;
                    }
                }
                f64::from(problem.classifier.decide(&row))
            }
            (Source::Posterior(post), ActionKind::Intervention(iv)) => {
                scm.validate_intervention(iv)?;
                let mut acc = 0.0;
                for (u, w) in post.particles.iter().zip(&post.weights) {
                    scm.evaluate_into(u, iv, &mut self.buf);
                    acc += w * Self::event(&problem, &self.buf);
                }
                acc
            }
            (Source::Draws(draws), ActionKind::Intervention(iv)) => {
                let mut acc = 0.0;
                let total = scm.subpop_visit(&self.x, iv, draws, |vals, w| acc += w * Self::event(&problem, vals))?;
                acc / total
            }
        };
        self.cache.insert(key, p);
        Ok(p)
    }
}

/// One-off estimate of an action's success probability for applicant `x`.
pub fn success_probability<R: Rng + ?Sized>(
    problem: RecourseProblem<'_>,
    x: &[f64],
    action: &ActionKind,
    rng: &mut R,
) -> Result<f64> {
    SuccessEstimator::new(problem, x, rng)?.estimate(action)
}

#[cfg(test)]
mod tests;
