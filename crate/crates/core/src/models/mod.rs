//! Probabilistic classifiers `h(x)` with a decision threshold, refit-set
//! assembly and exact mixture conditionals.

mod logistic;
mod tree;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use logistic::{fit_logistic, gradient as logistic_gradient, objective as logistic_objective, sigmoid, Logistic, LogisticParams};
pub use tree::{fit_tree, Tree, TreeNode, TreeParams};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scm::ConditionalTable;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Tree,
    Logistic,
    Oracle,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Tree => "tree",
            Backend::Logistic => "logistic",
            Backend::Oracle => "oracle",
        })
    }
}

pub type OracleFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Scorer {
    Tree(Tree),
    Logistic(Logistic),
    /// A known closed-form `h(x)`, e.g. a Bayes-optimal scorer.
    Oracle(OracleFn),
}

impl fmt::Debug for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scorer::Tree(t) => f.debug_tuple("Tree").field(&t.nodes.len()).finish(),
            Scorer::Logistic(l) => f.debug_tuple("Logistic").field(&l.weights).finish(),
            Scorer::Oracle(_) => f.write_str("Oracle"),
        }
    }
}

/// `decide(x) = 1[h(x) >= threshold]`.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub scorer: Scorer,
    pub threshold: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
enum Stored {
    Tree { threshold: f64, tree: Tree },
    Logistic { threshold: f64, model: Logistic },
}

impl Classifier {
    pub fn new(scorer: Scorer, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!("decision threshold {threshold} outside [0, 1]")));
        }
        Ok(Self { scorer, threshold })
    }

    pub fn oracle<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F, threshold: f64) -> Result<Self> {
        Self::new(Scorer::Oracle(Arc::new(f)), threshold)
    }

    pub fn fit(backend: Backend, data: &Dataset, threshold: f64) -> Result<Self> {
        let scorer = match backend {
            Backend::Tree => Scorer::Tree(fit_tree(data, &TreeParams::default())?),
            Backend::Logistic => Scorer::Logistic(fit_logistic(data, &LogisticParams::default())?),
            Backend::Oracle => {
                return Err(Error::InvalidParameter("oracle classifiers are not fitted".into()))
            }
        };
        Self::new(scorer, threshold)
    }

    pub fn backend(&self) -> Backend {
        match self.scorer {
            Scorer::Tree(_) => Backend::Tree,
            Scorer::Logistic(_) => Backend::Logistic,
            Scorer::Oracle(_) => Backend::Oracle,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let s = match &self.scorer {
            Scorer::Tree(t) => t.score(x),
            Scorer::Logistic(l) => l.score(x),
            Scorer::Oracle(f) => f(x),
        };
        s.clamp(0.0, 1.0)
    }

    pub fn decide(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= self.threshold)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return f64::NAN;
        }
        let hits = data.x.iter().zip(&data.labels).filter(|(x, &l)| self.decide(x) == l).count();
        hits as f64 / data.len() as f64
    }

    pub fn acceptance_rate(&self, rows: &[Vec<f64>]) -> f64 {
        if rows.is_empty() {
            return f64::NAN;
        }
        rows.iter().filter(|x| self.decide(x) == 1).count() as f64 / rows.len() as f64
    }

    /// JSON document: nested split records for trees, the weight list for
    /// logistic models. Oracles cannot be serialized.
    pub fn to_json(&self) -> Result<String> {
        let stored = match &self.scorer {
            Scorer::Tree(t) => Stored::Tree { threshold: self.threshold, tree: t.clone() },
            Scorer::Logistic(l) => Stored::Logistic { threshold: self.threshold, model: l.clone() },
            Scorer::Oracle(_) => return Err(Error::Serialization("oracle scorers have no serialized form".into())),
        };
        serde_json::to_string_pretty(&stored).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let stored: Stored = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        match stored {
            Stored::Tree { threshold, tree } => Self::new(Scorer::Tree(tree), threshold),
            Stored::Logistic { threshold, model } => Self::new(Scorer::Logistic(model), threshold),
        }
    }
}

/// Refit set: equal parts of accepted pre-recourse rows, the rejected
/// pre-recourse rows of the recourse implementers and their post-recourse
/// rows, so that post-recourse data makes up one third.
pub fn assemble_refit_set(pre_accepted: &Dataset, pre_rejected_matched: &Dataset, post: &Dataset) -> Result<Dataset> {
    let n = post.len();
    if pre_accepted.len() != n || pre_rejected_matched.len() != n {
        return Err(Error::SizeMismatch(format!(
            "refit parts must have equal sizes (got {}, {}, {})",
            pre_accepted.len(),
            pre_rejected_matched.len(),
            n
        )));
    }
    let mut out = pre_accepted.clone();
    out.extend(pre_rejected_matched)?;
    out.extend(post)?;
    Ok(out)
}

/// Weight `alpha` on the pre-recourse component of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub alpha: f64,
}

impl MixtureSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!("mixture weight {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha })
    }
}

/// `P(L^m = 1 | X^m = x)` under `alpha·P_pre + (1 - alpha)·P_post`.
pub fn mixture_conditional(pre: &ConditionalTable, post: &ConditionalTable, spec: MixtureSpec, x: &[f64]) -> Result<f64> {
    let a = spec.alpha;
    let (px_pre, px_post) = (pre.probability(x), post.probability(x));
    let den = a * px_pre + (1.0 - a) * px_post;
    if den <= 0.0 {
        return Err(Error::OutsideSupport(format!("{x:?} has zero mixture probability")));
    }
    let num = a * px_pre * pre.conditional(x).unwrap_or(0.0) + (1.0 - a) * px_post * post.conditional(x).unwrap_or(0.0);
    Ok(num / den)
}

/// Mixture weights `{0, 0.1, ..., 1}`.
pub fn alpha_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

/// Performative validity restricted to a grid: every tested point accepted by
/// the pre-recourse Bayes decision stays accepted by the Bayes decision of
/// each mixture. Points outside a mixture's support are skipped for it.
pub fn performatively_valid(pre: &ConditionalTable, post: &ConditionalTable, xs: &[Vec<f64>], t_c: f64) -> bool {
    for x in xs {
        let Some(h) = pre.conditional(x) else { continue };
        let pre_decision = u8::from(h >= t_c);
        for &alpha in &alpha_grid() {
            let Ok(hm) = mixture_conditional(pre, post, MixtureSpec { alpha }, x) else { continue };
            if u8::from(hm >= t_c) < pre_decision {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let mut d = Dataset::new(vec!["a".into()]);
        for (v, l) in [(0.0, 0), (0.0, 1), (1.0, 1), (1.0, 1), (2.0, 0)] {
            d.push(vec![v], 0.0, l);
        }
        d
    }

    #[test]
    fn threshold_is_monotone() {
        let c = Classifier::fit(Backend::Tree, &tiny(), 0.5).unwrap();
        let xs: Vec<Vec<f64>> = (0..3).map(|v| vec![f64::from(v)]).collect();
        let mut prev = usize::MAX;
        for t in [0.0, 0.3, 0.5, 0.7, 1.0] {
            let c = Classifier { threshold: t, ..c.clone() };
            let acc = xs.iter().filter(|x| c.decide(x) == 1).count();
            assert!(acc <= prev);
            prev = acc;
        }
    }

    #[test]
    fn json_roundtrip_is_byte_stable() {
        let c = Classifier::fit(Backend::Tree, &tiny(), 0.5).unwrap();
        let a = c.to_json().unwrap();
        let back = Classifier::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
        assert_eq!(Classifier::fit(Backend::Tree, &tiny(), 0.5).unwrap().to_json().unwrap(), a);
        let l = Classifier::new(Scorer::Logistic(Logistic { weights: vec![0.1, -2.0] }), 0.4).unwrap();
        assert_eq!(Classifier::from_json(&l.to_json().unwrap()).unwrap().score(&[1.0]), l.score(&[1.0]));
    }

    #[test]
    fn oracle_has_no_serialized_form() {
        let c = Classifier::oracle(|_| 0.5, 0.5).unwrap();
        assert!(c.to_json().is_err());
        assert_eq!(c.decide(&[1.0]), 1);
    }

    #[test]
    fn refit_set_sizes() {
        let d = tiny();
        let out = assemble_refit_set(&d, &d, &d).unwrap();
        assert_eq!(out.len(), 15);
        assert_eq!(&out.x[10..], &d.x[..]);
        let e = Dataset::new(vec!["a".into()]);
        assert!(assemble_refit_set(&e, &e, &e).unwrap().is_empty());
        assert!(assemble_refit_set(&d, &e, &d).is_err());
    }

    #[test]
    fn mixture_conditional_cases() {
        let mut pre = ConditionalTable::default();
        pre.insert(&[1.0, 1.0], 0.5, 0.5 * 0.55);
        pre.insert(&[0.0, 0.0], 0.5, 0.0);
        let mut post = ConditionalTable::default();
        post.insert(&[1.0, 1.0], 1.0, 0.1 / 0.55);
        let x = [1.0, 1.0];
        assert_eq!(mixture_conditional(&pre, &post, MixtureSpec::new(1.0).unwrap(), &x).unwrap(), 0.55);
        let h0 = mixture_conditional(&pre, &post, MixtureSpec::new(0.0).unwrap(), &x).unwrap();
        assert!((h0 - 0.1 / 0.55).abs() < 1e-15);
        assert!(mixture_conditional(&pre, &post, MixtureSpec { alpha: 0.5 }, &[3.0, 3.0]).is_err());
        assert!(MixtureSpec::new(1.5).is_err());
        assert!(!performatively_valid(&pre, &post, &[x.to_vec()], 0.5));
        assert!(performatively_valid(&pre, &pre, &[x.to_vec()], 0.5));
    }
}
