//! Structural causal model engine.
//!
//! An [`Scm`] couples a [`CausalGraph`] with one structural equation and one
//! noise law per node. The target node `Y` is binarized as
//! `L = 1[Y >= label_threshold]`; every other node is an observed feature.
//!
//! Counterfactuals follow abduction, action, prediction. Abduction assumes
//! every feature equation is invertible in its noise: noises of features that
//! do not depend on `Y` are read off directly, `U_Y` is proposed from its
//! prior (enumerated exactly when its support is small) and each proposal is
//! weighted by the likelihood of the noises implied for the descendants of
//! `Y`.

mod equation;
mod fit;
mod noise;

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

pub use equation::{Equation, EvalFn, InvertFn};
pub use fit::fit_linear_gaussian;
pub use noise::{NoiseLaw, SUPPORT_TOL};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::CausalGraph;

/// Largest `U_Y` support that abduction enumerates exactly.
pub const MAX_ENUMERATED_SUPPORT: usize = 64;
/// Largest joint noise support that exact enumeration accepts.
pub const MAX_JOINT_SUPPORT: usize = 2_000_000;

/// `do(X_I = θ_I)` on a set of feature nodes (node indices, sorted).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intervention {
    targets: Vec<usize>,
    values: Vec<f64>,
}

impl Intervention {
    /// The empty intervention, `do(∅)`.
    pub fn none() -> Self {
        Self::default()
    }

    /// Later duplicates of a node overwrite earlier ones.
    pub fn new(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = Self::default();
        for (t, v) in pairs {
            if out.targets.last() == Some(&t) {
                *out.values.last_mut().unwrap() = v;
            } else {
                out.targets.push(t);
                out.values.push(v);
            }
        }
        out
    }

    pub fn by_name(graph: &CausalGraph, pairs: &[(&str, f64)]) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|(n, v)| Ok((graph.index(n)?, *v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(pairs))
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn value_of(&self, node: usize) -> Option<f64> {
        self.targets.binary_search(&node).ok().map(|i| self.values[i])
    }
}

/// Hashable key for a row of exactly representable values (`-0.0` and `0.0`
/// map to the same key).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportKey(Vec<u64>);

impl SupportKey {
    pub fn new(values: &[f64]) -> Self {
        SupportKey(values.iter().map(|v| (v + 0.0).to_bits()).collect())
    }

    pub fn values(&self) -> Vec<f64> {
        self.0.iter().map(|b| f64::from_bits(*b)).collect()
    }
}

/// Rows drawn from an SCM together with the noise that generated them.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub noise: Vec<Vec<f64>>,
    pub data: Dataset,
}

/// Weighted particles approximating `P(U | X = x)`.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// One noise vector per particle, indexed by node.
    pub particles: Vec<Vec<f64>>,
    /// Normalized weights.
    pub weights: Vec<f64>,
    /// True when the posterior was enumerated exactly.
    pub exact: bool,
}

impl Posterior {
    pub fn resample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let dist = WeightedIndex::new(&self.weights).expect("normalized weights");
        (0..m).map(|_| self.particles[dist.sample(rng)].clone()).collect()
    }

    /// Posterior expectation of `f(noise)`.
    pub fn expect<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.particles.iter().zip(&self.weights).map(|(u, w)| w * f(u)).sum()
    }
}

/// Exact `P(X = x)` and `P(X = x, L = 1)` for a finite-support SCM.
#[derive(Debug, Clone, Default)]
pub struct ConditionalTable {
    entries: HashMap<SupportKey, (f64, f64)>,
}

impl ConditionalTable {
    pub fn probability(&self, x: &[f64]) -> f64 {
        self.entries.get(&SupportKey::new(x)).map_or(0.0, |e| e.0)
    }

    /// `P(L = 1 | X = x)`, `None` off the support.
    pub fn conditional(&self, x: &[f64]) -> Option<f64> {
        self.entries
            .get(&SupportKey::new(x))
            .filter(|e| e.0 > 0.0)
            .map(|e| e.1 / e.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Support points sorted by key with `(P(x), P(x, L=1))`.
    pub fn points(&self) -> Vec<(Vec<f64>, f64, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, e)| (k.clone(), e.0, e.1)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v.into_iter().map(|(k, p, q)| (k.values(), p, q)).collect()
    }

    pub fn insert(&mut self, x: &[f64], p: f64, p_label: f64) {
        let e = self.entries.entry(SupportKey::new(x)).or_insert((0.0, 0.0));
        e.0 += p;
        e.1 += p_label;
    }
}

#[derive(Debug, Clone)]
pub struct Scm {
    graph: CausalGraph,
    equations: Vec<Equation>,
    noise: Vec<NoiseLaw>,
    support: Vec<Option<Vec<(f64, f64)>>>,
    label_threshold: f64,
    features: Vec<usize>,
    feature_pos: Vec<Option<usize>>,
    /// `descends[i][j]`: j is a descendant of i.
    descends: Vec<Vec<bool>>,
}

/// Declarative construction of an SCM node by node.
#[derive(Debug, Clone)]
pub struct ScmBuilder {
    target: String,
    nodes: Vec<(String, Vec<String>, Equation, NoiseLaw)>,
}

impl ScmBuilder {
    pub fn new(target: &str) -> Self {
        Self { target: target.to_string(), nodes: Vec::new() }
    }

    pub fn node(mut self, name: &str, parents: &[&str], equation: Equation, noise: NoiseLaw) -> Self {
        self.nodes.push((
            name.to_string(),
            parents.iter().map(|p| p.to_string()).collect(),
            equation,
            noise,
        ));
        self
    }

    pub fn root(self, name: &str, noise: NoiseLaw) -> Self {
        self.node(name, &[], Equation::Noise, noise)
    }

    pub fn build(self, label_threshold: f64) -> Result<Scm> {
        let names: Vec<&str> = self.nodes.iter().map(|n| n.0.as_str()).collect();
        let edges: Vec<(&str, &str)> = self
            .nodes
            .iter()
            .flat_map(|(c, ps, _, _)| ps.iter().map(move |p| (p.as_str(), c.as_str())))
            .collect();
        let graph = CausalGraph::new(&names, &edges, &self.target)?;
        let (equations, noise) = self.nodes.into_iter().map(|n| (n.2, n.3)).unzip();
        Scm::from_parts(graph, equations, noise, label_threshold)
    }
}

impl Scm {
    pub fn from_parts(
        graph: CausalGraph,
        equations: Vec<Equation>,
        noise: Vec<NoiseLaw>,
        label_threshold: f64,
    ) -> Result<Self> {
        let n = graph.len();
        if equations.len() != n || noise.len() != n {
            return Err(Error::SizeMismatch(format!(
                "{} nodes but {} equations and {} noise laws",
                n,
                equations.len(),
                noise.len()
            )));
        }
        if !label_threshold.is_finite() {
            return Err(Error::InvalidParameter("label threshold must be finite".into()));
        }
        for i in 0..n {
            noise[i].validate()?;
            let np = graph.parents(i).len();
            match &equations[i] {
                Equation::Noise if np > 0 => {
                    return Err(Error::InvalidParameter(format!(
                        "node '{}' has parents but a noise-only equation",
                        graph.name(i)
                    )))
                }
                Equation::Linear { weights, .. } if weights.len() != np => {
                    return Err(Error::SizeMismatch(format!(
                        "node '{}' has {} parents but {} weights",
                        graph.name(i),
                        np,
                        weights.len()
                    )))
                }
                _ => {}
            }
        }
        let features = graph.features();
        let mut feature_pos = vec![None; n];
        for (k, &f) in features.iter().enumerate() {
            feature_pos[f] = Some(k);
        }
        let descends = (0..n)
            .map(|i| {
                let mut row = vec![false; n];
                for d in graph.descendants(i) {
                    row[d] = true;
                }
                row
            })
            .collect();
        let support = noise.iter().map(NoiseLaw::finite_support).collect();
        Ok(Self { graph, equations, noise, support, label_threshold, features, feature_pos, descends })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn target(&self) -> usize {
        self.graph.target()
    }

    /// Feature node indices in column order.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|&i| self.graph.name(i).to_string()).collect()
    }

    /// Column position of a feature node.
    pub fn feature_position(&self, node: usize) -> Option<usize> {
        self.feature_pos.get(node).copied().flatten()
    }

    pub fn label_threshold(&self) -> f64 {
        self.label_threshold
    }

    pub fn with_label_threshold(mut self, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter("label threshold must be finite".into()));
        }
        self.label_threshold = t;
        Ok(self)
    }

    pub fn noise_law(&self, node: usize) -> &NoiseLaw {
        &self.noise[node]
    }

    pub fn equation(&self, node: usize) -> &Equation {
        &self.equations[node]
    }

    pub fn is_descendant(&self, ancestor: usize, node: usize) -> bool {
        self.descends[ancestor][node]
    }

    /// True when every noise law has finite support.
    pub fn finite_support(&self) -> bool {
        self.support.iter().all(Option::is_some)
    }

    pub fn label(&self, y: f64) -> u8 {
        u8::from(y >= self.label_threshold)
    }

    fn node_likelihood(&self, node: usize, u: f64) -> f64 {
        match &self.support[node] {
            Some(pts) => pts
                .iter()
                .find(|(v, _)| (v - u).abs() <= SUPPORT_TOL)
                .map_or(0.0, |(_, q)| *q),
            None => self.noise[node].likelihood(u),
        }
    }

    fn snap_noise(&self, node: usize, u: f64) -> Option<f64> {
        match &self.support[node] {
            Some(pts) => pts.iter().find(|(v, _)| (v - u).abs() <= SUPPORT_TOL).map(|p| p.0),
            None => self.noise[node].snap(u),
        }
    }

    pub fn validate_intervention(&self, iv: &Intervention) -> Result<()> {
        for (&t, &v) in iv.targets.iter().zip(&iv.values) {
            if t >= self.graph.len() {
                return Err(Error::InvalidIntervention(format!("node #{t} out of range")));
            }
            if t == self.target() {
                return Err(Error::TargetIntervention(self.graph.target_name().to_string()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidIntervention(format!(
                    "non-finite value for '{}'",
                    self.graph.name(t)
                )));
            }
        }
        Ok(())
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.noise.iter().map(|l| l.sample(rng)).collect()
    }

    /// Node values generated from `noise` under `iv`, in topological order.
    pub fn evaluate_into(&self, noise: &[f64], iv: &Intervention, out: &mut [f64]) {
        let mut pa = [0.0f64; 16];
        for &i in self.graph.topological_order() {
            if let Some(v) = iv.value_of(i) {
                out[i] = v;
                continue;
            }
            let parents = self.graph.parents(i);
            let pv = collect_parents(parents, out, &mut pa);
            out[i] = self.equations[i].evaluate(pv, noise[i]);
        }
    }

    pub fn evaluate(&self, noise: &[f64], iv: &Intervention) -> Vec<f64> {
        let mut out = vec![0.0; self.graph.len()];
        self.evaluate_into(noise, iv, &mut out);
        out
    }

    pub fn feature_row(&self, values: &[f64]) -> Vec<f64> {
        self.features.iter().map(|&i| values[i]).collect()
    }

    /// Full node vector from a feature row, with `y` in the target slot.
    pub fn node_values(&self, x: &[f64], y: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.graph.len()];
        for (k, &f) in self.features.iter().enumerate() {
            v[f] = x[k];
        }
        v[self.target()] = y;
        v
    }

    /// i.i.d. rows from the observational law, keeping the generating noise.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleSet {
        self.sample_under(n, &Intervention::none(), rng)
    }

    pub fn sample_under<R: Rng + ?Sized>(&self, n: usize, iv: &Intervention, rng: &mut R) -> SampleSet {
        let mut data = Dataset::new(self.feature_names());
        let mut noise = Vec::with_capacity(n);
        let mut vals = vec![0.0; self.graph.len()];
        for _ in 0..n {
            let u = self.sample_noise(rng);
            self.evaluate_into(&u, iv, &mut vals);
            let y = vals[self.target()];
            data.push(self.feature_row(&vals), y, self.label(y));
            noise.push(u);
        }
        SampleSet { noise, data }
    }

    /// Copy of the SCM with constant equations at the intervened nodes.
    pub fn intervene(&self, iv: &Intervention) -> Result<Scm> {
        self.validate_intervention(iv)?;
        let mut out = self.clone();
        for (&t, &v) in iv.targets.iter().zip(&iv.values) {
            out.equations[t] = Equation::Constant(v);
        }
        Ok(out)
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features() {
            return Err(Error::SizeMismatch(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Weighted particles for `P(U | X = x)`.
    ///
    /// `proposals` prior draws of `U_Y` are used when its support is not
    /// enumerable.
    pub fn posterior<R: Rng + ?Sized>(&self, x: &[f64], proposals: usize, rng: &mut R) -> Result<Posterior> {
        self.check_row(x)?;
        let y_node = self.target();
        let n = self.graph.len();
        let mut base = vec![0.0; n];
        let mut vals = vec![0.0; n];
        for (k, &f) in self.features.iter().enumerate() {
            vals[f] = x[k];
        }
        let mut pa = [0.0f64; 16];
        // Noise of features that do not depend on Y is identified by x.
        for &i in self.graph.topological_order() {
            if i == y_node || self.descends[y_node][i] {
                continue;
            }
            let pv = collect_parents(self.graph.parents(i), &vals, &mut pa);
            let u = self.equations[i]
                .invert_noise(pv, vals[i])
                .ok_or_else(|| not_invertible(&self.graph, i))?;
            let u = self.snap_noise(i, u).ok_or_else(|| infeasible(&self.graph, i, x))?;
            base[i] = u;
        }

        let (candidates, exact): (Vec<(f64, f64)>, bool) = match &self.support[y_node] {
            Some(pts) if pts.len() <= MAX_ENUMERATED_SUPPORT => (pts.clone(), true),
            _ => {
                let law = &self.noise[y_node];
                ((0..proposals.max(1)).map(|_| (law.sample(rng), 1.0)).collect(), false)
            }
        };
        let dependents: Vec<usize> = self
            .graph
            .topological_order()
            .iter()
            .copied()
            .filter(|&i| self.descends[y_node][i])
            .collect();

        let mut particles = Vec::with_capacity(candidates.len());
        let mut weights = Vec::with_capacity(candidates.len());
        for (uy, prior) in candidates {
            let mut w = prior;
            let mut u = base.clone();
            u[y_node] = uy;
            let pv = collect_parents(self.graph.parents(y_node), &vals, &mut pa);
            vals[y_node] = self.equations[y_node].evaluate(pv, uy);
            for &i in &dependents {
                let pv = collect_parents(self.graph.parents(i), &vals, &mut pa);
                let ui = self.equations[i]
                    .invert_noise(pv, vals[i])
                    .ok_or_else(|| not_invertible(&self.graph, i))?;
                match self.snap_noise(i, ui) {
                    Some(s) => {
                        u[i] = s;
                        w *= self.node_likelihood(i, s);
                    }
                    None => w = 0.0,
                }
                if w == 0.0 {
                    break;
                }
            }
            if w > 0.0 {
                particles.push(u);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        if particles.is_empty() || total <= 0.0 || !total.is_finite() {
            return Err(Error::InfeasibleObservation(format!(
                "no noise value reproduces x = {x:?}"
            )));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Posterior { particles, weights, exact })
    }

    /// `m` noise vectors distributed as `P(U | X = x)`.
    pub fn abduct<R: Rng + ?Sized>(&self, x: &[f64], m: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let post = self.posterior(x, m, rng)?;
        Ok(post.resample(m, rng))
    }

    /// Individualized post-intervention rows: abducted noise, intervened
    /// equations, same noise.
    pub fn counterfactual_sample<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        iv: &Intervention,
        m: usize,
        rng: &mut R,
    ) -> Result<Dataset> {
        self.validate_intervention(iv)?;
        let noise = self.abduct(x, m, rng)?;
        let mut out = Dataset::new(self.feature_names());
        let mut vals = vec![0.0; self.graph.len()];
        for u in noise {
            self.evaluate_into(&u, iv, &mut vals);
            let y = vals[self.target()];
            out.push(self.feature_row(&vals), y, self.label(y));
        }
        Ok(out)
    }

    /// Mask of nodes that are neither intervened upon nor descendants of an
    /// intervened node.
    pub fn nondescendants(&self, iv: &Intervention) -> Vec<bool> {
        let n = self.graph.len();
        let mut nd = vec![true; n];
        for &t in iv.targets() {
            nd[t] = false;
            for j in 0..n {
                if self.descends[t][j] {
                    nd[j] = false;
                }
            }
        }
        nd
    }

    /// Subpopulation interventional rows: the intervention is applied, every
    /// observed nondescendant of the intervened set is clamped to its value
    /// in `x`, and all other nodes are regenerated from the prior noise
    /// `draws`. When `Y` is itself a nondescendant its noise is reweighted by
    /// the likelihood of the clamped features that depend on `Y`.
    ///
    /// `draws` are prior noise vectors with multiplicities. Calls
    /// `visit(node_values, weight)` per draw with unnormalized weights and
    /// returns the total weight.
    pub fn subpop_visit<F: FnMut(&[f64], f64)>(
        &self,
        x: &[f64],
        iv: &Intervention,
        draws: &[(Vec<f64>, f64)],
        mut visit: F,
    ) -> Result<f64> {
        self.check_row(x)?;
        self.validate_intervention(iv)?;
        let y_node = self.target();
        let nd = self.nondescendants(iv);
        let clamp: Vec<bool> = (0..self.graph.len()).map(|i| nd[i] && i != y_node).collect();
        let weighted: Vec<usize> = if nd[y_node] {
            self.graph
                .topological_order()
                .iter()
                .copied()
                .filter(|&i| clamp[i] && self.descends[y_node][i])
                .collect()
        } else {
            Vec::new()
        };
        let mut vals = vec![0.0; self.graph.len()];
        let mut pa = [0.0f64; 16];
        let mut total = 0.0;
        for (u, mult) in draws {
            for &i in self.graph.topological_order() {
                vals[i] = if let Some(v) = iv.value_of(i) {
                    v
                } else if clamp[i] {
                    x[self.feature_pos[i].expect("clamped nodes are features")]
                } else {
                    let pv = collect_parents(self.graph.parents(i), &vals, &mut pa);
                    self.equations[i].evaluate(pv, u[i])
                };
            }
            let mut w = *mult;
            for &i in &weighted {
                let pv = collect_parents(self.graph.parents(i), &vals, &mut pa);
                let ui = self.equations[i]
                    .invert_noise(pv, vals[i])
                    .ok_or_else(|| not_invertible(&self.graph, i))?;
                w *= self.snap_noise(i, ui).map_or(0.0, |s| self.node_likelihood(i, s));
            }
            total += w;
            if w > 0.0 {
                visit(&vals, w);
            }
        }
        if total <= 0.0 {
            return Err(Error::InfeasibleObservation(format!(
                "no prior draw is compatible with the clamped features of x = {x:?}"
            )));
        }
        Ok(total)
    }

    /// `m` rows from the subpopulation interventional law.
    pub fn subpop_sample<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        iv: &Intervention,
        m: usize,
        rng: &mut R,
    ) -> Result<Dataset> {
        let draws: Vec<(Vec<f64>, f64)> = (0..m).map(|_| (self.sample_noise(rng), 1.0)).collect();
        let mut rows = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        self.subpop_visit(x, iv, &draws, |v, w| {
            rows.push(v.to_vec());
            weights.push(w);
        })?;
        let mut out = Dataset::new(self.feature_names());
        let uniform = weights.iter().all(|&w| w == weights[0]);
        let picks: Vec<usize> = if uniform {
            (0..rows.len()).collect()
        } else {
            let dist = WeightedIndex::new(&weights).expect("positive weights");
            (0..m).map(|_| dist.sample(rng)).collect()
        };
        for i in picks {
            let y = rows[i][self.target()];
            out.push(self.feature_row(&rows[i]), y, self.label(y));
        }
        Ok(out)
    }

    /// Every joint noise configuration with its probability and node values.
    pub fn enumerate_joint(&self) -> Result<Vec<(Vec<f64>, f64)>> {
        let supports: Vec<&Vec<(f64, f64)>> = self
            .support
            .iter()
            .map(|s| s.as_ref())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::ContinuousSupport("scm".into()))?;
        let size = supports.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
        if size.is_none_or(|s| s > MAX_JOINT_SUPPORT) {
            return Err(Error::InvalidParameter("joint support too large to enumerate".into()));
        }
        let n = self.graph.len();
        let mut idx = vec![0usize; n];
        let mut out = Vec::with_capacity(size.unwrap_or(0));
        let none = Intervention::none();
        loop {
            let u: Vec<f64> = (0..n).map(|i| supports[i][idx[i]].0).collect();
            let p: f64 = (0..n).map(|i| supports[i][idx[i]].1).product();
            out.push((self.evaluate(&u, &none), p));
            let mut k = 0;
            loop {
                if k == n {
                    return Ok(out);
                }
                idx[k] += 1;
                if idx[k] < supports[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Exact `P(X = x)` and `P(X = x, L = 1)` over the finite support.
    pub fn conditional_table(&self) -> Result<ConditionalTable> {
        let mut table = ConditionalTable::default();
        for (vals, p) in self.enumerate_joint()? {
            let y = vals[self.target()];
            table.insert(&self.feature_row(&vals), p, p * f64::from(self.label(y)));
        }
        Ok(table)
    }

    /// Smallest target value whose cumulative probability reaches one half.
    pub fn exact_target_median(&self) -> Result<f64> {
        let mut ys: Vec<(f64, f64)> = self
            .enumerate_joint()?
            .into_iter()
            .map(|(v, p)| (v[self.target()], p))
            .collect();
        ys.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (y, p) in &ys {
            acc += p;
            // Tolerance absorbs rounding in the accumulated probabilities.
            if acc >= 0.5 - 1e-12 {
                return Ok(*y);
            }
        }
        Ok(ys.last().map_or(0.0, |p| p.0))
    }
}

fn collect_parents<'a>(parents: &[usize], vals: &[f64], buf: &'a mut [f64; 16]) -> &'a [f64] {
    assert!(parents.len() <= 16, "at most 16 parents per node are supported");
    for (k, &p) in parents.iter().enumerate() {
        buf[k] = vals[p];
    }
    &buf[..parents.len()]
}

fn not_invertible(graph: &CausalGraph, i: usize) -> Error {
    Error::InvalidParameter(format!("equation of '{}' is not invertible", graph.name(i)))
}

fn infeasible(graph: &CausalGraph, i: usize, x: &[f64]) -> Error {
    Error::InfeasibleObservation(format!(
        "the value of '{}' in x = {x:?} is outside the support of its noise",
        graph.name(i)
    ))
}

/// Sample median (mean of the two central order statistics for even sizes).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
