use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// CART hyperparameters. Gini impurity is the only split criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { p: f64, n: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    pub fn score(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { p, .. } => return *p,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Best {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Greedy CART on Gini impurity.
///
/// A node is split whenever it is impure and some split leaves at least
/// `min_samples_leaf` rows on each side, even if the split does not lower the
/// impurity. Ties go to the lowest feature index, then the lowest threshold.
pub fn fit_tree(data: &Dataset, params: &TreeParams) -> Result<Tree> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot fit a tree on an empty dataset".into()));
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::InvalidParameter("min_samples_leaf must be positive".into()));
    }
    let mut tree = Tree { nodes: Vec::new(), n_features: data.n_features() };
    let idx: Vec<usize> = (0..data.len()).collect();
    grow(data, params, idx, 0, &mut tree);
    Ok(tree)
}

fn grow(data: &Dataset, params: &TreeParams, idx: Vec<usize>, depth: usize, tree: &mut Tree) -> usize {
    let n = idx.len() as f64;
    let pos = idx.iter().filter(|&&i| data.labels[i] == 1).count() as f64;
    let me = tree.nodes.len();
    tree.nodes.push(TreeNode::Leaf { p: pos / n, n: idx.len() });
    if pos == 0.0 || pos == n || params.max_depth.is_some_and(|d| depth >= d) {
        return me;
    }
    let Some(best) = best_split(data, params, &idx) else { return me };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| data.x[i][best.feature] <= best.threshold);
    drop(idx);
    let left = grow(data, params, l, depth + 1, tree);
    let right = grow(data, params, r, depth + 1, tree);
    tree.nodes[me] = TreeNode::Split { feature: best.feature, threshold: best.threshold, left, right };
    me
}

fn best_split(data: &Dataset, params: &TreeParams, idx: &[usize]) -> Option<Best> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| data.labels[i] == 1).count() as f64;
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..data.n_features() {
        order.sort_by(|&a, &b| data.x[a][f].total_cmp(&data.x[b][f]));
        let mut left_pos = 0.0;
        for k in 0..n - 1 {
            left_pos += f64::from(data.labels[order[k]]);
            let (v, next) = (data.x[order[k]][f], data.x[order[k + 1]][f]);
            if v == next {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            if nl < params.min_samples_leaf || nr < params.min_samples_leaf {
                continue;
            }
            let imp = (nl as f64 * gini(left_pos, nl as f64) + nr as f64 * gini(total_pos - left_pos, nr as f64))
                / n as f64;
            if best.as_ref().is_none_or(|b| imp < b.impurity - 1e-12) {
                best = Some(Best { feature: f, threshold: 0.5 * (v + next), impurity: imp });
            }
        }
    }
    best
}
