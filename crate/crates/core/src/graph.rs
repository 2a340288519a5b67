//! Causal DAG over named nodes with a designated target.
//!
//! Besides the usual kinship queries this module implements d-separation
//! (reachability over active trails) and the pre/post "twin" graph that
//! joins pre-recourse variables, post-recourse variables, their noise terms
//! and the action node. The audit on the twin graph reports whether the
//! action is d-separated from the post-recourse target given all
//! post-recourse features.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalGraph {
    names: Vec<String>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    target: usize,
    topo: Vec<usize>,
}

/// Kinship sets of a node, as node names in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Relations {
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub ancestors: Vec<String>,
    pub descendants: Vec<String>,
    /// Parents of the target's children (other than the target). Empty
    /// unless the queried node is the target.
    pub spouses: Vec<String>,
}

impl CausalGraph {
    /// Builds a graph from node names and `(parent, child)` edges. Edge order
    /// determines the order of each node's parent list.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)], target: &str) -> Result<Self> {
        let names: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::InvalidGraph("empty node name".into()));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node '{n}'")));
            }
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownNode(s.to_string()));
        let mut parents = vec![Vec::new(); names.len()];
        let mut children = vec![Vec::new(); names.len()];
        for (p, c) in edges {
            let (p, c) = (lookup(p.as_ref())?, lookup(c.as_ref())?);
            if p == c {
                return Err(Error::InvalidGraph(format!("self-loop on '{}'", names[p])));
            }
            if parents[c].contains(&p) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {} -> {}",
                    names[p], names[c]
                )));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        let target = lookup(target)?;
        let topo = topological_order(&parents, &children).ok_or_else(|| {
            Error::InvalidGraph("edge set contains a cycle".into())
        })?;
        Ok(Self { names, parents, children, target, topo })
    }

    /// Parses the line-oriented text format:
    ///
    /// ```text
    /// target: Y
    /// X_C -> Y
    /// Y -> X_E
    /// ```
    ///
    /// A line holding a bare name declares an isolated node; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes: Vec<String> = Vec::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        let mut target: Option<String> = None;
        let add = |nodes: &mut Vec<String>, n: &str| {
            if !nodes.iter().any(|m| m == n) {
                nodes.push(n.to_string());
            }
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let lineno = lineno + 1;
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("target:") {
                let t = rest.trim();
                if !valid_name(t) {
                    return Err(Error::GraphParse { line: lineno, msg: format!("invalid target name '{t}'") });
                }
                if target.replace(t.to_string()).is_some() {
                    return Err(Error::GraphParse { line: lineno, msg: "duplicate target header".into() });
                }
                continue;
            }
            if let Some((p, c)) = line.split_once("->") {
                let (p, c) = (p.trim(), c.trim());
                if !valid_name(p) || !valid_name(c) {
                    return Err(Error::GraphParse {
                        line: lineno,
                        msg: format!("malformed edge '{line}'"),
                    });
                }
                add(&mut nodes, p);
                add(&mut nodes, c);
                edges.push((p.to_string(), c.to_string()));
            } else if valid_name(line) {
                add(&mut nodes, line);
            } else {
                return Err(Error::GraphParse { line: lineno, msg: format!("malformed line '{line}'") });
            }
        }
        let target = target.ok_or(Error::GraphParse { line: 0, msg: "missing 'target:' header".into() })?;
        if !nodes.contains(&target) {
            nodes.push(target.clone());
        }
        let edge_refs: Vec<(&str, &str)> = edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let node_refs: Vec<&str> = nodes.iter().map(String::as_str).collect();
        Self::new(&node_refs, &edge_refs, &target)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("target: {}\n", self.names[self.target]);
        // Bare node lines first so that parsing preserves node order.
        for name in &self.names {
            out.push_str(name);
            out.push('\n');
        }
        for c in 0..self.len() {
            for &p in &self.parents[c] {
                out.push_str(&format!("{} -> {}\n", self.names[p], self.names[c]));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.names[self.target]
    }

    /// All nodes except the target, in declaration order.
    pub fn features(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| i != self.target).collect()
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.len())
            .flat_map(|c| self.parents[c].iter().map(move |&p| (p, c)))
            .collect()
    }

    fn closure(&self, start: usize, up: bool) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            let next = if up { &self.parents[n] } else { &self.children[n] };
            for &m in next {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        (0..self.len()).filter(|&i| seen[i]).collect()
    }

    pub fn ancestors(&self, i: usize) -> Vec<usize> {
        self.closure(i, true)
    }

    pub fn descendants(&self, i: usize) -> Vec<usize> {
        self.closure(i, false)
    }

    /// Union of descendants of every node in `set`, excluding the set itself.
    pub fn descendants_of_set(&self, set: &[usize]) -> Vec<usize> {
        let mut mark = vec![false; self.len()];
        for &s in set {
            for d in self.descendants(s) {
                mark[d] = true;
            }
        }
        for &s in set {
            mark[s] = false;
        }
        (0..self.len()).filter(|&i| mark[i]).collect()
    }

    pub fn relations(&self, node: &str) -> Result<Relations> {
        let i = self.index(node)?;
        let names = |v: &[usize]| {
            let mut v = v.to_vec();
            v.sort_unstable();
            v.into_iter().map(|j| self.names[j].clone()).collect::<Vec<_>>()
        };
        let spouses = if i == self.target {
            let mut s = BTreeSet::new();
            for &c in &self.children[i] {
                s.extend(self.parents[c].iter().copied().filter(|&p| p != i));
            }
            names(&s.into_iter().collect::<Vec<_>>())
        } else {
            Vec::new()
        };
        Ok(Relations {
            parents: names(&self.parents[i]),
            children: names(&self.children[i]),
            ancestors: names(&self.ancestors(i)),
            descendants: names(&self.descendants(i)),
            spouses,
        })
    }

    fn indices(&self, set: &[&str]) -> Result<Vec<usize>> {
        set.iter().map(|s| self.index(s)).collect()
    }

    /// d-separation of node sets `a` and `b` given `z`, by name.
    pub fn d_separated(&self, a: &[&str], b: &[&str], z: &[&str]) -> Result<bool> {
        self.d_separated_idx(&self.indices(a)?, &self.indices(b)?, &self.indices(z)?)
    }

    /// d-separation by node index. The three sets must be pairwise disjoint.
    pub fn d_separated_idx(&self, a: &[usize], b: &[usize], z: &[usize]) -> Result<bool> {
        let n = self.len();
        let mut role = vec![0u8; n];
        for (tag, set) in [(1u8, a), (2, b), (3, z)] {
            for &i in set {
                if i >= n {
                    return Err(Error::UnknownNode(format!("#{i}")));
                }
                if role[i] != 0 && role[i] != tag {
                    return Err(Error::OverlappingSets(self.names[i].clone()));
                }
                role[i] = tag;
            }
        }
        let reach = self.reachable(a, z);
        Ok(b.iter().all(|&j| !reach[j]))
    }

    /// Nodes connected to `sources` by an active trail given `z`.
    fn reachable(&self, sources: &[usize], z: &[usize]) -> Vec<bool> {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &i in z {
            in_z[i] = true;
        }
        // Z together with its ancestors: colliders in this set are open.
        let mut anc_z = in_z.clone();
        let mut queue: VecDeque<usize> = z.iter().copied().collect();
        while let Some(i) = queue.pop_front() {
            for &p in &self.parents[i] {
                if !anc_z[p] {
                    anc_z[p] = true;
                    queue.push_back(p);
                }
            }
        }
        // (node, arrived_from_child)
        let mut visited = vec![[false; 2]; n];
        let mut reach = vec![false; n];
        let mut stack: Vec<(usize, bool)> = sources.iter().map(|&s| (s, true)).collect();
        while let Some((i, up)) = stack.pop() {
            if visited[i][up as usize] {
                continue;
            }
            visited[i][up as usize] = true;
            if !in_z[i] {
                reach[i] = true;
            }
            if up {
                if !in_z[i] {
                    stack.extend(self.parents[i].iter().map(|&p| (p, true)));
                    stack.extend(self.children[i].iter().map(|&c| (c, false)));
                }
            } else {
                if !in_z[i] {
                    stack.extend(self.children[i].iter().map(|&c| (c, false)));
                }
                if anc_z[i] {
                    stack.extend(self.parents[i].iter().map(|&p| (p, true)));
                }
            }
        }
        reach
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || "_.^-'".contains(c)) && !s.contains("->")
}

fn topological_order(parents: &[Vec<usize>], children: &[Vec<usize>]) -> Option<Vec<usize>> {
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BTreeSet<usize> = (0..parents.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(parents.len());
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &children[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == parents.len()).then_some(order)
}

/// Joint graph over pre-recourse variables, their post-recourse twins, one
/// noise node per variable and the action node `A`.
#[derive(Debug, Clone)]
pub struct TwinGraph {
    pub graph: CausalGraph,
    pub action: usize,
    pub post_target: usize,
    pub post_features: Vec<usize>,
}

pub const ACTION_NODE: &str = "A";

pub fn post_name(n: &str) -> String {
    format!("{n}^p")
}

pub fn noise_name(n: &str) -> String {
    format!("U_{n}")
}

fn check_feature_set(graph: &CausalGraph, set: &[&str]) -> Result<Vec<usize>> {
    let idx = graph.indices(set)?;
    if idx.contains(&graph.target()) {
        return Err(Error::TargetIntervention(graph.target_name().to_string()));
    }
    Ok(idx)
}

/// Builds the twin graph for a recourse policy reading `policy_inputs` and
/// intervening on `intervention_targets`.
pub fn build_twin_graph(
    graph: &CausalGraph,
    policy_inputs: &[&str],
    intervention_targets: &[&str],
    noise_resampled: bool,
) -> Result<TwinGraph> {
    let inputs = graph.indices(policy_inputs)?;
    if inputs.contains(&graph.target()) {
        return Err(Error::InvalidParameter(format!(
            "the policy cannot read the unobserved target '{}'",
            graph.target_name()
        )));
    }
    let targets = check_feature_set(graph, intervention_targets)?;

    let mut nodes: Vec<String> = Vec::new();
    let mut edges: Vec<(String, String)> = Vec::new();
    for n in graph.names() {
        nodes.push(n.clone());
        nodes.push(noise_name(n));
    }
    for n in graph.names() {
        nodes.push(post_name(n));
        nodes.push(post_name(&noise_name(n)));
    }
    nodes.push(ACTION_NODE.to_string());

    for (p, c) in graph.edges() {
        edges.push((graph.name(p).to_string(), graph.name(c).to_string()));
    }
    for n in graph.names() {
        edges.push((noise_name(n), n.clone()));
    }
    for &i in &inputs {
        edges.push((graph.name(i).to_string(), ACTION_NODE.to_string()));
    }
    // Post equations switch on A, so intervened post nodes keep their
    // structural parents (A may be do(nothing)).
    for (p, c) in graph.edges() {
        edges.push((post_name(graph.name(p)), post_name(graph.name(c))));
    }
    for n in graph.names() {
        edges.push((post_name(&noise_name(n)), post_name(n)));
    }
    for &t in &targets {
        edges.push((ACTION_NODE.to_string(), post_name(graph.name(t))));
    }
    if !noise_resampled {
        for n in graph.names() {
            edges.push((noise_name(n), post_name(&noise_name(n))));
        }
    }

    let post_target_name = post_name(graph.target_name());
    let twin = CausalGraph::new(&nodes, &edges, &post_target_name)?;
    let action = twin.index(ACTION_NODE)?;
    let post_target = twin.index(&post_target_name)?;
    let post_features = graph
        .features()
        .into_iter()
        .map(|i| twin.index(&post_name(graph.name(i))))
        .collect::<Result<Vec<_>>>()?;
    Ok(TwinGraph { graph: twin, action, post_target, post_features })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub influenced_by_effects: bool,
    pub intervenes_on_effects: bool,
    pub noise_resampled: bool,
    pub d_separated: bool,
    pub guaranteed_valid: bool,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let yn = |b: bool| if b { "yes" } else { "no" };
        writeln!(f, "influenced_by_effects: {}", yn(self.influenced_by_effects))?;
        writeln!(f, "intervenes_on_effects: {}", yn(self.intervenes_on_effects))?;
        writeln!(f, "noise_resampled: {}", yn(self.noise_resampled))?;
        writeln!(f, "d_separated: {}", yn(self.d_separated))?;
        writeln!(f, "guaranteed_valid: {}", yn(self.guaranteed_valid))
    }
}

/// Checks whether a recourse configuration can be certified valid from the
/// graph alone: the action must be d-separated from the post-recourse target
/// given every post-recourse feature.
pub fn audit_performative_validity(
    graph: &CausalGraph,
    policy_inputs: &[&str],
    intervention_targets: &[&str],
    noise_resampled: bool,
) -> Result<AuditReport> {
    let twin = build_twin_graph(graph, policy_inputs, intervention_targets, noise_resampled)?;
    let y = graph.target();
    let effects_of_y = graph.descendants(y);
    let children_of_y = graph.children(y);
    let influenced_by_effects = graph
        .indices(policy_inputs)?
        .iter()
        .any(|i| effects_of_y.contains(i));
    let intervenes_on_effects = graph
        .indices(intervention_targets)?
        .iter()
        .any(|i| children_of_y.contains(i));
    let d_separated =
        twin.graph
            .d_separated_idx(&[twin.action], &[twin.post_target], &twin.post_features)?;
    Ok(AuditReport {
        influenced_by_effects,
        intervenes_on_effects,
        noise_resampled,
        d_separated,
        guaranteed_valid: d_separated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1() -> CausalGraph {
        CausalGraph::parse("target: Y\nD -> Y\nD -> G\nY -> G\n").unwrap()
    }

    #[test]
    fn example1_relations() {
        let g = example1();
        let r = g.relations("Y").unwrap();
        assert_eq!(r.children, vec!["G"]);
        assert_eq!(r.ancestors, vec!["D"]);
        assert_eq!(r.spouses, vec!["D"]);
    }

    #[test]
    fn chain_descendants() {
        let g = CausalGraph::parse("target: C\nA -> B\nB -> C").unwrap();
        assert_eq!(g.relations("A").unwrap().descendants, vec!["B", "C"]);
        assert!(g.relations("A").unwrap().spouses.is_empty());
    }

    #[test]
    fn empty_edge_graph() {
        let g = CausalGraph::parse("target: Y\nX\nY\nZ\n").unwrap();
        for n in ["X", "Y", "Z"] {
            assert_eq!(g.relations(n).unwrap(), Relations::default());
        }
    }

    #[test]
    fn unknown_node_is_named() {
        let err = example1().relations("Q").unwrap_err();
        assert!(err.to_string().contains("'Q'"));
    }

    #[test]
    fn chain_and_collider() {
        let chain = CausalGraph::parse("target: Z\nX -> Y\nY -> Z").unwrap();
        assert!(chain.d_separated(&["X"], &["Z"], &["Y"]).unwrap());
        assert!(!chain.d_separated(&["X"], &["Z"], &[]).unwrap());
        let collider = CausalGraph::parse("target: Y\nX -> Y\nZ -> Y").unwrap();
        assert!(!collider.d_separated(&["X"], &["Z"], &["Y"]).unwrap());
        assert!(collider.d_separated(&["X"], &["Z"], &[]).unwrap());
    }

    #[test]
    fn collider_descendant_opens_path() {
        let g = CausalGraph::parse("target: Y\nX -> Y\nZ -> Y\nY -> W").unwrap();
        assert!(!g.d_separated(&["X"], &["Z"], &["W"]).unwrap());
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = example1();
        assert!(matches!(
            g.d_separated(&["D"], &["G"], &["D"]),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn cycles_and_self_loops_rejected() {
        assert!(CausalGraph::parse("target: A\nA -> B\nB -> A").is_err());
        assert!(CausalGraph::parse("target: A\nA -> A").is_err());
        assert!(CausalGraph::parse("target: A\nA -> B\nA -> B").is_err());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = CausalGraph::parse("target: Y\nX -> Y\nX -> \n").unwrap_err();
        assert!(matches!(err, Error::GraphParse { line: 3, .. }), "{err}");
    }

    #[test]
    fn text_roundtrip() {
        let g = CausalGraph::parse("target: Y\nD -> Y\nD -> G\nY -> G\nLone\n").unwrap();
        assert_eq!(CausalGraph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn twin_graph_fig_b() {
        let g = example1();
        let twin = build_twin_graph(&g, &["D", "G"], &["D"], false).unwrap();
        let t = &twin.graph;
        let a = twin.action;
        assert!(t.parents(a).contains(&t.index("G").unwrap()));
        assert!(!t.children(a).contains(&t.index("G^p").unwrap()));
        assert!(t.children(a).contains(&t.index("D^p").unwrap()));
        assert!(t.children(t.index("U_Y").unwrap()).contains(&t.index("U_Y^p").unwrap()));
    }

    #[test]
    fn twin_graph_fig_c() {
        let g = CausalGraph::parse("target: Y\nR -> Y\nY -> M").unwrap();
        let twin = build_twin_graph(&g, &["R", "M"], &["M"], true).unwrap();
        let t = &twin.graph;
        assert!(t.children(twin.action).contains(&t.index("M^p").unwrap()));
        for n in ["R", "Y", "M"] {
            let u = t.index(&noise_name(n)).unwrap();
            assert!(!t.children(u).contains(&t.index(&post_name(&noise_name(n))).unwrap()));
        }
    }

    #[test]
    fn isolated_action_is_separated() {
        let g = example1();
        let twin = build_twin_graph(&g, &[], &[], false).unwrap();
        assert!(twin.graph.parents(twin.action).is_empty());
        assert!(twin.graph.children(twin.action).is_empty());
        let r = audit_performative_validity(&g, &[], &[], false).unwrap();
        assert!(r.d_separated && r.guaranteed_valid);
    }

    #[test]
    fn target_intervention_rejected() {
        assert!(matches!(
            build_twin_graph(&example1(), &["D"], &["Y"], false),
            Err(Error::TargetIntervention(_))
        ));
    }

    #[test]
    fn audit_verdicts() {
        let g = CausalGraph::parse("target: Y\nC -> Y\nY -> E").unwrap();
        let valid = audit_performative_validity(&g, &["C"], &["C"], true).unwrap();
        assert!(valid.guaranteed_valid && !valid.influenced_by_effects && !valid.intervenes_on_effects);

        let eff = audit_performative_validity(&g, &["C"], &["E"], true).unwrap();
        assert!(eff.intervenes_on_effects && !eff.guaranteed_valid);

        let ex1 = audit_performative_validity(&example1(), &["D", "G"], &["D"], false).unwrap();
        assert!(ex1.influenced_by_effects && !ex1.guaranteed_valid);
        // Resampling the noise cuts the path through U_Y.
        let ex1r = audit_performative_validity(&example1(), &["D", "G"], &["D"], true).unwrap();
        assert!(ex1r.influenced_by_effects && ex1r.guaranteed_valid);
    }

    #[test]
    fn audit_report_text() {
        let r = audit_performative_validity(&example1(), &["D", "G"], &["D"], false).unwrap();
        let s = r.to_string();
        assert!(s.contains("influenced_by_effects: yes"));
        assert!(s.contains("guaranteed_valid: no"));
    }
}
