//! Shared test oracles.

#![allow(dead_code)]

/// Reference d-separation of single nodes: enumerate every simple path of
/// the skeleton and test each for being active given `z`.
pub fn brute_force_dsep(n: usize, edges: &[(usize, usize)], a: usize, b: usize, z: &[usize]) -> bool {
    let mut adj = vec![Vec::new(); n];
    let mut children = vec![Vec::new(); n];
    for &(p, c) in edges {
        adj[p].push(c);
        adj[c].push(p);
        children[p].push(c);
    }
    let desc = |s: usize| {
        let mut seen = vec![false; n];
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(&children[v]);
            }
        }
        seen
    };
    let is_edge = |p: usize, c: usize| edges.contains(&(p, c));
    fn walk(v: usize, b: usize, path: &mut Vec<usize>, adj: &[Vec<usize>], out: &mut Vec<Vec<usize>>) {
        if v == b {
            out.push(path.clone());
            return;
        }
        for &w in &adj[v] {
            if !path.contains(&w) {
                path.push(w);
                walk(w, b, path, adj, out);
                path.pop();
            }
        }
    }
    let mut paths = Vec::new();
    walk(a, b, &mut vec![a], &adj, &mut paths);
    !paths.iter().any(|p| {
        (1..p.len() - 1).all(|k| {
            let (u, v, w) = (p[k - 1], p[k], p[k + 1]);
            if is_edge(u, v) && is_edge(w, v) {
                let d = desc(v);
                z.iter().any(|&q| d[q])
            } else {
                !z.contains(&v)
            }
        })
    })
}

/// Every labelled DAG on `n` nodes, as edge lists.
pub fn all_dags(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut k = code;
        let mut edges = Vec::new();
        for &(i, j) in &pairs {
            match k % 3 {
                1 => edges.push((i, j)),
                2 => edges.push((j, i)),
                _ => {}
            }
            k /= 3;
        }
        if acyclic(n, &edges) {
            out.push(edges);
        }
    }
    out
}

pub fn acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, c) in edges {
        indeg[c] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = stack.pop() {
        seen += 1;
        for &(p, c) in edges {
            if p == v {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    stack.push(c);
                }
            }
        }
    }
    seen == n
}

pub fn node_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("v{i}")).collect()
}

pub fn named_edges(names: &[String], edges: &[(usize, usize)]) -> Vec<(String, String)> {
    edges.iter().map(|&(p, c)| (names[p].clone(), names[c].clone())).collect()
}
