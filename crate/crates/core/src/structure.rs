//! Feature DAGs for the naive Bayes, tree-augmented and network-augmented
//! classifier variants.

use std::collections::BTreeMap;
use std::path::Path;

use crate::data::{equal_frequency_bins, Dataset};
use crate::error::{Error, Result};

/// Directed acyclic graph over feature indices. `parents[i]` is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DagStructure {
    n: usize,
    parents: Vec<Vec<usize>>,
}

impl DagStructure {
    /// Builds a DAG from parent → child edges, rejecting out-of-range
    /// indices, duplicates and cycles.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("structure needs at least one node".into()));
        }
        let mut parents = vec![Vec::new(); n];
        for &(j, k) in edges {
            for idx in [j, k] {
                if idx >= n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            if j == k {
                return Err(Error::Cycle(j));
            }
            if parents[k].contains(&j) {
                return Err(Error::InvalidArgument(format!("duplicate edge {j} -> {k}")));
            }
            parents[k].push(j);
        }
        for p in &mut parents {
            p.sort_unstable();
        }
        let dag = Self { n, parents };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn all_parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// Edges `(parent, child)` ordered by child, then parent.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(k, ps)| ps.iter().map(move |&j| (j, k)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.parents[child].binary_search(&parent).is_ok()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Kahn's algorithm; ties resolved by smallest index.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); self.n];
        for (k, ps) in self.parents.iter().enumerate() {
            for &j in ps {
                children[j].push(k);
            }
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &k in &children[i] {
                indegree[k] -= 1;
                if indegree[k] == 0 {
                    ready.insert(k);
                }
            }
        }
        if order.len() != self.n {
            let stuck = (0..self.n).find(|&i| indegree[i] > 0).unwrap_or(0);
            return Err(Error::Cycle(stuck));
        }
        Ok(order)
    }
}

pub fn structure_nb(n: usize) -> Result<DagStructure> {
    DagStructure::from_edges(n, &[])
}

/// Plug-in conditional mutual information estimate from two discretized
/// columns of one class, with `0 log 0 = 0`.
pub fn mutual_information(a: &[usize], b: &[usize], bins_a: usize, bins_b: usize) -> f64 {
    let total = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let mut joint = vec![0usize; bins_a * bins_b];
    let mut pa = vec![0usize; bins_a];
    let mut pb = vec![0usize; bins_b];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * bins_b + y] += 1;
        pa[x] += 1;
        pb[y] += 1;
    }
    let mut mi = 0.0;
    for x in 0..bins_a {
        for y in 0..bins_b {
            let c = joint[x * bins_b + y];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / total;
            let px = pa[x] as f64 / total;
            let py = pb[y] as f64 / total;
            mi += pxy * (pxy / (px * py)).ln();
        }
    }
    mi
}

/// Class-prior-weighted conditional mutual information matrix
/// `sum_c P(Y=c) I(X_j; X_k | Y=c)`, with features discretized per class.
pub fn conditional_mi_matrix(ds: &Dataset, bins: usize) -> Result<Vec<Vec<f64>>> {
    let n = ds.n_features();
    let total = ds.n_rows() as f64;
    let mut cmi = vec![vec![0.0; n]; n];
    for c in 0..2u8 {
        let rows = ds.class_rows(c);
        let prior = rows.len() as f64 / total;
        let k = bins.min(rows.len());
        let mut codes = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for j in 0..n {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let edges = equal_frequency_bins(&col, k.max(2))?;
            counts.push(edges.bin_count());
            codes.push(col.iter().map(|&v| edges.bin_of(v)).collect::<Vec<_>>());
        }
        for j in 0..n {
            for kk in 0..n {
                if j != kk {
                    cmi[j][kk] +=
                        prior * mutual_information(&codes[j], &codes[kk], counts[j], counts[kk]);
                }
            }
        }
    }
    Ok(cmi)
}

/// Tree-augmented structure: maximum spanning tree over the aggregated
/// conditional mutual information, rooted at node 0 and oriented away
/// from it.
pub fn structure_tan(ds: &Dataset, bins: usize) -> Result<DagStructure> {
    let n = ds.n_features();
    if n < 2 {
        return Err(Error::InvalidArgument("TAN needs at least two features".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    let weights = conditional_mi_matrix(ds, bins)?;
    let tree = maximum_spanning_tree(n, |j, k| 0.5 * (weights[j][k] + weights[k][j]));
    orient_tree(n, &tree)
}

/// Kruskal with ties broken by the lexicographically smaller `(min, max)` pair.
pub fn maximum_spanning_tree(n: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = (0..n)
        .flat_map(|j| ((j + 1)..n).map(move |k| (j, k)))
        .map(|(j, k)| (weight(j, k), j, k))
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for (_, j, k) in candidates {
        let (rj, rk) = (find(&mut parent, j), find(&mut parent, k));
        if rj != rk {
            parent[rj.max(rk)] = rj.min(rk);
            tree.push((j, k));
            if tree.len() + 1 == n {
                break;
            }
        }
    }
    tree
}

/// Orients an undirected forest away from the lowest-index node of each
/// component.
pub fn orient_tree(n: usize, undirected: &[(usize, usize)]) -> Result<DagStructure> {
    let mut adj = vec![Vec::new(); n];
    for &(j, k) in undirected {
        adj[j].push(k);
        adj[k].push(j);
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    let mut seen = vec![false; n];
    let mut edges = Vec::with_capacity(undirected.len());
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    edges.push((u, v));
                    queue.push_back(v);
                }
            }
        }
    }
    DagStructure::from_edges(n, &edges)
}

/// A weighted edge read from a DAG file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub parent: usize,
    pub child: usize,
    pub weight: f64,
}

/// Parses `parent child weight` lines; `#` starts a comment line.
pub fn parse_weighted_edges(text: &str, n: usize) -> Result<Vec<WeightedEdge>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::MalformedLine {
                line,
                message: format!("expected `parent child weight`, got {} field(s)", fields.len()),
            });
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::MalformedLine {
                line,
                message: format!("`{s}` is not a node index"),
            })
        };
        let parent = parse_idx(fields[0])?;
        let child = parse_idx(fields[1])?;
        let weight = fields[2]
            .parse::<f64>()
            .ok()
            .filter(|w| w.is_finite())
            .ok_or_else(|| Error::MalformedLine {
                line,
                message: format!("`{}` is not a finite weight", fields[2]),
            })?;
        for index in [parent, child] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, n });
            }
        }
        edges.push(WeightedEdge {
            parent,
            child,
            weight,
        });
    }
    Ok(edges)
}

/// Keeps, per child, the `cap` incoming edges of largest `|weight|`
/// (ties to the smaller parent index).
pub fn cap_in_degree(edges: &[WeightedEdge], cap: usize) -> Vec<WeightedEdge> {
    let mut by_child: BTreeMap<usize, Vec<WeightedEdge>> = BTreeMap::new();
    for e in edges {
        by_child.entry(e.child).or_default().push(*e);
    }
    let mut kept = Vec::new();
    for (_, mut incoming) in by_child {
        incoming.sort_by(|a, b| {
            b.weight
                .abs()
                .total_cmp(&a.weight.abs())
                .then(a.parent.cmp(&b.parent))
        });
        kept.extend(incoming.into_iter().take(cap));
    }
    kept
}

pub fn structure_ban_from_str(text: &str, n: usize, max_in_degree: Option<usize>) -> Result<DagStructure> {
    let mut edges = parse_weighted_edges(text, n)?;
    if let Some(cap) = max_in_degree {
        edges = cap_in_degree(&edges, cap);
    }
    let pairs: Vec<(usize, usize)> = edges.iter().map(|e| (e.parent, e.child)).collect();
    DagStructure::from_edges(n, &pairs)
}

/// Network-augmented structure ingested from a weighted edge list.
pub fn structure_ban_from_file(
    path: impl AsRef<Path>,
    n: usize,
    max_in_degree: Option<usize>,
) -> Result<DagStructure> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    structure_ban_from_str(&text, n, max_in_degree)
}
