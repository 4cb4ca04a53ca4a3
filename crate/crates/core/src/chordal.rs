//! Sparsity graphs, chordality, chordal extensions and clique trees.
//!
//! Vertices are 0-based internally. The JSON formats in [`crate::io`] use
//! 1-based labels and convert at the boundary.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

/// Undirected simple graph on vertices `0..n`.
///
/// Doubles as the off-diagonal sparsity pattern of a symmetric matrix; the
/// diagonal is implicit and never stored as a self-loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<BTreeSet<usize>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for i in 0..n {
            for j in i + 1..n {
                g.adj[i].insert(j);
                g.adj[j].insert(i);
            }
        }
        g
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::new(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Inserts the edge `{i, j}`. Self-loops are ignored.
    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        for v in [i, j] {
            if v >= self.n {
                return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
            }
        }
        if i != j {
            self.adj[i].insert(j);
            self.adj[j].insert(i);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && i < self.n && self.adj[i].contains(&j)
    }

    pub fn neighbors(&self, v: usize) -> &BTreeSet<usize> {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.range(i + 1..).map(move |&j| (i, j)))
    }

    pub fn is_superset_of(&self, other: &Graph) -> bool {
        self.n == other.n && other.edges().all(|(i, j)| self.has_edge(i, j))
    }

    pub fn is_clique(&self, vs: &[usize]) -> bool {
        vs.iter()
            .enumerate()
            .all(|(a, &u)| vs[a + 1..].iter().all(|&w| self.has_edge(u, w)))
    }
}

/// A vertex ordering. As a perfect elimination ordering, the later
/// neighbors of every vertex form a clique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder {
    perm: Vec<usize>,
    position: Vec<usize>,
}

impl EliminationOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut position = vec![usize::MAX; n];
        for (k, &v) in perm.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::InvalidOrder { n });
            }
            position[v] = k;
        }
        Ok(Self { perm, position })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn position(&self, v: usize) -> usize {
        self.position[v]
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Neighbors of `v` that come after it, sorted by position.
    fn later_neighbors(&self, g: &Graph, v: usize) -> Vec<usize> {
        let pv = self.position[v];
        let mut later: Vec<usize> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&w| self.position[w] > pv)
            .collect();
        later.sort_by_key(|&w| self.position[w]);
        later
    }
}

/// Maximum cardinality search. Returns the visit order; ties go to the
/// lowest vertex index.
pub fn maximum_cardinality_search(g: &Graph) -> Vec<usize> {
    let n = g.n();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if !visited[v] && best.is_none_or(|b| weight[v] > weight[b]) {
                best = Some(v);
            }
        }
        let v = best.expect("an unvisited vertex remains");
        visited[v] = true;
        order.push(v);
        for &w in g.neighbors(v) {
            if !visited[w] {
                weight[w] += 1;
            }
        }
    }
    order
}

/// Checks that `order` is a perfect elimination ordering of `g`.
///
/// Returns the first vertex (in elimination order) whose later neighbors
/// fail the clique test.
pub fn verify_peo(g: &Graph, order: &EliminationOrder) -> Result<()> {
    if order.len() != g.n() {
        return Err(Error::InvalidOrder { n: g.n() });
    }
    for &v in order.perm() {
        let later = order.later_neighbors(g, v);
        if let Some((&first, rest)) = later.split_first() {
            if rest.iter().any(|&w| !g.has_edge(first, w)) {
                return Err(Error::NotPerfectElimination { vertex: v });
            }
        }
    }
    Ok(())
}

/// Returns a perfect elimination ordering when `g` is chordal.
pub fn perfect_elimination_order(g: &Graph) -> Option<EliminationOrder> {
    let mut visit = maximum_cardinality_search(g);
    visit.reverse();
    let order = EliminationOrder::new(visit).expect("MCS visits every vertex once");
    verify_peo(g, &order).ok().map(|_| order)
}

pub fn is_chordal(g: &Graph) -> bool {
    perfect_elimination_order(g).is_some()
}

/// Chordal extension by greedy minimum-degree elimination.
///
/// Chordal inputs are returned unchanged.
pub fn chordal_extension(g: &Graph) -> Graph {
    if is_chordal(g) {
        return g.clone();
    }
    let n = g.n();
    let mut out = g.clone();
    let mut work: Vec<BTreeSet<usize>> = (0..n).map(|v| g.neighbors(v).clone()).collect();
    let mut eliminated = vec![false; n];
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !eliminated[v])
            .min_by_key(|&v| (work[v].len(), v))
            .expect("a vertex remains");
        let nb: Vec<usize> = work[v].iter().copied().collect();
        for (a, &u) in nb.iter().enumerate() {
            for &w in &nb[a + 1..] {
                if work[u].insert(w) {
                    work[w].insert(u);
                    out.add_edge(u, w).expect("vertices are in range");
                }
            }
        }
        for &u in &nb {
            work[u].remove(&v);
        }
        work[v].clear();
        eliminated[v] = true;
    }
    out
}

/// Sorted, duplicate-free, nonempty vertex set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Clique(Vec<usize>);

impl Clique {
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        vertices.sort_unstable();
        let before = vertices.len();
        vertices.dedup();
        if vertices.is_empty() || vertices.len() != before {
            return Err(Error::InvalidProblem(
                "clique must be nonempty without duplicates".into(),
            ));
        }
        Ok(Self(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn is_subset_of(&self, other: &Clique) -> bool {
        self.0.iter().all(|&v| other.contains(v))
    }

    pub fn intersection(&self, other: &Clique) -> Vec<usize> {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// Position of vertex `v` inside the clique.
    pub fn local_index(&self, v: usize) -> Option<usize> {
        self.0.binary_search(&v).ok()
    }
}

/// Maximal cliques of a chordal graph from a perfect elimination ordering.
///
/// The result is sorted lexicographically.
pub fn maximal_cliques(g: &Graph, order: &EliminationOrder) -> Result<Vec<Clique>> {
    verify_peo(g, order)?;
    let n = g.n();
    let later: Vec<Vec<usize>> = (0..n).map(|v| order.later_neighbors(g, v)).collect();
    // {v} ∪ later(v) is non-maximal iff some u has v as its first later
    // neighbor and exactly one more later neighbor than v.
    let mut dominated = vec![false; n];
    for u in 0..n {
        if let Some(&p) = later[u].first() {
            if later[u].len() == later[p].len() + 1 {
                dominated[p] = true;
            }
        }
    }
    let mut cliques: Vec<Clique> = (0..n)
        .filter(|&v| !dominated[v])
        .map(|v| {
            let mut vs = later[v].clone();
            vs.push(v);
            Clique::new(vs).expect("candidate is nonempty and duplicate-free")
        })
        .collect();
    cliques.sort();
    Ok(cliques)
}

/// Maximal cliques linked into a tree with the running-intersection property.
#[derive(Debug, Clone)]
pub struct CliqueTree {
    cliques: Vec<Clique>,
    parent: Vec<Option<usize>>,
    separators: Vec<Vec<usize>>,
    root: usize,
    bfs: Vec<usize>,
}

impl CliqueTree {
    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn parent(&self, k: usize) -> Option<usize> {
        self.parent[k]
    }

    /// Intersection with the parent clique; empty for the root.
    pub fn separator(&self, k: usize) -> &[usize] {
        &self.separators[k]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Clique indices in breadth-first order from the root.
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs
    }

    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(Clique::len).max().unwrap_or(0)
    }

    /// For every vertex, the cliques containing it induce a connected subtree.
    pub fn has_running_intersection(&self) -> bool {
        let n = self
            .cliques
            .iter()
            .flat_map(|c| c.vertices().iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let mut nodes = vec![0usize; n];
        let mut links = vec![0usize; n];
        for (k, c) in self.cliques.iter().enumerate() {
            for &v in c.vertices() {
                nodes[v] += 1;
            }
            if let Some(p) = self.parent[k] {
                for v in c.intersection(&self.cliques[p]) {
                    links[v] += 1;
                }
            }
        }
        (0..n).all(|v| nodes[v] == 0 || links[v] + 1 == nodes[v])
    }
}

/// Maximum-weight spanning tree of the clique intersection graph.
///
/// Zero-overlap links are allowed so disconnected patterns still yield one
/// tree. The root is a largest clique, ties going to the lowest first vertex.
pub fn clique_tree(cliques: &[Clique]) -> Result<CliqueTree> {
    let p = cliques.len();
    if p == 0 {
        return Err(Error::InvalidCliqueTree("no cliques".into()));
    }
    let mut links = Vec::with_capacity(p * (p - 1) / 2);
    for a in 0..p {
        for b in a + 1..p {
            let w = cliques[a].intersection(&cliques[b]).len();
            if w == cliques[a].len() || w == cliques[b].len() {
                return Err(Error::InvalidCliqueTree(format!(
                    "clique {a} and clique {b} are nested"
                )));
            }
            links.push((w, a, b));
        }
    }
    links.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut uf: Vec<usize> = (0..p).collect();
    fn find(uf: &mut [usize], mut x: usize) -> usize {
        while uf[x] != x {
            uf[x] = uf[uf[x]];
            x = uf[x];
        }
        x
    }
    let mut tree_adj = vec![Vec::new(); p];
    for &(_, a, b) in &links {
        let (ra, rb) = (find(&mut uf, a), find(&mut uf, b));
        if ra != rb {
            uf[ra] = rb;
            tree_adj[a].push(b);
            tree_adj[b].push(a);
        }
    }

    let root = (0..p)
        .min_by_key(|&k| (std::cmp::Reverse(cliques[k].len()), cliques[k].vertices()[0], k))
        .expect("p > 0");
    let mut parent = vec![None; p];
    let mut seen = vec![false; p];
    let mut bfs = Vec::with_capacity(p);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(k) = queue.pop_front() {
        bfs.push(k);
        let mut children = tree_adj[k].clone();
        children.sort_unstable();
        for c in children {
            if !seen[c] {
                seen[c] = true;
                parent[c] = Some(k);
                queue.push_back(c);
            }
        }
    }
    let separators = (0..p)
        .map(|k| parent[k].map_or_else(Vec::new, |q| cliques[k].intersection(&cliques[q])))
        .collect();
    let tree = CliqueTree {
        cliques: cliques.to_vec(),
        parent,
        separators,
        root,
        bfs,
    };
    if !tree.has_running_intersection() {
        return Err(Error::InvalidCliqueTree(
            "running-intersection property fails; cliques are not from a chordal graph".into(),
        ));
    }
    Ok(tree)
}

/// Chordal extension, maximal cliques and clique tree in one call.
pub fn decompose_graph(g: &Graph) -> (Graph, CliqueTree) {
    let ext = chordal_extension(g);
    let order = perfect_elimination_order(&ext).expect("extension is chordal");
    let cliques = maximal_cliques(&ext, &order).expect("order is a PEO");
    let tree = clique_tree(&cliques).expect("cliques of a chordal graph form a clique tree");
    (ext, tree)
}
