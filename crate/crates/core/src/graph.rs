//! Graph plumbing shared by the synchronization stages: union-find, signed
//! incidence lists, connected components and Kruskal spanning forests.

/// Disjoint sets with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Returns the new root if the sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn set_size(&mut self, v: usize) -> usize {
        let r = self.find(v);
        self.size[r]
    }
}

/// Incidence of one node: the edge ordinal, the node at the other end, and
/// whether this node is the head of the edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Incidence {
    pub edge: usize,
    pub other: usize,
    pub is_head: bool,
}

/// Directed edge list `tail -> head` with CSR incidence. Edge `c` models
/// `x[head] - x[tail] ≈ target[c]`.
#[derive(Debug, Clone)]
pub struct SignedGraph {
    n: usize,
    ends: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    incidence: Vec<Incidence>,
}

impl SignedGraph {
    /// `ends[c] = (tail, head)`.
    pub fn new(n: usize, ends: Vec<(usize, usize)>) -> Self {
        let mut deg = vec![0usize; n + 1];
        for &(t, h) in &ends {
            deg[t + 1] += 1;
            deg[h + 1] += 1;
        }
        for v in 0..n {
            deg[v + 1] += deg[v];
        }
        let offsets = deg;
        let mut fill = offsets.clone();
        let mut incidence = vec![
            Incidence {
                edge: 0,
                other: 0,
                is_head: false
            };
            offsets[n]
        ];
        for (c, &(t, h)) in ends.iter().enumerate() {
            incidence[fill[t]] = Incidence { edge: c, other: h, is_head: false };
            fill[t] += 1;
            incidence[fill[h]] = Incidence { edge: c, other: t, is_head: true };
            fill[h] += 1;
        }
        Self { n, ends, offsets, incidence }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    /// CSR offsets: node `v` owns incidences `offsets[v]..offsets[v + 1]`.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn incident(&self, v: usize) -> &[Incidence] {
        &self.incidence[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn components(&self) -> Components {
        Components::from_edges(self.n, self.ends.iter().copied())
    }
}

/// Connected-component labelling; labels are ordered by smallest member.
#[derive(Debug, Clone)]
pub struct Components {
    pub label: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut uf = UnionFind::new(n);
        for (a, b) in edges {
            uf.union(a, b);
        }
        let mut root_label = vec![usize::MAX; n];
        let mut label = vec![0; n];
        let mut sizes = Vec::new();
        for v in 0..n {
            let r = uf.find(v);
            if root_label[r] == usize::MAX {
                root_label[r] = sizes.len();
                sizes.push(0);
            }
            label[v] = root_label[r];
            sizes[label[v]] += 1;
        }
        Self { label, sizes }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Label of the largest component, ties to the smaller label.
    pub fn largest(&self) -> Option<usize> {
        (0..self.sizes.len()).max_by(|&a, &b| self.sizes[a].cmp(&self.sizes[b]).then(b.cmp(&a)))
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.sizes.len()];
        for (v, &l) in self.label.iter().enumerate() {
            out[l].push(v);
        }
        out
    }

    /// Subtracts each component's mean.
    pub fn center<T: crate::Real>(&self, x: &mut [T]) {
        let mut sum = vec![T::zero(); self.sizes.len()];
        for (v, &l) in self.label.iter().enumerate() {
            sum[l] = sum[l] + x[v];
        }
        for (l, s) in sum.iter_mut().enumerate() {
            *s = *s / T::from_count(self.sizes[l]);
        }
        for (v, &l) in self.label.iter().enumerate() {
            x[v] = x[v] - sum[l];
        }
    }
}

/// Kruskal spanning forest over edges visited in `order`; returns the chosen
/// edge ordinals. Callers sort `order` by cost with their tie-break applied.
pub fn spanning_forest(graph: &SignedGraph, order: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut uf = UnionFind::new(graph.node_count());
    let mut tree = Vec::new();
    for c in order {
        let (t, h) = graph.ends()[c];
        if uf.union(t, h).is_some() {
            tree.push(c);
            if tree.len() + 1 == graph.node_count() {
                break;
            }
        }
    }
    tree
}

/// Propagates `x[head] = x[tail] + target` along a forest. The smallest node of
/// every tree is its root and keeps `root_value`.
pub fn propagate_along_forest<V: Copy>(
    graph: &SignedGraph,
    tree: &[usize],
    root_value: V,
    mut step: impl FnMut(V, usize, bool) -> V,
) -> Vec<V> {
    let n = graph.node_count();
    let mut tree_adj: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];
    for &c in tree {
        let (t, h) = graph.ends()[c];
        tree_adj[t].push((h, c, true));
        tree_adj[h].push((t, c, false));
    }
    let mut value: Vec<Option<V>> = vec![None; n];
    let mut stack = Vec::new();
    for root in 0..n {
        if value[root].is_some() {
            continue;
        }
        value[root] = Some(root_value);
        stack.push(root);
        while let Some(v) = stack.pop() {
            let base = value[v].unwrap();
            for &(w, c, forward) in &tree_adj[v] {
                if value[w].is_none() {
                    // forward: w is the head, so x[w] = x[v] + target.
                    value[w] = Some(step(base, c, forward));
                    stack.push(w);
                }
            }
        }
    }
    value.into_iter().map(Option::unwrap).collect()
}
