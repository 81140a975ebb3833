//! Weighted undirected graphs, vertex partitions, and the reduced graph a
//! partition induces.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("vertex {v} out of range for graph with {n} vertices")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {v}")]
    SelfLoop { v: usize },
    #[error("duplicate edge between {u} and {v}")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge ({u},{v}) has invalid weight {w} (must be finite and >= 0)")]
    BadWeight { u: usize, v: usize, w: f64 },
    #[error("components do not partition the vertex set (vertex {v})")]
    NotAPartition { v: usize },
    #[error("component {index} is not connected in the graph")]
    DisconnectedComponent { index: usize },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Undirected edge with a strictly positive weight. Endpoints are stored with
/// `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Simple undirected graph with positive edge weights. At most one edge per
/// vertex pair; zero-weight edges are dropped at construction.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    /// Per vertex: (edge index, neighbor).
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl WeightedGraph {
    pub fn new(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self, GraphError> {
        let mut kept: Vec<Edge> = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::new();
        for &(u, v, w) in edges {
            for e in [u, v] {
                if e >= vertex_count {
                    return Err(GraphError::VertexOutOfRange {
                        v: e,
                        n: vertex_count,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop { v: u });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::BadWeight { u, v, w });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if !seen.insert((a, b)) {
                return Err(GraphError::DuplicateEdge { u: a, v: b });
            }
            if w == 0.0 {
                continue;
            }
            kept.push(Edge { u: a, v: b, w });
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (i, e) in kept.iter().enumerate() {
            adjacency[e.u].push((i, e.v));
            adjacency[e.v].push((i, e.u));
        }
        Ok(WeightedGraph {
            vertex_count,
            edges: kept,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Incident edges of `v` as (edge index, neighbor) pairs.
    pub fn adjacency(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }
}

/// Maximal groups of vertices from `subset` that are mutually reachable
/// through edges whose endpoints both lie in `subset` and satisfy `same`.
///
/// Components are ordered by their smallest vertex; vertices within a
/// component are sorted ascending. Deterministic for fixed inputs.
pub fn connected_components(
    graph: &WeightedGraph,
    subset: &[usize],
    mut same: impl FnMut(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let n = graph.vertex_count();
    let mut in_subset = vec![false; n];
    for &v in subset {
        in_subset[v] = true;
    }
    let mut visited = vec![false; n];
    let mut out = Vec::new();
    let mut order: Vec<usize> = subset.to_vec();
    order.sort_unstable();
    for &start in &order {
        if visited[start] {
            continue;
        }
        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        let mut comp = vec![start];
        while let Some(u) = queue.pop_front() {
            for &(_, nb) in graph.adjacency(u) {
                if in_subset[nb] && !visited[nb] && same(u, nb) {
                    visited[nb] = true;
                    comp.push(nb);
                    queue.push_back(nb);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Partition of the vertex set into connected components.
#[derive(Debug, Clone)]
pub struct Partition {
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
}

impl Partition {
    /// Validates that `components` cover every vertex exactly once and that
    /// each component is connected in `graph`.
    pub fn from_components(
        graph: &WeightedGraph,
        components: Vec<Vec<usize>>,
    ) -> Result<Self, GraphError> {
        let n = graph.vertex_count();
        let mut component_of = vec![usize::MAX; n];
        for (ci, comp) in components.iter().enumerate() {
            for &v in comp {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { v, n });
                }
                if component_of[v] != usize::MAX {
                    return Err(GraphError::NotAPartition { v });
                }
                component_of[v] = ci;
            }
        }
        if let Some(v) = component_of.iter().position(|&c| c == usize::MAX) {
            return Err(GraphError::NotAPartition { v });
        }
        for (index, comp) in components.iter().enumerate() {
            if connected_components(graph, comp, |_, _| true).len() != 1 {
                return Err(GraphError::DisconnectedComponent { index });
            }
        }
        Ok(Self::from_parts(components))
    }

    /// Coarsest valid partition: the connected components of the graph. For a
    /// connected graph this is the single component {V}.
    pub fn coarsest(graph: &WeightedGraph) -> Self {
        let all: Vec<usize> = (0..graph.vertex_count()).collect();
        Self::from_parts(connected_components(graph, &all, |_, _| true))
    }

    /// One component per vertex.
    pub fn singletons(vertex_count: usize) -> Self {
        Self::from_parts((0..vertex_count).map(|v| vec![v]).collect())
    }

    /// Components are normalized: ordered by smallest vertex, sorted within.
    fn from_parts(mut components: Vec<Vec<usize>>) -> Self {
        for comp in &mut components {
            comp.sort_unstable();
        }
        components.sort_by_key(|c| c[0]);
        let n = components.iter().map(Vec::len).sum();
        let mut component_of = vec![0; n];
        for (ci, comp) in components.iter().enumerate() {
            for &v in comp {
                component_of[v] = ci;
            }
        }
        Partition {
            components,
            component_of,
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    /// Component index of every vertex.
    pub fn component_of_slice(&self) -> &[usize] {
        &self.component_of
    }

    pub fn vertex_count(&self) -> usize {
        self.component_of.len()
    }
}

/// Edge of the reduced graph: adjacent component pair `a < b` with the total
/// weight of original edges crossing between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Graph induced on partition components: one node per component, one edge
/// per adjacent component pair.
#[derive(Debug, Clone)]
pub struct ReducedGraph {
    pub component_count: usize,
    pub edges: Vec<ReducedEdge>,
}

impl ReducedGraph {
    /// Total crossing weight incident to each component.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.component_count];
        for e in &self.edges {
            deg[e.a] += e.weight;
            deg[e.b] += e.weight;
        }
        deg
    }
}

/// Builds the reduced graph of `partition`: edges are component pairs joined
/// by at least one original edge, weighted by the sum of crossing weights.
/// Edges come out sorted by (a, b).
pub fn build_reduced_graph(graph: &WeightedGraph, partition: &Partition) -> ReducedGraph {
    let mut acc: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for e in graph.edges() {
        let (ca, cb) = (partition.component_of(e.u), partition.component_of(e.v));
        if ca != cb {
            let key = if ca < cb { (ca, cb) } else { (cb, ca) };
            *acc.entry(key).or_insert(0.0) += e.w;
        }
    }
    ReducedGraph {
        component_count: partition.len(),
        edges: acc
            .into_iter()
            .map(|((a, b), weight)| ReducedEdge { a, b, weight })
            .collect(),
    }
}

/// Splits every component of `partition` into the maximal connected pieces on
/// which `values` is constant within `eps` (strided: `values` holds `stride`
/// entries per vertex, compared in sup norm).
fn refine_by(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    stride: usize,
    eps: f64,
) -> Partition {
    debug_assert_eq!(values.len(), graph.vertex_count() * stride);
    let same = |u: usize, v: usize| {
        (0..stride).all(|k| (values[u * stride + k] - values[v * stride + k]).abs() <= eps)
    };
    let mut pieces = Vec::new();
    for comp in partition.components() {
        pieces.extend(connected_components(graph, comp, same));
    }
    Partition::from_parts(pieces)
}

/// Refines `partition` along the scalar per-vertex `values`: each component
/// splits into maximal connected pieces with equal values (within `eps`).
/// The result always refines the input; the component count can only grow.
pub fn refine_partition(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    eps: f64,
) -> Partition {
    refine_by(graph, partition, values, 1, eps)
}

/// Vector-valued refinement: `values` has `stride` entries per vertex and
/// equality is in the sup norm.
pub fn refine_partition_vec(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    stride: usize,
    eps: f64,
) -> Partition {
    refine_by(graph, partition, values, stride, eps)
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

fn merge_by(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    stride: usize,
    merge_eps: f64,
) -> (Partition, Vec<f64>) {
    debug_assert_eq!(values.len(), partition.len() * stride);
    if merge_eps <= 0.0 {
        return (partition.clone(), values.to_vec());
    }
    let reduced = build_reduced_graph(graph, partition);
    let mut uf = UnionFind::new(partition.len());
    for e in &reduced.edges {
        let close = (0..stride)
            .all(|k| (values[e.a * stride + k] - values[e.b * stride + k]).abs() <= merge_eps);
        if close {
            uf.union(e.a, e.b);
        }
    }
    // Group original components by union-find root, keyed by the smallest
    // member index for determinism.
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    let mut roots = vec![0; partition.len()];
    for ci in 0..partition.len() {
        roots[ci] = uf.find(ci);
    }
    let mut cluster_key = vec![usize::MAX; partition.len()];
    for ci in 0..partition.len() {
        let r = roots[ci];
        cluster_key[r] = cluster_key[r].min(ci);
    }
    for ci in 0..partition.len() {
        clusters.entry(cluster_key[roots[ci]]).or_default().push(ci);
    }
    let mut new_components = Vec::with_capacity(clusters.len());
    let mut new_values = Vec::with_capacity(clusters.len() * stride);
    for (_, members) in clusters {
        let mut verts = Vec::new();
        let mut total = 0usize;
        let mut mean = vec![0.0; stride];
        for &ci in &members {
            let comp = &partition.components()[ci];
            verts.extend_from_slice(comp);
            total += comp.len();
            for k in 0..stride {
                mean[k] += comp.len() as f64 * values[ci * stride + k];
            }
        }
        for m in &mut mean {
            *m /= total as f64;
        }
        new_components.push(verts);
        new_values.extend_from_slice(&mean);
    }
    // Normalization reorders components by smallest vertex; values must follow.
    let order: Vec<usize> = {
        let mut idx: Vec<usize> = (0..new_components.len()).collect();
        idx.sort_by_key(|&i| *new_components[i].iter().min().unwrap());
        idx
    };
    let components: Vec<Vec<usize>> = order.iter().map(|&i| new_components[i].clone()).collect();
    let mut ordered_values = Vec::with_capacity(new_values.len());
    for &i in &order {
        ordered_values.extend_from_slice(&new_values[i * stride..(i + 1) * stride]);
    }
    (Partition::from_parts(components), ordered_values)
}

/// Merges adjacent components whose per-component `values` differ by at most
/// `merge_eps` (transitively, through chains of close adjacent pairs). The
/// merged value is the vertex-count-weighted mean of the constituents.
/// `merge_eps <= 0` disables merging.
pub fn merge_close_components(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    merge_eps: f64,
) -> (Partition, Vec<f64>) {
    merge_by(graph, partition, values, 1, merge_eps)
}

/// Vector-valued merge: `values` has `stride` entries per component and
/// closeness is in the sup norm.
pub fn merge_close_components_vec(
    graph: &WeightedGraph,
    partition: &Partition,
    values: &[f64],
    stride: usize,
    merge_eps: f64,
) -> (Partition, Vec<f64>) {
    merge_by(graph, partition, values, stride, merge_eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> WeightedGraph {
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        WeightedGraph::new(n, &edges).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            WeightedGraph::new(2, &[(0, 2, 1.0)]),
            Err(GraphError::VertexOutOfRange { v: 2, n: 2 })
        ));
        assert!(matches!(
            WeightedGraph::new(2, &[(1, 1, 1.0)]),
            Err(GraphError::SelfLoop { v: 1 })
        ));
        assert!(matches!(
            WeightedGraph::new(3, &[(0, 1, 1.0), (1, 0, 2.0)]),
            Err(GraphError::DuplicateEdge { u: 0, v: 1 })
        ));
        assert!(matches!(
            WeightedGraph::new(2, &[(0, 1, -1.0)]),
            Err(GraphError::BadWeight { .. })
        ));
        // Zero-weight edges are dropped, not errors.
        let g = WeightedGraph::new(3, &[(0, 1, 0.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.edges()[0], Edge { u: 1, v: 2, w: 2.0 });
    }

    #[test]
    fn components_respect_subset_and_predicate() {
        let g = chain(6);
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(connected_components(&g, &all, |_, _| true).len(), 1);
        // Cutting the middle edge by predicate splits the chain.
        let comps = connected_components(&g, &all, |u, v| !(u.min(v) == 2 && u.max(v) == 3));
        assert_eq!(comps, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        // Subset restriction: missing vertex 2 separates 0-1 from 3-5.
        let comps = connected_components(&g, &[0, 1, 3, 4, 5], |_, _| true);
        assert_eq!(comps, vec![vec![0, 1], vec![3, 4, 5]]);
    }

    #[test]
    fn partition_validation() {
        let g = chain(4);
        assert!(Partition::from_components(&g, vec![vec![0, 1], vec![2, 3]]).is_ok());
        // {0, 2} is not connected in a chain.
        assert!(matches!(
            Partition::from_components(&g, vec![vec![0, 2], vec![1, 3]]),
            Err(GraphError::DisconnectedComponent { .. })
        ));
        assert!(matches!(
            Partition::from_components(&g, vec![vec![0, 1], vec![1, 2, 3]]),
            Err(GraphError::NotAPartition { v: 1 })
        ));
        assert!(matches!(
            Partition::from_components(&g, vec![vec![0, 1], vec![3]]),
            Err(GraphError::NotAPartition { v: 2 })
        ));
    }

    #[test]
    fn coarsest_partition_matches_graph_components() {
        let g = WeightedGraph::new(5, &[(0, 1, 1.0), (3, 4, 1.0)]).unwrap();
        let p = Partition::coarsest(&g);
        assert_eq!(p.components(), &[vec![0, 1], vec![2], vec![3, 4]]);
    }

    #[test]
    fn reduced_graph_accumulates_crossing_weights() {
        // Two components joined by two parallel paths of edges.
        let g = WeightedGraph::new(
            4,
            &[(0, 1, 1.0), (2, 3, 1.0), (0, 2, 0.5), (1, 3, 0.25)],
        )
        .unwrap();
        let p = Partition::from_components(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let r = build_reduced_graph(&g, &p);
        assert_eq!(r.edges.len(), 1);
        assert_eq!(r.edges[0].a, 0);
        assert_eq!(r.edges[0].b, 1);
        assert!((r.edges[0].weight - 0.75).abs() < 1e-15);
        assert_eq!(r.weighted_degrees(), vec![0.75, 0.75]);
    }

    #[test]
    fn refine_splits_on_value_jumps() {
        let g = chain(6);
        let p = Partition::coarsest(&g);
        let d = [1.0, 1.0, 0.0, 0.0, -1.0, -1.0];
        let refined = refine_partition(&g, &p, &d, 0.0);
        assert_eq!(
            refined.components(),
            &[vec![0, 1], vec![2, 3], vec![4, 5]]
        );
        // Refining by a constant vector is the identity.
        let same = refine_partition(&g, &refined, &[2.0; 6], 0.0);
        assert_eq!(same.components(), refined.components());
    }

    #[test]
    fn refine_result_refines_input() {
        let g = chain(6);
        let p = Partition::from_components(&g, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let d = [0.0, 7.0, 7.0, 7.0, 7.0, 7.0];
        let refined = refine_partition(&g, &p, &d, 0.0);
        // Vertex 3..5 share a value with 1..2 but sit in another input
        // component, so they stay separate.
        assert_eq!(
            refined.components(),
            &[vec![0], vec![1, 2], vec![3, 4, 5]]
        );
        for comp in refined.components() {
            let parent = p.component_of(comp[0]);
            assert!(comp.iter().all(|&v| p.component_of(v) == parent));
        }
    }

    #[test]
    fn merge_is_transitive_and_size_weighted() {
        let g = chain(6);
        let p = Partition::from_components(
            &g,
            vec![vec![0], vec![1, 2], vec![3, 4], vec![5]],
        )
        .unwrap();
        // Values 0.0, 0.05, 0.1 chain within eps=0.06; 9.0 stays apart.
        let values = [0.0, 0.05, 0.1, 9.0];
        let (merged, new_values) = merge_close_components(&g, &p, &values, 0.06);
        assert_eq!(merged.components(), &[vec![0, 1, 2, 3, 4], vec![5]]);
        let mean = (1.0 * 0.0 + 2.0 * 0.05 + 2.0 * 0.1) / 5.0;
        assert!((new_values[0] - mean).abs() < 1e-15);
        assert_eq!(new_values[1], 9.0);
    }

    #[test]
    fn merge_eps_zero_disables_merging() {
        let g = chain(4);
        let p = Partition::from_components(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let values = [1.0, 1.0];
        let (merged, vals) = merge_close_components(&g, &p, &values, 0.0);
        assert_eq!(merged.len(), 2);
        assert_eq!(vals, values);
    }

    #[test]
    fn merge_only_joins_adjacent_components() {
        // 0-1 and 4-5 have equal values but no connecting edge.
        let g = WeightedGraph::new(6, &[(0, 1, 1.0), (2, 3, 1.0), (4, 5, 1.0), (1, 2, 1.0), (3, 4, 1.0)])
            .unwrap();
        let p = Partition::from_components(&g, vec![vec![0, 1], vec![2, 3], vec![4, 5]]).unwrap();
        let values = [1.0, 50.0, 1.0];
        let (merged, _) = merge_close_components(&g, &p, &values, 0.1);
        assert_eq!(merged.len(), 3);
    }
}
