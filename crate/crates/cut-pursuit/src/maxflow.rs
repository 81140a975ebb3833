//! Max-flow / min-cut on directed networks with `f64` capacities, including
//! `+inf` arcs. Dinic's algorithm: repeated BFS level graphs and blocking
//! flows, `O(V^2 E)` worst case and far better on the shallow networks built
//! by the direction search.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("flow value is unbounded: augmenting path of infinite capacity")]
    Unbounded,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    to: usize,
    cap: f64,
}

/// Directed flow network. Arcs are stored with their reverse mates at paired
/// indices `2i` and `2i + 1`.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    head: Vec<Vec<usize>>, // arc indices leaving each node
    source: usize,
    sink: usize,
}

impl FlowNetwork {
    pub fn new(node_count: usize, source: usize, sink: usize) -> Self {
        assert!(source < node_count && sink < node_count && source != sink);
        FlowNetwork {
            arcs: Vec::new(),
            head: vec![Vec::new(); node_count],
            source,
            sink,
        }
    }

    pub fn node_count(&self) -> usize {
        self.head.len()
    }

    /// Adds a forward arc of capacity `cap` (nonnegative, possibly `+inf`)
    /// and its zero-capacity reverse mate.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64) {
        assert!(!cap.is_nan() && cap >= 0.0, "arc capacity must be >= 0, got {cap}");
        assert!(from < self.head.len() && to < self.head.len() && from != to);
        let i = self.arcs.len();
        self.arcs.push(Arc { to, cap });
        self.arcs.push(Arc { to: from, cap: 0.0 });
        self.head[from].push(i);
        self.head[to].push(i + 1);
    }

    /// Adds a symmetric pair: capacity `cap` in both directions.
    pub fn add_symmetric(&mut self, a: usize, b: usize, cap: f64) {
        assert!(!cap.is_nan() && cap >= 0.0);
        assert!(a < self.head.len() && b < self.head.len() && a != b);
        let i = self.arcs.len();
        self.arcs.push(Arc { to: b, cap });
        self.arcs.push(Arc { to: a, cap });
        self.head[a].push(i);
        self.head[b].push(i + 1);
    }

    /// Total capacity of the arcs crossing from the `true` side to the
    /// `false` side of a labeling. Reads the current capacities, so score
    /// cuts before running the flow.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        assert_eq!(source_side.len(), self.node_count());
        let mut total = 0.0;
        for i in 0..self.arcs.len() {
            let tail = self.arcs[i ^ 1].to;
            let head = self.arcs[i].to;
            if source_side[tail] && !source_side[head] {
                total += self.arcs[i].cap;
            }
        }
        total
    }

    /// Runs Dinic's algorithm to completion. Returns the max-flow value and
    /// the source-side label of every node in the induced min cut (`true`
    /// means residual-reachable from the source).
    ///
    /// Errors with [`FlowError::Unbounded`] if an augmenting path consists
    /// entirely of infinite residual capacities.
    pub fn max_flow_min_cut(&mut self) -> Result<(f64, Vec<bool>), FlowError> {
        // Residual positivity floor: capacities that fall below this after a
        // subtraction are treated as saturated, which keeps BFS from chasing
        // float dust.
        let max_finite = self
            .arcs
            .iter()
            .map(|a| a.cap)
            .filter(|c| c.is_finite())
            .fold(0.0f64, f64::max);
        let eps = 1e-12 * (1.0 + max_finite);

        let n = self.node_count();
        let mut total = 0.0f64;
        let mut level = vec![usize::MAX; n];
        let mut queue = Vec::with_capacity(n);
        loop {
            // BFS level graph over residual arcs.
            level.fill(usize::MAX);
            level[self.source] = 0;
            queue.clear();
            queue.push(self.source);
            let mut qi = 0;
            while qi < queue.len() {
                let v = queue[qi];
                qi += 1;
                for &ai in &self.head[v] {
                    let a = self.arcs[ai];
                    if a.cap > eps && level[a.to] == usize::MAX {
                        level[a.to] = level[v] + 1;
                        queue.push(a.to);
                    }
                }
            }
            if level[self.sink] == usize::MAX {
                break;
            }
            // Blocking flow with the usual current-arc pointers.
            let mut it = vec![0usize; n];
            loop {
                let pushed = self.push_dfs(self.source, f64::INFINITY, &level, &mut it, eps)?;
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
        let cut: Vec<bool> = level.iter().map(|&l| l != usize::MAX).collect();
        Ok((total, cut))
    }

    fn push_dfs(
        &mut self,
        v: usize,
        limit: f64,
        level: &[usize],
        it: &mut [usize],
        eps: f64,
    ) -> Result<f64, FlowError> {
        if v == self.sink {
            if limit.is_infinite() {
                return Err(FlowError::Unbounded);
            }
            return Ok(limit);
        }
        while it[v] < self.head[v].len() {
            let ai = self.head[v][it[v]];
            let Arc { to, cap } = self.arcs[ai];
            if cap > eps && level[to] == level[v] + 1 {
                let pushed = self.push_dfs(to, limit.min(cap), level, it, eps)?;
                if pushed > 0.0 {
                    if self.arcs[ai].cap.is_finite() {
                        self.arcs[ai].cap -= pushed;
                        if self.arcs[ai].cap < eps {
                            self.arcs[ai].cap = 0.0;
                        }
                    }
                    let mate = ai ^ 1;
                    if self.arcs[mate].cap.is_finite() {
                        self.arcs[mate].cap += pushed;
                    }
                    return Ok(pushed);
                }
            }
            it[v] += 1;
        }
        Ok(0.0)
    }
}
