//! Steepest ternary descent directions.
//!
//! At a point `x` the best direction `d` in `{-1, 0, +1}^V` minimizes
//!
//! ```text
//!   F'(x, d) = sum_{d_v > 0} delta_plus(v) d_v
//!            + sum_{d_v < 0} delta_minus(v) d_v
//!            + sum_{equal edges} w |d_u - d_v|
//! ```
//!
//! Three routes are provided: a two-stage flow network whose min cut encodes
//! the ternary minimizer directly, a cheaper pair of binary cuts whose
//! combination matches the ternary minimum whenever every vertex satisfies
//! `delta_minus <= delta_plus` (true for convex per-vertex terms), and an
//! exhaustive enumeration used as a reference on small instances.

use crate::extreal::{self, ExtendedReal};
use crate::functional::{dir_deriv_with, equal_edges, vertex_deltas, ProblemSpec, VertexDeltas};
use crate::graph::{Edge, WeightedGraph};
use crate::maxflow::FlowNetwork;

/// A direction in `{-1, 0, +1}^V` together with its directional derivative.
#[derive(Debug, Clone)]
pub struct TernaryDirection {
    pub signs: Vec<i8>,
    pub value: ExtendedReal,
}

impl TernaryDirection {
    pub fn as_vec(&self) -> Vec<f64> {
        self.signs.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.signs.iter().all(|&s| s == 0)
    }
}

/// Pseudo-boolean energy `const + sum_v u_v(x_v) + sum_(u,v) theta_uv(x_u, x_v)`
/// over labels in `{0, 1}`, minimized by a single min cut. Pairwise terms
/// must be submodular: `theta(0,0) + theta(1,1) <= theta(0,1) + theta(1,0)`.
///
/// Label 1 corresponds to the source side of the cut. Unary label-1 costs may
/// be `+inf` (forbidding the label); everything else must be finite.
#[derive(Debug, Clone)]
pub struct BinaryEnergy {
    constant: f64,
    cost1: Vec<ExtendedReal>,
    // (from, to, beta): pays beta when from has label 1 and to has label 0.
    pair_arcs: Vec<(usize, usize, f64)>,
}

impl BinaryEnergy {
    pub fn new(n: usize) -> Self {
        BinaryEnergy {
            constant: 0.0,
            cost1: vec![extreal::ZERO; n],
            pair_arcs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cost1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost1.is_empty()
    }

    /// Adds a per-vertex term with label costs `(cost0, cost1)`.
    pub fn add_unary(&mut self, v: usize, cost0: f64, cost1: ExtendedReal) {
        assert!(cost0.is_finite(), "label-0 cost must be finite");
        assert!(
            cost1 > extreal::NEG_INF,
            "label-1 cost must not be -inf (vertex {v})"
        );
        self.constant += cost0;
        self.cost1[v] += cost1 + ExtendedReal::finite(-cost0);
    }

    /// Adds a pairwise term with the four label costs. Panics unless the
    /// term is submodular up to rounding noise.
    pub fn add_pairwise(&mut self, u: usize, v: usize, t00: f64, t01: f64, t10: f64, t11: f64) {
        assert!(u != v && u < self.cost1.len() && v < self.cost1.len());
        for t in [t00, t01, t10, t11] {
            assert!(t.is_finite(), "pairwise costs must be finite");
        }
        let beta = t01 + t10 - t00 - t11;
        let scale = 1.0 + t00.abs() + t01.abs() + t10.abs() + t11.abs();
        assert!(
            beta >= -1e-9 * scale,
            "pairwise term is not submodular: beta = {beta}"
        );
        self.constant += t00;
        self.cost1[u] += ExtendedReal::finite(t10 - t00);
        self.cost1[v] += ExtendedReal::finite(t11 - t10);
        if beta > 0.0 {
            self.pair_arcs.push((v, u, beta));
        }
    }

    /// Energy of a given labeling, for acceptance checks and tests.
    pub fn energy(&self, labels: &[bool]) -> ExtendedReal {
        assert_eq!(labels.len(), self.cost1.len());
        let mut total = ExtendedReal::finite(self.constant);
        for (v, &on) in labels.iter().enumerate() {
            if on {
                total += self.cost1[v];
            }
        }
        let mut pair = 0.0;
        for &(from, to, beta) in &self.pair_arcs {
            if labels[from] && !labels[to] {
                pair += beta;
            }
        }
        total + ExtendedReal::finite(pair)
    }

    /// Minimizes the energy by max flow. Returns the labeling and its energy.
    pub fn minimize(&self) -> (Vec<bool>, f64) {
        let n = self.cost1.len();
        let (source, sink) = (n, n + 1);
        let mut net = FlowNetwork::new(n + 2, source, sink);
        let mut offset = self.constant;
        for (v, c1) in self.cost1.iter().enumerate() {
            if !c1.is_finite() {
                net.add_arc(v, sink, f64::INFINITY);
            } else if c1.value() >= 0.0 {
                net.add_arc(v, sink, c1.value());
            } else {
                offset += c1.value();
                net.add_arc(source, v, -c1.value());
            }
        }
        for &(from, to, beta) in &self.pair_arcs {
            net.add_arc(from, to, beta);
        }
        // Every source arc is finite, so the flow is bounded.
        let (flow, cut) = net.max_flow_min_cut().expect("bounded by construction");
        let labels: Vec<bool> = cut[..n].to_vec();
        (labels, flow + offset)
    }
}

/// Capacities `(source -> v1, v1 -> v2, v2 -> sink)` of one vertex column in
/// the two-stage network. The slack `m = max(0, delta_minus, -delta_plus)`
/// is always finite and at least one of the three capacities is zero.
pub fn ternary_caps(delta: &VertexDeltas) -> (f64, f64, f64) {
    let dp = delta.plus.value();
    let dm = delta.minus.value();
    let m = 0f64.max(dm).max(-dp);
    debug_assert!(m.is_finite());
    ((m - dm).max(0.0), m, (dp + m).max(0.0))
}

/// Two-stage flow network whose s-t min cut encodes the steepest ternary
/// direction. Vertex `v` owns nodes `v` (stage 1) and `n + v` (stage 2);
/// source and sink are `2n` and `2n + 1`. Every equal edge contributes
/// symmetric arcs of capacity `w` in both stages. For any cut that keeps
/// stage 1 on the source side wherever stage 2 is, the cut value equals
/// `F'(x, d) + offset` for the decoded direction.
pub struct TernaryNetwork {
    pub net: FlowNetwork,
    /// Sum of the per-vertex slacks `m_v`.
    pub offset: f64,
}

pub fn build_ternary_network(
    deltas: &[VertexDeltas],
    edges: &[Edge],
    equal: &[bool],
) -> TernaryNetwork {
    let n = deltas.len();
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut net = FlowNetwork::new(2 * n + 2, source, sink);
    let mut offset = 0.0;
    for (v, delta) in deltas.iter().enumerate() {
        let (cap_in, cap_mid, cap_out) = ternary_caps(delta);
        offset += cap_mid;
        net.add_arc(source, v, cap_in);
        net.add_arc(v, n + v, cap_mid);
        net.add_arc(n + v, sink, cap_out);
    }
    for (e, eq) in edges.iter().zip(equal) {
        if *eq {
            net.add_symmetric(e.u, e.v, e.w);
            net.add_symmetric(n + e.u, n + e.v, e.w);
        }
    }
    TernaryNetwork { net, offset }
}

/// Decodes a min-cut labeling of the two-stage network: source-side stage 2
/// means `+1`, sink-side stage 1 means `-1`, the split state means `0`. A
/// column cut the anti-monotone way (stage 1 on the sink side, stage 2 on
/// the source side) pays both outer arcs; re-reading it as `+1` never
/// increases the cut value, so that is what the decoder does.
fn decode_ternary_cut(cut: &[bool], n: usize) -> Vec<i8> {
    (0..n)
        .map(|v| {
            if cut[n + v] {
                1
            } else if cut[v] {
                0
            } else {
                -1
            }
        })
        .collect()
}

/// Steepest ternary direction by a single min cut on the two-stage network.
pub fn steepest_ternary_direction(spec: &ProblemSpec, x: &[f64], eps_eq: f64) -> TernaryDirection {
    let deltas = vertex_deltas(spec, x, eps_eq);
    let equal = equal_edges(&spec.graph, x, eps_eq);
    let mut tn = build_ternary_network(&deltas, spec.graph.edges(), &equal);
    // Bounded: every source-to-sink path crosses a finite middle or rim arc.
    let (_flow, cut) = tn.net.max_flow_min_cut().expect("bounded by construction");
    let signs = decode_ternary_cut(&cut, deltas.len());
    let d: Vec<f64> = signs.iter().map(|&s| f64::from(s)).collect();
    let value = dir_deriv_with(spec, &deltas, &equal, &d);
    TernaryDirection { signs, value }
}

/// Steepest ternary direction as two independent binary cuts, one proposing
/// raises and one proposing drops, overlaps resolved toward the raise.
///
/// Matches the single ternary cut exactly when `delta_minus <= delta_plus`
/// at every vertex, which holds whenever the per-vertex terms are convex.
/// The overlap of the two cuts is then confined to exchange-neutral ties, so
/// dropping the overlap from the minus side changes neither minimum.
pub fn steepest_ternary_two_cuts(spec: &ProblemSpec, x: &[f64], eps_eq: f64) -> TernaryDirection {
    let deltas = vertex_deltas(spec, x, eps_eq);
    let equal = equal_edges(&spec.graph, x, eps_eq);
    let n = deltas.len();

    let mut plus = BinaryEnergy::new(n);
    let mut minus = BinaryEnergy::new(n);
    for (v, delta) in deltas.iter().enumerate() {
        plus.add_unary(v, 0.0, delta.plus);
        minus.add_unary(v, 0.0, -delta.minus);
    }
    for (e, eq) in spec.graph.edges().iter().zip(&equal) {
        if *eq {
            plus.add_pairwise(e.u, e.v, 0.0, e.w, e.w, 0.0);
            minus.add_pairwise(e.u, e.v, 0.0, e.w, e.w, 0.0);
        }
    }
    let (raise, _) = plus.minimize();
    let (drop, _) = minus.minimize();

    let signs: Vec<i8> = raise
        .iter()
        .zip(&drop)
        .map(|(&a, &b)| if a { 1 } else if b { -1 } else { 0 })
        .collect();
    let d: Vec<f64> = signs.iter().map(|&s| f64::from(s)).collect();
    let value = dir_deriv_with(spec, &deltas, &equal, &d);
    TernaryDirection { signs, value }
}

/// Steepest direction over `{-1, +1}^V` for points where the objective is
/// differentiable, i.e. every vertex has matching one-sided slopes. A single
/// binary cut with unary costs `-delta` / `+delta` and pairwise cost `2w`
/// between disagreeing endpoints of every equal-valued edge. Panics when
/// some vertex has distinct one-sided slopes; ternary methods handle that
/// case.
pub fn steepest_binary_direction(spec: &ProblemSpec, x: &[f64], eps_eq: f64) -> TernaryDirection {
    let deltas = vertex_deltas(spec, x, eps_eq);
    let equal = equal_edges(&spec.graph, x, eps_eq);
    let n = deltas.len();
    let mut energy = BinaryEnergy::new(n);
    for (v, delta) in deltas.iter().enumerate() {
        let (dp, dm) = (delta.plus.value(), delta.minus.value());
        assert!(
            dp.is_finite()
                && dm.is_finite()
                && (dp - dm).abs() <= 1e-9 * (1.0 + dp.abs() + dm.abs()),
            "vertex {v} has distinct one-sided slopes ({dm}, {dp}); \
             the binary direction needs a differentiable point"
        );
        energy.add_unary(v, -dp, ExtendedReal::finite(dp));
    }
    for (e, eq) in spec.graph.edges().iter().zip(&equal) {
        if *eq {
            energy.add_pairwise(e.u, e.v, 0.0, 2.0 * e.w, 2.0 * e.w, 0.0);
        }
    }
    let (raise, _) = energy.minimize();
    let signs: Vec<i8> = raise.iter().map(|&a| if a { 1 } else { -1 }).collect();
    let d: Vec<f64> = signs.iter().map(|&s| f64::from(s)).collect();
    let value = dir_deriv_with(spec, &deltas, &equal, &d);
    TernaryDirection { signs, value }
}

/// Reference minimizer: tries every direction in `alphabet^V` by recursive
/// enumeration with running partial sums, pruning branches whose coordinate
/// already has an infinite rate. Panics above `10^7` directions. Among ties
/// the first minimizer in alphabet order per vertex wins; when every
/// direction is infeasible the value is `+inf`.
pub fn exhaustive_direction_oracle(
    spec: &ProblemSpec,
    x: &[f64],
    alphabet: &[f64],
    eps_eq: f64,
) -> (Vec<f64>, ExtendedReal) {
    let n = spec.vertex_count();
    assert!(!alphabet.is_empty(), "alphabet must be nonempty");
    assert!(
        (alphabet.len() as f64).powi(n as i32) <= 1e7,
        "exhaustive direction search limited to 10^7 directions, got {}^{n}",
        alphabet.len()
    );
    let deltas = vertex_deltas(spec, x, eps_eq);
    let equal = equal_edges(&spec.graph, x, eps_eq);
    // Unary rates per unit step each way; +inf marks a forbidden branch.
    let up: Vec<f64> = deltas.iter().map(|d| d.plus.value()).collect();
    let down: Vec<f64> = deltas
        .iter()
        .map(|d| {
            if d.minus.is_finite() {
                -d.minus.value()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    // Equal edges grouped by their larger endpoint for incremental coupling.
    let mut back: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (e, eq) in spec.graph.edges().iter().zip(&equal) {
        if *eq {
            back[e.v].push((e.u, e.w));
        }
    }

    struct Search<'a> {
        alphabet: &'a [f64],
        up: &'a [f64],
        down: &'a [f64],
        back: &'a [Vec<(usize, f64)>],
        values: Vec<f64>,
        best: f64,
        best_values: Vec<f64>,
    }

    impl Search<'_> {
        fn go(&mut self, v: usize, partial: f64) {
            if v == self.values.len() {
                if partial < self.best {
                    self.best = partial;
                    self.best_values = self.values.clone();
                }
                return;
            }
            for &a in self.alphabet {
                let unary = if a > 0.0 {
                    self.up[v] * a
                } else if a < 0.0 {
                    self.down[v] * -a
                } else {
                    0.0
                };
                if unary.is_infinite() {
                    continue;
                }
                let mut add = unary;
                for &(u, w) in &self.back[v] {
                    add += w * (a - self.values[u]).abs();
                }
                self.values[v] = a;
                self.go(v + 1, partial + add);
            }
        }
    }

    let mut search = Search {
        alphabet,
        up: &up,
        down: &down,
        back: &back,
        values: vec![alphabet[0]; n],
        best: f64::INFINITY,
        best_values: vec![alphabet[0]; n],
    };
    search.go(0, 0.0);
    (search.best_values, ExtendedReal::new(search.best))
}

/// The enumeration oracle over `{-1, 0, +1}^V`, packaged as a direction.
pub fn exhaustive_ternary_direction(
    spec: &ProblemSpec,
    x: &[f64],
    eps_eq: f64,
) -> TernaryDirection {
    let (d, value) = exhaustive_direction_oracle(spec, x, &[0.0, 1.0, -1.0], eps_eq);
    TernaryDirection {
        signs: d.iter().map(|&a| a as i8).collect(),
        value,
    }
}

/// True iff equal-signed endpoints of every edge carry equal values (within
/// `eps`); zero counts as its own sign class, and opposite or zero/nonzero
/// pairs are exempt. Directions with this shape refine the partition without
/// cutting inside a future component.
pub fn is_sign_segregated(graph: &WeightedGraph, d: &[f64], eps: f64) -> bool {
    let class = |t: f64| {
        if t > 0.0 {
            1i8
        } else if t < 0.0 {
            -1
        } else {
            0
        }
    };
    graph
        .edges()
        .iter()
        .all(|e| class(d[e.u]) != class(d[e.v]) || (d[e.u] - d[e.v]).abs() <= eps)
}
