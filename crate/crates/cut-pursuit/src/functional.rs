//! Objective oracles: smooth fidelity terms, per-vertex separable terms with
//! one-sided derivatives and proximity operators, and the vertex quantities
//! (`delta` pairs) that drive the descent-direction search.
//!
//! The per-vertex quantities are, for a point `x` and vertex `v`,
//!
//! ```text
//!   delta_plus(v)  = grad_v f(x) + g_v'(x_v, +1) + sum_e w_e sign(x_v - x_u)
//!   delta_minus(v) = grad_v f(x) - g_v'(x_v, -1) + sum_e w_e sign(x_v - x_u)
//! ```
//!
//! where the sign sum runs over incident edges whose endpoint values differ by
//! more than `eps_eq`. Edges with equal endpoint values (within `eps_eq`) form
//! the set on which a direction pays the coupling term `w |d_u - d_v|`.

use std::sync::Arc;

use thiserror::Error;

use crate::extreal::{self, ExtendedReal};
use crate::graph::WeightedGraph;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Row-major dense matrix, just large enough an abstraction for the quadratic
/// fidelity term.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SpecError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            if row.len() != c {
                return Err(SpecError::BadParameter(format!(
                    "ragged matrix: row of length {} in a {}-column matrix",
                    row.len(),
                    c
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(DenseMatrix { rows: r, cols: c, data })
    }

    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, SpecError> {
        let mut data = vec![0.0; rows * cols];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(SpecError::BadParameter(format!(
                    "triplet ({i},{j}) out of range for a {rows}x{cols} matrix"
                )));
            }
            data[i * cols + j] = v;
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Sums groups of columns into one column each; `out[i][g]` adds up
    /// `self[i][v]` over `v` in `groups[g]`. Restricting a fidelity term to
    /// vectors constant on each group multiplies through exactly this matrix.
    pub fn fold_columns(&self, groups: &[Vec<usize>]) -> DenseMatrix {
        let m = groups.len();
        let mut data = vec![0.0; self.rows * m];
        for (g, members) in groups.iter().enumerate() {
            for &v in members {
                assert!(v < self.cols, "column {v} out of range for {} columns", self.cols);
                for i in 0..self.rows {
                    data[i * m + g] += self.data[i * self.cols + v];
                }
            }
        }
        DenseMatrix {
            rows: self.rows,
            cols: m,
            data,
        }
    }

    pub fn matvec_t(&self, r: &[f64]) -> Vec<f64> {
        debug_assert_eq!(r.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * r[i];
            }
        }
        out
    }
}

/// Differentiable term of the objective, supplied through value/gradient
/// oracles plus a per-vertex curvature bound used for step sizing.
pub trait SmoothOracle: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Per-vertex diagonal bounds `rho` such that `diag(rho)` dominates the
    /// Hessian everywhere (for example, row sums of its absolute values).
    fn curvature_rows(&self, n: usize) -> Vec<f64>;
}

#[derive(Clone)]
pub enum SmoothTerm {
    Zero,
    /// `0.5 * ||y - Phi x||^2`; `matrix: None` means `Phi` is the identity.
    QuadraticFidelity {
        matrix: Option<DenseMatrix>,
        y: Vec<f64>,
    },
    Custom(Arc<dyn SmoothOracle>),
}

impl std::fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmoothTerm::Zero => write!(f, "Zero"),
            SmoothTerm::QuadraticFidelity { matrix, y } => write!(
                f,
                "QuadraticFidelity(obs={}, matrix={})",
                y.len(),
                if matrix.is_some() { "dense" } else { "identity" }
            ),
            SmoothTerm::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SmoothTerm {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::QuadraticFidelity { matrix, y } => {
                let fitted = match matrix {
                    Some(m) => m.matvec(x),
                    None => x.to_vec(),
                };
                0.5 * fitted
                    .iter()
                    .zip(y)
                    .map(|(p, yi)| (p - yi) * (p - yi))
                    .sum::<f64>()
            }
            SmoothTerm::Custom(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SmoothTerm::Zero => vec![0.0; x.len()],
            SmoothTerm::QuadraticFidelity { matrix, y } => match matrix {
                Some(m) => {
                    let mut r = m.matvec(x);
                    for (ri, yi) in r.iter_mut().zip(y) {
                        *ri -= yi;
                    }
                    m.matvec_t(&r)
                }
                None => x.iter().zip(y).map(|(xi, yi)| xi - yi).collect(),
            },
            SmoothTerm::Custom(o) => o.gradient(x),
        }
    }

    /// Diagonal curvature domination, see [`SmoothOracle::curvature_rows`].
    pub fn curvature_rows(&self, n: usize) -> Vec<f64> {
        match self {
            SmoothTerm::Zero => vec![0.0; n],
            SmoothTerm::QuadraticFidelity { matrix, y: _ } => match matrix {
                None => vec![1.0; n],
                Some(m) => {
                    // Row sums of |Phi^T Phi| without materializing it.
                    let mut rho = vec![0.0; n];
                    for v in 0..n {
                        let mut sum = 0.0;
                        for u in 0..n {
                            let mut dot = 0.0;
                            for i in 0..m.rows {
                                dot += m.data[i * m.cols + v] * m.data[i * m.cols + u];
                            }
                            sum += dot.abs();
                        }
                        rho[v] = sum;
                    }
                    rho
                }
            },
            SmoothTerm::Custom(o) => o.curvature_rows(n),
        }
    }
}

/// Scalar term oracle for user-supplied separable functions.
///
/// `dd_plus(t)` and `dd_minus(t)` are the one-sided derivatives in the `+1`
/// and `-1` directions; both take values in `(-inf, +inf]`. Outside the
/// domain both must be `+inf`.
pub trait ScalarOracle: Send + Sync {
    fn value(&self, t: f64) -> ExtendedReal;
    fn dd_plus(&self, t: f64) -> ExtendedReal;
    fn dd_minus(&self, t: f64) -> ExtendedReal;
    /// Points where the term is nondifferentiable; iterates are pulled onto
    /// these during snapping.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Effective domain as a closed interval.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Per-vertex separable term. Built-ins carry closed-form proximity
/// operators; `Custom` terms fall back to bisection on the optimality
/// condition.
#[derive(Clone)]
pub enum NonsmoothTerm {
    Zero,
    /// `lambda * |t|`, `lambda >= 0`.
    WeightedAbs { lambda: f64 },
    /// Indicator of `t >= 0`.
    NonnegIndicator,
    /// `lambda * |t|` plus the indicator of `t >= 0`.
    WeightedAbsPlusNonneg { lambda: f64 },
    /// Indicator of `lo <= t <= hi`.
    BoxIndicator { lo: f64, hi: f64 },
    Custom(Arc<dyn ScalarOracle>),
}

impl std::fmt::Debug for NonsmoothTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NonsmoothTerm::Zero => write!(f, "Zero"),
            NonsmoothTerm::WeightedAbs { lambda } => write!(f, "WeightedAbs({lambda})"),
            NonsmoothTerm::NonnegIndicator => write!(f, "NonnegIndicator"),
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => {
                write!(f, "WeightedAbsPlusNonneg({lambda})")
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => write!(f, "BoxIndicator[{lo}, {hi}]"),
            NonsmoothTerm::Custom(_) => write!(f, "Custom"),
        }
    }
}

fn soft_threshold(t: f64, a: f64) -> f64 {
    t.signum() * (t.abs() - a).max(0.0)
}

impl NonsmoothTerm {
    pub fn weighted_abs(lambda: f64) -> Result<Self, SpecError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(SpecError::BadParameter(format!(
                "weighted abs needs a finite lambda >= 0, got {lambda}"
            )));
        }
        Ok(NonsmoothTerm::WeightedAbs { lambda })
    }

    pub fn weighted_abs_plus_nonneg(lambda: f64) -> Result<Self, SpecError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(SpecError::BadParameter(format!(
                "weighted abs needs a finite lambda >= 0, got {lambda}"
            )));
        }
        Ok(NonsmoothTerm::WeightedAbsPlusNonneg { lambda })
    }

    pub fn box_indicator(lo: f64, hi: f64) -> Result<Self, SpecError> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(SpecError::BadParameter(format!(
                "box needs finite lo <= hi, got [{lo}, {hi}]"
            )));
        }
        Ok(NonsmoothTerm::BoxIndicator { lo, hi })
    }

    pub fn value(&self, t: f64) -> ExtendedReal {
        match self {
            NonsmoothTerm::Zero => extreal::ZERO,
            NonsmoothTerm::WeightedAbs { lambda } => ExtendedReal::finite(lambda * t.abs()),
            NonsmoothTerm::NonnegIndicator => {
                if t >= 0.0 {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => {
                if t >= 0.0 {
                    ExtendedReal::finite(lambda * t)
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => {
                if t >= *lo && t <= *hi {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::Custom(o) => o.value(t),
        }
    }

    /// One-sided derivative in the `+1` direction, in `(-inf, +inf]`.
    pub fn dd_plus(&self, t: f64) -> ExtendedReal {
        match self {
            NonsmoothTerm::Zero => extreal::ZERO,
            NonsmoothTerm::WeightedAbs { lambda } => {
                ExtendedReal::finite(if t >= 0.0 { *lambda } else { -lambda })
            }
            NonsmoothTerm::NonnegIndicator => {
                if t >= 0.0 {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => {
                if t >= 0.0 {
                    ExtendedReal::finite(*lambda)
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => {
                if t >= *lo && t < *hi {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::Custom(o) => o.dd_plus(t),
        }
    }

    /// One-sided derivative in the `-1` direction, in `(-inf, +inf]`.
    pub fn dd_minus(&self, t: f64) -> ExtendedReal {
        match self {
            NonsmoothTerm::Zero => extreal::ZERO,
            NonsmoothTerm::WeightedAbs { lambda } => {
                ExtendedReal::finite(if t > 0.0 { -lambda } else { *lambda })
            }
            NonsmoothTerm::NonnegIndicator => {
                if t > 0.0 {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => {
                if t > 0.0 {
                    ExtendedReal::finite(-lambda)
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => {
                if t > *lo && t <= *hi {
                    extreal::ZERO
                } else {
                    extreal::POS_INF
                }
            }
            NonsmoothTerm::Custom(o) => o.dd_minus(t),
        }
    }

    /// `argmin_s  g(s) + (s - t)^2 / (2 step)`.
    pub fn prox(&self, t: f64, step: f64) -> f64 {
        debug_assert!(step > 0.0);
        match self {
            NonsmoothTerm::Zero => t,
            NonsmoothTerm::WeightedAbs { lambda } => soft_threshold(t, lambda * step),
            NonsmoothTerm::NonnegIndicator => t.max(0.0),
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => (t - lambda * step).max(0.0),
            NonsmoothTerm::BoxIndicator { lo, hi } => t.clamp(*lo, *hi),
            NonsmoothTerm::Custom(_) => {
                prox_by_bisection(std::slice::from_ref(self), &[0], t, step)
            }
        }
    }

    /// Nondifferentiability points this term wants iterates snapped onto.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            NonsmoothTerm::Zero => Vec::new(),
            NonsmoothTerm::WeightedAbs { .. }
            | NonsmoothTerm::NonnegIndicator
            | NonsmoothTerm::WeightedAbsPlusNonneg { .. } => vec![0.0],
            NonsmoothTerm::BoxIndicator { lo, hi } => {
                if lo == hi {
                    vec![*lo]
                } else {
                    vec![*lo, *hi]
                }
            }
            NonsmoothTerm::Custom(o) => o.kinks(),
        }
    }

    /// Effective domain as a closed interval.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            NonsmoothTerm::Zero | NonsmoothTerm::WeightedAbs { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            NonsmoothTerm::NonnegIndicator | NonsmoothTerm::WeightedAbsPlusNonneg { .. } => {
                (0.0, f64::INFINITY)
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => (*lo, *hi),
            NonsmoothTerm::Custom(o) => o.domain(),
        }
    }

    /// Built-ins decompose as `lambda |t| + indicator of [lo, hi]`, which sums
    /// and proxes in closed form. `None` for custom oracles.
    fn as_soft_clamp(&self) -> Option<(f64, f64, f64)> {
        match self {
            NonsmoothTerm::Zero => Some((0.0, f64::NEG_INFINITY, f64::INFINITY)),
            NonsmoothTerm::WeightedAbs { lambda } => {
                Some((*lambda, f64::NEG_INFINITY, f64::INFINITY))
            }
            NonsmoothTerm::NonnegIndicator => Some((0.0, 0.0, f64::INFINITY)),
            NonsmoothTerm::WeightedAbsPlusNonneg { lambda } => {
                Some((*lambda, 0.0, f64::INFINITY))
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => Some((0.0, *lo, *hi)),
            NonsmoothTerm::Custom(_) => None,
        }
    }
}

/// Proximity operator of the sum of the member terms at a shared scalar:
/// `argmin_s  sum_{v in members} g_v(s) + (s - t)^2 / (2 step)`.
///
/// All-built-in member lists reduce to soft-thresholding followed by a clamp
/// onto the intersected domain; any custom member routes the whole sum
/// through bisection on the one-sided optimality condition.
pub fn aggregate_prox(terms: &[NonsmoothTerm], members: &[usize], t: f64, step: f64) -> f64 {
    debug_assert!(step > 0.0);
    let mut lambda = 0.0;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &v in members {
        match terms[v].as_soft_clamp() {
            Some((l, a, b)) => {
                lambda += l;
                lo = lo.max(a);
                hi = hi.min(b);
            }
            None => return prox_by_bisection(terms, members, t, step),
        }
    }
    assert!(lo <= hi, "empty aggregate domain");
    soft_threshold(t, lambda * step).clamp(lo, hi)
}

/// Intersected domain of the member terms.
pub fn aggregate_domain(terms: &[NonsmoothTerm], members: &[usize]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &v in members {
        let (a, b) = terms[v].domain();
        lo = lo.max(a);
        hi = hi.min(b);
    }
    (lo, hi)
}

/// Union of the member terms' kinks, deduplicated.
pub fn aggregate_kinks(terms: &[NonsmoothTerm], members: &[usize]) -> Vec<f64> {
    let mut ks: Vec<f64> = members.iter().flat_map(|&v| terms[v].kinks()).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    ks
}

/// Bisection on the right-derivative sign change of
/// `phi(s) = sum g_v(s) + (s - t)^2 / (2 step)`, assuming each `g_v` convex.
/// Finds the smallest `s` in the intersected domain with `phi'(s, +1) >= 0`.
fn prox_by_bisection(terms: &[NonsmoothTerm], members: &[usize], t: f64, step: f64) -> f64 {
    let (dom_lo, dom_hi) = aggregate_domain(terms, members);
    assert!(dom_lo <= dom_hi, "empty aggregate domain");
    let right_slope = |s: f64| -> ExtendedReal {
        let mut acc = ExtendedReal::finite((s - t) / step);
        for &v in members {
            acc = acc + terms[v].dd_plus(s);
        }
        acc
    };
    let nonneg = |s: f64| right_slope(s).value() >= 0.0;

    // Bracket [lo, hi] with the slope negative at lo and nonnegative at hi.
    let mut pad = step.max(1.0) * (1.0 + t.abs());
    let mut hi = t.clamp(dom_lo, dom_hi);
    let mut lo = hi;
    while !nonneg(hi) {
        if hi >= dom_hi {
            return dom_hi; // still descending at the upper boundary
        }
        lo = hi;
        hi = (hi + pad).min(dom_hi);
        pad *= 2.0;
    }
    pad = step.max(1.0) * (1.0 + t.abs());
    while nonneg(lo) {
        if lo <= dom_lo {
            return dom_lo;
        }
        hi = lo;
        lo = (lo - pad).max(dom_lo);
        pad *= 2.0;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if nonneg(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Problem data: graph, smooth term, and one separable term per vertex.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub graph: WeightedGraph,
    pub smooth: SmoothTerm,
    pub nonsmooth: Vec<NonsmoothTerm>,
}

impl ProblemSpec {
    pub fn new(
        graph: WeightedGraph,
        smooth: SmoothTerm,
        nonsmooth: Vec<NonsmoothTerm>,
    ) -> Result<Self, SpecError> {
        let n = graph.vertex_count();
        if nonsmooth.len() != n {
            return Err(SpecError::DimensionMismatch {
                what: "per-vertex terms",
                expected: n,
                got: nonsmooth.len(),
            });
        }
        match &smooth {
            SmoothTerm::QuadraticFidelity { matrix: None, y } if y.len() != n => {
                return Err(SpecError::DimensionMismatch {
                    what: "observations (identity design)",
                    expected: n,
                    got: y.len(),
                });
            }
            SmoothTerm::QuadraticFidelity {
                matrix: Some(m),
                y,
            } => {
                if m.cols() != n {
                    return Err(SpecError::DimensionMismatch {
                        what: "design matrix columns",
                        expected: n,
                        got: m.cols(),
                    });
                }
                if y.len() != m.rows() {
                    return Err(SpecError::DimensionMismatch {
                        what: "observations",
                        expected: m.rows(),
                        got: y.len(),
                    });
                }
            }
            _ => {}
        }
        Ok(ProblemSpec {
            graph,
            smooth,
            nonsmooth,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }
}

/// One-sided slopes of the objective at a vertex; `plus` lives in
/// `(-inf, +inf]` and `minus` in `[-inf, +inf)`.
#[derive(Debug, Clone, Copy)]
pub struct VertexDeltas {
    pub plus: ExtendedReal,
    pub minus: ExtendedReal,
}

/// Mask of edges whose endpoint values agree within `eps_eq`.
pub fn equal_edges(graph: &WeightedGraph, x: &[f64], eps_eq: f64) -> Vec<bool> {
    graph
        .edges()
        .iter()
        .map(|e| (x[e.u] - x[e.v]).abs() <= eps_eq)
        .collect()
}

/// Full objective value; `+inf` when `x` leaves the domain of a vertex term.
pub fn objective(spec: &ProblemSpec, x: &[f64]) -> ExtendedReal {
    assert_eq!(x.len(), spec.vertex_count());
    let mut total = ExtendedReal::finite(spec.smooth.value(x));
    for (xv, term) in x.iter().zip(&spec.nonsmooth) {
        total += term.value(*xv);
    }
    let mut tv = 0.0;
    for e in spec.graph.edges() {
        tv += e.w * (x[e.u] - x[e.v]).abs();
    }
    total + ExtendedReal::finite(tv)
}

/// Pulls each coordinate onto the nearest nondifferentiability point of its
/// vertex term when within `eps_snap` of one.
pub fn snap_nonsmooth(spec: &ProblemSpec, x: &[f64], eps_snap: f64) -> Vec<f64> {
    x.iter()
        .zip(&spec.nonsmooth)
        .map(|(&xv, term)| snap_scalar(xv, &term.kinks(), eps_snap))
        .collect()
}

pub(crate) fn snap_scalar(x: f64, kinks: &[f64], eps_snap: f64) -> f64 {
    let mut best = x;
    let mut best_dist = f64::INFINITY;
    for &k in kinks {
        let d = (x - k).abs();
        if d <= eps_snap && d < best_dist {
            best = k;
            best_dist = d;
        }
    }
    best
}

/// One-sided slope pairs for every vertex at `x`, which must lie in the
/// domain of every vertex term.
///
/// Panics if a term oracle returns `-inf` from `dd_plus` or `dd_minus`; those
/// are outside the oracle range contract.
pub fn vertex_deltas(spec: &ProblemSpec, x: &[f64], eps_eq: f64) -> Vec<VertexDeltas> {
    assert_eq!(x.len(), spec.vertex_count());
    let grad = spec.smooth.gradient(x);
    let mut sign_sum = vec![0.0; x.len()];
    for e in spec.graph.edges() {
        let diff = x[e.u] - x[e.v];
        if diff.abs() > eps_eq {
            let s = if diff > 0.0 { 1.0 } else { -1.0 };
            sign_sum[e.u] += e.w * s;
            sign_sum[e.v] -= e.w * s;
        }
    }
    x.iter()
        .zip(&spec.nonsmooth)
        .enumerate()
        .map(|(v, (&xv, term))| {
            let gp = term.dd_plus(xv);
            let gm = term.dd_minus(xv);
            assert!(
                gp > extreal::NEG_INF && gm > extreal::NEG_INF,
                "contract violation: one-sided derivative -inf at vertex {v}"
            );
            let base = ExtendedReal::finite(grad[v] + sign_sum[v]);
            VertexDeltas {
                plus: base + gp,
                minus: base + (-gm),
            }
        })
        .collect()
}

/// Directional derivative of the objective at `x` along `d`:
///
/// ```text
///   sum_{d_v > 0} delta_plus(v) d_v + sum_{d_v < 0} delta_minus(v) d_v
///   + sum_{equal edges} w |d_u - d_v|
/// ```
///
/// Zero coordinates contribute nothing even against infinite slopes. The
/// result is never `-inf`.
pub fn dir_deriv(spec: &ProblemSpec, x: &[f64], d: &[f64], eps_eq: f64) -> ExtendedReal {
    assert_eq!(d.len(), spec.vertex_count());
    let deltas = vertex_deltas(spec, x, eps_eq);
    dir_deriv_with(spec, &deltas, &equal_edges(&spec.graph, x, eps_eq), d)
}

/// Same as [`dir_deriv`] with the per-vertex slopes and equal-edge mask
/// already computed.
pub fn dir_deriv_with(
    spec: &ProblemSpec,
    deltas: &[VertexDeltas],
    equal: &[bool],
    d: &[f64],
) -> ExtendedReal {
    let mut total = extreal::ZERO;
    for (dv, delta) in d.iter().zip(deltas) {
        if *dv > 0.0 {
            total += delta.plus.scale_pos(*dv);
        } else if *dv < 0.0 {
            total += (-delta.minus).scale_pos(-dv);
        }
    }
    let mut tv = 0.0;
    for (e, eq) in spec.graph.edges().iter().zip(equal) {
        if *eq {
            tv += e.w * (d[e.u] - d[e.v]).abs();
        }
    }
    total + ExtendedReal::finite(tv)
}
