//! Reduced problems: the original objective restricted to functions that are
//! constant on each component of a partition, solved by a preconditioned
//! primal-dual splitting.
//!
//! With components `U` and reduced coupling weights `omega` accumulated over
//! crossing edges, the reduced problem in `xi` (one scalar per component) is
//!
//! ```text
//!   min_xi  f(lift(xi)) + sum_U sum_{v in U} g_v(xi_U)
//!         + sum_{(A,B)} omega_AB |xi_A - xi_B|
//! ```
//!
//! Gradients always go through the lift and its transpose (chain rule); no
//! reduced matrices are ever formed.

use crate::extreal::ExtendedReal;
use crate::functional::{aggregate_prox, objective, ProblemSpec, SmoothTerm};
use crate::graph::{build_reduced_graph, Partition, ReducedEdge};

/// Expands component values to a full vertex vector.
pub fn lift(partition: &Partition, xi: &[f64]) -> Vec<f64> {
    assert_eq!(xi.len(), partition.len());
    partition
        .component_of_slice()
        .iter()
        .map(|&c| xi[c])
        .collect()
}

/// Objective of the reduced point, evaluated literally as the full objective
/// of its lift.
pub fn reduced_objective(spec: &ProblemSpec, partition: &Partition, xi: &[f64]) -> ExtendedReal {
    objective(spec, &lift(partition, xi))
}

#[derive(Debug, Clone)]
pub struct ReducedOptions {
    /// Relative stopping tolerance on the evolution between iterates (lifted
    /// primal and weighted dual together).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReducedOptions {
    fn default() -> Self {
        ReducedOptions {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub xi: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration budget ran out before the tolerance was met.
    pub converged: bool,
}

/// Primal-dual iteration shared by the scalar and vector-valued reduced
/// solvers. Blocks are components; each block holds `block_dim` scalars.
///
/// The dual variable carries one multiplier per reduced edge and coordinate,
/// constrained to `[-1, 1]` and applied through the weighted incidence. Step
/// sizes must satisfy `1/tau_U >= Lbar_U + c_U` with `c_U` the weighted
/// degree, paired with `sigma_e = 1 / (2 omega_e)`; the weighted-incidence
/// Gram matrix is then dominated by `diag(c_U)` and the iteration converges.
pub(crate) trait PdhgProblem {
    fn block_count(&self) -> usize;
    fn block_dim(&self) -> usize;
    /// Gradient of the smooth part in flat block layout, via the chain rule.
    fn gradient(&self, xi: &[f64]) -> Vec<f64>;
    /// Proximal step on one block with this block's step size.
    fn prox(&self, block: usize, t: &[f64], out: &mut [f64]);
    fn tau(&self, block: usize) -> f64;
    /// Lifted weight of the block (its vertex count).
    fn size(&self, block: usize) -> f64;
    fn edges(&self) -> &[ReducedEdge];
}

pub(crate) fn pdhg(
    problem: &impl PdhgProblem,
    xi0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize, bool) {
    pdhg_observed(problem, xi0, tol, max_iter, usize::MAX, &mut |_, _| {})
}

/// Same iteration with a checkpoint callback every `every` iterations (and on
/// the final one), for progress traces over long solves.
pub(crate) fn pdhg_observed(
    problem: &impl PdhgProblem,
    xi0: Vec<f64>,
    tol: f64,
    max_iter: usize,
    every: usize,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> (Vec<f64>, usize, bool) {
    assert!(every > 0, "checkpoint stride must be positive");
    let m = problem.block_count();
    let k = problem.block_dim();
    assert_eq!(xi0.len(), m * k);
    let edges = problem.edges();

    let mut xi = xi0;
    let mut z = vec![0.0f64; edges.len() * k];
    let mut grad_term = vec![0.0f64; m * k];
    let mut next = vec![0.0f64; m * k];
    let mut t_block = vec![0.0f64; k];
    let mut out_block = vec![0.0f64; k];

    for iter in 1..=max_iter {
        // Primal: xi+ = prox_tau(xi - tau (grad f + K^T z)).
        let grad = problem.gradient(&xi);
        grad_term.copy_from_slice(&grad);
        for (e, edge) in edges.iter().enumerate() {
            for j in 0..k {
                let ze = z[e * k + j] * edge.weight;
                grad_term[edge.a * k + j] += ze;
                grad_term[edge.b * k + j] -= ze;
            }
        }
        for b in 0..m {
            let tau = problem.tau(b);
            for j in 0..k {
                t_block[j] = xi[b * k + j] - tau * grad_term[b * k + j];
            }
            problem.prox(b, &t_block, &mut out_block);
            next[b * k..(b + 1) * k].copy_from_slice(&out_block);
        }
        // Dual: z+ = clamp(z + sigma K (2 xi+ - xi)).
        let mut zdiff = 0.0;
        let mut znorm = 0.0;
        for (e, edge) in edges.iter().enumerate() {
            let sigma = 1.0 / (2.0 * edge.weight);
            for j in 0..k {
                let bar = 2.0 * (next[edge.a * k + j] - next[edge.b * k + j])
                    - (xi[edge.a * k + j] - xi[edge.b * k + j]);
                let znew = (z[e * k + j] + sigma * edge.weight * bar).clamp(-1.0, 1.0);
                let d = (znew - z[e * k + j]) * edge.weight;
                zdiff += d * d;
                znorm += (znew * edge.weight) * (znew * edge.weight);
                z[e * k + j] = znew;
            }
        }
        // Lifted relative evolution, primal and dual. The primal alone can
        // stall for one step while a multiplier is still ramping toward its
        // bound (exactly so when tau * (L + c) = 1 on a one-vertex block), so
        // both must be quiet before the point counts as converged.
        let mut diff = 0.0;
        let mut norm = 0.0;
        for b in 0..m {
            let s = problem.size(b);
            for j in 0..k {
                let d = next[b * k + j] - xi[b * k + j];
                diff += s * d * d;
                norm += s * next[b * k + j] * next[b * k + j];
            }
        }
        xi.copy_from_slice(&next);
        let done = diff.sqrt() <= tol * (1.0 + norm.sqrt())
            && zdiff.sqrt() <= tol * (1.0 + znorm.sqrt());
        if done || iter % every == 0 {
            observe(iter, &xi);
        }
        if done {
            return (xi, iter, true);
        }
    }
    if max_iter % every != 0 {
        observe(max_iter, &xi);
    }
    (xi, max_iter, false)
}

/// Smooth part of a reduced problem, materialized per partition so one
/// iteration costs work proportional to the component count where the
/// structure allows it.
enum ReducedSmooth {
    /// A term over the reduced coordinates themselves (zero, or a fidelity
    /// whose matrix columns were folded per component).
    Direct(SmoothTerm),
    /// Identity fidelity folded per component:
    /// `f(xi) = 1/2 sum_U s_U xi_U^2 - b_U xi_U + const`.
    Diagonal { s: Vec<f64>, b: Vec<f64> },
    /// Custom terms evaluate through the lift.
    Lifted,
}

fn reduce_smooth(spec: &ProblemSpec, partition: &Partition) -> ReducedSmooth {
    match &spec.smooth {
        SmoothTerm::Zero => ReducedSmooth::Direct(SmoothTerm::Zero),
        SmoothTerm::QuadraticFidelity { matrix: None, y } => {
            let s: Vec<f64> = partition
                .components()
                .iter()
                .map(|members| members.len() as f64)
                .collect();
            let b: Vec<f64> = partition
                .components()
                .iter()
                .map(|members| members.iter().map(|&v| y[v]).sum())
                .collect();
            ReducedSmooth::Diagonal { s, b }
        }
        SmoothTerm::QuadraticFidelity {
            matrix: Some(m),
            y,
        } => ReducedSmooth::Direct(SmoothTerm::QuadraticFidelity {
            matrix: Some(m.fold_columns(partition.components())),
            y: y.clone(),
        }),
        SmoothTerm::Custom(_) => ReducedSmooth::Lifted,
    }
}

impl ReducedSmooth {
    /// Per-component diagonal curvature bounds.
    fn curvature(&self, spec: &ProblemSpec, partition: &Partition) -> Vec<f64> {
        match self {
            ReducedSmooth::Direct(t) => t.curvature_rows(partition.len()),
            ReducedSmooth::Diagonal { s, .. } => s.clone(),
            ReducedSmooth::Lifted => {
                let rho = spec.smooth.curvature_rows(spec.vertex_count());
                partition
                    .components()
                    .iter()
                    .map(|members| members.iter().map(|&v| rho[v]).sum())
                    .collect()
            }
        }
    }
}

struct ScalarReduced<'a> {
    spec: &'a ProblemSpec,
    partition: &'a Partition,
    smooth: ReducedSmooth,
    edges: Vec<ReducedEdge>,
    tau: Vec<f64>,
}

impl PdhgProblem for ScalarReduced<'_> {
    fn block_count(&self) -> usize {
        self.partition.len()
    }

    fn block_dim(&self) -> usize {
        1
    }

    fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        match &self.smooth {
            ReducedSmooth::Direct(t) => t.gradient(xi),
            ReducedSmooth::Diagonal { s, b } => xi
                .iter()
                .zip(s)
                .zip(b)
                .map(|((x, si), bi)| si * x - bi)
                .collect(),
            ReducedSmooth::Lifted => {
                let x = lift(self.partition, xi);
                let g = self.spec.smooth.gradient(&x);
                let mut out = vec![0.0; self.partition.len()];
                for (v, &c) in self.partition.component_of_slice().iter().enumerate() {
                    out[c] += g[v];
                }
                out
            }
        }
    }

    fn prox(&self, block: usize, t: &[f64], out: &mut [f64]) {
        out[0] = aggregate_prox(
            &self.spec.nonsmooth,
            &self.partition.components()[block],
            t[0],
            self.tau[block],
        );
    }

    fn tau(&self, block: usize) -> f64 {
        self.tau[block]
    }

    fn size(&self, block: usize) -> f64 {
        self.partition.components()[block].len() as f64
    }

    fn edges(&self) -> &[ReducedEdge] {
        &self.edges
    }
}

fn scalar_reduced<'a>(spec: &'a ProblemSpec, partition: &'a Partition) -> ScalarReduced<'a> {
    let reduced = build_reduced_graph(&spec.graph, partition);
    let degrees = reduced.weighted_degrees();
    let smooth = reduce_smooth(spec, partition);
    let tau: Vec<f64> = smooth
        .curvature(spec, partition)
        .iter()
        .zip(&degrees)
        .map(|(lbar, c)| 1.0 / (lbar + c).max(1e-10))
        .collect();
    ScalarReduced {
        spec,
        partition,
        smooth,
        edges: reduced.edges,
        tau,
    }
}

/// Solves the reduced problem from the warm start `xi0` (one value per
/// component, inside each component's domain).
pub fn solve_reduced(
    spec: &ProblemSpec,
    partition: &Partition,
    xi0: &[f64],
    opts: &ReducedOptions,
) -> ReducedSolution {
    assert_eq!(partition.vertex_count(), spec.vertex_count());
    assert_eq!(xi0.len(), partition.len());
    let problem = scalar_reduced(spec, partition);
    let (xi, iterations, converged) = pdhg(&problem, xi0.to_vec(), opts.tol, opts.max_iter);
    ReducedSolution {
        xi,
        iterations,
        converged,
    }
}

/// In-domain default start for each component: the aggregate prox of zero.
pub fn default_start(spec: &ProblemSpec, partition: &Partition) -> Vec<f64> {
    partition
        .components()
        .iter()
        .map(|members| aggregate_prox(&spec.nonsmooth, members, 0.0, 1.0))
        .collect()
}

/// Solves the full problem directly (singleton partition) with the same
/// primal-dual iteration. The benchmark any partition-based run is compared
/// against.
pub fn baseline_solve(spec: &ProblemSpec, tol: f64, max_iter: usize) -> ReducedSolution {
    let partition = Partition::singletons(spec.vertex_count());
    let xi0 = default_start(spec, &partition);
    solve_reduced(spec, &partition, &xi0, &ReducedOptions { tol, max_iter })
}

/// Progress sample of a long direct solve.
#[derive(Debug, Clone)]
pub struct BaselineCheckpoint {
    pub iteration: usize,
    pub elapsed_s: f64,
    pub objective: f64,
}

/// [`baseline_solve`] with an objective/time sample every `every` iterations
/// (and at the final one).
pub fn baseline_solve_traced(
    spec: &ProblemSpec,
    tol: f64,
    max_iter: usize,
    every: usize,
) -> (ReducedSolution, Vec<BaselineCheckpoint>) {
    let partition = Partition::singletons(spec.vertex_count());
    let xi0 = default_start(spec, &partition);
    let problem = scalar_reduced(spec, &partition);
    let start = std::time::Instant::now();
    let mut checkpoints = Vec::new();
    let mut observe = |iteration: usize, xi: &[f64]| {
        checkpoints.push(BaselineCheckpoint {
            iteration,
            elapsed_s: start.elapsed().as_secs_f64(),
            objective: objective(spec, xi).value(),
        });
    };
    let (xi, iterations, converged) = pdhg_observed(&problem, xi0, tol, max_iter, every, &mut observe);
    (
        ReducedSolution {
            xi,
            iterations,
            converged,
        },
        checkpoints,
    )
}
