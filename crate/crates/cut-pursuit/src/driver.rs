//! The outer working-set loop.
//!
//! Starting from the coarsest partition, each iteration solves the reduced
//! problem warm-started from its parent, snaps component values onto nearby
//! kinks, merges components whose values collide, then asks for a steepest
//! ternary direction on the full problem. A negative directional derivative
//! splits components along the direction's sign classes and the loop
//! continues; otherwise the point is stationary and the loop stops.

use std::time::Instant;

use crate::direction::{
    steepest_ternary_direction, steepest_ternary_two_cuts, TernaryDirection,
};
use crate::functional::{aggregate_domain, aggregate_kinks, objective, snap_scalar, ProblemSpec};
use crate::graph::{merge_close_components, refine_partition, Partition};
use crate::reduced::{default_start, lift, solve_reduced, ReducedOptions};

/// How the per-iteration descent direction is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionMethod {
    /// Two independent binary cuts; exact whenever the per-vertex terms are
    /// convex, and roughly half the network size of [`Self::Ternary`].
    #[default]
    TwoCut,
    /// One min cut on the two-stage ternary network.
    Ternary,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop once the steepest direction satisfies `-F'(x, d) <= tol_dir`.
    pub tol_dir: f64,
    /// Stop once consecutive iterates satisfy `|x+ - x| <= tol_x (1 + |x+|)`.
    pub tol_x: f64,
    /// Reduced solves run to tolerance `tol_x * reduced_tol_factor`.
    pub reduced_tol_factor: f64,
    pub reduced_max_iter: usize,
    /// Equality tolerance for edge endpoints; `None` resolves to
    /// `10 * tol_x * reduced_tol_factor * range(x)` each iteration.
    pub eps_eq: Option<f64>,
    /// Kink-snapping radius; `None` resolves like `eps_eq`.
    pub eps_snap: Option<f64>,
    /// Component-merging radius; `None` resolves like `eps_eq`. Zero
    /// disables merging.
    pub merge_eps: Option<f64>,
    pub direction_method: DirectionMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 50,
            tol_dir: 1e-6,
            tol_x: 1e-6,
            reduced_tol_factor: 1e-3,
            reduced_max_iter: 10_000,
            eps_eq: None,
            eps_snap: None,
            merge_eps: None,
            direction_method: DirectionMethod::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No ternary direction descends faster than `tol_dir`.
    DirectionStationary,
    /// Consecutive lifted iterates stopped moving.
    SmallEvolution,
    MaxIter,
    /// The direction promised descent but refinement could not split any
    /// component; only reachable through tolerance mismatches.
    Stalled,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::DirectionStationary => "direction_stationary",
            StopReason::SmallEvolution => "small_evolution",
            StopReason::MaxIter => "max_iter",
            StopReason::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

/// One outer iteration as it appeared to the solver.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub elapsed_s: f64,
    /// Objective after this iteration's reduced solve, snap, and merge.
    pub objective: f64,
    pub n_components: usize,
    /// Directional derivative of the steepest direction found afterwards.
    pub dir_deriv: f64,
    /// Whether the reduced solve hit its tolerance within its budget.
    pub reduced_converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    /// Set when any reduced solve exhausted its iteration budget.
    pub reduced_warning: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub partition: Partition,
    /// Component values; `x` is their lift.
    pub xi: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub trace: SolveTrace,
}

pub(crate) fn value_range(x: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= hi {
        hi - lo
    } else {
        0.0
    }
}

pub(crate) fn resolve_eps(opt: Option<f64>, auto_scale: f64, range: f64) -> f64 {
    opt.unwrap_or(auto_scale * range)
}

/// Clamps each component value into the intersected domain of its members.
/// Snapping and merging can push a value marginally outside; this restores
/// finiteness of the lifted objective.
fn clamp_into_domains(spec: &ProblemSpec, partition: &Partition, xi: &mut [f64]) {
    for (value, members) in xi.iter_mut().zip(partition.components()) {
        let (lo, hi) = aggregate_domain(&spec.nonsmooth, members);
        *value = value.clamp(lo, hi);
    }
}

/// Minimizes the objective by the working-set loop described in the module
/// docs. Deterministic for fixed inputs and options.
pub fn cut_pursuit(spec: &ProblemSpec, opts: &SolveOptions) -> Solution {
    let start = Instant::now();
    let auto_scale = 10.0 * opts.tol_x * opts.reduced_tol_factor;
    let reduced_opts = ReducedOptions {
        tol: opts.tol_x * opts.reduced_tol_factor,
        max_iter: opts.reduced_max_iter,
    };

    let mut partition = Partition::coarsest(&spec.graph);
    let mut xi = default_start(spec, &partition);
    let mut trace = SolveTrace::default();
    let mut x_prev: Option<Vec<f64>> = None;
    let mut stop = StopReason::MaxIter;

    for iter in 1..=opts.max_iter {
        let solved = solve_reduced(spec, &partition, &xi, &reduced_opts);
        xi = solved.xi;
        if !solved.converged {
            trace.reduced_warning = true;
        }

        // Snap values onto member kinks, then merge colliding components.
        let range = value_range(&lift(&partition, &xi));
        let eps_snap = resolve_eps(opts.eps_snap, auto_scale, range);
        for (value, members) in xi.iter_mut().zip(partition.components()) {
            let kinks = aggregate_kinks(&spec.nonsmooth, members);
            *value = snap_scalar(*value, &kinks, eps_snap);
        }
        let merge_eps = resolve_eps(opts.merge_eps, auto_scale, range);
        if merge_eps > 0.0 {
            let (merged, merged_xi) =
                merge_close_components(&spec.graph, &partition, &xi, merge_eps);
            let feasible = merged
                .components()
                .iter()
                .all(|members| {
                    let (lo, hi) = aggregate_domain(&spec.nonsmooth, members);
                    lo <= hi
                });
            if feasible {
                partition = merged;
                xi = merged_xi;
            }
        }
        clamp_into_domains(spec, &partition, &mut xi);

        let x = lift(&partition, &xi);
        let objective_now = objective(spec, &x).value();

        // Steepest ternary direction on the full problem.
        let eps_eq = resolve_eps(opts.eps_eq, auto_scale, value_range(&x));
        let dir: TernaryDirection = match opts.direction_method {
            DirectionMethod::TwoCut => steepest_ternary_two_cuts(spec, &x, eps_eq),
            DirectionMethod::Ternary => steepest_ternary_direction(spec, &x, eps_eq),
        };
        let dir_value = dir.value.value();

        trace.records.push(TraceRecord {
            iter,
            elapsed_s: start.elapsed().as_secs_f64(),
            objective: objective_now,
            n_components: partition.len(),
            dir_deriv: dir_value,
            reduced_converged: solved.converged,
        });

        if -dir_value <= opts.tol_dir {
            stop = StopReason::DirectionStationary;
            x_prev = Some(x);
            break;
        }
        if let Some(prev) = &x_prev {
            let mut diff = 0.0;
            let mut norm = 0.0;
            for (a, b) in x.iter().zip(prev) {
                diff += (a - b) * (a - b);
                norm += a * a;
            }
            if diff.sqrt() <= opts.tol_x * (1.0 + norm.sqrt()) {
                stop = StopReason::SmallEvolution;
                x_prev = Some(x);
                break;
            }
        }
        x_prev = Some(x);

        // Split components along the direction's sign classes.
        let refined = refine_partition(&spec.graph, &partition, &dir.as_vec(), 0.0);
        if refined.len() == partition.len() {
            stop = StopReason::Stalled;
            break;
        }
        let mut next_xi = vec![0.0; refined.len()];
        for (c, members) in refined.components().iter().enumerate() {
            next_xi[c] = xi[partition.component_of(members[0])];
        }
        partition = refined;
        xi = next_xi;
    }

    let x = x_prev.unwrap_or_else(|| lift(&partition, &xi));
    let objective_final = objective(spec, &x).value();
    Solution {
        x,
        partition,
        xi,
        objective: objective_final,
        iterations: trace.records.len(),
        stop,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direction::exhaustive_ternary_direction;
    use crate::functional::{NonsmoothTerm, SmoothTerm};
    use crate::graph::WeightedGraph;
    use crate::reduced::baseline_solve;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fused6() -> ProblemSpec {
        let edges: Vec<(usize, usize, f64)> = (0..5).map(|i| (i, i + 1, 1.0)).collect();
        ProblemSpec::new(
            WeightedGraph::new(6, &edges).unwrap(),
            SmoothTerm::QuadraticFidelity {
                matrix: None,
                y: vec![0.0, 0.0, 0.0, 5.0, 5.0, 5.0],
            },
            vec![NonsmoothTerm::Zero; 6],
        )
        .unwrap()
    }

    #[test]
    fn fused_chain_splits_once_and_stops() {
        let sol = cut_pursuit(&fused6(), &SolveOptions::default());
        assert_eq!(sol.partition.len(), 2);
        assert!(sol.iterations <= 3, "took {} iterations", sol.iterations);
        assert_eq!(sol.stop, StopReason::DirectionStationary);
        let a = 1.0 / 3.0;
        let b = 14.0 / 3.0;
        for (got, want) in sol.x.iter().zip([a, a, a, b, b, b]) {
            assert!((got - want).abs() < 1e-5, "{got} vs {want}");
        }
        assert!((sol.objective - 14.0 / 3.0).abs() < 1e-6);
        // First iteration: one flat component at the mean, then a split.
        assert_eq!(sol.trace.records[0].n_components, 1);
        assert!((sol.trace.records[0].dir_deriv + 13.0).abs() < 1e-6);
    }

    #[test]
    fn both_direction_methods_agree_here() {
        let mut opts = SolveOptions::default();
        opts.direction_method = DirectionMethod::Ternary;
        let sol = cut_pursuit(&fused6(), &opts);
        assert_eq!(sol.partition.len(), 2);
        assert!((sol.objective - 14.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn partition_growth_is_strict_without_merging() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(4..10);
            let (spec, _) = random_instance(&mut rng, n);
            let mut opts = SolveOptions::default();
            opts.merge_eps = Some(0.0);
            let sol = cut_pursuit(&spec, &opts);
            assert!(sol.iterations <= n + 1);
            for pair in sol.trace.records.windows(2) {
                assert!(
                    pair[1].n_components > pair[0].n_components,
                    "components did not grow: {} -> {}",
                    pair[0].n_components,
                    pair[1].n_components
                );
            }
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> (ProblemSpec, ()) {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(0.5) {
                    edges.push((u, v, rng.gen_range(0.05..1.5)));
                }
            }
        }
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let terms: Vec<NonsmoothTerm> = (0..n)
            .map(|_| match rng.gen_range(0..5) {
                0 => NonsmoothTerm::Zero,
                1 => NonsmoothTerm::weighted_abs(rng.gen_range(0.0..1.5)).unwrap(),
                2 => NonsmoothTerm::NonnegIndicator,
                3 => NonsmoothTerm::weighted_abs_plus_nonneg(rng.gen_range(0.0..1.0)).unwrap(),
                _ => NonsmoothTerm::box_indicator(-2.0, 2.0).unwrap(),
            })
            .collect();
        let spec = ProblemSpec::new(
            WeightedGraph::new(n, &edges).unwrap(),
            SmoothTerm::QuadraticFidelity { matrix: None, y },
            terms,
        )
        .unwrap();
        (spec, ())
    }

    #[test]
    fn matches_baseline_and_is_stationary_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for trial in 0..25 {
            let n = rng.gen_range(3..9);
            let (spec, _) = random_instance(&mut rng, n);
            let sol = cut_pursuit(&spec, &SolveOptions::default());
            // Solution coordinates are in-domain, objective finite.
            assert!(sol.objective.is_finite());
            // No ternary direction descends from the returned point.
            let dir = exhaustive_ternary_direction(&spec, &sol.x, 1e-8);
            assert!(
                dir.value.value() >= -1e-5,
                "trial {trial}: residual descent {}",
                dir.value.value()
            );
            // Not worse than the direct solver at matched accuracy.
            let base = baseline_solve(&spec, 1e-10, 500_000);
            let base_obj = objective(&spec, &base.xi).value();
            assert!(
                sol.objective <= base_obj + 1e-5 * (1.0 + base_obj.abs()),
                "trial {trial}: {} vs baseline {base_obj}",
                sol.objective
            );
        }
    }

    #[test]
    fn strong_shrinkage_lands_exactly_on_zero() {
        let n = 5;
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 0.5)).collect();
        let spec = ProblemSpec::new(
            WeightedGraph::new(n, &edges).unwrap(),
            SmoothTerm::QuadraticFidelity {
                matrix: None,
                y: vec![0.4, -0.3, 0.2, -0.1, 0.3],
            },
            (0..n)
                .map(|_| NonsmoothTerm::weighted_abs(2.0).unwrap())
                .collect(),
        )
        .unwrap();
        let sol = cut_pursuit(&spec, &SolveOptions::default());
        for &v in &sol.x {
            assert_eq!(v, 0.0, "shrinkage left {v}");
        }
    }

    #[test]
    fn disconnected_graphs_solve_per_component() {
        let spec = ProblemSpec::new(
            WeightedGraph::new(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap(),
            SmoothTerm::QuadraticFidelity {
                matrix: None,
                y: vec![1.0, 1.0, -2.0, -2.0],
            },
            vec![NonsmoothTerm::Zero; 4],
        )
        .unwrap();
        let sol = cut_pursuit(&spec, &SolveOptions::default());
        let want = [1.0, 1.0, -2.0, -2.0];
        for (got, want) in sol.x.iter().zip(want) {
            assert!((got - want).abs() < 1e-6);
        }
        assert_eq!(sol.stop, StopReason::DirectionStationary);
    }

    #[test]
    fn nonneg_instances_stay_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 12;
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 0.3)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let spec = ProblemSpec::new(
            WeightedGraph::new(n, &edges).unwrap(),
            SmoothTerm::QuadraticFidelity { matrix: None, y },
            vec![NonsmoothTerm::NonnegIndicator; n],
        )
        .unwrap();
        let sol = cut_pursuit(&spec, &SolveOptions::default());
        assert!(sol.x.iter().all(|&v| v >= 0.0));
        assert!(sol.objective.is_finite());
    }
}
