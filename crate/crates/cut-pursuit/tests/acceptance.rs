//! End-to-end acceptance checks, one test per criterion. Each prints a
//! `criterion N: PASS` line with measured detail (visible with
//! `cargo test --test acceptance -- --nocapture`).

use cut_pursuit::cli::{gen_eeg_like, gen_multilabel_grid, load_problem, write_generated, LoadedProblem};
use cut_pursuit::direction::{
    build_ternary_network, exhaustive_ternary_direction, steepest_ternary_direction,
    steepest_ternary_two_cuts,
};
use cut_pursuit::driver::{cut_pursuit, SolveOptions, StopReason};
use cut_pursuit::functional::{
    dir_deriv, equal_edges, objective, vertex_deltas, NonsmoothTerm, ProblemSpec, SmoothTerm,
};
use cut_pursuit::graph::WeightedGraph;
use cut_pursuit::multidim::{
    alpha_expansion_direction, baseline_solve_multi, candidate_directions, cut_pursuit_multidim,
    multi_objective, simplex_violation,
};
use cut_pursuit::reduced::baseline_solve;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const EPS_EQ: f64 = 1e-8;

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> ProblemSpec {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(0.45) {
                edges.push((u, v, rng.gen_range(0.05..1.5)));
            }
        }
    }
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let terms: Vec<NonsmoothTerm> = (0..n)
        .map(|_| match rng.gen_range(0..4) {
            0 => NonsmoothTerm::weighted_abs(rng.gen_range(0.0..1.5)).unwrap(),
            1 => NonsmoothTerm::NonnegIndicator,
            2 => NonsmoothTerm::box_indicator(-2.0, 2.0).unwrap(),
            _ => NonsmoothTerm::weighted_abs_plus_nonneg(rng.gen_range(0.0..1.0)).unwrap(),
        })
        .collect();
    ProblemSpec::new(
        WeightedGraph::new(n, &edges).unwrap(),
        SmoothTerm::QuadraticFidelity { matrix: None, y },
        terms,
    )
    .unwrap()
}

/// In-domain point that lands on kinks and shared plateau levels with
/// sizeable probability, so equal edges and one-sided slopes get exercised.
fn random_point(rng: &mut ChaCha8Rng, spec: &ProblemSpec) -> Vec<f64> {
    let levels: [f64; 4] = [0.0, 0.5, -1.0, 1.5];
    spec.nonsmooth
        .iter()
        .map(|t| {
            let (lo, hi) = t.domain();
            if rng.gen_bool(0.6) {
                levels[rng.gen_range(0..levels.len())].clamp(lo, hi)
            } else {
                rng.gen_range(lo.max(-2.0)..hi.min(2.0))
            }
        })
        .collect()
}

fn shared_instances() -> Vec<(ProblemSpec, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(2..=12);
            let spec = random_instance(&mut rng, n);
            let x = random_point(&mut rng, &spec);
            (spec, x)
        })
        .collect()
}

#[test]
fn criterion_1_ternary_direction_matches_exhaustive_search() {
    let t0 = Instant::now();
    let mut max_dev = 0.0f64;
    for (i, (spec, x)) in shared_instances().into_iter().enumerate() {
        let cut = steepest_ternary_direction(&spec, &x, EPS_EQ);
        let oracle = exhaustive_ternary_direction(&spec, &x, EPS_EQ);
        let dev = (cut.value.value() - oracle.value.value()).abs();
        max_dev = max_dev.max(dev);
        assert!(
            dev <= 1e-9,
            "instance {i}: cut {} vs exhaustive {}",
            cut.value.value(),
            oracle.value.value()
        );
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 30.0, "took {secs:.1}s, budget is 30s");
    println!("criterion 1: PASS (200 instances, max deviation {max_dev:.2e}, {secs:.2}s)");
}

#[test]
fn criterion_2_two_cut_split_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut max_value_dev = 0.0f64;
    let mut max_add_dev = 0.0f64;
    for (i, (spec, x)) in shared_instances().into_iter().enumerate() {
        let two = steepest_ternary_two_cuts(&spec, &x, EPS_EQ);
        let staged = steepest_ternary_direction(&spec, &x, EPS_EQ);
        let dev = (two.value.value() - staged.value.value()).abs();
        max_value_dev = max_value_dev.max(dev);
        assert!(
            dev <= 1e-12,
            "instance {i}: two cuts {} vs two-stage {}",
            two.value.value(),
            staged.value.value()
        );
        let n = spec.vertex_count();
        for _ in 0..1000 {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let neg: Vec<f64> = d.iter().map(|&v| v.min(0.0)).collect();
            let pos: Vec<f64> = d.iter().map(|&v| v.max(0.0)).collect();
            let full = dir_deriv(&spec, &x, &d, EPS_EQ);
            let low = dir_deriv(&spec, &x, &neg, EPS_EQ);
            let high = dir_deriv(&spec, &x, &pos, EPS_EQ);
            if full.is_finite() {
                assert!(low.is_finite() && high.is_finite());
                let sum = low.value() + high.value();
                let dev = (full.value() - sum).abs();
                max_add_dev = max_add_dev.max(dev);
                assert!(
                    dev <= 1e-9 * (1.0 + full.value().abs()),
                    "instance {i}: F'(d) = {} but split sum = {sum}",
                    full.value()
                );
            } else {
                assert!(
                    !low.is_finite() || !high.is_finite(),
                    "instance {i}: infinite F'(d) but finite halves"
                );
            }
        }
    }
    println!(
        "criterion 2: PASS (value deviation {max_value_dev:.2e}, additivity deviation {max_add_dev:.2e} over 200x1000 directions)"
    );
}

#[test]
fn criterion_3_cut_values_match_direction_rates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut max_dev = 0.0f64;
    let mut flow_dev = 0.0f64;
    for trial in 0..60 {
        let n = rng.gen_range(2..=6);
        let spec = random_instance(&mut rng, n);
        let x = random_point(&mut rng, &spec);
        let deltas = vertex_deltas(&spec, &x, EPS_EQ);
        let equal = equal_edges(&spec.graph, &x, EPS_EQ);
        let mut tn = build_ternary_network(&deltas, spec.graph.edges(), &equal);
        let nodes = 2 * n + 2;

        // Every ternary direction corresponds to a cut with no anti-monotone
        // column; its crossing capacity must equal the rate plus the slack.
        let mut signs = vec![-1i8; n];
        loop {
            let mut side = vec![false; nodes];
            side[2 * n] = true;
            for (v, &s) in signs.iter().enumerate() {
                if s >= 0 {
                    side[v] = true;
                }
                if s == 1 {
                    side[n + v] = true;
                }
            }
            let cap = tn.net.cut_capacity(&side);
            let d: Vec<f64> = signs.iter().map(|&s| f64::from(s)).collect();
            let rate = dir_deriv(&spec, &x, &d, EPS_EQ);
            if rate.is_finite() {
                let expected = rate.value() + tn.offset;
                let dev = (cap - expected).abs();
                max_dev = max_dev.max(dev);
                assert!(
                    dev <= 1e-12,
                    "trial {trial}, direction {signs:?}: capacity {cap} vs rate+slack {expected}"
                );
            } else {
                assert!(
                    cap.is_infinite(),
                    "trial {trial}, direction {signs:?}: infinite rate but capacity {cap}"
                );
            }
            // Next sign vector in ternary counting order.
            let mut k = 0;
            while k < n && signs[k] == 1 {
                signs[k] = -1;
                k += 1;
            }
            if k == n {
                break;
            }
            signs[k] += 1;
        }

        // Exhaustive minimum over all source/sink labelings vs the flow value.
        let mut best = f64::INFINITY;
        for mask in 0..(1u32 << (2 * n)) {
            let mut side = vec![false; nodes];
            side[2 * n] = true;
            for b in 0..(2 * n) {
                side[b] = mask & (1 << b) != 0;
            }
            best = best.min(tn.net.cut_capacity(&side));
        }
        let (flow, _) = tn.net.max_flow_min_cut().unwrap();
        let dev = (flow - best).abs();
        flow_dev = flow_dev.max(dev);
        assert!(dev <= 1e-12, "trial {trial}: flow {flow} vs exhaustive min cut {best}");
    }
    println!(
        "criterion 3: PASS (60 networks, cut identity deviation {max_dev:.2e}, flow-vs-min-cut deviation {flow_dev:.2e})"
    );
}

#[test]
fn criterion_4_fused_chain_reaches_the_closed_form() {
    let t0 = Instant::now();
    let edges: Vec<(usize, usize, f64)> = (0..5).map(|i| (i, i + 1, 1.0)).collect();
    let spec = ProblemSpec::new(
        WeightedGraph::new(6, &edges).unwrap(),
        SmoothTerm::QuadraticFidelity {
            matrix: None,
            y: vec![0.0, 0.0, 0.0, 5.0, 5.0, 5.0],
        },
        vec![NonsmoothTerm::Zero; 6],
    )
    .unwrap();
    let sol = cut_pursuit(&spec, &SolveOptions::default());
    let mut max_err = 0.0f64;
    for (v, &val) in sol.x.iter().enumerate() {
        let want = if v < 3 { 1.0 / 3.0 } else { 14.0 / 3.0 };
        max_err = max_err.max((val - want).abs());
    }
    assert!(max_err <= 1e-5, "solution error {max_err}");
    assert_eq!(sol.partition.len(), 2, "expected exactly 2 components");
    assert!(sol.iterations <= 3, "took {} outer iterations", sol.iterations);
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 1.0, "took {secs:.2}s, budget is 1s");
    println!(
        "criterion 4: PASS (max coordinate error {max_err:.2e}, {} iterations, {} components, {secs:.3}s)",
        sol.iterations,
        sol.partition.len()
    );
}

fn eeg_instance(width: usize, height: usize, measurements: usize, sparsity: f64) -> ProblemSpec {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eeg.json");
    let generated =
        gen_eeg_like(width, height, measurements, sparsity, 0.02, 0.1, 0.1, 7, "eeg").unwrap();
    write_generated(&out, &generated).unwrap();
    match load_problem(&out).unwrap() {
        LoadedProblem::Scalar(spec) => spec,
        LoadedProblem::Multi(_) => unreachable!(),
    }
}

#[test]
fn criterion_5_source_grid_recovery_shape() {
    let t0 = Instant::now();
    let spec = eeg_instance(20, 10, 20, 0.05);
    let sol = cut_pursuit(&spec, &SolveOptions::default());
    assert!(sol.iterations <= 20, "took {} outer iterations", sol.iterations);
    assert!(
        sol.partition.len() <= 40,
        "{} components, budget |V|/5 = 40",
        sol.partition.len()
    );
    let min_coord = sol.x.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min_coord >= -1e-8, "negative coordinate {min_coord}");
    let base = baseline_solve(&spec, 1e-10, 2_000_000);
    let base_obj = objective(&spec, &base.xi).value();
    assert!(
        sol.objective <= base_obj + 1e-5 * (1.0 + base_obj.abs()),
        "objective {} vs direct solve {base_obj}",
        sol.objective
    );

    // Shrunken variant small enough for the exhaustive direction search.
    let small = eeg_instance(4, 3, 6, 0.2);
    let small_sol = cut_pursuit(&small, &SolveOptions::default());
    let oracle = exhaustive_ternary_direction(&small, &small_sol.x, EPS_EQ);
    assert!(
        oracle.value.value() >= -1e-5,
        "12-vertex variant: residual descent {}",
        oracle.value.value()
    );
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s, budget is 60s");
    println!(
        "criterion 5: PASS ({} iterations, {} components, objective {:.9} vs direct {base_obj:.9}, min coord {min_coord:.1e}, residual {:.1e}, {secs:.2}s)",
        sol.iterations,
        sol.partition.len(),
        sol.objective,
        oracle.value.value()
    );
}

#[test]
fn criterion_6_partition_growth_and_descent_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(6006);
    let opts = SolveOptions {
        merge_eps: Some(0.0),
        reduced_tol_factor: 1e-6,
        reduced_max_iter: 200_000,
        ..SolveOptions::default()
    };
    let mut checked = 0;
    for trial in 0..30 {
        let n = rng.gen_range(2..=10);
        let spec = random_instance(&mut rng, n);
        let sol = cut_pursuit(&spec, &opts);
        assert!(
            sol.iterations <= n,
            "trial {trial}: {} iterations on {n} vertices",
            sol.iterations
        );
        let records = &sol.trace.records;
        for pair in records.windows(2) {
            assert!(
                pair[1].n_components > pair[0].n_components,
                "trial {trial}: components went {} -> {} between iterations {} and {}",
                pair[0].n_components,
                pair[1].n_components,
                pair[0].iter,
                pair[1].iter
            );
        }
        for r in &records[..records.len() - 1] {
            assert!(
                r.dir_deriv < 0.0,
                "trial {trial}: non-final iteration {} returned rate {}",
                r.iter,
                r.dir_deriv
            );
            checked += 1;
        }
        if matches!(sol.stop, StopReason::DirectionStationary) {
            let last = records.last().unwrap();
            assert!(last.dir_deriv >= -opts.tol_dir);
        }
    }
    println!("criterion 6: PASS (30 instances, {checked} non-terminal iterations all strictly refined with negative rates)");
}

#[test]
fn criterion_7_multilabel_grid_moves_and_objective() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid.json");
    write_generated(&out, &gen_multilabel_grid(8, 8, 3, 0.15, 5, "grid").unwrap()).unwrap();
    let spec = match load_problem(&out).unwrap() {
        LoadedProblem::Multi(spec) => spec,
        LoadedProblem::Scalar(_) => unreachable!(),
    };
    let opts = SolveOptions::default();
    let sol = cut_pursuit_multidim(&spec, &opts);

    // Objective trace never increases beyond reduced-solve noise.
    for pair in sol.trace.records.windows(2) {
        assert!(
            pair[1].objective <= pair[0].objective + 1e-6 * (1.0 + pair[0].objective.abs()),
            "objective rose {} -> {} between iterations {} and {}",
            pair[0].objective,
            pair[1].objective,
            pair[0].iter,
            pair[1].iter
        );
    }

    // Replay each iterate (the solve is deterministic): simplex feasibility
    // throughout, and every expansion move non-increasing in energy.
    let mut moves = 0;
    for k in 1..=sol.iterations {
        let partial = cut_pursuit_multidim(&spec, &SolveOptions { max_iter: k, ..opts.clone() });
        let violation = simplex_violation(&partial.x, spec.k);
        assert!(violation <= 1e-8, "iterate {k}: simplex violation {violation}");
        let candidates = candidate_directions(&spec, &partial.x);
        let expansion = alpha_expansion_direction(&spec, &partial.x, &candidates, EPS_EQ);
        let mut prev = 0.0;
        for (slot, &val) in expansion.slot_values.iter().enumerate() {
            assert!(
                val <= prev + 1e-12,
                "iterate {k}, slot {slot}: energy rose {prev} -> {val}"
            );
            prev = val;
            moves += 1;
        }
    }

    let (base_x, _) = baseline_solve_multi(&spec, 1e-9, 500_000);
    let base_obj = multi_objective(&spec, &base_x);
    assert!(
        sol.objective <= base_obj + 0.05 * base_obj.abs(),
        "objective {} not within 5% of direct solve {base_obj}",
        sol.objective
    );
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s, budget is 60s");
    println!(
        "criterion 7: PASS ({} iterations, {moves} expansion moves all non-increasing, objective {:.6} vs direct {base_obj:.6}, {secs:.2}s)",
        sol.iterations, sol.objective
    );
}

#[test]
fn criterion_8_oracle_layer_numerics() {
    let mut rng = ChaCha8Rng::seed_from_u64(8008);

    // Gradients against central differences.
    let mut max_grad_dev = 0.0f64;
    for _ in 0..20 {
        let n = 5;
        let rows: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let term = SmoothTerm::QuadraticFidelity {
            matrix: Some(cut_pursuit::functional::DenseMatrix::from_rows(rows).unwrap()),
            y,
        };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let grad = term.gradient(&x);
        for v in 0..n {
            let h = 1e-5 * (1.0 + x[v].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[v] += h;
            xm[v] -= h;
            let fd = (term.value(&xp) - term.value(&xm)) / (2.0 * h);
            let dev = (grad[v] - fd).abs() / (1.0 + grad[v].abs());
            max_grad_dev = max_grad_dev.max(dev);
            assert!(dev <= 1e-6, "gradient {} vs fd {fd}", grad[v]);
        }
    }

    // One-sided slopes against one-sided difference quotients.
    let kinds = [
        NonsmoothTerm::Zero,
        NonsmoothTerm::weighted_abs(0.8).unwrap(),
        NonsmoothTerm::NonnegIndicator,
        NonsmoothTerm::weighted_abs_plus_nonneg(0.6).unwrap(),
        NonsmoothTerm::box_indicator(-1.5, 2.0).unwrap(),
    ];
    let mut max_slope_dev = 0.0f64;
    let h = 1e-7;
    for term in &kinds {
        let (lo, hi) = term.domain();
        let mut points = vec![0.0, 0.3, -0.4, 1.0];
        points.extend(term.kinks());
        if lo.is_finite() {
            points.push(lo);
        }
        if hi.is_finite() {
            points.push(hi);
        }
        for &t in &points {
            if t < lo || t > hi {
                continue;
            }
            for (slope, dir) in [(term.dd_plus(t), 1.0), (term.dd_minus(t), -1.0)] {
                let ahead = term.value(t + dir * h);
                if slope.is_finite() {
                    assert!(ahead.is_finite(), "finite slope but infinite step value at {t}");
                    let q = (ahead.value() - term.value(t).value()) / h;
                    let dev = (slope.value() - q).abs() / (1.0 + slope.value().abs());
                    max_slope_dev = max_slope_dev.max(dev);
                    assert!(dev <= 1e-4, "slope {} vs quotient {q} at {t}", slope.value());
                } else {
                    assert!(
                        !ahead.is_finite(),
                        "infinite slope but value {} one step along at {t}",
                        ahead.value()
                    );
                }
            }
        }
    }

    // Proximal steps beat a dense scan of candidates.
    let mut max_prox_gap = 0.0f64;
    for term in &kinds {
        for _ in 0..40 {
            let t = rng.gen_range(-4.0..4.0);
            let step = rng.gen_range(0.1..2.0);
            let u = term.prox(t, step);
            let score = |c: f64| term.value(c).value() + (c - t) * (c - t) / (2.0 * step);
            let (lo, hi) = term.domain();
            let a = lo.max(t - 6.0);
            let b = hi.min(t + 6.0);
            let mut best = f64::INFINITY;
            let grid = 24_000;
            for g in 0..=grid {
                let c = a + (b - a) * g as f64 / grid as f64;
                best = best.min(score(c));
            }
            for k in term.kinks() {
                if k >= lo && k <= hi {
                    best = best.min(score(k));
                }
            }
            let gap = score(u) - best;
            max_prox_gap = max_prox_gap.max(gap);
            assert!(gap <= 1e-10, "prox({t}, {step}) = {u} loses to the scan by {gap}");
        }
    }

    // Positive homogeneity of the directional derivative.
    let mut max_hom_dev = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(2..8);
        let spec = random_instance(&mut rng, n);
        let x = random_point(&mut rng, &spec);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = dir_deriv(&spec, &x, &d, EPS_EQ);
        for lambda in [0.0, 0.5, 2.0, 10.0] {
            let scaled: Vec<f64> = d.iter().map(|&v| lambda * v).collect();
            let got = dir_deriv(&spec, &x, &scaled, EPS_EQ);
            if lambda == 0.0 {
                assert_eq!(got.value(), 0.0);
                continue;
            }
            if base.is_finite() {
                let want = lambda * base.value();
                let dev = (got.value() - want).abs();
                max_hom_dev = max_hom_dev.max(dev / (1.0 + want.abs()));
                assert!(
                    dev <= 1e-9 * (1.0 + want.abs()),
                    "F'(x, {lambda} d) = {} vs {lambda} F'(x, d) = {want}",
                    got.value()
                );
            } else {
                assert!(!got.is_finite());
            }
        }
    }

    println!(
        "criterion 8: PASS (gradient dev {max_grad_dev:.2e}, slope dev {max_slope_dev:.2e}, prox gap {max_prox_gap:.2e}, homogeneity dev {max_hom_dev:.2e})"
    );
}

#[test]
fn criterion_9_speed_against_the_direct_solver() {
    let spec = eeg_instance(20, 10, 20, 0.05);
    let opts = SolveOptions::default();

    let mut t_cp = f64::INFINITY;
    let mut obj_cp = f64::NAN;
    for _ in 0..3 {
        let t0 = Instant::now();
        let sol = cut_pursuit(&spec, &opts);
        t_cp = t_cp.min(t0.elapsed().as_secs_f64());
        obj_cp = sol.objective;
    }

    let tight = baseline_solve(&spec, 1e-10, 2_000_000);
    let obj_tight = objective(&spec, &tight.xi).value();
    let reference = obj_cp.min(obj_tight);
    let target = reference + 1e-6 * (1.0 + reference.abs());
    assert!(obj_cp <= target, "working-set objective {obj_cp} misses the matched target {target}");

    // Smallest power-of-two iteration budget that brings the direct solver
    // to the same objective quality, timed on its own.
    let mut budget = 64;
    let t_base = loop {
        let sol = baseline_solve(&spec, 1e-16, budget);
        let obj = objective(&spec, &sol.xi).value();
        if obj <= target {
            let mut best = f64::INFINITY;
            for _ in 0..3 {
                let t0 = Instant::now();
                let _ = baseline_solve(&spec, 1e-16, budget);
                best = best.min(t0.elapsed().as_secs_f64());
            }
            break best;
        }
        budget *= 2;
        assert!(budget <= 8_000_000, "direct solver never reached the matched objective");
    };

    assert!(
        t_cp <= 0.5 * t_base,
        "working-set {t_cp:.4}s vs direct {t_base:.4}s at matched objective (budget {budget})"
    );
    println!(
        "criterion 9: PASS (working-set {t_cp:.4}s vs direct {t_base:.4}s to reach objective {target:.9}; {budget} direct iterations)"
    );
}
