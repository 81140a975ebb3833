//! Tolerance sweep on a noisy 2-d fused lasso: the working-set solver against
//! the direct full-graph splitting iteration, one table row per solver and
//! tolerance. The same table is available from the command line as
//! `cut-pursuit compare <problem.json>`.
//!
//! Run with `cargo run --release --example compare_solvers`.

use cut_pursuit::cli::{gen_fused2d, load_problem, write_generated, LoadedProblem};
use cut_pursuit::functional::objective;
use cut_pursuit::reduced::baseline_solve;
use cut_pursuit::{cut_pursuit, SolveOptions};
use std::time::Instant;

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fused2d.json");
    write_generated(&path, &gen_fused2d(16, 16, 0.25, 42).unwrap()).unwrap();
    let spec = match load_problem(&path).unwrap() {
        LoadedProblem::Scalar(spec) => spec,
        LoadedProblem::Multi(_) => unreachable!(),
    };
    println!("16x16 grid, {} edges\n", spec.graph.edges().len());
    println!("solver        tol     objective        time      iterations  components");

    for tol in [1e-4, 1e-6, 1e-8] {
        let opts = SolveOptions { tol_dir: tol, tol_x: tol, ..SolveOptions::default() };
        let t0 = Instant::now();
        let sol = cut_pursuit(&spec, &opts);
        println!(
            "working-set  {tol:>5.0e}  {:>14.9}  {:>8.4}s  {:>10}  {:>10}",
            sol.objective,
            t0.elapsed().as_secs_f64(),
            sol.iterations,
            sol.partition.len()
        );
    }
    for tol in [1e-4, 1e-6, 1e-8] {
        let t0 = Instant::now();
        let sol = baseline_solve(&spec, tol, 1_000_000);
        println!(
            "direct       {tol:>5.0e}  {:>14.9}  {:>8.4}s  {:>10}  {:>10}",
            objective(&spec, &sol.xi).value(),
            t0.elapsed().as_secs_f64(),
            sol.iterations,
            spec.vertex_count()
        );
    }
}
