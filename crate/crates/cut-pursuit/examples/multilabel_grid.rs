//! Simplex-valued labeling on a grid: each vertex carries a probability
//! vector over three classes, fit to noisy class scores under a smoothed
//! divergence with a total variation penalty coupling neighbors. Descent
//! directions come from one expansion move per class.
//!
//! Run with `cargo run --release --example multilabel_grid`.

use cut_pursuit::cli::{gen_multilabel_grid, load_problem, write_generated, LoadedProblem};
use cut_pursuit::multidim::{baseline_solve_multi, multi_objective, simplex_violation};
use cut_pursuit::{cut_pursuit_multidim, SolveOptions};

fn argmax_row(p: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = j;
        }
    }
    best
}

fn main() {
    let (width, height, k) = (12, 8, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    write_generated(&path, &gen_multilabel_grid(width, height, k, 0.2, 5, "grid").unwrap()).unwrap();
    let spec = match load_problem(&path).unwrap() {
        LoadedProblem::Multi(spec) => spec,
        LoadedProblem::Scalar(_) => unreachable!(),
    };

    let sol = cut_pursuit_multidim(&spec, &SolveOptions::default());
    let (base_x, _) = baseline_solve_multi(&spec, 1e-9, 500_000);
    let base_obj = multi_objective(&spec, &base_x);

    println!("objective {:.6} (direct solver reaches {:.6})", sol.objective, base_obj);
    println!(
        "{} outer iterations, simplex violation {:.1e}\n",
        sol.iterations,
        simplex_violation(&sol.x, k)
    );

    println!("most likely class per vertex:");
    for row in 0..height {
        let line: String = (0..width)
            .map(|col| {
                let v = row * width + col;
                char::from(b'a' + argmax_row(&sol.x[v * k..(v + 1) * k]) as u8)
            })
            .collect();
        println!("  {line}");
    }

    assert!(simplex_violation(&sol.x, k) <= 1e-8);
    assert!(sol.objective <= base_obj + 0.05 * base_obj.abs());
}
