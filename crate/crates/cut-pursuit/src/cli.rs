//! File formats and command implementations behind the `cut-pursuit` binary:
//! problem JSON loading, CSV readers and writers, synthetic instance
//! generators, and the solve/baseline/compare/gen/direction entry points.
//!
//! Formats:
//! - problem: JSON with `graph` (vertex count plus inline `[u, v, w]` rows or
//!   an edge CSV path), optional `smooth` and `nonsmooth` sections, optional
//!   `tv_scale`, optional `multidim` block (`k`, `q` CSV path, `beta`).
//! - edge CSV: header `u,v,w`, one edge per line.
//! - solution CSV: header `vertex,value`, or `vertex,k,value` for
//!   vector-valued problems.
//! - trace CSV: header `iter,elapsed_s,objective,n_components,dir_deriv,stop_reason`
//!   with the stop reason only on the final row.
//! - comparison CSV: header `solver,tol,objective,wall_time_s,iterations,components`
//!   plus a `dice` column when a ground-truth file is supplied.
//! - matrices and simplex references: raw numeric CSV rows (no header);
//!   sparse matrices alternatively as `i,j,value` triplets with a header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! re-reading a solution reproduces the traced objective exactly.

use crate::direction::steepest_ternary_two_cuts;
use crate::driver::{cut_pursuit, DirectionMethod, Solution, SolveOptions, SolveTrace, StopReason};
use crate::functional::{
    objective, snap_nonsmooth, DenseMatrix, NonsmoothTerm, ProblemSpec, SmoothTerm,
};
use crate::graph::{refine_partition, refine_partition_vec, Partition, WeightedGraph};
use crate::multidim::{
    baseline_solve_multi, baseline_solve_multi_traced, cut_pursuit_multidim, multi_objective,
    MultiProblemSpec, MultiSmoothTerm, MultiSolution,
};
use crate::reduced::{baseline_solve, baseline_solve_traced, BaselineCheckpoint};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Problem file schema.

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub graph: GraphSection,
    #[serde(default)]
    pub smooth: Option<SmoothSection>,
    #[serde(default)]
    pub nonsmooth: Option<NonsmoothSection>,
    #[serde(default)]
    pub tv_scale: Option<f64>,
    #[serde(default)]
    pub multidim: Option<MultidimSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub vertex_count: usize,
    pub edges: EdgeSource,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum EdgeSource {
    Inline(Vec<(usize, usize, f64)>),
    Path(String),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothSection {
    Zero,
    Quadratic {
        y: VecSource,
        #[serde(default)]
        matrix: Option<MatrixSection>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum VecSource {
    Inline(Vec<f64>),
    Path(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSection {
    pub path: String,
    /// `dense` (default): raw numeric rows. `triplets`: `i,j,value` lines
    /// with a header; requires `rows`.
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub rows: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum NonsmoothSection {
    Uniform(TermSection),
    PerVertex(Vec<TermSection>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSection {
    pub kind: String,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultidimSection {
    pub k: usize,
    /// Path to a `|V| x K` CSV of reference distributions.
    pub q: String,
    pub beta: f64,
}

/// A fully constructed problem, scalar or vector-valued.
#[derive(Debug)]
pub enum LoadedProblem {
    Scalar(ProblemSpec),
    Multi(MultiProblemSpec),
}

impl LoadedProblem {
    pub fn vertex_count(&self) -> usize {
        match self {
            LoadedProblem::Scalar(s) => s.vertex_count(),
            LoadedProblem::Multi(m) => m.vertex_count(),
        }
    }
}

/// Reads and validates a problem file; referenced paths resolve relative to
/// the file's directory.
pub fn load_problem(path: &Path) -> Result<LoadedProblem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ProblemFile =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    build_problem(file, base)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn build_problem(file: ProblemFile, base: &Path) -> Result<LoadedProblem, CliError> {
    let n = file.graph.vertex_count;
    if n == 0 {
        return Err(CliError::Schema(
            "graph.vertex_count: empty graph (no vertices to solve over)".into(),
        ));
    }
    let mut edges = match file.graph.edges {
        EdgeSource::Inline(e) => e,
        EdgeSource::Path(p) => read_edge_csv(&resolve(base, &p))?,
    };
    let tv_scale = file.tv_scale.unwrap_or(1.0);
    if !tv_scale.is_finite() || tv_scale < 0.0 {
        return Err(CliError::Schema(format!(
            "tv_scale: expected a finite nonnegative number, got {tv_scale}"
        )));
    }
    for e in &mut edges {
        e.2 *= tv_scale;
    }
    let graph = WeightedGraph::new(n, &edges)
        .map_err(|e| CliError::Schema(format!("graph.edges: {e}")))?;

    if let Some(md) = file.multidim {
        let q = read_matrix_rows(&resolve(base, &md.q))?;
        if q.len() != n {
            return Err(CliError::Schema(format!(
                "multidim.q: expected {n} rows, got {}",
                q.len()
            )));
        }
        if q.iter().any(|row| row.len() != md.k) {
            return Err(CliError::Schema(format!(
                "multidim.q: expected {} columns in every row",
                md.k
            )));
        }
        let flat: Vec<f64> = q.into_iter().flatten().collect();
        let spec = MultiProblemSpec::new(
            graph,
            md.k,
            MultiSmoothTerm::SmoothedKl {
                q: flat,
                beta: md.beta,
            },
        )
        .map_err(|e| CliError::Schema(format!("multidim: {e}")))?;
        return Ok(LoadedProblem::Multi(spec));
    }

    let smooth = match file.smooth {
        None | Some(SmoothSection::Zero) => SmoothTerm::Zero,
        Some(SmoothSection::Quadratic { y, matrix }) => {
            let y = match y {
                VecSource::Inline(v) => v,
                VecSource::Path(p) => read_vector_csv(&resolve(base, &p))?,
            };
            let matrix = match matrix {
                None => None,
                Some(m) => Some(read_matrix_section(&m, base, n)?),
            };
            SmoothTerm::QuadraticFidelity { matrix, y }
        }
    };
    let nonsmooth = match file.nonsmooth {
        None => vec![NonsmoothTerm::Zero; n],
        Some(NonsmoothSection::Uniform(t)) => vec![build_term(&t, "nonsmooth")?; n],
        Some(NonsmoothSection::PerVertex(ts)) => {
            if ts.len() != n {
                return Err(CliError::Schema(format!(
                    "nonsmooth: expected {n} per-vertex terms, got {}",
                    ts.len()
                )));
            }
            ts.iter()
                .enumerate()
                .map(|(v, t)| build_term(t, &format!("nonsmooth[{v}]")))
                .collect::<Result<_, _>>()?
        }
    };
    let spec = ProblemSpec::new(graph, smooth, nonsmooth)
        .map_err(|e| CliError::Schema(format!("problem: {e}")))?;
    Ok(LoadedProblem::Scalar(spec))
}

fn read_matrix_section(m: &MatrixSection, base: &Path, cols: usize) -> Result<DenseMatrix, CliError> {
    let path = resolve(base, &m.path);
    match m.format.as_deref().unwrap_or("dense") {
        "dense" => {
            let rows = read_matrix_rows(&path)?;
            DenseMatrix::from_rows(rows)
                .map_err(|e| CliError::Schema(format!("smooth.matrix: {e}")))
        }
        "triplets" => {
            let rows = m.rows.ok_or_else(|| {
                CliError::Schema("smooth.matrix.rows: required for triplet format".into())
            })?;
            let triplets = read_triplet_csv(&path)?;
            DenseMatrix::from_triplets(rows, cols, &triplets)
                .map_err(|e| CliError::Schema(format!("smooth.matrix: {e}")))
        }
        other => Err(CliError::Schema(format!(
            "smooth.matrix.format: expected \"dense\" or \"triplets\", got \"{other}\""
        ))),
    }
}

fn build_term(t: &TermSection, field: &str) -> Result<NonsmoothTerm, CliError> {
    let lambda = |what: &str| {
        t.lambda.ok_or_else(|| {
            CliError::Schema(format!("{field}.lambda: required for kind \"{what}\""))
        })
    };
    let term = match t.kind.as_str() {
        "zero" => NonsmoothTerm::Zero,
        "weighted_abs" => NonsmoothTerm::weighted_abs(lambda("weighted_abs")?)
            .map_err(|e| CliError::Schema(format!("{field}: {e}")))?,
        "nonneg" => NonsmoothTerm::NonnegIndicator,
        "weighted_abs_plus_nonneg" => {
            NonsmoothTerm::weighted_abs_plus_nonneg(lambda("weighted_abs_plus_nonneg")?)
                .map_err(|e| CliError::Schema(format!("{field}: {e}")))?
        }
        "box" => {
            let lo = t.lo.unwrap_or(f64::NEG_INFINITY);
            let hi = t.hi.unwrap_or(f64::INFINITY);
            NonsmoothTerm::box_indicator(lo, hi)
                .map_err(|e| CliError::Schema(format!("{field}: {e}")))?
        }
        other => {
            return Err(CliError::Schema(format!(
                "{field}.kind: unknown kind \"{other}\""
            )))
        }
    };
    Ok(term)
}

// ---------------------------------------------------------------------------
// CSV primitives.

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_f64(path: &Path, line_no: usize, s: &str) -> Result<f64, CliError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(path, format!("line {line_no}: expected a number, got {s:?}")))
}

fn parse_usize(path: &Path, line_no: usize, s: &str) -> Result<usize, CliError> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| parse_err(path, format!("line {line_no}: expected an index, got {s:?}")))
}

/// Edge list: header `u,v,w`, then one edge per line.
pub fn read_edge_csv(path: &Path) -> Result<Vec<(usize, usize, f64)>, CliError> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if i == 0 && line.starts_with('u') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, format!("line {}: expected u,v,w", i + 1)));
        }
        out.push((
            parse_usize(path, i + 1, parts[0])?,
            parse_usize(path, i + 1, parts[1])?,
            parse_f64(path, i + 1, parts[2])?,
        ));
    }
    Ok(out)
}

pub fn write_edge_csv(path: &Path, edges: &[(usize, usize, f64)]) -> Result<(), CliError> {
    let mut s = String::from("u,v,w\n");
    for &(u, v, w) in edges {
        let _ = writeln!(s, "{u},{v},{w}");
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

/// One number per line, no header.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let lines = read_lines(path)?;
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_f64(path, i + 1, l))
        .collect()
}

/// Raw numeric rows, no header; all rows must have equal width.
pub fn read_matrix_rows(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let lines = read_lines(path)?;
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|s| parse_f64(path, i + 1, s))
            .collect();
        rows.push(row?);
    }
    Ok(rows)
}

fn write_matrix_rows(rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

/// Sparse matrix triplets: header `i,j,value`.
pub fn read_triplet_csv(path: &Path) -> Result<Vec<(usize, usize, f64)>, CliError> {
    let lines = read_lines(path)?;
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if i == 0 && line.starts_with('i') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(parse_err(path, format!("line {}: expected i,j,value", i + 1)));
        }
        out.push((
            parse_usize(path, i + 1, parts[0])?,
            parse_usize(path, i + 1, parts[1])?,
            parse_f64(path, i + 1, parts[2])?,
        ));
    }
    Ok(out)
}

/// Solution rows `vertex,value`; every vertex below `n` must appear once.
pub fn read_solution_csv(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let lines = read_lines(path)?;
    let mut x = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (i, line) in lines.iter().enumerate() {
        if i == 0 && line.starts_with("vertex") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            return Err(parse_err(path, format!("line {}: expected vertex,value", i + 1)));
        }
        let v = parse_usize(path, i + 1, parts[0])?;
        if v >= n {
            return Err(parse_err(
                path,
                format!("line {}: vertex {v} out of range for {n} vertices", i + 1),
            ));
        }
        if seen[v] {
            return Err(parse_err(path, format!("line {}: vertex {v} repeated", i + 1)));
        }
        seen[v] = true;
        x[v] = parse_f64(path, i + 1, parts[1])?;
    }
    if let Some(v) = seen.iter().position(|&s| !s) {
        return Err(parse_err(path, format!("vertex {v} missing")));
    }
    Ok(x)
}

pub fn write_solution_csv(path: &Path, x: &[f64]) -> Result<(), CliError> {
    let mut s = String::from("vertex,value\n");
    for (v, val) in x.iter().enumerate() {
        let _ = writeln!(s, "{v},{val}");
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn write_multi_solution_csv(path: &Path, x: &[f64], k: usize) -> Result<(), CliError> {
    let mut s = String::from("vertex,k,value\n");
    for (v, row) in x.chunks(k).enumerate() {
        for (j, val) in row.iter().enumerate() {
            let _ = writeln!(s, "{v},{j},{val}");
        }
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

const TRACE_HEADER: &str = "iter,elapsed_s,objective,n_components,dir_deriv,stop_reason";

pub fn write_trace_csv(path: &Path, trace: &SolveTrace, stop: StopReason) -> Result<(), CliError> {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    let last = trace.records.len().saturating_sub(1);
    for (i, r) in trace.records.iter().enumerate() {
        let reason = if i == last { stop.to_string() } else { String::new() };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iter, r.elapsed_s, r.objective, r.n_components, r.dir_deriv, reason
        );
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn write_baseline_trace_csv(
    path: &Path,
    checkpoints: &[BaselineCheckpoint],
    n_components: usize,
    converged: bool,
) -> Result<(), CliError> {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    let last = checkpoints.len().saturating_sub(1);
    for (i, c) in checkpoints.iter().enumerate() {
        let reason = if i == last {
            if converged {
                "small_evolution"
            } else {
                "max_iter"
            }
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{},{},{},{},,{}",
            c.iteration, c.elapsed_s, c.objective, n_components, reason
        );
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

/// Support-overlap score `2|A n B| / (|A| + |B|)` with supports thresholded
/// at `eps`; two empty supports count as perfect agreement.
pub fn dice_score(a: &[f64], b: &[f64], eps: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut in_a = 0usize;
    let mut in_b = 0usize;
    let mut both = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let sa = x.abs() > eps;
        let sb = y.abs() > eps;
        in_a += usize::from(sa);
        in_b += usize::from(sb);
        both += usize::from(sa && sb);
    }
    if in_a + in_b == 0 {
        1.0
    } else {
        2.0 * both as f64 / (in_a + in_b) as f64
    }
}

/// Number of maximal connected components with equal values (within `eps`).
pub fn component_count(graph: &WeightedGraph, x: &[f64], eps: f64) -> usize {
    refine_partition(graph, &Partition::coarsest(graph), x, eps).len()
}

pub fn component_count_vec(graph: &WeightedGraph, x: &[f64], k: usize, eps: f64) -> usize {
    refine_partition_vec(graph, &Partition::coarsest(graph), x, k, eps).len()
}

// ---------------------------------------------------------------------------
// Generators. Everything is a pure function of the parameters and seed.

/// A problem JSON document plus the auxiliary CSV files it references
/// (by bare file name, resolved next to the JSON).
pub struct GeneratedProblem {
    pub problem: serde_json::Value,
    pub aux: Vec<(String, String)>,
}

/// Writes the problem JSON to `out` and its auxiliary files next to it.
pub fn write_generated(out: &Path, generated: &GeneratedProblem) -> Result<(), CliError> {
    let dir = out.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(&generated.problem)
        .expect("generated problems serialize");
    text.push('\n');
    fs::write(out, text).map_err(|e| io_err(out, e))?;
    for (name, content) in &generated.aux {
        let path = dir.join(name);
        fs::write(&path, content).map_err(|e| io_err(&path, e))?;
    }
    Ok(())
}

fn chain_edges(n: usize, w: f64) -> Vec<(usize, usize, f64)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1, w)).collect()
}

fn grid_edges(width: usize, height: usize, w: f64) -> Vec<(usize, usize, f64)> {
    let id = |x: usize, y: usize| y * width + x;
    let mut edges = Vec::new();
    for y in 0..height {
        for x in 0..width {
            if x + 1 < width {
                edges.push((id(x, y), id(x + 1, y), w));
            }
            if y + 1 < height {
                edges.push((id(x, y), id(x, y + 1), w));
            }
        }
    }
    edges
}

fn edges_json(edges: &[(usize, usize, f64)]) -> serde_json::Value {
    json!(edges
        .iter()
        .map(|&(u, v, w)| json!([u, v, w]))
        .collect::<Vec<_>>())
}

/// Step signal on a chain: first half 0, second half 5, Gaussian noise on
/// top. Size 6 with zero noise is the canonical two-plateau instance.
pub fn gen_fused1d(size: usize, noise: f64, seed: u64) -> Result<GeneratedProblem, CliError> {
    if size < 2 {
        return Err(CliError::Usage("fused1d needs --size >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<f64> = (0..size)
        .map(|i| {
            let level = if i < size / 2 { 0.0 } else { 5.0 };
            level + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(GeneratedProblem {
        problem: json!({
            "graph": { "vertex_count": size, "edges": edges_json(&chain_edges(size, 1.0)) },
            "smooth": { "kind": "quadratic", "y": y },
            "tv_scale": 1.0,
        }),
        aux: Vec::new(),
    })
}

/// Step signal on a grid: a centered rectangle at 5 over a 0 background,
/// Gaussian noise on top.
pub fn gen_fused2d(
    width: usize,
    height: usize,
    noise: f64,
    seed: u64,
) -> Result<GeneratedProblem, CliError> {
    if width < 2 || height < 2 {
        return Err(CliError::Usage("fused2d needs --width and --height >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(width * height);
    for row in 0..height {
        for col in 0..width {
            let inside = col >= width / 4
                && col < width - width / 4
                && row >= height / 4
                && row < height - height / 4;
            let level = if inside { 5.0 } else { 0.0 };
            y.push(level + noise * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok(GeneratedProblem {
        problem: json!({
            "graph": { "vertex_count": width * height,
                        "edges": edges_json(&grid_edges(width, height, 1.0)) },
            "smooth": { "kind": "quadratic", "y": y },
            "tv_scale": 1.0,
        }),
        aux: Vec::new(),
    })
}

/// Sparse nonnegative source recovery: a grid of sources of which a few
/// connected blobs are active, a dense random sensing matrix, noisy linear
/// measurements, and an l1-plus-nonnegativity vertex term. Also emits the
/// ground truth for support scoring.
#[allow(clippy::too_many_arguments)]
pub fn gen_eeg_like(
    width: usize,
    height: usize,
    measurements: usize,
    sparsity: f64,
    noise: f64,
    lambda: f64,
    tv: f64,
    seed: u64,
    stem: &str,
) -> Result<GeneratedProblem, CliError> {
    let n = width * height;
    if n < 4 || measurements == 0 {
        return Err(CliError::Usage(
            "eeg_like needs --width, --height and --measurements > 0".into(),
        ));
    }
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(CliError::Usage("eeg_like needs --sparsity in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Ground truth: a few connected constant blobs of activity.
    let target_active = ((n as f64 * sparsity).round() as usize).max(1);
    let n_blobs = (target_active / 5).clamp(1, 4);
    let mut truth = vec![0.0f64; n];
    let neighbors = |v: usize| {
        let (x, y) = (v % width, v / width);
        let mut out = Vec::with_capacity(4);
        if x > 0 {
            out.push(v - 1);
        }
        if x + 1 < width {
            out.push(v + 1);
        }
        if y > 0 {
            out.push(v - width);
        }
        if y + 1 < height {
            out.push(v + width);
        }
        out
    };
    let blob_size = (target_active / n_blobs).max(1);
    for _ in 0..n_blobs {
        let level = rng.gen_range(1.0..3.0);
        let start = rng.gen_range(0..n);
        let mut frontier = vec![start];
        let mut grown = 0;
        while grown < blob_size && !frontier.is_empty() {
            let pick = rng.gen_range(0..frontier.len());
            let v = frontier.swap_remove(pick);
            if truth[v] != 0.0 {
                continue;
            }
            truth[v] = level;
            grown += 1;
            for u in neighbors(v) {
                if truth[u] == 0.0 {
                    frontier.push(u);
                }
            }
        }
    }

    // Dense sensing matrix, unit-ish row energy.
    let scale = 1.0 / (measurements as f64).sqrt();
    let phi: Vec<Vec<f64>> = (0..measurements)
        .map(|_| {
            (0..n)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let y: Vec<f64> = phi
        .iter()
        .map(|row| {
            let exact: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
            exact + noise * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let edges = grid_edges(width, height, 1.0);
    let mut edge_csv = String::from("u,v,w\n");
    for &(u, v, w) in &edges {
        let _ = writeln!(edge_csv, "{u},{v},{w}");
    }
    let mut truth_csv = String::from("vertex,value\n");
    for (v, val) in truth.iter().enumerate() {
        let _ = writeln!(truth_csv, "{v},{val}");
    }
    Ok(GeneratedProblem {
        problem: json!({
            "graph": { "vertex_count": n, "edges": format!("{stem}_edges.csv") },
            "smooth": { "kind": "quadratic", "y": y,
                        "matrix": { "path": format!("{stem}_phi.csv"), "format": "dense" } },
            "nonsmooth": { "kind": "weighted_abs_plus_nonneg", "lambda": lambda },
            "tv_scale": tv,
        }),
        aux: vec![
            (format!("{stem}_edges.csv"), edge_csv),
            (format!("{stem}_phi.csv"), write_matrix_rows(&phi)),
            (format!("{stem}_truth.csv"), truth_csv),
        ],
    })
}

/// Simplex-valued labeling on a grid: left region dominated by class 0,
/// right region by class 1, noisy reference distributions.
pub fn gen_multilabel_grid(
    width: usize,
    height: usize,
    classes: usize,
    noise: f64,
    seed: u64,
    stem: &str,
) -> Result<GeneratedProblem, CliError> {
    if width < 2 || height < 2 || classes < 2 {
        return Err(CliError::Usage(
            "multilabel_grid needs --width, --height >= 2 and --classes >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = width * height;
    let mut q_rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for row in 0..height {
        let _ = row;
        for col in 0..width {
            let major = usize::from(col >= width / 2) % classes;
            let spread = 0.3 / classes as f64;
            let raw: Vec<f64> = (0..classes)
                .map(|c| {
                    let base = if c == major { 0.7 } else { spread };
                    base + noise * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            let mut projected = vec![0.0; classes];
            crate::multidim::project_simplex(&raw, &mut projected);
            q_rows.push(projected);
        }
    }
    Ok(GeneratedProblem {
        problem: json!({
            "graph": { "vertex_count": n,
                        "edges": edges_json(&grid_edges(width, height, 1.0)) },
            "tv_scale": 0.3,
            "multidim": { "k": classes, "q": format!("{stem}_q.csv"), "beta": 0.2 },
        }),
        aux: vec![(format!("{stem}_q.csv"), write_matrix_rows(&q_rows))],
    })
}

// ---------------------------------------------------------------------------
// Commands.

/// Runs the working-set solver and writes the solution (and optional trace).
pub fn cmd_solve(
    problem_path: &Path,
    out: &Path,
    trace_out: Option<&Path>,
    opts: &SolveOptions,
) -> Result<(), CliError> {
    match load_problem(problem_path)? {
        LoadedProblem::Scalar(spec) => {
            let sol = cut_pursuit(&spec, opts);
            write_solution_csv(out, &sol.x)?;
            if let Some(tp) = trace_out {
                write_trace_csv(tp, &sol.trace, sol.stop)?;
            }
            print_solution_summary(&sol);
        }
        LoadedProblem::Multi(spec) => {
            let sol = cut_pursuit_multidim(&spec, opts);
            write_multi_solution_csv(out, &sol.x, spec.k)?;
            if let Some(tp) = trace_out {
                write_trace_csv(tp, &sol.trace, sol.stop)?;
            }
            print_multi_summary(&sol);
        }
    }
    Ok(())
}

fn print_solution_summary(sol: &Solution) {
    println!("objective: {}", sol.objective);
    println!("iterations: {}", sol.iterations);
    println!("components: {}", sol.partition.len());
    println!("stop: {}", sol.stop);
    if sol.trace.reduced_warning {
        eprintln!("warning: a reduced solve hit its iteration budget before its tolerance");
    }
}

fn print_multi_summary(sol: &MultiSolution) {
    println!("objective: {}", sol.objective);
    println!("iterations: {}", sol.iterations);
    println!("components: {}", sol.partition.len());
    println!("stop: {}", sol.stop);
    if sol.trace.reduced_warning {
        eprintln!("warning: a reduced solve hit its iteration budget before its tolerance");
    }
}

const BASELINE_CHECKPOINT_EVERY: usize = 200;

/// Runs the direct full-graph splitting solver.
pub fn cmd_baseline(
    problem_path: &Path,
    tol: f64,
    max_iter: usize,
    out: &Path,
    trace_out: Option<&Path>,
) -> Result<(), CliError> {
    match load_problem(problem_path)? {
        LoadedProblem::Scalar(spec) => {
            let (sol, checkpoints) =
                baseline_solve_traced(&spec, tol, max_iter, BASELINE_CHECKPOINT_EVERY);
            write_solution_csv(out, &sol.xi)?;
            if let Some(tp) = trace_out {
                write_baseline_trace_csv(tp, &checkpoints, spec.vertex_count(), sol.converged)?;
            }
            println!("objective: {}", objective(&spec, &sol.xi));
            println!("iterations: {}", sol.iterations);
            println!("converged: {}", sol.converged);
        }
        LoadedProblem::Multi(spec) => {
            let (x, converged, checkpoints) =
                baseline_solve_multi_traced(&spec, tol, max_iter, BASELINE_CHECKPOINT_EVERY);
            write_multi_solution_csv(out, &x, spec.k)?;
            if let Some(tp) = trace_out {
                write_baseline_trace_csv(tp, &checkpoints, spec.vertex_count(), converged)?;
            }
            println!("objective: {}", multi_objective(&spec, &x));
            println!("converged: {converged}");
        }
    }
    Ok(())
}

/// Runs both solvers at each tolerance and tabulates objective, wall time,
/// iterations, and component count; adds a Dice column when ground truth is
/// supplied.
pub fn cmd_compare(
    problem_path: &Path,
    tols: &[f64],
    truth_path: Option<&Path>,
    support_eps: f64,
    baseline_max_iter: usize,
    out: &Path,
) -> Result<(), CliError> {
    if tols.is_empty() {
        return Err(CliError::Usage("compare needs at least one --tols value".into()));
    }
    let loaded = load_problem(problem_path)?;
    let truth = match truth_path {
        None => None,
        Some(tp) => {
            if matches!(loaded, LoadedProblem::Multi(_)) {
                return Err(CliError::Usage(
                    "ground-truth scoring only applies to scalar problems".into(),
                ));
            }
            Some(read_solution_csv(tp, loaded.vertex_count())?)
        }
    };
    let mut csv = String::from("solver,tol,objective,wall_time_s,iterations,components");
    if truth.is_some() {
        csv.push_str(",dice");
    }
    csv.push('\n');
    let mut push_row =
        |solver: &str, tol: f64, obj: f64, secs: f64, iters: usize, comps: usize, x: &[f64]| {
            let _ = write!(csv, "{solver},{tol},{obj},{secs},{iters},{comps}");
            if let Some(t) = &truth {
                let _ = write!(csv, ",{}", dice_score(x, t, support_eps));
            }
            csv.push('\n');
        };

    for &tol in tols {
        match &loaded {
            LoadedProblem::Scalar(spec) => {
                let opts = SolveOptions {
                    tol_dir: tol,
                    tol_x: tol,
                    ..SolveOptions::default()
                };
                let t0 = Instant::now();
                let sol = cut_pursuit(spec, &opts);
                push_row(
                    "cut_pursuit",
                    tol,
                    sol.objective,
                    t0.elapsed().as_secs_f64(),
                    sol.iterations,
                    sol.partition.len(),
                    &sol.x,
                );
                let t0 = Instant::now();
                let base = baseline_solve(spec, tol, baseline_max_iter);
                push_row(
                    "baseline",
                    tol,
                    objective(spec, &base.xi).value(),
                    t0.elapsed().as_secs_f64(),
                    base.iterations,
                    component_count(&spec.graph, &base.xi, 1e-9),
                    &base.xi,
                );
            }
            LoadedProblem::Multi(spec) => {
                let opts = SolveOptions {
                    tol_dir: tol,
                    tol_x: tol,
                    ..SolveOptions::default()
                };
                let t0 = Instant::now();
                let sol = cut_pursuit_multidim(spec, &opts);
                push_row(
                    "cut_pursuit",
                    tol,
                    sol.objective,
                    t0.elapsed().as_secs_f64(),
                    sol.iterations,
                    sol.partition.len(),
                    &sol.x,
                );
                let t0 = Instant::now();
                let (x, _converged) = baseline_solve_multi(spec, tol, baseline_max_iter);
                push_row(
                    "baseline",
                    tol,
                    multi_objective(spec, &x),
                    t0.elapsed().as_secs_f64(),
                    baseline_max_iter,
                    component_count_vec(&spec.graph, &x, spec.k, 1e-9),
                    &x,
                );
            }
        }
    }
    fs::write(out, csv).map_err(|e| io_err(out, e))?;
    Ok(())
}

/// Dumps the steepest ternary direction at a given point: the directional
/// derivative and the sign histogram.
pub fn cmd_direction(
    problem_path: &Path,
    point_path: &Path,
    eps_eq: Option<f64>,
    eps_snap: Option<f64>,
) -> Result<(), CliError> {
    let spec = match load_problem(problem_path)? {
        LoadedProblem::Scalar(s) => s,
        LoadedProblem::Multi(_) => {
            return Err(CliError::Usage(
                "the direction dump applies to scalar problems only".into(),
            ))
        }
    };
    let x = read_solution_csv(point_path, spec.vertex_count())?;
    if !objective(&spec, &x).is_finite() {
        return Err(CliError::Usage(
            "point not in domain: some coordinate violates its vertex constraint".into(),
        ));
    }
    let defaults = SolveOptions::default();
    let auto = 10.0 * defaults.tol_x * defaults.reduced_tol_factor;
    let range = crate::driver::value_range(&x);
    let eps_snap = eps_snap.unwrap_or(auto * range);
    let eps_eq = eps_eq.unwrap_or(auto * range);
    let snapped = snap_nonsmooth(&spec, &x, eps_snap);
    let dir = steepest_ternary_two_cuts(&spec, &snapped, eps_eq);
    println!("dir_deriv: {}", dir.value);
    let plus = dir.signs.iter().filter(|&&s| s == 1).count();
    let zero = dir.signs.iter().filter(|&&s| s == 0).count();
    let minus = dir.signs.iter().filter(|&&s| s == -1).count();
    println!("plus: {plus}");
    println!("zero: {zero}");
    println!("minus: {minus}");
    Ok(())
}

/// Generator parameters; unset fields fall back to per-kind defaults.
#[derive(Debug, Default, Clone)]
pub struct GenParams {
    pub size: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub classes: Option<usize>,
    pub measurements: Option<usize>,
    pub noise: Option<f64>,
    pub sparsity: Option<f64>,
    pub lambda: Option<f64>,
    pub tv: Option<f64>,
    pub seed: u64,
}

/// Writes a synthetic instance of the given kind to `out`.
pub fn cmd_gen(kind: &str, params: &GenParams, out: &Path) -> Result<(), CliError> {
    let stem = out
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("problem")
        .to_string();
    let generated = match kind {
        "fused1d" => gen_fused1d(
            params.size.unwrap_or(6),
            params.noise.unwrap_or(0.0),
            params.seed,
        )?,
        "fused2d" => gen_fused2d(
            params.width.unwrap_or(8),
            params.height.unwrap_or(8),
            params.noise.unwrap_or(0.25),
            params.seed,
        )?,
        "eeg_like" => gen_eeg_like(
            params.width.unwrap_or(20),
            params.height.unwrap_or(10),
            params.measurements.unwrap_or(20),
            params.sparsity.unwrap_or(0.05),
            params.noise.unwrap_or(0.02),
            params.lambda.unwrap_or(0.1),
            params.tv.unwrap_or(0.1),
            params.seed,
            &stem,
        )?,
        "multilabel_grid" => gen_multilabel_grid(
            params.width.unwrap_or(8),
            params.height.unwrap_or(8),
            params.classes.unwrap_or(3),
            params.noise.unwrap_or(0.15),
            params.seed,
            &stem,
        )?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown generator \"{other}\"; expected fused1d, fused2d, eeg_like, or multilabel_grid"
            )))
        }
    };
    write_generated(out, &generated)?;
    println!("wrote {}", out.display());
    for (name, _) in &generated.aux {
        println!("wrote {}", out.parent().unwrap_or_else(|| Path::new(".")).join(name).display());
    }
    Ok(())
}

/// Solver options assembled from CLI flags; `None` keeps the default.
#[allow(clippy::too_many_arguments)]
pub fn solve_options_from_flags(
    tol_dir: Option<f64>,
    tol_x: Option<f64>,
    eps_eq: Option<f64>,
    eps_snap: Option<f64>,
    merge_eps: Option<f64>,
    max_iter: Option<usize>,
    reduced_tol_factor: Option<f64>,
    reduced_max_iter: Option<usize>,
    ternary: bool,
) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(v) = tol_dir {
        opts.tol_dir = v;
    }
    if let Some(v) = tol_x {
        opts.tol_x = v;
    }
    if eps_eq.is_some() {
        opts.eps_eq = eps_eq;
    }
    if eps_snap.is_some() {
        opts.eps_snap = eps_snap;
    }
    if merge_eps.is_some() {
        opts.merge_eps = merge_eps;
    }
    if let Some(v) = max_iter {
        opts.max_iter = v;
    }
    if let Some(v) = reduced_tol_factor {
        opts.reduced_tol_factor = v;
    }
    if let Some(v) = reduced_max_iter {
        opts.reduced_max_iter = v;
    }
    if ternary {
        opts.direction_method = DirectionMethod::Ternary;
    }
    opts
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn fused1d_size_six_noiseless_is_the_canonical_instance() {
        let generated = gen_fused1d(6, 0.0, 7).unwrap();
        let y = generated.problem["smooth"]["y"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect::<Vec<_>>();
        assert_eq!(y, vec![0.0, 0.0, 0.0, 5.0, 5.0, 5.0]);
        assert_eq!(generated.problem["graph"]["vertex_count"], 6);
        assert_eq!(generated.problem["graph"]["edges"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn generation_is_deterministic() {
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let params = GenParams {
            width: Some(6),
            height: Some(4),
            measurements: Some(5),
            seed: 42,
            ..GenParams::default()
        };
        cmd_gen("eeg_like", &params, &a).unwrap();
        cmd_gen("eeg_like", &params, &b).unwrap();
        let read = |p: &Path, suffix: &str| {
            fs::read(p.with_file_name(format!(
                "{}{suffix}",
                p.file_stem().unwrap().to_str().unwrap()
            )))
            .unwrap()
        };
        assert_eq!(fs::read(&a).unwrap().len(), fs::read(&b).unwrap().len());
        for suffix in ["_phi.csv", "_edges.csv", "_truth.csv"] {
            assert_eq!(read(&a, suffix), read(&b, suffix));
        }
    }

    #[test]
    fn solve_roundtrip_reproduces_the_traced_objective() {
        let dir = tempdir().unwrap();
        let problem = dir.path().join("p.json");
        cmd_gen("fused1d", &GenParams { seed: 1, ..GenParams::default() }, &problem).unwrap();
        let out = dir.path().join("solution.csv");
        let trace = dir.path().join("trace.csv");
        cmd_solve(&problem, &out, Some(&trace), &SolveOptions::default()).unwrap();

        let spec = match load_problem(&problem).unwrap() {
            LoadedProblem::Scalar(s) => s,
            _ => unreachable!(),
        };
        let x = read_solution_csv(&out, 6).unwrap();
        // Canonical optimum, read back through the CSV.
        for (i, &v) in x.iter().enumerate() {
            let want = if i < 3 { 1.0 / 3.0 } else { 14.0 / 3.0 };
            assert!((v - want).abs() < 1e-5, "vertex {i}: {v}");
        }
        let traced: Vec<&str> = fs::read_to_string(&trace).unwrap().lines().map(|l| l.trim()).filter(|l| !l.is_empty()).map(|_| "").collect();
        assert!(traced.len() >= 2);
        let text = fs::read_to_string(&trace).unwrap();
        let last = text.lines().filter(|l| !l.trim().is_empty()).last().unwrap();
        let fields: Vec<&str> = last.split(',').collect();
        let traced_objective: f64 = fields[2].parse().unwrap();
        let reread = objective(&spec, &x).value();
        assert!(
            (reread - traced_objective).abs() <= 1e-12 * (1.0 + traced_objective.abs()),
            "{reread} vs {traced_objective}"
        );
        assert!(!fields[5].is_empty(), "missing stop reason on the last row");
    }

    #[test]
    fn malformed_json_reports_a_parse_error() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.json");
        fs::write(&p, "{ not json").unwrap();
        match load_problem(&p) {
            Err(CliError::Parse { .. }) => {}
            other => panic!("expected a parse error, got {other:?}", other = other.err()),
        }
    }

    #[test]
    fn empty_graphs_are_rejected_by_name() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("empty.json");
        fs::write(
            &p,
            r#"{ "graph": { "vertex_count": 0, "edges": [] } }"#,
        )
        .unwrap();
        let err = load_problem(&p).unwrap_err();
        assert!(err.to_string().contains("empty graph"), "{err}");
    }

    #[test]
    fn dice_score_counts_support_overlap() {
        assert_eq!(dice_score(&[1.0, 0.0, 2.0], &[3.0, 0.0, 0.0], 1e-6), 2.0 / 3.0);
        assert_eq!(dice_score(&[0.0, 0.0], &[0.0, 0.0], 1e-6), 1.0);
        assert_eq!(dice_score(&[1.0], &[1.0], 1e-6), 1.0);
        // Threshold applies to magnitudes.
        assert_eq!(dice_score(&[1e-9], &[1.0], 1e-6), 0.0);
    }

    #[test]
    fn edge_csv_roundtrips() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("edges.csv");
        let edges = vec![(0usize, 1usize, 0.5f64), (1, 2, 1.25)];
        write_edge_csv(&p, &edges).unwrap();
        assert_eq!(read_edge_csv(&p).unwrap(), edges);
    }

    #[test]
    fn solution_csv_roundtrips_exactly() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let x = vec![1.0 / 3.0, -2.0e-17, 14.0 / 3.0];
        write_solution_csv(&p, &x).unwrap();
        assert_eq!(read_solution_csv(&p, 3).unwrap(), x);
    }

    #[test]
    fn multidim_files_load_and_solve() {
        let dir = tempdir().unwrap();
        let problem = dir.path().join("labels.json");
        cmd_gen(
            "multilabel_grid",
            &GenParams {
                width: Some(4),
                height: Some(3),
                classes: Some(3),
                seed: 5,
                ..GenParams::default()
            },
            &problem,
        )
        .unwrap();
        let out = dir.path().join("labels_solution.csv");
        cmd_solve(&problem, &out, None, &SolveOptions::default()).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "vertex,k,value");
        // 12 vertices x 3 classes.
        assert_eq!(lines.filter(|l| !l.trim().is_empty()).count(), 36);
    }

    #[test]
    fn compare_emits_one_row_per_solver_and_tolerance() {
        let dir = tempdir().unwrap();
        let problem = dir.path().join("p.json");
        cmd_gen("fused1d", &GenParams::default(), &problem).unwrap();
        let out = dir.path().join("compare.csv");
        cmd_compare(&problem, &[1e-4, 1e-6], None, 1e-6, 100_000, &out).unwrap();
        let text = fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        assert_eq!(lines.len(), 5, "{text}");
        assert_eq!(lines[0], "solver,tol,objective,wall_time_s,iterations,components");
        // Convex parity at the tightest tolerance.
        let parse_obj = |line: &str| line.split(',').nth(2).unwrap().parse::<f64>().unwrap();
        let cp = parse_obj(lines[3]);
        let base = parse_obj(lines[4]);
        assert!(cp <= base + 1e-5 * (1.0 + base.abs()), "cp {cp} vs baseline {base}");
    }

    #[test]
    fn direction_dump_rejects_out_of_domain_points() {
        let dir = tempdir().unwrap();
        let problem = dir.path().join("p.json");
        fs::write(
            &problem,
            r#"{
                "graph": { "vertex_count": 2, "edges": [[0, 1, 1.0]] },
                "smooth": { "kind": "quadratic", "y": [1.0, 2.0] },
                "nonsmooth": { "kind": "nonneg" }
            }"#,
        )
        .unwrap();
        let point = dir.path().join("x.csv");
        write_solution_csv(&point, &[-1.0, 0.5]).unwrap();
        let err = cmd_direction(&problem, &point, None, None).unwrap_err();
        assert!(err.to_string().contains("point not in domain"), "{err}");
    }
}
