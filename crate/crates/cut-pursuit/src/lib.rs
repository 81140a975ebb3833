//! Working-set solver for problems of the form
//!
//! ```text
//!   minimize  f(x) + sum_v g_v(x_v) + sum_{(u,v) in E} w_uv |x_u - x_v|
//! ```
//!
//! over the vertices of a weighted undirected graph, where `f` is smooth and
//! each `g_v` is a separable term that may be nonsmooth or take the value
//! `+inf` (constraints). The solver maintains a partition of the vertices into
//! connected components on which the iterate is constant, solves the small
//! problem induced on the components, and refines the partition along a
//! steepest ternary descent direction found by max-flow min-cut.
//!
//! The [`driver`] module exposes the main entry point [`driver::cut_pursuit`];
//! [`reduced::baseline_solve`] solves the same problem directly at vertex
//! granularity for comparison. The [`multidim`] module extends the scheme to
//! vector-valued problems (l1 total variation, simplex-constrained values)
//! with an expansion-move direction heuristic.

pub mod cli;
pub mod direction;
pub mod driver;
pub mod extreal;
pub mod functional;
pub mod graph;
pub mod maxflow;
pub mod multidim;
pub mod reduced;

pub use direction::TernaryDirection;
pub use driver::{cut_pursuit, Solution, SolveOptions, SolveTrace, StopReason};
pub use extreal::ExtendedReal;
pub use functional::{NonsmoothTerm, ProblemSpec, SmoothTerm, VertexDeltas};
pub use graph::{Partition, ReducedGraph, WeightedGraph};
pub use multidim::{cut_pursuit_multidim, MultiProblemSpec, MultiSmoothTerm, MultiSolution};
pub use reduced::baseline_solve;
