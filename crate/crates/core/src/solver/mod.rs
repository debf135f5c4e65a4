//! Built-in branch-and-bound, LP export, and the independent network oracles.

mod bnb;
mod eval;
mod lp;
mod oracle;

pub use bnb::{solve, NetworkSolution, SolveOptions, SolveStatus};
pub(crate) use bnb::solution_from_values;
pub use eval::{evaluate, evaluate_edge_set, objective_breakdown, Evaluation, ObjectiveBreakdown};
pub use lp::{export_lp, parse_lp};
pub use oracle::{check_validity, compute_distance_values, DistanceValues, ValidityReport};
