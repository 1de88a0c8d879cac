//! Command-line front end for the fractional Cauchy problem library:
//! problem file loading, a small dynamics expression language, and
//! CSV-emitting solve / transition / duhamel / duality / theta commands.

pub mod expr;
pub mod problem;
pub mod run;

pub use expr::{eval_expr, parse_expr, EvalError, ExprAst, ExprError};
pub use problem::{load_problem, parse_problem, Dynamics, LoadError, ProblemKind, ProblemSpec};
pub use run::{execute, run, CliCommand, CliFailure};
