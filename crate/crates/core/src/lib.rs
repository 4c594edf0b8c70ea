//! Certified global minimization of box-constrained and inequality-constrained
//! problems.
//!
//! Two engines cooperate: an interval branch-and-contract solver ([`ibc`])
//! that proves `f_best - f* <= epsilon`, and a differential evolution
//! heuristic ([`de`]) that feeds it certified upper bounds. The
//! [`cooperation`] module runs them together; [`runner`] wraps everything
//! for the command line.

// `!(a <= b)` is used on purpose so that NaN takes the failing branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod contractor;
pub mod cooperation;
pub mod de;
pub mod expr;
pub mod ibc;
pub mod interval;
pub mod problem;
pub mod progress;
pub mod runner;

pub use contractor::{Constraint, Prune};
pub use expr::{Expr, GradientEnclosure, Tape};
pub use interval::{Interval, IntervalBox};
pub use problem::Problem;
