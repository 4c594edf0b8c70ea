//! An optimization problem: objective, inequality constraints, domain box.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contractor::Constraint;
use crate::expr::{Expr, Tape};
use crate::interval::IntervalBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("domain has no components")]
    EmptyDomain,
    #[error("domain component {0} is empty or unbounded")]
    BadComponent(usize),
    #[error("expression uses variable x{var} but the domain has dimension {dim}")]
    ArityMismatch { var: usize, dim: usize },
}

/// A recorded global minimum: value and, when known, a minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownMinimum {
    pub value: f64,
    pub solution: Option<Vec<f64>>,
}

/// Minimize `objective(x)` over `x in domain` subject to `g(x) <= 0` for
/// every constraint `g`.
#[derive(Debug, Clone)]
pub struct Problem {
    name: String,
    objective: Expr,
    tape: Tape,
    constraints: Vec<Constraint>,
    domain: IntervalBox,
    known_minimum: Option<KnownMinimum>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        objective: Expr,
        constraints: Vec<Constraint>,
        domain: IntervalBox,
    ) -> Result<Problem, ProblemError> {
        let dim = domain.dim();
        if dim == 0 {
            return Err(ProblemError::EmptyDomain);
        }
        if let Some(i) = domain
            .components()
            .iter()
            .position(|c| c.is_empty() || !c.is_bounded())
        {
            return Err(ProblemError::BadComponent(i));
        }
        let arities =
            std::iter::once(objective.arity()).chain(constraints.iter().map(|c| c.body().arity()));
        for a in arities {
            if a > dim {
                return Err(ProblemError::ArityMismatch { var: a - 1, dim });
            }
        }
        let tape = objective.compile();
        Ok(Problem {
            name: name.into(),
            objective,
            tape,
            constraints,
            domain,
            known_minimum: None,
        })
    }

    pub fn with_known_minimum(mut self, m: KnownMinimum) -> Problem {
        self.known_minimum = Some(m);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn domain(&self) -> &IntervalBox {
        &self.domain
    }

    pub fn known_minimum(&self) -> Option<&KnownMinimum> {
        self.known_minimum.as_ref()
    }

    pub fn is_constrained(&self) -> bool {
        !self.constraints.is_empty()
    }

    /// Plain floating-point objective value.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.tape.eval_point(x)
    }

    /// True when every constraint is proven satisfied at `x` by interval evaluation.
    pub fn certified_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.certified_at(x))
    }

    /// Rigorous upper bound of `f(x)`, or `None` when `x` is not proven
    /// feasible or the objective is undefined there.
    pub fn certified_upper_bound(&self, x: &[f64]) -> Option<f64> {
        if !self.domain.contains_point(x) || !self.certified_feasible(x) {
            return None;
        }
        self.tape.certified_point_value(x).ok().map(|v| v.hi())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_arity_mismatch() {
        let e = Expr::var(0) + Expr::var(2);
        let err = Problem::new("p", e, vec![], IntervalBox::cube(2, 0.0, 1.0)).unwrap_err();
        assert_eq!(err, ProblemError::ArityMismatch { var: 2, dim: 2 });
    }

    #[test]
    fn rejects_unbounded_domain() {
        let d = IntervalBox::from_bounds(&[(0.0, 1.0), (0.0, f64::INFINITY)]);
        let err = Problem::new("p", Expr::var(0), vec![], d).unwrap_err();
        assert_eq!(err, ProblemError::BadComponent(1));
    }

    #[test]
    fn upper_bound_needs_feasibility() {
        let x = Expr::var(0);
        let g = Constraint::new(0.5 - x.clone());
        let p = Problem::new("p", x.clone() * x, vec![g], IntervalBox::cube(1, 0.0, 1.0)).unwrap();
        assert_eq!(p.certified_upper_bound(&[0.25]), None);
        let ub = p.certified_upper_bound(&[0.75]).unwrap();
        assert!((0.5625..0.5625 + 1e-15).contains(&ub));
        assert_eq!(p.certified_upper_bound(&[2.0]), None);
    }
}
