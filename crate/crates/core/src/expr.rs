//! Expression trees, their natural interval extension, and interval gradients.
//!
//! An [`Expr`] is built once and compiled into a [`Tape`]: the same tree laid
//! out in post-order. The tape drives point evaluation, interval evaluation,
//! forward-mode interval AD and the HC4 contractor. No common subexpressions
//! are merged, so the enclosure of a tape is exactly the natural extension of
//! the syntax it was built from.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::interval::{DomainError, Interval, IntervalBox, PI};

#[derive(Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    /// A constant, stored as its nearest double.
    Const(f64),
    /// A constant known only through an enclosure (e.g. pi).
    Enclosed(Interval),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn pi() -> Expr {
        Expr::Enclosed(PI)
    }

    pub fn powi(self, k: i32) -> Expr {
        Expr::Pow(Box::new(self), k)
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(Box::new(self))
    }

    pub fn abs(self) -> Expr {
        Expr::Abs(Box::new(self))
    }

    /// Left-folded binary sum. An empty iterator yields the constant 0.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms
            .into_iter()
            .reduce(|acc, t| acc + t)
            .unwrap_or(Expr::Const(0.0))
    }

    /// Left-folded binary product. An empty iterator yields the constant 1.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        factors
            .into_iter()
            .reduce(|acc, t| acc * t)
            .unwrap_or(Expr::Const(1.0))
    }

    fn children(&self) -> (Option<&Expr>, Option<&Expr>) {
        use Expr::*;
        match self {
            Var(_) | Const(_) | Enclosed(_) => (None, None),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => (Some(a), Some(b)),
            Neg(a) | Pow(a, _) | Sin(a) | Cos(a) | Exp(a) | Sqrt(a) | Abs(a) => (Some(a), None),
        }
    }

    fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        // explicit stack: benchmark trees are deep left-folded sums
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            f(e);
            let (a, b) = e.children();
            if let Some(b) = b {
                stack.push(b);
            }
            if let Some(a) = a {
                stack.push(a);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Number of syntactic occurrences of variable `i`.
    pub fn occurrences(&self, i: usize) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if *e == Expr::Var(i) {
                n += 1
            }
        });
        n
    }

    /// Smallest dimension that covers every variable index, i.e. max index + 1.
    pub fn arity(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                n = n.max(i + 1)
            }
        });
        n
    }

    /// Sorted, deduplicated variable indices appearing in the expression.
    pub fn variables(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                v.push(*i)
            }
        });
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn compile(&self) -> Tape {
        Tape::compile(self)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Expr::*;
        match self {
            Var(i) => write!(f, "x{i}"),
            Const(c) => write!(f, "{c}"),
            Enclosed(c) => write!(f, "{c:?}"),
            Add(a, b) => write!(f, "({a:?} + {b:?})"),
            Sub(a, b) => write!(f, "({a:?} - {b:?})"),
            Mul(a, b) => write!(f, "({a:?} * {b:?})"),
            Div(a, b) => write!(f, "({a:?} / {b:?})"),
            Neg(a) => write!(f, "-{a:?}"),
            Pow(a, k) => write!(f, "{a:?}^{k}"),
            Sin(a) => write!(f, "sin({a:?})"),
            Cos(a) => write!(f, "cos({a:?})"),
            Exp(a) => write!(f, "exp({a:?})"),
            Sqrt(a) => write!(f, "sqrt({a:?})"),
            Abs(a) => write!(f, "|{a:?}|"),
        }
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $variant:ident) => {
        impl $tr for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl $tr<f64> for Expr {
            type Output = Expr;
            fn $m(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl $tr<Expr> for f64 {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}
expr_binop!(Add, add, Add);
expr_binop!(Sub, sub, Sub);
expr_binop!(Mul, mul, Mul);
expr_binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{source} at node {node} ({op})")]
pub struct EvalError {
    pub node: usize,
    pub op: &'static str,
    pub source: DomainError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Op {
    Var(usize),
    Const(Interval, f64),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Pow(i32),
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Var(_) => "var",
            Op::Const(..) => "const",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Neg => "neg",
            Op::Pow(_) => "pow",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Exp => "exp",
            Op::Sqrt => "sqrt",
            Op::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub op: Op,
    pub a: u32,
    pub b: u32,
}

/// Interval enclosure of the gradient over a box, one component per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEnclosure {
    pub components: Vec<Interval>,
}

/// Post-order flattening of an [`Expr`]. The root is the last node.
#[derive(Debug, Clone)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
    arity: usize,
}

impl Tape {
    pub fn compile(e: &Expr) -> Tape {
        let mut nodes = Vec::with_capacity(e.node_count());
        // iterative post-order: (expr, children_pushed)
        let mut stack: Vec<(&Expr, bool)> = vec![(e, false)];
        let mut results: Vec<u32> = Vec::new();
        while let Some((e, expanded)) = stack.pop() {
            let (ca, cb) = e.children();
            if let (false, Some(a)) = (expanded, ca) {
                stack.push((e, true));
                if let Some(b) = cb {
                    stack.push((b, false));
                }
                stack.push((a, false));
                continue;
            }
            let (a, b) = match (ca, cb) {
                (Some(_), Some(_)) => {
                    let b = results.pop().unwrap();
                    let a = results.pop().unwrap();
                    (a, b)
                }
                (Some(_), None) => (results.pop().unwrap(), 0),
                _ => (0, 0),
            };
            let op = match e {
                Expr::Var(i) => Op::Var(*i),
                Expr::Const(c) => Op::Const(Interval::point(*c), *c),
                Expr::Enclosed(c) => Op::Const(*c, c.mid()),
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                Expr::Div(..) => Op::Div,
                Expr::Neg(_) => Op::Neg,
                Expr::Pow(_, k) => Op::Pow(*k),
                Expr::Sin(_) => Op::Sin,
                Expr::Cos(_) => Op::Cos,
                Expr::Exp(_) => Op::Exp,
                Expr::Sqrt(_) => Op::Sqrt,
                Expr::Abs(_) => Op::Abs,
            };
            results.push(nodes.len() as u32);
            nodes.push(Node { op, a, b });
        }
        Tape {
            nodes,
            arity: e.arity(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Minimal box dimension this tape can be evaluated on.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Forward interval pass, storing every node enclosure in `vals`.
    pub(crate) fn forward(
        &self,
        x: &[Interval],
        vals: &mut Vec<Interval>,
    ) -> Result<Interval, EvalError> {
        vals.clear();
        vals.reserve(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            let a = || vals[n.a as usize];
            let b = || vals[n.b as usize];
            let v = match n.op {
                Op::Var(j) => x[j],
                Op::Const(c, _) => c,
                Op::Add => a() + b(),
                Op::Sub => a() - b(),
                Op::Mul => a() * b(),
                Op::Div => a() / b(),
                Op::Neg => -a(),
                Op::Pow(k) => a().powi(k),
                Op::Sin => a().sin(),
                Op::Cos => a().cos(),
                Op::Exp => a().exp(),
                Op::Sqrt => a().sqrt().map_err(|source| EvalError {
                    node: i,
                    op: n.op.name(),
                    source,
                })?,
                Op::Abs => a().abs(),
            };
            vals.push(v);
        }
        Ok(*vals.last().expect("empty tape"))
    }

    /// Natural interval extension over `b`.
    pub fn natural_extension(&self, b: &IntervalBox) -> Result<Interval, EvalError> {
        assert!(b.dim() >= self.arity, "box dimension too small");
        let mut vals = Vec::new();
        self.forward(b.components(), &mut vals)
    }

    /// Interval evaluation at a point; the upper bound is a rigorous upper bound of f(x).
    pub fn certified_point_value(&self, x: &[f64]) -> Result<Interval, EvalError> {
        self.natural_extension(&IntervalBox::from_point(x))
    }

    /// Plain floating-point evaluation (no rounding control).
    pub fn eval_point(&self, x: &[f64]) -> f64 {
        let mut vals = Vec::with_capacity(self.nodes.len());
        self.eval_point_with(x, &mut vals)
    }

    pub(crate) fn eval_point_with(&self, x: &[f64], vals: &mut Vec<f64>) -> f64 {
        vals.clear();
        for n in &self.nodes {
            let a = || vals[n.a as usize];
            let b = || vals[n.b as usize];
            let v = match n.op {
                Op::Var(j) => x[j],
                Op::Const(_, c) => c,
                Op::Add => a() + b(),
                Op::Sub => a() - b(),
                Op::Mul => a() * b(),
                Op::Div => a() / b(),
                Op::Neg => -a(),
                Op::Pow(k) => a().powi(k),
                Op::Sin => a().sin(),
                Op::Cos => a().cos(),
                Op::Exp => a().exp(),
                Op::Sqrt => a().sqrt(),
                Op::Abs => a().abs(),
            };
            vals.push(v);
        }
        *vals.last().expect("empty tape")
    }

    /// Forward-mode interval AD: one value pass, then one tangent sweep per variable.
    pub fn gradient_enclosure(&self, b: &IntervalBox) -> Result<GradientEnclosure, EvalError> {
        let mut vals = Vec::new();
        let mut tan = Vec::new();
        self.forward(b.components(), &mut vals)?;
        let components = (0..b.dim())
            .map(|j| self.tangent_sweep(j, &vals, &mut tan))
            .collect();
        Ok(GradientEnclosure { components })
    }

    /// Derivative enclosure with respect to variable `var`, given the node
    /// enclosures of a previous forward pass.
    pub(crate) fn tangent_sweep(
        &self,
        var: usize,
        vals: &[Interval],
        tan: &mut Vec<Interval>,
    ) -> Interval {
        tan.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            let (ia, ib) = (n.a as usize, n.b as usize);
            let t = match n.op {
                Op::Var(j) => {
                    if j == var {
                        Interval::ONE
                    } else {
                        Interval::ZERO
                    }
                }
                Op::Const(..) => Interval::ZERO,
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let (ta, tb) = (tan[ia], tan[ib]);
                    if ta == Interval::ZERO && tb == Interval::ZERO {
                        Interval::ZERO
                    } else {
                        match n.op {
                            Op::Add => ta + tb,
                            Op::Sub => ta - tb,
                            Op::Mul => ta * vals[ib] + vals[ia] * tb,
                            // f is not Lipschitz across a pole
                            _ if vals[ib].contains_zero() => Interval::ENTIRE,
                            _ => (ta - vals[i] * tb) / vals[ib],
                        }
                    }
                }
                unary => {
                    let ta = tan[ia];
                    if ta == Interval::ZERO {
                        Interval::ZERO
                    } else {
                        let va = vals[ia];
                        match unary {
                            Op::Neg => -ta,
                            Op::Pow(0) => Interval::ZERO,
                            Op::Pow(k) => Interval::point(k as f64) * va.powi(k - 1) * ta,
                            Op::Sin => va.cos() * ta,
                            Op::Cos => -va.sin() * ta,
                            Op::Exp => vals[i] * ta,
                            Op::Sqrt if va.lo() <= 0.0 => Interval::ENTIRE,
                            Op::Sqrt => ta / (Interval::point(2.0) * vals[i]),
                            Op::Abs => abs_subderivative(va) * ta,
                            _ => unreachable!(),
                        }
                    }
                }
            };
            tan.push(t);
        }
        *tan.last().expect("empty tape")
    }

    /// True when some node is non-differentiable somewhere in the box the
    /// enclosures `vals` were computed on: an `abs` or `sqrt` argument touching
    /// zero, or a denominator containing zero.
    pub(crate) fn has_kink(&self, vals: &[Interval]) -> bool {
        self.nodes.iter().any(|n| match n.op {
            Op::Abs => vals[n.a as usize].contains_zero(),
            Op::Sqrt => vals[n.a as usize].lo() <= 0.0,
            Op::Div => vals[n.b as usize].contains_zero(),
            _ => false,
        })
    }
}

/// Interval extension of the subderivative of `|.|`.
pub fn abs_subderivative(x: Interval) -> Interval {
    if x.hi() < 0.0 {
        Interval::point(-1.0)
    } else if x.lo() > 0.0 {
        Interval::ONE
    } else {
        Interval::new(-1.0, 1.0)
    }
}

/// Natural interval extension of `e` over `b`.
pub fn natural_extension(e: &Expr, b: &IntervalBox) -> Result<Interval, EvalError> {
    e.compile().natural_extension(b)
}

/// Interval evaluation of `e` at the degenerate box `x`.
pub fn certified_point_value(e: &Expr, x: &[f64]) -> Result<Interval, EvalError> {
    e.compile().certified_point_value(x)
}

pub fn gradient_enclosure(e: &Expr, b: &IntervalBox) -> Result<GradientEnclosure, EvalError> {
    e.compile().gradient_enclosure(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(0)
    }

    fn near(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-13 * (1.0 + b.abs())
    }

    #[test]
    fn dependency_showcase() {
        let b = IntervalBox::from_bounds(&[(1.0, 4.0)]);
        let f = x().powi(2) - 2.0 * x();
        let r = natural_extension(&f, &b).unwrap();
        assert!(near(r.lo(), -7.0) && near(r.hi(), 14.0), "{r:?}");
        let g = (x() - 1.0).powi(2) - 1.0;
        let r = natural_extension(&g, &b).unwrap();
        assert!(near(r.lo(), -1.0) && near(r.hi(), 8.0), "{r:?}");
    }

    #[test]
    fn quartic_example() {
        let f = x().powi(4) - 4.0 * x().powi(2);
        let r = natural_extension(&f, &IntervalBox::from_bounds(&[(-1.0, 4.0)])).unwrap();
        assert!(near(r.lo(), -64.0) && near(r.hi(), 256.0), "{r:?}");
        let r = natural_extension(&f, &IntervalBox::from_bounds(&[(3.0, 4.0)])).unwrap();
        assert!(near(r.lo(), 17.0) && near(r.hi(), 220.0), "{r:?}");
        let p = certified_point_value(&f, &[1.0]).unwrap();
        assert!(p.contains(-3.0) && p.width() < 1e-14);
    }

    #[test]
    fn constant_point_value() {
        let p = certified_point_value(&Expr::constant(5.0), &[0.3, 7.0]).unwrap();
        assert_eq!(p, Interval::point(5.0));
    }

    #[test]
    fn gradient_of_square() {
        let g = gradient_enclosure(&x().powi(2), &IntervalBox::from_bounds(&[(1.0, 2.0)])).unwrap();
        let c = g.components[0];
        assert!(near(c.lo(), 2.0) && near(c.hi(), 4.0), "{c:?}");
    }

    #[test]
    fn abs_subderivative_cases() {
        assert_eq!(abs_subderivative(Interval::new(1.0, 5.0)), Interval::ONE);
        assert_eq!(
            abs_subderivative(Interval::new(-2.0, 3.0)),
            Interval::new(-1.0, 1.0)
        );
        assert_eq!(
            abs_subderivative(Interval::new(-2.0, -1.0)),
            Interval::point(-1.0)
        );
        let g = gradient_enclosure(&x().abs(), &IntervalBox::from_bounds(&[(1.0, 5.0)])).unwrap();
        assert_eq!(g.components[0], Interval::ONE);
        let g = gradient_enclosure(&x().abs(), &IntervalBox::from_bounds(&[(-2.0, 3.0)])).unwrap();
        assert_eq!(g.components[0], Interval::new(-1.0, 1.0));
    }

    #[test]
    fn domain_error_carries_node() {
        let f = (x() - 10.0).sqrt();
        let err = natural_extension(&f, &IntervalBox::from_bounds(&[(0.0, 1.0)])).unwrap_err();
        assert_eq!(err.op, "sqrt");
        assert_eq!(err.node, 3);
    }

    #[test]
    fn tape_is_post_order_without_sharing() {
        let f = x() * x() + Expr::var(1);
        let t = f.compile();
        assert_eq!(t.len(), 5);
        assert_eq!(f.occurrences(0), 2);
        assert_eq!(f.arity(), 2);
        assert!(matches!(t.nodes[4].op, Op::Add));
    }

    #[test]
    fn point_eval_matches_formula() {
        let f = (x().sin() * Expr::var(1)).exp() / (1.0 + x().abs().sqrt());
        let p = [0.7, -1.3];
        let want = (0.7f64.sin() * -1.3).exp() / (1.0 + 0.7f64.sqrt());
        assert!(near(f.compile().eval_point(&p), want));
    }
}
