//! Domain contraction: HC4-revise over inequality constraints, a fixed-point
//! loop around it, and the first-order (stationarity) pruning test.

use crate::expr::{Expr, Node, Op, Tape};
use crate::interval::{round, trig_range, Interval, IntervalBox, Trig, PI, TWO_PI};

/// Relative shrink of the summed component widths below which a contraction
/// pass is considered to have reached its fixed point.
pub const FIXPOINT_TOLERANCE: f64 = 0.01;
const MAX_PASSES: usize = 64;

/// An inequality constraint `body(x) <= 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    body: Expr,
    tape: Tape,
}

impl Constraint {
    pub fn new(body: Expr) -> Self {
        let tape = body.compile();
        Constraint { body, tape }
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Plain floating-point value of the body at `x`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.tape.eval_point(x)
    }

    /// True when interval evaluation proves `body(x) <= 0` at the point `x`.
    pub fn certified_at(&self, x: &[f64]) -> bool {
        matches!(self.tape.certified_point_value(x), Ok(v) if v.hi() <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prune {
    Keep,
    Discard,
}

/// One HC4-revise of `c` over `b`. `None` means the constraint has no
/// solution in `b`.
pub fn hc4_revise(c: &Constraint, b: &IntervalBox) -> Option<IntervalBox> {
    let mut bx = b.clone();
    let mut vals = Vec::new();
    let le_zero = Interval::new(f64::NEG_INFINITY, 0.0);
    revise(&c.tape, le_zero, bx.components_mut(), &mut vals).then_some(bx)
}

/// Applies HC4-revise over all constraints until a full pass shrinks the box
/// by less than [`FIXPOINT_TOLERANCE`] (relative), or proves it empty.
pub fn fixpoint_contract(cs: &[Constraint], b: &IntervalBox) -> Option<IntervalBox> {
    let le_zero = Interval::new(f64::NEG_INFINITY, 0.0);
    let items: Vec<(&Tape, Interval)> = cs.iter().map(|c| (&c.tape, le_zero)).collect();
    let mut bx = b.clone();
    let mut vals = Vec::new();
    fixpoint(&items, bx.components_mut(), &mut vals).then_some(bx)
}

/// Fixed-point loop over `(tape, allowed range)` pairs. Returns false when
/// the box is proven empty; `bx` is then left in an unspecified state.
pub(crate) fn fixpoint(
    items: &[(&Tape, Interval)],
    bx: &mut [Interval],
    vals: &mut Vec<Interval>,
) -> bool {
    if items.is_empty() {
        return true;
    }
    for _ in 0..MAX_PASSES {
        let before: f64 = bx.iter().map(Interval::width).sum();
        for &(tape, range) in items {
            if !revise(tape, range, bx, vals) {
                return false;
            }
        }
        let after: f64 = bx.iter().map(Interval::width).sum();
        if !before.is_finite() || before <= 0.0 || before - after <= FIXPOINT_TOLERANCE * before {
            break;
        }
    }
    true
}

/// HC4-revise of `tape(x) in range` over `bx`, in place.
pub(crate) fn revise(
    tape: &Tape,
    range: Interval,
    bx: &mut [Interval],
    vals: &mut Vec<Interval>,
) -> bool {
    let root = match tape.forward(bx, vals) {
        Ok(v) => v,
        // the expression is undefined everywhere on the box
        Err(_) => return false,
    };
    let last = vals.len() - 1;
    vals[last] = root.intersect(&range);
    if vals[last].is_empty() {
        return false;
    }
    for i in (0..tape.nodes.len()).rev() {
        if !project(&tape.nodes[i], i, vals, bx) {
            return false;
        }
    }
    true
}

#[inline]
fn narrow(slot: &mut Interval, by: Interval) -> bool {
    *slot = slot.intersect(&by);
    !slot.is_empty()
}

/// `{a : a * b in y for some b in bv}` (hull).
fn div_rel(y: Interval, bv: Interval) -> Interval {
    if bv == Interval::ZERO {
        return if y.contains_zero() {
            Interval::ENTIRE
        } else {
            Interval::EMPTY
        };
    }
    if y.contains_zero() && bv.contains_zero() {
        return Interval::ENTIRE;
    }
    y / bv
}

/// Pushes the enclosure of node `i` down to its children.
fn project(n: &Node, i: usize, vals: &mut [Interval], bx: &mut [Interval]) -> bool {
    let y = vals[i];
    let (ia, ib) = (n.a as usize, n.b as usize);
    match n.op {
        Op::Var(j) => narrow(&mut bx[j], y),
        Op::Const(..) => !y.is_empty(),
        Op::Add => {
            let b = vals[ib];
            if !narrow(&mut vals[ia], y - b) {
                return false;
            }
            let a = vals[ia];
            narrow(&mut vals[ib], y - a)
        }
        Op::Sub => {
            let b = vals[ib];
            if !narrow(&mut vals[ia], y + b) {
                return false;
            }
            let a = vals[ia];
            narrow(&mut vals[ib], a - y)
        }
        Op::Mul => {
            let b = vals[ib];
            if !narrow(&mut vals[ia], div_rel(y, b)) {
                return false;
            }
            let a = vals[ia];
            narrow(&mut vals[ib], div_rel(y, a))
        }
        Op::Div => {
            let b = vals[ib];
            if !narrow(&mut vals[ia], y * b) {
                return false;
            }
            let a = vals[ia];
            narrow(&mut vals[ib], div_rel(a, y))
        }
        Op::Neg => narrow(&mut vals[ia], -y),
        Op::Pow(k) => {
            let a = vals[ia];
            match pow_preimage(a, y, k) {
                Some(p) => narrow(&mut vals[ia], p),
                None => false,
            }
        }
        Op::Sqrt => {
            let y = y.intersect(&Interval::new(0.0, f64::INFINITY));
            if y.is_empty() {
                return false;
            }
            let lo = if y.lo() > 0.0 {
                round::mul_down(y.lo(), y.lo())
            } else {
                f64::NEG_INFINITY
            };
            let hi = round::mul_up(y.hi(), y.hi());
            narrow(&mut vals[ia], Interval::new(lo, hi))
        }
        Op::Abs => {
            let y = y.intersect(&Interval::new(0.0, f64::INFINITY));
            if y.is_empty() {
                return false;
            }
            let a = vals[ia];
            let p = a.intersect(&y).hull(&a.intersect(&-y));
            narrow(&mut vals[ia], p)
        }
        Op::Exp => match y.ln() {
            Ok(l) => narrow(&mut vals[ia], l),
            Err(_) => false,
        },
        Op::Sin => {
            let p = trig_preimage(Trig::Sin, vals[ia], y);
            narrow(&mut vals[ia], p)
        }
        Op::Cos => {
            let p = trig_preimage(Trig::Cos, vals[ia], y);
            narrow(&mut vals[ia], p)
        }
    }
}

/// Smallest `r >= 0` (up to rounding) with `r^k >= y`, for `y >= 0`.
fn root_up(y: f64, k: u32) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    if y == f64::INFINITY {
        return y;
    }
    let mut r = round::up2(y.powf(1.0 / k as f64));
    for _ in 0..64 {
        if round::pow_down(r, k) >= y {
            return r;
        }
        r = round::up(r);
    }
    f64::INFINITY
}

/// Largest `r >= 0` (up to rounding) with `r^k <= y`, for `y >= 0`.
fn root_down(y: f64, k: u32) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y == f64::INFINITY {
        return f64::MAX;
    }
    let mut r = round::down2(y.powf(1.0 / k as f64)).max(0.0);
    for _ in 0..64 {
        if round::pow_up(r, k) <= y {
            return r;
        }
        r = round::down(r).max(0.0);
    }
    0.0
}

/// Hull of `{a in av : a^k in y}`; `None` when empty.
fn pow_preimage(av: Interval, y: Interval, k: i32) -> Option<Interval> {
    if k == 0 {
        return y.contains(1.0).then_some(av);
    }
    if k < 0 {
        // not used by the benchmark set; no contraction
        return Some(av);
    }
    let ku = k as u32;
    if k == 1 {
        let p = av.intersect(&y);
        return (!p.is_empty()).then_some(p);
    }
    if k % 2 == 0 {
        let y = y.intersect(&Interval::new(0.0, f64::INFINITY));
        if y.is_empty() {
            return None;
        }
        let r = Interval::new(root_down(y.lo(), ku), root_up(y.hi(), ku));
        let p = av.intersect(&r).hull(&av.intersect(&-r));
        (!p.is_empty()).then_some(p)
    } else {
        let signed_root_down = |v: f64| {
            if v >= 0.0 {
                root_down(v, ku)
            } else {
                -root_up(-v, ku)
            }
        };
        let signed_root_up = |v: f64| {
            if v >= 0.0 {
                root_up(v, ku)
            } else {
                -root_down(-v, ku)
            }
        };
        let r = Interval::new(signed_root_down(y.lo()), signed_root_up(y.hi()));
        let p = av.intersect(&r);
        (!p.is_empty()).then_some(p)
    }
}

/// Preimage of `y` under sin/cos restricted to `av`. Only contracts when the
/// function is monotone on `av`; each cut is verified by interval evaluation
/// so the inverse itself need not be rigorous.
fn trig_preimage(f: Trig, av: Interval, y: Interval) -> Interval {
    let y = y.intersect(&Interval::new(-1.0, 1.0));
    if y.is_empty() {
        return Interval::EMPTY;
    }
    if (y.lo() <= -1.0 && y.hi() >= 1.0) || !av.is_bounded() || av.width() >= PI.lo() {
        return av;
    }
    // Direction of monotonicity is a float heuristic: every cut below is
    // re-checked with interval evaluation.
    let half_pi = PI.mid() / 2.0;
    let first = (av.lo() / half_pi).floor() as i64 + 1;
    let last = (av.hi() / half_pi).ceil() as i64 - 1;
    let critical_parity = match f {
        Trig::Sin => 1,
        Trig::Cos => 0,
    };
    if (first..=last).any(|m| m.rem_euclid(2) == critical_parity) {
        return av;
    }
    let m = av.mid();
    let increasing = match f {
        Trig::Sin => m.cos() > 0.0,
        Trig::Cos => m.sin() < 0.0,
    };
    let mid = av.mid();
    let two_pi = TWO_PI.mid();
    let pi = PI.mid();
    let inverse = |t: f64| -> f64 {
        match (f, increasing) {
            (Trig::Sin, true) => two_pi * (mid / two_pi).round() + t.asin(),
            (Trig::Sin, false) => {
                let k = ((mid - pi) / two_pi).round();
                pi * (2.0 * k + 1.0) - t.asin()
            }
            (Trig::Cos, false) => two_pi * (mid / two_pi).floor() + t.acos(),
            (Trig::Cos, true) => two_pi * (mid / two_pi).ceil() - t.acos(),
        }
    };
    let eval = |x: f64| match f {
        Trig::Sin => x.sin(),
        Trig::Cos => x.cos(),
    };
    let slack = |c: f64| 1e-12 * (1.0 + c.abs());
    let (mut lo, mut hi) = (av.lo(), av.hi());
    // values below y.lo (increasing) or above y.hi (decreasing) at the left end
    let (left_target, right_target) = if increasing {
        (y.lo(), y.hi())
    } else {
        (y.hi(), y.lo())
    };
    let left_bad = if increasing {
        eval(lo) < y.lo()
    } else {
        eval(lo) > y.hi()
    };
    if left_bad {
        let c = inverse(left_target) - slack(inverse(left_target));
        if c > lo && c < hi {
            let r = trig_range(Interval::new(lo, c), f);
            let excluded = if increasing {
                r.hi() < y.lo()
            } else {
                r.lo() > y.hi()
            };
            if excluded {
                lo = c;
            }
        }
    }
    let right_bad = if increasing {
        eval(hi) > y.hi()
    } else {
        eval(hi) < y.lo()
    };
    if right_bad {
        let c = inverse(right_target) + slack(inverse(right_target));
        if c > lo && c < hi {
            let r = trig_range(Interval::new(c, hi), f);
            let excluded = if increasing {
                r.lo() > y.hi()
            } else {
                r.hi() < y.lo()
            };
            if excluded {
                hi = c;
            }
        }
    }
    Interval::new(lo, hi)
}

/// First-order test: discard `b` when, for some variable whose component is
/// strictly inside the domain, the partial derivative enclosure excludes 0.
/// Answers `Keep` whenever the objective may be non-differentiable on `b`.
pub fn stationarity_prune(f: &Expr, b: &IntervalBox, domain: &IntervalBox) -> Prune {
    let tape = f.compile();
    let mut vals = Vec::new();
    let mut tan = Vec::new();
    stationarity_prune_tape(&tape, b, domain, &mut vals, &mut tan)
}

pub(crate) fn stationarity_prune_tape(
    tape: &Tape,
    b: &IntervalBox,
    domain: &IntervalBox,
    vals: &mut Vec<Interval>,
    tan: &mut Vec<Interval>,
) -> Prune {
    if tape.forward(b.components(), vals).is_err() || tape.has_kink(vals) {
        return Prune::Keep;
    }
    for i in 0..b.dim() {
        if b[i].interior_of(&domain[i]) && !tape.tangent_sweep(i, vals, tan).contains_zero() {
            return Prune::Discard;
        }
    }
    Prune::Keep
}

/// Monotonicity reduction, the boundary-aware form of the stationarity test.
/// When `df/dx_i > 0` on the whole box, a minimizer in `bx` must sit on the
/// lower face `x_i = domain_i.lo`: the component is collapsed to it, or the
/// box is discarded (`None`) when it does not touch that face. Symmetric for
/// `df/dx_i < 0`. Returns whether some component was collapsed.
///
/// `grads` must come from [`Tape::tangent_sweep`], which also covers `abs`
/// kinks (the objective stays Lipschitz there). Only valid when no
/// constraint can be active on `bx`.
pub(crate) fn monotonicity_reduce(
    grads: &[Interval],
    bx: &mut [Interval],
    domain: &IntervalBox,
) -> Option<bool> {
    let mut changed = false;
    for (i, g) in grads.iter().enumerate() {
        let (d, c) = (domain[i], bx[i]);
        if c.is_degenerate() {
            continue;
        }
        if g.lo() > 0.0 {
            if c.lo() > d.lo() {
                return None;
            }
            bx[i] = Interval::point(d.lo());
            changed = true;
        } else if g.hi() < 0.0 {
            if c.hi() < d.hi() {
                return None;
            }
            bx[i] = Interval::point(d.hi());
            changed = true;
        }
    }
    Some(changed)
}

/// Lower bound of the mean-value form `f(c) + sum_i G_i (X_i - c_i)`, given
/// per-variable derivative enclosures `grads`. The center is the one that
/// maximizes this lower bound (Baumann's choice): an endpoint when `G_i` has a
/// sign, otherwise the point splitting `X_i` in the ratio of `G_i`'s bounds.
pub(crate) fn mean_value_lower_bound(
    tape: &Tape,
    bx: &[Interval],
    grads: &[Interval],
    vals: &mut Vec<Interval>,
    point: &mut Vec<Interval>,
) -> f64 {
    point.clear();
    point.extend(
        bx.iter()
            .zip(grads)
            .map(|(x, g)| Interval::point(lower_center(*x, *g))),
    );
    let Ok(fc) = tape.forward(point, vals) else {
        return f64::NEG_INFINITY;
    };
    let mut acc = fc;
    for ((g, x), c) in grads.iter().zip(bx).zip(point.iter()) {
        if x.is_degenerate() {
            continue;
        }
        acc = acc + *g * (*x - *c);
    }
    acc.lo()
}

fn lower_center(x: Interval, g: Interval) -> f64 {
    if !g.is_bounded() {
        x.mid()
    } else if g.lo() >= 0.0 {
        x.lo()
    } else if g.hi() <= 0.0 {
        x.hi()
    } else {
        let c = (g.hi() * x.lo() - g.lo() * x.hi()) / (g.hi() - g.lo());
        if c.is_finite() {
            c.clamp(x.lo(), x.hi())
        } else {
            x.mid()
        }
    }
}
