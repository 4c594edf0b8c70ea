//! Outward-rounded interval arithmetic and interval boxes.
//!
//! Every operation returns an enclosure of the exact real result. Bounds are
//! computed in round-to-nearest and then pushed outward (see [`round`]), which
//! keeps the arithmetic portable: no FPU control-word games.

use std::fmt;
use std::ops::{Add, Div, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Directed rounding emulated on top of round-to-nearest.
///
/// IEEE basic operations and `sqrt` are correctly rounded, so one ulp outward
/// covers the exact result. libm transcendentals are within one ulp on the
/// platforms we target; they get two.
pub mod round {
    #[inline]
    pub fn down(x: f64) -> f64 {
        x.next_down()
    }

    #[inline]
    pub fn up(x: f64) -> f64 {
        x.next_up()
    }

    #[inline]
    pub fn down2(x: f64) -> f64 {
        x.next_down().next_down()
    }

    #[inline]
    pub fn up2(x: f64) -> f64 {
        x.next_up().next_up()
    }

    /// Product bound with the `0 * inf = 0` convention of interval endpoints.
    #[inline]
    pub(crate) fn prod(a: f64, b: f64) -> f64 {
        if a == 0.0 || b == 0.0 {
            0.0
        } else {
            a * b
        }
    }

    /// Products with a +-1 factor are exact.
    #[inline]
    fn exact_unit(a: f64, b: f64) -> bool {
        a.abs() == 1.0 || b.abs() == 1.0
    }

    #[inline]
    pub fn mul_down(a: f64, b: f64) -> f64 {
        let p = prod(a, b);
        if (p == 0.0 && (a == 0.0 || b == 0.0)) || exact_unit(a, b) {
            p
        } else if p.is_nan() {
            f64::NEG_INFINITY
        } else {
            down(p)
        }
    }

    #[inline]
    pub fn mul_up(a: f64, b: f64) -> f64 {
        let p = prod(a, b);
        if (p == 0.0 && (a == 0.0 || b == 0.0)) || exact_unit(a, b) {
            p
        } else if p.is_nan() {
            f64::INFINITY
        } else {
            up(p)
        }
    }

    #[inline]
    pub fn div_down(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        let q = a / b;
        if q.is_nan() {
            f64::NEG_INFINITY
        } else {
            down(q)
        }
    }

    #[inline]
    pub fn div_up(a: f64, b: f64) -> f64 {
        if a == 0.0 {
            return 0.0;
        }
        let q = a / b;
        if q.is_nan() {
            f64::INFINITY
        } else {
            up(q)
        }
    }

    #[inline]
    pub fn add_down(a: f64, b: f64) -> f64 {
        let s = a + b;
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            down(s)
        }
    }

    #[inline]
    pub fn add_up(a: f64, b: f64) -> f64 {
        let s = a + b;
        if s.is_nan() {
            f64::INFINITY
        } else {
            up(s)
        }
    }

    /// `x^k` rounded down, for `x >= 0`.
    pub fn pow_down(x: f64, k: u32) -> f64 {
        debug_assert!(x >= 0.0);
        let mut result = 1.0;
        let mut base = x;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = mul_down(result, base).max(0.0);
            }
            e >>= 1;
            if e > 0 {
                base = mul_down(base, base).max(0.0);
            }
        }
        result
    }

    /// `x^k` rounded up, for `x >= 0`.
    pub fn pow_up(x: f64, k: u32) -> f64 {
        debug_assert!(x >= 0.0);
        let mut result = 1.0;
        let mut base = x;
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = mul_up(result, base);
            }
            e >>= 1;
            if e > 0 {
                base = mul_up(base, base);
            }
        }
        result
    }
}

/// A closed interval `[lo, hi]` of reals with `f64` bounds, or the empty set.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("sqrt of an interval with no nonnegative part")]
    SqrtNegative,
    #[error("log of an interval with no nonnegative part")]
    LogNegative,
}

/// Binary arithmetic operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementary functions supported by [`elem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemFn {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Abs,
    Pow(i32),
}

pub const PI: Interval = Interval {
    lo: std::f64::consts::PI,
    hi: 3.141_592_653_589_793_6,
};
pub const HALF_PI: Interval = Interval {
    lo: std::f64::consts::FRAC_PI_2,
    hi: 1.570_796_326_794_896_8,
};
pub const TWO_PI: Interval = Interval {
    lo: std::f64::consts::TAU,
    hi: 6.283_185_307_179_587,
};

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: f64::INFINITY,
        hi: f64::NEG_INFINITY,
    };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    /// Builds `[lo, hi]`. Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    /// Like [`Interval::new`] but yields `EMPTY` instead of panicking.
    pub fn checked(lo: f64, hi: f64) -> Self {
        if lo <= hi {
            Interval { lo, hi }
        } else {
            Self::EMPTY
        }
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// `hi - lo`, rounded up. Zero for the empty set.
    pub fn width(&self) -> f64 {
        if self.is_empty() || self.lo == self.hi {
            0.0
        } else {
            round::add_up(self.hi, -self.lo)
        }
    }

    /// Midpoint, guaranteed to lie in `[lo, hi]` for bounded nonempty intervals.
    pub fn mid(&self) -> f64 {
        debug_assert!(!self.is_empty());
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                if self.lo == -self.hi {
                    return 0.0;
                }
                let m = 0.5 * self.lo + 0.5 * self.hi;
                m.clamp(self.lo, self.hi)
            }
            (false, false) => 0.0,
            (false, true) => {
                if self.hi > 0.0 {
                    0.0
                } else {
                    -f64::MAX
                }
            }
            (true, false) => {
                if self.lo < 0.0 {
                    0.0
                } else {
                    f64::MAX
                }
            }
        }
    }

    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    /// True when `self` lies strictly inside `other` (both ends).
    pub fn interior_of(&self, other: &Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        Interval::checked(lo, hi)
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn sqr(self) -> Interval {
        self.powi(2)
    }

    pub fn abs(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval {
                lo: 0.0,
                hi: (-self.lo).max(self.hi),
            }
        }
    }

    /// Integer power by binary exponentiation on bounds, with the even-power
    /// sign rule. Negative exponents go through division.
    pub fn powi(self, k: i32) -> Interval {
        if self.is_empty() {
            return self;
        }
        if k == 0 {
            return Interval::ONE;
        }
        if k < 0 {
            return Interval::ONE / self.powi(-k);
        }
        let k = k as u32;
        let (a, b) = (self.lo, self.hi);
        if k.is_multiple_of(2) {
            if a >= 0.0 {
                Interval::new(round::pow_down(a, k), round::pow_up(b, k))
            } else if b <= 0.0 {
                Interval::new(round::pow_down(-b, k), round::pow_up(-a, k))
            } else {
                Interval::new(0.0, round::pow_up((-a).max(b), k))
            }
        } else {
            let lo = if a >= 0.0 {
                round::pow_down(a, k)
            } else {
                -round::pow_up(-a, k)
            };
            let hi = if b >= 0.0 {
                round::pow_up(b, k)
            } else {
                -round::pow_down(-b, k)
            };
            Interval::new(lo, hi)
        }
    }

    /// Square root; a partially negative input is clamped to its nonnegative part.
    pub fn sqrt(self) -> Result<Interval, DomainError> {
        if self.is_empty() {
            return Ok(self);
        }
        if self.hi < 0.0 {
            return Err(DomainError::SqrtNegative);
        }
        let hi = round::up(self.hi.sqrt());
        let lo = if self.lo <= 0.0 {
            0.0
        } else {
            round::down(self.lo.sqrt()).max(0.0)
        };
        Ok(Interval::new(lo, hi))
    }

    pub fn exp(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        let lo = round::down2(self.lo.exp()).max(0.0);
        let hi = if self.hi == f64::NEG_INFINITY {
            0.0
        } else {
            round::up2(self.hi.exp())
        };
        Interval::new(lo, hi)
    }

    /// Natural log over the nonnegative part of the input.
    pub fn ln(self) -> Result<Interval, DomainError> {
        if self.is_empty() {
            return Ok(self);
        }
        if self.hi < 0.0 {
            return Err(DomainError::LogNegative);
        }
        let lo = if self.lo <= 0.0 {
            f64::NEG_INFINITY
        } else {
            round::down2(self.lo.ln())
        };
        let hi = if self.hi == 0.0 {
            f64::NEG_INFINITY
        } else {
            round::up2(self.hi.ln())
        };
        if hi == f64::NEG_INFINITY {
            return Err(DomainError::LogNegative);
        }
        Ok(Interval::new(lo, hi))
    }

    pub fn sin(self) -> Interval {
        trig_range(self, Trig::Sin)
    }

    pub fn cos(self) -> Interval {
        trig_range(self, Trig::Cos)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Trig {
    Sin,
    Cos,
}

impl Trig {
    fn eval(self, x: f64) -> f64 {
        match self {
            Trig::Sin => x.sin(),
            Trig::Cos => x.cos(),
        }
    }

    /// Residue (mod 4) of `m` in `m * pi/2` at which the function peaks at +1 and -1.
    fn extremum_residues(self) -> (i64, i64) {
        match self {
            Trig::Sin => (1, 3),
            Trig::Cos => (0, 2),
        }
    }
}

/// Range of `sin`/`cos` over `x`: endpoint values plus any multiple of pi/2
/// that may fall inside `x`, located with an outward-rounded pi.
pub(crate) fn trig_range(x: Interval, f: Trig) -> Interval {
    if x.is_empty() {
        return x;
    }
    let unit = Interval::new(-1.0, 1.0);
    if !x.is_bounded() || x.width() >= TWO_PI.lo || x.mag() > 1e15 {
        return unit;
    }
    let (fa, fb) = (f.eval(x.lo), f.eval(x.hi));
    let mut lo = round::down2(fa.min(fb));
    let mut hi = round::up2(fa.max(fb));

    let (m_lo, m_hi) = critical_index_range(x);
    let (peak, trough) = f.extremum_residues();
    let mut m = m_lo;
    while m <= m_hi {
        let r = m.rem_euclid(4);
        if r == peak {
            hi = 1.0;
        } else if r == trough {
            lo = -1.0;
        }
        m += 1;
    }
    Interval::new(lo.max(-1.0), hi.min(1.0))
}

/// Integers `m` such that `m * pi/2` may lie in `x` (conservative).
pub(crate) fn critical_index_range(x: Interval) -> (i64, i64) {
    let qa = Interval::point(x.lo) / HALF_PI;
    let qb = Interval::point(x.hi) / HALF_PI;
    (qa.lo.ceil() as i64, qb.hi.floor() as i64)
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "[empty]")
        } else {
            write!(f, "[{:?}, {:?}]", self.lo, self.hi)
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        if self.is_empty() {
            return self;
        }
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, y: Interval) -> Interval {
        if self.is_empty() || y.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: round::add_down(self.lo, y.lo),
            hi: round::add_up(self.hi, y.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, y: Interval) -> Interval {
        if self.is_empty() || y.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: round::add_down(self.lo, -y.hi),
            hi: round::add_up(self.hi, -y.lo),
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, y: Interval) -> Interval {
        use round::{mul_down as md, mul_up as mu};
        if self.is_empty() || y.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b, c, d) = (self.lo, self.hi, y.lo, y.hi);
        let (lo, hi) = if a >= 0.0 {
            if c >= 0.0 {
                (md(a, c), mu(b, d))
            } else if d <= 0.0 {
                (md(b, c), mu(a, d))
            } else {
                (md(b, c), mu(b, d))
            }
        } else if b <= 0.0 {
            if c >= 0.0 {
                (md(a, d), mu(b, c))
            } else if d <= 0.0 {
                (md(b, d), mu(a, c))
            } else {
                (md(a, d), mu(a, c))
            }
        } else if c >= 0.0 {
            (md(a, d), mu(b, d))
        } else if d <= 0.0 {
            (md(b, c), mu(a, c))
        } else {
            (md(a, d).min(md(b, c)), mu(a, c).max(mu(b, d)))
        };
        Interval { lo, hi }
    }
}

impl Div for Interval {
    type Output = Interval;
    /// Extended division: a denominator containing zero yields a half-line or
    /// the whole real line. Dividing by exactly `[0, 0]` is empty.
    fn div(self, y: Interval) -> Interval {
        use round::{div_down as dd, div_up as du};
        if self.is_empty() || y.is_empty() {
            return Interval::EMPTY;
        }
        let (a, b, c, d) = (self.lo, self.hi, y.lo, y.hi);
        if c > 0.0 {
            let (lo, hi) = if a >= 0.0 {
                (dd(a, d), du(b, c))
            } else if b <= 0.0 {
                (dd(a, c), du(b, d))
            } else {
                (dd(a, c), du(b, c))
            };
            return Interval { lo, hi };
        }
        if d < 0.0 {
            let (lo, hi) = if a >= 0.0 {
                (dd(b, d), du(a, c))
            } else if b <= 0.0 {
                (dd(b, c), du(a, d))
            } else {
                (dd(b, d), du(a, d))
            };
            return Interval { lo, hi };
        }
        // 0 in denominator
        if c == 0.0 && d == 0.0 {
            return Interval::EMPTY;
        }
        if a == 0.0 && b == 0.0 {
            return Interval::ZERO;
        }
        if c == 0.0 {
            if a >= 0.0 {
                Interval {
                    lo: dd(a, d),
                    hi: f64::INFINITY,
                }
            } else if b <= 0.0 {
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: du(b, d),
                }
            } else {
                Interval::ENTIRE
            }
        } else if d == 0.0 {
            if a >= 0.0 {
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: du(a, c),
                }
            } else if b <= 0.0 {
                Interval {
                    lo: dd(b, c),
                    hi: f64::INFINITY,
                }
            } else {
                Interval::ENTIRE
            }
        } else {
            Interval::ENTIRE
        }
    }
}

macro_rules! scalar_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<f64> for Interval {
            type Output = Interval;
            fn $m(self, y: f64) -> Interval { self.$m(Interval::point(y)) }
        }
        impl $tr<Interval> for f64 {
            type Output = Interval;
            fn $m(self, y: Interval) -> Interval { Interval::point(self).$m(y) }
        }
    )*};
}
scalar_ops!(Add add, Sub sub, Mul mul, Div div);

/// Interval counterpart of a binary arithmetic operator.
pub fn arith(op: ArithOp, x: Interval, y: Interval) -> Interval {
    match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
        ArithOp::Mul => x * y,
        ArithOp::Div => x / y,
    }
}

/// Interval counterpart of an elementary function.
pub fn elem(f: ElemFn, x: Interval) -> Result<Interval, DomainError> {
    Ok(match f {
        ElemFn::Sin => x.sin(),
        ElemFn::Cos => x.cos(),
        ElemFn::Exp => x.exp(),
        ElemFn::Sqrt => return x.sqrt(),
        ElemFn::Abs => x.abs(),
        ElemFn::Pow(k) => x.powi(k),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cannot branch: every component of the box is degenerate")]
pub struct DegenerateBox;

/// An interval vector `(X1, ..., Xn)`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox(Vec<Interval>);

impl IntervalBox {
    pub fn new(components: Vec<Interval>) -> Self {
        IntervalBox(components)
    }

    /// The box `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        IntervalBox(vec![Interval::new(lo, hi); n])
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Self {
        IntervalBox(bounds.iter().map(|&(l, h)| Interval::new(l, h)).collect())
    }

    /// Degenerate box at a point.
    pub fn from_point(x: &[f64]) -> Self {
        IntervalBox(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Interval] {
        &self.0
    }

    pub fn components_mut(&mut self) -> &mut [Interval] {
        &mut self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().any(Interval::is_empty)
    }

    /// Largest component width.
    pub fn width(&self) -> f64 {
        self.0.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn width_sum(&self) -> f64 {
        self.0.iter().map(Interval::width).sum()
    }

    pub fn volume(&self) -> f64 {
        self.0.iter().map(Interval::width).product()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }

    /// Index of the widest component; lowest index wins ties.
    pub fn widest(&self) -> usize {
        let mut best = 0;
        let mut w = self.0[0].width();
        for (i, c) in self.0.iter().enumerate().skip(1) {
            let wi = c.width();
            if wi > w {
                best = i;
                w = wi;
            }
        }
        best
    }

    /// Splits the widest component at its midpoint.
    pub fn bisect(&self) -> Result<(IntervalBox, IntervalBox), DegenerateBox> {
        self.bisect_at(self.widest())
    }

    /// Splits component `i` at its midpoint.
    pub fn bisect_at(&self, i: usize) -> Result<(IntervalBox, IntervalBox), DegenerateBox> {
        let c = self.0[i];
        if c.width() <= 0.0 {
            return Err(DegenerateBox);
        }
        let m = c.mid();
        if m <= c.lo() || m >= c.hi() {
            // adjacent floats: nothing left to split
            return Err(DegenerateBox);
        }
        let mut left = self.clone();
        let mut right = self.clone();
        left.0[i] = Interval::new(c.lo(), m);
        right.0[i] = Interval::new(m, c.hi());
        Ok((left, right))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.0.iter().zip(x).all(|(c, &v)| c.contains(v))
    }

    pub fn subset_of(&self, other: &IntervalBox) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a.subset_of(b))
    }

    /// Componentwise intersection; `None` when some component is empty.
    pub fn intersect(&self, other: &IntervalBox) -> Option<IntervalBox> {
        let v: Vec<Interval> = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.intersect(b))
            .collect();
        if v.iter().any(Interval::is_empty) {
            None
        } else {
            Some(IntervalBox(v))
        }
    }

    /// Clamps a point componentwise into the box.
    pub fn clamp_point(&self, x: &mut [f64]) {
        for (v, c) in x.iter_mut().zip(&self.0) {
            *v = v.clamp(c.lo(), c.hi());
        }
    }
}

impl Index<usize> for IntervalBox {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl IndexMut<usize> for IntervalBox {
    fn index_mut(&mut self, i: usize) -> &mut Interval {
        &mut self.0[i]
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}
