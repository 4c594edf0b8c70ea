//! Interval branch and contract: best-first search over boxes that proves
//! `f_best - f* <= epsilon`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::contractor::{fixpoint, mean_value_lower_bound, monotonicity_reduce, Prune};
use crate::cooperation::IbcLink;
use crate::expr::Tape;
use crate::interval::{Interval, IntervalBox};
use crate::problem::Problem;
use crate::progress::{finite, Event, Sink, Worker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// `f_best - f* <= epsilon` is proven.
    Certified,
    /// Stopped by a time or iteration limit; `[lower_bound, f_best]` still brackets `f*`.
    Timeout,
    /// The feasible set is proven empty.
    Infeasible,
    /// Search finished, but boxes below the minimal width kept the gap above epsilon.
    Unresolved,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Certified => "certified",
            Status::Timeout => "timeout",
            Status::Infeasible => "infeasible",
            Status::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IbcConfig {
    pub epsilon: f64,
    /// Boxes whose widest component is below this are not bisected.
    pub min_width: f64,
    pub time_limit: Option<Duration>,
    pub max_iterations: Option<u64>,
    /// Emit a progress record every this many iterations (0 = never).
    pub progress_every: u64,
    /// Track removed volume so coverage of the domain can be checked.
    pub audit: bool,
}

impl Default for IbcConfig {
    fn default() -> Self {
        IbcConfig {
            epsilon: 1e-6,
            min_width: 1e-12,
            time_limit: None,
            max_iterations: None,
            progress_every: 1000,
            audit: false,
        }
    }
}

/// A box waiting in the queue with a lower bound of `f` over it.
#[derive(Debug, Clone)]
pub struct QueueEntry {
    pub bx: IntervalBox,
    pub lower_bound: f64,
    seq: u64,
}

impl QueueEntry {
    pub fn new(bx: IntervalBox, lower_bound: f64) -> Self {
        QueueEntry {
            bx,
            lower_bound,
            seq: 0,
        }
    }
}

impl PartialEq for QueueEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for QueueEntry {
    // reversed: BinaryHeap pops the smallest bound, oldest first on ties
    fn cmp(&self, o: &Self) -> Ordering {
        o.lower_bound
            .total_cmp(&self.lower_bound)
            .then_with(|| o.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub queue: BinaryHeap<QueueEntry>,
    /// Best certified upper bound of the global minimum.
    pub best_ub: f64,
    pub incumbent: Option<Vec<f64>>,
    /// Interval evaluations of the objective.
    pub eval_count: u64,
    pub epsilon: f64,
}

impl SolverState {
    pub fn new(epsilon: f64) -> Self {
        SolverState {
            queue: BinaryHeap::new(),
            best_ub: f64::INFINITY,
            incumbent: None,
            eval_count: 0,
            epsilon,
        }
    }

    /// Folds in a certified upper bound; returns whether it improved.
    pub fn offer(&mut self, value: f64, point: &[f64]) -> bool {
        if value < self.best_ub {
            self.best_ub = value;
            self.incumbent = Some(point.to_vec());
            true
        } else {
            false
        }
    }
}

/// Discards an entry whose bound cannot improve on `best_ub` by more than epsilon.
pub fn cut_off_test(entry: &QueueEntry, state: &SolverState) -> Prune {
    if entry.lower_bound >= state.best_ub - state.epsilon {
        Prune::Discard
    } else {
        Prune::Keep
    }
}

/// Evaluates the box center; when it is proven feasible and improves the
/// incumbent, records it. Returns whether the state changed.
pub fn midpoint_test(b: &IntervalBox, problem: &Problem, state: &mut SolverState) -> bool {
    let m = b.midpoint();
    if !problem.certified_feasible(&m) {
        return false;
    }
    state.eval_count += 1;
    match problem.tape().certified_point_value(&m) {
        Ok(v) => state.offer(v.hi(), &m),
        Err(_) => false,
    }
}

/// What the solver returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbcOutcome {
    pub status: Status,
    pub f_best: f64,
    pub lower_bound: f64,
    pub x_best: Option<Vec<f64>>,
    pub iterations: u64,
    /// Interval evaluations of the objective (bounding and midpoint tests).
    pub ne_ibc: u64,
    /// Boxes dropped because they reached the minimal width.
    pub tiny_boxes: u64,
}

/// A steppable IB&C run over one problem.
pub struct IbcSolver<'p> {
    problem: &'p Problem,
    cfg: IbcConfig,
    state: SolverState,
    seq: u64,
    /// Smallest bound among boxes set aside without being refuted.
    settled_lb: f64,
    iterations: u64,
    tiny_boxes: u64,
    removed_volume: f64,
    started: Instant,
    vals: Vec<Interval>,
    tan: Vec<Interval>,
    grads: Vec<Interval>,
    point: Vec<Interval>,
}

impl<'p> IbcSolver<'p> {
    pub fn new(problem: &'p Problem, cfg: IbcConfig) -> Self {
        assert!(cfg.epsilon > 0.0, "epsilon must be positive");
        let mut s = IbcSolver {
            problem,
            state: SolverState::new(cfg.epsilon),
            cfg,
            seq: 0,
            settled_lb: f64::INFINITY,
            iterations: 0,
            tiny_boxes: 0,
            removed_volume: 0.0,
            started: Instant::now(),
            vals: Vec::new(),
            tan: Vec::new(),
            grads: Vec::new(),
            point: Vec::new(),
        };
        let root = problem.domain().clone();
        match s.bound(&root) {
            Some(f) => s.push(root, f.lo()),
            None => s.remove(&root),
        }
        s
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn best_ub(&self) -> f64 {
        self.state.best_ub
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn is_done(&self) -> bool {
        self.state.queue.is_empty()
    }

    /// A rigorous lower bound of the global minimum: no feasible point of
    /// the domain has a smaller objective value.
    pub fn global_lower_bound(&self) -> f64 {
        let q = self
            .state
            .queue
            .peek()
            .map_or(f64::INFINITY, |e| e.lower_bound);
        q.min(self.settled_lb).min(self.state.best_ub)
    }

    /// `(queued volume + removed volume, domain volume)`; equal up to
    /// rounding when `audit` is on.
    pub fn volume_audit(&self) -> (f64, f64) {
        let queued: f64 = self.state.queue.iter().map(|e| e.bx.volume()).sum();
        (queued + self.removed_volume, self.problem.domain().volume())
    }

    /// Accepts a certified upper bound from outside.
    pub fn offer_upper_bound(&mut self, value: f64, point: &[f64]) -> bool {
        self.state.offer(value, point)
    }

    fn push(&mut self, bx: IntervalBox, lb: f64) {
        self.seq += 1;
        self.state.queue.push(QueueEntry {
            bx,
            lower_bound: lb,
            seq: self.seq,
        });
    }

    fn remove(&mut self, bx: &IntervalBox) {
        if self.cfg.audit {
            self.removed_volume += bx.volume();
        }
    }

    fn shrink(&mut self, from: &IntervalBox, to: &IntervalBox) {
        if self.cfg.audit {
            self.removed_volume += from.volume() - to.volume();
        }
    }

    /// Sets a box aside with a bound that still counts towards the global one.
    fn settle(&mut self, bx: &IntervalBox, lb: f64) {
        self.settled_lb = self.settled_lb.min(lb);
        self.remove(bx);
    }

    fn bound(&mut self, bx: &IntervalBox) -> Option<Interval> {
        self.state.eval_count += 1;
        self.problem
            .tape()
            .forward(bx.components(), &mut self.vals)
            .ok()
    }

    /// Derivative enclosures of the objective over `bx` into `self.grads`.
    fn gradients(&mut self, bx: &IntervalBox) {
        let tape = self.problem.tape();
        self.grads.clear();
        if tape.forward(bx.components(), &mut self.vals).is_err() {
            self.grads.resize(bx.dim(), Interval::ENTIRE);
            return;
        }
        for i in 0..bx.dim() {
            let g = if bx[i].is_degenerate() {
                Interval::ENTIRE
            } else {
                tape.tangent_sweep(i, &self.vals, &mut self.tan)
            };
            self.grads.push(g);
        }
    }

    /// True when every constraint is strictly satisfied on the whole box.
    fn constraints_inactive(&mut self, bx: &IntervalBox) -> bool {
        let vals = &mut self.vals;
        self.problem
            .constraints()
            .iter()
            .all(|c| matches!(c.tape().forward(bx.components(), vals), Ok(v) if v.hi() < 0.0))
    }

    /// Processes one box. Returns false once the queue is empty.
    pub fn step<L: IbcLink + ?Sized, S: Sink + ?Sized>(
        &mut self,
        link: &mut L,
        sink: &mut S,
    ) -> bool {
        while let Some((v, x)) = link.poll_bound() {
            if self.state.offer(v, &x) {
                sink.emit(Worker::Ibc, Event::Received { value: v });
            }
        }
        let Some(entry) = self.state.queue.pop() else {
            return false;
        };
        self.iterations += 1;
        if self.cfg.progress_every > 0 && self.iterations.is_multiple_of(self.cfg.progress_every) {
            self.emit_progress(sink);
        }
        if cut_off_test(&entry, &self.state) == Prune::Discard {
            // best-first: everything left is cut off as well
            self.settle(&entry.bx, entry.lower_bound);
            while let Some(e) = self.state.queue.pop() {
                self.settle(&e.bx, e.lower_bound);
            }
            return false;
        }
        let eps = self.cfg.epsilon;
        let mut lb = entry.lower_bound;
        let original = entry.bx;
        let mut bx = original.clone();

        let le_zero = Interval::new(f64::NEG_INFINITY, 0.0);
        let mut items: Vec<(&Tape, Interval)> = self
            .problem
            .constraints()
            .iter()
            .map(|c| (c.tape(), le_zero))
            .collect();
        if self.state.best_ub.is_finite() {
            items.push((
                self.problem.tape(),
                Interval::new(f64::NEG_INFINITY, self.state.best_ub),
            ));
        }
        if !fixpoint(&items, bx.components_mut(), &mut self.vals) {
            self.remove(&original);
            return true;
        }
        let problem = self.problem;
        let Some(f) = self.bound(&bx) else {
            self.remove(&original);
            return true;
        };
        lb = lb.max(f.lo());
        if lb >= self.state.best_ub - eps {
            self.shrink(&original, &bx);
            self.settle(&bx, lb);
            return true;
        }
        let mut have_grads = false;
        if !problem.is_constrained() || self.constraints_inactive(&bx) {
            self.gradients(&bx);
            have_grads = true;
            match monotonicity_reduce(&self.grads, bx.components_mut(), problem.domain()) {
                None => {
                    self.remove(&original);
                    return true;
                }
                Some(true) => match self.bound(&bx) {
                    Some(f) => lb = lb.max(f.lo()),
                    None => {
                        self.remove(&original);
                        return true;
                    }
                },
                Some(false) => {}
            }
        }
        self.shrink(&original, &bx);
        if lb < self.state.best_ub - eps {
            if !have_grads {
                self.gradients(&bx);
            }
            // gradients of a superset box remain valid after a reduction
            self.state.eval_count += 1;
            let mv = mean_value_lower_bound(
                problem.tape(),
                bx.components(),
                &self.grads,
                &mut self.vals,
                &mut self.point,
            );
            lb = lb.max(mv);
        }
        if lb >= self.state.best_ub - eps {
            self.settle(&bx, lb);
            return true;
        }
        if midpoint_test(&bx, self.problem, &mut self.state) {
            let x = self
                .state
                .incumbent
                .clone()
                .expect("incumbent after improvement");
            sink.emit(
                Worker::Ibc,
                Event::UpperBound {
                    value: self.state.best_ub,
                    point: x.clone(),
                },
            );
            link.send_injection(x);
            if lb >= self.state.best_ub - eps {
                self.settle(&bx, lb);
                return true;
            }
        }
        let halves = if bx.width() < self.cfg.min_width {
            None
        } else {
            bx.bisect_at(self.split_index(&bx)).ok()
        };
        let Some((l, r)) = halves else {
            self.tiny_boxes += 1;
            self.settle(&bx, lb);
            return true;
        };
        for child in [l, r] {
            match self.bound(&child) {
                Some(f) => {
                    let lc = lb.max(f.lo());
                    if lc >= self.state.best_ub - eps {
                        self.settle(&child, lc);
                    } else {
                        self.push(child, lc);
                    }
                }
                None => self.remove(&child),
            }
        }
        true
    }

    /// Component with the largest smear `w_i * |G_i|`; widest when the
    /// gradient carries no information.
    fn split_index(&self, bx: &IntervalBox) -> usize {
        let mut best = (bx.widest(), 0.0);
        for (i, (c, g)) in bx.components().iter().zip(&self.grads).enumerate() {
            let s = c.width() * g.mag();
            if !s.is_finite() {
                return bx.widest();
            }
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    }

    fn emit_progress<S: Sink + ?Sized>(&self, sink: &mut S) {
        sink.emit(
            Worker::Ibc,
            Event::Progress {
                iteration: self.iterations,
                f_best: finite(self.state.best_ub),
                lower_bound: finite(self.global_lower_bound()),
                queue: self.state.queue.len(),
            },
        );
    }

    /// True when a configured time or iteration limit has been reached.
    pub fn limit_reached(&self) -> bool {
        if let Some(m) = self.cfg.max_iterations {
            if self.iterations >= m {
                return true;
            }
        }
        match self.cfg.time_limit {
            Some(t) => self.iterations.is_multiple_of(64) && self.started.elapsed() >= t,
            None => false,
        }
    }

    /// Final result. Call after [`step`](Self::step) returned false, or
    /// with `timed_out` when stopping early.
    pub fn outcome(&self, timed_out: bool) -> IbcOutcome {
        let f_best = self.state.best_ub;
        let lower_bound = self.global_lower_bound();
        let status = if timed_out && !self.is_done() {
            Status::Timeout
        } else if f_best.is_finite() && f_best - lower_bound <= self.cfg.epsilon {
            Status::Certified
        } else if f_best == f64::INFINITY && self.settled_lb == f64::INFINITY {
            Status::Infeasible
        } else {
            Status::Unresolved
        };
        IbcOutcome {
            status,
            f_best,
            lower_bound,
            x_best: self.state.incumbent.clone(),
            iterations: self.iterations,
            ne_ibc: self.state.eval_count,
            tiny_boxes: self.tiny_boxes,
        }
    }

    /// Runs to completion or until a limit is hit.
    pub fn run<L: IbcLink + ?Sized, S: Sink + ?Sized>(
        mut self,
        link: &mut L,
        sink: &mut S,
    ) -> IbcOutcome {
        let mut timed_out = false;
        loop {
            if self.limit_reached() {
                timed_out = true;
                break;
            }
            if !self.step(link, sink) {
                break;
            }
        }
        let out = self.outcome(timed_out);
        self.emit_progress(sink);
        sink.emit(
            Worker::Ibc,
            Event::Finished {
                status: out.status.as_str().to_string(),
                f_best: finite(out.f_best),
                lower_bound: finite(out.lower_bound),
            },
        );
        out
    }
}

/// Certifies the global minimum of `problem`, exchanging bounds over `link`.
pub fn ibc_run<L: IbcLink + ?Sized, S: Sink + ?Sized>(
    problem: &Problem,
    cfg: IbcConfig,
    link: &mut L,
    sink: &mut S,
) -> IbcOutcome {
    IbcSolver::new(problem, cfg).run(link, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contractor::Constraint;
    use crate::cooperation::Detached;
    use crate::expr::Expr;
    use crate::progress::NullSink;

    fn quartic() -> Problem {
        let x = Expr::var(0);
        let f = x.clone().powi(4) - 4.0 * x.powi(2);
        Problem::new(
            "quartic",
            f,
            vec![],
            IntervalBox::from_bounds(&[(-1.0, 4.0)]),
        )
        .unwrap()
    }

    #[test]
    fn cut_off_rule() {
        let mut st = SolverState::new(1e-6);
        let e = QueueEntry::new(IntervalBox::from_bounds(&[(3.0, 4.0)]), 17.0);
        assert_eq!(cut_off_test(&e, &st), Prune::Keep);
        st.best_ub = -3.0;
        assert_eq!(cut_off_test(&e, &st), Prune::Discard);
        let e = QueueEntry::new(e.bx.clone(), -3.0 - 0.5e-6);
        assert_eq!(cut_off_test(&e, &st), Prune::Discard);
        let e = QueueEntry::new(e.bx.clone(), -3.0 - 2e-6);
        assert_eq!(cut_off_test(&e, &st), Prune::Keep);
    }

    #[test]
    fn midpoint_sets_incumbent() {
        let p = quartic();
        let mut st = SolverState::new(1e-6);
        let b = IntervalBox::from_bounds(&[(-1.0, 3.0)]);
        assert!(midpoint_test(&b, &p, &mut st));
        assert!(st.best_ub >= -3.0 && st.best_ub < -3.0 + 1e-14);
        assert_eq!(st.incumbent.as_deref(), Some(&[1.0][..]));
        // a worse midpoint changes nothing
        let b = IntervalBox::from_bounds(&[(2.0, 4.0)]);
        assert!(!midpoint_test(&b, &p, &mut st));
        assert_eq!(st.incumbent.as_deref(), Some(&[1.0][..]));
    }

    #[test]
    fn infeasible_midpoint_is_ignored() {
        let (x, y) = (Expr::var(0), Expr::var(1));
        let g = Constraint::new(0.75 - x.clone() * y.clone());
        let p = Problem::new("k", x + y, vec![g], IntervalBox::cube(2, 0.0, 1.0)).unwrap();
        let mut st = SolverState::new(1e-6);
        assert!(!midpoint_test(&p.domain().clone(), &p, &mut st));
        assert_eq!(st.best_ub, f64::INFINITY);
        assert!(st.incumbent.is_none());
    }

    #[test]
    fn quartic_certified() {
        let p = quartic();
        let out = ibc_run(&p, IbcConfig::default(), &mut Detached, &mut NullSink);
        assert_eq!(out.status, Status::Certified);
        assert!(out.lower_bound <= -4.0 && -4.0 <= out.f_best);
        assert!(out.f_best - out.lower_bound <= 1e-6);
        let x = out.x_best.unwrap()[0];
        assert!((x - 2f64.sqrt()).abs() < 1e-3, "{x}");
    }

    #[test]
    fn empty_feasible_set() {
        let g = Constraint::new(Expr::constant(1.0));
        let p = Problem::new(
            "none",
            Expr::var(0),
            vec![g],
            IntervalBox::cube(1, 0.0, 1.0),
        )
        .unwrap();
        let out = ibc_run(&p, IbcConfig::default(), &mut Detached, &mut NullSink);
        assert_eq!(out.status, Status::Infeasible);
        assert_eq!(out.f_best, f64::INFINITY);
    }

    #[test]
    fn degenerate_domain_is_immediate() {
        let x = Expr::var(0);
        let p = Problem::new("pt", x.clone() * x, vec![], IntervalBox::from_point(&[3.0])).unwrap();
        let out = ibc_run(&p, IbcConfig::default(), &mut Detached, &mut NullSink);
        assert_eq!(out.status, Status::Certified);
        assert!(out.f_best >= 9.0 && out.f_best < 9.0 + 1e-14);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn audit_covers_domain() {
        let p = quartic();
        let cfg = IbcConfig {
            audit: true,
            max_iterations: Some(40),
            ..Default::default()
        };
        let mut s = IbcSolver::new(&p, cfg);
        while !s.limit_reached() && s.step(&mut Detached, &mut NullSink) {
            let (got, want) = s.volume_audit();
            assert!((got - want).abs() <= 1e-9 * want, "{got} vs {want}");
        }
    }
}
