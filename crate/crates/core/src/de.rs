//! Differential evolution (rand/1/bin) with bounce-back repair and
//! feasibility-first selection on evaluation triplets.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cooperation::DeLink;
use crate::interval::Interval;
use crate::problem::Problem;
use crate::progress::{Event, Sink, Worker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub np: usize,
    /// Weighting factor W.
    pub w: f64,
    /// Crossover rate CR.
    pub cr: f64,
    pub seed: u64,
    /// Emit a generation record every this many generations (0 = only on improvement).
    pub progress_every: u64,
    pub max_generations: Option<u64>,
    #[serde(skip)]
    pub time_limit: Option<Duration>,
}

impl Default for DeConfig {
    fn default() -> Self {
        DeConfig {
            np: 50,
            w: 0.7,
            cr: 0.5,
            seed: 0,
            progress_every: 100,
            max_generations: None,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeConfigError {
    #[error("population size must be at least 4 (got {0})")]
    Population(usize),
    #[error("weighting factor must be positive and finite (got {0})")]
    Weight(f64),
    #[error("crossover rate must lie in [0, 1] (got {0})")]
    Crossover(f64),
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), DeConfigError> {
        if self.np < 4 {
            return Err(DeConfigError::Population(self.np));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(DeConfigError::Weight(self.w));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(DeConfigError::Crossover(self.cr));
        }
        Ok(())
    }
}

/// Objective value (feasible points only), number of violated constraints,
/// and the sum of their violations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalTriplet {
    pub f: Option<f64>,
    pub n_viol: usize,
    pub s_viol: f64,
}

impl EvalTriplet {
    pub fn feasible(f: f64) -> Self {
        EvalTriplet {
            f: Some(f),
            n_viol: 0,
            s_viol: 0.0,
        }
    }

    /// Total order used for selection and for ranking the population:
    /// fewer violations first, then smaller violation sum, then smaller f.
    pub fn rank_cmp(&self, o: &EvalTriplet) -> Ordering {
        self.n_viol.cmp(&o.n_viol).then_with(|| {
            if self.n_viol > 0 {
                self.s_viol.total_cmp(&o.s_viol)
            } else {
                let a = self.f.unwrap_or(f64::INFINITY);
                let b = o.f.unwrap_or(f64::INFINITY);
                a.total_cmp(&b)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    KeepX,
    TakeY,
}

/// The parent survives only when strictly better; ties go to the trial.
pub fn select(x: &EvalTriplet, y: &EvalTriplet) -> Selection {
    if x.rank_cmp(y) == Ordering::Less {
        Selection::KeepX
    } else {
        Selection::TakeY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub position: Vec<f64>,
    pub eval: EvalTriplet,
}

/// Float evaluation of constraints, then of the objective when all hold.
pub fn evaluate_triplet(x: &[f64], problem: &Problem) -> EvalTriplet {
    let mut n_viol = 0;
    let mut s_viol = 0.0;
    for c in problem.constraints() {
        let g = c.value(x);
        if g > 0.0 || g.is_nan() {
            n_viol += 1;
            s_viol += if g.is_nan() { f64::INFINITY } else { g };
        }
    }
    if n_viol > 0 {
        return EvalTriplet {
            f: None,
            n_viol,
            s_viol,
        };
    }
    let f = problem.eval(x);
    EvalTriplet::feasible(if f.is_nan() { f64::INFINITY } else { f })
}

/// Mutation `u + W (v - w)` with binomial crossover against `x`; the
/// component at a random index is always taken from the mutant.
pub fn mutate_crossover<R: Rng + ?Sized>(
    x: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
    cfg: &DeConfig,
    rng: &mut R,
) -> Vec<f64> {
    let n = x.len();
    let forced = rng.random_range(0..n);
    (0..n)
        .map(|j| {
            let r: f64 = rng.random();
            if j == forced || r < cfg.cr {
                u[j] + cfg.w * (v[j] - w[j])
            } else {
                x[j]
            }
        })
        .collect()
}

/// Bounce-back repair with an explicit `r` in [0, 1].
pub fn bounce_back_with(y: f64, u: f64, bounds: Interval, r: f64) -> f64 {
    let (lo, hi) = (bounds.lo(), bounds.hi());
    let out = if y > hi {
        u + r * (hi - u)
    } else if y < lo {
        u + r * (lo - u)
    } else {
        return y;
    };
    out.clamp(lo, hi)
}

/// Brings an out-of-bounds component back between the base vector's
/// coordinate `u` and the violated bound.
pub fn bounce_back<R: Rng + ?Sized>(y: f64, u: f64, bounds: Interval, rng: &mut R) -> f64 {
    if bounds.contains(y) {
        return y;
    }
    bounce_back_with(y, u, bounds, rng.random())
}

/// Final state of a DE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeOutcome {
    pub best: Individual,
    pub generations: u64,
    /// Float objective evaluations.
    pub evaluations: u64,
    /// Certified (interval) evaluations of improving points.
    pub ne_de: u64,
    /// Best bound published to the other worker.
    pub best_certified: Option<f64>,
}

/// A population evolving over one problem.
pub struct DeEngine<'p> {
    problem: &'p Problem,
    cfg: DeConfig,
    rng: ChaCha8Rng,
    pop: Vec<Individual>,
    best: usize,
    generation: u64,
    evaluations: u64,
    ne_de: u64,
    best_certified: f64,
    started: Instant,
}

impl<'p> DeEngine<'p> {
    pub fn new(problem: &'p Problem, cfg: DeConfig) -> Result<Self, DeConfigError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let dom = problem.domain();
        let mut pop = Vec::with_capacity(cfg.np);
        for _ in 0..cfg.np {
            let position: Vec<f64> = dom
                .components()
                .iter()
                .map(|c| (c.lo() + rng.random::<f64>() * (c.hi() - c.lo())).clamp(c.lo(), c.hi()))
                .collect();
            let eval = evaluate_triplet(&position, problem);
            pop.push(Individual { position, eval });
        }
        let mut e = DeEngine {
            problem,
            evaluations: cfg.np as u64,
            cfg,
            rng,
            pop,
            best: 0,
            generation: 0,
            ne_de: 0,
            best_certified: f64::INFINITY,
            started: Instant::now(),
        };
        e.best = e.argbest();
        Ok(e)
    }

    pub fn population(&self) -> &[Individual] {
        &self.pop
    }

    pub fn best(&self) -> &Individual {
        &self.pop[self.best]
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    fn argbest(&self) -> usize {
        (0..self.pop.len())
            .min_by(|&a, &b| self.pop[a].eval.rank_cmp(&self.pop[b].eval))
            .expect("empty population")
    }

    fn argworst(&self) -> usize {
        (0..self.pop.len())
            .max_by(|&a, &b| self.pop[a].eval.rank_cmp(&self.pop[b].eval))
            .expect("empty population")
    }

    /// Replaces the worst individual with `point` (clamped into the domain).
    pub fn inject(&mut self, mut point: Vec<f64>) {
        self.problem.domain().clamp_point(&mut point);
        let eval = evaluate_triplet(&point, self.problem);
        self.evaluations += 1;
        let w = self.argworst();
        self.pop[w] = Individual {
            position: point,
            eval,
        };
        if eval.rank_cmp(&self.pop[self.best].eval) == Ordering::Less {
            self.best = w;
        }
    }

    /// Three mutually distinct indices, all different from `i`.
    fn pick3(&mut self, i: usize) -> (usize, usize, usize) {
        let np = self.pop.len();
        let draw = |taken: &[usize], rng: &mut ChaCha8Rng| loop {
            let k = rng.random_range(0..np);
            if !taken.contains(&k) {
                return k;
            }
        };
        let a = draw(&[i], &mut self.rng);
        let b = draw(&[i, a], &mut self.rng);
        let c = draw(&[i, a, b], &mut self.rng);
        (a, b, c)
    }

    /// One synchronous generation: every trial is built from the current
    /// population, then selection replaces parents in place.
    pub fn generation_step<L: DeLink + ?Sized, S: Sink + ?Sized>(
        &mut self,
        link: &mut L,
        sink: &mut S,
    ) {
        for p in link.poll_injections() {
            sink.emit(Worker::De, Event::Injected { point: p.clone() });
            self.inject(p);
        }
        let np = self.pop.len();
        let dom = self.problem.domain().clone();
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let (a, b, c) = self.pick3(i);
            let (x, u, v, w) = (&self.pop[i], &self.pop[a], &self.pop[b], &self.pop[c]);
            let mut y = mutate_crossover(
                &x.position,
                &u.position,
                &v.position,
                &w.position,
                &self.cfg,
                &mut self.rng,
            );
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = bounce_back(*yj, u.position[j], dom[j], &mut self.rng);
            }
            let eval = evaluate_triplet(&y, self.problem);
            trials.push(Individual { position: y, eval });
        }
        self.evaluations += np as u64;
        let before = self.pop[self.best].eval;
        for (i, t) in trials.into_iter().enumerate() {
            if select(&self.pop[i].eval, &t.eval) == Selection::TakeY {
                self.pop[i] = t;
            }
        }
        self.best = self.argbest();
        self.generation += 1;
        let best = &self.pop[self.best];
        // the initial population's best counts as the first improvement
        let improved = self.generation == 1 || best.eval.rank_cmp(&before) == Ordering::Less;
        if improved && best.eval.n_viol == 0 {
            self.ne_de += 1;
            if let Some(ub) = self.problem.certified_upper_bound(&best.position) {
                if ub < self.best_certified {
                    self.best_certified = ub;
                    let point = best.position.clone();
                    sink.emit(
                        Worker::De,
                        Event::UpperBound {
                            value: ub,
                            point: point.clone(),
                        },
                    );
                    link.publish(ub, point);
                }
            }
        }
        let every = self.cfg.progress_every;
        if improved || (every > 0 && self.generation.is_multiple_of(every)) {
            sink.emit(
                Worker::De,
                Event::Generation {
                    generation: self.generation,
                    best: self.pop[self.best].eval,
                },
            );
        }
    }

    pub fn limit_reached(&self) -> bool {
        if matches!(self.cfg.max_generations, Some(m) if self.generation >= m) {
            return true;
        }
        matches!(self.cfg.time_limit, Some(t) if self.started.elapsed() >= t)
    }

    pub fn outcome(&self) -> DeOutcome {
        DeOutcome {
            best: self.best().clone(),
            generations: self.generation,
            evaluations: self.evaluations,
            ne_de: self.ne_de,
            best_certified: self
                .best_certified
                .is_finite()
                .then_some(self.best_certified),
        }
    }

    /// Evolves until the link asks to stop or a limit is reached.
    pub fn run<L: DeLink + ?Sized, S: Sink + ?Sized>(
        mut self,
        link: &mut L,
        sink: &mut S,
    ) -> DeOutcome {
        while !link.should_stop() && !self.limit_reached() {
            self.generation_step(link, sink);
        }
        self.outcome()
    }
}

pub fn de_run<L: DeLink + ?Sized, S: Sink + ?Sized>(
    problem: &Problem,
    cfg: DeConfig,
    link: &mut L,
    sink: &mut S,
) -> Result<DeOutcome, DeConfigError> {
    Ok(DeEngine::new(problem, cfg)?.run(link, sink))
}
