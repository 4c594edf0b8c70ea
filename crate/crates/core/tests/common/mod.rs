//! Checks shared by the property tests and the acceptance run. Each returns
//! `Err` with a description of the first violation.
#![allow(dead_code)]

use std::time::Duration;

use certmin::benchmarks::{de_defaults, make_problem, Function, ProblemOptions, RanaSyntax};
use certmin::contractor::fixpoint_contract;
use certmin::cooperation::{run_single, Detached, Mode};
use certmin::de::DeConfig;
use certmin::ibc::{IbcConfig, IbcSolver, Status};
use certmin::progress::{Event, NullSink, Record};
use certmin::{Constraint, IntervalBox, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: f64 = 1e-6;

pub fn problem(f: Function, n: usize) -> Problem {
    make_problem(f, n, &ProblemOptions::default()).unwrap()
}

pub fn rana(n: usize, s: RanaSyntax) -> Problem {
    let o = ProblemOptions {
        rana_syntax: s,
        ..Default::default()
    };
    make_problem(Function::Rana, n, &o).unwrap()
}

pub fn de_cfg(f: Function, seed: u64) -> DeConfig {
    let (np, w, cr) = de_defaults(Some(f));
    DeConfig {
        np,
        w,
        cr,
        seed,
        ..Default::default()
    }
}

pub fn ibc_cfg(limit_s: u64) -> IbcConfig {
    IbcConfig {
        time_limit: Some(Duration::from_secs(limit_s)),
        ..Default::default()
    }
}

fn point_in(lo: f64, hi: f64, t: f64) -> f64 {
    (lo + t * (hi - lo)).clamp(lo, hi)
}

pub fn random_point(rng: &mut ChaCha8Rng, b: &IntervalBox) -> Vec<f64> {
    b.components()
        .iter()
        .map(|c| point_in(c.lo(), c.hi(), rng.random::<f64>()))
        .collect()
}

/// A sub-box of `domain` with relative widths spread over six decades.
pub fn random_subbox(rng: &mut ChaCha8Rng, domain: &IntervalBox) -> IntervalBox {
    let scale = 10f64.powf(rng.random_range(-6.0..0.0));
    let bounds: Vec<(f64, f64)> = domain
        .components()
        .iter()
        .map(|d| {
            let w = d.width() * scale * rng.random::<f64>();
            let lo = d.lo() + rng.random::<f64>() * (d.width() - w);
            (lo, (lo + w).min(d.hi()))
        })
        .collect();
    IntervalBox::from_bounds(&bounds)
}

/// Every benchmark for n = 2..5, plus the rewritten Rana syntax.
pub fn benchmark_set() -> Vec<Problem> {
    let mut out = Vec::new();
    for f in Function::ALL {
        for n in 2..=5 {
            out.push(problem(f, n));
        }
    }
    for n in 2..=5 {
        out.push(rana(n, RanaSyntax::Rewritten));
    }
    out
}

/// `points` sampled values per problem, spread over `points / 100` random
/// sub-boxes, must lie in the natural extension of their box.
pub fn inclusion_fuzz(seed: u64, points: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in benchmark_set() {
        for _ in 0..points / 100 {
            let b = random_subbox(&mut rng, p.domain());
            let enc = p.tape().natural_extension(&b).map_err(|e| e.to_string())?;
            for _ in 0..100 {
                let x = random_point(&mut rng, &b);
                let v = p.eval(&x);
                if !enc.contains(v) {
                    return Err(format!("{}: f({x:?}) = {v} outside {enc:?}", p.name()));
                }
            }
        }
    }
    Ok(())
}

/// Feasible points of random boxes (strictly feasible, also for an
/// objective cut) must survive `fixpoint_contract` on Keane n = 2, 3, 4.
pub fn keane_contraction_soundness(seed: u64, points: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for n in [2, 3, 4] {
        let p = problem(Function::Keane, n);
        let mut cs: Vec<Constraint> = p.constraints().to_vec();
        cs.push(Constraint::new(p.objective().clone() + 0.2));
        let mut kept = 0;
        while kept < points {
            let bounds: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let w = 10.0 * rng.random::<f64>().powi(2);
                    let lo = rng.random::<f64>() * (10.0 - w);
                    (lo, lo + w)
                })
                .collect();
            let b = IntervalBox::from_bounds(&bounds);
            let contracted = fixpoint_contract(&cs, &b);
            for _ in 0..50 {
                let x = random_point(&mut rng, &b);
                if cs.iter().any(|c| c.value(&x) > -1e-9) {
                    continue;
                }
                match &contracted {
                    None => {
                        return Err(format!("keane n={n}: {b:?} emptied but {x:?} is feasible"))
                    }
                    Some(c) if !c.contains_point(&x) => {
                        return Err(format!("keane n={n}: {x:?} lost, {b:?} -> {c:?}"))
                    }
                    _ => {}
                }
                kept += 1;
            }
        }
    }
    Ok(())
}

/// Distance from `x` to the nearest zero of an `abs` argument.
fn kink_distance(f: Function, x: &[f64]) -> f64 {
    let pairs = |g: &dyn Fn(f64, f64) -> [f64; 2]| {
        x.windows(2)
            .flat_map(|w| g(w[0], w[1]))
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    };
    match f {
        Function::EggHolder => pairs(&|a, b| [b + 47.0 + a / 2.0, a - b - 47.0]),
        Function::Rana => pairs(&|a, b| [b + a + 1.0, b - a + 1.0]),
        Function::Keane => {
            let s: f64 = x.iter().map(|v| v.cos().powi(4)).sum();
            let p: f64 = x.iter().map(|v| v.cos().powi(2)).product();
            s - 2.0 * p
        }
        _ => f64::INFINITY,
    }
}

/// The gradient enclosure over a tiny box around `x` must contain the
/// central difference across that box, at `points` interior points per
/// function and n = 2..4, away from abs kinks.
pub fn gradient_vs_differences(seed: u64, points: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for f in Function::ALL {
        for n in 2..=4 {
            let p = problem(f, n);
            let h = 1e-6 * p.domain()[0].width();
            let mut checked = 0;
            while checked < points {
                let x = random_point(&mut rng, p.domain());
                if kink_distance(f, &x) < 1e-2 {
                    continue;
                }
                let b = IntervalBox::from_bounds(
                    &x.iter().map(|&v| (v - h, v + h)).collect::<Vec<_>>(),
                );
                if !b.subset_of(p.domain()) {
                    continue;
                }
                let g = p.tape().gradient_enclosure(&b).map_err(|e| e.to_string())?;
                for i in 0..n {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (p.eval(&xp) - p.eval(&xm)) / (xp[i] - xm[i]);
                    let gi = g.components[i];
                    // rounding error of the difference quotient
                    let slack = 1e-7 * (1.0 + fd.abs()) + 4.0 * f64::EPSILON * p.eval(&x).abs() / h;
                    if fd < gi.lo() - slack || fd > gi.hi() + slack {
                        return Err(format!(
                            "{} n={n} d/dx{i} at {x:?}: {fd} outside {gi:?}",
                            p.name()
                        ));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(())
}

/// Runs IB&C on Michalewicz n=2 one box at a time with a progress record
/// per iteration, checking `lb <= f* <= f~` and a non-decreasing lower bound
/// at every step and in every logged record.
pub fn bracketing_invariant() -> Result<(), String> {
    let p = problem(Function::Michalewicz, 2);
    // the recorded minimum carries 7 decimals
    let f_star = p.known_minimum().unwrap().value;
    let tol = 5e-8;
    let cfg = IbcConfig {
        progress_every: 1,
        ..Default::default()
    };
    let mut solver = IbcSolver::new(&p, cfg);
    let mut log: Vec<Record> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    while solver.step(&mut Detached, &mut log) {
        let (lb, ub) = (solver.global_lower_bound(), solver.best_ub());
        if lb > f_star + tol || ub < f_star - tol {
            return Err(format!(
                "iteration {}: [{lb}, {ub}] misses {f_star}",
                solver.iterations()
            ));
        }
        if lb < prev {
            return Err(format!("lower bound decreased {prev} -> {lb}"));
        }
        prev = lb;
    }
    let mut records = 0;
    for r in &log {
        if let Event::Progress {
            f_best: Some(ub),
            lower_bound: Some(lb),
            ..
        } = r.event
        {
            records += 1;
            if lb > f_star + tol || ub < f_star - tol {
                return Err(format!("logged bracket [{lb}, {ub}] misses {f_star}"));
            }
        }
    }
    if records == 0 {
        return Err("no progress records".into());
    }
    let out = solver.outcome(false);
    if out.status != Status::Certified || out.f_best - out.lower_bound > EPS {
        return Err(format!("run ended {:?}", out));
    }
    Ok(())
}

/// Hybrid and ibc-only certified values agree within 2 eps.
pub fn hybrid_matches_ibc_only() -> Result<(), String> {
    for (f, n) in [
        (Function::Michalewicz, 2),
        (Function::Michalewicz, 3),
        (Function::EggHolder, 2),
    ] {
        let p = problem(f, n);
        let run = |mode| {
            run_single(&p, mode, de_cfg(f, 1), ibc_cfg(60), &mut NullSink)
                .unwrap()
                .ibc
                .unwrap()
        };
        let (h, a) = (run(Mode::Hybrid), run(Mode::IbcOnly));
        if h.status != Status::Certified || a.status != Status::Certified {
            return Err(format!("{f} n={n}: {:?} / {:?}", h.status, a.status));
        }
        if (h.f_best - a.f_best).abs() > 2.0 * EPS {
            return Err(format!(
                "{f} n={n}: hybrid {} vs ibc-only {}",
                h.f_best, a.f_best
            ));
        }
    }
    Ok(())
}
