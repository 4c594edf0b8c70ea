mod common;

use std::time::Duration;

use certmin::benchmarks::Function;
use certmin::cooperation::{run_single, Detached, Mode};
use certmin::de::{de_run, DeConfig};
use certmin::ibc::{ibc_run, IbcConfig, Status};
use certmin::progress::{NullSink, Record, Worker};
use certmin::{Constraint, Expr, IntervalBox, Problem};

use common::{de_cfg, problem};

fn ibc_cfg() -> IbcConfig {
    common::ibc_cfg(60)
}

#[test]
fn contraction_keeps_feasible_points_on_keane() {
    common::keane_contraction_soundness(17, 10_000).unwrap();
}

#[test]
fn bracket_holds_at_every_iteration() {
    common::bracketing_invariant().unwrap();
}

#[test]
fn hybrid_and_ibc_only_agree() {
    common::hybrid_matches_ibc_only().unwrap();
}

#[test]
fn keane_minimizer_is_certified_feasible() {
    let p = problem(Function::Keane, 2);
    let out = ibc_run(&p, ibc_cfg(), &mut Detached, &mut NullSink);
    assert_eq!(out.status, Status::Certified);
    let x = out.x_best.unwrap();
    assert!(p.certified_feasible(&x));
    assert!((out.f_best - -0.3649797).abs() <= 1e-6);
}

#[test]
fn empty_feasible_set_is_reported() {
    // x^2 + y^2 <= 1 and x + y >= 3 on [-2, 2]^2
    let (x, y) = (Expr::var(0), Expr::var(1));
    let cs = vec![
        Constraint::new(x.clone().powi(2) + y.clone().powi(2) - 1.0),
        Constraint::new(3.0 - x.clone() - y.clone()),
    ];
    let p = Problem::new("disjoint", x + y, cs, IntervalBox::cube(2, -2.0, 2.0)).unwrap();
    let out = ibc_run(&p, ibc_cfg(), &mut Detached, &mut NullSink);
    assert_eq!(out.status, Status::Infeasible);
    assert!(out.x_best.is_none());
}

#[test]
fn time_limit_gives_a_valid_bracket() {
    let p = problem(Function::SineEnvelope, 4);
    let cfg = IbcConfig {
        time_limit: Some(Duration::from_millis(200)),
        ..Default::default()
    };
    let out = ibc_run(&p, cfg, &mut Detached, &mut NullSink);
    assert_eq!(out.status, Status::Timeout);
    let f_star = -1.4914953 * 3.0;
    assert!(out.lower_bound <= f_star);
    assert!(out.f_best.is_infinite() || out.f_best >= f_star - 1e-6);
}

#[test]
fn de_minimizes_a_sphere() {
    let e = Expr::sum((0..4).map(|i| (Expr::var(i) - 1.5).powi(2)));
    let p = Problem::new("sphere", e, vec![], IntervalBox::cube(4, -5.0, 5.0)).unwrap();
    let cfg = DeConfig {
        np: 40,
        max_generations: Some(400),
        ..Default::default()
    };
    let out = de_run(&p, cfg, &mut Detached, &mut NullSink).unwrap();
    assert!(out.best.eval.f.unwrap() < 1e-8, "{:?}", out.best);
    for v in &out.best.position {
        assert!((v - 1.5).abs() < 1e-4);
    }
    // the published bound is a certified upper bound of the best value
    assert!(out.best_certified.unwrap() >= out.best.eval.f.unwrap());
}

#[test]
fn de_finds_the_michalewicz_basin() {
    let p = problem(Function::Michalewicz, 2);
    let cfg = DeConfig {
        max_generations: Some(300),
        ..de_cfg(Function::Michalewicz, 3)
    };
    let out = de_run(&p, cfg, &mut Detached, &mut NullSink).unwrap();
    assert!((out.best.eval.f.unwrap() - -1.8013034).abs() < 1e-6);
    assert_eq!(out.generations, 300);
}

#[test]
fn de_stays_in_the_domain() {
    let p = problem(Function::Keane, 3);
    let cfg = DeConfig {
        max_generations: Some(100),
        ..de_cfg(Function::Keane, 4)
    };
    let mut log: Vec<Record> = Vec::new();
    let out = de_run(&p, cfg, &mut Detached, &mut log).unwrap();
    assert!(p.domain().contains_point(&out.best.position));
    assert!(out.best.eval.n_viol == 0);
    assert!(log.iter().all(|r| r.worker == Worker::De));
}

#[test]
fn same_seed_same_population() {
    let p = problem(Function::EggHolder, 3);
    let cfg = DeConfig {
        max_generations: Some(50),
        ..de_cfg(Function::EggHolder, 9)
    };
    let a = de_run(&p, cfg.clone(), &mut Detached, &mut NullSink).unwrap();
    let b = de_run(&p, cfg, &mut Detached, &mut NullSink).unwrap();
    assert_eq!(a, b);
}

#[test]
fn interleaved_runs_are_reproducible() {
    let p = problem(Function::Michalewicz, 3);
    let run = || {
        let mut log: Vec<Record> = Vec::new();
        let out = run_single(
            &p,
            Mode::DeterministicInterleaved,
            de_cfg(Function::Michalewicz, 5),
            ibc_cfg(),
            &mut log,
        )
        .unwrap();
        (out.ibc.unwrap(), log)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_eq!(a.status, Status::Certified);
}
