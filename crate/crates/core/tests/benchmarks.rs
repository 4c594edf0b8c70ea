use certmin::benchmarks::{
    make_problem, putative_minimum, reference_minima, Function, ProblemOptions, RanaSyntax,
    ShekelData,
};
use certmin::{Expr, IntervalBox, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const SHEKEL_SHA256: &str = "e1f36d7cadb8074817047ba47b91c6e51084d84a3b9f06633bd86a3553fd9a11";

fn problem(f: Function, n: usize) -> Problem {
    make_problem(f, n, &ProblemOptions::default()).unwrap()
}

fn rana(n: usize, s: RanaSyntax) -> Problem {
    let o = ProblemOptions {
        rana_syntax: s,
        ..Default::default()
    };
    make_problem(Function::Rana, n, &o).unwrap()
}

/// The `k` top-level summands of `-(t1 + ... + tk)` or `t1 + ... + tk`.
fn terms(e: &Expr, k: usize) -> Vec<&Expr> {
    let mut e = e;
    if let Expr::Neg(inner) = e {
        e = inner;
    }
    let mut out = Vec::new();
    for _ in 1..k {
        let Expr::Add(a, b) = e else {
            panic!("expected {k} terms")
        };
        out.push(&**b);
        e = a;
    }
    out.push(e);
    out.reverse();
    out
}

#[test]
fn shekel_file_checksum() {
    let text = std::fs::read(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/shekel_foxholes.txt"
    ))
    .unwrap();
    let digest = Sha256::digest(&text);
    assert_eq!(hex::encode(digest), SHEKEL_SHA256);
}

#[test]
fn reference_points_match_recorded_values() {
    for r in reference_minima() {
        let Some(x) = &r.solution else { continue };
        let p = problem(r.function, r.n);
        let v = p.eval(x);
        let rel = ((v - r.value) / r.value).abs();
        assert!(
            rel <= 1e-6,
            "{} n={}: f = {v}, recorded {}",
            r.function,
            r.n,
            r.value
        );
        assert!(
            p.domain().contains_point(x),
            "{} n={} outside domain",
            r.function,
            r.n
        );
        if r.function != Function::Keane {
            assert!(p.certified_feasible(x));
        }
    }
}

#[test]
fn keane_reference_points_nearly_feasible() {
    for n in 2..=4 {
        let p = problem(Function::Keane, n);
        let x = p.known_minimum().unwrap().solution.clone().unwrap();
        let g: Vec<f64> = p.constraints().iter().map(|c| c.value(&x)).collect();
        // rounded to six decimals, the product lands a hair under 0.75
        assert!(g[0] <= 1e-6, "n={n}: g1 = {}", g[0]);
        assert!(g[1] < 0.0, "n={n}: g2 = {}", g[1]);
        assert!(p.constraints()[1].certified_at(&x));
    }
}

#[test]
fn keane_constraint_values() {
    let p = problem(Function::Keane, 2);
    let g: Vec<f64> = p
        .constraints()
        .iter()
        .map(|c| c.value(&[0.5, 0.5]))
        .collect();
    assert_eq!(g, vec![0.5, -14.0]);
}

#[test]
fn domains_follow_definitions() {
    let cases = [
        (Function::Michalewicz, 0.0, std::f64::consts::PI),
        (Function::SineEnvelope, -100.0, 100.0),
        (Function::Shekel, 0.0, 10.0),
        (Function::EggHolder, -512.0, 512.0),
        (Function::Rana, -512.0, 512.0),
        (Function::Keane, 0.0, 10.0),
    ];
    for (f, lo, hi) in cases {
        let p = problem(f, 3);
        for c in p.domain().components() {
            assert_eq!(c.lo(), lo, "{f}");
            assert!(c.hi() >= hi && c.hi() - hi <= 1e-15 * hi.abs(), "{f}");
        }
        assert_eq!(
            p.constraints().len(),
            if f == Function::Keane { 2 } else { 0 }
        );
    }
}

#[test]
fn rana_syntaxes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in [2, 3, 5] {
        let a = rana(n, RanaSyntax::Original);
        let b = rana(n, RanaSyntax::Rewritten);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-512.0..=512.0)).collect();
            let (fa, fb) = (a.eval(&x), b.eval(&x));
            assert!(
                (fa - fb).abs() <= 1e-9 * fa.abs().max(1.0),
                "{x:?}: {fa} vs {fb}"
            );
        }
    }
}

#[test]
fn both_rana_syntaxes_enclose_point_values() {
    let a = rana(3, RanaSyntax::Original);
    let b = rana(3, RanaSyntax::Rewritten);
    let x = [-512.0, -512.0, -511.995602];
    for p in [&a, &b] {
        let v = p.tape().certified_point_value(&x).unwrap();
        assert!(v.contains(p.eval(&x)));
        assert!(v.width() < 1e-9);
    }
}

#[test]
fn rewritten_rana_is_mostly_tighter() {
    let a = rana(2, RanaSyntax::Original);
    let b = rana(2, RanaSyntax::Rewritten);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut narrower, mut wider) = (0, 0);
    for _ in 0..1000 {
        let bounds: Vec<(f64, f64)> = (0..2)
            .map(|_| {
                let (u, v) = (
                    rng.random_range(-512.0..512.0),
                    rng.random_range(-512.0..512.0),
                );
                (f64::min(u, v), f64::max(u, v))
            })
            .collect();
        let bx = IntervalBox::from_bounds(&bounds);
        let wa = a.tape().natural_extension(&bx).unwrap().width();
        let wb = b.tape().natural_extension(&bx).unwrap().width();
        narrower += (wb < wa) as usize;
        wider += (wb > wa) as usize;
    }
    // about 0.6% of uniformly drawn boxes come out wider
    assert!(narrower >= 950, "narrower on {narrower}/1000");
    assert!(wider <= 20, "wider on {wider}/1000");
}

#[test]
fn rewritten_rana_is_tighter_across_kinks() {
    // boxes straddling x2 = x1 - 1 and x2 = -x1 - 1, where a square root
    // argument vanishes and the gradient is unbounded
    let a = rana(2, RanaSyntax::Original);
    let b = rana(2, RanaSyntax::Rewritten);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut narrower, mut sum_a, mut sum_b) = (0, 0.0, 0.0);
    for k in 0..200 {
        let x1: f64 = rng.random_range(-500.0..500.0);
        let w: f64 = rng.random_range(0.01..4.0);
        let x2 = if k % 2 == 0 { x1 - 1.0 } else { -x1 - 1.0 };
        let bx =
            IntervalBox::from_bounds(&[(x1 - w / 2.0, x1 + w / 2.0), (x2 - w / 2.0, x2 + w / 2.0)]);
        let wa = a.tape().natural_extension(&bx).unwrap().width();
        let wb = b.tape().natural_extension(&bx).unwrap().width();
        narrower += (wb < wa) as usize;
        sum_a += wa;
        sum_b += wb;
    }
    assert!(narrower >= 110, "narrower on {narrower}/200");
    assert!(sum_b < 0.9 * sum_a, "{sum_b} vs {sum_a}");
}

#[test]
fn occurrence_counts() {
    let n = 6;
    let r = rana(n, RanaSyntax::Original);
    let e = problem(Function::EggHolder, n);
    for i in 1..n - 1 {
        assert_eq!(r.objective().occurrences(i), 10, "rana x{i}");
        assert_eq!(e.objective().occurrences(i), 6, "egg holder x{i}");
    }
    assert_eq!(r.objective().occurrences(0), 5);
    assert_eq!(e.objective().occurrences(n - 1), 3);
}

#[test]
fn separability_structure() {
    let n = 4;
    let m = problem(Function::Michalewicz, n);
    for t in terms(m.objective(), n) {
        assert_eq!(t.variables().len(), 1);
    }
    for (f, k) in [
        (Function::SineEnvelope, n - 1),
        (Function::EggHolder, n - 1),
        (Function::Rana, n - 1),
        (Function::Shekel, 30),
    ] {
        for t in terms(problem(f, n).objective(), k) {
            assert!(t.variables().len() >= 2, "{f}");
        }
    }
    // Keane is a single quotient touching every variable
    assert_eq!(problem(Function::Keane, n).objective().variables().len(), n);
}

#[test]
fn putative_formulas_track_certified_values() {
    let within = |f: Function, ns: std::ops::RangeInclusive<usize>, tol: f64| {
        for n in ns {
            let r = reference_minima()
                .iter()
                .find(|r| r.function == f && r.n == n)
                .unwrap();
            let p = putative_minimum(f, n).unwrap();
            assert!((p - r.value).abs() <= tol, "{f} n={n}: {p} vs {}", r.value);
        }
    };
    within(Function::SineEnvelope, 2..=6, 1e-4);
    within(Function::Rana, 2..=7, 0.05);
    within(Function::Michalewicz, 50..=50, 1e-2);
}

#[test]
fn custom_shekel_data_is_used() {
    let mut text = String::new();
    for _ in 0..30 {
        text.push_str("5 5 1\n");
    }
    let data = ShekelData::parse(&text).unwrap();
    let o = ProblemOptions {
        shekel_data: Some(data),
        ..Default::default()
    };
    let p = make_problem(Function::Shekel, 2, &o).unwrap();
    assert!((p.eval(&[5.0, 5.0]) + 30.0).abs() < 1e-12);
    assert!(make_problem(Function::Shekel, 3, &o).is_err());
}
