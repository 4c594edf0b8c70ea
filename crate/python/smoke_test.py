"""Quick check of the pycertmin extension.

Build it first, e.g. `maturin develop --release` from the repository root.
"""

import math

import pycertmin as cm


def check_interval():
    x = cm.Interval(1.0, 4.0)
    y = x * x - 2 * x
    assert y.lo <= -7.0 and y.hi >= 14.0, y
    assert 0.5 in cm.Interval(0.0, 1.0).sin()
    assert (cm.Interval(-1.0, 2.0) ** 2).lo >= 0.0
    try:
        cm.Interval(-2.0, -1.0).sqrt()
    except ValueError:
        pass
    else:
        raise AssertionError("sqrt of a negative interval")


def check_problem():
    p = cm.Problem("egg-holder", 2)
    assert p.dim == 2
    x = [512.0, 404.2319]
    v = p.eval(x)
    box = [(xi - 1e-3, xi + 1e-3) for xi in x]
    assert v in p.enclose(box)
    assert len(p.gradient(box)) == 2
    k = cm.Problem("keane", 2)
    assert k.certified_feasible([1.0, 1.0])
    # x0 * x1 >= 0.75 is violated here
    assert not k.certified_feasible([0.5, 0.5])


def check_run():
    r = cm.run("michalewicz", 2)
    assert r["status"] == "certified", r
    assert abs(r["f_best"] - -1.8013034) <= 1e-6
    assert r["f_best"] - r["lower_bound"] <= 1e-6
    same = [cm.run("rana", 2, mode="deterministic-interleaved", seed=3) for _ in range(2)]
    assert same[0] == same[1]
    assert same[0]["wall_time_s"] is None
    try:
        cm.run("rana", 2, epsilon=0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("epsilon 0 accepted")


def check_reference():
    rows = cm.reference_minima()
    eh = [r for r in rows if r["function"] == "egg-holder" and r["n"] == 5]
    assert eh and math.isclose(eh[0]["value"], -3719.7248363)
    assert abs(cm.putative_minimum("sine-envelope", 3) - 2 * -1.4914953) < 1e-4


if __name__ == "__main__":
    check_interval()
    check_problem()
    check_run()
    check_reference()
    print("ok")
