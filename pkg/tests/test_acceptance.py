"""Acceptance suite: the ten exit criteria, one test per criterion.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them)
and asserts both the criterion itself and its runtime budget.
"""

import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from foliations.flow import (
    FlowWord,
    NumericOptions,
    XorShift64Star,
    chart_at,
    chart_rank_check,
    flow,
    leaf_sample,
    random_rational_points,
)
from foliations.holonomy import germ_equal_at_fixed_point, holonomy_jet, jet_exact_linear
from foliations.modalg import (
    contains,
    fiber_dim,
    is_involutive,
    module_groebner,
    tangent_dim,
)
from foliations.vfparse import FoliationSpec, VectorField, parse_vector_field

from helpers import (
    brute_force_member,
    cstar,
    gl2,
    nonintegrable,
    random_field,
    random_poly,
    random_word,
    sl2,
    xk,
)


@contextmanager
def criterion(number: int, title: str, seconds: float):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\nFAIL  criterion {number:2d}: {title}")
        raise
    elapsed = time.perf_counter() - start
    print(f"\nPASS  criterion {number:2d}: {title} ({elapsed:.2f}s < {seconds:g}s)")
    assert elapsed < seconds, f"criterion {number} exceeded its {seconds}s budget"


def test_criterion_01_linear_action_fiber_dimensions():
    with criterion(1, "linear-action fiber dimensions", 5.0):
        expected_at_zero = {"gl2": 4, "sl2": 3, "cstar": 2}
        specs = {"gl2": gl2(), "sl2": sl2(), "cstar": cstar()}
        for name, spec in specs.items():
            assert fiber_dim(spec, (0, 0)) == expected_at_zero[name]
            assert fiber_dim(spec, (1, 0)) == 2
            assert fiber_dim(spec, (0, 1)) == 2


def test_criterion_02_xk_family_distinctness():
    with criterion(2, "x^k d/dx family distinctness under membership", 1.0):
        for k in range(1, 6):
            gb = module_groebner(xk(k))
            for j in range(1, 6):
                query = parse_vector_field(f"x^{j}*dx" if j > 1 else "x*dx", ("x",))
                assert contains(gb, query).member == (j >= k), (j, k)


def test_criterion_03_involutivity():
    with criterion(3, "involutivity verdicts with witnesses", 2.0):
        for spec in (sl2(), gl2(), cstar(), *(xk(k) for k in range(1, 6))):
            assert is_involutive(spec).closed
        report = is_involutive(nonintegrable())
        assert not report.closed
        assert report.witnesses[0].bracket == parse_vector_field("dy", ("x", "y"))


def test_criterion_04_germ_distinctness():
    with criterion(4, "germ distinctness at the origin", 5.0):
        spec = sl2()
        rng = XorShift64Star(40_404)
        checked = 0
        while checked < 20:
            w1 = random_word(rng, spec, max_steps=4, t_max=1.0)
            w2 = random_word(rng, spec, max_steps=4, t_max=1.0)
            gap = np.abs(jet_exact_linear(spec, w1) - jet_exact_linear(spec, w2)).max()
            if gap < 1e-3:
                continue
            assert not germ_equal_at_fixed_point(spec, w1, w2, (0, 0))
            assert germ_equal_at_fixed_point(spec, w1, w1, (0, 0))
            assert germ_equal_at_fixed_point(spec, w2, w2, (0, 0))
            checked += 1


def test_criterion_05_jet_oracle_agreement():
    with criterion(5, "integrated jets match matrix-exponential oracle", 30.0):
        spec = sl2()
        rng = XorShift64Star(50_505)
        opts = NumericOptions(step_size=1e-3)
        for _ in range(50):
            w = random_word(rng, spec, max_steps=4, t_max=1.0)
            numeric = holonomy_jet(spec, w, (Fraction(0), Fraction(0)), opts)
            exact = jet_exact_linear(spec, w)
            assert np.abs(numeric - exact).max() < 1e-6


def test_criterion_06_chart_rank_equals_leaf_dimension():
    with criterion(6, "chart parameter rank = tangent dimension", 30.0):
        rng = XorShift64Star(60_606)
        for spec in (sl2(), gl2(), cstar(), xk(2)):
            chart = chart_at(spec, tuple(0.0 for _ in range(spec.nvars)))
            samples = random_rational_points(rng, spec.nvars, 50)
            report = chart_rank_check(chart, samples[0], samples[1:])
            assert report.ok, report.mismatches


def test_criterion_07_semicontinuity_on_grid():
    with criterion(7, "fiber/tangent semicontinuity shadow on the grid", 10.0):
        axis = [Fraction(n, 4) for n in range(-4, 5)]
        grid = [(a, b) for a in axis for b in axis]
        for spec in (sl2(), gl2(), cstar()):
            fibers = {pt: fiber_dim(spec, pt) for pt in grid}
            tangents = {pt: tangent_dim(spec, pt) for pt in grid}
            origin = (Fraction(0), Fraction(0))
            assert fibers[origin] == max(fibers.values())
            assert tangents[origin] == min(tangents.values())
            assert all(fibers[pt] >= tangents[pt] for pt in grid)


def test_criterion_08_leaf_invariance():
    with criterion(8, "tangent dimension constant along sampled leaves", 10.0):
        for spec in (sl2(), gl2(), cstar()):
            pts = leaf_sample(spec, (1.0, 0.0), 100, rng_seed=20_260_810)
            for pt in pts:
                rounded = tuple(Fraction(v).limit_denominator(10**6) for v in pt)
                assert tangent_dim(spec, rounded) == 2
            fixed = leaf_sample(spec, (0.0, 0.0), 100, rng_seed=20_260_810)
            assert all(p == (0.0, 0.0) for p in fixed)


def test_criterion_09_membership_oracle_equivalence():
    with criterion(9, "Groebner membership agrees with brute-force solve", 60.0):
        rng = XorShift64Star(90_909)
        bound = 4
        members = non_members = 0
        for trial in range(100):
            nvars = rng.randint(1, 2)
            k = rng.randint(1, 3)
            names = ("x", "y")[:nvars]
            gens = tuple(random_field(rng, nvars, 3) for _ in range(k))
            spec = FoliationSpec(names, gens)
            if trial % 2 == 0:
                query = VectorField.zero(nvars)
                for g in gens:
                    query = query + g.scale(random_poly(rng, nvars, 1))
            else:
                query = random_field(rng, nvars, 4)
            verdict = contains(module_groebner(spec), query)
            oracle = brute_force_member(spec, query, degree_bound=bound)
            if oracle is not None:
                assert verdict.member, "oracle found a combination, contains said no"
            if verdict.member:
                members += 1
                cert_deg = max((f.degree() for f in verdict.certificate), default=-1)
                if cert_deg <= bound:
                    assert oracle is not None, "certificate within bound, oracle missed it"
            else:
                non_members += 1
                assert oracle is None, "contains said no but oracle found a combination"
        assert members >= 20 and non_members >= 20


def test_criterion_10_rk4_convergence():
    with criterion(10, "RK4 error shrinks >= 12x per step halving", 5.0):
        exp_spec, ric_spec = xk(1), xk(2)

        def max_err(h):
            opts = NumericOptions(step_size=h)
            worst = 0.0
            for x0 in (-0.5, -0.25, 0.25, 0.5):
                for t in (0.25, 0.5, 1.0):
                    e = flow(exp_spec, FlowWord(exp_spec, [((1,), t)]), (x0,), opts)[0]
                    worst = max(worst, abs(e - x0 * np.exp(t)))
                    r = flow(ric_spec, FlowWord(ric_spec, [((1,), t)]), (x0,), opts)[0]
                    worst = max(worst, abs(r - x0 / (1 - t * x0)))
            return worst

        h0 = 1.0 / 16.0
        e0, e1, e2 = max_err(h0), max_err(h0 / 2), max_err(h0 / 4)
        assert e0 / e1 >= 12.0, (e0, e1)
        assert e1 / e2 >= 12.0, (e1, e2)
