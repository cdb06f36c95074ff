import math

import numpy as np
import pytest
from gmpy2 import mpq
from hypothesis import given, settings, strategies as st

from hyperdeck import pulses as pl
from hyperdeck.numerics import IntervalScalar, Q, SurdScalar, eval_poly

coef_lists = st.lists(st.fractions(min_value=-20, max_value=20, max_denominator=12), min_size=1, max_size=10)


def naive_cheb(w, y):
    # sum w_j T_j(y) by the three-term recurrence, exactly
    t0, t1 = mpq(1), Q(y)
    total = Q(w[0]) * t0
    for j in range(1, len(w)):
        total += Q(w[j]) * t1
        t0, t1 = t1, 2 * Q(y) * t1 - t0
    return total


@given(coef_lists, st.fractions(min_value=-3, max_value=3, max_denominator=7))
def test_cheb_to_power(w, y):
    assert eval_poly(pl.cheb_to_power([Q(c) for c in w]), Q(y)) == naive_cheb(w, y)


@given(coef_lists, st.fractions(min_value=-5, max_value=5, max_denominator=5),
       st.fractions(min_value=-5, max_value=5, max_denominator=5), st.fractions(min_value=-4, max_value=4,
                                                                              max_denominator=9))
def test_compose_affine(p, alpha, beta, x):
    c = pl.poly_compose_affine([Q(v) for v in p], Q(alpha), Q(beta))
    assert eval_poly(c, Q(x)) == eval_poly([Q(v) for v in p], Q(alpha) * Q(x) + Q(beta))


@given(coef_lists, st.lists(st.integers(-50, 50), min_size=1, max_size=8))
def test_eval_at_integers(p, xs):
    cq = [Q(v) for v in p]
    assert pl.eval_at_integers(cq, xs) == [eval_poly(cq, x) for x in xs]


@given(coef_lists, st.lists(st.fractions(min_value=-9, max_value=9, max_denominator=11), min_size=1, max_size=6))
def test_eval_at_rationals(p, xs):
    cq = [Q(v) for v in p]
    assert pl.eval_at_rationals(cq, [Q(x) for x in xs]) == [eval_poly(cq, Q(x)) for x in xs]


@given(coef_lists, st.integers(-30, 30), st.integers(-30, 30), st.integers(2, 40), st.integers(1, 9))
def test_eval_at_quadratic(p, A, B, T, q):
    cq = [Q(v) for v in p]
    a, b, scale = pl.eval_at_quadratic(cq, [A], [B], T, q)
    x = SurdScalar.of(mpq(A, q), mpq(B, q), T)
    assert SurdScalar.of(mpq(int(a[0])) / scale, mpq(int(b[0])) / scale, T) == eval_poly(cq, x)


def test_fejer_weights_match_kernel():
    k = 5
    w = pl.fejer_square_weights(k)
    for t in (0.3, 1.1, 2.5):
        ref = (math.sin(k * t / 2) / math.sin(t / 2)) ** 4
        val = sum(c * math.cos(j * t) for j, c in enumerate(w))
        assert val == pytest.approx(ref, rel=1e-9)
    assert w[0] + sum(w[1:]) == k**4


def test_constants():
    m0, m = pl.constants(3)
    assert float(m0) == pytest.approx(math.pi**2 / 6 * 64, rel=1e-6)
    assert float(m) == pytest.approx(2 / 3 * math.pi**2 * 2, rel=1e-6)
    assert float(m0) >= math.pi**2 / 6 * 64


def test_degree_bound_values():
    assert pl.f0_degree_bound(10**4, 105.3) == pytest.approx(math.sqrt(math.pi) * 100 * 105.3**0.25 + 2)
    assert pl.f0_degree_bound(10**4, 105.3) < 569.8
    assert pl.fpulse_degree_bound(10, 1000, 14) == pytest.approx(7 * math.sqrt(140000) + 2)
    assert pl.fk_degree_bound(99) == 18


def test_f0_small():
    f = pl.build_f0(200, pl.constants(3)[0])
    assert f.peak() == pl.constants(3)[0]
    rep = pl.check_pulse_properties(f)
    assert rep["ok"]
    assert abs(f(1)) <= 1


@pytest.fixture(scope="module")
def fpulse():
    return pl.build_fpulse(10, 100, pl.constants(3)[1])


def test_fpulse_small(fpulse):
    m = pl.constants(3)[1]
    f = fpulse
    assert f.peak() == m
    rep = pl.check_pulse_properties(f)
    assert rep["ok"]
    assert rep["properties"]["c"]["ok"]
    # |f(1/2)| < 4m certified with intervals
    v = abs(f.interval(IntervalScalar.exact(mpq(1, 2), 256)))
    assert v.hi < 4 * m


def test_fpulse_corrupted_fails(fpulse):
    f = fpulse
    bad = pl.PulsePolynomial(list(f.coefficients), f.family, dict(f.params))
    bad.coefficients[1] += 5
    assert not pl.check_pulse_properties(bad)["ok"]


def test_fk_n1():
    f = pl.build_fk(1)
    assert f(0) > abs(f(1)) + abs(f(2))


@pytest.mark.parametrize("N", [1, 2, 3, 5, 10, 33, 99, 250])
def test_fk_margin_and_degree(N):
    f = pl.build_fk(N)
    assert pl.fk_margin(f.coefficients, N) > 0
    assert f.degree <= pl.fk_degree_bound(N)
    tab = pl.fk_table(N)
    assert tab[0] == f.peak() and list(tab[1:4]) == [f(i) for i in range(1, min(4, N + 2))][:3]


def test_lp_empty_and_two_points():
    assert pl.lp_peak_polynomial([], 5).degree == 0
    f = pl.lp_peak_polynomial([1, 2], 2)
    assert f(0) == 1 and abs(f(1)) + abs(f(2)) <= mpq(1, 2)


def test_lp_grid_99():
    f = pl.lp_peak_polynomial(list(range(1, 101)), 24)
    assert f.degree <= 18
    assert pl._exact_abs_sum(f.coefficients, list(range(1, 101))) <= mpq(1, 2)


def test_lp_infeasible_reports_certificate():
    with pytest.raises(pl.LPInfeasible) as e:
        pl.lp_peak_polynomial(list(range(1, 60)), 2)
    assert e.value.certificate["degree"] == 2


def test_lp_rejects_zero():
    with pytest.raises(ValueError):
        pl.lp_peak_polynomial([0, 1], 3)


def test_pulse_json_roundtrip():
    f = pl.build_fk(20)
    g = pl.PulsePolynomial.from_json(f.to_json())
    assert g.coefficients == f.coefficients and g.family == "FK"


@settings(max_examples=20)
@given(st.lists(st.integers(-40, 40).filter(bool), min_size=1, max_size=12, unique=True))
def test_lp_certified_sum(points):
    f = pl.lp_peak_polynomial(points, len(points))
    assert f(0) == 1
    assert sum(abs(f(x)) for x in points) <= mpq(1, 2)
