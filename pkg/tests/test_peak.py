import itertools
import json
import math

import numpy as np
import pytest
from gmpy2 import mpq

from hyperdeck import lattice as lat, peak as pk, planar
from hyperdeck.numerics import SurdScalar, pi_upper
from hyperdeck.pulses import constants


def test_trivial_single_point():
    p = pk.construct_peak_d([[3, 4, 5]], 16, 3)
    v = pk.verify_peak(p, [[3, 4, 5]])
    assert v.certified and mpq(v.margin) == 1


def test_constant_product_two_points_fails():
    p = pk.trivial_product((1, 1, 1), 8, 3)
    v = pk.verify_peak(p, [[1, 1, 1], [2, 2, 2]])
    assert v.status == "FAILED"


def test_verify_requires_h_in_H():
    p = pk.trivial_product((1, 1, 1), 8, 3)
    with pytest.raises(ValueError):
        pk.verify_peak(p, [[2, 2, 2]])


def test_exact_and_interval_agree():
    rng = np.random.default_rng(4)
    H = rng.integers(1, 65, (150, 3))
    p = pk.construct_peak_d(H, 64, 3, mode="lp")
    a = pk.verify_peak(p, H, method="exact")
    b = pk.verify_peak(p, H, method="interval")
    assert a.certified and b.certified
    lo, hi = (float(t) for t in b.margin.strip("[]").split(","))
    assert lo <= float(mpq(a.margin)) <= hi


def test_peak_json_roundtrip():
    rng = np.random.default_rng(5)
    H = rng.integers(1, 65, (200, 3))
    p = pk.construct_peak_d(H, 64, 3, mode="lp")
    q = pk.peak_from_json(json.loads(json.dumps(p.to_json())))
    assert pk.verify_peak(q, H).to_json() == pk.verify_peak(p, H).to_json()


def test_exact_values_match_pointwise_evaluation():
    rng = np.random.default_rng(6)
    H = pk.as_points(rng.integers(1, 65, (40, 3)))
    p = pk.construct_peak_d(H, 64, 3, mode="lp")
    vals = p.exact_values(H)
    for x, v in zip(H[:10], vals[:10]):
        assert p(tuple(int(t) for t in x)) == v


def test_lp_product_planar_directions():
    # LP pulses on two planar supporting directions, H in [100]^2 with 1000 points
    rng = np.random.default_rng(7)
    H = pk.as_points(rng.integers(1, 101, (1000, 2)))
    td = planar.two_directions(H, planar.planar_R(100))
    dirs = [lat.integral_direction(td.u1, td.h), lat.integral_direction(td.u2, td.h)]
    factors, rep = pk._lp_factors(H, td.h, dirs)
    p = pk.PeakProduct(td.h, 2, 100, factors, "lp")
    assert rep["ok"] and pk.verify_peak(p, H).certified


def test_pipeline_small_box():
    # [4]^3 with synthetic lambda = 2, R = 6
    H = np.array(list(itertools.product(range(1, 5), repeat=3)))
    params = lat.DirectionParams(3, 2, 36, 6.0, 4)
    frame = pk.build_directions(pk.as_points(H), 4, 3, allow_lambda_two=True, params=params)
    g0 = [frame.g0(tuple(x)) for x in H]
    assert min(g0) == 0 and all(isinstance(v, int) for v in g0)


def test_small_n_rejected_in_lemma_mode():
    H = np.array([[1, 1, 1], [2, 3, 4]])
    with pytest.raises(lat.ConstructionError):
        pk.construct_peak_d(H, 4, 3, mode="lemma")


def test_invariants_n4096():
    rng = np.random.default_rng(8)
    H = rng.integers(1, 4097, (1000, 3))
    rep = pk.invariant_suite(H, 4096, 3)
    assert rep["rotation"]["ok"] and rep["property_b"]["ok"] and rep["property_c"]["ok"]
    assert rep["property_a"]["g0_ok"] and rep["heights_ok"] and rep["tangent_ok"]


def test_lemma_mode_skips_pulses_when_too_large():
    rng = np.random.default_rng(9)
    H = rng.integers(1, 4097, (50, 3))
    p = pk.construct_peak_d(H, 4096, 3, mode="lemma")
    assert not p.complete and "skipped" in p.transcript["pulses"]
    rep = pk.degree_report(p)
    assert rep["kind"] == "estimated"


def test_bound_miss_and_adaptive_inflation(monkeypatch):
    # shrink a so that some rotated value falls below -a
    real = pk.peak_params

    def tiny(n, d):
        out = dict(real(n, d))
        out["a"] = 1
        return out
    monkeypatch.setattr(pk, "peak_params", tiny)
    rng = np.random.default_rng(10)
    H = rng.integers(1, 82, (300, 3))
    with pytest.raises(pk.BoundMiss) as e:
        pk.construct_peak_d(H, 81, 3, mode="lemma", adaptive=False, build_pulses="never")
    assert "property_a" in e.value.report
    p = pk.construct_peak_d(H, 81, 3, mode="lemma", build_pulses="never")
    tr = p.transcript
    assert tr["bound_miss"] and tr["a_inflations"] >= 1 and tr["a_used"] == 2 ** tr["a_inflations"]
    vals = [pk.direction_values(fc.direction, pk.as_points(H))[0] for fc in p.factors[1:]]
    assert all(v >= -tr["a_used"] for col in vals for v in col)


def test_params_and_bounds():
    prm = pk.peak_params(4096, 3)
    assert prm["b"] == math.ceil(math.sqrt(3) * 4096)
    assert prm["b0"] >= math.sqrt(3) * 4096 * math.sqrt(3) * 4096 ** 0.5
    assert pk.lemma_degree_bound(4096, 3) == pytest.approx(3 ** 4.5 * 512 - 3)
    assert pk.lemma_degree_bound(4096, 3) == pytest.approx(71829, abs=1)
    assert pk.planar_degree_bound(1000) == pytest.approx(628.8)


def test_slice_bound_value():
    m = constants(3)[1]
    assert pk.slice_bound(1, 3, m) == (4 * m + pi_upper() ** 2 - 4) ** 2


def test_slice_sums_empty_slice():
    rng = np.random.default_rng(11)
    H = rng.integers(1, 65, (60, 3))
    p = pk.construct_peak_d(H, 64, 3, mode="lp")
    frames = [lat.SliceFrame(10**6, (0, 0, 0), [], ())]
    rows = pk.slice_sums(p, H, frames)
    assert rows[0]["sum"] == 0 and rows[0]["ok"]


def test_degree_report_constant():
    p = pk.trivial_product((1, 1, 1), 8, 3)
    rep = pk.degree_report(p)
    assert rep["degree"] == 0 and rep["pass"]


def test_multivariate_lp_peak():
    H = [(1, 1, 1), (2, 1, 1), (1, 3, 2), (4, 4, 4)]
    p = pk.lp_peak_multivariate(H, 4, 3)
    assert pk.verify_peak(p, H).certified
    # the unshifted expansion agrees with the shifted form
    ed = p.as_exponent_dict()
    for x in H:
        val = sum(c * math.prod(xi ** e for xi, e in zip(x, ex)) for ex, c in ed.items())
        assert val == p(x)


def test_direction_values_exact():
    a0 = (4, 2, 7)
    B = lat.reduce_basis(lat.kernel_basis(a0)).basis
    hs = lat.height_vectors(B)
    g = lat.rotate_direction(a0, B, hs, 0, base=(1, 2, 3))
    H = np.array([[1, 2, 3], [5, 5, 5], [9, 1, 4]])
    vals, quad = pk.direction_values(g, H)
    for x, v in zip(H, vals):
        assert v == g(tuple(int(t) for t in x))
    A, Bc, T, q = quad
    for a, b, v in zip(A, Bc, vals):
        assert SurdScalar.of(mpq(int(a), q), mpq(int(b), q), T) == v
