import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperdeck import hypermatrix as hm
from hyperdeck.hypermatrix import FULL, PRINCIPAL, Hypermatrix

import oracles


def arr_of(A):
    return {tuple(i): int(v) for i, v in np.ndenumerate(A.data)}


@st.composite
def hypermatrices(draw, max_cells=16):
    d = draw(st.integers(1, 3))
    n = draw(st.integers(1, {1: 8, 2: 4, 3: 2}[d]))
    bits = draw(st.lists(st.integers(0, 1), min_size=n**d, max_size=n**d))
    return Hypermatrix.from_bits(d, n, bits)


def test_identity_one_deck():
    I = Hypermatrix.from_bits(2, 2, "1001")
    D = hm.deck(I, 1, FULL)
    assert D.entries == Counter({"0": 2, "1": 2})


def test_full_deck_at_k_equal_n():
    A = Hypermatrix.from_bits(2, 3, "101100011")
    assert hm.deck(A, 3, FULL).entries == Counter({A.bits(): 1})


def test_zero_principal_deck():
    Z = Hypermatrix.from_bits(2, 3, "0" * 9)
    assert hm.deck(Z, 2, PRINCIPAL).entries == Counter({"0000": 3})


def test_identity_sum_deck():
    I = Hypermatrix.from_bits(2, 2, "1001")
    assert list(hm.sum_deck_direct(I, 1, FULL).entries.ravel()) == [2]


def test_sum_deck_k_equal_n_is_identity():
    A = Hypermatrix.from_bits(2, 3, "011010110")
    assert np.array_equal(hm.sum_deck(A, 3).entries, A.data)


def test_sum_deck_of_100():
    # the 2-deck of 100 is {10, 10, 00}: column sums (2, 0)
    A = Hypermatrix.from_bits(1, 3, "100")
    assert list(hm.sum_deck_via_beta(A, 2).entries) == [2, 0]
    assert list(hm.sum_deck_direct(A, 2).entries) == [2, 0]


def test_beta_values():
    assert hm.beta_eval(1, 1, 4, 2) == 3
    for n, k in ((5, 3), (7, 7)):
        assert hm.beta_eval(k, n, n, k) == hm.comb(n - 1, k - 1)
    assert hm.beta_eval(2, 1, 6, 3) == 0


def test_pattern_examples():
    p = hm.pattern_of((1, 2, 1))
    assert p.tau == (1, 2, 1) and p.r == 2
    members = [i for i in itertools.product(range(1, 5), repeat=3) if hm.pattern_of(i).tau == p.tau]
    assert members == [(1, 2, 1), (1, 3, 1), (1, 4, 1), (2, 3, 2), (2, 4, 2), (3, 4, 3)]
    assert hm.pattern_of((5, 5, 5)).tau == (1, 1, 1) and hm.pattern_of((5, 5, 5)).r == 1
    q = hm.pattern_of((2, 7, 4))
    assert q.tau == (1, 3, 2) and q.r == 3


def test_gamma_values():
    assert hm.gamma_eval((1, 2), (1, 3), hm.pattern_of((1, 2)), 3, 2) == 1
    assert hm.gamma_eval((2, 2), (1, 1), hm.pattern_of((1, 1)), 3, 2) == 0
    for n, k in ((5, 3), (6, 2)):
        for u in range(1, k + 1):
            for x in range(1, n + 1):
                assert hm.gamma_eval((u,), (x,), hm.pattern_of((1,)), n, k) == hm.beta_eval(u, x, n, k)


def test_gamma_counts_symmetric_deletions():
    # brute force: over k-subsets S, the entry x lands at u when rank_S(x_j) = u_j
    n, k = 4, 2
    for u in itertools.product(range(1, k + 1), repeat=2):
        for x in itertools.product(range(1, n + 1), repeat=2):
            if hm.pattern_of(u).tau != hm.pattern_of(x).tau:
                continue
            count = sum(1 for S in itertools.combinations(range(1, n + 1), k)
                        if all(xj in S and S.index(xj) + 1 == uj for uj, xj in zip(u, x)))
            assert hm.gamma_eval(u, x, hm.pattern_of(u), n, k) == count


def test_routes_agree_exhaustively_3x3():
    for code in range(1 << 9):
        A = Hypermatrix.from_int(2, 3, code)
        for k in (1, 2, 3):
            assert hm.sum_deck_via_beta(A, k) == hm.sum_deck_direct(A, k, FULL)
            assert hm.sum_deck_via_gamma(A, k) == hm.sum_deck_direct(A, k, PRINCIPAL)


def test_principal_route_2x2x2():
    for code in range(1 << 8):
        A = Hypermatrix.from_int(3, 2, code)
        for k in (1, 2):
            assert hm.sum_deck_via_gamma(A, k) == hm.sum_deck_direct(A, k, PRINCIPAL)


def test_zero_input_gives_zero():
    Z = Hypermatrix.from_bits(3, 2, "0" * 8)
    for k in (1, 2):
        assert not np.any(hm.sum_deck_via_beta(Z, k).entries)
        assert not np.any(hm.sum_deck_via_gamma(Z, k).entries)


@given(hypermatrices(), st.data())
def test_deck_matches_plain_oracle(A, data):
    k = data.draw(st.integers(1, A.n))
    for principal, mode in ((False, FULL), (True, PRINCIPAL)):
        ours = hm.deck(A, k, mode).entries
        ref = oracles.deck_multiset(arr_of(A), A.n, A.d, k, principal)
        assert ours == Counter({"".join(map(str, key)): v for key, v in ref.items()})
        assert hm.sum_deck(A, k, mode).key() == oracles.sum_of_deck(arr_of(A), A.n, A.d, k, principal)


@given(hypermatrices())
def test_d1_principal_equals_full(A):
    if A.d != 1:
        return
    for k in range(1, A.n + 1):
        assert hm.sum_deck_via_gamma(A, k).key() == hm.sum_deck_via_beta(A, k).key()


@given(hypermatrices())
def test_deck_size(A):
    for k in range(1, A.n + 1):
        assert hm.deck(A, k, FULL).total() == hm.comb(A.n, k) ** A.d
        assert hm.deck(A, k, PRINCIPAL).total() == hm.comb(A.n, k)


@settings(max_examples=30)
@given(hypermatrices())
def test_sum_deck_linear_in_difference(A):
    # S_k is linear: S_k(A) - S_k(B) is the beta contraction of A - B
    B = Hypermatrix(A.d, A.n, 1 - A.data)
    D = hm.DifferenceMatrix.of(A, B)
    for k in range(1, A.n + 1):
        diff = hm.sum_deck_via_beta(A, k).entries - hm.sum_deck_via_beta(B, k).entries
        assert np.array_equal(diff, hm.sum_deck_via_beta(D, k).entries)


def test_file_roundtrip():
    A = Hypermatrix.from_bits(2, 3, "110001101")
    assert hm.read_hypermatrix(hm.write_hypermatrix(A)) == A


@pytest.mark.parametrize("text", ["", "2 2\n101", "1 2\n12", "x y\n00"])
def test_malformed_file(text):
    with pytest.raises(ValueError):
        hm.read_hypermatrix(text)


def test_bad_k():
    A = Hypermatrix.from_bits(1, 3, "101")
    with pytest.raises(ValueError):
        hm.deck(A, 0)
    with pytest.raises(ValueError):
        hm.sum_deck(A, 4)
