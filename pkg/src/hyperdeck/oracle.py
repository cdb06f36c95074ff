"""Brute-force ground truth: kappa tables, collision search, counting threshold."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional

import mpmath
import numpy as np

from .hypermatrix import (FULL, PRINCIPAL, DifferenceMatrix, Hypermatrix, deck, members,
                          sum_deck_via_beta, sum_deck_via_gamma, beta_eval)
from .numerics import Q

MODES = ("deck", "principal-deck", "sum", "principal-sum")
EXHAUSTIVE_LIMIT = 20  # n^d


@dataclass
class KappaResult:
    n: int
    d: int
    mode: str
    kappa: int
    witness: Optional[tuple] = None  # (A bits, B bits) colliding at kappa - 1
    checked: list = field(default_factory=list)  # injectivity per k

    def to_json(self) -> dict:
        out = {"mode": self.mode, "n": self.n, "d": self.d, "kappa": self.kappa,
               "injective_by_k": self.checked}
        if self.witness:
            out["witness"] = list(self.witness)
        return out


def image_key(A: Hypermatrix, k: int, mode: str):
    if mode == "deck":
        return tuple(sorted(deck(A, k, FULL).entries.items()))
    if mode == "principal-deck":
        return tuple(sorted(deck(A, k, PRINCIPAL).entries.items()))
    if mode == "sum":
        return sum_deck_via_beta(A, k).key()
    if mode == "principal-sum":
        return sum_deck_via_gamma(A, k).key()
    raise ValueError(f"unknown mode {mode!r}")


def _all_matrices(n: int, d: int):
    m = n**d
    for code in range(1 << m):
        yield Hypermatrix.from_int(d, n, code)


def _first_collision(mats, k, mode):
    seen = {}
    for A in mats:
        key = image_key(A, k, mode)
        prev = seen.get(key)
        if prev is not None and prev != A:
            return prev, A
        seen.setdefault(key, A)
    return None


def find_collision(n: int, d: int, k: int, mode: str, budget: int = 10**5, seed: int = 0):
    """Two distinct hypermatrices with equal image at k, or None.

    Exhaustive when n^d <= 20, otherwise ``budget`` seeded random samples are
    hashed and compared.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if n**d <= EXHAUSTIVE_LIMIT:
        return _first_collision(_all_matrices(n, d), k, mode)
    rng = np.random.default_rng(seed)

    def sample():
        for _ in range(budget):
            yield Hypermatrix(d, n, rng.integers(0, 2, (n,) * d).astype(np.int8))
    return _first_collision(sample(), k, mode)


def is_injective(n: int, d: int, k: int, mode: str) -> bool:
    return find_collision(n, d, k, mode) is None


def kappa_exact(n: int, d: int, mode: str) -> KappaResult:
    if n**d > EXHAUSTIVE_LIMIT:
        raise ValueError("instance too large for exhaustive kappa")
    checked = [find_collision(n, d, k, mode) for k in range(1, n + 1)]
    flags = [c is None for c in checked]
    kappa = flags.index(True) + 1  # k = n is always injective
    if not all(flags[kappa - 1:]):
        raise AssertionError(f"injectivity not monotone for n={n}, d={d}, mode={mode}")
    witness = None
    if kappa > 1:
        A, B = checked[kappa - 2]
        assert A != B and image_key(A, kappa - 1, mode) == image_key(B, kappa - 1, mode)
        witness = (A.bits(), B.bits())
    return KappaResult(n, d, mode, kappa, witness, flags)


# ---------------------------------------------------------------------------
# counting bound

def counting_threshold(n: int, d: int, mode: str = "sum") -> int:
    """floor(n^(d/(d+1)) / (d log2(n+1))^(1/(d+1)))."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    if mode not in ("sum", "principal-sum"):
        raise ValueError(f"unknown mode {mode!r}")
    L_exact = None
    if (n + 1) & n == 0:
        L_exact = (n + 1).bit_length() - 1

    def fits(k):
        # k <= bound  <=>  k^(d+1) * d * log2(n+1) <= n^d
        if L_exact is not None:
            return k ** (d + 1) * d * L_exact <= n**d
        # log2(n+1) is irrational here, so equality never happens
        with mpmath.workdps(60 + len(str(n)) * (d + 1)):
            return mpmath.mpf(k) ** (d + 1) * d * mpmath.log(n + 1, 2) < mpmath.mpf(n) ** d

    with mpmath.workdps(40):
        guess = int(mpmath.floor(mpmath.mpf(n) ** (mpmath.mpf(d) / (d + 1))
                                 / (d * mpmath.log(n + 1, 2)) ** (mpmath.mpf(1) / (d + 1))))
    while guess > 0 and not fits(guess):
        guess -= 1
    while fits(guess + 1):
        guess += 1
    return guess


def counting_inequality(n: int, d: int, k: int, mode: str = "sum") -> bool:
    """(C(n,k)^d + 1)^(k^d) < 2^(n^d), or with C(n,k) + 1 in principal mode."""
    c = math.comb(n, k)
    X = (c**d if mode == "sum" else c) + 1
    e = k**d
    bits = n**d
    bl = X.bit_length()
    # bl - 1 <= log2 X < bl, equality on the left only for powers of two
    if e * bl <= bits:
        return True
    if e * (bl - 1) >= bits:
        return False
    if bits <= 2 * 10**6:
        return X**e < (1 << bits)
    with mpmath.workdps(80):
        lhs = e * mpmath.log(X, 2)
        if abs(lhs - bits) > mpmath.mpf(10) ** -60:
            return lhs < bits
    raise ArithmeticError("counting inequality too close to decide")


# ---------------------------------------------------------------------------
# deck refinement and moments

def refinement_check(A: Hypermatrix, k: int, l: int, mode: str = FULL) -> bool:
    """Merged k-decks of the l-deck equal C(n-k, l-k)^d (or ^1 principal) times the k-deck."""
    if not 1 <= k <= l <= A.n:
        raise ValueError("need 1 <= k <= l <= n")
    merged: Counter = Counter()
    for sub in members(A, l, mode):
        merged.update(deck(Hypermatrix(A.d, l, np.array(sub)), k, mode).entries)
    factor = math.comb(A.n - k, l - k)
    if mode == FULL:
        factor **= A.d
    target = deck(A, k, mode).scaled(factor)
    return +merged == +target.entries


def moment_sum(D: DifferenceMatrix, p) -> object:
    """Exact sum over [n]^d of p(i) * D_i (indices 1-based).

    ``p`` is a callable on index tuples or a dict mapping exponent tuples to
    rational coefficients.
    """
    if isinstance(p, dict):
        poly = {tuple(e): Q(c) for e, c in p.items()}

        def p(i):
            total = Q(0)
            for e, c in poly.items():
                term = c
                for x, a in zip(i, e):
                    term *= x**a
                total += term
            return total
    total = Q(0)
    data = np.asarray(D.data)
    for idx in zip(*np.nonzero(data)):
        i = tuple(int(v) + 1 for v in idx)
        total += p(i) * int(data[idx])
    return total


def beta_product(u, n: int, k: int) -> Callable:
    """i -> prod_j beta_{u_j}(i_j), a polynomial of local degree k - 1."""
    def p(i):
        out = 1
        for uj, ij in zip(u, i):
            out *= beta_eval(uj, ij, n, k)
        return Q(out)
    return p
