"""Binary hypermatrices, their k-decks and sum decks.

Two routes to a sum deck are provided: explicit enumeration of the deck
members, and closed-form weights (beta for independent deletions, gamma for
principal deletions) contracted against the entries.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .numerics import comb

FULL = "full"
PRINCIPAL = "principal"
MODES = (FULL, PRINCIPAL)
MAX_MEMBERS = 10**8


class DeckSizeError(ValueError):
    pass


@dataclass(frozen=True)
class Hypermatrix:
    d: int
    n: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.shape != (self.n,) * self.d:
            raise ValueError(f"expected shape {(self.n,) * self.d}, got {arr.shape}")
        object.__setattr__(self, "data", arr)
        arr.setflags(write=False)

    @classmethod
    def from_bits(cls, d: int, n: int, bits) -> "Hypermatrix":
        if isinstance(bits, str):
            bits = [int(c) for c in bits]
        arr = np.array(bits, dtype=np.int8)
        if arr.size != n**d:
            raise ValueError(f"need {n**d} entries, got {arr.size}")
        if np.any((arr != 0) & (arr != 1)):
            raise ValueError("entries must be 0 or 1")
        return cls(d, n, arr.reshape((n,) * d))

    @classmethod
    def from_int(cls, d: int, n: int, code: int) -> "Hypermatrix":
        """The hypermatrix whose row-major bit string is the binary form of ``code``."""
        m = n**d
        return cls.from_bits(d, n, format(code, f"0{m}b") if m else "")

    def bits(self) -> str:
        return "".join(str(int(v)) for v in self.data.ravel())

    def __eq__(self, other):
        return isinstance(other, Hypermatrix) and self.d == other.d and self.n == other.n \
            and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.d, self.n, self.bits()))

    def weight(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True)
class DifferenceMatrix:
    d: int
    n: int
    data: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, A: Hypermatrix, B: Hypermatrix) -> "DifferenceMatrix":
        if (A.d, A.n) != (B.d, B.n):
            raise ValueError("shape mismatch")
        return cls(A.d, A.n, A.data.astype(np.int64) - B.data.astype(np.int64))

    def support(self) -> list[tuple[int, ...]]:
        """Nonzero positions as 1-based index tuples."""
        return [tuple(int(v) + 1 for v in idx) for idx in zip(*np.nonzero(self.data))]


@dataclass
class Deck:
    k: int
    mode: str
    d: int
    entries: Counter

    def total(self) -> int:
        return sum(self.entries.values())

    def scaled(self, c: int) -> "Deck":
        return Deck(self.k, self.mode, self.d, Counter({key: v * c for key, v in self.entries.items()}))

    def __eq__(self, other):
        return isinstance(other, Deck) and (self.k, self.mode, self.d) == (other.k, other.mode, other.d) \
            and +self.entries == +other.entries


@dataclass
class SumDeck:
    k: int
    d: int
    mode: str
    entries: np.ndarray = field(repr=False)

    def __eq__(self, other):
        return isinstance(other, SumDeck) and self.k == other.k and self.d == other.d \
            and np.array_equal(self.entries, other.entries)

    def key(self) -> tuple:
        return tuple(int(v) for v in self.entries.ravel())

    def to_json(self) -> dict:
        return {"k": self.k, "d": self.d, "mode": self.mode,
                "shape": [self.k] * self.d,
                "entries": [str(int(v)) for v in self.entries.ravel()]}


def _check_k(n: int, k: int):
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, {n}]")


def _check_mode(mode: str):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")


def member_count(n: int, d: int, k: int, mode: str) -> int:
    c = math.comb(n, k)
    return c if mode == PRINCIPAL else c**d


def members(A, k: int, mode: str = FULL) -> Iterator[np.ndarray]:
    """Yield every deck member (with multiplicity) in lexicographic subset order."""
    _check_k(A.n, k)
    _check_mode(mode)
    combos = list(itertools.combinations(range(A.n), k))
    if mode == PRINCIPAL:
        for c in combos:
            yield A.data[np.ix_(*([c] * A.d))]
    else:
        for choice in itertools.product(combos, repeat=A.d):
            yield A.data[np.ix_(*choice)]


def deck(A: Hypermatrix, k: int, mode: str = FULL) -> Deck:
    _check_k(A.n, k)
    _check_mode(mode)
    if member_count(A.n, A.d, k, mode) > MAX_MEMBERS:
        raise DeckSizeError("deck exceeds the member guard; use a sum deck instead")
    entries: Counter = Counter()
    for sub in members(A, k, mode):
        entries["".join(str(int(v)) for v in sub.ravel())] += 1
    return Deck(k, mode, A.d, entries)


def _stacked(A, k: int, mode: str) -> np.ndarray:
    """All deck members as one array of shape (members..., k, ..., k)."""
    d = A.d
    combos = np.array(list(itertools.combinations(range(A.n), k)), dtype=np.intp)
    if mode == PRINCIPAL:
        idx = []
        for j in range(d):
            shape = [combos.shape[0]] + [1] * d
            shape[1 + j] = k
            idx.append(combos.reshape(shape))
        return A.data[tuple(idx)]
    C = combos.shape[0]
    idx = []
    for j in range(d):
        shape = [1] * (2 * d)
        shape[j] = C
        shape[d + j] = k
        idx.append(combos.reshape(shape))
    return A.data[tuple(idx)]


def sum_deck_direct(A, k: int, mode: str = FULL, streaming: bool = False) -> SumDeck:
    """Entrywise sum of all deck members, by enumeration."""
    _check_k(A.n, k)
    _check_mode(mode)
    count = member_count(A.n, A.d, k, mode)
    if count > MAX_MEMBERS and not streaming:
        raise DeckSizeError("deck exceeds the member guard; pass streaming=True")
    lead = 1 if mode == PRINCIPAL else A.d
    if count * k**A.d <= 5 * 10**6:
        stack = _stacked(A, k, mode).astype(np.int64)
        total = stack.sum(axis=tuple(range(lead)))
        return SumDeck(k, A.d, mode, total.astype(object))
    total = np.zeros((k,) * A.d, dtype=object)
    for sub in members(A, k, mode):
        total = total + sub.astype(object)
    return SumDeck(k, A.d, mode, total)


def beta_eval(u: int, x: int, n: int, k: int) -> int:
    """C(x-1, u-1) * C(n-x, k-u): how often entry x lands at position u."""
    return comb(x - 1, u - 1) * comb(n - x, k - u)


def beta_matrix(n: int, k: int) -> np.ndarray:
    return np.array([[beta_eval(u, x, n, k) for x in range(1, n + 1)] for u in range(1, k + 1)],
                    dtype=object)


def sum_deck_via_beta(D, k: int) -> SumDeck:
    """S_k by contracting every axis of D against the beta weights."""
    _check_k(D.n, k)
    B = beta_matrix(D.n, k)
    T = np.asarray(D.data).astype(object)
    for _ in range(D.d):
        # contract the leading axis; the new u-axis is appended at the end
        T = np.tensordot(T, B.T, axes=([0], [0]))
    return SumDeck(k, D.d, FULL, np.asarray(T, dtype=object).reshape((k,) * D.d))


@dataclass(frozen=True)
class TauPattern:
    r: int
    tau: tuple
    anchors: tuple  # 1-based smallest preimage of each value 1..r


def pattern_of(i) -> TauPattern:
    """Relative-order pattern of an index tuple."""
    vals = sorted(set(i))
    rank = {v: t + 1 for t, v in enumerate(vals)}
    tau = tuple(rank[v] for v in i)
    anchors = tuple(tau.index(t) + 1 for t in range(1, len(vals) + 1))
    return TauPattern(len(vals), tau, anchors)


def gamma_eval(u, x, tau: TauPattern, n: int, k: int) -> int:
    """Multiplicity with which entry x reaches position u under principal deletions."""
    if pattern_of(u).tau != tau.tau or pattern_of(x).tau != tau.tau:
        raise ValueError("u and x must both follow the pattern tau")
    xs = [x[a - 1] for a in tau.anchors]
    us = [u[a - 1] for a in tau.anchors]
    out = comb(xs[0] - 1, us[0] - 1)
    for t in range(1, tau.r):
        out *= comb(xs[t] - xs[t - 1] - 1, us[t] - us[t - 1] - 1)
        if not out:
            return 0
    return out * comb(n - xs[-1], k - us[-1])


def sum_deck_via_gamma(D, k: int) -> SumDeck:
    """S_k^p from the gamma weights, grouping indices by pattern."""
    _check_k(D.n, k)
    n, d = D.n, D.d
    data = np.asarray(D.data)
    groups: dict = {}
    for idx in zip(*np.nonzero(data)):
        i = tuple(int(v) + 1 for v in idx)
        groups.setdefault(pattern_of(i).tau, []).append((i, int(data[idx])))
    out = np.zeros((k,) * d, dtype=object)
    for u in itertools.product(range(1, k + 1), repeat=d):
        pat = pattern_of(u)
        total = 0
        for i, val in groups.get(pat.tau, ()):
            total += gamma_eval(u, i, pat, n, k) * val
        out[tuple(v - 1 for v in u)] = total
    return SumDeck(k, d, PRINCIPAL, out)


def sum_deck(A, k: int, mode: str = FULL) -> SumDeck:
    """Fast sum deck: formula route for either mode."""
    _check_mode(mode)
    if mode == PRINCIPAL:
        return sum_deck_via_gamma(A, k)
    return sum_deck_via_beta(A, k)


def read_hypermatrix(text: str) -> Hypermatrix:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty hypermatrix file")
    d, n = (int(v) for v in lines[0].split())
    bits = "".join(lines[1:])
    return Hypermatrix.from_bits(d, n, bits)


def write_hypermatrix(A: Hypermatrix) -> str:
    return f"{A.d} {A.n}\n{A.bits()}\n"
