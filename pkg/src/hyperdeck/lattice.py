"""Integer geometry for the d >= 3 construction.

Primitive direction sets, kernel lattices with reduced bases and height
vectors, the rotated (irrational) direction functions, slice frames and the
tangent translation of the circumscribed polytope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpq

from .numerics import Q, SurdScalar, pi_upper, pi_lower, surd_sign

ENUM_BUDGET = 5 * 10**7
NODE_BUDGET = 2 * 10**6


class BudgetError(RuntimeError):
    pass


class ConstructionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# primes and parameters

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def largest_prime_leq(x) -> int:
    if isinstance(x, float):
        m = math.floor(x)
    else:
        m = int(gmpy2.floor(Q(x)))
    if m < 2:
        raise ValueError(f"no prime <= {x}")
    while not is_prime(m):
        m -= 1
    return m


@dataclass(frozen=True)
class DirectionParams:
    d: int
    lam: int
    r2: int  # floor(R^2); integer vectors have |a| <= R iff |a|^2 <= r2
    R: float
    n: Optional[int] = None

    def to_json(self):
        return {"n": self.n, "d": self.d, "lambda": self.lam, "R": self.R, "R2_floor": self.r2}


def direction_params(n: int, d: int) -> DirectionParams:
    """R = sqrt(d) n^((d-1)/(d+1)); lambda = largest prime <= n^(1/(d+1))."""
    root = int(gmpy2.iroot(n, d + 1)[0])
    lam = largest_prime_leq(root)
    r2 = int(gmpy2.iroot(d ** (d + 1) * n ** (2 * (d - 1)), d + 1)[0])
    R = math.sqrt(d) * n ** ((d - 1) / (d + 1))
    return DirectionParams(d, lam, r2, R, n)


def _r2_of(R) -> int:
    if isinstance(R, float):
        return math.floor(R * R + 1e-9)
    return int(gmpy2.floor(Q(R) ** 2))


# ---------------------------------------------------------------------------
# primitive points

def primitive_points(R=None, d: int = 2, r2: Optional[int] = None) -> np.ndarray:
    """All primitive integer vectors with norm <= R, as an (m, d) int64 array."""
    if r2 is None:
        r2 = _r2_of(R)
    if r2 < 1:
        raise ValueError("need R >= 1")
    r = math.isqrt(r2)
    if (2 * r + 1) ** d > ENUM_BUDGET:
        raise BudgetError("radius too large for enumeration")
    rng = np.arange(-r, r + 1, dtype=np.int64)
    out = []
    for first in rng:
        rest = np.stack(np.meshgrid(*([rng] * (d - 1)), indexing="ij"), -1).reshape(-1, d - 1) \
            if d > 1 else np.zeros((1, 0), dtype=np.int64)
        pts = np.concatenate([np.full((len(rest), 1), first), rest], axis=1)
        pts = pts[(pts * pts).sum(1) <= r2]
        g = np.gcd.reduce(np.abs(pts), axis=1)
        out.append(pts[g == 1])
    return np.concatenate(out, axis=0)


def in_n_lambda_prime(a, lam: int, r2: int) -> bool:
    """The verbatim divisibility/norm conditions (no permutation)."""
    d = len(a)
    a = [int(v) for v in a]
    if sum(v * v for v in a) > r2 or math.gcd(*a) != 1:
        return False
    for i in range(3, d + 1):
        if math.gcd(lam**d, a[i - 1]) != lam ** (d - i):
            return False
    if math.gcd(a[0], a[1]) != lam ** (d - 2):
        return False
    return a[0] ** 2 + a[1] ** 2 >= lam ** (2 * (d - 1))


def in_n_lambda(a, lam: int, r2: int) -> bool:
    return any(in_n_lambda_prime(p, lam, r2) for p in set(itertools.permutations(a)))


def n_lambda_prime_set(params: DirectionParams) -> list:
    d, lam, r2 = params.d, params.lam, params.r2
    if d < 3:
        raise ValueError("N_lambda needs d >= 3")
    L = lam ** (d - 2)
    out = []

    def tail(i, budget, acc):
        # coordinates 3..d: lam^(d-i) * c with lam not dividing c
        if i > d:
            out.append(tuple(acc))
            return
        step = lam ** (d - i)
        cmax = math.isqrt(budget) // step
        for c in range(-cmax, cmax + 1):
            if c % lam == 0:
                continue
            v = c * step
            tail(i + 1, budget - v * v, acc + [v])

    cmax = math.isqrt(r2) // L
    for c1 in range(-cmax, cmax + 1):
        for c2 in range(-cmax, cmax + 1):
            if math.gcd(c1, c2) != 1:
                continue
            a1, a2 = c1 * L, c2 * L
            s = a1 * a1 + a2 * a2
            if s > r2 or s < lam ** (2 * (d - 1)):
                continue
            tail(3, r2 - s, [a1, a2])
    return sorted(a for a in out if math.gcd(*a) == 1)


def n_lambda_set(params: DirectionParams) -> list:
    """All coordinate permutations of the N'_lambda(R) members, sorted."""
    base = n_lambda_prime_set(params)
    if not base:
        raise ConstructionError("N_lambda(R) is empty: n too small for the divisibility pattern")
    out = set()
    for a in base:
        out.update(itertools.permutations(a))
    return sorted(out)


# ---------------------------------------------------------------------------
# exact linear algebra helpers

def det_exact(M) -> mpq:
    A = [[Q(v) for v in row] for row in M]
    n = len(A)
    det = mpq(1)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return mpq(0)
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                for j in range(c, n):
                    A[r][j] -= f * A[c][j]
    return det


def inverse_exact(M):
    n = len(M)
    A = [[Q(v) for v in row] + [mpq(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [row[n:] for row in A]


def dot(u, v):
    return sum(a * b for a, b in zip(u, v))


# ---------------------------------------------------------------------------
# kernel lattices

@dataclass(frozen=True)
class LatticeBasis:
    vectors: tuple  # tuple of integer tuples
    a: Optional[tuple] = None
    w: Optional[tuple] = None  # integer vector with a.w = 1

    @property
    def gram(self):
        return [[dot(u, v) for v in self.vectors] for u in self.vectors]

    @property
    def det_sq(self) -> mpq:
        return det_exact(self.gram)

    def norms_sq(self):
        return [dot(v, v) for v in self.vectors]

    def to_json(self):
        return {"vectors": [list(v) for v in self.vectors],
                "gram": [[int(x) for x in row] for row in self.gram],
                "det_sq": str(self.det_sq)}


def _egcd(x, y):
    g, s, t = gmpy2.gcdext(x, y)
    return int(g), int(s), int(t)


def kernel_basis(a) -> LatticeBasis:
    """Saturated integer basis of {x : a.x = 0} by unimodular column operations."""
    a = [int(v) for v in a]
    d = len(a)
    if math.gcd(*a) != 1:
        raise ValueError("a must be primitive")
    U = [[int(i == j) for j in range(d)] for i in range(d)]  # columns are U[.][j]
    v = a[:]
    for j in range(1, d):
        x, y = v[0], v[j]
        if y == 0:
            continue
        g, s, t = _egcd(x, y)
        cx, cy = -y // g, x // g
        for row in U:
            c0, cj = row[0], row[j]
            row[0], row[j] = s * c0 + t * cj, cx * c0 + cy * cj
        v[0], v[j] = g, 0
    if v[0] < 0:
        for row in U:
            row[0] = -row[0]
    cols = [tuple(U[i][j] for i in range(d)) for j in range(d)]
    w = cols[0]
    assert dot(a, w) == 1
    return LatticeBasis(tuple(cols[1:]), tuple(a), w)


def lattice_contains(B: LatticeBasis, x) -> bool:
    """Whether x is an integer combination of the basis vectors."""
    Y = [list(v) for v in B.vectors]
    G = B.gram
    rhs = [dot(v, x) for v in Y]
    c = [dot(row, rhs) for row in inverse_exact(G)]
    if any(ci.denominator != 1 for ci in c):
        return False
    back = [sum(int(ci) * v[t] for ci, v in zip(c, Y)) for t in range(len(x))]
    return back == [int(v) for v in x]


def theta(d: int) -> float:
    return 8 * math.sqrt(2) / (81 * math.pi) * d ** (1.5 * d) / (math.sqrt(d) * (d - 1) ** 1.5)


def theta_sq_bounds(d: int):
    """Rational enclosure of theta_d^2 = 128 d^(3d) / (6561 pi^2 d (d-1)^3)."""
    base = mpq(128 * d ** (3 * d), 6561 * d * (d - 1) ** 3)
    return base / pi_upper() ** 2, base / pi_lower() ** 2


def mahler_ok(B: LatticeBasis, d: Optional[int] = None) -> bool:
    """prod |y_i| <= theta_d sqrt(det Gram), decided with a lower bound on theta."""
    d = d if d is not None else len(B.vectors[0])
    prod = 1
    for s in B.norms_sq():
        prod *= s
    lo, _ = theta_sq_bounds(d)
    return prod <= lo * B.det_sq


def lll(vectors, delta=mpq(99, 100)):
    """Exact-rational LLL on a short list of integer vectors."""
    b = [list(map(int, v)) for v in vectors]
    m = len(b)

    def gso(b):
        bs, mu = [], [[mpq(0)] * m for _ in range(m)]
        for i in range(m):
            v = [Q(x) for x in b[i]]
            for j in range(i):
                mu[i][j] = dot(b[i], bs[j]) / dot(bs[j], bs[j])
                v = [x - mu[i][j] * y for x, y in zip(v, bs[j])]
            bs.append(v)
        return bs, mu

    k = 1
    bs, mu = gso(b)
    while k < m:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
                bs, mu = gso(b)
        if dot(bs[k], bs[k]) >= (delta - mu[k][k - 1] ** 2) * dot(bs[k - 1], bs[k - 1]):
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            bs, mu = gso(b)
            k = max(k - 1, 1)
    return [tuple(int(x) for x in v) for v in b]


def enumerate_short(B: LatticeBasis, bound_sq, strict: bool = True, budget: int = NODE_BUDGET):
    """Coefficient vectors c != 0 with |sum c_i y_i|^2 < bound_sq (<= if not strict).

    Fincke-Pohst over an exact LDL^T factorisation of the Gram matrix; ranges
    are widened slightly and every leaf is re-checked with integers.
    """
    G = B.gram
    m = len(G)
    # exact LDL^T
    L = [[mpq(0)] * m for _ in range(m)]
    D = [mpq(0)] * m
    for i in range(m):
        for j in range(i + 1):
            s = Q(G[i][j]) - sum(L[i][t] * L[j][t] * D[t] for t in range(j))
            if i == j:
                D[i] = s
                L[i][i] = mpq(1)
            else:
                L[i][j] = s / D[j]
    Df = [float(x) for x in D]
    Lf = [[float(x) for x in row] for row in L]
    bound = float(Q(bound_sq))
    found = []
    nodes = 0
    c = [0] * m

    # q(c) = sum_i D_i (c_i + sum_{j>i} L_ji c_j)^2
    def rec(i, rem):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetError("short vector enumeration budget exceeded")
        if i < 0:
            if any(c):
                v = [sum(c[t] * B.vectors[t][s] for t in range(m)) for s in range(len(B.vectors[0]))]
                n2 = dot(v, v)
                if (n2 < bound_sq) if strict else (n2 <= bound_sq):
                    found.append((tuple(c), tuple(v)))
            return
        center = -sum(Lf[j][i] * c[j] for j in range(i + 1, m))
        rad = math.sqrt(max(rem, 0.0) / Df[i]) + 1e-7 * (1 + abs(center))
        for ci in range(math.ceil(center - rad), math.floor(center + rad) + 1):
            c[i] = ci
            used = Df[i] * (ci - center) ** 2
            rec(i - 1, rem - used + 1e-9 * bound)
        c[i] = 0

    rec(m - 1, bound * (1 + 1e-12) + 1e-9)
    return found


def shortest_vector_at_least(B: LatticeBasis, bound: int) -> bool:
    """True iff no nonzero lattice vector has norm < bound."""
    return not enumerate_short(B, bound * bound, strict=True)


def _extends_basis(coords) -> bool:
    """Coefficient vectors span a primitive sublattice (gcd of maximal minors is 1)."""
    k = len(coords)
    m = len(coords[0])
    g = 0
    for cols in itertools.combinations(range(m), k):
        g = math.gcd(g, int(det_exact([[row[c] for c in cols] for row in coords])))
        if g == 1:
            return True
    return g == 1


@dataclass
class ReducedBasis:
    basis: LatticeBasis
    bound_ok: bool
    refined: bool
    ratio: float  # prod |y_i| / sqrt(det)


def reduce_basis(B: LatticeBasis) -> ReducedBasis:
    """LLL, then (if the theta_d product bound fails and d <= 5) greedy short-vector refinement."""
    d = len(B.vectors[0])
    R = LatticeBasis(tuple(lll(B.vectors)), B.a, B.w)
    refined = False
    if not mahler_ok(R, d) and d <= 5:
        longest = max(R.norms_sq())
        cands = enumerate_short(R, longest, strict=False)
        cands.sort(key=lambda cv: (dot(cv[1], cv[1]), cv[1]))
        chosen = []
        for coef, vec in cands:
            trial = chosen + [coef]
            if _extends_basis(trial):
                chosen = trial
                if len(chosen) == len(R.vectors):
                    break
        if len(chosen) == len(R.vectors):
            vecs = tuple(tuple(sum(c[t] * R.vectors[t][s] for t in range(len(c))) for s in range(d))
                         for c in chosen)
            R = LatticeBasis(vecs, B.a, B.w)
            refined = True
    prod = 1.0
    for s in R.norms_sq():
        prod *= s
    ratio = math.sqrt(prod / float(R.det_sq))
    return ReducedBasis(R, mahler_ok(R, d), refined, ratio)


# ---------------------------------------------------------------------------
# height vectors and rotated directions

@dataclass(frozen=True)
class Height:
    h: tuple          # exact rational vector
    norm_sq: mpq
    nu: mpq           # |h|^-2 = sin^2 theta
    cos_sq: mpq       # 1 - |h|^-2


def height_vectors(B: LatticeBasis) -> list:
    """h_i = component of y_i orthogonal to the other basis vectors."""
    Y = B.vectors
    Ginv = inverse_exact(B.gram)
    out = []
    for i in range(len(Y)):
        g = Ginv[i][i]
        h = tuple(sum(Ginv[i][j] * Y[j][s] for j in range(len(Y))) / g for s in range(len(Y[0])))
        norm_sq = 1 / g
        out.append(Height(h, norm_sq, g, 1 - g))
    return out


@dataclass(frozen=True)
class DirectionFunction:
    """g(x) = a . (x - base); integral for index 0, rotated otherwise.

    Rotated: a_i = sqrt(rad) * a0 + nu * h_i with rad = (1 - nu)/|a0|^2, so
    g_i(x) = sqrt(rad) * g0(x) + nu * h_i.(x - base).
    """
    kind: str
    base: tuple
    a0: tuple
    index: int = 0
    hvec: tuple = ()
    nu: mpq = mpq(0)
    rad: mpq = mpq(0)
    y: tuple = ()

    def g0(self, x) -> int:
        return sum(int(a) * (int(xi) - int(b)) for a, xi, b in zip(self.a0, x, self.base))

    def __call__(self, x):
        if self.kind == "integral":
            return self.g0(x)
        hd = sum(hv * (Q(xi) - b) for hv, xi, b in zip(self.hvec, x, self.base))
        return SurdScalar.of(self.nu * hd, self.g0(x), self.rad)

    def value_float(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        g0 = (X - np.asarray(self.base, dtype=np.float64)) @ np.asarray(self.a0, dtype=np.float64)
        if self.kind == "integral":
            return g0
        hd = (X - np.asarray(self.base, dtype=np.float64)) @ np.array([float(v) for v in self.hvec])
        return math.sqrt(float(self.rad)) * g0 + float(self.nu) * hd

    def vector(self) -> tuple:
        """Components of the direction vector as exact scalars."""
        if self.kind == "integral":
            return tuple(SurdScalar.of(a) for a in self.a0)
        return tuple(SurdScalar.of(self.nu * hv, a, self.rad) for a, hv in zip(self.a0, self.hvec))

    def to_json(self):
        out = {"kind": self.kind, "base": list(map(int, self.base)), "a0": list(map(int, self.a0))}
        if self.kind == "rotated":
            out.update({"index": self.index, "nu": str(self.nu), "radicand": str(self.rad),
                        "height": [str(v) for v in self.hvec], "y": list(map(int, self.y))})
        return out


def direction_from_json(obj) -> DirectionFunction:
    if obj["kind"] == "integral":
        return integral_direction(obj["a0"], obj["base"])
    return DirectionFunction("rotated", tuple(map(int, obj["base"])), tuple(map(int, obj["a0"])),
                             int(obj["index"]), tuple(mpq(v) for v in obj["height"]), mpq(obj["nu"]),
                             mpq(obj["radicand"]), tuple(map(int, obj["y"])))


def integral_direction(a0, base) -> DirectionFunction:
    return DirectionFunction("integral", tuple(map(int, base)), tuple(map(int, a0)))


def rotate_direction(a0, B: LatticeBasis, heights: list, i: int, t=None, base=None) -> DirectionFunction:
    """Rotate a0 toward h_i by arcsin(1/|h_i|); y_i is flipped first so that h_i.(t - base) >= 0."""
    H = heights[i]
    if H.norm_sq <= 1:
        raise ConstructionError(f"height |h_{i + 1}|^2 = {H.norm_sq} <= 1: rotation degenerate")
    base = tuple(map(int, base)) if base is not None else (0,) * len(a0)
    hvec, y = H.h, B.vectors[i]
    if t is not None:
        s = surd_sign(sum((hv * (ti - b) for hv, ti, b in zip(hvec, t, base)), SurdScalar.of(0)))
        if s < 0:
            hvec = tuple(-v for v in hvec)
            y = tuple(-v for v in y)
    a0n = sum(int(v) ** 2 for v in a0)
    rad = H.cos_sq / a0n
    return DirectionFunction("rotated", base, tuple(map(int, a0)), i + 1, hvec, H.nu, rad, tuple(y))


def surd_det(rows) -> SurdScalar:
    """Leibniz determinant over exact scalars (d <= 5)."""
    d = len(rows)
    total = SurdScalar.of(0)
    for perm in itertools.permutations(range(d)):
        sgn = 1
        for i in range(d):
            for j in range(i + 1, d):
                if perm[i] > perm[j]:
                    sgn = -sgn
        term = SurdScalar.of(sgn)
        for i, p in enumerate(perm):
            term = term * rows[i][p]
        total = total + term
    return total


# ---------------------------------------------------------------------------
# slices

@dataclass
class SliceFrame:
    k: int
    origin: tuple
    eps: list  # exact SurdScalar per rotated direction
    basis: tuple  # oriented y_1..y_{d-1}

    def point(self, coords) -> tuple:
        return tuple(o + sum(c * y[s] for c, y in zip(coords, self.basis))
                     for s, o in enumerate(self.origin))


def slice_frame(k: int, g0: DirectionFunction, w, rotated: Sequence[DirectionFunction]) -> SliceFrame:
    """Origin o_k of the level set g0 = k with g_i(o_k) in (-1/2, 1/2]."""
    x = [b + k * wi for b, wi in zip(g0.base, w)]
    assert g0(x) == k
    ys = [g.y for g in rotated]
    shift = []
    for g in rotated:
        shift.append((g(x) - mpq(1, 2)).ceil())
    o = tuple(xi - sum(m * y[s] for m, y in zip(shift, ys)) for s, xi in enumerate(x))
    eps = [g(o) for g in rotated]
    for e in eps:
        if not (e > mpq(-1, 2) and e <= mpq(1, 2)):
            raise AssertionError("slice offset outside (-1/2, 1/2]")
    return SliceFrame(k, o, eps, tuple(ys))


def slice_coords(frame: SliceFrame, rotated: Sequence[DirectionFunction], x) -> list:
    """Integer coordinates of x in L_k relative to (o_k; y_1, ..., y_{d-1})."""
    diff = [Q(a) - Q(b) for a, b in zip(x, frame.origin)]
    out = []
    for g in rotated:
        c = dot(g.hvec, diff) * g.nu
        if c.denominator != 1:
            raise ValueError("point not on the slice lattice")
        out.append(int(c))
    return out


# ---------------------------------------------------------------------------
# tangent translation

@dataclass
class Tangent:
    a0: tuple
    h: tuple
    center: tuple      # sphere centre after translation, exact scalars
    step: SurdScalar
    a_prime: tuple
    r_sq: mpq
    t0: tuple

    def tangent_point(self) -> tuple:
        """Touching point of the facet hyperplane alpha_0 with the sphere (float)."""
        na = math.sqrt(sum(v * v for v in self.a0))
        r = math.sqrt(float(self.r_sq))
        return tuple(float(c) - r * a / na for c, a in zip(self.center, self.a0))


def _hull_points(H: np.ndarray) -> np.ndarray:
    if len(H) <= H.shape[1] + 1:
        return H
    try:
        from scipy.spatial import ConvexHull
        hull = ConvexHull(H.astype(np.float64))
        return H[np.unique(hull.vertices)]
    except Exception:  # degenerate (flat) sets fall back to all points
        return H


def support_tangent(H, directions, r_sq=None, n: Optional[int] = None, a_prime=None) -> Tangent:
    """Translate the circumscribed polytope until one facet touches H.

    Start: sphere centre at the middle of [1, n]^d (n defaults to max coordinate
    of H), radius r = sqrt(r_sq) (default sqrt(d) n / 2).  Shoot along -a' and
    stop at the first facet that becomes tight; a0 is its inward normal and h
    the lexicographically smallest point of H on it.
    """
    H = np.asarray(H, dtype=np.int64)
    if H.ndim != 2 or len(H) == 0:
        raise ValueError("H must be a nonempty (m, d) array")
    D = np.asarray(directions, dtype=np.int64)
    if len(D) == 0:
        raise ValueError("empty direction set")
    m, d = H.shape
    if n is None:
        n = int(H.max())
    r_sq = Q(d * n * n) / 4 if r_sq is None else Q(r_sq)
    t0 = tuple(mpq(n + 1, 2) for _ in range(d))
    norms2 = (D * D).sum(1)
    if a_prime is None:
        order = np.lexsort(tuple(D[:, j] for j in range(d - 1, -1, -1)) + (norms2,))
        a_prime = tuple(int(v) for v in D[order[0]])
    ap = np.asarray(a_prime, dtype=np.int64)
    V = _hull_points(H)
    M = np.empty(len(D), dtype=np.int64)
    for s in range(0, len(D), 20000):
        M[s:s + 20000] = (D[s:s + 20000] @ V.T).max(1)
    dots = D @ ap
    sel = np.nonzero(dots > 0)[0]
    at0 = D[sel].sum(1).astype(object) * mpq(n + 1, 2)
    r = math.sqrt(float(r_sq))
    sf = (np.array([float(v) for v in at0]) - M[sel] + r * np.sqrt(norms2[sel].astype(np.float64))) / dots[sel]
    if np.any(sf < -1e-6):
        raise ConstructionError("start position is infeasible")
    best = sf.min()
    near = sel[sf <= best + 1e-7 * (1 + abs(best))]

    def exact_step(j):
        a = D[j]
        ad = int(dots[j])
        u = (Q(int(a.sum())) * mpq(n + 1, 2) - int(M[j])) / ad
        return SurdScalar.of(u, mpq(1, ad), r_sq * int(norms2[j]))

    steps = [(exact_step(j), j) for j in near]
    smin = steps[0][0]
    for s, _ in steps[1:]:
        if s < smin:
            smin = s
    tight = [j for s, j in steps if s == smin]
    inward = sorted(tuple(int(-v) for v in D[j]) for j in tight)
    a0 = inward[0]
    vals = H @ np.asarray(a0, dtype=np.int64)
    on = H[vals == vals.min()]
    h = min(tuple(int(v) for v in p) for p in on)
    center = tuple(SurdScalar.of(t) - smin * int(c) for t, c in zip(t0, a_prime))
    return Tangent(a0, h, center, smin, tuple(a_prime), r_sq, t0)


def check_tangent(H, directions, tg: Tangent, exact_margin: float = 1e-6) -> bool:
    """Every support constraint holds at the translated centre (exact near ties)."""
    H = np.asarray(H, dtype=np.int64)
    D = np.asarray(directions, dtype=np.int64)
    M = (D @ _hull_points(H).T).max(1)
    cf = np.array([float(c) for c in tg.center])
    r = math.sqrt(float(tg.r_sq))
    slack = D @ cf + r * np.sqrt((D * D).sum(1)) - M
    if np.any(slack < -exact_margin):
        return False
    for j in np.nonzero(slack < exact_margin)[0]:
        a = D[j]
        rhs = sum((c * int(v) for c, v in zip(tg.center, a)), SurdScalar.of(0)) \
            + SurdScalar.of(0, 1, tg.r_sq * int((a * a).sum()))
        if (rhs - int(M[j])).sign() < 0:
            return False
    return True


def tangency_gap(directions, r_sq, samples: int = 2000, seed: int = 0) -> float:
    """Sampled max distance from the circumscribed polytope boundary to its sphere."""
    D = np.asarray(directions, dtype=np.float64)
    d = D.shape[1]
    r = math.sqrt(float(r_sq))
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(samples, d))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    nrm = np.linalg.norm(D, axis=1)
    worst = 0.0
    for s in range(0, len(U), 256):
        proj = U[s:s + 256] @ D.T
        with np.errstate(divide="ignore"):
            rho = np.where(proj > 0, r * nrm / np.where(proj > 0, proj, 1), np.inf).min(1)
        worst = max(worst, float((rho - r).max()))
    return worst


# ---------------------------------------------------------------------------
# dense direction construction

@dataclass
class NearestReport:
    b: tuple
    norm: float
    distance: float
    bounds_ok: bool
    member: bool


def nearest_direction(line, params: DirectionParams) -> NearestReport:
    """Member of N_lambda(R) near the line through the origin along ``line``."""
    d, lam = params.d, params.lam
    if d < 3:
        raise ValueError("need d >= 3")
    u = np.asarray(line, dtype=np.float64)
    u = u / np.linalg.norm(u)
    L2 = lam ** (d - 2)
    R = math.sqrt(params.r2) if params.R is None else params.R
    eps = 2 * L2 / R
    a1 = (1 - eps) * R * u
    signs = [1 if v >= 0 else -1 for v in a1]
    absx = [Fraction(abs(float(v))) for v in a1]
    perm = sorted(range(d), key=lambda j: (-absx[j], j))
    x = [absx[j] for j in perm]
    xb1, xb2 = x[0] / L2, x[1] / L2
    if xb1 < 2:
        raise ConstructionError("step 'largest prime <= x1bar' infeasible: x1bar < 2")
    p = largest_prime_leq(float(xb1))
    q = p * xb2 / xb1
    if p < 2 or p - 1 < 1:
        raise ConstructionError("step 'primitive (p, i0)' infeasible: p too small")
    i0 = min(max(round(q), 1), p - 1)
    y = [xi * p / xb1 for xi in x]
    b = [p * L2, i0 * L2]
    ok = abs(b[1] - y[1]) <= L2
    for i in range(3, d + 1):
        step = lam ** (d - i)
        c = math.floor(y[i - 1] / step)
        if c % lam == 0:
            c += 1
        b.append(c * step)
        ok = ok and abs(b[-1] - y[i - 1]) <= step
    ok = ok and b[-1] % lam != 0
    out = [0] * d
    for pos, j in enumerate(perm):
        out[j] = signs[j] * b[pos]
    out = tuple(int(v) for v in out)
    bv = np.asarray(out, dtype=np.float64)
    dist = float(np.linalg.norm(bv - (bv @ u) * u))
    member = in_n_lambda(out, lam, params.r2)
    return NearestReport(out, float(np.linalg.norm(bv)), dist, bool(ok), member)
