"""Univariate polynomials with a peak at 0.

Three closed-form families (squared Fejer-type kernels for the two envelope
pulses, an L2 reproducing kernel for the integer-grid pulse) and an LP
constructor that doubles as an independent oracle.  Coefficients are exact
rationals in the monomial basis; every constructor's output is re-checked
exactly before use.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np
from gmpy2 import mpq, mpz

from .numerics import (Decision, IntervalScalar, Q, SurdScalar, certify_strict_gt, eval_poly,
                       rat_str, sign)

log = logging.getLogger(__name__)


class LPInfeasible(RuntimeError):
    def __init__(self, msg, certificate=None):
        super().__init__(msg)
        self.certificate = certificate


# ---------------------------------------------------------------------------
# exact polynomial helpers (lists of mpq, lowest degree first)

def poly_trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def poly_add(p, q):
    n = max(len(p), len(q))
    return poly_trim([(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)])


def poly_scale(p, c):
    return [v * c for v in p]


def poly_mul(p, q):
    out = [mpq(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return poly_trim(out)


def _common_den(vals):
    den = 1
    for v in vals:
        q = int(v.denominator)
        den = den * q // math.gcd(den, q)
    return den


def poly_compose_affine(p, alpha, beta):
    """p(alpha x + beta), exact; integer Horner over object arrays."""
    alpha, beta = Q(alpha), Q(beta)
    p = [Q(c) for c in p]
    D = _common_den(p)
    c = [int(v * D) for v in p]
    q = _common_den([alpha, beta])
    a, b = int(alpha * q), int(beta * q)
    deg = len(c) - 1
    # sum c_j (a x + b)^j q^(deg-j), divided by q^deg D at the end
    acc = np.array([c[-1]], dtype=object)
    qp = 1
    for j in range(deg - 1, -1, -1):
        qp *= q
        new = np.zeros(len(acc) + 1, dtype=object)
        new[:-1] += acc * b
        new[1:] += acc * a
        new[0] += c[j] * qp
        acc = new
    scale = mpz(q) ** deg * D
    return poly_trim([mpq(int(v), 1) / scale for v in acc])


def cheb_to_power(w):
    """sum_j w_j T_j(y) as power-basis coefficients in y (exact, Clenshaw on integers)."""
    w = [Q(v) for v in w]
    if not w:
        return [mpq(0)]
    D = _common_den(w)
    c = [int(v * D) for v in w]
    n = len(c)
    b1 = np.zeros(n + 1, dtype=object)
    b2 = np.zeros(n + 1, dtype=object)
    for j in range(n - 1, 0, -1):
        b = np.zeros(n + 1, dtype=object)
        b[1:] = 2 * b1[:-1]
        b -= b2
        b[0] += c[j]
        b1, b2 = b, b1
    out = np.zeros(n + 1, dtype=object)
    out[1:] = b1[:-1]
    out -= b2
    out[0] += c[0]
    return poly_trim([mpq(int(v), D) for v in out])


def chebyshev_values(y, deg):
    """[T_0(y), ..., T_deg(y)] for an exact y."""
    out = [mpq(1), Q(y)]
    for _ in range(deg - 1):
        out.append(2 * Q(y) * out[-1] - out[-2])
    return out[: deg + 1]


# ---------------------------------------------------------------------------
# fast exact evaluation on many points

def _scaled(coeffs):
    den = mpz(1)
    for c in coeffs:
        den = den * c.denominator // math.gcd(int(den), int(c.denominator))
    return [int(c * den) for c in coeffs], int(den)


def eval_at_integers(coeffs, xs) -> list:
    """Exact values at integer points via integer Horner over object arrays."""
    F, den = _scaled([Q(c) for c in coeffs])
    x = np.array([int(v) for v in xs], dtype=object)
    acc = np.zeros(len(x), dtype=object)
    for c in reversed(F):
        acc = acc * x + c
    return [mpq(int(v), den) for v in acc]


def eval_at_rationals(coeffs, xs) -> list:
    """Exact values at rational points sharing one denominator per call."""
    xs = [Q(v) for v in xs]
    if not xs:
        return []
    q = 1
    for v in xs:
        q = q * int(v.denominator) // math.gcd(q, int(v.denominator))
    F, den = _scaled([Q(c) for c in coeffs])
    deg = len(F) - 1
    a = np.array([int(v * q) for v in xs], dtype=object)
    acc = np.zeros(len(a), dtype=object)
    qp = 1
    # homogeneous Horner: sum F_j a^j q^(deg-j)
    for j, c in enumerate(reversed(F)):
        acc = acc * a + c * qp
        qp *= q
    scale = mpz(q) ** deg * den
    return [mpq(int(v), 1) / scale for v in acc]


def eval_at_quadratic(coeffs, A, B, T: int, q: int):
    """Exact values at the points (A_x + B_x sqrt(T)) / q (A, B integer sequences).

    Returns integer arrays (a, b) and a common scale so that
    f(point_x) = (a_x + b_x sqrt(T)) / scale.
    """
    F, den = _scaled([Q(c) for c in coeffs])
    deg = len(F) - 1
    A = np.array([int(v) for v in A], dtype=object)
    B = np.array([int(v) for v in B], dtype=object)
    acc_a = np.full(len(A), F[-1], dtype=object)
    acc_b = np.zeros(len(A), dtype=object)
    BT = B * T
    qp = 1
    for c in reversed(F[:-1]):
        qp *= q
        acc_a, acc_b = acc_a * A + acc_b * BT + c * qp, acc_a * B + acc_b * A
    return acc_a, acc_b, mpz(q) ** deg * den


# ---------------------------------------------------------------------------

@dataclass
class PulsePolynomial:
    coefficients: list
    family: str
    params: dict
    notes: list = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(poly_trim(self.coefficients)) - 1

    def __call__(self, x):
        return eval_poly(self.coefficients, x)

    def peak(self) -> mpq:
        return Q(self.coefficients[0])

    def interval(self, x: IntervalScalar) -> IntervalScalar:
        return eval_poly(self.coefficients, x)

    def to_json(self) -> dict:
        return {"family": self.family, "degree": self.degree,
                "params": {k: (rat_str(v) if not isinstance(v, (int, str, float, list)) else v)
                           for k, v in self.params.items()},
                "coefficients": [rat_str(c) for c in self.coefficients],
                "notes": self.notes}

    @classmethod
    def from_json(cls, obj) -> "PulsePolynomial":
        return cls([mpq(c) for c in obj["coefficients"]], obj["family"], dict(obj.get("params", {})),
                   list(obj.get("notes", [])))


def fejer_square_weights(k: int) -> list:
    """Integer Chebyshev weights of (sin(k t/2)/sin(t/2))^4."""
    a = [k - abs(j) for j in range(-(k - 1), k)]
    v = np.convolve(np.array(a, dtype=object), np.array(a, dtype=object))
    mid = len(v) // 2
    return [int(v[mid])] + [2 * int(v[mid + j]) for j in range(1, mid + 1)]


def _iroot4_ceil(x) -> int:
    """Smallest integer k with k^4 >= x for a rational x."""
    x = Q(x)
    k = max(1, int(float(x) ** 0.25))
    while k**4 < x:
        k += 1
    while k > 1 and (k - 1) ** 4 >= x:
        k -= 1
    return k


def constants(d: int) -> tuple:
    """Rational upper approximations of m0 = pi^2/6 4^d and m = 2/3 pi^2 (d-1)."""
    pi2 = mpq(355, 113) ** 2
    return pi2 / 6 * 4**d, pi2 * 2 / 3 * (d - 1)


def f0_degree_bound(b0, m0) -> float:
    return math.sqrt(math.pi) * math.sqrt(float(b0)) * float(m0) ** 0.25 + 2


def fpulse_degree_bound(a, b, m) -> float:
    return 7 * math.sqrt(float(a) * float(b) * float(m)) + 2


def fk_degree_bound(N: int) -> int:
    with mpmath.workdps(50):
        s = int(mpmath.floor(mpmath.sqrt(N * mpmath.log(2))))
    return 2 * s + 2


def build_f0(b0, m0, certify: bool = True, grid_limit: int = 20000, samples: int = 200,
             seed: int = 0) -> PulsePolynomial:
    """f(0) = m0, 0 <= f(x) <= min(m0, 1/x^2) on [0, b0].

    c * (sin(k t/2)/sin(t/2))^4 with cos t = 1 - 2x/b0, k^4 >= m0 b0^2 and
    c = m0 / k^4.
    """
    b0, m0 = Q(b0), Q(m0)
    if b0 <= 0 or m0 <= 0:
        raise ValueError("need b0, m0 > 0")
    k = _iroot4_ceil(m0 * b0 * b0)
    c = m0 / k**4
    w = [c * v for v in fejer_square_weights(k)]
    coeffs = poly_compose_affine(cheb_to_power(w), -2 / b0, 1)
    f = PulsePolynomial(coeffs, "F0", {"b0": b0, "m0": m0, "k": k})
    f.notes.append(f"degree {f.degree} vs bound {f0_degree_bound(b0, m0):.2f}")
    if certify:
        rep = check_pulse_properties(f, grid_limit=grid_limit, samples=samples, seed=seed)
        if not rep["ok"]:
            log.warning("F0 failed certification, falling back to LP on the integer grid")
            g = lp_peak_polynomial(list(range(1, int(b0) + 1)), degree_cap=4 * f.degree + 4,
                                   slack=mpq(1, 2), envelope=lambda x: min(1 / Q(x) ** 2, m0))
            g.coefficients = poly_scale(g.coefficients, m0)
            g.family, g.params = "F0", dict(f.params, fallback="lp")
            g.notes.append("fallback: LP on integer grid")
            return g
    return f


def build_fpulse(a, b, m, certify: bool = True, offsets: int = 3, grid_limit: int = 4000,
                 samples: int = 100, seed: int = 0) -> PulsePolynomial:
    """f(0) = m, |f(x)| < min(4m, 1/x^2) on [-a, b].

    Symmetrised shifted kernel c [K(t - phi) + K(t + phi)] with
    y = (2x - (b - a))/(a + b) = cos t and cos phi = (a - b)/(a + b).
    """
    a, b, m = Q(a), Q(b), Q(m)
    if a < 1 or b < 1 or m < 1:
        raise ValueError("need a, b, m >= 1")
    ys = (a - b) / (a + b)
    s2 = 1 - ys * ys  # sin^2 phi
    y2 = 2 * ys * ys - 1  # cos 2 phi
    k = 1
    step = 1
    while True:
        ok, Kw = _fpulse_condition(k, y2, s2, a, b, m)
        if ok:
            break
        k, step = k + step, step * 2
    lo, hi = k // 2 if k > 1 else 1, k
    # the condition is monotone in practice; bisect down to the smallest k that passes
    while lo < hi:
        mid = (lo + hi) // 2
        if _fpulse_condition(mid, y2, s2, a, b, m)[0]:
            hi = mid
        else:
            lo = mid + 1
    k = hi
    _, (w, K2) = _fpulse_condition(k, y2, s2, a, b, m)
    c = m / (k**4 + K2)
    Ts = chebyshev_values(ys, len(w) - 1)
    cw = [2 * c * wj * tj for wj, tj in zip(w, Ts)]
    coeffs = poly_compose_affine(cheb_to_power(cw), 2 / (a + b), -(b - a) / (a + b))
    f = PulsePolynomial(coeffs, "FPULSE", {"a": a, "b": b, "m": m, "k": k})
    f.notes.append(f"degree {f.degree} vs bound {fpulse_degree_bound(a, b, m):.2f}")
    if certify:
        rep = check_pulse_properties(f, offsets=offsets, grid_limit=grid_limit, samples=samples, seed=seed)
        if not rep["ok"]:
            log.warning("FPULSE failed certification, falling back to LP")
            pts = [mpq(x) for x in range(-int(a), int(b) + 1) if x != 0]
            g = lp_peak_polynomial(pts, degree_cap=4 * f.degree + 4, slack=mpq(1, 2),
                                   envelope=lambda x: min(1 / Q(x) ** 2, 4 * m))
            g.coefficients = poly_scale(g.coefficients, m)
            g.family, g.params = "FPULSE", dict(f.params, fallback="lp")
            g.notes.append("fallback: LP on integer grid")
            return g
    return f


def _fpulse_condition(k, y2, s2, a, b, m):
    w = fejer_square_weights(k)
    K2 = sum(wj * tj for wj, tj in zip(w, chebyshev_values(y2, len(w) - 1)))
    lhs = k**4 + K2
    # (k sigma + 1)^2 = k^2 s2 + 1 + 2k sigma
    rhs = SurdScalar.of(k * k * s2 + 1, 2 * k, s2) * (2 * m * (a + b) ** 2)
    return (SurdScalar.of(lhs) - rhs).sign() > 0, (w, K2)


# ---------------------------------------------------------------------------
# integer-grid pulse

def _discrete_chebyshev(M: int, upto: int):
    """Orthogonal polynomials on x = 0..M as exact power-basis lists in i = x + 1."""
    # 2x - M = 2i - (M + 2)
    lin = [mpq(-(M + 2)), mpq(2)]
    ts = [[mpq(1)], lin[:]]
    for n in range(1, upto):
        t = poly_add(poly_scale(poly_mul(lin, ts[n]), 2 * n + 1),
                     poly_scale(ts[n - 1], -n * ((M + 1) ** 2 - n * n)))
        ts.append(poly_scale(t, mpq(1, n + 1)))
    norms = [mpq(math.factorial(M + n + 1), (2 * n + 1) * math.factorial(M - n)) for n in range(upto + 1)]
    return ts[: upto + 1], norms


def _kernel_at_zero(ts, norms, m):
    """g_m(i) = sum_{n<=m} t_n(i) t_n(0) / |t_n|^2 and K_m = g_m(0)."""
    g = [mpq(0)]
    K = mpq(0)
    for n in range(m + 1):
        t0 = ts[n][0]  # value at i = 0
        g = poly_add(g, poly_scale(ts[n], t0 / norms[n]))
        K += t0 * t0 / norms[n]
    return g, K


def fk_margin(coeffs, N: int) -> mpq:
    """f(0) - sum_{i=1}^{N+1} |f(i)|, exactly."""
    vals = eval_at_integers(coeffs, range(1, N + 2))
    return Q(coeffs[0]) - sum(abs(v) for v in vals)


@functools.lru_cache(maxsize=16)
def fk_table(N: int) -> tuple:
    """Exact values f(0), ..., f(N+1) of build_fk(N)."""
    coeffs, _ = _build_fk_cached(N)
    return tuple(eval_at_integers(coeffs, range(0, N + 2)))


@functools.lru_cache(maxsize=64)
def _build_fk_cached(N: int):
    M = N
    upto = 4
    while True:
        ts, norms = _discrete_chebyshev(M, min(upto, M))
        K = mpq(0)
        m = None
        for n in range(len(ts)):
            K += ts[n][0] ** 2 / norms[n]
            if K > 1:
                m = n
                break
        if m is not None or upto >= M:
            break
        upto *= 2
    if m is None:
        # K never exceeds 1 below degree M+1: interpolate zeros at 1..N+1
        coeffs = [mpq(1)]
        for i in range(1, N + 2):
            coeffs = poly_mul(coeffs, [mpq(-i), mpq(1)])
        coeffs = poly_scale(coeffs, 1 / coeffs[0])
        return coeffs, "interpolation"
    g, Km = _kernel_at_zero(ts, norms, m)
    candidates = []
    if m >= 1:
        gp, Kp = _kernel_at_zero(ts, norms, m - 1)
        candidates.append((poly_mul(g, gp), "kernel product"))
    candidates.append((poly_mul(g, g), "kernel square"))
    for coeffs, how in candidates:
        coeffs = poly_scale(coeffs, 1 / coeffs[0])
        if fk_margin(coeffs, N) > 0:
            return coeffs, how
    raise AssertionError("kernel square must satisfy the peak inequality")


def build_fk(N: int) -> PulsePolynomial:
    """f(0) > sum_{i=1}^{N+1} |f(i)| with small degree.

    The reproducing kernel g_m(i) of degree m for the grid 0..N+1 (minimal m
    with g_m(0) > 1) gives f = g_m^2; the product g_m g_{m-1} is tried first
    since it has one degree less.  Checked exactly; LP fallback on failure.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    coeffs, how = _build_fk_cached(N)
    f = PulsePolynomial(list(coeffs), "FK", {"N": N})
    f.notes.append(how)
    tab = fk_table(N)
    if tab[0] - sum(abs(v) for v in tab[1:]) <= 0:  # pragma: no cover - guarded by construction
        log.warning("FK construction missed the peak inequality; using LP")
        g = lp_peak_polynomial(list(range(1, N + 2)), degree_cap=N + 1, slack=mpq(1, 2))
        g.family, g.params = "FK", {"N": N, "fallback": "lp"}
        return g
    return f


# ---------------------------------------------------------------------------
# LP constructor

@dataclass
class _Problem:
    pts: np.ndarray
    weights: np.ndarray
    lo: mpq
    hi: mpq


def _affine(lo, hi):
    lo, hi = Q(lo), Q(hi)
    return 2 / (hi - lo), -(hi + lo) / (hi - lo)


def _solve_lp(yp, w, deg, y0, box=None, solver="auto"):
    from numpy.polynomial import chebyshev as C
    V = C.chebvander(yp, deg)
    v0 = C.chebvander(np.array([y0]), deg)[0]
    m = len(yp)
    if solver == "irls" or (solver == "auto" and box is None and m * (deg + 1) > 4 * 10**5):
        return _solve_irls(V, w, v0), "irls"
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix, hstack, identity, vstack
    n = deg + 1
    I = identity(m, format="csr")
    Vs = csr_matrix(V)
    A = [hstack([Vs, -I]), hstack([-Vs, -I])]
    b = [np.zeros(m), np.zeros(m)]
    if box is not None:
        Vb = csr_matrix(C.chebvander(box, deg))
        Z = csr_matrix((len(box), m))
        A += [hstack([Vb, Z]), hstack([-Vb, Z])]
        b += [np.ones(len(box)), np.ones(len(box))]
    cost = np.r_[np.zeros(n), w]
    res = linprog(cost, A_ub=vstack(A).tocsr(), b_ub=np.concatenate(b),
                  A_eq=np.r_[v0, np.zeros(m)][None, :], b_eq=[1.0],
                  bounds=[(None, None)] * n + [(0, None)] * m, method="highs")
    if res.status != 0:
        return None, f"highs status {res.status}: {res.message}"
    return res.x[:n], "highs"


def _solve_irls(V, w, v0, iters: int = 60):
    """Weighted L1 minimisation of |V c| subject to v0.c = 1 by reweighted least squares."""
    wt = np.array(w, dtype=np.float64)
    best, best_c = np.inf, None
    for _ in range(iters):
        Qm, R = np.linalg.qr(V * np.sqrt(wt)[:, None])
        z = np.linalg.solve(R.T, v0)
        c = np.linalg.solve(R, z)
        c /= v0 @ c
        r = np.abs(V @ c)
        val = float((np.asarray(w) * r).sum())
        if val < best:
            best, best_c = val, c
        wt = np.asarray(w) / np.maximum(r, 1e-12 * max(r.max(), 1e-300))
    return best_c


def _exact_from_cheb(c, alpha, beta):
    """Exact monomial coefficients of sum c_j T_j(alpha x + beta), normalised to f(0) = 1."""
    cq = [mpq(*float(v).as_integer_ratio()) for v in c]
    p = poly_compose_affine(cheb_to_power(cq), alpha, beta)
    if p[0] == 0:
        return None
    return poly_scale(p, 1 / p[0])


def _exact_abs_sum(coeffs, pts, weights=None) -> mpq | SurdScalar:
    ints = [p for p in pts if isinstance(p, int) or (not isinstance(p, SurdScalar) and Q(p).denominator == 1)]
    total = SurdScalar.of(0)
    if weights is None and len(ints) == len(pts):
        return sum((abs(v) for v in eval_at_integers(coeffs, [int(Q(p)) for p in ints])), mpq(0))
    for j, p in enumerate(pts):
        v = eval_poly(coeffs, p)
        wj = 1 if weights is None else weights[j]
        if isinstance(v, SurdScalar):
            total = total + abs(v) * wj
        else:
            total = total + abs(Q(v)) * wj
    return total


def lp_fit(points, weights, deg: int, box=None, solver: str = "auto"):
    """Float LP/IRLS fit of min sum w|f(x)| with f(0) = 1, returned as exact coefficients.

    The result is a rational polynomial with f(0) = 1 exactly; any bound on it
    must be re-checked by the caller.  Returns (coeffs or None, solver note).
    """
    fl = np.asarray(points, dtype=np.float64)
    allv = np.concatenate([fl, [0.0]] + ([np.asarray(box, dtype=np.float64)] if box is not None else []))
    lo, hi = mpq(math.floor(allv.min())), mpq(math.ceil(allv.max()))
    if hi == lo:
        hi = lo + 1
    alpha, beta = _affine(lo, hi)
    ay, by = float(alpha), float(beta)
    w = np.asarray(weights, dtype=np.float64)
    w = w / w.max() if w.max() > 0 else np.ones_like(w)
    yb = None if box is None else ay * np.asarray(box, dtype=np.float64) + by
    c, how = _solve_lp(ay * fl + by, w, deg, by, box=yb, solver=solver)
    if c is None:
        return None, how
    return _exact_from_cheb(c, alpha, beta), how


def lp_peak_polynomial(eval_points: Sequence, degree_cap: int, slack=mpq(1, 2), weights=None,
                       box_points: Sequence = (), envelope=None, bisect: bool = True,
                       solver: str = "auto") -> PulsePolynomial:
    """f(0) = 1 and sum_x w_x |f(x)| <= slack over eval_points, with minimal degree.

    Minimises the weighted L1 sum in a Chebyshev basis (HiGHS; reweighted
    least squares for very large instances), rationalises the coefficients
    and re-checks the bound with exact arithmetic.  ``box_points`` adds
    |f| <= 1 there; ``envelope`` (x -> bound) is checked exactly afterwards.
    """
    slack = Q(slack)
    pts = list(eval_points)
    for p in pts:
        if (p == 0) if not isinstance(p, SurdScalar) else p.sign() == 0:
            raise ValueError("eval_points must exclude 0")
    if not pts:
        return PulsePolynomial([mpq(1)], "LP", {"slack": slack, "points": 0})
    fl = np.array([float(p) for p in pts])
    bf = np.array([float(p) for p in box_points]) if len(box_points) else None
    w = np.ones(len(pts)) if weights is None else np.array([float(v) for v in weights])
    wq = None if weights is None else [Q(v) if not isinstance(v, SurdScalar) else v for v in weights]
    cache = {}

    def attempt(deg):
        if deg in cache:
            return cache[deg]
        if deg == 0:
            coeffs = [mpq(1)]
            how = "constant"
        else:
            coeffs, how = lp_fit(fl, w, deg, box=bf, solver=solver)
        ok, total = False, None
        if coeffs is not None:
            total = _exact_abs_sum(coeffs, pts, wq)
            ok = total <= slack
            if ok and len(box_points):
                ok = all(abs(eval_poly(coeffs, q)) <= 1 for q in box_points)
            if ok and envelope is not None:
                vals = ([abs(v) for v in eval_at_integers(coeffs, [int(p) for p in pts])]
                        if all(not isinstance(p, SurdScalar) and Q(p).denominator == 1 for p in pts)
                        else [abs(eval_poly(coeffs, p)) for p in pts])
                ok = all(v <= envelope(p) for v, p in zip(vals, pts))
        cache[deg] = (ok, coeffs, total, how)
        return cache[deg]

    ok, coeffs, total, how = attempt(degree_cap)
    if not ok:
        raise LPInfeasible(f"no certified polynomial at degree cap {degree_cap}",
                           {"degree": degree_cap, "solver": how,
                            "exact_sum": None if total is None else float(total)})
    best = degree_cap
    if bisect:
        lo_d, hi_d = 0, degree_cap
        while lo_d < hi_d:
            mid = (lo_d + hi_d) // 2
            if attempt(mid)[0]:
                hi_d = mid
            else:
                lo_d = mid + 1
        best = hi_d
    ok, coeffs, total, how = attempt(best)
    f = PulsePolynomial(coeffs, "LP", {"slack": slack, "points": len(pts), "degree_cap": degree_cap})
    f.notes.append(f"solver {how}; exact weighted sum {float(total):.6g}")
    return f


# ---------------------------------------------------------------------------
# certification

def check_pulse_properties(f: PulsePolynomial, offsets: int = 3, grid_limit: int = 20000,
                           samples: int = 100, seed: int = 0) -> dict:
    """Per-property verdicts with method and worst margin."""
    rng = np.random.default_rng(seed)
    out = {"family": f.family, "degree": f.degree, "properties": {}}
    props = out["properties"]
    fam = f.family
    if fam == "FK" or (fam == "LP" and "N" in f.params):
        N = int(f.params["N"])
        margin = fk_margin(f.coefficients, N)
        props["a"] = {"ok": margin > 0, "method": "exact", "margin": float(margin / f.peak())}
        bound = fk_degree_bound(N)
        props["c"] = {"ok": f.degree <= bound, "method": "exact", "degree": f.degree, "bound": bound}
    elif fam == "F0":
        b0, m0 = Q(f.params["b0"]), Q(f.params["m0"])
        props["a"] = {"ok": f.peak() == m0, "method": "exact"}
        top = int(b0) if b0 >= 1 else 0
        if top <= grid_limit:
            xs = list(range(1, top + 1))
            method = "exact"
        else:
            xs = sorted(set(int(v) for v in rng.integers(1, top + 1, grid_limit)))
            method = f"exact on {len(xs)} sampled integers"
        vals = eval_at_integers(f.coefficients, xs)
        worst = max([float(abs(v) * x * x) for v, x in zip(vals, xs)] + [0.0])
        okb = all(abs(v) <= m0 and abs(v) * x * x <= 1 for v, x in zip(vals, xs))
        props["b_grid"] = {"ok": okb, "method": method, "worst_ratio": worst}
        props["b_real"] = _interval_envelope(f, [mpq(*float(v).as_integer_ratio())
                                                 for v in rng.uniform(0, float(b0), samples)],
                                             lambda x: min(m0, 1 / (x * x)) if x else m0, strict=False)
        props["c"] = {"ok": f.degree < f0_degree_bound(b0, m0), "method": "arithmetic",
                      "degree": f.degree, "bound": f0_degree_bound(b0, m0)}
    elif fam == "FPULSE":
        a, b, m = Q(f.params["a"]), Q(f.params["b"]), Q(f.params["m"])
        props["a"] = {"ok": f.peak() == m, "method": "exact"}
        okb, worst, count = True, 0.0, 0
        eps_list = [mpq(0)] + [mpq(int(v), 2**20) for v in rng.integers(-2**19 + 1, 2**19 + 1, offsets)]
        for e in eps_list:
            xs = [x + e for x in range(int(math.floor(-a - e)) - 1, int(math.ceil(b - e)) + 2)
                  if -a <= x + e <= b and x + e != 0]
            if len(xs) > grid_limit:
                xs = [xs[i] for i in sorted(set(rng.integers(0, len(xs), grid_limit).tolist()))]
            vals = eval_at_rationals(f.coefficients, xs)
            count += len(xs)
            for v, x in zip(vals, xs):
                r = abs(v) * x * x
                worst = max(worst, float(r))
                if not (abs(v) < 4 * m and r < 1):
                    okb = False
        props["b_grid"] = {"ok": okb, "method": f"exact on {count} points of Z+eps",
                           "offsets": len(eps_list), "worst_ratio": worst}
        props["b_real"] = _interval_envelope(f, [mpq(*float(v).as_integer_ratio())
                                                 for v in rng.uniform(float(-a), float(b), samples)],
                                             lambda x: min(4 * m, 1 / (x * x)) if x else 4 * m, strict=True)
        bound = fpulse_degree_bound(a, b, m)
        props["c"] = {"ok": f.degree < bound, "method": "arithmetic", "degree": f.degree, "bound": bound}
    else:
        props["a"] = {"ok": f.peak() == 1, "method": "exact"}
    # (c) is reported, not required; the certification verdict covers (a) and (b)
    out["ok"] = all(v["ok"] for k, v in props.items() if k in ("a", "b_grid"))
    out["diagnostic_ok"] = all(v["ok"] for v in props.values())
    return out


def _interval_envelope(f, xs, bound, strict: bool) -> dict:
    undecided = 0
    fails = 0
    for x in xs:
        if x == 0:
            continue
        env = bound(x)
        res = certify_strict_gt(lambda p, env=env: IntervalScalar.exact(env, p),
                                lambda p, x=x: abs(eval_poly(f.coefficients, IntervalScalar.exact(x, p))))
        if res is Decision.UNDECIDED:
            undecided += 1
        elif res is Decision.LE:
            # envelope <= |f|: a violation for strict bounds; for non-strict only if also not equal
            exact = abs(eval_poly(f.coefficients, x))
            if (strict and exact >= env) or (not strict and exact > env):
                fails += 1
    return {"ok": fails == 0, "method": "interval (diagnostic)", "samples": len(xs),
            "undecided": undecided, "violations": fails}
