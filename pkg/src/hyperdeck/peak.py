"""Peak polynomials on point sets in [n]^d, d >= 3.

A peak product is p = prod_i f_i(g_i(x)) with g_0 integral (the supporting
facet normal) and g_1..g_{d-1} rotated towards the height vectors of a
reduced kernel basis.  Two ways to pick the f_i: the pulse lemmas (``lemma``
mode) or per-factor LP fits on the exact value sets g_i(H) (``lp`` mode).
Either way the peak inequality p(h) > sum_{x != h} |p(x)| is checked
directly by verify_peak.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import mpmath
import numpy as np
from gmpy2 import mpq, mpz

from . import lattice as lat
from .lattice import ConstructionError, DirectionFunction
from .numerics import (DEFAULT_SCHEDULE, Decision, IntervalScalar, Q, SurdScalar, certify_strict_gt,
                       eval_poly, pi_lower, pi_upper, rat_str)
from .pulses import _build_fk_cached, fk_table
from .pulses import (PulsePolynomial, build_f0, build_fpulse, check_pulse_properties, constants,
                     eval_at_integers, eval_at_quadratic, lp_fit, f0_degree_bound, fpulse_degree_bound)

log = logging.getLogger(__name__)

VERIFY_SCHEDULE = DEFAULT_SCHEDULE + (4096, 8192, 16384)
EXACT_BUDGET = 4 * 10**6  # sum of factor degrees times |H| above which verify_peak uses intervals


class BoundMiss(RuntimeError):
    """g_i(H) leaves [-a, b] and adaptive inflation was disabled."""

    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


def as_points(H) -> np.ndarray:
    H = np.asarray(H, dtype=np.int64)
    if H.ndim != 2 or len(H) == 0:
        raise ValueError("H must be a nonempty list of integer points")
    return np.unique(H, axis=0)


def _ceil_rat(x) -> int:
    """Ceiling of a positive mpmath number, as a Python int."""
    return int(mpmath.ceil(x))


# ---------------------------------------------------------------------------
# exact values of directions and factors

def direction_values(g: DirectionFunction, H: np.ndarray):
    """Exact g(x) for every row of H.

    Integral: Python ints.  Rotated: ``(A, B, T, q)`` with
    g(x) = (A_x + B_x sqrt(T)) / q, plus the list of SurdScalars.
    """
    X = H.astype(object) - np.array(g.base, dtype=object)
    g0 = X.dot(np.array(g.a0, dtype=object))
    if g.kind == "integral":
        return [int(v) for v in g0], None
    coef = [g.nu * hv for hv in g.hvec]
    q1 = 1
    for c in coef:
        q1 = q1 * int(c.denominator) // math.gcd(q1, int(c.denominator))
    U = X.dot(np.array([int(c * q1) for c in coef], dtype=object))
    rn, rd = int(g.rad.numerator), int(g.rad.denominator)
    T = rn * rd
    A = U * rd
    B = g0 * q1
    q = q1 * rd
    vals = [SurdScalar.of(mpq(int(a), q), mpq(int(b), q), T) for a, b in zip(A, B)]
    return vals, (A, B, T, q)


def factor_values(f: PulsePolynomial, g: DirectionFunction, H: np.ndarray) -> list:
    """Exact f(g(x)) for every row of H, evaluating once per distinct g value."""
    vals, quad = direction_values(g, H)
    if quad is None and f.family == "FK" and "N" in f.params and len(f.coefficients) > 1:
        N = int(f.params["N"])
        if all(0 <= v <= N + 1 for v in vals) and list(f.coefficients) == list(_fk_coeffs(N)):
            tab = fk_table(N)
            return [tab[v] for v in vals]
    if quad is None:
        uniq = sorted(set(vals))
        out = dict(zip(uniq, eval_at_integers(f.coefficients, uniq)))
        return [out[v] for v in vals]
    A, B, T, q = quad
    keys = list(zip((int(a) for a in A), (int(b) for b in B)))
    uniq = sorted(set(keys))
    ua, ub, scale = eval_at_quadratic(f.coefficients, [k[0] for k in uniq], [k[1] for k in uniq], T, q)
    table = {k: SurdScalar.of(mpq(int(a)) / scale, mpq(int(b)) / scale, T) for k, a, b in zip(uniq, ua, ub)}
    return [table[k] for k in keys]


def _fk_coeffs(N: int):
    return _build_fk_cached(N)[0]


# ---------------------------------------------------------------------------

@dataclass
class Factor:
    pulse: Optional[PulsePolynomial]
    direction: DirectionFunction

    def to_json(self):
        return {"pulse": None if self.pulse is None else self.pulse.to_json(),
                "direction": self.direction.to_json()}


@dataclass
class PeakProduct:
    h: tuple
    d: int
    n: int
    factors: list
    mode: str
    params: dict = field(default_factory=dict)
    transcript: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all(fc.pulse is not None for fc in self.factors)

    @property
    def degree(self) -> int:
        if not self.complete:
            raise ValueError("pulses were not built for this product")
        return sum(fc.pulse.degree for fc in self.factors)

    def __call__(self, x):
        out = SurdScalar.of(1)
        for fc in self.factors:
            out = out * eval_poly(fc.pulse.coefficients, fc.direction(x))
        return out

    def exact_values(self, H: np.ndarray) -> list:
        cols = [factor_values(fc.pulse, fc.direction, H) for fc in self.factors]
        out = []
        for row in zip(*cols):
            acc = SurdScalar.of(1)
            for v in row:
                acc = acc * v
            out.append(acc)
        return out

    def exact_abs_values(self, H: np.ndarray) -> list:
        """|p(x)| as exact scalars, taking absolute values factor by factor."""
        cols = [[abs(v) for v in factor_values(fc.pulse, fc.direction, H)] for fc in self.factors]
        out = []
        for row in zip(*cols):
            acc = SurdScalar.of(1)
            for v in row:
                acc = acc * v
            out.append(acc)
        return out

    def interval_values(self, H: np.ndarray, prec: int) -> list:
        out = []
        cache = [dict() for _ in self.factors]
        for x in H:
            acc = IntervalScalar.exact(1, prec)
            for j, fc in enumerate(self.factors):
                gx = fc.direction(tuple(int(v) for v in x))
                key = gx.to_json() if isinstance(gx, SurdScalar) else gx
                key = str(key)
                val = cache[j].get(key)
                if val is None:
                    xi = gx.interval(prec) if isinstance(gx, SurdScalar) else IntervalScalar.exact(gx, prec)
                    val = fc.pulse.interval(xi)
                    cache[j][key] = val
                acc = acc * val
            out.append(acc)
        return out

    def to_json(self) -> dict:
        return {"h": list(map(int, self.h)), "d": self.d, "n": self.n, "mode": self.mode,
                "degree": self.degree if self.complete else None,
                "params": _jsonable(self.params),
                "factors": [fc.to_json() for fc in self.factors],
                "transcript": _jsonable(self.transcript)}

    @classmethod
    def from_json(cls, obj) -> "PeakProduct":
        factors = [Factor(None if f["pulse"] is None else PulsePolynomial.from_json(f["pulse"]),
                          lat.direction_from_json(f["direction"])) for f in obj["factors"]]
        return cls(tuple(obj["h"]), int(obj["d"]), int(obj["n"]), factors, obj["mode"],
                   dict(obj.get("params", {})), dict(obj.get("transcript", {})))


@dataclass
class PolyPeak:
    """Multivariate polynomial p(x) = sum_e c_e prod_j (x_j - h_j)^e_j."""
    h: tuple
    d: int
    n: int
    terms: dict  # exponent tuple -> mpq
    mode: str = "lp-multivariate"
    transcript: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return max((sum(e) for e, c in self.terms.items() if c != 0), default=0)

    def __call__(self, x):
        total = mpq(0)
        for e, c in self.terms.items():
            t = c
            for xi, hi, ei in zip(x, self.h, e):
                t *= (int(xi) - int(hi)) ** ei
            total += t
        return total

    def exact_values(self, H) -> list:
        return [self(tuple(int(v) for v in x)) for x in H]

    def exact_abs_values(self, H) -> list:
        return [abs(v) for v in self.exact_values(H)]

    def interval_values(self, H, prec: int) -> list:
        return [IntervalScalar.exact(v, prec) for v in self.exact_values(H)]

    def as_exponent_dict(self) -> dict:
        """Coefficients in the unshifted monomial basis (for moment sums)."""
        out: dict = {}
        for e, c in self.terms.items():
            parts = []
            for ei, hi in zip(e, self.h):
                parts.append([(j, math.comb(ei, j) * (-int(hi)) ** (ei - j)) for j in range(ei + 1)])
            for combo in itertools.product(*parts):
                key = tuple(j for j, _ in combo)
                coef = c
                for _, v in combo:
                    coef *= v
                out[key] = out.get(key, mpq(0)) + coef
        return {k: v for k, v in out.items() if v != 0}

    def to_json(self) -> dict:
        return {"h": list(map(int, self.h)), "d": self.d, "n": self.n, "mode": self.mode,
                "degree": self.degree,
                "terms": [{"exponents": list(e), "coefficient": rat_str(c)} for e, c in sorted(self.terms.items())],
                "transcript": _jsonable(self.transcript)}

    @classmethod
    def from_json(cls, obj) -> "PolyPeak":
        terms = {tuple(t["exponents"]): mpq(t["coefficient"]) for t in obj["terms"]}
        return cls(tuple(obj["h"]), int(obj["d"]), int(obj["n"]), terms, obj.get("mode", "lp-multivariate"),
                   dict(obj.get("transcript", {})))


def peak_from_json(obj):
    return PolyPeak.from_json(obj) if "terms" in obj else PeakProduct.from_json(obj)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, SurdScalar):
        return v.to_json()
    if isinstance(v, type(mpq())) or isinstance(v, type(mpz())):
        return rat_str(v)
    return str(v)


def trivial_product(h, n: int, d: int) -> PeakProduct:
    """p == 1 with coordinate directions; the peak for a one-point set."""
    one = PulsePolynomial([mpq(1)], "LP", {"slack": "0", "points": 0})
    factors = [Factor(one, lat.integral_direction(tuple(int(i == j) for j in range(d)), h)) for i in range(d)]
    return PeakProduct(tuple(map(int, h)), d, n, factors, "trivial")


# ---------------------------------------------------------------------------
# verification

@dataclass
class PeakVerdict:
    status: str            # CERTIFIED, FAILED or UNDECIDED
    method: str
    peak: str
    others: str
    margin: str
    precision: Optional[int] = None
    points: int = 0

    @property
    def certified(self) -> bool:
        return self.status == "CERTIFIED"

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _fmt(v) -> str:
    if isinstance(v, SurdScalar):
        if v.is_rational():
            return rat_str(v.rational())
        return f"{float(v):.17g}"
    if isinstance(v, IntervalScalar):
        return v.to_str()
    return rat_str(v)


def verify_peak(p, H, method: str = "auto", schedule: Sequence[int] = VERIFY_SCHEDULE) -> PeakVerdict:
    """Decide p(h) > sum_{x in H, x != h} |p(x)|, exactly or with escalating intervals."""
    H = as_points(H)
    h = tuple(int(v) for v in p.h)
    mask = np.all(H == np.array(h), axis=1)
    if not mask.any():
        raise ValueError("peak point h is not in H")
    rest = H[~mask]
    hp = np.array([h], dtype=np.int64)
    if method == "auto":
        if isinstance(p, PolyPeak):
            cost = 0
        else:
            # integral directions evaluate as vectorised integer Horner, cheap at any size
            cost = sum(fc.pulse.degree for fc in p.factors if fc.direction.kind != "integral") * len(H)
        method = "exact" if p.d <= 4 and cost <= EXACT_BUDGET else "interval"
    if method == "exact":
        peak = p.exact_values(hp)[0]
        others = p.exact_abs_values(rest) if len(rest) else []
        total = SurdScalar.of(0)
        for v in others:
            total = total + v
        margin = SurdScalar.of(peak) - total if not isinstance(peak, SurdScalar) else peak - total
        s = margin.sign()
        return PeakVerdict("CERTIFIED" if s > 0 else "FAILED", "exact", _fmt(peak), _fmt(total),
                           _fmt(margin), None, len(H))
    last = None
    for prec in schedule:
        peak = p.interval_values(hp, prec)[0]
        total = IntervalScalar.exact(0, prec)
        for v in (p.interval_values(rest, prec) if len(rest) else []):
            total = total + abs(v)
        res = certify_strict_gt(peak, total)
        last = (peak, total, prec)
        if res is not Decision.UNDECIDED:
            status = "CERTIFIED" if res is Decision.GT else "FAILED"
            return PeakVerdict(status, "interval", peak.to_str(), total.to_str(), (peak - total).to_str(),
                               prec, len(H))
    peak, total, prec = last
    return PeakVerdict("UNDECIDED", "interval", peak.to_str(), total.to_str(), (peak - total).to_str(),
                       prec, len(H))


# ---------------------------------------------------------------------------
# parameters

def peak_params(n: int, d: int) -> dict:
    """b0 = sqrt(d) n R, a = 10/33 sqrt(d) theta_d^2 n^((d-1)/(d+1)), b = sqrt(d) n, m0, m.

    Domain endpoints are rounded up to integers; m0 and m use an upper
    rational approximation of pi.
    """
    with mpmath.workdps(50):
        n_ = mpmath.mpf(n)
        R = mpmath.sqrt(d) * n_ ** (mpmath.mpf(d - 1) / (d + 1))
        b0 = mpmath.sqrt(d) * n_ * R
        th2 = 128 * mpmath.mpf(d) ** (3 * d) / (6561 * mpmath.pi ** 2 * d * (d - 1) ** 3)
        a = mpmath.mpf(10) / 33 * mpmath.sqrt(d) * th2 * n_ ** (mpmath.mpf(d - 1) / (d + 1))
        b = mpmath.sqrt(d) * n_
        out = {"b0": _ceil_rat(b0), "a": _ceil_rat(a), "b": _ceil_rat(b),
               "a_real": float(a), "b0_real": float(b0)}
    m0, m = constants(d)
    out["m0"], out["m"] = m0, m
    return out


def lemma_degree_bound(n: int, d: int) -> float:
    return d ** (1.5 * d) * n ** (d / (d + 1)) - d


def planar_degree_bound(n: int) -> float:
    return 6.308 * n ** (2 / 3) - 2


def estimate_pulse_degrees(b0, a, b, m0, m) -> tuple:
    """Cheap float estimates of the F0 and FPULSE degrees the constructors will reach."""
    k0 = math.ceil((float(m0) * float(b0) ** 2) ** 0.25)
    ys = (float(a) - float(b)) / (float(a) + float(b))
    sig = math.sqrt(max(0.0, 1 - ys * ys))
    k = 1
    while k**4 < 2 * float(m) * (float(a) + float(b)) ** 2 * (k * sig + 1) ** 2:
        k += 1
    return 2 * k0 - 2, 2 * k - 2


@functools.lru_cache(maxsize=8)
def _direction_set(n: int, d: int, params: Optional[lat.DirectionParams] = None):
    if params is None:
        try:
            params = lat.direction_params(n, d)
        except ValueError as e:
            raise ConstructionError(f"n = {n} too small for the direction set: {e}") from None
    return params, np.asarray(lat.n_lambda_set(params), dtype=np.int64)


# ---------------------------------------------------------------------------
# the geometric part of the pipeline

@dataclass
class Frame:
    """Directions plus everything needed to check Properties A/B/C."""
    params: lat.DirectionParams
    tangent: lat.Tangent
    basis: lat.ReducedBasis
    heights: list
    g0: DirectionFunction
    rotated: list
    report: dict


def build_directions(H: np.ndarray, n: int, d: int, allow_lambda_two: bool = False,
                     params: Optional[lat.DirectionParams] = None) -> Frame:
    """params -> N_lambda -> tangent -> kernel basis -> reduction -> heights -> rotations.

    ``params`` overrides the (lambda, R) derived from n, for small synthetic runs.
    """
    params, D = _direction_set(n, d, params)
    if params.lam < 3 and not allow_lambda_two:
        raise ConstructionError(f"lambda = {params.lam} < 3: n = {n} too small for the lemma pipeline")
    if len(D) == 0:
        raise ConstructionError("N_lambda(R) is empty")
    rep = {"lambda": params.lam, "R": params.R, "directions": int(len(D))}
    tg = lat.support_tangent(H, D, n=n)
    rep["tangent_ok"] = lat.check_tangent(H, D, tg)
    rep["a0"], rep["h"] = list(tg.a0), list(tg.h)
    B = lat.kernel_basis(tg.a0)
    rb = lat.reduce_basis(B)
    rep["mahler_ok"], rep["mahler_ratio"], rep["refined"] = rb.bound_ok, rb.ratio, rb.refined
    hs = lat.height_vectors(rb.basis)
    rep["height_norm_sq"] = [float(x.norm_sq) for x in hs]
    g0 = lat.integral_direction(tg.a0, tg.h)
    rot = [lat.rotate_direction(tg.a0, rb.basis, hs, i, t=tg.center, base=tg.h) for i in range(d - 1)]
    return Frame(params, tg, rb, hs, g0, rot, rep)


def rotation_checks(frame: Frame) -> dict:
    """a_i . y_j = delta_ij (i, j >= 1), |a_i|^2 = 1 for rotated a_i, det != 0."""
    rows = [fr.vector() for fr in frame.rotated]
    ys = [fr.y for fr in frame.rotated]
    delta = all(lat.dot(rows[i], ys[j]) == (1 if i == j else 0)
                for i in range(len(rows)) for j in range(len(ys)))
    unit = all(lat.dot(r, r) == 1 for r in rows)
    det = lat.surd_det([frame.g0.vector()] + rows)
    return {"delta": delta, "unit": unit, "det_sign": det.sign(), "ok": delta and unit and det.sign() != 0}


def property_a(g0_vals, rot_vals, b0, a, b) -> dict:
    g0_lo, g0_hi = min(g0_vals), max(g0_vals)
    g0_ok = g0_lo >= 0 and g0_hi <= b0
    lo = min((min(v) for v in rot_vals), default=SurdScalar.of(0), key=float)
    hi = max((max(v) for v in rot_vals), default=SurdScalar.of(0), key=float)
    misses = sum(1 for vals in rot_vals for v in vals if v < -a or v > b)
    return {"g0_range": [int(g0_lo), int(g0_hi)], "g0_ok": bool(g0_ok), "b0": b0, "a": a, "b": b,
            "rot_range": [float(lo), float(hi)], "rot_misses": misses, "ok": bool(g0_ok and misses == 0)}


def property_c(frame: Frame, H: np.ndarray, rot_vals, g0_vals) -> dict:
    """On each occupied slice g0 = k, g_i(x) - eps_ik is an integer."""
    bad = 0
    eps_ok = True
    slices = {}
    for idx, k in enumerate(g0_vals):
        slices.setdefault(k, []).append(idx)
    for k, idxs in slices.items():
        fr = lat.slice_frame(int(k), frame.g0, frame.basis.basis.w, frame.rotated)
        for e in fr.eps:
            eps_ok = eps_ok and (e > mpq(-1, 2)) and (e <= mpq(1, 2))
        for i, vals in enumerate(rot_vals):
            for j in idxs:
                diff = vals[j] - fr.eps[i]
                if (diff - (diff + mpq(1, 2)).floor()).sign() != 0:
                    bad += 1
    return {"slices": len(slices), "violations": bad, "eps_ok": eps_ok, "ok": bad == 0 and eps_ok}


def property_b(frame: Frame) -> dict:
    det = lat.surd_det([frame.g0.vector()] + [g.vector() for g in frame.rotated])
    return {"det_sign": det.sign(), "ok": det.sign() != 0}


def invariant_suite(H, n: int, d: int, frame: Optional[Frame] = None, allow_lambda_two: bool = False) -> dict:
    """All construction invariants without building pulses."""
    H = as_points(H)
    frame = frame or build_directions(H, n, d, allow_lambda_two)
    prm = peak_params(n, d)
    g0_vals, _ = direction_values(frame.g0, H)
    rot_vals = [direction_values(g, H)[0] for g in frame.rotated]
    out = dict(frame.report)
    out["rotation"] = rotation_checks(frame)
    out["property_a"] = property_a(g0_vals, rot_vals, prm["b0"], prm["a"], prm["b"])
    out["property_b"] = property_b(frame)
    out["property_c"] = property_c(frame, H, rot_vals, g0_vals)
    out["heights_ok"] = all(x.norm_sq > 1 for x in frame.heights)
    return out


# ---------------------------------------------------------------------------
# construction

def construct_peak_d(H, n: int, d: int, mode: str = "lemma", adaptive: bool = True,
                     build_pulses: str = "auto", max_pulse_degree: int = 3000,
                     pulse_offsets: int = 3, seed: int = 0) -> PeakProduct:
    """Build p = prod f_i(g_i) peaking at a supporting point h of H.

    mode ``lemma``: f_0 from build_f0(b0, m0), f_1 = ... = f_{d-1} from
    build_fpulse(a, b, m).  If g_i(H) leaves [-a, b] (small n), a is doubled
    until it fits (``adaptive``) or BoundMiss is raised.  Pulses are skipped
    when their estimated degree exceeds ``max_pulse_degree`` and
    ``build_pulses`` is ``auto``; the product is then incomplete but carries
    the full invariant report.

    mode ``lp``: each f_i is an LP fit on the exact values g_i(H), weighted by
    the other factors and refined in rounds until the exact product sum drops
    below p(h) = 1.
    """
    if d < 3:
        raise ValueError("d >= 3 required; use planar.construct_peak_2 for d = 2")
    if mode not in ("lemma", "lp"):
        raise ValueError(f"unknown mode {mode!r}")
    H = as_points(H)
    if H.shape[1] != d:
        raise ValueError("points do not match d")
    if H.min() < 1 or H.max() > n:
        raise ValueError("points must lie in [n]^d")
    t_start = time.time()
    if len(H) == 1:
        p = trivial_product(tuple(H[0]), n, d)
        p.transcript = {"status": "trivial", "points": 1}
        return p
    frame = build_directions(H, n, d, allow_lambda_two=(mode == "lp"))
    tr = invariant_suite(H, n, d, frame)
    prm = peak_params(n, d)
    h = tuple(frame.tangent.h)
    directions = [frame.g0] + frame.rotated
    if mode == "lp":
        factors, lp_rep = _lp_factors(H, h, directions)
        tr["lp"] = lp_rep
        p = PeakProduct(h, d, n, factors, "lp", _jsonable(prm), tr)
        tr["seconds"] = time.time() - t_start
        return p
    # lemma mode: adaptive a
    a = prm["a"]
    rot_vals = [direction_values(g, H)[0] for g in frame.rotated]
    inflations = 0
    while any(v < -a for vals in rot_vals for v in vals):
        if not adaptive:
            raise BoundMiss(f"g_i(H) leaves [-a, b] with a = {a}", tr)
        a *= 2
        inflations += 1
    tr["bound_miss"] = inflations > 0
    tr["a_inflations"] = inflations
    tr["a_used"] = a
    est0, est1 = estimate_pulse_degrees(prm["b0"], a, prm["b"], prm["m0"], prm["m"])
    tr["pulse_degree_estimate"] = [est0, est1]
    do_build = build_pulses == "always" or (build_pulses == "auto" and max(est0, est1) <= max_pulse_degree)
    if do_build:
        f0 = build_f0(prm["b0"], prm["m0"], seed=seed)
        f = build_fpulse(a, prm["b"], prm["m"], offsets=pulse_offsets, seed=seed)
        tr["pulses"] = {"f0": {"degree": f0.degree, "bound": f0_degree_bound(prm["b0"], prm["m0"]),
                               "certified": check_pulse_properties(f0, seed=seed)["ok"],
                               "fallback": f0.params.get("fallback")},
                        "f": {"degree": f.degree, "bound": fpulse_degree_bound(a, prm["b"], prm["m"]),
                              "certified": check_pulse_properties(f, offsets=pulse_offsets, seed=seed)["ok"],
                              "fallback": f.params.get("fallback")}}
        pulses = [f0] + [f] * (d - 1)
    else:
        tr["pulses"] = "skipped: estimated degree above cap"
        pulses = [None] * d
    factors = [Factor(pl, g) for pl, g in zip(pulses, directions)]
    params = dict(prm, a_used=a)
    tr["seconds"] = time.time() - t_start
    return PeakProduct(h, d, n, factors, "lemma", _jsonable(params), tr)


def _lp_factors(H, h, directions, degree_caps=(2, 4, 8, 16, 32, 64), rounds: int = 4):
    """Block-coordinate weighted L1 fits; stops once sum_{x != h} prod |f_i(g_i(x))| < 1 exactly."""
    d = len(directions)
    mask = ~np.all(H == np.array(h), axis=1)
    rest = H[mask]
    raw = [direction_values(g, rest) for g in directions]
    keys = []
    for vals, quad in raw:
        if quad is None:
            keys.append([(int(v), 0) for v in vals])
        else:
            keys.append(list(zip((int(a) for a in quad[0]), (int(b) for b in quad[1]))))
    fvals = [[float(v) for v in vals] for vals, _ in raw]
    coeffs = [[mpq(1)] for _ in range(d)]
    absvals = [[SurdScalar.of(1)] * len(rest) for _ in range(d)]
    history = []

    def exact_eval(i, cf):
        vals, quad = raw[i]
        uniq = sorted(set(keys[i]))
        if quad is None:
            res = eval_at_integers(cf, [k[0] for k in uniq])
            table = {k: SurdScalar.of(abs(v)) for k, v in zip(uniq, res)}
        else:
            _, _, T, q = quad
            ua, ub, sc = eval_at_quadratic(cf, [k[0] for k in uniq], [k[1] for k in uniq], T, q)
            table = {k: abs(SurdScalar.of(mpq(int(a)) / sc, mpq(int(b)) / sc, T)) for k, a, b in zip(uniq, ua, ub)}
        return [table[k] for k in keys[i]]

    def total():
        s = SurdScalar.of(0)
        for j in range(len(rest)):
            t = absvals[0][j]
            for i in range(1, d):
                t = t * absvals[i][j]
            s = s + t
        return s

    best = None
    for cap in degree_caps:
        for r in range(rounds):
            for i in range(d):
                other = np.ones(len(rest))
                for j in range(d):
                    if j != i:
                        other *= np.array([float(v) for v in absvals[j]])
                groups: dict = {}
                for j, k in enumerate(keys[i]):
                    if k == (0, 0):
                        continue
                    groups.setdefault(k, [fvals[i][j], 0.0])[1] += other[j]
                if not groups:
                    continue
                pts = np.array([v[0] for v in groups.values()])
                wts = np.array([v[1] for v in groups.values()])
                deg = min(cap, len(groups))
                cf, how = lp_fit(pts, wts, deg, box=pts)
                if cf is None:
                    continue
                new = exact_eval(i, cf)
                old_sum = sum(float(a) * b for a, b in zip(absvals[i], other))
                new_sum = sum(float(a) * b for a, b in zip(new, other))
                if new_sum <= old_sum:
                    coeffs[i], absvals[i] = cf, new
            tot = total()
            history.append({"cap": cap, "round": r, "sum": float(tot)})
            if tot < 1:
                best = tot
                break
        if best is not None:
            break
    factors = [Factor(PulsePolynomial(cf, "LP", {"slack": "1", "points": len(set(keys[i]))}), g)
               for i, (cf, g) in enumerate(zip(coeffs, directions))]
    rep = {"history": history, "ok": best is not None,
           "degrees": [len(cf) - 1 for cf in coeffs]}
    if best is None:
        log.warning("LP factors did not reach a certified sum below 1")
    return factors, rep


def lp_peak_multivariate(H, n: int, max_degree: int, h=None, slack=mpq(1, 2)) -> PolyPeak:
    """Smallest total degree D <= max_degree with p(h) = 1 and sum_{x != h} |p(x)| <= slack.

    Monomials in (x - h)/n of total degree <= D; LP via HiGHS, then exact
    rational re-verification.  Raises LPInfeasible if no degree works.
    """
    from scipy.optimize import linprog
    from .pulses import LPInfeasible
    H = as_points(H)
    d = H.shape[1]
    if h is None:
        h = tuple(int(v) for v in min(map(tuple, H)))
    h = tuple(int(v) for v in h)
    rest = np.array([x for x in H if tuple(x) != h], dtype=np.int64).reshape(-1, d)
    slack = Q(slack)
    if len(rest) == 0:
        return PolyPeak(h, d, n, {(0,) * d: mpq(1)}, transcript={"degree": 0})
    Y = (rest - np.array(h)) / float(n)
    last = None
    for D in range(0, max_degree + 1):
        exps = [e for tot in range(1, D + 1) for e in _exponents(d, tot)]
        if not exps:
            total = Q(len(rest))
            last = float(total)
            if total <= slack:
                return PolyPeak(h, d, n, {(0,) * d: mpq(1)}, transcript={"degree": 0})
            continue
        V = np.stack([np.prod(Y ** np.array(e), axis=1) for e in exps], axis=1)
        m, k = len(rest), len(exps)
        # variables: c (k), s (m); p(x) = 1 + V c
        A = np.block([[V, -np.eye(m)], [-V, -np.eye(m)]])
        b = np.concatenate([-np.ones(m), np.ones(m)])
        cost = np.r_[np.zeros(k), np.ones(m)]
        res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * k + [(0, None)] * m, method="highs")
        if res.status != 0:
            continue
        terms = {(0,) * d: mpq(1)}
        for e, c in zip(exps, res.x[:k]):
            cq = mpq(*float(c).as_integer_ratio()) / mpq(n) ** sum(e)
            if cq != 0:
                terms[e] = cq
        p = PolyPeak(h, d, n, terms)
        total = sum((abs(v) for v in p.exact_values(rest)), mpq(0))
        last = float(total)
        if total <= slack:
            p.transcript = {"degree": p.degree, "exact_sum": rat_str(total), "slack": rat_str(slack)}
            return p
    raise LPInfeasible(f"no multivariate peak of degree <= {max_degree}", {"best_sum": last})


def _exponents(d: int, total: int):
    if d == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _exponents(d - 1, total - first):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# reports

def slice_sums(p: PeakProduct, H, frames=None) -> list:
    """Per slice g0 = k >= 1: sum of |p| against (4m + pi^2 - 4)^(d-1) / k^2."""
    H = as_points(H)
    g0 = p.factors[0].direction
    g0_vals, _ = direction_values(g0, H)
    m = Q(p.params.get("m", constants(p.d)[1]))
    if isinstance(p.params.get("m"), str):
        m = mpq(p.params["m"])
    pi2 = pi_upper() ** 2
    c = (4 * m + pi2 - 4) ** (p.d - 1)
    absvals = p.exact_abs_values(H)
    out = {}
    wanted = None if frames is None else {int(fr.k) for fr in frames}
    for k, v in zip(g0_vals, absvals):
        if k == 0 or (wanted is not None and k not in wanted):
            continue
        out.setdefault(int(k), SurdScalar.of(0))
        out[int(k)] = out[int(k)] + v
    if wanted is not None:
        for k in wanted:
            out.setdefault(k, SurdScalar.of(0))
    rows = []
    for k in sorted(out):
        bound = c / (k * k)
        rows.append({"k": k, "sum": float(out[k]), "bound": float(bound), "ok": out[k] < bound})
    return rows


def slice_bound(k: int, d: int, m) -> mpq:
    """(4m + pi^2 - 4)^(d-1) / k^2 with the upper rational pi."""
    return (4 * Q(m) + pi_upper() ** 2 - 4) ** (d - 1) / (k * k)


def degree_report(p) -> dict:
    if isinstance(p, PeakProduct) and not p.complete:
        est = p.transcript.get("pulse_degree_estimate")
        achieved = None if est is None else est[0] + (p.d - 1) * est[1]
        kind = "estimated"
    else:
        achieved = p.degree
        kind = "achieved"
    if p.d == 2:
        bound = planar_degree_bound(p.n)
    else:
        bound = lemma_degree_bound(p.n, p.d)
    return {"degree": achieved, "kind": kind, "bound": bound,
            "ratio": None if achieved is None else achieved / bound,
            "pass": achieved is not None and achieved <= bound}
