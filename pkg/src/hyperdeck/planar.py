"""Planar peak polynomials: convex hull, primitive directions, p = f(g1) f(g2)."""

from __future__ import annotations

import math
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from gmpy2 import mpq

from . import lattice as lat
from .lattice import BudgetError
from .peak import Factor, PeakProduct, as_points, degree_report, verify_peak, _jsonable
from .pulses import build_fk, fk_degree_bound

T_DEFAULT = 1.001


class NotFound(RuntimeError):
    pass


@dataclass
class HullData:
    vertices: list          # counter-clockwise, starting at the lexicographically smallest point
    edges: list             # (start, end) pairs
    primitive_edges: list   # (primitive vector, multiplicity) per edge

    def to_json(self):
        return {"vertices": [list(v) for v in self.vertices],
                "edges": [[list(a), list(b)] for a, b in self.edges],
                "primitive_edges": [[list(u), k] for u, k in self.primitive_edges]}


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(H) -> HullData:
    """Monotone chain hull with collinear points dropped."""
    pts = sorted(set((int(x), int(y)) for x, y in np.asarray(H).reshape(-1, 2)))
    if not pts:
        raise ValueError("H must be nonempty")
    if len(pts) <= 2:
        verts = pts
    else:
        lower, upper = [], []
        for p in pts:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        for p in reversed(pts):
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
                upper.pop()
            upper.append(p)
        verts = lower[:-1] + upper[:-1]
    if len(verts) == 1:
        edges = []
    elif len(verts) == 2:
        edges = [(verts[0], verts[1]), (verts[1], verts[0])]
    else:
        edges = [(verts[i], verts[(i + 1) % len(verts)]) for i in range(len(verts))]
    prim = []
    for a, b in edges:
        dx, dy = b[0] - a[0], b[1] - a[1]
        g = math.gcd(dx, dy)
        prim.append(((dx // g, dy // g), g))
    return HullData(verts, edges, prim)


def primitive_edge_stats(R) -> dict:
    """N(R) = #primitive vectors with norm <= R, l(R) = sum of their norms.

    Each norm is a correctly rounded float; the absolute error of the sum is
    bounded by count * max_norm * 2^-52 (reported).
    """
    P = lat.primitive_points(R, 2)
    norms = np.sqrt((P * P).sum(1).astype(np.float64))
    total = math.fsum(norms.tolist())
    err = len(P) * (float(norms.max()) if len(P) else 0.0) * 2.0 ** -52
    return {"R": float(R), "count": int(len(P)), "length": total, "length_error": err}


def _by_norm_lex(P: np.ndarray) -> np.ndarray:
    norms = (P * P).sum(1)
    return P[np.lexsort((P[:, 1], P[:, 0], norms))]


@dataclass
class SupportTriple:
    a: tuple
    level: int      # min over H of a . x
    h: tuple
    edge: bool      # the line contains a hull edge

    def to_json(self):
        return {"a": list(self.a), "level": self.level, "h": list(self.h), "edge": self.edge}


@dataclass
class TwoDirections:
    h: tuple
    u1: tuple
    u2: tuple
    triples: list
    multiplicity: dict
    R: float


def support_triples(hull: HullData, P: np.ndarray) -> list:
    V = np.asarray(hull.vertices, dtype=np.int64)
    vals = P @ V.T
    mins = vals.min(1)
    out = []
    for j in range(len(P)):
        touch = np.nonzero(vals[j] == mins[j])[0]
        h = min(tuple(int(v) for v in V[t]) for t in touch)
        out.append(SupportTriple(tuple(int(v) for v in P[j]), int(mins[j]), h, len(touch) > 1))
    return out


def two_directions(H, R) -> TwoDirections:
    """Vertex h with >= 4 support triples, two of them touching only h.

    Raises NotFound when no vertex qualifies at this R.
    """
    H = as_points(H)
    hull = convex_hull(H)
    if len(hull.vertices) == 1:
        h = hull.vertices[0]
        return TwoDirections(h, (1, 0), (0, 1), [], {}, float(R))
    if R < 1:
        raise NotFound(f"no primitive directions at R = {R}")
    P = _by_norm_lex(lat.primitive_points(R, 2))
    triples = support_triples(hull, P)
    per: dict = {}
    for t in triples:
        per.setdefault(t.h, []).append(t)
    mult = Counter(len(v) for v in per.values())
    for h in sorted(per):
        ts = per[h]
        strict = [t for t in ts if not t.edge]
        if len(ts) < 4 or len(strict) < 2:
            continue
        u1 = strict[0].a
        u2 = next((t.a for t in strict[1:] if u1[0] * t.a[1] - u1[1] * t.a[0] != 0), None)
        if u2 is None:
            continue
        return TwoDirections(h, u1, u2, triples, dict(mult), float(R))
    raise NotFound(f"no vertex with two strict supporting directions at R = {R}")


def planar_R(n: int, t: float = T_DEFAULT) -> float:
    return math.sqrt(3) * t * (math.pi * n) ** (1 / 3)


def grid_top(n: int, R: float) -> int:
    """floor(sqrt(2) n R), i.e. N + 1."""
    with mpmath.workdps(50):
        return int(mpmath.floor(mpmath.sqrt(2) * n * mpmath.mpf(R)))


def construct_peak_2(H, n: int, t: float = T_DEFAULT, verify: bool = True) -> PeakProduct:
    """p = f(u1.(x-h)) f(u2.(x-h)) with f = build_fk(N), N + 1 = floor(sqrt(2) n R)."""
    t0 = time.time()
    H = as_points(H)
    if H.shape[1] != 2:
        raise ValueError("points must be planar")
    if H.min() < 1 or H.max() > n:
        raise ValueError("points must lie in [n]^2")
    hull = convex_hull(H)
    R = planar_R(n, t)
    escalations = 0
    while True:
        try:
            td = two_directions(H, R)
            break
        except NotFound:
            R *= 2
            escalations += 1
            if escalations > 20:
                raise
    h = tuple(td.h)
    g1 = lat.integral_direction(td.u1, h)
    g2 = lat.integral_direction(td.u2, h)
    rest = H[~np.all(H == np.array(h), axis=1)]
    v1 = (rest - np.array(h)) @ np.array(td.u1)
    v2 = (rest - np.array(h)) @ np.array(td.u2)
    top = grid_top(n, R)
    in_range = bool(len(rest) == 0 or (v1.min() > 0 and v2.min() > 0 and v1.max() <= top and v2.max() <= top))
    pairs = set(zip(v1.tolist(), v2.tolist()))
    injective = len(pairs) == len(rest)
    N = max(top - 1, 1)
    f = build_fk(N)
    count = len(lat.primitive_points(R, 2)) if len(hull.vertices) > 1 else 0
    edge_ok = all(math.gcd(*u) == 1 and k >= 1 for u, k in hull.primitive_edges)
    tr = {"R": R, "t": t, "escalations": escalations, "N": N, "N_R": count,
          "hull_vertices": len(hull.vertices),
          "pigeonhole": count > 3 * len(hull.vertices) if len(hull.vertices) > 1 else True,
          "triple_multiplicity": {str(k): v for k, v in sorted(td.multiplicity.items())},
          "u1": list(td.u1), "u2": list(td.u2), "values_in_range": in_range,
          "rho_injective": injective, "edge_decomposition_ok": edge_ok,
          "fk_degree": f.degree, "fk_bound": fk_degree_bound(N)}
    p = PeakProduct(h, 2, n, [Factor(f, g1), Factor(f, g2)], "planar", {"R": R, "N": N}, tr)
    tr["degree"] = degree_report(p)
    if verify:
        tr["verdict"] = verify_peak(p, H).to_json()
    tr["seconds"] = time.time() - t0
    p.transcript = _jsonable(tr)
    return p


def extremal_polygon(n: int) -> np.ndarray:
    """Vertices of a convex lattice polygon in [n]^2 with many vertices.

    Edges are all primitive vectors up to a radius, sorted by angle, with the
    radius chosen as large as fits; used as an adversarial hull-size input.
    """
    best = None
    r = 1
    while True:
        P = lat.primitive_points(r, 2)
        ang = np.arctan2(P[:, 1], P[:, 0])
        E = P[np.argsort(ang, kind="stable")]
        pts = np.cumsum(E, axis=0)
        pts = pts - pts.min(0) + 1
        if pts.max() > n:
            break
        best = pts
        r += 1
    return best
