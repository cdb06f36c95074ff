"""Command line front end; every subcommand prints one JSON report on stdout."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import hypermatrix as hm
from . import oracle
from .lattice import BudgetError, ConstructionError
from .pulses import LPInfeasible

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


def read_points(path: str, d: int, n: int) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != d:
                raise UsageError(f"{path}:{lineno}: expected {d} integers, got {len(parts)}")
            try:
                pt = [int(v) for v in parts]
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not an integer point") from None
            if any(v < 1 or v > n for v in pt):
                raise UsageError(f"{path}:{lineno}: coordinate outside [1, {n}]")
            rows.append(pt)
    if not rows:
        raise UsageError(f"{path}: empty point set")
    return np.array(rows, dtype=np.int64)


def _digest(args, paths=()) -> str:
    h = hashlib.sha256()
    for k, v in sorted(vars(args).items()):
        if k not in ("func", "jobs", "out"):
            h.update(f"{k}={v};".encode())
    for p in paths:
        if p:
            with open(p, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def _read_hm(path: str) -> hm.Hypermatrix:
    try:
        with open(path) as fh:
            return hm.read_hypermatrix(fh.read())
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from None


def _mode(s: str) -> str:
    return {"full": hm.FULL, "principal": hm.PRINCIPAL}[s]


# ---------------------------------------------------------------------------
# subcommands; each returns (outcomes, ok)

def cmd_deck(args):
    A = _read_hm(args.input)
    D = hm.deck(A, args.k, _mode(args.mode))
    return {"k": D.k, "mode": D.mode, "d": D.d, "members": D.total(),
            "entries": dict(sorted(D.entries.items()))}, True


def cmd_sum(args):
    A = _read_hm(args.input)
    if args.route == "direct":
        S = hm.sum_deck_direct(A, args.k, _mode(args.mode))
    else:
        S = hm.sum_deck(A, args.k, _mode(args.mode))
    return S.to_json(), True


def cmd_collide(args):
    pair = oracle.find_collision(args.n, args.d, args.k, args.mode, args.budget, args.seed)
    out = {"n": args.n, "d": args.d, "k": args.k, "mode": args.mode, "collision": pair is not None}
    if pair:
        out["pair"] = [pair[0].bits(), pair[1].bits()]
    return out, True


def cmd_kappa(args):
    res = oracle.kappa_exact(args.n, args.d, args.mode)
    out = res.to_json()
    out["seed"] = args.seed
    return out, True


def cmd_threshold(args):
    k = oracle.counting_threshold(args.n, args.d, args.mode)
    holds = oracle.counting_inequality(args.n, args.d, k, args.mode) if k >= 1 else True
    return {"n": args.n, "d": args.d, "mode": args.mode, "threshold": k, "inequality_holds": holds}, holds


def _construct(H, n, d, args):
    from . import peak, planar
    if d == 2:
        p = planar.construct_peak_2(H, n, t=args.t)
        v = p.transcript["verdict"]
        return p, v
    p = peak.construct_peak_d(H, n, d, mode=args.lemma_mode, seed=args.seed,
                              max_pulse_degree=args.max_pulse_degree)
    if getattr(p, "complete", True):
        v = peak.verify_peak(p, H).to_json()
    else:
        v = {"status": "UNDECIDED", "method": "none", "reason": "pulses not built (degree above cap)"}
    p.transcript["verdict"] = v
    return p, v


def cmd_construct(args):
    H = read_points(args.input, args.d, args.n)
    p, v = _construct(H, args.n, args.d, args)
    obj = p.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(obj, fh)
    return {"peak": obj, "verdict": v}, v["status"] == "CERTIFIED"


def cmd_planar(args):
    from . import planar
    H = read_points(args.input, 2, args.n)
    p = planar.construct_peak_2(H, args.n, t=args.t)
    hull = planar.convex_hull(H)
    obj = p.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(obj, fh)
    v = p.transcript["verdict"]
    return {"peak": obj, "hull": hull.to_json(), "verdict": v}, v["status"] == "CERTIFIED"


def cmd_verify(args):
    from . import peak
    with open(args.peak) as fh:
        obj = json.load(fh)
    p = peak.peak_from_json(obj)
    if isinstance(p, peak.PeakProduct) and not p.complete:
        raise UsageError("peak file has no pulses to evaluate")
    H = read_points(args.input, p.d, p.n)
    v = peak.verify_peak(p, H, method=args.method)
    return {"verdict": v.to_json(), "degree": p.degree}, v.certified


def _survey_one(job):
    n, d, size, seed, mode = job
    from . import peak, planar
    rng = np.random.default_rng(seed)
    H = rng.integers(1, n + 1, (size, d))
    t = time.time()
    if d == 2:
        p = planar.construct_peak_2(H, n)
        tr = p.transcript
        return {"seed": seed, "status": tr["verdict"]["status"], "degree": tr["degree"]["degree"],
                "degree_pass": tr["degree"]["pass"], "escalations": tr["escalations"],
                "hull_vertices": tr["hull_vertices"], "seconds": time.time() - t}
    if mode == "lp":
        p = peak.construct_peak_d(H, n, d, mode="lp")
        v = peak.verify_peak(p, H)
        tr = p.transcript
        return {"seed": seed, "status": v.status, "degree": p.degree,
                "invariants_ok": bool(tr["rotation"]["ok"] and tr["property_b"]["ok"] and tr["property_c"]["ok"]),
                "property_a_ok": tr["property_a"]["ok"], "seconds": time.time() - t}
    rep = peak.invariant_suite(H, n, d)
    ok = bool(rep["rotation"]["ok"] and rep["property_b"]["ok"] and rep["property_c"]["ok"] and rep["heights_ok"])
    return {"seed": seed, "status": "INVARIANTS_OK" if ok else "INVARIANTS_FAILED",
            "property_a_ok": rep["property_a"]["ok"], "mahler_ok": rep["mahler_ok"],
            "seconds": time.time() - t}


def cmd_survey(args):
    jobs = [(args.n, args.d, args.size, args.seed + i, args.lemma_mode) for i in range(args.runs)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_survey_one, jobs))
    else:
        rows = [_survey_one(j) for j in jobs]
    good = {"CERTIFIED", "INVARIANTS_OK"}
    statuses = {}
    for r in rows:
        statuses[r["status"]] = statuses.get(r["status"], 0) + 1
    summary = {"runs": len(rows), "status_counts": statuses,
               "success_rate": sum(r["status"] in good for r in rows) / max(len(rows), 1)}
    degs = [r["degree"] for r in rows if r.get("degree") is not None]
    if degs:
        summary["degree"] = {"min": min(degs), "max": max(degs), "mean": float(np.mean(degs))}
    return {"n": args.n, "d": args.d, "size": args.size, "summary": summary, "runs": rows}, \
        all(r["status"] in good for r in rows)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperdeck", description=__doc__)
    ap.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for batch work")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        return p

    p = add("deck", cmd_deck, "k-deck multiset of a hypermatrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=["full", "principal"], default="full")

    p = add("sum", cmd_sum, "sum deck S_k of a hypermatrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=["full", "principal"], default="full")
    p.add_argument("--route", choices=["formula", "direct"], default="formula")

    p = add("collide", cmd_collide, "search two hypermatrices with equal images")
    for a in ("--n", "--d", "--k"):
        p.add_argument(a, type=int, required=True)
    p.add_argument("--mode", choices=oracle.MODES, default="sum")
    p.add_argument("--budget", type=int, default=10**5)

    p = add("kappa", cmd_kappa, "exhaustive kappa for a tiny (n, d)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=oracle.MODES, default="sum")

    p = add("threshold", cmd_threshold, "counting-bound threshold k")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=["sum", "principal-sum"], default="sum")

    for name, func, help_ in (("construct", cmd_construct, "build and certify a peak polynomial"),):
        p = add(name, func, help_)
        p.add_argument("--in", dest="input", required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--d", type=int, required=True)
        p.add_argument("--mode", dest="lemma_mode", choices=["lemma", "lp"], default="lp")
        p.add_argument("--t", type=float, default=1.001)
        p.add_argument("--max-pulse-degree", type=int, default=3000)
        p.add_argument("--out")

    p = add("planar", cmd_planar, "planar peak with hull report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, default=1.001)
    p.add_argument("--out")

    p = add("verify", cmd_verify, "re-verify a serialized peak on a point set")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--peak", required=True)
    p.add_argument("--method", choices=["auto", "exact", "interval"], default="auto")

    p = add("survey", cmd_survey, "batch runs on random point sets")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--size", type=int, default=200)
    p.add_argument("--mode", dest="lemma_mode", choices=["lemma", "lp"], default="lp")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        if e.code in (0, None):
            return EXIT_OK
        print(json.dumps({"error": {"type": "usage", "message": "invalid arguments"}}))
        return EXIT_ERROR
    t0 = time.time()
    paths = [getattr(args, "input", None), getattr(args, "peak", None)]
    try:
        digest = _digest(args, paths)
        outcomes, ok = args.func(args)
    except (UsageError, ValueError, FileNotFoundError, ConstructionError, BudgetError, LPInfeasible,
            hm.DeckSizeError) as e:
        print(json.dumps({"error": {"type": type(e).__name__, "message": str(e)},
                          "subcommand": args.command}))
        return EXIT_ERROR
    report = {"subcommand": args.command, "inputs_digest": digest, "seed": args.seed,
              "outcomes": outcomes, "timings": {"seconds": round(time.time() - t0, 3)}}
    print(json.dumps(report, default=str))
    return EXIT_OK if ok else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
