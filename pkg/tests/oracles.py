"""Independent brute-force oracles written with plain Python only (no package code)."""

import itertools
from collections import Counter


def all_arrays(n, d):
    cells = list(itertools.product(range(n), repeat=d))
    for bits in itertools.product((0, 1), repeat=len(cells)):
        yield dict(zip(cells, bits))


def sub_entries(arr, d, subsets):
    """Row-major tuple of the sub-array picked by one index subset per axis."""
    return tuple(arr[cell] for cell in itertools.product(*subsets))


def deck_multiset(arr, n, d, k, principal):
    subs = list(itertools.combinations(range(n), k))
    out = Counter()
    if principal:
        for s in subs:
            out[sub_entries(arr, d, [s] * d)] += 1
    else:
        for choice in itertools.product(subs, repeat=d):
            out[sub_entries(arr, d, choice)] += 1
    return out


def sum_of_deck(arr, n, d, k, principal):
    m = deck_multiset(arr, n, d, k, principal)
    total = [0] * (k**d)
    for key, mult in m.items():
        for j, v in enumerate(key):
            total[j] += mult * v
    return tuple(total)


def image(arr, n, d, k, mode):
    principal = mode.startswith("principal")
    if mode.endswith("deck"):
        return frozenset(deck_multiset(arr, n, d, k, principal).items())
    return sum_of_deck(arr, n, d, k, principal)


def kappa(n, d, mode):
    arrays = list(all_arrays(n, d))
    for k in range(1, n + 1):
        seen = set()
        ok = True
        for arr in arrays:
            key = image(arr, n, d, k, mode)
            if key in seen:
                ok = False
                break
            seen.add(key)
        if ok:
            return k
    return None


def kernel_ball(a, radius):
    """Nonzero integer x with |x| < radius and a.x = 0, by scanning the cube."""
    r = int(radius)
    out = []
    for x in itertools.product(range(-r, r + 1), repeat=len(a)):
        if any(x) and sum(v * v for v in x) < radius * radius and sum(p * q for p, q in zip(a, x)) == 0:
            out.append(x)
    return out


if __name__ == "__main__":
    modes = ("deck", "principal-deck", "sum", "principal-sum")
    for d, ns in ((1, range(1, 8)), (2, range(1, 4))):
        for n in ns:
            print((d, n), {m: kappa(n, d, m) for m in modes})
