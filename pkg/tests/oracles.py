"""Independent reference implementations used as test oracles.

Written without touching the package internals: quantifiers are evaluated
in exact rational arithmetic, operators by explicit Python loops.
"""

from fractions import Fraction
from itertools import product


def frac(x):
    # exact: every float is a dyadic rational
    return Fraction(x)


def q2_exact(x, a, b):
    x, a, b = frac(x), frac(a), frac(b)
    if x <= 0:
        return Fraction(0)
    if x >= b:
        return Fraction(1)
    if x <= a:
        return Fraction(0)
    return (x - a) / (b - a)


def q4_exact(x, a, b, c, y_b):
    x, a, b, c, y_b = frac(x), frac(a), frac(b), frac(c), frac(y_b)
    if x <= 0:
        return Fraction(0)
    if x >= c:
        return Fraction(1)
    if x >= b:
        return (x - b) / (c - b) * (1 - y_b) + y_b
    if x <= a:
        return Fraction(0)
    return (x - a) / (b - a) * y_b


def weights_exact(n, q):
    return [q(Fraction(i, n)) - q(Fraction(i - 1, n)) for i in range(1, n + 1)]


def dynamic_c_bruteforce(accuracies):
    """Share of clients whose distance to the best is within 3/4 of the widest gap.

    Max distance is found over all pairs, the best client by a linear scan.
    """
    u = [frac(v) for v in accuracies]
    n = len(u)
    widest = max(abs(u[i] - u[j]) for i, j in product(range(n), repeat=2))
    best = u[0]
    for v in u:
        if v > best:
            best = v
    kept = sum(1 for v in u if abs(best - v) <= Fraction(3, 4) * widest)
    return Fraction(kept, n)


def induced_ranking(accuracies, ids):
    """Selection sort: highest accuracy first, smaller id first on ties."""
    remaining = list(zip(accuracies, ids))
    ranked = []
    while remaining:
        best = remaining[0]
        for cand in remaining[1:]:
            if cand[0] > best[0] or (cand[0] == best[0] and cand[1] < best[1]):
                best = cand
        ranked.append(best[1])
        remaining.remove(best)
    return ranked


def weighted_sum(vectors, weights):
    out = [0.0] * len(vectors[0])
    for vec, w in zip(vectors, weights):
        for k, v in enumerate(vec):
            out[k] += w * v
    return out


def naive_operator(name, ids, vectors, sizes, accuracies, y_b=0.75, a=0.0, b=0.2, c=0.8, mode="normalized"):
    """Reference output of each aggregation operator.

    Returns ``(vector, {id: weight})``.
    """
    n = len(ids)
    if name == "fedavg":
        w = {i: 1.0 / n for i in ids}
    elif name == "wfedavg":
        if mode == "normalized":
            total = sum(sizes)
            w = {i: s / total for i, s in zip(ids, sizes)}
        else:
            w = {i: 1.0 / s for i, s in zip(ids, sizes)}
    else:
        ranked = induced_ranking(accuracies, ids)
        if name == "al80":
            pos = weights_exact(n, lambda x: q2_exact(x, 0, Fraction(4, 5)))
        elif name == "iowa-sq":
            pos = weights_exact(n, lambda x: q4_exact(x, a, b, c, y_b))
        elif name == "iowa-dq":
            by_id = dict(zip(ids, accuracies))
            cc = dynamic_c_bruteforce([by_id[i] for i in ranked])
            bb = frac(b) * cc
            pos = weights_exact(n, lambda x: q4_exact(x, a, bb, cc, y_b))
        else:
            raise KeyError(name)
        w = {cid: float(p) for cid, p in zip(ranked, pos)}
    by_id = dict(zip(ids, vectors))
    order = list(ids)
    return weighted_sum([by_id[i] for i in order], [w[i] for i in order]), w
