"""OWA/IOWA primitives and piecewise-linear linguistic quantifiers.

A quantifier ``Q`` maps a rank fraction ``i/n`` to the cumulative weight the
top ``i`` arguments receive; position weights are its first differences.

Degenerate pieces (``a == b`` or ``b == c``) collapse to right-continuous
steps, except that ``Q(0)`` is pinned to 0 so the weights always telescope
to exactly ``Q(1) - Q(0) = 1``.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import ArityError, EmptyAggregationError, InvalidQuantifierError, ShapeError


@dataclass(frozen=True)
class QuantifierParams:
    """Parameters ``(a, b, c, y_b)`` of the four-piece dynamic quantifier.

    ``b`` is the top fraction of arguments that shares ``y_b`` of the total
    weight; arguments ranked beyond ``c`` get nothing.
    """

    a: float
    b: float
    c: float
    y_b: float

    def __post_init__(self):
        for name in ("a", "b", "c", "y_b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0.0 or v > 1.0:
                raise InvalidQuantifierError(f"{name}={v!r} outside [0, 1]")
        if not self.a <= self.b <= self.c:
            raise InvalidQuantifierError(
                f"need 0 <= a <= b <= c <= 1, got a={self.a}, b={self.b}, c={self.c}"
            )


def _check_order(a, b):
    if not (0.0 <= a <= b <= 1.0):
        raise InvalidQuantifierError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")


def _ramp(x, lo, hi):
    # right-continuous step when the piece has zero width
    if hi > lo:
        # a subnormal width overflows to inf, which the clip absorbs
        with np.errstate(over="ignore"):
            return np.clip((x - lo) / (hi - lo), 0.0, 1.0)
    return np.where(x >= lo, 1.0, 0.0)


def q_standard(x, a, b):
    """Two-parameter quantifier: 0 up to ``a``, linear to 1 at ``b``."""
    _check_order(a, b)
    xs = np.asarray(x, dtype=float)
    out = np.where(xs <= 0.0, 0.0, _ramp(xs, a, b))
    return float(out) if out.ndim == 0 else out


def q_dynamic(x, p):
    """Four-piece quantifier ``Q_{a,b,c,y_b}``.

    Rises linearly from 0 at ``a`` to ``y_b`` at ``b``, then linearly to 1 at
    ``c``.  Accepts scalars or arrays.
    """
    if not isinstance(p, QuantifierParams):
        p = QuantifierParams(*p)
    xs = np.asarray(x, dtype=float)
    upper = p.y_b + (1.0 - p.y_b) * _ramp(xs, p.b, p.c)
    lower = p.y_b * _ramp(xs, p.a, p.b)
    out = np.where(xs < p.b, lower, upper)
    # a zero-width b..c piece jumps straight to 1 at b
    out = np.where(xs >= p.c, 1.0, out)
    out = np.where(xs <= 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def standard_quantifier(a, b):
    _check_order(a, b)
    return lambda x: q_standard(x, a, b)


def dynamic_quantifier(p):
    if not isinstance(p, QuantifierParams):
        p = QuantifierParams(*p)
    return lambda x: q_dynamic(x, p)


def weights_from_quantifier(n, q):
    """Position weights ``w_i = Q(i/n) - Q((i-1)/n)`` for ``i = 1..n``."""
    if n < 1:
        raise EmptyAggregationError("cannot derive weights for zero arguments")
    grid = np.arange(n + 1, dtype=float) / n
    cumulative = np.asarray(q(grid), dtype=float)
    w = np.diff(cumulative)
    # monotone Q cannot produce negative weights; clip rounding residue
    return np.maximum(w, 0.0)


def induced_order(inducing, ids=None):
    """Indices sorting ``inducing`` descending, ties by ascending id."""
    u = np.asarray(inducing, dtype=float)
    if ids is None:
        ids = np.arange(u.shape[0])
    ids = np.asarray(ids)
    # lexsort keys are applied last-first
    return np.lexsort((ids, -u))


def iowa_aggregate(pairs, weights, ids=None):
    """Induced OWA over ``(u, vector)`` pairs.

    Vectors are ranked by their inducing value ``u`` (descending) and combined
    as ``sum_i weights[i] * v_sigma(i)``.  ``ids`` fixes the tie-break among
    equal ``u``; it defaults to list position.  Accumulation runs in rank
    order so repeated calls are bitwise identical.
    """
    pairs = list(pairs)
    w = np.asarray(weights, dtype=float)
    if len(pairs) == 0:
        raise EmptyAggregationError("no pairs to aggregate")
    if len(pairs) != w.shape[0]:
        raise ArityError(f"{len(pairs)} pairs but {w.shape[0]} weights")
    if ids is not None and len(ids) != len(pairs):
        raise ArityError(f"{len(pairs)} pairs but {len(ids)} ids")
    u = np.array([float(pair[0]) for pair in pairs])
    template = pairs[0][1]
    vecs = [np.asarray(getattr(pair[1], "values", pair[1]), dtype=float) for pair in pairs]
    shape = vecs[0].shape
    for v in vecs[1:]:
        if v.shape != shape:
            raise ShapeError(f"vector shapes differ: {shape} vs {v.shape}")
    shapes = getattr(template, "shapes", None)
    if shapes is not None and any(getattr(pair[1], "shapes", None) != shapes for pair in pairs):
        raise ShapeError("parameter vectors have different layouts")
    stack = np.ascontiguousarray(np.stack([v.ravel() for v in vecs]))
    order = induced_order(u, ids).astype(np.int64)
    out = _accel.ordered_weighted_sum(stack, order, np.ascontiguousarray(w))
    if shapes is not None:
        return type(template)(out, shapes)
    return out.reshape(shape)


def owa_aggregate(values, weights):
    """Plain OWA: arguments ordered by their own value."""
    vals = np.asarray(values, dtype=float)
    return iowa_aggregate(list(zip(vals, vals)), weights)
