"""Federated aggregation operators.

Every operator returns ``(ParamVector, AggregationReport)`` when called
through :data:`AGGREGATORS`; the accuracy-ordered operators (AL-80, IOWA-SQ,
IOWA-DQ) rank clients by their server-side validation accuracy and apply
quantifier-derived position weights.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import (
    EmptyAggregationError,
    EmptyValidationError,
    InvalidQuantifierError,
    MissingAccuracyError,
    ShapeError,
)
from .model import ParamVector, evaluate_accuracy
from .owa import QuantifierParams, q_dynamic, q_standard, weights_from_quantifier

DISCARD_THRESHOLD = 1e-12
DYNAMIC_C_FRACTION = 0.75
# accuracies are count ratios, so a gap can sit exactly on the 3/4 boundary;
# the slack stops float residue from pushing such a client out
BOUNDARY_SLACK = 1e-12


@dataclass
class ClientUpdate:
    client_id: int
    params: ParamVector
    num_samples: int
    accuracy: float | None = None

    def __post_init__(self):
        if self.client_id < 0:
            raise ValueError(f"client_id must be >= 0, got {self.client_id}")
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy must lie in [0, 1], got {self.accuracy}")


@dataclass
class AggregationReport:
    """Weights actually applied, keyed by client id."""

    weights: dict
    c_used: float | None = None
    b_effective: float | None = None
    discarded_ids: frozenset = field(default_factory=frozenset)

    def weight_vector(self, ids=None):
        ids = sorted(self.weights) if ids is None else ids
        return np.array([self.weights[i] for i in ids])


def f_la(params, validation, model_spec):
    """Accuracy of uploaded parameters on the server's validation set."""
    if validation is None or len(validation) == 0:
        raise EmptyValidationError("validation set is empty")
    return evaluate_accuracy(params, model_spec, validation)


def _check_batch(updates):
    updates = list(updates)
    if not updates:
        raise EmptyAggregationError("no client updates to aggregate")
    shapes = updates[0].params.shapes
    size = updates[0].params.size
    for upd in updates[1:]:
        if upd.params.shapes != shapes or upd.params.size != size:
            raise ShapeError(
                f"client {upd.client_id} parameters {upd.params.shapes} differ from {shapes}"
            )
    ids = [upd.client_id for upd in updates]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate client ids in batch: {ids}")
    return updates


def order_by_accuracy(updates):
    """Client ids sorted by accuracy descending, ties by ascending id."""
    updates = list(updates)
    missing = [u.client_id for u in updates if u.accuracy is None]
    if missing:
        raise MissingAccuracyError(f"clients without accuracy: {missing}")
    ranked = sorted(updates, key=lambda u: (-u.accuracy, u.client_id))
    return [u.client_id for u in ranked]


def compute_dynamic_c(sorted_accuracies):
    """Fraction of clients within 3/4 of the max accuracy gap of the best one.

    With scalar accuracies sorted descending, the largest pairwise distance
    is ``u[0] - u[-1]``.
    """
    u = np.asarray(sorted_accuracies, dtype=float)
    if u.size == 0:
        raise EmptyAggregationError("no accuracies to compute c from")
    if np.any(np.diff(u) > 0):
        raise ValueError("accuracies must be sorted in non-increasing order")
    threshold = DYNAMIC_C_FRACTION * (u[0] - u[-1])
    kept = int(np.count_nonzero((u[0] - u) <= threshold + BOUNDARY_SLACK))
    return kept / u.size


def _combine(updates, ids, weights, c_used=None, b_effective=None):
    """Weighted sum of ``updates`` taken in the order ``ids`` with ``weights``."""
    by_id = {u.client_id: u for u in updates}
    stack = np.ascontiguousarray(np.stack([u.params.values for u in updates]))
    row_of = {u.client_id: row for row, u in enumerate(updates)}
    order = np.array([row_of[i] for i in ids], dtype=np.int64)
    w = np.ascontiguousarray(weights, dtype=float)
    values = _accel.ordered_weighted_sum(stack, order, w)
    report = AggregationReport(
        weights={int(i): float(wi) for i, wi in zip(ids, w)},
        c_used=c_used,
        b_effective=b_effective,
        discarded_ids=frozenset(int(i) for i, wi in zip(ids, w) if wi < DISCARD_THRESHOLD),
    )
    return ParamVector(values, by_id[ids[0]].params.shapes), report


def fed_avg_report(updates):
    updates = _check_batch(updates)
    n = len(updates)
    ids = [u.client_id for u in updates]
    return _combine(updates, ids, np.full(n, 1.0 / n))


def fed_avg(updates):
    """Plain coordinate-wise mean of the client parameters."""
    return fed_avg_report(updates)[0]


def w_fed_avg_report(updates, mode="normalized"):
    updates = _check_batch(updates)
    ids = [u.client_id for u in updates]
    n_i = np.array([u.num_samples for u in updates], dtype=float)
    if mode == "normalized":
        w = n_i / n_i.sum()
    elif mode == "as-written":
        # sum_i theta_i / n_i, deliberately not a convex combination
        w = 1.0 / n_i
    else:
        raise ValueError(f"unknown W-FedAvg mode {mode!r}")
    return _combine(updates, ids, w)


def w_fed_avg(updates, mode="normalized"):
    """Sample-count weighted average.

    ``normalized`` weights client ``i`` by ``n_i / sum(n)``; ``as-written``
    divides each parameter vector by its own ``n_i`` and sums without
    renormalising.
    """
    return w_fed_avg_report(updates, mode)[0]


def _ordered(updates, weights, **extra):
    ids = order_by_accuracy(updates)
    return _combine(updates, ids, weights, **extra)


def al80(updates):
    """IOWA "at least 80%": weights from ``Q_{0, 0.8}`` in accuracy order."""
    updates = _check_batch(updates)
    n = len(updates)
    w = weights_from_quantifier(n, lambda x: q_standard(x, 0.0, 0.8))
    return _ordered(updates, w)


def iowa_sq(updates, p):
    """IOWA with a fixed four-piece quantifier ``p``."""
    updates = _check_batch(updates)
    if not isinstance(p, QuantifierParams):
        p = QuantifierParams(*p)
    w = weights_from_quantifier(len(updates), lambda x: q_dynamic(x, p))
    return _ordered(updates, w, c_used=p.c, b_effective=p.b)


def iowa_dq(updates, a=0.0, b=0.2, y_b=0.75, c_override=None):
    """IOWA with a dynamic quantifier.

    ``c`` is recomputed from the accuracy spread of this batch (or taken from
    ``c_override``) and ``b`` is rescaled to ``b * c`` so the top-weighted
    group stays a fixed share of the retained clients.
    """
    updates = _check_batch(updates)
    if not (0.0 <= a <= b <= 1.0):
        raise InvalidQuantifierError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")
    if not 0.0 <= y_b <= 1.0:
        raise InvalidQuantifierError(f"y_b={y_b} outside [0, 1]")
    ids = order_by_accuracy(updates)
    if c_override is None:
        acc = {u.client_id: u.accuracy for u in updates}
        c = compute_dynamic_c([acc[i] for i in ids])
    else:
        c = float(c_override)
    b_eff = b * c
    if b_eff < a:
        raise InvalidQuantifierError(f"scaled b'={b_eff} fell below a={a}")
    p = QuantifierParams(a, b_eff, c, y_b)
    w = weights_from_quantifier(len(updates), lambda x: q_dynamic(x, p))
    return _combine(updates, ids, w, c_used=c, b_effective=b_eff)


# ---------------------------------------------------------------------------
# name-based dispatch used by the federation loop and the CLI
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregatorConfig:
    name: str = "iowa-dq"
    a: float = 0.0
    b: float = 0.2
    c: float = 0.8
    y_b: float = 0.75
    wfedavg_mode: str = "normalized"

    def __post_init__(self):
        if self.name not in AGGREGATORS:
            raise ValueError(f"unknown aggregator {self.name!r}; choose from {sorted(AGGREGATORS)}")
        if self.wfedavg_mode not in ("normalized", "as-written"):
            raise ValueError(f"unknown W-FedAvg mode {self.wfedavg_mode!r}")
        if self.name == "iowa-sq":
            QuantifierParams(self.a, self.b, self.c, self.y_b)
        elif self.name == "iowa-dq" and not (0.0 <= self.a <= self.b <= 1.0 and 0.0 <= self.y_b <= 1.0):
            raise InvalidQuantifierError(f"invalid IOWA-DQ parameters a={self.a}, b={self.b}, y_b={self.y_b}")

    @property
    def label(self):
        if self.name in ("iowa-sq", "iowa-dq"):
            return f"{self.name}-{self.y_b:g}"
        if self.name == "wfedavg" and self.wfedavg_mode != "normalized":
            return f"wfedavg-{self.wfedavg_mode}"
        return self.name

    def __call__(self, updates):
        if self.name == "fedavg":
            return fed_avg_report(updates)
        if self.name == "wfedavg":
            return w_fed_avg_report(updates, self.wfedavg_mode)
        if self.name == "al80":
            return al80(updates)
        if self.name == "iowa-sq":
            return iowa_sq(updates, QuantifierParams(self.a, self.b, self.c, self.y_b))
        return iowa_dq(updates, self.a, self.b, self.y_b)


AGGREGATORS = ("fedavg", "wfedavg", "al80", "iowa-sq", "iowa-dq")
USES_ACCURACY = frozenset({"al80", "iowa-sq", "iowa-dq"})
