"""Time the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Both backends are importable side by side regardless of
FLIOWA_DISABLE_NUMBA; the flag only picks which one the package uses.
"""

import argparse
import json
import sys
import time

import numpy as np

from fliowa import _accel
from fliowa.model import ModelSpec, init_model, minibatch_orders


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def sgd_case(hidden, n, dim, k, epochs, batch):
    rng = np.random.default_rng(0)
    spec = ModelSpec(dim, k, hidden)
    params = init_model(spec, 0).values
    X = np.ascontiguousarray(rng.normal(size=(n, dim)))
    y = rng.integers(0, k, size=n).astype(np.int64)
    orders = minibatch_orders(n, epochs, 0)
    args = (params, spec.layer_sizes, X, y, orders, 0.5, batch)
    return (lambda: _accel.sgd_epochs_numpy(*args)), (lambda: _accel.sgd_epochs_numba(*args))


def sum_case(clients, size):
    rng = np.random.default_rng(1)
    stack = np.ascontiguousarray(rng.normal(size=(clients, size)))
    order = rng.permutation(clients).astype(np.int64)
    w = rng.dirichlet(np.ones(clients))
    args = (stack, order, w)
    return (lambda: _accel.ordered_weighted_sum_numpy(*args)), (lambda: _accel.ordered_weighted_sum_numba(*args))


CASES = {
    # one client's local update at the default desk scale
    "sgd softmax d=60 n=130 5ep bs16": lambda: sgd_case((), 130, 60, 10, 5, 16),
    "sgd mlp 60-32-10 n=130 5ep bs16": lambda: sgd_case((32,), 130, 60, 10, 5, 16),
    "sgd softmax d=784 n=2000 5ep bs32": lambda: sgd_case((), 2000, 784, 10, 5, 32),
    "aggregate 20 x 610": lambda: sum_case(20, 610),
    "aggregate 50 x 7850": lambda: sum_case(50, 7850),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="also write results to this file")
    args = p.parse_args(argv)
    if not _accel._HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    rows = []
    for name, make in CASES.items():
        np_fn, nb_fn = make()
        t0 = time.perf_counter()
        nb_fn()  # compile (or load from cache)
        warmup = time.perf_counter() - t0
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat)
        rows.append(dict(case=name, numpy_s=t_np, numba_s=t_nb, speedup=t_np / t_nb, first_call_s=warmup))

    width = max(len(r["case"]) for r in rows)
    print(f"{'case':<{width}}  {'numpy ms':>9}  {'numba ms':>9}  {'speedup':>7}")
    for r in rows:
        print(f"{r['case']:<{width}}  {1e3 * r['numpy_s']:9.2f}  {1e3 * r['numba_s']:9.2f}  {r['speedup']:6.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
