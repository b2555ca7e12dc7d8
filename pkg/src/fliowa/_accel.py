"""Hot numeric kernels with an optional numba backend.

Set ``FLIOWA_DISABLE_NUMBA=1`` before import to force the pure-numpy path.
Both backends consume identical inputs (including the precomputed minibatch
orders), so they visit the same samples in the same sequence; they can still
differ in the last bits because BLAS and loop reductions sum in different
orders.
"""

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

_DISABLED = os.environ.get("FLIOWA_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

USE_NUMBA = _HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

PROB_FLOOR = 1e-12


def _layer_offsets(layer_sizes):
    n_layers = layer_sizes.shape[0] - 1
    w_off = np.empty(n_layers, np.int64)
    b_off = np.empty(n_layers, np.int64)
    off = 0
    for layer in range(n_layers):
        m = layer_sizes[layer]
        k = layer_sizes[layer + 1]
        w_off[layer] = off
        off += m * k
        b_off[layer] = off
        off += k
    return w_off, b_off


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------


def _loss_grad_numpy(params, layer_sizes, w_off, b_off, xb, yb, grad):
    n_layers = w_off.shape[0]
    bs = xb.shape[0]
    acts = [xb]
    weights = []
    h = xb
    for layer in range(n_layers):
        m, k = layer_sizes[layer], layer_sizes[layer + 1]
        W = params[w_off[layer]:w_off[layer] + m * k].reshape(m, k)
        b = params[b_off[layer]:b_off[layer] + k]
        weights.append(W)
        z = h @ W + b
        if layer < n_layers - 1:
            z = np.maximum(z, 0.0)
        acts.append(z)
        h = z
    z = h - h.max(axis=1, keepdims=True)
    e = np.exp(z)
    probs = e / e.sum(axis=1, keepdims=True)
    rows = np.arange(bs)
    loss = -np.mean(np.log(np.maximum(probs[rows, yb], PROB_FLOOR)))

    delta = probs
    delta[rows, yb] -= 1.0
    delta /= bs
    for layer in range(n_layers - 1, -1, -1):
        m, k = layer_sizes[layer], layer_sizes[layer + 1]
        grad[w_off[layer]:w_off[layer] + m * k] = (acts[layer].T @ delta).ravel()
        grad[b_off[layer]:b_off[layer] + k] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (acts[layer] > 0.0)
    return loss


def loss_grad_numpy(params, layer_sizes, xb, yb):
    w_off, b_off = _layer_offsets(layer_sizes)
    grad = np.empty_like(params)
    loss = _loss_grad_numpy(params, layer_sizes, w_off, b_off, xb, yb, grad)
    return loss, grad


def sgd_epochs_numpy(flat, layer_sizes, X, y, orders, lr, batch_size):
    params = flat.copy()
    w_off, b_off = _layer_offsets(layer_sizes)
    grad = np.empty_like(params)
    n = X.shape[0]
    losses = np.zeros(orders.shape[0])
    for epoch in range(orders.shape[0]):
        total = 0.0
        for start in range(0, n, batch_size):
            idx = orders[epoch, start:start + batch_size]
            loss = _loss_grad_numpy(params, layer_sizes, w_off, b_off, X[idx], y[idx], grad)
            total += loss * idx.shape[0]
            params -= lr * grad
        losses[epoch] = total / n
        if not np.isfinite(losses[epoch]):
            break
    return params, losses


def ordered_weighted_sum_numpy(stack, order, weights):
    out = np.zeros(stack.shape[1])
    for rank in range(order.shape[0]):
        out += weights[rank] * stack[order[rank]]
    return out


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:
    _layer_offsets_nb = njit(cache=True)(_layer_offsets)

    @njit(cache=True)
    def _loss_grad_nb(params, layer_sizes, w_off, b_off, xb, yb, grad):
        n_layers = w_off.shape[0]
        bs = xb.shape[0]
        acts = [xb]
        h = xb
        for layer in range(n_layers):
            m = layer_sizes[layer]
            k = layer_sizes[layer + 1]
            W = params[w_off[layer]:w_off[layer] + m * k].reshape((m, k))
            b = params[b_off[layer]:b_off[layer] + k]
            z = h @ W
            relu = layer < n_layers - 1
            for i in range(bs):
                for j in range(k):
                    v = z[i, j] + b[j]
                    if relu and v < 0.0:
                        v = 0.0
                    z[i, j] = v
            acts.append(z)
            h = z

        k = h.shape[1]
        delta = np.empty((bs, k))
        loss = 0.0
        for i in range(bs):
            zmax = h[i, 0]
            for j in range(1, k):
                if h[i, j] > zmax:
                    zmax = h[i, j]
            s = 0.0
            for j in range(k):
                delta[i, j] = np.exp(h[i, j] - zmax)
                s += delta[i, j]
            for j in range(k):
                delta[i, j] /= s
            p = delta[i, yb[i]]
            if p < PROB_FLOOR:
                p = PROB_FLOOR
            loss -= np.log(p)
            delta[i, yb[i]] -= 1.0
            for j in range(k):
                delta[i, j] /= bs
        loss /= bs

        for layer in range(n_layers - 1, -1, -1):
            m = layer_sizes[layer]
            k = layer_sizes[layer + 1]
            gW = acts[layer].T @ delta
            o = w_off[layer]
            for r in range(m):
                for c in range(k):
                    grad[o] = gW[r, c]
                    o += 1
            o = b_off[layer]
            for c in range(k):
                s = 0.0
                for i in range(bs):
                    s += delta[i, c]
                grad[o + c] = s
            if layer > 0:
                W = params[w_off[layer]:w_off[layer] + m * k].reshape((m, k))
                prev = acts[layer]
                delta = delta @ W.T
                for i in range(bs):
                    for j in range(m):
                        if prev[i, j] <= 0.0:
                            delta[i, j] = 0.0
        return loss

    @njit(cache=True)
    def loss_grad_numba(params, layer_sizes, xb, yb):
        w_off, b_off = _layer_offsets_nb(layer_sizes)
        grad = np.empty_like(params)
        loss = _loss_grad_nb(params, layer_sizes, w_off, b_off, xb, yb, grad)
        return loss, grad

    @njit(cache=True, nogil=True)
    def sgd_epochs_numba(flat, layer_sizes, X, y, orders, lr, batch_size):
        params = flat.copy()
        w_off, b_off = _layer_offsets_nb(layer_sizes)
        grad = np.empty_like(params)
        n = X.shape[0]
        d = X.shape[1]
        losses = np.zeros(orders.shape[0])
        for epoch in range(orders.shape[0]):
            total = 0.0
            for start in range(0, n, batch_size):
                stop = min(start + batch_size, n)
                bs = stop - start
                xb = np.empty((bs, d))
                yb = np.empty(bs, np.int64)
                for i in range(bs):
                    src = orders[epoch, start + i]
                    yb[i] = y[src]
                    for j in range(d):
                        xb[i, j] = X[src, j]
                loss = _loss_grad_nb(params, layer_sizes, w_off, b_off, xb, yb, grad)
                total += loss * bs
                for j in range(params.shape[0]):
                    params[j] -= lr * grad[j]
            losses[epoch] = total / n
            if not np.isfinite(losses[epoch]):
                break
        return params, losses

    @njit(cache=True, nogil=True)
    def ordered_weighted_sum_numba(stack, order, weights):
        d = stack.shape[1]
        out = np.zeros(d)
        for rank in range(order.shape[0]):
            w = weights[rank]
            row = order[rank]
            for j in range(d):
                out[j] += w * stack[row, j]
        return out

else:  # pragma: no cover
    loss_grad_numba = sgd_epochs_numba = ordered_weighted_sum_numba = None


if USE_NUMBA:
    loss_grad = loss_grad_numba
    sgd_epochs = sgd_epochs_numba
    ordered_weighted_sum = ordered_weighted_sum_numba
else:
    loss_grad = loss_grad_numpy
    sgd_epochs = sgd_epochs_numpy
    ordered_weighted_sum = ordered_weighted_sum_numpy
