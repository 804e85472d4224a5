"""Shared test utilities: fixture builders and independent oracles."""

from __future__ import annotations

import math

import numpy as np

from breathgan.data import APNEIC, NON_APNEIC, Recording, Window
from breathgan import autodiff as ad


def make_recording(
    rec_id="r0",
    sample_rate_hz=1,
    window_seconds=60,
    n_windows=4,
    labels=None,
    fill=None,
    seed=0,
):
    """Recording with optional explicit labels or sample fill values."""
    rng = np.random.default_rng(seed)
    n = n_windows * window_seconds * sample_rate_hz
    samples = rng.uniform(-1.0, 1.0, n) if fill is None else np.asarray(fill, dtype=float)
    if labels is None:
        labels = [APNEIC if i % 2 == 0 else NON_APNEIC for i in range(n_windows)]
    return Recording(rec_id, sample_rate_hz, window_seconds, samples, labels)


def make_windows(n, length=12, label=APNEIC, rec_id="w", seed=0, offset=0.0):
    rng = np.random.default_rng(seed)
    return [
        Window(rec_id, i, rng.uniform(-1, 1, length) + offset, label) for i in range(n)
    ]


def mmd2_double_loop(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """Independent O(n^2) scalar-loop unbiased MMD^2 oracle."""

    def k(a, b):
        return math.exp(-float(np.sum((a - b) ** 2)) / (2.0 * sigma * sigma))

    m, n = len(x), len(y)
    sx = sum(k(x[i], x[j]) for i in range(m) for j in range(m) if i != j)
    sy = sum(k(y[i], y[j]) for i in range(n) for j in range(n) if i != j)
    sc = sum(k(x[i], y[j]) for i in range(m) for j in range(n))
    return sx / (m * (m - 1)) + sy / (n * (n - 1)) - 2.0 * sc / (m * n)


def lstm_step_scalar_oracle(params, x, h_prev, c_prev):
    """Straightforward per-element LSTM recurrence used as a forward oracle."""

    def sig(v):
        return 1.0 / (1.0 + math.exp(-v))

    batch, hidden = h_prev.shape
    h_out = np.zeros_like(h_prev)
    c_out = np.zeros_like(c_prev)
    for b in range(batch):
        z = np.concatenate([x[b], h_prev[b]])
        for j in range(hidden):
            a_i = float(z @ params.w["input"].data[:, j] + params.b["input"].data[j])
            a_f = float(z @ params.w["forget"].data[:, j] + params.b["forget"].data[j])
            a_o = float(z @ params.w["output"].data[:, j] + params.b["output"].data[j])
            a_g = float(z @ params.w["cell"].data[:, j] + params.b["cell"].data[j])
            c_out[b, j] = sig(a_f) * c_prev[b, j] + sig(a_i) * math.tanh(a_g)
            h_out[b, j] = sig(a_o) * math.tanh(c_out[b, j])
    return h_out, c_out


def central_difference_check(params, loss_fn, n_probes=100, h=1e-5, seed=0):
    """Compare analytic gradients against central differences.

    loss_fn() rebuilds the graph from the current parameter data and returns
    the loss tensor.  Returns the fraction of probed coordinates whose
    analytic gradient matches within max(1e-4, 1e-3 * |g|).
    """
    loss = loss_fn()
    for p in params:
        p.zero_grad()
    loss.backward()
    grads = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
             for p in params]
    rng = np.random.default_rng(seed)
    flat_sizes = [p.data.size for p in params]
    total = sum(flat_sizes)
    ok = 0
    probes = min(n_probes, total)
    coords = rng.choice(total, size=probes, replace=False)
    for flat_idx in coords:
        pi = 0
        while flat_idx >= flat_sizes[pi]:
            flat_idx -= flat_sizes[pi]
            pi += 1
        p = params[pi]
        idx = np.unravel_index(flat_idx, p.data.shape)
        orig = p.data[idx]
        with ad.no_grad():
            p.data[idx] = orig + h
            f_plus = float(loss_fn().data)
            p.data[idx] = orig - h
            f_minus = float(loss_fn().data)
        p.data[idx] = orig
        fd = (f_plus - f_minus) / (2.0 * h)
        g = grads[pi][idx]
        if abs(g - fd) <= max(1e-4, 1e-3 * abs(g)):
            ok += 1
    return ok / probes
